//! Planar vector helpers used by the linkage solvers.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// A point or free vector in the plane, in meters unless stated otherwise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at angle `angle` from the +x axis.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn normalized(self) -> Self {
        self * (1.0 / self.norm())
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Signed angle that rotates direction `from` onto direction `to`, in (-pi, pi].
pub fn signed_angle(from: Vec2, to: Vec2) -> f64 {
    from.cross(to).atan2(from.dot(to))
}

/// Unsigned angle between two directions, in [0, pi].
pub fn unsigned_angle(a: Vec2, b: Vec2) -> f64 {
    signed_angle(a, b).abs()
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// Intersections of circle (`c1`, `r1`) with circle (`c2`, `r2`).
///
/// Returns `[plus, minus]`, where `plus` lies to the left of the directed line
/// `c1 -> c2` (positive `cross(c2 - c1, p - c1)`). At tangency the two entries are
/// identical. Returns `None` when the circles do not meet; `rel_tol` widens the
/// triangle-inequality test relative to the radii involved.
pub fn circle_intersections(c1: Vec2, r1: f64, c2: Vec2, r2: f64, rel_tol: f64) -> Option<[Vec2; 2]> {
    let d_vec = c2 - c1;
    let d = d_vec.norm();
    if d == 0.0 {
        return None;
    }
    let scale = r1 + r2 + d;
    let tol = rel_tol * scale;
    if d > r1 + r2 + tol || d < (r1 - r2).abs() - tol {
        return None;
    }
    let e = d_vec * (1.0 / d);
    let a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
    let h_sq = r1 * r1 - a * a;
    // Rounding leaves h_sq ~ eps * r1^2 at exact tangency; snap it to zero.
    let h = if h_sq > 16.0 * f64::EPSILON * r1 * r1 { h_sq.sqrt() } else { 0.0 };
    let base = c1 + e * a;
    let n = e.perp();
    Some([base + n * h, base - n * h])
}
