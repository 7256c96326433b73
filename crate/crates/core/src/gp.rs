//! Gaussian-process regression with a Matérn-5/2 ARD kernel.
//!
//! Inputs are mapped to the unit cube of the search box and targets are
//! standardized before fitting; predictions are returned in original units.
//! Hyperparameters (signal variance, one lengthscale per input, noise variance)
//! are fitted in log space by maximizing the log marginal likelihood from
//! several seeded starting points.

use crate::error::{Error, Result};
use crate::optimizer::Bounds;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const SQRT5: f64 = 2.23606797749979;

/// Jitter added to the diagonal, in order, until the factorization succeeds.
const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Log-space box of the hyperparameters (standardized units).
const LOG_SIGNAL_RANGE: (f64, f64) = (-6.9, 4.6);
const LOG_LENGTH_RANGE: (f64, f64) = (-4.6, 3.0);
const LOG_NOISE_RANGE: (f64, f64) = (-18.4, 0.0);

pub const FIT_STARTS: usize = 8;
pub const FIT_MAX_ITERS: usize = 200;
pub const FIT_GRAD_TOL: f64 = 1e-6;

/// Matérn-5/2 correlation at scaled distance `r`.
pub fn matern52(r: f64) -> f64 {
    let s = SQRT5 * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl Kernel {
    fn scaled_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((x, y), l)| {
                let d = (x - y) / l;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Signal covariance, without noise.
    pub fn covariance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.signal_variance * matern52(self.scaled_distance(a, b))
    }

    fn to_log_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.lengthscales.len() + 2);
        p.push(self.signal_variance.ln());
        p.extend(self.lengthscales.iter().map(|l| l.ln()));
        p.push(self.noise_variance.ln());
        p
    }

    fn from_log_params(p: &[f64]) -> Self {
        let d = p.len() - 2;
        Self {
            signal_variance: p[0].exp(),
            lengthscales: p[1..=d].iter().map(|v| v.exp()).collect(),
            noise_variance: p[d + 1].exp(),
        }
    }
}

/// Maps inputs to the unit cube and targets to zero mean, unit spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub bounds: Bounds,
    pub y_mean: f64,
    pub y_std: f64,
}

impl Normalizer {
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| (v - self.bounds.lo[k]) / (self.bounds.hi[k] - self.bounds.lo[k]))
            .collect()
    }
}

/// A fitted, immutable GP posterior.
#[derive(Clone, Debug)]
pub struct GpModel {
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<f64>,
    pub kernel: Kernel,
    pub normalizer: Normalizer,
    /// All training targets were equal; the model is the constant mean.
    pub degenerate: bool,
    pub jitter: f64,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
}

fn gram(x: &[Vec<f64>], kernel: &Kernel, diag: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = kernel.signal_variance + diag;
        for j in 0..i {
            let v = kernel.covariance(&x[i], &x[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn factorize(x: &[Vec<f64>], kernel: &Kernel) -> Option<(Cholesky<f64, Dyn>, f64)> {
    JITTER_LADDER.iter().find_map(|&jitter| {
        Cholesky::new(gram(x, kernel, kernel.noise_variance + jitter)).map(|c| (c, jitter))
    })
}

impl GpModel {
    /// Posterior for fixed hyperparameters. `train_x` is in the unit cube and
    /// `train_y` standardized.
    pub fn with_kernel(
        train_x: Vec<Vec<f64>>,
        train_y: Vec<f64>,
        kernel: Kernel,
        normalizer: Normalizer,
    ) -> Result<Self> {
        let (chol, jitter) = factorize(&train_x, &kernel)
            .ok_or_else(|| Error::Surrogate("kernel matrix is not positive definite".into()))?;
        let alpha = chol.solve(&DVector::from_column_slice(&train_y));
        Ok(Self { train_x, train_y, kernel, normalizer, degenerate: false, jitter, chol: Some(chol), alpha })
    }

    fn constant(train_x: Vec<Vec<f64>>, train_y: Vec<f64>, normalizer: Normalizer) -> Self {
        let d = normalizer.bounds.dim();
        let n = train_y.len();
        Self {
            train_x,
            train_y,
            kernel: Kernel { signal_variance: 0.0, lengthscales: vec![1.0; d], noise_variance: 0.0 },
            normalizer,
            degenerate: true,
            jitter: 0.0,
            chol: None,
            alpha: DVector::zeros(n),
        }
    }

    /// Posterior mean and variance at a unit-cube point, in standardized units.
    pub fn predict_standardized(&self, u: &[f64]) -> (f64, f64) {
        let Some(chol) = &self.chol else {
            return (0.0, 0.0);
        };
        let k_star = DVector::from_iterator(
            self.train_x.len(),
            self.train_x.iter().map(|x| self.kernel.covariance(u, x)),
        );
        let mean = k_star.dot(&self.alpha);
        let mut v = k_star;
        chol.l_dirty().solve_lower_triangular_mut(&mut v);
        let var = self.kernel.signal_variance - v.norm_squared();
        (mean, var.max(0.0))
    }

    /// Posterior mean and variance in original units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = self.predict_standardized(&self.normalizer.to_unit(x));
        let s = self.normalizer.y_std;
        (self.normalizer.y_mean + s * m, v * s * s)
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let Some(chol) = &self.chol else {
            return 0.0;
        };
        let y = DVector::from_column_slice(&self.train_y);
        let n = self.train_y.len() as f64;
        -0.5 * y.dot(&self.alpha) - 0.5 * chol.ln_determinant() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Log marginal likelihood and its gradient with respect to the log hyperparameters.
fn lml_and_grad(x: &[Vec<f64>], y: &DVector<f64>, log_params: &[f64]) -> Option<(f64, Vec<f64>)> {
    let kernel = Kernel::from_log_params(log_params);
    let n = x.len();
    let dim = kernel.lengthscales.len();
    let (chol, _) = factorize(x, &kernel)?;
    let alpha = chol.solve(y);
    let lml = -0.5 * y.dot(&alpha) - 0.5 * chol.ln_determinant() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // W = alpha alpha^T - K^-1; dLML/dp = tr(W dK/dp) / 2.
    let mut w = chol.inverse();
    w.neg_mut();
    w.ger(1.0, &alpha, &alpha, 1.0);

    let mut grad = vec![0.0; dim + 2];
    let sf2 = kernel.signal_variance;
    for i in 0..n {
        grad[0] += 0.5 * w[(i, i)] * sf2;
        grad[dim + 1] += 0.5 * w[(i, i)] * kernel.noise_variance;
        for j in 0..i {
            let r = kernel.scaled_distance(&x[i], &x[j]);
            let s = SQRT5 * r;
            let e = (-s).exp();
            let k = sf2 * (1.0 + s + s * s / 3.0) * e;
            // d k / d log(l_d) = sf2 * 5/3 (1 + sqrt5 r) e^{-sqrt5 r} (dx_d / l_d)^2
            let common = sf2 * 5.0 / 3.0 * (1.0 + s) * e;
            let wij = w[(i, j)];
            grad[0] += wij * k;
            for d in 0..dim {
                let dx = (x[i][d] - x[j][d]) / kernel.lengthscales[d];
                grad[1 + d] += wij * common * dx * dx;
            }
        }
    }
    Some((lml, grad))
}

fn param_box(dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![LOG_SIGNAL_RANGE.0];
    let mut hi = vec![LOG_SIGNAL_RANGE.1];
    lo.extend(std::iter::repeat(LOG_LENGTH_RANGE.0).take(dim));
    hi.extend(std::iter::repeat(LOG_LENGTH_RANGE.1).take(dim));
    lo.push(LOG_NOISE_RANGE.0);
    hi.push(LOG_NOISE_RANGE.1);
    (lo, hi)
}

fn project(p: &mut [f64], lo: &[f64], hi: &[f64]) {
    for k in 0..p.len() {
        p[k] = p[k].clamp(lo[k], hi[k]);
    }
}

/// Gradient with components that push into an active bound removed.
fn projected_gradient(p: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    (0..p.len())
        .map(|k| {
            if (p[k] <= lo[k] && g[k] < 0.0) || (p[k] >= hi[k] && g[k] > 0.0) {
                0.0
            } else {
                g[k]
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Box-constrained limited-memory BFGS ascent of the log marginal likelihood.
fn ascend(x: &[Vec<f64>], y: &DVector<f64>, start: Vec<f64>, lo: &[f64], hi: &[f64]) -> Option<(f64, Vec<f64>)> {
    const MEMORY: usize = 6;
    let mut p = start;
    project(&mut p, lo, hi);
    let (mut f, mut g) = lml_and_grad(x, y, &p)?;
    let mut history: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();

    for _ in 0..FIT_MAX_ITERS {
        let pg = projected_gradient(&p, &g, lo, hi);
        if dot(&pg, &pg).sqrt() < FIT_GRAD_TOL {
            break;
        }
        // Two-loop recursion on the negated objective, restricted to free coordinates.
        let mut q: Vec<f64> = pg.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, yv) in history.iter().rev() {
            let rho = 1.0 / dot(yv, s);
            let a = rho * dot(s, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push((rho, a));
        }
        if let Some((s, yv)) = history.last() {
            let gamma = dot(s, yv) / dot(yv, yv);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, yv), (rho, a)) in history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(yv, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        for k in 0..dir.len() {
            if pg[k] == 0.0 {
                dir[k] = 0.0;
            }
        }
        if dot(&dir, &pg) <= 0.0 {
            dir = pg.clone();
            history.clear();
        }
        // Keep the first trial step moderate in log space.
        let norm = dot(&dir, &dir).sqrt();
        let mut step = if norm > 1.0 { 1.0 / norm } else { 1.0 };
        let slope = dot(&dir, &pg);
        let mut accepted = None;
        for _ in 0..30 {
            let mut trial: Vec<f64> = p.iter().zip(&dir).map(|(pi, di)| pi + step * di).collect();
            project(&mut trial, lo, hi);
            if let Some((ft, gt)) = lml_and_grad(x, y, &trial) {
                let moved: Vec<f64> = trial.iter().zip(&p).map(|(a, b)| a - b).collect();
                if ft >= f + 1e-4 * dot(&moved, &pg).min(step * slope) {
                    accepted = Some((trial, ft, gt, moved));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((trial, ft, gt, s)) = accepted else {
            break;
        };
        let yv: Vec<f64> = g.iter().zip(&gt).map(|(a, b)| a - b).collect();
        if dot(&s, &yv) > 1e-12 {
            history.push((s, yv));
            if history.len() > MEMORY {
                history.remove(0);
            }
        }
        let improved = ft - f;
        p = trial;
        f = ft;
        g = gt;
        if improved.abs() < 1e-12 * (1.0 + f.abs()) {
            break;
        }
    }
    Some((f, p))
}

/// Fits a GP to `(design vector, target)` pairs over the search box.
pub fn gp_fit(points: &[(Vec<f64>, f64)], bounds: &Bounds, seed: u64) -> Result<GpModel> {
    if points.len() < 2 {
        return Err(Error::Surrogate(format!("need at least 2 points, got {}", points.len())));
    }
    if points.iter().any(|(x, y)| !y.is_finite() || x.len() != bounds.dim() || x.iter().any(|v| !v.is_finite())) {
        return Err(Error::Surrogate("training data must be finite and match the box dimension".into()));
    }
    let n = points.len() as f64;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let y_std = (points.iter().map(|p| (p.1 - y_mean).powi(2)).sum::<f64>() / n).sqrt();
    let normalizer = Normalizer { bounds: bounds.clone(), y_mean, y_std };
    let train_x: Vec<Vec<f64>> = points.iter().map(|p| normalizer.to_unit(&p.0)).collect();

    if y_std <= 1e-12 * (1.0 + y_mean.abs()) {
        let train_y = vec![0.0; points.len()];
        return Ok(GpModel::constant(train_x, train_y, Normalizer { y_std: 1.0, ..normalizer }));
    }
    let train_y: Vec<f64> = points.iter().map(|p| (p.1 - y_mean) / y_std).collect();
    let y = DVector::from_column_slice(&train_y);

    let dim = bounds.dim();
    let (lo, hi) = param_box(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![Kernel { signal_variance: 1.0, lengthscales: vec![0.3; dim], noise_variance: 1e-4 }.to_log_params()];
    while starts.len() < FIT_STARTS {
        starts.push((0..dim + 2).map(|k| rng.gen_range(lo[k]..hi[k])).collect());
    }

    let run = |start: &Vec<f64>| ascend(&train_x, &y, start.clone(), &lo, &hi);
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        starts.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = starts.iter().map(run).collect();

    let best = results
        .into_iter()
        .flatten()
        .filter(|(f, _)| f.is_finite())
        .fold(None::<(f64, Vec<f64>)>, |acc, cur| match acc {
            Some(a) if a.0 >= cur.0 => Some(a),
            _ => Some(cur),
        })
        .ok_or_else(|| Error::Surrogate("hyperparameter fit failed from every start".into()))?;
    GpModel::with_kernel(train_x, train_y, Kernel::from_log_params(&best.1), normalizer)
}
