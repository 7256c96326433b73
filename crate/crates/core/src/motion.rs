//! Rest-to-rest motion law of the end effector.

use crate::model::MotionTask;

/// Normalized quintic `s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5` and its first two
/// derivatives with respect to `tau`.
pub fn quintic(tau: f64) -> (f64, f64, f64) {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let s = t3 * (10.0 + tau * (-15.0 + 6.0 * tau));
    let ds = 30.0 * t2 * (1.0 - tau) * (1.0 - tau);
    let dds = 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau);
    (s, ds, dds)
}

/// Normalized stroke progress at time `t`, with time derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrokePoint {
    pub t: f64,
    pub s: f64,
    pub s_dot: f64,
    pub s_ddot: f64,
}

impl StrokePoint {
    pub fn at(task: &MotionTask, t: f64) -> Self {
        let tau = (t / task.t_move).clamp(0.0, 1.0);
        let (s, ds, dds) = quintic(tau);
        Self { t, s, s_dot: ds / task.t_move, s_ddot: dds / (task.t_move * task.t_move) }
    }

    /// Effector state `(delta, delta_dot, delta_ddot)` on the forward stroke,
    /// which runs from `delta_e` (touch) to `delta_i` (compression).
    pub fn forward(&self, task: &MotionTask) -> (f64, f64, f64) {
        let span = task.delta_i - task.delta_e;
        (task.delta_e + self.s * span, self.s_dot * span, self.s_ddot * span)
    }

    /// Effector state on the return stroke, `delta_i` back to `delta_e`.
    pub fn backward(&self, task: &MotionTask) -> (f64, f64, f64) {
        let span = task.delta_e - task.delta_i;
        (task.delta_i + self.s * span, self.s_dot * span, self.s_ddot * span)
    }
}

/// Stroke table with `n_samples` points evenly spaced in time over `[0, t_move]`.
pub fn motion_profile(task: &MotionTask) -> Vec<StrokePoint> {
    let n = task.n_samples;
    (0..n)
        .map(|i| {
            let t = if i + 1 == n { task.t_move } else { task.t_move * i as f64 / (n - 1) as f64 };
            StrokePoint::at(task, t)
        })
        .collect()
}
