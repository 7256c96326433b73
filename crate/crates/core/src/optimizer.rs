//! Constrained Bayesian optimization.
//!
//! The loop evaluates a Latin-hypercube design, then repeatedly fits one
//! surrogate for the objective and one per constraint, maximizes constrained
//! expected improvement and evaluates the proposal until the budget is spent.
//! Anything implementing [`Problem`] can be optimized; [`MechanismProblem`]
//! wraps the linkage pipeline and [`SphereProblem`] is a small analytic testbed.

use crate::constraints::DesignEvaluator;
use crate::error::{Error, Result};
use crate::gp::{gp_fit, GpModel, Kernel};
use crate::model::{ConstraintBundle, DesignParams, EvaluationRecord, MechanismConfig, MotionTask};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Axis-aligned search box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "bounds dimension mismatch");
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.hi[k] - self.lo[k]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(k, v)| *v >= self.lo[k] && *v <= self.hi[k])
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(k, v)| self.lo[k] + v * self.width(k)).collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(k, v)| (v - self.lo[k]) / self.width(k)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub bounds: Bounds,
    pub n_init: usize,
    pub n_max: usize,
    pub n_acq_starts: usize,
    pub n_acq_samples: usize,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn default_with_bounds(bounds: Bounds) -> Self {
        Self { bounds, n_init: 12, n_max: 60, n_acq_starts: 32, n_acq_samples: 4096, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init < 4 {
            return Err(Error::validation("optimizer.n_init", "must be at least 4"));
        }
        if self.n_max <= self.n_init {
            return Err(Error::validation("optimizer.n_max", "must exceed n_init"));
        }
        if self.n_acq_samples == 0 {
            return Err(Error::validation("optimizer.n_acq_samples", "must be positive"));
        }
        for k in 0..self.bounds.dim() {
            let (lo, hi) = (self.bounds.lo[k], self.bounds.hi[k]);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::validation("optimizer.bounds", format!("need lo < hi in dimension {k}")));
            }
        }
        Ok(())
    }
}

/// Latin hypercube sample of `n` points: one point per stratum in every dimension.
pub fn latin_hypercube(n: usize, bounds: &Bounds, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; bounds.dim()]; n];
    for k in 0..bounds.dim() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (point, stratum) in points.iter_mut().zip(strata) {
            let u = (stratum as f64 + rng.gen::<f64>()) / n as f64;
            point[k] = bounds.lo[k] + u * bounds.width(k);
        }
    }
    points
}

/// Outcome of evaluating one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// Objective in natural units; present only when the point was fully evaluated.
    pub objective: Option<f64>,
    /// Constraint values (feasible when `<= 0`); `None` when not computable.
    pub constraints: Vec<Option<f64>>,
    pub feasible: bool,
}

impl Observation {
    /// Feasible with a known objective, i.e. eligible as the incumbent.
    pub fn scored(&self) -> Option<f64> {
        self.objective.filter(|_| self.feasible)
    }
}

/// A black-box constrained minimization problem over a box.
pub trait Problem {
    fn bounds(&self) -> &Bounds;
    fn n_constraints(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> Observation;
    /// Model the logarithm of the objective instead of the raw value.
    fn log_objective(&self) -> bool {
        false
    }
}

/// The linkage synthesis problem: minimize RMS torque subject to both static
/// gaps and the dynamic constraint.
pub struct MechanismProblem {
    evaluator: DesignEvaluator,
    bounds: Bounds,
}

impl MechanismProblem {
    pub fn new(cfg: &MechanismConfig, task: &MotionTask, bounds: Bounds) -> Result<Self> {
        Ok(Self { evaluator: DesignEvaluator::new(cfg, task)?, bounds })
    }

    pub fn evaluator(&self) -> &DesignEvaluator {
        &self.evaluator
    }
}

pub fn record_observation(record: &EvaluationRecord) -> Observation {
    let c = &record.constraints;
    Observation {
        objective: record.objective,
        constraints: vec![Some(c.c_static_i), Some(c.c_static_e), c.c_dyn],
        feasible: c.feasible,
    }
}

impl Problem for MechanismProblem {
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn n_constraints(&self) -> usize {
        3
    }

    fn evaluate(&self, x: &[f64]) -> Observation {
        let design = DesignParams::from_array([x[0], x[1], x[2]]);
        record_observation(&self.evaluator.evaluate(&design))
    }

    fn log_objective(&self) -> bool {
        true
    }
}

/// Minimize `|x|^2` on `[-1, 1]^d` subject to `r - |x| <= 0`; optimum `r^2`.
pub struct SphereProblem {
    pub bounds: Bounds,
    pub radius: f64,
}

impl SphereProblem {
    pub fn new(dim: usize, radius: f64) -> Self {
        Self { bounds: Bounds::new(vec![-1.0; dim], vec![1.0; dim]), radius }
    }
}

impl Problem for SphereProblem {
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn n_constraints(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &[f64]) -> Observation {
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let c = self.radius - sq.sqrt();
        Observation { objective: Some(sq), constraints: vec![Some(c)], feasible: c <= 0.0 }
    }
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn ln_norm_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// `ln Phi(z)`, accurate far into the lower tail.
fn ln_norm_cdf(z: f64) -> f64 {
    if z > -30.0 {
        norm_cdf(z).ln()
    } else {
        ln_norm_pdf(z) - (-z).ln() + (1.0 - 1.0 / (z * z)).ln()
    }
}

/// `ln(z Phi(z) + phi(z))`, the scaled expected improvement.
fn ln_ei_factor(z: f64) -> f64 {
    if z > -20.0 {
        (z * norm_cdf(z) + norm_pdf(z)).max(f64::MIN_POSITIVE).ln()
    } else {
        ln_norm_pdf(z) - 2.0 * (-z).ln()
    }
}

/// Log of the probability that a constraint with posterior `(mu, var)` is satisfied.
fn ln_feasibility(mu: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return if mu <= 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_norm_cdf(-mu / var.sqrt())
}

/// Log of the expected improvement below `f_best`.
fn ln_ei(mu: f64, var: f64, f_best: f64) -> f64 {
    if var <= 0.0 {
        let gain = f_best - mu;
        return if gain > 0.0 { gain.ln() } else { f64::NEG_INFINITY };
    }
    let sigma = var.sqrt();
    sigma.ln() + ln_ei_factor((f_best - mu) / sigma)
}

/// Surrogates fitted to the current trace.
#[derive(Clone, Debug)]
pub struct Surrogates {
    /// Objective model, present once at least two scored points exist.
    pub objective: Option<GpModel>,
    /// One model per constraint; `None` with fewer than two observations.
    pub constraints: Vec<Option<GpModel>>,
    /// Best scored objective, in the modeled (possibly log) scale.
    pub f_best: Option<f64>,
}

impl Surrogates {
    /// Log of the constrained expected improvement at `x`.
    pub fn ln_acquisition(&self, x: &[f64]) -> f64 {
        let mut value: f64 = self
            .constraints
            .iter()
            .flatten()
            .map(|m| {
                let (mu, var) = m.predict(x);
                ln_feasibility(mu, var)
            })
            .sum();
        if let (Some(model), Some(f_best)) = (&self.objective, self.f_best) {
            if value > f64::NEG_INFINITY {
                let (mu, var) = model.predict(x);
                value += ln_ei(mu, var, f_best);
            }
        }
        value
    }

    /// Constrained expected improvement at `x`.
    pub fn acquisition(&self, x: &[f64]) -> f64 {
        self.ln_acquisition(x).exp()
    }
}

/// Constrained expected improvement from explicit posteriors: EI times the
/// product of feasibility probabilities, or the product alone without `f_best`.
pub fn constrained_ei(objective: (f64, f64), constraints: &[(f64, f64)], f_best: Option<f64>) -> f64 {
    let mut value: f64 = constraints.iter().map(|&(mu, var)| ln_feasibility(mu, var)).sum();
    if let Some(f_best) = f_best {
        value += ln_ei(objective.0, objective.1, f_best);
    }
    value.exp()
}

/// Hyperparameters of the surrogates fitted at one iteration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurrogateSnapshot {
    pub iter: usize,
    pub objective: Option<Kernel>,
    pub constraints: Vec<Option<Kernel>>,
}

/// One evaluated point of the trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub x: Vec<f64>,
    pub observation: Observation,
    /// Acquisition value at proposal; `None` for the initial design.
    pub acq: Option<f64>,
    /// Best scored objective up to and including this entry.
    pub best_so_far: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct OptimizationTrace {
    pub entries: Vec<TraceEntry>,
    pub best_feasible: Option<(Vec<f64>, f64)>,
    pub surrogates: Vec<SurrogateSnapshot>,
}

impl OptimizationTrace {
    /// No feasible point was found within the budget.
    pub fn no_feasible_found(&self) -> bool {
        self.best_feasible.is_none()
    }

    fn push(&mut self, x: Vec<f64>, observation: Observation, acq: Option<f64>) {
        if let Some(f) = observation.scored() {
            if self.best_feasible.as_ref().map_or(true, |(_, b)| f < *b) {
                self.best_feasible = Some((x.clone(), f));
            }
        }
        let iter = self.entries.len();
        let best_so_far = self.best_feasible.as_ref().map(|b| b.1);
        self.entries.push(TraceEntry { iter, x, observation, acq, best_so_far });
    }

    /// Mechanism records, for traces of a [`MechanismProblem`].
    pub fn records(&self) -> Vec<EvaluationRecord> {
        self.entries
            .iter()
            .map(|e| {
                let c = &e.observation.constraints;
                EvaluationRecord {
                    design: DesignParams::from_array([e.x[0], e.x[1], e.x[2]]),
                    constraints: ConstraintBundle::new(
                        c[0].unwrap_or(f64::NAN),
                        c[1].unwrap_or(f64::NAN),
                        c[2],
                    ),
                    objective: e.observation.objective,
                    torque_profile_path: None,
                }
            })
            .collect()
    }
}

fn mix_seed(seed: u64, iter: usize, stream: u64) -> u64 {
    seed ^ (iter as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Fits the objective and constraint surrogates to the evaluated entries.
pub fn fit_surrogates(entries: &[TraceEntry], bounds: &Bounds, log_objective: bool, seed: u64) -> Result<Surrogates> {
    let transform = |f: f64| if log_objective { f.ln() } else { f };
    let scored: Vec<(Vec<f64>, f64)> = entries
        .iter()
        .filter_map(|e| e.observation.scored().map(|f| (e.x.clone(), transform(f))))
        .filter(|(_, f)| f.is_finite())
        .collect();
    let f_best = scored.iter().map(|p| p.1).reduce(f64::min);
    let objective = if scored.len() >= 2 { Some(gp_fit(&scored, bounds, seed)?) } else { None };

    let n_constraints = entries.first().map_or(0, |e| e.observation.constraints.len());
    let mut constraints = Vec::with_capacity(n_constraints);
    for j in 0..n_constraints {
        let data: Vec<(Vec<f64>, f64)> = entries
            .iter()
            .filter_map(|e| e.observation.constraints[j].map(|c| (e.x.clone(), c)))
            .filter(|(_, c)| c.is_finite())
            .collect();
        let model = if data.len() >= 2 { Some(gp_fit(&data, bounds, seed.wrapping_add(j as u64 + 1))?) } else { None };
        constraints.push(model);
    }
    Ok(Surrogates { objective, constraints, f_best })
}

const PATTERN_STEP: f64 = 0.1;
const PATTERN_MIN_STEP: f64 = 1e-4;
const REPEAT_TOL: f64 = 1e-9;
const REPEAT_PERTURBATION: f64 = 1e-6;

/// Derivative-free coordinate pattern ascent in the unit cube.
fn pattern_ascent(f: &impl Fn(&[f64]) -> f64, start: Vec<f64>, start_value: f64) -> (Vec<f64>, f64) {
    let mut x = start;
    let mut fx = start_value;
    let mut step = PATTERN_STEP;
    while step >= PATTERN_MIN_STEP {
        let mut best: Option<(Vec<f64>, f64)> = None;
        for k in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut trial = x.clone();
                trial[k] = (trial[k] + dir * step).clamp(0.0, 1.0);
                if trial[k] == x[k] {
                    continue;
                }
                let ft = f(&trial);
                if ft > fx && best.as_ref().map_or(true, |b| ft > b.1) {
                    best = Some((trial, ft));
                }
            }
        }
        match best {
            Some((bx, bf)) => {
                x = bx;
                fx = bf;
            }
            None => step *= 0.5,
        }
    }
    (x, fx)
}

/// Maximizes the acquisition over the box and returns `(x, acquisition)`.
///
/// `evaluated` holds every point already in the trace; the result never
/// coincides with one of them.
pub fn propose_next(evaluated: &[Vec<f64>], surrogates: &Surrogates, opt: &OptimizerConfig, seed: u64) -> (Vec<f64>, f64) {
    let bounds = &opt.bounds;
    let dim = bounds.dim();
    let f = |u: &[f64]| surrogates.ln_acquisition(&bounds.from_unit(u));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut probes: Vec<(Vec<f64>, f64)> = (0..opt.n_acq_samples)
        .map(|_| {
            let u: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
            let v = f(&u);
            (u, v)
        })
        .collect();
    // Stable sort keeps the probe order among ties, so the result is reproducible.
    probes.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut best = probes[0].clone();
    for (u, v) in probes.into_iter().take(opt.n_acq_starts) {
        let (ru, rv) = pattern_ascent(&f, u, v);
        if rv > best.1 {
            best = (ru, rv);
        }
    }

    let evaluated_unit: Vec<Vec<f64>> = evaluated.iter().map(|x| bounds.to_unit(x)).collect();
    let is_repeat = |u: &[f64]| {
        evaluated_unit.iter().any(|e| e.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() < REPEAT_TOL)
    };
    if is_repeat(&best.0) {
        let mut candidates = Vec::new();
        for k in 0..dim {
            for dir in [1.0, -1.0] {
                let mut u = best.0.clone();
                u[k] += dir * REPEAT_PERTURBATION;
                if (0.0..=1.0).contains(&u[k]) && !is_repeat(&u) {
                    let v = f(&u);
                    candidates.push((u, v));
                }
            }
        }
        if let Some(c) = candidates.into_iter().reduce(|a, b| if b.1 > a.1 { b } else { a }) {
            best = c;
        }
    }
    let x = bounds.from_unit(&best.0);
    (x, best.1.exp())
}

/// Runs the budgeted constrained Bayesian optimization on any problem.
pub fn optimize_problem(problem: &impl Problem, opt: &OptimizerConfig) -> Result<OptimizationTrace> {
    opt.validate()?;
    if opt.bounds != *problem.bounds() {
        return Err(Error::validation("optimizer.bounds", "do not match the problem box"));
    }
    let mut trace = OptimizationTrace { entries: Vec::new(), best_feasible: None, surrogates: Vec::new() };
    for x in latin_hypercube(opt.n_init, &opt.bounds, opt.seed) {
        let obs = problem.evaluate(&x);
        trace.push(x, obs, None);
    }
    while trace.entries.len() < opt.n_max {
        let iter = trace.entries.len();
        let surrogates = fit_surrogates(&trace.entries, &opt.bounds, problem.log_objective(), mix_seed(opt.seed, iter, 1))?;
        trace.surrogates.push(SurrogateSnapshot {
            iter,
            objective: surrogates.objective.as_ref().map(|m| m.kernel.clone()),
            constraints: surrogates.constraints.iter().map(|m| m.as_ref().map(|m| m.kernel.clone())).collect(),
        });
        let evaluated: Vec<Vec<f64>> = trace.entries.iter().map(|e| e.x.clone()).collect();
        let (x, acq) = propose_next(&evaluated, &surrogates, opt, mix_seed(opt.seed, iter, 2));
        let obs = problem.evaluate(&x);
        trace.push(x, obs, Some(acq));
    }
    Ok(trace)
}

/// Optimizes the linkage design over the configured box.
pub fn run_optimization(cfg: &MechanismConfig, task: &MotionTask, opt: &OptimizerConfig) -> Result<OptimizationTrace> {
    let problem = MechanismProblem::new(cfg, task, opt.bounds.clone())?;
    optimize_problem(&problem, opt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Normalizer;

    fn cube(d: usize) -> Bounds {
        Bounds::new(vec![0.0; d], vec![1.0; d])
    }

    #[test]
    fn lhs_one_point_per_stratum() {
        for n in [1, 4, 7, 12] {
            let pts = latin_hypercube(n, &cube(3), 5);
            assert_eq!(pts.len(), n);
            for k in 0..3 {
                let mut strata: Vec<usize> = pts.iter().map(|p| (p[k] * n as f64).floor() as usize).collect();
                strata.sort();
                assert_eq!(strata, (0..n).collect::<Vec<_>>());
            }
        }
        assert_eq!(latin_hypercube(6, &cube(3), 9), latin_hypercube(6, &cube(3), 9));
        assert_ne!(latin_hypercube(6, &cube(3), 9), latin_hypercube(6, &cube(3), 10));
    }

    #[test]
    fn lhs_respects_bounds() {
        let b = Bounds::new(vec![0.03, 0.15, 0.08], vec![0.14, 0.34, 0.25]);
        for p in latin_hypercube(12, &b, 0) {
            assert!(b.contains(&p));
        }
    }

    #[test]
    fn cei_closed_forms() {
        let v = constrained_ei((1.0, 1.0), &[(0.0, 1.0)], Some(1.0));
        assert!((v - 0.199471140200716).abs() < 1e-12, "{v}");
        assert!((constrained_ei((1.0, 1.0), &[], Some(1.0)) - 0.398942280401433).abs() < 1e-12);
        assert_eq!(constrained_ei((2.0, 0.0), &[], Some(1.0)), 0.0);
        assert_eq!(constrained_ei((1.0, 0.0), &[], Some(1.0)), 0.0);
        assert!((constrained_ei((0.25, 0.0), &[], Some(1.0)) - 0.75).abs() < 1e-15);
        assert!(constrained_ei((0.0, 1.0), &[(1e6, 1.0)], Some(1.0)) == 0.0);
        assert!((constrained_ei((0.0, 1.0), &[(0.0, 1.0), (0.0, 4.0)], None) - 0.25).abs() < 1e-15);
        assert_eq!(constrained_ei((0.0, 1.0), &[(0.1, 0.0)], None), 0.0);
        assert_eq!(constrained_ei((0.0, 1.0), &[(-0.1, 0.0)], None), 1.0);
    }

    #[test]
    fn log_tails_are_continuous() {
        for z in [-30.0f64, -20.0] {
            let below = ln_norm_cdf(z - 1e-9);
            let above = ln_norm_cdf(z + 1e-9);
            assert!((below - above).abs() < 1e-3 * above.abs(), "{z}: {below} {above}");
            let below = ln_ei_factor(z - 1e-9);
            let above = ln_ei_factor(z + 1e-9);
            assert!((below - above).abs() < 1e-2 * above.abs(), "{z}: {below} {above}");
        }
        assert!(ln_norm_cdf(-100.0).is_finite());
    }

    fn half_box_surrogates() -> Surrogates {
        // Constraint positive for x0 < 0.5 and negative above.
        let pts: Vec<(Vec<f64>, f64)> = (0..6)
            .flat_map(|i| {
                (0..3).map(move |j| {
                    let x = vec![i as f64 / 5.0, j as f64 / 2.0];
                    let c = 0.5 - x[0];
                    (x, c)
                })
            })
            .collect();
        let model = gp_fit(&pts, &cube(2), 1).unwrap();
        Surrogates { objective: None, constraints: vec![Some(model)], f_best: None }
    }

    fn small_opt(d: usize) -> OptimizerConfig {
        OptimizerConfig { n_acq_samples: 512, n_acq_starts: 8, ..OptimizerConfig::default_with_bounds(cube(d)) }
    }

    #[test]
    fn proposal_lands_in_feasible_half() {
        let s = half_box_surrogates();
        let (x, acq) = propose_next(&[], &s, &small_opt(2), 3);
        assert!(x[0] > 0.5, "{x:?}");
        assert!(acq > 0.5);
    }

    #[test]
    fn proposal_is_deterministic_and_in_bounds() {
        let s = half_box_surrogates();
        let a = propose_next(&[], &s, &small_opt(2), 11);
        let b = propose_next(&[], &s, &small_opt(2), 11);
        assert_eq!(a.0, b.0);
        assert!(cube(2).contains(&a.0));
    }

    #[test]
    fn proposal_never_repeats() {
        // A constant model makes every point equally good, so the argmax is the
        // first probe; declare that point evaluated and expect a perturbation.
        let constant = GpModel::with_kernel(
            vec![vec![0.2], vec![0.8]],
            vec![0.0, 0.0],
            Kernel { signal_variance: 1e-30, lengthscales: vec![1.0], noise_variance: 0.0 },
            Normalizer { bounds: cube(1), y_mean: -1.0, y_std: 1.0 },
        )
        .unwrap();
        let s = Surrogates { objective: None, constraints: vec![Some(constant)], f_best: None };
        let opt = small_opt(1);
        let (first, _) = propose_next(&[], &s, &opt, 4);
        let (second, _) = propose_next(&[first.clone()], &s, &opt, 4);
        assert_ne!(first, second);
        assert!((first[0] - second[0]).abs() <= 1.01e-6);
    }

    #[test]
    fn sphere_testbed_evaluation() {
        let p = SphereProblem::new(3, 0.5);
        let o = p.evaluate(&[0.3, 0.4, 0.0]);
        assert!(o.feasible);
        assert!((o.objective.unwrap() - 0.25).abs() < 1e-15);
        assert!(!p.evaluate(&[0.1, 0.0, 0.0]).feasible);
    }

    #[test]
    fn config_validation() {
        let mut o = OptimizerConfig::default_with_bounds(cube(3));
        assert!(o.validate().is_ok());
        o.n_init = 3;
        assert!(o.validate().is_err());
        let mut o = OptimizerConfig::default_with_bounds(cube(3));
        o.n_max = 12;
        assert!(o.validate().is_err());
        let o = OptimizerConfig::default_with_bounds(Bounds::new(vec![0.0, 1.0], vec![1.0, 1.0]));
        assert!(o.validate().is_err());
    }

    #[test]
    fn budget_equal_to_init_is_rejected_and_no_feasible_is_flagged() {
        struct Hopeless(Bounds);
        impl Problem for Hopeless {
            fn bounds(&self) -> &Bounds {
                &self.0
            }
            fn n_constraints(&self) -> usize {
                1
            }
            fn evaluate(&self, x: &[f64]) -> Observation {
                Observation { objective: None, constraints: vec![Some(1.0 + x[0])], feasible: false }
            }
        }
        let p = Hopeless(cube(2));
        let mut opt = small_opt(2);
        opt.n_init = 4;
        opt.n_max = 4;
        assert!(optimize_problem(&p, &opt).is_err());
        opt.n_max = 6;
        let trace = optimize_problem(&p, &opt).unwrap();
        assert_eq!(trace.entries.len(), 6);
        assert!(trace.no_feasible_found());
        assert!(trace.entries.iter().all(|e| e.best_so_far.is_none()));
    }

    #[test]
    fn certain_constraints_reduce_to_plain_ei() {
        struct Bowl {
            bounds: Bounds,
            with_constraint: bool,
        }
        impl Problem for Bowl {
            fn bounds(&self) -> &Bounds {
                &self.bounds
            }
            fn n_constraints(&self) -> usize {
                usize::from(self.with_constraint)
            }
            fn evaluate(&self, x: &[f64]) -> Observation {
                let f = (x[0] - 0.3).powi(2) + (x[1] + 0.2).powi(2);
                let constraints = if self.with_constraint { vec![Some(-1.0)] } else { vec![] };
                Observation { objective: Some(f), constraints, feasible: true }
            }
        }
        let bounds = Bounds::new(vec![-1.0; 2], vec![1.0; 2]);
        let mut opt = small_opt(2);
        opt.bounds = bounds.clone();
        opt.n_init = 5;
        opt.n_max = 12;
        let plain = optimize_problem(&Bowl { bounds: bounds.clone(), with_constraint: false }, &opt).unwrap();
        let gated = optimize_problem(&Bowl { bounds, with_constraint: true }, &opt).unwrap();
        let xs = |t: &OptimizationTrace| t.entries.iter().map(|e| e.x.clone()).collect::<Vec<_>>();
        assert_eq!(xs(&plain), xs(&gated));
        let best = plain.best_feasible.unwrap().1;
        assert!(best < 0.02, "{best}");
    }

    #[test]
    fn best_so_far_is_monotone_and_points_in_bounds() {
        let p = SphereProblem::new(2, 0.5);
        let mut opt = small_opt(2);
        opt.bounds = p.bounds.clone();
        opt.n_init = 6;
        opt.n_max = 14;
        let trace = optimize_problem(&p, &opt).unwrap();
        let mut prev = f64::INFINITY;
        for e in &trace.entries {
            assert!(p.bounds.contains(&e.x));
            if let Some(b) = e.best_so_far {
                assert!(b <= prev);
                prev = b;
            }
        }
        assert_eq!(trace.surrogates.len(), 8);
    }
}
