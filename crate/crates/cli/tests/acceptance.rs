//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use fourbar_synth::constraints::{dynamic_constraint, dynamic_constraint_from, DesignEvaluator};
use fourbar_synth::dynamics::torque_profile;
use fourbar_synth::geom::{wrap_angle, Vec2};
use fourbar_synth::gp::{gp_fit, matern52, GpModel, Kernel, Normalizer};
use fourbar_synth::kinematics::{kinematic_coefficients, kinematic_transform, solve_fk, solve_ik};
use fourbar_synth::optimizer::{optimize_problem, run_optimization, Bounds, OptimizerConfig, SphereProblem};
use fourbar_synth::oracle::{
    best_feasible, brute_ik, brute_ik_on_branch, brute_mechanical_energy, brute_static_gap, brute_theta_sweep,
    dense_stroke, feasibility_slice, grid_sweep, CellClass,
};
use fourbar_synth::{Branch, DesignParams, MechanismConfig, MotionTask, Pose, ProblemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn canon() -> ProblemConfig {
    ProblemConfig::canonical()
}

fn random_design(rng: &mut ChaCha8Rng, lo: [f64; 3], hi: [f64; 3]) -> DesignParams {
    DesignParams::from_array([rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1]), rng.gen_range(lo[2]..hi[2])])
}

fn ik_fk_round_trip() -> Outcome {
    let start = Instant::now();
    let p = canon();
    let cfg = &p.mechanism;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut pairs, mut worst) = (0, 0.0f64);
    while pairs < 1000 {
        let design = random_design(&mut rng, [0.02; 3], [0.40; 3]);
        let delta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let elbow = if rng.gen::<bool>() { Branch::Plus } else { Branch::Minus };
        let Ok(ik) = solve_ik(&design, cfg, delta, elbow) else { continue };
        pairs += 1;
        let fk = solve_fk(&design, cfg, ik.theta, ik.coupler_branch(cfg))
            .map_err(|e| format!("forward solve failed for {design:?} at delta {delta}: {e}"))?;
        worst = worst.max(wrap_angle(fk.delta - delta).abs());
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-9, format!("worst round-trip error {worst:e} rad"))?;
    check(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("1000 pairs, worst |delta error| = {worst:.2e} rad in {elapsed:.2?}"))
}

fn hand_kinematics() -> Outcome {
    let p = canon();
    let (cfg, base) = (&p.mechanism, &p.mechanism.baseline);
    let plus = solve_ik(base, cfg, FRAC_PI_2, Branch::Plus).map_err(|e| e.to_string())?;
    let minus = solve_ik(base, cfg, FRAC_PI_2, Branch::Minus).map_err(|e| e.to_string())?;
    check(plus.point_a.distance(Vec2::new(0.06, 0.08)) <= 1e-9, format!("plus A = {:?}", plus.point_a))?;
    check((plus.theta - 0.927295).abs() <= 1e-6, format!("plus theta = {}", plus.theta))?;
    check(minus.point_a.distance(Vec2::new(0.10, 0.0)) <= 1e-9, format!("minus A = {:?}", minus.point_a))?;
    check(minus.theta.abs() <= 1e-9, format!("minus theta = {}", minus.theta))?;

    // Oracle: the swept roots and their finite-difference slope in delta.
    let roots = brute_ik(base, cfg, FRAC_PI_2);
    check(roots.len() == 2, format!("oracle found {} roots", roots.len()))?;
    check((roots[1].theta - plus.theta).abs() <= 1e-9 && (roots[0].theta - minus.theta).abs() <= 1e-9, "oracle roots differ")?;
    let h = 1e-6;
    let theta_at = |d: f64| brute_ik_on_branch(base, cfg, d, Branch::Plus).map(|r| r.theta).ok_or("oracle lost the root");
    let slope = (theta_at(FRAC_PI_2 + h)? - theta_at(FRAC_PI_2 - h)?) / (2.0 * h);

    let g = kinematic_coefficients(&plus, base, cfg).map_err(|e| e.to_string())?.dtheta_ddelta;
    check((g - 2.4).abs() <= 1e-9, format!("dtheta/ddelta = {g}"))?;
    check((slope - 2.4).abs() <= 1e-6, format!("oracle slope = {slope}"))?;
    Ok(format!("theta+ = {:.6}, theta- = {:.1e}, dtheta/ddelta = {g:.12} (oracle {slope:.9})", plus.theta, minus.theta))
}

fn energy_balance() -> Outcome {
    let p = canon();
    let (cfg, task, base) = (&p.mechanism, &p.task, &p.mechanism.baseline);
    check(cfg.tip_force == Vec2::ZERO, "canonical tip force is not zero")?;
    let trajectory = kinematic_transform(base, cfg, task).map_err(|e| e.to_string())?;
    let profile = torque_profile(base, cfg, task, &trajectory).map_err(|e| e.to_string())?;
    let h = 5e-5;
    let mut worst = 0.0f64;
    for k in 1..trajectory.len() - 1 {
        let s = &trajectory.samples[k];
        let energy = |t: f64| brute_mechanical_energy(base, cfg, task, t, s.theta).ok_or("energy oracle failed");
        let de_dt = (energy(s.t + h)? - energy(s.t - h)?) / (2.0 * h);
        let power = profile.samples[k].1 * s.theta_dot;
        let rel = (power - de_dt).abs() / power.abs().max(1.0);
        check(rel <= 1e-5, format!("sample {k}: power {power}, dE/dt {de_dt}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("{} interior samples, worst scaled residual {worst:.2e}", trajectory.len() - 2))
}

/// Expected sign of the static gap from reachability alone: the slide fails
/// to reach O when O lies outside the annulus or the inner disk blocks the path.
fn gap_blocked(design: &DesignParams, cfg: &MechanismConfig, task: &MotionTask, pose: Pose) -> Option<bool> {
    let delta = task.delta(pose);
    let base = &cfg.baseline;
    let root = brute_ik_on_branch(base, cfg, delta, cfg.branch)?;
    let (o, c) = (cfg.pivot_o(), cfg.pivot_c);
    let point_b = |l_bc: f64| c + Vec2::from_angle(delta - cfg.effector_offset) * l_bc;
    let b0 = point_b(base.l_bc);
    let turn_b = (root.point_a - b0).angle() - (c - b0).angle();
    let turn_a = (o - root.point_a).angle() - (b0 - root.point_a).angle();
    let b = point_b(design.l_bc);
    let a = b + Vec2::from_angle((c - b).angle() + turn_b) * design.l_ab;
    let o_init = a + Vec2::from_angle((b - a).angle() + turn_a) * design.l_oa;

    let r_in = (design.l_ab - design.l_oa).abs();
    let r_out = design.l_ab + design.l_oa;
    let ob = o.distance(b);
    let seg = o - o_init;
    let t = ((b - o_init).dot(seg) / seg.norm_sq()).clamp(0.0, 1.0);
    let closest = (o_init + seg * t).distance(b);
    Some(ob > r_out || ob < r_in || closest < r_in)
}

fn static_gap_correctness() -> Outcome {
    let p = canon();
    let (cfg, task) = (&p.mechanism, &p.task);
    let evaluator = DesignEvaluator::new(cfg, task).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut worst, mut lowest, mut positive) = (0.0f64, 0.0f64, 0);
    for _ in 0..10_000 {
        let design = random_design(&mut rng, [0.02; 3], [0.40; 3]);
        for pose in [Pose::Initial, Pose::End] {
            let value = evaluator.static_gap(&design, pose).value;
            let brute = brute_static_gap(&design, cfg, task, pose).map_err(|e| e.to_string())?;
            let blocked = gap_blocked(&design, cfg, task, pose).ok_or("baseline root missing")?;
            check((value > 0.0) == blocked, format!("{design:?} {pose:?}: value {value}, blocked {blocked}"))?;
            check((value - brute).abs() <= 2e-6, format!("{design:?} {pose:?}: value {value}, oracle {brute}"))?;
            check(value >= -0.020, format!("{design:?} {pose:?}: value {value} below the overshoot cap"))?;
            worst = worst.max((value - brute).abs());
            lowest = lowest.min(value);
            positive += usize::from(value > 0.0);
        }
    }
    Ok(format!("20000 gaps ({positive} positive), worst oracle gap {worst:.2e} m, minimum {lowest} m"))
}

fn dynamic_constraint_correctness() -> Outcome {
    let hand = dynamic_constraint_from(&[0.0, 0.20, 0.15, 0.05, 0.10], &[1.0, 1.0, -1.0, -1.0, 1.0])
        .map_err(|e| e.to_string())?
        .value;
    check((hand - 0.10).abs() <= 1e-15, format!("hand trace gives {hand}"))?;

    // A box wider than the canonical one, so that defective designs occur.
    let p = canon();
    let (cfg, task) = (&p.mechanism, &p.task);
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut checked, mut defective) = (0, 0);
    while checked < 200 {
        let design = random_design(&mut rng, [0.03, 0.10, 0.08], [0.30, 0.40, 0.30]);
        let Ok(trajectory) = kinematic_transform(&design, cfg, task) else { continue };
        checked += 1;
        let value = dynamic_constraint(&trajectory.samples).map_err(|e| e.to_string())?.value;
        let sample_deltas: Vec<f64> = trajectory.samples.iter().map(|s| s.delta).collect();
        let grid = dense_stroke(task, 4001, &sample_deltas);
        let sweep = brute_theta_sweep(&design, cfg, &grid, task.delta_mid())
            .ok_or_else(|| format!("{design:?}: oracle sweep failed"))?;
        let thetas = trajectory.thetas();
        let step = thetas.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        if sweep.monotonic {
            check(value == 0.0, format!("{design:?}: oracle monotonic but value {value}"))?;
        } else {
            defective += 1;
            check(value > 0.0, format!("{design:?}: oracle reversal {} but value 0", sweep.reversal_range))?;
            check(
                (value - sweep.reversal_range).abs() <= step,
                format!("{design:?}: value {value}, oracle {}, step {step}", sweep.reversal_range),
            )?;
        }
    }
    Ok(format!("hand trace {hand}; {checked} designs agree with the sweep oracle ({defective} defective)"))
}

/// Posterior from a direct dense solve by Gaussian elimination.
fn dense_posterior(model: &GpModel, x: &[f64]) -> (f64, f64) {
    let k = &model.kernel;
    let cov = |a: &[f64], b: &[f64]| {
        let r = a.iter().zip(b).zip(&k.lengthscales).map(|((p, q), l)| ((p - q) / l).powi(2)).sum::<f64>().sqrt();
        k.signal_variance * matern52(r)
    };
    let xs = &model.train_x;
    let n = xs.len();
    let u = model.normalizer.to_unit(x);
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| cov(&xs[i], &xs[j])).collect();
            row[i] += k.noise_variance + model.jitter;
            row.push(model.train_y[i]);
            row.push(cov(&xs[i], &u));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for c in col..n + 2 {
                    a[row][c] -= f * a[col][c];
                }
            }
        }
    }
    let solve_y: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
    let solve_k: Vec<f64> = (0..n).map(|i| a[i][n + 1] / a[i][i]).collect();
    let k_star: Vec<f64> = xs.iter().map(|xi| cov(xi, &u)).collect();
    let mean = k_star.iter().zip(&solve_y).map(|(p, q)| p * q).sum::<f64>();
    let var = k.signal_variance - k_star.iter().zip(&solve_k).map(|(p, q)| p * q).sum::<f64>();
    let s = model.normalizer.y_std;
    (model.normalizer.y_mean + s * mean, var.max(0.0) * s * s)
}

fn gp_exactness() -> Outcome {
    let bounds = Bounds::new(vec![0.03, 0.15, 0.08], vec![0.14, 0.34, 0.25]);
    let points = vec![
        (vec![0.05, 0.20, 0.10], 1.3),
        (vec![0.10, 0.30, 0.20], 0.7),
        (vec![0.12, 0.18, 0.15], 2.1),
    ];
    let fitted = gp_fit(&points, &bounds, 3).map_err(|e| e.to_string())?;
    // A fixed kernel whose lengthscales couple the three points strongly.
    let coupled = GpModel::with_kernel(
        fitted.train_x.clone(),
        fitted.train_y.clone(),
        Kernel { signal_variance: 0.8, lengthscales: vec![0.6, 0.9, 0.7], noise_variance: 1e-3 },
        fitted.normalizer.clone(),
    )
    .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for model in [&fitted, &coupled] {
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|k| rng.gen_range(bounds.lo[k]..bounds.hi[k])).collect();
            let (m, v) = model.predict(&x);
            let (mo, vo) = dense_posterior(model, &x);
            check((m - mo).abs() <= 1e-10 && (v - vo).abs() <= 1e-10, format!("at {x:?}: ({m}, {v}) vs ({mo}, {vo})"))?;
            worst = worst.max((m - mo).abs()).max((v - vo).abs());
        }
    }

    let unit = Normalizer { bounds: Bounds::new(vec![0.0], vec![1.0]), y_mean: 0.0, y_std: 1.0 };
    let kernel = Kernel { signal_variance: 1.3, lengthscales: vec![0.2], noise_variance: 0.0 };
    let xs = vec![vec![0.1], vec![0.5], vec![0.8]];
    let ys = vec![0.4, -1.2, 0.9];
    let exact = GpModel::with_kernel(xs.clone(), ys.clone(), kernel, unit).map_err(|e| e.to_string())?;
    for (x, y) in xs.iter().zip(&ys) {
        let (m, v) = exact.predict(x);
        check((m - y).abs() <= 1e-8 && v <= 1e-8, format!("interpolation at {x:?}: ({m}, {v})"))?;
    }
    let (m, v) = exact.predict(&[0.8 + 10.0 * 0.2 + 1.0]);
    check(m.abs() <= 1e-6 && (v - 1.3).abs() <= 1e-6, format!("prior reversion: ({m}, {v})"))?;
    Ok(format!("dense-solve agreement {worst:.1e}; interpolation and prior reversion hold"))
}

fn bo_sanity() -> Outcome {
    let start = Instant::now();
    let mut bests = Vec::new();
    for seed in 0..5 {
        let problem = SphereProblem::new(3, 0.5);
        let opt = OptimizerConfig { n_max: 50, seed, ..OptimizerConfig::default_with_bounds(problem.bounds.clone()) };
        let trace = optimize_problem(&problem, &opt).map_err(|e| e.to_string())?;
        bests.push(trace.best_feasible.map_or(f64::INFINITY, |b| b.1));
    }
    let mean = bests.iter().sum::<f64>() / bests.len() as f64;
    let elapsed = start.elapsed();
    check(mean <= 0.30, format!("mean best {mean} ({bests:?})"))?;
    check(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("mean best feasible {mean:.4} over 5 seeds (optimum 0.25) in {elapsed:.1?}"))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let p = canon();
    let opt = OptimizerConfig { seed: 7, ..p.optimizer.clone() };
    check(opt.n_init == 12 && opt.n_max == 60, "unexpected canonical budget")?;
    let trace = run_optimization(&p.mechanism, &p.task, &opt).map_err(|e| e.to_string())?;
    let (x, t_rms) = trace.best_feasible.clone().ok_or("no feasible design found")?;
    let design = DesignParams::from_array([x[0], x[1], x[2]]);
    let record = DesignEvaluator::new(&p.mechanism, &p.task).map_err(|e| e.to_string())?.evaluate(&design);
    check(record.constraints.feasible, format!("{design:?} re-evaluates as infeasible"))?;
    let grid = grid_sweep(&p.mechanism, &p.task, &opt.bounds, 21).map_err(|e| e.to_string())?;
    let grid_best = best_feasible(&grid).and_then(|r| r.objective).ok_or("grid has no feasible design")?;
    let elapsed = start.elapsed();
    check(t_rms <= 1.05 * grid_best, format!("optimizer {t_rms} vs grid {grid_best}"))?;
    check(elapsed < Duration::from_secs(900), format!("took {elapsed:?}"))?;
    Ok(format!(
        "t_rms {t_rms:.4} at ({:.4}, {:.4}, {:.4}) vs grid best {grid_best:.4} in {elapsed:.1?}",
        x[0], x[1], x[2]
    ))
}

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = workspace_root().join("configs/canon.json");
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("trace{run}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_fourbar-synth"))
            .args(["optimize", "--seed", "7", "--budget", "60", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        check(status.status.success(), format!("run {run} failed: {}", String::from_utf8_lossy(&status.stderr)))?;
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    check(outputs[0] == outputs[1], "trace files differ")?;
    check(outputs[0].iter().filter(|&&b| b == b'\n').count() == 61, "trace does not hold 60 rows")?;
    Ok(format!("two runs with seed 7 wrote identical {}-byte traces", outputs[0].len()))
}

fn constraint_map() -> Outcome {
    let p = canon();
    let l_oa: Vec<f64> = (0..31).map(|k| 0.02 + 0.30 * k as f64 / 30.0).collect();
    let l_ab: Vec<f64> = (0..31).map(|k| 0.05 + 0.40 * k as f64 / 30.0).collect();
    let slice = feasibility_slice(&p.mechanism, &p.task, &l_oa, &l_ab, 0.15).map_err(|e| e.to_string())?;
    let artifact = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("constraint_slice.txt");
    let header = format!(
        "l_oa rows {:.3}..{:.3} (down), l_ab columns {:.3}..{:.3} (right), l_bc = {}\n# feasible  . static  x dynamic\n",
        l_oa[0], l_oa[30], l_ab[0], l_ab[30], slice.l_bc
    );
    std::fs::write(&artifact, header + &slice.render()).map_err(|e| e.to_string())?;

    let cells = &slice.cells;
    let n = cells.len();
    let count = |class| cells.iter().flatten().filter(|&&c| c == class).count();
    check(count(CellClass::Feasible) > 0, "no feasible cell")?;
    check(slice.feasible_components() == 1, format!("{} feasible components", slice.feasible_components()))?;
    check(cells[0].iter().all(|&c| c == CellClass::Static), "shortest crank row is not statically infeasible")?;
    check(cells.iter().all(|row| row[0] == CellClass::Static), "shortest coupler column is not statically infeasible")?;
    let mut borders = (false, false);
    for i in 0..n {
        for j in 0..n {
            if cells[i][j] != CellClass::Feasible {
                continue;
            }
            for (di, dj) in [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)] {
                let (r, c) = (i as i64 + di, j as i64 + dj);
                if r < 0 || c < 0 || r >= n as i64 || c >= n as i64 {
                    continue;
                }
                match cells[r as usize][c as usize] {
                    CellClass::Static => borders.0 = true,
                    CellClass::Dynamic => borders.1 = true,
                    CellClass::Feasible => {}
                }
            }
        }
    }
    check(borders.0 && borders.1, format!("feasible region borders (static, dynamic) = {borders:?}"))?;
    Ok(format!(
        "one feasible region ({} cells) bounded by static ({}) and dynamic ({}) cells; map at {}",
        count(CellClass::Feasible),
        count(CellClass::Static),
        count(CellClass::Dynamic),
        artifact.display()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("IK/FK round trip", ik_fk_round_trip),
        ("hand-checkable kinematics", hand_kinematics),
        ("energy balance", energy_balance),
        ("static gap", static_gap_correctness),
        ("dynamic constraint", dynamic_constraint_correctness),
        ("GP exactness", gp_exactness),
        ("constrained BO sanity", bo_sanity),
        ("end-to-end synthesis", end_to_end),
        ("determinism", determinism),
        ("constraint map", constraint_map),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
