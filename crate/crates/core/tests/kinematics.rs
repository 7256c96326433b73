use fourbar_synth::geom::wrap_angle;
use fourbar_synth::kinematics::{kinematic_coefficients, kinematic_transform, second_coefficient_fd, solve_fk, solve_ik};
use fourbar_synth::oracle::brute_ik;
use fourbar_synth::{Branch, DesignParams, ProblemConfig};
use proptest::prelude::*;

fn design() -> impl Strategy<Value = DesignParams> {
    (0.02..0.40f64, 0.02..0.40f64, 0.02..0.40f64).prop_map(|(a, b, c)| DesignParams::from_array([a, b, c]))
}

fn branch() -> impl Strategy<Value = Branch> {
    prop_oneof![Just(Branch::Plus), Just(Branch::Minus)]
}

proptest! {
    #[test]
    fn forward_undoes_inverse(d in design(), delta in -3.1..3.1f64, elbow in branch()) {
        let cfg = ProblemConfig::canonical().mechanism;
        if let Ok(p) = solve_ik(&d, &cfg, delta, elbow) {
            let q = solve_fk(&d, &cfg, p.theta, p.coupler_branch(&cfg)).unwrap();
            prop_assert!(wrap_angle(q.delta - delta).abs() < 1e-9);
            prop_assert!(q.point_a.distance(p.point_a) < 1e-12);
            prop_assert!(p.length_residual(&d, &cfg) < 1e-12);
        }
    }

    #[test]
    fn closed_form_roots_match_sweep(d in design(), delta in -3.1..3.1f64) {
        let cfg = ProblemConfig::canonical().mechanism;
        let roots = brute_ik(&d, &cfg, delta);
        for elbow in [Branch::Plus, Branch::Minus] {
            if let Ok(p) = solve_ik(&d, &cfg, delta, elbow) {
                let nearest = roots.iter().map(|r| wrap_angle(r.theta - p.theta).abs()).fold(f64::INFINITY, f64::min);
                // Roots of a nearly tangent configuration are ill-conditioned.
                let b = cfg.point_b(d.l_bc, delta);
                let margin = (d.l_oa + d.l_ab - b.norm()).min(b.norm() - (d.l_oa - d.l_ab).abs());
                if margin > 1e-6 {
                    prop_assert!(nearest < 1e-9, "nearest {nearest}");
                }
            }
        }
    }

    #[test]
    fn second_coefficient_matches_differences(d in design(), delta in -3.1..3.1f64, elbow in branch()) {
        let cfg = ProblemConfig::canonical().mechanism;
        let Ok(p) = solve_ik(&d, &cfg, delta, elbow) else { return Ok(()) };
        let Ok(k) = kinematic_coefficients(&p, &d, &cfg) else { return Ok(()) };
        if k.transmission_singular || k.dtheta_ddelta.abs() > 50.0 {
            return Ok(());
        }
        let Ok(fd) = second_coefficient_fd(&p, &d, &cfg, 1e-4) else { return Ok(()) };
        prop_assert!((fd - k.d2theta_ddelta2).abs() < 1e-5 * (1.0 + fd.abs()), "{fd} vs {}", k.d2theta_ddelta2);
    }
}

#[test]
fn canonical_second_coefficient() {
    let cfg = ProblemConfig::canonical().mechanism;
    let p = solve_ik(&cfg.baseline, &cfg, std::f64::consts::FRAC_PI_2, Branch::Plus).unwrap();
    let k = kinematic_coefficients(&p, &cfg.baseline, &cfg).unwrap();
    let fd = second_coefficient_fd(&p, &cfg.baseline, &cfg, 1e-4).unwrap();
    assert!((k.d2theta_ddelta2 - fd).abs() < 1e-6);
}

#[test]
fn baseline_trajectory_follows_chain_rule() {
    let p = ProblemConfig::canonical();
    let tr = kinematic_transform(&p.mechanism.baseline, &p.mechanism, &p.task).unwrap();
    // Central differences of theta over neighbouring samples approximate theta_dot.
    for k in 1..tr.len() - 1 {
        let (a, b, c) = (&tr.samples[k - 1], &tr.samples[k], &tr.samples[k + 1]);
        let fd = (c.theta - a.theta) / (c.t - a.t);
        assert!((fd - b.theta_dot).abs() < 2e-3 * (1.0 + b.theta_dot.abs()), "{k}: {fd} vs {}", b.theta_dot);
    }
    assert_eq!(tr.samples[0].theta_dot, 0.0);
    assert_eq!(tr.samples[tr.len() - 1].theta_dot, 0.0);
}
