use super::*;
use crate::instances::{diagonal_ramp, noisy_bump, smooth_bump, uniform};
use crate::solver::trajectory::residuals_s_with;

fn params(kappa: f64, tau: f64, t_final: f64) -> ModelParams<f64> {
    ModelParams {
        kappa,
        mu: 0.01,
        nu: 0.01,
        lambda: 10.0,
        p: 3.0,
        tau,
        t_final,
    }
}

fn l1() -> Anisotropy<f64> {
    Anisotropy::smoothed_l1(0.1).unwrap()
}

#[test]
fn config_validation() {
    let c = SolveConfig::<f64>::default();
    assert!(c.validate().is_ok());
    for bad in [
        SolveConfig { tol_res: 0.0, ..c },
        SolveConfig { armijo_c: 1.0, ..c },
        SolveConfig { backtrack: 0.0, ..c },
        SolveConfig { init_step: -1.0, ..c },
        SolveConfig { max_outer: 0, ..c },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}

#[test]
fn orientation_of_zero_image_is_zero() {
    let u0 = ScalarField::zeros(crate::grid::GridSpec::unit(6, 6).unwrap());
    let (alpha, rep) =
        solve_initial_orientation(&u0, &params(1.0, 0.1, 1.0), &l1(), &Default::default()).unwrap();
    assert!(alpha.values().iter().all(|v| *v == 0.0));
    assert_eq!(rep.res_alpha, 0.0);
}

#[test]
fn orientation_is_zero_for_isotropic_family() {
    let u0 = noisy_bump::<f64>(8, 0.2, 4).unwrap();
    let a = Anisotropy::smoothed_euclid(0.1).unwrap();
    let (alpha, _) =
        solve_initial_orientation(&u0, &params(1.0, 0.1, 1.0), &a, &Default::default()).unwrap();
    assert!(alpha.values().iter().all(|v| *v == 0.0));
}

#[test]
fn orientation_on_ramp_is_stationary_and_decreases_objective() {
    let u0 = diagonal_ramp::<f64>(16, 1.0).unwrap();
    let p = params(0.05, 0.1, 1.0);
    let cfg = SolveConfig::default();
    let (alpha, rep) = solve_initial_orientation(&u0, &p, &l1(), &cfg).unwrap();
    assert!(rep.res_alpha <= cfg.tolerance(&alpha, &u0));
    let zero = ScalarField::zeros(*u0.grid());
    let e = |al: &ScalarField<f64>| {
        let b = energy(al, &u0, &u0, &p, &l1()).unwrap();
        b.dirichlet_alpha + b.aniso_term
    };
    assert!(e(&alpha) <= e(&zero));
    assert!(alpha.norm_l2() > 0.0, "ramp must rotate the anisotropy");
}

#[test]
fn step_fixed_point_at_zero() {
    let g = crate::grid::GridSpec::unit(5, 5).unwrap();
    let z = ScalarField::zeros(g);
    let (alpha, u, rep) =
        minimize_step(&z, &z, &z, &params(1.0, 0.1, 1.0), &l1(), &Default::default()).unwrap();
    assert_eq!(alpha, z);
    assert_eq!(u, z);
    assert_eq!(rep.ineq_slack, 0.0);
    assert_eq!(rep.outer_sweeps, 0);
}

#[test]
fn random_step_satisfies_energy_inequality() {
    let u_prev = uniform::<f64>(8, 11).unwrap();
    let u_org = uniform::<f64>(8, 12).unwrap();
    let p = params(1.0, 0.1, 1.0);
    let cfg = SolveConfig::default();
    let (alpha0, _) = solve_initial_orientation(&u_prev, &p, &l1(), &cfg).unwrap();
    let (alpha, u, rep) = minimize_step(&alpha0, &u_prev, &u_org, &p, &l1(), &cfg).unwrap();
    assert!(rep.ineq_slack >= -1e-8 * (1.0 + rep.energy_before.total));
    assert!(rep.res_u <= rep.tolerance && rep.res_alpha <= rep.tolerance);
    assert!(rep.psi_sweeps.windows(2).all(|w| w[1] <= w[0]));
    assert!(rep.tolerance <= cfg.tolerance(&alpha, &u) * (1.0 + 1e-12));
}

#[test]
fn smaller_tau_moves_less() {
    let u_prev = noisy_bump::<f64>(8, 0.3, 5).unwrap();
    let u_org = smooth_bump::<f64>(8).unwrap();
    let cfg = SolveConfig::default();
    let alpha = ScalarField::zeros(*u_prev.grid());
    let disp: Vec<f64> = [0.1, 0.01, 0.001]
        .iter()
        .map(|&tau| {
            let (_, u, _) =
                minimize_step(&alpha, &u_prev, &u_org, &params(1.0, tau, 1.0), &l1(), &cfg).unwrap();
            u.sub(&u_prev).unwrap().norm_l2()
        })
        .collect();
    assert!(disp[0] > disp[1] && disp[1] > disp[2], "{disp:?}");
}

#[test]
fn zero_run_is_identically_zero() {
    let g = crate::grid::GridSpec::unit(6, 6).unwrap();
    let z = ScalarField::zeros(g);
    let traj = run(&z, &z, &params(1.0, 0.25, 1.0), &l1(), &Default::default()).unwrap();
    assert_eq!(traj.step_count(), 4);
    for s in traj.steps() {
        assert_eq!(s.u, z);
        assert_eq!(s.alpha, z);
        assert_eq!(s.report.energy_after.total, 0.0);
    }
    let r = residuals_s(&traj, &l1(), 0.5).unwrap();
    assert_eq!((r.res_s1, r.res_s2_slack), (0.0, 0.0));
}

#[test]
fn noisy_bump_run_dissipates_and_converges() {
    let u0 = noisy_bump::<f64>(16, 0.2, 7).unwrap();
    let p = params(1.0, 0.1, 1.0);
    let cfg = SolveConfig::default();
    let traj = run(&u0, &u0, &p, &l1(), &cfg).unwrap();
    let e = traj.energy_totals();
    assert!(e.windows(2).all(|w| w[1] <= w[0]), "{e:?}");
    for s in &traj.steps()[1..] {
        let r = &s.report;
        assert!(r.res_u <= r.tolerance && r.res_alpha <= r.tolerance);
        assert!(r.ineq_slack >= -1e-8 * (1.0 + e[0]));
    }
    // determinism
    let again = run(&u0, &u0, &p, &l1(), &cfg).unwrap();
    for (x, y) in traj.steps().iter().zip(again.steps()) {
        assert_eq!(x.u, y.u);
        assert_eq!(x.alpha, y.alpha);
    }
}

#[test]
fn large_lambda_pins_u_to_data() {
    let u_org = smooth_bump::<f64>(8).unwrap();
    let u0 = ScalarField::constant(*u_org.grid(), 0.5);
    let cfg = SolveConfig::default();
    let gap = |lambda: f64| {
        let p = ModelParams {
            lambda,
            ..params(1.0, 0.5, 1.0)
        };
        let traj = run(&u0, &u_org, &p, &l1(), &cfg).unwrap();
        traj.last().u.sub(&u_org).unwrap().norm_l2()
    };
    let ratio = gap(1e5) / gap(1e4);
    assert!((ratio - 0.1).abs() < 0.02, "ratio {ratio}");
}

#[test]
fn weak_formulation_residuals_at_step_times() {
    let u0 = noisy_bump::<f64>(16, 0.2, 3).unwrap();
    let p = params(1.0, 0.1, 0.5);
    let traj = run(&u0, &u0, &p, &l1(), &Default::default()).unwrap();
    for i in 1..=traj.step_count() {
        let t = traj.time(i);
        let r = residuals_s_with(&traj, &l1(), t, 8, i as u64).unwrap();
        let tol = traj.steps()[i].report.tolerance;
        assert!(r.res_s1 <= tol);
        assert!(r.res_s2_slack <= tol * (1.0 + r.probe_norm + traj.steps()[i].u.norm_l2()));
    }
    assert!(matches!(traj.interval(0.6), Err(Error::Domain(_))));
}

#[test]
fn interpolants_follow_rothe_conventions() {
    let u0 = noisy_bump::<f64>(6, 0.2, 3).unwrap();
    let traj = run(&u0, &u0, &params(1.0, 0.25, 0.5), &l1(), &Default::default()).unwrap();
    let s = traj.steps();
    assert_eq!(traj.u_upper(0.0).unwrap(), &s[0].u);
    assert_eq!(traj.u_upper(0.1).unwrap(), &s[1].u);
    assert_eq!(traj.u_upper(0.25).unwrap(), &s[1].u);
    assert_eq!(traj.u_lower(0.25).unwrap(), &s[0].u);
    assert_eq!(traj.u_lower(0.3).unwrap(), &s[1].u);
    let mid = traj.u_linear(0.375).unwrap();
    let expect = s[1].u.add(&s[2].u).unwrap().scale(0.5);
    assert!(mid.sub(&expect).unwrap().norm_l2() < 1e-15);
    assert_eq!(&traj.u_linear(0.5).unwrap(), &s[2].u);
}
