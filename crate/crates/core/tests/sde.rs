use stopbound::expr::parse;
use stopbound::*;

fn field(text: &str, horizon: f64) -> Field64 {
    ScalarField::from_expr(parse(text).unwrap(), horizon)
}

fn problem(mu: &str, sigma: &str, g: &str, horizon: f64) -> Validated64 {
    let spec = ProblemSpec::new(
        field(mu, horizon),
        field(sigma, horizon),
        field(g, horizon),
        horizon,
    )
    .unwrap();
    let probe = Grid::new(horizon, 0.99 * horizon, -1.0, 1.0, 4, 4).unwrap();
    validate_problem(spec, &probe).unwrap()
}

#[test]
fn constant_drift_without_noise_is_exact() {
    let p = problem("0.75", "0", "x", 1.0);
    let b = simulate_paths(&p, 0.0, 0.5, 4, 16, 3).unwrap();
    for i in 0..4 {
        for (k, &x) in b.path(i).iter().enumerate() {
            assert_eq!(x, 0.5 + 0.75 * k as f64 / 16.0, "path {i} step {k}");
        }
    }
}

#[test]
fn brownian_terminal_moments() {
    let p = problem("0", "1", "x", 1.0);
    let b = simulate_paths(&p, 0.0, 0.0, 100_000, 16, 2024).unwrap();
    let (mean, var) = b.moments(b.n_steps());
    assert!(mean.abs() <= 3.0 / 100_000f64.sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() <= 0.05, "var {var}");
}

#[test]
fn bridge_terminal_matches_discrete_and_exact_marginals() {
    let p = problem("-x/(T-t)", "1", "x", 1.0);
    assert!(p.pole_at_horizon());
    let n = 1000;
    for x0 in [0.0, 1.0] {
        let b = simulate_paths(&p, 0.0, x0, 40_000, n, 5).unwrap();
        let last = b.n_steps();
        let eps = 1.0 - b.time(last);
        assert!((eps - 1e-3).abs() < 1e-12);
        let (mean, var) = b.moments(last);
        // Euler on the bridge: X_{N-1} = x/N + sqrt(Δ) Σ Z_j / (N-1-j).
        let dt = 1.0 / n as f64;
        let euler_var = dt * (1..n).map(|m| 1.0 / (m * m) as f64).sum::<f64>();
        let exact_var = eps * (1.0 - eps);
        let se = (var / 40_000.0).sqrt();
        assert!(
            (mean - x0 * eps).abs() <= 3.0 * se,
            "mean {mean} vs {}",
            x0 * eps
        );
        assert!(
            (var / euler_var - 1.0).abs() <= 0.05,
            "var {var} vs Euler {euler_var}"
        );
        assert!(var.sqrt() / exact_var.sqrt() > 1.0 && var.sqrt() / exact_var.sqrt() < 1.5);
    }
}

#[test]
fn log_euler_keeps_half_line_paths_positive() {
    let spec = ProblemSpec::new(
        field("x*(1-t)", 2.0),
        field("0.8*x", 2.0),
        field("x", 2.0),
        2.0,
    )
    .unwrap()
    .with_state_space(StateSpace::PositiveHalfLine);
    let p = validate_problem(spec, &Grid::new(2.0, 2.0, 0.1, 3.0, 4, 4).unwrap()).unwrap();
    let b = simulate_paths(&p, 0.0, 0.05, 5_000, 64, 8).unwrap();
    assert_eq!(b.scheme, Scheme::LogEuler);
    assert_eq!(b.n_poisoned(), 0);
    for i in 0..b.n_paths() {
        assert!(b.path(i).iter().all(|&x| x > 0.0));
    }
}

#[test]
fn bundles_do_not_depend_on_thread_count() {
    let p = problem("-x/(T-t)", "1+0.1*x*x", "x", 1.0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_paths(&p, 0.1, 0.3, 2_000, 50, 77).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(7));
    let other = simulate_paths(&p, 0.1, 0.3, 2_000, 50, 78).unwrap();
    assert_ne!(one.path(0), other.path(0));
}

#[test]
fn coupling_with_state_free_drift_is_deterministically_ordered() {
    let p = problem("1-t", "1", "x", 1.0);
    let cb = simulate_coupled(&p, 0.5, 0.25, 0.0, Region::everything(), 2_000, 64, 1).unwrap();
    for i in 0..cb.late.n_paths() {
        for k in 0..=cb.late.n_steps() {
            let gap = cb.late.path(i)[k] - cb.early.path(i)[k];
            let expect = (0.25 - 0.5) * k as f64 * cb.dt();
            assert!(
                (gap - expect).abs() <= 1e-12,
                "path {i} step {k}: {gap} vs {expect}"
            );
            assert!(gap <= 0.0);
        }
    }
    assert_eq!(cb.exit, vec![64; 2_000]);
    let r = comparison_report(&cb, 1.0);
    assert!(r.passed());
    assert_eq!(r.worst, 0.0);
}

#[test]
fn bridge_coupling_on_negative_drift_region_passes() {
    let p = problem("-x/(T-t)", "1", "x", 1.0);
    let m = Region::negative_drift(p.spec().drift(), 1e-12);
    for j in [8, 10] {
        let n = (0.5 * (1u64 << j) as f64) as usize;
        let cb = simulate_coupled(&p, 0.5, 0.25, 1.0, m.clone(), 2_000, n, 9).unwrap();
        assert_eq!(cb.dt(), 0.5f64.powi(j));
        assert!(
            cb.exit.iter().any(|&e| e < cb.late.n_steps()),
            "some paths leave M"
        );
        assert!(cb.exit.iter().all(|&e| e > 0), "start lies in M");
        assert!(comparison_report(&cb, 1.0).passed());
    }
}

#[test]
fn stiff_drift_breaks_discrete_ordering_on_coarse_steps() {
    // Euler overshoots once Δ·K > 1, so the shared-noise ordering fails.
    let p = problem("-600*x-t", "1", "x", 1.0);
    let coarse = simulate_coupled(&p, 0.5, 0.25, 1.0, Region::everything(), 500, 128, 4).unwrap();
    let fine = simulate_coupled(&p, 0.5, 0.25, 1.0, Region::everything(), 500, 2048, 4).unwrap();
    let bad = comparison_report(&coarse, 1.0);
    assert!(bad.failed(), "{bad:?}");
    assert!(bad.witness.unwrap().x.is_some());
    assert!(bad.notes.contains("worst path"));
    let good = comparison_report(&fine, 1.0);
    assert!(good.passed(), "{good:?}");
}

#[test]
fn lsmc_martingale_and_constant_drift() {
    let p = problem("0", "1", "x", 1.0);
    let r = value_lsmc(&p, 0.0, 0.3, 20_000, 50, 3, 12).unwrap();
    assert!((r.estimate - 0.3).abs() <= 3.0 * r.standard_error, "{r:?}");

    let p = problem("0.5", "1", "x", 1.0);
    let r = value_lsmc(&p, 0.2, -0.4, 20_000, 50, 3, 13).unwrap();
    assert!(
        (r.estimate - (-0.4 + 0.5 * 0.8)).abs() <= 3.0 * r.standard_error,
        "{r:?}"
    );
    assert!(r.standard_error > 0.0);
}

#[test]
fn lsmc_with_running_reward_accumulates_left_endpoints() {
    // f = 1 rewards waiting: value is x + (T - t) for a martingale.
    let spec = ProblemSpec::new(field("0", 1.0), field("1", 1.0), field("x", 1.0), 1.0)
        .unwrap()
        .with_running_reward(ScalarField::constant(1.0));
    let p = validate_problem(spec, &Grid::new(1.0, 1.0, -1.0, 1.0, 4, 4).unwrap()).unwrap();
    let r = value_lsmc(&p, 0.0, 0.0, 20_000, 40, 2, 14).unwrap();
    assert!(
        (r.estimate - 1.0).abs() <= 3.0 * r.standard_error + 1e-9,
        "{r:?}"
    );
}

#[test]
fn lsmc_is_reproducible() {
    let p = problem("-x/(T-t)", "1", "x", 1.0);
    let a = value_lsmc(&p, 0.0, 0.0, 5_000, 50, 3, 99).unwrap();
    let b = value_lsmc(&p, 0.0, 0.0, 5_000, 50, 3, 99).unwrap();
    assert_eq!(a, b);
}
