use stopbound::expr::parse;
use stopbound::*;

fn field(text: &str, horizon: f64) -> Field64 {
    ScalarField::from_expr(parse(text).unwrap(), horizon)
}

fn probe(horizon: f64) -> Grid64 {
    Grid::new(horizon, 0.99 * horizon, -1.0, 1.0, 4, 4).unwrap()
}

#[test]
fn reduction_of_quadratic_reward_is_coherent() {
    let spec = ProblemSpec::new(field("0", 1.0), field("1", 1.0), field("x^2", 1.0), 1.0).unwrap();
    let reduced = reduce_to_running_reward(&spec, &probe(1.0)).unwrap();
    let h = reduced.running_reward().unwrap();
    for t in [0.0, 0.3, 1.0] {
        for x in [-4.0, -0.1, 0.0, 2.5] {
            assert_eq!(h.eval(t, x).unwrap(), 1.0);
        }
    }
    let direct = validate_problem(spec.clone(), &probe(1.0)).unwrap();
    let reduced = validate_problem(reduced, &probe(1.0)).unwrap();
    let grid = build_grid(&direct, 0.0, 5.0, 200, 200).unwrap();
    let v = solve_backward(&direct, &grid, 0.5).unwrap();
    let w = solve_backward(&reduced, &grid, 0.5).unwrap();
    let tol = 10.0 * v.tol_contact().max(w.tol_contact());
    for k in 0..=grid.nt() {
        for j in 0..=grid.nx() {
            let g = v.obstacle()[k][j];
            assert!(
                (v.v()[k][j] - (g + w.v()[k][j])).abs() <= tol,
                "node {k},{j}"
            );
        }
    }
}

#[test]
fn single_precision_solve_tracks_closed_form() {
    let spec = ProblemSpec::<f32>::new(
        ScalarField::constant(0.5),
        ScalarField::constant(1.0),
        ScalarField::of_x(|x| x).with_partials(|_, _| 0.0, |_, _| 1.0, |_, _| 0.0),
        1.0,
    )
    .unwrap();
    let p = validate_problem(spec, &Grid::new(1.0f32, 1.0, -1.0, 1.0, 4, 4).unwrap()).unwrap();
    let grid = build_grid(&p, 0.0, 5.0, 100, 100).unwrap();
    let s: Surface32 = solve_backward(&p, &grid, 0.5).unwrap();
    let (k, j) = (0, grid.nearest_x(0.0));
    assert!((s.v()[k][j] - 0.5).abs() < 1e-3);
}

#[test]
fn flipped_bridge_boundary_scales_like_square_root() {
    let spec = ProblemSpec::new(
        field("-x/(T-t)", 1.0),
        field("1", 1.0),
        field("x", 1.0),
        1.0,
    )
    .unwrap()
    .with_orientation(Orientation::Upper);
    let p = validate_problem(flip_orientation(&spec).unwrap(), &probe(1.0)).unwrap();
    let grid = build_grid(&p, 0.0, 5.0, 400, 400).unwrap();
    let upper = extract_boundary(&solve_backward(&p, &grid, 0.5).unwrap()).reflected();
    assert_eq!(upper.orientation, Orientation::Upper);
    for (t, b) in upper.t_nodes.iter().zip(&upper.values) {
        if (1.0 / 3.0..=2.0 / 3.0).contains(t) {
            let ratio = b.finite().unwrap() / (1.0 - t).sqrt();
            // Shepp's constant 0.8399, approached from below at this resolution.
            assert!((ratio - 0.8399).abs() < 0.05, "t={t}: {ratio}");
        }
    }
}

#[test]
fn reflecting_twice_is_identity() {
    let spec = ProblemSpec::new(
        field("-x/(T-t)", 1.0),
        field("1+0.1*x^2", 1.0),
        field("exp(x)", 1.0),
        1.0,
    )
    .unwrap()
    .with_orientation(Orientation::Upper);
    let back = flip_orientation(&spec).unwrap().reflect().unwrap();
    assert_eq!(back.orientation(), Orientation::Upper);
    for (t, x) in [(0.0, 0.3), (0.5, -1.2), (0.9, 2.0)] {
        assert_eq!(
            back.drift().eval(t, x).unwrap(),
            spec.drift().eval(t, x).unwrap()
        );
        assert_eq!(
            back.terminal_reward().eval(t, x).unwrap(),
            spec.terminal_reward().eval(t, x).unwrap()
        );
        assert_eq!(
            back.diffusion().eval(t, x).unwrap(),
            spec.diffusion().eval(t, x).unwrap()
        );
    }
}
