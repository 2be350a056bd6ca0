//! Built-in example gallery.

use stopbound::{Orientation, StateSpace};

use crate::config::{
    CheckName, CouplingConfig, FamilyConfig, GridConfig, LsmcConfig, OutputConfig, ProblemConfig,
    RegionChoice, RunConfig, SimulationConfig,
};

fn problem(sigma: &str, reward: &str, horizon: f64) -> ProblemConfig {
    ProblemConfig {
        drift: None,
        drift_family: None,
        sigma: sigma.into(),
        reward: reward.into(),
        running_reward: None,
        horizon,
        state_space: StateSpace::RealLine,
        orientation: Orientation::Lower,
        reduce: false,
        x_ref: 0.0,
    }
}

fn simulation(seed: u64) -> SimulationConfig {
    SimulationConfig {
        seed,
        n_paths: 10_000,
        n_steps: 400,
        coupling: vec![],
        lsmc: None,
    }
}

fn config(
    name: &str,
    problem: ProblemConfig,
    simulation: SimulationConfig,
    checks: Vec<CheckName>,
) -> RunConfig {
    RunConfig {
        name: name.into(),
        problem,
        grid: GridConfig::default(),
        simulation,
        checks,
        output: OutputConfig {
            dir: format!("out/{name}").into(),
            ..OutputConfig::default()
        },
    }
}

/// Checks for a time-monotone drift: hypotheses, conclusions and the
/// solver's own residual.
fn theorem_41() -> Vec<CheckName> {
    use CheckName::*;
    vec![
        GMonotone,
        MuTimeMonotoneEverywhere,
        ValueTimeMonotone,
        BoundaryMonotone,
        ResidualComplementarity,
    ]
}

/// Checks for a drift that is only monotone on `M`.
fn theorem_42() -> Vec<CheckName> {
    use CheckName::*;
    vec![
        GMonotone,
        MuTimeMonotoneRegion,
        ConditionIii,
        ValueTimeMonotone,
        BoundaryMonotone,
        ResidualComplementarity,
        ContinuityHeuristic,
    ]
}

pub fn builtin_examples() -> Vec<RunConfig> {
    let bm = {
        let mut p = problem("1", "x", 2.0);
        p.drift_family = Some(FamilyConfig::BmTimeDrift { mu: "1-t".into() });
        let mut sim = simulation(1);
        sim.coupling.push(CouplingConfig {
            u: 0.25,
            t: 0.5,
            x: 0.0,
            region: RegionChoice::Everywhere,
            c_ord: 1.0,
        });
        let mut checks = theorem_41();
        checks.push(CheckName::ComparisonOrder);
        config("bm_time_drift", p, sim, checks)
    };

    let gbm = {
        let mut p = problem("0.3*x", "x", 2.0);
        p.drift_family = Some(FamilyConfig::Gbm {
            gamma: "1-t".into(),
        });
        p.state_space = StateSpace::PositiveHalfLine;
        p.x_ref = 1.0;
        config("gbm_time_drift", p, simulation(2), theorem_41())
    };

    let bridge_exp = {
        let mut p = problem("1", "exp(x)", 1.0);
        p.drift_family = Some(FamilyConfig::BrownianBridge {
            pin: 0.0,
            pin_time: 1.0,
        });
        p.orientation = Orientation::Upper;
        let mut sim = simulation(3);
        sim.coupling.push(CouplingConfig {
            u: 0.25,
            t: 0.5,
            x: 1.0,
            region: RegionChoice::M,
            c_ord: 1.0,
        });
        let mut checks = theorem_42();
        checks.push(CheckName::ComparisonOrder);
        config("brownian_bridge_exp", p, sim, checks)
    };

    let bridge_linear = {
        let mut p = problem("1", "x", 1.0);
        p.drift = Some("-x/(T-t)".into());
        p.orientation = Orientation::Upper;
        let mut sim = simulation(4);
        sim.lsmc = Some(LsmcConfig {
            t: 0.0,
            x: 0.0,
            n_paths: 20_000,
            n_steps: 400,
            basis_degree: 3,
        });
        let mut checks = theorem_42();
        checks.push(CheckName::LsmcAgreement);
        config("brownian_bridge_linear_flipped", p, sim, checks)
    };

    let two_point = {
        let mut p = problem("1", "x", 1.0);
        p.drift_family = Some(FamilyConfig::TwoPoint {
            p: 0.5,
            l: -1.0,
            r: 2.0,
        });
        config("two_point_filtering", p, simulation(5), theorem_41())
    };

    let ou = {
        // Long-term mean falling over time; stopping happens at high states.
        let mut p = problem("1", "x", 2.0);
        p.drift_family = Some(FamilyConfig::OuTimeMean {
            theta: 1.0,
            m: "1-t".into(),
        });
        p.orientation = Orientation::Upper;
        config("ou_time_mean", p, simulation(6), theorem_41())
    };

    vec![bm, gbm, bridge_exp, bridge_linear, two_point, ou]
}

pub fn find_example(name: &str) -> Option<RunConfig> {
    builtin_examples().into_iter().find(|c| c.name == name)
}
