//! Artifact writers. Formats are part of the tool's contract:
//!
//! * `surface.csv`: `t,x,v,g,exercise`, row-major by `t` then `x`, floats
//!   with 17 significant digits, `exercise` in `{0,1}`.
//! * `boundary.csv`: `t,b` with `-inf` / `+inf` sentinels.
//! * `report.json`: `{run_id, config_digest, checks, timings}`.
//! * `simulation.json`: seed-dependent path statistics.
//! * `summary.txt`: human-readable digest of the above.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use stopbound::{Boundary64, BoundaryValue, CheckReport, Surface64, Verdict};

use crate::config::Format;
use crate::run::{RunArtifacts, WorkCounters};

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_surface_csv<W: Write>(surface: &Surface64, mut w: W) -> io::Result<()> {
    writeln!(w, "t,x,v,g,exercise")?;
    let grid = surface.grid();
    for (k, &t) in grid.t_nodes().iter().enumerate() {
        for (j, &x) in grid.x_nodes().iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                num(t),
                num(x),
                num(surface.v()[k][j]),
                num(surface.obstacle()[k][j]),
                u8::from(surface.exercise()[k][j])
            )?;
        }
    }
    Ok(())
}

pub fn write_boundary_csv<W: Write>(boundary: &Boundary64, mut w: W) -> io::Result<()> {
    writeln!(w, "t,b")?;
    for (t, b) in boundary.t_nodes.iter().zip(&boundary.values) {
        let b = match b {
            BoundaryValue::NegInf => "-inf".to_string(),
            BoundaryValue::PosInf => "+inf".to_string(),
            BoundaryValue::Finite(v) => num(*v),
        };
        writeln!(w, "{},{b}", num(*t))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Report<'a> {
    run_id: &'a str,
    config_digest: &'a str,
    checks: &'a [CheckReport],
    timings: &'a WorkCounters,
}

pub fn report_json(a: &RunArtifacts) -> String {
    let r = Report {
        run_id: &a.run_id,
        config_digest: &a.config_digest,
        checks: &a.checks,
        timings: &a.counters,
    };
    serde_json::to_string_pretty(&r).expect("report serializes") + "\n"
}

pub fn checks_json(checks: &[CheckReport]) -> String {
    serde_json::to_string_pretty(checks).expect("reports serialize") + "\n"
}

fn verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

pub fn check_table(checks: &[CheckReport]) -> String {
    let mut s = String::new();
    for c in checks {
        let witness = match c.witness {
            Some(w) => match w.x {
                Some(x) => format!(" at (t={:.6}, x={:.6})", w.t, x),
                None => format!(" at t={:.6}", w.t),
            },
            None => String::new(),
        };
        s += &format!(
            "  {:<13} {:<30} worst={:+.3e} tol={:.3e}{witness}\n",
            verdict(c.verdict),
            c.check,
            c.worst,
            c.tol
        );
    }
    s
}

pub fn summary_text(a: &RunArtifacts) -> String {
    let cfg = &a.config;
    let p = &cfg.problem;
    let grid = a.surface.grid();
    let mut s = format!("run {}\nconfig digest {}\n\n", a.run_id, a.config_digest);
    s += &format!(
        "problem: horizon {} on {:?}, {:?} boundary{}\n",
        p.horizon,
        p.state_space,
        p.orientation,
        if p.reduce {
            ", solved for w = v - g"
        } else {
            ""
        }
    );
    s += &format!(
        "grid: {}x{} nodes, t in [0, {:.6}], x in [{:.6}, {:.6}], theta {}\n",
        grid.nt() + 1,
        grid.nx() + 1,
        grid.t_eff(),
        grid.x_min(),
        grid.x_max(),
        cfg.grid.theta
    );
    let finite: Vec<f64> = a
        .boundary
        .values
        .iter()
        .filter_map(|b| b.finite())
        .collect();
    let neg = a
        .boundary
        .values
        .iter()
        .filter(|b| **b == BoundaryValue::NegInf)
        .count();
    let pos = a
        .boundary
        .values
        .iter()
        .filter(|b| **b == BoundaryValue::PosInf)
        .count();
    s += &format!(
        "boundary: {} finite nodes, {neg} at -inf, {pos} at +inf",
        finite.len()
    );
    if let (Some(lo), Some(hi)) = (
        finite.iter().copied().reduce(f64::min),
        finite.iter().copied().reduce(f64::max),
    ) {
        s += &format!(", range [{lo:.6}, {hi:.6}]");
    }
    s += "\n";
    let sim = &a.simulation;
    s += &format!(
        "paths: {} x {} steps ({:?}, seed {}), terminal mean {:.6}, variance {:.6}, {} poisoned\n",
        sim.n_paths,
        sim.n_steps,
        sim.scheme,
        sim.seed,
        sim.terminal_mean,
        sim.terminal_var,
        sim.poisoned
    );
    for c in &sim.couplings {
        s += &format!(
            "coupling u={} t={} x={} on {}: order statistic {:.3e} (dt {:.3e})\n",
            c.u, c.t, c.x, c.region, c.statistic, c.dt
        );
    }
    if let Some(l) = &sim.lsmc {
        s += &format!(
            "lsmc at (t={}, x={}): {:.6} ± {:.6} (degree {}), FD {:.6}\n",
            l.t, l.x, l.estimate, l.standard_error, l.degree_used, l.fd_value
        );
    }
    for w in &a.warnings {
        s += &format!("warning: {w}\n");
    }
    s += "\nchecks (grid scale):\n";
    s += &check_table(&a.checks);
    let failed = a.checks.iter().filter(|c| c.failed()).count();
    s += &format!("\n{} checks, {failed} failed\n", a.checks.len());
    s
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes the configured formats into `dir`; returns the written paths.
pub fn export_artifacts(a: &RunArtifacts, dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for format in &a.config.output.formats {
        let path = match format {
            Format::SurfaceCsv => {
                let path = dir.join("surface.csv");
                let mut w = create(&path)?;
                write_surface_csv(&a.surface, &mut w)?;
                w.flush()?;
                path
            }
            Format::BoundaryCsv => {
                let path = dir.join("boundary.csv");
                let mut w = create(&path)?;
                write_boundary_csv(&a.boundary, &mut w)?;
                w.flush()?;
                path
            }
            Format::ReportJson => {
                let path = dir.join("report.json");
                std::fs::write(&path, report_json(a))?;
                path
            }
            Format::SimulationJson => {
                let path = dir.join("simulation.json");
                let text =
                    serde_json::to_string_pretty(&a.simulation).expect("summary serializes") + "\n";
                std::fs::write(&path, text)?;
                path
            }
            Format::Summary => {
                let path = dir.join("summary.txt");
                std::fs::write(&path, summary_text(a))?;
                path
            }
            Format::PathsCsv => {
                let path = dir.join("paths.csv");
                let mut w = create(&path)?;
                a.paths.write_csv(&mut w)?;
                w.flush()?;
                path
            }
        };
        written.push(path);
    }
    Ok(written)
}
