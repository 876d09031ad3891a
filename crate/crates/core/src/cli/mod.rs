//! Command-line layer: configuration, presets, output files and the MMS ladder.

pub mod config;
pub mod convergence;
pub mod output;
pub mod presets;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::driver::{ExampleId, RunOutcome, Simulation};
use crate::error::{ConfigError, SolveError};
use crate::mesh::Point;

use config::Config;
use convergence::{mms_ladder, ConvergenceRow};

pub const OUTDIR_ENV: &str = "LIMITFRAC_OUTDIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solve(_) => 2,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Output directory after applying the environment override.
pub fn output_dir(cfg: &Config) -> PathBuf {
    match std::env::var(OUTDIR_ENV) {
        Ok(d) if !d.is_empty() => PathBuf::from(d),
        _ => PathBuf::from(&cfg.output_dir),
    }
}

/// Result of one sweep member.
pub struct CaseResult {
    pub label: String,
    pub config: Config,
    pub outcome: RunOutcome,
    pub initiation_threshold: f64,
}

pub enum Report {
    Convergence(Vec<ConvergenceRow>),
    Cases(Vec<CaseResult>),
}

impl Report {
    /// First solver failure among the cases, which still have their partial output on disk.
    pub fn failure(&self) -> Option<(&str, &SolveError)> {
        match self {
            Report::Convergence(_) => None,
            Report::Cases(cases) => cases
                .iter()
                .find_map(|c| c.outcome.failure.as_ref().map(|e| (c.label.as_str(), e))),
        }
    }
}

/// Runs a resolved configuration and writes its artifacts under `root`.
pub fn execute(cfg: &Config, root: &Path) -> Result<Report, CliError> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    let echo = root.join("resolved.cfg");
    fs::write(&echo, cfg.to_text()).map_err(io_err(&echo))?;
    if cfg.run.example == ExampleId::Ex1 {
        let params = crate::constitutive::ModelParams {
            mu: cfg.mu,
            alpha: cfg.alpha,
            beta: cfg.beta,
            gc: cfg.gc,
            kappa: 0.0,
            xi: 1.0,
        };
        let rows = mms_ladder(&params, cfg.cycles, cfg.run.eps_phi)?;
        let path = root.join("convergence.csv");
        let data: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r.dofs as f64, r.h, r.error, r.rate, r.newton_iterations as f64])
            .collect();
        output::write_csv(&["dofs", "h", "l2_error", "rate", "newton_iterations"], &data, &path)
            .map_err(io_err(&path))?;
        return Ok(Report::Convergence(rows));
    }

    let cases = presets::sweep(cfg);
    let single = cases.len() == 1;
    let results: Vec<Result<CaseResult, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = cases
            .into_iter()
            .map(|(label, c)| {
                let dir = if single { root.to_path_buf() } else { root.join(&label) };
                s.spawn(move || run_case(label, c, &dir))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("case thread panicked")).collect()
    });
    let mut out = Vec::new();
    for r in results {
        out.push(r?);
    }
    Ok(Report::Cases(out))
}

/// Full line through the expected crack path, used for probes.
fn probe_line(path: (Point, Point)) -> (Point, Point) {
    let (a, b) = path;
    (b, [2.0 * a[0] - b[0], 2.0 * a[1] - b[1]])
}

fn run_case(label: String, cfg: Config, dir: &Path) -> Result<CaseResult, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let echo = dir.join("resolved.cfg");
    fs::write(&echo, cfg.to_text()).map_err(io_err(&echo))?;
    let setup = presets::build_setup(&cfg)?;
    let sim = Simulation::new(setup, cfg.run.clone());
    let mesh = sim.setup.mesh.clone();
    let every = cfg.output_every;
    let mut write_err = None;
    let outcome = sim.run(|state, rec| {
        if every > 0 && rec.n % every == 0 {
            let p = dir.join(format!("step_{:04}.vtk", rec.n));
            let fields = [("Phi", state.airy.values.as_slice()), ("phi", state.pf.values.as_slice())];
            if let Err(e) = output::write_vtk(&mesh, &fields, &p) {
                write_err.get_or_insert(CliError::Io(format!("{}: {e}", p.display())));
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    let series = dir.join("series.csv");
    output::write_series_csv(&outcome.records, &series).map_err(io_err(&series))?;
    let last = &outcome.last;
    let fin = dir.join("final.vtk");
    output::write_vtk(&mesh, &[("Phi", &last.airy.values), ("phi", &last.pf.values)], &fin).map_err(io_err(&fin))?;
    let (p0, p1) = probe_line(sim.setup.path);
    let rows = output::probe(&mesh, &last.airy.values, &last.pf.values, &sim.setup.params, p0, p1, 513)
        .map_err(|e| CliError::Config(e.into()))?;
    let probe = dir.join("centerline.csv");
    output::write_probe_csv(&rows, &probe).map_err(io_err(&probe))?;
    let initiation_threshold = sim.setup.initiation_threshold();
    Ok(CaseResult { label, config: cfg, outcome, initiation_threshold })
}

/// Human-readable summary lines.
pub fn summarize(report: &Report) -> Vec<String> {
    match report {
        Report::Convergence(rows) => {
            let mut v = vec![format!("{:>6} {:>10} {:>16} {:>8} {:>7}", "dofs", "h", "l2_error", "rate", "newton")];
            v.extend(rows.iter().map(|r| {
                format!("{:>6} {:>10.7} {:>16.12} {:>8.4} {:>7}", r.dofs, r.h, r.error, r.rate, r.newton_iterations)
            }));
            v
        }
        Report::Cases(cases) => cases
            .iter()
            .map(|c| {
                let o = &c.outcome;
                let last = o.records.last();
                let status = match &o.failure {
                    Some(e) => format!(" FAILED: {e}"),
                    None => String::new(),
                };
                format!(
                    "{}: alpha={} beta={} steps={} tip={:.5} bulk={:.6e} crack={:.6e} max|eps23|={:.6e} initiation={}{}",
                    c.label,
                    c.config.alpha,
                    c.config.beta,
                    o.records.len(),
                    last.map_or(o.initial_tip, |r| r.tip),
                    last.map_or(0.0, |r| r.energy.bulk),
                    last.map_or(0.0, |r| r.energy.crack),
                    last.map_or(0.0, |r| r.max_eps23),
                    o.initiation_step(c.initiation_threshold).map_or("none".into(), |n| n.to_string()),
                    status,
                )
            })
            .collect(),
    }
}
