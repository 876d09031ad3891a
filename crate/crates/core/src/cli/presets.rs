//! Desk-scale presets of the four examples.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::constitutive::ModelParams;
use crate::driver::{initial_band, ExampleId, RunConfig, Setup};
use crate::error::ConfigError;
use crate::mesh::{BoundaryTag, Mesh, Rect, SlitSpec};

use super::config::{Config, SlitMode};

/// Swept parameter values of ex2 (β) and ex3 (α).
pub const EX2_BETAS: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 25.0];
pub const EX3_ALPHAS: [f64; 5] = [1.5, 1.0, 0.5, 0.25, 0.1];
/// `(label, α, β)` of the ex4 cases.
pub const EX4_CASES: [(&str, f64, f64); 4] =
    [("i", 1.0, 0.0), ("ii", 0.5, 0.001), ("iii", 0.5, 0.003), ("iv", 0.3, 0.001)];

fn slit(p0: [f64; 2], p1: [f64; 2]) -> Option<SlitSpec> {
    Some(SlitSpec::new(p0, p1).expect("preset slits are axis aligned"))
}

pub fn defaults(id: ExampleId) -> Config {
    let mut run = RunConfig::new(id);
    let mut cfg = Config {
        n_global: 5,
        refine_box: None,
        refine_levels: 0,
        slit: None,
        slit_mode: SlitMode::None,
        mu: 1.0,
        alpha: 1.0,
        beta: 0.0,
        gc: 1.0,
        kappa_scale: 1e-10,
        xi_scale: 2.0,
        run: run.clone(),
        cycles: 6,
        output_every: 0,
        output_dir: format!("limitfrac-out/{}", id.name()),
        sweep: id != ExampleId::Ex1,
        explicit: BTreeSet::new(),
    };
    match id {
        ExampleId::Ex1 => {
            cfg.mu = 0.01;
            cfg.kappa_scale = 0.0;
            run.l_phi = 1e-6;
        }
        ExampleId::Ex2 => {
            cfg.n_global = 7;
            cfg.slit = slit([0.5, 0.5], [1.0, 0.5]);
            cfg.slit_mode = SlitMode::Carve;
            cfg.gc = 0.01;
            cfg.alpha = 1.5;
            cfg.beta = EX2_BETAS[0];
            run.c = 0.1;
        }
        ExampleId::Ex3 => {
            cfg.n_global = 5;
            cfg.refine_box = Some(Rect::new([0.4, 0.4], [1.0, 0.6]));
            cfg.refine_levels = 2;
            cfg.slit = slit([0.5, 0.5], [1.0, 0.5]);
            cfg.slit_mode = SlitMode::Band;
            cfg.gc = 0.01;
            cfg.beta = 1.0;
            cfg.alpha = EX3_ALPHAS[0];
            run.c = 0.01;
        }
        ExampleId::Ex4 => {
            cfg.n_global = 5;
            cfg.refine_box = Some(Rect::new([0.4, 0.0], [0.6, 1.0]));
            cfg.refine_levels = 2;
            cfg.slit = slit([0.5, 0.5], [0.5, 1.0]);
            cfg.slit_mode = SlitMode::Band;
            cfg.mu = 20.0;
            cfg.gc = 1.0;
            cfg.alpha = EX4_CASES[0].1;
            cfg.beta = EX4_CASES[0].2;
            run.c = 25.0;
            run.dt = 0.01;
            run.n_steps = 80;
            run.gamma = 1e4;
        }
    }
    cfg.run = run;
    cfg
}

pub fn build_mesh(cfg: &Config) -> Result<Mesh, ConfigError> {
    let mut mesh = Mesh::unit_square(cfg.n_global);
    if let (Some(b), true) = (cfg.refine_box, cfg.refine_levels > 0) {
        mesh = mesh.refine_box(b, cfg.refine_levels);
    }
    if let (SlitMode::Carve, Some(s)) = (cfg.slit_mode, cfg.slit) {
        mesh = mesh.carve_slit(s)?;
    }
    Ok(mesh)
}

/// Mesh, material, loading and initial phase field for one configuration.
pub fn build_setup(cfg: &Config) -> Result<Setup, ConfigError> {
    let mesh = build_mesh(cfg)?;
    let h = mesh.h_min();
    let params = ModelParams {
        mu: cfg.mu,
        alpha: cfg.alpha,
        beta: cfg.beta,
        gc: cfg.gc,
        kappa: cfg.kappa_scale * h,
        xi: cfg.xi_scale * h,
    };
    let (loading, path) = match cfg.run.example {
        ExampleId::Ex4 => (
            vec![(BoundaryTag::TopLeftHalf, 1.0), (BoundaryTag::TopRightHalf, -1.0)],
            ([0.5, 0.5], [0.5, 0.0]),
        ),
        _ => (
            vec![(BoundaryTag::RightTopHalf, 1.0), (BoundaryTag::RightBottomHalf, -1.0)],
            ([0.5, 0.5], [0.0, 0.5]),
        ),
    };
    let initial_pf = match (cfg.slit_mode, cfg.slit) {
        (SlitMode::Band, Some(s)) => initial_band(&mesh, &[s], params.xi),
        _ => vec![1.0; mesh.n_nodes()],
    };
    Ok(Setup {
        mesh: Arc::new(mesh),
        params,
        loading,
        initial_pf,
        path,
        solve_pf: matches!(cfg.run.example, ExampleId::Ex3 | ExampleId::Ex4),
    })
}

/// Keys an example sweeps over.
pub fn swept_keys(id: ExampleId) -> &'static [&'static str] {
    match id {
        ExampleId::Ex1 => &[],
        ExampleId::Ex2 => &["model.beta"],
        ExampleId::Ex3 => &["model.alpha"],
        ExampleId::Ex4 => &["model.alpha", "model.beta"],
    }
}

/// Expands an example configuration into its sweep; each member runs as a single case.
pub fn sweep(cfg: &Config) -> Vec<(String, Config)> {
    let with = |label: String, f: &dyn Fn(&mut Config)| {
        let mut c = cfg.clone();
        f(&mut c);
        c.sweep = false;
        c.output_dir = format!("{}/{label}", cfg.output_dir);
        (label, c)
    };
    if !cfg.sweep {
        return vec![("single".into(), cfg.clone())];
    }
    match cfg.run.example {
        ExampleId::Ex1 => vec![("single".into(), cfg.clone())],
        ExampleId::Ex2 => EX2_BETAS.iter().map(|&b| with(format!("beta_{b}"), &|c| c.beta = b)).collect(),
        ExampleId::Ex3 => EX3_ALPHAS.iter().map(|&a| with(format!("alpha_{a}"), &|c| c.alpha = a)).collect(),
        ExampleId::Ex4 => EX4_CASES
            .iter()
            .map(|&(l, a, b)| {
                with(format!("case_{l}"), &|c| {
                    c.alpha = a;
                    c.beta = b;
                })
            })
            .collect(),
    }
}
