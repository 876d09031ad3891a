//! Flat `key = value` configuration files.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::driver::{ExampleId, RunConfig};
use crate::error::ConfigError;
use crate::mesh::{Rect, SlitSpec};

use super::presets;

/// How the preset slit enters the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlitMode {
    None,
    /// Duplicated nodes along the slit.
    Carve,
    /// `φ = 0` within `ξ` of the slit.
    Band,
}

impl SlitMode {
    fn name(self) -> &'static str {
        match self {
            SlitMode::None => "none",
            SlitMode::Carve => "carve",
            SlitMode::Band => "band",
        }
    }
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub n_global: u32,
    pub refine_box: Option<Rect>,
    pub refine_levels: u32,
    pub slit: Option<SlitSpec>,
    pub slit_mode: SlitMode,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gc: f64,
    pub kappa_scale: f64,
    pub xi_scale: f64,
    pub run: RunConfig,
    pub cycles: usize,
    pub output_every: usize,
    pub output_dir: String,
    /// Expand an example into its parameter sweep.
    pub sweep: bool,
    /// Keys given explicitly (file or overrides), as opposed to preset defaults.
    pub explicit: BTreeSet<String>,
}

pub const KEYS: &[&str] = &[
    "mesh.n_global",
    "mesh.refine_box",
    "mesh.refine_levels",
    "mesh.slit",
    "mesh.slit_mode",
    "model.mu",
    "model.alpha",
    "model.beta",
    "model.Gc",
    "pf.kappa_scale",
    "pf.xi_scale",
    "pf.gamma",
    "solver.eps_phi",
    "solver.eps_pf",
    "solver.tol_outer",
    "solver.L_phi",
    "solver.L_pf",
    "solver.max_newton",
    "solver.max_staggered",
    "run.dt",
    "run.n_steps",
    "run.c",
    "run.example",
    "run.cycles",
    "run.output_every",
    "run.output_dir",
    "run.sweep",
];

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError::BadValue { line, key: key.into(), value: v.into() })
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>().map_err(|_| ConfigError::BadValue { line, key: key.into(), value: v.into() })
}

fn parse_quad(line: usize, key: &str, v: &str) -> Result<Option<[f64; 4]>, ConfigError> {
    if v == "none" {
        return Ok(None);
    }
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(ConfigError::BadValue { line, key: key.into(), value: v.into() });
    }
    let mut out = [0.0; 4];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_f64(line, key, p)?;
    }
    Ok(Some(out))
}

/// Splits text into `(line number, key, value)` triples.
fn entries(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey { line, key: k.into() });
        }
        out.push((line, k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl Config {
    /// Parses a configuration file body; `run.example` is required.
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        Config::parse_with_overrides(text, &[])
    }

    /// Parses `text`, then applies `key=value` overrides on top.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Config, ConfigError> {
        let mut all = entries(text)?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or(ConfigError::Syntax { line: 0 })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey { line: 0, key: k.into() });
            }
            all.push((0, k.to_string(), v.to_string()));
        }
        let (line, example) = all
            .iter()
            .rev()
            .find(|e| e.1 == "run.example")
            .map(|e| (e.0, e.2.clone()))
            .ok_or_else(|| ConfigError::Missing("run.example".into()))?;
        let id = ExampleId::parse(&example)
            .ok_or(ConfigError::BadValue { line, key: "run.example".into(), value: example })?;
        let mut cfg = presets::defaults(id);
        for (line, k, v) in &all {
            cfg.set(*line, k, v)?;
        }
        // Setting the swept parameter by hand asks for that single case.
        if !cfg.is_explicit("run.sweep") && presets::swept_keys(id).iter().any(|k| cfg.is_explicit(k)) {
            cfg.sweep = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<(), ConfigError> {
        self.explicit.insert(key.to_string());
        let f = || parse_f64(line, key, v);
        let u = || parse_usize(line, key, v);
        match key {
            "mesh.n_global" => self.n_global = u()? as u32,
            "mesh.refine_box" => {
                self.refine_box = parse_quad(line, key, v)?.map(|q| Rect::new([q[0], q[1]], [q[2], q[3]]))
            }
            "mesh.refine_levels" => self.refine_levels = u()? as u32,
            "mesh.slit" => {
                self.slit = match parse_quad(line, key, v)? {
                    Some(q) => Some(SlitSpec::new([q[0], q[1]], [q[2], q[3]])?),
                    None => None,
                }
            }
            "mesh.slit_mode" => {
                self.slit_mode = match v {
                    "none" => SlitMode::None,
                    "carve" => SlitMode::Carve,
                    "band" => SlitMode::Band,
                    _ => return Err(ConfigError::BadValue { line, key: key.into(), value: v.into() }),
                }
            }
            "model.mu" => self.mu = f()?,
            "model.alpha" => self.alpha = f()?,
            "model.beta" => self.beta = f()?,
            "model.Gc" => self.gc = f()?,
            "pf.kappa_scale" => self.kappa_scale = f()?,
            "pf.xi_scale" => self.xi_scale = f()?,
            "pf.gamma" => self.run.gamma = f()?,
            "solver.eps_phi" => self.run.eps_phi = f()?,
            "solver.eps_pf" => self.run.eps_pf = f()?,
            "solver.tol_outer" => self.run.tol_outer = f()?,
            "solver.L_phi" => self.run.l_phi = f()?,
            "solver.L_pf" => self.run.l_pf = f()?,
            "solver.max_newton" => self.run.max_newton = u()?,
            "solver.max_staggered" => self.run.max_staggered = u()?,
            "run.dt" => self.run.dt = f()?,
            "run.n_steps" => self.run.n_steps = u()?,
            "run.c" => self.run.c = f()?,
            "run.example" => {}
            "run.cycles" => self.cycles = u()?,
            "run.output_every" => self.output_every = u()?,
            "run.output_dir" => self.output_dir = v.to_string(),
            "run.sweep" => {
                self.sweep = v.parse().map_err(|_| ConfigError::BadValue { line, key: key.into(), value: v.into() })?
            }
            _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, reason: &str| Err(ConfigError::Invalid { key: key.into(), reason: reason.into() });
        if !(self.mu > 0.0) {
            return bad("model.mu", "must be positive");
        }
        if !(self.alpha > 0.0) {
            return bad("model.alpha", "must be positive");
        }
        if !(self.beta >= 0.0) {
            return bad("model.beta", "must be non-negative");
        }
        if !(self.gc > 0.0) {
            return bad("model.Gc", "must be positive");
        }
        if !(self.kappa_scale >= 0.0) {
            return bad("pf.kappa_scale", "must be non-negative");
        }
        if !(self.xi_scale > 0.0) {
            return bad("pf.xi_scale", "must be positive");
        }
        if self.n_global > 12 || self.n_global + self.refine_levels > 20 {
            return bad("mesh.n_global", "refinement too deep");
        }
        if let Some(b) = self.refine_box {
            if b.min[0] < 0.0 || b.min[1] < 0.0 || b.max[0] > 1.0 || b.max[1] > 1.0 {
                return bad("mesh.refine_box", "must lie inside the unit square");
            }
        }
        if self.slit_mode != SlitMode::None && self.slit.is_none() {
            return bad("mesh.slit_mode", "needs mesh.slit");
        }
        if self.cycles == 0 {
            return bad("run.cycles", "must be positive");
        }
        self.run.validate().map_err(|reason| ConfigError::Invalid { key: "run".into(), reason })
    }

    /// Canonical text form; parsing it reproduces `self` (apart from `explicit`).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let quad = |q: Option<[f64; 4]>| match q {
            Some(q) => format!("{}, {}, {}, {}", q[0], q[1], q[2], q[3]),
            None => "none".into(),
        };
        let r = &self.run;
        let lines: Vec<(&str, String)> = vec![
            ("run.example", r.example.name().into()),
            ("mesh.n_global", self.n_global.to_string()),
            ("mesh.refine_box", quad(self.refine_box.map(|b| [b.min[0], b.min[1], b.max[0], b.max[1]]))),
            ("mesh.refine_levels", self.refine_levels.to_string()),
            ("mesh.slit", quad(self.slit.map(|s| [s.p0[0], s.p0[1], s.p1[0], s.p1[1]]))),
            ("mesh.slit_mode", self.slit_mode.name().into()),
            ("model.mu", self.mu.to_string()),
            ("model.alpha", self.alpha.to_string()),
            ("model.beta", self.beta.to_string()),
            ("model.Gc", self.gc.to_string()),
            ("pf.kappa_scale", self.kappa_scale.to_string()),
            ("pf.xi_scale", self.xi_scale.to_string()),
            ("pf.gamma", r.gamma.to_string()),
            ("solver.eps_phi", r.eps_phi.to_string()),
            ("solver.eps_pf", r.eps_pf.to_string()),
            ("solver.tol_outer", r.tol_outer.to_string()),
            ("solver.L_phi", r.l_phi.to_string()),
            ("solver.L_pf", r.l_pf.to_string()),
            ("solver.max_newton", r.max_newton.to_string()),
            ("solver.max_staggered", r.max_staggered.to_string()),
            ("run.dt", r.dt.to_string()),
            ("run.n_steps", r.n_steps.to_string()),
            ("run.c", r.c.to_string()),
            ("run.cycles", self.cycles.to_string()),
            ("run.output_every", self.output_every.to_string()),
            ("run.output_dir", self.output_dir.clone()),
            ("run.sweep", self.sweep.to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }
}
