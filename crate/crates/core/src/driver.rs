//! Quasi-static time stepping with the staggered mechanics / phase-field loop.

use std::sync::Arc;

use crate::constitutive::{degradation, recover_stress_strain, ModelParams};
use crate::error::SolveError;
use crate::fem::{norm, sample_line, ConstraintSet, DofMap, FeSpace, ScalarField};
use crate::mechanics::{mech_residual, solve_mechanics, MechanicsProblem};
use crate::mesh::{BoundaryTag, Mesh, Point};
use crate::phasefield::{
    bulk_density_at_qps, pf_residual, solve_phasefield, update_multiplier, ActiveSet, PhaseFieldProblem,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExampleId {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
}

impl ExampleId {
    pub fn name(self) -> &'static str {
        match self {
            ExampleId::Ex1 => "ex1",
            ExampleId::Ex2 => "ex2",
            ExampleId::Ex3 => "ex3",
            ExampleId::Ex4 => "ex4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ex1" => Some(ExampleId::Ex1),
            "ex2" => Some(ExampleId::Ex2),
            "ex3" => Some(ExampleId::Ex3),
            "ex4" => Some(ExampleId::Ex4),
            _ => None,
        }
    }
}

/// Solver controls and time stepping.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub example: ExampleId,
    pub dt: f64,
    pub n_steps: usize,
    pub c: f64,
    pub eps_phi: f64,
    pub eps_pf: f64,
    pub tol_outer: f64,
    pub l_phi: f64,
    pub l_pf: f64,
    pub gamma: f64,
    pub max_newton: usize,
    pub max_staggered: usize,
    /// Consecutive residual increases that abort a step.
    pub divergence_window: usize,
}

impl RunConfig {
    pub fn new(example: ExampleId) -> Self {
        RunConfig {
            example,
            dt: 1.0,
            n_steps: 1,
            c: 0.0,
            eps_phi: 1e-7,
            eps_pf: 1e-7,
            tol_outer: 1e-6,
            l_phi: 1e-6,
            l_pf: 1e-6,
            gamma: 1e4,
            max_newton: 50,
            max_staggered: 200,
            divergence_window: 10,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > 0.0) {
            return Err("dt must be positive".into());
        }
        if !(self.eps_phi > 0.0 && self.eps_pf > 0.0 && self.tol_outer > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if self.l_phi < 0.0 || self.l_pf < 0.0 || self.gamma < 0.0 {
            return Err("stabilization and penalty constants must be non-negative".into());
        }
        if self.max_newton == 0 || self.max_staggered == 0 {
            return Err("iteration caps must be positive".into());
        }
        Ok(())
    }
}

/// Dirichlet segments: each tag takes `weight * c * t`.
pub type Loading = Vec<(BoundaryTag, f64)>;

/// Everything that defines one simulation apart from solver controls.
#[derive(Clone, Debug)]
pub struct Setup {
    pub mesh: Arc<Mesh>,
    pub params: ModelParams,
    pub loading: Loading,
    pub initial_pf: Vec<f64>,
    /// Expected crack path, starting at the initial tip.
    pub path: (Point, Point),
    /// When false the phase field stays at its initial value.
    pub solve_pf: bool,
}

impl Setup {
    /// Tip advance, past the relaxed initial band, that counts as initiation.
    pub fn initiation_threshold(&self) -> f64 {
        self.params.xi
    }
}

/// `φ⁰ = 0` at nodes within `width` of any of the segments, 1 elsewhere.
pub fn initial_band(mesh: &Mesh, slits: &[crate::mesh::SlitSpec], width: f64) -> Vec<f64> {
    mesh.nodes()
        .iter()
        .map(|&p| if slits.iter().any(|s| s.distance(p) <= width) { 0.0 } else { 1.0 })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaggeredState {
    pub n: usize,
    pub time: f64,
    pub airy: ScalarField,
    pub pf: ScalarField,
    pub pf_prev: ScalarField,
    pub multiplier: Vec<f64>,
    pub load: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct EnergyReport {
    pub bulk: f64,
    pub crack: f64,
}

/// Per-step diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub time: f64,
    pub staggered_iterations: usize,
    pub r1: f64,
    pub r2: f64,
    pub mech_newton: usize,
    pub pf_newton: usize,
    pub energy: EnergyReport,
    pub tip: f64,
    pub tip_speed: f64,
    /// Largest nodal `φⁿ − φⁿ⁻¹`.
    pub max_pf_increase: f64,
    /// Largest `|ε₂₃|` along the crack path.
    pub max_eps23: f64,
    pub history: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TipTrace {
    pub positions: Vec<f64>,
    pub speeds: Vec<f64>,
}

impl TipTrace {
    pub fn push(&mut self, pos: f64, dt: f64) {
        let speed = self.positions.last().map_or(0.0, |&p| (pos - p) / dt);
        self.positions.push(pos);
        self.speeds.push(speed);
    }
}

pub struct RunOutcome {
    pub initial: StaggeredState,
    pub records: Vec<StepRecord>,
    pub energies: Vec<EnergyReport>,
    pub tips: TipTrace,
    /// Tip position of the initial phase field.
    pub initial_tip: f64,
    pub last: StaggeredState,
    pub failure: Option<SolveError>,
}

impl RunOutcome {
    /// First step whose tip lies more than `threshold` beyond the tip of the
    /// first step, where the sharp initial band has relaxed but barely loaded.
    pub fn initiation_step(&self, threshold: f64) -> Option<usize> {
        let base = self.records.first()?.tip;
        self.records.iter().find(|r| r.tip - base > threshold).map(|r| r.n)
    }
}

/// Precomputed spaces and problems for one setup.
pub struct Simulation {
    pub setup: Setup,
    pub config: RunConfig,
    mech_space: Arc<FeSpace>,
    pf_space: Arc<FeSpace>,
    template: ConstraintSet,
}

pub const TIP_SAMPLES: usize = 512;

impl Simulation {
    pub fn new(setup: Setup, config: RunConfig) -> Self {
        let mesh = setup.mesh.clone();
        let mut template = ConstraintSet::from_mesh(&mesh);
        for &(tag, w) in &setup.loading {
            template.add_dirichlet(&mesh, tag, |_| w);
        }
        let mech_space = Arc::new(FeSpace::new(mesh.clone(), &template));
        let pf_space = Arc::new(FeSpace::new(mesh.clone(), &ConstraintSet::from_mesh(&mesh)));
        Simulation { setup, config, mech_space, pf_space, template }
    }

    pub fn mech_space(&self) -> &Arc<FeSpace> {
        &self.mech_space
    }

    pub fn pf_space(&self) -> &Arc<FeSpace> {
        &self.pf_space
    }

    fn constraints_at(&self, load: f64) -> ConstraintSet {
        let mut c = self.template.clone();
        for v in c.dirichlet.values_mut() {
            *v *= load;
        }
        c
    }

    pub fn mech_problem(&self, load: f64, pf: &[f64], anchor: &[f64]) -> MechanicsProblem {
        let mut p = MechanicsProblem::new(self.mech_space.clone(), self.constraints_at(load), self.setup.params);
        p.pf = pf.to_vec();
        p.anchor = anchor.to_vec();
        p.l_stab = self.config.l_phi;
        p.newton_tol = self.config.eps_phi;
        p.max_newton = self.config.max_newton;
        p
    }

    pub fn pf_problem(&self, airy: &[f64], prev_time: &[f64], anchor: &[f64], multiplier: &[f64]) -> PhaseFieldProblem {
        let mut p = PhaseFieldProblem::new(self.pf_space.clone(), self.setup.params);
        p.bulk = bulk_density_at_qps(&self.pf_space, airy, &self.setup.params);
        p.pf_prev_time = prev_time.to_vec();
        p.pf_prev_iter = anchor.to_vec();
        p.multiplier = multiplier.to_vec();
        p.gamma = self.config.gamma;
        p.l_stab = self.config.l_pf;
        p.newton_tol = self.config.eps_pf;
        p.max_newton = self.config.max_newton.max(100);
        p
    }

    pub fn initial_state(&self) -> StaggeredState {
        let n = self.setup.mesh.n_nodes();
        let mut pf = self.setup.initial_pf.clone();
        self.pf_space.dofs.resolve_hanging(&mut pf);
        let pf = ScalarField { values: pf };
        StaggeredState {
            n: 0,
            time: 0.0,
            airy: ScalarField { values: vec![0.0; n] },
            pf_prev: pf.clone(),
            pf,
            multiplier: vec![0.0; n],
            load: 0.0,
        }
    }

    /// Mechanics residual with the phase field `pf` and the anchor at `airy` itself.
    pub fn mech_residual_norm(&self, load: f64, airy: &ScalarField, pf: &[f64]) -> f64 {
        norm(&mech_residual(&self.mech_problem(load, pf, &airy.values), airy))
    }

    /// Phase-field residual with the anchor at `pf` itself and the active set it defines.
    pub fn pf_residual_norm(&self, airy: &[f64], pf: &ScalarField, prev_time: &[f64], multiplier: &[f64]) -> f64 {
        let pr = self.pf_problem(airy, prev_time, &pf.values, multiplier);
        let active = ActiveSet::from_state(&pr, &pf.values);
        norm(&pf_residual(&pr, pf, &active))
    }

    /// One quasi-static step from a converged state.
    pub fn advance_step(&self, prev: &StaggeredState) -> Result<(StaggeredState, StepRecord), SolveError> {
        let cfg = &self.config;
        let n = prev.n + 1;
        let time = n as f64 * cfg.dt;
        let load = cfg.c * time;

        let cons = self.constraints_at(load);
        let mut airy = prev.airy.clone();
        cons.distribute(&self.mech_space.dofs, &mut airy.values);
        let pf_old = prev.pf.clone();
        let mut pf = pf_old.clone();
        // Warm start: a converged multiplier already balances the constraint.
        let mut multiplier = prev.multiplier.clone();

        let mut history = Vec::new();
        let mut growth = 0;
        let mut last_worst = f64::INFINITY;
        let (mut mech_newton, mut pf_newton) = (0, 0);
        for i in 1..=cfg.max_staggered {
            let mut mp = self.mech_problem(load, &pf.values, &airy.values);
            let guess = if i == 1 && mp.params.beta > 0.0 {
                let lin = MechanicsProblem { params: mp.params.linear(), ..mp.clone() };
                solve_mechanics(&lin, &airy)?.0
            } else {
                airy.clone()
            };
            mp.anchor = airy.values.clone();
            let (new_airy, rep) = solve_mechanics(&mp, &guess)?;
            mech_newton += rep.iterations;

            let new_pf = if self.setup.solve_pf {
                let pp = self.pf_problem(&new_airy.values, &pf_old.values, &pf.values, &multiplier);
                let (u, rep) = solve_phasefield(&pp, &pf)?;
                pf_newton += rep.newton.iterations;
                // The clamp would hide undershoot from the multiplier and stall its update.
                multiplier = update_multiplier(&multiplier, cfg.gamma, &rep.unclamped, &pf_old.values);
                u
            } else {
                pf.clone()
            };
            airy = new_airy;
            pf = new_pf;

            let r1 = self.mech_residual_norm(load, &airy, &pf.values);
            let r2 = if self.setup.solve_pf {
                self.pf_residual_norm(&airy.values, &pf, &pf_old.values, &multiplier)
            } else {
                0.0
            };
            history.push((r1, r2));
            log::debug!("step {n} iteration {i}: r1 {r1:.3e} r2 {r2:.3e}");
            if r1 <= cfg.tol_outer && r2 <= cfg.tol_outer {
                let state = StaggeredState {
                    n,
                    time,
                    airy,
                    pf_prev: pf_old.clone(),
                    pf,
                    multiplier,
                    load,
                };
                let max_pf_increase = state
                    .pf
                    .values
                    .iter()
                    .zip(&pf_old.values)
                    .map(|(a, b)| a - b)
                    .fold(f64::NEG_INFINITY, f64::max);
                let record = StepRecord {
                    n,
                    time,
                    staggered_iterations: i,
                    r1,
                    r2,
                    mech_newton,
                    pf_newton,
                    energy: compute_energies(&self.pf_space, &state, &self.setup.params),
                    tip: locate_tip(&self.setup.mesh, &state.pf, self.setup.path),
                    tip_speed: 0.0,
                    max_pf_increase,
                    max_eps23: self.max_eps23_on_path(&state),
                    history,
                };
                return Ok((state, record));
            }
            let worst = r1.max(r2);
            growth = if worst > last_worst { growth + 1 } else { 0 };
            last_worst = worst;
            if growth >= cfg.divergence_window {
                return Err(SolveError::Staggered { step: n, iterations: i, r1, r2, history });
            }
        }
        let (r1, r2) = history.last().copied().unwrap_or((f64::NAN, f64::NAN));
        Err(SolveError::Staggered { step: n, iterations: cfg.max_staggered, r1, r2, history })
    }

    fn max_eps23_on_path(&self, state: &StaggeredState) -> f64 {
        let (p0, p1) = self.setup.path;
        let p = &self.setup.params;
        sample_line(&self.setup.mesh, p0, p1, TIP_SAMPLES, |qp| {
            recover_stress_strain(qp.gradient(&state.airy.values), qp.value(&state.pf.values), p).eps23.abs()
        })
        .map(|s| s.into_iter().map(|(_, v)| v).fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
    }

    /// Runs every step, stopping at the first failure with the results so far.
    pub fn run(&self, mut on_step: impl FnMut(&StaggeredState, &StepRecord)) -> RunOutcome {
        let initial = self.initial_state();
        let initial_tip = locate_tip(&self.setup.mesh, &initial.pf, self.setup.path);
        let mut out = RunOutcome {
            initial: initial.clone(),
            records: Vec::new(),
            energies: Vec::new(),
            tips: TipTrace::default(),
            initial_tip,
            last: initial,
            failure: None,
        };
        out.tips.positions.push(initial_tip);
        out.tips.speeds.push(0.0);
        for _ in 0..self.config.n_steps {
            match self.advance_step(&out.last) {
                Ok((state, mut rec)) => {
                    out.tips.push(rec.tip, self.config.dt);
                    rec.tip_speed = *out.tips.speeds.last().expect("pushed");
                    log::info!(
                        "step {} t={:.4}: {} staggered iterations, tip {:.5}, bulk {:.6e}, crack {:.6e}",
                        rec.n,
                        rec.time,
                        rec.staggered_iterations,
                        rec.tip,
                        rec.energy.bulk,
                        rec.energy.crack
                    );
                    on_step(&state, &rec);
                    out.energies.push(rec.energy);
                    out.records.push(rec);
                    out.last = state;
                }
                Err(e) => {
                    log::error!("{e}");
                    out.failure = Some(e);
                    break;
                }
            }
        }
        out
    }
}

/// Convenience wrapper around [`Simulation::run`].
pub fn run_quasistatic(setup: Setup, config: RunConfig) -> RunOutcome {
    Simulation::new(setup, config).run(|_, _| {})
}

/// Bulk energy `½∫ g(φ) W(∇Φ)` and crack energy `G_c ∫ (1−φ)²/(2ξ) + ξ/2 |∇φ|²`.
pub fn compute_energies(space: &FeSpace, state: &StaggeredState, params: &ModelParams) -> EnergyReport {
    energies_of(space, &state.airy.values, &state.pf.values, params)
}

pub fn energies_of(space: &FeSpace, airy: &[f64], pf: &[f64], params: &ModelParams) -> EnergyReport {
    let mut bulk = 0.0;
    let mut crack = 0.0;
    crate::fem::for_each_qp(&space.mesh, space.rule(), |qp| {
        let v = qp.value(pf);
        let g = qp.gradient(pf);
        let ga = qp.gradient(airy);
        bulk += qp.jxw * 0.5 * degradation(v, params) * crate::constitutive::bulk_energy_density(ga, params);
        crack += qp.jxw
            * params.gc
            * ((1.0 - v) * (1.0 - v) / (2.0 * params.xi) + 0.5 * params.xi * (g[0] * g[0] + g[1] * g[1]));
    });
    EnergyReport { bulk, crack }
}

/// Arc length from `path.0` of the farthest of 512 samples with `φ <= 0.5`, or 0.
pub fn locate_tip(mesh: &Mesh, pf: &ScalarField, path: (Point, Point)) -> f64 {
    sample_line(mesh, path.0, path.1, TIP_SAMPLES, |qp| qp.value(&pf.values))
        .map(|s| s.into_iter().filter(|(_, v)| *v <= 0.5).map(|(a, _)| a).fold(0.0, f64::max))
        .unwrap_or(0.0)
}

/// Hanging-node resolution for nodal data on `mesh`.
pub fn resolve(mesh: &Mesh, values: &mut [f64]) {
    DofMap::new(mesh.n_nodes(), &ConstraintSet::from_mesh(mesh)).resolve_hanging(values);
}
