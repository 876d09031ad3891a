//! Semi-smooth Newton solver for the phase-field subproblem.
//!
//! The crack-irreversibility penalty `[λ + γ(φ − φⁿ⁻¹)]⁺` is applied node by
//! node with the lumped mass `∫N_i` as weight, so the active set is a nodal
//! indicator and the subproblem is the minimization of
//!
//! `∫ ½(1−κ)φ²W + G_c/(2ξ)(1−φ)² + G_c ξ/2 |∇φ|² + L_φ/2 (φ − φ_prev)²`
//! `+ Σ_i m_i/(2γ) [λ_i + γ(φ_i − φⁿ⁻¹_i)]⁺²`.

use std::sync::Arc;

use crate::constitutive::{bulk_energy_density, ModelParams};
use crate::error::SolveError;
use crate::fem::{dot, for_each_qp, norm, solve_linear, FeSpace, ScalarField, SparseMatrix};
use crate::mechanics::NewtonReport;

#[derive(Clone, Debug)]
pub struct PhaseFieldProblem {
    pub space: Arc<FeSpace>,
    pub params: ModelParams,
    /// Bulk energy density per quadrature point (cell-major, 4 per cell).
    pub bulk: Vec<f64>,
    pub pf_prev_time: Vec<f64>,
    pub pf_prev_iter: Vec<f64>,
    pub multiplier: Vec<f64>,
    pub gamma: f64,
    pub l_stab: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub ls_factor: f64,
    pub ls_max_cuts: usize,
    pub linear_tol: f64,
}

/// Nodal penalty indicator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveSet {
    pub eta: Vec<bool>,
}

impl ActiveSet {
    pub fn inactive(n: usize) -> Self {
        ActiveSet { eta: vec![false; n] }
    }

    /// `η_i = 1` where `λ_i + γ(φ_i − φⁿ⁻¹_i) > 0`.
    pub fn from_state(problem: &PhaseFieldProblem, pf: &[f64]) -> Self {
        ActiveSet {
            eta: (0..pf.len())
                .map(|i| problem.multiplier[i] + problem.gamma * (pf[i] - problem.pf_prev_time[i]) > 0.0)
                .collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.eta.iter().filter(|&&e| e).count()
    }
}

/// `W(∇Φ)` at every 2x2 Gauss point.
pub fn bulk_density_at_qps(space: &FeSpace, airy: &[f64], params: &ModelParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(space.mesh.n_cells() * 4);
    for_each_qp(&space.mesh, space.rule(), |qp| out.push(bulk_energy_density(qp.gradient(airy), params)));
    out
}

impl PhaseFieldProblem {
    /// Problem with no bulk energy, intact history and zero multiplier.
    pub fn new(space: Arc<FeSpace>, params: ModelParams) -> Self {
        let n = space.mesh.n_nodes();
        let nq = space.mesh.n_cells() * 4;
        PhaseFieldProblem {
            space,
            params,
            bulk: vec![0.0; nq],
            pf_prev_time: vec![1.0; n],
            pf_prev_iter: vec![1.0; n],
            multiplier: vec![0.0; n],
            gamma: 1e4,
            l_stab: 0.0,
            newton_tol: 1e-7,
            max_newton: 100,
            ls_factor: 0.5,
            ls_max_cuts: 30,
            linear_tol: 1e-12,
        }
    }

    fn penalty_arg(&self, pf: &[f64], i: usize) -> f64 {
        self.multiplier[i] + self.gamma * (pf[i] - self.pf_prev_time[i])
    }
}

pub fn pf_residual(problem: &PhaseFieldProblem, pf: &ScalarField, active: &ActiveSet) -> Vec<f64> {
    let p = &problem.params;
    let u = &pf.values;
    let (gc, xi, kap) = (p.gc, p.xi, p.kappa);
    let mut r = problem.space.assemble_vector(|qp, r| {
        let v = qp.value(u);
        let g = qp.gradient(u);
        let w = problem.bulk[qp.cell * 4 + qp.index];
        let mass = (1.0 - kap) * v * w - gc / xi * (1.0 - v) + problem.l_stab * (v - qp.value(&problem.pf_prev_iter));
        for a in 0..4 {
            r[a] = qp.jxw * (mass * qp.shape[a] + gc * xi * (g[0] * qp.grad[a][0] + g[1] * qp.grad[a][1]));
        }
    });
    let m = problem.space.lumped_mass();
    problem.space.add_nodal(&mut r, |i| if active.eta[i] { m[i] * problem.penalty_arg(u, i) } else { 0.0 });
    r
}

pub fn pf_jacobian(problem: &PhaseFieldProblem, active: &ActiveSet) -> SparseMatrix {
    let p = &problem.params;
    let (gc, xi, kap) = (p.gc, p.xi, p.kappa);
    let mut k = problem.space.assemble_matrix(|qp, k| {
        let w = problem.bulk[qp.cell * 4 + qp.index];
        let c = (1.0 - kap) * w + gc / xi + problem.l_stab;
        for a in 0..4 {
            for b in 0..4 {
                k[a][b] = qp.jxw
                    * (c * qp.shape[a] * qp.shape[b]
                        + gc * xi * (qp.grad[a][0] * qp.grad[b][0] + qp.grad[a][1] * qp.grad[b][1]));
            }
        }
    });
    let m = problem.space.lumped_mass();
    problem
        .space
        .add_nodal_matrix(&mut k, |i| if active.eta[i] { m[i] * problem.gamma } else { 0.0 });
    k
}

/// The penalized functional whose gradient is [`pf_residual`].
pub fn pf_energy(problem: &PhaseFieldProblem, pf: &ScalarField) -> f64 {
    let p = &problem.params;
    let u = &pf.values;
    let (gc, xi, kap) = (p.gc, p.xi, p.kappa);
    let bulk = problem.space.integrate(|qp| {
        let v = qp.value(u);
        let g = qp.gradient(u);
        let w = problem.bulk[qp.cell * 4 + qp.index];
        let d = v - qp.value(&problem.pf_prev_iter);
        0.5 * (1.0 - kap) * v * v * w
            + gc / (2.0 * xi) * (1.0 - v) * (1.0 - v)
            + 0.5 * gc * xi * (g[0] * g[0] + g[1] * g[1])
            + 0.5 * problem.l_stab * d * d
    });
    let penalty = if problem.gamma > 0.0 {
        let m = problem.space.lumped_mass();
        (0..u.len())
            .map(|i| {
                let a = problem.penalty_arg(u, i).max(0.0);
                m[i] * a * a / (2.0 * problem.gamma)
            })
            .sum()
    } else {
        0.0
    };
    bulk + penalty
}

fn add_increment(problem: &PhaseFieldProblem, base: &ScalarField, delta: &[f64], omega: f64) -> ScalarField {
    let step = problem.space.dofs.expand_increment(delta);
    ScalarField { values: base.values.iter().zip(step).map(|(x, s)| x + omega * s).collect() }
}

/// Outcome of a phase-field solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PfReport {
    pub newton: NewtonReport,
    /// Largest distance of the unclamped iterate from `[0, 1]`.
    pub overshoot: f64,
    pub active_nodes: usize,
    /// Nodal values before clamping.
    pub unclamped: Vec<f64>,
}

/// Semi-smooth Newton with an energy line search; the active set is
/// recomputed at every iterate and the result is clamped to `[0, 1]`.
pub fn solve_phasefield(
    problem: &PhaseFieldProblem,
    initial: &ScalarField,
) -> Result<(ScalarField, PfReport), SolveError> {
    let mut u = initial.clone();
    problem.space.dofs.resolve_hanging(&mut u.values);
    let mut report = PfReport::default();
    let mut history: Vec<ActiveSet> = Vec::new();
    let mut energy = pf_energy(problem, &u);
    let mut converged = false;
    for it in 0..problem.max_newton {
        let active = ActiveSet::from_state(problem, &u.values);
        if history.len() >= 2 && history[history.len() - 2] == active && history[history.len() - 1] != active {
            log::warn!("phase-field active set oscillates at Newton iteration {it}");
        }
        let res = pf_residual(problem, &u, &active);
        let rnorm = norm(&res);
        report.newton.residuals.push(rnorm);
        let jac = pf_jacobian(problem, &active);
        history.push(active);
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let delta = solve_linear(&jac, &rhs, problem.linear_tol)?;
        let dnorm = norm(&delta);
        let slope = -dot(&res, &delta);
        let mut omega = 1.0;
        let mut accepted = None;
        for _ in 0..=problem.ls_max_cuts {
            let trial = add_increment(problem, &u, &delta, omega);
            let e = pf_energy(problem, &trial);
            let tol = 1e-14 * energy.abs().max(1e-300);
            if e <= energy - 1e-4 * omega * slope.abs() + tol || omega * dnorm <= problem.newton_tol {
                accepted = Some((trial, e));
                break;
            }
            omega *= problem.ls_factor;
        }
        let Some((trial, e)) = accepted else {
            return Err(SolveError::Stagnation { solver: "phase-field", iteration: it, residual: rnorm });
        };
        u = trial;
        energy = e;
        report.newton.iterations = it + 1;
        report.newton.increments.push(omega * dnorm);
        if dnorm <= problem.newton_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SolveError::NewtonDivergence {
            solver: "phase-field",
            iterations: problem.max_newton,
            increment: report.newton.increments.last().copied().unwrap_or(f64::NAN),
        });
    }
    report.unclamped = u.values.clone();
    for v in &mut u.values {
        report.overshoot = report.overshoot.max(-*v).max(*v - 1.0);
        *v = v.clamp(0.0, 1.0);
    }
    report.active_nodes = ActiveSet::from_state(problem, &u.values).count();
    Ok((u, report))
}

/// `λ ← [λ + γ(φ − φⁿ⁻¹)]⁺` node by node.
pub fn update_multiplier(multiplier: &[f64], gamma: f64, pf: &[f64], pf_prev_time: &[f64]) -> Vec<f64> {
    multiplier
        .iter()
        .zip(pf.iter().zip(pf_prev_time))
        .map(|(&l, (&p, &q))| (l + gamma * (p - q)).max(0.0))
        .collect()
}
