//! Newton solver for the Airy-stress subproblem
//! `∫ g(φ) Ψ₁(|∇Φ|)∇Φ·∇w + L_Φ (Φ − Φ_prev) w − f w = 0`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::constitutive::{degradation, flux, flux_tangent, psi1, ModelParams};
use crate::error::SolveError;
use crate::fem::{norm, solve_linear, ConstraintSet, FeSpace, ScalarField, SparseMatrix};
use crate::mesh::Point;

pub type Source = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct MechanicsProblem {
    pub space: Arc<FeSpace>,
    pub constraints: ConstraintSet,
    pub params: ModelParams,
    /// Nodal phase field frozen during the solve.
    pub pf: Vec<f64>,
    /// Nodal L-scheme anchor.
    pub anchor: Vec<f64>,
    pub l_stab: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub ls_factor: f64,
    pub ls_max_cuts: usize,
    pub linear_tol: f64,
    pub source: Option<Source>,
}

/// Per-solve Newton history.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub increments: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl MechanicsProblem {
    /// Undamaged problem with Table 1 tolerances and no stabilization.
    pub fn new(space: Arc<FeSpace>, constraints: ConstraintSet, params: ModelParams) -> Self {
        let n = space.mesh.n_nodes();
        MechanicsProblem {
            space,
            constraints,
            params,
            pf: vec![1.0; n],
            anchor: vec![0.0; n],
            l_stab: 0.0,
            newton_tol: 1e-7,
            max_newton: 50,
            ls_factor: 0.5,
            ls_max_cuts: 30,
            linear_tol: 1e-12,
            source: None,
        }
    }
}

pub fn mech_residual(problem: &MechanicsProblem, field: &ScalarField) -> Vec<f64> {
    let p = &problem.params;
    let u = &field.values;
    problem.space.assemble_vector(|qp, r| {
        let g = qp.gradient(u);
        let d = degradation(qp.value(&problem.pf).clamp(0.0, 1.0), p);
        let q = flux(g, p);
        let mut mass = 0.0;
        if problem.l_stab != 0.0 {
            mass += problem.l_stab * (qp.value(u) - qp.value(&problem.anchor));
        }
        if let Some(f) = &problem.source {
            mass -= f(qp.x);
        }
        for a in 0..4 {
            r[a] = qp.jxw * (d * (q[0] * qp.grad[a][0] + q[1] * qp.grad[a][1]) + mass * qp.shape[a]);
        }
    })
}

pub fn mech_jacobian(problem: &MechanicsProblem, field: &ScalarField) -> SparseMatrix {
    let p = &problem.params;
    let u = &field.values;
    problem.space.assemble_matrix(|qp, k| {
        let g = qp.gradient(u);
        let d = degradation(qp.value(&problem.pf).clamp(0.0, 1.0), p);
        let t = flux_tangent(g, p);
        for b in 0..4 {
            let tg = [
                t[0][0] * qp.grad[b][0] + t[0][1] * qp.grad[b][1],
                t[1][0] * qp.grad[b][0] + t[1][1] * qp.grad[b][1],
            ];
            for a in 0..4 {
                k[a][b] = qp.jxw
                    * (d * (qp.grad[a][0] * tg[0] + qp.grad[a][1] * tg[1])
                        + problem.l_stab * qp.shape[a] * qp.shape[b]);
            }
        }
    })
}

fn add_increment(problem: &MechanicsProblem, base: &ScalarField, delta: &[f64], omega: f64) -> ScalarField {
    let step = problem.space.dofs.expand_increment(delta);
    let mut v = base.values.clone();
    for (x, s) in v.iter_mut().zip(step) {
        *x += omega * s;
    }
    ScalarField { values: v }
}

/// Newton with backtracking on the residual norm; stops once `|δΦ| <= newton_tol`.
pub fn solve_mechanics(
    problem: &MechanicsProblem,
    initial: &ScalarField,
) -> Result<(ScalarField, NewtonReport), SolveError> {
    let mut u = initial.clone();
    problem.constraints.distribute(&problem.space.dofs, &mut u.values);
    let mut report = NewtonReport::default();
    if problem.space.n_dofs() == 0 {
        return Ok((u, report));
    }
    let mut res = mech_residual(problem, &u);
    let mut rnorm = norm(&res);
    let r0 = rnorm;
    report.residuals.push(rnorm);
    for it in 0..problem.max_newton {
        let jac = mech_jacobian(problem, &u);
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let delta = solve_linear(&jac, &rhs, problem.linear_tol)?;
        let dnorm = norm(&delta);
        let mut omega = 1.0;
        let mut accepted = None;
        for _ in 0..=problem.ls_max_cuts {
            let trial = add_increment(problem, &u, &delta, omega);
            let tres = mech_residual(problem, &trial);
            let tnorm = norm(&tres);
            if tnorm < rnorm || omega * dnorm <= problem.newton_tol || tnorm <= 1e-12 * r0 {
                accepted = Some((trial, tres, tnorm));
                break;
            }
            omega *= problem.ls_factor;
        }
        let Some((trial, tres, tnorm)) = accepted else {
            return Err(SolveError::Stagnation { solver: "mechanics", iteration: it, residual: rnorm });
        };
        u = trial;
        res = tres;
        rnorm = tnorm;
        report.iterations = it + 1;
        report.increments.push(omega * dnorm);
        report.residuals.push(rnorm);
        if dnorm <= problem.newton_tol || rnorm <= 1e-10 * r0 {
            return Ok((u, report));
        }
    }
    Err(SolveError::NewtonDivergence {
        solver: "mechanics",
        iterations: problem.max_newton,
        increment: report.increments.last().copied().unwrap_or(f64::NAN),
    })
}

/// Manufactured solution `sin(πx) sin(πy)`.
pub fn mms_exact(p: Point) -> f64 {
    (PI * p[0]).sin() * (PI * p[1]).sin()
}

/// `f = −∇·(Ψ₁(|∇Φₑ|)∇Φₑ)` for [`mms_exact`].
pub fn mms_source(p: Point, params: &ModelParams) -> f64 {
    let (sx, cx) = (PI * p[0]).sin_cos();
    let (sy, cy) = (PI * p[1]).sin_cos();
    let phi = sx * sy;
    let g = [PI * cx * sy, PI * sx * cy];
    let pi2 = PI * PI;
    let h = [[-pi2 * phi, pi2 * cx * cy], [pi2 * cx * cy, -pi2 * phi]];
    let r = g[0].hypot(g[1]);
    let k = psi1(r, params);
    let mut f = 2.0 * pi2 * phi;
    if r > 1e-14 && params.beta > 0.0 {
        let s = (params.beta * r).powf(params.alpha);
        let ghg = g[0] * (h[0][0] * g[0] + h[0][1] * g[1]) + g[1] * (h[1][0] * g[0] + h[1][1] * g[1]);
        f += s / (1.0 + s) * ghg / (r * r);
    }
    k * f
}
