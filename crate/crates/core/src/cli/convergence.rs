//! Manufactured-solution convergence ladder for the mechanics subproblem.

use std::sync::Arc;

use crate::constitutive::ModelParams;
use crate::error::SolveError;
use crate::fem::{l2_error, ConstraintSet, FeSpace, ScalarField};
use crate::mechanics::{mms_exact, mms_source, solve_mechanics, MechanicsProblem};
use crate::mesh::{BoundaryTag, Mesh};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub dofs: usize,
    /// Cell side length.
    pub h: f64,
    pub error: f64,
    pub rate: f64,
    pub newton_iterations: usize,
    /// Increment norms of the nonlinear solve.
    pub increments: Vec<f64>,
}

/// `rate_k = log2(e_{k-1} / e_k)`, with 0 for the first entry and
/// infinity when an error vanishes.
pub fn convergence_table(errors: &[f64]) -> Vec<f64> {
    errors
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            if k == 0 {
                0.0
            } else if e == 0.0 {
                f64::INFINITY
            } else {
                (errors[k - 1] / e).log2()
            }
        })
        .collect()
}

/// Solves the manufactured problem on meshes refined 1..=cycles times.
/// Nonlinear solves start from the linear solution.
pub fn mms_ladder(params: &ModelParams, cycles: usize, newton_tol: f64) -> Result<Vec<ConvergenceRow>, SolveError> {
    let mut rows = Vec::new();
    for k in 1..=cycles {
        let mesh = Mesh::unit_square(k as u32);
        let mut cons = ConstraintSet::from_mesh(&mesh);
        for t in BoundaryTag::ALL {
            cons.add_dirichlet(&mesh, t, |_| 0.0);
        }
        let space = Arc::new(FeSpace::new(Arc::new(mesh), &cons));
        let p = *params;
        let mut problem = MechanicsProblem::new(space.clone(), cons, params.linear());
        problem.newton_tol = newton_tol;
        problem.source = Some(Arc::new(move |x| mms_source(x, &p)));
        let zero = ScalarField::constant(&space.mesh, 0.0);
        let (mut u, mut rep) = solve_mechanics(&problem, &zero)?;
        if params.beta > 0.0 {
            problem.params = *params;
            (u, rep) = solve_mechanics(&problem, &u)?;
        }
        rows.push(ConvergenceRow {
            dofs: space.mesh.n_nodes(),
            h: 1.0 / (1u64 << k) as f64,
            error: l2_error(&space.mesh, &u, mms_exact),
            rate: 0.0,
            newton_iterations: rep.iterations,
            increments: rep.increments,
        });
    }
    let rates = convergence_table(&rows.iter().map(|r| r.error).collect::<Vec<_>>());
    for (r, q) in rows.iter_mut().zip(rates) {
        r.rate = q;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates() {
        let r = convergence_table(&[0.4, 0.1]);
        assert_eq!(r, vec![0.0, 2.0]);
        assert_eq!(convergence_table(&[1.0, 0.0])[1], f64::INFINITY);
    }
}
