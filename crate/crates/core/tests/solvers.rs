use std::sync::Arc;

use limitfrac::cli::convergence::mms_ladder;
use limitfrac::constitutive::ModelParams;
use limitfrac::driver::{initial_band, run_quasistatic, ExampleId, RunConfig, Setup, Simulation};
use limitfrac::fem::{ConstraintSet, FeSpace, ScalarField};
use limitfrac::mechanics::{solve_mechanics, MechanicsProblem};
use limitfrac::mesh::{BoundaryTag, Mesh, SlitSpec};
use limitfrac::phasefield::solve_phasefield;

fn l2(space: &FeSpace, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    space.integrate(|qp| qp.value(&d).powi(2)).sqrt()
}

fn notched(n: u32, beta: f64) -> (Setup, RunConfig) {
    let mesh = Mesh::unit_square(n);
    let h = mesh.h_min();
    let params = ModelParams { mu: 1.0, alpha: 0.5, beta, gc: 1.0, kappa: 1e-10 * h, xi: 2.0 * h };
    let slit = SlitSpec::new([0.5, 0.5], [0.5, 1.0]).unwrap();
    let initial_pf = initial_band(&mesh, &[slit], params.xi);
    let setup = Setup {
        mesh: Arc::new(mesh),
        params,
        loading: vec![(BoundaryTag::TopLeftHalf, 1.0), (BoundaryTag::TopRightHalf, -1.0)],
        initial_pf,
        path: ([0.5, 0.5], [0.5, 0.0]),
        solve_pf: true,
    };
    let mut cfg = RunConfig::new(ExampleId::Ex4);
    cfg.dt = 0.1;
    cfg.n_steps = 3;
    cfg.c = 1.0;
    (setup, cfg)
}

#[test]
fn newton_tail_is_quadratic_on_every_ladder_mesh() {
    let p = ModelParams { mu: 0.01, alpha: 1.0, beta: 0.2, gc: 1.0, kappa: 0.0, xi: 1.0 };
    for row in mms_ladder(&p, 6, 1e-7).unwrap() {
        let d = &row.increments;
        assert!(d.len() >= 3, "{d:?}");
        for w in d[d.len() - 3..].windows(2) {
            let c = w[1] / w[0].powf(1.8);
            assert!(c <= 1.0, "dofs {}: C = {c}", row.dofs);
        }
    }
}

#[test]
fn stabilization_vanishes_at_the_fixed_point() {
    let (setup, cfg) = notched(4, 2.0);
    let sim = Simulation::new(setup, cfg);
    let load = 0.3;
    // Intact material: inside a fully degraded band the bulk stiffness is of
    // order κ and the mass term dominates, so the fixed point is reached slowly.
    let pf = vec![1.0; sim.setup.mesh.n_nodes()];
    let start = ScalarField::constant(&sim.setup.mesh, 0.0);
    let mut plain = sim.mech_problem(load, &pf, &start.values);
    plain.l_stab = 0.0;
    plain.newton_tol = 1e-12;
    let (reference, _) = solve_mechanics(&plain, &start).unwrap();

    let mut u = start;
    for _ in 0..5 {
        let mut p = sim.mech_problem(load, &pf, &u.values);
        p.l_stab = 1e-6;
        p.newton_tol = 1e-12;
        u = solve_mechanics(&p, &u).unwrap().0;
    }
    let d = l2(sim.mech_space(), &u.values, &reference.values);
    assert!(d <= 1e-12, "{d:e}");
}

#[test]
fn converged_steps_are_fixed_points_of_both_subproblems() {
    let (setup, cfg) = notched(4, 2.0);
    let tol = cfg.tol_outer;
    let sim = Simulation::new(setup, cfg);
    let mut state = sim.initial_state();
    for _ in 0..3 {
        state = sim.advance_step(&state).unwrap().0;
        let mp = sim.mech_problem(state.load, &state.pf.values, &state.airy.values);
        let (airy, _) = solve_mechanics(&mp, &state.airy).unwrap();
        assert!(l2(sim.mech_space(), &airy.values, &state.airy.values) <= 10.0 * tol);
        let pp = sim.pf_problem(&state.airy.values, &state.pf_prev.values, &state.pf.values, &state.multiplier);
        let (pf, _) = solve_phasefield(&pp, &state.pf).unwrap();
        assert!(l2(sim.pf_space(), &pf.values, &state.pf.values) <= 10.0 * tol);
    }
}

#[test]
fn unloaded_crack_never_heals_with_the_penalty() {
    let (setup, mut cfg) = notched(4, 0.0);
    cfg.c = 0.0;
    let out = run_quasistatic(setup.clone(), cfg.clone());
    assert!(out.failure.is_none());
    assert!(out.records.iter().all(|r| r.max_pf_increase <= 1e-3));

    // Negative control: without the multiplier the band heals.
    cfg.gamma = 0.0;
    let out = run_quasistatic(setup, cfg);
    assert!(out.failure.is_none());
    assert!(out.records[0].max_pf_increase > 1e-3);
}

#[test]
fn linear_mechanics_needs_one_newton_step() {
    let mesh = Arc::new(Mesh::unit_square(4));
    let mut cons = ConstraintSet::from_mesh(&mesh);
    cons.add_dirichlet(&mesh, BoundaryTag::TopLeftHalf, |_| 1.0);
    cons.add_dirichlet(&mesh, BoundaryTag::Bottom, |p| p[0]);
    let space = Arc::new(FeSpace::new(mesh.clone(), &cons));
    let p = MechanicsProblem::new(space, cons, ModelParams { beta: 0.0, ..ModelParams::default() });
    let (_, rep) = solve_mechanics(&p, &ScalarField::constant(&mesh, 0.0)).unwrap();
    assert_eq!(rep.iterations, 1);
}
