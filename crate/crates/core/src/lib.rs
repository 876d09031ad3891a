//! Quasi-static anti-plane crack evolution in strain-limiting elastic solids.
//!
//! The mechanics is written in terms of an Airy stress function `Φ` whose
//! rotated gradient gives the two anti-plane shear stresses. Cracks are
//! represented by an Ambrosio–Tortorelli phase field `φ` (1 intact, 0 broken).
//! Each quasi-static step alternates a Newton solve for `Φ` with a
//! semi-smooth Newton solve for `φ`, both stabilized by L-scheme mass terms,
//! while an augmented-Lagrangian multiplier keeps the crack from healing.
//!
//! Modules, bottom up:
//! - [`mesh`]: quadtree square meshes, hanging nodes, slits, boundary tags
//! - [`fem`]: Q1 elements, assembly, sparse storage, CG, norms, sampling
//! - [`constitutive`]: the strain-limiting material law
//! - [`mechanics`] and [`phasefield`]: the two subproblem solvers
//! - [`driver`]: time stepping, energies, crack-tip tracking
//! - [`cli`]: configuration, example presets, file output, MMS ladder

pub mod cli;
pub mod constitutive;
pub mod driver;
pub mod error;
pub mod fem;
pub mod mechanics;
pub mod mesh;
pub mod phasefield;


pub use constitutive::ModelParams;
pub use error::{ConfigError, MeshError, SolveError};
pub use fem::ScalarField;
pub use mesh::{BoundaryTag, Mesh, Rect, SlitSpec};
