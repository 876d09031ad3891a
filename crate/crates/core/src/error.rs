use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("point ({0}, {1}) lies outside the mesh")]
    OutsideMesh(f64, f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("linear solver stopped after {iterations} iterations at relative residual {residual:e}")]
    Linear { iterations: usize, residual: f64 },
    #[error("{solver} Newton did not converge in {iterations} iterations (last increment {increment:e})")]
    NewtonDivergence { solver: &'static str, iterations: usize, increment: f64 },
    #[error("{solver} line search exhausted at iteration {iteration} (residual {residual:e})")]
    Stagnation { solver: &'static str, iteration: usize, residual: f64 },
    #[error("staggered loop failed at step {step} after {iterations} iterations (r1 {r1:e}, r2 {r2:e})")]
    Staggered { step: usize, iterations: usize, r1: f64, r2: f64, history: Vec<(f64, f64)> },
    #[error("strain {norm} beyond the limiting surface (2 mu beta |eps| = {scaled})")]
    Domain { norm: f64, scaled: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: cannot parse `{value}` for `{key}`")]
    BadValue { line: usize, key: String, value: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}
