//! Strain-limiting material law in Airy-stress form.
//!
//! With `g = ∇Φ` and `r = |g|`, the compliance is
//! `Ψ₁(r) = 1 / (2μ (1 + (βr)^α)^{1/α})` and the flux `Ψ₁(r) g` is bounded by
//! `1/(2μβ)` in norm, which is what keeps strains finite at a crack tip.

use crate::error::SolveError;

/// Material and regularization constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gc: f64,
    pub kappa: f64,
    pub xi: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { mu: 1.0, alpha: 1.0, beta: 0.0, gc: 1.0, kappa: 1e-10, xi: 0.01 }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            (self.mu > 0.0, "mu must be positive"),
            (self.alpha > 0.0, "alpha must be positive"),
            (self.beta >= 0.0, "beta must be non-negative"),
            (self.gc > 0.0, "Gc must be positive"),
            (self.kappa > 0.0 && self.kappa < 1.0, "kappa must lie in (0, 1)"),
            (self.xi > 0.0, "xi must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok || !self.mu.is_finite() || !self.alpha.is_finite() || !self.beta.is_finite() {
                return Err(msg.to_string());
            }
        }
        Ok(())
    }

    /// Same constants with `β = 0`.
    pub fn linear(&self) -> Self {
        ModelParams { beta: 0.0, ..*self }
    }
}

/// Gradient of the Airy function and phase-field value at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointState {
    pub grad_phi_airy: [f64; 2],
    pub pf: f64,
}

const R_EPS: f64 = 1e-14;

/// `(βr)^α`.
fn limiter(r: f64, p: &ModelParams) -> f64 {
    if p.beta == 0.0 || r == 0.0 {
        0.0
    } else {
        (p.beta * r).powf(p.alpha)
    }
}

pub fn psi1(r: f64, p: &ModelParams) -> f64 {
    let s = limiter(r, p);
    if s == 0.0 {
        return 1.0 / (2.0 * p.mu);
    }
    1.0 / (2.0 * p.mu * (s.ln_1p() / p.alpha).exp())
}

fn norm2(g: [f64; 2]) -> f64 {
    g[0].hypot(g[1])
}

pub fn flux(g: [f64; 2], p: &ModelParams) -> [f64; 2] {
    let k = psi1(norm2(g), p);
    [k * g[0], k * g[1]]
}

/// `d flux / d g`.
pub fn flux_tangent(g: [f64; 2], p: &ModelParams) -> [[f64; 2]; 2] {
    let r = norm2(g);
    let k = psi1(r, p);
    if r <= R_EPS {
        return [[k, 0.0], [0.0, k]];
    }
    let s = limiter(r, p);
    let c = k * s / (1.0 + s);
    let n = [g[0] / r, g[1] / r];
    let off = -c * n[0] * n[1];
    [[k - c * n[0] * n[0], off], [off, k - c * n[1] * n[1]]]
}

/// `|g|² Ψ₁(|g|)`, the product of stress and strain.
pub fn bulk_energy_density(g: [f64; 2], p: &ModelParams) -> f64 {
    let r2 = g[0] * g[0] + g[1] * g[1];
    r2 * psi1(r2.sqrt(), p)
}

pub fn degradation(pf: f64, p: &ModelParams) -> f64 {
    (1.0 - p.kappa) * pf * pf + p.kappa
}

/// Anti-plane stress and strain components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StressStrain {
    pub sigma13: f64,
    pub sigma23: f64,
    pub eps13: f64,
    pub eps23: f64,
}

pub fn recover_stress_strain(g: [f64; 2], pf: f64, p: &ModelParams) -> StressStrain {
    let d = degradation(pf.clamp(0.0, 1.0), p);
    let k = d * psi1(norm2(g), p);
    StressStrain { sigma13: d * g[1], sigma23: -d * g[0], eps13: k * g[1], eps23: -k * g[0] }
}

/// Strain of an undamaged point carrying the stress vector `sigma`.
pub fn strain_from_stress(sigma: [f64; 2], p: &ModelParams) -> [f64; 2] {
    let k = psi1(norm2(sigma), p);
    [k * sigma[0], k * sigma[1]]
}

fn alpha1_scale(eps: [f64; 2], p: &ModelParams) -> Result<(f64, f64), SolveError> {
    let e = norm2(eps);
    let a = 2.0 * p.mu * p.beta;
    if a * e >= 1.0 || !e.is_finite() {
        return Err(SolveError::Domain { norm: e, scaled: a * e });
    }
    Ok((e, a))
}

/// Stress from strain for `α = 1`: `σ = 2με / (1 − 2μβ|ε|)`.
pub fn invert_alpha1(eps: [f64; 2], p: &ModelParams) -> Result<[f64; 2], SolveError> {
    let (e, a) = alpha1_scale(eps, p)?;
    let k = 2.0 * p.mu / (1.0 - a * e);
    Ok([k * eps[0], k * eps[1]])
}

/// Strain energy for `α = 1` whose gradient is [`invert_alpha1`]:
/// `Ξ = −(1/β) (|ε| + ln(1 − a|ε|)/a)` with `a = 2μβ`; equal to `μ|ε|²` at `β = 0`.
pub fn strain_energy_xi(eps: [f64; 2], p: &ModelParams) -> Result<f64, SolveError> {
    let (e, a) = alpha1_scale(eps, p)?;
    let ae = a * e;
    if ae < 1e-3 {
        // 2μ Σ a^k e^{k+2} / (k+2)
        let mut sum = 0.0;
        let mut term = e * e;
        for k in 0..12 {
            sum += term / (k as f64 + 2.0);
            term *= ae;
        }
        return Ok(2.0 * p.mu * sum);
    }
    Ok(-(e + (-ae).ln_1p() / a) / p.beta)
}
