//! Classical Sobolev, Zygmund and `H^{s,p}_FIO` norms, the exponent `s(p)`
//! and the exponent budgets of the boundedness theorems.

use crate::dyadic::{pow2, DyadicFamily};
use crate::error::{check_open, check_p, Error, Result};
use crate::fourier::{
    bessel_potential, forward_transform, inverse_unchecked, japanese, lp_norm, lp_norm_unchecked, FrequencyLattice,
    GridField, Spectrum,
};
use crate::frame::ParabolicFrame;
use rayon::prelude::*;
use serde::Serialize;

/// Validated `(p, s, r)` triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormParams {
    pub p: f64,
    pub s: f64,
    pub r: f64,
}

impl NormParams {
    pub fn new(p: f64, s: f64, r: f64) -> Result<Self> {
        check_p(p)?;
        if !s.is_finite() {
            return Err(Error::Parameter(format!("s = {s} must be finite")));
        }
        check_open("r", r, 0.0, f64::INFINITY)?;
        Ok(NormParams { p, s, r })
    }
}

/// `s(p) = (n−1)/2 · |1/p − 1/2|` for `p ∈ [1, ∞]`.
pub fn sobolev_s(p: f64, n: usize) -> f64 {
    let inv = if p.is_infinite() { 0.0 } else { 1.0 / p };
    (n as f64 - 1.0) / 2.0 * (inv - 0.5).abs()
}

/// `‖⟨D⟩^s f‖_{L^p}`.
pub fn classical_norm(f: &GridField, s: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    lp_norm(&bessel_potential(f, s)?, p)
}

/// `sup_j 2^{jr} ‖ψ_j(D)f‖_{L^∞}` over the bands of `fam`.
pub fn zygmund_norm(f: &GridField, r: f64, fam: &DyadicFamily) -> Result<f64> {
    check_open("r", r, 0.0, f64::INFINITY)?;
    fam.spec().ensure_same(f.spec())?;
    let s = forward_transform(f)?;
    Ok(zygmund_of_spectrum(&s, r, fam))
}

pub(crate) fn zygmund_of_spectrum(s: &Spectrum, r: f64, fam: &DyadicFamily) -> f64 {
    fam.active_bands(s)
        .into_iter()
        .map(|j| pow2(j as i32).powf(r) * fam.project_spectrum(s, j).max_abs())
        .fold(0.0, f64::max)
}

/// `‖q(D)f‖_{L^p} + (Σ_l w_l ‖⟨D⟩^s φ_{ω_l}(D) f‖_{L^p}^p)^{1/p}`.
pub fn hpfio_norm(f: &GridField, s: f64, p: f64, frame: &ParabolicFrame) -> Result<f64> {
    Ok(hpfio_norms(f, s, &[p], frame)?[0])
}

/// [`hpfio_norm`] for several exponents at once, sharing the transforms.
pub fn hpfio_norms(f: &GridField, s: f64, ps: &[f64], frame: &ParabolicFrame) -> Result<Vec<f64>> {
    for &p in ps {
        check_p(p)?;
    }
    if !s.is_finite() {
        return Err(Error::Parameter(format!("s = {s} must be finite")));
    }
    frame.spec().ensure_same(f.spec())?;
    let spec = *frame.spec();
    let cell = spec.cell_volume();
    let spectrum = forward_transform(f)?;
    let low = inverse_unchecked(&spectrum.weighted(frame.q_values()));
    let radial: Option<Vec<f64>> =
        (s != 0.0).then(|| FrequencyLattice::new(spec).norms().iter().map(|&t| japanese(t).powf(s)).collect());
    let per_direction: Vec<Vec<f64>> = (0..frame.directions().len())
        .into_par_iter()
        .map(|l| {
            let g = frame.direction_field(&spectrum, l, radial.as_deref());
            ps.iter().map(|&p| lp_norm_unchecked(g.samples(), p, cell).powf(p)).collect()
        })
        .collect();
    let w = frame.directions().weight();
    Ok(ps
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let sum: f64 = per_direction.iter().map(|v| v[k]).sum();
            lp_norm_unchecked(low.samples(), p, cell) + (w * sum).powf(1.0 / p)
        })
        .collect())
}

/// `‖h(D)f‖_{L²}` with `h = (q² + Σ_l w_l φ_l²)^{1/2}`: the Hilbert-space
/// norm comparable to the `p = 2`, `s = 0` frame norm.
pub fn hpfio_hilbert_norm(f: &GridField, frame: &ParabolicFrame) -> Result<f64> {
    frame.spec().ensure_same(f.spec())?;
    let s = forward_transform(f)?;
    Ok(s.weighted(&frame.hilbert_weight()).energy().sqrt())
}

/// The two Sobolev embedding ratios at smoothness `s`:
/// `hpfio(f, s)/classical(f, s + s(p))` and `classical(f, s − s(p))/hpfio(f, s)`.
pub fn embedding_ratios(f: &GridField, s: f64, p: f64, frame: &ParabolicFrame) -> Result<(f64, f64)> {
    let sp = sobolev_s(p, f.spec().dim());
    let h = hpfio_norm(f, s, p, frame)?;
    let upper = classical_norm(f, s + sp, p)?;
    let lower = classical_norm(f, s - sp, p)?;
    if h < 1e-300 || upper < 1e-300 {
        return Err(Error::DegenerateInput("field has zero norm".into()));
    }
    Ok((h / upper, lower / h))
}

/// Exponents governing the boundedness theorems for `C^r_* S^m_{1,δ}` symbols.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentBudget {
    pub r: f64,
    pub delta: f64,
    pub p: f64,
    pub n: usize,
    pub s_p: f64,
    pub tau: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub rho: f64,
    pub eps_slack: f64,
    /// Open interval of admissible `s` (target smoothness).
    pub s_interval: (f64, f64),
}

impl ExponentBudget {
    /// Whether `s` lies strictly inside the admissible interval.
    pub fn admits(&self, s: f64) -> bool {
        s > self.s_interval.0 && s < self.s_interval.1
    }
}

/// Default slack used for `τ` in the borderline case `r = n − 1`.
pub const DEFAULT_EPS_SLACK: f64 = 0.01;

/// Computes `τ, γ, σ, ρ` and the admissible `s`-interval.
///
/// Every loss carries a factor `s(p)`, so all losses vanish at `p = 2`,
/// including the borderline case `r = n − 1`.
pub fn budget(r: f64, delta: f64, p: f64, n: usize, eps_slack: f64) -> Result<ExponentBudget> {
    check_open("r", r, 0.0, f64::INFINITY)?;
    check_p(p)?;
    check_open("eps_slack", eps_slack, 0.0, f64::INFINITY)?;
    if !(0.0..=0.5).contains(&delta) {
        return Err(Error::Parameter(format!("delta = {delta} must lie in [0, 1/2]")));
    }
    if n < 2 {
        return Err(Error::Parameter(format!("dimension n = {n} must be at least 2")));
    }
    let s_p = sobolev_s(p, n);
    let crit = n as f64 - 1.0;
    let tau = if s_p == 0.0 || r > crit {
        0.0
    } else if r == crit {
        eps_slack
    } else {
        2.0 * s_p * (1.0 - r / crit)
    };
    let gamma = if r >= crit { 0.5 + 2.0 * s_p / r } else { 0.5 + 2.0 * s_p / crit };
    let sigma = (2.0 * s_p - (0.5 - delta) * r).max(0.0);
    let rho = (tau - (0.5 - delta) * r).max(0.0);
    Ok(ExponentBudget {
        r,
        delta,
        p,
        n,
        s_p,
        tau,
        gamma,
        sigma,
        rho,
        eps_slack,
        s_interval: (-(1.0 - gamma) * r - s_p, r - s_p),
    })
}
