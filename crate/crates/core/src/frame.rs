//! The second dyadic decomposition in two dimensions: directional cutoffs
//! `φ_ω`, their normalization `c_σ`, the Calderón profile `Ψ`, and the
//! reproducing multiplier `m`.

use crate::dyadic::{low_cutoff, BumpProfile};
use crate::error::{Error, Result};
use crate::fourier::{
    forward_transform, inverse_unchecked, FrequencyLattice, GridField, GridSpec, SpectralMultiplier, Spectrum,
};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

/// Equispaced directions on the unit circle with equal quadrature weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionSet {
    vectors: Vec<[f64; 2]>,
    weight: f64,
}

impl DirectionSet {
    /// `ω_l = (cos 2πl/M, sin 2πl/M)` with weights `2π/M`.
    pub fn uniform(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Parameter("direction count must be positive".into()));
        }
        let vectors = (0..count)
            .map(|l| {
                let a = 2.0 * PI * l as f64 / count as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        Ok(DirectionSet { vectors, weight: 2.0 * PI / count as f64 })
    }

    /// Default count `8⌈√|ξ|_max⌉`, which keeps neighbouring directions
    /// closer than the narrowest aperture on the grid.
    pub fn default_count(spec: &GridSpec) -> usize {
        8 * spec.max_frequency().sqrt().ceil() as usize
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, l: usize) -> [f64; 2] {
        self.vectors[l]
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn total_weight(&self) -> f64 {
        self.weight * self.vectors.len() as f64
    }
}

/// The radial factor `Ψ = Θ/√C` with `Θ(t) = exp(−1/(1−log₂(t)²))` on
/// `(1/2, 2)`, normalized so that `∫₀^∞ Ψ(σζ)² dσ/σ = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AngularCalderonProfile {
    sqrt_c: f64,
}

impl Default for AngularCalderonProfile {
    fn default() -> Self {
        Self::new()
    }
}

impl AngularCalderonProfile {
    pub fn new() -> Self {
        // C = ln 2 ∫_{-1}^{1} exp(−2/(1−y²)) dy; the integrand is flat at ±1,
        // so the trapezoid rule converges faster than any power.
        let n = 20_000;
        let h = 2.0 / n as f64;
        let sum: f64 = (1..n).map(|i| Self::theta_log(-1.0 + i as f64 * h).powi(2)).sum();
        AngularCalderonProfile { sqrt_c: (LN_2 * h * sum).sqrt() }
    }

    fn theta_log(y: f64) -> f64 {
        let s = 1.0 - y * y;
        if s <= 0.0 {
            0.0
        } else {
            (-1.0 / s).exp()
        }
    }

    /// `C = ∫ Θ(σ)² dσ/σ`.
    pub fn constant(&self) -> f64 {
        self.sqrt_c * self.sqrt_c
    }

    /// `Ψ(t)` for `t = |ζ|`.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            Self::theta_log(t.log2()) / self.sqrt_c
        }
    }

    /// `∫₀^∞ Ψ(σρ)² dσ/σ` by the trapezoid rule in `u = ln σ` on a fixed
    /// grid of `nodes` points spanning `[−40, 40]`.
    pub fn calderon_integral(&self, rho: f64, nodes: usize) -> f64 {
        let (lo, hi) = (-40.0, 40.0);
        let h = (hi - lo) / (nodes - 1) as f64;
        h * (0..nodes).map(|i| self.eval((lo + i as f64 * h).exp() * rho).powi(2)).sum::<f64>()
    }
}

/// `c_σ = (∫_{S¹} u(|e₁−ν|/√σ)² dν)^{−1/2}` by the trapezoid rule with
/// `nodes` points on the arc where the integrand can be nonzero.
pub fn c_sigma(sigma: f64, profile: &BumpProfile, nodes: usize) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Parameter(format!("sigma = {sigma} must be positive")));
    }
    if nodes < 8 {
        return Err(Error::Parameter("c_sigma needs at least 8 nodes".into()));
    }
    let root = sigma.sqrt();
    let g = |th: f64| profile.eval(2.0 * (th / 2.0).sin().abs() / root).powi(2);
    let reach = root * profile.support() / 2.0;
    let integral = if reach >= 1.0 {
        let h = 2.0 * PI / nodes as f64;
        h * (0..nodes).map(|i| g(-PI + i as f64 * h)).sum::<f64>()
    } else {
        let th_max = 2.0 * reach.asin();
        let h = 2.0 * th_max / (nodes - 1) as f64;
        let inner: f64 = (1..nodes - 1).map(|i| g(-th_max + i as f64 * h)).sum();
        h * (inner + 0.5 * (g(-th_max) + g(th_max)))
    };
    if integral < 1e-14 {
        return Err(Error::Resolution(format!("c_sigma integral {integral:e} at sigma = {sigma}")));
    }
    Ok(integral.powf(-0.5))
}

/// Quadrature node count used when tabulating `c_σ`.
pub const C_SIGMA_NODES: usize = 512;

/// Natural cubic spline on a uniform grid.
#[derive(Clone, Debug)]
struct UniformSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl UniformSpline {
    fn new(x0: f64, h: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        // Tridiagonal system for the second derivatives, natural ends.
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let rhs = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
            let denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            d[i] = (rhs - d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        UniformSpline { x0, h, y, m }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        let s = ((x - self.x0) / self.h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        let (a, b) = (1.0 - t, t);
        let h2 = self.h * self.h / 6.0;
        a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h2
    }
}

/// Spline table of `ln c_σ` against `ln σ` on `[1e-8, σ_full]`, where
/// `σ_full` is the value beyond which the cutoff covers the whole circle
/// and `c_σ` is constant.
#[derive(Clone, Debug)]
pub struct CSigmaTable {
    profile: BumpProfile,
    sigma_lo: f64,
    sigma_full: f64,
    full_value: f64,
    spline: UniformSpline,
}

impl CSigmaTable {
    pub fn build(profile: BumpProfile, knots: usize) -> Result<Self> {
        let sigma_lo: f64 = 1e-8;
        // u(t) = 1 for t ≤ plateau; |e₁−ν| ≤ 2, so σ ≥ (2/plateau)² gives u ≡ 1.
        let sigma_full = (2.0 / profile.plateau()).powi(2);
        let (x0, x1) = (sigma_lo.ln(), sigma_full.ln());
        let h = (x1 - x0) / (knots - 1) as f64;
        let y = (0..knots)
            .into_par_iter()
            .map(|i| c_sigma((x0 + i as f64 * h).exp(), &profile, C_SIGMA_NODES).map(f64::ln))
            .collect::<Result<Vec<_>>>()?;
        let full_value = c_sigma(sigma_full, &profile, C_SIGMA_NODES)?;
        Ok(CSigmaTable { profile, sigma_lo, sigma_full, full_value, spline: UniformSpline::new(x0, h, y) })
    }

    /// Shared table for a profile, built on first use.
    pub fn shared(profile: BumpProfile) -> Result<Arc<CSigmaTable>> {
        type Cache = Mutex<HashMap<(u64, u64), Arc<CSigmaTable>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let key = (profile.plateau().to_bits(), profile.support().to_bits());
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(t.clone());
        }
        let table = Arc::new(CSigmaTable::build(profile, 8192)?);
        cache.lock().unwrap_or_else(|e| e.into_inner()).insert(key, table.clone());
        Ok(table)
    }

    pub fn eval(&self, sigma: f64) -> f64 {
        if sigma >= self.sigma_full {
            self.full_value
        } else if sigma >= self.sigma_lo {
            self.spline.eval(sigma.ln()).exp()
        } else {
            c_sigma(sigma, &self.profile, C_SIGMA_NODES).unwrap_or(f64::INFINITY)
        }
    }
}

/// Analytic description of the directional cutoffs: everything needed to
/// evaluate `φ_ω(ζ)` at an arbitrary point.
#[derive(Clone, Debug)]
pub struct PhiOmegaRule {
    profile: BumpProfile,
    calderon: AngularCalderonProfile,
    table: Arc<CSigmaTable>,
    tau_nodes: usize,
    fixed_nodes: Vec<(f64, f64)>,
}

impl PhiOmegaRule {
    /// Builds the rule for a cutoff profile with `tau_nodes` log-uniform
    /// quadrature nodes per active interval.
    pub fn new(profile: BumpProfile, tau_nodes: usize) -> Result<Self> {
        if tau_nodes < 2 {
            return Err(Error::Parameter("tau quadrature needs at least 2 nodes".into()));
        }
        let calderon = AngularCalderonProfile::new();
        let table = CSigmaTable::shared(profile)?;
        let fixed_nodes = Self::nodes(&calderon, 0.5, 2.0, tau_nodes);
        Ok(PhiOmegaRule { profile, calderon, table, tau_nodes, fixed_nodes })
    }

    pub fn standard() -> Result<Self> {
        Self::new(BumpProfile::standard(), 64)
    }

    fn nodes(cal: &AngularCalderonProfile, lo: f64, hi: f64, count: usize) -> Vec<(f64, f64)> {
        let (a, b) = (lo.ln(), hi.ln());
        let h = (b - a) / (count - 1) as f64;
        (0..count)
            .map(|i| {
                let t = (a + i as f64 * h).exp();
                let w = if i == 0 || i == count - 1 { 0.5 * h } else { h };
                (t, w * cal.eval(t))
            })
            .collect()
    }

    pub fn profile(&self) -> &BumpProfile {
        &self.profile
    }

    pub fn calderon(&self) -> &AngularCalderonProfile {
        &self.calderon
    }

    pub fn c_table(&self) -> &CSigmaTable {
        &self.table
    }

    pub fn tau_nodes(&self) -> usize {
        self.tau_nodes
    }

    /// Cheap test for points where `φ_ω` vanishes identically:
    /// `|ζ| ≤ 1/8` or `|ζ̂ − ω| ≥ √(min(4, 2/|ζ|))·support`.
    pub fn may_be_nonzero(&self, r: f64, d2: f64) -> bool {
        if r <= 0.125 {
            return false;
        }
        let s = self.profile.support();
        d2 < (4.0f64).min(2.0 / r) * s * s
    }

    /// `φ_ω(ζ)` given `r = |ζ|` and `d = |ζ̂ − ω|`.
    pub fn eval_polar(&self, r: f64, d: f64) -> f64 {
        if !self.may_be_nonzero(r, d * d) {
            return 0.0;
        }
        let t_hi = (4.0 * r).min(2.0);
        let owned;
        let nodes: &[(f64, f64)] = if t_hi >= 2.0 {
            &self.fixed_nodes
        } else {
            owned = Self::nodes(&self.calderon, 0.5, t_hi, self.tau_nodes);
            &owned
        };
        nodes
            .iter()
            .map(|&(t, w)| {
                let sigma = t / r;
                let u = self.profile.eval(d / sigma.sqrt());
                if u == 0.0 || w == 0.0 {
                    0.0
                } else {
                    w * self.table.eval(sigma) * u
                }
            })
            .sum()
    }

    /// `φ_ω(ζ)` for a planar frequency.
    pub fn eval(&self, omega: [f64; 2], zeta: [f64; 2]) -> f64 {
        let r = zeta[0].hypot(zeta[1]);
        if r == 0.0 {
            return 0.0;
        }
        let d = (zeta[0] / r - omega[0]).hypot(zeta[1] / r - omega[1]);
        self.eval_polar(r, d)
    }

    /// `Σ_l w_l φ_{ω_l}(ζ)`.
    pub fn direction_sum(&self, dirs: &DirectionSet, zeta: [f64; 2]) -> f64 {
        dirs.vectors().iter().map(|&w| self.eval(w, zeta)).sum::<f64>() * dirs.weight()
    }

    /// `m(ζ) = 1/Σ_l w_l φ_{ω_l}(ζ)` off the lattice (no cutoff below 1/2).
    pub fn reproducing_value(&self, dirs: &DirectionSet, zeta: [f64; 2]) -> f64 {
        1.0 / self.direction_sum(dirs, zeta)
    }
}

/// A tabulated frame: sparse `φ_{ω_l}` on the lattice, the reproducing
/// multiplier `m` and the low cutoff `q`.
#[derive(Clone, Debug)]
pub struct ParabolicFrame {
    spec: GridSpec,
    dirs: DirectionSet,
    rule: PhiOmegaRule,
    phi: Vec<Vec<(u32, f64)>>,
    m: Vec<f64>,
    q: Vec<f64>,
}

/// Parameters from which a frame can be rebuilt.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameParams {
    pub directions: usize,
    pub tau_nodes: usize,
    pub profile_plateau: f64,
    pub profile_support: f64,
}

/// Cutoff below which `m` is set to zero.
pub const REPRODUCING_THRESHOLD: f64 = 0.5;

impl ParabolicFrame {
    /// Builds the frame with the default direction count.
    pub fn new(spec: GridSpec) -> Result<Self> {
        let dirs = DirectionSet::uniform(DirectionSet::default_count(&spec))?;
        Self::build(spec, dirs, PhiOmegaRule::standard()?)
    }

    pub fn with_directions(spec: GridSpec, count: usize) -> Result<Self> {
        Self::build(spec, DirectionSet::uniform(count)?, PhiOmegaRule::standard()?)
    }

    pub fn build(spec: GridSpec, dirs: DirectionSet, rule: PhiOmegaRule) -> Result<Self> {
        if spec.dim() != 2 {
            return Err(Error::Dimension(format!("the parabolic frame is two-dimensional, got n = {}", spec.dim())));
        }
        let lattice = FrequencyLattice::new(spec);
        let phi: Vec<Vec<(u32, f64)>> =
            dirs.vectors().par_iter().map(|&w| build_phi_sparse(&lattice, &rule, w)).collect();
        let mut denom = vec![0.0; spec.len()];
        for list in &phi {
            for &(i, v) in list {
                denom[i as usize] += v;
            }
        }
        let mut m = vec![0.0; spec.len()];
        for i in 0..spec.len() {
            let r = lattice.norm(i);
            if r >= REPRODUCING_THRESHOLD {
                let d = denom[i] * dirs.weight();
                if d < 1e-10 {
                    return Err(Error::InsufficientDirections(format!(
                        "sum of directional cutoffs is {d:e} at |zeta| = {r:.4} with {} directions",
                        dirs.len()
                    )));
                }
                m[i] = 1.0 / d;
            }
        }
        let q = lattice.norms().iter().map(|&t| low_cutoff(t)).collect();
        Ok(ParabolicFrame { spec, dirs, rule, phi, m, q })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.dirs
    }

    pub fn rule(&self) -> &PhiOmegaRule {
        &self.rule
    }

    pub fn params(&self) -> FrameParams {
        FrameParams {
            directions: self.dirs.len(),
            tau_nodes: self.rule.tau_nodes(),
            profile_plateau: self.rule.profile().plateau(),
            profile_support: self.rule.profile().support(),
        }
    }

    /// Nonzero lattice entries of `φ_{ω_l}` as `(spectrum index, value)`.
    pub fn phi_entries(&self, l: usize) -> &[(u32, f64)] {
        &self.phi[l]
    }

    /// `φ_{ω_l}` as a dense multiplier.
    pub fn phi_multiplier(&self, l: usize) -> SpectralMultiplier {
        let mut v = vec![0.0; self.spec.len()];
        for &(i, x) in &self.phi[l] {
            v[i as usize] = x;
        }
        SpectralMultiplier::from_real(self.spec, v)
    }

    /// Lattice values of `m` in spectrum order.
    pub fn m_values(&self) -> &[f64] {
        &self.m
    }

    pub fn m_multiplier(&self) -> SpectralMultiplier {
        SpectralMultiplier::from_real(self.spec, self.m.clone())
    }

    /// Lattice values of the low cutoff `q`.
    pub fn q_values(&self) -> &[f64] {
        &self.q
    }

    /// Direction `l` applied to a spectrum, with extra radial weights.
    pub(crate) fn direction_field(&self, s: &Spectrum, l: usize, radial: Option<&[f64]>) -> GridField {
        let mut out = Spectrum::zeros(self.spec);
        let vals = out.values_mut();
        for &(i, x) in &self.phi[l] {
            let i = i as usize;
            let w = radial.map_or(x, |r| x * r[i]);
            vals[i] = s.values()[i] * w;
        }
        inverse_unchecked(&out)
    }

    /// `Σ_l w_l φ_l(ζ)²` on the lattice, plus `q²`: the symbol whose square
    /// root defines the Hilbert form of the `p = 2`, `s = 0` norm.
    pub fn hilbert_weight(&self) -> Vec<f64> {
        let mut acc: Vec<f64> = self.q.iter().map(|q| q * q).collect();
        for list in &self.phi {
            for &(i, v) in list {
                acc[i as usize] += self.dirs.weight() * v * v;
            }
        }
        acc.into_iter().map(f64::sqrt).collect()
    }

    /// Lattice range `[min, max]` of `m(ζ)|ζ|^{-1/4}` over `lo ≤ |ζ| ≤ hi`.
    pub fn reproducing_growth_band(&self, lo: f64, hi: f64) -> (f64, f64) {
        let lattice = FrequencyLattice::new(self.spec);
        let mut band = (f64::INFINITY, 0.0f64);
        for i in 0..self.spec.len() {
            let r = lattice.norm(i);
            if r >= lo && r <= hi {
                let v = self.m[i] * r.powf(-0.25);
                band = (band.0.min(v), band.1.max(v));
            }
        }
        band
    }
}

fn build_phi_sparse(lattice: &FrequencyLattice, rule: &PhiOmegaRule, w: [f64; 2]) -> Vec<(u32, f64)> {
    let mut out = Vec::new();
    for i in 0..lattice.len() {
        let r = lattice.norm(i);
        if r <= 0.125 {
            continue;
        }
        let xi = lattice.xi(i);
        let d2 = (xi[0] / r - w[0]).powi(2) + (xi[1] / r - w[1]).powi(2);
        if !rule.may_be_nonzero(r, d2) {
            continue;
        }
        let v = rule.eval_polar(r, d2.sqrt());
        if v != 0.0 {
            out.push((i as u32, v));
        }
    }
    out
}

/// `{φ_{ω_l}(D)f}_l`. Materializes one field per direction; prefer the
/// norm routines for large grids.
pub fn frame_analyze(f: &GridField, frame: &ParabolicFrame) -> Result<Vec<GridField>> {
    frame.spec.ensure_same(f.spec())?;
    let s = forward_transform(f)?;
    Ok((0..frame.dirs.len()).into_par_iter().map(|l| frame.direction_field(&s, l, None)).collect())
}

/// `Σ_l w_l m(D) g_l`.
pub fn frame_synthesize(collection: &[GridField], frame: &ParabolicFrame) -> Result<GridField> {
    if collection.len() != frame.dirs.len() {
        return Err(Error::Dimension(format!(
            "collection has {} members, frame has {} directions",
            collection.len(),
            frame.dirs.len()
        )));
    }
    let mut acc = Spectrum::zeros(frame.spec);
    for g in collection {
        frame.spec.ensure_same(g.spec())?;
        let s = forward_transform(g)?;
        for (a, b) in acc.values_mut().iter_mut().zip(s.values()) {
            *a += b;
        }
    }
    let w = frame.dirs.weight();
    for (a, &m) in acc.values_mut().iter_mut().zip(&frame.m) {
        *a *= w * m;
    }
    Ok(inverse_unchecked(&acc))
}

/// The reproducing multiplier of a built frame.
pub fn build_reproducing_m(frame: &ParabolicFrame) -> SpectralMultiplier {
    frame.m_multiplier()
}

/// `φ_ω` tabulated on the lattice as a dense multiplier.
pub fn build_phi_omega(spec: GridSpec, omega: [f64; 2], rule: &PhiOmegaRule) -> Result<SpectralMultiplier> {
    let norm = omega[0].hypot(omega[1]);
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!("direction has norm {norm}, expected 1")));
    }
    if spec.dim() != 2 {
        return Err(Error::Dimension("the parabolic frame is two-dimensional".into()));
    }
    let lattice = FrequencyLattice::new(spec);
    let mut v = vec![0.0; spec.len()];
    for (i, x) in build_phi_sparse(&lattice, rule, omega) {
        v[i as usize] = x;
    }
    Ok(SpectralMultiplier::from_real(spec, v))
}

/// Least-squares slope of `ln m` against `ln |ζ|` along the ray at `angle`.
pub fn growth_exponent(rule: &PhiOmegaRule, dirs: &DirectionSet, angle: f64, lo: f64, hi: f64, samples: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (0..samples)
        .map(|i| {
            let r = (lo.ln() + (hi / lo).ln() * i as f64 / (samples - 1) as f64).exp();
            let m = rule.reproducing_value(dirs, [r * angle.cos(), r * angle.sin()]);
            (r.ln(), m.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Centered finite-difference `∂^α g` at `x` with per-axis step `h`, for
/// orders up to 3 per axis.
pub fn finite_difference(g: &dyn Fn([f64; 2]) -> f64, x: [f64; 2], alpha: [usize; 2], h: f64) -> f64 {
    let s0 = stencil(alpha[0]);
    let s1 = stencil(alpha[1]);
    let mut acc = 0.0;
    for &(o0, c0) in &s0 {
        for &(o1, c1) in &s1 {
            acc += c0 * c1 * g([x[0] + o0 as f64 * h, x[1] + o1 as f64 * h]);
        }
    }
    acc / h.powi((alpha[0] + alpha[1]) as i32)
}

/// Centered difference weights for a derivative of the given order.
pub(crate) fn stencil(order: usize) -> Vec<(i64, f64)> {
    match order {
        0 => vec![(0, 1.0)],
        1 => vec![(-1, -0.5), (1, 0.5)],
        2 => vec![(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => vec![(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        _ => panic!("finite-difference order {order} not supported"),
    }
}

/// Multi-indices `α ∈ Z₊²` with `|α| ≤ max`.
pub fn multi_indices(max: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    for total in 0..=max {
        for a0 in (0..=total).rev() {
            out.push([a0, total - a0]);
        }
    }
    out
}

/// One row of [`anisotropic_bound_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnisotropicRow {
    pub alpha: [usize; 2],
    pub sup: f64,
    pub argmax: [f64; 2],
}

/// Sampled suprema of `|ξ^α ∂^α(⟨ξ⟩^{-1/4} φ_{e₁}(ξ))|` over a log-spaced
/// set of radii in `[1/4, max_radius]` and angles across the aperture.
pub fn anisotropic_bound_check(rule: &PhiOmegaRule, max_radius: f64, alpha_max: usize) -> Result<Vec<AnisotropicRow>> {
    if alpha_max > 3 {
        return Err(Error::Parameter(format!("alpha_max = {alpha_max} exceeds 3")));
    }
    let g = |z: [f64; 2]| {
        let r2 = z[0] * z[0] + z[1] * z[1];
        (1.0 + r2).powf(-0.125) * rule.eval([1.0, 0.0], z)
    };
    let radii = 96;
    let angles = 41;
    let mut pts = Vec::with_capacity(radii * angles);
    for i in 0..radii {
        let r = (0.25f64.ln() + (max_radius / 0.25).ln() * i as f64 / (radii - 1) as f64).exp();
        let ap = 2.0 * ((2.0f64 / r).sqrt() / 2.0).min(1.0).asin();
        for j in 0..angles {
            let th = ap * (2.0 * j as f64 / (angles - 1) as f64 - 1.0);
            pts.push([r * th.cos(), r * th.sin()]);
        }
    }
    Ok(multi_indices(alpha_max)
        .into_iter()
        .map(|alpha| {
            let (sup, argmax) = pts
                .par_iter()
                .map(|&x| {
                    let r = x[0].hypot(x[1]);
                    let h = 2e-3 * r.max(0.25) * r.max(0.25).powf(-0.5);
                    let d = finite_difference(&g, x, alpha, h);
                    let weight = x[0].abs().powi(alpha[0] as i32) * x[1].abs().powi(alpha[1] as i32);
                    ((weight * d).abs(), x)
                })
                .reduce(|| (0.0, [0.0, 0.0]), |a, b| if b.0 > a.0 { b } else { a });
            AnisotropicRow { alpha, sup, argmax }
        })
        .collect())
}

/// Sampled growth constants `sup |∂^α φ_ω(ζ)| |ζ|^{|α|/2 − 1/4}` over
/// `4 ≤ |ζ| ≤ max_radius`, and the radial-direction variant
/// `sup |(ω·∇)φ_ω(ζ)| |ζ|^{3/4}`.
pub fn growth_constants(rule: &PhiOmegaRule, omega: [f64; 2], max_radius: f64) -> Vec<(String, f64)> {
    let g = |z: [f64; 2]| rule.eval(omega, z);
    let mut pts = Vec::new();
    let radii = 48;
    for i in 0..radii {
        let r = (4.0f64.ln() + (max_radius / 4.0).ln() * i as f64 / (radii - 1) as f64).exp();
        let ap = 2.0 * ((2.0f64 / r).sqrt() / 2.0).min(1.0).asin();
        let base = omega[1].atan2(omega[0]);
        for j in 0..25 {
            let th = base + ap * (2.0 * j as f64 / 24.0 - 1.0);
            pts.push([r * th.cos(), r * th.sin()]);
        }
    }
    let mut out = Vec::new();
    for alpha in multi_indices(2) {
        let sup = pts
            .par_iter()
            .map(|&x| {
                let r = x[0].hypot(x[1]);
                let h = 2e-3 * r.sqrt();
                let order = (alpha[0] + alpha[1]) as f64;
                (finite_difference(&g, x, alpha, h) * r.powf(order / 2.0 - 0.25)).abs()
            })
            .reduce(|| 0.0, f64::max);
        out.push((format!("d{}{}", alpha[0], alpha[1]), sup));
    }
    let radial = pts
        .par_iter()
        .map(|&x| {
            let r = x[0].hypot(x[1]);
            let h = 2e-3 * r.sqrt();
            let fwd = g([x[0] + h * omega[0], x[1] + h * omega[1]]);
            let bwd = g([x[0] - h * omega[0], x[1] - h * omega[1]]);
            ((fwd - bwd) / (2.0 * h) * r.powf(0.75)).abs()
        })
        .reduce(|| 0.0, f64::max);
    out.push(("radial1".into(), radial));
    out
}

/// Convenience: spectrum entries of a plane wave's analysis coefficient.
pub fn plane_wave_coefficients(frame: &ParabolicFrame, xi: [f64; 2]) -> Vec<f64> {
    frame.dirs.vectors().iter().map(|&w| frame.rule.eval(w, xi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{relative_error, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rule() -> PhiOmegaRule {
        PhiOmegaRule::standard().unwrap()
    }

    #[test]
    fn directions_are_unit_with_total_weight() {
        let d = DirectionSet::uniform(37).unwrap();
        assert!(d.vectors().iter().all(|v| (v[0].hypot(v[1]) - 1.0).abs() < 1e-15));
        assert!((d.total_weight() - 2.0 * PI).abs() < 1e-12);
        assert!(DirectionSet::uniform(0).is_err());
    }

    #[test]
    fn calderon_normalization() {
        let cal = AngularCalderonProfile::new();
        for i in 0..20 {
            let rho = (1e-3f64.ln() + (1e3f64 / 1e-3).ln() * i as f64 / 19.0).exp();
            assert!((cal.calderon_integral(rho, 16_001) - 1.0).abs() < 1e-10);
        }
        assert_eq!(cal.eval(0.5), 0.0);
        assert_eq!(cal.eval(2.0), 0.0);
        assert!(cal.eval(1.0) > 0.0);
    }

    #[test]
    fn c_sigma_closed_form_and_monotone() {
        let u = BumpProfile::standard();
        let c16 = c_sigma(16.0, &u, C_SIGMA_NODES).unwrap();
        assert!((c16 / (2.0 * PI).powf(-0.5) - 1.0).abs() < 1e-8);
        let mut prev = f64::INFINITY;
        for i in 0..60 {
            let s = 1e-4 * 1.25f64.powi(i);
            let c = c_sigma(s, &u, C_SIGMA_NODES).unwrap();
            assert!(c <= prev * (1.0 + 1e-12));
            prev = c;
        }
        assert!(c_sigma(0.0, &u, 512).is_err());
        assert!(c_sigma(-1.0, &u, 512).is_err());
    }

    #[test]
    fn c_sigma_matches_brute_force_oracle() {
        // Oracle: full-circle trapezoid with 8192 nodes, no arc restriction.
        let u = BumpProfile::standard();
        for &s in &[0.05, 0.1, 0.3, 1.0, 2.5, 7.0, 15.0, 40.0] {
            let h = 2.0 * PI / 8192.0;
            let root: f64 = s;
            let i: f64 = (0..8192)
                .map(|k| u.eval(2.0 * ((-PI + k as f64 * h) / 2.0).sin().abs() / root.sqrt()).powi(2))
                .sum::<f64>()
                * h;
            let oracle = i.powf(-0.5);
            let got = c_sigma(s, &u, C_SIGMA_NODES).unwrap();
            assert!((got / oracle - 1.0).abs() < 1e-8, "sigma {s}: {got} vs {oracle}");
        }
    }

    #[test]
    fn c_sigma_rotation_of_reference_direction() {
        // Rotating e₁ shifts the periodic integrand; the full-circle rule is shift invariant.
        let u = BumpProfile::standard();
        for &s in &[5.0, 9.0] {
            let base = c_sigma(s, &u, 1024).unwrap();
            let h = 2.0 * PI / 1024.0;
            let shift = 0.37;
            let i: f64 = (0..1024)
                .map(|k| {
                    let nu = -PI + k as f64 * h;
                    u.eval(2.0 * ((nu - shift) / 2.0).sin().abs() / f64::sqrt(s)).powi(2)
                })
                .sum::<f64>()
                * h;
            assert!((i.powf(-0.5) / base - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn c_table_matches_direct_evaluation() {
        let rule = rule();
        let table = rule.c_table();
        let u = BumpProfile::standard();
        for i in 0..200 {
            let s = (1e-7f64.ln() + (20.0f64 / 1e-7).ln() * (i as f64 + 0.37) / 200.0).exp();
            let direct = c_sigma(s, &u, C_SIGMA_NODES).unwrap();
            assert!((table.eval(s) / direct - 1.0).abs() < 1e-9, "sigma {s}");
        }
    }

    #[test]
    fn phi_support_examples() {
        let r = rule();
        let w = [1.0, 0.0];
        for k in 0..16 {
            let a = k as f64 * PI / 8.0;
            assert_eq!(r.eval([a.cos(), a.sin()], [0.1 * a.cos(), 0.1 * a.sin()]), 0.0);
            assert_eq!(r.eval([a.cos(), a.sin()], [0.0, 0.1]), 0.0);
        }
        assert!(r.eval(w, [4.0, 0.0]) > 0.0);
        // |ζ̂ − ω| = 3|ζ|^{-1/2} at |ζ| = 16: d = 0.75.
        let rad = 16.0f64;
        let d = 3.0 / rad.sqrt();
        let ang = 2.0 * (d / 2.0).asin();
        assert_eq!(r.eval(w, [rad * ang.cos(), rad * ang.sin()]), 0.0);
        assert_eq!(r.eval(w, [0.0, 0.0]), 0.0);
    }

    #[test]
    fn rotational_covariance() {
        let r = rule();
        let dirs = DirectionSet::uniform(24).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let rad: f64 = rng.random_range(0.2..40.0);
            let th: f64 = rng.random_range(-0.8..0.8);
            let z = [rad * th.cos(), rad * th.sin()];
            let base = r.eval(dirs.vector(0), z);
            for l in 1..dirs.len() {
                let a = 2.0 * PI * l as f64 / dirs.len() as f64;
                let rz = [a.cos() * z[0] - a.sin() * z[1], a.sin() * z[0] + a.cos() * z[1]];
                assert!((r.eval(dirs.vector(l), rz) - base).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn frame_support_is_exact_on_lattice() {
        let g = GridSpec::desk(64).unwrap();
        let frame = ParabolicFrame::new(g).unwrap();
        let lat = FrequencyLattice::new(g);
        for l in 0..frame.directions().len() {
            let w = frame.directions().vector(l);
            for &(i, v) in frame.phi_entries(l) {
                let r = lat.norm(i as usize);
                let xi = lat.xi(i as usize);
                let d = (xi[0] / r - w[0]).hypot(xi[1] / r - w[1]);
                assert!(v > 0.0);
                assert!(r >= 0.125 && d <= 2.0 / r.sqrt());
            }
        }
    }

    #[test]
    fn reproduction_and_low_pass() {
        let g = GridSpec::desk(64).unwrap();
        let frame = ParabolicFrame::new(g).unwrap();
        let lat = FrequencyLattice::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = Spectrum::zeros(g);
        for (i, v) in s.values_mut().iter_mut().enumerate() {
            if lat.norm(i) >= 0.5 {
                *v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let f = inverse_unchecked(&s);
        let back = frame_synthesize(&frame_analyze(&f, &frame).unwrap(), &frame).unwrap();
        assert!(relative_error(back.samples(), f.samples()) < 1e-10);

        let low = GridField::plane_wave(g, &[0.0625, 0.0]);
        assert!(frame_analyze(&low, &frame).unwrap().iter().all(|h| h.max_abs() < 1e-14));
        let below_half = GridField::plane_wave(g, &[0.25, 0.125]);
        assert!(frame_synthesize(&frame_analyze(&below_half, &frame).unwrap(), &frame).unwrap().max_abs() < 1e-14);

        let zero: Vec<GridField> = (0..frame.directions().len()).map(|_| GridField::zeros(g)).collect();
        assert_eq!(frame_synthesize(&zero, &frame).unwrap().max_abs(), 0.0);
        assert!(frame_synthesize(&zero[1..], &frame).is_err());
    }

    #[test]
    fn single_member_synthesis_is_weighted_m() {
        let g = GridSpec::desk(64).unwrap();
        let frame = ParabolicFrame::new(g).unwrap();
        let mut coll: Vec<GridField> = (0..frame.directions().len()).map(|_| GridField::zeros(g)).collect();
        let member = GridField::plane_wave(g, &[1.0, 0.5]);
        coll[3] = member.clone();
        let out = frame_synthesize(&coll, &frame).unwrap();
        let expect = crate::fourier::apply_multiplier(&member, &frame.m_multiplier())
            .unwrap()
            .scale(C64::new(frame.directions().weight(), 0.0));
        assert!(relative_error(out.samples(), expect.samples()) < 1e-12);
    }

    #[test]
    fn plane_wave_analysis_matches_support_rule() {
        let g = GridSpec::desk(64).unwrap();
        let frame = ParabolicFrame::new(g).unwrap();
        let xi = [1.5, 1.0];
        let f = GridField::plane_wave(g, &xi);
        let parts = frame_analyze(&f, &frame).unwrap();
        let r = xi[0].hypot(xi[1]);
        for (l, part) in parts.iter().enumerate() {
            let w = frame.directions().vector(l);
            let coef = frame.rule().eval(w, xi);
            assert!(part.sub(&f.scale(C64::new(coef, 0.0))).unwrap().max_abs() < 1e-12);
            let d = (xi[0] / r - w[0]).hypot(xi[1] / r - w[1]);
            if d > 2.0 / r.sqrt() {
                assert_eq!(coef, 0.0);
                assert!(part.max_abs() < 1e-12);
            }
        }
        let sum = frame_synthesize(&parts, &frame).unwrap();
        assert!(relative_error(sum.samples(), f.samples()) < 1e-10);
    }

    #[test]
    fn too_few_directions_fail() {
        let g = GridSpec::desk(128).unwrap();
        assert!(matches!(ParabolicFrame::with_directions(g, 4), Err(Error::InsufficientDirections(_))));
    }

    #[test]
    fn growth_exponent_near_quarter() {
        let r = rule();
        let dirs = DirectionSet::uniform(96).unwrap();
        let slope = growth_exponent(&r, &dirs, 0.3, 4.0, 64.0, 25);
        assert!((slope - 0.25).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn anisotropic_off_support_is_zero() {
        let r = rule();
        let g = |z: [f64; 2]| (1.0 + z[0] * z[0] + z[1] * z[1]).powf(-0.125) * r.eval([1.0, 0.0], z);
        for alpha in multi_indices(2) {
            assert_eq!(finite_difference(&g, [-4.0, 0.0], alpha, 1e-3), 0.0);
        }
        assert!(anisotropic_bound_check(&r, 10.0, 4).is_err());
    }

    #[test]
    fn finite_difference_on_polynomial() {
        let g = |z: [f64; 2]| z[0].powi(3) * z[1].powi(2);
        let x = [1.3, -0.7];
        assert!((finite_difference(&g, x, [1, 0], 1e-4) - 3.0 * 1.69 * 0.49).abs() < 1e-6);
        assert!((finite_difference(&g, x, [3, 0], 1e-2) - 6.0 * 0.49).abs() < 1e-6);
        assert!((finite_difference(&g, x, [1, 2], 1e-3) - 3.0 * 1.69 * 2.0).abs() < 1e-5);
    }
}
