//! Application of pseudodifferential operators, band-support checks and
//! empirical operator-norm probing.
//!
//! `a(x, D)f(x) = (2π)^{−n} ∫ e^{ix·η} a(x, η) f̂(η) dη` is evaluated as the
//! lattice Riemann sum, which on the periodic grid equals
//! `L^{−n} Σ_η e^{ix·η} a(x, η) f̂(η)`.

use crate::dyadic::{pow2, DyadicFamily, FamilyKind};
use crate::error::{check_p, Error, Result};
use crate::family::TestFamily;
use crate::fourier::{
    forward_transform, forward_unchecked, inverse_unchecked, FrequencyLattice, GridField, GridSpec, Spectrum, C64,
};
use crate::frame::{FrameParams, ParabolicFrame};
use crate::norms::{hpfio_norms, ExponentBudget};
use crate::symbol::{spectral_leak, DenseSymbol, SeparableSymbol, SupportCondition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// A linear map on grid fields together with its `L²` adjoint.
pub trait LinearOperator: Sync {
    fn spec(&self) -> &GridSpec;
    fn apply(&self, f: &GridField) -> Result<GridField>;
    fn apply_adjoint(&self, g: &GridField) -> Result<GridField>;
}

/// Exponent tables `(Σ_a j_a k_a) mod N` for the plane wave of lattice index `i`.
fn wave_exponents(spec: &GridSpec, i: usize) -> Vec<u32> {
    let n = spec.size();
    let mut axes = vec![0usize; spec.dim()];
    spec.unravel(i, &mut axes);
    let mut out: Vec<u32> = vec![0];
    for &k in &axes {
        let mut next = Vec::with_capacity(out.len() * n);
        for &e in &out {
            for j in 0..n {
                next.push(((e as usize + j * k) % n) as u32);
            }
        }
        out = next;
    }
    out
}

fn roots_of_unity(n: usize, sign: f64) -> Vec<C64> {
    (0..n).map(|m| C64::from_polar(1.0, sign * 2.0 * std::f64::consts::PI * m as f64 / n as f64)).collect()
}

/// Number of partial sums used by the dense paths; fixed so results do not
/// depend on the thread count.
const CHUNKS: usize = 64;

/// Applies a dense symbol by the literal `η`-sum. Cost is `O(N^{2n})`.
pub fn apply_dense(a: &DenseSymbol, f: &GridField) -> Result<GridField> {
    a.spec().ensure_same(f.spec())?;
    let spec = *f.spec();
    let s = forward_unchecked(f);
    let active: Vec<usize> = (0..spec.len()).filter(|&i| s.values()[i] != C64::new(0.0, 0.0)).collect();
    let missing: Vec<f64> = active
        .iter()
        .filter(|&&i| !a.covers(i))
        .map(|&i| FrequencyLattice::new(spec).norm(i))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    let roots = roots_of_unity(spec.size(), 1.0);
    let scale = spec.period().powi(-(spec.dim() as i32));
    let chunk = active.len().div_ceil(CHUNKS).max(1);
    let partials: Vec<Vec<C64>> = active
        .par_chunks(chunk)
        .map(|idx| {
            let mut acc = vec![C64::new(0.0, 0.0); spec.len()];
            for &i in idx {
                let slice = a.slice(i)?;
                let c = s.values()[i] * scale;
                for ((v, &e), &sym) in acc.iter_mut().zip(&wave_exponents(&spec, i)).zip(slice.samples()) {
                    *v += sym * roots[e as usize] * c;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut out = vec![C64::new(0.0, 0.0); spec.len()];
    for p in partials {
        out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
    }
    GridField::new(spec, out)
}

/// The `L²` adjoint of [`apply_dense`]: `F(T*g)(η) = h^n Σ_x conj(a(x, η)) e^{−ix·η} g(x)`.
/// The symbol must cover the whole lattice.
pub fn apply_dense_adjoint(a: &DenseSymbol, g: &GridField) -> Result<GridField> {
    a.spec().ensure_same(g.spec())?;
    let spec = *g.spec();
    let lattice = FrequencyLattice::new(spec);
    let missing: Vec<f64> = (0..spec.len()).filter(|&i| !a.covers(i)).map(|i| lattice.norm(i)).collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    let roots = roots_of_unity(spec.size(), -1.0);
    let cell = spec.cell_volume();
    let values: Vec<C64> = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let slice = a.slice(i)?;
            let mut acc = C64::new(0.0, 0.0);
            for ((&e, sym), v) in wave_exponents(&spec, i).iter().zip(slice.samples()).zip(g.samples()) {
                acc += sym.conj() * roots[e as usize] * v;
            }
            Ok(acc * cell)
        })
        .collect::<Result<_>>()?;
    Ok(inverse_unchecked(&Spectrum::new(spec, values)?))
}

fn check_chi(chi: &DyadicFamily, spec: &GridSpec) -> Result<()> {
    spec.ensure_same(chi.spec())?;
    if chi.kind() != FamilyKind::Chi {
        return Err(Error::Parameter("separable symbols are applied with the χ family".into()));
    }
    Ok(())
}

fn sum_fields(spec: GridSpec, parts: Vec<GridField>) -> Result<GridField> {
    let mut out = GridField::zeros(spec);
    for p in &parts {
        out.axpy(C64::new(1.0, 0.0), p)?;
    }
    Ok(out)
}

/// `Σ_k a_k · χ_k(D)f`, parallel over bands. Bands above the family's
/// `J_max` vanish on the lattice and are skipped.
pub fn apply_separable(a: &SeparableSymbol, f: &GridField, chi: &DyadicFamily) -> Result<GridField> {
    a.spec().ensure_same(f.spec())?;
    check_chi(chi, f.spec())?;
    let s = forward_transform(f)?;
    let parts: Vec<GridField> = a
        .terms()
        .par_iter()
        .filter(|(k, _)| *k <= chi.j_max())
        .map(|(k, ak)| ak.mul(&chi.project_spectrum(&s, *k)))
        .collect::<Result<_>>()?;
    sum_fields(*f.spec(), parts)
}

/// `Σ_k χ_k(D)(conj(a_k) · g)`.
pub fn apply_separable_adjoint(a: &SeparableSymbol, g: &GridField, chi: &DyadicFamily) -> Result<GridField> {
    a.spec().ensure_same(g.spec())?;
    check_chi(chi, g.spec())?;
    let parts: Vec<GridField> = a
        .terms()
        .par_iter()
        .filter(|(k, _)| *k <= chi.j_max())
        .map(|(k, ak)| Ok(chi.project_spectrum(&forward_unchecked(&ak.conj().mul(g)?), *k)))
        .collect::<Result<_>>()?;
    sum_fields(*g.spec(), parts)
}

/// A dense symbol viewed as an operator.
pub struct DenseOperator<'a>(pub &'a DenseSymbol);

impl LinearOperator for DenseOperator<'_> {
    fn spec(&self) -> &GridSpec {
        self.0.spec()
    }
    fn apply(&self, f: &GridField) -> Result<GridField> {
        apply_dense(self.0, f)
    }
    fn apply_adjoint(&self, g: &GridField) -> Result<GridField> {
        apply_dense_adjoint(self.0, g)
    }
}

/// A separable symbol with the `χ` family it is applied against.
pub struct SeparableOperator<'a> {
    pub symbol: &'a SeparableSymbol,
    pub chi: &'a DyadicFamily,
}

impl LinearOperator for SeparableOperator<'_> {
    fn spec(&self) -> &GridSpec {
        self.symbol.spec()
    }
    fn apply(&self, f: &GridField) -> Result<GridField> {
        apply_separable(self.symbol, f, self.chi)
    }
    fn apply_adjoint(&self, g: &GridField) -> Result<GridField> {
        apply_separable_adjoint(self.symbol, g, self.chi)
    }
}

/// `h(D) A h(D)^{−1}` for a positive radial weight `h`. Its `L²` norm is
/// the norm of `A` in the Hilbert norm `‖h(D)·‖_{L²}`.
pub struct Conjugated<'a> {
    inner: &'a dyn LinearOperator,
    weight: Vec<f64>,
    inverse: Vec<f64>,
}

impl<'a> Conjugated<'a> {
    pub fn new(inner: &'a dyn LinearOperator, weight: Vec<f64>) -> Result<Self> {
        if weight.len() != inner.spec().len() {
            return Err(Error::Dimension("weight length differs from the grid".into()));
        }
        if let Some(w) = weight.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!("conjugating weight must be positive, found {w}")));
        }
        let inverse = weight.iter().map(|w| 1.0 / w).collect();
        Ok(Conjugated { inner, weight, inverse })
    }

    /// Conjugation by the frame's Hilbert weight.
    pub fn by_frame(inner: &'a dyn LinearOperator, frame: &ParabolicFrame) -> Result<Self> {
        inner.spec().ensure_same(frame.spec())?;
        Self::new(inner, frame.hilbert_weight())
    }
}

fn weigh(f: &GridField, w: &[f64]) -> GridField {
    inverse_unchecked(&forward_unchecked(f).weighted(w))
}

impl LinearOperator for Conjugated<'_> {
    fn spec(&self) -> &GridSpec {
        self.inner.spec()
    }
    fn apply(&self, f: &GridField) -> Result<GridField> {
        Ok(weigh(&self.inner.apply(&weigh(f, &self.inverse))?, &self.weight))
    }
    fn apply_adjoint(&self, g: &GridField) -> Result<GridField> {
        Ok(weigh(&self.inner.apply_adjoint(&weigh(g, &self.weight))?, &self.inverse))
    }
}

/// Outcome of [`power_iteration`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerIteration {
    /// `‖Av‖/‖v‖` at the final iterate; always a lower bound for `‖A‖`.
    pub estimate: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const POWER_MAX_ITER: usize = 200;
pub const POWER_TOL: f64 = 1e-8;
pub const POWER_SEED: u64 = 20_240_601;

/// Power iteration on `A*A` from a seeded random start. Stops after
/// `max_iter` steps or when the estimate drifts by less than `tol` relative.
pub fn power_iteration(op: &dyn LinearOperator, seed: u64, max_iter: usize, tol: f64) -> Result<PowerIteration> {
    let spec = *op.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<C64> =
        (0..spec.len()).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let mut v = GridField::new(spec, start)?;
    let mut estimate = 0.0f64;
    let mut best = 0.0f64;
    for it in 1..=max_iter.max(1) {
        let nv = v.l2_samples();
        if nv == 0.0 {
            return Ok(PowerIteration { estimate: 0.0, iterations: it, converged: true });
        }
        v = v.scale(C64::new(1.0 / nv, 0.0));
        let w = op.apply(&v)?;
        let next = w.l2_samples();
        best = best.max(next);
        if (next - estimate).abs() <= tol * next.max(f64::MIN_POSITIVE) {
            return Ok(PowerIteration { estimate: best, iterations: it, converged: true });
        }
        estimate = next;
        v = op.apply_adjoint(&w)?;
    }
    Ok(PowerIteration { estimate: best, iterations: max_iter.max(1), converged: false })
}

/// Result of [`verify_band_support`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandSupportReport {
    pub k: usize,
    pub window: (f64, f64),
    /// Largest `|F(a_k f_k)|` outside the window, relative to its peak.
    pub leak: f64,
    /// The part of `leak` found below the window.
    pub leak_below: f64,
    /// The part of `leak` found above the window.
    pub leak_above: f64,
    pub peak: f64,
    pub holds: bool,
    pub precondition: Option<PreconditionReport>,
}

/// Whether `a_k` met its support window. A failure here explains a failing
/// band check without being one itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PreconditionReport {
    pub condition: SupportCondition,
    pub window: (f64, f64),
    pub leak: f64,
    pub satisfied: bool,
}

pub const BAND_LEAK_TOL: f64 = 1e-12;

/// Checks that `F(a_k · f_k)` vanishes outside `[2^{k−3}, 2^{k+1}]`, to
/// `1e−12` of its peak.
pub fn verify_band_support(
    a_k: &GridField,
    f_k: &GridField,
    k: usize,
    condition: Option<SupportCondition>,
) -> Result<BandSupportReport> {
    a_k.spec().ensure_same(f_k.spec())?;
    let window = (pow2(k as i32 - 3), pow2(k as i32 + 1));
    let prod = forward_unchecked(&a_k.mul(f_k)?);
    let lattice = FrequencyLattice::new(*a_k.spec());
    let (mut peak, mut below, mut above) = (0.0f64, 0.0f64, 0.0f64);
    for (i, z) in prod.values().iter().enumerate() {
        let t = lattice.norm(i);
        let m = z.norm();
        peak = peak.max(m);
        if t < window.0 {
            below = below.max(m);
        } else if t > window.1 {
            above = above.max(m);
        }
    }
    let rel = |v: f64| if peak > 0.0 { v / peak } else { 0.0 };
    let leak = rel(below.max(above));
    let precondition = condition.map(|c| {
        let w = c.window(k);
        let (l, _) = spectral_leak(a_k, w.0, w.1);
        PreconditionReport { condition: c, window: w, leak: l, satisfied: l <= BAND_LEAK_TOL }
    });
    Ok(BandSupportReport {
        k,
        window,
        leak,
        leak_below: rel(below),
        leak_above: rel(above),
        peak,
        holds: leak <= BAND_LEAK_TOL,
        precondition,
    })
}

/// One probe measurement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub p: f64,
    pub s_in: f64,
    pub s_out: f64,
    pub k: usize,
    pub member: String,
    pub in_norm: f64,
    pub out_norm: f64,
    pub ratio: f64,
}

/// The largest ratio seen on one band for one exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandRatio {
    pub p: f64,
    pub k: usize,
    pub max_ratio: f64,
}

/// Least-squares slope of `ln(max ratio)` against `k` and the max/min
/// spread of the per-band maxima.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Trend {
    pub p: f64,
    pub slope: f64,
    pub growth: f64,
}

/// The `p = 2`, `s = 0` cross-check in the Hilbert form of the frame norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerCheck {
    pub power: PowerIteration,
    /// `sup ‖h(D)Af‖/‖h(D)f‖` over the family.
    pub probe_sup: f64,
    pub consistent: bool,
}

pub const POWER_CHECK_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundednessReport {
    pub rows: Vec<ProbeRow>,
    /// One budget per probed exponent, attached by the caller.
    pub budgets: Vec<ExponentBudget>,
    pub grid: GridSpec,
    pub frame: FrameParams,
    pub sup_ratio: f64,
    pub band_profile: Vec<BandRatio>,
    pub trends: Vec<Trend>,
    pub power_check: Option<PowerCheck>,
}

impl BoundednessReport {
    pub fn trend(&self, p: f64) -> Option<Trend> {
        self.trends.iter().copied().find(|t| t.p == p)
    }
}

/// Probe settings beyond the exponents.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeOptions {
    /// Run the power-iteration cross-check when `p = 2` and `s_in = s_out = 0`.
    pub power_check: bool,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { power_check: true, seed: POWER_SEED, max_iter: POWER_MAX_ITER, tol: POWER_TOL }
    }
}

/// Measures `hpfio(Af, s_out, p)/hpfio(f, s_in, p)` for every member and
/// exponent. Ratios are lower bounds for the operator norm.
pub fn operator_norm_probe(
    op: &dyn LinearOperator,
    s_in: f64,
    s_out: f64,
    ps: &[f64],
    frame: &ParabolicFrame,
    family: &TestFamily,
    opts: &ProbeOptions,
) -> Result<BoundednessReport> {
    if ps.is_empty() {
        return Err(Error::Parameter("at least one exponent p is required".into()));
    }
    for &p in ps {
        check_p(p)?;
    }
    if family.is_empty() {
        return Err(Error::Parameter("the test family is empty".into()));
    }
    let spec = *op.spec();
    spec.ensure_same(frame.spec())?;
    struct Measured {
        ins: Vec<f64>,
        outs: Vec<f64>,
        hilbert: Option<f64>,
    }
    let want_power = opts.power_check && s_in == 0.0 && s_out == 0.0 && ps.contains(&2.0);
    let weight = want_power.then(|| frame.hilbert_weight());
    let measured: Vec<Measured> = family
        .members
        .par_iter()
        .map(|m| {
            spec.ensure_same(m.field.spec())?;
            let out = op.apply(&m.field)?;
            let ins = hpfio_norms(&m.field, s_in, ps, frame)?;
            if let Some(v) = ins.iter().find(|v| **v < 1e-14) {
                return Err(Error::DegenerateInput(format!("member {} has norm {v:e}", m.id)));
            }
            let outs = hpfio_norms(&out, s_out, ps, frame)?;
            let hilbert = weight.as_ref().map(|w| {
                let a = forward_unchecked(&out).weighted(w).energy().sqrt();
                let b = forward_unchecked(&m.field).weighted(w).energy().sqrt();
                a / b
            });
            Ok(Measured { ins, outs, hilbert })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (pi, &p) in ps.iter().enumerate() {
        for (m, r) in family.members.iter().zip(&measured) {
            rows.push(ProbeRow {
                p,
                s_in,
                s_out,
                k: m.band,
                member: m.id.clone(),
                in_norm: r.ins[pi],
                out_norm: r.outs[pi],
                ratio: r.outs[pi] / r.ins[pi],
            });
        }
    }
    let sup_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let mut band_profile: Vec<BandRatio> = Vec::new();
    for row in &rows {
        match band_profile.iter_mut().find(|b| b.p == row.p && b.k == row.k) {
            Some(b) => b.max_ratio = b.max_ratio.max(row.ratio),
            None => band_profile.push(BandRatio { p: row.p, k: row.k, max_ratio: row.ratio }),
        }
    }
    band_profile.sort_by(|a, b| a.p.total_cmp(&b.p).then(a.k.cmp(&b.k)));
    let trends = ps.iter().filter_map(|&p| fit_trend(p, &band_profile)).collect();
    let power_check = if want_power {
        let conj = Conjugated::new(op, weight.expect("weight computed when the check is requested"))?;
        let power = power_iteration(&conj, opts.seed, opts.max_iter, opts.tol)?;
        let probe_sup = measured.iter().filter_map(|m| m.hilbert).fold(0.0, f64::max);
        Some(PowerCheck { power, probe_sup, consistent: probe_sup <= power.estimate * (1.0 + POWER_CHECK_TOL) })
    } else {
        None
    };
    Ok(BoundednessReport {
        rows,
        budgets: Vec::new(),
        grid: spec,
        frame: frame.params(),
        sup_ratio,
        band_profile,
        trends,
        power_check,
    })
}

fn fit_trend(p: f64, profile: &[BandRatio]) -> Option<Trend> {
    let pts: Vec<(f64, f64)> =
        profile.iter().filter(|b| b.p == p && b.max_ratio > 0.0).map(|b| (b.k as f64, b.max_ratio.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let max = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let min = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Some(Trend { p, slope: sxy / sxx, growth: (max - min).exp() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{build_chi_family, build_lp_family, DEFAULT_EPS};
    use crate::family::FamilyOptions;
    use crate::fourier::{bessel_potential, relative_error, FrequencyLattice};
    use crate::symbol::{rough_chirp, ChirpOptions, SymbolClass};
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn band_limited(spec: GridSpec, seed: u64, lo: f64, hi: f64) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = FrequencyLattice::new(spec);
        let mut s = Spectrum::zeros(spec);
        for (i, v) in s.values_mut().iter_mut().enumerate() {
            let t = lat.norm(i);
            if t >= lo && t < hi {
                *v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        inverse_unchecked(&s)
    }

    fn grid32() -> GridSpec {
        GridSpec::new(2, 32, 8.0 * PI).unwrap()
    }

    fn inner(a: &GridField, b: &GridField) -> C64 {
        a.samples().iter().zip(b.samples()).map(|(x, y)| x * y.conj()).sum()
    }

    #[test]
    fn dense_identity_multiplication_and_multiplier() {
        let g = grid32();
        let f = band_limited(g, 1, 0.0, 3.0);
        let out = apply_dense(&DenseSymbol::identity(g), &f).unwrap();
        assert!(relative_error(out.samples(), f.samples()) < 1e-12);
        let b = band_limited(g, 2, 0.0, 1.0);
        let out = apply_dense(&DenseSymbol::multiplication(b.clone(), SymbolClass::smooth()), &f).unwrap();
        assert!(relative_error(out.samples(), b.mul(&f).unwrap().samples()) < 1e-12);
        let out = apply_dense(&DenseSymbol::bessel(g, 0.7).unwrap(), &f).unwrap();
        assert!(relative_error(out.samples(), bessel_potential(&f, 0.7).unwrap().samples()) < 1e-12);
    }

    #[test]
    fn dense_coverage_error() {
        let g = grid32();
        let a = DenseSymbol::identity(g).tabulate([0usize]).unwrap();
        let f = GridField::plane_wave(g, &[0.25, 0.0]);
        assert!(matches!(apply_dense(&a, &f), Err(Error::Coverage(_))));
        assert!(apply_dense(&a, &GridField::constant(g, C64::new(1.0, 0.0))).is_ok());
        assert!(matches!(apply_dense_adjoint(&a, &f), Err(Error::Coverage(_))));
    }

    #[test]
    fn dense_adjoint_identity() {
        let g = grid32();
        let a = DenseSymbol::from_fn(g, SymbolClass::smooth(), |x, e| {
            C64::new((x[0] * 0.25).cos(), 0.3 * (x[1] * 0.5).sin()) * C64::new(1.0 / (1.0 + e[0] * e[0]), e[1] * 0.1)
        });
        let f = band_limited(g, 3, 0.0, 4.0);
        let h = band_limited(g, 4, 0.0, 4.0);
        let lhs = inner(&apply_dense(&a, &f).unwrap(), &h);
        let rhs = inner(&f, &apply_dense_adjoint(&a, &h).unwrap());
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1e-300), "{lhs} vs {rhs}");
    }

    #[test]
    fn separable_examples() {
        let g = GridSpec::new(2, 64, 8.0 * PI).unwrap();
        let lp = build_lp_family(g, DEFAULT_EPS).unwrap();
        let chi = build_chi_family(g).unwrap();
        let f = band_limited(g, 5, 0.0, 7.0);
        let one = GridField::constant(g, C64::new(1.0, 0.0));
        let all: Vec<(usize, GridField)> = (0..=chi.j_max()).map(|k| (k, one.clone())).collect();
        let a = SeparableSymbol::new(SymbolClass::smooth(), all, &lp).unwrap();
        let bands = chi.project_all(&f).unwrap();
        let mut expect = GridField::zeros(g);
        for b in &bands {
            expect.axpy(C64::new(1.0, 0.0), b).unwrap();
        }
        let out = apply_separable(&a, &f, &chi).unwrap();
        assert!(relative_error(out.samples(), expect.samples()) < 1e-13);
        // Band 3 of χ lives on [2, 8]; a field on |ξ| < 1.5 is annihilated.
        let a3 = SeparableSymbol::new(SymbolClass::smooth(), vec![(3, band_limited(g, 6, 0.0, 1.0))], &lp).unwrap();
        let low = band_limited(g, 7, 0.0, 1.5);
        assert!(apply_separable(&a3, &low, &chi).unwrap().max_abs() <= 1e-14 * low.max_abs());
        assert!(apply_separable(&a3, &low, &lp).is_err());
    }

    #[test]
    fn separable_agrees_with_dense_and_adjoint() {
        let g = grid32();
        let lp = build_lp_family(g, DEFAULT_EPS).unwrap();
        let chi = build_chi_family(g).unwrap();
        let terms: Vec<(usize, GridField)> =
            (0..=chi.j_max()).map(|k| (k, band_limited(g, 10 + k as u64, 0.0, 2.0))).collect();
        let a = SeparableSymbol::new(SymbolClass::new(1.0, 0.0, 0.5).unwrap(), terms, &lp).unwrap();
        let dense = a.densify();
        let f = band_limited(g, 20, 0.0, 4.0);
        let sep = apply_separable(&a, &f, &chi).unwrap();
        let den = apply_dense(&dense, &f).unwrap();
        assert!(relative_error(sep.samples(), den.samples()) <= 1e-10);
        let h = band_limited(g, 21, 0.0, 4.0);
        let sa = apply_separable_adjoint(&a, &h, &chi).unwrap();
        let da = apply_dense_adjoint(&dense, &h).unwrap();
        assert!(relative_error(sa.samples(), da.samples()) <= 1e-10);
        let lhs = inner(&sep, &h);
        let rhs = inner(&f, &sa);
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn prop_application_is_linear(seed in any::<u64>(), c in -3.0f64..3.0) {
            let g = grid32();
            let a = DenseSymbol::from_fn(g, SymbolClass::smooth(), |x, e| C64::new((x[0] + e[1]).cos(), 0.0));
            let f = band_limited(g, seed, 0.0, 4.0);
            let h = band_limited(g, seed.wrapping_add(1), 0.0, 4.0);
            let mut combo = f.clone();
            combo.axpy(C64::new(c, 0.0), &h).unwrap();
            let lhs = apply_dense(&a, &combo).unwrap();
            let mut rhs = apply_dense(&a, &f).unwrap();
            rhs.axpy(C64::new(c, 0.0), &apply_dense(&a, &h).unwrap()).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-12 * rhs.max_abs().max(1e-300));
        }
    }

    #[test]
    fn power_iteration_finds_multiplier_norm() {
        let g = grid32();
        let a = DenseSymbol::bessel(g, -1.0).unwrap();
        let op = DenseOperator(&a);
        let pi = power_iteration(&op, 3, 200, 1e-12).unwrap();
        // sup ⟨η⟩^{-1} = 1 at η = 0.
        assert!((pi.estimate - 1.0).abs() < 1e-6, "{pi:?}");
        assert!(pi.estimate <= 1.0 + 1e-12);
        let again = power_iteration(&op, 3, 200, 1e-12).unwrap();
        assert_eq!(pi, again);
    }

    #[test]
    fn band_support_examples() {
        let g = GridSpec::new(2, 256, 4.0 * PI).unwrap();
        let k = 6;
        let chi = build_chi_family(g).unwrap();
        let cond = SupportCondition { c: 0.25, gamma: 0.75 };
        let f = band_limited(g, 1, 0.0, 80.0);
        let f_k = chi.project_spectrum(&forward_transform(&f).unwrap(), k);
        let (lo, hi) = cond.window(k);
        let a_k = band_limited(g, 2, lo, hi);
        let rep = verify_band_support(&a_k, &f_k, k, Some(cond)).unwrap();
        assert!(rep.holds && rep.leak <= 1e-12, "{rep:?}");
        assert!(rep.precondition.unwrap().satisfied);
        let c = GridField::constant(g, C64::new(2.0, 0.0));
        let rep = verify_band_support(&c, &f_k, k, Some(cond)).unwrap();
        assert!(rep.holds);
        assert!(!rep.precondition.unwrap().satisfied);
        let bad = GridField::plane_wave(g, &[pow2(k as i32), 0.0]);
        let rep = verify_band_support(&bad, &f_k, k, Some(cond)).unwrap();
        assert!(!rep.holds && rep.leak > 1e-3, "{rep:?}");
        assert!(!rep.precondition.unwrap().satisfied);
    }

    #[test]
    fn probe_of_identity_is_one() {
        let g = GridSpec::new(2, 64, 8.0 * PI).unwrap();
        let frame = ParabolicFrame::new(g).unwrap();
        let fam = TestFamily::build(g, &FamilyOptions { bands: vec![2, 3], ..FamilyOptions::default() }).unwrap();
        let id = DenseSymbol::identity(g);
        let rep = operator_norm_probe(&DenseOperator(&id), 0.25, 0.25, &[1.5, 2.0, 4.0], &frame, &fam, &ProbeOptions {
            power_check: false,
            ..ProbeOptions::default()
        })
        .unwrap();
        assert_eq!(rep.rows.len(), 3 * fam.len());
        for row in &rep.rows {
            assert!((row.ratio - 1.0).abs() < 1e-10, "{row:?}");
        }
        assert!(rep.power_check.is_none());
        assert!(operator_norm_probe(&DenseOperator(&id), 0.0, 0.0, &[1.0], &frame, &fam, &ProbeOptions::default()).is_err());
    }

    #[test]
    fn probe_power_check_for_multiplication() {
        let g = GridSpec::new(2, 32, 8.0 * PI).unwrap();
        let frame = ParabolicFrame::new(g).unwrap();
        let lp = build_lp_family(g, DEFAULT_EPS).unwrap();
        let fam = TestFamily::build(g, &FamilyOptions { bands: vec![1, 2], ..FamilyOptions::default() }).unwrap();
        let b = lp.project_spectrum(&forward_transform(&band_limited(g, 4, 0.0, 2.0)).unwrap(), 1);
        let b = b.scale(C64::new(1.0 / b.max_abs(), 0.0));
        let a = DenseSymbol::multiplication(b.clone(), SymbolClass::smooth());
        let rep = operator_norm_probe(&DenseOperator(&a), 0.0, 0.0, &[2.0], &frame, &fam, &ProbeOptions::default()).unwrap();
        let pc = rep.power_check.unwrap();
        assert!(pc.consistent, "{pc:?}");
        // ‖hbh^{-1}‖ ≤ ‖b‖_∞ · sup h / inf h.
        let h = frame.hilbert_weight();
        let spread = h.iter().copied().fold(0.0, f64::max) / h.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(pc.power.estimate <= b.max_abs() * spread * (1.0 + 1e-9));
        assert!(rep.rows.iter().all(|r| r.ratio >= 0.0));
    }

    #[test]
    fn probe_rejects_degenerate_members() {
        let g = GridSpec::new(2, 32, 8.0 * PI).unwrap();
        let frame = ParabolicFrame::new(g).unwrap();
        let mut fam = TestFamily::build(g, &FamilyOptions { bands: vec![1], ..FamilyOptions::default() }).unwrap();
        fam.members[0].field = GridField::zeros(g);
        let id = DenseSymbol::identity(g);
        let r = operator_norm_probe(&DenseOperator(&id), 0.0, 0.0, &[2.0], &frame, &fam, &ProbeOptions::default());
        assert!(matches!(r, Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn trend_fit_recovers_slope() {
        let profile: Vec<BandRatio> =
            (4..=8).map(|k| BandRatio { p: 2.0, k, max_ratio: (0.1 * k as f64).exp() }).collect();
        let t = fit_trend(2.0, &profile).unwrap();
        assert!((t.slope - 0.1).abs() < 1e-12);
        assert!((t.growth - 0.4f64.exp()).abs() < 1e-12);
        assert!(fit_trend(4.0, &profile).is_none());
    }

    #[test]
    fn chirp_operator_runs_on_both_paths() {
        let g = grid32();
        let lp = build_lp_family(g, DEFAULT_EPS).unwrap();
        let chi = build_chi_family(g).unwrap();
        let s = rough_chirp(g, 2.0, 0.5, &ChirpOptions::default(), &lp).unwrap();
        let f = band_limited(g, 9, 0.0, 4.0);
        let a = apply_separable(&s, &f, &chi).unwrap();
        let b = apply_dense(&s.densify(), &f).unwrap();
        assert!(relative_error(a.samples(), b.samples()) <= 1e-10);
    }
}
