//! Rough symbols `a(x, η)` of class `C^r_* S^m_{1,δ}`: storage, seminorm
//! estimation, the smoothing split `a = a♯_γ + a♭_γ`, paraproducts and the
//! Coifman–Meyer Fourier-mode decomposition.
//!
//! A [`DenseSymbol`] is a rule producing the `x`-slice `a(·, η)` for a
//! frequency `η`. Slices are built on demand, so a symbol never holds the
//! full `N^{2n}` table unless it was given one explicitly.

use crate::dyadic::{pow2, AuxiliaryFamilies, BumpProfile, DyadicFamily, DyadicProfile, FamilyKind};
use crate::error::{check_open, Error, Result};
use crate::fourier::{
    forward_unchecked, inverse_unchecked, japanese, FrequencyLattice, GridField, GridSpec, C64,
};
use crate::io::FiofArray;
use crate::norms::zygmund_norm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// A frequency-only factor `η ↦ m(η)`.
pub type EtaFn = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;
/// A full symbol `(x, η) ↦ a(x, η)`.
pub type SymbolFn = Arc<dyn Fn(&[f64], &[f64]) -> C64 + Send + Sync>;

/// Declared class parameters `(r, m, δ)` of `C^r_* S^m_{1,δ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolClass {
    pub r: f64,
    pub m: f64,
    pub delta: f64,
}

impl SymbolClass {
    pub fn new(r: f64, m: f64, delta: f64) -> Result<Self> {
        check_open("r", r, 0.0, f64::INFINITY)?;
        if !m.is_finite() {
            return Err(Error::Parameter(format!("order m = {m} must be finite")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::Parameter(format!("delta = {delta} must lie in [0, 1]")));
        }
        Ok(SymbolClass { r, m, delta })
    }

    /// `C^1_* S^0_{1,0}`: the class used for smooth presets.
    pub fn smooth() -> Self {
        SymbolClass { r: 1.0, m: 0.0, delta: 0.0 }
    }
}

/// One product term `b(x)·m(η)` of a low-rank symbol.
#[derive(Clone)]
struct Term {
    x: GridField,
    x_constant: Option<C64>,
    eta: EtaFn,
    lattice: Arc<Vec<C64>>,
}

impl Term {
    fn new(x: GridField, eta: EtaFn) -> Self {
        let spec = *x.spec();
        let mut xi = vec![0.0; spec.dim()];
        let lattice = (0..spec.len())
            .map(|i| {
                spec.frequency(i, &mut xi);
                eta(&xi)
            })
            .collect();
        let x_constant = constant_value(&x);
        Term { x, x_constant, eta, lattice: Arc::new(lattice) }
    }
}

/// The common value of a constant field.
fn constant_value(f: &GridField) -> Option<C64> {
    let first = f.samples()[0];
    f.samples().iter().all(|&z| z == first).then_some(first)
}

#[derive(Clone)]
enum Repr {
    LowRank(Vec<Term>),
    Function(SymbolFn),
    Tabulated(Arc<BTreeMap<usize, GridField>>),
    Smoothed(Arc<SmoothedRule>),
    Modes(Arc<FourierModeDecomposition>, usize),
}

/// Shared data of a lazily evaluated smoothing part.
struct SmoothedRule {
    base: DenseSymbol,
    gamma: f64,
    sharp: bool,
    lp: DyadicProfile,
    /// `φ(2^{-γk}ξ)` on the lattice for every band `k`.
    low_pass: Vec<Vec<f64>>,
}

/// A symbol `a(x, η)` on a grid together with its declared class.
#[derive(Clone)]
pub struct DenseSymbol {
    spec: GridSpec,
    class: SymbolClass,
    repr: Repr,
}

impl fmt::Debug for DenseSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::LowRank(t) => format!("low-rank({} terms)", t.len()),
            Repr::Function(_) => "function".into(),
            Repr::Tabulated(m) => format!("tabulated({} slices)", m.len()),
            Repr::Smoothed(s) => format!("{}(gamma = {})", if s.sharp { "sharp" } else { "flat" }, s.gamma),
            Repr::Modes(_, k) => format!("modes(band {k})"),
        };
        f.debug_struct("DenseSymbol").field("spec", &self.spec).field("class", &self.class).field("kind", &kind).finish()
    }
}

impl DenseSymbol {
    /// `a ≡ 1`.
    pub fn identity(spec: GridSpec) -> Self {
        Self::constant(spec, C64::new(1.0, 0.0))
    }

    pub fn constant(spec: GridSpec, c: C64) -> Self {
        let eta: EtaFn = Arc::new(|_| C64::new(1.0, 0.0));
        DenseSymbol {
            spec,
            class: SymbolClass::smooth(),
            repr: Repr::LowRank(vec![Term::new(GridField::constant(spec, c), eta)]),
        }
    }

    /// An `x`-independent symbol `m(η)`.
    pub fn multiplier(spec: GridSpec, class: SymbolClass, m: impl Fn(&[f64]) -> C64 + Send + Sync + 'static) -> Self {
        let eta: EtaFn = Arc::new(m);
        DenseSymbol {
            spec,
            class,
            repr: Repr::LowRank(vec![Term::new(GridField::constant(spec, C64::new(1.0, 0.0)), eta)]),
        }
    }

    /// `⟨η⟩^m`.
    pub fn bessel(spec: GridSpec, m: f64) -> Result<Self> {
        let class = SymbolClass::new(1.0, m, 0.0)?;
        Ok(Self::multiplier(spec, class, move |eta| {
            C64::new(japanese(eta.iter().map(|v| v * v).sum::<f64>().sqrt()).powf(m), 0.0)
        }))
    }

    /// The multiplication symbol `a(x, η) = b(x)`.
    pub fn multiplication(b: GridField, class: SymbolClass) -> Self {
        let spec = *b.spec();
        let eta: EtaFn = Arc::new(|_| C64::new(1.0, 0.0));
        DenseSymbol { spec, class, repr: Repr::LowRank(vec![Term::new(b, eta)]) }
    }

    /// `Σ_t b_t(x) m_t(η)`.
    pub fn from_terms(spec: GridSpec, class: SymbolClass, terms: Vec<(GridField, EtaFn)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidInput("a low-rank symbol needs at least one term".into()));
        }
        for (b, _) in &terms {
            spec.ensure_same(b.spec())?;
        }
        Ok(DenseSymbol { spec, class, repr: Repr::LowRank(terms.into_iter().map(|(b, m)| Term::new(b, m)).collect()) })
    }

    /// A symbol given by a closed-form rule, evaluated on demand.
    pub fn from_fn(
        spec: GridSpec,
        class: SymbolClass,
        a: impl Fn(&[f64], &[f64]) -> C64 + Send + Sync + 'static,
    ) -> Self {
        DenseSymbol { spec, class, repr: Repr::Function(Arc::new(a)) }
    }

    /// A symbol stored as explicit slices at some lattice frequencies.
    pub fn tabulated(spec: GridSpec, class: SymbolClass, slices: BTreeMap<usize, GridField>) -> Result<Self> {
        for (&i, f) in &slices {
            if i >= spec.len() {
                return Err(Error::Dimension(format!("frequency index {i} out of range")));
            }
            spec.ensure_same(f.spec())?;
        }
        Ok(DenseSymbol { spec, class, repr: Repr::Tabulated(Arc::new(slices)) })
    }

    /// Tabulates this symbol at the given lattice frequencies.
    pub fn tabulate(&self, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let slices = indices.into_iter().map(|i| Ok((i, self.slice(i)?))).collect::<Result<BTreeMap<_, _>>>()?;
        Self::tabulated(self.spec, self.class, slices)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn class(&self) -> SymbolClass {
        self.class
    }

    /// The same symbol with a different declared class.
    pub fn with_class(mut self, class: SymbolClass) -> Self {
        self.class = class;
        self
    }

    /// Whether the slice at lattice index `i` is available.
    pub fn covers(&self, i: usize) -> bool {
        match &self.repr {
            Repr::Tabulated(m) => m.contains_key(&i),
            Repr::Smoothed(s) => s.base.covers(i),
            _ => i < self.spec.len(),
        }
    }

    /// Lattice indices with an available slice.
    pub fn covered_indices(&self) -> Vec<usize> {
        match &self.repr {
            Repr::Tabulated(m) => m.keys().copied().collect(),
            Repr::Smoothed(s) => s.base.covered_indices(),
            _ => (0..self.spec.len()).collect(),
        }
    }

    /// Whether `a` is known to be independent of `x`.
    pub fn is_x_independent(&self) -> bool {
        match &self.repr {
            Repr::LowRank(t) => t.iter().all(|t| t.x_constant.is_some()),
            Repr::Tabulated(m) => m.values().all(|f| constant_value(f).is_some()),
            Repr::Smoothed(s) => s.base.is_x_independent(),
            _ => false,
        }
    }

    /// `a(·, η_i)` at lattice index `i`.
    pub fn slice(&self, i: usize) -> Result<GridField> {
        match &self.repr {
            Repr::LowRank(terms) => {
                let mut out = GridField::zeros(self.spec);
                for t in terms {
                    let w = t.lattice[i];
                    if w != C64::new(0.0, 0.0) {
                        out.axpy(w, &t.x)?;
                    }
                }
                Ok(out)
            }
            Repr::Tabulated(m) => m.get(&i).cloned().ok_or_else(|| Error::Coverage(self.frequency(i))),
            Repr::Smoothed(rule) => rule.slice(&self.frequency(i), Some(i)),
            _ => self.slice_at(&self.frequency(i)),
        }
    }

    /// `a(·, η)` at an arbitrary frequency. Tabulated symbols only answer on
    /// their stored lattice points.
    pub fn slice_at(&self, eta: &[f64]) -> Result<GridField> {
        if eta.len() != self.spec.dim() {
            return Err(Error::Dimension(format!("frequency has {} components, grid has {}", eta.len(), self.spec.dim())));
        }
        match &self.repr {
            Repr::LowRank(terms) => {
                let mut out = GridField::zeros(self.spec);
                for t in terms {
                    let w = (t.eta)(eta);
                    if w != C64::new(0.0, 0.0) {
                        out.axpy(w, &t.x)?;
                    }
                }
                Ok(out)
            }
            Repr::Function(a) => Ok(GridField::from_fn(self.spec, |x| a(x, eta))),
            Repr::Tabulated(_) => match self.spec.lattice_index(eta) {
                Some(i) => self.slice(i),
                None => Err(Error::Coverage(eta.to_vec())),
            },
            Repr::Smoothed(rule) => rule.slice(eta, self.spec.lattice_index(eta)),
            Repr::Modes(d, k) => d.reconstruct_slice(*k, eta),
        }
    }

    fn frequency(&self, i: usize) -> Vec<f64> {
        let mut xi = vec![0.0; self.spec.dim()];
        self.spec.frequency(i, &mut xi);
        xi
    }

    /// `max |a(x, η)|` over the given lattice frequencies and all `x`.
    pub fn max_abs_on(&self, indices: &[usize]) -> Result<f64> {
        indices.par_iter().map(|&i| self.slice(i).map(|s| s.max_abs())).try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
    }

    /// The full table as a `2n`-dimensional FIOF array: spatial axes first,
    /// then frequency axes in FFT order.
    pub fn to_table(&self) -> Result<FiofArray> {
        let len = self.spec.len();
        let slices: Vec<GridField> = (0..len).into_par_iter().map(|i| self.slice(i)).collect::<Result<_>>()?;
        let mut samples = vec![C64::new(0.0, 0.0); len * len];
        for (i, s) in slices.iter().enumerate() {
            for (x, &v) in s.samples().iter().enumerate() {
                samples[x * len + i] = v;
            }
        }
        Ok(FiofArray {
            dim: 2 * self.spec.dim() as u32,
            size: self.spec.size() as u32,
            period: self.spec.period(),
            samples,
        })
    }

    /// Reads a table written by [`DenseSymbol::to_table`].
    pub fn from_table(table: FiofArray, class: SymbolClass) -> Result<Self> {
        if !table.dim.is_multiple_of(2) {
            return Err(Error::Dimension(format!("symbol tables have even rank, got {}", table.dim)));
        }
        let spec = GridSpec::new(table.dim as usize / 2, table.size as usize, table.period)?;
        let len = spec.len();
        if table.samples.len() != len * len {
            return Err(Error::Dimension("symbol table has the wrong number of samples".into()));
        }
        let mut slices = BTreeMap::new();
        for i in 0..len {
            let s: Vec<C64> = (0..len).map(|x| table.samples[x * len + i]).collect();
            slices.insert(i, GridField::new(spec, s)?);
        }
        Self::tabulated(spec, class, slices)
    }
}

impl SmoothedRule {
    fn slice(&self, eta: &[f64], idx: Option<usize>) -> Result<GridField> {
        let base = match idx {
            Some(i) => self.base.slice(i)?,
            None => self.base.slice_at(eta)?,
        };
        let spec = *base.spec();
        if constant_value(&base).is_some() {
            // φ(0) = 1, so constants pass through the low-pass filters intact.
            return Ok(if self.sharp { base } else { GridField::zeros(spec) });
        }
        let t = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let spectrum = forward_unchecked(&base);
        let mut sharp = GridField::zeros(spec);
        for (k, low) in self.low_pass.iter().enumerate() {
            let w = self.lp.value(k as i64, t);
            if w != 0.0 {
                sharp.axpy(C64::new(w, 0.0), &inverse_unchecked(&spectrum.weighted(low)))?;
            }
        }
        if self.sharp {
            Ok(sharp)
        } else {
            base.sub(&sharp)
        }
    }
}

/// Frequencies at which seminorms and residuals are sampled: lattice points
/// nearest to rays along the axes, the diagonal and one generic direction,
/// at radii spaced by one lattice step up to eight steps and geometrically
/// (ratio `2^{1/8}`) beyond.
pub fn sample_frequencies(spec: &GridSpec, margin_steps: usize) -> Vec<usize> {
    let n = spec.dim();
    let h = spec.freq_step();
    let mut dirs: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect();
    dirs.push(vec![1.0 / (n as f64).sqrt(); n]);
    let generic: Vec<f64> = (0..n).map(|a| 0.3f64.powi(a as i32)).collect();
    let gn = generic.iter().map(|v| v * v).sum::<f64>().sqrt();
    dirs.push(generic.iter().map(|v| v / gn).collect());
    let limit = (spec.size() / 2) as i64 - 1 - margin_steps as i64;
    let mut out = BTreeSet::new();
    for d in &dirs {
        let mut radius = 0.0;
        let mut j = 0usize;
        loop {
            let axes: Vec<i64> = d.iter().map(|c| (c * radius / h).round() as i64).collect();
            if axes.iter().any(|a| a.abs() > limit) {
                break;
            }
            out.insert(spec.ravel(&axes));
            j += 1;
            radius = if j <= 8 { j as f64 * h } else { radius * 2f64.powf(0.125) };
        }
    }
    out.into_iter().collect()
}

/// Multi-indices `α ∈ Z₊^n` with `|α| ≤ max`, ordered by `|α|`.
pub fn multi_indices_nd(n: usize, max: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n - 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=total).rev() {
            prefix.push(a);
            rec(n, total - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for total in 0..=max {
        rec(n, total, &mut Vec::new(), &mut out);
    }
    out
}

fn stencil(order: usize) -> &'static [(i64, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        _ => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
    }
}

/// Centered lattice difference `∂_η^α a(·, η_i)`, or `None` when the stencil
/// leaves the lattice or the symbol's coverage.
pub fn eta_derivative(a: &DenseSymbol, i: usize, alpha: &[usize]) -> Result<Option<GridField>> {
    let mut cache = HashMap::new();
    eta_derivative_cached(a, i, alpha, &mut cache)
}

fn eta_derivative_cached(
    a: &DenseSymbol,
    i: usize,
    alpha: &[usize],
    cache: &mut HashMap<usize, GridField>,
) -> Result<Option<GridField>> {
    let spec = a.spec;
    let n = spec.dim();
    if alpha.len() != n || alpha.iter().any(|&o| o > 3) {
        return Err(Error::Parameter(format!("derivative order {alpha:?} unsupported (at most 3 per axis)")));
    }
    let mut axes = vec![0usize; n];
    spec.unravel(i, &mut axes);
    let base: Vec<i64> = axes.iter().map(|&k| spec.signed_index(k)).collect();
    let half = (spec.size() / 2) as i64;
    let mut combos: Vec<(Vec<i64>, f64)> = vec![(Vec::new(), 1.0)];
    for &order in alpha {
        combos = combos
            .into_iter()
            .flat_map(|(off, c)| {
                stencil(order).iter().map(move |&(o, w)| {
                    let mut off = off.clone();
                    off.push(o);
                    (off, c * w)
                })
            })
            .collect();
    }
    let h = spec.freq_step();
    let scale = h.powi(-(alpha.iter().sum::<usize>() as i32));
    let mut out = GridField::zeros(spec);
    for (off, w) in combos {
        let pos: Vec<i64> = base.iter().zip(&off).map(|(b, o)| b + o).collect();
        if pos.iter().any(|p| p.abs() >= half) {
            return Ok(None);
        }
        let j = spec.ravel(&pos);
        if !a.covers(j) {
            return Ok(None);
        }
        if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(j) {
            e.insert(a.slice(j)?);
        }
        out.axpy(C64::new(w * scale, 0.0), &cache[&j])?;
    }
    Ok(Some(out))
}

/// One row of [`estimate_seminorms`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeminormRow {
    pub alpha: Vec<usize>,
    /// `max |∂_η^α a|·⟨η⟩^{|α|−m}`.
    pub pointwise: f64,
    /// `max ‖∂_η^α a(·,η)‖_{C^r_*}·⟨η⟩^{|α|−m−rδ}`.
    pub zygmund: f64,
    /// The larger of the two.
    pub constant: f64,
}

/// Estimated constants `Ĉ_α` of a symbol.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeminormTable {
    pub class: SymbolClass,
    pub rows: Vec<SeminormRow>,
    pub samples: usize,
}

impl SeminormTable {
    pub fn get(&self, alpha: &[usize]) -> Option<&SeminormRow> {
        self.rows.iter().find(|r| r.alpha == alpha)
    }

    /// Largest `Ĉ_α` with `|α| = order`.
    pub fn max_of_order(&self, order: usize) -> f64 {
        self.rows.iter().filter(|r| r.alpha.iter().sum::<usize>() == order).map(|r| r.constant).fold(0.0, f64::max)
    }
}

/// Checks that every band of `fam` that meets the lattice has at least five
/// lattice samples per axis across its support.
fn check_band_resolution(fam: &DyadicFamily) -> Result<()> {
    let spec = fam.spec();
    let h = spec.freq_step();
    for k in 0..=fam.j_max() {
        let (lo, hi) = fam.profile().band_support(k);
        if lo > spec.max_frequency() {
            continue;
        }
        let count = if k == 0 { 2.0 * hi / h } else { (hi - lo) / h };
        if count < 5.0 {
            return Err(Error::Resolution(format!(
                "band {k} has {count:.1} frequency samples per axis; at least 5 are needed"
            )));
        }
    }
    Ok(())
}

/// Samples the constants in the defining estimates of `C^r_* S^m_{1,δ}`
/// using the declared class of `a`. `fam` supplies the Zygmund norm.
pub fn estimate_seminorms(a: &DenseSymbol, alpha_max: usize, fam: &DyadicFamily) -> Result<SeminormTable> {
    if alpha_max > 3 {
        return Err(Error::Parameter(format!("alpha_max = {alpha_max} exceeds 3")));
    }
    a.spec.ensure_same(fam.spec())?;
    check_band_resolution(fam)?;
    let class = a.class;
    let alphas = multi_indices_nd(a.spec.dim(), alpha_max);
    let points: Vec<usize> = sample_frequencies(&a.spec, 2).into_iter().filter(|&i| a.covers(i)).collect();
    let lattice = FrequencyLattice::new(a.spec);
    let per_point: Vec<Vec<Option<(f64, f64)>>> = points
        .par_iter()
        .map(|&i| {
            let mut cache = HashMap::new();
            let jp = japanese(lattice.norm(i));
            alphas
                .iter()
                .map(|alpha| {
                    let order = alpha.iter().sum::<usize>() as f64;
                    Ok(match eta_derivative_cached(a, i, alpha, &mut cache)? {
                        None => None,
                        Some(d) => {
                            let pw = d.max_abs() * jp.powf(order - class.m);
                            let zy = zygmund_norm(&d, class.r, fam)? * jp.powf(order - class.m - class.r * class.delta);
                            Some((pw, zy))
                        }
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(alphas.len());
    for (ai, alpha) in alphas.iter().enumerate() {
        let mut pw = 0.0f64;
        let mut zy = 0.0f64;
        let mut seen = 0usize;
        for v in per_point.iter().filter_map(|v| v[ai]) {
            pw = pw.max(v.0);
            zy = zy.max(v.1);
            seen += 1;
        }
        if seen == 0 {
            return Err(Error::Resolution(format!("no sampled frequency supports the stencil for alpha = {alpha:?}")));
        }
        rows.push(SeminormRow { alpha: alpha.clone(), pointwise: pw, zygmund: zy, constant: pw.max(zy) });
    }
    Ok(SeminormTable { class, rows, samples: points.len() })
}

/// The split `a = a♯_γ + a♭_γ`.
#[derive(Clone, Debug)]
pub struct SmoothingSplit {
    pub gamma: f64,
    pub sharp: DenseSymbol,
    pub flat: DenseSymbol,
}

/// The low-pass profile `φ` (one on `|ξ| ≤ 1/2`, zero beyond 1).
pub fn smoothing_cutoff() -> BumpProfile {
    BumpProfile::standard()
}

/// Splits `a` into `a♯_γ(x,η) = Σ_k (φ(2^{-γk}D)a(·,η))(x) ψ_k(η)` and the
/// remainder `a♭_γ = a − a♯_γ`, where `ψ_k` is the family `lp`.
///
/// The sharp part is declared in `S^m_{1,γ}` and the flat part in
/// `C^r_* S^{m−(γ−δ)r}_{1,γ}`.
pub fn smooth_split(a: &DenseSymbol, gamma: f64, lp: &DyadicFamily) -> Result<SmoothingSplit> {
    let class = a.class;
    if !(gamma.is_finite() && gamma >= class.delta && gamma <= 1.0) {
        return Err(Error::Parameter(format!("gamma = {gamma} must lie in [delta, 1] = [{}, 1]", class.delta)));
    }
    a.spec.ensure_same(lp.spec())?;
    let lattice = FrequencyLattice::new(a.spec);
    let phi = smoothing_cutoff();
    let low_pass: Vec<Vec<f64>> = (0..=lp.j_max())
        .map(|k| {
            let s = 2f64.powf(-(k as f64) * gamma);
            lattice.norms().iter().map(|&t| phi.eval(t * s)).collect()
        })
        .collect();
    let make = |sharp: bool, class: SymbolClass| DenseSymbol {
        spec: a.spec,
        class,
        repr: Repr::Smoothed(Arc::new(SmoothedRule {
            base: a.clone(),
            gamma,
            sharp,
            lp: *lp.profile(),
            low_pass: low_pass.clone(),
        })),
    };
    let sharp_class = SymbolClass { r: class.r, m: class.m, delta: gamma };
    let flat_class = SymbolClass { r: class.r, m: class.m - (gamma - class.delta) * class.r, delta: gamma };
    Ok(SmoothingSplit { gamma, sharp: make(true, sharp_class), flat: make(false, flat_class) })
}

impl SmoothingSplit {
    /// `max |a♯ + a♭ − a| / max |a|` over the given lattice frequencies.
    pub fn exactness_residual(&self, a: &DenseSymbol, indices: &[usize]) -> Result<f64> {
        let (num, den) = indices
            .par_iter()
            .map(|&i| {
                let s = a.slice(i)?;
                let sum = self.sharp.slice(i)?.add(&self.flat.slice(i)?)?;
                Ok((sum.sub(&s)?.max_abs(), s.max_abs()))
            })
            .try_reduce(|| (0.0, 0.0), |x: (f64, f64), y| Ok((x.0.max(y.0), x.1.max(y.1))))?;
        Ok(if den > 0.0 { num / den } else { num })
    }
}

fn paraproduct_parts(b: &GridField, f: &GridField, fam: &DyadicFamily) -> Result<(GridField, GridField, GridField)> {
    b.spec().ensure_same(f.spec())?;
    fam.spec().ensure_same(b.spec())?;
    let bb = fam.project_all(b)?;
    let ff = fam.project_all(f)?;
    let len = bb.len() as i64;
    // prefix[j + 1] = Σ_{i ≤ j} ψ_i(D)b
    let mut prefix = vec![GridField::zeros(*b.spec())];
    for band in &bb {
        let next = prefix.last().expect("nonempty").add(band)?;
        prefix.push(next);
    }
    let upto = |j: i64| &prefix[(j + 1).clamp(0, len) as usize];
    let spec = *b.spec();
    let (mut hh, mut hl, mut lh) = (GridField::zeros(spec), GridField::zeros(spec), GridField::zeros(spec));
    for (k, fk) in ff.iter().enumerate() {
        let k = k as i64;
        let total = upto(len - 1);
        let near = upto(k + 5).sub(upto(k - 6))?;
        let high = total.sub(upto(k + 5))?;
        hh = hh.add(&near.mul(fk)?)?;
        hl = hl.add(&high.mul(fk)?)?;
        lh = lh.add(&upto(k - 6).mul(fk)?)?;
    }
    Ok((hh, hl, lh))
}

/// `R_b(f) = Σ_k Σ_{|j−k| ≤ 5} (ψ_j(D)b)(ψ_k(D)f)`.
pub fn paraproduct_hh(b: &GridField, f: &GridField, fam: &DyadicFamily) -> Result<GridField> {
    Ok(paraproduct_parts(b, f, fam)?.0)
}

/// `π_b(f) = Σ_k Σ_{j ≥ k+6} (ψ_j(D)b)(ψ_k(D)f)`.
pub fn paraproduct_hl(b: &GridField, f: &GridField, fam: &DyadicFamily) -> Result<GridField> {
    Ok(paraproduct_parts(b, f, fam)?.1)
}

/// `Σ_k Σ_{j ≤ k−6} (ψ_j(D)b)(ψ_k(D)f)`, completing `R_b + π_b` to `b·f`.
pub fn paraproduct_lh(b: &GridField, f: &GridField, fam: &DyadicFamily) -> Result<GridField> {
    Ok(paraproduct_parts(b, f, fam)?.2)
}

/// All three paraproduct pieces `(R_b f, π_b f, lowhigh)` from one pass.
pub fn paraproducts(b: &GridField, f: &GridField, fam: &DyadicFamily) -> Result<(GridField, GridField, GridField)> {
    paraproduct_parts(b, f, fam)
}

/// Options for [`coifman_meyer_decompose`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeOptions {
    /// Largest `|β|_∞` kept.
    pub beta_max: usize,
    /// Points per axis of the sub-grid of `[−1/2, 1/2]^n`; defaults to the
    /// smallest power of two `≥ 4β_max`.
    pub subgrid: Option<usize>,
    /// Bands to decompose; all bands of the family by default.
    pub bands: Option<Vec<usize>>,
}

impl Default for ModeOptions {
    fn default() -> Self {
        ModeOptions { beta_max: 8, subgrid: None, bands: None }
    }
}

/// Coefficients `c_{k,β}` stored as `Σ_t weight[t][β]·basis[t]`.
#[derive(Clone, Debug)]
struct ModeBand {
    k: usize,
    basis: Vec<GridField>,
    /// `weights[t][b]` for the β with flat index `b`.
    weights: Vec<Vec<C64>>,
}

/// The coefficients of `a(x,η)ψ_k(η) = Σ_β c_{k,β}(x) e^{iβ·2^{-k}η} ψ̃_k(η)`.
#[derive(Clone, Debug)]
pub struct FourierModeDecomposition {
    spec: GridSpec,
    beta_max: usize,
    subgrid: usize,
    lp: DyadicProfile,
    aux: AuxiliaryFamilies,
    bands: Vec<ModeBand>,
}

impl FourierModeDecomposition {
    pub fn beta_max(&self) -> usize {
        self.beta_max
    }

    pub fn subgrid(&self) -> usize {
        self.subgrid
    }

    pub fn bands(&self) -> Vec<usize> {
        self.bands.iter().map(|b| b.k).collect()
    }

    /// All `β` with `|β|_∞ ≤ β_max`, in the storage order.
    pub fn betas(&self) -> Vec<Vec<i64>> {
        beta_list(self.spec.dim(), self.beta_max)
    }

    fn band(&self, k: usize) -> Result<&ModeBand> {
        self.bands.iter().find(|b| b.k == k).ok_or_else(|| Error::Parameter(format!("band {k} was not decomposed")))
    }

    fn beta_position(&self, beta: &[i64]) -> Option<usize> {
        let side = 2 * self.beta_max as i64 + 1;
        if beta.len() != self.spec.dim() || beta.iter().any(|b| b.abs() > self.beta_max as i64) {
            return None;
        }
        Some(beta.iter().fold(0usize, |acc, b| acc * side as usize + (b + self.beta_max as i64) as usize))
    }

    /// The coefficient field `c_{k,β}`.
    pub fn coefficient(&self, k: usize, beta: &[i64]) -> Result<GridField> {
        let band = self.band(k)?;
        let b = self.beta_position(beta).ok_or_else(|| Error::Parameter(format!("mode {beta:?} not stored")))?;
        let mut out = GridField::zeros(self.spec);
        for (f, w) in band.basis.iter().zip(&band.weights) {
            if w[b] != C64::new(0.0, 0.0) {
                out.axpy(w[b], f)?;
            }
        }
        Ok(out)
    }

    /// `max_x |c_{k,β}|` for every stored `|β|_∞ = level`, maximized.
    pub fn level_sup(&self, k: usize, level: usize) -> Result<f64> {
        let mut best = 0.0f64;
        for beta in self.betas() {
            if beta.iter().map(|b| b.unsigned_abs() as usize).max().unwrap_or(0) == level {
                best = best.max(self.coefficient(k, &beta)?.max_abs());
            }
        }
        Ok(best)
    }

    /// `Σ_{|β|_∞ ≤ β_max} c_{k,β}(·) e^{iβ·2^{-k}η} ψ̃_k(η)` at one frequency.
    pub fn reconstruct_slice(&self, k: usize, eta: &[f64]) -> Result<GridField> {
        self.reconstruct_slice_truncated(k, eta, self.beta_max)
    }

    /// As [`Self::reconstruct_slice`] with only the modes `|β|_∞ ≤ level`.
    pub fn reconstruct_slice_truncated(&self, k: usize, eta: &[f64], level: usize) -> Result<GridField> {
        let band = self.band(k)?;
        let t = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tilde = self.aux.tilde(k, t);
        let mut out = GridField::zeros(self.spec);
        if tilde == 0.0 {
            return Ok(out);
        }
        let scale = pow2(-(k as i32));
        let phases: Vec<(usize, C64)> = self
            .betas()
            .iter()
            .enumerate()
            .filter(|(_, beta)| beta.iter().all(|b| b.unsigned_abs() as usize <= level))
            .map(|(b, beta)| {
                let dot: f64 = beta.iter().zip(eta).map(|(&bb, &e)| bb as f64 * e).sum();
                (b, C64::from_polar(tilde, dot * scale))
            })
            .collect();
        for (f, w) in band.basis.iter().zip(&band.weights) {
            let c: C64 = phases.iter().map(|&(b, ph)| w[b] * ph).sum();
            if c != C64::new(0.0, 0.0) {
                out.axpy(c, f)?;
            }
        }
        Ok(out)
    }

    /// Largest `|F c_{k,β}(ξ)|` (relative to the coefficient's peak) at
    /// `|ξ| < lo` or `|ξ| > hi`, over all stored modes of band `k`.
    pub fn support_leak(&self, k: usize, lo: f64, hi: f64) -> Result<f64> {
        let lattice = FrequencyLattice::new(self.spec);
        let mut worst = 0.0f64;
        for beta in self.betas() {
            let s = forward_unchecked(&self.coefficient(k, &beta)?);
            let peak = s.values().iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if peak == 0.0 {
                continue;
            }
            for (i, z) in s.values().iter().enumerate() {
                let t = lattice.norm(i);
                if t < lo || t > hi {
                    worst = worst.max(z.norm() / peak);
                }
            }
        }
        Ok(worst)
    }
}

fn beta_list(n: usize, beta_max: usize) -> Vec<Vec<i64>> {
    let side = 2 * beta_max + 1;
    (0..side.pow(n as u32))
        .map(|mut idx| {
            let mut beta = vec![0i64; n];
            for a in (0..n).rev() {
                beta[a] = (idx % side) as i64 - beta_max as i64;
                idx /= side;
            }
            beta
        })
        .collect()
}

/// Computes `c_{k,β}(x) = ∫_{[−1/2,1/2]^n} e^{−2πiβζ} a(x, 2^{k+1}πζ) ψ_k(2^{k+1}πζ) dζ`
/// by the trapezoidal rule on a uniform sub-grid, which is exact up to
/// aliasing because the integrand is smooth and vanishes near the boundary.
pub fn coifman_meyer_decompose(a: &DenseSymbol, lp: &DyadicFamily, opts: &ModeOptions) -> Result<FourierModeDecomposition> {
    a.spec.ensure_same(lp.spec())?;
    if !matches!(lp.kind(), FamilyKind::LittlewoodPaley { .. }) {
        return Err(Error::Parameter("the mode decomposition uses the Littlewood–Paley family".into()));
    }
    let n = a.spec.dim();
    let p = opts.subgrid.unwrap_or_else(|| (4 * opts.beta_max).max(4).next_power_of_two());
    if p < 2 * opts.beta_max + 1 {
        return Err(Error::Parameter(format!(
            "sub-grid of {p} points aliases modes up to beta_max = {}; need at least {}",
            opts.beta_max,
            2 * opts.beta_max + 1
        )));
    }
    let bands = opts.bands.clone().unwrap_or_else(|| (0..=lp.j_max()).collect());
    if let Some(&k) = bands.iter().find(|&&k| k > lp.j_max()) {
        return Err(Error::Parameter(format!("band {k} exceeds J_max = {}", lp.j_max())));
    }
    let profile = *lp.profile();
    let aux = AuxiliaryFamilies::new(profile)?;
    let betas = beta_list(n, opts.beta_max);
    let total = p.pow(n as u32);
    let out_bands = bands
        .iter()
        .map(|&k| {
            // Sub-grid nodes ζ_j = (j − P/2)/P and their frequencies η = 2^{k+1}πζ.
            let scale = pow2(k as i32 + 1) * PI;
            let mut nodes = Vec::new();
            for flat in 0..total {
                let mut rem = flat;
                let mut zeta = vec![0.0; n];
                for a_ in (0..n).rev() {
                    zeta[a_] = ((rem % p) as f64 - (p / 2) as f64) / p as f64;
                    rem /= p;
                }
                let eta: Vec<f64> = zeta.iter().map(|z| z * scale).collect();
                let w = profile.value(k as i64, eta.iter().map(|v| v * v).sum::<f64>().sqrt());
                if w != 0.0 {
                    nodes.push((zeta, eta, w));
                }
            }
            let phase = |beta: &[i64], zeta: &[f64]| {
                let dot: f64 = beta.iter().zip(zeta).map(|(&b, &z)| b as f64 * z).sum();
                C64::from_polar(1.0 / total as f64, -2.0 * PI * dot)
            };
            match &a.repr {
                Repr::LowRank(terms) => {
                    let weights = terms
                        .iter()
                        .map(|t| {
                            let samples: Vec<(usize, C64)> = nodes
                                .iter()
                                .enumerate()
                                .map(|(j, (_, eta, w))| (j, (t.eta)(eta) * *w))
                                .filter(|(_, v)| *v != C64::new(0.0, 0.0))
                                .collect();
                            betas
                                .par_iter()
                                .map(|beta| samples.iter().map(|&(j, v)| v * phase(beta, &nodes[j].0)).sum())
                                .collect()
                        })
                        .collect();
                    Ok(ModeBand { k, basis: terms.iter().map(|t| t.x.clone()).collect(), weights })
                }
                _ => {
                    let slices: Vec<GridField> = nodes
                        .par_iter()
                        .map(|(_, eta, w)| a.slice_at(eta).map(|s| s.scale(C64::new(*w, 0.0))))
                        .collect::<Result<_>>()?;
                    let basis: Vec<GridField> = betas
                        .par_iter()
                        .map(|beta| {
                            let mut c = GridField::zeros(a.spec);
                            for ((zeta, _, _), s) in nodes.iter().zip(&slices) {
                                c.axpy(phase(beta, zeta), s).expect("same grid");
                            }
                            c
                        })
                        .collect();
                    let weights = (0..betas.len())
                        .map(|t| (0..betas.len()).map(|b| C64::new(if b == t { 1.0 } else { 0.0 }, 0.0)).collect())
                        .collect();
                    Ok(ModeBand { k, basis, weights })
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FourierModeDecomposition { spec: a.spec, beta_max: opts.beta_max, subgrid: p, lp: profile, aux, bands: out_bands })
}

/// The band symbol `Σ_β c_{k,β}(x) e^{iβ·2^{-k}η} ψ̃_k(η)` as a symbol.
pub fn reconstruct_modes(d: &Arc<FourierModeDecomposition>, k: usize, class: SymbolClass) -> Result<DenseSymbol> {
    d.band(k)?;
    Ok(DenseSymbol { spec: d.spec, class, repr: Repr::Modes(Arc::clone(d), k) })
}

/// `max |reconstruction − a·ψ_k|` over the given lattice frequencies,
/// truncating to `|β|_∞ ≤ level`.
pub fn mode_reconstruction_error(
    d: &FourierModeDecomposition,
    a: &DenseSymbol,
    k: usize,
    level: usize,
    indices: &[usize],
) -> Result<f64> {
    let lattice = FrequencyLattice::new(d.spec);
    indices
        .par_iter()
        .map(|&i| {
            let psi = d.lp.value(k as i64, lattice.norm(i));
            let rec = d.reconstruct_slice_truncated(k, lattice.xi(i), level)?;
            let target = a.slice(i)?.scale(C64::new(psi, 0.0));
            Ok(rec.sub(&target)?.max_abs())
        })
        .try_reduce(|| 0.0, |x, y| Ok(x.max(y)))
}

/// The Fourier-support window `c·2^{(k−2)/2} ≤ |ξ| ≤ 2^{kγ−3}` imposed on
/// the coefficients `a_k` of a separable symbol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportCondition {
    pub c: f64,
    pub gamma: f64,
}

impl SupportCondition {
    pub fn window(&self, k: usize) -> (f64, f64) {
        (self.c * 2f64.powf((k as f64 - 2.0) / 2.0), 2f64.powf(k as f64 * self.gamma - 3.0))
    }

    /// Largest `|F a_k(ξ)|` outside the window, relative to the peak.
    pub fn leak(&self, a_k: &GridField, k: usize) -> f64 {
        let (lo, hi) = self.window(k);
        spectral_leak(a_k, lo, hi).0
    }
}

/// `(max outside [lo, hi] / peak, peak)` of `|F f|`.
pub(crate) fn spectral_leak(f: &GridField, lo: f64, hi: f64) -> (f64, f64) {
    let lattice = FrequencyLattice::new(*f.spec());
    let s = forward_unchecked(f);
    let mut peak = 0.0f64;
    let mut out = 0.0f64;
    for (i, z) in s.values().iter().enumerate() {
        let t = lattice.norm(i);
        peak = peak.max(z.norm());
        if t < lo || t > hi {
            out = out.max(z.norm());
        }
    }
    (if peak > 0.0 { out / peak } else { 0.0 }, peak)
}

/// Recorded constants of `sup_k ‖a_k‖_∞ + 2^{−krδ}‖a_k‖_{C^r_*}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeparableBounds {
    pub sup_linf: f64,
    pub sup_weighted_zygmund: f64,
}

/// `a(x, η) = Σ_k a_k(x) χ_k(η)` with `χ_k` the family of [`crate::dyadic::build_chi_family`].
#[derive(Clone, Debug)]
pub struct SeparableSymbol {
    spec: GridSpec,
    class: SymbolClass,
    terms: Vec<(usize, GridField)>,
    bounds: SeparableBounds,
    support: Option<SupportCondition>,
}

impl SeparableSymbol {
    /// Builds the symbol and records its bounds, using `lp` for the Zygmund norm.
    pub fn new(class: SymbolClass, terms: Vec<(usize, GridField)>, lp: &DyadicFamily) -> Result<Self> {
        let spec = *lp.spec();
        if terms.is_empty() {
            return Err(Error::InvalidInput("a separable symbol needs at least one band".into()));
        }
        let mut seen = BTreeSet::new();
        let mut sup_linf = 0.0f64;
        let mut sup_zyg = 0.0f64;
        for (k, f) in &terms {
            spec.ensure_same(f.spec())?;
            if !seen.insert(*k) {
                return Err(Error::InvalidInput(format!("band {k} listed twice")));
            }
            sup_linf = sup_linf.max(f.max_abs());
            sup_zyg = sup_zyg.max(2f64.powf(-(*k as f64) * class.r * class.delta) * zygmund_norm(f, class.r, lp)?);
        }
        let bounds = SeparableBounds { sup_linf, sup_weighted_zygmund: sup_zyg };
        if !(sup_linf.is_finite() && sup_zyg.is_finite()) {
            return Err(Error::InvalidInput("separable bounds are not finite".into()));
        }
        Ok(SeparableSymbol { spec, class, terms, bounds, support: None })
    }

    /// Verifies the Fourier-support window on every `a_k` (to `1e−12` of the
    /// peak) and records it.
    pub fn enforce_support(mut self, cond: SupportCondition) -> Result<Self> {
        for (k, f) in &self.terms {
            let leak = cond.leak(f, *k);
            if leak > 1e-12 {
                return Err(Error::Construction(format!(
                    "coefficient of band {k} leaks {leak:e} outside its support window"
                )));
            }
        }
        self.support = Some(cond);
        Ok(self)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn class(&self) -> SymbolClass {
        self.class
    }

    pub fn terms(&self) -> &[(usize, GridField)] {
        &self.terms
    }

    pub fn bounds(&self) -> SeparableBounds {
        self.bounds
    }

    pub fn support(&self) -> Option<SupportCondition> {
        self.support
    }

    /// The same symbol as a low-rank dense symbol with analytic `χ_k`.
    pub fn densify(&self) -> DenseSymbol {
        let chi = DyadicProfile::new(BumpProfile::standard());
        let terms = self
            .terms
            .iter()
            .map(|(k, f)| {
                let k = *k as i64;
                let eta: EtaFn =
                    Arc::new(move |e: &[f64]| C64::new(chi.value(k, e.iter().map(|v| v * v).sum::<f64>().sqrt()), 0.0));
                Term::new(f.clone(), eta)
            })
            .collect();
        DenseSymbol { spec: self.spec, class: self.class, repr: Repr::LowRank(terms) }
    }
}

/// Result of [`to_separable`].
#[derive(Clone, Debug)]
pub struct SeparableConversion {
    pub symbol: SeparableSymbol,
    /// `max |a − Σ_k a_k χ_k|` over the checked frequencies.
    pub residual: f64,
    pub checked: usize,
}

/// Freezes `a` at one frequency per `χ`-band: `a_0 = a(·, 0)` and
/// `a_k = a(·, 2^{k−1}e_1)`, where `χ_k` equals one. The residual is zero when
/// `a` is constant in `η` on each band.
pub fn to_separable(a: &DenseSymbol, chi: &DyadicFamily, lp: &DyadicFamily) -> Result<SeparableConversion> {
    a.spec.ensure_same(chi.spec())?;
    if chi.kind() != FamilyKind::Chi {
        return Err(Error::Parameter("to_separable needs the chi family".into()));
    }
    let n = a.spec.dim();
    let mut terms = Vec::new();
    for k in 0..=chi.j_max() {
        let mut eta = vec![0.0; n];
        if k > 0 {
            eta[0] = pow2(k as i32 - 1);
        }
        match a.slice_at(&eta) {
            Ok(s) => terms.push((k, s)),
            Err(Error::Coverage(_)) if eta[0] > a.spec.axis_max_frequency() => break,
            Err(e) => return Err(e),
        }
    }
    let symbol = SeparableSymbol::new(a.class, terms, lp)?;
    let indices: Vec<usize> =
        if a.spec.len() <= 4096 { a.covered_indices() } else { sample_frequencies(&a.spec, 0) };
    let dense = symbol.densify();
    let residual = indices
        .par_iter()
        .filter(|&&i| a.covers(i))
        .map(|&i| Ok(a.slice(i)?.sub(&dense.slice(i)?)?.max_abs()))
        .try_reduce(|| 0.0, |x: f64, y| Ok(x.max(y)))?;
    Ok(SeparableConversion { symbol, residual, checked: indices.len() })
}

/// Options of the [`rough_chirp`] preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChirpOptions {
    pub seed: u64,
    /// Restrict every `a_k` to this Fourier-support window (no mean term).
    pub support: Option<SupportCondition>,
    /// Number of random directions per lacunary scale.
    pub directions_per_scale: usize,
}

impl Default for ChirpOptions {
    fn default() -> Self {
        ChirpOptions { seed: 7, support: None, directions_per_scale: 2 }
    }
}

/// A separable member of `C^r_* S^0_{1,δ}` with maximal admissible roughness:
/// `a_k(x) = c_k (1 + Σ_{j ≥ kδ} 2^{(kδ−j)r} Σ_d cos(ξ_{j,d}·x + θ_{j,d}))`
/// with `|ξ_{j,d}| ≈ 2^j` in random directions, and `c_k` chosen so that
/// `max(‖a_k‖_∞, 2^{−krδ}‖a_k‖_{C^r_*}) = 1`.
pub fn rough_chirp(spec: GridSpec, r: f64, delta: f64, opts: &ChirpOptions, lp: &DyadicFamily) -> Result<SeparableSymbol> {
    let class = SymbolClass::new(r, 0.0, delta)?;
    spec.ensure_same(lp.spec())?;
    if opts.directions_per_scale == 0 {
        return Err(Error::Parameter("directions_per_scale must be positive".into()));
    }
    let chi_top = spec.max_frequency().log2().ceil().max(0.0) as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = spec.dim();
    let j_top = (spec.axis_max_frequency() / 2.0).log2().floor() as i64;
    let h = spec.freq_step();
    let mut terms = Vec::new();
    for k in 0..=chi_top {
        let kd = k as f64 * delta;
        let mut samples = if opts.support.is_some() {
            vec![C64::new(0.0, 0.0); spec.len()]
        } else {
            vec![C64::new(1.0, 0.0); spec.len()]
        };
        // With a support window the scales are taken from inside the window,
        // otherwise from 2^{kδ} upwards.
        let (j_lo, j_hi) = match opts.support {
            Some(cond) => {
                let (lo, hi) = cond.window(k);
                (lo.log2().ceil() as i64, (hi.log2().floor() as i64).min(j_top))
            }
            None => (kd.ceil().max(0.0) as i64, j_top),
        };
        let mut x = vec![0.0; n];
        for j in j_lo.min(j_hi + 1)..=j_hi {
            let amp = 2f64.powf((kd - j as f64) * r);
            for _ in 0..opts.directions_per_scale {
                let mut dir: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                dir.iter_mut().for_each(|v| *v /= norm);
                let theta = rng.random_range(0.0..2.0 * PI);
                let xi: Vec<f64> = dir.iter().map(|d| (d * pow2(j as i32) / h).round() * h).collect();
                let t = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                if t == 0.0 {
                    continue;
                }
                if let Some(cond) = opts.support {
                    let (lo, hi) = cond.window(k);
                    if t < lo || t > hi {
                        continue;
                    }
                }
                for (i, s) in samples.iter_mut().enumerate() {
                    spec.point(i, &mut x);
                    let phase: f64 = x.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>() + theta;
                    *s += C64::new(amp * phase.cos(), 0.0);
                }
            }
        }
        let f = GridField::new(spec, samples)?;
        let size = f.max_abs().max(2f64.powf(-kd * r) * zygmund_norm(&f, r, lp)?);
        if size == 0.0 {
            continue;
        }
        terms.push((k, f.scale(C64::new(1.0 / size, 0.0))));
    }
    if terms.is_empty() {
        return Err(Error::Construction("no band admits a coefficient inside the support window".into()));
    }
    let sym = SeparableSymbol::new(class, terms, lp)?;
    match opts.support {
        Some(cond) => sym.enforce_support(cond),
        None => Ok(sym),
    }
}

/// On-disk description of a symbol. Relative paths resolve against the
/// descriptor's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SymbolDescriptor {
    /// A full `2n`-dimensional table (spatial axes, then frequency axes in FFT order).
    Dense { r: f64, m: f64, delta: f64, table: PathBuf },
    /// Bands `a_k` against the `χ`-family.
    Separable { r: f64, m: f64, delta: f64, bands: Vec<BandFile> },
    /// A built-in symbol.
    AnalyticPreset(Preset),
}

/// One coefficient of a separable descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandFile {
    pub k: usize,
    pub field: PathBuf,
}

/// Built-in symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Preset {
    Identity,
    MultiplierBessel { m: f64 },
    Multiplication { field: PathBuf, #[serde(default = "default_r")] r: f64 },
    RoughChirp { r: f64, delta: f64, #[serde(default)] seed: u64 },
}

fn default_r() -> f64 {
    1.0
}

/// A symbol loaded from a descriptor.
#[derive(Clone, Debug)]
pub enum LoadedSymbol {
    Dense(DenseSymbol),
    Separable(SeparableSymbol),
}

impl LoadedSymbol {
    pub fn spec(&self) -> &GridSpec {
        match self {
            LoadedSymbol::Dense(d) => d.spec(),
            LoadedSymbol::Separable(s) => s.spec(),
        }
    }
}

impl SymbolDescriptor {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Materializes the symbol. Presets without their own grid use `grid`.
    pub fn load(&self, base: &Path, grid: Option<GridSpec>, lp_eps: f64) -> Result<LoadedSymbol> {
        let need_grid = || grid.ok_or_else(|| Error::InvalidInput("this symbol needs a grid from the input field".into()));
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Ok(match self {
            SymbolDescriptor::Dense { r, m, delta, table } => {
                let class = SymbolClass::new(*r, *m, *delta)?;
                LoadedSymbol::Dense(DenseSymbol::from_table(FiofArray::read(&resolve(table))?, class)?)
            }
            SymbolDescriptor::Separable { r, m, delta, bands } => {
                let class = SymbolClass::new(*r, *m, *delta)?;
                let fields = bands
                    .iter()
                    .map(|b| Ok((b.k, crate::io::read_field(&resolve(&b.field))?)))
                    .collect::<Result<Vec<_>>>()?;
                let spec = *fields.first().ok_or_else(|| Error::InvalidInput("no bands".into()))?.1.spec();
                let lp = crate::dyadic::build_lp_family(spec, lp_eps)?;
                LoadedSymbol::Separable(SeparableSymbol::new(class, fields, &lp)?)
            }
            SymbolDescriptor::AnalyticPreset(p) => match p {
                Preset::Identity => LoadedSymbol::Dense(DenseSymbol::identity(need_grid()?)),
                Preset::MultiplierBessel { m } => LoadedSymbol::Dense(DenseSymbol::bessel(need_grid()?, *m)?),
                Preset::Multiplication { field, r } => {
                    let b = crate::io::read_field(&resolve(field))?;
                    LoadedSymbol::Dense(DenseSymbol::multiplication(b, SymbolClass::new(*r, 0.0, 0.0)?))
                }
                Preset::RoughChirp { r, delta, seed } => {
                    let spec = need_grid()?;
                    let lp = crate::dyadic::build_lp_family(spec, lp_eps)?;
                    let opts = ChirpOptions { seed: *seed, ..ChirpOptions::default() };
                    LoadedSymbol::Separable(rough_chirp(spec, *r, *delta, &opts, &lp)?)
                }
            },
        })
    }
}
