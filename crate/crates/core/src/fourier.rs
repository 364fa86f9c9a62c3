//! Periodic grids, the continuum-normalized discrete Fourier transform and
//! Fourier multipliers.
//!
//! A [`GridSpec`] with period `L` and `N` samples per axis stands in for
//! `R^n`. The forward transform carries the cell volume `(L/N)^n` and the
//! inverse carries `L^{-n}`, so that `f̂(ξ) = ∫ e^{-ixξ} f(x) dx` and
//! `f(x) = (2π)^{-n} ∫ e^{ixξ} f̂(ξ) dξ` hold as Riemann sums on the lattice
//! `ξ ∈ (2π/L) Z^n`.

use crate::error::{check_p, Error, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Complex sample type used throughout the toolkit.
pub type C64 = Complex64;

/// Discretization of `R^n` by a periodic box of side `period` with `size`
/// samples per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    dim: usize,
    size: usize,
    period: f64,
}

impl GridSpec {
    /// Validates and builds a grid. `size` must be a power of two with
    /// `size >= 16`, `period` must be positive and finite.
    pub fn new(dim: usize, size: usize, period: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("spatial dimension must be positive".into()));
        }
        if size < 16 || !size.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "samples per axis must be a power of two >= 16, got {size}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Parameter(format!("period must be positive, got {period}")));
        }
        size.checked_pow(dim as u32)
            .ok_or_else(|| Error::Parameter("grid too large".into()))?;
        Ok(GridSpec { dim, size, period })
    }

    /// The default desk-scale grid: `n = 2`, period `2π·16`.
    pub fn desk(size: usize) -> Result<Self> {
        GridSpec::new(2, size, 32.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Total number of samples `N^n`.
    pub fn len(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    /// Always false: a valid grid has at least 16 samples.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spatial step `L/N`.
    pub fn spacing(&self) -> f64 {
        self.period / self.size as f64
    }

    /// Frequency step `2π/L`.
    pub fn freq_step(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Spatial cell volume `(L/N)^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Largest per-axis frequency magnitude `πN/L` (attained on the Nyquist row).
    pub fn axis_max_frequency(&self) -> f64 {
        PI * self.size as f64 / self.period
    }

    /// Largest lattice frequency norm `πN√n/L`.
    pub fn max_frequency(&self) -> f64 {
        self.axis_max_frequency() * (self.dim as f64).sqrt()
    }

    /// Signed integer frequency of FFT-ordered index `i` along one axis.
    pub fn signed_index(&self, i: usize) -> i64 {
        let n = self.size as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Splits a flat row-major index into per-axis indices.
    pub fn unravel(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = idx % self.size;
            idx /= self.size;
        }
    }

    /// Joins per-axis indices (taken modulo `N`) into a flat index.
    pub fn ravel(&self, axes: &[i64]) -> usize {
        let n = self.size as i64;
        axes.iter().fold(0usize, |acc, &k| acc * self.size + k.rem_euclid(n) as usize)
    }

    /// Physical coordinates of sample `idx`.
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let h = self.spacing();
        let mut axes = vec![0usize; self.dim];
        self.unravel(idx, &mut axes);
        for (o, &i) in out.iter_mut().zip(&axes) {
            *o = i as f64 * h;
        }
    }

    /// Frequency vector of spectrum index `idx`.
    pub fn frequency(&self, idx: usize, out: &mut [f64]) {
        let dk = self.freq_step();
        let mut axes = vec![0usize; self.dim];
        self.unravel(idx, &mut axes);
        for (o, &i) in out.iter_mut().zip(&axes) {
            *o = self.signed_index(i) as f64 * dk;
        }
    }

    /// Whether spectrum index `idx` lies on a Nyquist row of some axis.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let mut idx = idx;
        for _ in 0..self.dim {
            if idx % self.size == self.size / 2 {
                return true;
            }
            idx /= self.size;
        }
        false
    }

    /// Index of the lattice point equal to `xi`, if `xi` is a lattice point
    /// (to relative tolerance 1e-9) inside the represented range.
    pub fn lattice_index(&self, xi: &[f64]) -> Option<usize> {
        if xi.len() != self.dim {
            return None;
        }
        let dk = self.freq_step();
        let half = (self.size / 2) as i64;
        let mut axes = Vec::with_capacity(self.dim);
        for &x in xi {
            let k = (x / dk).round();
            if (k * dk - x).abs() > 1e-9 * dk.max(x.abs()) {
                return None;
            }
            let k = k as i64;
            if k < -half || k >= half {
                return None;
            }
            axes.push(k);
        }
        Some(self.ravel(&axes))
    }

    /// Index of the lattice point nearest to `xi`, clamped into range.
    pub fn nearest_lattice_index(&self, xi: &[f64]) -> usize {
        let dk = self.freq_step();
        let half = (self.size / 2) as i64;
        let axes: Vec<i64> = xi
            .iter()
            .map(|&x| ((x / dk).round() as i64).clamp(-half + 1, half - 1))
            .collect();
        self.ravel(&axes)
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Dimension(format!("grid {self:?} does not match {other:?}")))
        }
    }
}

/// All lattice frequencies of a grid, precomputed in spectrum order.
#[derive(Clone, Debug)]
pub struct FrequencyLattice {
    spec: GridSpec,
    coords: Vec<f64>,
    norms: Vec<f64>,
}

impl FrequencyLattice {
    pub fn new(spec: GridSpec) -> Self {
        let d = spec.dim();
        let mut coords = vec![0.0; spec.len() * d];
        for (i, c) in coords.chunks_mut(d).enumerate() {
            spec.frequency(i, c);
        }
        let norms = coords.chunks(d).map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        FrequencyLattice { spec, coords, norms }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    /// Frequency vector at spectrum index `i`.
    pub fn xi(&self, i: usize) -> &[f64] {
        let d = self.spec.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    /// Euclidean norm `|ξ|` at spectrum index `i`.
    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }
}

/// Complex samples of a function on a periodic grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    samples: Vec<C64>,
}

impl GridField {
    /// Wraps `samples`; the length must be `N^n` and every sample finite.
    pub fn new(spec: GridSpec, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != spec.len() {
            return Err(Error::Dimension(format!(
                "expected {} samples, got {}",
                spec.len(),
                samples.len()
            )));
        }
        if !samples.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidInput("field contains non-finite samples".into()));
        }
        Ok(GridField { spec, samples })
    }

    #[cfg(test)]
    pub(crate) fn from_parts(spec: GridSpec, samples: Vec<C64>) -> Self {
        GridField { spec, samples }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        GridField { spec, samples: vec![C64::new(0.0, 0.0); spec.len()] }
    }

    pub fn constant(spec: GridSpec, c: C64) -> Self {
        GridField { spec, samples: vec![c; spec.len()] }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> C64) -> Self {
        let mut x = vec![0.0; spec.dim()];
        let samples = (0..spec.len())
            .map(|i| {
                spec.point(i, &mut x);
                f(&x)
            })
            .collect();
        GridField { spec, samples }
    }

    /// The character `e^{iξ·x}`.
    pub fn plane_wave(spec: GridSpec, xi: &[f64]) -> Self {
        GridField::from_fn(spec, |x| {
            let phase: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
            C64::from_polar(1.0, phase)
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    /// `self + other`.
    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a + b)
    }

    /// `self - other`.
    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: C64) -> GridField {
        self.map(|z| z * c)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> GridField {
        GridField { spec: self.spec, samples: self.samples.iter().map(|&z| f(z)).collect() }
    }

    pub fn conj(&self) -> GridField {
        self.map(|z| z.conj())
    }

    /// Accumulates `c·other` into `self`.
    pub fn axpy(&mut self, c: C64, other: &GridField) -> Result<()> {
        self.spec.ensure_same(&other.spec)?;
        for (a, &b) in self.samples.iter_mut().zip(&other.samples) {
            *a += c * b;
        }
        Ok(())
    }

    fn zip_with(&self, other: &GridField, f: impl Fn(C64, C64) -> C64) -> Result<GridField> {
        self.spec.ensure_same(&other.spec)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect();
        Ok(GridField { spec: self.spec, samples })
    }

    /// `max_x |f(x)|`.
    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Plain Euclidean norm of the sample vector (no cell weight).
    pub fn l2_samples(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest imaginary part in absolute value.
    pub fn max_imag(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }
}

/// Relative Euclidean distance `‖a − b‖/‖b‖` between two sample vectors
/// (absolute distance when `b = 0`).
pub fn relative_error(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Values of a transform on the frequency lattice, in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    spec: GridSpec,
    values: Vec<C64>,
}

impl Spectrum {
    pub fn new(spec: GridSpec, values: Vec<C64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Dimension(format!(
                "expected {} spectral values, got {}",
                spec.len(),
                values.len()
            )));
        }
        if !values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidInput("spectrum contains non-finite values".into()));
        }
        Ok(Spectrum { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Spectrum { spec, values: vec![C64::new(0.0, 0.0); spec.len()] }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    /// Pointwise product with a multiplier.
    pub fn multiply(&self, m: &SpectralMultiplier) -> Result<Spectrum> {
        self.spec.ensure_same(&m.spec)?;
        let values = self.values.iter().zip(&m.values).map(|(&a, &b)| a * b).collect();
        Ok(Spectrum { spec: self.spec, values })
    }

    /// Pointwise product with real weights given in spectrum order.
    pub(crate) fn weighted(&self, w: &[f64]) -> Spectrum {
        let values = self.values.iter().zip(w).map(|(&a, &b)| a * b).collect();
        Spectrum { spec: self.spec, values }
    }

    /// `L^{-n} Σ |f̂|²`, which equals `‖f‖²_{L²}` by Parseval.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.spec.period().powi(self.spec.dim() as i32)
    }
}

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Unnormalized `dim`-dimensional DFT of a row-major cube of side `n`, in place.
/// The forward kernel is `e^{-2πi k·j/n}`, the inverse uses `e^{+2πi k·j/n}`.
pub(crate) fn fft_nd(data: &mut [C64], dim: usize, n: usize, inverse: bool) {
    debug_assert_eq!(data.len(), n.pow(dim as u32));
    let (fwd, inv) = plans(n);
    let fft = if inverse { inv } else { fwd };
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(data, &mut scratch);
    if dim == 1 {
        return;
    }
    let total = data.len();
    let mut buf = vec![C64::new(0.0, 0.0); total];
    for axis in (0..dim - 1).rev() {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for b in 0..total / block {
            for t in 0..n {
                let base = b * block + t * stride;
                for o in 0..stride {
                    buf[(b * stride + o) * n + t] = data[base + o];
                }
            }
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for b in 0..total / block {
            for t in 0..n {
                let base = b * block + t * stride;
                for o in 0..stride {
                    data[base + o] = buf[(b * stride + o) * n + t];
                }
            }
        }
    }
}

/// `f̂ = (L/N)^n · DFT(f)`.
pub fn forward_transform(f: &GridField) -> Result<Spectrum> {
    if !f.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidInput("field contains non-finite samples".into()));
    }
    Ok(forward_unchecked(f))
}

pub(crate) fn forward_unchecked(f: &GridField) -> Spectrum {
    let spec = f.spec;
    let mut values = f.samples.clone();
    fft_nd(&mut values, spec.dim(), spec.size(), false);
    let w = spec.cell_volume();
    for v in &mut values {
        *v *= w;
    }
    Spectrum { spec, values }
}

/// `f = L^{-n} · IDFT(f̂)` (unnormalized inverse DFT).
pub fn inverse_transform(s: &Spectrum) -> Result<GridField> {
    if !s.values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidInput("spectrum contains non-finite values".into()));
    }
    Ok(inverse_unchecked(s))
}

pub(crate) fn inverse_unchecked(s: &Spectrum) -> GridField {
    let spec = s.spec;
    let mut samples = s.values.clone();
    fft_nd(&mut samples, spec.dim(), spec.size(), true);
    let w = spec.period().powi(-(spec.dim() as i32));
    for v in &mut samples {
        *v *= w;
    }
    GridField { spec, samples }
}

/// A scalar function tabulated on the frequency lattice (FFT order).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMultiplier {
    spec: GridSpec,
    values: Vec<C64>,
}

impl SpectralMultiplier {
    /// Tabulates `m(ξ)`. Values on Nyquist rows are replaced by their real
    /// part so that real symbols preserve real fields.
    pub fn from_fn(spec: GridSpec, m: impl Fn(&[f64]) -> C64) -> Self {
        let mut xi = vec![0.0; spec.dim()];
        let values = (0..spec.len())
            .map(|i| {
                spec.frequency(i, &mut xi);
                let v = m(&xi);
                if spec.is_nyquist(i) {
                    C64::new(v.re, 0.0)
                } else {
                    v
                }
            })
            .collect();
        SpectralMultiplier { spec, values }
    }

    /// Tabulates a real radial symbol `m(|ξ|)`.
    pub fn radial(spec: GridSpec, m: impl Fn(f64) -> f64) -> Self {
        let lattice = FrequencyLattice::new(spec);
        SpectralMultiplier::from_real(spec, lattice.norms().iter().map(|&t| m(t)).collect())
    }

    pub(crate) fn from_real(spec: GridSpec, values: Vec<f64>) -> Self {
        SpectralMultiplier { spec, values: values.into_iter().map(|v| C64::new(v, 0.0)).collect() }
    }

    /// Wraps raw values without Nyquist adjustment.
    pub fn from_values(spec: GridSpec, values: Vec<C64>) -> Result<Self> {
        let s = Spectrum::new(spec, values)?;
        Ok(SpectralMultiplier { spec, values: s.values })
    }

    pub fn constant(spec: GridSpec, c: C64) -> Self {
        SpectralMultiplier { spec, values: vec![c; spec.len()] }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// The product multiplier `m₁·m₂`.
    pub fn compose(&self, other: &SpectralMultiplier) -> Result<SpectralMultiplier> {
        self.spec.ensure_same(&other.spec)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).collect();
        Ok(SpectralMultiplier { spec: self.spec, values })
    }
}

/// `m(D)f = F^{-1}(m·F f)`.
pub fn apply_multiplier(f: &GridField, m: &SpectralMultiplier) -> Result<GridField> {
    f.spec.ensure_same(&m.spec)?;
    let s = forward_transform(f)?;
    Ok(inverse_unchecked(&s.multiply(m)?))
}

/// The Bessel symbol `⟨ξ⟩^s = (1+|ξ|²)^{s/2}` on the lattice.
pub fn bessel_multiplier(spec: GridSpec, s: f64) -> SpectralMultiplier {
    SpectralMultiplier::radial(spec, |t| japanese(t).powf(s))
}

/// `⟨t⟩ = (1 + t²)^{1/2}`.
pub fn japanese(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

/// `⟨D⟩^s f`.
pub fn bessel_potential(f: &GridField, s: f64) -> Result<GridField> {
    if !s.is_finite() {
        return Err(Error::Parameter(format!("smoothness s = {s} must be finite")));
    }
    apply_multiplier(f, &bessel_multiplier(f.spec, s))
}

/// Riemann-sum `L^p` norm `(Σ|f|^p (L/N)^n)^{1/p}` for `p ∈ (1, ∞)`.
pub fn lp_norm(f: &GridField, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(lp_norm_unchecked(f.samples(), p, f.spec.cell_volume()))
}

pub(crate) fn lp_norm_unchecked(samples: &[C64], p: f64, cell: f64) -> f64 {
    let peak = samples.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if peak == 0.0 {
        return 0.0;
    }
    let sum: f64 = samples.iter().map(|z| (z.norm() / peak).powf(p)).sum();
    peak * (sum * cell).powf(1.0 / p)
}

/// `‖f‖_{L^∞}` on the grid.
pub fn sup_norm(f: &GridField) -> f64 {
    f.max_abs()
}
