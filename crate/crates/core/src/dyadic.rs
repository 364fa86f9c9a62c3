//! Littlewood–Paley families, their auxiliary companions and the dyadic
//! square function.

use crate::error::{check_open, check_p, Error, Result};
use crate::fourier::{
    forward_transform, inverse_unchecked, lp_norm_unchecked, FrequencyLattice, GridField, GridSpec,
    SpectralMultiplier, Spectrum, C64,
};
use serde::Serialize;

/// Smooth step: 0 for `x ≤ 0`, 1 for `x ≥ 1`, built from `h(t) = e^{-1/t}`.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let h = |t: f64| (-1.0 / t).exp();
        let (a, b) = (h(x), h(1.0 - x));
        a / (a + b)
    }
}

/// `2^e` computed exactly.
pub(crate) fn pow2(e: i32) -> f64 {
    2.0f64.powi(e)
}

/// Radial cutoff equal to 1 on `[0, plateau]`, 0 on `[support, ∞)` and
/// strictly decreasing in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BumpProfile {
    plateau: f64,
    support: f64,
}

impl BumpProfile {
    pub fn new(plateau: f64, support: f64) -> Result<Self> {
        if !(plateau.is_finite() && support.is_finite() && 0.0 <= plateau && plateau < support) {
            return Err(Error::Parameter(format!(
                "bump needs 0 <= plateau < support, got {plateau}, {support}"
            )));
        }
        Ok(BumpProfile { plateau, support })
    }

    /// The profile with plateau `1/2` and support radius `1`.
    pub fn standard() -> Self {
        BumpProfile { plateau: 0.5, support: 1.0 }
    }

    pub fn plateau(&self) -> f64 {
        self.plateau
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn eval(&self, t: f64) -> f64 {
        smoothstep((self.support - t) / (self.support - self.plateau))
    }
}

/// Analytic telescoping family `ψ_0 = Φ`, `ψ_j = Φ(2^{-j}·) − Φ(2^{-j+1}·)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DyadicProfile {
    cutoff: BumpProfile,
}

impl DyadicProfile {
    pub fn new(cutoff: BumpProfile) -> Self {
        DyadicProfile { cutoff }
    }

    pub fn cutoff(&self) -> BumpProfile {
        self.cutoff
    }

    /// `ψ_j(t)` for a frequency of norm `t`; zero for negative `j`.
    pub fn value(&self, j: i64, t: f64) -> f64 {
        match j {
            j if j < 0 => 0.0,
            0 => self.cutoff.eval(t),
            j => {
                let j = j as i32;
                self.cutoff.eval(t * pow2(-j)) - self.cutoff.eval(t * pow2(1 - j))
            }
        }
    }

    /// Radii `[lo, hi]` outside of which band `j` vanishes.
    pub fn band_support(&self, j: usize) -> (f64, f64) {
        let (a, b) = (self.cutoff.plateau, self.cutoff.support);
        if j == 0 {
            (0.0, b)
        } else {
            (a * pow2(j as i32 - 1), b * pow2(j as i32))
        }
    }

    /// Radii on which band `j ≥ 1` equals one.
    pub fn band_plateau(&self, j: usize) -> (f64, f64) {
        let (a, b) = (self.cutoff.plateau, self.cutoff.support);
        if j == 0 {
            (0.0, a)
        } else {
            (b * pow2(j as i32 - 1), a * pow2(j as i32))
        }
    }
}

/// Which role a tabulated dyadic family plays.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum FamilyKind {
    /// The Littlewood–Paley family `ψ_j` with margin `ε`.
    LittlewoodPaley { eps: f64 },
    /// The family `χ_k` (plateau 1/2, support 1) used for separable symbols.
    Chi,
}

/// A dyadic partition of unity tabulated on a lattice.
#[derive(Clone, Debug)]
pub struct DyadicFamily {
    spec: GridSpec,
    kind: FamilyKind,
    profile: DyadicProfile,
    bands: Vec<Vec<f64>>,
}

/// The Littlewood–Paley family; the same type serves the χ-family.
pub type LittlewoodPaleyFamily = DyadicFamily;

/// Builds `ψ_0..ψ_{J_max}` with `ψ_1` supported in `[(1+ε)/2, 2−ε]`.
pub fn build_lp_family(spec: GridSpec, eps: f64) -> Result<DyadicFamily> {
    check_open("epsilon", eps, 0.0, 0.25)?;
    let cutoff = BumpProfile::new((1.0 + eps) / 2.0, 1.0 - eps / 2.0)?;
    DyadicFamily::tabulate(spec, FamilyKind::LittlewoodPaley { eps }, DyadicProfile::new(cutoff))
}

/// Builds the χ-family with `χ_0` supported in `|η| ≤ 1` and `χ_1` in `[1/2, 2]`.
pub fn build_chi_family(spec: GridSpec) -> Result<DyadicFamily> {
    DyadicFamily::tabulate(spec, FamilyKind::Chi, DyadicProfile::new(BumpProfile::standard()))
}

/// Default margin of the Littlewood–Paley family.
pub const DEFAULT_EPS: f64 = 0.125;

impl DyadicFamily {
    fn tabulate(spec: GridSpec, kind: FamilyKind, profile: DyadicProfile) -> Result<Self> {
        let lattice = FrequencyLattice::new(spec);
        let j_max = spec.max_frequency().log2().ceil().max(0.0) as usize + 1;
        let mut bands: Vec<Vec<f64>> =
            (0..=j_max).map(|j| lattice.norms().iter().map(|&t| profile.value(j as i64, t)).collect()).collect();
        for i in 0..spec.len() {
            let total: f64 = bands.iter().map(|b| b[i]).sum();
            if total < 1e-8 {
                return Err(Error::Construction(format!(
                    "partition of unity denominator {total:e} at |xi| = {}",
                    lattice.norm(i)
                )));
            }
            if total != 1.0 {
                for b in &mut bands {
                    b[i] /= total;
                }
            }
        }
        Ok(DyadicFamily { spec, kind, profile, bands })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn profile(&self) -> &DyadicProfile {
        &self.profile
    }

    /// Index of the top band.
    pub fn j_max(&self) -> usize {
        self.bands.len() - 1
    }

    /// Lattice values of band `j` in spectrum order.
    pub fn band(&self, j: usize) -> &[f64] {
        &self.bands[j]
    }

    pub fn multiplier(&self, j: usize) -> Result<SpectralMultiplier> {
        self.check_band(j)?;
        Ok(SpectralMultiplier::from_real(self.spec, self.bands[j].clone()))
    }

    fn check_band(&self, j: usize) -> Result<()> {
        if j > self.j_max() {
            Err(Error::Parameter(format!("band {j} exceeds J_max = {}", self.j_max())))
        } else {
            Ok(())
        }
    }

    /// Band `j` applied to a precomputed spectrum.
    pub fn project_spectrum(&self, s: &Spectrum, j: usize) -> GridField {
        inverse_unchecked(&s.weighted(&self.bands[j]))
    }

    /// All bands of `f`, reusing one forward transform.
    pub fn project_all(&self, f: &GridField) -> Result<Vec<GridField>> {
        self.spec.ensure_same(f.spec())?;
        let s = forward_transform(f)?;
        Ok((0..=self.j_max()).map(|j| self.project_spectrum(&s, j)).collect())
    }

    /// The bands on which the spectrum `s` has nonzero weight.
    pub fn active_bands(&self, s: &Spectrum) -> Vec<usize> {
        (0..=self.j_max())
            .filter(|&j| self.bands[j].iter().zip(s.values()).any(|(&w, z)| w != 0.0 && z.norm() > 0.0))
            .collect()
    }

    /// Extremes of `(Σ_k band_k²)^{1/2}` over the lattice: the two-sided
    /// constants relating the square function to `L²` at `s = 0`.
    pub fn square_sum_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..self.spec.len() {
            let v = self.bands.iter().map(|b| b[i] * b[i]).sum::<f64>().sqrt();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Extremes of `Σ_k band_k` over the lattice (the recorded `c₀` and 1).
    pub fn sum_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..self.spec.len() {
            let v: f64 = self.bands.iter().map(|b| b[i]).sum();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// `ψ_j(D)f`.
pub fn lp_project(f: &GridField, j: usize, fam: &DyadicFamily) -> Result<GridField> {
    fam.check_band(j)?;
    fam.spec.ensure_same(f.spec())?;
    Ok(fam.project_spectrum(&forward_transform(f)?, j))
}

/// `‖(Σ_k 4^{ks}|fam_k(D)f|²)^{1/2}‖_{L^p}`.
pub fn square_function_norm(f: &GridField, s: f64, p: f64, fam: &DyadicFamily) -> Result<f64> {
    check_p(p)?;
    fam.spec.ensure_same(f.spec())?;
    let spec = fam.spec;
    let spectrum = forward_transform(f)?;
    let mut acc = vec![0.0f64; spec.len()];
    for k in fam.active_bands(&spectrum) {
        let w = pow2(2 * k as i32).powf(s);
        for (a, z) in acc.iter_mut().zip(fam.project_spectrum(&spectrum, k).samples()) {
            *a += w * z.norm_sqr();
        }
    }
    let g: Vec<C64> = acc.into_iter().map(|v| C64::new(v.sqrt(), 0.0)).collect();
    Ok(lp_norm_unchecked(&g, p, spec.cell_volume()))
}

/// The companions `ψ̃_k` (equal to one on `supp ψ_k`) and the low cutoff `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuxiliaryFamilies {
    lp: DyadicProfile,
}

impl AuxiliaryFamilies {
    /// Companions for a Littlewood–Paley profile with plateau `> 1/2` and
    /// support `< 1` (true for every `ε ∈ (0, 1/4)`).
    pub fn new(lp: DyadicProfile) -> Result<Self> {
        let c = lp.cutoff();
        if !(c.plateau() > 0.5 && c.support() < 1.0) {
            return Err(Error::Parameter("companion bands need a margin inside [1/2, 1]".into()));
        }
        Ok(AuxiliaryFamilies { lp })
    }

    /// `ψ̃_k(t)`: one on `supp ψ_k`, zero outside `[2^{k-2}, 2^k]` for `k ≥ 1`
    /// and outside `[0, 2]` for `k = 0`.
    pub fn tilde(&self, k: usize, t: f64) -> f64 {
        let c = self.lp.cutoff();
        if k == 0 {
            return smoothstep((2.0 - t) / (2.0 - c.support()));
        }
        let u = t * pow2(1 - k as i32);
        let rise = smoothstep((u - 0.5) / (c.plateau() - 0.5));
        let fall = smoothstep((2.0 - u) / (2.0 - 2.0 * c.support()));
        rise * fall
    }

    pub fn tilde_multiplier(&self, spec: GridSpec, k: usize) -> SpectralMultiplier {
        SpectralMultiplier::radial(spec, |t| self.tilde(k, t))
    }
}

/// Low-frequency cutoff `q`: one on `|ζ| ≤ 2`, zero on `|ζ| ≥ 4`.
pub fn low_cutoff(t: f64) -> f64 {
    smoothstep((4.0 - t) / 2.0)
}

pub fn low_cutoff_multiplier(spec: GridSpec) -> SpectralMultiplier {
    SpectralMultiplier::radial(spec, low_cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::relative_error;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::desk(64).unwrap()
    }

    #[test]
    fn bump_profile_shape() {
        let u = BumpProfile::standard();
        assert_eq!(u.eval(0.5), 1.0);
        assert_eq!(u.eval(0.0), 1.0);
        assert_eq!(u.eval(1.0), 0.0);
        assert_eq!(u.eval(3.0), 0.0);
        // Strictly decreasing away from the ends; within ~1% of an end the
        // value saturates in double precision.
        let mut prev = 1.0;
        for i in 1..100 {
            let t = 0.5 + i as f64 / 200.0;
            let v = u.eval(t);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            if (0.55..0.95).contains(&t) {
                assert!(v < prev);
            }
            prev = v;
        }
        assert!(BumpProfile::new(1.0, 1.0).is_err());
    }

    #[test]
    fn smoothstep_symmetry() {
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert!((smoothstep(x) + smoothstep(1.0 - x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn epsilon_range_enforced() {
        assert!(matches!(build_lp_family(grid(), 0.0), Err(Error::Parameter(_))));
        assert!(matches!(build_lp_family(grid(), 0.3), Err(Error::Parameter(_))));
        assert!(build_lp_family(grid(), 0.2).is_ok());
    }

    /// The margin only moves band edges, so square-function norms built
    /// from different margins stay within a modest factor of each other.
    #[test]
    fn square_function_insensitive_to_margin() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples = (0..g.len()).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
        let f = GridField::new(g, samples).unwrap();
        for p in [1.5, 2.0, 4.0] {
            let norms: Vec<f64> = [1.0 / 16.0, DEFAULT_EPS, 3.0 / 16.0]
                .iter()
                .map(|&eps| square_function_norm(&f, 0.25, p, &build_lp_family(g, eps).unwrap()).unwrap())
                .collect();
            let (lo, hi) = norms.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            assert!(hi / lo < 1.1, "p = {p}: {norms:?}");
        }
    }

    #[test]
    fn partition_of_unity_on_lattice() {
        for n in [64, 128] {
            let fam = build_lp_family(GridSpec::desk(n).unwrap(), DEFAULT_EPS).unwrap();
            for i in 0..fam.spec().len() {
                let s: f64 = (0..=fam.j_max()).map(|j| fam.band(j)[i]).sum();
                assert!((s - 1.0).abs() <= 1e-12);
                assert!((0..=fam.j_max()).all(|j| (0.0..=1.0).contains(&fam.band(j)[i])));
            }
        }
    }

    #[test]
    fn j_max_formula() {
        let g = grid();
        let fam = build_lp_family(g, DEFAULT_EPS).unwrap();
        assert_eq!(fam.j_max(), g.max_frequency().log2().ceil() as usize + 1);
    }

    #[test]
    fn support_rules() {
        let fam = build_lp_family(grid(), DEFAULT_EPS).unwrap();
        let lat = FrequencyLattice::new(*fam.spec());
        let eps = DEFAULT_EPS;
        for i in 0..lat.len() {
            let t = lat.norm(i);
            if t > 1.0 {
                assert_eq!(fam.band(0)[i], 0.0);
            }
            if t < (1.0 + eps) / 2.0 || t > 2.0 - eps {
                assert_eq!(fam.band(1)[i], 0.0);
            }
        }
        let zero = 0;
        assert_eq!(fam.band(0)[zero], 1.0);
        assert!((1..=fam.j_max()).all(|j| fam.band(j)[zero] == 0.0));
    }

    #[test]
    fn norm_three_lives_in_bands_two_and_three() {
        let p = build_lp_family(grid(), DEFAULT_EPS).unwrap();
        let prof = *p.profile();
        // Brackets from the dilation rule: ψ_j ≠ 0 needs 2^{j-1}(1+ε)/2 < 3 < 2^j(1 − ε/2).
        let active: Vec<i64> = (0..12).filter(|&j| prof.value(j, 3.0) != 0.0).collect();
        assert_eq!(active, vec![2, 3]);
        // Lattice check at ξ = (3, 0), representable once N = 128.
        let p = build_lp_family(GridSpec::desk(128).unwrap(), DEFAULT_EPS).unwrap();
        let g = *p.spec();
        let i = g.lattice_index(&[3.0, 0.0]).unwrap();
        for j in 0..=p.j_max() {
            assert_eq!(p.band(j)[i] != 0.0, j == 2 || j == 3, "band {j}");
        }
    }

    #[test]
    fn dilation_consistency() {
        let fam = build_lp_family(GridSpec::desk(128).unwrap(), DEFAULT_EPS).unwrap();
        let lat = FrequencyLattice::new(*fam.spec());
        for j in 2..=fam.j_max() {
            let worst = (0..lat.len())
                .map(|i| (fam.band(j)[i] - fam.profile().value(1, lat.norm(i) * pow2(1 - j as i32))).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-12, "band {j}: {worst}");
        }
    }

    #[test]
    fn projections_reconstruct() {
        let g = grid();
        let fam = build_lp_family(g, DEFAULT_EPS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = GridField::new(g, (0..g.len()).map(|_| C64::new(rng.random(), rng.random())).collect()).unwrap();
        let parts = fam.project_all(&f).unwrap();
        let mut sum = GridField::zeros(g);
        for p in &parts {
            sum.axpy(C64::new(1.0, 0.0), p).unwrap();
        }
        assert!(relative_error(sum.samples(), f.samples()) <= 1e-12);
        assert!(lp_project(&f, fam.j_max() + 1, &fam).is_err());
    }

    #[test]
    fn projections_of_constant_and_plane_wave() {
        let g = GridSpec::desk(128).unwrap();
        let fam = build_lp_family(g, DEFAULT_EPS).unwrap();
        let c = GridField::constant(g, C64::new(2.0, 0.0));
        assert!(relative_error(lp_project(&c, 0, &fam).unwrap().samples(), c.samples()) < 1e-14);
        assert!(lp_project(&c, 1, &fam).unwrap().max_abs() < 1e-14);

        let w = GridField::plane_wave(g, &[3.0, 0.0]);
        let mut sum = GridField::zeros(g);
        for j in 0..=fam.j_max() {
            let part = lp_project(&w, j, &fam).unwrap();
            if j == 2 || j == 3 {
                assert!(part.max_abs() > 0.0);
            } else {
                assert!(part.max_abs() < 1e-13);
            }
            sum.axpy(C64::new(1.0, 0.0), &part).unwrap();
        }
        assert!(relative_error(sum.samples(), w.samples()) < 1e-12);
    }

    #[test]
    fn companions_cover_their_bands_exactly() {
        let g = grid();
        let fam = build_lp_family(g, DEFAULT_EPS).unwrap();
        let aux = AuxiliaryFamilies::new(*fam.profile()).unwrap();
        let lat = FrequencyLattice::new(g);
        for k in 0..=fam.j_max() {
            for i in 0..lat.len() {
                let psi = fam.band(k)[i];
                assert_eq!(aux.tilde(k, lat.norm(i)) * psi, psi);
            }
        }
        for i in 0..lat.len() {
            assert_eq!(low_cutoff(lat.norm(i)) * fam.band(0)[i], fam.band(0)[i]);
        }
        assert_eq!(aux.tilde(0, 2.0), 0.0);
        assert_eq!(aux.tilde(1, 0.5), 0.0);
        assert_eq!(aux.tilde(1, 2.0), 0.0);
        assert_eq!(aux.tilde(3, 4.0 * 1.5), aux.tilde(1, 1.5));
        assert_eq!(low_cutoff(2.0), 1.0);
        assert_eq!(low_cutoff(4.0), 0.0);
    }

    #[test]
    fn chi_family_bounds() {
        let chi = build_chi_family(grid()).unwrap();
        let prof = chi.profile();
        assert_eq!(prof.value(0, 1.0), 0.0);
        assert_eq!(prof.value(1, 0.5), 0.0);
        assert_eq!(prof.value(1, 2.0), 0.0);
        let (lo, hi) = chi.sum_bounds();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let (slo, shi) = chi.square_sum_bounds();
        assert!(slo >= 0.5f64.sqrt() - 1e-12 && shi <= 1.0 + 1e-12);
    }

    #[test]
    fn square_function_examples() {
        let g = grid();
        let chi = build_chi_family(g).unwrap();
        assert_eq!(square_function_norm(&GridField::zeros(g), 0.5, 3.0, &chi).unwrap(), 0.0);

        // |ξ₀| = 2 is the single point where χ_2 equals one, so one term survives.
        let w = GridField::plane_wave(g, &[2.0, 0.0]);
        let (s, p) = (0.7, 3.0);
        let lp = g.period().powf(2.0 / p);
        let got = square_function_norm(&w, s, p, &chi).unwrap();
        assert!((got - pow2(2).powf(s) * lp).abs() < 1e-10 * got);

        // |ξ₀| = 1.5 is shared by χ_1 and χ_2; the sum has two terms.
        let w = GridField::plane_wave(g, &[1.5, 0.0]);
        let expect_sq: f64 = (0..=chi.j_max())
            .map(|k| pow2(2 * k as i32).powf(s) * chi.profile().value(k as i64, 1.5).powi(2))
            .sum();
        let got = square_function_norm(&w, s, p, &chi).unwrap();
        assert!((got - expect_sq.sqrt() * lp).abs() < 1e-10 * got);
        let single = pow2(2).powf(s) * lp;
        assert!(got <= 2f64.sqrt() * single);
    }

    #[test]
    fn square_function_l2_band() {
        let g = grid();
        let chi = build_chi_family(g).unwrap();
        let (c0, _) = chi.square_sum_bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let f = GridField::from_fn(g, |_| C64::new(0.0, 0.0));
            let mut spec = forward_transform(&f).unwrap();
            let lat = FrequencyLattice::new(g);
            for (i, v) in spec.values_mut().iter_mut().enumerate() {
                if lat.norm(i) < 3.0 {
                    *v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
            }
            let f = inverse_unchecked(&spec);
            let ratio = square_function_norm(&f, 0.0, 2.0, &chi).unwrap() / spec.energy().sqrt();
            assert!(ratio >= c0 - 1e-12 && ratio <= 1.0 + 1e-12, "{ratio}");
        }
    }

    #[test]
    fn plateau_radii_are_where_band_is_one() {
        let prof = DyadicProfile::new(BumpProfile::new(0.5625, 0.9375).unwrap());
        let (lo, hi) = prof.band_plateau(4);
        assert!((lo - 0.46875 * 16.0).abs() < 1e-12 && (hi - 0.5625 * 16.0).abs() < 1e-12);
        for t in [lo, (lo + hi) / 2.0, hi] {
            assert_eq!(prof.value(4, t), 1.0);
        }
        assert!(prof.value(4, hi * 1.1) < 1.0);
        let _ = PI;
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_partition_of_unity_analytic(t in 0.0f64..5000.0, eps in 0.01f64..0.24) {
            let cutoff = BumpProfile::new((1.0 + eps) / 2.0, 1.0 - eps / 2.0).unwrap();
            let prof = DyadicProfile::new(cutoff);
            let s: f64 = (0..20).map(|j| prof.value(j, t)).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn prop_values_in_unit_interval(t in 0.0f64..100.0, j in 0i64..10) {
            let v = DyadicProfile::new(BumpProfile::standard()).value(j, t);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
