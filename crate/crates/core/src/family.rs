//! Seeded families of unit-`L²` test fields used to probe operator norms.

use crate::dyadic::{pow2, BumpProfile, DyadicProfile};
use crate::error::{Error, Result};
use crate::fourier::{inverse_unchecked, lp_norm, FrequencyLattice, GridField, GridSpec, Spectrum, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// How a member was built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    PlaneWave,
    Packet,
    RandomBand,
    Focusing,
}

/// One normalized test field with its band and direction metadata.
#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub id: String,
    pub kind: MemberKind,
    pub band: usize,
    pub direction: Option<[f64; 2]>,
    pub field: GridField,
}

/// Which members to build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyOptions {
    pub bands: Vec<usize>,
    /// Directions of the individual packets per band.
    pub packet_directions: usize,
    /// Directions summed in the focusing member (0 disables it).
    pub focusing_directions: usize,
    /// Random band-limited members per band.
    pub random_members: usize,
    pub seed: u64,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions { bands: vec![1, 2, 3], packet_directions: 4, focusing_directions: 16, random_members: 1, seed: 11 }
    }
}

/// A named, seeded collection of unit-norm fields.
#[derive(Clone, Debug)]
pub struct TestFamily {
    pub name: String,
    pub seed: u64,
    pub members: Vec<FamilyMember>,
}

impl TestFamily {
    /// Builds plane waves at `2^{k−1}e₁`, parabolic packets centered at
    /// frequency `2^{k−1}ω`, random fields on the `χ_k` band and one
    /// focusing sum of packets per band. Fields live on two-dimensional grids.
    pub fn build(spec: GridSpec, opts: &FamilyOptions) -> Result<Self> {
        if spec.dim() != 2 {
            return Err(Error::Dimension("test families are two-dimensional".into()));
        }
        if opts.bands.is_empty() {
            return Err(Error::Parameter("a test family needs at least one band".into()));
        }
        let chi = DyadicProfile::new(BumpProfile::standard());
        let lattice = FrequencyLattice::new(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut members = Vec::new();
        for &k in &opts.bands {
            if k == 0 || pow2(k as i32 - 1) > spec.axis_max_frequency() {
                return Err(Error::Parameter(format!(
                    "band {k} needs 1 ≤ 2^(k-1) ≤ {} on this grid",
                    spec.axis_max_frequency()
                )));
            }
            let center = pow2(k as i32 - 1);
            let band: Vec<f64> = lattice.norms().iter().map(|&t| chi.value(k as i64, t)).collect();
            let h = spec.freq_step();
            let xi = [(center / h).round() * h, 0.0];
            members.push(member(
                format!("plane_k{k}"),
                MemberKind::PlaneWave,
                k,
                Some([1.0, 0.0]),
                GridField::plane_wave(spec, &xi),
            )?);
            let offset = rng.random_range(0.0..PI);
            for d in 0..opts.packet_directions {
                let theta = offset + PI * d as f64 / opts.packet_directions as f64;
                let w = [theta.cos(), theta.sin()];
                members.push(member(
                    format!("packet_k{k}_d{d}"),
                    MemberKind::Packet,
                    k,
                    Some(w),
                    packet(&lattice, &band, center, w),
                )?);
            }
            for r in 0..opts.random_members {
                let mut s = Spectrum::zeros(spec);
                for (v, &b) in s.values_mut().iter_mut().zip(&band) {
                    if b != 0.0 {
                        *v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * b;
                    }
                }
                members.push(member(format!("random_k{k}_{r}"), MemberKind::RandomBand, k, None, inverse_unchecked(&s))?);
            }
            if opts.focusing_directions > 0 {
                let mut sum = GridField::zeros(spec);
                for d in 0..opts.focusing_directions {
                    let theta = 2.0 * PI * d as f64 / opts.focusing_directions as f64;
                    sum.axpy(C64::new(1.0, 0.0), &packet(&lattice, &band, center, [theta.cos(), theta.sin()]))?;
                }
                members.push(member(format!("focus_k{k}"), MemberKind::Focusing, k, None, sum)?);
            }
        }
        Ok(TestFamily { name: "parabolic".into(), seed: opts.seed, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn member(id: String, kind: MemberKind, band: usize, direction: Option<[f64; 2]>, f: GridField) -> Result<FamilyMember> {
    let n = lp_norm(&f, 2.0)?;
    if n < 1e-300 {
        return Err(Error::DegenerateInput(format!("member {id} vanishes on this grid")));
    }
    Ok(FamilyMember { id, kind, band, direction, field: f.scale(C64::new(1.0 / n, 0.0)) })
}

/// A packet with Gaussian spectral envelope centered at `center·ω`: radial
/// width `center/4`, transverse width `center^{1/2}/2`, restricted to the
/// band weights and centered in space at the middle of the box.
fn packet(lattice: &FrequencyLattice, band: &[f64], center: f64, w: [f64; 2]) -> GridField {
    let spec = *lattice.spec();
    let x0 = spec.period() / 2.0;
    let sr = center / 4.0;
    let st = center.sqrt() / 2.0;
    let mut s = Spectrum::zeros(spec);
    for (i, v) in s.values_mut().iter_mut().enumerate() {
        if band[i] == 0.0 {
            continue;
        }
        let e = lattice.xi(i);
        let d = [e[0] - center * w[0], e[1] - center * w[1]];
        let along = d[0] * w[0] + d[1] * w[1];
        let across = -d[0] * w[1] + d[1] * w[0];
        let amp = (-(along * along) / (2.0 * sr * sr) - across * across / (2.0 * st * st)).exp() * band[i];
        *v = C64::from_polar(amp, -x0 * (e[0] + e[1]));
    }
    inverse_unchecked(&s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::forward_transform;

    #[test]
    fn members_are_normalized_and_band_limited() {
        let g = GridSpec::new(2, 128, 8.0 * PI).unwrap();
        let opts = FamilyOptions { bands: vec![2, 3, 4], ..FamilyOptions::default() };
        let fam = TestFamily::build(g, &opts).unwrap();
        assert_eq!(fam.len(), 3 * (1 + 4 + 1 + 1));
        let lattice = FrequencyLattice::new(g);
        for m in &fam.members {
            assert!((lp_norm(&m.field, 2.0).unwrap() - 1.0).abs() < 1e-12, "{}", m.id);
            let s = forward_transform(&m.field).unwrap();
            let k = m.band as i32;
            for (i, z) in s.values().iter().enumerate() {
                let t = lattice.norm(i);
                if t <= pow2(k - 2) || t >= pow2(k) {
                    assert!(z.norm() < 1e-12, "{} leaks at {t}", m.id);
                }
            }
        }
    }

    #[test]
    fn packets_concentrate_along_their_direction() {
        let g = GridSpec::new(2, 128, 8.0 * PI).unwrap();
        let fam = TestFamily::build(g, &FamilyOptions { bands: vec![4], ..FamilyOptions::default() }).unwrap();
        let lattice = FrequencyLattice::new(g);
        for m in fam.members.iter().filter(|m| m.kind == MemberKind::Packet) {
            let w = m.direction.unwrap();
            let s = forward_transform(&m.field).unwrap();
            let (mut near, mut total) = (0.0, 0.0);
            for (i, z) in s.values().iter().enumerate() {
                let e = lattice.xi(i);
                let t = lattice.norm(i).max(1e-12);
                let cos = (e[0] * w[0] + e[1] * w[1]) / t;
                total += z.norm_sqr();
                if cos > 1.0 - 2.0 / t {
                    near += z.norm_sqr();
                }
            }
            assert!(near / total > 0.9, "{}: {}", m.id, near / total);
        }
    }

    #[test]
    fn determinism_and_validation() {
        let g = GridSpec::new(2, 64, 8.0 * PI).unwrap();
        let a = TestFamily::build(g, &FamilyOptions::default()).unwrap();
        let b = TestFamily::build(g, &FamilyOptions::default()).unwrap();
        for (x, y) in a.members.iter().zip(&b.members) {
            assert_eq!(x.field, y.field);
        }
        assert!(TestFamily::build(g, &FamilyOptions { bands: vec![0], ..FamilyOptions::default() }).is_err());
        assert!(TestFamily::build(g, &FamilyOptions { bands: vec![9], ..FamilyOptions::default() }).is_err());
    }
}
