//! Run configuration, invariant suites and the boundedness benchmark.
//!
//! Every report carries a [`Provenance`] block with the toolkit version and
//! the SHA-256 of the resolved configuration, so two outputs can be matched
//! to the exact settings that produced them.

use crate::dyadic::{build_chi_family, build_lp_family, DyadicFamily};
use crate::error::{Error, Result};
use crate::family::{FamilyOptions, TestFamily};
use crate::fourier::{
    forward_transform, inverse_transform, relative_error, FrequencyLattice, GridField, GridSpec, Spectrum, C64,
};
use crate::frame::{build_phi_omega, c_sigma, frame_analyze, frame_synthesize, ParabolicFrame, PhiOmegaRule, C_SIGMA_NODES};
use crate::norms::{budget, classical_norm, hpfio_norms, ExponentBudget};
use crate::pseudo::{
    apply_dense, apply_separable, operator_norm_probe, verify_band_support, BoundednessReport, DenseOperator,
    LinearOperator, PowerCheck, ProbeOptions, SeparableOperator, Trend, POWER_SEED,
};
use crate::symbol::{
    paraproducts, rough_chirp, sample_frequencies, smooth_split, ChirpOptions, DenseSymbol, LoadedSymbol,
    SeparableSymbol, SupportCondition, SymbolClass, SymbolDescriptor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Toolkit version embedded in every output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest grid on which operators are applied by the literal `η`-sum.
pub const DENSE_MAX_SIZE: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dim: usize,
    pub size: usize,
    /// Period `L` in units of `π`.
    pub period_over_pi: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { dim: 2, size: 128, period_over_pi: 32.0 }
    }
}

impl GridConfig {
    pub fn to_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim, self.size, self.period_over_pi * PI)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameConfig {
    /// Number of directions; `None` selects `8⌈√|ξ|_max⌉`.
    pub directions: Option<usize>,
    /// Margin `ε` of the Littlewood–Paley family.
    pub eps: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig { directions: None, eps: crate::dyadic::DEFAULT_EPS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormConfig {
    pub p: Vec<f64>,
    /// Smoothness of the target space; the source uses `s + m + τ`.
    pub s: f64,
    pub r: f64,
    pub delta: f64,
    pub m: f64,
    pub eps_slack: f64,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig { p: vec![4.0 / 3.0, 2.0, 4.0], s: 0.0, r: 2.0, delta: 0.5, m: 0.0, eps_slack: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub grid: GridConfig,
    pub bands: Vec<usize>,
    /// Symbol descriptor; `None` uses the rough chirp with the norm section's `r` and `δ`.
    pub symbol: Option<PathBuf>,
    pub packet_directions: usize,
    pub random_members: usize,
    /// Shift the source smoothness by `τ` from the budget.
    pub shift_by_tau: bool,
    pub power_check: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            grid: GridConfig { dim: 2, size: 256, period_over_pi: 1.0 },
            bands: (4..=8).collect(),
            symbol: None,
            packet_directions: 4,
            random_members: 1,
            shift_by_tau: true,
            power_check: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Grid for checks that apply operators densely.
    pub dense_grid: GridConfig,
    /// Bands at which the band-support identity is checked.
    pub support_bands: Vec<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { dense_grid: GridConfig { dim: 2, size: 64, period_over_pi: 8.0 }, support_bands: vec![4, 6, 8] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub fields: u64,
    pub family: u64,
    pub chirp: u64,
    pub power: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { fields: 1, family: 11, chirp: 7, power: POWER_SEED }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub round_trip: f64,
    pub partition: f64,
    pub calderon: f64,
    pub reproduce: f64,
    pub smoothing: f64,
    pub paraproduct: f64,
    pub dense_separable: f64,
    pub band_leak: f64,
    pub c_sigma: f64,
    pub power: f64,
    pub trend_growth: f64,
    pub trend_slope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            round_trip: 1e-12,
            partition: 1e-12,
            calderon: 1e-10,
            reproduce: 1e-10,
            smoothing: 1e-12,
            paraproduct: 1e-12,
            dense_separable: 1e-10,
            band_leak: 1e-12,
            c_sigma: 1e-8,
            power: 1e-6,
            trend_growth: 2.0,
            trend_slope: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("fiokit-out") }
    }
}

/// Every tunable of a run. Missing fields take their defaults; unknown
/// fields are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub frame: FrameConfig,
    pub norms: NormConfig,
    pub bench: BenchConfig,
    pub verify: VerifyConfig,
    pub seeds: Seeds,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Parses a JSON document (or the defaults when `None`) and applies
    /// `path=value` overrides such as `grid.size=64` or `norms.p=[2,4]`.
    /// Values that are not valid JSON are taken as strings.
    pub fn resolve(json: Option<&str>, overrides: &[String]) -> Result<Self> {
        let base: RunConfig = match json {
            Some(text) => serde_json::from_str(text).map_err(|e| Error::Parameter(format!("config: {e}")))?,
            None => RunConfig::default(),
        };
        let mut tree = serde_json::to_value(&base).map_err(|e| Error::Parameter(format!("config: {e}")))?;
        for item in overrides {
            let (path, raw) =
                item.split_once('=').ok_or_else(|| Error::Parameter(format!("override `{item}` is not path=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let mut node = &mut tree;
            for key in path.split('.') {
                node = node
                    .as_object_mut()
                    .and_then(|o| o.get_mut(key))
                    .ok_or_else(|| Error::Parameter(format!("unknown config field `{path}`")))?;
            }
            *node = value;
        }
        let cfg: RunConfig = serde_json::from_value(tree).map_err(|e| Error::Parameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the config file at `path` (if any) and applies overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::resolve(Some(&text), overrides)
            }
            None => Self::resolve(None, overrides),
        }
    }

    /// Range checks that must pass before any computation starts.
    pub fn validate(&self) -> Result<()> {
        self.grid.to_spec()?;
        self.bench.grid.to_spec()?;
        self.verify.dense_grid.to_spec()?;
        crate::error::check_open("epsilon", self.frame.eps, 0.0, 0.25)?;
        if self.frame.directions == Some(0) {
            return Err(Error::Parameter("frame.directions must be positive".into()));
        }
        if self.norms.p.is_empty() {
            return Err(Error::Parameter("norms.p must list at least one exponent".into()));
        }
        for &p in &self.norms.p {
            crate::error::check_p(p)?;
        }
        for (name, v) in [("norms.s", self.norms.s), ("norms.m", self.norms.m)] {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("{name} = {v} must be finite")));
            }
        }
        SymbolClass::new(self.norms.r, self.norms.m, self.norms.delta)?;
        for &p in &self.norms.p {
            budget(self.norms.r, self.norms.delta, p, self.grid.dim, self.norms.eps_slack)?;
        }
        if self.bench.bands.is_empty() {
            return Err(Error::Parameter("bench.bands must not be empty".into()));
        }
        let t = &self.tolerances;
        for v in [t.round_trip, t.partition, t.calderon, t.reproduce, t.smoothing, t.paraproduct, t.dense_separable] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("tolerance {v} must be finite and nonnegative")));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn provenance(&self) -> Provenance {
        Provenance { version: VERSION.to_string(), config_hash: self.hash(), config: self.clone() }
    }

    /// The frame on `spec` with the configured direction count.
    pub fn frame(&self, spec: GridSpec) -> Result<ParabolicFrame> {
        match self.frame.directions {
            Some(m) => ParabolicFrame::with_directions(spec, m),
            None => ParabolicFrame::new(spec),
        }
    }
}

/// Version and configuration echoed into every artifact.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
}

/// How a measurement is compared with its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    Above,
}

/// One invariant with its measured residual.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        let passed = measured <= tolerance;
        Check { name: name.into(), measured, relation: Relation::AtMost, tolerance, passed, detail: None }
    }

    pub fn above(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        let passed = measured > tolerance;
        Check { name: name.into(), measured, relation: Relation::Above, tolerance, passed, detail: None }
    }

    fn failed(name: impl Into<String>, err: &Error) -> Self {
        Check {
            name: name.into(),
            measured: f64::NAN,
            relation: Relation::AtMost,
            tolerance: 0.0,
            passed: false,
            detail: Some(err.to_string()),
        }
    }

    fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub provenance: Provenance,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl SuiteReport {
    fn new(suite: &str, cfg: &RunConfig, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        SuiteReport { suite: suite.into(), provenance: cfg.provenance(), checks, passed }
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// A random field whose spectrum is supported in `lo ≤ |ξ| < hi`.
pub fn random_band_field(spec: GridSpec, seed: u64, lo: f64, hi: f64) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattice = FrequencyLattice::new(spec);
    let mut s = Spectrum::zeros(spec);
    for (i, v) in s.values_mut().iter_mut().enumerate() {
        let t = lattice.norm(i);
        if t >= lo && t < hi {
            *v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    inverse_transform(&s).expect("spectrum is finite")
}

fn partition_defect(fam: &DyadicFamily) -> f64 {
    let spec = fam.spec();
    (0..spec.len())
        .map(|i| ((0..=fam.j_max()).map(|j| fam.band(j)[i]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Largest `|φ_ω|` where the cutoff must vanish: `|ζ| < 1/8` or
/// `|ζ̂ − ω| > 2|ζ|^{−1/2}`.
pub fn phi_support_violation(frame: &ParabolicFrame, omega: [f64; 2]) -> Result<f64> {
    let spec = *frame.spec();
    let phi = build_phi_omega(spec, omega, frame.rule())?;
    let lattice = FrequencyLattice::new(spec);
    let mut worst = 0.0f64;
    for (i, v) in phi.values().iter().enumerate() {
        let t = lattice.norm(i);
        let outside = if t < 0.125 {
            true
        } else {
            let e = lattice.xi(i);
            let d = (e[0] / t - omega[0]).hypot(e[1] / t - omega[1]);
            d > 2.0 / t.sqrt()
        };
        if outside {
            worst = worst.max(v.norm());
        }
    }
    Ok(worst)
}

/// Construction-level invariants: transforms, dyadic partitions, the
/// Calderón normalization, frame construction, support and reproduction.
pub fn calibrate(cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    Ok(SuiteReport::new("calibrate", cfg, calibration_checks(cfg)?))
}

fn calibration_checks(cfg: &RunConfig) -> Result<Vec<Check>> {
    let spec = cfg.grid.to_spec()?;
    let tol = &cfg.tolerances;
    let mut checks = Vec::new();

    let f = random_band_field(spec, cfg.seeds.fields, 0.0, f64::INFINITY);
    let back = inverse_transform(&forward_transform(&f)?)?;
    checks.push(Check::at_most("transform_round_trip", relative_error(back.samples(), f.samples()), tol.round_trip));

    let lp = build_lp_family(spec, cfg.frame.eps)?;
    checks.push(Check::at_most("lp_partition_of_unity", partition_defect(&lp), tol.partition));
    let chi = build_chi_family(spec)?;
    checks.push(Check::at_most("chi_partition_of_unity", partition_defect(&chi), tol.partition));

    let frame = match cfg.frame(spec) {
        Ok(fr) => fr,
        Err(e @ Error::InsufficientDirections(_)) => {
            checks.push(Check::failed("frame_construction", &e));
            return Ok(checks);
        }
        Err(e) => return Err(e),
    };
    checks.push(Check::at_most("frame_construction", 0.0, 0.0).with_detail(format!("{} directions", frame.directions().len())));

    let profile = frame.rule().calderon();
    let (lo, hi) = (0.25f64, spec.max_frequency().max(1.0));
    let calderon = (0..20)
        .map(|i| {
            let rho = (lo.ln() + (hi / lo).ln() * i as f64 / 19.0).exp();
            (profile.calderon_integral(rho, 8001) - 1.0).abs()
        })
        .fold(0.0, f64::max);
    checks.push(Check::at_most("calderon_normalization", calderon, tol.calderon));

    let mut support = 0.0f64;
    for d in 0..8 {
        let a = 2.0 * PI * (d as f64 + 0.37) / 8.0;
        support = support.max(phi_support_violation(&frame, [a.cos(), a.sin()])?);
    }
    checks.push(Check::at_most("phi_support_zeros", support, 0.0));

    let g = random_band_field(spec, cfg.seeds.fields + 1, 0.5, f64::INFINITY);
    let rec = frame_synthesize(&frame_analyze(&g, &frame)?, &frame)?;
    checks.push(Check::at_most("frame_reproduction", relative_error(rec.samples(), g.samples()), tol.reproduce));
    Ok(checks)
}

/// Calibration plus the symbol, operator and budget invariants.
pub fn verify(cfg: &RunConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let mut checks = calibration_checks(cfg)?;
    let tol = &cfg.tolerances;
    let spec = cfg.grid.to_spec()?;
    let lp = build_lp_family(spec, cfg.frame.eps)?;

    let b = random_band_field(spec, cfg.seeds.fields + 2, 0.0, 2.0);
    let f = random_band_field(spec, cfg.seeds.fields + 3, 0.0, f64::INFINITY);
    let (hh, hl, lh) = paraproducts(&b, &f, &lp)?;
    let prod = b.mul(&f)?;
    let sum = hh.add(&hl)?.add(&lh)?;
    checks.push(Check::at_most(
        "paraproduct_completeness",
        sum.sub(&prod)?.max_abs() / prod.max_abs().max(f64::MIN_POSITIVE),
        tol.paraproduct,
    ));

    let dense_spec = cfg.verify.dense_grid.to_spec()?;
    if dense_spec.size() > DENSE_MAX_SIZE {
        return Err(Error::Parameter(format!("verify.dense_grid.size must be at most {DENSE_MAX_SIZE}")));
    }
    let dlp = build_lp_family(dense_spec, cfg.frame.eps)?;
    let dchi = build_chi_family(dense_spec)?;
    let chirp = rough_chirp(
        dense_spec,
        cfg.norms.r,
        cfg.norms.delta,
        &ChirpOptions { seed: cfg.seeds.chirp, ..ChirpOptions::default() },
        &dlp,
    )?;
    let dense = chirp.densify();
    let idx = sample_frequencies(&dense_spec, 0);
    let mut smooth = 0.0f64;
    for gamma in [0.5f64, 0.75, 1.0] {
        let gamma = gamma.max(cfg.norms.delta);
        smooth = smooth.max(smooth_split(&dense, gamma, &dlp)?.exactness_residual(&dense, &idx)?);
    }
    checks.push(Check::at_most("smoothing_split_exactness", smooth, tol.smoothing));

    let u = random_band_field(dense_spec, cfg.seeds.fields + 4, 0.0, f64::INFINITY);
    let sep = apply_separable(&chirp, &u, &dchi)?;
    let den = apply_dense(&dense, &u)?;
    checks.push(Check::at_most("dense_separable_agreement", relative_error(sep.samples(), den.samples()), tol.dense_separable));

    let dframe = cfg.frame(dense_spec)?;
    let fam = TestFamily::build(
        dense_spec,
        &FamilyOptions { bands: vec![1, 2, 3], seed: cfg.seeds.family, ..FamilyOptions::default() },
    )?;
    let bfield = dlp.project_spectrum(&forward_transform(&random_band_field(dense_spec, cfg.seeds.fields + 5, 0.0, 2.0))?, 1);
    let bfield = bfield.scale(C64::new(1.0 / bfield.max_abs(), 0.0));
    let mult = DenseSymbol::multiplication(bfield, SymbolClass::smooth());
    let rep = operator_norm_probe(
        &DenseOperator(&mult),
        0.0,
        0.0,
        &[2.0],
        &dframe,
        &fam,
        &ProbeOptions { seed: cfg.seeds.power, ..ProbeOptions::default() },
    )?;
    let pc = rep.power_check.expect("p = 2 at s = 0 runs the power check");
    checks.push(Check::at_most("power_iteration_consistency", pc.probe_sup / pc.power.estimate - 1.0, tol.power));

    for &k in &cfg.verify.support_bands {
        let (compliant, adversarial) = band_support_pair(k, cfg.seeds.fields + 6)?;
        checks.push(Check::at_most(format!("band_support_k{k}"), compliant, tol.band_leak));
        checks.push(Check::above(format!("band_support_adversarial_k{k}"), adversarial, tol.band_leak));
    }

    let c16 = c_sigma(16.0, PhiOmegaRule::standard()?.profile(), C_SIGMA_NODES)?;
    let exact = (2.0 * PI).powf(-0.5);
    checks.push(Check::at_most("c_sigma_closed_form", (c16 - exact).abs() / exact, tol.c_sigma));

    checks.push(Check::at_most("budget_worked_examples", budget_example_defect()?, 0.0));
    Ok(SuiteReport::new("verify", cfg, checks))
}

/// Relative leaks of `F(a_k f_k)` outside `[2^{k−3}, 2^{k+1}]` for a
/// compliant `a_k` and for one concentrated at `|ξ| = 2^k`. The grid is
/// `N = 256` with `L = 2^{8−k}π`, which puts band `k` at the same lattice
/// radius for every `k`.
pub fn band_support_pair(k: usize, seed: u64) -> Result<(f64, f64)> {
    if !(1..=9).contains(&k) {
        return Err(Error::Parameter(format!("band {k} must lie in 1..=9")));
    }
    let spec = GridSpec::new(2, 256, crate::dyadic::pow2(8 - k as i32) * PI)?;
    let chi = build_chi_family(spec)?;
    let cond = SupportCondition { c: 0.25, gamma: 0.75 };
    let (lo, hi) = cond.window(k);
    let f = random_band_field(spec, seed, 0.0, f64::INFINITY);
    let f_k = chi.project_spectrum(&forward_transform(&f)?, k);
    let a_k = random_band_field(spec, seed + 1, lo, hi);
    let ok = verify_band_support(&a_k, &f_k, k, Some(cond))?;
    let bad = GridField::plane_wave(spec, &[crate::dyadic::pow2(k as i32), 0.0]);
    let adv = verify_band_support(&bad, &f_k, k, Some(cond))?;
    Ok((ok.leak, adv.leak))
}

/// Largest deviation of the three worked budget examples from their
/// closed-form values.
pub fn budget_example_defect() -> Result<f64> {
    let a = budget(2.0, 0.0, 4.0, 2, 0.01)?;
    let b = budget(1.5, 0.25, 2.0, 2, 0.01)?;
    let c = budget(0.5, 0.5, 4.0, 2, 0.01)?;
    let diffs = [
        a.tau,
        a.gamma - 0.625,
        a.sigma,
        b.tau,
        b.sigma,
        b.rho,
        c.tau - 0.125,
        c.gamma - 0.75,
        c.rho - 0.125,
    ];
    Ok(diffs.iter().map(|d| d.abs()).fold(0.0, f64::max))
}

/// The operator under test, on its own grid.
pub enum BenchSymbol {
    Dense(DenseSymbol),
    Separable(SeparableSymbol),
}

impl BenchSymbol {
    pub fn spec(&self) -> &GridSpec {
        match self {
            BenchSymbol::Dense(a) => a.spec(),
            BenchSymbol::Separable(a) => a.spec(),
        }
    }

    pub fn class(&self) -> SymbolClass {
        match self {
            BenchSymbol::Dense(a) => a.class(),
            BenchSymbol::Separable(a) => a.class(),
        }
    }
}

impl From<LoadedSymbol> for BenchSymbol {
    fn from(s: LoadedSymbol) -> Self {
        match s {
            LoadedSymbol::Dense(a) => BenchSymbol::Dense(a),
            LoadedSymbol::Separable(a) => BenchSymbol::Separable(a),
        }
    }
}

/// Loads a symbol descriptor, resolving relative paths next to it.
pub fn load_symbol(path: &Path, grid: Option<GridSpec>, eps: f64) -> Result<BenchSymbol> {
    let d = SymbolDescriptor::read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(d.load(base, grid, eps)?.into())
}

/// Applies a symbol, densely for dense symbols (up to [`DENSE_MAX_SIZE`])
/// and band by band for separable ones.
pub fn apply_symbol(a: &BenchSymbol, f: &GridField) -> Result<GridField> {
    match a {
        BenchSymbol::Dense(d) => {
            if d.spec().size() > DENSE_MAX_SIZE {
                return Err(Error::Parameter(format!("dense application is limited to N ≤ {DENSE_MAX_SIZE}")));
            }
            apply_dense(d, f)
        }
        BenchSymbol::Separable(s) => apply_separable(s, f, &build_chi_family(*s.spec())?),
    }
}

/// Summary written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchSummary {
    pub provenance: Provenance,
    pub symbol: String,
    pub s_in: f64,
    pub s_out: f64,
    pub budgets: Vec<ExponentBudget>,
    pub trends: Vec<Trend>,
    pub sup_ratio: f64,
    pub power_check: Option<PowerCheck>,
    /// Whether every trend has growth and slope within tolerance.
    pub bounded_trend: bool,
    pub report: BoundednessReport,
}

pub struct BenchOutcome {
    pub summary: BenchSummary,
    pub csv: String,
}

/// Runs the boundedness sweep: one probe over the configured exponents and
/// test family at `s_out = s` and `s_in = s + m + τ` (or `s + m` when the
/// τ-shift is disabled). Every `s + s(p)` must be admissible.
pub fn bench(cfg: &RunConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    let spec = cfg.bench.grid.to_spec()?;
    let n = &cfg.norms;
    let lp = build_lp_family(spec, cfg.frame.eps)?;
    let (symbol, label) = match &cfg.bench.symbol {
        Some(path) => (load_symbol(path, Some(spec), cfg.frame.eps)?, path.display().to_string()),
        None => {
            let s = rough_chirp(spec, n.r, n.delta, &ChirpOptions { seed: cfg.seeds.chirp, ..ChirpOptions::default() }, &lp)?;
            (BenchSymbol::Separable(s), format!("rough_chirp(r={}, delta={})", n.r, n.delta))
        }
    };
    spec.ensure_same(symbol.spec())?;
    let class = symbol.class();
    let budgets: Vec<ExponentBudget> =
        n.p.iter().map(|&p| budget(class.r, class.delta, p, spec.dim(), n.eps_slack)).collect::<Result<_>>()?;
    let tau = if cfg.bench.shift_by_tau { budgets.iter().map(|b| b.tau).fold(0.0, f64::max) } else { 0.0 };
    for b in &budgets {
        if !b.admits(n.s) {
            return Err(Error::Parameter(format!(
                "s = {} is outside the admissible interval ({}, {}) at p = {}",
                n.s, b.s_interval.0, b.s_interval.1, b.p
            )));
        }
    }
    let s_out = n.s;
    let s_in = n.s + class.m + tau;
    let frame = cfg.frame(spec)?;
    let family = TestFamily::build(
        spec,
        &FamilyOptions {
            bands: cfg.bench.bands.clone(),
            packet_directions: cfg.bench.packet_directions,
            focusing_directions: frame.directions().len(),
            random_members: cfg.bench.random_members,
            seed: cfg.seeds.family,
        },
    )?;
    let chi;
    let op: Box<dyn LinearOperator + '_> = match &symbol {
        BenchSymbol::Dense(d) => {
            if spec.size() > DENSE_MAX_SIZE {
                return Err(Error::Parameter(format!("dense application is limited to N ≤ {DENSE_MAX_SIZE}")));
            }
            Box::new(DenseOperator(d))
        }
        BenchSymbol::Separable(s) => {
            chi = build_chi_family(spec)?;
            Box::new(SeparableOperator { symbol: s, chi: &chi })
        }
    };
    let opts = ProbeOptions { power_check: cfg.bench.power_check, seed: cfg.seeds.power, ..ProbeOptions::default() };
    let mut report = operator_norm_probe(op.as_ref(), s_in, s_out, &n.p, &frame, &family, &opts)?;
    report.budgets = budgets.clone();
    let tol = &cfg.tolerances;
    let bounded_trend = !report.trends.is_empty()
        && report.trends.iter().all(|t| t.growth <= tol.trend_growth && t.slope.abs() <= tol.trend_slope);
    let provenance = cfg.provenance();
    let csv = render_csv(&provenance, &report);
    Ok(BenchOutcome {
        summary: BenchSummary {
            provenance,
            symbol: label,
            s_in,
            s_out,
            budgets,
            trends: report.trends.clone(),
            sup_ratio: report.sup_ratio,
            power_check: report.power_check,
            bounded_trend,
            report,
        },
        csv,
    })
}

/// CSV with `#`-prefixed provenance lines, the fixed header and one row per
/// measurement. Floats use the shortest representation that round-trips.
pub fn render_csv(prov: &Provenance, report: &BoundednessReport) -> String {
    let mut out = format!("# fiokit {}\n# config_sha256 {}\n", prov.version, prov.config_hash);
    out.push_str("p,s_in,s_out,k,member,in_norm,out_norm,ratio\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.p, r.s_in, r.s_out, r.k, r.member, r.in_norm, r.out_norm, r.ratio
        ));
    }
    out
}

/// Writes `bench.csv` and `bench.json` into `dir`.
pub fn write_bench(dir: &Path, outcome: &BenchOutcome) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("bench.csv");
    let json = dir.join("bench.json");
    std::fs::write(&csv, &outcome.csv).map_err(|e| Error::io(&csv, e))?;
    write_json(&json, &outcome.summary)?;
    Ok((csv, json))
}

/// Pretty-printed JSON to `path`.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// `H^{s,p}_FIO` and classical norms of a field for several exponents.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub provenance: Provenance,
    pub grid: GridSpec,
    pub s: f64,
    pub rows: Vec<NormRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormRow {
    pub p: f64,
    pub hpfio: f64,
    pub classical: f64,
}

pub fn norm_report(cfg: &RunConfig, f: &GridField, s: f64, ps: &[f64]) -> Result<NormReport> {
    let frame = cfg.frame(*f.spec())?;
    let h = hpfio_norms(f, s, ps, &frame)?;
    let rows = ps
        .iter()
        .zip(h)
        .map(|(&p, hpfio)| Ok(NormRow { p, hpfio, classical: classical_norm(f, s, p)? }))
        .collect::<Result<_>>()?;
    Ok(NormReport { provenance: cfg.provenance(), grid: *f.spec(), s, rows })
}

/// Result of splitting a symbol at level `γ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothReport {
    pub provenance: Provenance,
    pub gamma: f64,
    pub exactness_residual: f64,
    pub sharp_sup: f64,
    pub flat_sup: f64,
    pub sampled_frequencies: usize,
}

/// Splits `a` into `a♯ + a♭` and, if `f` is given, applies both parts to it.
pub fn smooth_symbol(
    cfg: &RunConfig,
    a: &BenchSymbol,
    gamma: f64,
    f: Option<&GridField>,
) -> Result<(SmoothReport, Option<(GridField, GridField)>)> {
    let spec = *a.spec();
    let dense = match a {
        BenchSymbol::Dense(d) => d.clone(),
        BenchSymbol::Separable(s) => s.densify(),
    };
    let lp = build_lp_family(spec, cfg.frame.eps)?;
    let split = smooth_split(&dense, gamma, &lp)?;
    let idx = sample_frequencies(&spec, 0);
    let report = SmoothReport {
        provenance: cfg.provenance(),
        gamma,
        exactness_residual: split.exactness_residual(&dense, &idx)?,
        sharp_sup: split.sharp.max_abs_on(&idx)?,
        flat_sup: split.flat.max_abs_on(&idx)?,
        sampled_frequencies: idx.len(),
    };
    let applied = match f {
        Some(f) => {
            if spec.size() > DENSE_MAX_SIZE {
                return Err(Error::Parameter(format!("dense application is limited to N ≤ {DENSE_MAX_SIZE}")));
            }
            Some((apply_dense(&split.sharp, f)?, apply_dense(&split.flat, f)?))
        }
        None => None,
    };
    Ok((report, applied))
}
