//! Run configuration: a TOML file, overridden by command-line flags, over built-in defaults.

use std::path::{Path, PathBuf};

use ballvn::experiments::{FuzzSpec, TrialSpec};
use ballvn::pick::{KernelSpec, PsdTest};
use ballvn::schur::{GleasonTable, SchurConfig};
use ballvn::tuple::TupleKind;
use ballvn::{FunctionExpr, Polynomial};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    Spectrum,
    PickNorm,
    NpointSearch,
    ThreePointCheck,
    Schur,
    VnFuzz,
    CdnCurve,
    FcCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Spectrum => "spectrum",
            Command::PickNorm => "pick-norm",
            Command::NpointSearch => "npoint-search",
            Command::ThreePointCheck => "three-point-check",
            Command::Schur => "schur",
            Command::VnFuzz => "vn-fuzz",
            Command::CdnCurve => "cdn-curve",
            Command::FcCheck => "fc-check",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub out: PathBuf,
    /// 0 means all cores.
    pub threads: usize,
    /// Tolerance for property checks (ratios above `1 + tol`, Schur residuals).
    pub tol: f64,
    pub kernel: KernelSpec,
    /// Replaces `schur.gleason_constants` when present.
    pub gleason_constants: Option<GleasonTable>,
    pub tuple: TupleSource,
    pub function: FunctionSource,
    pub points: PointsSource,
    pub pick_norm: PickNormParams,
    pub npoint_search: NpointSearchParams,
    pub schur: SchurConfig,
    pub vn_fuzz: VnFuzzParams,
    pub cdn_curve: CdnCurveParams,
    pub fc_check: FcCheckParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            seed: 0,
            out: PathBuf::from("ballvn-out"),
            threads: 0,
            tol: 1e-6,
            kernel: KernelSpec::drury_arveson(),
            gleason_constants: None,
            tuple: TupleSource::default(),
            function: FunctionSource::default(),
            points: PointsSource::default(),
            pick_norm: PickNormParams::default(),
            npoint_search: NpointSearchParams::default(),
            schur: SchurConfig::default(),
            vn_fuzz: VnFuzzParams::default(),
            cdn_curve: CdnCurveParams::default(),
            fc_check: FcCheckParams::default(),
        }
    }
}

/// Exactly one of the fields may be set; with none set a random tuple with the defaults
/// of [`RandomTuple`] is used.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TupleSource {
    /// JSON file holding a matrix tuple.
    pub file: Option<PathBuf>,
    pub random: Option<RandomTuple>,
    pub compressed_shift: Option<ShiftSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomTuple {
    pub kind: TupleKind,
    pub n: usize,
    pub d: usize,
    /// Multiplies the generated tuple, whose row norm lies in `[0.5, 1]`.
    pub scale: f64,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
}

impl Default for RandomTuple {
    fn default() -> Self {
        RandomTuple {
            kind: TupleKind::DiagonalConjugated,
            n: 3,
            d: 2,
            scale: 0.8,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub d: usize,
    pub k: usize,
}

/// Exactly one of the fields may be set; with none set each command uses its own default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunctionSource {
    /// JSON file holding an expression tree.
    pub file: Option<PathBuf>,
    pub polynomial: Option<Polynomial>,
    pub expr: Option<FunctionExpr>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointsSource {
    /// JSON file holding `{"points": [[[re, im], ...], ...]}`.
    pub file: Option<PathBuf>,
    /// Inline points as `[re, im]` pairs.
    pub values: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PickNormParams {
    /// Bound at which the Pick certificate is reported.
    pub c: f64,
    pub psd_test: PsdTest,
}

impl Default for PickNormParams {
    fn default() -> Self {
        PickNormParams {
            c: 1.0,
            psd_test: PsdTest::Cholesky,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NpointSearchParams {
    pub n: usize,
    pub budget: usize,
    pub starts: usize,
    pub init_radius: f64,
}

impl Default for NpointSearchParams {
    fn default() -> Self {
        NpointSearchParams {
            n: 3,
            budget: 4000,
            starts: 32,
            init_radius: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VnFuzzParams {
    pub n: usize,
    pub trials: usize,
    pub spec: FuzzSpec,
    /// Ratio evaluations for a warm-started counterexample search (`n = 3` only; 0 disables).
    pub search_budget: usize,
    pub search_max_degree: usize,
}

impl Default for VnFuzzParams {
    fn default() -> Self {
        VnFuzzParams {
            n: 2,
            trials: 1000,
            spec: FuzzSpec::default(),
            search_budget: 0,
            search_max_degree: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdnCurveParams {
    pub d: usize,
    pub k_max: usize,
    pub trials: TrialSpec,
}

impl Default for CdnCurveParams {
    fn default() -> Self {
        CdnCurveParams {
            d: 2,
            k_max: 4,
            trials: TrialSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcCheckParams {
    pub samples: usize,
    /// Order of the Taylor expansion used by the series calculus.
    pub taylor_order: usize,
    pub series_tol: f64,
    /// Agreement threshold in standard errors.
    pub std_errors: f64,
}

impl Default for FcCheckParams {
    fn default() -> Self {
        FcCheckParams {
            samples: 200_000,
            taylor_order: 80,
            series_tol: 1e-13,
            std_errors: 3.0,
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub tol: Option<f64>,
    pub n: Option<usize>,
    pub budget: Option<usize>,
    pub d: Option<usize>,
    pub k_max: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Loaded configuration and the directory that relative input paths are resolved against.
pub struct Loaded {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub file_sha256: Option<String>,
}

pub fn load(path: Option<&Path>) -> Result<Loaded, ConfigError> {
    let Some(path) = path else {
        return Ok(Loaded {
            config: RunConfig::default(),
            base_dir: PathBuf::from("."),
            file_sha256: None,
        });
    };
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let config: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(Loaded {
        config,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        file_sha256: Some(crate::provenance::sha256_hex(text.as_bytes())),
    })
}

impl RunConfig {
    /// Apply flag overrides for `command`. `--n` and `--budget` go to the command's section.
    pub fn apply(&mut self, command: Command, o: &Overrides) {
        self.command = Some(command);
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(t) = o.threads {
            self.threads = t;
        }
        if let Some(t) = o.tol {
            self.tol = t;
        }
        match command {
            Command::NpointSearch => {
                if let Some(n) = o.n {
                    self.npoint_search.n = n;
                }
                if let Some(b) = o.budget {
                    self.npoint_search.budget = b;
                }
            }
            Command::VnFuzz => {
                if let Some(n) = o.n {
                    self.vn_fuzz.n = n;
                }
                if let Some(b) = o.budget {
                    self.vn_fuzz.trials = b;
                }
            }
            Command::CdnCurve => {
                if let Some(d) = o.d {
                    self.cdn_curve.d = d;
                }
                if let Some(k) = o.k_max {
                    self.cdn_curve.k_max = k;
                }
                if let Some(b) = o.budget {
                    self.cdn_curve.trials.trials = b;
                }
            }
            Command::FcCheck => {
                if let Some(b) = o.budget {
                    self.fc_check.samples = b;
                }
            }
            Command::Schur => {
                if let Some(b) = o.budget {
                    self.schur.sup_norm_budget = b;
                }
            }
            _ => {}
        }
        if let Some(table) = &self.gleason_constants {
            self.schur.gleason_constants = table.clone();
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return bad(format!("tol must be a nonnegative number, got {}", self.tol));
        }
        if let Err(e) = KernelSpec::new(self.kernel.a) {
            return bad(e.to_string());
        }
        if let Err(e) = self.schur.validate() {
            return bad(e.to_string());
        }
        let t = &self.tuple;
        if [t.file.is_some(), t.random.is_some(), t.compressed_shift.is_some()].iter().filter(|&&b| b).count() > 1 {
            return bad("[tuple] takes only one of file, random, compressed_shift".into());
        }
        if let Some(r) = &t.random {
            if r.n == 0 || r.d == 0 || !(r.scale.is_finite() && r.scale > 0.0) {
                return bad("[tuple.random] needs n, d ≥ 1 and a positive scale".into());
            }
        }
        let f = &self.function;
        if [f.file.is_some(), f.polynomial.is_some(), f.expr.is_some()].iter().filter(|&&b| b).count() > 1 {
            return bad("[function] takes only one of file, polynomial, expr".into());
        }
        if self.points.file.is_some() && self.points.values.is_some() {
            return bad("[points] takes only one of file, values".into());
        }
        if !(self.pick_norm.c.is_finite() && self.pick_norm.c >= 0.0) {
            return bad("pick_norm.c must be a nonnegative number".into());
        }
        let s = &self.npoint_search;
        if s.n == 0 || s.starts == 0 || !(s.init_radius > 0.0 && s.init_radius < 1.0) {
            return bad("[npoint_search] needs n, starts ≥ 1 and init_radius in (0, 1)".into());
        }
        let v = &self.vn_fuzz;
        if v.n == 0 || v.spec.max_d == 0 || v.spec.max_degree == 0 || v.spec.sup_budget == 0 || v.search_max_degree == 0 {
            return bad("[vn_fuzz] needs n, max_d, max_degree, sup_budget, search_max_degree ≥ 1".into());
        }
        let c = &self.cdn_curve;
        if c.d == 0 || c.k_max == 0 || c.trials.trials == 0 {
            return bad("[cdn_curve] needs d, k_max, trials ≥ 1".into());
        }
        let fc = &self.fc_check;
        if fc.samples < 2 || fc.taylor_order == 0 || !(fc.series_tol > 0.0) || !(fc.std_errors > 0.0) {
            return bad("[fc_check] needs samples ≥ 2 and positive taylor_order, series_tol, std_errors".into());
        }
        Ok(())
    }
}
