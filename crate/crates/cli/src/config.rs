//! TOML run configuration.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use dampcert_core::certify::{CertifyConfig, Shape};
use dampcert_core::problem::ScanSettings;
use dampcert_core::thresholds::ThresholdConfig;
use dampcert_core::{Grid, ProblemSource, ProblemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use toml::Spanned;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Spanned<ProblemSource>,
    #[serde(default)]
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default)]
    pub thresholds: ThresholdSection,
    pub certify: Option<Spanned<CertifySection>>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_interior: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n_interior: Grid::DEFAULT_INTERIOR }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    /// End of the `simulate` run.
    pub t_end: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max")]
    pub picard_max: usize,
    #[serde(default = "default_max_halvings")]
    pub max_halvings: u32,
}

fn default_picard_tol() -> f64 {
    1e-10
}

fn default_picard_max() -> usize {
    50
}

fn default_max_halvings() -> u32 {
    8
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub theta_margin: f64,
    pub xi_override: Option<f64>,
    pub xi_fraction: f64,
    pub scan_horizon: f64,
    pub scan_samples: usize,
    pub s_horizon: f64,
    pub s_intervals: usize,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        let d = ThresholdConfig::default();
        ThresholdSection {
            theta_margin: d.theta_margin,
            xi_override: d.xi_override,
            xi_fraction: d.xi_fraction,
            scan_horizon: d.scan.horizon,
            scan_samples: d.scan.samples,
            s_horizon: d.s_horizon,
            s_intervals: d.s_intervals,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Stability,
    Exponential,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeEntry {
    pub u0: String,
    #[serde(default = "zero")]
    pub u1: String,
}

fn zero() -> String {
    "0".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    #[serde(default = "default_kind")]
    pub kind: Kind,
    /// Ignored for `kind = "exponential"`.
    #[serde(default)]
    pub sigmas: Vec<f64>,
    /// Defaults to `[time.t0]`.
    #[serde(default)]
    pub t0s: Vec<f64>,
    #[serde(default)]
    pub shapes: Vec<ShapeEntry>,
    /// Extra shapes with random Fourier coefficients drawn from `--seed`.
    #[serde(default)]
    pub random_shapes: usize,
    #[serde(default = "default_random_modes")]
    pub random_modes: usize,
    pub horizon: Option<f64>,
    #[serde(default = "default_delta_fraction")]
    pub delta_fraction: f64,
    pub d_t0: Option<f64>,
    pub nu: Option<f64>,
    #[serde(default = "default_comparison_rel")]
    pub comparison_rel: f64,
}

fn default_kind() -> Kind {
    Kind::Stability
}

fn default_random_modes() -> usize {
    5
}

fn default_delta_fraction() -> f64 {
    0.9
}

fn default_comparison_rel() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: default_directory(), formats: default_formats() }
    }
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

/// A configuration problem, located in the source file when possible.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub location: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            Some((line, col)) => write!(f, "{}:{line}:{col}: {}", self.path.display(), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Flags that override the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
}

/// A parsed and validated configuration.
pub struct Loaded {
    pub raw: RunConfig,
    pub spec: ProblemSpec,
    pub overrides: Overrides,
}

impl Loaded {
    pub fn load(path: &Path, overrides: Overrides) -> Result<Loaded, ConfigError> {
        let err = |location, message: String| ConfigError { path: path.to_path_buf(), location, message };
        let text = std::fs::read_to_string(path).map_err(|e| err(None, e.to_string()))?;
        let raw: RunConfig = toml::from_str(&text).map_err(|e| {
            let location = e.span().map(|s| line_col(&text, s.start));
            err(location, e.message().trim_end().to_string())
        })?;
        let at = |span: Range<usize>| Some(line_col(&text, span.start));
        let spec = ProblemSpec::new(raw.problem.get_ref().clone()).map_err(|e| err(at(raw.problem.span()), format!("[problem]: {e}")))?;
        Grid::new(raw.grid.n_interior).map_err(|e| err(None, format!("[grid]: {e}")))?;
        let t = &raw.time;
        if !(t.dt > 0.0 && t.t_end > t.t0 && t.t0 >= 0.0) {
            return Err(err(None, format!("[time]: need dt > 0 and 0 <= t0 < t_end, got dt = {}, t0 = {}, t_end = {}", t.dt, t.t0, t.t_end)));
        }
        if let Some(c) = &raw.certify {
            let cs = c.get_ref();
            if cs.shapes.is_empty() && cs.random_shapes == 0 {
                return Err(err(at(c.span()), "[certify]: no shapes given".into()));
            }
            if cs.kind == Kind::Stability && cs.sigmas.is_empty() {
                return Err(err(at(c.span()), "[certify]: stability certificates need at least one sigma".into()));
            }
        }
        if let Some(h) = overrides.horizon {
            if !(h > 0.0) {
                return Err(err(None, format!("--horizon must be positive, got {h}")));
            }
        }
        Ok(Loaded { raw, spec, overrides })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.overrides.out.clone().unwrap_or_else(|| self.raw.output.directory.clone())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.raw.output.formats.contains(&f)
    }

    pub fn threshold_config(&self) -> ThresholdConfig {
        let t = &self.raw.thresholds;
        ThresholdConfig {
            theta_margin: t.theta_margin,
            xi_override: t.xi_override,
            xi_fraction: t.xi_fraction,
            scan: self.scan(),
            s_horizon: t.s_horizon,
            s_intervals: t.s_intervals,
        }
    }

    pub fn scan(&self) -> ScanSettings {
        ScanSettings { horizon: self.raw.thresholds.scan_horizon, samples: self.raw.thresholds.scan_samples }
    }

    /// Solver and checking settings; `[certify]` keys apply when present.
    pub fn certify_config(&self) -> CertifyConfig {
        let t = &self.raw.time;
        let mut cfg = CertifyConfig {
            n_interior: self.raw.grid.n_interior,
            dt: t.dt,
            scan: self.scan(),
            picard_tol: t.picard_tol,
            picard_max: t.picard_max,
            max_halvings: t.max_halvings,
            snapshot_times: t.snapshot_times.clone(),
            ..CertifyConfig::default()
        };
        if let Some(c) = &self.raw.certify {
            let c = c.get_ref();
            cfg.horizon = c.horizon;
            cfg.delta_fraction = c.delta_fraction;
            cfg.d_t0 = c.d_t0;
            cfg.nu = c.nu;
            cfg.comparison_rel = c.comparison_rel;
        }
        if let Some(h) = self.overrides.horizon {
            cfg.horizon = Some(h);
        }
        cfg
    }

    /// `(t0, t_end)` of the `simulate` run.
    pub fn simulate_span(&self) -> (f64, f64) {
        let t = &self.raw.time;
        (t.t0, self.overrides.horizon.map_or(t.t_end, |h| t.t0 + h))
    }

    pub fn certify_section(&self) -> Option<&CertifySection> {
        self.raw.certify.as_ref().map(|c| c.get_ref())
    }

    pub fn t0s(&self) -> Vec<f64> {
        match self.certify_section() {
            Some(c) if !c.t0s.is_empty() => c.t0s.clone(),
            _ => vec![self.raw.time.t0],
        }
    }

    /// Listed shapes followed by the seeded random ones; `sin x` when the
    /// file has no `[certify]` table.
    pub fn shapes(&self) -> Vec<Shape> {
        let Some(c) = self.certify_section() else {
            return vec![Shape::sine()];
        };
        let mut out: Vec<Shape> = c.shapes.iter().map(|s| Shape::new(&s.u0, &s.u1)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.overrides.seed.unwrap_or(0));
        for _ in 0..c.random_shapes {
            let series = |rng: &mut ChaCha8Rng| {
                let terms: Vec<String> = (1..=c.random_modes.max(1)).map(|m| format!("({:?})*sin({m}*x)", rng.random_range(-1.0..1.0))).collect();
                terms.join(" + ")
            };
            let u0 = series(&mut rng);
            let u1 = series(&mut rng);
            out.push(Shape::new(u0, u1));
        }
        out
    }
}
