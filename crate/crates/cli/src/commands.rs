//! Subcommand bodies. Each returns the process exit code; errors are mapped
//! by [`exit_code`].

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dampcert_core::certify::{self, export, CertificateRun, Shape};
use dampcert_core::problem::{verify_assumptions_i, AssumptionReport};
use dampcert_core::thresholds::{Envelope, ThresholdReport, Thresholds};
use dampcert_core::{Error, Grid, GridState, Result};
use serde::Serialize;

use crate::config::{Format, Kind, Loaded};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_ASSUMPTION: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_NOT_CERTIFIED: u8 = 4;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Assumption(_) | Error::AssumptionIIUnverifiable { .. } => EXIT_ASSUMPTION,
        Error::PicardNonConvergence { .. } | Error::NonFinite { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn out_dir(cfg: &Loaded) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = export::to_json(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_csv(path: &Path, body: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    body(BufWriter::new(File::create(path)?))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn assumptions(cfg: &Loaded) -> AssumptionReport {
    let scan = cfg.scan();
    verify_assumptions_i(&cfg.spec, scan.horizon, scan.samples)
}

/// Thresholds, or the exit code of a breached assumption (report on stderr).
fn thresholds_or_breach(cfg: &Loaded) -> Result<std::result::Result<Thresholds, u8>> {
    let report = assumptions(cfg);
    if !report.passed {
        eprintln!("assumptions violated:\n{}", export::to_json(&report)?);
        return Ok(Err(EXIT_ASSUMPTION));
    }
    Ok(Ok(Thresholds::new(&cfg.spec, cfg.threshold_config())?))
}

pub fn check(cfg: &Loaded) -> Result<u8> {
    let report = assumptions(cfg);
    let json = export::to_json(&report)?;
    println!("{json}");
    if cfg.wants(Format::Json) {
        write_json(&out_dir(cfg)?.join("assumptions.json"), &report)?;
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_ASSUMPTION })
}

#[derive(Serialize)]
struct SigmaRow {
    sigma: f64,
    t0: f64,
    gamma3: f64,
    lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct ThresholdsOutput {
    problem_digest: String,
    #[serde(flatten)]
    report: ThresholdReport,
    /// `D` and `E` with `Δ` evaluated at `W(t₀) = 0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    envelope: Option<Envelope>,
    configured: Vec<SigmaRow>,
}

pub fn thresholds(cfg: &Loaded) -> Result<u8> {
    let thr = match thresholds_or_breach(cfg)? {
        Ok(t) => t,
        Err(code) => return Ok(code),
    };
    let t0 = cfg.raw.time.t0;
    let sigmas = cfg.certify_section().map(|c| c.sigmas.clone()).unwrap_or_default();
    let mut configured = Vec::new();
    for &sigma in &sigmas {
        for &t0 in &cfg.t0s() {
            let (delta, error) = match thr.delta(sigma, t0) {
                Ok(d) => (Some(d), None),
                Err(e) => (None, Some(e.to_string())),
            };
            configured.push(SigmaRow { sigma, t0, gamma3: thr.gamma.gamma3(sigma), lambda: thr.lambda(sigma)?, delta, error });
        }
    }
    let out = ThresholdsOutput { problem_digest: cfg.spec.digest(), report: thr.report()?, envelope: thr.decay_envelope(t0, 0.0).ok(), configured };
    println!("{}", export::to_json(&out)?);
    if cfg.wants(Format::Json) {
        write_json(&out_dir(cfg)?.join("thresholds.json"), &out)?;
    }
    Ok(EXIT_OK)
}

fn write_snapshots(dir: &Path, stem: &str, grid: &Grid, snapshots: &[(f64, GridState)], files: &mut Vec<String>) -> Result<()> {
    for (k, (_, state)) in snapshots.iter().enumerate() {
        let path = dir.join(format!("{stem}_snapshot_{k:03}.csv"));
        write_csv(&path, |w| export::write_snapshot(w, grid, state))?;
        files.push(file_name(&path));
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary {
    problem_digest: String,
    shape: Shape,
    t0: f64,
    t_end: f64,
    sigma: Option<f64>,
    snapshot_times: Vec<f64>,
    solver: dampcert_core::solver::RunStats,
    files: Vec<String>,
}

/// Runs the first configured shape without scaling. `W` and its bounds are
/// filled in only when the assumptions hold.
pub fn simulate(cfg: &Loaded) -> Result<u8> {
    let thr = if assumptions(cfg).passed { Thresholds::new(&cfg.spec, cfg.threshold_config()).ok() } else { None };
    let shape = cfg.shapes().swap_remove(0);
    let (t0, t_end) = cfg.simulate_span();
    let cc = cfg.certify_config();
    let sim = certify::simulate(&cfg.spec, thr.as_ref(), &shape, t0, t_end, &cc)?;
    let dir = out_dir(cfg)?;
    let mut files = Vec::new();
    if cfg.wants(Format::Csv) {
        let path = dir.join("trajectory.csv");
        write_csv(&path, |w| export::write_series(w, &sim.series))?;
        files.push(file_name(&path));
        write_snapshots(&dir, "trajectory", &Grid::new(cc.n_interior)?, &sim.snapshots, &mut files)?;
    }
    let summary = SimulationSummary {
        problem_digest: cfg.spec.digest(),
        shape,
        t0,
        t_end,
        sigma: sim.sigma,
        snapshot_times: sim.snapshots.iter().map(|(t, _)| *t).collect(),
        solver: sim.solver,
        files,
    };
    if cfg.wants(Format::Json) {
        write_json(&dir.join("simulation.json"), &summary)?;
    }
    println!("{} steps to t = {t_end}", summary.solver.steps);
    Ok(EXIT_OK)
}

fn emit_certificate(cfg: &Loaded, dir: &Path, index: usize, mut run: CertificateRun) -> Result<bool> {
    let stem = format!("certificate_{index:03}");
    let grid = Grid::new(run.certificate.config.n_interior)?;
    let mut files = Vec::new();
    if cfg.wants(Format::Csv) {
        let path = dir.join(format!("{stem}_series.csv"));
        write_csv(&path, |w| export::write_series(w, &run.series))?;
        files.push(file_name(&path));
        write_snapshots(dir, &stem, &grid, &run.snapshots, &mut files)?;
    }
    let json_path = dir.join(format!("{stem}.json"));
    if cfg.wants(Format::Json) {
        files.insert(0, file_name(&json_path));
    }
    run.certificate.files = files;
    let c = &run.certificate;
    if cfg.wants(Format::Json) {
        write_json(&json_path, c)?;
    }
    println!("{stem}: {} (sigma = {}, t0 = {}, d(t0) = {:e})", c.verdict.as_str(), c.inputs.sigma, c.inputs.t0, c.inputs.d_t0);
    Ok(c.passed())
}

pub fn certify(cfg: &Loaded) -> Result<u8> {
    let Some(section) = cfg.certify_section() else {
        return Err(Error::Precondition("certify needs a [certify] table".into()));
    };
    let thr = match thresholds_or_breach(cfg)? {
        Ok(t) => t,
        Err(code) => return Ok(code),
    };
    let cc = cfg.certify_config();
    let shapes = cfg.shapes();
    let dir = out_dir(cfg)?;
    let sigmas: Vec<Option<f64>> = match section.kind {
        Kind::Stability => section.sigmas.iter().copied().map(Some).collect(),
        Kind::Exponential => vec![None],
    };
    let mut all = true;
    let mut index = 0;
    for sigma in &sigmas {
        for &t0 in &cfg.t0s() {
            for shape in &shapes {
                let run = match sigma {
                    Some(s) => certify::certify_stability(&thr, *s, t0, shape, &cc)?,
                    None => certify::certify_exponential(&thr, t0, shape, &cc)?,
                };
                all &= emit_certificate(cfg, &dir, index, run)?;
                index += 1;
            }
        }
    }
    Ok(if all { EXIT_OK } else { EXIT_NOT_CERTIFIED })
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    problem_digest: String,
    shapes: &'a [Shape],
    items: &'a [certify::SweepItem],
}

/// Always exits 0 once the sweep ran; verdicts are in the summary.
pub fn sweep(cfg: &Loaded) -> Result<u8> {
    let Some(section) = cfg.certify_section() else {
        return Err(Error::Precondition("sweep needs a [certify] table".into()));
    };
    if section.sigmas.is_empty() {
        return Err(Error::Precondition("sweep needs [certify].sigmas".into()));
    }
    let thr = match thresholds_or_breach(cfg)? {
        Ok(t) => t,
        Err(code) => return Ok(code),
    };
    let shapes = cfg.shapes();
    let items = certify::sweep(&thr, &section.sigmas, &cfg.t0s(), &shapes, &cfg.certify_config());
    let dir = out_dir(cfg)?;
    if cfg.wants(Format::Csv) {
        write_csv(&dir.join("sweep_summary.csv"), |w| export::write_sweep_summary(w, &items))?;
    }
    if cfg.wants(Format::Json) {
        write_json(&dir.join("sweep.json"), &SweepOutput { problem_digest: cfg.spec.digest(), shapes: &shapes, items: &items })?;
        let item_dir = dir.join("sweep");
        fs::create_dir_all(&item_dir)?;
        for (k, item) in items.iter().enumerate() {
            write_json(&item_dir.join(format!("item_{k:03}.json")), item)?;
        }
    }
    let certified = items.iter().filter(|i| i.certificate.as_ref().is_some_and(|c| c.passed())).count();
    let errors = items.iter().filter(|i| i.error.is_some()).count();
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{} items: {certified} certified, {errors} errors", items.len())?;
    Ok(EXIT_OK)
}
