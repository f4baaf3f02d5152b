//! Desk-scale verification runs: integrate from scaled initial data, check
//! each clause of the stability argument along the trajectory, and record
//! the outcome as a [`Certificate`].

pub mod export;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exprlang::Formula;
use crate::ext::Extended;
use crate::grid::{d_norm, Grid, GridState};
use crate::liapunov::{self, BTable, LiapunovParams, MONOTONE_ABS_SLACK, MONOTONE_REL_FACTOR};
use crate::problem::{verify_assumptions_i, CheckStatus, ProblemSpec, ScanSettings};
use crate::solver::{initial_state, integrate_observed, RunStats, SolverConfig};
use crate::thresholds::comparison::ComparisonCurve;
use crate::thresholds::{Envelope, ThresholdConfig, Thresholds};

pub const SCHEMA: &str = "dampcert.certificate/1";

/// Resolution of the `B` table behind the `upper_bound` column.
const B_TABLE_NODES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shape {
    pub u0: String,
    pub u1: String,
}

impl Shape {
    pub fn new(u0: impl Into<String>, u1: impl Into<String>) -> Shape {
        Shape { u0: u0.into(), u1: u1.into() }
    }

    /// `u₀ = sin x`, `u₁ = 0`.
    pub fn sine() -> Shape {
        Shape::new("sin(x)", "0")
    }

    fn sample(&self, grid: &Grid) -> Result<GridState> {
        let u0 = Formula::new(&self.u0, &["x"])?;
        let u1 = Formula::new(&self.u1, &["x"])?;
        initial_state(&u0, &u1, grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyConfig {
    pub n_interior: usize,
    pub dt: f64,
    /// Length of the checked interval; `None` means `max(200, 10/E)`
    /// (or 200 when `E` is unavailable).
    pub horizon: Option<f64>,
    /// Initial data are scaled to `d(t₀) = delta_fraction · δ`.
    pub delta_fraction: f64,
    /// Explicit `d(t₀)`, overriding the `δ` scaling.
    pub d_t0: Option<f64>,
    /// Settling tolerance `ν`; defaults to `d(t₀)/2`.
    pub nu: Option<f64>,
    /// Relative slack in `W ≤ y`.
    pub comparison_rel: f64,
    pub scan: ScanSettings,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub max_halvings: u32,
    /// Times at which full fields are kept (first step at or after each).
    pub snapshot_times: Vec<f64>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            n_interior: Grid::DEFAULT_INTERIOR,
            dt: 0.01,
            horizon: None,
            delta_fraction: 0.9,
            d_t0: None,
            nu: None,
            comparison_rel: 1e-6,
            scan: ScanSettings::default(),
            picard_tol: 1e-10,
            picard_max: 50,
            max_halvings: 8,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Stability,
    Exponential,
}

/// Hypothesis clauses gate the theorem; conclusion clauses are what it
/// promises once every hypothesis holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Hypothesis,
    Conclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clause {
    pub id: &'static str,
    pub role: Role,
    pub status: ClauseStatus,
    pub margin: Extended,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Clause {
    fn check(id: &'static str, role: Role, margin: f64, strict: bool) -> Clause {
        let ok = if strict { margin > 0.0 } else { margin >= 0.0 };
        Clause { id, role, status: if ok { ClauseStatus::Pass } else { ClauseStatus::Fail }, margin: Extended::from_f64(margin), first_violation: None, detail: None }
    }

    fn not_applicable(id: &'static str, role: Role, detail: impl Into<String>) -> Clause {
        Clause { id, role, status: ClauseStatus::NotApplicable, margin: Extended::Undetermined, first_violation: None, detail: Some(detail.into()) }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Clause {
        self.detail = Some(detail.into());
        self
    }

    fn with_violation(mut self, t: Option<f64>) -> Clause {
        self.first_violation = t;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    HypothesisNotMet,
    /// A conclusion failed with every hypothesis satisfied.
    ConclusionViolated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Certified => "certified",
            Verdict::HypothesisNotMet => "hypothesis_not_met",
            Verdict::ConclusionViolated => "conclusion_violated",
        }
    }
}

/// The threshold values a certificate relied on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRef {
    pub config: ThresholdConfig,
    pub theta: f64,
    pub gamma: f64,
    pub chi: f64,
    pub eta: f64,
    pub lambda: f64,
    pub xi: f64,
    pub kappa: f64,
    pub g_sup: Extended,
    pub big_delta: Extended,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inputs {
    pub sigma: f64,
    pub t0: f64,
    pub t_end: f64,
    pub shape: Shape,
    pub delta: f64,
    /// Factor applied to the sampled shape.
    pub scale: f64,
    pub d_t0: f64,
    pub w_t0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlackPolicy {
    pub abs: f64,
    pub rel_factor: f64,
    pub dt: f64,
    pub dx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Settling {
    pub nu: f64,
    /// Measured from `t₀`.
    pub time: Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeRecord {
    pub envelope: Envelope,
    /// `max d(t) / (D e^{-E(t-t₀)} d(t₀))`.
    pub worst_ratio: f64,
    pub worst_ratio_printed_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub schema: &'static str,
    pub kind: CertificateKind,
    pub problem_digest: String,
    pub thresholds: ThresholdRef,
    pub config: CertifyConfig,
    pub inputs: Inputs,
    pub clauses: Vec<Clause>,
    pub verdict: Verdict,
    /// Earliest violation time over failed conclusion clauses.
    pub first_violation: Option<f64>,
    pub settling: Settling,
    pub envelope: Option<EnvelopeRecord>,
    pub w_monotone_slack: SlackPolicy,
    pub solver: RunStats,
    /// Output files written for this certificate, filled in by the caller.
    pub files: Vec<String>,
}

impl Certificate {
    pub fn clause(&self, id: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.id == id)
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// Sampled `(t, d, W, χd², (1+γ)gB²(d), y, envelope)`; `envelope` is NaN
/// when not applicable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub d: Vec<f64>,
    pub w: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub y: Vec<f64>,
    pub envelope: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CertificateRun {
    pub certificate: Certificate,
    pub series: TimeSeries,
    pub snapshots: Vec<(f64, GridState)>,
}

/// Smallest sampled `T` with `d(t) < ν` for every sample from `t₀ + T` on;
/// `+inf` when the last sample is not below `ν`.
pub fn measure_settling(series: &TimeSeries, nu: f64) -> Extended {
    if series.is_empty() || !(nu > 0.0) {
        return Extended::Infinite;
    }
    match series.d.iter().rposition(|&d| d >= nu) {
        None => Extended::Finite(0.0),
        Some(k) if k + 1 == series.len() => Extended::Infinite,
        Some(k) => Extended::Finite(series.t[k + 1] - series.t[0]),
    }
}

/// Stability check: data scaled to `0.9 δ(σ, t₀)` must keep `d < σ`.
pub fn certify_stability(thr: &Thresholds, sigma: f64, t0: f64, shape: &Shape, config: &CertifyConfig) -> Result<CertificateRun> {
    run(thr, CertificateKind::Stability, sigma, t0, shape, config)
}

/// Exponential-decay check at `σ = xi_fraction · ξ`.
pub fn certify_exponential(thr: &Thresholds, t0: f64, shape: &Shape, config: &CertifyConfig) -> Result<CertificateRun> {
    let sigma = thr.config.xi_fraction * thr.xi()?;
    run(thr, CertificateKind::Exponential, sigma, t0, shape, config)
}

fn horizon_end(thr: &Thresholds, t0: f64, config: &CertifyConfig) -> Result<f64> {
    if let Some(h) = config.horizon {
        if !(h > 0.0) {
            return Err(Error::Precondition(format!("horizon {h} must be positive")));
        }
        return Ok(t0 + h);
    }
    let e = match thr.g_sup() {
        Some(gs) => thr.lambda(thr.config.xi_fraction * thr.xi()?)? / (2.0 * gs),
        None => 0.0,
    };
    Ok(if e > 0.0 { t0 + f64::max(200.0, 10.0 / e) } else { t0 + 200.0 })
}

fn run(thr: &Thresholds, kind: CertificateKind, sigma: f64, t0: f64, shape: &Shape, config: &CertifyConfig) -> Result<CertificateRun> {
    let spec = thr.spec();
    let delta = thr.delta(sigma, t0)?;
    let (xi, kappa) = (thr.xi()?, thr.kappa()?);
    let grid = Grid::new(config.n_interior)?;
    let t_end = horizon_end(thr, t0, config)?;

    let shape_state = shape.sample(&grid)?;
    let raw = d_norm(&shape_state, t0, spec, &grid)?;
    let target = config.d_t0.unwrap_or(config.delta_fraction * delta);
    let scale = if raw > 0.0 { target / raw } else { 0.0 };
    let initial = shape_state.scaled(scale);
    let d0 = d_norm(&initial, t0, spec, &grid)?;

    let gamma = thr.gamma.gamma3(sigma);
    let params = LiapunovParams::new(gamma, thr.theta())?;
    let lambda = thr.lambda(sigma)?;
    let w0 = liapunov::w(&initial, t0, spec, &params, &grid)?;
    let big_delta = thr.big_delta(t0, sigma, w0)?;

    let mut clauses = Vec::new();
    let assumptions = verify_assumptions_i(spec, config.scan.horizon, config.scan.samples);
    let failing: Vec<&str> = assumptions.clauses.iter().filter(|c| c.status == CheckStatus::Fail).map(|c| c.id).collect();
    let worst = assumptions.clauses.iter().filter_map(|c| c.margin).fold(f64::INFINITY, f64::min);
    let mut a1 = Clause::check("assumptions_I", Role::Hypothesis, if failing.is_empty() { worst.max(0.0) } else { worst.min(0.0) }, false);
    if !failing.is_empty() {
        a1.status = ClauseStatus::Fail;
        a1 = a1.with_detail(format!("failing: {}", failing.join(", ")));
    }
    clauses.push(a1);
    clauses.push(Clause::check("assumption_II", Role::Hypothesis, kappa, false).with_detail(format!("kappa = {kappa} for gamma_3(xi) = {}", thr.gamma.gamma3(xi))));
    clauses.push(Clause::check("sigma", Role::Hypothesis, f64::min(sigma, xi - sigma), true).with_detail(format!("0 < sigma < xi = {xi}")));
    clauses.push(Clause::check("t0", Role::Hypothesis, t0 - kappa, false).with_detail(format!("t0 >= kappa = {kappa}")));
    clauses.push(Clause::check("delta", Role::Hypothesis, f64::min(delta, sigma - delta), true).with_detail(format!("delta = {delta} in ]0, sigma[")));
    clauses.push(if d0 == 0.0 { Clause::check("d_t0", Role::Hypothesis, delta, true).with_detail("zero initial data") } else { Clause::check("d_t0", Role::Hypothesis, delta - d0, true) });

    // Exponential envelope: needs bounded g and d(t₀) < δ(ξ_fraction·ξ, t₀).
    let (envelope, envelope_note) = match thr.g_sup() {
        None => (None, "sup g = inf".to_string()),
        Some(_) => {
            let s_exp = thr.config.xi_fraction * xi;
            match thr.delta(s_exp, t0) {
                Ok(d_exp) if d0 < d_exp => match thr.decay_envelope(t0, w0) {
                    Ok(env) => (Some(env), String::new()),
                    Err(e) => (None, e.to_string()),
                },
                Ok(d_exp) => (None, format!("d(t0) = {d0} >= delta({s_exp}, t0) = {d_exp}")),
                Err(e) => (None, e.to_string()),
            }
        }
    };

    let curve = thr.comparison(t0, w0, sigma, t_end - t0, config.dt.min(t_end - t0))?;
    let solver_cfg = solver_config(config, t_end);
    let (_, dt_eff) = solver_cfg.steps_from(t0);
    let dx = grid.spacing();
    let b_table = BTable::new(spec, sigma.max(d0), B_TABLE_NODES)?;
    let probe = Probe { params, chi: thr.chi(), curve: Some(curve), envelope, d0, b_table };
    let traced = trace(spec, &grid, &initial, t0, &solver_cfg, Some(&probe), sigma, config)?;
    let (series, snapshots, track, stats) = (traced.series, traced.snapshots, traced.tracker, traced.solver);
    let curve = probe.curve.as_ref().expect("curve set above");

    clauses.push(Clause::check("d_below_sigma", Role::Conclusion, sigma - track.max_d, true).with_violation(track.d_violation));
    clauses.push(Clause::check("W_monotone", Role::Conclusion, track.monotone_margin, false).with_violation(track.monotone_violation));
    let detail = match curve.blow_up_time() {
        Some(tb) => format!("Delta = {big_delta}; y blows up at t = {tb}"),
        None => format!("Delta = {big_delta}"),
    };
    clauses.push(Clause::check("comparison_envelope", Role::Conclusion, track.comparison_margin, false).with_violation(track.comparison_violation).with_detail(detail));

    let nu = config.nu.unwrap_or(0.5 * d0);
    let settle = measure_settling(&series, nu);
    clauses.push(if d0 == 0.0 {
        Clause::not_applicable("settling", Role::Conclusion, "zero initial data")
    } else {
        let c = Clause { id: "settling", role: Role::Conclusion, status: if settle.is_finite() { ClauseStatus::Pass } else { ClauseStatus::Fail }, margin: settle, first_violation: None, detail: None };
        c.with_detail(format!("nu = {nu}; margin is the settling time T"))
    });

    let envelope_record = envelope.map(|e| EnvelopeRecord { envelope: e, worst_ratio: track.worst_ratio, worst_ratio_printed_exponent: track.worst_ratio_printed });
    clauses.push(match envelope {
        Some(e) => Clause::check("exponential_envelope", Role::Conclusion, 1.0 - track.worst_ratio, false)
            .with_violation(track.envelope_violation)
            .with_detail(format!("D = {}, E = {}; worst ratio with the -2/omega reading {}", e.d, e.e, track.worst_ratio_printed)),
        None => Clause::not_applicable("exponential_envelope", Role::Conclusion, envelope_note),
    });

    let hypotheses_hold = clauses.iter().filter(|c| c.role == Role::Hypothesis).all(|c| c.status == ClauseStatus::Pass);
    let failed_conclusions: Vec<&Clause> = clauses.iter().filter(|c| c.role == Role::Conclusion && c.status == ClauseStatus::Fail).collect();
    let first_violation = failed_conclusions.iter().filter_map(|c| c.first_violation).reduce(f64::min);
    let verdict = if !hypotheses_hold {
        Verdict::HypothesisNotMet
    } else if failed_conclusions.is_empty() {
        Verdict::Certified
    } else {
        Verdict::ConclusionViolated
    };

    let certificate = Certificate {
        schema: SCHEMA,
        kind,
        problem_digest: spec.digest(),
        thresholds: ThresholdRef {
            config: thr.config.clone(),
            theta: thr.theta(),
            gamma,
            chi: thr.chi(),
            eta: thr.eta(),
            lambda,
            xi,
            kappa,
            g_sup: thr.bounds.g_sup,
            big_delta,
        },
        config: config.clone(),
        inputs: Inputs { sigma, t0, t_end, shape: shape.clone(), delta, scale, d_t0: d0, w_t0: w0 },
        clauses,
        verdict,
        first_violation,
        settling: Settling { nu, time: settle },
        envelope: envelope_record,
        w_monotone_slack: SlackPolicy { abs: MONOTONE_ABS_SLACK, rel_factor: MONOTONE_REL_FACTOR, dt: dt_eff, dx },
        solver: stats,
        files: Vec::new(),
    };
    Ok(CertificateRun { certificate, series, snapshots })
}

fn solver_config(config: &CertifyConfig, t_end: f64) -> SolverConfig {
    SolverConfig { dt: config.dt, t_end, picard_tol: config.picard_tol, picard_max: config.picard_max, max_halvings: config.max_halvings, store_every: 1 }
}

/// What is evaluated along a trajectory besides `d`.
struct Probe {
    params: LiapunovParams,
    chi: f64,
    curve: Option<ComparisonCurve>,
    envelope: Option<Envelope>,
    d0: f64,
    b_table: BTable,
}

struct Traced {
    series: TimeSeries,
    snapshots: Vec<(f64, GridState)>,
    tracker: Tracker,
    solver: RunStats,
}

#[allow(clippy::too_many_arguments)]
fn trace(spec: &ProblemSpec, grid: &Grid, initial: &GridState, t0: f64, solver_cfg: &SolverConfig, probe: Option<&Probe>, sigma: f64, config: &CertifyConfig) -> Result<Traced> {
    let (_, dt_eff) = solver_cfg.steps_from(t0);
    let dx = grid.spacing();
    let mut series = TimeSeries::default();
    let mut snapshots = Vec::new();
    let mut snapshot_times = config.snapshot_times.clone();
    snapshot_times.sort_by(f64::total_cmp);
    let mut next_snapshot = 0;
    let mut track = Tracker::default();
    let stats = integrate_observed(spec, grid, initial, t0, solver_cfg, |_, t, state, _| {
        let (s, y, env) = match probe {
            Some(p) => {
                let s = liapunov::bounds_tabulated(state, t, spec, &p.params, p.chi, grid, &p.b_table)?;
                let y = match p.curve.as_ref().map(|c| c.y(t)) {
                    None => f64::NAN,
                    Some(Ok(y)) => y,
                    Some(Err(Error::ComparisonBlowUp { .. })) => f64::INFINITY,
                    Some(Err(e)) => return Err(e),
                };
                track.observe(t, &s, y, sigma, config.comparison_rel, dt_eff, dx);
                let env = match p.envelope {
                    Some(e) => {
                        let base = (-e.e * (t - t0)).exp() * p.d0;
                        track.envelope(t, s.d, e.d * base, e.d_printed_exponent * base);
                        e.d * base
                    }
                    None => f64::NAN,
                };
                (s, y, env)
            }
            None => {
                let d = d_norm(state, t, spec, grid)?;
                (liapunov::Sandwich { d, lower: f64::NAN, w: f64::NAN, upper: f64::NAN }, f64::NAN, f64::NAN)
            }
        };
        while next_snapshot < snapshot_times.len() && t >= snapshot_times[next_snapshot] {
            snapshots.push((t, state.clone()));
            next_snapshot += 1;
        }
        series.t.push(t);
        series.d.push(s.d);
        series.w.push(s.w);
        series.lower.push(s.lower);
        series.upper.push(s.upper);
        series.y.push(y);
        series.envelope.push(env);
        Ok(())
    })?;
    Ok(Traced { series, snapshots, tracker: track, solver: stats })
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub series: TimeSeries,
    pub snapshots: Vec<(f64, GridState)>,
    pub solver: RunStats,
    /// Radius used for `γ₃`, `λ` and `y` when thresholds were available.
    pub sigma: Option<f64>,
}

/// Integrates unscaled initial data on `[t₀, t_end]`. With thresholds the
/// series also carries `W`, its bounds, `y` and the envelope at
/// `σ = xi_fraction · ξ`; without them only `d` is filled.
pub fn simulate(spec: &ProblemSpec, thr: Option<&Thresholds>, shape: &Shape, t0: f64, t_end: f64, config: &CertifyConfig) -> Result<Simulation> {
    let grid = Grid::new(config.n_interior)?;
    let initial = shape.sample(&grid)?;
    let solver_cfg = solver_config(config, t_end);
    let sigma = thr.and_then(|t| t.xi().ok().map(|xi| t.config.xi_fraction * xi));
    let probe = match (thr, sigma) {
        (Some(thr), Some(sigma)) => {
            let params = LiapunovParams::new(thr.gamma.gamma3(sigma), thr.theta())?;
            let w0 = liapunov::w(&initial, t0, spec, &params, &grid)?;
            let d0 = d_norm(&initial, t0, spec, &grid)?;
            let span = (t_end - t0).max(config.dt);
            let curve = thr.comparison(t0, w0, sigma, span, config.dt.min(span)).ok();
            let envelope = thr.decay_envelope(t0, w0).ok();
            let b_table = BTable::new(spec, sigma.max(d0), B_TABLE_NODES)?;
            Some(Probe { params, chi: thr.chi(), curve, envelope, d0, b_table })
        }
        _ => None,
    };
    let traced = trace(spec, &grid, &initial, t0, &solver_cfg, probe.as_ref(), sigma.unwrap_or(f64::INFINITY), config)?;
    Ok(Simulation { series: traced.series, snapshots: traced.snapshots, solver: traced.solver, sigma: probe.as_ref().and(sigma) })
}

/// Running extrema of the conclusion checks.
struct Tracker {
    max_d: f64,
    d_violation: Option<f64>,
    prev_w: Option<f64>,
    monotone_margin: f64,
    monotone_violation: Option<f64>,
    comparison_margin: f64,
    comparison_violation: Option<f64>,
    worst_ratio: f64,
    worst_ratio_printed: f64,
    envelope_violation: Option<f64>,
}

impl Default for Tracker {
    fn default() -> Self {
        Tracker {
            max_d: 0.0,
            d_violation: None,
            prev_w: None,
            monotone_margin: f64::INFINITY,
            monotone_violation: None,
            comparison_margin: f64::INFINITY,
            comparison_violation: None,
            worst_ratio: 0.0,
            worst_ratio_printed: 0.0,
            envelope_violation: None,
        }
    }
}

impl Tracker {
    #[allow(clippy::too_many_arguments)]
    fn observe(&mut self, t: f64, s: &liapunov::Sandwich, y: f64, sigma: f64, rel: f64, dt: f64, dx: f64) {
        self.max_d = self.max_d.max(s.d);
        if s.d >= sigma && self.d_violation.is_none() {
            self.d_violation = Some(t);
        }
        if let Some(prev) = self.prev_w {
            let m = prev + liapunov::monotone_slack(prev, dt, dx) - s.w;
            self.monotone_margin = self.monotone_margin.min(m);
            if m < 0.0 && self.monotone_violation.is_none() {
                self.monotone_violation = Some(t);
            }
        }
        self.prev_w = Some(s.w);
        if y.is_finite() {
            let m = y * (1.0 + rel) - s.w;
            self.comparison_margin = self.comparison_margin.min(m);
            if m < 0.0 && self.comparison_violation.is_none() {
                self.comparison_violation = Some(t);
            }
        }
    }

    fn envelope(&mut self, t: f64, d: f64, bound: f64, bound_printed: f64) {
        let ratio = |b: f64| if d == 0.0 { 0.0 } else { d / b };
        let r = ratio(bound);
        self.worst_ratio = self.worst_ratio.max(r);
        self.worst_ratio_printed = self.worst_ratio_printed.max(ratio(bound_printed));
        if r > 1.0 && self.envelope_violation.is_none() {
            self.envelope_violation = Some(t);
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepItem {
    pub sigma: f64,
    pub t0: f64,
    pub shape: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Stability certificates over `sigmas × t0s × shapes`, run concurrently;
/// items come back in that lexicographic order and a failing item records
/// its error instead of aborting the sweep.
pub fn sweep(thr: &Thresholds, sigmas: &[f64], t0s: &[f64], shapes: &[Shape], config: &CertifyConfig) -> Vec<SweepItem> {
    let mut jobs = Vec::new();
    for &sigma in sigmas {
        for &t0 in t0s {
            for k in 0..shapes.len() {
                jobs.push((sigma, t0, k));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(sigma, t0, k)| match certify_stability(thr, sigma, t0, &shapes[k], config) {
            Ok(run) => SweepItem { sigma, t0, shape: k, certificate: Some(run.certificate), error: None },
            Err(e) => SweepItem { sigma, t0, shape: k, certificate: None, error: Some(e.to_string()) },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ProblemSource, ProblemSpec};

    fn p1() -> Thresholds {
        let spec = ProblemSpec::new(ProblemSource::constant(1.0, 2.0, 1.0, "0", "0")).unwrap();
        Thresholds::new(&spec, ThresholdConfig::default()).unwrap()
    }

    fn short() -> CertifyConfig {
        CertifyConfig { n_interior: 63, dt: 0.02, horizon: Some(20.0), ..CertifyConfig::default() }
    }

    fn series(d: &[f64]) -> TimeSeries {
        TimeSeries { t: (0..d.len()).map(|k| k as f64).collect(), d: d.to_vec(), ..TimeSeries::default() }
    }

    #[test]
    fn settling_edge_cases() {
        let s = series(&[1.0, 0.8, 0.4, 0.6, 0.2, 0.1]);
        assert_eq!(measure_settling(&s, 2.0), Extended::Finite(0.0));
        assert_eq!(measure_settling(&s, 0.5), Extended::Finite(4.0));
        assert_eq!(measure_settling(&s, 0.0), Extended::Infinite);
        assert_eq!(measure_settling(&s, 0.05), Extended::Infinite);
    }

    #[test]
    fn p1_short_run_certifies() {
        let thr = p1();
        let run = certify_stability(&thr, 0.5, 0.0, &Shape::sine(), &short()).unwrap();
        let c = &run.certificate;
        assert_eq!(c.verdict, Verdict::Certified, "{:#?}", c.clauses);
        assert!((c.inputs.d_t0 - 0.9 * c.inputs.delta).abs() < 1e-12 * c.inputs.delta);
        assert_eq!(c.schema, SCHEMA);
        assert_eq!(run.series.len(), c.solver.steps + 1);
        assert!(c.clause("exponential_envelope").unwrap().status == ClauseStatus::Pass);
    }

    #[test]
    fn oversized_data_is_a_hypothesis_failure() {
        let thr = p1();
        let cfg = CertifyConfig { d_t0: Some(1.0), ..short() };
        let c = certify_stability(&thr, 0.5, 0.0, &Shape::sine(), &cfg).unwrap().certificate;
        assert_eq!(c.clause("d_t0").unwrap().status, ClauseStatus::Fail);
        assert_eq!(c.verdict, Verdict::HypothesisNotMet);
        assert_eq!(c.clause("d_below_sigma").unwrap().status, ClauseStatus::Fail);
        assert_eq!(c.clause("d_below_sigma").unwrap().first_violation, Some(0.0));
    }

    #[test]
    fn sigma_beyond_xi_is_rejected() {
        assert!(matches!(certify_stability(&p1(), 1.0, 0.0, &Shape::sine(), &short()), Err(Error::Precondition(_))));
    }

    #[test]
    fn zero_data_passes_trivially() {
        let c = certify_exponential(&p1(), 0.0, &Shape::new("0", "0"), &short()).unwrap().certificate;
        assert_eq!(c.verdict, Verdict::Certified);
        assert_eq!(c.clause("settling").unwrap().status, ClauseStatus::NotApplicable);
        assert_eq!(c.envelope.unwrap().worst_ratio, 0.0);
    }

    #[test]
    fn snapshots_are_taken() {
        let cfg = CertifyConfig { snapshot_times: vec![5.0, 0.0], ..short() };
        let run = certify_stability(&p1(), 0.5, 0.0, &Shape::sine(), &cfg).unwrap();
        let times: Vec<f64> = run.snapshots.iter().map(|(t, _)| *t).collect();
        assert_eq!(times.len(), 2);
        assert_eq!(times[0], 0.0);
        assert!(times[1] >= 5.0 && times[1] < 5.0 + 0.03);
    }

    #[test]
    fn sweep_matches_single_runs() {
        let thr = p1();
        let cfg = short();
        assert!(sweep(&thr, &[], &[0.0], &[Shape::sine()], &cfg).is_empty());
        let items = sweep(&thr, &[0.1, 0.3, 0.5, 2.0], &[0.0], &[Shape::sine()], &cfg);
        assert_eq!(items.len(), 4);
        let single = certify_stability(&thr, 0.3, 0.0, &Shape::sine(), &cfg).unwrap().certificate;
        assert_eq!(items[1].certificate.as_ref().unwrap(), &single);
        let deltas: Vec<f64> = items[..3].iter().map(|i| i.certificate.as_ref().unwrap().inputs.delta).collect();
        assert!(deltas[0] < deltas[1] && deltas[1] < deltas[2]);
        assert!(items[3].error.is_some());
    }
}
