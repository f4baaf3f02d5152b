//! Method-of-lines integration of
//!
//! ```text
//! u_t = v
//! v_t = ε(t) v_xx + C(t) u_xx - (a' + a) v + F(u)
//! ```
//!
//! with the trapezoidal rule. Substituting `u¹ = u⁰ + Δt/2 (v⁰ + v¹)` leaves
//! one tridiagonal system per step for `v¹`:
//!
//! ```text
//! [1 + Δt/2 (a' + a¹)] v¹ - Δt/2 (ε¹ + C¹Δt/2) L v¹
//!     = v⁰ + Δt/2 [ε⁰Lv⁰ + C⁰Lu⁰ - (a' + a⁰)v⁰ + F(u⁰)] + Δt/2 [C¹(Lu⁰ + Δt/2 Lv⁰) + F(u¹)]
//! ```
//!
//! where `L` is the three-point Laplacian. `a¹` and `F(u¹)` are resolved by
//! Picard sweeps; a step whose sweeps stall is retried as two half steps.

pub mod exact;
pub mod tridiag;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exprlang::{ExprError, Formula};
use crate::grid::{Grid, GridState};
use crate::problem::ProblemSpec;

pub use exact::ExactSeparable;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    /// How many times a stalled step may be split in half.
    pub max_halvings: u32,
    /// Keep every `store_every`-th state in a [`Trajectory`].
    pub store_every: usize,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> SolverConfig {
        SolverConfig { dt, t_end, picard_tol: 1e-10, picard_max: 50, max_halvings: 8, store_every: 1 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Precondition(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.picard_tol > 0.0) || self.picard_max == 0 || self.store_every == 0 {
            return Err(Error::Precondition("picard_tol, picard_max and store_every must be positive".into()));
        }
        Ok(())
    }

    /// Number of uniform steps covering `[t0, t_end]` and the step actually used.
    pub fn steps_from(&self, t0: f64) -> (usize, f64) {
        let span = self.t_end - t0;
        if span <= 0.0 {
            return (0, self.dt);
        }
        let n = ((span / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, span / n as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub iterations: usize,
    /// Max-norm change in the last Picard sweep.
    pub residual: f64,
    pub halvings: u32,
}

/// One trapezoidal step from `(state, t)` to `t + dt`.
pub fn step(state: &GridState, t: f64, dt: f64, spec: &ProblemSpec, grid: &Grid, config: &SolverConfig) -> Result<(GridState, StepStats)> {
    let mut ws = Workspace::new(grid);
    ws.step(state, t, dt, spec, grid, config, 0, 0)
}

/// Scratch buffers reused across steps.
struct Workspace {
    lu0: Vec<f64>,
    lv0: Vec<f64>,
    base: Vec<f64>,
    diag: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
    damping: Vec<f64>,
}

impl Workspace {
    fn new(grid: &Grid) -> Workspace {
        let n = grid.len();
        let m = grid.n_interior();
        Workspace {
            lu0: vec![0.0; n],
            lv0: vec![0.0; n],
            base: vec![0.0; n],
            diag: vec![0.0; m],
            rhs: vec![0.0; m],
            scratch: vec![0.0; m],
            damping: vec![0.0; n],
        }
    }

    /// `a` at every node for the state `(u, v)` at time `t`.
    fn fill_damping(&mut self, u: &[f64], v: &[f64], t: f64, spec: &ProblemSpec, grid: &Grid) -> Result<()> {
        let f = spec.damping_formula();
        if f.is_constant() {
            let a = f.eval(&[0.0; 6])?;
            self.damping.iter_mut().for_each(|d| *d = a);
            return Ok(());
        }
        let (ux, uxx) = if spec.damping_is_state_free() { (vec![0.0; u.len()], vec![0.0; u.len()]) } else { (grid.dx(u)?, grid.dxx(u)?) };
        for i in 0..u.len() {
            self.damping[i] = spec.damping(grid.x(i), t, u[i], ux[i], v[i], uxx[i])?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn step(&mut self, s0: &GridState, t: f64, dt: f64, spec: &ProblemSpec, grid: &Grid, cfg: &SolverConfig, index: usize, depth: u32) -> Result<(GridState, StepStats)> {
        match self.try_step(s0, t, dt, spec, grid, cfg, index) {
            Ok(r) => Ok(r),
            Err(Error::PicardNonConvergence { .. }) if depth < cfg.max_halvings => {
                let (mid, a) = self.step(s0, t, 0.5 * dt, spec, grid, cfg, index, depth + 1)?;
                let (end, b) = self.step(&mid, t + 0.5 * dt, 0.5 * dt, spec, grid, cfg, index, depth + 1)?;
                let stats = StepStats { iterations: a.iterations + b.iterations, residual: a.residual.max(b.residual), halvings: 1 + a.halvings.max(b.halvings) };
                Ok((end, stats))
            }
            Err(e) => Err(e),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn try_step(&mut self, s0: &GridState, t: f64, dt: f64, spec: &ProblemSpec, grid: &Grid, cfg: &SolverConfig, index: usize) -> Result<(GridState, StepStats)> {
        let n = grid.len();
        let m = grid.n_interior();
        let h2 = grid.spacing() * grid.spacing();
        let half = 0.5 * dt;
        let t1 = t + dt;
        let (eps0, c0) = (spec.eps(t)?, spec.c(t)?);
        let (eps1, c1) = (spec.eps(t1)?, spec.c(t1)?);
        let ap = spec.a_prime;
        let (u0, v0) = (&s0.u, &s0.v);

        laplacian(u0, h2, &mut self.lu0);
        laplacian(v0, h2, &mut self.lv0);
        self.fill_damping(u0, v0, t, spec, grid)?;
        for i in 1..n - 1 {
            let explicit = eps0 * self.lv0[i] + c0 * self.lu0[i] - (ap + self.damping[i]) * v0[i] + forcing(spec, u0[i], index, t)?;
            self.base[i] = v0[i] + half * explicit + half * c1 * (self.lu0[i] + half * self.lv0[i]);
        }

        let beta = half * (eps1 + c1 * half);
        let off = -beta / h2;
        let single_solve = spec.forcing_formula().is_constant() && spec.damping_is_state_free();
        // Predictor: the right-hand side without the implicit terms.
        let mut v1 = self.base.clone();
        v1[0] = 0.0;
        v1[n - 1] = 0.0;
        let mut u1: Vec<f64> = (0..n).map(|i| u0[i] + half * (v0[i] + v1[i])).collect();
        let mut stats = StepStats::default();
        loop {
            stats.iterations += 1;
            self.fill_damping(&u1, &v1, t1, spec, grid)?;
            for k in 0..m {
                let i = k + 1;
                self.diag[k] = 1.0 + half * (ap + self.damping[i]) + 2.0 * beta / h2;
                self.rhs[k] = self.base[i] + half * forcing(spec, u1[i], index, t1)?;
            }
            tridiag::solve_symmetric_offdiag(&self.diag, off, &mut self.rhs, &mut self.scratch);
            let mut change = 0.0_f64;
            for k in 0..m {
                let i = k + 1;
                let nv = self.rhs[k];
                let nu = u0[i] + half * (v0[i] + nv);
                change = change.max((nv - v1[i]).abs()).max((nu - u1[i]).abs());
                v1[i] = nv;
                u1[i] = nu;
            }
            stats.residual = change;
            if !change.is_finite() {
                return Err(Error::NonFinite { step: index, time: t1 });
            }
            if single_solve || change <= cfg.picard_tol {
                break;
            }
            if stats.iterations >= cfg.picard_max {
                return Err(Error::PicardNonConvergence { step: index, time: t1 });
            }
        }
        // Subnormal values only arise once the solution has decayed below
        // f64::MIN_POSITIVE; flushing them keeps long runs from slowing down.
        for x in u1.iter_mut().chain(v1.iter_mut()) {
            if x.abs() < f64::MIN_POSITIVE {
                *x = 0.0;
            }
        }
        let out = GridState { u: u1, v: v1 };
        if !out.is_finite() {
            return Err(Error::NonFinite { step: index, time: t1 });
        }
        Ok((out, stats))
    }
}

/// Forcing evaluation inside a step; overflow means the solution blew up.
fn forcing(spec: &ProblemSpec, z: f64, step: usize, time: f64) -> Result<f64> {
    match spec.f(z) {
        Err(Error::Expr(ExprError::Overflow { .. })) => Err(Error::NonFinite { step, time }),
        other => other,
    }
}

/// Three-point Laplacian at interior nodes; boundary entries set to zero.
fn laplacian(s: &[f64], h2: f64, out: &mut [f64]) {
    let n = s.len();
    out[0] = 0.0;
    out[n - 1] = 0.0;
    for i in 1..n - 1 {
        out[i] = (s[i - 1] - 2.0 * s[i] + s[i + 1]) / h2;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub dt: f64,
    pub max_iterations: usize,
    pub max_residual: f64,
    pub halved_steps: usize,
}

/// Integrates from `(initial, t0)` to `config.t_end`, calling `observe` with
/// the step index, time and state at `t0` and after every step.
pub fn integrate_observed(
    spec: &ProblemSpec,
    grid: &Grid,
    initial: &GridState,
    t0: f64,
    config: &SolverConfig,
    mut observe: impl FnMut(usize, f64, &GridState, &StepStats) -> Result<()>,
) -> Result<RunStats> {
    config.validate()?;
    let (steps, dt) = config.steps_from(t0);
    let mut ws = Workspace::new(grid);
    let mut state = initial.clone();
    let mut run = RunStats { steps, dt, ..RunStats::default() };
    observe(0, t0, &state, &StepStats::default())?;
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let (next, stats) = ws.step(&state, t, dt, spec, grid, config, k + 1, 0)?;
        run.max_iterations = run.max_iterations.max(stats.iterations);
        run.max_residual = run.max_residual.max(stats.residual);
        run.halved_steps += usize::from(stats.halvings > 0);
        state = next;
        let t_next = if k + 1 == steps { config.t_end } else { t0 + (k + 1) as f64 * dt };
        observe(k + 1, t_next, &state, &stats)?;
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridState>,
    pub stats: Vec<StepStats>,
    pub run: RunStats,
}

impl Trajectory {
    pub fn last(&self) -> Option<(f64, &GridState)> {
        Some((*self.times.last()?, self.states.last()?))
    }
}

/// Samples `u0`, `u1` (expressions in `x`) and checks the compatibility
/// conditions `u0 = u1 = 0` at both ends.
pub fn initial_state(u0: &Formula, u1: &Formula, grid: &Grid) -> Result<GridState> {
    for (name, f) in [("u0", u0), ("u1", u1)] {
        for x in [0.0, std::f64::consts::PI] {
            let v = f.eval1(x)?;
            if v.abs() > 1e-12 {
                return Err(Error::IncompatibleInitialData(format!("{name}({x}) = {v} != 0")));
            }
        }
    }
    let u = grid.nodes().iter().map(|&x| u0.eval1(x)).collect::<Result<Vec<_>, _>>()?;
    let v = grid.nodes().iter().map(|&x| u1.eval1(x)).collect::<Result<Vec<_>, _>>()?;
    GridState::new(u, v, grid)
}

/// Integrates from expression initial data, keeping every
/// `config.store_every`-th state (and always the last one).
pub fn integrate(spec: &ProblemSpec, u0: &Formula, u1: &Formula, t0: f64, grid: &Grid, config: &SolverConfig) -> Result<Trajectory> {
    let initial = initial_state(u0, u1, grid)?;
    integrate_state(spec, &initial, t0, grid, config)
}

pub fn integrate_state(spec: &ProblemSpec, initial: &GridState, t0: f64, grid: &Grid, config: &SolverConfig) -> Result<Trajectory> {
    let (steps, _) = config.steps_from(t0);
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new(), stats: Vec::new(), run: RunStats::default() };
    traj.run = integrate_observed(spec, grid, initial, t0, config, |k, t, s, st| {
        if k % config.store_every == 0 || k == steps {
            traj.times.push(t);
            traj.states.push(s.clone());
            traj.stats.push(*st);
        }
        Ok(())
    })?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemSource;

    fn spec(eps: f64, c: f64, ap: f64, f: &str, fz: &str) -> ProblemSpec {
        ProblemSpec::new(ProblemSource::constant(eps, c, ap, f, fz)).unwrap()
    }

    fn x_formula(s: &str) -> Formula {
        Formula::new(s, &["x"]).unwrap()
    }

    fn max_error(spec: &ProblemSpec, n: usize, dt: f64, t_end: f64) -> f64 {
        let grid = Grid::new(n).unwrap();
        let traj = integrate(spec, &x_formula("sin(x)"), &x_formula("0"), 0.0, &grid, &SolverConfig::new(dt, t_end)).unwrap();
        let exact = ExactSeparable::from_spec(spec, 1, 0.0, 1.0, 0.0).unwrap();
        let (t, s) = traj.last().unwrap();
        (0..grid.len()).map(|i| (s.u[i] - exact.eval(grid.x(i), t).0).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_state_is_fixed() {
        let grid = Grid::new(15).unwrap();
        let s = spec(1.0, 2.0, 1.0, "z^3", "3*z^2");
        let (next, _) = step(&GridState::zero(&grid), 0.0, 0.1, &s, &grid, &SolverConfig::new(0.1, 1.0)).unwrap();
        assert_eq!(next, GridState::zero(&grid));
    }

    #[test]
    fn p0_error_bound() {
        let p0 = spec(0.0, 1.0, 0.0, "0", "0");
        let (dt, n) = (0.01, 99);
        let dx = std::f64::consts::PI / (n + 1) as f64;
        assert!(max_error(&p0, n, dt, 1.0) <= 5.0 * (dt * dt + dx * dx));
    }

    #[test]
    fn second_order_on_p2() {
        let p2 = spec(0.5, 1.0, 0.0, "0", "0");
        let e1 = max_error(&p2, 49, 0.04, 1.0);
        let e2 = max_error(&p2, 99, 0.02, 1.0);
        let ratio = e1 / e2;
        assert!((3.6..=4.4).contains(&ratio), "{ratio}");
    }

    #[test]
    fn rejects_incompatible_data() {
        let grid = Grid::new(15).unwrap();
        let r = integrate(&spec(0.0, 1.0, 0.0, "0", "0"), &x_formula("x"), &x_formula("0"), 0.0, &grid, &SolverConfig::new(0.1, 1.0));
        assert!(matches!(r, Err(Error::IncompatibleInitialData(_))));
    }

    #[test]
    fn nonlinear_forcing_converges_and_keeps_boundary() {
        let grid = Grid::new(31).unwrap();
        let s = spec(1.0, 2.0, 1.0, "-sin(z)", "-cos(z)");
        let mut cfg = SolverConfig::new(0.05, 2.0);
        cfg.store_every = 10;
        let traj = integrate(&s, &x_formula("0.5*sin(x)"), &x_formula("0.1*sin(2*x)"), 0.0, &grid, &cfg).unwrap();
        assert_eq!(traj.times.len(), 5);
        for st in &traj.states {
            assert_eq!((st.u[0], st.u[grid.len() - 1], st.v[0], st.v[grid.len() - 1]), (0.0, 0.0, 0.0, 0.0));
        }
        assert!(traj.run.max_iterations > 1 && traj.run.max_residual <= 1e-10);
    }

    #[test]
    fn state_dependent_damping_runs() {
        let grid = Grid::new(31).unwrap();
        let mut src = ProblemSource::constant(0.2, 1.0, 0.1, "0", "0");
        src.a = "ut^2 + 0.1*sin(x)^2".into();
        let s = ProblemSpec::new(src).unwrap();
        let traj = integrate(&s, &x_formula("sin(x)"), &x_formula("0"), 0.0, &grid, &SolverConfig::new(0.05, 1.0)).unwrap();
        assert!(traj.last().unwrap().1.is_finite());
    }

    #[test]
    fn blow_up_is_detected() {
        let grid = Grid::new(15).unwrap();
        let s = spec(0.0, 1.0, 0.0, "z^3", "3*z^2");
        let r = integrate(&s, &x_formula("50*sin(x)"), &x_formula("0"), 0.0, &grid, &SolverConfig::new(0.1, 10.0));
        assert!(matches!(r, Err(Error::NonFinite { .. }) | Err(Error::PicardNonConvergence { .. })), "{r:?}");
    }
}
