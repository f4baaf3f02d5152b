//! The two-parameter Liapunov family `W(·; γ, θ)`, its analytic time
//! derivative, and the bounds `χ d² ≤ W ≤ (1+γ) g B²(d)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridState};
use crate::problem::ProblemSpec;

/// Absolute part of the slack for discrete monotonicity of `W`.
pub const MONOTONE_ABS_SLACK: f64 = 1e-12;
/// Multiplier of `Δt² + Δx²` in the relative part of the slack.
pub const MONOTONE_REL_FACTOR: f64 = 10.0;

/// Allowed increase of `W` between consecutive samples.
pub fn monotone_slack(w: f64, dt: f64, dx: f64) -> f64 {
    MONOTONE_ABS_SLACK + MONOTONE_REL_FACTOR * (dt * dt + dx * dx) * w.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiapunovParams {
    pub gamma: f64,
    pub theta: f64,
}

impl LiapunovParams {
    pub fn new(gamma: f64, theta: f64) -> Result<LiapunovParams> {
        if !(gamma > 0.0 && theta > 0.0) {
            return Err(Error::Precondition(format!("gamma = {gamma} and theta = {theta} must both be positive")));
        }
        Ok(LiapunovParams { gamma, theta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub chi: f64,
    pub eta: f64,
}

impl BoundConstants {
    /// `χ = ½ min{¼, μ + (μ + a' + θ/2) ε̄}`, `η = min{1, 3μ/4}`.
    pub fn new(spec: &ProblemSpec, theta: f64, eps_bar: f64) -> Result<BoundConstants> {
        let mu = spec.constants.mu;
        let chi = 0.5 * f64::min(0.25, mu + (mu + spec.a_prime + 0.5 * theta) * eps_bar);
        if chi <= 0.0 {
            return Err(Error::Assumption(format!("chi = {chi} is not positive")));
        }
        Ok(BoundConstants { chi, eta: f64::min(1.0, 0.75 * mu) })
    }
}

/// Spatial derivatives shared by `W` and `Ẇ`.
struct Fields {
    ux: Vec<f64>,
    uxx: Vec<f64>,
}

fn fields(state: &GridState, grid: &Grid) -> Result<Fields> {
    Ok(Fields { ux: grid.dx(&state.u)?, uxx: grid.dxx(&state.u)? })
}

/// `W = ½∫[γψ² + (εφ_xx − ψ)² + (C(1+γ) + ε(a'+θ) − ε̇)φ_x² + a'θφ² + 2θφψ − 2(1+γ)∫₀^φ F] dx`.
pub fn w(state: &GridState, t: f64, spec: &ProblemSpec, params: &LiapunovParams, grid: &Grid) -> Result<f64> {
    let f = fields(state, grid)?;
    w_from_parts(state, &f.ux, &f.uxx, t, spec, params, grid)
}

pub(crate) fn w_from_parts(
    state: &GridState,
    ux: &[f64],
    uxx: &[f64],
    t: f64,
    spec: &ProblemSpec,
    params: &LiapunovParams,
    grid: &Grid,
) -> Result<f64> {
    let LiapunovParams { gamma, theta } = *params;
    let eps = spec.eps(t)?;
    let coef_x = spec.c(t)? * (1.0 + gamma) + eps * (spec.a_prime + theta) - spec.eps_dot(t)?;
    let ap = spec.a_prime;
    let mut integrand = Vec::with_capacity(grid.len());
    #[allow(clippy::needless_range_loop)]
    for i in 0..grid.len() {
        let (phi, psi) = (state.u[i], state.v[i]);
        let r = eps * uxx[i] - psi;
        integrand.push(
            gamma * psi * psi + r * r + coef_x * ux[i] * ux[i] + ap * theta * phi * phi + 2.0 * theta * phi * psi
                - 2.0 * (1.0 + gamma) * spec.f_integral(phi)?,
        );
    }
    Ok(0.5 * grid.integrate(&integrand)?)
}

/// Analytic `Ẇ` along solutions, with `u_xt` taken as `dx(v)`.
pub fn w_dot_analytic(state: &GridState, t: f64, spec: &ProblemSpec, params: &LiapunovParams, grid: &Grid) -> Result<f64> {
    let LiapunovParams { gamma, theta } = *params;
    let f = fields(state, grid)?;
    let uxt = grid.dx(&state.v)?;
    let eps = spec.eps(t)?;
    let eps_dot = spec.eps_dot(t)?;
    let eps_ddot = spec.eps_ddot(t)?;
    let c = spec.c(t)?;
    let c_dot = spec.c_dot(t)?;
    let ap = spec.a_prime;
    let cm = c - eps_dot;
    if cm < 1e-12 {
        return Err(Error::Assumption(format!("C - eps_dot = {cm} < 1e-12 at t = {t}")));
    }
    let mut integrand = Vec::with_capacity(grid.len());
    #[allow(clippy::needless_range_loop)]
    for i in 0..grid.len() {
        let (u, v, ux, uxx) = (state.u[i], state.v[i], f.ux[i], f.uxx[i]);
        let a = spec.damping(grid.x(i), t, u, ux, v, uxx)?;
        let fu = spec.f(u)?;
        let fz = spec.f_z(u)?;
        let vv = (a + ap) * (1.0 + gamma) - theta - eps * a * a / cm - theta * a * a / c;
        let mixed = a * v / cm - 0.5 * uxx;
        let xx = c * (0.5 * theta - ap) + eps_ddot + cm * (ap + theta) - (1.0 + gamma) * c_dot - 2.0 * eps * fz;
        let shifted = u + 2.0 * a * v / c;
        integrand.push(
            eps * gamma * uxt[i] * uxt[i]
                + vv * v * v
                + eps * cm * mixed * mixed
                + 0.75 * eps * cm * uxx * uxx
                + 0.5 * xx * ux * ux
                + 0.25 * theta * c * (ux * ux - u * u)
                + 0.25 * theta * c * shifted * shifted
                - theta * u * fu,
        );
    }
    Ok(-grid.integrate(&integrand)?)
}

/// `g(t) = C − ε̇/2 + 1`; values `≤ 1` signal a breached assumption.
pub fn g(t: f64, spec: &ProblemSpec) -> Result<f64> {
    let v = spec.g(t)?;
    if v <= 1.0 {
        return Err(Error::Assumption(format!("g({t}) = {v} <= 1")));
    }
    Ok(v)
}

/// `m(r) = max |F_z|` over 2049 samples of `[−r, r]`.
pub fn m(r: f64, spec: &ProblemSpec) -> Result<f64> {
    assert!(r >= 0.0, "m(r) needs r >= 0");
    if spec.forcing_z_formula().is_constant() {
        return Ok(spec.f_z(0.0)?.abs());
    }
    let n = 2049;
    let mut best = 0.0_f64;
    for i in 0..n {
        let z = -r + 2.0 * r * i as f64 / (n - 1) as f64;
        best = best.max(spec.f_z(z)?.abs());
    }
    Ok(best)
}

/// `B(d) = d √(1 + m(d))`.
pub fn b(d: f64, spec: &ProblemSpec) -> Result<f64> {
    Ok(d * (1.0 + m(d, spec)?).sqrt())
}

/// Inverse of `B` by bisection on `[0, y]` (valid since `B(d) ≥ d`).
pub fn b_inverse(y: f64, spec: &ProblemSpec) -> Result<f64> {
    assert!(y >= 0.0, "B^-1 needs y >= 0");
    if y == 0.0 || y.is_infinite() {
        return Ok(y);
    }
    if spec.forcing_z_formula().is_constant() {
        return Ok(y / (1.0 + spec.f_z(0.0)?.abs()).sqrt());
    }
    let (mut lo, mut hi) = (0.0, y);
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if b(mid, spec)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sandwich {
    pub d: f64,
    pub lower: f64,
    pub w: f64,
    pub upper: f64,
}

impl Sandwich {
    /// Whether `lower ≤ w ≤ upper` holds up to `rel` relative slack.
    pub fn holds(&self, rel: f64) -> bool {
        let scale = self.w.abs().max(self.upper.abs()).max(f64::MIN_POSITIVE);
        self.lower - rel * scale <= self.w && self.w <= self.upper + rel * scale
    }
}

/// `(χ d², W, (1+γ) g(t) B²(d))`. The bounds are theorems only for
/// `d ≤ σ < ρ₂`, `θ > θ₂` and `γ ≥ γ₃(σ)`; checking that is the caller's job.
pub fn bounds(state: &GridState, t: f64, spec: &ProblemSpec, params: &LiapunovParams, chi: f64, grid: &Grid) -> Result<Sandwich> {
    bounds_with(state, t, spec, params, chi, grid, |d| b(d, spec))
}

/// [`bounds`] with `B` read from a table.
pub fn bounds_tabulated(state: &GridState, t: f64, spec: &ProblemSpec, params: &LiapunovParams, chi: f64, grid: &Grid, table: &BTable) -> Result<Sandwich> {
    bounds_with(state, t, spec, params, chi, grid, |d| table.b(d, spec))
}

fn bounds_with(
    state: &GridState,
    t: f64,
    spec: &ProblemSpec,
    params: &LiapunovParams,
    chi: f64,
    grid: &Grid,
    b: impl Fn(f64) -> Result<f64>,
) -> Result<Sandwich> {
    let f = fields(state, grid)?;
    let d = grid.d_norm_from_parts(state, &f.ux, &f.uxx, spec.eps(t)?);
    let w = w_from_parts(state, &f.ux, &f.uxx, t, spec, params, grid)?;
    let bd = b(d)?;
    Ok(Sandwich { d, lower: chi * d * d, w, upper: (1.0 + params.gamma) * spec.g(t)? * bd * bd })
}

/// `m` sampled at `r_k = k r_max / n`; `B(d)` uses `m(r_k)` for the first
/// node `r_k ≥ d` and falls back to [`b`] beyond `r_max`. Meant for
/// evaluating the upper bound at every time step.
#[derive(Debug, Clone)]
pub struct BTable {
    step: f64,
    m: Vec<f64>,
}

impl BTable {
    pub fn new(spec: &ProblemSpec, r_max: f64, n: usize) -> Result<BTable> {
        if !(r_max > 0.0) || n == 0 {
            return Err(Error::Precondition(format!("B table needs r_max > 0 and n > 0, got {r_max}, {n}")));
        }
        let step = r_max / n as f64;
        let m = (0..=n).map(|k| m(k as f64 * step, spec)).collect::<Result<_>>()?;
        Ok(BTable { step, m })
    }

    pub fn b(&self, d: f64, spec: &ProblemSpec) -> Result<f64> {
        let k = (d / self.step).ceil();
        if k >= self.m.len() as f64 {
            return b(d, spec);
        }
        Ok(d * (1.0 + self.m[k as usize]).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ProblemSource, ProblemSpec};
    use std::f64::consts::PI;

    fn p1() -> ProblemSpec {
        ProblemSpec::new(ProblemSource::constant(1.0, 2.0, 1.0, "0", "0")).unwrap()
    }

    fn sine(grid: &Grid) -> GridState {
        GridState::from_fns(grid, f64::sin, |_| 0.0).unwrap()
    }

    #[test]
    fn w_hand_value() {
        let grid = Grid::new(199).unwrap();
        let params = LiapunovParams::new(29.0, 3.5).unwrap();
        let w = w(&sine(&grid), 0.0, &p1(), &params, &grid).unwrap();
        assert!((w - PI / 4.0 * 69.0).abs() < 1e-6, "{w}");
    }

    #[test]
    fn table_matches_direct_on_nodes_and_dominates_between() {
        let spec = ProblemSpec::new(ProblemSource::constant(1.0, 2.0, 1.0, "z^3", "3*z^2")).unwrap();
        let table = BTable::new(&spec, 0.5, 100).unwrap();
        assert_eq!(table.b(0.25, &spec).unwrap(), b(0.25, &spec).unwrap());
        for d in [0.0013, 0.1, 0.33, 0.4999] {
            assert!(table.b(d, &spec).unwrap() >= b(d, &spec).unwrap());
            assert!(table.b(d, &spec).unwrap() <= b(d + 0.005, &spec).unwrap());
        }
        assert_eq!(table.b(0.7, &spec).unwrap(), b(0.7, &spec).unwrap());
    }

    #[test]
    fn zero_state() {
        let grid = Grid::new(31).unwrap();
        let params = LiapunovParams::new(2.0, 1.0).unwrap();
        let z = GridState::zero(&grid);
        assert_eq!(w(&z, 0.0, &p1(), &params, &grid).unwrap(), 0.0);
        assert_eq!(w_dot_analytic(&z, 0.0, &p1(), &params, &grid).unwrap(), 0.0);
        let s = bounds(&z, 0.0, &p1(), &params, 0.125, &grid).unwrap();
        assert_eq!((s.lower, s.w, s.upper), (0.0, 0.0, 0.0));
    }

    #[test]
    fn quadratic_when_forcing_vanishes() {
        let grid = Grid::new(63).unwrap();
        let params = LiapunovParams::new(28.0, 3.5).unwrap();
        let s = GridState::from_fns(&grid, |x| x.sin() + 0.3 * (2.0 * x).sin(), |x| 0.2 * (3.0 * x).sin()).unwrap();
        let w1 = w(&s, 0.0, &p1(), &params, &grid).unwrap();
        let w3 = w(&s.scaled(3.0), 0.0, &p1(), &params, &grid).unwrap();
        assert!((w3 - 9.0 * w1).abs() <= 1e-13 * w3.abs());
    }

    #[test]
    fn g_m_b_examples() {
        assert_eq!(g(0.0, &p1()).unwrap(), 3.0);
        let mut src = ProblemSource::constant(1.0, 2.0, 1.0, "0", "0");
        src.c = "2+exp(-t)".into();
        assert!((g(0.0, &ProblemSpec::new(src).unwrap()).unwrap() - 4.0).abs() < 1e-14);
        let src = ProblemSource::constant(1.0, 0.5, 1.0, "0", "0");
        assert!(g(0.0, &ProblemSpec::new(src).unwrap()).is_ok());
        let mut src = ProblemSource::constant(1.0, 0.5, 1.0, "0", "0");
        src.eps = "1 + 2*t".into();
        assert!(g(0.0, &ProblemSpec::new(src).unwrap()).is_err());

        let cubic = ProblemSpec::new(ProblemSource::constant(1.0, 2.0, 1.0, "z^3", "3*z^2")).unwrap();
        assert_eq!(m(2.0, &cubic).unwrap(), 12.0);
        assert_eq!(b(1.0, &cubic).unwrap(), 2.0);
        let cosine = ProblemSpec::new(ProblemSource::constant(1.0, 2.0, 1.0, "-sin(z)", "-cos(z)")).unwrap();
        assert_eq!(m(1.0, &cosine).unwrap(), 1.0);
        assert_eq!(m(5.0, &p1()).unwrap(), 0.0);
        assert_eq!(b(0.3, &p1()).unwrap(), 0.3);
        assert_eq!(b_inverse(0.3, &p1()).unwrap(), 0.3);
        assert!((b_inverse(b(0.7, &cubic).unwrap(), &cubic).unwrap() - 0.7).abs() < 1e-10);
    }

    #[test]
    fn bound_constants_p1() {
        let bc = BoundConstants::new(&p1(), 3.5, 1.0).unwrap();
        assert_eq!(bc, BoundConstants { chi: 0.125, eta: 0.75 });
    }

    #[test]
    fn p1_bounds_at_small_distance() {
        let grid = Grid::new(199).unwrap();
        let params = LiapunovParams::new(29.0, 3.5).unwrap();
        let base = sine(&grid);
        let d0 = grid.d_norm_weighted(&base, 1.0).unwrap();
        let s = bounds(&base.scaled(0.01 / d0), 0.0, &p1(), &params, 0.125, &grid).unwrap();
        assert!((s.d - 0.01).abs() < 1e-15);
        assert!((s.lower - 0.125e-4).abs() < 1e-17);
        assert!((s.upper - 9e-3).abs() < 1e-15);
        assert!(s.holds(1e-6));
    }

    /// With `a = 0`, `F = 0` and constant coefficients the displayed
    /// derivative collapses to `−∫[εγ v_x² + (a'(1+γ) − θ) v² + εC u_xx² + θC u_x²]`.
    #[test]
    fn w_dot_linear_reduction() {
        let grid = Grid::new(127).unwrap();
        let (eps, c, ap, gamma, theta) = (0.7, 2.5, 0.4, 6.0, 1.3);
        let spec = ProblemSpec::new(ProblemSource::constant(eps, c, ap, "0", "0")).unwrap();
        let params = LiapunovParams::new(gamma, theta).unwrap();
        let s = GridState::from_fns(&grid, |x| x.sin() - 0.4 * (2.0 * x).sin(), |x| 0.5 * x.sin() + 0.1 * (3.0 * x).sin()).unwrap();
        let got = w_dot_analytic(&s, 0.0, &spec, &params, &grid).unwrap();
        let ux = grid.dx(&s.u).unwrap();
        let uxx = grid.dxx(&s.u).unwrap();
        let vx = grid.dx(&s.v).unwrap();
        let integrand: Vec<f64> = (0..grid.len())
            .map(|i| {
                let v = s.v[i];
                eps * gamma * vx[i] * vx[i] + (ap * (1.0 + gamma) - theta) * v * v + eps * c * uxx[i] * uxx[i] + theta * c * ux[i] * ux[i]
            })
            .collect();
        let want = -grid.integrate(&integrand).unwrap();
        assert!((got - want).abs() < 1e-10 * want.abs(), "{got} vs {want}");
    }
}
