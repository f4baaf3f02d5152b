//! Uniform grid on `[0, π]`, discrete derivatives, quadrature and the
//! time-weighted energy norm `d`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::quad::simpson_uniform;

/// Uniform grid with `n_interior` unknowns and Dirichlet nodes at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_interior: usize,
    spacing: f64,
}

impl Grid {
    pub const DEFAULT_INTERIOR: usize = 199;

    /// `n_interior + 1` must be even so composite Simpson covers the grid.
    pub fn new(n_interior: usize) -> Result<Grid> {
        if n_interior < 3 {
            return Err(Error::InvalidGrid(format!("n_interior = {n_interior} < 3")));
        }
        if !(n_interior + 1).is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n_interior + 1 = {} must be even", n_interior + 1)));
        }
        Ok(Grid { n_interior, spacing: PI / (n_interior + 1) as f64 })
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    /// Total node count including the two boundary nodes.
    pub fn len(&self) -> usize {
        self.n_interior + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_interior + 1 {
            PI
        } else {
            i as f64 * self.spacing
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.x(i))).collect()
    }

    fn check_len(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), actual: s.len() });
        }
        Ok(())
    }

    /// First derivative. Fourth-order central differences in the interior,
    /// fourth-order one-sided stencils on the two nodes nearest each end;
    /// grids with fewer than seven nodes fall back to second order.
    pub fn dx(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check_len(s)?;
        let n = s.len();
        let h = self.spacing;
        let mut out = vec![0.0; n];
        if n < 7 {
            for i in 1..n - 1 {
                out[i] = (s[i + 1] - s[i - 1]) / (2.0 * h);
            }
            out[0] = (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * h);
            out[n - 1] = (3.0 * s[n - 1] - 4.0 * s[n - 2] + s[n - 3]) / (2.0 * h);
            return Ok(out);
        }
        let c = 1.0 / (12.0 * h);
        for i in 2..n - 2 {
            out[i] = (s[i - 2] - 8.0 * s[i - 1] + 8.0 * s[i + 1] - s[i + 2]) * c;
        }
        out[0] = (-25.0 * s[0] + 48.0 * s[1] - 36.0 * s[2] + 16.0 * s[3] - 3.0 * s[4]) * c;
        out[1] = (-3.0 * s[0] - 10.0 * s[1] + 18.0 * s[2] - 6.0 * s[3] + s[4]) * c;
        let m = n - 1;
        out[m] = (25.0 * s[m] - 48.0 * s[m - 1] + 36.0 * s[m - 2] - 16.0 * s[m - 3] + 3.0 * s[m - 4]) * c;
        out[m - 1] = (3.0 * s[m] + 10.0 * s[m - 1] - 18.0 * s[m - 2] + 6.0 * s[m - 3] - s[m - 4]) * c;
        Ok(out)
    }

    /// Second derivative, same stencil layout as [`Grid::dx`].
    pub fn dxx(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check_len(s)?;
        let n = s.len();
        let h2 = self.spacing * self.spacing;
        let mut out = vec![0.0; n];
        if n < 7 {
            for i in 1..n - 1 {
                out[i] = (s[i - 1] - 2.0 * s[i] + s[i + 1]) / h2;
            }
            out[0] = (2.0 * s[0] - 5.0 * s[1] + 4.0 * s[2] - s[3]) / h2;
            out[n - 1] = (2.0 * s[n - 1] - 5.0 * s[n - 2] + 4.0 * s[n - 3] - s[n - 4]) / h2;
            return Ok(out);
        }
        let c = 1.0 / (12.0 * h2);
        for i in 2..n - 2 {
            out[i] = (-s[i - 2] + 16.0 * s[i - 1] - 30.0 * s[i] + 16.0 * s[i + 1] - s[i + 2]) * c;
        }
        let m = n - 1;
        out[0] = (45.0 * s[0] - 154.0 * s[1] + 214.0 * s[2] - 156.0 * s[3] + 61.0 * s[4] - 10.0 * s[5]) * c;
        out[1] = (10.0 * s[0] - 15.0 * s[1] - 4.0 * s[2] + 14.0 * s[3] - 6.0 * s[4] + s[5]) * c;
        out[m] = (45.0 * s[m] - 154.0 * s[m - 1] + 214.0 * s[m - 2] - 156.0 * s[m - 3] + 61.0 * s[m - 4] - 10.0 * s[m - 5]) * c;
        out[m - 1] = (10.0 * s[m] - 15.0 * s[m - 1] - 4.0 * s[m - 2] + 14.0 * s[m - 3] - 6.0 * s[m - 4] + s[m - 5]) * c;
        Ok(out)
    }

    /// Composite Simpson over all nodes.
    pub fn integrate(&self, s: &[f64]) -> Result<f64> {
        self.check_len(s)?;
        Ok(simpson_uniform(s, self.spacing))
    }

    /// `d(φ, ψ)` for a given weight `ε`:
    /// `d² = ∫ (ε² φ_xx² + φ_x² + φ² + ψ²) dx`.
    pub fn d_norm_weighted(&self, state: &GridState, eps: f64) -> Result<f64> {
        let ux = self.dx(&state.u)?;
        let uxx = self.dxx(&state.u)?;
        Ok(self.d_norm_from_parts(state, &ux, &uxx, eps))
    }

    pub(crate) fn d_norm_from_parts(&self, state: &GridState, ux: &[f64], uxx: &[f64], eps: f64) -> f64 {
        let e2 = eps * eps;
        let integrand: Vec<f64> = (0..self.len())
            .map(|i| e2 * uxx[i] * uxx[i] + ux[i] * ux[i] + state.u[i] * state.u[i] + state.v[i] * state.v[i])
            .collect();
        simpson_uniform(&integrand, self.spacing).max(0.0).sqrt()
    }

    /// `∫φ_x² / ∫φ²`; `+∞` when the denominator underflows.
    pub fn poincare_ratio(&self, phi: &[f64]) -> Result<f64> {
        self.check_len(phi)?;
        let n = phi.len();
        if phi[0].abs() > 1e-12 || phi[n - 1].abs() > 1e-12 {
            return Err(Error::Precondition("poincare_ratio needs phi = 0 at both ends".into()));
        }
        let px = self.dx(phi)?;
        let num: Vec<f64> = px.iter().map(|p| p * p).collect();
        let den: Vec<f64> = phi.iter().map(|p| p * p).collect();
        let den = self.integrate(&den)?;
        if den < 1e-300 {
            return Ok(f64::INFINITY);
        }
        Ok(self.integrate(&num)? / den)
    }
}

/// `d(φ, ψ, t)` with `ε(t)` taken from the problem.
pub fn d_norm(state: &GridState, t: f64, spec: &ProblemSpec, grid: &Grid) -> Result<f64> {
    grid.d_norm_weighted(state, spec.eps(t)?)
}

/// Discrete pair `(u, v ≈ u_t)`; both vanish on the boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl GridState {
    const BOUNDARY_TOL: f64 = 1e-12;

    /// Validates lengths and boundary values; boundary entries within
    /// `1e-12` of zero are snapped to exactly zero.
    pub fn new(mut u: Vec<f64>, mut v: Vec<f64>, grid: &Grid) -> Result<GridState> {
        grid.check_len(&u)?;
        grid.check_len(&v)?;
        let last = grid.len() - 1;
        for (name, s) in [("u", &mut u), ("v", &mut v)] {
            for i in [0, last] {
                if s[i].abs() > Self::BOUNDARY_TOL {
                    return Err(Error::IncompatibleInitialData(format!("{name} = {} at boundary node {i}", s[i])));
                }
                s[i] = 0.0;
            }
        }
        Ok(GridState { u, v })
    }

    pub fn zero(grid: &Grid) -> GridState {
        GridState { u: vec![0.0; grid.len()], v: vec![0.0; grid.len()] }
    }

    pub fn from_fns(grid: &Grid, u: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64) -> Result<GridState> {
        GridState::new(grid.sample(u), grid.sample(v), grid)
    }

    pub fn scaled(&self, c: f64) -> GridState {
        GridState { u: self.u.iter().map(|x| c * x).collect(), v: self.v.iter().map(|x| c * x).collect() }
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(2).is_err());
        assert!(Grid::new(4).is_err());
        assert!(Grid::new(3).is_ok());
        let g = Grid::new(9).unwrap();
        assert!(matches!(g.dx(&[0.0; 3]), Err(Error::LengthMismatch { expected: 11, actual: 3 })));
    }

    #[test]
    fn derivatives_of_sine_converge() {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for n in [49, 99, 199] {
            let g = Grid::new(n).unwrap();
            let s = g.sample(f64::sin);
            let e1 = max_err(&g.dx(&s).unwrap(), &g.sample(f64::cos));
            let e2 = max_err(&g.dxx(&s).unwrap(), &g.sample(|x| -x.sin()));
            let h2 = g.spacing().powi(2);
            assert!(e1 < h2 && e2 < h2, "n={n}: {e1} {e2}");
            assert!(e1 < prev.0 / 8.0 && e2 < prev.1 / 8.0);
            prev = (e1, e2);
        }
    }

    #[test]
    fn derivatives_of_parabola() {
        let g = Grid::new(199).unwrap();
        let s = g.sample(|x| x * (PI - x));
        assert!(max_err(&g.dxx(&s).unwrap(), &vec![-2.0; g.len()]) < 1e-8);
        assert!(max_err(&g.dx(&s).unwrap(), &g.sample(|x| PI - 2.0 * x)) < 1e-9);
        let zero = vec![0.0; g.len()];
        assert_eq!(g.dx(&zero).unwrap(), zero);
        assert_eq!(g.dxx(&zero).unwrap(), zero);
    }

    #[test]
    fn small_grid_second_order_fallback() {
        let g = Grid::new(3).unwrap();
        let s = g.sample(|x| x * (PI - x));
        assert!(max_err(&g.dxx(&s).unwrap(), &[-2.0; 5]) < 1e-12);
    }

    #[test]
    fn simpson_integrals() {
        let g = Grid::new(199).unwrap();
        assert!((g.integrate(&g.sample(f64::sin)).unwrap() - 2.0).abs() < 10.0 * g.spacing().powi(4));
        assert!((g.integrate(&vec![1.0; g.len()]).unwrap() - PI).abs() < 1e-12);
        assert!((g.integrate(&g.sample(|x| x.sin().powi(2))).unwrap() - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let g = Grid::new(15).unwrap();
        let s = g.sample(|x| 1.0 - 2.0 * x + 0.5 * x * x - 0.3 * x.powi(3));
        let exact = PI - PI * PI + PI.powi(3) / 6.0 - 0.3 * PI.powi(4) / 4.0;
        assert!((g.integrate(&s).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn norm_of_first_mode() {
        let g = Grid::new(199).unwrap();
        let st = GridState::from_fns(&g, f64::sin, |_| 0.0).unwrap();
        assert!((g.d_norm_weighted(&st, 0.0).unwrap() - PI.sqrt()).abs() < 1e-6);
        assert!((g.d_norm_weighted(&st, 1.0).unwrap() - (1.5 * PI).sqrt()).abs() < 1e-6);
        assert_eq!(g.d_norm_weighted(&GridState::zero(&g), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn poincare_examples() {
        let g = Grid::new(199).unwrap();
        assert!((g.poincare_ratio(&g.sample(f64::sin)).unwrap() - 1.0).abs() < 1e-6);
        assert!((g.poincare_ratio(&g.sample(|x| (2.0 * x).sin())).unwrap() - 4.0).abs() < 1e-5);
        let r = g.poincare_ratio(&g.sample(|x| x.sin() + (3.0 * x).sin())).unwrap();
        assert!((r - 5.0).abs() < 1e-5);
        assert_eq!(g.poincare_ratio(&vec![0.0; g.len()]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn state_boundary_validation() {
        let g = Grid::new(9).unwrap();
        assert!(GridState::from_fns(&g, |x| x, |_| 0.0).is_err());
        let st = GridState::from_fns(&g, f64::sin, |_| 0.0).unwrap();
        assert_eq!(st.u[g.len() - 1], 0.0);
    }

    fn fourier(coeffs: &[f64], x: f64) -> f64 {
        coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * x).sin()).sum()
    }

    proptest! {
        #[test]
        fn pointwise_bounded_by_norm(a in prop::collection::vec(-1.0..1.0f64, 1..8),
                                     b in prop::collection::vec(-1.0..1.0f64, 1..8),
                                     eps in 0.0..2.0f64) {
            let g = Grid::new(199).unwrap();
            let st = GridState::from_fns(&g, |x| fourier(&a, x), |x| fourier(&b, x)).unwrap();
            let d = g.d_norm_weighted(&st, eps).unwrap();
            let slack = 10.0 * g.spacing().powi(2);
            let ux = g.dx(&st.u).unwrap();
            prop_assert!(st.max_abs_u() <= d + slack);
            prop_assert!(eps * ux.iter().fold(0.0f64, |m, x| m.max(x.abs())) <= d + slack);
        }

        #[test]
        fn norm_monotone_in_eps(a in prop::collection::vec(-1.0..1.0f64, 1..8), e1 in 0.0..2.0f64, de in 0.0..2.0f64) {
            let g = Grid::new(99).unwrap();
            let st = GridState::from_fns(&g, |x| fourier(&a, x), |_| 0.0).unwrap();
            prop_assert!(g.d_norm_weighted(&st, e1 + de).unwrap() >= g.d_norm_weighted(&st, e1).unwrap());
        }
    }
}
