//! Time integrals along `[t₀, t]` behind `s`, `S`, `G` and the comparison
//! solution `y`:
//!
//! ```text
//! I(t) = ∫_{t₀}^t dτ/g,    J(t) = ∫_{t₀}^t n(τ) e^{-c I(τ)} dτ,    c = ωλ/2
//! s(t) = n g/λ · e^{-c I(t)} + (ω/2) J(t)
//! y(t) = W₀ e^{-λ I(t)} {1 - W₀^{ω/2} (ω/2) J(t)}^{-2/ω}
//! ```

use crate::error::{Error, Result};
use crate::problem::GrowthClass;
use crate::quad::{cumulative_simpson, uniform_even_grid};

/// Inputs needed to evaluate the integrals; `g` and `n` are sampled through
/// the callbacks.
pub struct Integrands<'a> {
    pub g: &'a (dyn Fn(f64) -> Result<f64> + Sync),
    pub n: &'a (dyn Fn(f64) -> Result<f64> + Sync),
    /// `g` and `n` are constant in time.
    pub constant: bool,
    pub lambda: f64,
    pub omega: f64,
}

impl Integrands<'_> {
    pub fn c(&self) -> f64 {
        0.5 * self.omega * self.lambda
    }
}

/// `I`, `J`, and the pieces of `s` on a uniform grid of `[t₀, t₀ + span]`.
#[derive(Debug, Clone)]
pub struct Profile {
    pub times: Vec<f64>,
    pub g: Vec<f64>,
    pub n: Vec<f64>,
    pub i: Vec<f64>,
    pub j: Vec<f64>,
    pub s: Vec<f64>,
}

impl Profile {
    pub fn new(f: &Integrands, t0: f64, span: f64, max_step: f64) -> Result<Profile> {
        let times = uniform_even_grid(t0, t0 + span, max_step);
        let c = f.c();
        let (g, n, i, j) = if f.constant {
            let (g0, n0) = ((f.g)(t0)?, (f.n)(t0)?);
            let i: Vec<f64> = times.iter().map(|t| (t - t0) / g0).collect();
            let j: Vec<f64> = i.iter().map(|&iv| if c > 0.0 { n0 * g0 / c * -(-c * iv).exp_m1() } else { n0 * iv * g0 }).collect();
            (vec![g0; times.len()], vec![n0; times.len()], i, j)
        } else {
            let g: Vec<f64> = times.iter().map(|&t| (f.g)(t)).collect::<Result<_>>()?;
            let n: Vec<f64> = times.iter().map(|&t| (f.n)(t)).collect::<Result<_>>()?;
            let inv: Vec<f64> = g.iter().map(|g| 1.0 / g).collect();
            let i = cumulative_simpson(&times, &inv);
            let integrand: Vec<f64> = n.iter().zip(&i).map(|(n, iv)| n * (-c * iv).exp()).collect();
            let j = cumulative_simpson(&times, &integrand);
            (g, n, i, j)
        };
        let s = (0..times.len()).map(|k| n[k] * g[k] / f.lambda * (-c * i[k]).exp() + 0.5 * f.omega * j[k]).collect();
        Ok(Profile { times, g, n, i, j, s })
    }

    pub fn s_max(&self) -> f64 {
        self.s.iter().copied().fold(0.0, f64::max)
    }

    /// Quadratic interpolation of a column at `t`.
    pub fn interpolate(&self, column: &[f64], t: f64) -> f64 {
        let x = &self.times;
        let n = x.len();
        if t <= x[0] {
            return column[0];
        }
        if t >= x[n - 1] {
            return column[n - 1];
        }
        let h = x[1] - x[0];
        let k = (((t - x[0]) / h) as usize).min(n - 2);
        let k0 = if k + 2 < n { k } else { k - 1 };
        let (x0, x1, x2) = (x[k0], x[k0 + 1], x[k0 + 2]);
        let (f0, f1, f2) = (column[k0], column[k0 + 1], column[k0 + 2]);
        f0 * (t - x1) * (t - x2) / ((x0 - x1) * (x0 - x2)) + f1 * (t - x0) * (t - x2) / ((x1 - x0) * (x1 - x2)) + f2 * (t - x0) * (t - x1) / ((x2 - x0) * (x2 - x1))
    }
}

/// Bound on `∫_T^∞ e^{-c I(τ)} (coef0 + coef1 g(τ)) dτ` given `I(T)` and
/// the growth class of `g`; `None` when the class gives no handle and
/// `Some(+∞)` when the bound diverges. Requires `coef0 + coef1 g ≥ 0`.
pub fn tail_integral(growth: &GrowthClass, g_sup: Option<f64>, c: f64, t: f64, i_t: f64, coef0: f64, coef1: f64) -> Option<f64> {
    if coef0 == 0.0 && coef1 == 0.0 {
        return Some(0.0);
    }
    let decay = (-c * i_t).exp();
    match linear_majorant(growth, g_sup, t)? {
        Majorant::Bounded(gb) => Some(decay * (coef0 + coef1 * gb) * gb / c),
        Majorant::Line { w_t, slope } => {
            let p = c / slope;
            if p <= 1.0 || (coef1 != 0.0 && p <= 2.0) {
                return Some(f64::INFINITY);
            }
            let second = if coef1 != 0.0 { coef1 * w_t * w_t / (p - 2.0) } else { 0.0 };
            Some(decay / slope * (coef0 * w_t / (p - 1.0) + second))
        }
    }
}

enum Majorant {
    Bounded(f64),
    /// `g(τ) ≤ w_t + slope (τ - T)` for `τ ≥ T`.
    Line { w_t: f64, slope: f64 },
}

fn linear_majorant(growth: &GrowthClass, g_sup: Option<f64>, t: f64) -> Option<Majorant> {
    match growth {
        GrowthClass::Bounded => g_sup.map(Majorant::Bounded),
        GrowthClass::Linear { intercept, slope } => {
            if *slope <= 0.0 {
                return Some(Majorant::Bounded(intercept + slope.max(0.0) * t));
            }
            Some(Majorant::Line { w_t: intercept + slope * t, slope: *slope })
        }
        // Concave majorant: its tangent at T dominates it beyond T.
        GrowthClass::Sublinear { intercept, coefficient, exponent } => {
            let w_t = intercept + coefficient * t.powf(*exponent);
            let slope = coefficient * exponent * t.powf(exponent - 1.0);
            if slope <= 0.0 || *exponent == 0.0 {
                Some(Majorant::Bounded(intercept + coefficient))
            } else if !slope.is_finite() {
                None
            } else {
                Some(Majorant::Line { w_t, slope })
            }
        }
        GrowthClass::Other => None,
    }
}

/// Closed-form or tabulated comparison solution on `[t₀, t₀ + span]`.
#[derive(Debug, Clone)]
pub struct ComparisonCurve {
    pub t0: f64,
    pub w0: f64,
    pub lambda: f64,
    pub omega: f64,
    profile: Profile,
}

impl ComparisonCurve {
    pub fn new(f: &Integrands, t0: f64, w0: f64, span: f64, max_step: f64) -> Result<ComparisonCurve> {
        Ok(ComparisonCurve { t0, w0, lambda: f.lambda, omega: f.omega, profile: Profile::new(f, t0, span, max_step)? })
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// The brace `1 - W₀^{ω/2} (ω/2) J(t)`.
    pub fn brace(&self, t: f64) -> f64 {
        let j = self.profile.interpolate(&self.profile.j, t);
        1.0 - self.w0.powf(0.5 * self.omega) * 0.5 * self.omega * j
    }

    pub fn y(&self, t: f64) -> Result<f64> {
        if t < self.t0 {
            return Err(Error::Precondition(format!("comparison solution queried at t = {t} < t0 = {}", self.t0)));
        }
        if self.w0 == 0.0 {
            return Ok(0.0);
        }
        let brace = self.brace(t);
        if brace <= 0.0 {
            return Err(Error::ComparisonBlowUp { time: self.blow_up_time().unwrap_or(t) });
        }
        let i = self.profile.interpolate(&self.profile.i, t);
        Ok(self.w0 * (-self.lambda * i).exp() * brace.powf(-2.0 / self.omega))
    }

    /// First grid time where the brace is no longer positive.
    pub fn blow_up_time(&self) -> Option<f64> {
        let factor = self.w0.powf(0.5 * self.omega) * 0.5 * self.omega;
        self.profile.times.iter().zip(&self.profile.j).find(|(_, j)| 1.0 - factor * **j <= 0.0).map(|(t, _)| *t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constants(g: f64, n: f64, lambda: f64, omega: f64) -> (impl Fn(f64) -> Result<f64> + Sync, impl Fn(f64) -> Result<f64> + Sync, f64, f64) {
        (move |_| Ok(g), move |_| Ok(n), lambda, omega)
    }

    #[test]
    fn constant_and_numeric_paths_agree() {
        let (g, n, lambda, omega) = constants(3.0, 0.7, 0.05, 2.0);
        let fast = Integrands { g: &g, n: &n, constant: true, lambda, omega };
        let slow = Integrands { g: &g, n: &n, constant: false, lambda, omega };
        let a = Profile::new(&fast, 1.0, 50.0, 0.01).unwrap();
        let b = Profile::new(&slow, 1.0, 50.0, 0.01).unwrap();
        for k in (0..a.times.len()).step_by(97) {
            assert!((a.i[k] - b.i[k]).abs() < 1e-12);
            assert!((a.j[k] - b.j[k]).abs() < 1e-12);
            // With g and n constant, s is constant too.
            assert!((a.s[k] - 3.0 * 0.7 / lambda).abs() < 1e-10);
        }
    }

    #[test]
    fn pure_exponential_without_bernoulli_term() {
        let (g, n, lambda, omega) = constants(3.0, 0.0, 0.0258, 1.0);
        let f = Integrands { g: &g, n: &n, constant: true, lambda, omega };
        let y = ComparisonCurve::new(&f, 0.0, 2.0, 100.0, 0.01).unwrap();
        for t in [0.0, 0.3, 17.0, 100.0] {
            assert!((y.y(t).unwrap() - 2.0 * (-lambda * t / 3.0).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let (g, n, lambda, omega) = constants(1.5, 5.0, 0.01, 2.0);
        let f = Integrands { g: &g, n: &n, constant: true, lambda, omega };
        let y = ComparisonCurve::new(&f, 0.0, 1.0, 10.0, 0.01).unwrap();
        assert!(matches!(y.y(5.0), Err(Error::ComparisonBlowUp { time }) if time < 1.0));
    }

    #[test]
    fn tail_bounds() {
        // Bounded g = 2: ∫_T^∞ e^{-c(τ-T)/2} (1 + 2) dτ with I(T) = 0.
        let v = tail_integral(&GrowthClass::Bounded, Some(2.0), 0.5, 10.0, 0.0, 1.0, 1.0).unwrap();
        assert!((v - 3.0 * 2.0 / 0.5).abs() < 1e-14);
        // g = 1 + τ, c = 4, from T = 0: ∫ (1+τ)^{-4} (1 + τ) dτ = 1/2.
        let lin = GrowthClass::Linear { intercept: 1.0, slope: 1.0 };
        let v = tail_integral(&lin, None, 4.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
        assert_eq!(tail_integral(&lin, None, 1.5, 0.0, 0.0, 0.0, 1.0), Some(f64::INFINITY));
        assert_eq!(tail_integral(&GrowthClass::Other, None, 1.0, 0.0, 0.0, 1.0, 1.0), None);
    }
}
