//! Single-mode solutions `u = T(t) sin(mx)` of the linear constant-coefficient
//! problem, used as validation oracles:
//!
//! ```text
//! T'' + (ε m² + a') T' + (C m² - k) T = 0
//! ```

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Roots {
    Real(f64, f64),
    Repeated(f64),
    /// `α ± iβ`
    Complex(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSeparable {
    pub mode: u32,
    pub roots: Roots,
    t0: f64,
    a: f64,
    b: f64,
}

impl ExactSeparable {
    /// Mode `m` with `T(t₀) = amp` and `T'(t₀) = rate`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(eps: f64, c: f64, a_prime: f64, k_lin: f64, mode: u32, t0: f64, amp: f64, rate: f64) -> ExactSeparable {
        let m2 = (mode as f64).powi(2);
        let b = eps * m2 + a_prime;
        let q = c * m2 - k_lin;
        let disc = b * b - 4.0 * q;
        let scale = (b * b).max((4.0 * q).abs()).max(f64::MIN_POSITIVE);
        if disc.abs() <= 1e-14 * scale {
            let r = -0.5 * b;
            ExactSeparable { mode, roots: Roots::Repeated(r), t0, a: amp, b: rate - r * amp }
        } else if disc > 0.0 {
            let sq = disc.sqrt();
            // Stable pairing: the larger-magnitude root by the quadratic
            // formula, the other from the product of roots.
            let sign = if b >= 0.0 { 1.0 } else { -1.0 };
            let r1 = -0.5 * (b + sign * sq);
            let r2 = q / r1;
            let coef_b = (rate - r1 * amp) / (r2 - r1);
            ExactSeparable { mode, roots: Roots::Real(r1, r2), t0, a: amp - coef_b, b: coef_b }
        } else {
            let alpha = -0.5 * b;
            let beta = 0.5 * (-disc).sqrt();
            ExactSeparable { mode, roots: Roots::Complex(alpha, beta), t0, a: amp, b: (rate - alpha * amp) / beta }
        }
    }

    /// Requires constant `ε` and `C`, `a ≡ 0` and linear `F(z) = k z`; the
    /// initial data are `u₀ = amp·sin(mx)`, `u₁ = rate·sin(mx)`.
    pub fn from_spec(spec: &ProblemSpec, mode: u32, t0: f64, amp: f64, rate: f64) -> Result<ExactSeparable> {
        if !spec.eps_formula().is_constant() || !spec.c_formula().is_constant() {
            return Err(Error::Unsupported("exact separable solution needs constant eps and C".into()));
        }
        let a = spec.damping_formula();
        if !a.is_constant() || a.eval(&[0.0; 6])? != 0.0 {
            return Err(Error::Unsupported("exact separable solution needs a = 0".into()));
        }
        if !spec.forcing_z_formula().is_constant() || spec.f(0.0)? != 0.0 {
            return Err(Error::Unsupported("exact separable solution needs linear F(z) = k z".into()));
        }
        let k_lin = spec.f_z(0.0)?;
        for z in [-1.0, 0.5, 2.0] {
            if (spec.f(z)? - k_lin * z).abs() > 1e-12 * z.abs().max(1.0) {
                return Err(Error::Unsupported("F is not the linear map with slope F_z".into()));
            }
        }
        Ok(ExactSeparable::new(spec.eps(0.0)?, spec.c(0.0)?, spec.a_prime, k_lin, mode, t0, amp, rate))
    }

    /// `(T(t), T'(t))`.
    pub fn amplitude(&self, t: f64) -> (f64, f64) {
        let s = t - self.t0;
        match self.roots {
            Roots::Real(r1, r2) => {
                let (e1, e2) = ((r1 * s).exp(), (r2 * s).exp());
                (self.a * e1 + self.b * e2, self.a * r1 * e1 + self.b * r2 * e2)
            }
            Roots::Repeated(r) => {
                let e = (r * s).exp();
                ((self.a + self.b * s) * e, (self.b + r * (self.a + self.b * s)) * e)
            }
            Roots::Complex(alpha, beta) => {
                let e = (alpha * s).exp();
                let (sn, cs) = (beta * s).sin_cos();
                let val = e * (self.a * cs + self.b * sn);
                let der = alpha * val + e * beta * (-self.a * sn + self.b * cs);
                (val, der)
            }
        }
    }

    /// `(u(x, t), u_t(x, t))`.
    pub fn eval(&self, x: f64, t: f64) -> (f64, f64) {
        let (tv, td) = self.amplitude(t);
        let sx = (self.mode as f64 * x).sin();
        (tv * sx, td * sx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemSource;

    #[test]
    fn undamped_mode_is_cosine() {
        let e = ExactSeparable::new(0.0, 1.0, 0.0, 0.0, 1, 0.0, 1.0, 0.0);
        assert_eq!(e.roots, Roots::Complex(0.0, 1.0));
        for t in [0.0, 0.7, 3.0] {
            assert!((e.amplitude(t).0 - t.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn p2_roots() {
        let e = ExactSeparable::new(0.5, 1.0, 0.0, 0.0, 1, 0.0, 1.0, 0.0);
        match e.roots {
            Roots::Complex(a, b) => {
                assert_eq!(a, -0.25);
                assert!((b - 0.9375f64.sqrt()).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn critical_damping() {
        let e = ExactSeparable::new(0.0, 1.0, 2.0, 0.0, 1, 0.0, 1.0, 0.0);
        assert_eq!(e.roots, Roots::Repeated(-1.0));
        for t in [0.0, 0.5, 4.0] {
            assert!((e.amplitude(t).0 - (1.0 + t) * (-t).exp()).abs() < 1e-15);
        }
    }

    /// Each branch satisfies the ODE and the initial data.
    #[test]
    fn branches_solve_the_ode() {
        let cases = [(3.0, 1.0, 1.0, 0.0, 2u32), (0.1, 2.0, 0.3, 0.5, 3), (0.0, 1.0, 2.0, 0.0, 1), (1.0, 2.0, 1.0, 0.0, 1)];
        for (eps, c, ap, k, m) in cases {
            let e = ExactSeparable::new(eps, c, ap, k, m, 1.0, 0.8, -0.3);
            let m2 = (m as f64).powi(2);
            assert!((e.amplitude(1.0).0 - 0.8).abs() < 1e-14);
            assert!((e.amplitude(1.0).1 + 0.3).abs() < 1e-14);
            for t in [1.5, 2.0, 4.0] {
                let h = 1e-4;
                let (v, d) = e.amplitude(t);
                let dd = (e.amplitude(t + h).1 - e.amplitude(t - h).1) / (2.0 * h);
                let res = dd + (eps * m2 + ap) * d + (c * m2 - k) * v;
                assert!(res.abs() < 2e-6, "{res} for {eps} {c} {ap} {k} {m}");
            }
        }
    }

    #[test]
    fn from_spec_rejects_unsupported() {
        let ok = ProblemSpec::new(ProblemSource::constant(0.5, 1.0, 0.0, "0", "0")).unwrap();
        assert!(ExactSeparable::from_spec(&ok, 1, 0.0, 1.0, 0.0).is_ok());
        let mut src = ProblemSource::constant(0.5, 1.0, 0.0, "0", "0");
        src.c = "1 + t".into();
        assert!(matches!(ExactSeparable::from_spec(&ProblemSpec::new(src).unwrap(), 1, 0.0, 1.0, 0.0), Err(Error::Unsupported(_))));
        let cubic = ProblemSpec::new(ProblemSource::constant(0.5, 1.0, 0.0, "z^3", "3*z^2")).unwrap();
        assert!(ExactSeparable::from_spec(&cubic, 1, 0.0, 1.0, 0.0).is_err());
        let lin = ProblemSpec::new(ProblemSource::constant(0.5, 1.0, 0.0, "-0.5*z", "-0.5")).unwrap();
        assert!(ExactSeparable::from_spec(&lin, 1, 0.0, 1.0, 0.0).is_ok());
    }
}
