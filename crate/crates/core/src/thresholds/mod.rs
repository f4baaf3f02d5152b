//! Derived constants of the stability argument: the `θ`/`γ` thresholds,
//! `ρ₂`, `λ(σ)`, `n(t)`, `α₁`, `α₂`, `S(t₀, σ)`, `σ'_M`, `σ_M`, `r_M`,
//! `ξ`, `κ`, `δ(σ, t₀)`, the comparison solution and the `(D, E)` envelope.

pub mod comparison;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext::{Extended, Provenance, Quantity};
use crate::liapunov::{self, BoundConstants};
use crate::problem::{verify_assumption_ii, CoefficientBounds, GrowthClass, ProblemSpec, ScanSettings};
use comparison::{tail_integral, ComparisonCurve, Integrands, Profile};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdConfig {
    /// `θ_used = max(θ₂, -a') + theta_margin`.
    pub theta_margin: f64,
    /// Caps `ξ`; required when `σ'_M` is undetermined.
    pub xi_override: Option<f64>,
    /// `δ(t₀) := δ(xi_fraction · ξ, t₀)` for the asymptotic clauses.
    pub xi_fraction: f64,
    pub scan: ScanSettings,
    /// Finite horizon `H` for the sup defining `S`.
    pub s_horizon: f64,
    /// Interval count of the `S` grid on `[t₀, t₀ + H]`.
    pub s_intervals: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig { theta_margin: 0.5, xi_override: None, xi_fraction: 0.5, scan: ScanSettings::default(), s_horizon: 1e3, s_intervals: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaThresholds {
    pub theta1: f64,
    pub theta2: f64,
    pub theta_used: f64,
    /// Which term of the max determines `θ_used`.
    pub binding: &'static str,
}

/// `θ₁`, `θ₂` and the working `θ`. Besides `θ > θ₂` the working value also
/// satisfies `θ > -a'` and `θ > 0`.
pub fn theta_thresholds(spec: &ProblemSpec, bounds: &CoefficientBounds, margin: f64) -> Result<ThetaThresholds> {
    if !(margin > 0.0) {
        return Err(Error::Precondition(format!("theta margin {margin} must be positive")));
    }
    let cst = spec.constants;
    let ap = spec.a_prime;
    let c_bar = bounds.c_inf.value;
    let eps_bar = bounds.eps_inf.value;
    let den = cst.mu + 0.5 * c_bar - 2.0 * cst.k;
    if den <= 0.0 {
        return Err(Error::Assumption(format!("mu + C_bar/2 - 2k = {den} <= 0")));
    }
    let den2 = ap + 0.5 * eps_bar;
    if den2 <= 0.0 {
        return Err(Error::Assumption(format!("a' + eps_bar/2 = {den2} <= 0")));
    }
    let candidates = [
        ("2a'", 2.0 * ap),
        ("2k/mu - a'", 2.0 * cst.k / cst.mu - ap),
        ("(5 - eps_ddot_bar - a'(mu - C_bar))/(mu + C_bar/2 - 2k)", (5.0 - bounds.eps_ddot_inf.value - ap * (cst.mu - c_bar)) / den),
    ];
    let theta1 = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let second = ("(C_bar + 5/4)/(a' + eps_bar/2)", (c_bar + 1.25) / den2);
    let theta2 = theta1.max(second.1);
    let extra = [second, ("-a'", -ap), ("positivity", 0.0)];
    let (name, base) = candidates.iter().chain(&extra).fold(candidates[0], |best, c| if c.1 > best.1 { *c } else { best });
    let theta_used = base + margin;
    debug_assert!(theta_used > 2.0 * ap && theta_used > -ap && cst.mu * (ap + theta_used) > 2.0 * cst.k);
    Ok(ThetaThresholds { theta1, theta2, theta_used, binding: name })
}

/// `γ₁`, `γ₂`, `γ₃` as functions of `σ` for a fixed `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaFamily {
    pub theta: f64,
    pub gamma31: f64,
    /// `γ₃₁` obtained by composing `γ₂ + 1 + (a'+θ)/μ + (a'+1)θ`.
    pub gamma31_compositional: f64,
    pub gamma32: f64,
    pub tau: f64,
    gamma1_base: f64,
}

impl GammaFamily {
    pub fn new(spec: &ProblemSpec, eps_bar: f64, c_bar: f64, theta: f64) -> Result<GammaFamily> {
        let ap = spec.a_prime;
        let cst = spec.constants;
        let s = ap + eps_bar;
        if s <= 0.0 {
            return Err(Error::Assumption(format!("a' + eps_bar = {s} <= 0")));
        }
        let gamma1_base = (1.0 + theta + 0.5 * eps_bar) / s;
        let gamma32 = cst.big_a * cst.big_a / s * (1.0 / cst.mu + theta / c_bar);
        let tail = (ap + theta) / cst.mu + (ap + 1.0) * theta;
        let gamma31 = (1.0 + theta) / s + theta * theta + 2.0 + tail;
        let gamma31_compositional = gamma1_base + theta * theta + 1.0 + 1.0 + tail;
        Ok(GammaFamily { theta, gamma31, gamma31_compositional, gamma32, tau: cst.tau, gamma1_base })
    }

    fn growth(&self, sigma: f64) -> f64 {
        if self.gamma32 == 0.0 {
            0.0
        } else {
            self.gamma32 * sigma.powf(2.0 * self.tau)
        }
    }

    pub fn gamma1(&self, sigma: f64) -> f64 {
        self.gamma1_base + self.growth(sigma)
    }

    pub fn gamma2(&self, sigma: f64) -> f64 {
        self.gamma1(sigma) + self.theta * self.theta + 1.0
    }

    pub fn gamma3(&self, sigma: f64) -> f64 {
        self.gamma31 + self.growth(sigma)
    }

    /// `r(σ) = σ / √(1 + γ₃(σ))`.
    pub fn r(&self, sigma: f64) -> f64 {
        sigma / (1.0 + self.gamma3(sigma)).sqrt()
    }

    /// `(σ_M, r_M)`: the argmax and max of `r`, infinite when `r` increases
    /// without bound.
    pub fn r_analysis(&self) -> (Extended, Extended) {
        let (t, g31, g32) = (self.tau, self.gamma31, self.gamma32);
        if g32 == 0.0 || t < 1.0 {
            (Extended::Infinite, Extended::Infinite)
        } else if t == 1.0 {
            (Extended::Infinite, Extended::Finite(1.0 / g32.sqrt()))
        } else {
            let sigma_m = ((1.0 + g31) / (g32 * (t - 1.0))).powf(0.5 / t);
            let r_m = ((t - 1.0) / (1.0 + g31)).powf((t - 1.0) / (2.0 * t)) / (t.sqrt() * g32.powf(0.5 / t));
            (Extended::Finite(sigma_m), Extended::Finite(r_m))
        }
    }
}

/// `ρ₂ = min{ρ, [(C̄ - k)(ω+1)(ω+2)/(2h)]^{1/ω}}`.
pub fn rho2(spec: &ProblemSpec, c_bar: f64) -> Result<f64> {
    let c = spec.constants;
    if c_bar <= c.k {
        return Err(Error::Assumption(format!("C_bar = {c_bar} <= k = {}", c.k)));
    }
    if c.h == 0.0 {
        return Ok(c.rho);
    }
    Ok(c.rho.min(((c_bar - c.k) * (c.omega + 1.0) * (c.omega + 2.0) / (2.0 * c.h)).powf(1.0 / c.omega)))
}

/// `S(t₀, σ)` with both the finite-horizon evaluation and the closed form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupS {
    pub t0: f64,
    pub sigma: f64,
    /// `max s` over `[t₀, t₀ + H]`.
    pub truncated: f64,
    /// Analytic bound on `sup s` over `[t₀ + H, ∞[`.
    pub tail: Extended,
    /// `max(truncated, tail)`.
    pub truncated_plus_tail: Extended,
    /// `(α₁/λ)(α₂ + ḡ̄)ḡ̄` when `ḡ̄ < ∞`.
    pub closed_form: Option<f64>,
    /// Value used downstream, with its provenance.
    pub used: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaSample {
    pub sigma: f64,
    pub gamma3: f64,
    pub lambda: f64,
    pub r: f64,
}

/// Serializable summary of every derived constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub eps_bar: Quantity,
    pub eps_ddot_bar: Quantity,
    pub c_bar: Quantity,
    pub g_sup: Quantity,
    pub g_growth: GrowthClass,
    pub g_growth_provenance: Provenance,
    pub theta1: Quantity,
    pub theta2: Quantity,
    pub theta_used: Quantity,
    pub theta_binding: &'static str,
    pub gamma31: Quantity,
    pub gamma31_compositional: Quantity,
    pub gamma32: Quantity,
    pub rho2: Quantity,
    pub chi: Quantity,
    pub eta: Quantity,
    pub alpha1: Quantity,
    pub alpha2: Quantity,
    pub sigma_m: Quantity,
    pub r_m: Quantity,
    pub sigma_prime_m: Quantity,
    pub xi: Quantity,
    pub kappa: Quantity,
    pub samples: Vec<SigmaSample>,
}

/// All derived constants for one problem, plus the functions of `σ` and
/// `t₀` built on them.
#[derive(Debug, Clone)]
pub struct Thresholds {
    spec: ProblemSpec,
    pub config: ThresholdConfig,
    pub bounds: CoefficientBounds,
    pub theta: ThetaThresholds,
    pub gamma: GammaFamily,
    pub constants: BoundConstants,
    pub rho2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub sigma_m: Extended,
    pub r_m: Extended,
    pub sigma_prime_m: Quantity,
    pub xi: Quantity,
    pub kappa: Quantity,
}

impl Thresholds {
    pub fn new(spec: &ProblemSpec, config: ThresholdConfig) -> Result<Thresholds> {
        let bounds = spec.coefficient_bounds(config.scan)?;
        let theta = theta_thresholds(spec, &bounds, config.theta_margin)?;
        let (eps_bar, c_bar) = (bounds.eps_inf.value, bounds.c_inf.value);
        let gamma = GammaFamily::new(spec, eps_bar, c_bar, theta.theta_used)?;
        let constants = BoundConstants::new(spec, theta.theta_used, eps_bar)?;
        let rho2 = rho2(spec, c_bar)?;
        let cst = spec.constants;
        let chi_pow = constants.chi.powf(1.0 + 0.5 * cst.omega);
        let alpha1 = cst.h * 2f64.powf(1.0 + 0.5 * cst.omega) / (cst.mu * chi_pow);
        let alpha2 = 0.5 * (cst.mu * theta.theta_used / (cst.omega + 1.0) - cst.mu - 2.0 - c_bar);
        let (sigma_m, r_m) = gamma.r_analysis();
        let mut thr = Thresholds {
            spec: spec.clone(),
            config,
            bounds,
            theta,
            gamma,
            constants,
            rho2,
            alpha1,
            alpha2,
            sigma_m,
            r_m,
            sigma_prime_m: Quantity::new(Extended::Undetermined, Provenance::Formula),
            xi: Quantity::new(Extended::Undetermined, Provenance::Formula),
            kappa: Quantity::new(Extended::Undetermined, Provenance::Formula),
        };
        thr.sigma_prime_m = thr.compute_sigma_prime_m()?;
        thr.xi = thr.compute_xi()?;
        thr.kappa = thr.compute_kappa();
        Ok(thr)
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn theta(&self) -> f64 {
        self.theta.theta_used
    }

    pub fn chi(&self) -> f64 {
        self.constants.chi
    }

    pub fn eta(&self) -> f64 {
        self.constants.eta
    }

    pub fn g_sup(&self) -> Option<f64> {
        self.bounds.g_sup.finite()
    }

    /// `λ(σ) = η / ([1 + m(σ)][1 + γ₃(σ)])`.
    pub fn lambda(&self, sigma: f64) -> Result<f64> {
        Ok(self.eta() / ((1.0 + liapunov::m(sigma, &self.spec)?) * (1.0 + self.gamma.gamma3(sigma))))
    }

    /// `n(t) = h 2^{ω/2} / χ^{1+ω/2} · [θ/(ω+1) + ε(t)]`.
    pub fn n(&self, t: f64) -> Result<f64> {
        let c = self.spec.constants;
        if c.h == 0.0 {
            return Ok(0.0);
        }
        let pre = c.h * 2f64.powf(0.5 * c.omega) / self.chi().powf(1.0 + 0.5 * c.omega);
        Ok(pre * (self.theta() / (c.omega + 1.0) + self.spec.eps(t)?))
    }

    fn coefficients_constant(&self) -> bool {
        let s = &self.spec;
        s.eps_formula().is_constant() && s.c_formula().is_constant() && s.source().eps_dot.is_none() && s.source().c_dot.is_none()
    }

    fn with_integrands<T>(&self, sigma: f64, body: impl FnOnce(&Integrands) -> Result<T>) -> Result<T> {
        let g = |t: f64| liapunov::g(t, &self.spec);
        let n = |t: f64| self.n(t);
        let f = Integrands { g: &g, n: &n, constant: self.coefficients_constant(), lambda: self.lambda(sigma)?, omega: self.spec.constants.omega };
        body(&f)
    }

    /// `I`, `J` and `s` sampled on `[t₀, t₀ + span]`.
    pub fn s_profile(&self, t0: f64, sigma: f64, span: f64, max_step: f64) -> Result<Profile> {
        self.with_integrands(sigma, |f| Profile::new(f, t0, span, max_step))
    }

    /// `s(t; t₀, σ)` at a single time.
    pub fn s_of_t(&self, t: f64, t0: f64, sigma: f64) -> Result<f64> {
        if t < t0 {
            return Err(Error::Precondition(format!("s(t) needs t >= t0, got t = {t} < {t0}")));
        }
        if self.spec.constants.h == 0.0 {
            return Ok(0.0);
        }
        if t == t0 {
            return Ok(self.n(t0)? * liapunov::g(t0, &self.spec)? / self.lambda(sigma)?);
        }
        let step = ((t - t0) / 2000.0).min(self.config.s_horizon / self.config.s_intervals as f64);
        let p = self.s_profile(t0, sigma, t - t0, step)?;
        Ok(*p.s.last().unwrap())
    }

    /// Right-hand side of the first line of the `s` upper bound,
    /// `(α₁/λ)(α₂+g)g e^{-cI} + (ω/2)∫α₁(α₂+g)e^{-cI}`, on a profile grid.
    pub fn s_upper_profile(&self, p: &Profile, sigma: f64) -> Result<Vec<f64>> {
        let lambda = self.lambda(sigma)?;
        let omega = self.spec.constants.omega;
        let c = 0.5 * omega * lambda;
        let integrand: Vec<f64> = (0..p.times.len()).map(|k| self.alpha1 * (self.alpha2 + p.g[k]) * (-c * p.i[k]).exp()).collect();
        let cum = crate::quad::cumulative_simpson(&p.times, &integrand);
        Ok((0..p.times.len()).map(|k| self.alpha1 / lambda * (self.alpha2 + p.g[k]) * p.g[k] * (-c * p.i[k]).exp() + 0.5 * omega * cum[k]).collect())
    }

    /// `(α₁/λ)(α₂ + ḡ̄)ḡ̄`.
    pub fn s_closed_form(&self, sigma: f64) -> Result<Option<f64>> {
        match self.g_sup() {
            Some(gs) => Ok(Some(self.alpha1 / self.lambda(sigma)? * (self.alpha2 + gs) * gs)),
            None => Ok(None),
        }
    }

    /// `S(t₀, σ) = sup_{t ≥ t₀} s`. The finite-horizon max plus the analytic
    /// tail is always reported; the closed form is used when `ḡ̄ < ∞`.
    pub fn big_s(&self, t0: f64, sigma: f64) -> Result<SupS> {
        let cst = self.spec.constants;
        if cst.h == 0.0 {
            let zero = Extended::Finite(0.0);
            return Ok(SupS {
                t0,
                sigma,
                truncated: 0.0,
                tail: zero,
                truncated_plus_tail: zero,
                closed_form: Some(0.0),
                used: Quantity::formula(0.0).with_note("h = 0"),
            });
        }
        let horizon = self.config.s_horizon;
        let p = self.s_profile(t0, sigma, horizon, horizon / self.config.s_intervals as f64)?;
        let truncated = p.s_max();
        let lambda = self.lambda(sigma)?;
        let c = 0.5 * cst.omega * lambda;
        let last = p.times.len() - 1;
        let (t_end, i_end, j_end) = (p.times[last], p.i[last], p.j[last]);
        // Integrating the n-term by parts from T on gives
        // s(t) <= (ω/2)J(T) + (α₁/λ)[(α₂+g(T))g(T)e^{-cI(T)} + ġ⁺ ∫_T^∞ e^{-cI}(α₂+2g)],
        // with ġ⁺ = 0 for constant coefficients and 1/(1+γ₃(σ)) - ε̈̄/2 otherwise.
        let g_end = p.g[last];
        let head = 0.5 * cst.omega * j_end + self.alpha1 / lambda * (self.alpha2 + g_end) * g_end * (-c * i_end).exp();
        let g_dot_sup = if self.coefficients_constant() {
            0.0
        } else {
            (1.0 / (1.0 + self.gamma.gamma3(sigma)) - 0.5 * self.bounds.eps_ddot_inf.value).max(0.0)
        };
        let tail = if g_dot_sup == 0.0 {
            Extended::Finite(head)
        } else {
            match tail_integral(&self.bounds.growth, self.g_sup(), c, t_end, i_end, self.alpha2, 2.0) {
                Some(rest) => Extended::from_f64(head + self.alpha1 / lambda * g_dot_sup * rest),
                None => Extended::Undetermined,
            }
        };
        let truncated_plus_tail = match tail {
            Extended::Finite(x) => Extended::Finite(truncated.max(x)),
            other => other,
        };
        let closed_form = self.s_closed_form(sigma)?;
        let used = match closed_form {
            Some(v) => Quantity::formula(v).with_note("closed form for bounded g"),
            None => Quantity::new(truncated_plus_tail, Provenance::TruncatedPlusTail),
        };
        Ok(SupS { t0, sigma, truncated, tail, truncated_plus_tail, closed_form, used })
    }

    /// `Δ(t₀, σ) = S W₀^{ω/2}`.
    pub fn big_delta(&self, t0: f64, sigma: f64, w0: f64) -> Result<Extended> {
        Ok(match self.big_s(t0, sigma)?.used.value {
            Extended::Finite(s) => Extended::Finite(s * w0.powf(0.5 * self.spec.constants.omega)),
            other => other,
        })
    }

    /// `G(σ) = h ∫₀^∞ e^{-(ωλ/2)∫₀^τ dτ'/g} g dτ`, as a finite-horizon value
    /// plus the growth-class tail.
    pub fn big_g(&self, sigma: f64) -> Result<Extended> {
        let cst = self.spec.constants;
        if cst.h == 0.0 {
            return Ok(Extended::Finite(0.0));
        }
        let horizon = self.config.s_horizon;
        let p = self.s_profile(0.0, sigma, horizon, horizon / self.config.s_intervals as f64)?;
        let c = 0.5 * cst.omega * self.lambda(sigma)?;
        let integrand: Vec<f64> = p.g.iter().zip(&p.i).map(|(g, i)| g * (-c * i).exp()).collect();
        let head = crate::quad::cumulative_simpson(&p.times, &integrand).last().copied().unwrap_or(0.0);
        let last = p.times.len() - 1;
        Ok(match tail_integral(&self.bounds.growth, self.g_sup(), c, p.times[last], p.i[last], 0.0, 1.0) {
            Some(t) => Extended::from_f64(cst.h * (head + t)),
            None => Extended::Undetermined,
        })
    }

    fn compute_sigma_prime_m(&self) -> Result<Quantity> {
        let cst = self.spec.constants;
        if cst.h == 0.0 {
            return Ok(Quantity::formula(f64::INFINITY).with_note("h = 0"));
        }
        let prov = self.bounds.growth_provenance;
        match self.bounds.growth {
            GrowthClass::Bounded | GrowthClass::Sublinear { .. } => Ok(Quantity::new(Extended::Infinite, prov)),
            GrowthClass::Linear { slope, .. } if slope <= 0.0 => Ok(Quantity::new(Extended::Infinite, prov)),
            GrowthClass::Linear { slope, .. } => {
                let target = 4.0 * slope / cst.omega;
                let note = format!("lambda(sigma'_M) = 4K/omega with K = {slope}");
                if self.lambda(0.0)? <= target {
                    return Ok(Quantity::new(Extended::Finite(0.0), prov).with_note(note));
                }
                let mut hi = 1.0;
                while self.lambda(hi)? > target {
                    hi *= 2.0;
                    if hi > 1e6 {
                        return Ok(Quantity::new(Extended::Infinite, prov).with_note(note));
                    }
                }
                let mut lo = 0.0;
                while hi - lo > 1e-12 * hi {
                    let mid = 0.5 * (lo + hi);
                    if self.lambda(mid)? > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(Quantity::new(Extended::Finite(0.5 * (lo + hi)), prov).with_note(note))
            }
            GrowthClass::Other => self.sigma_prime_m_heuristic(),
        }
    }

    /// For unclassified growth: the largest probe `σ ≤ ρ₂` whose truncated
    /// `G` stops growing between `H/2` and `H`.
    fn sigma_prime_m_heuristic(&self) -> Result<Quantity> {
        let horizon = self.config.s_horizon;
        let cst = self.spec.constants;
        let mut best = None;
        for k in 0..16 {
            let sigma = self.rho2 * 10f64.powf(-3.0 * k as f64 / 15.0);
            let p = self.s_profile(0.0, sigma, horizon, horizon / self.config.s_intervals as f64)?;
            let c = 0.5 * cst.omega * self.lambda(sigma)?;
            let integrand: Vec<f64> = p.g.iter().zip(&p.i).map(|(g, i)| g * (-c * i).exp()).collect();
            let cum = crate::quad::cumulative_simpson(&p.times, &integrand);
            let (half, full) = (cum[cum.len() / 2], cum[cum.len() - 1]);
            if full.is_finite() && full - half <= 1e-3 * full.abs().max(1e-300) {
                best = Some(sigma);
                break;
            }
        }
        Ok(match best {
            Some(s) => Quantity::new(Extended::Finite(s), Provenance::TruncatedPlusTail).with_note("heuristic: truncated G converged at this probe"),
            None => Quantity::new(Extended::Undetermined, Provenance::TruncatedPlusTail).with_note("heuristic inconclusive for unclassified growth of g"),
        })
    }

    fn compute_xi(&self) -> Result<Quantity> {
        let candidates = [Extended::Finite(self.rho2), self.sigma_m, self.sigma_prime_m.value];
        let computed = Extended::min_known(&candidates);
        let undetermined = candidates.contains(&Extended::Undetermined);
        match (self.config.xi_override, undetermined) {
            (Some(x), _) if !(x > 0.0) => Err(Error::Precondition(format!("xi override {x} must be positive"))),
            (Some(x), true) => Ok(Quantity::new(Extended::Finite(x), Provenance::Declared).with_note("sigma'_M undetermined; configured xi used")),
            (Some(x), false) => {
                let c = computed.to_f64();
                if x <= c {
                    Ok(Quantity::new(Extended::Finite(x), Provenance::Declared))
                } else {
                    Ok(Quantity::formula(c).with_note(format!("configured xi {x} exceeds min(rho2, sigma_M, sigma'_M); capped")))
                }
            }
            (None, true) => Ok(Quantity::new(Extended::Undetermined, Provenance::Formula).with_note("sigma'_M undetermined and no xi configured")),
            (None, false) => Ok(Quantity::new(computed, Provenance::Formula).with_note("min(rho2, sigma_M, sigma'_M)")),
        }
    }

    fn compute_kappa(&self) -> Quantity {
        let Some(xi) = self.xi.value.finite() else {
            return Quantity::new(Extended::Undetermined, Provenance::Scanned).with_note("xi undetermined");
        };
        let scan = self.config.scan;
        match verify_assumption_ii(&self.spec, self.gamma.gamma3(xi), scan.horizon, scan.samples) {
            Ok(t) => Quantity::new(Extended::Finite(t), Provenance::Scanned),
            Err(e) => Quantity::new(Extended::Undetermined, Provenance::Scanned).with_note(e.to_string()),
        }
    }

    pub fn xi(&self) -> Result<f64> {
        self.xi.value.finite().ok_or_else(|| Error::Undetermined("xi".into()))
    }

    pub fn kappa(&self) -> Result<f64> {
        self.kappa.value.finite().ok_or_else(|| Error::Undetermined(format!("kappa: {}", self.kappa.note.clone().unwrap_or_default())))
    }

    fn check_sigma_t0(&self, sigma: f64, t0: f64) -> Result<()> {
        let xi = self.xi()?;
        if !(sigma > 0.0 && sigma < xi) {
            return Err(Error::Precondition(format!("sigma = {sigma} must lie in ]0, xi = {xi}[")));
        }
        let kappa = self.kappa()?;
        if t0 < kappa {
            return Err(Error::Precondition(format!("t0 = {t0} < kappa = {kappa}")));
        }
        Ok(())
    }

    fn delta_with(&self, sigma: f64, g0: f64, s: Extended) -> Result<f64> {
        let scale = (g0 * (1.0 + self.gamma.gamma3(sigma))).sqrt();
        let first = liapunov::b_inverse(sigma * self.chi().sqrt() / scale, &self.spec)?;
        let second = match s {
            Extended::Finite(0.0) => f64::INFINITY,
            Extended::Finite(s) => liapunov::b_inverse(s.powf(-1.0 / self.spec.constants.omega) / scale, &self.spec)?,
            Extended::Infinite => 0.0,
            Extended::Undetermined => return Err(Error::Undetermined(format!("S(t0, {sigma})"))),
        };
        Ok(first.min(second))
    }

    /// `δ(σ, t₀) = min{B⁻¹[σ√χ / √(g(t₀)(1+γ₃))], B⁻¹[S^{-1/ω} / √(g(t₀)(1+γ₃))]}`.
    pub fn delta(&self, sigma: f64, t0: f64) -> Result<f64> {
        self.check_sigma_t0(sigma, t0)?;
        let s = self.big_s(t0, sigma)?.used.value;
        self.delta_with(sigma, liapunov::g(t0, &self.spec)?, s)
    }

    /// `t₀`-independent `δ(σ)` with `ḡ̄` in place of `g(t₀)` and the closed-form `S`.
    pub fn delta_uniform(&self, sigma: f64) -> Result<f64> {
        let gs = self.g_sup().ok_or_else(|| Error::Precondition("uniform delta needs sup g < inf".into()))?;
        self.check_sigma_t0(sigma, self.kappa()?)?;
        let s = self.s_closed_form(sigma)?.expect("bounded g has a closed form");
        self.delta_with(sigma, gs, Extended::Finite(s))
    }

    /// Comparison solution `y` on `[t₀, t₀ + span]` with `y(t₀) = W₀`.
    pub fn comparison(&self, t0: f64, w0: f64, sigma: f64, span: f64, max_step: f64) -> Result<ComparisonCurve> {
        self.with_integrands(sigma, |f| ComparisonCurve::new(f, t0, w0, span, max_step))
    }

    pub fn comparison_y(&self, t: f64, t0: f64, w0: f64, sigma: f64) -> Result<f64> {
        let span = (t - t0).max(1e-12);
        self.comparison(t0, w0, sigma, span, span / 2000.0)?.y(t)
    }

    /// `(D, E)` for the exponential envelope `d ≤ D e^{-E(t-t₀)} d(t₀)`.
    pub fn decay_envelope(&self, t0: f64, w0: f64) -> Result<Envelope> {
        let gs = self.g_sup().ok_or_else(|| Error::Precondition("decay envelope needs sup g < inf".into()))?;
        let sigma = self.config.xi_fraction * self.xi()?;
        let lambda = self.lambda(sigma)?;
        let delta = match self.big_delta(t0, sigma, w0)? {
            Extended::Finite(d) => d,
            _ => return Err(Error::Undetermined(format!("Delta(t0, {sigma})"))),
        };
        if delta >= 1.0 {
            return Err(Error::Precondition(format!("Delta(t0, {sigma}) = {delta} >= 1")));
        }
        let omega = self.spec.constants.omega;
        let base = (self.eta() * gs / (lambda * self.chi())).sqrt();
        Ok(Envelope {
            sigma,
            big_delta: delta,
            d: base * (1.0 - delta).powf(-1.0 / omega),
            d_printed_exponent: base * (1.0 - delta).powf(-2.0 / omega),
            e: lambda / (2.0 * gs),
        })
    }

    pub fn report(&self) -> Result<ThresholdReport> {
        let b = &self.bounds;
        let q = |v: f64, p: Provenance| Quantity::new(Extended::from_f64(v), p);
        let xi = self.xi.value.finite().unwrap_or(self.rho2);
        let samples = [0.125, 0.25, 0.5, 0.75]
            .iter()
            .map(|f| {
                let sigma = f * xi;
                Ok(SigmaSample { sigma, gamma3: self.gamma.gamma3(sigma), lambda: self.lambda(sigma)?, r: self.gamma.r(sigma) })
            })
            .collect::<Result<_>>()?;
        Ok(ThresholdReport {
            eps_bar: q(b.eps_inf.value, b.eps_inf.provenance),
            eps_ddot_bar: q(b.eps_ddot_inf.value, b.eps_ddot_inf.provenance),
            c_bar: q(b.c_inf.value, b.c_inf.provenance),
            g_sup: Quantity::new(b.g_sup, b.g_sup_provenance),
            g_growth: b.growth.clone(),
            g_growth_provenance: b.growth_provenance,
            theta1: Quantity::formula(self.theta.theta1),
            theta2: Quantity::formula(self.theta.theta2),
            theta_used: Quantity::formula(self.theta.theta_used).with_note(format!("margin {} above the binding term", self.config.theta_margin)),
            theta_binding: self.theta.binding,
            gamma31: Quantity::formula(self.gamma.gamma31),
            gamma31_compositional: Quantity::formula(self.gamma.gamma31_compositional).with_note("gamma_2 + 1 + (a'+theta)/mu + (a'+1) theta; diagnostic only"),
            gamma32: Quantity::formula(self.gamma.gamma32),
            rho2: Quantity::formula(self.rho2),
            chi: Quantity::formula(self.chi()),
            eta: Quantity::formula(self.eta()),
            alpha1: Quantity::formula(self.alpha1),
            alpha2: Quantity::formula(self.alpha2),
            sigma_m: Quantity::new(self.sigma_m, Provenance::Formula),
            r_m: Quantity::new(self.r_m, Provenance::Formula),
            sigma_prime_m: self.sigma_prime_m.clone(),
            xi: self.xi.clone(),
            kappa: self.kappa.clone(),
            samples,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    /// Radius at which `λ` is evaluated, `xi_fraction · ξ`.
    pub sigma: f64,
    pub big_delta: f64,
    /// `√(ηḡ̄/(λχ)) (1 - Δ)^{-1/ω}`.
    pub d: f64,
    /// Same with the exponent `-2/ω`; diagnostic.
    pub d_printed_exponent: f64,
    pub e: f64,
}
