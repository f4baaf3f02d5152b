//! Quadrature primitives shared by the grid, the Liapunov functional and the
//! comparison machinery.

use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl15() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(15))
}

/// 15-point Gauss–Legendre on `[a, b]`.
pub fn gauss15<E>(a: f64, b: f64, mut f: impl FnMut(f64) -> Result<f64, E>) -> Result<f64, E> {
    let (x, w) = gl15();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        acc += wi * f(mid + half * xi)?;
    }
    Ok(acc * half)
}

/// Composite Simpson over equally spaced samples (even interval count).
pub fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    debug_assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd number of samples");
    let mut acc = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Running integral `out[i] = ∫_{x_0}^{x_i} f` over an arbitrary increasing
/// grid. Each panel integrates the quadratic through three neighbouring
/// samples, so pairs of panels on a uniform grid reproduce Simpson's rule.
pub fn cumulative_simpson(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert_eq!(n, f.len());
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * (x[1] - x[0]) * (f[0] + f[1]);
        return out;
    }
    for i in 0..n - 1 {
        // Panel [x_i, x_{i+1}] using a third point on the side that exists.
        let (j0, j1, j2) = if i % 2 == 0 && i + 2 < n { (i, i + 1, i + 2) } else { (i - 1, i, i + 1) };
        out[i + 1] = out[i] + quadratic_panel(x[j0], x[j1], x[j2], f[j0], f[j1], f[j2], x[i], x[i + 1]);
    }
    out
}

/// ∫_a^b of the quadratic interpolating (x0,f0), (x1,f1), (x2,f2).
#[allow(clippy::too_many_arguments)]
fn quadratic_panel(x0: f64, x1: f64, x2: f64, f0: f64, f1: f64, f2: f64, a: f64, b: f64) -> f64 {
    // Coordinates shifted to `a` keep the cubic terms small.
    let len = b - a;
    let basis = |p: f64, q: f64, denom: f64| {
        let (p, q) = (p - a, q - a);
        (len * len * len / 3.0 - (p + q) * len * len / 2.0 + p * q * len) / denom
    };
    f0 * basis(x1, x2, (x0 - x1) * (x0 - x2)) + f1 * basis(x0, x2, (x1 - x0) * (x1 - x2)) + f2 * basis(x0, x1, (x2 - x0) * (x2 - x1))
}

/// `n + 1` equally spaced points covering `[a, b]` with `n` rounded up to an
/// even count so that the step does not exceed `max_step`.
pub fn uniform_even_grid(a: f64, b: f64, max_step: f64) -> Vec<f64> {
    let span = b - a;
    let mut n = ((span / max_step).ceil() as usize).max(2);
    if n % 2 == 1 {
        n += 1;
    }
    (0..=n).map(|i| if i == n { b } else { a + span * i as f64 / n as f64 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_degree_29() {
        let (x, w) = gauss_legendre(15);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(28)).sum();
        assert!((integral - 2.0 / 29.0).abs() < 1e-14);
        let odd: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(29)).sum();
        assert!(odd.abs() < 1e-14);
    }

    #[test]
    fn gauss15_on_interval() {
        let v: Result<f64, ()> = gauss15(0.0, std::f64::consts::PI, |x| Ok(x.sin()));
        assert!((v.unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cumulative_matches_simpson_at_even_nodes() {
        let x: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let f: Vec<f64> = x.iter().map(|x| x.exp()).collect();
        let c = cumulative_simpson(&x, &f);
        assert!((c[20] - simpson_uniform(&f, 0.1)).abs() < 1e-13);
        for (xi, ci) in x.iter().zip(&c) {
            assert!((ci - (xi.exp() - 1.0)).abs() < 1e-4);
        }
    }

    #[test]
    fn cumulative_exact_for_quadratics_nonuniform() {
        let x = [0.0, 0.3, 0.5, 1.1, 1.2, 2.0];
        let f: Vec<f64> = x.iter().map(|x| 1.0 + x - 2.0 * x * x).collect();
        let c = cumulative_simpson(&x, &f);
        for (xi, ci) in x.iter().zip(&c) {
            let exact = xi + xi * xi / 2.0 - 2.0 * xi * xi * xi / 3.0;
            assert!((ci - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn even_grid() {
        let g = uniform_even_grid(1.0, 2.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 2.0);
    }
}
