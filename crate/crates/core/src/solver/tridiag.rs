//! Thomas algorithm for the constant-off-diagonal systems of the stepper.

/// Solves `off·x_{i-1} + diag_i·x_i + off·x_{i+1} = rhs_i`, overwriting
/// `rhs` with the solution. `scratch` must have the same length.
pub fn solve_symmetric_offdiag(diag: &[f64], off: f64, rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    debug_assert_eq!(rhs.len(), n);
    debug_assert_eq!(scratch.len(), n);
    if n == 0 {
        return;
    }
    let mut denom = diag[0];
    scratch[0] = off / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - off * scratch[i - 1];
        scratch[i] = off / denom;
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}
