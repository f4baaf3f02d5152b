//! Reference problems used in tests, examples and the shipped configs.
//!
//! | name  | ε | C | a′ | F    |
//! |-------|---|---|----|------|
//! | P0    | 0 | 1 | 0  | 0    |
//! | P1    | 1 | 2 | 1  | 0    |
//! | P2    | ½ | 1 | 0  | 0    |
//! | cubic | 1 | 2 | 1  | z³   |
//!
//! All have `a = 0` and constant coefficients. The cubic problem uses
//! `k = 0`, `h = 3`, `ω = 2`; the others `k = h = 0`, `ω = 1`.

use crate::problem::ProblemSource;

/// Undamped wave equation; outside the stability assumptions, used for
/// solver tests only.
pub fn p0() -> ProblemSource {
    ProblemSource::constant(0.0, 1.0, 0.0, "0", "0")
}

pub fn p1() -> ProblemSource {
    ProblemSource::constant(1.0, 2.0, 1.0, "0", "0")
}

pub fn p2() -> ProblemSource {
    ProblemSource::constant(0.5, 1.0, 0.0, "0", "0")
}

pub fn cubic() -> ProblemSource {
    let mut s = ProblemSource::constant(1.0, 2.0, 1.0, "z^3", "3*z^2");
    s.f_antideriv = Some("z^4/4".into());
    s.h = 3.0;
    s.omega = 2.0;
    s
}
