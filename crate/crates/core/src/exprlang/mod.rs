//! Scalar expression mini-language for user-supplied coefficients.
//!
//! Coefficients such as `eps(t)`, `C(t)`, the damping `a(x,t,u,ux,ut,uxx)`
//! and the nonlinearity `F(z)` are written as plain strings in the
//! configuration file and parsed into an [`Expr`]. The grammar is documented
//! in [`parser`](self::parser); supported functions are `sin cos tan exp log
//! sqrt abs` (one argument) and `pow min max` (two arguments), plus the
//! constant `pi`.
//!
//! For hot loops an expression is compiled against an ordered variable list
//! into a [`Formula`], which evaluates from a slice without name lookups.

mod parser;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("function `{name}` at byte {offset} takes {expected} argument(s), got {actual}")]
    Arity { name: String, expected: usize, actual: usize, offset: usize },
    #[error("unknown variable `{name}` (allowed: {allowed})")]
    UnknownVariable { name: String, allowed: String },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error: {op} at argument {arg}")]
    Domain { op: &'static str, arg: f64 },
    #[error("overflow in {op} at argument {arg}")]
    Overflow { op: &'static str, arg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Pow,
    Min,
    Max,
}

impl Func {
    pub const ALL: [Func; 10] =
        [Func::Sin, Func::Cos, Func::Tan, Func::Exp, Func::Log, Func::Sqrt, Func::Abs, Func::Pow, Func::Min, Func::Max];

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Pow => "pow",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ExprError> {
        parser::Parser::new(source)?.parse_all()
    }

    /// Parses and checks that every variable is in `allowed`.
    pub fn parse_in(source: &str, allowed: &[&str]) -> Result<Expr, ExprError> {
        let e = Expr::parse(source)?;
        e.check_vars(allowed)?;
        Ok(e)
    }

    pub fn check_vars(&self, allowed: &[&str]) -> Result<(), ExprError> {
        for name in self.free_vars() {
            if !allowed.contains(&name.as_str()) {
                return Err(ExprError::UnknownVariable { name, allowed: allowed.join(", ") });
            }
        }
        Ok(())
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) | Expr::Pi => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn eval(&self, bindings: &HashMap<&str, f64>) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(x) => *x,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(name) => return bindings.get(name.as_str()).copied().ok_or_else(|| ExprError::Unbound(name.clone())),
            Expr::Neg(e) => -e.eval(bindings)?,
            Expr::Binary(op, l, r) => apply_binary(*op, l.eval(bindings)?, r.eval(bindings)?)?,
            Expr::Call(f, args) => {
                let a = args[0].eval(bindings)?;
                let b = if f.arity() == 2 { args[1].eval(bindings)? } else { 0.0 };
                apply_func(*f, a, b)?
            }
        };
        Ok(v)
    }

    /// Compiles against an ordered variable list; variable `vars[i]` is read
    /// from slot `i` at evaluation time.
    pub fn compile(&self, vars: &[&str]) -> Result<Compiled, ExprError> {
        let node = match self {
            Expr::Num(x) => Compiled::Num(*x),
            Expr::Pi => Compiled::Num(std::f64::consts::PI),
            Expr::Var(name) => match vars.iter().position(|v| v == name) {
                Some(i) => Compiled::Slot(i),
                None => return Err(ExprError::UnknownVariable { name: name.clone(), allowed: vars.join(", ") }),
            },
            Expr::Neg(e) => Compiled::Neg(Box::new(e.compile(vars)?)),
            Expr::Binary(op, l, r) => Compiled::Binary(*op, Box::new(l.compile(vars)?), Box::new(r.compile(vars)?)),
            Expr::Call(f, args) => {
                let a = Box::new(args[0].compile(vars)?);
                if f.arity() == 2 {
                    Compiled::Call2(*f, a, Box::new(args[1].compile(vars)?))
                } else {
                    Compiled::Call1(*f, a)
                }
            }
        };
        Ok(node)
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    // Debug formatting is the shortest representation that round-trips.
    write!(f, "{x:?}")
}

/// Fully parenthesized rendering that re-parses to an identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write_num(f, *x),
            Expr::Pi => f.write_str("pi"),
            Expr::Var(v) => f.write_str(v),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn finite(op: &'static str, arg: f64, value: f64) -> Result<f64, ExprError> {
    if value.is_finite() {
        Ok(value)
    } else if value.is_infinite() && arg.is_finite() {
        Err(ExprError::Overflow { op, arg })
    } else {
        Err(ExprError::Domain { op, arg })
    }
}

fn apply_binary(op: BinOp, a: f64, b: f64) -> Result<f64, ExprError> {
    match op {
        BinOp::Add => finite("addition", a, a + b),
        BinOp::Sub => finite("subtraction", a, a - b),
        BinOp::Mul => finite("multiplication", a, a * b),
        BinOp::Div => {
            if b == 0.0 {
                return Err(ExprError::Domain { op: "division by zero", arg: a });
            }
            finite("division", a, a / b)
        }
        BinOp::Pow => finite("power", a, power(a, b)),
    }
}

/// `powf`, with small integer exponents done by repeated multiplication.
pub fn power(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 16.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn apply_func(func: Func, a: f64, b: f64) -> Result<f64, ExprError> {
    match func {
        Func::Sin => finite("sin", a, a.sin()),
        Func::Cos => finite("cos", a, a.cos()),
        Func::Tan => finite("tan", a, a.tan()),
        Func::Exp => finite("exp", a, a.exp()),
        Func::Log => {
            if a <= 0.0 {
                return Err(ExprError::Domain { op: "log of nonpositive value", arg: a });
            }
            Ok(a.ln())
        }
        Func::Sqrt => {
            if a < 0.0 {
                return Err(ExprError::Domain { op: "sqrt of negative value", arg: a });
            }
            Ok(a.sqrt())
        }
        Func::Abs => Ok(a.abs()),
        Func::Pow => finite("pow", a, power(a, b)),
        Func::Min => Ok(a.min(b)),
        Func::Max => Ok(a.max(b)),
    }
}

/// Expression with variables resolved to slot indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Compiled {
    Num(f64),
    Slot(usize),
    Neg(Box<Compiled>),
    Binary(BinOp, Box<Compiled>, Box<Compiled>),
    Call1(Func, Box<Compiled>),
    Call2(Func, Box<Compiled>, Box<Compiled>),
}

impl Compiled {
    /// Panics if `args` is shorter than the compiled variable list.
    pub fn eval(&self, args: &[f64]) -> Result<f64, ExprError> {
        match self {
            Compiled::Num(x) => Ok(*x),
            Compiled::Slot(i) => Ok(args[*i]),
            Compiled::Neg(e) => Ok(-e.eval(args)?),
            Compiled::Binary(op, l, r) => apply_binary(*op, l.eval(args)?, r.eval(args)?),
            Compiled::Call1(f, a) => apply_func(*f, a.eval(args)?, 0.0),
            Compiled::Call2(f, a, b) => apply_func(*f, a.eval(args)?, b.eval(args)?),
        }
    }
}

/// A parsed, validated and compiled coefficient expression.
#[derive(Debug, Clone)]
pub struct Formula {
    source: String,
    expr: Expr,
    compiled: Compiled,
    constant: bool,
}

impl Formula {
    pub fn new(source: &str, vars: &[&str]) -> Result<Formula, ExprError> {
        let expr = Expr::parse_in(source, vars)?;
        let compiled = expr.compile(vars)?;
        let constant = expr.free_vars().is_empty();
        Ok(Formula { source: source.to_string(), expr, compiled, constant })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// True when the expression references no variables.
    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn eval(&self, args: &[f64]) -> Result<f64, ExprError> {
        self.compiled.eval(args)
    }

    pub fn eval1(&self, x: f64) -> Result<f64, ExprError> {
        self.compiled.eval(std::slice::from_ref(&x))
    }
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.expr == other.expr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub max_discrepancy: f64,
    pub at: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Finite-difference step used when checking `F_z` against `F`.
pub fn fd_step(z: f64) -> f64 {
    (1e-6 * z.abs()).max(1e-6)
}

/// Compares `fz` against central differences of `f` (both in `z`) at `n`
/// equally spaced points of `[lo, hi]`.
pub fn check_derivative_pair(f: &Expr, fz: &Expr, lo: f64, hi: f64, n: usize, tol: f64) -> Result<DerivativeCheck, ExprError> {
    assert!(lo < hi && n >= 3, "check_derivative_pair needs lo < hi and n >= 3");
    let f = f.compile(&["z"])?;
    let fz = fz.compile(&["z"])?;
    let mut worst = (0.0_f64, lo);
    for i in 0..n {
        let z = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let h = fd_step(z);
        let fd = (f.eval(&[z + h])? - f.eval(&[z - h])?) / (2.0 * h);
        let err = (fz.eval(&[z])? - fd).abs();
        if err > worst.0 {
            worst = (err, z);
        }
    }
    Ok(DerivativeCheck { max_discrepancy: worst.0, at: worst.1, samples: n, tolerance: tol, passed: worst.0 <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn num(x: f64) -> Box<Expr> {
        Box::new(Expr::Num(x))
    }

    fn var(v: &str) -> Box<Expr> {
        Box::new(Expr::Var(v.into()))
    }

    fn eval_at(src: &str, vars: &[(&str, f64)]) -> Result<f64, ExprError> {
        let map: HashMap<&str, f64> = vars.iter().copied().collect();
        Expr::parse(src)?.eval(&map)
    }

    #[test]
    fn parses_grammar_cases() {
        assert_eq!(
            Expr::parse("2*t + 1").unwrap(),
            Expr::Binary(BinOp::Add, Box::new(Expr::Binary(BinOp::Mul, num(2.0), var("t"))), num(1.0))
        );
        assert_eq!(Expr::parse("-cos(z)").unwrap(), Expr::Neg(Box::new(Expr::Call(Func::Cos, vec![Expr::Var("z".into())]))));
    }

    #[test]
    fn unbalanced_paren_reports_offset() {
        match Expr::parse("sin(") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(Expr::parse("(1 + 2"), Err(ExprError::Syntax { offset: 6, .. })));
        assert!(matches!(Expr::parse("1 +"), Err(ExprError::Syntax { offset: 3, .. })));
        assert!(matches!(Expr::parse("1 2"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(Expr::parse(""), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expr::parse("3 $ 4"), Err(ExprError::Syntax { offset: 2, .. })));
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(Expr::parse("foo(1)"), Err(ExprError::UnknownFunction { offset: 0, .. })));
        assert!(matches!(Expr::parse_in("z + t", &["z"]), Err(ExprError::UnknownVariable { name, .. }) if name == "t"));
        assert!(matches!(Expr::parse("max(1)"), Err(ExprError::Arity { expected: 2, actual: 1, .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval_at("-2^2", &[]).unwrap(), -4.0);
        assert_eq!(eval_at("2^3^2", &[]).unwrap(), 512.0);
        assert_eq!(eval_at("2^-1", &[]).unwrap(), 0.5);
        assert_eq!(eval_at("8/2/2", &[]).unwrap(), 2.0);
        assert_eq!(eval_at("1 - 2 - 3", &[]).unwrap(), -4.0);
        assert_eq!(eval_at("-3*2", &[]).unwrap(), -6.0);
        assert_eq!(eval_at("1.5e2 + .5", &[]).unwrap(), 150.5);
        assert_eq!(eval_at("min(3, max(1, 2)) + pow(2, 3) + abs(-1)", &[]).unwrap(), 11.0);
    }

    #[test]
    fn evaluates_examples() {
        assert_eq!(eval_at("2*t+1", &[("t", 1.0)]).unwrap(), 3.0);
        assert_eq!(eval_at("z^3", &[("z", 2.0)]).unwrap(), 8.0);
        assert!(eval_at("sin(pi)", &[]).unwrap().abs() <= 1e-15);
    }

    #[test]
    fn eval_errors() {
        assert_eq!(eval_at("t + 1", &[]), Err(ExprError::Unbound("t".into())));
        assert!(matches!(eval_at("log(0)", &[]), Err(ExprError::Domain { .. })));
        assert!(matches!(eval_at("sqrt(-1)", &[]), Err(ExprError::Domain { .. })));
        assert!(matches!(eval_at("1/0", &[]), Err(ExprError::Domain { .. })));
        assert!(matches!(eval_at("(-8)^(1/3)", &[]), Err(ExprError::Domain { .. })));
        assert!(matches!(eval_at("exp(1000)", &[]), Err(ExprError::Overflow { .. })));
    }

    #[test]
    fn compiled_matches_tree_eval() {
        let e = Expr::parse("a*sin(x) + u^2 - max(ux, ut)/ (1 + uxx^2)").unwrap();
        let vars = ["x", "t", "u", "ux", "ut", "uxx", "a"];
        let c = e.compile(&vars).unwrap();
        let vals = [0.3, 1.0, -0.4, 0.2, 0.7, 1.1, 2.0];
        let map: HashMap<&str, f64> = vars.iter().copied().zip(vals).collect();
        assert_eq!(c.eval(&vals).unwrap(), e.eval(&map).unwrap());
    }

    #[test]
    fn derivative_pair_examples() {
        let p = |s: &str| Expr::parse(s).unwrap();
        assert!(check_derivative_pair(&p("z^3"), &p("3*z^2"), -1.0, 1.0, 101, 1e-6).unwrap().passed);
        assert!(check_derivative_pair(&p("sin(z)"), &p("cos(z)"), -2.0, 2.0, 101, 1e-6).unwrap().passed);
        // d/dz z^2 = 2z, so using z leaves a discrepancy |z|, largest at the ends.
        let r = check_derivative_pair(&p("z^2"), &p("z"), -1.0, 1.0, 101, 1e-6).unwrap();
        assert!(!r.passed);
        assert!((r.max_discrepancy - 1.0).abs() < 1e-6);
        assert!((r.at.abs() - 1.0).abs() < 1e-12);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0..1e6f64).prop_map(Expr::Num),
            Just(Expr::Pi),
            prop::sample::select(vec!["t", "z", "u_x"]).prop_map(|v| Expr::Var(v.to_string())),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::Binary(op, Box::new(l), Box::new(r))),
                (prop::sample::select(Func::ALL.to_vec()), inner.clone(), inner).prop_map(|(f, a, b)| {
                    let args = if f.arity() == 2 { vec![a, b] } else { vec![a] };
                    Expr::Call(f, args)
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn pretty_print_round_trips(e in arb_expr()) {
            let printed = e.to_string();
            prop_assert_eq!(Expr::parse(&printed).unwrap(), e);
        }

        #[test]
        fn whitespace_is_insignificant(e in arb_expr()) {
            let spaced = e.to_string().replace('(', " ( ").replace(')', " ) ");
            prop_assert_eq!(Expr::parse(&spaced).unwrap(), e);
        }

        /// Exact polynomial derivative pairs always pass the checker.
        #[test]
        fn polynomial_pairs_pass(coeffs in prop::collection::vec(-3.0..3.0f64, 1..6)) {
            let mut f = String::from("0");
            let mut fz = String::from("0");
            for (k, c) in coeffs.iter().enumerate() {
                f.push_str(&format!(" + ({c:?})*z^{k}"));
                if k > 0 {
                    fz.push_str(&format!(" + ({:?})*z^{}", c * k as f64, k - 1));
                }
            }
            let r = check_derivative_pair(&Expr::parse(&f).unwrap(), &Expr::parse(&fz).unwrap(), -1.5, 1.5, 101, 1e-6).unwrap();
            prop_assert!(r.passed, "{} vs {}: {:?}", f, fz, r);
        }
    }
}
