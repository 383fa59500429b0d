//! A small analytic expression language over the variables `x1..xn` and `t`.
//!
//! Expressions are parsed once, evaluated either as plain floats (through a
//! compiled stack program) or as truncated multivariate Taylor jets, which
//! gives derivatives that are exact up to rounding.

mod jet;
mod parse;
mod program;

pub use jet::Jet;
pub use parse::{parse, parse_in};
pub use program::Program;

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Highest derivative order the jet machinery supports. Torsion towers of
/// depth three need four derivatives of the coframe.
pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// `x<k>`, stored zero-based.
    X(usize),
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Atan2,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan2 => "atan2",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "atan2" => Func::Atan2,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        if self == Func::Atan2 {
            2
        } else {
            1
        }
    }
}

/// Expression tree. Literals are never negative; negation is a node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Arc<Expr>),
    Bin(BinOp, Arc<Expr>, Arc<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
            Expr::Neg(Arc::new(Expr::Num(-v)))
        } else {
            Expr::Num(v)
        }
    }

    pub fn x(i: usize) -> Expr {
        Expr::Var(Var::X(i))
    }

    pub fn t() -> Expr {
        Expr::Var(Var::T)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Arc::new(a), Arc::new(b))
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Expr {
        Expr::Call(f, args)
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Arc::new(a))
    }

    /// Literal value if the node is a (possibly negated) number.
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(a) => a.as_const().map(|v| -v),
            _ => None,
        }
    }

    // Light constant folding keeps generated expressions (Gram-Schmidt
    // frames, disguised gauges) from ballooning. Parsed trees never go
    // through these helpers.
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(0.0), _) => b,
            (_, Some(0.0)) => a,
            (Some(x), Some(y)) => Expr::num(x + y),
            _ => Expr::bin(BinOp::Add, a, b),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (_, Some(0.0)) => a,
            (Some(0.0), _) => Expr::neg_folded(b),
            (Some(x), Some(y)) => Expr::num(x - y),
            _ => Expr::bin(BinOp::Sub, a, b),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(0.0), _) | (_, Some(0.0)) => Expr::Num(0.0),
            (Some(1.0), _) => b,
            (_, Some(1.0)) => a,
            (Some(-1.0), _) => Expr::neg_folded(b),
            (_, Some(-1.0)) => Expr::neg_folded(a),
            (Some(x), Some(y)) => Expr::num(x * y),
            _ => Expr::bin(BinOp::Mul, a, b),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(0.0), _) => Expr::Num(0.0),
            (_, Some(1.0)) => a,
            _ => Expr::bin(BinOp::Div, a, b),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        match b.as_const() {
            Some(1.0) => a,
            _ => Expr::bin(BinOp::Pow, a, b),
        }
    }

    pub fn neg_folded(a: Expr) -> Expr {
        match a {
            Expr::Neg(inner) => (*inner).clone(),
            Expr::Num(v) => Expr::num(-v),
            other => Expr::neg(other),
        }
    }

    pub fn sqrt(a: Expr) -> Expr {
        match a.as_const() {
            Some(v) if v >= 0.0 => Expr::num(v.sqrt()),
            _ => Expr::call(Func::Sqrt, vec![a]),
        }
    }

    /// Linear combination `sum c_k e_k`, skipping zero coefficients and
    /// omitting unit ones.
    pub fn linear_combination(terms: &[(f64, Expr)]) -> Expr {
        let mut acc: Option<Expr> = None;
        for (c, e) in terms {
            if *c == 0.0 || e.as_const() == Some(0.0) {
                continue;
            }
            let mag = c.abs();
            let term = if mag == 1.0 { e.clone() } else { Expr::mul(Expr::num(mag), e.clone()) };
            acc = Some(match acc {
                None if *c < 0.0 => Expr::neg_folded(term),
                None => term,
                Some(a) if *c < 0.0 => Expr::bin(BinOp::Sub, a, term),
                Some(a) => Expr::bin(BinOp::Add, a, term),
            });
        }
        acc.unwrap_or(Expr::Num(0.0))
    }

    /// Largest `x` index used (one-based count), i.e. the minimal chart dimension.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(Var::T) => 0,
            Expr::Var(Var::X(i)) => i + 1,
            Expr::Neg(a) => a.arity(),
            Expr::Bin(_, a, b) => a.arity().max(b.arity()),
            Expr::Call(_, args) => args.iter().map(Expr::arity).max().unwrap_or(0),
        }
    }

    pub fn uses_t(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(Var::X(_)) => false,
            Expr::Var(Var::T) => true,
            Expr::Neg(a) => a.uses_t(),
            Expr::Bin(_, a, b) => a.uses_t() || b.uses_t(),
            Expr::Call(_, args) => args.iter().any(Expr::uses_t),
        }
    }

    /// Scalar evaluation by tree walk. Hot loops should compile a [`Program`].
    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        Program::compile(self).eval(x, t)
    }

    /// Jet of the expression in the variables `x1..xn` at `point`, with `t = 0`.
    pub fn eval_jet(&self, point: &[f64], order: usize) -> Result<Jet> {
        self.taylor(point, 0.0, order, false)
    }

    /// General jet evaluation. With `time_var` set, `t` becomes the last jet
    /// variable after the `x` coordinates.
    pub fn taylor(&self, point: &[f64], t: f64, order: usize, time_var: bool) -> Result<Jet> {
        if order > MAX_ORDER {
            return Err(Error::Invalid(format!("jet order {order} exceeds {MAX_ORDER}")));
        }
        let n = point.len() + usize::from(time_var);
        let vars: Vec<Jet> = (0..point.len()).map(|i| Jet::variable(n, order, i, point[i])).collect();
        let tj = if time_var { Jet::variable(n, order, n - 1, t) } else { Jet::constant(n, order, t) };
        self.jet_with(&vars, &tj)
    }

    /// Evaluate with caller-supplied jets for the variables. Useful for
    /// composing an expression with another jet (chain rule).
    pub fn jet_with(&self, vars: &[Jet], t: &Jet) -> Result<Jet> {
        let proto = t;
        match self {
            Expr::Num(v) => Ok(Jet::constant(proto.nvars(), proto.order(), *v)),
            Expr::Var(Var::T) => Ok(t.clone()),
            Expr::Var(Var::X(i)) => vars
                .get(*i)
                .cloned()
                .ok_or_else(|| Error::UnknownIdentifier(format!("x{}", i + 1))),
            Expr::Neg(a) => Ok(-&a.jet_with(vars, t)?),
            Expr::Bin(op, a, b) => {
                let ja = a.jet_with(vars, t)?;
                if *op == BinOp::Pow {
                    if let Some(r) = b.as_const() {
                        return ja.powf(r).ok_or_else(|| Error::Domain(self.to_string()));
                    }
                }
                let jb = b.jet_with(vars, t)?;
                let out = match op {
                    BinOp::Add => Some(&ja + &jb),
                    BinOp::Sub => Some(&ja - &jb),
                    BinOp::Mul => Some(&ja * &jb),
                    BinOp::Div => ja.div(&jb),
                    BinOp::Pow => {
                        if jb.is_constant() {
                            ja.powf(jb.value())
                        } else {
                            ja.ln().map(|l| (&l * &jb).exp())
                        }
                    }
                };
                out.ok_or_else(|| Error::Domain(self.to_string()))
            }
            Expr::Call(f, args) => {
                let a = args[0].jet_with(vars, t)?;
                let out = match f {
                    Func::Sin => Some(a.sin()),
                    Func::Cos => Some(a.cos()),
                    Func::Tan => a.sin().div(&a.cos()),
                    Func::Exp => Some(a.exp()),
                    Func::Log => a.ln(),
                    Func::Sqrt => a.powf(0.5),
                    Func::Abs => a.abs(),
                    Func::Atan2 => {
                        let b = args[1].jet_with(vars, t)?;
                        Jet::atan2(&a, &b)
                    }
                };
                out.ok_or_else(|| Error::Domain(self.to_string()))
            }
        }
    }

    /// Symbolic partial derivative. Produces unsimplified trees apart from
    /// the constant folding in the smart constructors; used to build derived
    /// forms such as connection 1-forms of surface metrics.
    pub fn diff(&self, v: Var) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(w) => Expr::Num(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg_folded(a.diff(v)),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.as_ref().clone(), b.as_ref().clone());
                let (da, db) = (a.diff(v), b.diff(v));
                match op {
                    BinOp::Add => Expr::add(da, db),
                    BinOp::Sub => Expr::sub(da, db),
                    BinOp::Mul => Expr::add(Expr::mul(da, b), Expr::mul(a, db)),
                    BinOp::Div => Expr::div(
                        Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a, db)),
                        Expr::pow(b, Expr::Num(2.0)),
                    ),
                    BinOp::Pow => match b.as_const() {
                        Some(r) => Expr::mul(
                            Expr::mul(Expr::num(r), Expr::pow(a, Expr::num(r - 1.0))),
                            da,
                        ),
                        None => {
                            // d(a^b) = a^b (b' log a + b a'/a)
                            let inner = Expr::add(
                                Expr::mul(db, Expr::call(Func::Log, vec![a.clone()])),
                                Expr::div(Expr::mul(b.clone(), da), a.clone()),
                            );
                            Expr::mul(self.clone(), inner)
                        }
                    },
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].clone();
                let da = a.diff(v);
                match f {
                    Func::Sin => Expr::mul(Expr::call(Func::Cos, vec![a]), da),
                    Func::Cos => Expr::neg_folded(Expr::mul(Expr::call(Func::Sin, vec![a]), da)),
                    Func::Tan => Expr::div(da, Expr::pow(Expr::call(Func::Cos, vec![a]), Expr::Num(2.0))),
                    Func::Exp => Expr::mul(self.clone(), da),
                    Func::Log => Expr::div(da, a),
                    Func::Sqrt => Expr::div(da, Expr::mul(Expr::Num(2.0), self.clone())),
                    Func::Abs => Expr::mul(Expr::div(a.clone(), self.clone()), da),
                    Func::Atan2 => {
                        let b = args[1].clone();
                        let db = b.diff(v);
                        let r2 = Expr::add(
                            Expr::pow(a.clone(), Expr::Num(2.0)),
                            Expr::pow(b.clone(), Expr::Num(2.0)),
                        );
                        Expr::div(Expr::sub(Expr::mul(b, da), Expr::mul(a, db)), r2)
                    }
                }
            }
        }
    }

    /// Substitute expressions for the `x` variables (index i gets `subs[i]`).
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        match self {
            Expr::Num(_) | Expr::Var(Var::T) => self.clone(),
            Expr::Var(Var::X(i)) => subs.get(*i).cloned().unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::neg(a.substitute(subs)),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.substitute(subs), b.substitute(subs)),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.substitute(subs)).collect()),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(e: &Expr, paren: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            if paren {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(a, a.prec() < 3, f)
            }
            Expr::Bin(op, a, b) => {
                let p = self.prec();
                let sym = match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                if *op == BinOp::Pow {
                    // base binds tighter than anything but atoms; exponent is a factor
                    wrap(a, a.prec() <= 4, f)?;
                    write!(f, "{sym}")?;
                    wrap(b, b.prec() < 3, f)
                } else {
                    wrap(a, a.prec() < p, f)?;
                    write!(f, "{sym}")?;
                    wrap(b, b.prec() <= p, f)
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}
