use super::{BinOp, Expr, Func, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Op {
    Num(f64),
    X(usize),
    T,
    Neg,
    Add,
    Sub,
    Mul,
    Div(u32),
    PowConst(f64, u32),
    Pow(u32),
    Call(Func, u32),
}

/// Postfix form of an [`Expr`] for fast scalar evaluation in integrator
/// inner loops.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    /// Subexpressions named in domain errors, indexed by the fallible ops.
    sites: Vec<Expr>,
    depth: usize,
}

impl Program {
    pub fn compile(e: &Expr) -> Program {
        let mut p = Program { ops: Vec::new(), sites: Vec::new(), depth: 0 };
        let mut cur = 0;
        p.emit(e, &mut cur);
        p
    }

    fn site(&mut self, e: &Expr) -> u32 {
        self.sites.push(e.clone());
        (self.sites.len() - 1) as u32
    }

    fn push(&mut self, op: Op, cur: &mut usize, delta: isize) {
        self.ops.push(op);
        *cur = (*cur as isize + delta) as usize;
        self.depth = self.depth.max(*cur);
    }

    fn emit(&mut self, e: &Expr, cur: &mut usize) {
        match e {
            Expr::Num(v) => self.push(Op::Num(*v), cur, 1),
            Expr::Var(Var::X(i)) => self.push(Op::X(*i), cur, 1),
            Expr::Var(Var::T) => self.push(Op::T, cur, 1),
            Expr::Neg(a) => {
                self.emit(a, cur);
                self.push(Op::Neg, cur, 0);
            }
            Expr::Bin(BinOp::Pow, a, b) if b.as_const().is_some() => {
                self.emit(a, cur);
                let s = self.site(e);
                self.push(Op::PowConst(b.as_const().unwrap_or(0.0), s), cur, 0);
            }
            Expr::Bin(op, a, b) => {
                self.emit(a, cur);
                self.emit(b, cur);
                let op = match op {
                    BinOp::Add => Op::Add,
                    BinOp::Sub => Op::Sub,
                    BinOp::Mul => Op::Mul,
                    BinOp::Div => Op::Div(self.site(e)),
                    BinOp::Pow => Op::Pow(self.site(e)),
                };
                self.push(op, cur, -1);
            }
            Expr::Call(f, args) => {
                for a in args {
                    self.emit(a, cur);
                }
                let s = self.site(e);
                self.push(Op::Call(*f, s), cur, 1 - args.len() as isize);
            }
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        let mut st: Vec<f64> = Vec::with_capacity(self.depth);
        let fail = |s: u32| Error::Domain(self.sites[s as usize].to_string());
        for op in &self.ops {
            match *op {
                Op::Num(v) => st.push(v),
                Op::X(i) => st.push(*x.get(i).ok_or_else(|| Error::UnknownIdentifier(format!("x{}", i + 1)))?),
                Op::T => st.push(t),
                Op::Neg => {
                    let a = st.last_mut().expect("stack");
                    *a = -*a;
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div(_) | Op::Pow(_) => {
                    let b = st.pop().expect("stack");
                    let a = st.pop().expect("stack");
                    let r = match *op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div(s) => {
                            if b == 0.0 {
                                return Err(fail(s));
                            }
                            a / b
                        }
                        Op::Pow(s) => pow_const(a, b).ok_or_else(|| fail(s))?,
                        _ => unreachable!(),
                    };
                    st.push(r);
                }
                Op::PowConst(r, s) => {
                    let a = st.pop().expect("stack");
                    st.push(pow_const(a, r).ok_or_else(|| fail(s))?);
                }
                Op::Call(f, s) => {
                    let a = st.pop().expect("stack");
                    let r = match f {
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Tan => {
                            if a.cos() == 0.0 {
                                return Err(fail(s));
                            }
                            a.tan()
                        }
                        Func::Exp => a.exp(),
                        Func::Log => {
                            if a <= 0.0 {
                                return Err(fail(s));
                            }
                            a.ln()
                        }
                        Func::Sqrt => {
                            if a < 0.0 {
                                return Err(fail(s));
                            }
                            a.sqrt()
                        }
                        Func::Abs => a.abs(),
                        Func::Atan2 => {
                            let y = st.pop().expect("stack");
                            if y == 0.0 && a == 0.0 {
                                return Err(fail(s));
                            }
                            y.atan2(a)
                        }
                    };
                    st.push(r);
                }
            }
        }
        Ok(st.pop().expect("nonempty program"))
    }
}

pub(crate) fn pow_const(a: f64, r: f64) -> Option<f64> {
    let integral = r.fract() == 0.0 && r.abs() < 1e9;
    if integral {
        if r < 0.0 && a == 0.0 {
            return None;
        }
        Some(a.powi(r as i32))
    } else {
        if a < 0.0 {
            return None;
        }
        Some(a.powf(r))
    }
}
