use std::fmt;

use super::jet::Jet;

/// Elementary functions accepted by the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

/// Expression tree over the state variables `u` (or `u1..un`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, k) => a.eval(x).powi(*k),
            Expr::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    /// Truncated Taylor series of a scalar expression about `x0`.
    pub fn eval_jet(&self, x0: f64, order: usize) -> Jet {
        match self {
            Expr::Num(c) => Jet::constant(*c, order),
            Expr::Var(_) => Jet::variable(x0, order),
            Expr::Neg(a) => a.eval_jet(x0, order).neg(),
            Expr::Add(a, b) => a.eval_jet(x0, order).add(&b.eval_jet(x0, order)),
            Expr::Sub(a, b) => a.eval_jet(x0, order).sub(&b.eval_jet(x0, order)),
            Expr::Mul(a, b) => a.eval_jet(x0, order).mul(&b.eval_jet(x0, order)),
            Expr::Div(a, b) => a.eval_jet(x0, order).div(&b.eval_jet(x0, order)),
            Expr::Pow(a, k) => a.eval_jet(x0, order).powi(*k),
            Expr::Call(f, a) => {
                let j = a.eval_jet(x0, order);
                match f {
                    Func::Exp => j.exp(),
                    Func::Log => j.ln(),
                    Func::Sin => j.sin_cos().0,
                    Func::Cos => j.sin_cos().1,
                    Func::Sqrt => j.sqrt(),
                }
            }
        }
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(i) => num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Add(a, b) => add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => add(mul(a.diff(var), (**b).clone()), mul((**a).clone(), b.diff(var))),
            Expr::Div(a, b) => {
                let num_part = sub(mul(a.diff(var), (**b).clone()), mul((**a).clone(), b.diff(var)));
                div(num_part, pow((**b).clone(), 2))
            }
            Expr::Pow(a, k) => {
                let outer = mul(num(*k as f64), pow((**a).clone(), k - 1));
                mul(outer, a.diff(var))
            }
            Expr::Call(f, a) => {
                let inner = (**a).clone();
                let outer = match f {
                    Func::Exp => call(Func::Exp, inner),
                    Func::Log => div(num(1.0), inner),
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Sqrt => div(num(0.5), call(Func::Sqrt, inner)),
                };
                mul(outer, a.diff(var))
            }
        }
    }

    /// Highest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn display(&self, dimension: usize) -> Display<'_> {
        Display { expr: self, dimension }
    }
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(c) if *c == v)
}

pub fn num(c: f64) -> Expr {
    Expr::Num(c)
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(c) => Expr::Num(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        _ if is_num(&a, 0.0) => b,
        _ if is_num(&b, 0.0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        _ if is_num(&b, 0.0) => a,
        _ if is_num(&a, 0.0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        _ if is_num(&a, 0.0) || is_num(&b, 0.0) => Expr::Num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) if *y != 0.0 => Expr::Num(x / y),
        _ if is_num(&a, 0.0) => Expr::Num(0.0),
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, k: i32) -> Expr {
    match (&a, k) {
        (_, 0) => Expr::Num(1.0),
        (_, 1) => a,
        (Expr::Num(c), _) => Expr::Num(c.powi(k)),
        _ => Expr::Pow(Box::new(a), k),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

/// Fully parenthesized rendering that re-parses to the same tree values.
pub struct Display<'a> {
    expr: &'a Expr,
    dimension: usize,
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self.expr, self.dimension, f)
    }
}

fn write_expr(e: &Expr, dim: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Num(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
            write!(f, "(-{:e})", -c)
        }
        Expr::Num(c) => write!(f, "{c:e}"),
        Expr::Var(i) if dim == 1 => {
            debug_assert_eq!(*i, 0);
            write!(f, "u")
        }
        Expr::Var(i) => write!(f, "u{}", i + 1),
        Expr::Neg(a) => {
            write!(f, "(-")?;
            write_expr(a, dim, f)?;
            write!(f, ")")
        }
        Expr::Add(a, b) => binary(a, "+", b, dim, f),
        Expr::Sub(a, b) => binary(a, "-", b, dim, f),
        Expr::Mul(a, b) => binary(a, "*", b, dim, f),
        Expr::Div(a, b) => binary(a, "/", b, dim, f),
        Expr::Pow(a, k) => {
            write!(f, "(")?;
            write_expr(a, dim, f)?;
            write!(f, ")^{k}")
        }
        Expr::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(a, dim, f)?;
            write!(f, ")")
        }
    }
}

fn binary(a: &Expr, op: &str, b: &Expr, dim: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "(")?;
    write_expr(a, dim, f)?;
    write!(f, " {op} ")?;
    write_expr(b, dim, f)?;
    write!(f, ")")
}
