//! Closed-form scalar expressions over coordinates `x1..xn`.
//!
//! Trees are kept in a light canonical form: nested sums and products are
//! flattened and constants are folded, nothing more. The printer emits text
//! that parses back to the identical tree.

mod diff;
mod parse;

use std::fmt;

pub use parse::parse;

/// Unary functions the grammar accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

/// Expression tree. Variables are stored zero-based (`Var(0)` prints as `x1`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Neg(Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

// Smart constructors that simplify; not operator overloads.
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    /// Sum with flattening and constant folding.
    pub fn add(terms: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(terms.len());
        let mut constant = 0.0;
        let mut saw_constant = false;
        for t in terms {
            match t {
                Expr::Add(inner) => {
                    for s in inner {
                        if let Expr::Num(v) = s {
                            constant += v;
                            saw_constant = true;
                        } else {
                            flat.push(s);
                        }
                    }
                }
                Expr::Num(v) => {
                    constant += v;
                    saw_constant = true;
                }
                other => flat.push(other),
            }
        }
        if saw_constant && constant != 0.0 {
            flat.push(Expr::Num(constant));
        }
        match flat.len() {
            0 => Expr::Num(if saw_constant { constant } else { 0.0 }),
            1 => flat.pop().unwrap(),
            _ => Expr::Add(flat),
        }
    }

    /// Product with flattening and constant folding; the folded constant leads.
    pub fn mul(factors: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(factors.len());
        let mut constant = 1.0;
        for f in factors {
            match f {
                Expr::Mul(inner) => {
                    for s in inner {
                        if let Expr::Num(v) = s {
                            constant *= v;
                        } else {
                            flat.push(s);
                        }
                    }
                }
                Expr::Num(v) => constant *= v,
                other => flat.push(other),
            }
        }
        if constant == 0.0 {
            return Expr::Num(0.0);
        }
        if flat.is_empty() {
            return Expr::Num(constant);
        }
        let negate = constant == -1.0;
        if constant != 1.0 && !negate {
            flat.insert(0, Expr::Num(constant));
        }
        let product = if flat.len() == 1 { flat.pop().unwrap() } else { Expr::Mul(flat) };
        if negate {
            Expr::neg(product)
        } else {
            product
        }
    }

    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Num(v) => Expr::Num(-v),
            Expr::Neg(inner) => *inner,
            Expr::Mul(mut fs) => {
                if let Some(Expr::Num(c)) = fs.first_mut() {
                    *c = -*c;
                    if *c == 1.0 {
                        fs.remove(0);
                        return if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Mul(fs) };
                    }
                    Expr::Mul(fs)
                } else {
                    Expr::Neg(Box::new(Expr::Mul(fs)))
                }
            }
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(vec![a, Expr::neg(b)])
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Num(x), Expr::Num(y)) if *y != 0.0 => Expr::Num(x / y),
            (_, Expr::Num(y)) if *y == 1.0 => a,
            (Expr::Num(x), _) if *x == 0.0 => Expr::Num(0.0),
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn powi(base: Expr, k: i32) -> Expr {
        match (k, &base) {
            (0, _) => Expr::Num(1.0),
            (1, _) => base,
            (_, Expr::Num(v)) if v.powi(k).is_finite() => Expr::Num(v.powi(k)),
            _ => Expr::Pow(Box::new(base), k),
        }
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        if let Expr::Num(v) = arg {
            let r = f.apply(v);
            if r.is_finite() {
                return Expr::Num(r);
            }
        }
        Expr::Call(f, Box::new(arg))
    }

    /// Rebuilds the tree through the canonicalizing constructors.
    pub fn canonical(&self) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(i) => Expr::Var(*i),
            Expr::Add(ts) => Expr::add(ts.iter().map(Expr::canonical).collect()),
            Expr::Mul(fs) => Expr::mul(fs.iter().map(Expr::canonical).collect()),
            Expr::Neg(e) => Expr::neg(e.canonical()),
            Expr::Div(a, b) => Expr::div(a.canonical(), b.canonical()),
            Expr::Pow(b, k) => Expr::powi(b.canonical(), *k),
            Expr::Call(f, a) => Expr::call(*f, a.canonical()),
        }
    }

    /// Depth counting leaves as 1.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Add(ts) | Expr::Mul(ts) => 1 + ts.iter().map(Expr::depth).max().unwrap_or(0),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => 1 + e.depth(),
            Expr::Div(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Add(ts) | Expr::Mul(ts) => 1 + ts.iter().map(Expr::node_count).sum::<usize>(),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => 1 + e.node_count(),
            Expr::Div(a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Largest variable index used (zero-based), if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Add(ts) | Expr::Mul(ts) => ts.iter().filter_map(Expr::max_var).max(),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.max_var(),
            Expr::Div(a, b) => a.max_var().max(b.max_var()),
        }
    }

    /// Evaluates at `x`; variables beyond `x.len()` are a caller bug.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => x[*i],
            Expr::Add(ts) => ts.iter().map(|t| t.eval(x)).sum(),
            Expr::Mul(fs) => fs.iter().map(|f| f.eval(x)).product(),
            Expr::Neg(e) => -e.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(b, k) => b.eval(x).powi(*k),
            Expr::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    fn is_atom(&self) -> bool {
        match self {
            Expr::Num(v) => *v >= 0.0,
            Expr::Var(_) | Expr::Call(..) => true,
            _ => false,
        }
    }
}

fn fmt_num(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        write!(f, "(-{})", -v)
    } else {
        write!(f, "{v}")
    }
}

fn fmt_paren(e: &Expr, wrap: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => fmt_num(*v, f),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Add(ts) => {
                for (k, t) in ts.iter().enumerate() {
                    match (k, t) {
                        (0, _) => fmt_paren(t, matches!(t, Expr::Add(_)), f)?,
                        (_, Expr::Neg(inner)) => {
                            write!(f, " - ")?;
                            fmt_paren(inner, matches!(**inner, Expr::Add(_) | Expr::Neg(_)), f)?;
                        }
                        (_, Expr::Num(v)) if *v < 0.0 => write!(f, " - {}", -v)?,
                        (_, Expr::Mul(fs)) if matches!(fs[0], Expr::Num(c) if c < 0.0) => {
                            let mut flipped = fs.clone();
                            if let Expr::Num(c) = &mut flipped[0] {
                                *c = -*c;
                            }
                            write!(f, " - {}", Expr::Mul(flipped))?;
                        }
                        _ => {
                            write!(f, " + ")?;
                            fmt_paren(t, matches!(t, Expr::Add(_)), f)?;
                        }
                    }
                }
                Ok(())
            }
            Expr::Mul(fs) => {
                for (k, t) in fs.iter().enumerate() {
                    if k > 0 {
                        write!(f, " * ")?;
                    }
                    let wrap = !(t.is_atom() || matches!(t, Expr::Pow(..) | Expr::Num(_)));
                    fmt_paren(t, wrap, f)?;
                }
                Ok(())
            }
            Expr::Neg(e) => {
                write!(f, "-")?;
                fmt_paren(e, !(e.is_atom() || matches!(**e, Expr::Pow(..))), f)
            }
            Expr::Div(a, b) => {
                fmt_paren(a, !(a.is_atom() || matches!(**a, Expr::Pow(..) | Expr::Num(_))), f)?;
                write!(f, " / ")?;
                fmt_paren(b, !(b.is_atom() || matches!(**b, Expr::Pow(..) | Expr::Num(_))), f)
            }
            Expr::Pow(b, k) => {
                fmt_paren(b, !matches!(**b, Expr::Var(_) | Expr::Call(..)), f)?;
                write!(f, "^{k}")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_fold_and_sums_flatten() {
        let e = Expr::add(vec![Expr::Num(1.0), Expr::add(vec![Expr::var(0), Expr::Num(2.0)])]);
        assert_eq!(e, Expr::Add(vec![Expr::Var(0), Expr::Num(3.0)]));
        let m = Expr::mul(vec![Expr::Num(2.0), Expr::mul(vec![Expr::Num(3.0), Expr::var(1)])]);
        assert_eq!(m, Expr::Mul(vec![Expr::Num(6.0), Expr::Var(1)]));
        assert_eq!(Expr::mul(vec![Expr::Num(0.0), Expr::var(0)]), Expr::Num(0.0));
    }

    #[test]
    fn negation_absorbs_into_leading_constant() {
        let m = Expr::mul(vec![Expr::Num(2.0), Expr::var(0)]);
        assert_eq!(Expr::neg(m), Expr::Mul(vec![Expr::Num(-2.0), Expr::Var(0)]));
        assert_eq!(Expr::neg(Expr::neg(Expr::var(2))), Expr::Var(2));
    }

    #[test]
    fn printer_output() {
        let e = parse("4/(1+x1^2+x2^2)^2", 3).unwrap();
        assert_eq!(e.to_string(), "4 / (x1^2 + x2^2 + 1)^2");
        let e = parse("x1 - 2*x2", 3).unwrap();
        assert_eq!(e.to_string(), "x1 - 2 * x2");
    }
}
