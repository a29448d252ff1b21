use super::{Expr, Func};

impl Expr {
    /// Exact partial derivative along coordinate `axis` (zero-based).
    pub fn differentiate(&self, axis: usize) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(i) => Expr::Num(if *i == axis { 1.0 } else { 0.0 }),
            Expr::Add(ts) => Expr::add(ts.iter().map(|t| t.differentiate(axis)).collect()),
            Expr::Mul(fs) => {
                let mut terms = Vec::with_capacity(fs.len());
                for k in 0..fs.len() {
                    let dk = fs[k].differentiate(axis);
                    if dk.is_zero() {
                        continue;
                    }
                    let mut factors: Vec<Expr> = Vec::with_capacity(fs.len());
                    for (j, f) in fs.iter().enumerate() {
                        factors.push(if j == k { dk.clone() } else { f.clone() });
                    }
                    terms.push(Expr::mul(factors));
                }
                Expr::add(terms)
            }
            Expr::Neg(e) => Expr::neg(e.differentiate(axis)),
            Expr::Div(a, b) => {
                let da = a.differentiate(axis);
                let db = b.differentiate(axis);
                // (a/b)' = a'/b - a b' / b^2
                let first = if da.is_zero() { Expr::Num(0.0) } else { Expr::div(da, (**b).clone()) };
                let second = if db.is_zero() {
                    Expr::Num(0.0)
                } else {
                    Expr::div(Expr::mul(vec![(**a).clone(), db]), Expr::powi((**b).clone(), 2))
                };
                Expr::sub(first, second)
            }
            Expr::Pow(base, k) => {
                let db = base.differentiate(axis);
                if db.is_zero() {
                    return Expr::Num(0.0);
                }
                Expr::mul(vec![Expr::Num(*k as f64), Expr::powi((**base).clone(), k - 1), db])
            }
            Expr::Call(func, arg) => {
                let da = arg.differentiate(axis);
                if da.is_zero() {
                    return Expr::Num(0.0);
                }
                let a = (**arg).clone();
                let outer = match func {
                    Func::Exp => self.clone(),
                    Func::Log => Expr::div(Expr::Num(1.0), a),
                    Func::Sin => Expr::call(Func::Cos, a),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, a)),
                    Func::Sqrt => Expr::div(Expr::Num(0.5), self.clone()),
                };
                Expr::mul(vec![outer, da])
            }
        }
    }
}
