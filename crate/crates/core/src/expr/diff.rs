//! Symbolic differentiation with memoization over the shared DAG.

use std::collections::HashMap;

use super::{Expr, Func, Kind};

/// Differentiates expressions, remembering every `(node, symbol)` result so
/// repeated subexpressions across many tensor components are visited once.
#[derive(Default)]
pub struct Differentiator {
    memo: HashMap<(Expr, Expr), Expr>,
}

impl Differentiator {
    pub fn new() -> Self {
        Self::default()
    }

    /// `d e / d var`. `var` must be a symbol.
    pub fn diff(&mut self, e: &Expr, var: &Expr) -> Expr {
        debug_assert!(
            var.as_sym().is_some(),
            "differentiation variable must be a symbol"
        );
        // post-order over nodes not yet in the memo, so deep DAGs do not recurse
        let mut stack = vec![(e.clone(), false)];
        while let Some((node, ready)) = stack.pop() {
            let key = (node.clone(), var.clone());
            if self.memo.contains_key(&key) {
                continue;
            }
            if !ready {
                stack.push((node.clone(), true));
                for c in node.children() {
                    if !self.memo.contains_key(&(c.clone(), var.clone())) {
                        stack.push((c, false));
                    }
                }
                continue;
            }
            let d = self.rule(&node, var);
            self.memo.insert(key, d);
        }
        self.memo[&(e.clone(), var.clone())].clone()
    }

    fn get(&self, e: &Expr, var: &Expr) -> Expr {
        self.memo[&(e.clone(), var.clone())].clone()
    }

    fn rule(&self, e: &Expr, var: &Expr) -> Expr {
        match e.kind() {
            Kind::Num(_) | Kind::Pi => Expr::zero(),
            Kind::Sym(_) => {
                if e == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Kind::Add(ts) => Expr::add_all(ts.iter().map(|t| self.get(t, var))),
            Kind::Mul(fs) => {
                let mut terms = Vec::new();
                for (i, f) in fs.iter().enumerate() {
                    let df = self.get(f, var);
                    if df.is_zero() {
                        continue;
                    }
                    let others = fs
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, g)| g.clone());
                    terms.push(Expr::mul_all(others.chain(std::iter::once(df))));
                }
                Expr::add_all(terms)
            }
            Kind::Pow(b, x) => {
                let db = self.get(b, var);
                let dx = self.get(x, var);
                if dx.is_zero() {
                    if db.is_zero() {
                        return Expr::zero();
                    }
                    // x * b^(x-1) * b'
                    let lowered = b.pow(&(x - &Expr::one()));
                    return Expr::mul_all([x.clone(), lowered, db]);
                }
                // b^x * (x' log b + x b'/b)
                let log_term = Expr::mul_all([dx, Expr::apply(Func::Log, b)]);
                let base_term = Expr::mul_all([x.clone(), db, b.recip()]);
                Expr::mul_all([e.clone(), Expr::add_all([log_term, base_term])])
            }
            Kind::Func(f, u) => {
                let du = self.get(u, var);
                if du.is_zero() {
                    return Expr::zero();
                }
                let outer = match f {
                    Func::Sin => Expr::apply(Func::Cos, u),
                    Func::Cos => Expr::apply(Func::Sin, u).neg(),
                    Func::Tan => Expr::one() + Expr::apply(Func::Tan, u).powi(2),
                    Func::Exp => e.clone(),
                    Func::Log => u.recip(),
                    Func::Abs => Expr::apply(Func::Sign, u),
                    // zero away from the jump
                    Func::Sign => return Expr::zero(),
                };
                Expr::mul_all([outer, du])
            }
        }
    }
}

/// `d e / d var` with a fresh memo table.
pub fn differentiate(e: &Expr, var: &str) -> Expr {
    Differentiator::new().diff(e, &Expr::sym(var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn d(s: &str, v: &str) -> Expr {
        differentiate(&parse(s).unwrap(), v)
    }

    #[test]
    fn polynomial() {
        assert_eq!(d("r^2", "r"), parse("2*r").unwrap());
        assert_eq!(d("x^3 + 5*x + 7", "x"), parse("3*x^2 + 5").unwrap());
    }

    #[test]
    fn schwarzschild_lapse() {
        assert_eq!(d("1 - 2*M/r", "r"), parse("2*M/r^2").unwrap());
        assert!(d("1 - 2*M/r", "theta").is_zero());
    }

    #[test]
    fn square_root_of_absolute_value() {
        assert_eq!(
            d("sqrt(abs(h))", "h"),
            parse("sign(h)/(2*sqrt(abs(h)))").unwrap()
        );
    }

    #[test]
    fn transcendental_rules() {
        assert_eq!(d("sin(x)^2", "x"), parse("2*sin(x)*cos(x)").unwrap());
        assert_eq!(d("exp(z/10)", "z"), parse("exp(z/10)/10").unwrap());
        assert_eq!(d("log(x)", "x"), parse("1/x").unwrap());
        assert_eq!(d("tan(x)", "x"), parse("1 + tan(x)^2").unwrap());
        assert!(d("sign(x)", "x").is_zero());
        assert_eq!(d("x^x", "x"), parse("x^x*(log(x) + 1)").unwrap());
    }

    #[test]
    fn memo_is_shared_between_calls() {
        let mut dd = Differentiator::new();
        let x = Expr::sym("x");
        let e = parse("sin(x)*exp(x)").unwrap();
        let a = dd.diff(&e, &x);
        let n = dd.memo.len();
        let b = dd.diff(&e, &x);
        assert_eq!(a, b);
        assert_eq!(n, dd.memo.len());
    }
}
