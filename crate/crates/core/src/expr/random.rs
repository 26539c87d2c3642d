//! Random expression trees for property tests and fuzzing.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use super::{Expr, Func};

/// Generator of random expression trees over a fixed set of symbols.
#[derive(Clone, Debug)]
pub struct ExprGen {
    pub symbols: Vec<String>,
    pub max_depth: u32,
    /// Restrict to functions that are smooth everywhere and to
    /// denominators bounded away from zero.
    pub smooth: bool,
}

impl ExprGen {
    pub fn new(symbols: &[&str], max_depth: u32) -> ExprGen {
        ExprGen {
            symbols: symbols.iter().map(|s| s.to_string()).collect(),
            max_depth,
            smooth: false,
        }
    }

    pub fn smooth(mut self) -> ExprGen {
        self.smooth = true;
        self
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Expr {
        self.node(rng, self.max_depth)
    }

    fn leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> Expr {
        match rng.gen_range(0..10) {
            0..=5 => Expr::sym(&self.symbols[rng.gen_range(0..self.symbols.len())]),
            6 if !self.smooth => Expr::pi(),
            7 => Expr::num(BigRational::new(
                BigInt::from(rng.gen_range(-9..=9)),
                BigInt::from(rng.gen_range(1..=4)),
            )),
            _ => Expr::int(rng.gen_range(-5..=5)),
        }
    }

    fn node<R: Rng + ?Sized>(&self, rng: &mut R, depth: u32) -> Expr {
        if depth == 0 || rng.gen_bool(0.25) {
            return self.leaf(rng);
        }
        let d = depth - 1;
        if self.smooth {
            return match rng.gen_range(0..7) {
                0 | 1 => self.node(rng, d) + self.node(rng, d),
                2 | 3 => self.node(rng, d) * self.node(rng, d),
                4 => self.node(rng, d).powi(rng.gen_range(2..=3)),
                5 => {
                    let u = self.node(rng, d);
                    match rng.gen_range(0..3) {
                        0 => Expr::apply(Func::Sin, &u),
                        1 => Expr::apply(Func::Cos, &u),
                        _ => Expr::apply(Func::Exp, &(&u / (Expr::one() + u.powi(2)))),
                    }
                }
                _ => self.node(rng, d) / (Expr::one() + self.node(rng, d).powi(2)),
            };
        }
        match rng.gen_range(0..10) {
            0 | 1 => self.node(rng, d) + self.node(rng, d),
            2 => self.node(rng, d) - self.node(rng, d),
            3 | 4 => self.node(rng, d) * self.node(rng, d),
            5 => self.node(rng, d) / self.node(rng, d),
            6 => {
                let e = match rng.gen_range(0..4) {
                    0 => Expr::int(rng.gen_range(-3..=4)),
                    1 => Expr::rational(rng.gen_range(-3..=3), 2),
                    2 => Expr::rational(1, 3),
                    _ => self.leaf(rng),
                };
                self.node(rng, d).pow(&e)
            }
            7 => self.node(rng, d).neg(),
            _ => {
                let f = Func::ALL[rng.gen_range(0..Func::ALL.len())];
                Expr::apply(f, &self.node(rng, d))
            }
        }
    }
}
