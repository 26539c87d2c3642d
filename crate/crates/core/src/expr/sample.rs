//! Random sampling of points and numeric equivalence of expressions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{Bindings, DoubleDouble, Expr, Program, Real};

/// Closed interval of admissible values; `lo == hi` pins a symbol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Interval {
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Interval {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Predicate a sampled point must satisfy.
#[derive(Clone, Debug, PartialEq)]
pub enum Exclusion {
    NonZero(Expr),
    Positive(Expr),
}

impl Exclusion {
    pub fn expr(&self) -> &Expr {
        match self {
            Exclusion::NonZero(e) | Exclusion::Positive(e) => e,
        }
    }

    pub fn admits(&self, v: f64) -> bool {
        match self {
            Exclusion::NonZero(_) => v != 0.0,
            Exclusion::Positive(_) => v > 0.0,
        }
    }
}

/// Per-symbol intervals plus predicates that exclude singular points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleDomain {
    pub intervals: BTreeMap<String, Interval>,
    pub exclusions: Vec<Exclusion>,
}

impl SampleDomain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.intervals
            .insert(name.to_string(), Interval::new(lo, hi));
        self
    }

    pub fn exclude(mut self, e: Exclusion) -> Self {
        self.exclusions.push(e);
        self
    }

    pub fn interval(&self, name: &str) -> Option<Interval> {
        self.intervals.get(name).copied()
    }

    pub fn contains(&self, b: &Bindings) -> bool {
        self.intervals
            .iter()
            .all(|(k, iv)| b.get(k).is_none_or(|v| iv.contains(v)))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("no value range for symbol `{0}`")]
    Unbound(String),
    #[error("found only {found} of {wanted} admissible points after {attempts} attempts")]
    Exhausted {
        wanted: usize,
        found: usize,
        attempts: usize,
    },
}

/// Deterministic point generator over a [`SampleDomain`].
#[derive(Clone, Debug)]
pub struct Sampler {
    domain: SampleDomain,
    rng: ChaCha8Rng,
    seed: u64,
    /// Draws allowed per requested point before giving up.
    pub attempts_per_point: usize,
}

impl Sampler {
    pub const DEFAULT_SEED: u64 = 0x5eed_c0f1;

    pub fn new(domain: SampleDomain, seed: u64) -> Sampler {
        Sampler {
            domain,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            attempts_per_point: 64,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn domain(&self) -> &SampleDomain {
        &self.domain
    }

    /// One raw draw (uniform in each interval), without exclusion checks.
    fn draw(&mut self) -> Bindings {
        let mut b = Bindings::new();
        for (name, iv) in &self.domain.intervals {
            let v = if iv.is_point() {
                iv.lo
            } else {
                self.rng.gen_range(iv.lo..iv.hi)
            };
            b.insert(name, v);
        }
        b
    }

    fn admissible(&self, b: &Bindings) -> bool {
        self.domain
            .exclusions
            .iter()
            .all(|x| match super::evaluate(x.expr(), b) {
                Ok(v) => x.admits(v),
                Err(_) => false,
            })
    }

    /// Draws an admissible point for which `accept` holds.
    pub fn sample_where<F: FnMut(&Bindings) -> bool>(
        &mut self,
        mut accept: F,
    ) -> Result<Bindings, SamplingError> {
        for _ in 0..self.attempts_per_point {
            let b = self.draw();
            if self.admissible(&b) && accept(&b) {
                return Ok(b);
            }
        }
        Err(SamplingError::Exhausted {
            wanted: 1,
            found: 0,
            attempts: self.attempts_per_point,
        })
    }

    pub fn sample(&mut self) -> Result<Bindings, SamplingError> {
        self.sample_where(|_| true)
    }

    /// `n` admissible points at which every expression in `exprs` evaluates.
    pub fn points_for(&mut self, exprs: &[Expr], n: usize) -> Result<Vec<Bindings>, SamplingError> {
        let prog = Program::compile(exprs);
        for name in prog.inputs() {
            if self.domain.interval(name).is_none() {
                return Err(SamplingError::Unbound(name.clone()));
            }
        }
        let mut out = Vec::with_capacity(n);
        let budget = n.max(1) * self.attempts_per_point;
        let mut attempts = 0;
        while out.len() < n {
            if attempts == budget {
                return Err(SamplingError::Exhausted {
                    wanted: n,
                    found: out.len(),
                    attempts,
                });
            }
            attempts += 1;
            let b = self.draw();
            if self.admissible(&b) && prog.eval(&b).is_ok() {
                out.push(b);
            }
        }
        Ok(out)
    }

    pub fn points(&mut self, n: usize) -> Result<Vec<Bindings>, SamplingError> {
        self.points_for(&[], n)
    }
}

/// True iff `|a - b| <= tol * (1 + |a| + |b|)` at `trials` sampled points where
/// both sides evaluate.
///
/// Values are computed in double-double arithmetic, so an expanded form and a
/// factored one compare equal even where f64 evaluation of either side loses
/// most of its digits to cancellation.
pub fn equivalent(
    e1: &Expr,
    e2: &Expr,
    sampler: &mut Sampler,
    trials: usize,
    tol: f64,
) -> Result<bool, SamplingError> {
    let pair = [e1.clone(), e2.clone()];
    let prog = Program::compile(&pair);
    for b in sampler.points_for(&pair, trials)? {
        let inputs: Vec<DoubleDouble> = prog
            .bind(&b)
            .expect("sampled point binds")
            .into_iter()
            .map(DoubleDouble::from_f64)
            .collect();
        let (x, y) = match prog.run(&inputs) {
            Ok(v) => (v[0], v[1]),
            Err(_) => {
                let v = prog.eval(&b).expect("sampled point evaluates");
                (DoubleDouble::from_f64(v[0]), DoubleDouble::from_f64(v[1]))
            }
        };
        let (x, y) = (x.to_f64(), y.to_f64());
        if (x - y).abs() > tol * (1.0 + x.abs() + y.abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}
