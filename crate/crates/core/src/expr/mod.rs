//! Hash-consed symbolic expressions.
//!
//! Every [`Expr`] is interned: two structurally equal expressions built anywhere
//! in the process share one allocation, so equality and hashing are pointer
//! operations. The smart constructors ([`Expr::add_all`], [`Expr::mul_all`],
//! [`Expr::pow`], [`Expr::apply`]) keep every node in canonical form:
//!
//! * sums are flattened, like terms are collected, operands are sorted and the
//!   rational content is pulled out so the remaining sum is primitive with a
//!   positive leading coefficient;
//! * products are flattened, like bases are merged by adding exponents and at
//!   most one rational coefficient leads the factor list;
//! * negation and division are represented as multiplication by `-1` and as a
//!   power with exponent `-1`;
//! * numeric literals are exact rationals, positive rational powers are split
//!   into prime radicals with exponents in `(0, 1)`.
//!
//! The interning table is sharded behind mutexes and holds weak references, so
//! expressions may be built concurrently from any thread and are freed once the
//! last strong handle is dropped.

mod diff;
mod eval;
mod number;
mod ordering;
mod parse;
mod print;
mod random;
mod sample;
mod simplify;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Weak};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use once_cell::sync::Lazy;
use parking_lot::Mutex;

pub use diff::{differentiate, Differentiator};
pub use eval::{evaluate, Bindings, DoubleDouble, EvalError, Program, Real};
pub use parse::{parse, ParseError, ParseErrorKind};
pub use random::ExprGen;
pub use sample::{equivalent, Exclusion, Interval, SampleDomain, Sampler, SamplingError};
pub use simplify::{simplify, Assumptions, Simplifier};

/// Elementary functions understood by the engine. `sqrt` is accepted by the
/// parser but stored as a power with exponent `1/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Abs,
    Sign,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Abs,
        Func::Sign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }
}

/// Node payload. Children are themselves interned expressions.
#[derive(Debug)]
pub enum Kind {
    Num(BigRational),
    Pi,
    Sym(Arc<str>),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, Expr),
    Func(Func, Expr),
}

impl Kind {
    pub(crate) fn rank(&self) -> u8 {
        match self {
            Kind::Num(_) => 0,
            Kind::Pi => 1,
            Kind::Sym(_) => 2,
            Kind::Pow(..) => 3,
            Kind::Mul(_) => 4,
            Kind::Add(_) => 5,
            Kind::Func(..) => 6,
        }
    }

    fn shallow_eq(&self, other: &Kind) -> bool {
        match (self, other) {
            (Kind::Num(a), Kind::Num(b)) => a == b,
            (Kind::Pi, Kind::Pi) => true,
            (Kind::Sym(a), Kind::Sym(b)) => a == b,
            (Kind::Add(a), Kind::Add(b)) | (Kind::Mul(a), Kind::Mul(b)) => a == b,
            (Kind::Pow(a, b), Kind::Pow(c, d)) => a == c && b == d,
            (Kind::Func(f, a), Kind::Func(g, b)) => f == g && a == b,
            _ => false,
        }
    }

    fn structural_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.rank().hash(&mut h);
        match self {
            Kind::Num(v) => v.hash(&mut h),
            Kind::Pi => {}
            Kind::Sym(s) => s.hash(&mut h),
            Kind::Add(xs) | Kind::Mul(xs) => {
                for x in xs {
                    x.0.hash.hash(&mut h);
                }
            }
            Kind::Pow(a, b) => {
                a.0.hash.hash(&mut h);
                b.0.hash.hash(&mut h);
            }
            Kind::Func(f, a) => {
                f.hash(&mut h);
                a.0.hash.hash(&mut h);
            }
        }
        h.finish()
    }
}

#[derive(Debug)]
pub struct Node {
    hash: u64,
    kind: Kind,
}

/// An immutable, interned symbolic expression.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

const SHARDS: usize = 64;

#[derive(Default)]
struct Shard {
    buckets: HashMap<u64, Vec<Weak<Node>>>,
    entries: usize,
    sweep_at: usize,
}

static INTERNER: Lazy<Vec<Mutex<Shard>>> =
    Lazy::new(|| (0..SHARDS).map(|_| Mutex::new(Shard::default())).collect());

fn intern(kind: Kind) -> Expr {
    let hash = kind.structural_hash();
    let mut shard = INTERNER[(hash % SHARDS as u64) as usize].lock();
    if let Some(bucket) = shard.buckets.get(&hash) {
        for weak in bucket {
            if let Some(node) = weak.upgrade() {
                if node.kind.shallow_eq(&kind) {
                    return Expr(node);
                }
            }
        }
    }
    let node = Arc::new(Node { hash, kind });
    shard
        .buckets
        .entry(hash)
        .or_default()
        .push(Arc::downgrade(&node));
    shard.entries += 1;
    if shard.entries > shard.sweep_at {
        let mut live = 0;
        shard.buckets.retain(|_, bucket| {
            bucket.retain(|w| w.strong_count() > 0);
            live += bucket.len();
            !bucket.is_empty()
        });
        shard.entries = live;
        shard.sweep_at = (2 * live).max(4096);
    }
    Expr(node)
}

fn int_rational(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

impl Expr {
    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn num(v: BigRational) -> Expr {
        intern(Kind::Num(v))
    }

    pub fn int(v: i64) -> Expr {
        Expr::num(int_rational(v))
    }

    pub fn rational(n: i64, d: i64) -> Expr {
        Expr::num(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn pi() -> Expr {
        intern(Kind::Pi)
    }

    pub fn sym(name: &str) -> Expr {
        intern(Kind::Sym(Arc::from(name)))
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self.kind() {
            Kind::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self.kind() {
            Kind::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num().is_some_and(|v| v.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_num().is_some_and(|v| v.is_one())
    }

    /// Children in stored order.
    pub fn children(&self) -> Vec<Expr> {
        match self.kind() {
            Kind::Num(_) | Kind::Pi | Kind::Sym(_) => Vec::new(),
            Kind::Add(xs) | Kind::Mul(xs) => xs.clone(),
            Kind::Pow(a, b) => vec![a.clone(), b.clone()],
            Kind::Func(_, a) => vec![a.clone()],
        }
    }

    pub fn neg(&self) -> Expr {
        Expr::mul_all([Expr::int(-1), self.clone()])
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    pub fn powi(&self, e: i64) -> Expr {
        self.pow(&Expr::int(e))
    }

    pub fn sqrt(&self) -> Expr {
        self.pow(&Expr::rational(1, 2))
    }

    /// Canonical sum.
    pub fn add_all<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        let mut constant = BigRational::zero();
        let mut collected: HashMap<Expr, BigRational> = HashMap::new();
        let mut stack: Vec<(BigRational, Expr)> =
            items.into_iter().map(|e| (BigRational::one(), e)).collect();
        while let Some((c, e)) = stack.pop() {
            match e.kind() {
                Kind::Num(v) => constant += c * v,
                Kind::Add(ts) => stack.extend(ts.iter().map(|t| (c.clone(), t.clone()))),
                Kind::Mul(fs) => match fs[0].kind() {
                    Kind::Num(v) => {
                        let c = c * v;
                        if fs.len() == 2 && matches!(fs[1].kind(), Kind::Add(_)) {
                            stack.push((c, fs[1].clone()));
                        } else {
                            let rest = raw_mul(fs[1..].to_vec());
                            *collected.entry(rest).or_insert_with(BigRational::zero) += c;
                        }
                    }
                    _ => *collected.entry(e.clone()).or_insert_with(BigRational::zero) += c,
                },
                _ => *collected.entry(e.clone()).or_insert_with(BigRational::zero) += c,
            }
        }
        let mut terms: Vec<(Expr, BigRational)> = collected
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .collect();
        terms.sort_by(|a, b| ordering::cmp(&a.0, &b.0));
        if terms.is_empty() {
            return Expr::num(constant);
        }
        if terms.len() == 1 && constant.is_zero() {
            let (rest, c) = terms.pop().unwrap();
            return scaled_term(&c, &rest);
        }

        // pull out the rational content so the stored sum is primitive
        let mut coeffs: Vec<&BigRational> = Vec::with_capacity(terms.len() + 1);
        if !constant.is_zero() {
            coeffs.push(&constant);
        }
        coeffs.extend(terms.iter().map(|(_, c)| c));
        let mut content = number::rational_content(coeffs.iter().copied());
        if coeffs[0].is_negative() {
            content = -content;
        }
        let mut out = Vec::with_capacity(terms.len() + 1);
        if !constant.is_zero() {
            out.push(Expr::num(&constant / &content));
        }
        for (rest, c) in &terms {
            out.push(scaled_term(&(c / &content), rest));
        }
        let sum = intern(Kind::Add(out));
        if content.is_one() {
            sum
        } else {
            intern(Kind::Mul(vec![Expr::num(content), sum]))
        }
    }

    /// Canonical product.
    pub fn mul_all<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        let mut coef = BigRational::one();
        let mut order: Vec<Expr> = Vec::new();
        let mut exponents: HashMap<Expr, Vec<Expr>> = HashMap::new();
        let mut stack: Vec<Expr> = items.into_iter().collect();
        while let Some(f) = stack.pop() {
            match f.kind() {
                Kind::Num(v) => coef *= v,
                Kind::Mul(fs) => stack.extend(fs.iter().cloned()),
                Kind::Pow(b, e) => push_factor(&mut order, &mut exponents, b, e.clone()),
                _ => push_factor(&mut order, &mut exponents, &f, Expr::one()),
            }
        }
        if coef.is_zero() {
            return Expr::zero();
        }
        let mut factors = Vec::with_capacity(order.len());
        let mut renormalize = false;
        for base in order {
            let exps = exponents.remove(&base).unwrap();
            let e = if exps.len() == 1 {
                exps.into_iter().next().unwrap()
            } else {
                Expr::add_all(exps)
            };
            let p = base.pow(&e);
            match p.kind() {
                Kind::Num(v) => coef *= v,
                Kind::Mul(fs) => {
                    // only numeric radicals expand into products here
                    for f in fs {
                        match f.kind() {
                            Kind::Num(v) => coef *= v,
                            _ => factors.push(f.clone()),
                        }
                    }
                    renormalize = true;
                }
                _ => factors.push(p),
            }
        }
        if renormalize && has_duplicate_bases(&factors) {
            factors.push(Expr::num(coef));
            return Expr::mul_all(factors);
        }
        factors.sort_by(ordering::cmp_factor);
        if factors.is_empty() {
            return Expr::num(coef);
        }
        if coef.is_one() && factors.len() == 1 {
            return factors.pop().unwrap();
        }
        if !coef.is_one() {
            factors.insert(0, Expr::num(coef));
        }
        intern(Kind::Mul(factors))
    }

    /// Canonical power `self ^ exponent`.
    pub fn pow(&self, exponent: &Expr) -> Expr {
        let Some(ev) = exponent.as_num() else {
            if self.is_one() {
                return Expr::one();
            }
            return intern(Kind::Pow(self.clone(), exponent.clone()));
        };
        if ev.is_zero() {
            return Expr::one();
        }
        if ev.is_one() {
            return self.clone();
        }
        match self.kind() {
            Kind::Num(b) => number::numeric_pow(b, ev)
                .unwrap_or_else(|| intern(Kind::Pow(self.clone(), exponent.clone()))),
            Kind::Pow(b0, e0) => match e0.as_num() {
                Some(e0v) if ev.is_integer() || !e0v.is_integer() => b0.pow(&Expr::num(e0v * ev)),
                None if ev.is_integer() => b0.pow(&Expr::mul_all([e0.clone(), exponent.clone()])),
                _ => intern(Kind::Pow(self.clone(), exponent.clone())),
            },
            Kind::Mul(fs) => {
                if ev.is_integer() {
                    return Expr::mul_all(fs.iter().map(|f| f.pow(exponent)));
                }
                match fs[0].as_num() {
                    Some(c) if !c.abs().is_one() => {
                        let rest = raw_mul(fs[1..].to_vec());
                        let rest = if c.is_negative() { rest.neg() } else { rest };
                        Expr::mul_all([Expr::num(c.abs()).pow(exponent), rest.pow(exponent)])
                    }
                    _ => intern(Kind::Pow(self.clone(), exponent.clone())),
                }
            }
            _ => intern(Kind::Pow(self.clone(), exponent.clone())),
        }
    }

    /// Canonical function application.
    pub fn apply(f: Func, arg: &Expr) -> Expr {
        if let Some(v) = arg.as_num() {
            match f {
                Func::Abs => return Expr::num(v.abs()),
                Func::Sign => return Expr::num(v.signum()),
                Func::Sin | Func::Tan if v.is_zero() => return Expr::zero(),
                Func::Cos | Func::Exp if v.is_zero() => return Expr::one(),
                Func::Log if v.is_one() => return Expr::zero(),
                _ => {}
            }
        }
        if let Some(folded) = fold_pi_multiple(f, arg) {
            return folded;
        }
        if let (Kind::Mul(fs), Some(c)) = (arg.kind(), arg_coefficient(arg)) {
            if c.is_negative() {
                let negated = arg.neg();
                match f {
                    Func::Sin | Func::Tan | Func::Sign => return Expr::apply(f, &negated).neg(),
                    Func::Cos | Func::Abs => return Expr::apply(f, &negated),
                    _ => {}
                }
            } else if f == Func::Abs && !c.is_one() {
                let rest = raw_mul(fs[1..].to_vec());
                return Expr::mul_all([Expr::num(c.clone()), Expr::apply(Func::Abs, &rest)]);
            }
        }
        match (f, arg.kind()) {
            (Func::Abs, _) | (Func::Sign, _) if is_manifestly_nonnegative(arg) => {
                return if f == Func::Abs {
                    arg.clone()
                } else {
                    Expr::one()
                };
            }
            (Func::Abs, Kind::Func(Func::Sign, _)) => return Expr::one(),
            (Func::Sign, Kind::Func(Func::Sign, _)) => return arg.clone(),
            (Func::Exp, Kind::Func(Func::Log, inner)) => return inner.clone(),
            (Func::Log, Kind::Func(Func::Exp, inner)) => return inner.clone(),
            _ => {}
        }
        intern(Kind::Func(f, arg.clone()))
    }

    /// Free symbol names, sorted.
    pub fn free_symbols(&self) -> Vec<String> {
        let mut out = std::collections::BTreeSet::new();
        self.visit(|e| {
            if let Kind::Sym(s) = e.kind() {
                out.insert(s.to_string());
            }
        });
        out.into_iter().collect()
    }

    pub fn depends_on(&self, name: &str) -> bool {
        let mut found = false;
        self.visit(|e| {
            if e.as_sym() == Some(name) {
                found = true;
            }
        });
        found
    }

    /// Number of distinct nodes in the DAG.
    pub fn dag_size(&self) -> usize {
        let mut n = 0;
        self.visit(|_| n += 1);
        n
    }

    /// Visits every distinct node once, children before parents.
    pub fn visit<F: FnMut(&Expr)>(&self, mut f: F) {
        let mut seen: HashSet<Expr> = HashSet::new();
        let mut stack: Vec<(Expr, bool)> = vec![(self.clone(), false)];
        while let Some((e, expanded)) = stack.pop() {
            if expanded {
                f(&e);
                continue;
            }
            if !seen.insert(e.clone()) {
                continue;
            }
            stack.push((e.clone(), true));
            for c in e.children().into_iter().rev() {
                if !seen.contains(&c) {
                    stack.push((c, false));
                }
            }
        }
    }

    /// Replaces symbols by expressions, rebuilding through the smart constructors.
    pub fn substitute(&self, map: &HashMap<String, Expr>) -> Expr {
        let mut memo: HashMap<Expr, Expr> = HashMap::new();
        self.visit(|e| {
            let out = match e.kind() {
                Kind::Sym(s) => map.get(&**s).cloned().unwrap_or_else(|| e.clone()),
                Kind::Num(_) | Kind::Pi => e.clone(),
                _ => e.rebuild(|c| memo[c].clone()),
            };
            memo.insert(e.clone(), out);
        });
        memo[self].clone()
    }

    /// Rebuilds a compound node from mapped children.
    pub fn rebuild<F: FnMut(&Expr) -> Expr>(&self, mut child: F) -> Expr {
        match self.kind() {
            Kind::Num(_) | Kind::Pi | Kind::Sym(_) => self.clone(),
            Kind::Add(xs) => Expr::add_all(xs.iter().map(&mut child)),
            Kind::Mul(xs) => Expr::mul_all(xs.iter().map(&mut child)),
            Kind::Pow(b, e) => child(b).pow(&child(e)),
            Kind::Func(f, a) => Expr::apply(*f, &child(a)),
        }
    }

    /// Rational approximation of a float literal (used when turning bindings into constants).
    pub fn from_f64(v: f64) -> Option<Expr> {
        BigRational::from_float(v).map(Expr::num)
    }

    pub fn to_f64_const(&self) -> Option<f64> {
        self.as_num().and_then(|v| v.to_f64())
    }
}

fn push_factor(order: &mut Vec<Expr>, exps: &mut HashMap<Expr, Vec<Expr>>, base: &Expr, e: Expr) {
    match exps.get_mut(base) {
        Some(v) => v.push(e),
        None => {
            order.push(base.clone());
            exps.insert(base.clone(), vec![e]);
        }
    }
}

fn has_duplicate_bases(factors: &[Expr]) -> bool {
    let mut seen = HashSet::new();
    factors.iter().any(|f| {
        let base = match f.kind() {
            Kind::Pow(b, _) => b.clone(),
            _ => f.clone(),
        };
        !seen.insert(base)
    })
}

/// Builds a product node from factors that are already canonical and sorted.
pub(crate) fn raw_mul(mut factors: Vec<Expr>) -> Expr {
    match factors.len() {
        0 => Expr::one(),
        1 => factors.pop().unwrap(),
        _ => intern(Kind::Mul(factors)),
    }
}

fn scaled_term(c: &BigRational, rest: &Expr) -> Expr {
    if c.is_one() {
        return rest.clone();
    }
    let mut fs = vec![Expr::num(c.clone())];
    match rest.kind() {
        Kind::Mul(xs) => fs.extend(xs.iter().cloned()),
        _ => fs.push(rest.clone()),
    }
    intern(Kind::Mul(fs))
}

fn arg_coefficient(e: &Expr) -> Option<&BigRational> {
    match e.kind() {
        Kind::Mul(fs) => fs[0].as_num(),
        _ => None,
    }
}

/// True for expressions that are nonnegative wherever they are real,
/// independent of any assumptions on symbols.
pub(crate) fn is_manifestly_nonnegative(e: &Expr) -> bool {
    match e.kind() {
        Kind::Num(v) => !v.is_negative(),
        Kind::Pi => true,
        Kind::Func(Func::Exp, _) | Kind::Func(Func::Abs, _) => true,
        Kind::Pow(b, x) => match x.as_num() {
            Some(v) if v.is_integer() => {
                let two = BigInt::from(2);
                (v.numer() % &two).is_zero() || is_manifestly_nonnegative(b)
            }
            Some(_) => true,
            None => {
                matches!(b.kind(), Kind::Num(v) if v.is_positive()) || matches!(b.kind(), Kind::Pi)
            }
        },
        Kind::Mul(fs) => fs.iter().all(is_manifestly_nonnegative),
        _ => false,
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, &rhs)
            }
        }
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, &rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::add_all([a.clone(), b.clone()]));
binop!(Sub, sub, |a, b| Expr::add_all([a.clone(), b.neg()]));
binop!(Mul, mul, |a, b| Expr::mul_all([a.clone(), b.clone()]));
binop!(Div, div, |a, b| Expr::mul_all([a.clone(), b.recip()]));

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Expr {
        Expr::int(v)
    }
}

/// Exact sin/cos/tan at integer and half-integer multiples of pi.
fn fold_pi_multiple(f: Func, arg: &Expr) -> Option<Expr> {
    let q = match arg.kind() {
        Kind::Pi => BigRational::one(),
        Kind::Mul(fs) if fs.len() == 2 && matches!(fs[1].kind(), Kind::Pi) => {
            fs[0].as_num()?.clone()
        }
        _ => return None,
    };
    let twice = &q * BigRational::from_integer(2.into());
    if !twice.is_integer() {
        return None;
    }
    // position on the circle in quarter turns
    let quarter = num_integer::Integer::mod_floor(&twice.to_integer(), &BigInt::from(4)).to_u8()?;
    let (sin, cos) = [(0, 1), (1, 0), (0, -1), (-1, 0)][quarter as usize];
    let num = |v: i64| Expr::num(BigRational::from_integer(v.into()));
    match f {
        Func::Sin => Some(num(sin)),
        Func::Cos => Some(num(cos)),
        Func::Tan if sin == 0 => Some(Expr::zero()),
        _ => None,
    }
}
