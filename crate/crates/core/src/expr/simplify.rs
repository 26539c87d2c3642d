//! Simplification through a rational normal form.
//!
//! Every expression is mapped to a quotient `num / (f1^k1 * f2^k2 * ...)`
//! where `num` is an expanded Laurent polynomial over opaque atoms (symbols,
//! `pi`, function applications, prime radicals, unresolved powers) with
//! rational exponents, and each `fi` is a primitive polynomial with at least
//! two terms. Sums and products are computed in this form, shared denominator
//! factors are cancelled by exact division, and `cos(u)^2` is rewritten as
//! `1 - sin(u)^2`. Expressions whose expansion would exceed a term budget are
//! kept as opaque atoms built from their simplified children.
//!
//! [`Assumptions`] carry value ranges for symbols. They let the simplifier
//! drop `abs` and `sign` of arguments known to be positive and distribute
//! fractional powers over positive factors; the result is then only valid on
//! those ranges.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::sample::{Interval, SampleDomain};
use super::{number, Expr, Func, Kind};

/// Largest polynomial kept in expanded form.
const MAX_TERMS: usize = 6000;
/// Largest number of term products in one multiplication.
const MAX_PRODUCT: usize = 400_000;
/// Largest integer power expanded.
const MAX_POWER: i64 = 64;
/// Iteration cap for exact division and square roots.
const MAX_STEPS: usize = 20_000;
/// Bound on the denominator registry used to split new factors.
const MAX_REGISTRY: usize = 2048;

type Exp = Rational64;

/// Value ranges for symbols, used to resolve signs.
#[derive(Clone, Debug, Default)]
pub struct Assumptions {
    ranges: BTreeMap<String, Interval>,
}

impl Assumptions {
    pub fn none() -> Self {
        Self::default()
    }

    /// Every symbol ranges over its sample interval.
    pub fn from_domain(domain: &SampleDomain) -> Self {
        Assumptions {
            ranges: domain.intervals.clone(),
        }
    }

    pub fn assume_positive(mut self, name: &str) -> Self {
        self.ranges.insert(
            name.to_string(),
            Interval::new(f64::MIN_POSITIVE, f64::INFINITY),
        );
        self
    }

    pub fn range(&self, name: &str) -> Option<Interval> {
        self.ranges.get(name).copied()
    }

    pub fn is_positive(&self, name: &str) -> bool {
        self.range(name).is_some_and(|iv| iv.lo > 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sign {
    Positive,
    NonNegative,
    Unknown,
}

/// Expansion over budget or an undefined operation; the caller falls back to
/// an opaque atom.
#[derive(Debug)]
struct Bail;

type Res<T> = Result<T, Bail>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
struct Mono(Vec<(u32, Exp)>);

impl Mono {
    fn exp(&self, id: u32) -> Exp {
        self.0
            .binary_search_by_key(&id, |p| p.0)
            .map(|i| self.0[i].1)
            .unwrap_or_else(|_| Exp::zero())
    }

    /// Exponent vector `self + s * other`, zeros dropped.
    fn combine(&self, other: &Mono, s: Exp) -> Vec<(u32, Exp)> {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let (id, e) = if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                i += 1;
                a[i - 1]
            } else if i == a.len() || b[j].0 < a[i].0 {
                j += 1;
                (b[j - 1].0, b[j - 1].1 * s)
            } else {
                i += 1;
                j += 1;
                (a[i - 1].0, a[i - 1].1 + b[j - 1].1 * s)
            };
            if !e.is_zero() {
                out.push((id, e));
            }
        }
        out
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Mono {
    /// Lexicographic on exponent vectors, lower atom ids most significant.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(x), None) => return x.1.cmp(&Exp::zero()),
                (None, Some(y)) => return Exp::zero().cmp(&y.1),
                (Some(x), Some(y)) => {
                    if x.0 < y.0 {
                        return x.1.cmp(&Exp::zero());
                    }
                    if y.0 < x.0 {
                        return Exp::zero().cmp(&y.1);
                    }
                    match x.1.cmp(&y.1) {
                        Ordering::Equal => {
                            i += 1;
                            j += 1;
                        }
                        o => return o,
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
struct Poly(BTreeMap<Mono, BigRational>);

impl Poly {
    fn constant(c: BigRational) -> Poly {
        let mut p = Poly::default();
        if !c.is_zero() {
            p.0.insert(Mono::default(), c);
        }
        p
    }

    fn one() -> Poly {
        Poly::constant(BigRational::one())
    }

    fn term(m: Mono, c: BigRational) -> Poly {
        let mut p = Poly::default();
        p.add_term(m, c);
        p
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    fn len(&self) -> usize {
        self.0.len()
    }

    fn as_constant(&self) -> Option<&BigRational> {
        match self.0.len() {
            0 => None,
            1 => self.0.get(&Mono::default()),
            _ => None,
        }
    }

    fn lead(&self) -> Option<(&Mono, &BigRational)> {
        self.0.last_key_value()
    }

    fn add_term(&mut self, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.0.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn add_scaled(&mut self, other: &Poly, s: &BigRational) {
        for (m, c) in &other.0 {
            self.add_term(m.clone(), c * s);
        }
    }

    fn scale(&self, s: &BigRational) -> Poly {
        if s.is_one() {
            return self.clone();
        }
        Poly(self.0.iter().map(|(m, c)| (m.clone(), c * s)).collect())
    }

    fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c)).collect())
    }

    /// Per-atom minimum exponent over all terms (absent atoms count as zero).
    fn mono_content(&self) -> Mono {
        let mut it = self.0.keys();
        let Some(first) = it.next() else {
            return Mono::default();
        };
        let mut mins: BTreeMap<u32, Exp> = first.0.iter().copied().collect();
        let mut seen_in_all: BTreeMap<u32, usize> = first.0.iter().map(|p| (p.0, 1)).collect();
        let mut n = 1;
        for m in it {
            n += 1;
            for &(id, e) in &m.0 {
                let slot = mins.entry(id).or_insert(e);
                if e < *slot {
                    *slot = e;
                }
                *seen_in_all.entry(id).or_insert(0) += 1;
            }
        }
        Mono(
            mins.into_iter()
                .map(|(id, e)| {
                    if seen_in_all[&id] < n && e > Exp::zero() {
                        (id, Exp::zero())
                    } else {
                        (id, e)
                    }
                })
                .filter(|p| !p.1.is_zero())
                .collect(),
        )
    }

    /// Per-atom exponent range over all terms.
    fn degree_box(&self) -> HashMap<u32, (Exp, Exp)> {
        let mut out: HashMap<u32, (Exp, Exp)> = HashMap::new();
        let n = self.0.len();
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for m in self.0.keys() {
            for &(id, e) in &m.0 {
                let slot = out.entry(id).or_insert((e, e));
                slot.0 = slot.0.min(e);
                slot.1 = slot.1.max(e);
                *counts.entry(id).or_insert(0) += 1;
            }
        }
        for (id, c) in counts {
            if c < n {
                let slot = out.get_mut(&id).unwrap();
                slot.0 = slot.0.min(Exp::zero());
                slot.1 = slot.1.max(Exp::zero());
            }
        }
        out
    }
}

/// `num / prod(f^k)`.
#[derive(Clone, Debug, PartialEq)]
struct Rf {
    num: Poly,
    den: Vec<(Poly, u32)>,
}

impl Rf {
    fn constant(c: BigRational) -> Rf {
        Rf {
            num: Poly::constant(c),
            den: Vec::new(),
        }
    }

    fn poly(p: Poly) -> Rf {
        Rf {
            num: p,
            den: Vec::new(),
        }
    }

    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn as_constant(&self) -> Option<&BigRational> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else {
            None
        }
    }

    fn neg(&self) -> Rf {
        Rf {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }
}

#[derive(Debug)]
struct Atom {
    expr: Expr,
    sign: Sign,
    prime: Option<BigRational>,
    cos_of: Option<Expr>,
}

/// Simplifier with memo tables. Reuse one instance across related
/// expressions so shared subexpressions are converted once.
#[derive(Default)]
pub struct Simplifier {
    assumptions: Assumptions,
    memo: HashMap<Expr, Expr>,
    rf_memo: HashMap<Expr, Arc<Rf>>,
    atoms: Vec<Atom>,
    atom_ids: HashMap<Expr, u32>,
    registry: Vec<Poly>,
}

impl Simplifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_assumptions(assumptions: Assumptions) -> Self {
        Simplifier {
            assumptions,
            ..Self::default()
        }
    }

    pub fn assumptions(&self) -> &Assumptions {
        &self.assumptions
    }

    pub fn simplify(&mut self, e: &Expr) -> Expr {
        if let Some(out) = self.memo.get(e) {
            return out.clone();
        }
        self.convert(e);
        self.expr_of(e)
    }

    /// Simplified form of an already converted node.
    fn expr_of(&mut self, e: &Expr) -> Expr {
        if let Some(out) = self.memo.get(e) {
            return out.clone();
        }
        let rf = self.rf_memo[e].clone();
        let out = self.to_expr(&rf);
        self.memo.insert(e.clone(), out.clone());
        self.memo.insert(out.clone(), out.clone());
        self.rf_memo.entry(out.clone()).or_insert(rf);
        out
    }

    fn convert(&mut self, e: &Expr) -> Arc<Rf> {
        if let Some(rf) = self.rf_memo.get(e) {
            return rf.clone();
        }
        let mut stack = vec![(e.clone(), false)];
        while let Some((node, ready)) = stack.pop() {
            if self.rf_memo.contains_key(&node) {
                continue;
            }
            if !ready {
                stack.push((node.clone(), true));
                for c in node.children() {
                    if !self.rf_memo.contains_key(&c) {
                        stack.push((c, false));
                    }
                }
                continue;
            }
            let rf = match self.node_rf(&node) {
                Ok(rf) => rf,
                Err(Bail) => {
                    let rebuilt = node.rebuild(|c| self.expr_of(c));
                    self.opaque(&rebuilt)
                }
            };
            self.rf_memo.insert(node, Arc::new(rf));
        }
        self.rf_memo[e].clone()
    }

    fn node_rf(&mut self, e: &Expr) -> Res<Rf> {
        match e.kind() {
            Kind::Num(v) => Ok(Rf::constant(v.clone())),
            Kind::Pi | Kind::Sym(_) => Ok(self.atom_rf(e, Exp::one())),
            Kind::Add(ts) => {
                // group terms over identical denominators before cross-multiplying
                let mut groups: Vec<(Vec<(Poly, u32)>, Poly)> = Vec::new();
                for t in ts {
                    let rf = self.rf_memo[t].clone();
                    match groups.iter_mut().find(|g| g.0 == rf.den) {
                        Some(g) => g.1.add_scaled(&rf.num, &BigRational::one()),
                        None => groups.push((rf.den.clone(), rf.num.clone())),
                    }
                    if groups.iter().any(|g| g.1.len() > MAX_TERMS) {
                        return Err(Bail);
                    }
                }
                let mut acc = Rf::constant(BigRational::zero());
                for (den, num) in groups {
                    let part = self.cancel(Rf { num, den })?;
                    acc = self.add(&acc, &part)?;
                }
                Ok(acc)
            }
            Kind::Mul(fs) => {
                let mut acc = Rf::constant(BigRational::one());
                for f in fs {
                    let rf = self.rf_memo[f].clone();
                    acc = self.mul(&acc, &rf)?;
                }
                Ok(acc)
            }
            Kind::Pow(b, x) => {
                let base = self.rf_memo[b].clone();
                if let Some(v) = x.as_num() {
                    if let (Some(p), Some(q)) = (v.numer().to_i64(), v.denom().to_i64()) {
                        if p.abs() <= MAX_POWER && q <= MAX_POWER {
                            let r = if q == 1 {
                                (*base).clone()
                            } else {
                                self.root(&base, q)?
                            };
                            return self.pow(&r, p);
                        }
                    }
                }
                let (be, xe) = (self.expr_of(b), self.expr_of(x));
                let p = be.pow(&xe);
                match p.kind() {
                    Kind::Pow(..) => Ok(self.opaque(&p)),
                    _ => Ok((*self.convert(&p)).clone()),
                }
            }
            Kind::Func(f, a) => {
                let arg = self.rf_memo[a].clone();
                if matches!(f, Func::Abs | Func::Sign) {
                    let s = if self.rf_nonneg(&arg) {
                        Some(BigRational::one())
                    } else if self.rf_nonneg(&arg.neg()) {
                        Some(-BigRational::one())
                    } else {
                        None
                    };
                    if let Some(s) = s {
                        return Ok(match f {
                            Func::Abs => Rf {
                                num: arg.num.scale(&s),
                                den: arg.den.clone(),
                            },
                            _ => Rf::constant(s),
                        });
                    }
                }
                let ae = self.expr_of(a);
                let applied = Expr::apply(*f, &ae);
                match applied.kind() {
                    Kind::Func(..) => Ok(self.opaque(&applied)),
                    _ => Ok((*self.convert(&applied)).clone()),
                }
            }
        }
    }

    // ---- atoms ----

    fn atom_id(&mut self, e: &Expr) -> u32 {
        if let Some(&id) = self.atom_ids.get(e) {
            return id;
        }
        let sign = self.atom_sign(e);
        let prime = match e.kind() {
            Kind::Num(v) => Some(v.clone()),
            _ => None,
        };
        let cos_of = match e.kind() {
            Kind::Func(Func::Cos, u) => Some(u.clone()),
            _ => None,
        };
        let id = self.atoms.len() as u32;
        self.atoms.push(Atom {
            expr: e.clone(),
            sign,
            prime,
            cos_of,
        });
        self.atom_ids.insert(e.clone(), id);
        id
    }

    fn atom_rf(&mut self, e: &Expr, exp: Exp) -> Rf {
        let id = self.atom_id(e);
        let (m, c) = self.fold(vec![(id, exp)]);
        Rf::poly(Poly::term(m, c))
    }

    /// Opaque atom for an expression that is not expanded further.
    fn opaque(&mut self, e: &Expr) -> Rf {
        match e.kind() {
            Kind::Num(v) => Rf::constant(v.clone()),
            _ => self.atom_rf(e, Exp::one()),
        }
    }

    fn atom_sign(&self, e: &Expr) -> Sign {
        use std::f64::consts::{FRAC_PI_2, PI};
        let within = |u: &Expr, lo: f64, hi: f64| {
            u.as_sym()
                .and_then(|s| self.assumptions.range(s))
                .is_some_and(|iv| iv.lo > lo && iv.hi < hi)
        };
        match e.kind() {
            Kind::Num(v) if v.is_positive() => Sign::Positive,
            Kind::Pi => Sign::Positive,
            Kind::Sym(s) if self.assumptions.is_positive(s) => Sign::Positive,
            Kind::Func(Func::Exp, _) => Sign::Positive,
            Kind::Func(Func::Abs, _) => Sign::NonNegative,
            Kind::Func(Func::Sin, u) if within(u, 0.0, PI) => Sign::Positive,
            Kind::Func(Func::Cos, u) if within(u, -FRAC_PI_2, FRAC_PI_2) => Sign::Positive,
            Kind::Pow(b, x) => {
                let base = match self.rf_memo.get(b) {
                    Some(rf) if self.rf_nonneg(rf) => Sign::NonNegative,
                    _ => self.atom_sign(b),
                };
                if base != Sign::Unknown {
                    return base;
                }
                match x.as_num() {
                    Some(v) if !v.is_integer() && v.denom() % 2 == BigInt::zero() => {
                        Sign::NonNegative
                    }
                    _ => Sign::Unknown,
                }
            }
            _ => match self.rf_memo.get(e) {
                Some(rf) if self.rf_nonneg(rf) => Sign::NonNegative,
                _ => Sign::Unknown,
            },
        }
    }

    /// Normalizes an exponent vector: integer parts of prime radicals move
    /// into the returned coefficient.
    fn fold(&self, v: Vec<(u32, Exp)>) -> (Mono, BigRational) {
        let mut coef = BigRational::one();
        let mut out = Vec::with_capacity(v.len());
        for (id, e) in v {
            if let Some(p) = &self.atoms[id as usize].prime {
                let k = e.floor();
                let f = e - k;
                let k = *k.numer();
                let mut pk = num_traits::pow(p.clone(), k.unsigned_abs() as usize);
                if k < 0 {
                    pk = pk.recip();
                }
                coef *= pk;
                if !f.is_zero() {
                    out.push((id, f));
                }
            } else {
                out.push((id, e));
            }
        }
        (Mono(out), coef)
    }

    fn mono_mul(&self, a: &Mono, b: &Mono) -> (Mono, BigRational) {
        self.fold(a.combine(b, Exp::one()))
    }

    fn mono_div(&self, a: &Mono, b: &Mono) -> (Mono, BigRational) {
        self.fold(a.combine(b, -Exp::one()))
    }

    fn has_primes(&self, m: &Mono) -> bool {
        m.0.iter()
            .any(|(id, _)| self.atoms[*id as usize].prime.is_some())
    }

    // ---- polynomial arithmetic ----

    fn poly_mul(&self, a: &Poly, b: &Poly) -> Res<Poly> {
        if a.len() * b.len() > MAX_PRODUCT {
            return Err(Bail);
        }
        if let Some(c) = a.as_constant() {
            return Ok(b.scale(c));
        }
        if let Some(c) = b.as_constant() {
            return Ok(a.scale(c));
        }
        let mut out = Poly::default();
        for (ma, ca) in &a.0 {
            for (mb, cb) in &b.0 {
                let (m, f) = self.mono_mul(ma, mb);
                out.add_term(m, ca * cb * f);
            }
        }
        if out.len() > MAX_TERMS {
            return Err(Bail);
        }
        Ok(out)
    }

    fn poly_mul_term(&self, a: &Poly, m: &Mono, c: &BigRational) -> Poly {
        let mut out = Poly::default();
        for (ma, ca) in &a.0 {
            let (mm, f) = self.mono_mul(ma, m);
            out.add_term(mm, ca * c * f);
        }
        out
    }

    fn poly_pow(&self, a: &Poly, n: u32) -> Res<Poly> {
        let mut acc = Poly::one();
        let mut base = a.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = self.poly_mul(&acc, &base)?;
            }
            n >>= 1;
            if n > 0 {
                base = self.poly_mul(&base, &base)?;
            }
        }
        Ok(acc)
    }

    /// `a = c * m * p` with `p` primitive, free of monomial content and with a
    /// positive leading coefficient.
    fn split(&self, a: &Poly) -> (BigRational, Mono, Poly) {
        if a.is_zero() {
            return (BigRational::zero(), Mono::default(), Poly::default());
        }
        let m = a.mono_content();
        let mut c = number::rational_content(a.0.values());
        if a.lead().unwrap().1.is_negative() {
            c = -c;
        }
        let inv = c.recip();
        let mut p = Poly::default();
        for (mono, coef) in &a.0 {
            // removing the content never pushes a prime exponent out of [0, 1)
            let rest = Mono(mono.combine(&m, -Exp::one()));
            p.add_term(rest, coef * &inv);
        }
        (c, m, p)
    }

    /// Cheap necessary condition for `b | a`.
    fn may_divide(a: &Poly, b: &Poly) -> bool {
        if b.len() > a.len() && a.len() > 0 {
            // a multiple of b can have fewer terms, but rarely does here
            return false;
        }
        let (ba, bb) = (a.degree_box(), b.degree_box());
        bb.iter().all(|(id, (lo, hi))| match ba.get(id) {
            Some((alo, ahi)) => hi - lo <= ahi - alo,
            None => false,
        })
    }

    /// Exact quotient `a / b`, if it exists.
    fn divide(&self, a: &Poly, b: &Poly) -> Option<Poly> {
        let (bm, bc) = b.lead()?;
        if b.len() == 1 {
            let (m, f) = self.mono_div(&Mono::default(), bm);
            return Some(self.poly_mul_term(a, &m, &(f / bc)));
        }
        let (ba, bb) = (a.degree_box(), b.degree_box());
        let zero = (Exp::zero(), Exp::zero());
        let mut r = a.clone();
        let mut q = Poly::default();
        let mut steps = 0;
        while let Some((lm, lc)) = r.lead() {
            steps += 1;
            if steps > MAX_STEPS {
                return None;
            }
            let (tm, f) = self.mono_div(lm, bm);
            let tc = lc / bc * f;
            for id in ba.keys().chain(bb.keys()) {
                if self.atoms[*id as usize].prime.is_some() {
                    continue;
                }
                let (alo, ahi) = ba.get(id).unwrap_or(&zero);
                let (blo, bhi) = bb.get(id).unwrap_or(&zero);
                let e = tm.exp(*id);
                if e < alo - blo || e > ahi - bhi {
                    return None;
                }
            }
            let lm = lm.clone();
            let tb = self.poly_mul_term(b, &tm, &tc);
            r.add_scaled(&tb, &-BigRational::one());
            if r.0.contains_key(&lm) || r.len() > MAX_TERMS {
                return None;
            }
            q.add_term(tm, tc);
        }
        Some(q)
    }

    /// Square root of a primitive polynomial, if it is a perfect square.
    fn poly_sqrt(&self, p: &Poly) -> Option<Poly> {
        let (lm, lc) = p.lead()?;
        if self.has_primes(lm) || lc.is_negative() {
            return None;
        }
        let sc = rational_sqrt(lc)?;
        let half = |e: Exp| e / Exp::from_integer(2);
        let sm = Mono(lm.0.iter().map(|&(id, e)| (id, half(e))).collect());
        if !self.exponents_ok(&sm) {
            return None;
        }
        let floor = p.degree_box();
        let mut s = Poly::term(sm.clone(), sc.clone());
        let mut rem = p.clone();
        rem.add_scaled(&self.poly_mul(&s, &s).ok()?, &-BigRational::one());
        let two_sc = &sc * BigRational::from_integer(BigInt::from(2));
        for _ in 0..=p.len() + 1 {
            let Some((rm, rc)) = rem.lead() else {
                return Some(s);
            };
            let (tm, f) = self.mono_div(rm, &sm);
            if !f.is_one() || tm >= sm || !self.exponents_ok(&tm) {
                return None;
            }
            if tm
                .0
                .iter()
                .any(|(id, e)| floor.get(id).is_some_and(|(lo, _)| *e < half(*lo)))
            {
                return None;
            }
            let tc = rc / &two_sc;
            let t = Poly::term(tm, tc);
            // rem -= 2 s t + t^2
            let mut sub = self
                .poly_mul(&s, &t)
                .ok()?
                .scale(&BigRational::from_integer(BigInt::from(2)));
            sub.add_scaled(&self.poly_mul(&t, &t).ok()?, &BigRational::one());
            rem.add_scaled(&sub, &-BigRational::one());
            s.add_scaled(&t, &BigRational::one());
        }
        None
    }

    /// Fractional exponents are only allowed on atoms known to be nonnegative.
    fn exponents_ok(&self, m: &Mono) -> bool {
        m.0.iter()
            .all(|(id, e)| e.is_integer() || self.atoms[*id as usize].sign != Sign::Unknown)
    }

    fn poly_nonneg(&self, p: &Poly) -> bool {
        p.0.iter().all(|(m, c)| {
            c.is_positive()
                && m.0.iter().all(|(id, e)| {
                    self.atoms[*id as usize].sign != Sign::Unknown
                        || (e.is_integer() && e.numer().is_even())
                })
        })
    }

    fn rf_nonneg(&self, rf: &Rf) -> bool {
        !rf.is_zero()
            && self.poly_nonneg(&rf.num)
            && rf.den.iter().all(|(f, _)| self.poly_nonneg(f))
    }

    /// Rewrites even powers of `cos(u)` through `sin(u)`.
    fn reduce_cos(&mut self, p: Poly) -> Res<Poly> {
        let hit = |s: &Self, m: &Mono| {
            m.0.iter().any(|(id, e)| {
                s.atoms[*id as usize].cos_of.is_some()
                    && e.is_integer()
                    && *e >= Exp::from_integer(2)
            })
        };
        if !p.0.keys().any(|m| hit(self, m)) {
            return Ok(p);
        }
        let mut out = Poly::default();
        for (m, c) in p.0 {
            if !hit(self, &m) {
                out.add_term(m, c);
                continue;
            }
            let mut kept = Vec::new();
            let mut extra = Poly::one();
            for (id, e) in m.0 {
                let cos_of = self.atoms[id as usize].cos_of.clone();
                match cos_of {
                    Some(u) if e.is_integer() && e >= Exp::from_integer(2) => {
                        let k = *e.numer();
                        if k % 2 == 1 {
                            kept.push((id, Exp::one()));
                        }
                        let sin = Expr::apply(Func::Sin, &u);
                        let sid = self.atom_id(&sin);
                        let mut one_minus = Poly::one();
                        one_minus
                            .add_term(Mono(vec![(sid, Exp::from_integer(2))]), -BigRational::one());
                        let factor = self.poly_pow(&one_minus, (k / 2) as u32)?;
                        extra = self.poly_mul(&extra, &factor)?;
                    }
                    _ => kept.push((id, e)),
                }
            }
            let term = self.poly_mul_term(&extra, &Mono(kept), &c);
            out.add_scaled(&term, &BigRational::one());
        }
        if out.len() > MAX_TERMS {
            return Err(Bail);
        }
        Ok(out)
    }

    // ---- rational functions ----

    fn expand_den(&self, den: &[(Poly, u32)]) -> Res<Poly> {
        let mut acc = Poly::one();
        for (f, k) in den {
            acc = self.poly_mul(&acc, &self.poly_pow(f, *k)?)?;
        }
        Ok(acc)
    }

    /// Replaces denominator factors that are perfect squares by their roots.
    fn split_squares(&self, den: &mut Vec<(Poly, u32)>) {
        if den.iter().all(|(f, _)| f.len() < 3) {
            return;
        }
        let mut out: Vec<(Poly, u32)> = Vec::with_capacity(den.len());
        for (mut f, mut k) in den.drain(..) {
            while f.len() >= 3 {
                match self.poly_sqrt(&f) {
                    Some(h) => {
                        f = h;
                        k *= 2;
                    }
                    None => break,
                }
            }
            match out.iter_mut().find(|(g, _)| *g == f) {
                Some(slot) => slot.1 += k,
                None => out.push((f, k)),
            }
        }
        *den = out;
    }

    /// Divides common denominator factors out of `rf.num`.
    fn cancel(&self, mut rf: Rf) -> Res<Rf> {
        if rf.num.is_zero() {
            return Ok(Rf::constant(BigRational::zero()));
        }
        self.cancel_into(&mut rf.num, &mut rf.den);
        Ok(rf)
    }

    fn cancel_into(&self, num: &mut Poly, den: &mut Vec<(Poly, u32)>) {
        self.split_squares(den);
        for (f, k) in den.iter_mut() {
            while *k > 0 && num.len() >= 2 && Self::may_divide(num, f) {
                match self.divide(num, f) {
                    Some(q) => {
                        *num = q;
                        *k -= 1;
                    }
                    None => break,
                }
            }
        }
        den.retain(|(_, k)| *k > 0);
    }

    fn add(&mut self, a: &Rf, b: &Rf) -> Res<Rf> {
        if a.is_zero() {
            return Ok(b.clone());
        }
        if b.is_zero() {
            return Ok(a.clone());
        }
        if a.den == b.den {
            let mut num = a.num.clone();
            num.add_scaled(&b.num, &BigRational::one());
            return self.cancel(Rf {
                num,
                den: a.den.clone(),
            });
        }
        let mut den: Vec<(Poly, u32)> = a.den.clone();
        for (f, k) in &b.den {
            match den.iter_mut().find(|(g, _)| g == f) {
                Some(slot) => slot.1 = slot.1.max(*k),
                None => den.push((f.clone(), *k)),
            }
        }
        let lift = |s: &Self, x: &Rf| -> Res<Poly> {
            let mut missing = Vec::new();
            for (f, k) in &den {
                let have = x.den.iter().find(|(g, _)| g == f).map_or(0, |p| p.1);
                if *k > have {
                    missing.push((f.clone(), k - have));
                }
            }
            s.poly_mul(&x.num, &s.expand_den(&missing)?)
        };
        let mut num = lift(self, a)?;
        num.add_scaled(&lift(self, b)?, &BigRational::one());
        if num.len() > MAX_TERMS {
            return Err(Bail);
        }
        self.cancel(Rf { num, den })
    }

    fn mul(&mut self, a: &Rf, b: &Rf) -> Res<Rf> {
        if let Some(c) = a.as_constant() {
            return Ok(Rf {
                num: b.num.scale(c),
                den: b.den.clone(),
            });
        }
        if let Some(c) = b.as_constant() {
            return Ok(Rf {
                num: a.num.scale(c),
                den: a.den.clone(),
            });
        }
        let (mut an, mut bn) = (a.num.clone(), b.num.clone());
        let (mut ad, mut bd) = (a.den.clone(), b.den.clone());
        self.cancel_into(&mut an, &mut bd);
        self.cancel_into(&mut bn, &mut ad);
        let num = self.poly_mul(&an, &bn)?;
        let num = self.reduce_cos(num)?;
        for (f, k) in bd {
            match ad.iter_mut().find(|(g, _)| *g == f) {
                Some(slot) => slot.1 += k,
                None => ad.push((f, k)),
            }
        }
        Ok(Rf { num, den: ad })
    }

    fn recip(&mut self, a: &Rf) -> Res<Rf> {
        if a.is_zero() {
            return Err(Bail);
        }
        let (c, m, p) = self.split(&a.num);
        let mut num = self.expand_den(&a.den)?;
        let (mi, f) = self.mono_div(&Mono::default(), &m);
        let mut scale = f / &c;
        let mut mono = mi;
        let mut den = Vec::new();
        if !p.is_one() {
            let (factors, c2, m2) = self.split_factor(p);
            scale /= c2;
            let (mm, f2) = self.mono_div(&mono, &m2);
            scale *= f2;
            mono = mm;
            den = factors;
        }
        num = self.poly_mul_term(&num, &mono, &scale);
        Ok(Rf { num, den })
    }

    /// Writes a new denominator polynomial as a product of known factors
    /// where possible: `p = c * m * prod(factors)`.
    fn split_factor(&mut self, p: Poly) -> (Vec<(Poly, u32)>, BigRational, Mono) {
        let mut c = BigRational::one();
        let mut m = Mono::default();
        let mut rest = p;
        let mut out: Vec<(Poly, u32)> = Vec::new();
        if !self.registry.contains(&rest) {
            for i in 0..self.registry.len() {
                if rest.len() < 2 {
                    break;
                }
                let g = &self.registry[i];
                if g.len() > rest.len() || *g == rest {
                    continue;
                }
                while rest.len() >= 2 && Self::may_divide(&rest, g) {
                    let Some(q) = self.divide(&rest, g) else {
                        break;
                    };
                    match out.iter_mut().find(|(h, _)| h == g) {
                        Some(slot) => slot.1 += 1,
                        None => out.push((g.clone(), 1)),
                    }
                    let (qc, qm, qp) = self.split(&q);
                    c *= qc;
                    let (mm, f) = self.mono_mul(&m, &qm);
                    c *= f;
                    m = mm;
                    rest = qp;
                }
            }
        }
        if rest.len() >= 2 {
            if self.registry.len() < MAX_REGISTRY && !self.registry.contains(&rest) {
                self.registry.push(rest.clone());
            }
            match out.iter_mut().find(|(h, _)| *h == rest) {
                Some(slot) => slot.1 += 1,
                None => out.push((rest, 1)),
            }
        } else if let Some((rm, rc)) = rest.lead() {
            let (mm, f) = self.mono_mul(&m, rm);
            c *= rc * f;
            m = mm;
        }
        (out, c, m)
    }

    fn pow(&mut self, a: &Rf, n: i64) -> Res<Rf> {
        if n == 0 {
            return Ok(Rf::constant(BigRational::one()));
        }
        if n < 0 {
            let r = self.recip(a)?;
            return self.pow(&r, -n);
        }
        if n == 1 {
            return Ok(a.clone());
        }
        let num = self.poly_pow(&a.num, n as u32)?;
        let num = self.reduce_cos(num)?;
        let den = a
            .den
            .iter()
            .map(|(f, k)| (f.clone(), k * n as u32))
            .collect();
        Ok(Rf { num, den })
    }

    /// `a^(1/q)`, distributing the root over factors whose sign allows it.
    fn root(&mut self, a: &Rf, q: i64) -> Res<Rf> {
        if a.is_zero() {
            return Ok(a.clone());
        }
        let qr = Exp::new(1, q);
        let even = q % 2 == 0;
        let (c, m, p) = self.split(&a.num);
        let mut out = Rf::constant(BigRational::one());
        // radicand left over where the sign is unknown
        let mut resid = Rf::constant(BigRational::one());

        let mut c = c;
        if c.is_negative() {
            resid = resid.neg();
            c = -c;
        }
        match number::numeric_pow(&c, &BigRational::new(BigInt::one(), BigInt::from(q))) {
            Some(e) => {
                let r = self.radical_rf(&e);
                out = self.mul(&out, &r)?;
            }
            None => resid = self.mul(&resid, &Rf::constant(c))?,
        }

        let mut own = Vec::new();
        let mut absolute = Vec::new();
        let mut leftover = Vec::new();
        for &(id, e) in &m.0 {
            let atom = &self.atoms[id as usize];
            if atom.sign != Sign::Unknown {
                own.push((id, e * qr));
            } else if even && e.is_integer() && e.numer().is_even() {
                absolute.push((atom.expr.clone(), e * qr));
            } else {
                leftover.push((id, e));
            }
        }
        let (om, oc) = self.fold(own);
        out = self.mul(&out, &Rf::poly(Poly::term(om, oc)))?;
        for (u, e) in absolute {
            let abs = Expr::apply(Func::Abs, &u);
            let r = self.power_of_expr(&abs, e)?;
            out = self.mul(&out, &r)?;
        }
        let (lm, lc) = self.fold(leftover);
        resid = self.mul(&resid, &Rf::poly(Poly::term(lm, lc)))?;

        if !p.is_one() {
            if let Some(s) = self.poly_sqrt_if(&p, q) {
                let se = self.poly_expr(&s);
                let r = self.abs_rf(&se)?;
                out = self.mul(&out, &r)?;
            } else if self.poly_nonneg(&p) {
                let pe = self.poly_expr(&p);
                let r = self.power_of_expr(&pe, qr)?;
                out = self.mul(&out, &r)?;
            } else {
                resid = self.mul(&resid, &Rf::poly(p))?;
            }
        }

        for (f, k) in &a.den {
            let k = *k as i64;
            if self.poly_nonneg(f) {
                let fe = self.poly_expr(f);
                let r = self.power_of_expr(&fe, Exp::new(-k, q))?;
                out = self.mul(&out, &r)?;
            } else if even && k % 2 == 0 {
                let fe = self.poly_expr(f);
                let abs = Expr::apply(Func::Abs, &fe);
                let r = self.power_of_expr(&abs, Exp::new(-k, q))?;
                out = self.mul(&out, &r)?;
            } else {
                resid = self.mul(
                    &resid,
                    &Rf {
                        num: Poly::one(),
                        den: vec![(f.clone(), k as u32)],
                    },
                )?;
            }
        }

        if resid.as_constant().is_none_or(|v| !v.is_one()) {
            let re = self.to_expr(&resid);
            let radical = re.pow(&Expr::num(BigRational::new(BigInt::one(), BigInt::from(q))));
            let r = match radical.kind() {
                Kind::Pow(..) => self.opaque(&radical),
                _ => (*self.convert(&radical)).clone(),
            };
            out = self.mul(&out, &r)?;
        }
        Ok(out)
    }

    fn poly_sqrt_if(&self, p: &Poly, q: i64) -> Option<Poly> {
        if q == 2 {
            self.poly_sqrt(p)
        } else {
            None
        }
    }

    /// `|e|` for a polynomial expression, dropping the bars when its sign is known.
    fn abs_rf(&mut self, e: &Expr) -> Res<Rf> {
        let rf = self.convert(e);
        if self.rf_nonneg(&rf) {
            return Ok((*rf).clone());
        }
        if self.rf_nonneg(&rf.neg()) {
            return Ok(rf.neg());
        }
        let abs = Expr::apply(Func::Abs, e);
        Ok(match abs.kind() {
            Kind::Func(..) => self.opaque(&abs),
            _ => (*self.convert(&abs)).clone(),
        })
    }

    /// `e^x` for an expression treated as a single atom.
    fn power_of_expr(&mut self, e: &Expr, x: Exp) -> Res<Rf> {
        match e.kind() {
            Kind::Func(..) | Kind::Add(_) | Kind::Pow(..) => {
                // converting first lets the atom inherit a known sign
                self.convert(e);
                Ok(self.atom_rf(e, x))
            }
            _ => {
                let rf = self.convert(e);
                if x.is_integer() {
                    self.pow(&rf, *x.numer())
                } else {
                    Ok(self.atom_rf(e, x))
                }
            }
        }
    }

    /// Numeric result of [`number::numeric_pow`] as prime-radical atoms.
    fn radical_rf(&mut self, e: &Expr) -> Rf {
        match e.kind() {
            Kind::Num(v) => Rf::constant(v.clone()),
            Kind::Pow(b, x) => match (b.as_num(), x.as_num()) {
                (Some(_), Some(xv)) => match (xv.numer().to_i64(), xv.denom().to_i64()) {
                    (Some(n), Some(d)) => self.atom_rf(b, Exp::new(n, d)),
                    _ => self.opaque(e),
                },
                _ => self.opaque(e),
            },
            Kind::Mul(fs) => {
                let mut acc = Rf::constant(BigRational::one());
                for f in fs {
                    let r = self.radical_rf(f);
                    acc = self
                        .mul(&acc, &r)
                        .unwrap_or_else(|_| unreachable!("monomial product"));
                }
                acc
            }
            _ => self.opaque(e),
        }
    }

    // ---- back to expressions ----

    fn mono_expr(&self, m: &Mono) -> Expr {
        Expr::mul_all(m.0.iter().map(|&(id, e)| {
            let base = &self.atoms[id as usize].expr;
            let x = BigRational::new(BigInt::from(*e.numer()), BigInt::from(*e.denom()));
            base.pow(&Expr::num(x))
        }))
    }

    fn poly_expr(&self, p: &Poly) -> Expr {
        Expr::add_all(
            p.0.iter()
                .map(|(m, c)| Expr::mul_all([Expr::num(c.clone()), self.mono_expr(m)])),
        )
    }

    fn to_expr(&self, rf: &Rf) -> Expr {
        if rf.num.is_zero() {
            return Expr::zero();
        }
        let (c, m, p) = self.split(&rf.num);
        let mut parts = vec![Expr::num(c), self.mono_expr(&m), self.poly_expr(&p)];
        for (f, k) in &rf.den {
            parts.push(self.poly_expr(f).powi(-(*k as i64)));
        }
        Expr::mul_all(parts)
    }
}

fn rational_sqrt(v: &BigRational) -> Option<BigRational> {
    let n = v.numer().sqrt();
    let d = v.denom().sqrt();
    if &(&n * &n) == v.numer() && &(&d * &d) == v.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

/// Simplifies with a fresh [`Simplifier`] and no assumptions.
pub fn simplify(e: &Expr) -> Expr {
    Simplifier::new().simplify(e)
}
