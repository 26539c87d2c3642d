//! Numeric evaluation.
//!
//! Expressions are compiled into a flat [`Program`] (one slot per DAG node, in
//! dependency order) that can be run repeatedly at many points and in any
//! [`Real`] type. `f64` is the working precision; double-double
//! ([`DoubleDouble`]) is used by the finite-difference oracle.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use thiserror::Error;
use twofloat::TwoFloat;

use super::{Expr, Func, Kind};

/// Scalar type a [`Program`] can be evaluated in.
pub trait Real:
    Copy
    + PartialOrd
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn from_rational(v: &BigRational) -> Self;
    fn to_f64(self) -> f64;
    fn pi() -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powf(self, e: Self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn signum(self) -> Self {
        if self > Self::zero() {
            Self::one()
        } else if self < Self::zero() {
            -Self::one()
        } else {
            Self::zero()
        }
    }

    fn powi(self, e: i64) -> Self {
        let mut base = if e < 0 { Self::one() / self } else { self };
        let mut n = e.unsigned_abs();
        let mut acc = Self::one();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn from_rational(v: &BigRational) -> Self {
        v.to_f64().unwrap_or(f64::NAN)
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powf(self, e: Self) -> Self {
        f64::powf(self, e)
    }
    fn powi(self, e: i64) -> Self {
        match i32::try_from(e) {
            Ok(e) => f64::powi(self, e),
            Err(_) => f64::powf(self, e as f64),
        }
    }
}

fn bigint_to_twofloat(n: &BigInt) -> TwoFloat {
    let hi = n.to_f64().unwrap_or(f64::NAN);
    if !hi.is_finite() {
        return TwoFloat::from(hi);
    }
    let rest = n - float_to_bigint(hi);
    TwoFloat::new_add(hi, rest.to_f64().unwrap_or(0.0))
}

fn float_to_bigint(v: f64) -> BigInt {
    BigRational::from_float(v)
        .map(|r| r.to_integer())
        .unwrap_or_default()
}

/// Double-double scalar for the finite-difference oracle.
///
/// Wraps [`TwoFloat`] for addition, multiplication and the elementary
/// functions. Division is done here by long division with two correction
/// steps, because `TwoFloat`'s own quotient drops the low word.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct DoubleDouble(pub TwoFloat);

impl DoubleDouble {
    pub fn hi(self) -> f64 {
        self.0.hi()
    }

    pub fn lo(self) -> f64 {
        self.0.lo()
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        DoubleDouble(self.0 + rhs.0)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        DoubleDouble(self.0 - rhs.0)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        DoubleDouble(self.0 * rhs.0)
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let (a, b) = (self.0, rhs.0);
        let q1 = a.hi() / b.hi();
        let r1 = a - b * q1;
        let q2 = r1.hi() / b.hi();
        let r2 = r1 - b * q2;
        let q3 = r2.hi() / b.hi();
        DoubleDouble(TwoFloat::new_add(q1, q2) + q3)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble(-self.0)
    }
}

impl Real for DoubleDouble {
    fn from_f64(v: f64) -> Self {
        DoubleDouble(TwoFloat::from(v))
    }
    fn from_rational(v: &BigRational) -> Self {
        DoubleDouble(bigint_to_twofloat(v.numer())) / DoubleDouble(bigint_to_twofloat(v.denom()))
    }
    fn to_f64(self) -> f64 {
        self.0.hi() + self.0.lo()
    }
    fn pi() -> Self {
        DoubleDouble(twofloat::consts::PI)
    }
    fn sin(self) -> Self {
        DoubleDouble(self.0.sin())
    }
    fn cos(self) -> Self {
        DoubleDouble(self.0.cos())
    }
    fn tan(self) -> Self {
        self.sin() / self.cos()
    }
    fn exp(self) -> Self {
        // exp(x) = 2^k * exp(r)^(2^SQUARINGS), |r| <= ln2 / 2^(SQUARINGS+1)
        const SQUARINGS: i32 = 10;
        let ln2 = DoubleDouble(TwoFloat::new_add(
            std::f64::consts::LN_2,
            2.319_046_813_846_299_6e-17,
        ));
        if !self.hi().is_finite() || self.hi() > 709.0 {
            return DoubleDouble::from_f64(f64::INFINITY);
        }
        if self.hi() < -745.0 {
            return DoubleDouble::from_f64(0.0);
        }
        let k = (self.hi() / std::f64::consts::LN_2).round();
        let r = (self - ln2 * DoubleDouble::from_f64(k))
            * DoubleDouble::from_f64((-SQUARINGS as f64).exp2());
        let mut term = DoubleDouble::from_f64(1.0);
        let mut sum = term;
        for n in 1..=14 {
            term = term * r / DoubleDouble::from_f64(n as f64);
            sum = sum + term;
        }
        for _ in 0..SQUARINGS {
            sum = sum * sum;
        }
        sum * DoubleDouble::from_f64(k.exp2())
    }
    fn ln(self) -> Self {
        // one Newton step on the f64 logarithm
        let y = DoubleDouble::from_f64(self.hi().ln());
        y + self * (-y).exp() - DoubleDouble::from_f64(1.0)
    }
    fn sqrt(self) -> Self {
        // one Newton step on the f64 root
        let x = self.0.hi().sqrt();
        let xd = DoubleDouble::from_f64(x);
        let r = self - xd * xd;
        xd + r / DoubleDouble::from_f64(2.0 * x)
    }
    fn abs(self) -> Self {
        if self.0 < 0.0 {
            -self
        } else {
            self
        }
    }
    fn powf(self, e: Self) -> Self {
        (e * self.ln()).exp()
    }
}

/// Values for the free symbols of an expression.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bindings(BTreeMap<String, f64>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.insert(name, value);
        self
    }

    pub fn insert(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<'a> FromIterator<(&'a str, f64)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (&'a str, f64)>>(iter: I) -> Self {
        Bindings(iter.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

impl fmt::Display for Bindings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no value bound for symbol `{0}`")]
    MissingBinding(String),
    #[error("{reason} in `{expr}`")]
    Domain { reason: &'static str, expr: String },
}

fn domain(reason: &'static str, e: &Expr) -> EvalError {
    let mut text = e.to_string();
    if text.len() > 160 {
        let mut cut = 157;
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        text.truncate(cut);
        text.push_str("...");
    }
    EvalError::Domain { reason, expr: text }
}

#[derive(Debug, Clone)]
enum Op {
    Const(BigRational),
    Pi,
    Input(usize),
    Add(Vec<usize>),
    Mul(Vec<usize>),
    PowInt(usize, i64),
    PowRational { base: usize, numer: i64, denom: i64 },
    Pow(usize, usize),
    Func(Func, usize),
}

/// A batch of expressions compiled for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    nodes: Vec<Expr>,
    roots: Vec<usize>,
    inputs: Vec<String>,
}

impl Program {
    pub fn compile(exprs: &[Expr]) -> Program {
        let mut slots: HashMap<Expr, usize> = HashMap::new();
        let mut ops = Vec::new();
        let mut nodes = Vec::new();
        let mut inputs: Vec<String> = Vec::new();
        for root in exprs {
            root.visit(|e| {
                if slots.contains_key(e) {
                    return;
                }
                let op = match e.kind() {
                    Kind::Num(v) => Op::Const(v.clone()),
                    Kind::Pi => Op::Pi,
                    Kind::Sym(s) => {
                        let idx = match inputs.iter().position(|n| n == &**s) {
                            Some(i) => i,
                            None => {
                                inputs.push(s.to_string());
                                inputs.len() - 1
                            }
                        };
                        Op::Input(idx)
                    }
                    Kind::Add(ts) => Op::Add(ts.iter().map(|t| slots[t]).collect()),
                    Kind::Mul(fs) => Op::Mul(fs.iter().map(|f| slots[f]).collect()),
                    Kind::Pow(b, x) => match x.as_num() {
                        Some(v) if v.is_integer() && v.to_integer().to_i64().is_some() => {
                            Op::PowInt(slots[b], v.to_integer().to_i64().unwrap())
                        }
                        Some(v) => match (v.numer().to_i64(), v.denom().to_i64()) {
                            (Some(numer), Some(denom)) => Op::PowRational {
                                base: slots[b],
                                numer,
                                denom,
                            },
                            _ => Op::Pow(slots[b], slots[x]),
                        },
                        None => Op::Pow(slots[b], slots[x]),
                    },
                    Kind::Func(f, a) => Op::Func(*f, slots[a]),
                };
                slots.insert(e.clone(), ops.len());
                ops.push(op);
                nodes.push(e.clone());
            });
        }
        let roots = exprs.iter().map(|e| slots[e]).collect();
        Program {
            ops,
            nodes,
            roots,
            inputs,
        }
    }

    /// Names of the free symbols, in input-slot order.
    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    /// Slot values for `bindings`, in input order.
    pub fn bind(&self, bindings: &Bindings) -> Result<Vec<f64>, EvalError> {
        self.inputs
            .iter()
            .map(|n| {
                bindings
                    .get(n)
                    .ok_or_else(|| EvalError::MissingBinding(n.clone()))
            })
            .collect()
    }

    pub fn eval(&self, bindings: &Bindings) -> Result<Vec<f64>, EvalError> {
        let inputs = self.bind(bindings)?;
        self.run(&inputs)
    }

    /// Runs the program with input values given in [`Program::inputs`] order.
    pub fn run<T: Real>(&self, inputs: &[T]) -> Result<Vec<T>, EvalError> {
        let mut vals: Vec<T> = Vec::with_capacity(self.ops.len());
        for (i, op) in self.ops.iter().enumerate() {
            let e = &self.nodes[i];
            let v = match op {
                Op::Const(c) => T::from_rational(c),
                Op::Pi => T::pi(),
                Op::Input(k) => inputs[*k],
                Op::Add(ts) => ts.iter().fold(T::zero(), |acc, &t| acc + vals[t]),
                Op::Mul(fs) => fs.iter().fold(T::one(), |acc, &f| acc * vals[f]),
                Op::PowInt(b, k) => {
                    let base = vals[*b];
                    if *k < 0 && base == T::zero() {
                        return Err(domain("division by zero", e));
                    }
                    base.powi(*k)
                }
                Op::PowRational { base, numer, denom } => {
                    let b = vals[*base];
                    if b < T::zero() {
                        return Err(domain("fractional power of a negative number", e));
                    }
                    if b == T::zero() && *numer < 0 {
                        return Err(domain("division by zero", e));
                    }
                    if *denom == 2 {
                        b.sqrt().powi(*numer)
                    } else {
                        b.powf(T::from_f64(*numer as f64) / T::from_f64(*denom as f64))
                    }
                }
                Op::Pow(b, x) => {
                    let (b, x) = (vals[*b], vals[*x]);
                    if b < T::zero() {
                        return Err(domain("non-integer power of a negative number", e));
                    }
                    if b == T::zero() {
                        if x > T::zero() {
                            T::zero()
                        } else {
                            return Err(domain("division by zero", e));
                        }
                    } else {
                        b.powf(x)
                    }
                }
                Op::Func(f, a) => {
                    let a = vals[*a];
                    match f {
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Tan => a.tan(),
                        Func::Exp => a.exp(),
                        Func::Log => {
                            if a <= T::zero() {
                                return Err(domain("logarithm of a non-positive number", e));
                            }
                            a.ln()
                        }
                        Func::Abs => a.abs(),
                        Func::Sign => a.signum(),
                    }
                }
            };
            if !v.is_finite() {
                return Err(domain("non-finite value", e));
            }
            vals.push(v);
        }
        Ok(self.roots.iter().map(|&r| vals[r]).collect())
    }
}

/// Evaluates one expression at `bindings`.
pub fn evaluate(e: &Expr, bindings: &Bindings) -> Result<f64, EvalError> {
    Ok(Program::compile(std::slice::from_ref(e)).eval(bindings)?[0])
}
