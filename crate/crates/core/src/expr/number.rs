//! Exact rational helpers: content extraction and rational powers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{intern, Expr, Kind};

/// Largest integer exponent folded exactly; bigger powers stay symbolic.
const MAX_EXACT_EXPONENT: u32 = 512;
/// Bound on the size of an exactly folded power.
const MAX_RESULT_BITS: u64 = 1 << 16;
const TRIAL_DIVISION_LIMIT: u64 = 100_000;

/// Positive gcd of numerators over lcm of denominators.
pub(crate) fn rational_content<'a, I: IntoIterator<Item = &'a BigRational>>(
    values: I,
) -> BigRational {
    let mut g = BigInt::zero();
    let mut l = BigInt::one();
    for v in values {
        g = g.gcd(v.numer());
        l = l.lcm(v.denom());
    }
    if g.is_zero() {
        return BigRational::one();
    }
    BigRational::new(g, l)
}

/// `base ^ exponent` for rational operands. `None` when the result is not a
/// real number representable in canonical form (division by zero, even roots
/// of negatives, huge exponents).
pub(crate) fn numeric_pow(base: &BigRational, exponent: &BigRational) -> Option<Expr> {
    if base.is_zero() {
        return if exponent.is_positive() {
            Some(Expr::zero())
        } else {
            None
        };
    }
    if base.is_one() {
        return Some(Expr::one());
    }
    if exponent.is_integer() {
        let e = exponent.to_integer().to_i64()?;
        let bits = base.numer().bits() + base.denom().bits();
        if e.unsigned_abs() > MAX_EXACT_EXPONENT as u64 || bits * e.unsigned_abs() > MAX_RESULT_BITS
        {
            return None;
        }
        let mut v = pow_u32(base, e.unsigned_abs() as u32);
        if e < 0 {
            v = v.recip();
        }
        return Some(Expr::num(v));
    }
    if base.is_negative() {
        return None;
    }
    let mut coef = BigRational::one();
    let mut radicals: Vec<(BigInt, BigRational)> = Vec::new();
    let mut absorb = |p: BigInt, mult: i64| -> Option<()> {
        let e = exponent * BigRational::from_integer(BigInt::from(mult));
        let whole = e.floor();
        let frac = &e - &whole;
        let w = whole.to_integer().to_i64()?;
        if w.unsigned_abs() > MAX_EXACT_EXPONENT as u64 {
            return None;
        }
        let pr = BigRational::from_integer(p.clone());
        let mut factor = pow_u32(&pr, w.unsigned_abs() as u32);
        if w < 0 {
            factor = factor.recip();
        }
        coef *= factor;
        if !frac.is_zero() {
            radicals.push((p, frac));
        }
        Some(())
    };
    for (p, m) in factorize(base.numer()) {
        absorb(p, m as i64)?;
    }
    for (p, m) in factorize(base.denom()) {
        absorb(p, -(m as i64))?;
    }
    radicals.sort_by(|a, b| a.0.cmp(&b.0));
    let mut factors: Vec<Expr> = radicals
        .into_iter()
        .map(|(p, f)| {
            intern(Kind::Pow(
                Expr::num(BigRational::from_integer(p)),
                Expr::num(f),
            ))
        })
        .collect();
    if factors.is_empty() {
        return Some(Expr::num(coef));
    }
    if coef.is_one() && factors.len() == 1 {
        return factors.pop();
    }
    if !coef.is_one() {
        factors.insert(0, Expr::num(coef));
    }
    Some(intern(Kind::Mul(factors)))
}

fn pow_u32(b: &BigRational, e: u32) -> BigRational {
    num_traits::pow(b.clone(), e as usize)
}

/// Prime factorization by trial division. A cofactor that survives the trial
/// bound is kept as a single "prime" so the result stays deterministic.
fn factorize(n: &BigInt) -> Vec<(BigInt, u32)> {
    let mut out = Vec::new();
    let Some(mut m) = n.to_u64() else {
        return vec![(n.clone(), 1)];
    };
    if m <= 1 {
        return out;
    }
    let mut d = 2u64;
    while d <= TRIAL_DIVISION_LIMIT && d.saturating_mul(d) <= m {
        if m % d == 0 {
            let mut k = 0;
            while m % d == 0 {
                m /= d;
                k += 1;
            }
            out.push((BigInt::from(d), k));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if m > 1 {
        out.push((BigInt::from(m), 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn content_of_mixed_rationals() {
        let vals = [r(4, 3), r(-2, 9), r(6, 1)];
        assert_eq!(rational_content(vals.iter()), r(2, 9));
    }

    #[test]
    fn factorization() {
        assert_eq!(
            factorize(&BigInt::from(360)),
            vec![
                (BigInt::from(2), 3),
                (BigInt::from(3), 2),
                (BigInt::from(5), 1)
            ]
        );
        assert!(factorize(&BigInt::from(1)).is_empty());
    }

    #[test]
    fn integer_and_fractional_powers() {
        assert_eq!(
            numeric_pow(&r(2, 3), &r(-2, 1)).unwrap(),
            Expr::num(r(9, 4))
        );
        assert_eq!(numeric_pow(&r(9, 4), &r(1, 2)).unwrap(), Expr::num(r(3, 2)));
        assert!(numeric_pow(&r(-2, 1), &r(1, 2)).is_none());
        assert!(numeric_pow(&r(0, 1), &r(-1, 1)).is_none());
        assert_eq!(numeric_pow(&r(0, 1), &r(1, 3)).unwrap(), Expr::zero());
    }
}
