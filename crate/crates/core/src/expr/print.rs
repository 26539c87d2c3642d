//! Printing in the input grammar. `parse(&e.to_string())` reproduces `e`.

use std::fmt::{self, Write};

use num_rational::BigRational;
use num_traits::{One, Signed};

use super::{Expr, Kind};

// binding strength of the printed form
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const POWER: u8 = 3;
const ATOM: u8 = 4;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_expr(&mut out, self, 0);
        f.write_str(&out)
    }
}

fn precedence(e: &Expr) -> u8 {
    match e.kind() {
        Kind::Num(v) if v.is_negative() => SUM,
        Kind::Num(v) if !v.is_integer() => PRODUCT,
        Kind::Num(_) | Kind::Pi | Kind::Sym(_) | Kind::Func(..) => ATOM,
        Kind::Add(_) => SUM,
        Kind::Mul(_) => {
            if leading_negative(e) {
                SUM
            } else {
                PRODUCT
            }
        }
        Kind::Pow(_, x) => match x.as_num() {
            Some(v) if v.is_negative() => PRODUCT,
            _ => POWER,
        },
    }
}

fn leading_negative(e: &Expr) -> bool {
    match e.kind() {
        Kind::Num(v) => v.is_negative(),
        Kind::Mul(fs) => fs[0].as_num().is_some_and(|v| v.is_negative()),
        _ => false,
    }
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    if precedence(e) < min_prec {
        out.push('(');
        write_expr(out, e, 0);
        out.push(')');
        return;
    }
    match e.kind() {
        Kind::Num(v) => write_num(out, v),
        Kind::Pi => out.push_str("pi"),
        Kind::Sym(s) => out.push_str(s),
        Kind::Func(func, arg) => {
            out.push_str(func.name());
            out.push('(');
            write_expr(out, arg, 0);
            out.push(')');
        }
        Kind::Add(ts) => {
            for (i, t) in ts.iter().enumerate() {
                if i == 0 {
                    write_expr(out, t, SUM);
                } else if leading_negative(t) {
                    out.push_str(" - ");
                    write_expr(out, &t.neg(), PRODUCT);
                } else {
                    out.push_str(" + ");
                    write_expr(out, t, PRODUCT);
                }
            }
        }
        Kind::Mul(fs) => write_product(out, fs),
        Kind::Pow(b, x) => {
            if let Some(v) = x.as_num() {
                // an unfolded numeric base (0^-k) must keep its literal exponent
                if v.is_negative() && b.as_num().is_none() {
                    out.push_str("1/");
                    write_expr(out, &b.pow(&Expr::num(-v)), POWER);
                    return;
                }
            }
            write_power(out, b, x);
        }
    }
}

fn write_num(out: &mut String, v: &BigRational) {
    if v.is_integer() {
        let _ = write!(out, "{}", v.numer());
    } else {
        let _ = write!(out, "{}/{}", v.numer(), v.denom());
    }
}

fn write_power(out: &mut String, base: &Expr, exponent: &Expr) {
    let base_ok = match base.kind() {
        Kind::Num(v) => v.is_integer() && !v.is_negative(),
        Kind::Pi | Kind::Sym(_) | Kind::Func(..) => true,
        _ => false,
    };
    if base_ok {
        write_expr(out, base, ATOM);
    } else {
        out.push('(');
        write_expr(out, base, 0);
        out.push(')');
    }
    out.push('^');
    match exponent.as_num() {
        Some(v) if v.is_integer() && !v.is_negative() => write_num(out, v),
        _ => match exponent.kind() {
            Kind::Sym(_) | Kind::Pi | Kind::Func(..) => write_expr(out, exponent, ATOM),
            _ => {
                out.push('(');
                write_expr(out, exponent, 0);
                out.push(')');
            }
        },
    }
}

fn write_product(out: &mut String, fs: &[Expr]) {
    let (coef, rest) = match fs[0].as_num() {
        Some(c) => (c.clone(), &fs[1..]),
        None => (BigRational::one(), fs),
    };
    let mut numer: Vec<Expr> = Vec::new();
    let mut denom: Vec<Expr> = Vec::new();
    for f in rest {
        match f.kind() {
            Kind::Pow(b, x)
                if x.as_num().is_some_and(|v| v.is_negative()) && b.as_num().is_none() =>
            {
                denom.push(b.pow(&Expr::num(-x.as_num().unwrap())));
            }
            _ => numer.push(f.clone()),
        }
    }
    if coef.is_negative() {
        out.push('-');
    }
    let c = coef.abs();
    let mut first = true;
    if !c.numer().is_one() || numer.is_empty() {
        let _ = write!(out, "{}", c.numer());
        first = false;
    }
    for f in &numer {
        if !first {
            out.push('*');
        }
        write_expr(out, f, POWER);
        first = false;
    }
    if !c.denom().is_one() {
        let _ = write!(out, "/{}", c.denom());
    }
    for d in &denom {
        out.push('/');
        write_expr(out, d, POWER);
    }
}
