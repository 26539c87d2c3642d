use std::cmp::Ordering;

use super::{Expr, Kind};

/// Deterministic total order on canonical expressions: node-kind rank first,
/// then children recursively, then symbol name or constant value.
pub(crate) fn cmp(a: &Expr, b: &Expr) -> Ordering {
    if a == b {
        return Ordering::Equal;
    }
    let (ka, kb) = (a.kind(), b.kind());
    match ka.rank().cmp(&kb.rank()) {
        Ordering::Equal => {}
        o => return o,
    }
    match (ka, kb) {
        (Kind::Num(x), Kind::Num(y)) => x.cmp(y),
        (Kind::Pi, Kind::Pi) => Ordering::Equal,
        (Kind::Sym(x), Kind::Sym(y)) => x.cmp(y),
        (Kind::Add(xs), Kind::Add(ys)) | (Kind::Mul(xs), Kind::Mul(ys)) => cmp_slices(xs, ys),
        (Kind::Pow(b1, e1), Kind::Pow(b2, e2)) => cmp(b1, b2).then_with(|| cmp(e1, e2)),
        (Kind::Func(f1, a1), Kind::Func(f2, a2)) => f1.cmp(f2).then_with(|| cmp(a1, a2)),
        _ => unreachable!("ranks matched"),
    }
}

fn cmp_slices(xs: &[Expr], ys: &[Expr]) -> Ordering {
    for (x, y) in xs.iter().zip(ys) {
        match cmp(x, y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    xs.len().cmp(&ys.len())
}

fn split_power(e: &Expr) -> (&Expr, Option<&Expr>) {
    match e.kind() {
        Kind::Pow(b, x) => (b, Some(x)),
        _ => (e, None),
    }
}

/// Order of factors inside a product: by base, then by exponent.
pub(crate) fn cmp_factor(a: &Expr, b: &Expr) -> Ordering {
    let (ba, ea) = split_power(a);
    let (bb, eb) = split_power(b);
    cmp(ba, bb).then_with(|| match (ea, eb) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => cmp(x, y),
    })
}
