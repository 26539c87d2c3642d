//! Finite-difference oracle for curvature scalars.
//!
//! Works only from numeric metric values: derivatives come from fourth-order
//! central stencils evaluated in double-double arithmetic, so the result is
//! independent of the symbolic differentiator and simplifier.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::MetricSpec;
use crate::expr::{evaluate, Bindings, DoubleDouble, EvalError, Exclusion, Program, Real};

type T = DoubleDouble;

/// Curvature scalars the oracle and the CLI know about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scalar {
    R,
    K,
    H,
    J,
    S,
}

impl Scalar {
    pub const ALL: [Scalar; 5] = [Scalar::R, Scalar::K, Scalar::H, Scalar::J, Scalar::S];

    pub fn name(self) -> &'static str {
        match self {
            Scalar::R => "R",
            Scalar::K => "K",
            Scalar::H => "H",
            Scalar::J => "J",
            Scalar::S => "S",
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scalar {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scalar::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scalar `{s}` (expected R, K, H, J or S)"))
    }
}

#[derive(Debug, Clone, Error)]
pub enum OracleError {
    #[error("no value for coordinate or parameter `{0}`")]
    Missing(String),
    #[error("stencil point {0} lies outside the metric's domain")]
    OutsideDomain(Bindings),
    #[error("need dimension at least {needed}, metric has {found}")]
    Dimension { needed: usize, found: usize },
    #[error("metric is singular on the stencil")]
    Singular,
    #[error("step halving changed the estimate from {coarse} to {fine}")]
    IllConditioned { coarse: f64, fine: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Relative change under step halving above which a result is rejected.
pub const RICHARDSON_TOL: f64 = 1e-3;

/// Numeric value of `scalar` for `g` at `at`, using step `h`.
///
/// Coordinates must be bound in `at`; parameters fall back to the metric's
/// defaults. Every stencil point must satisfy the domain's exclusions and
/// give finite metric values; the sampling intervals play no role here. The
/// estimate at `h` is compared with the one at `h/2` and rejected if they
/// disagree by more than [`RICHARDSON_TOL`].
pub fn fd_oracle(
    g: &MetricSpec,
    scalar: Scalar,
    at: &Bindings,
    h: f64,
) -> Result<f64, OracleError> {
    let n = g.dim();
    if matches!(scalar, Scalar::H | Scalar::J | Scalar::S) && n < 4 {
        return Err(OracleError::Dimension {
            needed: 4,
            found: n,
        });
    }
    let field = Field::new(g, at)?;
    let coarse = field.scalar(scalar, T::from_f64(h))?;
    let fine = field.scalar(scalar, T::from_f64(h / 2.0))?;
    if (coarse - fine).abs() > RICHARDSON_TOL * (1.0 + fine.abs()) || !coarse.is_finite() {
        return Err(OracleError::IllConditioned { coarse, fine });
    }
    Ok(coarse)
}

/// The metric as a numeric function of the coordinates.
struct Field {
    n: usize,
    coords: Vec<String>,
    base: Bindings,
    exclusions: Vec<Exclusion>,
    prog: Program,
    inputs: Vec<T>,
    /// Input slot of each coordinate, if the metric depends on it.
    slots: Vec<Option<usize>>,
    active: Vec<usize>,
    x0: Vec<T>,
}

impl Field {
    fn new(g: &MetricSpec, at: &Bindings) -> Result<Field, OracleError> {
        let n = g.dim();
        let comps: Vec<_> = g.g.iter().flatten().cloned().collect();
        let prog = Program::compile(&comps);
        let mut x0 = Vec::with_capacity(n);
        for c in &g.coords {
            let v = at.get(c).ok_or_else(|| OracleError::Missing(c.clone()))?;
            x0.push(T::from_f64(v));
        }
        let lookup = |name: &str| {
            at.get(name)
                .or_else(|| g.defaults.get(name).copied())
                .or_else(|| {
                    g.domain
                        .interval(name)
                        .filter(|iv| iv.is_point())
                        .map(|iv| iv.lo)
                })
                .ok_or_else(|| OracleError::Missing(name.to_string()))
        };
        let mut inputs = Vec::new();
        for name in prog.inputs() {
            inputs.push(T::from_f64(lookup(name)?));
        }
        let mut base = Bindings::new();
        for x in &g.domain.exclusions {
            for name in x.expr().free_symbols() {
                base.insert(&name, lookup(&name)?);
            }
        }
        let slots: Vec<Option<usize>> = g
            .coords
            .iter()
            .map(|c| prog.inputs().iter().position(|s| s == c))
            .collect();
        let active = (0..n).filter(|&c| slots[c].is_some()).collect();
        Ok(Field {
            n,
            coords: g.coords.clone(),
            base,
            exclusions: g.domain.exclusions.clone(),
            prog,
            inputs,
            slots,
            active,
            x0,
        })
    }

    fn point(&self, x: &[T]) -> Bindings {
        let mut b = self.base.clone();
        for (c, v) in self.coords.iter().zip(x) {
            b.insert(c, v.to_f64());
        }
        b
    }

    fn metric(&self, x: &[T]) -> Result<Vec<T>, OracleError> {
        let outside = || OracleError::OutsideDomain(self.point(x));
        for ex in &self.exclusions {
            match evaluate(ex.expr(), &self.point(x)) {
                Ok(v) if ex.admits(v) => {}
                _ => return Err(outside()),
            }
        }
        let mut inputs = self.inputs.clone();
        for (c, s) in self.slots.iter().enumerate() {
            if let Some(s) = s {
                inputs[*s] = x[c];
            }
        }
        self.prog.run(&inputs).map_err(|e| match e {
            EvalError::Domain { .. } => outside(),
            e => e.into(),
        })
    }

    fn scalar(&self, which: Scalar, h: T) -> Result<f64, OracleError> {
        let v = match which {
            Scalar::S => {
                let conformal = |x: &[T]| -> Result<Vec<T>, OracleError> {
                    let jet = jet(&|y: &[T]| self.metric(y), x, h, &self.active, self.n)?;
                    let c = Curvature::of(&jet, true)?;
                    let j = c.h.abs().sqrt();
                    Ok(jet.g.iter().map(|&v| j * v).collect())
                };
                let jet = jet(&conformal, &self.x0, h, &self.active, self.n)?;
                Curvature::of(&jet, false)?.r
            }
            _ => {
                let jet = jet(&|y: &[T]| self.metric(y), &self.x0, h, &self.active, self.n)?;
                let c = Curvature::of(&jet, matches!(which, Scalar::H | Scalar::J))?;
                match which {
                    Scalar::R => c.r,
                    Scalar::K => c.k,
                    Scalar::H => c.h,
                    _ => c.h.abs().sqrt(),
                }
            }
        };
        Ok(v.to_f64())
    }
}

/// Value, first and second derivatives of a symmetric matrix field.
struct Jet {
    n: usize,
    g: Vec<T>,
    /// `[k][i][j]`
    dg: Vec<T>,
    /// `[k][l][i][j]`
    ddg: Vec<T>,
}

const OFFSETS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
const W1: [f64; 4] = [1.0, -8.0, 8.0, -1.0];
const W2: [f64; 4] = [-1.0, 16.0, 16.0, -1.0];

fn jet<F>(f: &F, x: &[T], h: T, active: &[usize], n: usize) -> Result<Jet, OracleError>
where
    F: Fn(&[T]) -> Result<Vec<T>, OracleError>,
{
    let m = n * n;
    let at = |shift: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(c, o) in shift {
            y[c] = y[c] + T::from_f64(o) * h;
        }
        f(&y)
    };
    let g = at(&[])?;
    let mut dg = vec![T::zero(); n * m];
    let mut ddg = vec![T::zero(); n * n * m];
    let twelve_h = T::from_f64(12.0) * h;
    let twelve_h2 = twelve_h * h;
    let h2_144 = T::from_f64(144.0) * h * h;
    for &k in active {
        let vals: Vec<Vec<T>> = OFFSETS
            .iter()
            .map(|&o| at(&[(k, o)]))
            .collect::<Result<_, _>>()?;
        for e in 0..m {
            let mut d1 = T::zero();
            let mut d2 = T::from_f64(-30.0) * g[e];
            for s in 0..4 {
                d1 = d1 + T::from_f64(W1[s]) * vals[s][e];
                d2 = d2 + T::from_f64(W2[s]) * vals[s][e];
            }
            dg[k * m + e] = d1 / twelve_h;
            ddg[(k * n + k) * m + e] = d2 / twelve_h2;
        }
    }
    for (a, &k) in active.iter().enumerate() {
        for &l in &active[a + 1..] {
            let mut acc = vec![T::zero(); m];
            for s in 0..4 {
                for t in 0..4 {
                    let v = at(&[(k, OFFSETS[s]), (l, OFFSETS[t])])?;
                    let w = T::from_f64(W1[s] * W1[t]);
                    for e in 0..m {
                        acc[e] = acc[e] + w * v[e];
                    }
                }
            }
            for e in 0..m {
                let d = acc[e] / h2_144;
                ddg[(k * n + l) * m + e] = d;
                ddg[(l * n + k) * m + e] = d;
            }
        }
    }
    Ok(Jet { n, g, dg, ddg })
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(a: &[T], n: usize) -> Result<Vec<T>, OracleError> {
    let mut m = a.to_vec();
    let mut inv: Vec<T> = (0..n * n)
        .map(|k| {
            if k % (n + 1) == 0 {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| {
                m[x * n + c]
                    .abs()
                    .partial_cmp(&m[y * n + c].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if m[p * n + c].to_f64() == 0.0 {
            return Err(OracleError::Singular);
        }
        for k in 0..n {
            m.swap(p * n + k, c * n + k);
            inv.swap(p * n + k, c * n + k);
        }
        let piv = m[c * n + c];
        for k in 0..n {
            m[c * n + k] = m[c * n + k] / piv;
            inv[c * n + k] = inv[c * n + k] / piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r * n + c];
                for k in 0..n {
                    m[r * n + k] = m[r * n + k] - f * m[c * n + k];
                    inv[r * n + k] = inv[r * n + k] - f * inv[c * n + k];
                }
            }
        }
    }
    Ok(inv)
}

struct Curvature {
    r: T,
    k: T,
    h: T,
}

impl Curvature {
    fn of(jet: &Jet, with_weyl: bool) -> Result<Curvature, OracleError> {
        let n = jet.n;
        let m = n * n;
        let g = &jet.g;
        let gi = invert(g, n)?;
        let dg = |k: usize, i: usize, j: usize| jet.dg[k * m + i * n + j];
        let ddg = |k: usize, l: usize, i: usize, j: usize| jet.ddg[(k * n + l) * m + i * n + j];
        let half = T::from_f64(0.5);

        // ∂_m g^il = -g^ia ∂_m g_ab g^bl
        let mut dgi = vec![T::zero(); n * m];
        for q in 0..n {
            for i in 0..n {
                for l in 0..n {
                    let mut s = T::zero();
                    for a in 0..n {
                        for b in 0..n {
                            s = s + gi[i * n + a] * dg(q, a, b) * gi[b * n + l];
                        }
                    }
                    dgi[q * m + i * n + l] = -s;
                }
            }
        }
        let mut gamma = vec![T::zero(); n * m];
        let mut dgamma = vec![T::zero(); n * n * m];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = T::zero();
                    for l in 0..n {
                        s = s + gi[i * n + l] * (dg(j, l, k) + dg(k, l, j) - dg(l, j, k));
                    }
                    gamma[(i * n + j) * n + k] = half * s;
                    for q in 0..n {
                        let mut s = T::zero();
                        for l in 0..n {
                            s = s
                                + dgi[q * m + i * n + l]
                                    * (dg(j, l, k) + dg(k, l, j) - dg(l, j, k))
                                + gi[i * n + l]
                                    * (ddg(q, j, l, k) + ddg(q, k, l, j) - ddg(q, l, j, k));
                        }
                        dgamma[q * n * m + (i * n + j) * n + k] = half * s;
                    }
                }
            }
        }
        let gam = |i: usize, j: usize, k: usize| gamma[(i * n + j) * n + k];
        let dgam = |q: usize, i: usize, j: usize, k: usize| dgamma[q * n * m + (i * n + j) * n + k];
        let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
        let mut riem = vec![T::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = dgam(k, i, l, j) - dgam(l, i, k, j);
                        for q in 0..n {
                            s = s + gam(i, k, q) * gam(q, l, j) - gam(i, l, q) * gam(q, k, j);
                        }
                        riem[idx(i, j, k, l)] = s;
                    }
                }
            }
        }
        let mut ric = vec![T::zero(); m];
        let mut r = T::zero();
        for j in 0..n {
            for l in 0..n {
                let mut s = T::zero();
                for i in 0..n {
                    s = s + riem[idx(i, j, i, l)];
                }
                ric[j * n + l] = s;
                r = r + gi[j * n + l] * s;
            }
        }
        let lower = lower_first(&riem, g, n);
        let k = full_square(&lower, &gi, n);
        let h = if with_weyl {
            let c1 = T::from_f64(1.0 / (n as f64 - 2.0));
            let c2 = r * T::from_f64(1.0 / ((n as f64 - 1.0) * (n as f64 - 2.0)));
            let gg = |a: usize, b: usize| g[a * n + b];
            let rc = |a: usize, b: usize| ric[a * n + b];
            let mut weyl = vec![T::zero(); m * m];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let rp =
                                gg(i, k) * rc(j, l) - gg(i, l) * rc(j, k) - gg(j, k) * rc(i, l)
                                    + gg(j, l) * rc(i, k);
                            let mp = gg(i, k) * gg(j, l) - gg(i, l) * gg(j, k);
                            weyl[idx(i, j, k, l)] = lower[idx(i, j, k, l)] - c1 * rp + c2 * mp;
                        }
                    }
                }
            }
            full_square(&weyl, &gi, n)
        } else {
            T::zero()
        };
        Ok(Curvature { r, k, h })
    }
}

fn lower_first(t: &[T], g: &[T], n: usize) -> Vec<T> {
    let m3 = n * n * n;
    let mut out = vec![T::zero(); n * m3];
    for i in 0..n {
        for rest in 0..m3 {
            let mut s = T::zero();
            for a in 0..n {
                s = s + g[i * n + a] * t[a * m3 + rest];
            }
            out[i * m3 + rest] = s;
        }
    }
    out
}

/// `T_ijkl T^ijkl`, raising one slot at a time.
fn full_square(t: &[T], gi: &[T], n: usize) -> T {
    let mut up = t.to_vec();
    for slot in 0..4 {
        let stride = n.pow(3 - slot as u32);
        let mut next = vec![T::zero(); up.len()];
        for (o, v) in next.iter_mut().enumerate() {
            let i = (o / stride) % n;
            let base = o - i * stride;
            let mut s = T::zero();
            for a in 0..n {
                s = s + gi[i * n + a] * up[base + a * stride];
            }
            *v = s;
        }
        up = next;
    }
    t.iter()
        .zip(&up)
        .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::expr::{Expr, SampleDomain};

    fn schwarzschild() -> MetricSpec {
        let f = "(1 - 2*M/r)";
        let e = |s: &str| Expr::parse_lit(s);
        let z = Expr::zero;
        MetricSpec {
            name: "schwarzschild".into(),
            coords: ["t", "r", "theta", "phi"].map(String::from).to_vec(),
            params: vec!["M".into()],
            signature: "-+++".into(),
            g: vec![
                vec![e(&format!("-{f}")), z(), z(), z()],
                vec![z(), e(&format!("1/{f}")), z(), z()],
                vec![z(), z(), e("r^2"), z()],
                vec![z(), z(), z(), e("r^2*sin(theta)^2")],
            ],
            domain: SampleDomain::new()
                .exclude(Exclusion::Positive(e("1 - 2*M/r")))
                .with("r", 3.0, 10.0)
                .with("theta", 0.3, 2.8)
                .with("phi", 0.1, 6.0)
                .with("t", 0.0, 0.0),
            defaults: BTreeMap::from([("M".to_string(), 1.0)]),
            jet_order: 0,
        }
    }

    fn at(r: f64, theta: f64) -> Bindings {
        Bindings::new()
            .with("t", 0.0)
            .with("r", r)
            .with("theta", theta)
            .with("phi", 1.0)
    }

    #[test]
    fn kretschmann_at_the_sampling_edge() {
        let b = Bindings::new()
            .with("M", 1.0)
            .with("r", 3.0)
            .with("theta", 1.2)
            .with("phi", 0.5)
            .with("t", 0.0);
        let k = fd_oracle(&schwarzschild(), Scalar::K, &b, 1e-3).unwrap();
        assert!((k - 48.0 / 729.0).abs() < 1e-4 * 48.0 / 729.0);
    }

    #[test]
    fn schwarzschild_scalars() {
        let g = schwarzschild();
        let b = at(4.0, 1.1);
        let k = 48.0 / 4f64.powi(6);
        assert!(fd_oracle(&g, Scalar::R, &b, 1e-3).unwrap().abs() < 1e-12);
        assert!((fd_oracle(&g, Scalar::K, &b, 1e-3).unwrap() - k).abs() < 1e-12 * k);
        assert!((fd_oracle(&g, Scalar::H, &b, 1e-3).unwrap() - k).abs() < 1e-12 * k);
        let s = 9.0 * 3f64.sqrt() / 4.0 * (1.0 - 4.0 / 6.0);
        let got = fd_oracle(&g, Scalar::S, &b, 1e-3).unwrap();
        assert!((got - s).abs() < 1e-9 * s.abs(), "{got} vs {s}");
    }

    #[test]
    fn stencil_must_stay_inside() {
        let g = schwarzschild();
        let err = fd_oracle(&g, Scalar::K, &at(2.0015, 1.1), 1e-3).unwrap_err();
        assert!(matches!(err, OracleError::OutsideDomain(_)));
    }

    #[test]
    fn coordinates_must_be_bound() {
        let g = schwarzschild();
        let b = Bindings::new().with("r", 4.0);
        assert!(matches!(
            fd_oracle(&g, Scalar::R, &b, 1e-3),
            Err(OracleError::Missing(_))
        ));
    }

    #[test]
    fn scalar_names_round_trip() {
        for s in Scalar::ALL {
            assert_eq!(s.name().parse::<Scalar>().unwrap(), s);
        }
        assert!("Q".parse::<Scalar>().is_err());
    }
}
