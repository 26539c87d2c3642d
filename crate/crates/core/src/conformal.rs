//! Conformal invariants: the square of the Weyl tensor, the Einstein factor
//! `J = |H|^(1/2)`, the preferred metric `g' = J g` and its Ricci scalar, the
//! conformal scalar curvature `S`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::expr::{Bindings, EvalError, Expr, Func, Kind, Program, Sampler, SamplingError};
use crate::geometry::{numeric_det, Geometry, GeometryError, MetricSpec, Scalar};

/// Sample points used to certify genericity.
pub const GENERICITY_POINTS: usize = 32;
/// `|H|` at or below this times `1 + max|K|` counts as vanishing.
pub const VANISHING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Error)]
pub enum ConformalError {
    #[error("non-generic: {0}")]
    NonGeneric(Genericity),
    #[error("conformal factor {factor} is not positive at {point}")]
    NonPositiveFactor { factor: String, point: Bindings },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Outcome of sampling `H` over a metric's domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Genericity {
    /// `H` is nonzero with the given sign (+1 or -1) at every sample point.
    Generic { sign: i8 },
    /// `H` vanished at `points`, out of `total` samples.
    Vanishing { points: Vec<Bindings>, total: usize },
    /// `H` took both signs; `points` holds one witness of each.
    SignChange { points: Vec<Bindings> },
}

impl Genericity {
    pub fn is_generic(&self) -> bool {
        matches!(self, Genericity::Generic { .. })
    }

    pub fn sign(&self) -> Option<i8> {
        match self {
            Genericity::Generic { sign } => Some(*sign),
            _ => None,
        }
    }

    /// Sample points where the check failed.
    pub fn failing_points(&self) -> &[Bindings] {
        match self {
            Genericity::Generic { .. } => &[],
            Genericity::Vanishing { points, .. } | Genericity::SignChange { points } => points,
        }
    }
}

impl fmt::Display for Genericity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Genericity::Generic { sign } => {
                write!(f, "generic({})", if *sign > 0 { '+' } else { '-' })
            }
            Genericity::Vanishing { points, total } if points.len() == *total => {
                f.write_str("H ≡ 0")
            }
            Genericity::Vanishing { points, total } => {
                write!(
                    f,
                    "H vanishes at {} of {} sample points",
                    points.len(),
                    total
                )
            }
            Genericity::SignChange { .. } => f.write_str("H changes sign"),
        }
    }
}

/// Replaces `abs(u)` by `±u` and `sign(u)` by `±1` wherever `u` has one sign
/// at all of `points`.
pub fn fold_abs(e: &Expr, points: &[Bindings]) -> Expr {
    if points.is_empty() {
        return e.clone();
    }
    let mut memo: HashMap<Expr, Expr> = HashMap::new();
    e.visit(|node| {
        let out = match node.kind() {
            Kind::Func(f @ (Func::Abs | Func::Sign), u) => {
                let u2 = memo[u].clone();
                match constant_sign(&u2, points) {
                    Some(s) if *f == Func::Abs => {
                        if s > 0 {
                            u2
                        } else {
                            u2.neg()
                        }
                    }
                    Some(s) => Expr::int(s as i64),
                    None => Expr::apply(*f, &u2),
                }
            }
            Kind::Num(_) | Kind::Pi | Kind::Sym(_) => node.clone(),
            _ => node.rebuild(|c| memo[c].clone()),
        };
        memo.insert(node.clone(), out);
    });
    memo[e].clone()
}

fn constant_sign(u: &Expr, points: &[Bindings]) -> Option<i8> {
    let prog = Program::compile(std::slice::from_ref(u));
    let mut sign = 0i8;
    for b in points {
        let v = prog.eval(b).ok()?[0];
        let s = if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            return None;
        };
        if sign != 0 && s != sign {
            return None;
        }
        sign = s;
    }
    Some(sign)
}

/// Memoizing conformal pipeline for one metric.
pub struct Conformal {
    geo: Geometry,
    seed: u64,
    points: Option<Vec<Bindings>>,
    verdict: Option<Genericity>,
    j: Option<Expr>,
    prime: Option<MetricSpec>,
    s: Option<Expr>,
}

impl Conformal {
    pub fn new(g: &MetricSpec) -> Result<Conformal, ConformalError> {
        Conformal::with_seed(g, Sampler::DEFAULT_SEED)
    }

    /// Pipeline whose genericity samples come from `seed`.
    pub fn with_seed(g: &MetricSpec, seed: u64) -> Result<Conformal, ConformalError> {
        Ok(Conformal {
            geo: Geometry::new(g)?,
            seed,
            points: None,
            verdict: None,
            j: None,
            prime: None,
            s: None,
        })
    }

    pub fn geometry(&mut self) -> &mut Geometry {
        &mut self.geo
    }

    pub fn spec(&self) -> &MetricSpec {
        self.geo.spec()
    }

    pub fn weyl_square(&mut self) -> Result<Expr, ConformalError> {
        Ok(self.geo.weyl_square()?)
    }

    /// The sample points behind the genericity verdict and the abs folding.
    pub fn sample_points(&mut self) -> Result<Vec<Bindings>, ConformalError> {
        if let Some(p) = &self.points {
            return Ok(p.clone());
        }
        let h = self.weyl_square()?;
        let k = self.geo.kretschmann()?;
        let mut sampler = self.spec().sampler(self.seed);
        let p = sampler.points_for(&[h, k], GENERICITY_POINTS)?;
        self.points = Some(p.clone());
        Ok(p)
    }

    /// Genericity verdict from `H` at [`GENERICITY_POINTS`] sample points.
    ///
    /// The vanishing threshold scales with `1 + max|K|` over the same points.
    pub fn genericity(&mut self) -> Result<Genericity, ConformalError> {
        if let Some(v) = &self.verdict {
            return Ok(v.clone());
        }
        let h = self.weyl_square()?;
        let k = self.geo.kretschmann()?;
        let points = self.sample_points()?;
        let prog = Program::compile(&[h, k]);
        let vals: Vec<Vec<f64>> = points
            .iter()
            .map(|b| prog.eval(b))
            .collect::<Result<_, _>>()?;
        let scale = 1.0 + vals.iter().map(|v| v[1].abs()).fold(0.0, f64::max);
        let vanishing: Vec<Bindings> = points
            .iter()
            .zip(&vals)
            .filter(|(_, v)| v[0].abs() <= VANISHING_TOL * scale)
            .map(|(b, _)| b.clone())
            .collect();
        let verdict = if !vanishing.is_empty() {
            Genericity::Vanishing {
                points: vanishing,
                total: points.len(),
            }
        } else {
            let pos = vals.iter().position(|v| v[0] > 0.0);
            let neg = vals.iter().position(|v| v[0] < 0.0);
            match (pos, neg) {
                (Some(p), Some(q)) => Genericity::SignChange {
                    points: vec![points[p].clone(), points[q].clone()],
                },
                (Some(_), None) => Genericity::Generic { sign: 1 },
                _ => Genericity::Generic { sign: -1 },
            }
        };
        self.verdict = Some(verdict.clone());
        Ok(verdict)
    }

    fn require_generic(&mut self) -> Result<i8, ConformalError> {
        match self.genericity()? {
            Genericity::Generic { sign } => Ok(sign),
            v => Err(ConformalError::NonGeneric(v)),
        }
    }

    /// `J = |H|^(1/2)` with the sign of `H` folded in.
    pub fn einstein_factor(&mut self) -> Result<Expr, ConformalError> {
        if let Some(j) = &self.j {
            return Ok(j.clone());
        }
        let sign = self.require_generic()?;
        let h = self.weyl_square()?;
        let abs_h = if sign > 0 { h } else { h.neg() };
        let j = self.geo.simplify(&abs_h.sqrt());
        let points = self.sample_points()?;
        let j = fold_abs(&j, &points);
        let j = self.geo.simplify(&j);
        self.j = Some(j.clone());
        Ok(j)
    }

    /// `g' = J g` on the same chart and domain.
    pub fn preferred_metric(&mut self) -> Result<MetricSpec, ConformalError> {
        if let Some(p) = &self.prime {
            return Ok(p.clone());
        }
        let j = self.einstein_factor()?;
        let base = self.spec().clone();
        let mut prime = base.clone();
        for (i, row) in prime.g.iter_mut().enumerate() {
            for (k, c) in row.iter_mut().enumerate() {
                *c = if k < i {
                    Expr::zero()
                } else {
                    self.geo.simplify(&(&j * &base.g[i][k]))
                };
            }
        }
        for i in 0..prime.g.len() {
            for k in 0..i {
                prime.g[i][k] = prime.g[k][i].clone();
            }
        }
        prime.name = format!("preferred metric of {}", base.name);
        prime.jet_order = base.jet_order + 2;
        self.prime = Some(prime.clone());
        Ok(prime)
    }

    /// `S`, the Ricci scalar of the preferred metric.
    pub fn scalar_curvature(&mut self) -> Result<Expr, ConformalError> {
        if let Some(s) = &self.s {
            return Ok(s.clone());
        }
        let prime = self.preferred_metric()?;
        let s = Geometry::new(&prime)?.ricci_scalar()?;
        self.s = Some(s.clone());
        Ok(s)
    }

    /// Highest derivative order of `g` that `S` depends on.
    pub fn scalar_curvature_order(&self) -> u32 {
        self.spec().jet_order + 4
    }

    /// One of the five reported scalars.
    pub fn scalar(&mut self, which: Scalar) -> Result<Expr, ConformalError> {
        match which {
            Scalar::R => Ok(self.geo.ricci_scalar()?),
            Scalar::K => Ok(self.geo.kretschmann()?),
            Scalar::H => self.weyl_square(),
            Scalar::J => self.einstein_factor(),
            Scalar::S => self.scalar_curvature(),
        }
    }
}

pub fn weyl_square(g: &MetricSpec) -> Result<Expr, ConformalError> {
    Conformal::new(g)?.weyl_square()
}

pub fn genericity_check(g: &MetricSpec) -> Result<Genericity, ConformalError> {
    Conformal::new(g)?.genericity()
}

pub fn einstein_factor(g: &MetricSpec) -> Result<Expr, ConformalError> {
    Conformal::new(g)?.einstein_factor()
}

pub fn preferred_metric(g: &MetricSpec) -> Result<MetricSpec, ConformalError> {
    Conformal::new(g)?.preferred_metric()
}

pub fn conformal_scalar_curvature(g: &MetricSpec) -> Result<Expr, ConformalError> {
    Conformal::new(g)?.scalar_curvature()
}

/// `c_ij = |det g|^(-1/n) g_ij`, using the signature for the sign of `det g`.
pub fn conformal_representative(g: &MetricSpec) -> Result<MetricSpec, ConformalError> {
    g.validate(8, Sampler::DEFAULT_SEED)?;
    let mut geo = Geometry::new(g)?;
    let det = geo.det();
    let abs_det = if g.negative_count().is_multiple_of(2) {
        det
    } else {
        det.neg()
    };
    let n = g.dim() as i64;
    let factor = geo.simplify(&abs_det.pow(&Expr::rational(-1, n)));
    let mut c = g.clone();
    for row in c.g.iter_mut() {
        for e in row.iter_mut() {
            *e = geo.simplify(&(&factor * &*e));
        }
    }
    c.name = format!("conformal representative of {}", g.name);
    Ok(c)
}

/// A conformal structure given by one representative metric.
#[derive(Clone, Debug)]
pub struct ConformalClass {
    representative: MetricSpec,
    normalized: MetricSpec,
}

impl ConformalClass {
    pub fn new(g: &MetricSpec) -> Result<ConformalClass, ConformalError> {
        Ok(ConformalClass {
            representative: g.clone(),
            normalized: conformal_representative(g)?,
        })
    }

    pub fn representative(&self) -> &MetricSpec {
        &self.representative
    }

    /// The unit-determinant matrix `c_ij`.
    pub fn conformal_representative(&self) -> &MetricSpec {
        &self.normalized
    }

    /// Whether `other` has the same `c_ij` at `points` points of the joint domain.
    pub fn contains(
        &self,
        other: &MetricSpec,
        points: usize,
        tol: f64,
    ) -> Result<bool, ConformalError> {
        let c = conformal_representative(other)?;
        let mine: Vec<Expr> = self.normalized.g.iter().flatten().cloned().collect();
        let theirs: Vec<Expr> = c.g.iter().flatten().cloned().collect();
        if mine.len() != theirs.len() {
            return Ok(false);
        }
        let all: Vec<Expr> = mine.iter().chain(&theirs).cloned().collect();
        let prog = Program::compile(&all);
        let mut domain = self.representative.sample_domain();
        for (k, iv) in other.sample_domain().intervals {
            domain.intervals.entry(k).or_insert(iv);
        }
        domain
            .exclusions
            .extend(other.domain.exclusions.iter().cloned());
        let mut sampler = Sampler::new(domain, Sampler::DEFAULT_SEED);
        for b in sampler.points_for(&all, points)? {
            let v = prog.eval(&b)?;
            let (a, o) = v.split_at(mine.len());
            if a.iter()
                .zip(o)
                .any(|(x, y)| (x - y).abs() > tol * (1.0 + x.abs()))
            {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `|det c|` at `points` sample points.
    pub fn unit_determinant_samples(&self, points: usize) -> Result<Vec<f64>, ConformalError> {
        let comps: Vec<Expr> = self.normalized.g.iter().flatten().cloned().collect();
        let prog = Program::compile(&comps);
        let n = self.normalized.dim();
        let mut sampler = self.normalized.sampler(Sampler::DEFAULT_SEED);
        sampler
            .points_for(&comps, points)?
            .iter()
            .map(|b| Ok(numeric_det(&prog.eval(b)?, n).abs()))
            .collect()
    }
}

/// Where an [`InvariantReport`] evaluates its scalars.
#[derive(Clone, Debug)]
pub enum Points {
    /// This many points drawn from the metric's domain.
    Sample(usize),
    /// These points; unbound parameters take their default values.
    Given(Vec<Bindings>),
}

/// Scalars of one metric with their values at sample points.
#[derive(Clone, Debug)]
pub struct InvariantReport {
    pub name: String,
    /// `None` where the scalar is undefined (J and S of non-generic metrics).
    pub scalars: BTreeMap<Scalar, Option<Expr>>,
    /// `None` below four dimensions, where `H` is undefined.
    pub genericity: Option<Genericity>,
    pub seed: u64,
    pub samples: Vec<(Bindings, BTreeMap<Scalar, Option<f64>>)>,
}

impl InvariantReport {
    /// Computes `which` for `g` and evaluates them at `points`.
    ///
    /// Non-generic metrics still get a report; their `J` and `S` are `None`.
    pub fn build(
        g: &MetricSpec,
        which: &[Scalar],
        points: Points,
        seed: u64,
    ) -> Result<InvariantReport, ConformalError> {
        let mut pipe = Conformal::with_seed(g, seed)?;
        let genericity = if g.dim() >= 4 {
            Some(pipe.genericity()?)
        } else {
            None
        };
        let mut scalars = BTreeMap::new();
        for &s in which {
            let v = match pipe.scalar(s) {
                Ok(e) => Some(e),
                Err(ConformalError::NonGeneric(_)) => None,
                Err(e) => return Err(e),
            };
            scalars.insert(s, v);
        }
        let defined: Vec<Expr> = scalars.values().flatten().cloned().collect();
        let points = match points {
            Points::Sample(n) => g.sampler(seed).points_for(&defined, n)?,
            Points::Given(list) => {
                let domain = g.sample_domain();
                list.into_iter()
                    .map(|mut b| {
                        for (k, iv) in &domain.intervals {
                            if iv.is_point() && b.get(k).is_none() {
                                b.insert(k, iv.lo);
                            }
                        }
                        b
                    })
                    .collect()
            }
        };
        let prog = Program::compile(&defined);
        let mut samples = Vec::with_capacity(points.len());
        for b in points {
            let vals = prog.eval(&b)?;
            let mut it = vals.into_iter();
            let row = scalars
                .iter()
                .map(|(s, e)| (*s, e.as_ref().map(|_| it.next().unwrap())))
                .collect();
            samples.push((b, row));
        }
        Ok(InvariantReport {
            name: g.name.clone(),
            scalars,
            genericity,
            seed,
            samples,
        })
    }
}

/// Largest deviation seen by one invariance check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_deviation: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct InvarianceReport {
    pub metric: String,
    pub factor: Expr,
    pub tol: f64,
    pub points: Vec<Bindings>,
    pub checks: Vec<CheckResult>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// `|x - y| / max(|x|, |y|)`, zero when both vanish.
pub fn relative_deviation(x: f64, y: f64) -> f64 {
    let m = x.abs().max(y.abs());
    if m == 0.0 {
        0.0
    } else {
        (x - y).abs() / m
    }
}

/// `|x - y| / (1 + |y|)`.
pub fn scaled_deviation(x: f64, y: f64) -> f64 {
    (x - y).abs() / (1.0 + y.abs())
}

/// Checks the rescaling laws for `g -> alpha g` at `points` sample points:
/// `H` scales by `alpha^-2`, `J` by `alpha^-1`, and `g'` and `S` are unchanged.
///
/// Both pipelines are run independently from their own metrics.
pub fn verify_invariance(
    g: &MetricSpec,
    alpha: &Expr,
    points: usize,
    tol: f64,
) -> Result<InvarianceReport, ConformalError> {
    let mut base = Conformal::new(g)?;
    let mut sampler = g.sampler(Sampler::DEFAULT_SEED);
    let pts = sampler.points_for(std::slice::from_ref(alpha), points)?;
    let aprog = Program::compile(std::slice::from_ref(alpha));
    for b in &pts {
        if aprog.eval(b)?[0] <= 0.0 {
            return Err(ConformalError::NonPositiveFactor {
                factor: alpha.to_string(),
                point: b.clone(),
            });
        }
    }
    base.require_generic()?;
    let scaled_spec = g.scaled(alpha);
    let mut scaled = Conformal::new(&scaled_spec)?;

    let mut exprs = vec![
        alpha.clone(),
        base.weyl_square()?,
        scaled.weyl_square()?,
        base.einstein_factor()?,
        scaled.einstein_factor()?,
        base.scalar_curvature()?,
        scaled.scalar_curvature()?,
    ];
    let p0 = base.preferred_metric()?;
    let p1 = scaled.preferred_metric()?;
    let n = g.dim();
    exprs.extend(p0.g.iter().flatten().cloned());
    exprs.extend(p1.g.iter().flatten().cloned());
    let prog = Program::compile(&exprs);

    let mut dev = [0.0f64; 4];
    for b in &pts {
        let v = prog.eval(b)?;
        let a = v[0];
        dev[0] = dev[0].max(relative_deviation(v[2], v[1] / (a * a)));
        dev[1] = dev[1].max(relative_deviation(v[4], v[3] / a));
        let (c0, c1) = v[7..].split_at(n * n);
        for (x, y) in c1.iter().zip(c0) {
            dev[2] = dev[2].max(relative_deviation(*x, *y));
        }
        dev[3] = dev[3].max(scaled_deviation(v[6], v[5]));
    }
    let checks = ["H", "J", "g'", "S"]
        .into_iter()
        .zip(dev)
        .map(|(name, d)| CheckResult {
            name,
            max_deviation: d,
            passed: d <= tol,
        })
        .collect();
    Ok(InvarianceReport {
        metric: g.name.clone(),
        factor: alpha.clone(),
        tol,
        points: pts,
        checks,
    })
}
