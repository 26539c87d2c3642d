//! Metric geometry: determinant and inverse, Levi-Civita connection, the
//! Riemann, Ricci and Weyl tensors and their scalar contractions.
//!
//! Conventions:
//!
//! ```text
//! Γ^i_jk   = 1/2 g^il (∂_j g_lk + ∂_k g_lj - ∂_l g_jk)
//! R^i_jkl  = ∂_k Γ^i_lj - ∂_l Γ^i_kj + Γ^i_km Γ^m_lj - Γ^i_lm Γ^m_kj
//! R_jl     = R^i_jil,   R = g^jl R_jl
//! K        = R_ijkl R^ijkl
//! C_ijkl   = R_ijkl - (g_ik R_jl - g_il R_jk - g_jk R_il + g_jl R_ik)/(n-2)
//!                   + R (g_ik g_jl - g_il g_jk)/((n-1)(n-2))
//! ```
//!
//! With these signs the Gödel metric has `R = -1/a^2`.

mod fd;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::expr::{
    Assumptions, Bindings, Differentiator, EvalError, Expr, Interval, Program, SampleDomain,
    Sampler, SamplingError, Simplifier,
};

pub use fd::{fd_oracle, OracleError, Scalar};

#[derive(Debug, Clone, Error)]
pub enum GeometryError {
    #[error("need dimension at least {needed}, metric has {found}")]
    Dimension { needed: usize, found: usize },
    #[error("component g[{i}][{j}] differs from g[{j}][{i}]")]
    NotSymmetric { i: usize, j: usize },
    #[error("metric has {rows} rows for {dim} coordinates")]
    Shape { rows: usize, dim: usize },
    #[error("signature `{signature}` does not fit dimension {dim}")]
    SignatureLength { signature: String, dim: usize },
    #[error("metric is degenerate at {0}")]
    Degenerate(Bindings),
    #[error("determinant sign at {point} contradicts signature {signature}")]
    SignatureMismatch { signature: String, point: Bindings },
    #[error("slot {slot} out of range for a rank-{rank} tensor")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("cannot contract slots {a} and {b}: need one upper and one lower index")]
    VarianceMismatch { a: usize, b: usize },
    #[error("tensor chart {found:?} does not match metric chart {expected:?}")]
    ChartMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A metric in one chart together with the data needed to sample it.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSpec {
    pub name: String,
    pub coords: Vec<String>,
    pub params: Vec<String>,
    /// One `-` or `+` per coordinate.
    pub signature: String,
    /// Components `g_ij`, row-major.
    pub g: Vec<Vec<Expr>>,
    /// Value ranges for coordinates and parameters.
    pub domain: SampleDomain,
    /// Parameter values used where the domain has no range for a parameter.
    pub defaults: BTreeMap<String, f64>,
    /// Highest derivative order of some underlying metric that the components
    /// contain (0 for a metric given directly).
    pub jet_order: u32,
}

impl MetricSpec {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.g[i][j]
    }

    pub fn coord_exprs(&self) -> Vec<Expr> {
        self.coords.iter().map(|c| Expr::sym(c)).collect()
    }

    /// `(p, q)`: counts of `+` and `-` entries.
    pub fn signature_pq(&self) -> (usize, usize) {
        let q = self.negative_count();
        (self.signature.chars().count() - q, q)
    }

    /// Number of `-` entries in the signature.
    pub fn negative_count(&self) -> usize {
        self.signature.chars().filter(|&c| c == '-').count()
    }

    /// Domain with parameter defaults pinned.
    pub fn sample_domain(&self) -> SampleDomain {
        let mut d = self.domain.clone();
        for (k, v) in &self.defaults {
            d.intervals.entry(k.clone()).or_insert(Interval::point(*v));
        }
        d
    }

    pub fn sampler(&self, seed: u64) -> Sampler {
        Sampler::new(self.sample_domain(), seed)
    }

    /// Sign information usable by the simplifier.
    pub fn assumptions(&self) -> Assumptions {
        Assumptions::from_domain(&self.sample_domain())
    }

    /// The metric `alpha * g` with the same chart and domain.
    pub fn scaled(&self, alpha: &Expr) -> MetricSpec {
        let mut out = self.clone();
        for row in out.g.iter_mut() {
            for c in row.iter_mut() {
                *c = alpha * &*c;
            }
        }
        out.name = format!("{} scaled by {}", self.name, alpha);
        out
    }

    /// The metric with the given parameters replaced by numbers.
    pub fn with_params(&self, values: &BTreeMap<String, f64>) -> MetricSpec {
        let mut out = self.clone();
        for (k, v) in values {
            out.defaults.insert(k.clone(), *v);
            out.domain.intervals.insert(k.clone(), Interval::point(*v));
        }
        out
    }

    fn flat_components(&self) -> Vec<Expr> {
        self.g.iter().flatten().cloned().collect()
    }

    /// Checks shape, structural symmetry, nondegeneracy and the determinant
    /// sign `(-1)^q det g > 0` at `points` sampled points.
    pub fn validate(&self, points: usize, seed: u64) -> Result<(), GeometryError> {
        let n = self.dim();
        if self.g.len() != n || self.g.iter().any(|r| r.len() != n) {
            return Err(GeometryError::Shape {
                rows: self.g.len(),
                dim: n,
            });
        }
        if self.signature.chars().count() != n
            || self.signature.chars().any(|c| c != '-' && c != '+')
        {
            return Err(GeometryError::SignatureLength {
                signature: self.signature.clone(),
                dim: n,
            });
        }
        for i in 0..n {
            for j in 0..i {
                if self.g[i][j] != self.g[j][i] {
                    return Err(GeometryError::NotSymmetric { i: j, j: i });
                }
            }
        }
        let comps = self.flat_components();
        let prog = Program::compile(&comps);
        let mut sampler = self.sampler(seed);
        let parity = if self.negative_count().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        for b in sampler.points_for(&comps, points)? {
            let vals = prog.eval(&b)?;
            let det = numeric_det(&vals, n);
            let scale: f64 = vals.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
            if det.abs() <= 1e-12 * scale.powi(n as i32) {
                return Err(GeometryError::Degenerate(b));
            }
            if parity * det < 0.0 {
                return Err(GeometryError::SignatureMismatch {
                    signature: self.signature.clone(),
                    point: b,
                });
            }
        }
        Ok(())
    }
}

/// Determinant of a row-major `n x n` matrix by partial-pivot elimination.
pub fn numeric_det(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| m[x * n + c].abs().total_cmp(&m[y * n + c].abs()))
            .unwrap();
        if m[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..n {
                m.swap(p * n + k, c * n + k);
            }
            det = -det;
        }
        let piv = m[c * n + c];
        det *= piv;
        for r in c + 1..n {
            let f = m[r * n + c] / piv;
            for k in c..n {
                m[r * n + k] -= f * m[c * n + k];
            }
        }
    }
    det
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variance {
    Upper,
    Lower,
}

/// Dense array of components with one variance label per slot.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentTensor {
    coords: Vec<String>,
    variance: Vec<Variance>,
    data: Vec<Expr>,
}

impl ComponentTensor {
    pub fn new(coords: Vec<String>, variance: Vec<Variance>, data: Vec<Expr>) -> ComponentTensor {
        let len = coords.len().pow(variance.len() as u32);
        assert_eq!(data.len(), len, "component count must be n^rank");
        ComponentTensor {
            coords,
            variance,
            data,
        }
    }

    pub fn zeros(coords: Vec<String>, variance: Vec<Variance>) -> ComponentTensor {
        let len = coords.len().pow(variance.len() as u32);
        ComponentTensor {
            coords,
            variance,
            data: vec![Expr::zero(); len],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn components(&self) -> &[Expr] {
        &self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.rank(), "index length must equal rank");
        let n = self.dim();
        idx.iter().fold(0, |acc, &i| {
            assert!(i < n, "index {i} out of range");
            acc * n + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> &Expr {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: Expr) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    /// All index tuples in storage order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let (n, r) = (self.dim(), self.rank());
        (0..self.data.len()).map(move |mut o| {
            let mut idx = vec![0; r];
            for s in (0..r).rev() {
                idx[s] = o % n;
                o /= n;
            }
            idx
        })
    }

    pub fn map<F: FnMut(&Expr) -> Expr>(&self, f: F) -> ComponentTensor {
        ComponentTensor {
            coords: self.coords.clone(),
            variance: self.variance.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Expr::is_zero)
    }
}

impl fmt::Display for ComponentTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for idx in self.indices() {
            let c = self.get(&idx);
            if !c.is_zero() {
                writeln!(f, "{idx:?} = {c}")?;
            }
        }
        Ok(())
    }
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push((i, j));
        }
    }
    out
}

/// Memoizing curvature pipeline for one metric. All stages share one
/// [`Simplifier`] and one [`Differentiator`], and every stage is simplified
/// before the next one uses it.
pub struct Geometry {
    spec: MetricSpec,
    n: usize,
    coords: Vec<Expr>,
    simp: Simplifier,
    diff: Differentiator,
    g: Vec<Expr>,
    det: Option<Expr>,
    ginv: Option<Vec<Expr>>,
    gamma: Option<Vec<Expr>>,
    riemann: Option<Vec<Expr>>,
    riemann_lower: Option<Vec<Expr>>,
    ricci: Option<Vec<Expr>>,
    ricci_scalar: Option<Expr>,
    kretschmann: Option<Expr>,
    weyl: Option<Vec<Expr>>,
    weyl_square: Option<Expr>,
}

impl Geometry {
    /// Starts a pipeline after checking the shape and symmetry of `spec`.
    pub fn new(spec: &MetricSpec) -> Result<Geometry, GeometryError> {
        let n = spec.dim();
        if spec.g.len() != n || spec.g.iter().any(|r| r.len() != n) {
            return Err(GeometryError::Shape {
                rows: spec.g.len(),
                dim: n,
            });
        }
        for i in 0..n {
            for j in 0..i {
                if spec.g[i][j] != spec.g[j][i] {
                    return Err(GeometryError::NotSymmetric { i: j, j: i });
                }
            }
        }
        let mut simp = Simplifier::with_assumptions(spec.assumptions());
        let g = spec
            .flat_components()
            .iter()
            .map(|e| simp.simplify(e))
            .collect();
        Ok(Geometry {
            spec: spec.clone(),
            n,
            coords: spec.coord_exprs(),
            simp,
            diff: Differentiator::new(),
            g,
            det: None,
            ginv: None,
            gamma: None,
            riemann: None,
            riemann_lower: None,
            ricci: None,
            ricci_scalar: None,
            kretschmann: None,
            weyl: None,
            weyl_square: None,
        })
    }

    pub fn spec(&self) -> &MetricSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn simplify(&mut self, e: &Expr) -> Expr {
        self.simp.simplify(e)
    }

    pub fn simplifier(&mut self) -> &mut Simplifier {
        &mut self.simp
    }

    fn tensor(&self, variance: Vec<Variance>, data: Vec<Expr>) -> ComponentTensor {
        ComponentTensor::new(self.spec.coords.clone(), variance, data)
    }

    /// Highest derivative order of the underlying metric in curvature scalars.
    pub fn curvature_order(&self) -> u32 {
        self.spec.jet_order + 2
    }

    pub fn metric(&self) -> ComponentTensor {
        self.tensor(vec![Variance::Lower; 2], self.g.clone())
    }

    // ---- determinant and inverse ----

    fn minor(&self, rows: &[usize], cols: &[usize], memo: &mut HashMap<(u32, u32), Expr>) -> Expr {
        if rows.is_empty() {
            return Expr::one();
        }
        let key = (
            rows.iter().fold(0u32, |m, r| m | 1 << r),
            cols.iter().fold(0u32, |m, c| m | 1 << c),
        );
        if let Some(e) = memo.get(&key) {
            return e.clone();
        }
        let r0 = rows[0];
        let mut terms = Vec::new();
        for (pos, &c) in cols.iter().enumerate() {
            let entry = &self.g[r0 * self.n + c];
            if entry.is_zero() {
                continue;
            }
            let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let sub = self.minor(&rows[1..], &rest, memo);
            let t = entry * &sub;
            terms.push(if pos % 2 == 0 { t } else { t.neg() });
        }
        let out = Expr::add_all(terms);
        memo.insert(key, out.clone());
        out
    }

    /// `det g` by cofactor expansion.
    pub fn det(&mut self) -> Expr {
        if let Some(d) = &self.det {
            return d.clone();
        }
        let all: Vec<usize> = (0..self.n).collect();
        let raw = self.minor(&all, &all, &mut HashMap::new());
        let d = self.simp.simplify(&raw);
        self.det = Some(d.clone());
        d
    }

    /// `g^ij` as adjugate over determinant.
    pub fn inverse(&mut self) -> Result<ComponentTensor, GeometryError> {
        self.ensure_inverse()?;
        Ok(self.tensor(vec![Variance::Upper; 2], self.ginv.clone().unwrap()))
    }

    fn ensure_inverse(&mut self) -> Result<(), GeometryError> {
        if self.ginv.is_some() {
            return Ok(());
        }
        let n = self.n;
        let det = self.det();
        if det.is_zero() {
            let b = self
                .spec
                .sampler(Sampler::DEFAULT_SEED)
                .points(1)?
                .remove(0);
            return Err(GeometryError::Degenerate(b));
        }
        let inv_det = det.recip();
        let mut memo = HashMap::new();
        let mut out = vec![Expr::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                // (g^-1)_ij = (-1)^(i+j) M_ji / det
                let rows: Vec<usize> = (0..n).filter(|&r| r != j).collect();
                let cols: Vec<usize> = (0..n).filter(|&c| c != i).collect();
                let m = self.minor(&rows, &cols, &mut memo);
                let signed = if (i + j) % 2 == 0 { m } else { m.neg() };
                let v = self.simp.simplify(&(signed * &inv_det));
                out[i * n + j] = v.clone();
                out[j * n + i] = v;
            }
        }
        self.ginv = Some(out);
        Ok(())
    }

    fn ginv(&self) -> &[Expr] {
        self.ginv.as_ref().expect("inverse computed")
    }

    /// Nonzero entries of row `i` of `g^-1`.
    fn ginv_row(&self, i: usize) -> Vec<(usize, Expr)> {
        let n = self.n;
        (0..n)
            .filter_map(|a| {
                let e = &self.ginv()[i * n + a];
                (!e.is_zero()).then(|| (a, e.clone()))
            })
            .collect()
    }

    fn g_row(&self, i: usize) -> Vec<(usize, Expr)> {
        let n = self.n;
        (0..n)
            .filter_map(|a| {
                let e = &self.g[i * n + a];
                (!e.is_zero()).then(|| (a, e.clone()))
            })
            .collect()
    }

    // ---- connection and curvature ----

    /// `Γ^i_jk`, stored at `[i][j][k]`.
    pub fn christoffel(&mut self) -> Result<ComponentTensor, GeometryError> {
        self.ensure_christoffel()?;
        Ok(self.tensor(
            vec![Variance::Upper, Variance::Lower, Variance::Lower],
            self.gamma.clone().unwrap(),
        ))
    }

    fn ensure_christoffel(&mut self) -> Result<(), GeometryError> {
        if self.gamma.is_some() {
            return Ok(());
        }
        self.ensure_inverse()?;
        let n = self.n;
        // dg[k][i][j] = ∂_k g_ij
        let mut dg = vec![Expr::zero(); n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let d = self.diff.diff(&self.g[i * n + j], &self.coords[k]);
                    let d = self.simp.simplify(&d);
                    dg[(k * n + i) * n + j] = d.clone();
                    dg[(k * n + j) * n + i] = d;
                }
            }
        }
        let at = |k: usize, i: usize, j: usize| &dg[(k * n + i) * n + j];
        let half = Expr::rational(1, 2);
        // Γ_ljk = 1/2 (∂_j g_lk + ∂_k g_lj - ∂_l g_jk)
        let mut first = vec![Expr::zero(); n * n * n];
        for l in 0..n {
            for j in 0..n {
                for k in j..n {
                    let e = Expr::add_all([
                        at(j, l, k).clone(),
                        at(k, l, j).clone(),
                        at(l, j, k).neg(),
                    ]);
                    first[(l * n + j) * n + k] = &half * e;
                }
            }
        }
        let mut gamma = vec![Expr::zero(); n * n * n];
        for i in 0..n {
            let row = self.ginv_row(i);
            for j in 0..n {
                for k in j..n {
                    let s =
                        Expr::add_all(row.iter().map(|(l, gi)| gi * &first[(l * n + j) * n + k]));
                    let s = self.simp.simplify(&s);
                    gamma[(i * n + j) * n + k] = s.clone();
                    gamma[(i * n + k) * n + j] = s;
                }
            }
        }
        self.gamma = Some(gamma);
        Ok(())
    }

    fn gamma_at(&self, i: usize, j: usize, k: usize) -> &Expr {
        let n = self.n;
        &self.gamma.as_ref().expect("connection computed")[(i * n + j) * n + k]
    }

    /// `R^i_jkl`, stored at `[i][j][k][l]`.
    pub fn riemann(&mut self) -> Result<ComponentTensor, GeometryError> {
        self.ensure_riemann()?;
        Ok(self.tensor(
            vec![
                Variance::Upper,
                Variance::Lower,
                Variance::Lower,
                Variance::Lower,
            ],
            self.riemann.clone().unwrap(),
        ))
    }

    fn ensure_riemann(&mut self) -> Result<(), GeometryError> {
        if self.riemann.is_some() {
            return Ok(());
        }
        self.ensure_christoffel()?;
        let n = self.n;
        let mut out = vec![Expr::zero(); n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for (k, l) in pairs(n) {
                    let v = self.riemann_component(i, j, k, l);
                    let v = self.simp.simplify(&v);
                    out[((i * n + j) * n + k) * n + l] = v.clone();
                    out[((i * n + j) * n + l) * n + k] = v.neg();
                }
            }
        }
        self.riemann = Some(out);
        Ok(())
    }

    /// Unsimplified `R^i_jkl`.
    fn riemann_component(&mut self, i: usize, j: usize, k: usize, l: usize) -> Expr {
        let n = self.n;
        let mut terms = Vec::with_capacity(2 + 2 * n);
        let a = self.gamma_at(i, l, j).clone();
        let b = self.gamma_at(i, k, j).clone();
        terms.push(self.diff.diff(&a, &self.coords[k]));
        terms.push(self.diff.diff(&b, &self.coords[l]).neg());
        for m in 0..n {
            let p = self.gamma_at(i, k, m) * self.gamma_at(m, l, j);
            let q = self.gamma_at(i, l, m) * self.gamma_at(m, k, j);
            terms.push(p);
            terms.push(q.neg());
        }
        Expr::add_all(terms)
    }

    /// `R_jl = R^i_jil`.
    pub fn ricci(&mut self) -> Result<ComponentTensor, GeometryError> {
        self.ensure_ricci()?;
        Ok(self.tensor(vec![Variance::Lower; 2], self.ricci.clone().unwrap()))
    }

    fn ensure_ricci(&mut self) -> Result<(), GeometryError> {
        if self.ricci.is_some() {
            return Ok(());
        }
        self.ensure_christoffel()?;
        let n = self.n;
        let mut out = vec![Expr::zero(); n * n];
        for j in 0..n {
            for l in j..n {
                let raw = match &self.riemann {
                    Some(r) => {
                        Expr::add_all((0..n).map(|i| r[((i * n + j) * n + i) * n + l].clone()))
                    }
                    None => Expr::add_all(
                        (0..n)
                            .filter(|&i| i != l)
                            .map(|i| self.riemann_component(i, j, i, l))
                            .collect::<Vec<_>>(),
                    ),
                };
                let v = self.simp.simplify(&raw);
                out[j * n + l] = v.clone();
                out[l * n + j] = v;
            }
        }
        self.ricci = Some(out);
        Ok(())
    }

    /// `R = g^jl R_jl`.
    pub fn ricci_scalar(&mut self) -> Result<Expr, GeometryError> {
        if let Some(r) = &self.ricci_scalar {
            return Ok(r.clone());
        }
        self.ensure_ricci()?;
        let n = self.n;
        let ric = self.ricci.as_ref().unwrap();
        let ginv = self.ginv();
        let raw = Expr::add_all((0..n * n).map(|k| &ginv[k] * &ric[k]));
        let r = self.simp.simplify(&raw);
        self.ricci_scalar = Some(r.clone());
        Ok(r)
    }

    /// `R_ijkl = g_im R^m_jkl`, computed on independent components and
    /// completed by the pair symmetries.
    pub fn riemann_lower(&mut self) -> Result<ComponentTensor, GeometryError> {
        self.ensure_riemann_lower()?;
        Ok(self.tensor(
            vec![Variance::Lower; 4],
            self.riemann_lower.clone().unwrap(),
        ))
    }

    fn ensure_riemann_lower(&mut self) -> Result<(), GeometryError> {
        if self.riemann_lower.is_some() {
            return Ok(());
        }
        self.ensure_riemann()?;
        let n = self.n;
        let ps = pairs(n);
        let mut vals: HashMap<(usize, usize), Expr> = HashMap::new();
        for (a, &(i, j)) in ps.iter().enumerate() {
            let row = self.g_row(i);
            for &(k, l) in &ps[a..] {
                let rm = self.riemann.as_ref().unwrap();
                let raw = Expr::add_all(
                    row.iter()
                        .map(|(m, gm)| gm * &rm[((m * n + j) * n + k) * n + l]),
                );
                let v = self.simp.simplify(&raw);
                vals.insert((i * n + j, k * n + l), v);
            }
        }
        self.riemann_lower = Some(fill_pair_symmetric(n, &vals));
        Ok(())
    }

    /// `K = R_ijkl R^ijkl`.
    pub fn kretschmann(&mut self) -> Result<Expr, GeometryError> {
        if let Some(k) = &self.kretschmann {
            return Ok(k.clone());
        }
        self.ensure_riemann_lower()?;
        let lower = self.riemann_lower.clone().unwrap();
        let k = self.full_square(&lower);
        self.kretschmann = Some(k.clone());
        Ok(k)
    }

    /// `C_ijkl`; needs `n >= 4`.
    pub fn weyl(&mut self) -> Result<ComponentTensor, GeometryError> {
        self.ensure_weyl()?;
        Ok(self.tensor(vec![Variance::Lower; 4], self.weyl.clone().unwrap()))
    }

    fn ensure_weyl(&mut self) -> Result<(), GeometryError> {
        if self.weyl.is_some() {
            return Ok(());
        }
        let n = self.n;
        if n < 4 {
            return Err(GeometryError::Dimension {
                needed: 4,
                found: n,
            });
        }
        self.ensure_riemann_lower()?;
        self.ensure_ricci()?;
        let r = self.ricci_scalar()?;
        let rl = self.riemann_lower.clone().unwrap();
        let ric = self.ricci.clone().unwrap();
        let g = self.g.clone();
        let c1 = Expr::rational(1, n as i64 - 2);
        let c2 = &r * Expr::rational(1, ((n - 1) * (n - 2)) as i64);
        let ps = pairs(n);
        let mut vals: HashMap<(usize, usize), Expr> = HashMap::new();
        let at = |t: &[Expr], a: usize, b: usize| t[a * n + b].clone();
        for (a, &(i, j)) in ps.iter().enumerate() {
            for &(k, l) in &ps[a..] {
                let ricci_part = Expr::add_all([
                    at(&g, i, k) * at(&ric, j, l),
                    (at(&g, i, l) * at(&ric, j, k)).neg(),
                    (at(&g, j, k) * at(&ric, i, l)).neg(),
                    at(&g, j, l) * at(&ric, i, k),
                ]);
                let metric_part = at(&g, i, k) * at(&g, j, l) - at(&g, i, l) * at(&g, j, k);
                let raw = Expr::add_all([
                    rl[((i * n + j) * n + k) * n + l].clone(),
                    (&c1 * ricci_part).neg(),
                    &c2 * metric_part,
                ]);
                let v = self.simp.simplify(&raw);
                vals.insert((i * n + j, k * n + l), v);
            }
        }
        self.weyl = Some(fill_pair_symmetric(n, &vals));
        Ok(())
    }

    /// `H = C_ijkl C^ijkl`.
    pub fn weyl_square(&mut self) -> Result<Expr, GeometryError> {
        if let Some(h) = &self.weyl_square {
            return Ok(h.clone());
        }
        self.ensure_weyl()?;
        let c = self.weyl.clone().unwrap();
        let h = self.full_square(&c);
        self.weyl_square = Some(h.clone());
        Ok(h)
    }

    /// `T_ijkl T^ijkl` for a tensor with the Riemann pair symmetries.
    fn full_square(&mut self, t: &[Expr]) -> Expr {
        let n = self.n;
        let ps = pairs(n);
        let rows: Vec<Vec<(usize, Expr)>> = (0..n).map(|i| self.ginv_row(i)).collect();
        let mut terms = Vec::new();
        for (a, &(i, j)) in ps.iter().enumerate() {
            for &(k, l) in &ps[a..] {
                let low = &t[((i * n + j) * n + k) * n + l];
                if low.is_zero() {
                    continue;
                }
                // T^ijkl = g^ia g^jb g^kc g^ld T_abcd
                let mut up = Vec::new();
                for (ia, gia) in &rows[i] {
                    for (jb, gjb) in &rows[j] {
                        for (kc, gkc) in &rows[k] {
                            for (ld, gld) in &rows[l] {
                                let v = &t[((ia * n + jb) * n + kc) * n + ld];
                                if !v.is_zero() {
                                    up.push(Expr::mul_all([
                                        gia.clone(),
                                        gjb.clone(),
                                        gkc.clone(),
                                        gld.clone(),
                                        v.clone(),
                                    ]));
                                }
                            }
                        }
                    }
                }
                let upper = self.simp.simplify(&Expr::add_all(up));
                // each independent component stands for 4 (or 8 off the pair diagonal) entries
                let mult = if (i, j) == (k, l) { 4 } else { 8 };
                terms.push(Expr::mul_all([Expr::int(mult), low.clone(), upper]));
            }
        }
        self.simp.simplify(&Expr::add_all(terms))
    }

    // ---- index algebra ----

    fn check_chart(&self, t: &ComponentTensor) -> Result<(), GeometryError> {
        if t.coords != self.spec.coords {
            return Err(GeometryError::ChartMismatch {
                expected: self.spec.coords.clone(),
                found: t.coords.clone(),
            });
        }
        Ok(())
    }

    /// Raises a lower slot or lowers an upper one, computing every component.
    pub fn raise_lower(
        &mut self,
        t: &ComponentTensor,
        slot: usize,
    ) -> Result<ComponentTensor, GeometryError> {
        self.check_chart(t)?;
        if slot >= t.rank() {
            return Err(GeometryError::SlotOutOfRange {
                slot,
                rank: t.rank(),
            });
        }
        self.ensure_inverse()?;
        let n = self.n;
        let (mat, new_var) = match t.variance[slot] {
            Variance::Lower => (self.ginv.clone().unwrap(), Variance::Upper),
            Variance::Upper => (self.g.clone(), Variance::Lower),
        };
        let mut variance = t.variance.clone();
        variance[slot] = new_var;
        let mut out = ComponentTensor::zeros(t.coords.clone(), variance);
        for idx in t.indices() {
            let i = idx[slot];
            let mut src = idx.clone();
            let terms: Vec<Expr> = (0..n)
                .filter(|&a| !mat[i * n + a].is_zero())
                .map(|a| {
                    src[slot] = a;
                    &mat[i * n + a] * t.get(&src)
                })
                .collect();
            let v = self.simp.simplify(&Expr::add_all(terms));
            out.set(&idx, v);
        }
        Ok(out)
    }
}

/// Completes a 4-index array from values on pairs `(i<j) <= (k<l)` using
/// `T_ijkl = -T_jikl = -T_ijlk = T_klij`.
fn fill_pair_symmetric(n: usize, vals: &HashMap<(usize, usize), Expr>) -> Vec<Expr> {
    let mut out = vec![Expr::zero(); n * n * n * n];
    for (&(p, q), v) in vals {
        let (i, j, k, l) = (p / n, p % n, q / n, q % n);
        let neg = v.neg();
        for (a, b, c, d, val) in [
            (i, j, k, l, v),
            (j, i, k, l, &neg),
            (i, j, l, k, &neg),
            (j, i, l, k, v),
            (k, l, i, j, v),
            (l, k, i, j, &neg),
            (k, l, j, i, &neg),
            (l, k, j, i, v),
        ] {
            out[((a * n + b) * n + c) * n + d] = val.clone();
        }
    }
    out
}

/// `det g`, simplified.
pub fn metric_det(g: &MetricSpec) -> Result<Expr, GeometryError> {
    Ok(Geometry::new(g)?.det())
}

pub fn inverse_metric(g: &MetricSpec) -> Result<ComponentTensor, GeometryError> {
    Geometry::new(g)?.inverse()
}

pub fn christoffel(g: &MetricSpec) -> Result<ComponentTensor, GeometryError> {
    Geometry::new(g)?.christoffel()
}

pub fn riemann(g: &MetricSpec) -> Result<ComponentTensor, GeometryError> {
    Geometry::new(g)?.riemann()
}

pub fn ricci(g: &MetricSpec) -> Result<ComponentTensor, GeometryError> {
    Geometry::new(g)?.ricci()
}

pub fn ricci_scalar(g: &MetricSpec) -> Result<Expr, GeometryError> {
    Geometry::new(g)?.ricci_scalar()
}

pub fn kretschmann(g: &MetricSpec) -> Result<Expr, GeometryError> {
    Geometry::new(g)?.kretschmann()
}

pub fn weyl(g: &MetricSpec) -> Result<ComponentTensor, GeometryError> {
    Geometry::new(g)?.weyl()
}

pub fn raise_lower(
    t: &ComponentTensor,
    slot: usize,
    g: &MetricSpec,
) -> Result<ComponentTensor, GeometryError> {
    Geometry::new(g)?.raise_lower(t, slot)
}

/// Sums over a pair of slots, one upper and one lower.
pub fn contract(t: &ComponentTensor, a: usize, b: usize) -> Result<ComponentTensor, GeometryError> {
    let r = t.rank();
    for s in [a, b] {
        if s >= r {
            return Err(GeometryError::SlotOutOfRange { slot: s, rank: r });
        }
    }
    if a == b || t.variance[a] == t.variance[b] {
        return Err(GeometryError::VarianceMismatch { a, b });
    }
    let n = t.dim();
    let variance: Vec<Variance> = t
        .variance
        .iter()
        .enumerate()
        .filter(|(s, _)| *s != a && *s != b)
        .map(|(_, v)| *v)
        .collect();
    let mut out = ComponentTensor::zeros(t.coords.clone(), variance);
    let keep: Vec<usize> = (0..r).filter(|s| *s != a && *s != b).collect();
    for idx in out.indices().collect::<Vec<_>>() {
        let mut full = vec![0; r];
        for (pos, s) in keep.iter().enumerate() {
            full[*s] = idx[pos];
        }
        let terms: Vec<Expr> = (0..n)
            .map(|m| {
                full[a] = m;
                full[b] = m;
                t.get(&full).clone()
            })
            .collect();
        out.set(&idx, Expr::add_all(terms));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(name: &str, coords: &[&str], entries: &[&str], domain: SampleDomain) -> MetricSpec {
        let n = coords.len();
        let mut g = vec![vec![Expr::zero(); n]; n];
        for (i, e) in entries.iter().enumerate() {
            g[i][i] = Expr::parse_lit(e);
        }
        MetricSpec {
            name: name.into(),
            coords: coords.iter().map(|s| s.to_string()).collect(),
            params: Vec::new(),
            signature: entries
                .iter()
                .map(|e| if e.starts_with('-') { '-' } else { '+' })
                .collect(),
            g,
            domain,
            defaults: BTreeMap::new(),
            jet_order: 0,
        }
    }

    fn flat() -> MetricSpec {
        let d = SampleDomain::new()
            .with("t", 0.1, 1.0)
            .with("x", 0.1, 1.0)
            .with("y", 0.1, 1.0)
            .with("z", 0.1, 1.0);
        diag("flat", &["t", "x", "y", "z"], &["-1", "1", "1", "1"], d)
    }

    #[test]
    fn flat_space_is_flat() {
        let g = flat();
        let mut geo = Geometry::new(&g).unwrap();
        assert_eq!(geo.det(), Expr::int(-1));
        assert_eq!(
            geo.inverse().unwrap().components(),
            geo.metric().components()
        );
        assert!(geo.christoffel().unwrap().is_zero());
        assert!(geo.riemann().unwrap().is_zero());
        assert!(geo.ricci_scalar().unwrap().is_zero());
        assert!(geo.kretschmann().unwrap().is_zero());
        assert!(geo.weyl_square().unwrap().is_zero());
    }

    #[test]
    fn sphere_connection() {
        let d = SampleDomain::new()
            .with("theta", 0.3, 2.8)
            .with("phi", 0.1, 6.0);
        let g = diag("sphere", &["theta", "phi"], &["1", "sin(theta)^2"], d);
        let gamma = christoffel(&g).unwrap();
        assert_eq!(
            *gamma.get(&[0, 1, 1]),
            Expr::parse_lit("-sin(theta)*cos(theta)")
        );
        assert_eq!(ricci_scalar(&g).unwrap(), Expr::int(2));
    }

    #[test]
    fn weyl_needs_four_dimensions() {
        let d = SampleDomain::new()
            .with("x", 0.1, 1.0)
            .with("y", 0.1, 1.0)
            .with("z", 0.1, 1.0);
        let g = diag("e3", &["x", "y", "z"], &["1", "1", "1"], d);
        assert!(matches!(
            weyl(&g),
            Err(GeometryError::Dimension {
                needed: 4,
                found: 3
            })
        ));
        assert!(ricci_scalar(&g).unwrap().is_zero());
    }

    #[test]
    fn contraction_of_identity_is_dimension() {
        let g = flat();
        let delta = ComponentTensor::new(
            g.coords.clone(),
            vec![Variance::Upper, Variance::Lower],
            (0..16)
                .map(|k| {
                    if k % 5 == 0 {
                        Expr::one()
                    } else {
                        Expr::zero()
                    }
                })
                .collect(),
        );
        let c = contract(&delta, 0, 1).unwrap();
        assert_eq!(c.components(), &[Expr::int(4)]);
        let metric = Geometry::new(&g).unwrap().metric();
        assert!(matches!(
            contract(&metric, 0, 1),
            Err(GeometryError::VarianceMismatch { .. })
        ));
    }

    #[test]
    fn validation_catches_bad_metrics() {
        let mut g = flat();
        g.g[0][1] = Expr::sym("x");
        assert!(matches!(
            g.validate(4, 1),
            Err(GeometryError::NotSymmetric { .. })
        ));
        let mut g = flat();
        g.signature = "++++".into();
        assert!(matches!(
            g.validate(4, 1),
            Err(GeometryError::SignatureMismatch { .. })
        ));
        let mut g = flat();
        g.g[3][3] = Expr::zero();
        assert!(matches!(
            g.validate(4, 1),
            Err(GeometryError::Degenerate(_))
        ));
        assert!(flat().validate(8, 1).is_ok());
    }

    #[test]
    fn numeric_determinant() {
        assert_eq!(numeric_det(&[2.0, 1.0, 1.0, 3.0], 2), 5.0);
        assert_eq!(numeric_det(&[0.0, 1.0, 1.0, 0.0], 2), -1.0);
    }
}
