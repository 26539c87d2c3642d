//! Built-in metrics and the metric file format.
//!
//! A metric file is line oriented:
//!
//! ```text
//! # comment
//! name = "schwarzschild"
//! coords = t, r, theta, phi
//! params = M
//! signature = -+++
//! g[0][0] = -(1 - 2*M/r)
//! g[1][1] = 1/(1 - 2*M/r)
//! domain r = 3..10
//! default M = 1
//! exclude positive 1 - 2*M/r
//! ```
//!
//! Unassigned components are zero and `g[i][j]` also sets `g[j][i]`.
//! `exclude nonzero EXPR` and `exclude positive EXPR` add sampling
//! predicates.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::expr::{parse, Exclusion, Expr, Interval, SampleDomain, Sampler};
use crate::geometry::{GeometryError, MetricSpec};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown metric `{0}` (known: schwarzschild, reissner-nordstrom, godel, barriola-vilenkin, minkowski)")]
    UnknownMetric(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: g[{i}][{j}] conflicts with the value set on line {first}")]
    SymmetryConflict {
        line: usize,
        first: usize,
        i: usize,
        j: usize,
    },
    #[error("line {line}: g[{i}][{j}] already assigned on line {first}")]
    Duplicate {
        line: usize,
        first: usize,
        i: usize,
        j: usize,
    },
    #[error("line {line}: index g[{i}][{j}] out of range for {dim} coordinates")]
    IndexOutOfRange {
        line: usize,
        i: usize,
        j: usize,
        dim: usize,
    },
    #[error("missing `{0}` line")]
    Missing(&'static str),
    #[error("invalid metric: {0}")]
    Invalid(#[from] GeometryError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Names accepted by [`builtin`].
pub const BUILTINS: [&str; 5] = [
    "schwarzschild",
    "reissner-nordstrom",
    "godel",
    "barriola-vilenkin",
    "minkowski",
];

/// The four metrics with published curvature scalars, in table order.
pub const TABLE: [&str; 4] = [
    "schwarzschild",
    "reissner-nordstrom",
    "godel",
    "barriola-vilenkin",
];

/// Builds metric components from a line element `sum c_ij dx^i dx^j`.
///
/// A coefficient given for `dx^i dx^j` with `i != j` is the full cross term,
/// so each of `g_ij` and `g_ji` receives half of it.
pub struct LineElement {
    coords: Vec<String>,
    g: Vec<Vec<Expr>>,
}

impl LineElement {
    pub fn new(coords: &[&str]) -> LineElement {
        let n = coords.len();
        LineElement {
            coords: coords.iter().map(|s| s.to_string()).collect(),
            g: vec![vec![Expr::zero(); n]; n],
        }
    }

    fn index(&self, c: &str) -> usize {
        self.coords
            .iter()
            .position(|x| x == c)
            .unwrap_or_else(|| panic!("unknown coordinate {c}"))
    }

    /// Adds `coeff * d(a) d(b)`.
    pub fn term(mut self, a: &str, b: &str, coeff: &str) -> LineElement {
        let (i, j) = (self.index(a), self.index(b));
        let c = Expr::parse_lit(coeff);
        if i == j {
            self.g[i][i] = &self.g[i][i] + &c;
        } else {
            let half = Expr::rational(1, 2) * c;
            self.g[i][j] = &self.g[i][j] + &half;
            self.g[j][i] = &self.g[j][i] + &half;
        }
        self
    }

    pub fn components(self) -> Vec<Vec<Expr>> {
        self.g
    }
}

struct Builder {
    spec: MetricSpec,
}

impl Builder {
    fn new(name: &str, signature: &str, params: &[&str], line: LineElement) -> Builder {
        Builder {
            spec: MetricSpec {
                name: name.into(),
                coords: line.coords.clone(),
                params: params.iter().map(|s| s.to_string()).collect(),
                signature: signature.into(),
                g: line.components(),
                domain: SampleDomain::new(),
                defaults: BTreeMap::new(),
                jet_order: 0,
            },
        }
    }

    fn domain(mut self, name: &str, lo: f64, hi: f64) -> Builder {
        self.spec
            .domain
            .intervals
            .insert(name.into(), Interval::new(lo, hi));
        self
    }

    fn default(mut self, name: &str, v: f64) -> Builder {
        self.spec.defaults.insert(name.into(), v);
        self
    }

    fn positive(mut self, e: &str) -> Builder {
        self.spec
            .domain
            .exclusions
            .push(Exclusion::Positive(Expr::parse_lit(e)));
        self
    }

    fn nonzero(mut self, e: &str) -> Builder {
        self.spec
            .domain
            .exclusions
            .push(Exclusion::NonZero(Expr::parse_lit(e)));
        self
    }
}

fn spherical_static(name: &str, f: &str, params: &[&str]) -> Builder {
    let line = LineElement::new(&["t", "r", "theta", "phi"])
        .term("t", "t", &format!("-({f})"))
        .term("r", "r", &format!("1/({f})"))
        .term("theta", "theta", "r^2")
        .term("phi", "phi", "r^2*sin(theta)^2");
    Builder::new(name, "-+++", params, line)
        .domain("t", 0.0, 0.0)
        .domain("r", 3.0, 10.0)
        .domain("theta", 0.3, 2.8)
        .domain("phi", 0.1, 6.0)
        .positive(f)
        .positive("sin(theta)")
}

/// A built-in metric by name.
pub fn builtin(name: &str) -> Result<MetricSpec, CatalogError> {
    let b = match name {
        "schwarzschild" => spherical_static(name, "1 - 2*M/r", &["M"]).default("M", 1.0),
        "reissner-nordstrom" => spherical_static(name, "1 - 2*M/r + q^2/r^2", &["M", "q"])
            .default("M", 1.0)
            .default("q", 0.5),
        "godel" => {
            let line = LineElement::new(&["t", "r", "phi", "z"])
                .term("t", "t", "-1")
                .term("r", "r", "1/(1 + r^2/(4*a^2))")
                .term("phi", "phi", "r^2*(1 - r^2/(4*a^2))")
                .term("t", "phi", "-sqrt(2)*r^2/a")
                .term("z", "z", "1");
            Builder::new(name, "-+++", &["a"], line)
                .domain("t", 0.1, 1.0)
                .domain("r", 0.2, 1.5)
                .domain("phi", 0.1, 1.0)
                .domain("z", 0.1, 1.0)
                .default("a", 1.0)
                .nonzero("r")
        }
        "barriola-vilenkin" => {
            let line = LineElement::new(&["t", "r", "theta", "phi"])
                .term("t", "t", "-1")
                .term("r", "r", "1")
                .term("theta", "theta", "k^2*r^2")
                .term("phi", "phi", "k^2*r^2*sin(theta)^2");
            Builder::new(name, "-+++", &["k"], line)
                .domain("t", 0.0, 0.0)
                .domain("r", 1.0, 5.0)
                .domain("theta", 0.3, 2.8)
                .domain("phi", 0.1, 6.0)
                .default("k", 0.5)
                .nonzero("r")
                .positive("sin(theta)")
        }
        "minkowski" => {
            let line = LineElement::new(&["t", "x", "y", "z"])
                .term("t", "t", "-1")
                .term("x", "x", "1")
                .term("y", "y", "1")
                .term("z", "z", "1");
            Builder::new(name, "-+++", &[], line)
                .domain("t", 0.1, 1.0)
                .domain("x", 0.1, 1.0)
                .domain("y", 0.1, 1.0)
                .domain("z", 0.1, 1.0)
        }
        _ => return Err(CatalogError::UnknownMetric(name.into())),
    };
    Ok(b.spec)
}

/// Published closed forms of `R`, `K` and `S` for a table metric.
#[derive(Clone, Debug)]
pub struct ReferenceRow {
    pub name: &'static str,
    pub r: Expr,
    pub k: Expr,
    pub s: Expr,
}

pub fn reference_row(name: &str) -> Option<ReferenceRow> {
    let (name, r, k, s) = match name {
        "schwarzschild" => (
            "schwarzschild",
            "0",
            "48*M^2/r^6",
            "9*sqrt(3)/4*(1 - r/(6*M))",
        ),
        "reissner-nordstrom" => (
            "reissner-nordstrom",
            "0",
            "8*(7*q^4 - 12*M*q^2*r + 6*M^2*r^2)/r^8",
            "9*sqrt(3)/8*(1 - r/(3*M) + q^2/(3*M^2))",
        ),
        "godel" => ("godel", "-1/a^2", "3/a^4", "-sqrt(3)/2"),
        "barriola-vilenkin" => (
            "barriola-vilenkin",
            "2*(1 - k^2)/(k^2*r^2)",
            "4*(1 - k^2)^2/(k^4*r^4)",
            "-sqrt(3)",
        ),
        _ => return None,
    };
    Some(ReferenceRow {
        name,
        r: Expr::parse_lit(r),
        k: Expr::parse_lit(k),
        s: Expr::parse_lit(s),
    })
}

fn err(line: usize, message: impl Into<String>) -> CatalogError {
    CatalogError::Parse {
        line,
        message: message.into(),
    }
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn ident_list(line: usize, s: &str) -> Result<Vec<String>, CatalogError> {
    s.split(',')
        .map(|x| {
            let x = x.trim();
            if is_ident(x) {
                Ok(x.to_string())
            } else {
                Err(err(line, format!("`{x}` is not an identifier")))
            }
        })
        .collect()
}

fn real(line: usize, s: &str) -> Result<f64, CatalogError> {
    let s = s.trim();
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| err(line, format!("`{s}` is not a real number")))
}

fn expr(line: usize, s: &str) -> Result<Expr, CatalogError> {
    parse(s.trim()).map_err(|e| err(line, format!("bad expression: {e}")))
}

fn quoted(line: usize, s: &str) -> Result<String, CatalogError> {
    let s = s.trim();
    let inner = s
        .strip_prefix('"')
        .and_then(|x| x.strip_suffix('"'))
        .ok_or_else(|| err(line, "name must be a double-quoted string"))?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(e @ ('"' | '\\')) => out.push(e),
                _ => return Err(err(line, "bad escape in string")),
            },
            '"' => return Err(err(line, "unescaped quote in string")),
            c => out.push(c),
        }
    }
    Ok(out)
}

/// `g[i][j]` prefix, returning the indices and the text after `=`.
fn component(line: usize, s: &str) -> Result<(usize, usize, &str), CatalogError> {
    let bad = || err(line, "expected g[INT][INT] = EXPR");
    let rest = s.strip_prefix("g").ok_or_else(bad)?.trim_start();
    let mut idx = [0usize; 2];
    let mut rest = rest;
    for slot in idx.iter_mut() {
        let r = rest.strip_prefix('[').ok_or_else(bad)?;
        let close = r.find(']').ok_or_else(bad)?;
        *slot = r[..close].trim().parse().map_err(|_| bad())?;
        rest = r[close + 1..].trim_start();
    }
    let value = rest.strip_prefix('=').ok_or_else(bad)?;
    Ok((idx[0], idx[1], value))
}

/// Parses metric file text and validates the result.
pub fn parse_metric(text: &str) -> Result<MetricSpec, CatalogError> {
    let spec = parse_metric_unchecked(text)?;
    spec.validate(8, Sampler::DEFAULT_SEED)?;
    Ok(spec)
}

/// Parses metric file text, checking only the file-level rules.
pub fn parse_metric_unchecked(text: &str) -> Result<MetricSpec, CatalogError> {
    let mut name = None;
    let mut coords: Option<Vec<String>> = None;
    let mut params = Vec::new();
    let mut signature = None;
    let mut comps: Vec<(usize, usize, usize, Expr)> = Vec::new();
    let mut domain = SampleDomain::new();
    let mut defaults = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let word_end = s
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(s.len());
        let (word, rest) = s.split_at(word_end);
        let after_eq = |r: &str| -> Result<String, CatalogError> {
            r.trim_start()
                .strip_prefix('=')
                .map(str::to_string)
                .ok_or_else(|| err(line, format!("expected `=` after `{word}`")))
        };
        match word {
            "name" => name = Some(quoted(line, &after_eq(rest)?)?),
            "coords" => coords = Some(ident_list(line, &after_eq(rest)?)?),
            "params" => params = ident_list(line, &after_eq(rest)?)?,
            "signature" => {
                let sig = after_eq(rest)?.trim().to_string();
                if sig.is_empty() || sig.chars().any(|c| c != '-' && c != '+') {
                    return Err(err(line, "signature must be a string of - and +"));
                }
                signature = Some(sig);
            }
            "g" => {
                let (i, j, value) = component(line, s)?;
                comps.push((line, i, j, expr(line, value)?));
            }
            "domain" | "default" => {
                let body = rest.trim_start();
                let eq = body
                    .find('=')
                    .ok_or_else(|| err(line, format!("expected `{word} IDENT = ...`")))?;
                let ident = body[..eq].trim();
                if !is_ident(ident) {
                    return Err(err(line, format!("`{ident}` is not an identifier")));
                }
                let value = &body[eq + 1..];
                if word == "domain" {
                    let (lo, hi) = value
                        .split_once("..")
                        .ok_or_else(|| err(line, "expected REAL..REAL"))?;
                    let (lo, hi) = (real(line, lo)?, real(line, hi)?);
                    if lo > hi {
                        return Err(err(line, "empty interval"));
                    }
                    domain
                        .intervals
                        .insert(ident.to_string(), Interval::new(lo, hi));
                } else {
                    defaults.insert(ident.to_string(), real(line, value)?);
                }
            }
            "exclude" => {
                let body = rest.trim_start();
                let (kind, e) = body
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| err(line, "expected `exclude nonzero|positive EXPR`"))?;
                let e = expr(line, e)?;
                domain.exclusions.push(match kind {
                    "nonzero" => Exclusion::NonZero(e),
                    "positive" => Exclusion::Positive(e),
                    _ => return Err(err(line, format!("unknown exclusion `{kind}`"))),
                });
            }
            _ => return Err(err(line, format!("unrecognized line `{s}`"))),
        }
    }
    let coords = coords.ok_or(CatalogError::Missing("coords"))?;
    let signature = signature.ok_or(CatalogError::Missing("signature"))?;
    let n = coords.len();
    if signature.chars().count() != n {
        return Err(GeometryError::SignatureLength { signature, dim: n }.into());
    }
    let mut g = vec![vec![Expr::zero(); n]; n];
    let mut seen: HashMap<(usize, usize), (usize, Expr)> = HashMap::new();
    for (line, i, j, e) in comps {
        if i >= n || j >= n {
            return Err(CatalogError::IndexOutOfRange { line, i, j, dim: n });
        }
        let key = (i.min(j), i.max(j));
        if let Some((first, prev)) = seen.get(&key) {
            return Err(if *prev != e {
                CatalogError::SymmetryConflict {
                    line,
                    first: *first,
                    i,
                    j,
                }
            } else {
                CatalogError::Duplicate {
                    line,
                    first: *first,
                    i,
                    j,
                }
            });
        }
        g[i][j] = e.clone();
        g[j][i] = e.clone();
        seen.insert(key, (line, e));
    }
    Ok(MetricSpec {
        name: name.ok_or(CatalogError::Missing("name"))?,
        coords,
        params,
        signature,
        g,
        domain,
        defaults,
        jet_order: 0,
    })
}

/// Renders `spec` in the metric file format.
pub fn render_metric(spec: &MetricSpec) -> String {
    let mut out = String::new();
    let escaped = spec.name.replace('\\', "\\\\").replace('"', "\\\"");
    let _ = writeln!(out, "name = \"{escaped}\"");
    let _ = writeln!(out, "coords = {}", spec.coords.join(", "));
    if !spec.params.is_empty() {
        let _ = writeln!(out, "params = {}", spec.params.join(", "));
    }
    let _ = writeln!(out, "signature = {}", spec.signature);
    for i in 0..spec.dim() {
        for j in i..spec.dim() {
            if !spec.g[i][j].is_zero() {
                let _ = writeln!(out, "g[{i}][{j}] = {}", spec.g[i][j]);
            }
        }
    }
    for (k, iv) in &spec.domain.intervals {
        let _ = writeln!(out, "domain {k} = {:?}..{:?}", iv.lo, iv.hi);
    }
    for (k, v) in &spec.defaults {
        let _ = writeln!(out, "default {k} = {v:?}");
    }
    for x in &spec.domain.exclusions {
        let (kind, e) = match x {
            Exclusion::NonZero(e) => ("nonzero", e),
            Exclusion::Positive(e) => ("positive", e),
        };
        let _ = writeln!(out, "exclude {kind} {e}");
    }
    out
}

pub fn load_metric(path: &Path) -> Result<MetricSpec, CatalogError> {
    let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_metric(&text)
}

pub fn save_metric(spec: &MetricSpec, path: &Path) -> Result<(), CatalogError> {
    std::fs::write(path, render_metric(spec)).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })
}
