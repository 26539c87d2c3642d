//! Text and JSON renderings of reports.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use confinv::conformal::{InvariantReport, VANISHING_TOL};
use confinv::geometry::Scalar;

/// Decimal string with 15 significant digits.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.14e}").parse().unwrap_or(v);
    if rounded == 0.0 {
        "0".to_string()
    } else {
        rounded.to_string()
    }
}

/// One optional value per scalar, in R, K, H, J, S order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarSet<T> {
    #[serde(rename = "R")]
    pub r: Option<T>,
    #[serde(rename = "K")]
    pub k: Option<T>,
    #[serde(rename = "H")]
    pub h: Option<T>,
    #[serde(rename = "J")]
    pub j: Option<T>,
    #[serde(rename = "S")]
    pub s: Option<T>,
}

impl<T> ScalarSet<T> {
    pub fn get(&self, s: Scalar) -> Option<&T> {
        match s {
            Scalar::R => self.r.as_ref(),
            Scalar::K => self.k.as_ref(),
            Scalar::H => self.h.as_ref(),
            Scalar::J => self.j.as_ref(),
            Scalar::S => self.s.as_ref(),
        }
    }

    fn set(&mut self, s: Scalar, v: Option<T>) {
        let slot = match s {
            Scalar::R => &mut self.r,
            Scalar::K => &mut self.k,
            Scalar::H => &mut self.h,
            Scalar::J => &mut self.j,
            Scalar::S => &mut self.s,
        };
        *slot = v;
    }
}

impl<T> FromIterator<(Scalar, Option<T>)> for ScalarSet<T> {
    fn from_iter<I: IntoIterator<Item = (Scalar, Option<T>)>>(iter: I) -> Self {
        let mut out = ScalarSet {
            r: None,
            k: None,
            h: None,
            j: None,
            s: None,
        };
        for (s, v) in iter {
            out.set(s, v);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleJson {
    pub bindings: BTreeMap<String, String>,
    pub values: ScalarSet<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub name: String,
    pub scalars: ScalarSet<String>,
    pub genericity: Option<String>,
    pub samples: Vec<SampleJson>,
    pub seed: u64,
    pub tolerances: BTreeMap<String, String>,
}

impl ReportJson {
    pub fn from_report(r: &InvariantReport) -> ReportJson {
        let scalars = r
            .scalars
            .iter()
            .map(|(s, e)| (*s, e.as_ref().map(|e| e.to_string())))
            .collect();
        let samples = r
            .samples
            .iter()
            .map(|(b, vals)| SampleJson {
                bindings: b.iter().map(|(k, v)| (k.to_string(), fmt_num(v))).collect(),
                values: vals.iter().map(|(s, v)| (*s, v.map(fmt_num))).collect(),
            })
            .collect();
        ReportJson {
            name: r.name.clone(),
            scalars,
            genericity: r.genericity.as_ref().map(|g| g.to_string()),
            samples,
            seed: r.seed,
            tolerances: BTreeMap::from([("vanishing".to_string(), fmt_num(VANISHING_TOL))]),
        }
    }
}

pub fn report_text(r: &InvariantReport, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "metric: {}", r.name)?;
    if let Some(g) = &r.genericity {
        writeln!(out, "genericity: {g}")?;
    }
    writeln!(out, "seed: {}", r.seed)?;
    for (s, e) in &r.scalars {
        match e {
            Some(e) => writeln!(out, "{s} = {e}")?,
            None => writeln!(out, "{s} undefined")?,
        }
    }
    for (k, (b, vals)) in r.samples.iter().enumerate() {
        let point: Vec<String> = b
            .iter()
            .map(|(k, v)| format!("{k}={}", fmt_num(v)))
            .collect();
        writeln!(out, "point {}: {}", k + 1, point.join(", "))?;
        for (s, v) in vals {
            match v {
                Some(v) => writeln!(out, "  {s} = {}", fmt_num(*v))?,
                None => writeln!(out, "  {s} undefined")?,
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub scalar: String,
    pub computed: String,
    pub reference: String,
    pub value: String,
    pub reference_value: String,
    pub max_deviation: String,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub genericity: String,
    /// First comparison point; `value` columns are taken there.
    pub point: BTreeMap<String, String>,
    pub entries: Vec<TableEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableJson {
    pub seed: u64,
    pub points: usize,
    pub tolerance: String,
    pub rows: Vec<TableRow>,
}

pub fn table_text(rows: &[TableRow], out: &mut dyn Write) -> io::Result<()> {
    for row in rows {
        let point: Vec<String> = row.point.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(out, "{} [{}]", row.name, row.genericity)?;
        writeln!(out, "  spot check at {}", point.join(", "))?;
        for e in &row.entries {
            writeln!(out, "  {}  computed:  {}", e.scalar, e.computed)?;
            writeln!(out, "     reference: {}", e.reference)?;
            writeln!(
                out,
                "     values {} vs {}, max deviation {}  {}",
                e.value,
                e.reference_value,
                e.max_deviation,
                if e.agree { "agree" } else { "DIFFER" }
            )?;
        }
    }
    Ok(())
}
