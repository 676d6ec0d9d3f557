//! Report rows, pass/fail property records and their text outputs.

use std::fmt;
use std::io::Write;

use crate::error::Result;

/// The bit-exact CSV header of convergence and maximal-regularity reports.
pub const CSV_HEADER: &str = "q,p,N,k,err_AU,err_dhatU,err_AhatU,resid,effectivity,maxreg_ratio,note";

/// One asserted property and whether it held.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl PropertyCheck {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        PropertyCheck {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for PropertyCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

pub fn all_passed(checks: &[PropertyCheck]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Row level: a mesh size or the fitted rates over the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Mesh(usize),
    Rate,
}

/// One CSV row. Undefined entries are `NaN`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub q: usize,
    pub p: f64,
    pub level: Level,
    pub k: f64,
    pub err_au: f64,
    pub err_dhatu: f64,
    pub err_ahatu: f64,
    pub resid: f64,
    pub effectivity: f64,
    pub maxreg_ratio: f64,
    pub note: String,
}

impl ReportRow {
    pub fn empty(q: usize, p: f64, level: Level, k: f64) -> Self {
        ReportRow {
            q,
            p,
            level,
            k,
            err_au: f64::NAN,
            err_dhatu: f64::NAN,
            err_ahatu: f64::NAN,
            resid: f64::NAN,
            effectivity: f64::NAN,
            maxreg_ratio: f64::NAN,
            note: String::new(),
        }
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

pub fn write_csv(out: impl Write, rows: &[ReportRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        let level = match r.level {
            Level::Mesh(n) => n.to_string(),
            Level::Rate => "rate".into(),
        };
        let note = if r.note.contains([',', '"', '\n']) {
            format!("\"{}\"", r.note.replace('"', "\"\""))
        } else {
            r.note.clone()
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.q,
            num(r.p),
            level,
            num(r.k),
            num(r.err_au),
            num(r.err_dhatu),
            num(r.err_ahatu),
            num(r.resid),
            num(r.effectivity),
            num(r.maxreg_ratio),
            note
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column `k e` blocks, one per metric and `(q, p)`, each headed by a
/// `#` comment line and separated by blank lines.
pub fn write_plotdata(out: impl Write, rows: &[ReportRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    let metrics: [(&str, fn(&ReportRow) -> f64); 6] = [
        ("err_AU", |r| r.err_au),
        ("err_dhatU", |r| r.err_dhatu),
        ("err_AhatU", |r| r.err_ahatu),
        ("resid", |r| r.resid),
        ("effectivity", |r| r.effectivity),
        ("maxreg_ratio", |r| r.maxreg_ratio),
    ];
    let mut keys: Vec<(usize, u64)> = rows.iter().map(|r| (r.q, r.p.to_bits())).collect();
    keys.dedup();
    for (q, pbits) in keys {
        let p = f64::from_bits(pbits);
        let series: Vec<&ReportRow> = rows
            .iter()
            .filter(|r| r.q == q && r.p.to_bits() == pbits && matches!(r.level, Level::Mesh(_)))
            .collect();
        for (name, get) in metrics {
            if series.iter().all(|r| get(r).is_nan()) {
                continue;
            }
            writeln!(w, "# {name} q={q} p={}", num(p))?;
            for r in &series {
                writeln!(w, "{} {}", num(r.k), num(get(r)))?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}
