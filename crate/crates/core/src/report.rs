//! CSV and JSON reports.
//!
//! CSV files use '.' decimals, '\n' line endings and six significant digits
//! in C `%g` style, so goldens are stable across platforms. JSON mirrors the
//! in-memory structures losslessly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{read_json, write_json};
use crate::error::{Error, Result};
use crate::metrics::{wilcoxon_signed_rank, MetricsResult, WilcoxonResult};
use crate::sweep::SweepResult;

pub const CURVES_HEADER: [&str; 4] = ["p_percent", "avg_dsc", "avg_nsd", "avg_hd95"];
pub const THRESHOLDS_HEADER: [&str; 3] = ["case_id", "p_percent", "threshold_suv"];
pub const METRICS_HEADER: [&str; 6] = ["case_id", "dsc", "nsd", "hd95_mm", "empty_pred", "empty_gt"];

/// Row labels reserved for aggregate rows of the metrics table.
pub const MEAN_ROW: &str = "mean";
pub const WILCOXON_P_ROW: &str = "wilcoxon_p";
pub const WILCOXON_DEGENERATE_ROW: &str = "wilcoxon_degenerate";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Formats `v` like C's `%g` with six significant digits.
pub fn format_g(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `v` as it reads back from a report CSV.
pub fn round_g(v: f64) -> f64 {
    format_g(v).parse().unwrap_or(v)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    }
}

fn finish(w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

/// Sweep curve data: one row per sweep percentage.
pub fn write_curves_csv(sweep: &SweepResult, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(CURVES_HEADER).map_err(&err)?;
    for k in 0..sweep.p_values.len() {
        w.write_record([
            format_g(sweep.p_values[k]),
            format_g(sweep.avg_dsc[k]),
            format_g(sweep.avg_nsd[k]),
            format_g(sweep.avg_hd95[k]),
        ])
        .map_err(&err)?;
    }
    finish(w, path)
}

/// Per-case absolute thresholds: one row per (case, percentage).
pub fn write_thresholds_csv(sweep: &SweepResult, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(THRESHOLDS_HEADER).map_err(&err)?;
    for (id, row) in sweep.case_ids.iter().zip(&sweep.thresholds) {
        for (p, t) in sweep.p_values.iter().zip(row) {
            w.write_record([id.clone(), format_g(*p), format_g(*t)])
                .map_err(&err)?;
        }
    }
    finish(w, path)
}

pub fn write_sweep_json(sweep: &SweepResult, path: &Path) -> Result<()> {
    write_json(sweep, path)
}

pub fn read_sweep_json(path: &Path) -> Result<SweepResult> {
    read_json(path)
}

/// Writes a sweep in the requested format. CSV output is the curve table.
pub fn write_sweep_report(sweep: &SweepResult, path: &Path, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Csv => write_curves_csv(sweep, path),
        ReportFormat::Json => write_sweep_json(sweep, path),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub case_id: String,
    pub dsc: f64,
    pub nsd: f64,
    pub hd95_mm: f64,
    pub empty_pred: bool,
    pub empty_gt: bool,
}

impl MetricsRow {
    pub fn new(case_id: impl Into<String>, m: &MetricsResult) -> Self {
        MetricsRow {
            case_id: case_id.into(),
            dsc: m.dsc,
            nsd: m.nsd,
            hd95_mm: m.hd95_mm,
            empty_pred: m.flag_empty_pred,
            empty_gt: m.flag_empty_gt,
        }
    }
}

/// Paired tests of one metrics table against another, per metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonComparison {
    pub dsc: WilcoxonResult,
    pub nsd: WilcoxonResult,
    pub hd95_mm: WilcoxonResult,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wilcoxon: Option<WilcoxonComparison>,
}

fn is_reserved(id: &str) -> bool {
    [MEAN_ROW, WILCOXON_P_ROW, WILCOXON_DEGENERATE_ROW].contains(&id)
}

impl MetricsTable {
    /// Unweighted means of dsc, nsd and hd95 over the rows.
    pub fn means(&self) -> Option<[f64; 3]> {
        if self.rows.is_empty() {
            return None;
        }
        let n = self.rows.len() as f64;
        let mut s = [0.0; 3];
        for r in &self.rows {
            s[0] += r.dsc;
            s[1] += r.nsd;
            s[2] += r.hd95_mm;
        }
        Some(s.map(|v| v / n))
    }

    /// Paired Wilcoxon tests against `other`, matching rows by case id.
    /// Values are compared as written to CSV so a table compared with its
    /// own reread copy is degenerate.
    pub fn compare(&self, other: &MetricsTable) -> Result<WilcoxonComparison> {
        let mut a: Vec<&MetricsRow> = self.rows.iter().collect();
        let mut b: Vec<&MetricsRow> = other.rows.iter().collect();
        a.sort_by(|x, y| x.case_id.cmp(&y.case_id));
        b.sort_by(|x, y| x.case_id.cmp(&y.case_id));
        let ids_a: Vec<&str> = a.iter().map(|r| r.case_id.as_str()).collect();
        let ids_b: Vec<&str> = b.iter().map(|r| r.case_id.as_str()).collect();
        if ids_a != ids_b {
            return Err(Error::InvalidArgument(format!(
                "case ids differ between the compared tables: {ids_a:?} vs {ids_b:?}"
            )));
        }
        let column = |rows: &[&MetricsRow], f: fn(&MetricsRow) -> f64| -> Vec<f64> {
            rows.iter().map(|r| round_g(f(r))).collect()
        };
        let test = |f: fn(&MetricsRow) -> f64| wilcoxon_signed_rank(&column(&a, f), &column(&b, f));
        Ok(WilcoxonComparison {
            dsc: test(|r| r.dsc)?,
            nsd: test(|r| r.nsd)?,
            hd95_mm: test(|r| r.hd95_mm)?,
        })
    }

    /// Writes the per-case rows, a `mean` row, and `wilcoxon_p` /
    /// `wilcoxon_degenerate` rows when a comparison is attached.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(r) = self.rows.iter().find(|r| is_reserved(&r.case_id)) {
            return Err(Error::InvalidArgument(format!(
                "case id {:?} is reserved for aggregate rows",
                r.case_id
            )));
        }
        let mut w = csv_writer(path)?;
        let err = csv_err(path);
        w.write_record(METRICS_HEADER).map_err(&err)?;
        let flag = |b: bool| if b { "1" } else { "0" }.to_string();
        for r in &self.rows {
            w.write_record([
                r.case_id.clone(),
                format_g(r.dsc),
                format_g(r.nsd),
                format_g(r.hd95_mm),
                flag(r.empty_pred),
                flag(r.empty_gt),
            ])
            .map_err(&err)?;
        }
        if let Some(m) = self.means() {
            let count = |f: fn(&MetricsRow) -> bool| self.rows.iter().filter(|r| f(r)).count().to_string();
            w.write_record([
                MEAN_ROW.to_string(),
                format_g(m[0]),
                format_g(m[1]),
                format_g(m[2]),
                count(|r| r.empty_pred),
                count(|r| r.empty_gt),
            ])
            .map_err(&err)?;
        }
        if let Some(c) = &self.wilcoxon {
            let tests = [&c.dsc, &c.nsd, &c.hd95_mm];
            let mut p = vec![WILCOXON_P_ROW.to_string()];
            p.extend(tests.iter().map(|t| format_g(t.p_value)));
            p.extend([String::new(), String::new()]);
            w.write_record(&p).map_err(&err)?;
            let mut d = vec![WILCOXON_DEGENERATE_ROW.to_string()];
            d.extend(tests.iter().map(|t| flag(t.degenerate)));
            d.extend([String::new(), String::new()]);
            w.write_record(&d).map_err(&err)?;
        }
        finish(w, path)
    }

    /// Reads the per-case rows of a metrics CSV, skipping aggregate rows.
    pub fn read_csv(path: &Path) -> Result<MetricsTable> {
        let err = csv_err(path);
        let mut r = csv::Reader::from_path(path).map_err(&err)?;
        let header = r.headers().map_err(&err)?.clone();
        if header.iter().collect::<Vec<_>>() != METRICS_HEADER {
            return Err(Error::InvalidArgument(format!(
                "{}: expected metrics header {METRICS_HEADER:?}",
                path.display()
            )));
        }
        let bad = |line: usize, what: &str| {
            Error::InvalidArgument(format!("{}: line {line}: bad {what}", path.display()))
        };
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(&err)?;
            let line = i + 2;
            if is_reserved(&rec[0]) {
                continue;
            }
            let num = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(line, METRICS_HEADER[k]));
            let flag = |k: usize| match &rec[k] {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(bad(line, METRICS_HEADER[k])),
            };
            rows.push(MetricsRow {
                case_id: rec[0].to_string(),
                dsc: num(1)?,
                nsd: num(2)?,
                hd95_mm: num(3)?,
                empty_pred: flag(4)?,
                empty_gt: flag(5)?,
            });
        }
        Ok(MetricsTable { rows, wilcoxon: None })
    }

    pub fn write(&self, path: &Path, format: ReportFormat) -> Result<()> {
        match format {
            ReportFormat::Csv => self.write_csv(path),
            ReportFormat::Json => write_json(self, path),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_formatting() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (2.94, "2.94"),
            (1.0 / 3.0, "0.333333"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-4.2, "-4.2"),
            (69.282032302755, "69.282"),
            (999999.5, "1e+06"),
            (0.99999949, "0.999999"),
        ];
        for (v, want) in cases {
            assert_eq!(format_g(v), want, "{v}");
        }
    }

    #[test]
    fn round_g_is_idempotent() {
        for v in [0.123456789, 5.142, 8.736, 1e-7, 3.0e9] {
            let once = round_g(v);
            assert_eq!(round_g(once), once);
        }
    }

    fn table() -> MetricsTable {
        MetricsTable {
            rows: vec![
                MetricsRow {
                    case_id: "a".into(),
                    dsc: 1.0,
                    nsd: 1.0,
                    hd95_mm: 0.0,
                    empty_pred: false,
                    empty_gt: false,
                },
                MetricsRow {
                    case_id: "b".into(),
                    dsc: 0.0,
                    nsd: 0.0,
                    hd95_mm: 221.70250336881628,
                    empty_pred: true,
                    empty_gt: false,
                },
            ],
            wilcoxon: None,
        }
    }

    #[test]
    fn metrics_csv_has_rows_plus_header_and_mean() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        table().write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "case_id,dsc,nsd,hd95_mm,empty_pred,empty_gt");
        assert_eq!(lines[2], "b,0,0,221.703,1,0");
        assert_eq!(lines[3], "mean,0.5,0.5,110.851,1,0");
        assert_eq!(lines.len(), 4);
        assert!(!text.contains('\r'));
        let back = MetricsTable::read_csv(&path).unwrap();
        assert_eq!(back.rows.len(), 2);
        assert_eq!(back.rows[1].hd95_mm, 221.703);
    }

    #[test]
    fn self_comparison_is_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut t = table();
        t.write_csv(&path).unwrap();
        let other = MetricsTable::read_csv(&path).unwrap();
        let c = t.compare(&other).unwrap();
        assert!(c.dsc.degenerate && c.nsd.degenerate && c.hd95_mm.degenerate);
        assert_eq!(c.hd95_mm.p_value, 1.0);
        t.wilcoxon = Some(c);
        t.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with("wilcoxon_p,1,1,1,,\nwilcoxon_degenerate,1,1,1,,\n"));
        assert_eq!(MetricsTable::read_csv(&path).unwrap().rows.len(), 2);
    }

    #[test]
    fn compare_rejects_unmatched_ids() {
        let mut other = table();
        other.rows[1].case_id = "c".into();
        assert!(table().compare(&other).is_err());
    }

    #[test]
    fn reserved_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = table();
        t.rows[0].case_id = "mean".into();
        assert!(t.write_csv(&dir.path().join("m.csv")).is_err());
    }
}
