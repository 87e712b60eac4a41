//! CSV and JSON serialization of metric reports, bench tables and loss logs.

use std::io::Write;

use serde_json::{Map, Value};
use wavefuse_core::metrics::{MetricReport, METRIC_NAMES};
use wavefuse_core::network::EpochRecord;

use crate::error::{Error, Result};

/// Metrics of one fused image with the identifiers of its three inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub a: String,
    pub b: String,
    pub fused: String,
    pub report: MetricReport,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Runtime(format!("writing CSV: {e}"))
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn report_header() -> Vec<&'static str> {
    let mut h = vec!["a", "b", "fused"];
    h.extend(METRIC_NAMES);
    h
}

pub fn write_report_csv<W: Write>(out: W, rows: &[ReportRow], header: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        w.write_record(report_header()).map_err(csv_err)?;
    }
    for r in rows {
        let mut rec = vec![r.a.clone(), r.b.clone(), r.fused.clone()];
        rec.extend(r.report.values().map(num));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Runtime(format!("writing CSV: {e}")))
}

pub fn report_json(row: &ReportRow) -> Value {
    let mut m = Map::new();
    m.insert("a".into(), Value::from(row.a.clone()));
    m.insert("b".into(), Value::from(row.b.clone()));
    m.insert("fused".into(), Value::from(row.fused.clone()));
    for (k, v) in row.report.entries() {
        m.insert(k.into(), Value::from(v));
    }
    Value::Object(m)
}

/// A single object for one row, an array otherwise.
pub fn reports_json(rows: &[ReportRow]) -> Value {
    match rows {
        [one] => report_json(one),
        _ => Value::Array(rows.iter().map(report_json).collect()),
    }
}

/// One averaged configuration of a bench sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub config: String,
    pub levels: Option<usize>,
    pub wavelet: Option<String>,
    pub rule: String,
    pub pairs: usize,
    pub report: MetricReport,
}

pub fn write_bench_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["config", "levels", "wavelet", "rule", "pairs"];
    header.extend(METRIC_NAMES);
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.config.clone(),
            r.levels.map(|l| l.to_string()).unwrap_or_default(),
            r.wavelet.clone().unwrap_or_default(),
            r.rule.clone(),
            r.pairs.to_string(),
        ];
        rec.extend(r.report.values().map(num));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Runtime(format!("writing CSV: {e}")))
}

pub fn write_loss_csv<W: Write>(out: W, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "steps", "total", "pixel", "ssim_loss"])
        .map_err(csv_err)?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.steps.to_string(),
            num(r.loss.total),
            num(r.loss.pixel),
            num(r.loss.ssim_loss),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Runtime(format!("writing CSV: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ReportRow {
        ReportRow {
            a: "a.pgm".into(),
            b: "b.pgm".into(),
            fused: "f.pgm".into(),
            report: MetricReport::from_values([
                7.25, 0.0, 1.0, 0.5, 0.1, 0.9, 0.99, 123.456, 0.875,
            ]),
        }
    }

    #[test]
    fn csv_and_json_agree() {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[row()], true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "a,b,fused,EN,CE,FMI_pixel,FMI_dct,FMI_w,Q_NICE,Q_ABF,VARI,MS_SSIM"
        );
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        let json = reports_json(&[row()]);
        for (i, name) in METRIC_NAMES.iter().enumerate() {
            let from_csv: f64 = fields[3 + i].parse().unwrap();
            assert_eq!(from_csv, json[name].as_f64().unwrap());
        }
        assert!(reports_json(&[row(), row()]).is_array());
    }
}
