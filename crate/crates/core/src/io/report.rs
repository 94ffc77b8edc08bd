use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_json, write_atomic, write_json, IoError, SCHEMA_VERSION};
use crate::metrics::EvalReport;

#[derive(Debug, Serialize, Deserialize)]
struct ReportFile {
    schema_version: u32,
    #[serde(flatten)]
    report: EvalReport,
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

/// One row per runner, best F1 first; scores ×100 with two decimals.
pub fn report_csv(report: &EvalReport) -> String {
    let iou: BTreeMap<_, _> = report.iou.iter().map(|s| (&s.bib, s)).collect();
    let mut rows: Vec<_> = report.video.iter().collect();
    rows.sort_by(|a, b| b.f1.total_cmp(&a.f1).then(a.bib.cmp(&b.bib)));

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "bib", "recall", "precision", "f1", "tp", "fp", "gt_count", "mean_iou", "n_videos",
    ])
    .expect("in-memory CSV write");
    for s in rows {
        let (mean_iou, n) = iou.get(&s.bib).map_or((0.0, 0), |i| (i.mean_iou, i.n_videos));
        w.write_record([
            s.bib.to_string(),
            pct(s.recall),
            pct(s.precision),
            pct(s.f1),
            s.tp.to_string(),
            s.fp.to_string(),
            s.gt_count.to_string(),
            pct(mean_iou),
            n.to_string(),
        ])
        .expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV write")).expect("utf-8")
}

/// Writes `<variant>.json` and `<variant>.csv` into `dir`.
pub fn export_report(report: &EvalReport, dir: &Path) -> Result<(PathBuf, PathBuf), IoError> {
    let json = dir.join(format!("{}.json", report.variant));
    let csv = dir.join(format!("{}.csv", report.variant));
    write_json(
        &json,
        &ReportFile {
            schema_version: SCHEMA_VERSION,
            report: report.clone(),
        },
    )?;
    write_atomic(&csv, report_csv(report).as_bytes())?;
    Ok((json, csv))
}

pub fn load_report(path: &Path) -> Result<EvalReport, IoError> {
    let f: ReportFile = read_json(path)?;
    if f.schema_version != SCHEMA_VERSION {
        return Err(IoError::schema(
            path,
            format!("unsupported schema version {}", f.schema_version),
        ));
    }
    Ok(f.report)
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    variant: &'a str,
    m: usize,
    macro_recall: f64,
    macro_precision: f64,
    macro_f1: f64,
    miou: f64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    schema_version: u32,
    variants: Vec<SummaryRow<'a>>,
}

/// `summary.json` (fractions) and `summary.csv` (×100), one row per variant.
pub fn export_summary(reports: &[EvalReport], dir: &Path) -> Result<(), IoError> {
    let rows: Vec<SummaryRow> = reports
        .iter()
        .map(|r| SummaryRow {
            variant: &r.variant,
            m: r.m,
            macro_recall: r.macro_recall,
            macro_precision: r.macro_precision,
            macro_f1: r.macro_f1,
            miou: r.miou,
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variant", "m", "recall", "precision", "f1", "miou"])
        .expect("in-memory CSV write");
    for r in &rows {
        w.write_record([
            r.variant.to_owned(),
            r.m.to_string(),
            pct(r.macro_recall),
            pct(r.macro_precision),
            pct(r.macro_f1),
            pct(r.miou),
        ])
        .expect("in-memory CSV write");
    }
    write_atomic(&dir.join("summary.csv"), &w.into_inner().expect("in-memory CSV write"))?;
    write_json(
        &dir.join("summary.json"),
        &Summary {
            schema_version: SCHEMA_VERSION,
            variants: rows,
        },
    )
}
