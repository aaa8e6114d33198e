//! CSV and JSON outputs.

use std::path::Path;

use gbeval_core::chac::GrainSet;
use gbeval_core::metrics::{Histogram, MetricBundle};
use gbeval_core::xval::{GroupSummary, Metric};

use crate::{Error, Result};

pub const NA: &str = "NA";

/// Shortest round-trip decimal, or `NA`.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    std::fs::write(path, text).map_err(Error::io(path))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_text(path, &text)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let file = std::fs::File::create(path).map_err(Error::io(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

pub const METRICS_HEADER: [&str; 6] = [
    "image_id",
    "precision",
    "recall",
    "f1",
    "certainty",
    "abundance",
];

pub fn write_metrics_csv(path: &Path, rows: &[(String, MetricBundle)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = csv_err(path);
    w.write_record(METRICS_HEADER).map_err(&e)?;
    for (id, m) in rows {
        w.write_record([
            id.clone(),
            fmt_opt(m.precision),
            fmt_opt(m.recall),
            fmt_opt(m.f1),
            fmt_opt(m.certainty),
            fmt_opt(m.abundance),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = csv_err(path);
    w.write_record(["bin_lo", "bin_hi", "count"]).map_err(&e)?;
    for (i, c) in h.counts().iter().enumerate() {
        w.write_record([
            h.edges()[i].to_string(),
            h.edges()[i + 1].to_string(),
            c.to_string(),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn write_grains_csv(path: &Path, sets: &[GrainSet]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = csv_err(path);
    w.write_record([
        "image_id",
        "label",
        "area_px",
        "solidity",
        "centroid_row",
        "centroid_col",
        "touches_border",
    ])
    .map_err(&e)?;
    for set in sets {
        for g in &set.grains {
            w.write_record([
                set.image_id.clone(),
                g.label.to_string(),
                g.area_px.to_string(),
                g.solidity.to_string(),
                g.centroid.0.to_string(),
                g.centroid.1.to_string(),
                g.touches_border.to_string(),
            ])
            .map_err(&e)?;
        }
    }
    w.flush().map_err(Error::io(path))
}

/// One row per (group, metric) with `group,metric,mean,std,n`.
pub fn write_summary_csv(path: &Path, groups: &[GroupSummary]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = csv_err(path);
    w.write_record(["group", "metric", "mean", "std", "n"])
        .map_err(&e)?;
    for m in Metric::ALL {
        for g in groups {
            if let Some(s) = g.get(m) {
                w.write_record([
                    g.key.to_string(),
                    m.name().to_string(),
                    s.mean.to_string(),
                    fmt_opt(s.std),
                    s.n.to_string(),
                ])
                .map_err(&e)?;
            }
        }
    }
    w.flush().map_err(Error::io(path))
}
