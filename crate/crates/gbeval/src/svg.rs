//! Standalone SVG charts.

use std::collections::BTreeMap;
use std::fmt::Write;

use gbeval_core::metrics::Histogram;
use gbeval_core::xval::{GroupKey, GroupSummary, Metric};

use crate::{Error, Result};

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Horizontal axis of an error-bar chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    /// Log-scale; λ = 0 sits one decade left of the smallest positive value.
    Lambda,
    /// Categorical.
    FinetuneLevel,
}

#[derive(Debug, Clone, PartialEq)]
enum XValue {
    Lambda(f64),
    Level(String),
}

impl XValue {
    fn label(&self) -> String {
        match self {
            XValue::Lambda(l) if *l == 0.0 => "0".into(),
            XValue::Lambda(l) => format!("{l:e}"),
            XValue::Level(s) => s.clone(),
        }
    }
}

fn split_key(key: &GroupKey, axis: XAxis) -> Result<(String, XValue)> {
    let mut rest = key.clone();
    let x =
        match axis {
            XAxis::Lambda => XValue::Lambda(
                rest.lambda
                    .take()
                    .ok_or_else(|| Error::Config("summaries are not grouped by lambda".into()))?,
            ),
            XAxis::FinetuneLevel => XValue::Level(rest.finetune_level.take().ok_or_else(|| {
                Error::Config("summaries are not grouped by finetune_level".into())
            })?),
        };
    Ok((rest.to_string(), x))
}

struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        if self.hi == self.lo {
            return (self.px_lo + self.px_hi) / 2.0;
        }
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

/// Mean ± std line chart, one polyline per series.
///
/// Whiskers carry `data-mean`/`data-std`; the plot group carries the axis
/// mapping (`data-ymin`, `data-ymax`, `data-top`, `data-bottom`).
pub fn errorbar_svg(
    groups: &[GroupSummary],
    metric: Metric,
    axis: XAxis,
    x_order: Option<&[String]>,
) -> Result<String> {
    let mut series: BTreeMap<String, Vec<(XValue, f64, Option<f64>)>> = BTreeMap::new();
    for g in groups {
        let Some(s) = g.get(metric) else { continue };
        let (name, x) = split_key(&g.key, axis)?;
        series.entry(name).or_default().push((x, s.mean, s.std));
    }
    if series.is_empty() {
        return Err(Error::Data(format!("no group defines {metric}")));
    }

    // Category positions along x.
    let xs: Vec<XValue> = {
        let mut all: Vec<XValue> = Vec::new();
        for pts in series.values() {
            for (x, _, _) in pts {
                if !all.contains(x) {
                    all.push(x.clone());
                }
            }
        }
        all
    };
    let position: Box<dyn Fn(&XValue) -> f64> = match axis {
        XAxis::Lambda => {
            let positive: Vec<f64> = xs
                .iter()
                .filter_map(|x| match x {
                    XValue::Lambda(l) if *l > 0.0 => Some(l.log10()),
                    _ => None,
                })
                .collect();
            let min_log = positive.iter().copied().fold(f64::INFINITY, f64::min);
            let zero_at = if min_log.is_finite() {
                min_log.floor() - 1.0
            } else {
                0.0
            };
            Box::new(move |x| match x {
                XValue::Lambda(l) if *l > 0.0 => l.log10(),
                _ => zero_at,
            })
        }
        XAxis::FinetuneLevel => {
            let order: Vec<String> = match x_order {
                Some(o) => {
                    for x in &xs {
                        if !o.contains(&x.label()) {
                            return Err(Error::Config(format!(
                                "--x-order does not mention {:?}",
                                x.label()
                            )));
                        }
                    }
                    o.to_vec()
                }
                None => {
                    let mut v: Vec<String> = xs.iter().map(XValue::label).collect();
                    v.sort();
                    v
                }
            };
            Box::new(move |x| order.iter().position(|o| *o == x.label()).unwrap_or(0) as f64)
        }
    };

    let xpos: Vec<f64> = xs.iter().map(&position).collect();
    let (xlo, xhi) = xpos
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let pad = if xhi > xlo { 0.05 * (xhi - xlo) } else { 0.5 };
    let xs_scale = Scale {
        lo: xlo - pad,
        hi: xhi + pad,
        px_lo: LEFT,
        px_hi: W - RIGHT,
    };

    let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for pts in series.values() {
        for &(_, m, s) in pts {
            let s = s.unwrap_or(0.0);
            ylo = ylo.min(m - s);
            yhi = yhi.max(m + s);
        }
    }
    let ypad = if yhi > ylo { 0.05 * (yhi - ylo) } else { 0.5 };
    let (ymin, ymax) = (ylo - ypad, yhi + ypad);
    let ys = Scale {
        lo: ymin,
        hi: ymax,
        px_lo: H - BOTTOM,
        px_hi: TOP,
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<g id="plot" data-metric="{}" data-ymin="{ymin}" data-ymax="{ymax}" data-top="{TOP}" data-bottom="{}">"#,
        metric,
        H - BOTTOM
    );
    // Axes.
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT
    );
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#,
        H - BOTTOM
    );
    for i in 0..=4 {
        let v = ymin + (ymax - ymin) * i as f64 / 4.0;
        let y = ys.map(v);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            format_tick(v)
        );
    }
    for x in &xs {
        let px = xs_scale.map(position(x));
        let _ = writeln!(
            out,
            r#"<text class="xtick" x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 18.0,
            esc(&x.label())
        );
    }
    let xlabel = match axis {
        XAxis::Lambda => "lambda (log scale, 0 at left)",
        XAxis::FinetuneLevel => "finetune level",
    };
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.2}" transform="rotate(-90 15 {:.2})" text-anchor="middle">{metric}</text>"#,
        H / 2.0,
        H / 2.0
    );

    for (i, (name, mut pts)) in series.into_iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        pts.sort_by(|a, b| position(&a.0).total_cmp(&position(&b.0)));
        let _ = writeln!(out, r#"<g class="series" data-series="{}">"#, esc(&name));
        let points: Vec<String> = pts
            .iter()
            .map(|(x, m, _)| format!("{:.2},{:.2}", xs_scale.map(position(x)), ys.map(*m)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        for (x, m, s) in &pts {
            let px = xs_scale.map(position(x));
            if let Some(s) = s {
                let _ = writeln!(
                    out,
                    r#"<line class="whisker" data-x="{}" data-mean="{m}" data-std="{s}" x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    esc(&x.label()),
                    ys.map(m - s),
                    ys.map(m + s)
                );
            }
            let _ = writeln!(
                out,
                r#"<circle cx="{px:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                ys.map(*m)
            );
        }
        let ly = TOP + 18.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}">{}</text>"#,
            W - RIGHT + 12.0,
            esc(&name)
        );
        out.push_str("</g>\n");
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

fn format_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Bar chart of a probability histogram with the confidence bands shaded.
pub fn histogram_svg(h: &Histogram, t: f64) -> String {
    let max = h.counts().iter().copied().max().unwrap_or(0).max(1) as f64;
    let xs = Scale {
        lo: 0.0,
        hi: 1.0,
        px_lo: LEFT,
        px_hi: W - 40.0,
    };
    let ys = Scale {
        lo: 0.0,
        hi: max,
        px_lo: H - BOTTOM,
        px_hi: TOP,
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    for (lo, hi) in [(0.0, t), (1.0 - t, 1.0)] {
        let _ = writeln!(
            out,
            r##"<rect class="confident" x="{:.2}" y="{TOP}" width="{:.2}" height="{:.2}" fill="#e8f0fe"/>"##,
            xs.map(lo),
            xs.map(hi) - xs.map(lo),
            H - BOTTOM - TOP
        );
    }
    for (i, &c) in h.counts().iter().enumerate() {
        let (x0, x1) = (xs.map(h.edges()[i]), xs.map(h.edges()[i + 1]));
        let y = ys.map(c as f64);
        let _ = writeln!(
            out,
            r##"<rect class="bin" data-count="{c}" x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#4c72b0" stroke="white"/>"##,
            x1 - x0,
            H - BOTTOM - y
        );
    }
    for v in [0.0, t, 0.5, 1.0 - t, 1.0] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            xs.map(v),
            H - BOTTOM + 18.0,
            (v * 100.0).round() / 100.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">predicted probability</text>"#,
        (LEFT + W - 40.0) / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{LEFT}" y="{:.2}">max bin {}</text>"#,
        TOP - 10.0,
        max as u64
    );
    out.push_str("</svg>\n");
    out
}
