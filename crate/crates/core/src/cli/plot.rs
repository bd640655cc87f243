//! Static SVG charts: metric-versus-condition lines and confusion heatmaps.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One summary line with the condition kept as written in the CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryLine {
    pub model: String,
    pub condition: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryLine>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let (model, condition, metric, mean, std) = (col("model")?, col("condition")?, col("metric")?, col("mean")?, col("std")?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let num = |c: usize| {
            rec.get(c).unwrap_or("").trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })
        };
        out.push(SummaryLine {
            model: rec.get(model).unwrap_or("").to_string(),
            condition: rec.get(condition).unwrap_or("").to_string(),
            metric: rec.get(metric).unwrap_or("").to_string(),
            mean: num(mean)?,
            std: num(std)?,
        });
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn unique<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Line chart of `metric` against condition, one line per model with
/// ±std error bars. Difference rows (`a - b`) are left out.
pub fn summary_svg(rows: &[SummaryLine], metric: &str, title: &str) -> Result<String> {
    let rows: Vec<&SummaryLine> = rows
        .iter()
        .filter(|r| r.metric == metric && !r.model.contains(" - "))
        .collect();
    if rows.is_empty() {
        return Err(Error::Input(format!("no summary rows for metric {metric:?}")));
    }
    let conditions = unique(rows.iter().map(|r| r.condition.as_str()));
    let models = unique(rows.iter().map(|r| r.model.as_str()));
    let mut lo = rows.iter().map(|r| r.mean - r.std).fold(f64::INFINITY, f64::min);
    let mut hi = rows.iter().map(|r| r.mean + r.std).fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-12) {
        lo -= 0.05;
        hi += 0.05;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);

    let (w, h) = (680.0, 420.0);
    let (left, right, top, bottom) = (80.0, 170.0, 40.0, 60.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let x_of = |i: usize| {
        if conditions.len() == 1 {
            left + pw / 2.0
        } else {
            left + pw * i as f64 / (conditions.len() - 1) as f64
        }
    };
    let y_of = |v: f64| top + ph * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, left + pw / 2.0, escape(title));
    let _ = writeln!(s, r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, top + ph, left + pw, top + ph);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, top + ph);
    for k in 0..=5 {
        let v = lo + (hi - lo) * k as f64 / 5.0;
        let y = y_of(v);
        let _ = writeln!(s, r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/>"##, left, left + pw);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, left - 6.0, y + 4.0);
    }
    for (i, c) in conditions.iter().enumerate() {
        let x = x_of(i);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, top + ph, top + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, top + ph + 20.0, escape(c));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">condition</text>"#, left + pw / 2.0, h - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(metric)
    );
    for (m, model) in models.iter().enumerate() {
        let color = PALETTE[m % PALETTE.len()];
        let points: Vec<(f64, &SummaryLine)> = conditions
            .iter()
            .enumerate()
            .filter_map(|(i, c)| rows.iter().find(|r| r.model == *model && r.condition == *c).map(|r| (x_of(i), *r)))
            .collect();
        let path: Vec<String> = points.iter().map(|(x, r)| format!("{x:.2},{:.2}", y_of(r.mean))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.join(" "));
        for (x, r) in &points {
            let (y0, y1) = (y_of(r.mean - r.std), y_of(r.mean + r.std));
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="{color}"/>"#);
            for y in [y0, y1] {
                let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}"/>"#, x - 4.0, x + 4.0);
            }
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, y_of(r.mean));
        }
        let ly = top + 10.0 + 18.0 * m as f64;
        let lx = left + pw + 20.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(model));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Heatmap shaded by row-normalized counts; rows are true classes.
pub fn confusion_svg(cm: &ConfusionMatrix, title: &str) -> Result<String> {
    let k = cm.num_classes();
    if k == 0 {
        return Err(Error::Input("confusion matrix has no classes".into()));
    }
    let cell = (480.0 / k as f64).clamp(12.0, 48.0);
    let (left, top) = (70.0, 60.0);
    let side = cell * k as f64;
    let (w, h) = (left + side + 20.0, top + side + 20.0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, left + side / 2.0, escape(title));
    let _ = writeln!(s, r#"<text x="{}" y="36" text-anchor="middle">predicted</text>"#, left + side / 2.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">true</text>"#,
        top + side / 2.0,
        top + side / 2.0
    );
    for c in 0..k {
        let mid = c as f64 * cell + cell / 2.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{c}</text>"#, left + mid, top - 6.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{c}</text>"#, left - 6.0, top + mid + 4.0);
    }
    for (r, row) in cm.counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        for (c, &v) in row.iter().enumerate() {
            let frac = if total == 0 { 0.0 } else { v as f64 / total as f64 };
            let shade = |full: f64| (255.0 - frac * (255.0 - full)).round() as u8;
            let fill = format!("#{:02x}{:02x}{:02x}", shade(8.0), shade(81.0), shade(156.0));
            let (x, y) = (left + c as f64 * cell, top + r as f64 * cell);
            let _ = writeln!(s, r#"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{fill}" stroke="white"/>"#);
            let text = if frac > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="{text}">{v}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
