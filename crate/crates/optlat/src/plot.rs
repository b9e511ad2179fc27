//! Minimal self-contained SVG line plots.
//!
//! The plotted CSV is embedded verbatim in the file's `<metadata>`, so the
//! numbers behind every polyline stay readable exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dataset::{Dataset, DatasetError};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 200.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("dataset `{0}` is empty")]
    Empty(String),
    #[error("schema mismatch: {0}")]
    Schema(#[from] DatasetError),
    #[error("dataset `{dataset}` column `{column}` has no finite values")]
    NoFiniteValues { dataset: String, column: String },
}

/// Which columns go on which axis; rows sharing the `group` columns form one
/// polyline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlotStyle {
    pub x: &'static str,
    pub y: &'static str,
    pub group: &'static [&'static str],
    pub x_label: &'static str,
    pub y_label: &'static str,
}

impl PlotStyle {
    pub const RATES: PlotStyle = PlotStyle {
        x: "s",
        y: "rate_mm_s",
        group: &["T_over_TR"],
        x_label: "lattice depth s [E_R]",
        y_label: "expansion rate [mm/s]",
    };
    pub const WIDTHS: PlotStyle = PlotStyle {
        x: "t_ms",
        y: "sigma_um",
        group: &["T_over_TR", "s"],
        x_label: "t [ms]",
        y_label: "rms width [µm]",
    };
    pub const WIDTHS_GPE: PlotStyle = PlotStyle {
        x: "t_ms",
        y: "sigma_um",
        group: &["s"],
        x_label: "t [ms]",
        y_label: "rms width [µm]",
    };
    pub const PROFILES: PlotStyle = PlotStyle {
        x: "z_um",
        y: "density_per_um",
        group: &["t_ms"],
        x_label: "z [µm]",
        y_label: "density [atoms/µm]",
    };
    pub const BANDS: PlotStyle = PlotStyle {
        x: "q",
        y: "E_over_ER",
        group: &["s", "band"],
        x_label: "quasi-momentum q [k_L]",
        y_label: "E [E_R]",
    };
    pub const REGIMES: PlotStyle = PlotStyle {
        x: "s",
        y: "rate_mm_s",
        group: &["regime"],
        x_label: "lattice depth s [E_R]",
        y_label: "expansion rate [mm/s]",
    };
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>) -> Option<Self> {
        let (lo, hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            return None;
        }
        let pad = if hi > lo { 0.0 } else { lo.abs().max(1.0) * 0.5 };
        Some(Self {
            lo: lo - pad,
            hi: hi + pad,
        })
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Render `data` as an SVG document titled with the scenario name.
pub fn emit_plot(data: &Dataset, style: &PlotStyle, scenario: &str) -> Result<String, PlotError> {
    if data.is_empty() {
        return Err(PlotError::Empty(data.name.clone()));
    }
    let xs = data.numeric(style.x)?;
    let ys = data.numeric(style.y)?;
    let keys: Vec<usize> = style
        .group
        .iter()
        .map(|g| data.column_index(g))
        .collect::<Result<_, _>>()?;

    let mut series: BTreeMap<usize, (String, Vec<(f64, f64)>)> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for (i, row) in data.rows.iter().enumerate() {
        let label = keys
            .iter()
            .zip(style.group)
            .map(|(&k, name)| format!("{name}={}", row[k]))
            .collect::<Vec<_>>()
            .join(", ");
        let idx = match order.iter().position(|l| *l == label) {
            Some(p) => p,
            None => {
                order.push(label.clone());
                order.len() - 1
            }
        };
        series.entry(idx).or_insert_with(|| (label, Vec::new())).1.push((xs[i], ys[i]));
    }

    let missing = |column: &str| PlotError::NoFiniteValues {
        dataset: data.name.clone(),
        column: column.to_string(),
    };
    let ax = Axis::new(xs.iter().copied()).ok_or_else(|| missing(style.x))?;
    let ay = Axis::new(ys.iter().copied()).ok_or_else(|| missing(style.y))?;
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);

    let mut svg = String::new();
    let w = &mut svg;
    // writing into a String cannot fail
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let csv = data.to_csv()?;
    let _ = writeln!(
        w,
        "<metadata><![CDATA[\n{}]]></metadata>",
        String::from_utf8_lossy(&csv).replace("]]>", "]]]]><![CDATA[>")
    );
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{} · {}</text>"#,
        0.5 * (x0 + x1),
        escape(scenario),
        escape(&data.name)
    );
    let _ = writeln!(
        w,
        r#"<polyline points="{x0},{y1} {x0},{y0} {x1},{y0}" fill="none" stroke="black"/>"#
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let vx = ax.lo + f * (ax.hi - ax.lo);
        let vy = ay.lo + f * (ay.hi - ay.lo);
        let px = ax.map(vx, x0, x1);
        let py = ay.map(vy, y0, y1);
        let _ = writeln!(
            w,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            tick_label(vx)
        );
        let _ = writeln!(
            w,
            r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick_label(vy)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        0.5 * (x0 + x1),
        HEIGHT - 16.0,
        escape(style.x_label)
    );
    let _ = writeln!(
        w,
        r#"<text transform="translate(20,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        0.5 * (y0 + y1),
        escape(style.y_label)
    );
    for (idx, (label, pts)) in &series {
        let colour = PALETTE[idx % PALETTE.len()];
        let points: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", ax.map(*x, x0, x1), ay.map(*y, y0, y1)))
            .collect();
        let _ = writeln!(
            w,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        let ly = MARGIN_TOP + 10.0 + 18.0 * *idx as f64;
        let _ = writeln!(
            w,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x1 + 15.0,
            x1 + 35.0,
            x1 + 40.0,
            ly + 4.0,
            escape(label)
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}
