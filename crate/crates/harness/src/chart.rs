//! Self-contained SVG charts: lines with shaded bands, and grouped bars.
//!
//! Output depends only on the chart value: coordinates are printed with a
//! fixed number of decimals and nothing time- or host-dependent is written.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HarnessError, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dashed: bool,
}

/// Shaded region between `lower` and `upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct Band {
    pub name: String,
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// One bar per category, optionally with an interval whisker.
#[derive(Clone, Debug, PartialEq)]
pub struct BarGroup {
    pub name: String,
    pub values: Vec<f64>,
    pub whiskers: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChartBody {
    Line {
        series: Vec<Series>,
        bands: Vec<Band>,
    },
    Bar {
        categories: Vec<String>,
        groups: Vec<BarGroup>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub body: ChartBody,
    /// Horizontal reference lines, drawn dashed in grey.
    pub reference_lines: Vec<(String, f64)>,
    /// Text stored in the SVG `<metadata>` element.
    pub metadata: Vec<String>,
}

impl Chart {
    pub fn line(title: &str, x_label: &str, y_label: &str) -> Self {
        Chart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            body: ChartBody::Line {
                series: Vec::new(),
                bands: Vec::new(),
            },
            reference_lines: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn bar(title: &str, x_label: &str, y_label: &str, categories: Vec<String>) -> Self {
        Chart {
            body: ChartBody::Bar {
                categories,
                groups: Vec::new(),
            },
            ..Chart::line(title, x_label, y_label)
        }
    }

    pub fn with_series(mut self, name: &str, x: Vec<f64>, y: Vec<f64>, dashed: bool) -> Self {
        if let ChartBody::Line { series, .. } = &mut self.body {
            series.push(Series {
                name: name.into(),
                x,
                y,
                dashed,
            });
        }
        self
    }

    pub fn with_band(mut self, name: &str, x: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        if let ChartBody::Line { bands, .. } = &mut self.body {
            bands.push(Band {
                name: name.into(),
                x,
                lower,
                upper,
            });
        }
        self
    }

    pub fn with_bars(mut self, name: &str, values: Vec<f64>, whiskers: Option<Vec<(f64, f64)>>) -> Self {
        if let ChartBody::Bar { groups, .. } = &mut self.body {
            groups.push(BarGroup {
                name: name.into(),
                values,
                whiskers,
            });
        }
        self
    }

    pub fn with_reference(mut self, name: &str, y: f64) -> Self {
        self.reference_lines.push((name.into(), y));
        self
    }

    pub fn with_metadata(mut self, lines: &[String]) -> Self {
        self.metadata.extend_from_slice(lines);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(HarnessError::Chart(m));
        let finite = |name: &str, v: &[f64]| -> Result<()> {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(HarnessError::Chart(format!("`{name}` has non-finite values")))
            }
        };
        match &self.body {
            ChartBody::Line { series, bands } => {
                if series.is_empty() && bands.is_empty() {
                    return err("line chart has no series".into());
                }
                for s in series {
                    if s.x.is_empty() || s.x.len() != s.y.len() {
                        return err(format!("series `{}` is empty or has mismatched x/y", s.name));
                    }
                    finite(&s.name, &s.x)?;
                    finite(&s.name, &s.y)?;
                }
                for b in bands {
                    if b.x.is_empty() || b.x.len() != b.lower.len() || b.x.len() != b.upper.len() {
                        return err(format!("band `{}` is empty or has mismatched lengths", b.name));
                    }
                    finite(&b.name, &b.x)?;
                    finite(&b.name, &b.lower)?;
                    finite(&b.name, &b.upper)?;
                    if let Some(i) = (0..b.x.len()).find(|&i| b.lower[i] > b.upper[i]) {
                        return err(format!(
                            "band `{}` has lower {} above upper {} at x = {}",
                            b.name, b.lower[i], b.upper[i], b.x[i]
                        ));
                    }
                }
            }
            ChartBody::Bar { categories, groups } => {
                if categories.is_empty() || groups.is_empty() {
                    return err("bar chart has no bars".into());
                }
                for g in groups {
                    if g.values.len() != categories.len() {
                        return err(format!("bar group `{}` does not match the categories", g.name));
                    }
                    finite(&g.name, &g.values)?;
                    if let Some(w) = &g.whiskers {
                        if w.len() != categories.len() {
                            return err(format!("whiskers of `{}` do not match the categories", g.name));
                        }
                        if w.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi) {
                            return err(format!("whiskers of `{}` are reversed or non-finite", g.name));
                        }
                    }
                }
            }
        }
        if self.reference_lines.iter().any(|(_, y)| !y.is_finite()) {
            return err("reference line is not finite".into());
        }
        Ok(())
    }

    pub fn to_svg(&self) -> Result<String> {
        self.validate()?;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        if !self.metadata.is_empty() {
            let _ = writeln!(svg, "<metadata>{}</metadata>", escape(&self.metadata.join("\n")));
        }
        let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + plot_w() / 2.0,
            escape(&self.title)
        );
        let (x_range, y_range) = self.ranges();
        let frame = Frame { x: x_range, y: y_range };
        frame.axes(
            &mut svg,
            &self.x_label,
            &self.y_label,
            matches!(self.body, ChartBody::Line { .. }),
        );
        let mut legend = Vec::new();
        match &self.body {
            ChartBody::Line { series, bands } => {
                for (i, b) in bands.iter().enumerate() {
                    let colour = PALETTE[(i + series.len()) % PALETTE.len()];
                    let mut pts: Vec<String> = b.x.iter().zip(&b.upper).map(|(&x, &y)| frame.point(x, y)).collect();
                    pts.extend(b.x.iter().zip(&b.lower).rev().map(|(&x, &y)| frame.point(x, y)));
                    let _ = writeln!(
                        svg,
                        r#"<polygon points="{}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#,
                        pts.join(" ")
                    );
                    legend.push((b.name.clone(), colour, LegendMark::Band));
                }
                for (i, s) in series.iter().enumerate() {
                    let colour = PALETTE[i % PALETTE.len()];
                    let pts: Vec<String> = s.x.iter().zip(&s.y).map(|(&x, &y)| frame.point(x, y)).collect();
                    let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
                    let _ = writeln!(
                        svg,
                        r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"{dash}/>"#,
                        pts.join(" ")
                    );
                    legend.push((s.name.clone(), colour, LegendMark::Line(s.dashed)));
                }
            }
            ChartBody::Bar { categories, groups } => {
                let slot = plot_w() / categories.len() as f64;
                let bar_w = slot * 0.8 / groups.len() as f64;
                let zero = frame.y_px(0.0f64.clamp(frame.y.0, frame.y.1));
                for (c, label) in categories.iter().enumerate() {
                    let _ = writeln!(
                        svg,
                        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                        LEFT + slot * (c as f64 + 0.5),
                        TOP + plot_h() + 16.0,
                        escape(label)
                    );
                }
                for (g, group) in groups.iter().enumerate() {
                    let colour = PALETTE[g % PALETTE.len()];
                    for (c, &v) in group.values.iter().enumerate() {
                        let x = LEFT + slot * c as f64 + slot * 0.1 + bar_w * g as f64;
                        let y = frame.y_px(v);
                        let _ = writeln!(
                            svg,
                            r#"<rect x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{:.2}" fill="{colour}"/>"#,
                            y.min(zero),
                            (y - zero).abs()
                        );
                        if let Some(w) = &group.whiskers {
                            let cx = x + bar_w / 2.0;
                            let (lo, hi) = (frame.y_px(w[c].0), frame.y_px(w[c].1));
                            let _ = writeln!(
                                svg,
                                r#"<line x1="{cx:.2}" y1="{lo:.2}" x2="{cx:.2}" y2="{hi:.2}" stroke="black"/>"#
                            );
                        }
                    }
                    legend.push((group.name.clone(), colour, LegendMark::Bar));
                }
            }
        }
        for (name, y) in &self.reference_lines {
            let py = frame.y_px(*y);
            let _ = writeln!(
                svg,
                r##"<line x1="{LEFT:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#555555" stroke-dasharray="3 3"/>"##,
                LEFT + plot_w()
            );
            legend.push((name.clone(), "#555555", LegendMark::Line(true)));
        }
        write_legend(&mut svg, &legend);
        svg.push_str("</svg>\n");
        Ok(svg)
    }

    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs = Vec::new();
        let mut ys: Vec<f64> = self.reference_lines.iter().map(|(_, y)| *y).collect();
        match &self.body {
            ChartBody::Line { series, bands } => {
                for s in series {
                    xs.extend(&s.x);
                    ys.extend(&s.y);
                }
                for b in bands {
                    xs.extend(&b.x);
                    ys.extend(&b.lower);
                    ys.extend(&b.upper);
                }
            }
            ChartBody::Bar { groups, .. } => {
                ys.push(0.0);
                for g in groups {
                    ys.extend(&g.values);
                    for (lo, hi) in g.whiskers.iter().flatten() {
                        ys.push(*lo);
                        ys.push(*hi);
                    }
                }
                xs.extend([0.0, 1.0]);
            }
        }
        (padded(&xs, 0.0), padded(&ys, 0.05))
    }
}

/// Writes the chart to `path`.
pub fn emit_chart(chart: &Chart, path: &Path) -> Result<()> {
    let svg = chart.to_svg()?;
    std::fs::write(path, svg).map_err(HarnessError::io(path))
}

fn plot_w() -> f64 {
    WIDTH - LEFT - RIGHT
}

fn plot_h() -> f64 {
    HEIGHT - TOP - BOTTOM
}

fn padded(v: &[f64], frac: f64) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-12 {
        let w = if lo.abs() > 1e-12 { lo.abs() * 0.1 } else { 1.0 };
        return (lo - w, hi + w);
    }
    let pad = (hi - lo) * frac;
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick positions at a 1-2-5 step covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn x_px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * plot_w()
    }

    fn y_px(&self, y: f64) -> f64 {
        TOP + (self.y.1 - y) / (self.y.1 - self.y.0) * plot_h()
    }

    fn point(&self, x: f64, y: f64) -> String {
        format!("{:.2},{:.2}", self.x_px(x), self.y_px(y))
    }

    fn axes(&self, svg: &mut String, x_label: &str, y_label: &str, x_ticks: bool) {
        let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w(), TOP, TOP + plot_h());
        let _ = writeln!(
            svg,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            plot_w(),
            plot_h()
        );
        for t in ticks(self.y.0, self.y.1) {
            let py = self.y_px(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{x0:.2}" y1="{py:.2}" x2="{x1:.2}" y2="{py:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                x0 - 6.0,
                py + 4.0,
                tick_label(t)
            );
        }
        if x_ticks {
            for t in ticks(self.x.0, self.x.1) {
                let px = self.x_px(t);
                let _ = writeln!(
                    svg,
                    r#"<line x1="{px:.2}" y1="{y1:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                    y1 + 5.0,
                    y1 + 18.0,
                    tick_label(t)
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x0 + plot_w() / 2.0,
            HEIGHT - 10.0,
            escape(x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            y0 + plot_h() / 2.0,
            y0 + plot_h() / 2.0,
            escape(y_label)
        );
    }
}

enum LegendMark {
    Line(bool),
    Band,
    Bar,
}

fn write_legend(svg: &mut String, entries: &[(String, &str, LegendMark)]) {
    let x = LEFT + plot_w() + 12.0;
    for (i, (name, colour, mark)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let _ = match mark {
            LegendMark::Line(dashed) => {
                let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
                writeln!(
                    svg,
                    r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{colour}" stroke-width="2"{dash}/>"#,
                    x + 22.0
                )
            }
            LegendMark::Band => writeln!(
                svg,
                r#"<rect x="{x:.2}" y="{:.2}" width="22" height="10" fill="{colour}" fill-opacity="0.2"/>"#,
                y - 5.0
            ),
            LegendMark::Bar => writeln!(
                svg,
                r#"<rect x="{x:.2}" y="{:.2}" width="22" height="10" fill="{colour}"/>"#,
                y - 5.0
            ),
        };
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 28.0,
            y + 4.0,
            escape(name)
        );
    }
}
