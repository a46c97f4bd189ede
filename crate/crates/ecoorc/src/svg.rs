//! Minimal SVG line charts: one `<polyline>` per series, optional second
//! y axis on the right.

use std::fmt::Write;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineStyle {
    Solid,
    Dashed,
    Dotted,
}

impl LineStyle {
    fn dasharray(self) -> Option<&'static str> {
        match self {
            LineStyle::Solid => None,
            LineStyle::Dashed => Some("8 5"),
            LineStyle::Dotted => Some("2 4"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: LineStyle,
    /// Plot against the right-hand axis.
    pub secondary: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            style: LineStyle::Solid,
            secondary: false,
        }
    }

    pub fn styled(mut self, style: LineStyle) -> Self {
        self.style = style;
        self
    }

    pub fn on_secondary_axis(mut self) -> Self {
        self.secondary = true;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub y2_label: Option<String>,
    pub series: Vec<Series>,
}

#[derive(Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of<'a>(points: impl Iterator<Item = &'a f64>) -> Option<Self> {
        let mut r: Option<Range> = None;
        for &v in points.filter(|v| v.is_finite()) {
            r = Some(match r {
                None => Range { lo: v, hi: v },
                Some(r) => Range {
                    lo: r.lo.min(v),
                    hi: r.hi.max(v),
                },
            });
        }
        r
    }

    /// Widens degenerate ranges and anchors non-negative data at zero.
    fn padded(self, from_zero: bool) -> Self {
        let lo = if from_zero && self.lo >= 0.0 {
            0.0
        } else {
            self.lo
        };
        let hi = self.hi;
        if hi - lo > 0.0 {
            Range { lo, hi }
        } else {
            let pad = if hi == 0.0 { 1.0 } else { hi.abs() * 0.1 };
            Range {
                lo: lo - if from_zero && lo == 0.0 { 0.0 } else { pad },
                hi: hi + pad,
            }
        }
    }

    fn map(self, v: f64, out_lo: f64, out_hi: f64) -> f64 {
        out_lo + (v - self.lo) / (self.hi - self.lo) * (out_hi - out_lo)
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e6).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl LineChart {
    pub fn new(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, series: Series) {
        self.series.push(series);
    }

    pub fn to_svg(&self) -> String {
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let (x0, x1) = (LEFT, LEFT + plot_w);
        let (y0, y1) = (TOP + plot_h, TOP);

        let xs = Range::of(
            self.series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| &p.0)),
        )
        .unwrap_or(Range { lo: 0.0, hi: 1.0 })
        .padded(false);
        let axis = |secondary: bool| {
            Range::of(
                self.series
                    .iter()
                    .filter(|s| s.secondary == secondary)
                    .flat_map(|s| s.points.iter().map(|p| &p.1)),
            )
            .map(|r| r.padded(true))
        };
        let left = axis(false).unwrap_or(Range { lo: 0.0, hi: 1.0 });
        let right = axis(true);

        let mut svg = String::new();
        let w = &mut svg;
        let _ = writeln!(
            w,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            w,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            w,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(&self.title)
        );

        // Axes and grid.
        let _ = writeln!(w, r##"<g stroke="#333" stroke-width="1">"##);
        let _ = writeln!(w, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
        let _ = writeln!(w, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
        if right.is_some() {
            let _ = writeln!(w, r#"<line x1="{x1}" y1="{y0}" x2="{x1}" y2="{y1}"/>"#);
        }
        let _ = writeln!(w, "</g>");
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let xv = xs.lo + f * (xs.hi - xs.lo);
            let x = xs.map(xv, x0, x1);
            let _ = writeln!(
                w,
                r##"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="#333"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"##,
                y0 + 5.0,
                y0 + 20.0,
                tick_label(xv)
            );
            let yv = left.lo + f * (left.hi - left.lo);
            let y = left.map(yv, y0, y1);
            let _ = writeln!(
                w,
                r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
                x0 - 6.0,
                y + 4.0,
                tick_label(yv)
            );
            if let Some(r) = right {
                let v = r.lo + f * (r.hi - r.lo);
                let y = r.map(v, y0, y1);
                let _ = writeln!(
                    w,
                    r#"<text x="{}" y="{:.2}">{}</text>"#,
                    x1 + 6.0,
                    y + 4.0,
                    tick_label(v)
                );
            }
        }
        let _ = writeln!(
            w,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            w,
            r#"<text transform="translate(20 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + plot_h / 2.0,
            escape(&self.y_label)
        );
        if let (Some(_), Some(label)) = (right, &self.y2_label) {
            let _ = writeln!(
                w,
                r#"<text transform="translate({} {}) rotate(90)" text-anchor="middle">{}</text>"#,
                x1 + 60.0,
                TOP + plot_h / 2.0,
                escape(label)
            );
        }

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let ys = if s.secondary {
                right.unwrap_or(left)
            } else {
                left
            };
            let mut pts = String::new();
            for &(x, y) in s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
            {
                let _ = write!(pts, "{:.2},{:.2} ", xs.map(x, x0, x1), ys.map(y, y0, y1));
            }
            let dash = s
                .style
                .dasharray()
                .map(|d| format!(r#" stroke-dasharray="{d}""#))
                .unwrap_or_default();
            let _ = writeln!(
                w,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"><title>{}</title></polyline>"#,
                pts.trim_end(),
                escape(&s.label)
            );
            // Legend entry.
            let ly = TOP + 10.0 + 20.0 * i as f64;
            let lx = x1 + if right.is_some() { 80.0 } else { 20.0 };
            let _ = writeln!(
                w,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 24.0,
                lx + 30.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}
