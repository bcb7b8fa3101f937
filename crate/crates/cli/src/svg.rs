//! Static SVG plot emission: line/marker primitives only, no renderer, so
//! output bytes are a pure function of the data.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn px(v: f64) -> String {
    format!("{v:.2}")
}

struct Frame {
    x_label: &'static str,
    y_label: &'static str,
    /// Data ranges; both axes drawn with 0.2-step ticks.
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let (lo, hi) = self.x_range;
        MARGIN + (v - lo) / (hi - lo) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        let (lo, hi) = self.y_range;
        HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN)
    }

    fn render_axes(&self, out: &mut String, title: &str) {
        let x0 = px(MARGIN);
        let x1 = px(WIDTH - MARGIN);
        let y0 = px(HEIGHT - MARGIN);
        let y1 = px(MARGIN);
        let _ = writeln!(
            out,
            r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
        );
        for step in 0..=5 {
            let frac = step as f64 / 5.0;
            let xv = self.x_range.0 + frac * (self.x_range.1 - self.x_range.0);
            let yv = self.y_range.0 + frac * (self.y_range.1 - self.y_range.0);
            let xp = px(self.x(xv));
            let yp = px(self.y(yv));
            let _ = writeln!(
                out,
                r#"<line class="tick" x1="{xp}" y1="{y0}" x2="{xp}" y2="{}" stroke="black"/>"#,
                px(HEIGHT - MARGIN + 5.0)
            );
            let _ = writeln!(
                out,
                r#"<text class="tick-label" x="{xp}" y="{}" font-size="11" text-anchor="middle">{xv:.2}</text>"#,
                px(HEIGHT - MARGIN + 18.0)
            );
            let _ = writeln!(
                out,
                r#"<line class="tick" x1="{}" y1="{yp}" x2="{x0}" y2="{yp}" stroke="black"/>"#,
                px(MARGIN - 5.0)
            );
            let _ = writeln!(
                out,
                r#"<text class="tick-label" x="{}" y="{yp}" font-size="11" text-anchor="end">{yv:.2}</text>"#,
                px(MARGIN - 8.0)
            );
        }
        let _ = writeln!(
            out,
            r#"<text class="axis-label" x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
            px(WIDTH / 2.0),
            px(HEIGHT - 12.0),
            self.x_label
        );
        let _ = writeln!(
            out,
            r#"<text class="axis-label" x="14" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            px(HEIGHT / 2.0),
            px(HEIGHT / 2.0),
            self.y_label
        );
        let _ = writeln!(
            out,
            r#"<text class="title" x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
            px(WIDTH / 2.0),
            title
        );
    }
}

fn document(body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n{body}</svg>\n"
    )
}

/// One sweep point for plotting.
pub struct SweepPoint {
    pub unfairness: f64,
    pub fidelity: f64,
    pub on_front: bool,
}

/// Fidelity-vs-unfairness scatter with the non-dominated front drawn as a
/// polyline and the black-box's own unfairness as a vertical reference line
/// (its data coordinate is carried in `data-x`).
pub fn pareto_svg(points: &[SweepPoint], blackbox_unfairness: Option<f64>, title: &str) -> String {
    let frame = Frame {
        x_label: "unfairness",
        y_label: "fidelity",
        x_range: (0.0, 1.0),
        y_range: (0.0, 1.0),
    };
    let mut body = String::new();
    frame.render_axes(&mut body, title);

    if let Some(u) = blackbox_unfairness {
        let xp = px(frame.x(u));
        let _ = writeln!(
            body,
            r#"<line class="ref" data-x="{u}" x1="{xp}" y1="{}" x2="{xp}" y2="{}" stroke="crimson" stroke-dasharray="6 3"/>"#,
            px(HEIGHT - MARGIN),
            px(MARGIN)
        );
    }
    let mut front: Vec<&SweepPoint> = points.iter().filter(|p| p.on_front).collect();
    front.sort_by(|a, b| a.unfairness.partial_cmp(&b.unfairness).expect("finite"));
    if front.len() >= 2 {
        let path: Vec<String> = front
            .iter()
            .map(|p| format!("{},{}", px(frame.x(p.unfairness)), px(frame.y(p.fidelity))))
            .collect();
        let _ = writeln!(
            body,
            r#"<polyline class="front" points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
            path.join(" ")
        );
    }
    for p in points {
        let class = if p.on_front { "marker front-marker" } else { "marker" };
        let fill = if p.on_front { "steelblue" } else { "silver" };
        let _ = writeln!(
            body,
            r#"<circle class="{class}" cx="{}" cy="{}" r="3" fill="{fill}"/>"#,
            px(frame.x(p.unfairness)),
            px(frame.y(p.fidelity))
        );
    }
    document(&body)
}

/// One feasible range row for plotting.
pub struct RangePoint {
    pub fidelity: f64,
    pub min_disparity: f64,
    pub max_disparity: f64,
}

/// Disparity interval per fidelity level, with the black-box unfairness as a
/// horizontal reference line (data coordinate in `data-y`).
pub fn range_svg(rows: &[RangePoint], blackbox_unfairness: Option<f64>, title: &str) -> String {
    let frame = Frame {
        x_label: "fidelity",
        y_label: "signed disparity",
        x_range: (0.0, 1.0),
        y_range: (-1.0, 1.0),
    };
    let mut body = String::new();
    frame.render_axes(&mut body, title);

    let _ = writeln!(
        body,
        r#"<line class="zero" x1="{}" y1="{}" x2="{}" y2="{}" stroke="gainsboro"/>"#,
        px(MARGIN),
        px(frame.y(0.0)),
        px(WIDTH - MARGIN),
        px(frame.y(0.0))
    );
    if let Some(u) = blackbox_unfairness {
        let yp = px(frame.y(u));
        let _ = writeln!(
            body,
            r#"<line class="ref" data-y="{u}" x1="{}" y1="{yp}" x2="{}" y2="{yp}" stroke="crimson" stroke-dasharray="6 3"/>"#,
            px(MARGIN),
            px(WIDTH - MARGIN)
        );
    }
    let mut sorted: Vec<&RangePoint> = rows.iter().collect();
    sorted.sort_by(|a, b| a.fidelity.partial_cmp(&b.fidelity).expect("finite"));
    for (class, pick) in [
        ("range-min", &(|r: &RangePoint| r.min_disparity) as &dyn Fn(&RangePoint) -> f64),
        ("range-max", &|r: &RangePoint| r.max_disparity),
    ] {
        if sorted.len() >= 2 {
            let path: Vec<String> = sorted
                .iter()
                .map(|r| format!("{},{}", px(frame.x(r.fidelity)), px(frame.y(pick(r)))))
                .collect();
            let _ = writeln!(
                body,
                r#"<polyline class="{class}" points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
    }
    for r in &sorted {
        for v in [r.min_disparity, r.max_disparity] {
            let _ = writeln!(
                body,
                r#"<circle class="marker" cx="{}" cy="{}" r="3" fill="steelblue"/>"#,
                px(frame.x(r.fidelity)),
                px(frame.y(v))
            );
        }
    }
    document(&body)
}
