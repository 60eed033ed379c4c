//! Minimal static SVG line charts: panels laid out on a grid, each with
//! axes, ticks, labels, optional vertical markers and a legend.

const PANEL_W: f64 = 440.0;
const PANEL_H: f64 = 320.0;
const ML: f64 = 62.0;
const MR: f64 = 14.0;
const MT: f64 = 30.0;
const MB: f64 = 46.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub v_lines: Vec<f64>,
}

impl Panel {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Panel {
        Panel {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            series: Vec::new(),
            v_lines: Vec::new(),
        }
    }

    pub fn add(&mut self, label: &str, points: Vec<(f64, f64)>) {
        self.series.push(Series {
            label: label.to_string(),
            points,
        });
    }
}

fn finite(v: f64) -> bool {
    v.is_finite()
}

fn data_range(panel: &Panel) -> ((f64, f64), (f64, f64)) {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &panel.series {
        for &(x, y) in &s.points {
            if finite(x) && finite(y) {
                xs = (xs.0.min(x), xs.1.max(x));
                ys = (ys.0.min(y), ys.1.max(y));
            }
        }
    }
    for &x in &panel.v_lines {
        if finite(x) {
            xs = (xs.0.min(x), xs.1.max(x));
        }
    }
    if xs.0 > xs.1 {
        xs = (0.0, 1.0);
        ys = (0.0, 1.0);
    }
    if xs.1 - xs.0 < 1e-300 {
        xs = (xs.0 - 1.0, xs.1 + 1.0);
    }
    if ys.1 - ys.0 < 1e-300 {
        let pad = 1.0f64.max(ys.0.abs() * 0.1);
        ys = (ys.0 - pad, ys.1 + pad);
    } else {
        let pad = (ys.1 - ys.0) * 0.06;
        ys = (ys.0 - pad, ys.1 + pad);
    }
    (xs, ys)
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 4.5;
    let mag = 10f64.powf(raw.log10().floor());
    let n = raw / mag;
    let s = if n < 1.5 {
        1.0
    } else if n < 3.5 {
        2.0
    } else if n < 7.5 {
        5.0
    } else {
        10.0
    };
    s * mag
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s == "-0" || s.starts_with("-0.") && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn ticks(lo: f64, hi: f64) -> (f64, Vec<f64>) {
    let step = nice_step(hi - lo);
    let mut out = Vec::new();
    let mut k = (lo / step).ceil() as i64;
    while (k as f64) * step <= hi + step * 1e-9 {
        out.push(k as f64 * step);
        k += 1;
    }
    (step, out)
}

fn decimate(points: &[(f64, f64)], cap: usize) -> Vec<(f64, f64)> {
    if points.len() <= cap {
        return points.to_vec();
    }
    let stride = points.len() / cap + 1;
    let mut out: Vec<(f64, f64)> = points.iter().copied().step_by(stride).collect();
    if let Some(&last) = points.last() {
        if out.last() != Some(&last) {
            out.push(last);
        }
    }
    out
}

fn render_panel(out: &mut String, panel: &Panel, x0: f64, y0: f64) {
    use std::fmt::Write;
    let ((xlo, xhi), (ylo, yhi)) = data_range(panel);
    let px = |x: f64| x0 + ML + (x - xlo) / (xhi - xlo) * (PANEL_W - ML - MR);
    let py = |y: f64| y0 + PANEL_H - MB - (y - ylo) / (yhi - ylo) * (PANEL_H - MT - MB);
    let left = x0 + ML;
    let right = x0 + PANEL_W - MR;
    let top = y0 + MT;
    let bot = y0 + PANEL_H - MB;

    let (xstep, xticks) = ticks(xlo, xhi);
    let (ystep, yticks) = ticks(ylo, yhi);
    for &t in &xticks {
        let x = px(t);
        let _ = write!(
            out,
            "<line x1='{x:.2}' y1='{top:.2}' x2='{x:.2}' y2='{bot:.2}' stroke='#e0e0e0'/>\
             <text x='{x:.2}' y='{:.2}' font-size='11' text-anchor='middle'>{}</text>",
            bot + 15.0,
            fmt_tick(t, xstep)
        );
    }
    for &t in &yticks {
        let y = py(t);
        let _ = write!(
            out,
            "<line x1='{left:.2}' y1='{y:.2}' x2='{right:.2}' y2='{y:.2}' stroke='#e0e0e0'/>\
             <text x='{:.2}' y='{:.2}' font-size='11' text-anchor='end'>{}</text>",
            left - 6.0,
            y + 4.0,
            fmt_tick(t, ystep)
        );
    }
    for &v in &panel.v_lines {
        let x = px(v);
        let _ = write!(
            out,
            "<line x1='{x:.2}' y1='{top:.2}' x2='{x:.2}' y2='{bot:.2}' \
             stroke='#999999' stroke-dasharray='4 3'/>"
        );
    }
    let _ = write!(
        out,
        "<rect x='{left:.2}' y='{top:.2}' width='{:.2}' height='{:.2}' \
         fill='none' stroke='#333333'/>",
        right - left,
        bot - top
    );
    let _ = write!(
        out,
        "<text x='{:.2}' y='{:.2}' font-size='13' text-anchor='middle' font-weight='bold'>{}</text>",
        x0 + PANEL_W / 2.0,
        y0 + 18.0,
        panel.title
    );
    let _ = write!(
        out,
        "<text x='{:.2}' y='{:.2}' font-size='12' text-anchor='middle'>{}</text>",
        x0 + PANEL_W / 2.0,
        y0 + PANEL_H - 10.0,
        panel.x_label
    );
    let _ = write!(
        out,
        "<text x='{:.2}' y='{:.2}' font-size='12' text-anchor='middle' \
         transform='rotate(-90 {:.2} {:.2})'>{}</text>",
        x0 + 14.0,
        (top + bot) / 2.0,
        x0 + 14.0,
        (top + bot) / 2.0,
        panel.y_label
    );

    for (i, s) in panel.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts = decimate(&s.points, 2500);
        let mut run = String::new();
        let flush = |run: &mut String, out: &mut String| {
            if !run.is_empty() {
                let _ = write!(
                    out,
                    "<polyline fill='none' stroke='{color}' stroke-width='1.5' points='{run}'/>"
                );
                run.clear();
            }
        };
        for &(x, y) in &pts {
            if finite(x) && finite(y) {
                let _ = write!(run, "{:.2},{:.2} ", px(x), py(y));
            } else {
                flush(&mut run, out);
            }
        }
        flush(&mut run, out);
    }
    for (i, s) in panel.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = top + 14.0 + 16.0 * i as f64;
        let _ = write!(
            out,
            "<line x1='{:.2}' y1='{:.2}' x2='{:.2}' y2='{:.2}' stroke='{color}' stroke-width='2'/>\
             <text x='{:.2}' y='{:.2}' font-size='11'>{}</text>",
            right - 118.0,
            ly,
            right - 96.0,
            ly,
            right - 90.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders panels on a `cols`-wide grid into a standalone SVG document.
pub fn render(panels: &[Panel], cols: usize) -> String {
    let cols = cols.max(1);
    let rows = panels.len().div_ceil(cols);
    let w = PANEL_W * cols.min(panels.len().max(1)) as f64;
    let h = PANEL_H * rows.max(1) as f64;
    let mut out = format!(
        "<svg xmlns='http://www.w3.org/2000/svg' width='{w}' height='{h}' \
         viewBox='0 0 {w} {h}' font-family='sans-serif'>\
         <rect width='{w}' height='{h}' fill='white'/>"
    );
    for (i, p) in panels.iter().enumerate() {
        let x0 = (i % cols) as f64 * PANEL_W;
        let y0 = (i / cols) as f64 * PANEL_H;
        render_panel(&mut out, p, x0, y0);
    }
    out.push_str("</svg>\n");
    out
}
