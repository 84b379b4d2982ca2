//! Hand-emitted SVG charts. Plotted values are repeated verbatim in `data-*`
//! attributes so a chart can be checked against the data it came from.

use std::fmt::Write;

use fabtune::world::{RobotModel, Scenario, TrajectoryLog};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

pub fn escape(s: &str) -> String {
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

/// Text that may appear inside `<!-- -->`.
fn comment_safe(s: &str) -> String {
    let mut out = s.replace("--", "- -");
    if out.ends_with('-') {
        out.push(' ');
    }
    out
}

/// Exact decimal form of a value for data attributes; `inf` for +∞.
pub fn data_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "inf".into()
    } else if v < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

struct Doc {
    out: String,
}

impl Doc {
    fn new(width: f64, height: f64, title: &str, meta: &[(&str, String)]) -> Self {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        for (k, v) in meta {
            let _ = writeln!(out, "<!-- {}: {} -->", comment_safe(k), comment_safe(v));
        }
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">"
        );
        let _ = writeln!(out, "<title>{}</title>", escape(title));
        let _ = writeln!(out, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
            width / 2.0,
            escape(title)
        );
        Self { out }
    }

    fn line(&mut self, s: String) {
        self.out.push_str(&s);
        self.out.push('\n');
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Linear map from data to pixels.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn map(&self, v: f64) -> f64 {
        let t = if self.hi > self.lo { (v - self.lo) / (self.hi - self.lo) } else { 0.5 };
        self.px_lo + t * (self.px_hi - self.px_lo)
    }

    fn ticks(&self, count: usize) -> Vec<f64> {
        let span = self.hi - self.lo;
        if span <= 0.0 {
            return vec![self.lo];
        }
        let raw = span / count as f64;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() * step;
        (0..)
            .map(|i| first + i as f64 * step)
            .take_while(|v| *v <= self.hi + 1e-9 * span)
            .collect()
    }
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    format!("{v:.decimals$}")
}

/// Padded data range of the finite values, or `[0, 1]` when there are none.
fn value_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

fn frame(doc: &mut Doc, x: &Axis, y: &Axis, x_label: &str, y_label: &str, x_ticks: bool) {
    doc.line(format!(
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    ));
    let yt = y.ticks(5);
    let ystep = if yt.len() > 1 { yt[1] - yt[0] } else { 1.0 };
    for v in &yt {
        let py = y.map(*v);
        doc.line(format!(
            "<line x1=\"{}\" y1=\"{py:.2}\" x2=\"{LEFT}\" y2=\"{py:.2}\" stroke=\"#444\"/><text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick_label(*v, ystep)
        ));
    }
    if x_ticks {
        let xt = x.ticks(6);
        let xstep = if xt.len() > 1 { xt[1] - xt[0] } else { 1.0 };
        let base = HEIGHT - BOTTOM;
        for v in &xt {
            let px = x.map(*v);
            doc.line(format!(
                "<line x1=\"{px:.2}\" y1=\"{base}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"#444\"/><text x=\"{px:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
                base + 5.0,
                base + 18.0,
                tick_label(*v, xstep)
            ));
        }
    }
    doc.line(format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    doc.line(format!(
        "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>",
        TOP + (HEIGHT - TOP - BOTTOM) / 2.0,
        escape(y_label)
    ));
}

/// Cost of every trial as a marker, plus the best-so-far step line.
/// Non-finite costs are pinned to the top edge.
pub fn history(costs: &[f64], running_best: &[f64], title: &str, meta: &[(&str, String)]) -> String {
    let mut doc = Doc::new(WIDTH, HEIGHT, title, meta);
    let n = costs.len();
    let x = Axis {
        lo: -0.5,
        hi: n.max(1) as f64 - 0.5,
        px_lo: LEFT,
        px_hi: WIDTH - RIGHT,
    };
    let (lo, hi) = value_range(costs.iter().copied());
    let y = Axis {
        lo,
        hi,
        px_lo: HEIGHT - BOTTOM,
        px_hi: TOP,
    };
    frame(&mut doc, &x, &y, "trial", "cost", true);

    doc.line("<g class=\"trials\" fill=\"#1f77b4\">".into());
    for (i, &c) in costs.iter().enumerate() {
        let (py, class) = if c.is_finite() { (y.map(c), "trial") } else { (TOP, "trial failed") };
        doc.line(format!(
            "<circle class=\"{class}\" data-trial=\"{i}\" data-cost=\"{}\" cx=\"{:.2}\" cy=\"{py:.2}\" r=\"3\"/>",
            data_num(c),
            x.map(i as f64)
        ));
    }
    doc.line("</g>".into());

    let mut d = String::new();
    for (i, &b) in running_best.iter().enumerate() {
        if !b.is_finite() {
            continue;
        }
        let (px, py) = (x.map(i as f64), y.map(b));
        if d.is_empty() {
            let _ = write!(d, "M{px:.2},{py:.2}");
        } else {
            let _ = write!(d, " H{px:.2} V{py:.2}");
        }
    }
    if running_best.last().is_some_and(|b| b.is_finite()) {
        let _ = write!(d, " H{:.2}", x.map(n as f64 - 0.5));
    }
    let values: Vec<String> = running_best.iter().map(|v| data_num(*v)).collect();
    doc.line(format!(
        "<path class=\"best-so-far\" data-values=\"{}\" d=\"{d}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>",
        values.join(" ")
    ));
    doc.finish()
}

/// Five-number summary of the finite costs of one source.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub failed: usize,
}

impl BoxStats {
    pub fn of(costs: &[f64]) -> Option<Self> {
        use statrs::statistics::{Data, Max, Min, OrderStatistics};
        let finite: Vec<f64> = costs.iter().copied().filter(|c| c.is_finite()).collect();
        if finite.is_empty() {
            return None;
        }
        let failed = costs.len() - finite.len();
        let mut data = Data::new(finite);
        Some(Self {
            min: data.min(),
            q1: data.lower_quartile(),
            median: data.median(),
            q3: data.upper_quartile(),
            max: data.max(),
            failed,
        })
    }
}

/// One box per source over its per-scenario costs.
pub fn boxplot(sources: &[(String, Vec<f64>)], title: &str, meta: &[(&str, String)]) -> String {
    let mut doc = Doc::new(WIDTH, HEIGHT, title, meta);
    let k = sources.len().max(1);
    let x = Axis {
        lo: -0.5,
        hi: k as f64 - 0.5,
        px_lo: LEFT,
        px_hi: WIDTH - RIGHT,
    };
    let (lo, hi) = value_range(sources.iter().flat_map(|(_, c)| c.iter().copied()));
    let y = Axis {
        lo,
        hi,
        px_lo: HEIGHT - BOTTOM,
        px_hi: TOP,
    };
    frame(&mut doc, &x, &y, "source", "test objective", false);
    let half = 0.25 * (x.map(1.0) - x.map(0.0));
    for (i, (name, costs)) in sources.iter().enumerate() {
        let cx = x.map(i as f64);
        let base = HEIGHT - BOTTOM;
        doc.line(format!(
            "<text x=\"{cx:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            base + 18.0,
            escape(name)
        ));
        match BoxStats::of(costs) {
            Some(s) => {
                doc.line(format!(
                    "<g class=\"box\" data-source=\"{}\" data-n=\"{}\" data-failed=\"{}\" data-min=\"{}\" data-q1=\"{}\" data-median=\"{}\" data-q3=\"{}\" data-max=\"{}\">",
                    escape(name),
                    costs.len(),
                    s.failed,
                    data_num(s.min),
                    data_num(s.q1),
                    data_num(s.median),
                    data_num(s.q3),
                    data_num(s.max)
                ));
                let (y1, y3) = (y.map(s.q1), y.map(s.q3));
                doc.line(format!(
                    "<line class=\"whisker\" x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"#444\"/>",
                    y.map(s.min),
                    y.map(s.max)
                ));
                doc.line(format!(
                    "<rect x=\"{:.2}\" y=\"{y3:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#aec7e8\" stroke=\"#444\"/>",
                    cx - half,
                    2.0 * half,
                    (y1 - y3).max(0.5)
                ));
                let ym = y.map(s.median);
                doc.line(format!(
                    "<line class=\"median\" x1=\"{:.2}\" y1=\"{ym:.2}\" x2=\"{:.2}\" y2=\"{ym:.2}\" stroke=\"#d62728\" stroke-width=\"2\"/>",
                    cx - half,
                    cx + half
                ));
            }
            None => doc.line(format!(
                "<g class=\"box\" data-source=\"{}\" data-n=\"{}\" data-failed=\"{}\">",
                escape(name),
                costs.len(),
                costs.len()
            )),
        }
        for (j, &c) in costs.iter().enumerate() {
            let (py, class) = if c.is_finite() { (y.map(c), "point") } else { (TOP, "point failed") };
            doc.line(format!(
                "<circle class=\"{class}\" data-scenario=\"{j}\" data-cost=\"{}\" cx=\"{:.2}\" cy=\"{py:.2}\" r=\"2.5\" fill=\"#333\" fill-opacity=\"0.6\"/>",
                data_num(c),
                cx + half * 1.4
            ));
        }
        doc.line("</g>".into());
    }
    doc.finish()
}

/// Workspace view: obstacles, goal, end-effector path and the arm at the
/// first and last logged steps.
pub fn trajectory(
    robot: &RobotModel,
    scenario: &Scenario,
    log: &TrajectoryLog,
    title: &str,
    meta: &[(&str, String)],
) -> String {
    let size = 480.0;
    let margin = 30.0;
    let mut doc = Doc::new(size, size + 20.0, title, meta);
    let extent = scenario
        .obstacles
        .iter()
        .map(|o| o.center[0].abs().max(o.center[1].abs()) + o.radius)
        .fold(robot.reach(), f64::max)
        + 0.1;
    let scale = (size - 2.0 * margin) / (2.0 * extent);
    let px = |p: [f64; 2]| (size / 2.0 + p[0] * scale, 20.0 + size / 2.0 - p[1] * scale);
    for (j, o) in scenario.obstacles.iter().enumerate() {
        let (cx, cy) = px(o.center);
        doc.line(format!(
            "<circle class=\"obstacle\" data-index=\"{j}\" data-center=\"{} {}\" data-radius=\"{}\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\" fill=\"#999\"/>",
            data_num(o.center[0]),
            data_num(o.center[1]),
            data_num(o.radius),
            o.radius * scale
        ));
    }
    let (gx, gy) = px(scenario.goal);
    doc.line(format!(
        "<circle class=\"goal\" data-goal=\"{} {}\" cx=\"{gx:.2}\" cy=\"{gy:.2}\" r=\"5\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\"/>",
        data_num(scenario.goal[0]),
        data_num(scenario.goal[1])
    ));
    let points: Vec<String> = log
        .ee_path()
        .iter()
        .map(|p| {
            let (x, y) = px(*p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    doc.line(format!(
        "<polyline class=\"ee-path\" data-steps=\"{}\" points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>",
        log.entries.len(),
        points.join(" ")
    ));
    if let (Some(first), Some(last)) = (log.entries.first(), log.entries.last()) {
        for (label, q, color) in [("start", &first.q, "#7f7f7f"), ("end", &last.q, "#ff7f0e")] {
            let mut joints = vec![[0.0, 0.0]];
            joints.extend(robot.joint_positions(q));
            let pts: Vec<String> = joints
                .iter()
                .map(|p| {
                    let (x, y) = px(*p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            doc.line(format!(
                "<polyline class=\"arm {label}\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"3\" stroke-linejoin=\"round\"/>",
                pts.join(" ")
            ));
        }
    }
    doc.finish()
}
