//! SVG 1.1 plot of the transition-time bounds against `γ/m`.

use std::fmt::Write;

use crate::scenarios::Fig1Row;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

pub const DASH_TAU24: &str = "8,4";
pub const DASH_TAU25: &str = "2,3";

struct Axes {
    x0: f64,
    x1: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, g: f64) -> f64 {
        LEFT + (g.log10() - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - y / self.y1 * (HEIGHT - TOP - BOTTOM)
    }
}

fn series(out: &mut String, ax: &Axes, pts: &[(f64, f64)], id: &str, colour: &str, dash: Option<&str>) {
    let dash = dash.map(|d| format!(" stroke-dasharray=\"{d}\"")).unwrap_or_default();
    if pts.len() > 1 {
        let coords: Vec<String> = pts.iter().map(|(g, y)| format!("{:.2},{:.2}", ax.px(*g), ax.py(*y))).collect();
        let _ = writeln!(
            out,
            "  <polyline id=\"{id}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"{dash} points=\"{}\"/>",
            coords.join(" ")
        );
    }
    for (g, y) in pts {
        let _ = writeln!(
            out,
            "  <circle class=\"{id}-marker\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{colour}\"/>",
            ax.px(*g),
            ax.py(*y)
        );
    }
}

/// Log-x plot: `τ₂₄` dashed, `τ₂₅` dotted, the actual `τ` solid. Rows with
/// non-finite values are skipped.
pub fn fig1_svg(rows: &[Fig1Row]) -> String {
    let finite = |v: f64| v.is_finite();
    let grid: Vec<f64> = rows.iter().map(|r| r.gamma_over_m).filter(|g| *g > 0.0 && g.is_finite()).collect();
    let (mut x0, mut x1) = grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), g| {
        (a.min(g.log10().floor()), b.max(g.log10().ceil()))
    });
    if !x0.is_finite() {
        (x0, x1) = (-1.0, 1.0);
    }
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let ymax = rows
        .iter()
        .flat_map(|r| [r.tau24, r.tau25, r.tau_actual])
        .filter(|v| finite(*v))
        .fold(0.0f64, f64::max);
    let ax = Axes {
        x0,
        x1,
        y1: if ymax > 0.0 { 1.1 * ymax } else { 1.0 },
    };

    let mut out = String::new();
    let _ = writeln!(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let (bx, by) = (HEIGHT - BOTTOM, WIDTH - RIGHT);
    let _ = writeln!(
        out,
        "  <g id=\"axes\" stroke=\"black\"><line x1=\"{LEFT}\" y1=\"{bx}\" x2=\"{by}\" y2=\"{bx}\"/><line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{bx}\"/></g>"
    );
    let mut k = x0.ceil() as i32;
    while k as f64 <= x1 + 1e-9 {
        let x = ax.px(10f64.powi(k));
        let _ = writeln!(
            out,
            "  <line class=\"xtick\" x1=\"{x:.2}\" y1=\"{bx}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/><text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">1e{k}</text>",
            bx + 5.0,
            bx + 20.0
        );
        k += 1;
    }
    for i in 0..=5 {
        let y = ax.y1 * i as f64 / 5.0;
        let py = ax.py(y);
        let _ = writeln!(
            out,
            "  <line class=\"ytick\" x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{LEFT}\" y2=\"{py:.2}\" stroke=\"black\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{y:.2}</text>",
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        out,
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">γ/m [1/s]</text>",
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        "  <text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">time [s]</text>",
        (TOP + bx) / 2.0,
        (TOP + bx) / 2.0
    );

    let pick = |f: fn(&Fig1Row) -> f64| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.gamma_over_m > 0.0 && finite(f(r)))
            .map(|r| (r.gamma_over_m, f(r)))
            .collect()
    };
    let tau: Vec<(f64, f64)> = pick(|r| r.tau_actual);
    if let Some(&(_, t)) = tau.first() {
        let _ = writeln!(
            out,
            "  <line id=\"tau\" x1=\"{LEFT}\" y1=\"{:.2}\" x2=\"{by}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"2\"/>",
            ax.py(t),
            ax.py(t)
        );
    }
    series(&mut out, &ax, &pick(|r| r.tau24), "tau24", "#1f77b4", Some(DASH_TAU24));
    series(&mut out, &ax, &pick(|r| r.tau25), "tau25", "#d62728", Some(DASH_TAU25));

    let lx = WIDTH - RIGHT + 15.0;
    let entries = [
        ("τ (actual)", "black", None),
        ("τ₂₄", "#1f77b4", Some(DASH_TAU24)),
        ("τ₂₅", "#d62728", Some(DASH_TAU25)),
    ];
    let _ = writeln!(out, "  <g id=\"legend\">");
    for (i, (label, colour, dash)) in entries.iter().enumerate() {
        let y = TOP + 15.0 + 20.0 * i as f64;
        let dash = dash.map(|d| format!(" stroke-dasharray=\"{d}\"")).unwrap_or_default();
        let _ = writeln!(
            out,
            "    <line x1=\"{lx}\" y1=\"{y}\" x2=\"{:.1}\" y2=\"{y}\" stroke=\"{colour}\" stroke-width=\"2\"{dash}/><text x=\"{:.1}\" y=\"{:.1}\">{label}</text>",
            lx + 30.0,
            lx + 36.0,
            y + 4.0
        );
    }
    let _ = writeln!(out, "  </g>");
    let _ = writeln!(out, "</svg>");
    out
}
