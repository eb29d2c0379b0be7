//! Standalone SVG rendering of two ECDF step curves with dotted median markers.

use std::fmt::Write;

use crate::stats::EcdfCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 2] = ["#c0392b", "#2c6fb7"];
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders `(label, curve, median)` pairs on shared axes. The x range starts
/// at zero and ends at the largest sample value.
pub fn render_ecdf_svg(title: &str, x_label: &str, curves: [(&str, &EcdfCurve, f64); 2]) -> String {
    let x_max = curves
        .iter()
        .flat_map(|(_, c, _)| c.points.last().map(|p| p.value))
        .fold(0.0f64, f64::max);
    let x_max = if x_max > 0.0 { x_max } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v.max(0.0) / x_max) * plot_w;
    let sy = |f: f64| TOP + (1.0 - f) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    // axes and ticks
    let _ = writeln!(
        out,
        r#"<path d="M{LEFT:.1},{TOP:.1} V{:.1} H{:.1}" fill="none" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (x, y) = (sx(f * x_max), sy(f));
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0,
            f * x_max
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{f:.1}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">cumulative fraction</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (k, (label, curve, med)) in curves.iter().enumerate() {
        let color = COLORS[k];
        let mut d = format!("M{:.1},{:.1}", sx(0.0), sy(0.0));
        let mut prev = 0.0;
        for p in &curve.points {
            let x = sx(p.value);
            let _ = write!(d, " H{x:.1} V{:.1}", sy(p.fraction));
            prev = p.fraction;
        }
        let _ = write!(d, " H{:.1} V{:.1}", sx(x_max), sy(prev));
        let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        let mx = sx(*med);
        let _ = writeln!(
            out,
            r#"<line x1="{mx:.1}" y1="{:.1}" x2="{mx:.1}" y2="{:.1}" stroke="{color}" stroke-dasharray="2,3"/>"#,
            TOP,
            TOP + plot_h
        );
        let ly = TOP + plot_h - 40.0 + 18.0 * k as f64;
        let lx = LEFT + plot_w - 170.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{} (n={}, median {:.0})</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(label),
            curve.n,
            med
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ecdf;

    #[test]
    fn two_paths_and_dotted_medians() {
        let a = ecdf(&[1.0, 2.0, 4.0]).unwrap();
        let b = ecdf(&[3.0, 3.0]).unwrap();
        let svg = render_ecdf_svg("t <x>", "minutes", [("a", &a, 2.0), ("b", &b, 3.0)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        assert!(svg.contains("t &lt;x&gt;"));
        assert!(svg.contains("(n=3, median 2)"));
    }
}
