use std::fmt::Write;

use super::LabeledCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const X_MIN: f64 = 0.125;
const X_MAX: f64 = 8.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn x_pos(fp: f64) -> f64 {
    let t = (fp.clamp(X_MIN, X_MAX) / X_MIN).log2() / (X_MAX / X_MIN).log2();
    LEFT + t * (WIDTH - LEFT - RIGHT)
}

fn y_pos(sensitivity: f64) -> f64 {
    HEIGHT - BOTTOM - sensitivity.clamp(0.0, 1.0) * (HEIGHT - TOP - BOTTOM)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Step plot of sensitivity against false positives per scan on a log axis.
pub fn froc_svg(curves: &[LabeledCurve]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let (x0, x1, y0, y1) = (x_pos(X_MIN), x_pos(X_MAX), y_pos(0.0), y_pos(1.0));
    let mut tick = X_MIN;
    while tick <= X_MAX {
        let x = x_pos(tick);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{y1:.1}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{tick}</text>"#,
            y0 + 16.0
        );
        tick *= 2.0;
    }
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = y_pos(v);
        let _ = writeln!(
            s,
            r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">False positives per scan</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">Sensitivity</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        let mut level = 0.0;
        let _ = write!(path, "M{:.2},{:.2}", x_pos(X_MIN), y_pos(0.0));
        for p in &c.curve.points {
            let x = x_pos(p.fp_per_scan);
            let _ = write!(
                path,
                " L{x:.2},{:.2} L{x:.2},{:.2}",
                y_pos(level),
                y_pos(p.sensitivity)
            );
            level = p.sensitivity;
        }
        let _ = write!(path, " L{:.2},{:.2}", x_pos(X_MAX), y_pos(level));
        let _ = writeln!(
            s,
            r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" class="legend">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{FrocCurve, FrocPoint};

    fn labeled(label: &str) -> LabeledCurve {
        LabeledCurve {
            label: label.into(),
            curve: FrocCurve {
                points: vec![FrocPoint {
                    threshold: 0.5,
                    tp: 1,
                    fp: 2,
                    sensitivity: 0.5,
                    fp_per_scan: 1.0,
                }],
                n_scans: 2,
                n_positives: 2,
            },
        }
    }

    #[test]
    fn one_path_and_legend_entry_per_curve() {
        let svg = froc_svg(&[labeled("base"), labeled("3 <stages>")]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<path").count(), 2);
        assert_eq!(svg.matches(r#"class="legend""#).count(), 2);
        assert!(svg.contains("3 &lt;stages&gt;"));
    }

    #[test]
    fn log_axis_ends() {
        assert_eq!(x_pos(0.125), LEFT);
        assert_eq!(x_pos(8.0), WIDTH - RIGHT);
        assert!((x_pos(1.0) - (LEFT + 0.5 * (WIDTH - LEFT - RIGHT))).abs() < 1e-9);
    }
}
