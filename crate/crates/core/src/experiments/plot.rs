use std::fmt::Write;

use crate::eval::MetricReport;

const BAR: f64 = 22.0;
const GAP: f64 = 18.0;
const HEIGHT: f64 = 240.0;
const LEFT: f64 = 48.0;
const TOP: f64 = 40.0;
const COLORS: [&str; 2] = ["#4477aa", "#ee6677"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Grouped bar chart of entity and relation F1 (percent) per row.
pub fn render_svg(title: &str, rows: &[(String, MetricReport)]) -> String {
    let group = 2.0 * BAR + GAP;
    let width = LEFT + group * rows.len().max(1) as f64 + 20.0;
    let total_height = TOP + HEIGHT + 70.0;
    let y = |pct: f64| TOP + HEIGHT * (1.0 - pct.clamp(0.0, 100.0) / 100.0);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{total_height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="{LEFT}" y="20" font-size="14">{}</text>"#, escape(title));
    for tick in (0..=100).step_by(20) {
        let ty = y(tick as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{ty:.1}" x2="{:.1}" y2="{ty:.1}" stroke="#dddddd"/><text x="{:.0}" y="{:.1}" text-anchor="end">{tick}</text>"##,
            width - 20.0,
            LEFT - 6.0,
            ty + 4.0
        );
    }
    for (i, (label, report)) in rows.iter().enumerate() {
        let x0 = LEFT + GAP / 2.0 + group * i as f64;
        for (j, value) in [report.entity.f1, report.relation.f1].into_iter().enumerate() {
            let pct = value * 100.0;
            let top = y(pct);
            let _ = writeln!(
                svg,
                r#"<rect x="{:.1}" y="{top:.1}" width="{BAR}" height="{:.1}" fill="{}"><title>{pct:.2}</title></rect>"#,
                x0 + BAR * j as f64,
                TOP + HEIGHT - top,
                COLORS[j]
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + BAR,
            TOP + HEIGHT + 16.0,
            escape(label)
        );
    }
    let ly = TOP + HEIGHT + 40.0;
    for (j, name) in ["entity F1", "relation F1"].iter().enumerate() {
        let lx = LEFT + 110.0 * j as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{:.0}" width="10" height="10" fill="{}"/><text x="{}" y="{ly:.0}">{name}</text>"#,
            ly - 9.0,
            COLORS[j],
            lx + 14.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
