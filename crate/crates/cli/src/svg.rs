//! Static log-log SVG plots of convergence reports: one polyline per measured
//! quantity and one dashed fitted line per rate fit.

use crate::report::ConvergenceReport;
use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 48.0;

const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

struct SeriesSet {
    /// (label, color, points (x, y))
    series: Vec<(String, &'static str, Vec<(f64, f64)>)>,
    x_label: String,
}

fn collect_series(report: &ConvergenceReport) -> SeriesSet {
    let mut series: Vec<(String, &'static str, Vec<(f64, f64)>)> = Vec::new();
    let rows = &report.levels;
    let abscissa = report
        .fits
        .first()
        .map(|f| f.abscissa.clone())
        .unwrap_or_else(|| "h".to_string());
    let x_of = |row: &crate::report::LevelRow| if abscissa == "q" { row.q } else { row.h };

    let mut idx = 0;
    for (si, sigma) in report.config.sigmas.iter().enumerate() {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| {
                r.errors
                    .iter()
                    .find(|e| e.sigma == *sigma)
                    .filter(|e| e.value > 0.0)
                    .map(|e| (x_of(r), e.value))
            })
            .collect();
        if !pts.is_empty() {
            series.push((format!("sigma={sigma}"), PALETTE[si % PALETTE.len()], pts));
        }
        idx = si + 1;
    }
    let mut scalar = |label: &str, get: fn(&crate::report::LevelRow) -> Option<f64>| {
        let pts: Vec<(f64, f64)> =
            rows.iter().filter_map(|r| get(r).filter(|v| *v > 0.0).map(|v| (x_of(r), v))).collect();
        if !pts.is_empty() {
            series.push((label.to_string(), PALETTE[idx % PALETTE.len()], pts));
            idx += 1;
        }
    };
    scalar("lambda_min", |r| r.lambda_min);
    scalar("power_max", |r| r.power_max);
    scalar("e_ratio", |r| r.e_ratio);
    scalar("bernstein_max_ratio", |r| r.bernstein_max_ratio);
    SeriesSet { series, x_label: abscissa }
}

/// Render the report as a static log-log SVG plot.
pub fn render_loglog(report: &ConvergenceReport) -> String {
    let set = collect_series(report);
    let mut svg = String::new();
    write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    svg.push('\n');
    write!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    svg.push('\n');

    let all: Vec<(f64, f64)> =
        set.series.iter().flat_map(|(_, _, pts)| pts.iter().copied()).collect();
    if all.is_empty() {
        svg.push_str(r#"<text x="320" y="240" text-anchor="middle">no positive data</text>"#);
        svg.push_str("\n</svg>\n");
        return svg;
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &all {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if (x1 - x0).abs() < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if (y1 - y0).abs() < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad_x = 0.04 * (x1 - x0);
    let pad_y = 0.06 * (y1 - y0);
    x0 -= pad_x;
    x1 += pad_x;
    y0 -= pad_y;
    y1 += pad_y;

    let px = |lx: f64| MARGIN_L + (lx - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |ly: f64| HEIGHT - MARGIN_B - (ly - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

    // axes
    write!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        MARGIN_L,
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    )
    .unwrap();
    write!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        MARGIN_L, MARGIN_T, MARGIN_L, HEIGHT - MARGIN_B
    )
    .unwrap();
    svg.push('\n');

    // decade ticks
    for dx in (x0.ceil() as i64)..=(x1.floor() as i64) {
        let x = px(dx as f64);
        write!(
            svg,
            r#"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="#cccccc"/><text x="{x:.1}" y="{}" text-anchor="middle" font-size="11">1e{dx}</text>"#,
            MARGIN_T,
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 16.0
        )
        .unwrap();
        svg.push('\n');
    }
    for dy in (y0.ceil() as i64)..=(y1.floor() as i64) {
        let y = py(dy as f64);
        write!(
            svg,
            r#"<line x1="{}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#cccccc"/><text x="{}" y="{y:.1}" text-anchor="end" font-size="11">1e{dy}</text>"#,
            MARGIN_L,
            WIDTH - MARGIN_R,
            MARGIN_L - 6.0
        )
        .unwrap();
        svg.push('\n');
    }
    write!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 10.0,
        set.x_label
    )
    .unwrap();
    svg.push('\n');

    // data polylines
    for (label, color, pts) in &set.series {
        let mut path = String::new();
        for (x, y) in pts {
            write!(path, "{:.2},{:.2} ", px(x.log10()), py(y.log10())).unwrap();
        }
        write!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.trim_end()
        )
        .unwrap();
        svg.push('\n');
        for (x, y) in pts {
            write!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                px(x.log10()),
                py(y.log10())
            )
            .unwrap();
        }
        svg.push('\n');
        let (lx, ly) = pts[pts.len() - 1];
        write!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="{color}">{label}</text>"#,
            px(lx.log10()) + 6.0,
            py(ly.log10())
        )
        .unwrap();
        svg.push('\n');
    }

    // fitted dashed lines over the data range
    for (fi, fit) in report.fits.iter().enumerate() {
        let color = PALETTE[fi % PALETTE.len()];
        let lx0 = x0 + 0.02;
        let lx1 = x1 - 0.02;
        // log10 e = slope · log10 h + intercept/ln(10)
        let ly0 = fit.slope * lx0 + fit.intercept / std::f64::consts::LN_10;
        let ly1 = fit.slope * lx1 + fit.intercept / std::f64::consts::LN_10;
        write!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1" stroke-dasharray="6 4"/>"#,
            px(lx0),
            py(ly0),
            px(lx1),
            py(ly1)
        )
        .unwrap();
        svg.push('\n');
    }

    write!(
        svg,
        r#"<text x="{}" y="16" font-size="12">{} — {}</text>"#,
        MARGIN_L,
        report.config.kind.as_str(),
        report.config.kernel
    )
    .unwrap();
    svg.push_str("\n</svg>\n");
    svg
}
