//! Dependency-free SVG rendering of a binned distance distribution and
//! its power-law fit: a log-log scatter of the empirical (finely binned)
//! densities, the log-binned points the fit actually used, and the fitted
//! line, with the separation point marked when the double model is
//! chosen.
//!
//! Output is a pure function of its inputs; all coordinates are written
//! with fixed precision so identical inputs yield identical bytes.

use std::fmt::Write as _;

use crate::distfit::{BinnedDistribution, DoublePowerLawFit, ModelChoice};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 70.0;

struct LogAxes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl LogAxes {
    fn x_px(&self, d: f64) -> f64 {
        let t = (d.log10() - self.x0) / (self.x1 - self.x0);
        MARGIN_LEFT + t * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y_px(&self, density: f64) -> f64 {
        let t = (density.log10() - self.y0) / (self.y1 - self.y0);
        MARGIN_TOP + (1.0 - t) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn fmt_px(v: f64) -> String {
    format!("{v:.2}")
}

fn decade_label(exp: i64) -> String {
    format!("1e{exp}")
}

/// Render the distribution and fit as an SVG document.
///
/// `fine` optionally supplies a higher-resolution binning of the same
/// distances, drawn as the raw empirical scatter behind the binned
/// points.
pub fn render_fit_svg(
    binned: &BinnedDistribution,
    fine: Option<&BinnedDistribution>,
    fit: &DoublePowerLawFit,
    title: &str,
) -> String {
    let mut positive: Vec<f64> = binned
        .densities
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .collect();
    if let Some(f) = fine {
        positive.extend(f.densities.iter().copied().filter(|&d| d > 0.0));
    }
    let d_lo = binned.edges[0];
    let d_hi = *binned.edges.last().expect("edges non-empty");
    let (p_lo, p_hi) = positive
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(p), hi.max(p))
        });

    let axes = LogAxes {
        x0: d_lo.log10().floor(),
        x1: d_hi.log10().ceil(),
        y0: p_lo.log10().floor(),
        y1: p_hi.log10().ceil(),
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="28" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        fmt_px(WIDTH / 2.0),
        xml_escape(title)
    );

    // Decade gridlines and tick labels.
    let plot_bottom = HEIGHT - MARGIN_BOTTOM;
    for exp in (axes.x0 as i64)..=(axes.x1 as i64) {
        let x = fmt_px(axes.x_px(10f64.powi(exp as i32)));
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="{MARGIN_TOP}" x2="{x}" y2="{plot_bottom}" stroke="#dddddd" stroke-width="1"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            fmt_px(plot_bottom + 20.0),
            decade_label(exp)
        );
    }
    let plot_right = WIDTH - MARGIN_RIGHT;
    for exp in (axes.y0 as i64)..=(axes.y1 as i64) {
        let y = fmt_px(axes.y_px(10f64.powi(exp as i32)));
        let _ = writeln!(
            svg,
            r#"<line x1="{MARGIN_LEFT}" y1="{y}" x2="{plot_right}" y2="{y}" stroke="#dddddd" stroke-width="1"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            fmt_px(MARGIN_LEFT - 8.0),
            decade_label(exp)
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{}" height="{}" fill="none" stroke="black" stroke-width="1"/>"#,
        fmt_px(WIDTH - MARGIN_LEFT - MARGIN_RIGHT),
        fmt_px(HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    );

    // Axis titles.
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">distance d [km]</text>"#,
        fmt_px((MARGIN_LEFT + plot_right) / 2.0),
        fmt_px(HEIGHT - 18.0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="22" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle" transform="rotate(-90 22 {})">P(D=d) [1/km]</text>"#,
        fmt_px((MARGIN_TOP + plot_bottom) / 2.0),
        fmt_px((MARGIN_TOP + plot_bottom) / 2.0)
    );

    // Raw empirical scatter (fine binning), behind everything else.
    if let Some(f) = fine {
        for i in 0..f.n_bins() {
            if f.densities[i] > 0.0 {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{}" cy="{}" r="2" fill="#b0b0b0"/>"#,
                    fmt_px(axes.x_px(f.centers[i])),
                    fmt_px(axes.y_px(f.densities[i]))
                );
            }
        }
    }

    // Log-binned points.
    for i in 0..binned.n_bins() {
        if binned.densities[i] > 0.0 {
            let _ = writeln!(
                svg,
                r#"<circle cx="{}" cy="{}" r="4" fill="none" stroke="#1f5fbf" stroke-width="1.5"/>"#,
                fmt_px(axes.x_px(binned.centers[i])),
                fmt_px(axes.y_px(binned.densities[i]))
            );
        }
    }

    // Fitted line(s): straight segments in log-log space.
    let mut fit_line = |seg: &crate::distfit::PowerLawSegment, from: f64, to: f64| {
        let y_from = seg.density_at(from);
        let y_to = seg.density_at(to);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#c93434" stroke-width="2"/>"#,
            fmt_px(axes.x_px(from)),
            fmt_px(axes.y_px(y_from)),
            fmt_px(axes.x_px(to)),
            fmt_px(axes.y_px(y_to))
        );
    };
    match fit.model_choice {
        ModelChoice::Double => {
            fit_line(&fit.intra, d_lo, fit.d_s);
            fit_line(&fit.inter, fit.d_s, d_hi);
        }
        ModelChoice::Single => {
            if let Some(single) = &fit.single_fallback {
                fit_line(single, d_lo, d_hi);
            }
        }
    }

    // Separation point marker and caption.
    let caption = match fit.model_choice {
        ModelChoice::Double => {
            let x = fmt_px(axes.x_px(fit.d_s));
            let _ = writeln!(
                svg,
                r#"<line x1="{x}" y1="{MARGIN_TOP}" x2="{x}" y2="{plot_bottom}" stroke="#c93434" stroke-width="1" stroke-dasharray="5,4"/>"#
            );
            format!(
                "gamma1={:.3}  gamma2={:.3}  d_s={:.2} km",
                fit.intra.gamma, fit.inter.gamma, fit.d_s
            )
        }
        ModelChoice::Single => match &fit.single_fallback {
            Some(s) => format!("single power law, gamma={:.3}", s.gamma),
            None => "single power law".to_string(),
        },
    };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="end">{}</text>"#,
        fmt_px(plot_right - 8.0),
        fmt_px(MARGIN_TOP + 20.0),
        caption
    );

    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
