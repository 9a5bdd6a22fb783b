//! Minimal SVG output for the grid heatmaps and mean-field curves.

use std::fmt::Write as _;

use sirnet_core::meanfield::MeanFieldCurve;

use crate::experiments::GridResult;

/// Which statistic a heatmap shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    /// Fraction of trials that never reach the size threshold.
    Left,
    /// Mean max relative error, masked cells drawn as a black square with a white X.
    Right,
}

/// Color scale range for the right panel (log scale).
pub const ERROR_SCALE: (f64, f64) = (0.01, 10.0);

const CELL: f64 = 48.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

// Anchor colors from low to high, linearly interpolated.
const RAMP: [(u8, u8, u8); 5] = [
    (68, 1, 84),
    (59, 82, 139),
    (33, 145, 140),
    (94, 201, 98),
    (253, 231, 37),
];

fn ramp(x: f64) -> String {
    let x = x.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - i as f64;
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn error_position(err: f64) -> f64 {
    let (lo, hi) = ERROR_SCALE;
    (err.max(lo).ln() - lo.ln()) / (hi.ln() - lo.ln())
}

/// Columns are `d` values, rows are `λ` values with the largest at the top.
pub fn render_heatmap(grid: &GridResult, panel: Panel) -> String {
    let ds = &grid.config.d_values;
    let lambdas = &grid.config.lambda_values;
    let width = MARGIN_LEFT + CELL * ds.len() as f64 + 20.0;
    let height = MARGIN_TOP + CELL * lambdas.len() as f64 + MARGIN_BOTTOM;
    let title = match panel {
        Panel::Left => "fraction of trials with T0 = inf",
        Panel::Right => "mean max relative error (log scale 0.01 to 10)",
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<text x="{MARGIN_LEFT}" y="20" font-size="13">{title}</text>"#);
    for (col, &d) in ds.iter().enumerate() {
        for (row, &lambda) in lambdas.iter().rev().enumerate() {
            let x = MARGIN_LEFT + CELL * col as f64;
            let y = MARGIN_TOP + CELL * row as f64;
            let Some(cell) = grid.cell(d, lambda) else { continue };
            let fill = match panel {
                Panel::Left => Some(ramp(cell.prop_t0_inf())),
                Panel::Right => cell.mean_max_rel_err.map(|e| ramp(error_position(e))),
            };
            match fill {
                Some(color) => {
                    let _ = writeln!(
                        out,
                        r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{color}" stroke="white"/>"#
                    );
                }
                None => {
                    let (x1, y1, x2, y2) = (x + 10.0, y + 10.0, x + CELL - 10.0, y + CELL - 10.0);
                    let _ = writeln!(
                        out,
                        r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="black" stroke="white"/>"#
                    );
                    let _ = writeln!(
                        out,
                        r#"<path class="mask" d="M{x1} {y1} L{x2} {y2} M{x2} {y1} L{x1} {y2}" stroke="white" stroke-width="3"/>"#
                    );
                }
            }
        }
        let x = MARGIN_LEFT + CELL * (col as f64 + 0.5);
        let y = MARGIN_TOP + CELL * lambdas.len() as f64 + 16.0;
        let _ = writeln!(out, r#"<text x="{x}" y="{y}" text-anchor="middle">{d}</text>"#);
    }
    for (row, &lambda) in lambdas.iter().rev().enumerate() {
        let y = MARGIN_TOP + CELL * (row as f64 + 0.5) + 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}" text-anchor="end">{lambda}</text>"#,
            MARGIN_LEFT - 6.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">d</text>"#,
        MARGIN_LEFT + CELL * ds.len() as f64 / 2.0,
        height - 14.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">lambda</text>"#,
        MARGIN_TOP + CELL * lambdas.len() as f64 / 2.0,
        MARGIN_TOP + CELL * lambdas.len() as f64 / 2.0
    );
    out.push_str("</svg>\n");
    out
}

/// `σ`, `ι` and `ρ` against time.
pub fn render_curve(curve: &MeanFieldCurve) -> String {
    let (w, h, pad) = (640.0, 400.0, 40.0);
    let t_end = curve.times.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let stride = (curve.len() / 800).max(1);
    let line = |values: &[f64]| {
        let mut points = String::new();
        for i in (0..curve.len()).step_by(stride).chain([curve.len().saturating_sub(1)]) {
            let x = pad + (w - 2.0 * pad) * curve.times[i] / t_end;
            let y = h - pad - (h - 2.0 * pad) * values[i];
            let _ = write!(points, "{x:.2},{y:.2} ");
        }
        points
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="gray"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    for (name, values, color) in [("sigma", &curve.sigma, "#1f77b4"), ("iota", &curve.iota, "#d62728"), ("rho", &curve.rho, "#2ca02c")] {
        let _ = writeln!(
            out,
            r#"<polyline class="{name}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            line(values).trim_end()
        );
    }
    let _ = writeln!(out, r#"<text x="{pad}" y="{}">0</text>"#, h - pad + 14.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">t = {t_end}</text>"#, w - pad, h - pad + 14.0);
    let _ = writeln!(out, r#"<text x="{pad}" y="{}">sigma (blue), iota (red), rho (green)</text>"#, pad - 8.0);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{CellResult, Figure1Config};

    fn one_cell(mean: Option<f64>, t0_infinite: u64) -> GridResult {
        let config = Figure1Config {
            d_values: vec![4],
            lambda_values: vec![0.5],
            ..Figure1Config::default()
        };
        GridResult {
            config,
            cells: vec![CellResult {
                d: 4,
                kappa: 4,
                lambda: 0.5,
                mu: 1.0,
                trials: 100,
                t0_infinite,
                broke_count: if mean.is_some() { 3 } else { 90 },
                mean_max_rel_err: mean,
            }],
        }
    }

    #[test]
    fn single_cells() {
        let svg = render_heatmap(&one_cell(Some(0.2), 0), Panel::Left);
        assert_eq!(svg.matches("<rect").count(), 1);
        assert!(!svg.contains("class=\"mask\""));
        let svg = render_heatmap(&one_cell(None, 90), Panel::Right);
        assert!(svg.contains("fill=\"black\"") && svg.contains("class=\"mask\""));
        // The left panel never masks.
        assert!(!render_heatmap(&one_cell(None, 90), Panel::Left).contains("class=\"mask\""));
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), "#440154");
        assert_eq!(ramp(1.0), "#fde725");
        assert_eq!(ramp(7.0), ramp(1.0));
        assert_eq!(error_position(0.001), 0.0);
        assert!((error_position(10.0) - 1.0).abs() < 1e-12);
    }
}
