//! Minimal SVG emitter for latent-trajectory figures: one polyline per
//! cycle, colored by mode. No plotting dependency; the figures stay
//! diffable text.

use oscmodes::linalg::Mat;

/// Fixed palette: known mode names get stable colors, anything else falls
/// back to the indexed cluster palette.
pub fn mode_color(label: &str) -> &'static str {
    match label {
        "IP" => "#1f77b4",
        "AP" => "#d62728",
        "DEATH" => "#2ca02c",
        "ROTATION" => "#ff7f0e",
        "PIP" => "#9467bd",
        _ => "#7f7f7f",
    }
}

const CLUSTER_PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub fn cluster_color(index: usize) -> &'static str {
    CLUSTER_PALETTE[index % CLUSTER_PALETTE.len()]
}

/// Render cycles as polylines in a 640×640 viewport with equal-range axes.
pub fn trajectory_svg(cycles: &[(Mat, &str)]) -> String {
    let (mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for (points, _) in cycles {
        for row in points.iter_rows() {
            lo_x = lo_x.min(row[0]);
            hi_x = hi_x.max(row[0]);
            lo_y = lo_y.min(row[1]);
            hi_y = hi_y.max(row[1]);
        }
    }
    if !lo_x.is_finite() {
        lo_x = 0.0;
        hi_x = 1.0;
        lo_y = 0.0;
        hi_y = 1.0;
    }
    let span_x = (hi_x - lo_x).max(1e-12);
    let span_y = (hi_y - lo_y).max(1e-12);
    let size = 640.0;
    let margin = 40.0;
    let scale = (size - 2.0 * margin) / span_x.max(span_y);
    let map = |x: f64, y: f64| {
        let px = margin + (x - lo_x) * scale;
        let py = size - margin - (y - lo_y) * scale;
        (px, py)
    };

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    ));
    out.push_str(&format!(
        "  <rect width=\"{size}\" height=\"{size}\" fill=\"white\"/>\n"
    ));
    for (points, color) in cycles {
        out.push_str("  <polyline fill=\"none\" stroke=\"");
        out.push_str(color);
        out.push_str("\" stroke-width=\"1\" points=\"");
        for (i, row) in points.iter_rows().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let (px, py) = map(row[0], row[1]);
            out.push_str(&format!("{px:.3},{py:.3}"));
        }
        out.push_str("\"/>\n");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_cycle() {
        let a = Mat::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        let b = Mat::from_rows(&[vec![0.5, -0.5], vec![0.2, 0.8]]);
        let svg = trajectory_svg(&[(a, "#112233"), (b, "#445566")]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("#112233"));
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn known_modes_have_stable_colors() {
        assert_eq!(mode_color("IP"), "#1f77b4");
        assert_ne!(mode_color("IP"), mode_color("AP"));
        assert_eq!(mode_color("unknown"), "#7f7f7f");
    }
}
