//! Shared rendering helpers: exact percent formatting, output manifests,
//! and a minimal static SVG scatter plot.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Read;
use std::path::Path;

/// Renders `count / total` as a percentage with one decimal, rounding half
/// up. Computed in integer arithmetic so .x5 boundaries never drift.
pub fn percent_1dp(count: u64, total: u64) -> String {
    if total == 0 {
        return "0.0".to_string();
    }
    let tenths = (2 * count * 1000 + total) / (2 * total);
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// Formats a p-value for reports: values below 0.001 print as `<0.001`,
/// matching the published style; otherwise three decimals.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

/// Marks significance at the 0.05 level.
pub fn significance_marker(p: f64) -> &'static str {
    if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Run manifest written beside every command's outputs. Contains no
/// timestamps so identical inputs and seed give byte-identical output
/// trees.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: Vec<ManifestInput>,
}

#[derive(Debug, Serialize)]
pub struct ManifestInput {
    pub path: String,
    pub sha256: String,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>) -> Manifest {
        Manifest {
            tool: "histent",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            inputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::open(path)?;
        let mut hasher = Sha256::new();
        let mut buf = [0u8; 8192];
        loop {
            let n = file.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
        self.inputs.push(ManifestInput {
            path: path.display().to_string(),
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization cannot fail")
    }
}

/// Emits a static SVG scatter plot of (x, y) points with axis labels.
pub fn scatter_svg(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 440.0;
    const M: f64 = 60.0; // margin
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in points {
        x_min = x_min.min(*x);
        x_max = x_max.max(*x);
        y_min = y_min.min(*y);
        y_max = y_max.max(*y);
    }
    if points.is_empty() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if (x_max - x_min).abs() < f64::EPSILON {
        x_max = x_min + 1.0;
    }
    if (y_max - y_min).abs() < f64::EPSILON {
        y_max = y_min + 1.0;
    }
    let sx = |x: f64| M + (x - x_min) / (x_max - x_min) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y_min) / (y_max - y_min) * (H - 2.0 * M);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
        W / 2.0
    ));
    svg.push_str(&format!(
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - M,
        W - M,
        H - M
    ));
    svg.push_str(&format!(
        "<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - M
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{x_label}</text>\n",
        W / 2.0,
        H - 16.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" \
         transform=\"rotate(-90 18 {})\">{y_label}</text>\n",
        H / 2.0,
        H / 2.0
    ));
    for tick in 0..=4 {
        let fx = x_min + (x_max - x_min) * f64::from(tick) / 4.0;
        let fy = y_min + (y_max - y_min) * f64::from(tick) / 4.0;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{fx:.1}</text>\n",
            sx(fx),
            H - M + 16.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{fy:.1}</text>\n",
            M - 6.0,
            sy(fy) + 4.0
        ));
    }
    for (x, y) in points {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\" fill-opacity=\"0.7\"/>\n",
            sx(*x),
            sy(*y)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(percent_1dp(746, 1449), "51.5");
        assert_eq!(percent_1dp(506, 1449), "34.9");
        assert_eq!(percent_1dp(1100, 1449), "75.9");
        assert_eq!(percent_1dp(1, 16), "6.3"); // 6.25 rounds up
        assert_eq!(percent_1dp(1, 8), "12.5");
        assert_eq!(percent_1dp(30, 9), "333.3");
        assert_eq!(percent_1dp(0, 7), "0.0");
        assert_eq!(percent_1dp(7, 7), "100.0");
    }

    #[test]
    fn p_formatting_matches_published_style() {
        assert_eq!(format_p(0.00004), "<0.001");
        assert_eq!(format_p(0.109), "0.109");
        assert_eq!(format_p(0.7436584), "0.744");
    }

    #[test]
    fn scatter_svg_is_well_formed() {
        let svg = scatter_svg("t", "x", "y", &[(1.0, 2.0), (3.0, 4.0)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
