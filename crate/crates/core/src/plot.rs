//! Self-contained SVG scatter plots of bivariate samples.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::closed::ClosedModel;
use crate::compound::CompoundModel;
use crate::error::{Error, Result};
use crate::montecarlo::SampleBatch;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSpec {
    /// Coordinate on the horizontal axis.
    pub j: usize,
    /// Coordinate on the vertical axis.
    pub i: usize,
    pub title: String,
    /// Theoretical regression curve `(x_j, E(X_i | X_j = x_j))`.
    pub curve: Vec<(f64, f64)>,
    /// Slope reference printed in the corner, typically `p_i / p_j`.
    pub slope: f64,
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    /// Data extent widened by 5% on each side.
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi <= lo {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad }
    }

    fn scale(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render the `(X_j, X_i)` pairs of a two-dimensional batch with the
/// theoretical regression curve on top. Repeated points are drawn once.
pub fn scatter_svg(batch: &SampleBatch, spec: &ScatterSpec) -> Result<String> {
    if batch.dim() != 2 {
        return Err(Error::Domain(format!(
            "scatter plots need two coordinates, the batch has {}",
            batch.dim()
        )));
    }
    if spec.i > 1 || spec.j > 1 {
        return Err(Error::InvalidParameter("scatter coordinates must be 0 or 1".into()));
    }
    let mut multiplicity: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for row in &batch.draws {
        *multiplicity.entry((row[spec.j], row[spec.i])).or_default() += 1;
    }
    let xa = Axis::new(multiplicity.keys().map(|k| k.0 as f64));
    let ya = Axis::new(multiplicity.keys().map(|k| k.1 as f64));
    let px = |v: f64| xa.scale(v, LEFT, WIDTH - RIGHT);
    let py = |v: f64| ya.scale(v, HEIGHT - BOTTOM, TOP);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}"/></clipPath></defs>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&spec.title)
    );

    // axes and ticks
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT} {TOP} V{:.2} H{:.2}" fill="none" stroke="black"/>"#,
        HEIGHT - BOTTOM,
        WIDTH - RIGHT
    );
    for t in 0..=TICKS {
        let fx = xa.lo + (xa.hi - xa.lo) * t as f64 / TICKS as f64;
        let x = px(fx);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{fx:.1}</text>"#,
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 5.0,
            HEIGHT - BOTTOM + 18.0
        );
        let fy = ya.lo + (ya.hi - ya.lo) * t as f64 / TICKS as f64;
        let y = py(fy);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{fy:.1}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">x{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 12.0,
        spec.j + 1
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">x{}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        spec.i + 1
    );

    let _ = writeln!(svg, r##"<g fill="#1f77b4" fill-opacity="0.6" stroke="none">"##);
    for (&(x, y), _) in &multiplicity {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#, px(x as f64), py(y as f64));
    }
    let _ = writeln!(svg, "</g>");

    if spec.curve.len() >= 2 {
        let mut d = String::new();
        for (t, (x, y)) in spec.curve.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if t == 0 { "M" } else { " L" }, px(*x), py(*y));
        }
        let _ = writeln!(
            svg,
            r##"<path d="{d}" fill="none" stroke="#d62728" stroke-width="2" clip-path="url(#plot)"/>"##
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="start">slope p{}/p{} = {:.4}</text>"#,
        LEFT + 10.0,
        TOP + 16.0,
        spec.i + 1,
        spec.j + 1,
        spec.slope
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Scatter of `(X_2, X_1)` for a bivariate model with the exact regression
/// `E(X_1 | X_2 = x)` drawn over the sampled range of `X_2`.
pub fn model_scatter_svg(model: &CompoundModel, batch: &SampleBatch, eps: f64) -> Result<String> {
    if model.dim() != 2 || batch.dim() != 2 {
        return Err(Error::Domain(format!(
            "scatter plots need two coordinates, the model has {}",
            model.dim()
        )));
    }
    let lo = batch.draws.iter().map(|r| r[1]).min().unwrap_or(0);
    let hi = batch.draws.iter().map(|r| r[1]).max().unwrap_or(0);
    let curve = ClosedModel::from(model)
        .regression_curve(0, 1, lo..=hi, 1e-12, eps)?
        .into_iter()
        .map(|(x, y)| (x as f64, y))
        .collect();
    let p = model.summand().probs();
    let spec = ScatterSpec {
        j: 1,
        i: 0,
        title: model.to_string(),
        curve,
        slope: p[0] / p[1],
    };
    scatter_svg(batch, &spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(draws: Vec<Vec<u64>>) -> SampleBatch {
        let n = draws.len();
        SampleBatch {
            draws,
            counts: vec![1; n],
            seed: 0,
            model: "test".into(),
        }
    }

    fn spec() -> ScatterSpec {
        ScatterSpec {
            j: 1,
            i: 0,
            title: "a < b".into(),
            curve: vec![(0.0, 0.0), (4.0, 2.0)],
            slope: 0.5,
        }
    }

    #[test]
    fn renders_unique_points_and_curve() {
        let b = batch(vec![vec![1, 2], vec![1, 2], vec![3, 4], vec![0, 0]]);
        let svg = scatter_svg(&b, &spec()).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("slope p1/p2 = 0.5000"));
        assert!(svg.contains(r##"stroke="#d62728""##));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn axes_cover_data_with_margin() {
        let b = batch(vec![vec![0, 0], vec![10, 20]]);
        let svg = scatter_svg(&b, &spec()).unwrap();
        // extremes map strictly inside the plotting area
        assert!(svg.contains(r#"cx="85.45""#), "{svg}");
        assert!(svg.contains(r#"cx="594.55""#));
    }

    #[test]
    fn rejects_other_dimensions() {
        let b = batch(vec![vec![1, 2, 3]]);
        assert!(matches!(scatter_svg(&b, &spec()), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_data_still_renders() {
        let b = batch(vec![vec![2, 2]; 5]);
        assert!(scatter_svg(&b, &spec()).is_ok());
    }
}
