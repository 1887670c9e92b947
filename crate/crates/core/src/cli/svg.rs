//! Minimal deterministic SVG 1.1 writer for phase portraits.

use std::fmt::Write;

use crate::flow::BBox;
use crate::geom::Point2;

/// Legend classes: bold solid for the discriminant curve, solid for
/// geodesics, dotted for singular lines, dashed for isotropic lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layer {
    Strata,
    DoubleDirection,
    SCurve,
    SingularLine,
    Isotropic,
    Geodesic,
    Family,
}

impl Layer {
    fn style(self) -> &'static str {
        match self {
            Layer::Strata => "stroke=\"#000000\" stroke-width=\"2.5\"",
            Layer::DoubleDirection => "stroke=\"#000000\" stroke-width=\"2.5\"",
            Layer::SCurve => "stroke=\"#7a3a9a\" stroke-width=\"1.5\" stroke-dasharray=\"12 4 2 4\"",
            Layer::SingularLine => "stroke=\"#b03030\" stroke-width=\"1\" stroke-dasharray=\"1 3\"",
            Layer::Isotropic => "stroke=\"#207a40\" stroke-width=\"1\" stroke-dasharray=\"6 4\"",
            Layer::Geodesic => "stroke=\"#1f4e9e\" stroke-width=\"1\"",
            Layer::Family => "stroke=\"#c86400\" stroke-width=\"1.2\"",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Layer::Strata => "discriminant",
            Layer::DoubleDirection => "double-direction",
            Layer::SCurve => "s-curves",
            Layer::SingularLine => "singular-lines",
            Layer::Isotropic => "isotropic",
            Layer::Geodesic => "geodesics",
            Layer::Family => "family",
        }
    }
}

pub struct Svg {
    domain: BBox,
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(domain: BBox, width: f64) -> Self {
        let aspect = (domain.ymax - domain.ymin) / (domain.xmax - domain.xmin);
        Self { domain, width, height: (width * aspect).round().max(1.0), body: String::new() }
    }

    fn map(&self, p: Point2) -> (f64, f64) {
        let d = &self.domain;
        let u = (p[0] - d.xmin) / (d.xmax - d.xmin) * self.width;
        let v = (d.ymax - p[1]) / (d.ymax - d.ymin) * self.height;
        (u, v)
    }

    /// Adds a group of polylines, split wherever a point leaves the domain or
    /// is not finite.
    pub fn group(&mut self, layer: Layer, lines: &[Vec<Point2>]) {
        let _ = writeln!(self.body, "<g id=\"{}\" fill=\"none\" {}>", layer.name(), layer.style());
        for line in lines {
            let mut run: Vec<(f64, f64)> = Vec::new();
            for &p in line {
                if p[0].is_finite() && p[1].is_finite() && self.domain.contains(p[0], p[1]) {
                    run.push(self.map(p));
                } else {
                    self.flush(&mut run);
                }
            }
            self.flush(&mut run);
        }
        self.body.push_str("</g>\n");
    }

    fn flush(&mut self, run: &mut Vec<(f64, f64)>) {
        if run.len() >= 2 {
            self.body.push_str("<polyline points=\"");
            for (i, (u, v)) in run.iter().enumerate() {
                if i > 0 {
                    self.body.push(' ');
                }
                let _ = write!(self.body, "{u:.2},{v:.2}");
            }
            self.body.push_str("\"/>\n");
        }
        run.clear();
    }

    pub fn finish(self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
            w = self.width,
            h = self.height
        );
        let _ = writeln!(out, "<title>{}</title>", escape(title));
        let _ = writeln!(
            out,
            "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\" stroke=\"#888888\"/>",
            self.width, self.height
        );
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_are_split_at_the_border() {
        let mut svg = Svg::new(BBox::square(1.0), 100.0);
        svg.group(Layer::Geodesic, &[vec![[-0.5, 0.0], [0.0, 0.0], [2.0, 0.0], [0.5, 0.5], [0.6, 0.5]]]);
        let text = svg.finish("t");
        assert_eq!(text.matches("<polyline").count(), 2);
        assert!(text.contains("25.00,50.00 50.00,50.00"));
    }
}
