//! Phase-portrait assembly: strata, isotropic lines, singular lines,
//! geodesics and families, collected as polylines for the SVG writer.

use crate::berwald_moor::{adapted_from_immersion, bm_family_shoot, double_direction_locus, SurfaceImmersion};
use crate::flow::{
    integrate, isotropic_trace, shoot_family_at_m01, shoot_limit_member, BBox, GeodesicTrace, IntegratorConfig,
    PtmPoint,
};
use crate::geom::Point2;
use crate::metric::{PseudoFinslerMetric, Slope};
use crate::singular::{real_root_values, trace_discriminant_curve, trace_s_curves};

use super::config::{Mode, ScenarioConfig};
use super::svg::{Layer, Svg};
use super::{scenario_metric, CliError};

/// Family member as drawn: `alpha` is `None` for the limiting member.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyTrace {
    pub alpha: Option<f64>,
    pub trace: GeodesicTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Portrait {
    pub title: String,
    pub domain: BBox,
    pub curves: Vec<(Layer, Vec<Point2>)>,
    /// Geodesics from the configured seeds.
    pub geodesics: Vec<GeodesicTrace>,
    pub family: Vec<FamilyTrace>,
    /// Non-fatal problems (failed seeds, skipped layers).
    pub diagnostics: Vec<String>,
}

impl Portrait {
    pub fn to_svg(&self) -> String {
        let mut svg = Svg::new(self.domain, 800.0);
        let layers = [
            Layer::Strata,
            Layer::DoubleDirection,
            Layer::SCurve,
            Layer::SingularLine,
            Layer::Isotropic,
            Layer::Geodesic,
            Layer::Family,
        ];
        for layer in layers {
            let mut lines: Vec<Vec<Point2>> =
                self.curves.iter().filter(|(l, _)| *l == layer).map(|(_, c)| c.clone()).collect();
            if layer == Layer::Geodesic {
                lines.extend(self.geodesics.iter().map(GeodesicTrace::projection));
            }
            if layer == Layer::Family {
                lines.extend(self.family.iter().map(|f| f.trace.projection()));
            }
            if !lines.is_empty() {
                svg.group(layer, &lines);
            }
        }
        svg.finish(&self.title)
    }
}

fn grid(domain: BBox, k: usize) -> Vec<Point2> {
    let mut out = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let x = domain.xmin + (domain.xmax - domain.xmin) * (i as f64 + 0.5) / k as f64;
            let y = domain.ymin + (domain.ymax - domain.ymin) * (j as f64 + 0.5) / k as f64;
            out.push([x, y]);
        }
    }
    out
}

fn diag(d: BBox) -> f64 {
    (d.xmax - d.xmin).hypot(d.ymax - d.ymin)
}

/// Integral curve of the field of singular directions (real roots of Δ)
/// through `start` with initial slope `p`, followed both ways by Heun steps
/// in projected arclength, always continuing with the root nearest to the
/// current slope. Stops where the roots turn complex or at the domain edge.
pub fn trace_singular_line(m: &PseudoFinslerMetric, start: Point2, p: f64, domain: BBox, h: f64, max_len: f64) -> Vec<Point2> {
    let nearest_root = |x: f64, y: f64, p: f64| -> Option<f64> {
        let d = m.delta_poly(x, y).ok()?;
        real_root_values(&d).into_iter().min_by(|a, b| (a - p).abs().total_cmp(&(b - p).abs()))
    };
    let dir = |p: f64, sign: f64| {
        let n = 1.0f64.hypot(p);
        [sign / n, sign * p / n]
    };
    let mut halves = Vec::new();
    for sign in [1.0, -1.0] {
        let mut pts = vec![start];
        let (mut q, mut pc, mut len) = (start, p, 0.0);
        let mut d0 = dir(pc, sign);
        while len < max_len {
            let mid = [q[0] + h * d0[0], q[1] + h * d0[1]];
            let Some(pm) = nearest_root(mid[0], mid[1], pc) else { break };
            // Keep the orientation of travel continuous.
            let mut d1 = dir(pm, 1.0);
            if d1[0] * d0[0] + d1[1] * d0[1] < 0.0 {
                d1 = [-d1[0], -d1[1]];
            }
            let avg = [0.5 * (d0[0] + d1[0]), 0.5 * (d0[1] + d1[1])];
            let next = [q[0] + h * avg[0], q[1] + h * avg[1]];
            if !domain.contains(next[0], next[1]) {
                break;
            }
            let Some(pn) = nearest_root(next[0], next[1], pm) else { break };
            // Abandon the line where the chosen root jumps (roots merging).
            if (pn - pc).abs() > 0.5 * (1.0 + pc.abs()) {
                break;
            }
            let mut dn = dir(pn, 1.0);
            if dn[0] * avg[0] + dn[1] * avg[1] < 0.0 {
                dn = [-dn[0], -dn[1]];
            }
            q = next;
            pc = pn;
            d0 = dn;
            len += h;
            pts.push(q);
        }
        halves.push(pts);
    }
    let mut line: Vec<Point2> = halves[1].iter().rev().copied().collect();
    line.extend(halves[0].iter().skip(1));
    line
}

pub fn build_portrait(cfg: &ScenarioConfig) -> Result<Portrait, CliError> {
    let m = scenario_metric(cfg)?;
    let domain = cfg.domain;
    let mut curves = Vec::new();
    let mut diagnostics = Vec::new();

    for c in trace_discriminant_curve(&m, domain, cfg.resolution) {
        curves.push((Layer::Strata, c.points));
    }
    if cfg.mode == Mode::BerwaldMoor {
        let imm = SurfaceImmersion::new(cfg.immersion.clone())?;
        for i in 1..=imm.n() {
            for j in i + 1..=imm.n() {
                for c in double_direction_locus(&imm, i, j, domain, cfg.resolution)? {
                    curves.push((Layer::DoubleDirection, c.points));
                }
            }
        }
    }
    if cfg.mode == Mode::Metric && m.degree() == 3 {
        match trace_s_curves(&m, domain, cfg.resolution) {
            Ok(cs) => curves.extend(cs.into_iter().map(|c| (Layer::SCurve, c.points))),
            Err(e) => diagnostics.push(format!("s-curves skipped: {e}")),
        }
    }

    let len = diag(domain);
    for q in grid(domain, cfg.singular_grid) {
        let Ok(d) = m.delta_poly(q[0], q[1]) else { continue };
        if d.is_zero() {
            continue;
        }
        for p in real_root_values(&d) {
            let line = trace_singular_line(&m, q, p, domain, len / 400.0, len);
            if line.len() > 2 {
                curves.push((Layer::SingularLine, line));
            }
        }
    }

    let iso_cfg = IntegratorConfig { max_length: len, ..cfg.integrator };
    for q in grid(domain, cfg.isotropic_grid) {
        let Ok(roots) = m.isotropic_directions(q[0], q[1]) else { continue };
        for r in roots.iter().filter(|r| r.multiplicity == 1) {
            let start = match r.value {
                Slope::Finite(p) if p.abs() <= cfg.integrator.chart_threshold => PtmPoint::p_chart(q[0], q[1], p),
                Slope::Finite(p) => PtmPoint::q_chart(q[0], q[1], 1.0 / p),
                Slope::Infinite => PtmPoint::q_chart(q[0], q[1], 0.0),
            };
            match isotropic_trace(&m, start, &iso_cfg) {
                Ok(t) => curves.push((Layer::Isotropic, t.projection())),
                Err(e) => diagnostics.push(format!("isotropic seed ({}, {}): {e}", q[0], q[1])),
            }
        }
    }

    let mut geodesics = Vec::new();
    for s in &cfg.seeds {
        match integrate(&m, PtmPoint::p_chart(s[0], s[1], s[2]), &cfg.integrator) {
            Ok(t) => geodesics.push(t),
            Err(e) => diagnostics.push(format!("seed ({}, {}, {}): {e}", s[0], s[1], s[2])),
        }
    }

    let mut family = Vec::new();
    if let Some([x, y, p0]) = cfg.family {
        let members = shoot_family_at_m01(&m, [x, y], p0, &cfg.alphas, &cfg.integrator)?;
        family.extend(members.into_iter().map(|f| FamilyTrace { alpha: f.alpha, trace: f.trace }));
        let limit = shoot_limit_member(&m, [x, y], p0, &cfg.integrator)?;
        family.push(FamilyTrace { alpha: None, trace: limit.trace });
    }
    if let (Mode::BerwaldMoor, Some(y0)) = (cfg.mode, cfg.bm_y0) {
        let imm = SurfaceImmersion::new(cfg.immersion.clone())?;
        let (alm, _, residual) = adapted_from_immersion(&imm)?;
        if residual > 1e-12 {
            diagnostics.push(format!("adapted chart residual {residual:e}"));
        }
        for f in bm_family_shoot(&alm, y0, &cfg.alphas, cfg.family_extent, domain)? {
            family.push(FamilyTrace { alpha: Some(f.alpha), trace: f.trace });
        }
    }

    Ok(Portrait { title: cfg.name.clone(), domain, curves, geodesics, family, diagnostics })
}
