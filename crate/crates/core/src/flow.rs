//! Integration of the geodesic direction field on the projectivized tangent
//! bundle, in two affine charts, with event detection.
//!
//! In the P-chart the field is `(Δ, pΔ, P)` in `(x, y, p)`; in the Q-chart it is
//! `(qΔ̃, Δ̃, P̃)` in `(x, y, q)`, built from the reversed-coefficient metric
//! with the roles of `x` and `y` exchanged. Mapped to the P-chart the Q-field
//! equals `q^{2n−3}` times the P-field, so an orientation sign is carried
//! across chart switches.

use std::fmt::{self, Write as _};

use nalgebra::Vector3;
use thiserror::Error;

use crate::geom::{self, Point2};
use crate::metric::{delta_and_p, Chart, MetricError, PseudoFinslerMetric, Stratum};
use crate::ode::{bisect, Step, StepFailure, Stepper, Tolerances};
use crate::singular;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("start point ({x}, {y}) lies outside the domain box")]
    OutsideDomain { x: f64, y: f64 },
    #[error("start point is not isotropic: |F| = {f}")]
    NotIsotropic { f: f64 },
    #[error("arc touches the isotropic surface at sample {index}")]
    IsotropicSegment { index: usize },
    #[error("point ({x}, {y}) is not on the regular part of the discriminant curve ({stratum})")]
    NotOnM01 { x: f64, y: f64, stratum: Stratum },
    #[error("slope {p0} is not a double isotropic direction")]
    NotDoubleRoot { p0: f64 },
    #[error("isotropic direction {p0} is not transverse to the discriminant curve (|∇D·v| = {value})")]
    NotTransverse { p0: f64, value: f64 },
    #[error("shooting only supports finite slopes with |p0| <= {threshold}")]
    UnsupportedSlope { threshold: f64 },
    #[error("shooting did not converge for alpha = {alpha}: {reason}")]
    Shooting { alpha: f64, reason: String },
    #[error("tangent-bundle oracle undefined at start (H = {h})")]
    OracleDegenerate { h: f64 },
}

/// Point of the projectivized tangent bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtmPoint {
    pub x: f64,
    pub y: f64,
    /// `p = dy/dx` in the P-chart, `q = dx/dy` in the Q-chart.
    pub slope: f64,
    pub chart: Chart,
}

impl PtmPoint {
    pub fn p_chart(x: f64, y: f64, p: f64) -> Self {
        Self { x, y, slope: p, chart: Chart::P }
    }

    pub fn q_chart(x: f64, y: f64, q: f64) -> Self {
        Self { x, y, slope: q, chart: Chart::Q }
    }

    /// The same direction in `chart`, `None` when the slope is zero.
    pub fn in_chart(&self, chart: Chart) -> Option<Self> {
        if chart == self.chart {
            return Some(*self);
        }
        (self.slope != 0.0).then(|| Self { x: self.x, y: self.y, slope: 1.0 / self.slope, chart })
    }

    /// `dy/dx`, infinite for a vertical direction.
    pub fn p(&self) -> f64 {
        match self.chart {
            Chart::P => self.slope,
            Chart::Q => 1.0 / self.slope,
        }
    }

    pub fn xy(&self) -> Point2 {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BBox {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Self { xmin, xmax, ymin, ymax }
    }

    pub fn square(r: f64) -> Self {
        Self::new(-r, r, -r, r)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.margin(x, y) >= 0.0
    }

    /// Signed distance to the boundary, positive inside.
    pub fn margin(&self, x: f64, y: f64) -> f64 {
        (x - self.xmin).min(self.xmax - x).min(y - self.ymin).min(self.ymax - y)
    }

    pub fn is_nonempty(&self) -> bool {
        self.xmin < self.xmax && self.ymin < self.ymax
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub tol: Tolerances,
    pub max_steps: usize,
    /// Switch charts once `|slope|` exceeds this value.
    pub chart_threshold: f64,
    /// Relative threshold for `‖(Δ, P)‖` that stops a trace near a singular point.
    pub event_tol: f64,
    /// Isotropy tolerance on `|F|`.
    pub isotropy_tol: f64,
    pub domain: BBox,
    /// Longest projected chord between consecutive samples.
    pub max_seg: f64,
    /// Stop after this much projected arclength per direction.
    pub max_length: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            max_steps: 20_000,
            chart_threshold: 2.0,
            event_tol: 1e-8,
            isotropy_tol: 1e-10,
            domain: BBox::square(1.0),
            max_seg: 0.01,
            max_length: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Cusp,
    SingularApproach,
    ChartSwitch,
    IsotropicCross,
    DomainExit,
    StepUnderflow,
    FieldUndefined,
    ProjectionFailed,
    MaxSteps,
    MaxLength,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventKind::Cusp => "cusp",
            EventKind::SingularApproach => "singular-approach",
            EventKind::ChartSwitch => "chart-switch",
            EventKind::IsotropicCross => "isotropic-cross",
            EventKind::DomainExit => "domain-exit",
            EventKind::StepUnderflow => "step-underflow",
            EventKind::FieldUndefined => "field-undefined",
            EventKind::ProjectionFailed => "projection-failed",
            EventKind::MaxSteps => "max-steps",
            EventKind::MaxLength => "max-length",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub index: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub pt: PtmPoint,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeodesicTrace {
    pub points: Vec<TracePoint>,
    pub events: Vec<TraceEvent>,
}

impl GeodesicTrace {
    pub fn projection(&self) -> Vec<Point2> {
        self.points.iter().map(|p| p.pt.xy()).collect()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn has_event(&self, kind: EventKind) -> bool {
        self.events_of(kind).next().is_some()
    }

    /// The trace run backwards.
    pub fn reversed(&self) -> Self {
        let last = self.points.len().saturating_sub(1);
        let points = self.points.iter().rev().map(|p| TracePoint { t: -p.t, pt: p.pt }).collect();
        let mut events: Vec<TraceEvent> =
            self.events.iter().map(|e| TraceEvent { index: last - e.index, kind: e.kind }).collect();
        events.sort_by_key(|e| e.index);
        Self { points, events }
    }

    /// CSV with columns `t,x,y,slope,chart,F,Delta,P,event`.
    pub fn to_csv(&self, m: &PseudoFinslerMetric) -> String {
        let mut out = String::from("t,x,y,slope,chart,F,Delta,P,event\n");
        for (i, tp) in self.points.iter().enumerate() {
            let pt = tp.pt;
            let v = chart_values(m, pt.chart, pt.x, pt.y, pt.slope).ok();
            let (f, d, p) = v.map_or((f64::NAN, f64::NAN, f64::NAN), |v| (v.f, v.delta, v.p));
            let ev: Vec<String> =
                self.events.iter().filter(|e| e.index == i).map(|e| e.kind.to_string()).collect();
            let _ = writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{},{:.6e},{:.6e},{:.6e},{}",
                tp.t,
                pt.x,
                pt.y,
                pt.slope,
                pt.chart,
                f,
                d,
                p,
                ev.join("|")
            );
        }
        out
    }
}

/// Δ, P and F of the metric in a chart at a point, plus the coefficient scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartValues {
    pub delta: f64,
    pub p: f64,
    pub f: f64,
    pub f_s: f64,
    pub scale: f64,
}

impl ChartValues {
    fn singular_threshold(&self, event_tol: f64) -> f64 {
        event_tol * (1.0 + self.scale).powi(2)
    }

    fn is_singular(&self, event_tol: f64) -> bool {
        self.delta.hypot(self.p) < self.singular_threshold(event_tol)
    }
}

pub fn chart_values(m: &PseudoFinslerMetric, chart: Chart, x: f64, y: f64, s: f64) -> Result<ChartValues, MetricError> {
    let jet = m.jet(chart, x, y)?;
    let (delta, p) = delta_and_p(m.degree(), &jet, &s);
    let (f, f_s) = jet.a.iter().rev().fold((0.0, 0.0), |(f, d), &c| (f * s + c, d * s + f));
    Ok(ChartValues { delta, p, f, f_s, scale: jet.scale() })
}

fn chart_field(chart: Chart, s: f64, v: &ChartValues) -> [f64; 3] {
    match chart {
        Chart::P => [v.delta, s * v.delta, v.p],
        Chart::Q => [s * v.delta, v.delta, v.p],
    }
}

/// The field components `(dx, dy, dslope)` in the point's chart.
pub fn field_at(m: &PseudoFinslerMetric, pt: PtmPoint) -> Result<[f64; 3], MetricError> {
    let v = chart_values(m, pt.chart, pt.x, pt.y, pt.slope)?;
    Ok(chart_field(pt.chart, pt.slope, &v))
}

/// The field mapped to `(dx, dy, dp)` coordinates, for comparing charts.
pub fn field_in_p_coords(m: &PseudoFinslerMetric, pt: PtmPoint) -> Result<[f64; 3], MetricError> {
    let f = field_at(m, pt)?;
    Ok(match pt.chart {
        Chart::P => f,
        Chart::Q => [f[0], f[1], -f[2] / (pt.slope * pt.slope)],
    })
}

struct HalfTrace {
    points: Vec<TracePoint>,
    events: Vec<TraceEvent>,
}

fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Integrates from `start` along `sigma` times the field.
fn half_trace(
    m: &PseudoFinslerMetric,
    start: PtmPoint,
    sigma: f64,
    cfg: &IntegratorConfig,
    project_isotropic: bool,
) -> Result<HalfTrace, MetricError> {
    let mut chart = start.chart;
    let mut sigma = sigma;
    let mut stepper = Stepper::new([start.x, start.y, start.slope], cfg.tol);
    let mut points = vec![TracePoint { t: 0.0, pt: start }];
    let mut events = Vec::new();
    let mut length = 0.0;
    let mut prev = chart_values(m, chart, start.x, start.y, start.slope)?;
    if prev.is_singular(cfg.event_tol) {
        events.push(TraceEvent { index: 0, kind: EventKind::SingularApproach });
        return Ok(HalfTrace { points, events });
    }

    let stop = |points: &Vec<TracePoint>, events: &mut Vec<TraceEvent>, kind| {
        events.push(TraceEvent { index: points.len() - 1, kind });
    };

    for _ in 0..cfg.max_steps {
        let ch = chart;
        let sg = sigma;
        let mut field = |y: &[f64; 3]| -> Option<[f64; 3]> {
            let v = chart_values(m, ch, y[0], y[1], y[2]).ok()?;
            let f = chart_field(ch, y[2], &v);
            Some([sg * f[0], sg * f[1], sg * f[2]])
        };
        let step = match stepper.step(&mut field) {
            Ok(s) => s,
            Err(StepFailure::Field) => {
                stop(&points, &mut events, EventKind::FieldUndefined);
                return Ok(HalfTrace { points, events });
            }
            Err(StepFailure::Underflow { .. }) => {
                stop(&points, &mut events, EventKind::StepUnderflow);
                return Ok(HalfTrace { points, events });
            }
        };

        let at = |theta: f64| {
            let s = step.at(theta);
            (s, chart_values(m, ch, s[0], s[1], s[2]))
        };
        let t_of = |theta: f64| sigma * (step.t0 + theta * step.h);
        let pt_of = |s: [f64; 3]| PtmPoint { x: s[0], y: s[1], slope: s[2], chart: ch };

        let k = subdivisions(&step, cfg.max_seg);
        let mut theta_prev = 0.0;
        for j in 1..=k {
            let theta = j as f64 / k as f64;
            let (s, v) = at(theta);
            let v = match v {
                Ok(v) => v,
                Err(_) => {
                    stop(&points, &mut events, EventKind::FieldUndefined);
                    return Ok(HalfTrace { points, events });
                }
            };

            if !cfg.domain.contains(s[0], s[1]) {
                let th = bisect(
                    |th| {
                        let s = step.at(th);
                        cfg.domain.margin(s[0], s[1])
                    },
                    theta_prev,
                    theta,
                    1e-12,
                );
                // Land just inside the box.
                let mut th_in = th;
                let mut s_in = step.at(th_in);
                while !cfg.domain.contains(s_in[0], s_in[1]) && th_in > theta_prev {
                    th_in -= 1e-12;
                    s_in = step.at(th_in.max(theta_prev));
                }
                points.push(TracePoint { t: t_of(th_in), pt: pt_of(s_in) });
                stop(&points, &mut events, EventKind::DomainExit);
                return Ok(HalfTrace { points, events });
            }

            // Sub-interval events, in order of occurrence.
            let mut inner: Vec<(f64, EventKind)> = Vec::new();
            if prev.delta != 0.0 && v.delta != 0.0 && (prev.delta > 0.0) != (v.delta > 0.0) {
                let th = bisect(
                    |th| at(th).1.map_or(0.0, |v| v.delta),
                    theta_prev,
                    theta,
                    1e-10 / step.h.abs().max(1e-300),
                );
                if let Ok(vc) = at(th).1 {
                    if vc.p.abs() > vc.singular_threshold(cfg.event_tol) {
                        inner.push((th, EventKind::Cusp));
                    }
                }
            }
            let iso = cfg.isotropy_tol;
            if prev.f.abs() > iso && v.f.abs() > iso && (prev.f > 0.0) != (v.f > 0.0) {
                let th = bisect(|th| at(th).1.map_or(0.0, |v| v.f), theta_prev, theta, 1e-12);
                inner.push((th, EventKind::IsotropicCross));
            }
            inner.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (th, kind) in inner {
                let si = step.at(th);
                length += geom::dist(points.last().unwrap().pt.xy(), [si[0], si[1]]);
                points.push(TracePoint { t: t_of(th), pt: pt_of(si) });
                stop(&points, &mut events, kind);
            }

            length += geom::dist(points.last().unwrap().pt.xy(), [s[0], s[1]]);
            points.push(TracePoint { t: t_of(theta), pt: pt_of(s) });
            prev = v;
            theta_prev = theta;

            if v.is_singular(cfg.event_tol) {
                stop(&points, &mut events, EventKind::SingularApproach);
                return Ok(HalfTrace { points, events });
            }
            if length > cfg.max_length {
                stop(&points, &mut events, EventKind::MaxLength);
                return Ok(HalfTrace { points, events });
            }
        }

        // Drift control on the isotropic surface.
        if project_isotropic && prev.f.abs() > 10.0 * cfg.isotropy_tol {
            let mut s = stepper.y;
            let mut v = prev;
            for _ in 0..8 {
                if v.f.abs() <= cfg.isotropy_tol {
                    break;
                }
                if v.f_s.abs() < 1e-12 * (1.0 + v.scale) {
                    stop(&points, &mut events, EventKind::ProjectionFailed);
                    return Ok(HalfTrace { points, events });
                }
                s[2] -= v.f / v.f_s;
                v = chart_values(m, ch, s[0], s[1], s[2])?;
            }
            if v.f.abs() > 10.0 * cfg.isotropy_tol {
                stop(&points, &mut events, EventKind::ProjectionFailed);
                return Ok(HalfTrace { points, events });
            }
            stepper.reset_state(s);
            points.last_mut().unwrap().pt = pt_of(s);
            prev = v;
        }

        // Chart switch.
        let s = stepper.y;
        if s[2].abs() > cfg.chart_threshold {
            sigma *= sign(s[2]);
            chart = chart.other();
            let ns = [s[0], s[1], 1.0 / s[2]];
            stepper.reset_state(ns);
            stepper.h = cfg.tol.h_init;
            let last = points.last_mut().unwrap();
            last.pt = PtmPoint { x: ns[0], y: ns[1], slope: ns[2], chart };
            stop(&points, &mut events, EventKind::ChartSwitch);
            prev = chart_values(m, chart, ns[0], ns[1], ns[2])?;
        }
    }
    stop(&points, &mut events, EventKind::MaxSteps);
    Ok(HalfTrace { points, events })
}

fn subdivisions<const D: usize>(step: &Step<D>, max_seg: f64) -> usize {
    let mut len = 0.0;
    let mut last = [step.y0[0], step.y0[1]];
    for j in 1..=8 {
        let s = step.at(j as f64 / 8.0);
        len += geom::dist(last, [s[0], s[1]]);
        last = [s[0], s[1]];
    }
    ((len / max_seg).ceil() as usize).clamp(1, 10_000)
}

fn join(backward: HalfTrace, forward: HalfTrace) -> GeodesicTrace {
    let nb = backward.points.len();
    let mut points: Vec<TracePoint> = backward.points.into_iter().rev().collect();
    let mut events: Vec<TraceEvent> = backward
        .events
        .into_iter()
        .map(|e| TraceEvent { index: nb - 1 - e.index, kind: e.kind })
        .collect();
    events.reverse();
    let offset = nb - 1;
    points.extend(forward.points.into_iter().skip(1));
    events.extend(forward.events.into_iter().map(|e| TraceEvent { index: e.index + offset, kind: e.kind }));
    // An event recorded on the shared start point from both sides is kept once.
    events.dedup();
    GeodesicTrace { points, events }
}

fn check_start(start: &PtmPoint, cfg: &IntegratorConfig) -> Result<(), FlowError> {
    if cfg.domain.contains(start.x, start.y) {
        Ok(())
    } else {
        Err(FlowError::OutsideDomain { x: start.x, y: start.y })
    }
}

/// Bidirectional integral curve through `start`; the flow parameter is
/// negative on the backward part.
pub fn integrate(m: &PseudoFinslerMetric, start: PtmPoint, cfg: &IntegratorConfig) -> Result<GeodesicTrace, FlowError> {
    check_start(&start, cfg)?;
    let fwd = half_trace(m, start, 1.0, cfg, false)?;
    let bwd = half_trace(m, start, -1.0, cfg, false)?;
    Ok(join(bwd, fwd))
}

/// One-directional integral curve along `sigma` (±1) times the field.
pub fn integrate_oriented(
    m: &PseudoFinslerMetric,
    start: PtmPoint,
    sigma: f64,
    cfg: &IntegratorConfig,
) -> Result<GeodesicTrace, FlowError> {
    check_start(&start, cfg)?;
    let h = half_trace(m, start, sign(sigma), cfg, false)?;
    Ok(GeodesicTrace { points: h.points, events: h.events })
}

/// Bidirectional trace on the isotropic surface `F = 0`, with the slope
/// projected back onto it whenever `|F|` drifts above ten times the isotropy
/// tolerance.
pub fn isotropic_trace(m: &PseudoFinslerMetric, start: PtmPoint, cfg: &IntegratorConfig) -> Result<GeodesicTrace, FlowError> {
    check_start(&start, cfg)?;
    let v = chart_values(m, start.chart, start.x, start.y, start.slope)?;
    if v.f.abs() >= cfg.isotropy_tol.max(1e-8) {
        return Err(FlowError::NotIsotropic { f: v.f });
    }
    let fwd = half_trace(m, start, 1.0, cfg, true)?;
    let bwd = half_trace(m, start, -1.0, cfg, true)?;
    Ok(join(bwd, fwd))
}

/// Integrates the second-order tangent-bundle equation `ẍ_i = H̄_i / H̄`
/// forward from `(x, y, ẋ, ẏ)` and returns the planar projection.
pub fn tm_oracle_integrate(
    m: &PseudoFinslerMetric,
    x: f64,
    y: f64,
    xdot: f64,
    ydot: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<Point2>, FlowError> {
    if !cfg.domain.contains(x, y) {
        return Err(FlowError::OutsideDomain { x, y });
    }
    let (h0, _, _) = m.oracle_h(x, y, xdot, ydot)?;
    if h0 == 0.0 || !h0.is_finite() {
        return Err(FlowError::OracleDegenerate { h: h0 });
    }
    let h_sign = h0 > 0.0;
    let mut field = |s: &[f64; 4]| -> Option<[f64; 4]> {
        let (h, h1, h2) = m.oracle_h(s[0], s[1], s[2], s[3]).ok()?;
        if h == 0.0 || (h > 0.0) != h_sign {
            return None;
        }
        Some([s[2], s[3], h1 / h, h2 / h])
    };
    let mut stepper = Stepper::new([x, y, xdot, ydot], cfg.tol);
    let mut out = vec![[x, y]];
    let mut length = 0.0;
    for _ in 0..cfg.max_steps {
        let step = match stepper.step(&mut field) {
            Ok(s) => s,
            Err(_) => break,
        };
        let k = subdivisions(&step, cfg.max_seg);
        for j in 1..=k {
            let s = step.at(j as f64 / k as f64);
            if !cfg.domain.contains(s[0], s[1]) {
                return Ok(out);
            }
            length += geom::dist(*out.last().unwrap(), [s[0], s[1]]);
            out.push([s[0], s[1]]);
            if length > cfg.max_length {
                return Ok(out);
            }
        }
    }
    Ok(out)
}

/// `(s, x, y)`: arclength so far and the projected point.
pub type ArcSample = (f64, f64, f64);

/// Cumulative metric arclength `s = ∫ |F|^{1/n} |dx|` (P-chart, `|dy|` in the
/// Q-chart) along a trace, as `(s, x, y)` samples.
pub fn arclength_reparam(m: &PseudoFinslerMetric, trace: &GeodesicTrace) -> Result<Vec<ArcSample>, FlowError> {
    let pieces = arclength_pieces(m, trace, 1e-10)?;
    match pieces.as_slice() {
        [one] if one.len() == trace.points.len() => Ok(one.clone()),
        _ => {
            let index = first_isotropic_index(m, trace, 1e-10)?.unwrap_or(0);
            Err(FlowError::IsotropicSegment { index })
        }
    }
}

fn density(m: &PseudoFinslerMetric, pt: &PtmPoint) -> Result<f64, MetricError> {
    let f = m.eval_f_chart(pt.chart, pt.x, pt.y, pt.slope)?;
    Ok(f.abs().powf(1.0 / m.degree() as f64))
}

fn first_isotropic_index(m: &PseudoFinslerMetric, trace: &GeodesicTrace, tol: f64) -> Result<Option<usize>, FlowError> {
    for (i, tp) in trace.points.iter().enumerate() {
        if m.eval_f_chart(tp.pt.chart, tp.pt.x, tp.pt.y, tp.pt.slope)?.abs() < tol {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// Arclength on each maximal run of samples with `|F| >= tol`; the trace is
/// split wherever it touches the isotropic surface.
pub fn arclength_pieces(
    m: &PseudoFinslerMetric,
    trace: &GeodesicTrace,
    tol: f64,
) -> Result<Vec<Vec<ArcSample>>, FlowError> {
    let mut pieces = Vec::new();
    let mut cur: Vec<ArcSample> = Vec::new();
    let mut prev: Option<(PtmPoint, f64)> = None;
    for tp in &trace.points {
        let pt = tp.pt;
        let f = m.eval_f_chart(pt.chart, pt.x, pt.y, pt.slope)?;
        if f.abs() < tol {
            if cur.len() > 1 {
                pieces.push(std::mem::take(&mut cur));
            }
            cur.clear();
            prev = None;
            continue;
        }
        let w = density(m, &pt)?;
        let s = match prev {
            None => 0.0,
            Some((q, wq)) => {
                // Weights are per unit |dx| in the P-chart and |dy| in the Q-chart.
                let (dp, dq) = match (q.chart, pt.chart) {
                    (Chart::P, Chart::P) => ((pt.x - q.x).abs(), (pt.x - q.x).abs()),
                    (Chart::Q, Chart::Q) => ((pt.y - q.y).abs(), (pt.y - q.y).abs()),
                    (Chart::P, Chart::Q) => ((pt.x - q.x).abs(), (pt.y - q.y).abs()),
                    (Chart::Q, Chart::P) => ((pt.y - q.y).abs(), (pt.x - q.x).abs()),
                };
                cur.last().unwrap().0 + 0.5 * (wq * dp + w * dq)
            }
        };
        cur.push((s, pt.x, pt.y));
        prev = Some((pt, w));
    }
    if cur.len() > 1 {
        pieces.push(cur);
    }
    Ok(pieces)
}

/// A member of a geodesic family through a point of the discriminant curve.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMember {
    /// `None` for the limiting member along the fast eigendirection.
    pub alpha: Option<f64>,
    pub trace: GeodesicTrace,
}

/// Offset in the slope at which family members are started.
pub const SHOOT_EPS: f64 = 1e-3;

struct ShootFrame {
    q: Point2,
    p0: f64,
    e0: Point2,
    e1: Point2,
    e1_full: Vector3<f64>,
}

/// One-parameter family of geodesics leaving a point `q` of the regular part
/// of the discriminant curve in the double isotropic direction `p0`.
///
/// Each member is found at slopes `p0 ± ε` by solving for the start point
/// `(x, y)`: integrating towards `q` must land on `q` (measured along the
/// kernel eigendirection), and the offset from the isotropic member along the
/// fast eigendirection must equal `α|p − p0|^{3/2}`. The two halves are
/// joined at `q`; the flow parameter of the result is signed projected
/// arclength.
pub fn shoot_family_at_m01(
    m: &PseudoFinslerMetric,
    q: Point2,
    p0: f64,
    alphas: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<FamilyMember>, FlowError> {
    let frame = shoot_frame(m, q, p0, cfg)?;
    let mut out = Vec::new();
    for &alpha in alphas {
        let mut halves = Vec::new();
        for side in [-1.0, 1.0] {
            let eta = side * SHOOT_EPS;
            let iso = solve_start(m, &frame, eta, None, cfg)?;
            let start = if alpha == 0.0 { iso } else { solve_start(m, &frame, eta, Some((alpha, iso)), cfg)? };
            let pt = PtmPoint::p_chart(start[0], start[1], p0 + eta);
            halves.push(oriented_from_q(integrate(m, pt, cfg)?, q));
        }
        out.push(FamilyMember { alpha: Some(alpha), trace: glue(halves.remove(0), halves.remove(0)) });
    }
    Ok(out)
}

/// The limiting member of the family: the integral curve leaving `(q, p0)`
/// along the fast eigendirection.
pub fn shoot_limit_member(
    m: &PseudoFinslerMetric,
    q: Point2,
    p0: f64,
    cfg: &IntegratorConfig,
) -> Result<FamilyMember, FlowError> {
    let frame = shoot_frame(m, q, p0, cfg)?;
    let mut halves = Vec::new();
    for side in [-1.0, 1.0] {
        let d = frame.e1_full * (side * SHOOT_EPS);
        let pt = PtmPoint::p_chart(q[0] + d[0], q[1] + d[1], p0 + d[2]);
        halves.push(oriented_from_q(integrate(m, pt, cfg)?, q));
    }
    Ok(FamilyMember { alpha: None, trace: glue(halves.remove(0), halves.remove(0)) })
}

fn shoot_frame(m: &PseudoFinslerMetric, q: Point2, p0: f64, cfg: &IntegratorConfig) -> Result<ShootFrame, FlowError> {
    if p0.abs() > cfg.chart_threshold {
        return Err(FlowError::UnsupportedSlope { threshold: cfg.chart_threshold });
    }
    let stratum = m.classify_point(q[0], q[1])?;
    if stratum != Stratum::M01 {
        return Err(FlowError::NotOnM01 { x: q[0], y: q[1], stratum });
    }
    let v = chart_values(m, Chart::P, q[0], q[1], p0)?;
    if v.f.abs() > 1e-8 * (1.0 + v.scale) || v.f_s.abs() > 1e-6 * (1.0 + v.scale) {
        return Err(FlowError::NotDoubleRoot { p0 });
    }
    let grad = m.disc_f_gradient(q[0], q[1])?;
    let transverse = grad[0] + p0 * grad[1];
    if transverse.abs() <= 1e-6 * v.scale.powi(4) {
        return Err(FlowError::NotTransverse { p0, value: transverse.abs() });
    }
    let jac = singular::jacobian_at(m, PtmPoint::p_chart(q[0], q[1], p0))?;
    let eig = singular::real_eigenpairs(&jac);
    // Ordered by |λ|: kernel, slow, fast.
    let e0 = eig[0].1;
    let mut e1_full = eig[2].1;
    let norm2 = |v: [f64; 2]| {
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    };
    let e0 = norm2([e0[0], e0[1]]);
    // Orient the fast direction into the region where D_F > 0.
    if grad[0] * e1_full[0] + grad[1] * e1_full[1] < 0.0 {
        e1_full = -e1_full;
    }
    let e1 = norm2([e1_full[0], e1_full[1]]);
    e1_full /= e1_full.xy().norm();
    Ok(ShootFrame { q, p0, e0, e1, e1_full })
}

/// Landing coordinate along `e0` of the integral curve from `(x, y, p0 + eta)`
/// followed towards the singular line.
fn landing(m: &PseudoFinslerMetric, frame: &ShootFrame, x: f64, y: f64, eta: f64, cfg: &IntegratorConfig) -> Option<f64> {
    let p = frame.p0 + eta;
    let v = chart_values(m, Chart::P, x, y, p).ok()?;
    let sigma = -sign(v.p * eta);
    let lcfg = IntegratorConfig {
        tol: Tolerances { rtol: 1e-12, atol: 1e-15, h_init: 1e-4, ..cfg.tol },
        max_seg: f64::INFINITY,
        max_length: 100.0 * eta.abs().max(1e-6),
        ..*cfg
    };
    let h = half_trace(m, PtmPoint::p_chart(x, y, p), sigma, &lcfg, false).ok()?;
    if !h.events.iter().any(|e| e.kind == EventKind::SingularApproach) {
        return None;
    }
    let end = h.points.last()?.pt;
    Some((end.x - frame.q[0]) * frame.e0[0] + (end.y - frame.q[1]) * frame.e0[1])
}

fn solve_start(
    m: &PseudoFinslerMetric,
    frame: &ShootFrame,
    eta: f64,
    alpha: Option<(f64, Point2)>,
    cfg: &IntegratorConfig,
) -> Result<Point2, FlowError> {
    let p = frame.p0 + eta;
    let tag = alpha.map_or(0.0, |a| a.0);
    let fail = |reason: &str| FlowError::Shooting { alpha: tag, reason: reason.to_string() };
    let second = |x: f64, y: f64| -> Option<f64> {
        match alpha {
            None => {
                let v = chart_values(m, Chart::P, x, y, p).ok()?;
                Some(v.f / (1.0 + v.scale))
            }
            Some((a, iso)) => {
                Some((x - iso[0]) * frame.e1[0] + (y - iso[1]) * frame.e1[1] - a * eta.abs().powf(1.5))
            }
        }
    };
    let residual = |x: f64, y: f64| -> Option<[f64; 2]> { Some([landing(m, frame, x, y, eta, cfg)?, second(x, y)?]) };

    let mut z = match alpha {
        None => frame.q,
        Some((a, iso)) => {
            let off = a * eta.abs().powf(1.5);
            [iso[0] + off * frame.e1[0], iso[1] + off * frame.e1[1]]
        }
    };
    let mut r = residual(z[0], z[1]).ok_or_else(|| fail("landing failed at the initial guess"))?;
    for _ in 0..40 {
        let rn = r[0].hypot(r[1]);
        if rn < 1e-13 {
            return Ok(z);
        }
        let h = 1e-7;
        let rx = residual(z[0] + h, z[1]).ok_or_else(|| fail("landing failed"))?;
        let ry = residual(z[0], z[1] + h).ok_or_else(|| fail("landing failed"))?;
        let j = [[(rx[0] - r[0]) / h, (ry[0] - r[0]) / h], [(rx[1] - r[1]) / h, (ry[1] - r[1]) / h]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(fail("singular Newton matrix"));
        }
        let dx = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
        let dy = (j[0][0] * r[1] - j[1][0] * r[0]) / det;
        let mut lambda = 1.0;
        loop {
            let cand = [z[0] - lambda * dx, z[1] - lambda * dy];
            if let Some(rc) = residual(cand[0], cand[1]) {
                if rc[0].hypot(rc[1]) < rn || lambda < 1e-3 {
                    z = cand;
                    r = rc;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return Err(fail("line search failed"));
            }
        }
        if (dx * lambda).hypot(dy * lambda) < 1e-15 {
            return Ok(z);
        }
    }
    if r[0].hypot(r[1]) < 1e-10 {
        Ok(z)
    } else {
        Err(fail("no convergence"))
    }
}

/// Orients a trace so that its end nearer to `q` comes first.
fn oriented_from_q(trace: GeodesicTrace, q: Point2) -> GeodesicTrace {
    let (Some(a), Some(b)) = (trace.points.first(), trace.points.last()) else { return trace };
    if geom::dist(a.pt.xy(), q) <= geom::dist(b.pt.xy(), q) {
        trace
    } else {
        trace.reversed()
    }
}

/// Joins two traces that both start near `q` into one passing through `q`.
fn glue(first: GeodesicTrace, second: GeodesicTrace) -> GeodesicTrace {
    let first = first.reversed();
    let n1 = first.points.len();
    let mut points = first.points;
    let mut events = first.events;
    points.extend(second.points);
    events.extend(second.events.into_iter().map(|e| TraceEvent { index: e.index + n1, kind: e.kind }));
    // Flow parameter: signed projected arclength from the junction.
    let mut s = vec![0.0; points.len()];
    for i in (0..n1.saturating_sub(1)).rev() {
        s[i] = s[i + 1] - geom::dist(points[i].pt.xy(), points[i + 1].pt.xy());
    }
    for i in n1 + 1..points.len() {
        s[i] = s[i - 1] + geom::dist(points[i].pt.xy(), points[i - 1].pt.xy());
    }
    for (p, si) in points.iter_mut().zip(s) {
        p.t = si;
    }
    GeodesicTrace { points, events }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fold() -> PseudoFinslerMetric {
        PseudoFinslerMetric::parse(3, &["-x", "0", "1", "0"]).unwrap()
    }

    #[test]
    fn field_of_the_fold() {
        let m = fold();
        for &(x, y, p) in &[(0.3, 1.0, -0.4), (-1.0, 0.0, 2.0)] {
            let f = field_at(&m, PtmPoint::p_chart(x, y, p)).unwrap();
            let d = -2.0 * (3.0 * x + p * p);
            assert!((f[0] - d).abs() < 1e-12 && (f[1] - p * d).abs() < 1e-12);
            assert!((f[2] + 4.0 * p).abs() < 1e-12);
        }
        assert_eq!(field_at(&m, PtmPoint::p_chart(0.0, 0.5, 0.0)).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn p_zero_geodesic_is_horizontal() {
        let m = fold();
        let tr = integrate(&m, PtmPoint::p_chart(0.5, 0.0, 0.0), &IntegratorConfig::default()).unwrap();
        assert!(tr.points.len() > 10);
        assert!(tr.points.iter().all(|p| p.pt.y.abs() < 1e-14 && p.pt.slope.abs() < 1e-14));
    }

    #[test]
    fn chart_switch_keeps_direction() {
        let m = PseudoFinslerMetric::parse(3, &["1", "x", "0.3", "y"]).unwrap();
        let cfg = IntegratorConfig { chart_threshold: 1.2, ..IntegratorConfig::default() };
        let tr = integrate(&m, PtmPoint::p_chart(0.1, 0.1, 1.0), &cfg).unwrap();
        assert!(tr.has_event(EventKind::ChartSwitch));
        // The projected polyline never folds back at a switch.
        for e in tr.events_of(EventKind::ChartSwitch) {
            let i = e.index;
            if i >= 1 && i + 1 < tr.points.len() {
                let a = tr.points[i - 1].pt.xy();
                let b = tr.points[i].pt.xy();
                let c = tr.points[i + 1].pt.xy();
                let dot = (b[0] - a[0]) * (c[0] - b[0]) + (b[1] - a[1]) * (c[1] - b[1]);
                assert!(dot > 0.0);
            }
        }
    }

    #[test]
    fn arclength_rejects_isotropic_traces() {
        let m = PseudoFinslerMetric::parse(3, &["0", "1", "0", "1"]).unwrap();
        let tr = GeodesicTrace {
            points: (0..5)
                .map(|i| TracePoint { t: i as f64, pt: PtmPoint::p_chart(i as f64 * 0.1, 0.0, 0.0) })
                .collect(),
            events: vec![],
        };
        assert!(matches!(arclength_reparam(&m, &tr), Err(FlowError::IsotropicSegment { index: 0 })));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = fold();
        let cfg = IntegratorConfig { max_length: 0.05, ..IntegratorConfig::default() };
        let tr = integrate(&m, PtmPoint::p_chart(0.5, 0.0, 0.1), &cfg).unwrap();
        let csv = tr.to_csv(&m);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x,y,slope,chart,F,Delta,P,event"));
        assert_eq!(lines.count(), tr.points.len());
        assert!(csv.contains("max-length"));
    }
}
