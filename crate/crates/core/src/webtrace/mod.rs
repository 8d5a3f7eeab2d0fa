//! Solutions of `F = 0` as integral curves of the characteristic field on the
//! surface, projected to the plane.

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{ExprError, Expression};
use crate::geometry::{GeometryError, ImplicitOde, JetPoint, RootOptions};
use crate::json::{Json, ToJson};
use crate::numeric::ode::{error_ratio, step_factor};
use crate::numeric::{dopri_step, linspace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("characteristic field vanishes at ({x}, {y}, {p})")]
    DegenerateDirection { x: f64, y: f64, p: f64 },
    #[error("start point ({x}, {y}) is outside the box")]
    OutsideBox { x: f64, y: f64 },
    #[error("step size underflow after arclength {s}")]
    StepUnderflow { s: f64 },
    #[error("projection onto F = 0 failed at ({x}, {y}, {p})")]
    Projection { x: f64, y: f64, p: f64 },
    #[error("invalid trace input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Along the characteristic field with its first nonzero component positive.
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub arclength: f64,
    /// Local error tolerance per step (absolute and relative).
    pub tol: f64,
    /// Largest step, which bounds the spacing of polyline vertices.
    pub max_step: f64,
    /// `[x_min, x_max, y_min, y_max]`; the curve is clipped where it leaves.
    pub bounds: Option<[f64; 4]>,
    pub direction: Direction,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { arclength: 1.0, tol: 1e-10, max_step: 0.02, bounds: None, direction: Direction::Forward }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerKind {
    /// The curve crosses the criminant `F = F_p = 0`.
    CriminantCrossing,
    /// Crossing where the projected curve stops, i.e. a cusp of the solution.
    Cusp,
}

impl MarkerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MarkerKind::CriminantCrossing => "criminant-crossing",
            MarkerKind::Cusp => "cusp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marker {
    pub kind: MarkerKind,
    /// Vertex index in the curve.
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Arclength,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Index of the root at the seed, in ascending order.
    Root(usize),
    /// The vertical family `dx = 0` of a degree-2 ODE.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceStats {
    pub accepted: usize,
    pub rejected: usize,
    pub arclength: f64,
}

/// A traced solution: vertices `(x, y, p)` on the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct WebCurve {
    pub points: Vec<[f64; 3]>,
    pub branch: Branch,
    pub markers: Vec<Marker>,
    pub stats: TraceStats,
    pub stops: Vec<StopReason>,
}

impl WebCurve {
    pub fn xy(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.points.iter().map(|p| [p[0], p[1]])
    }

    pub fn cusps(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.markers.iter().filter(|m| m.kind == MarkerKind::Cusp).map(|m| self.points[m.index])
    }
}

impl ToJson for WebCurve {
    fn to_json(&self) -> Json {
        let branch = match self.branch {
            Branch::Root(i) => Json::from(i),
            Branch::Vertical => "vertical".into(),
        };
        Json::obj([
            ("branch", branch),
            ("points", Json::Arr(self.points.iter().map(|p| Json::nums(p)).collect())),
            (
                "markers",
                Json::Arr(
                    self.markers
                        .iter()
                        .map(|m| {
                            Json::obj([
                                ("kind", m.kind.as_str().into()),
                                ("index", m.index.into()),
                                ("point", Json::nums(&self.points[m.index])),
                            ])
                        })
                        .collect(),
                ),
            ),
            (
                "stats",
                Json::obj([
                    ("accepted", self.stats.accepted.into()),
                    ("rejected", self.stats.rejected.into()),
                    ("arclength", self.stats.arclength.into()),
                ]),
            ),
        ])
    }
}

/// Cusp threshold on projected speed relative to the curve's average.
const CUSP_SPEED: f64 = 1e-6;

struct Field<'a> {
    ode: &'a ImplicitOde,
}

impl Field<'_> {
    /// Unit characteristic direction at `z`, oriented along `reference`.
    /// Where the field vanishes (the Legendrian part of the criminant) the
    /// curve continues along `reference`.
    fn dir(&self, z: &[f64; 3], reference: &[f64; 3]) -> Result<[f64; 3], TraceError> {
        let v = self.ode.jet_values(&JetPoint { x: z[0], y: z[1], p: z[2] })?;
        let raw = [v.fp, z[2] * v.fp, -(v.fx + z[2] * v.fy)];
        let n = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
        if !(n > 1e-14 * v.scale) {
            if reference.iter().any(|c| *c != 0.0) {
                return Ok(*reference);
            }
            return Err(TraceError::DegenerateDirection { x: z[0], y: z[1], p: z[2] });
        }
        let d = raw.map(|c| c / n);
        let dot = d[0] * reference[0] + d[1] * reference[1] + d[2] * reference[2];
        Ok(if dot < 0.0 { d.map(|c| -c) } else { d })
    }

    /// Minimum-norm Newton onto `F = 0`.
    fn project(&self, z: [f64; 3]) -> Result<[f64; 3], TraceError> {
        let mut z = z;
        for _ in 0..12 {
            let v = self.ode.jet_values(&JetPoint { x: z[0], y: z[1], p: z[2] })?;
            if v.f.abs() <= 1e-15 * v.scale {
                return Ok(z);
            }
            let g = [v.fx, v.fy, v.fp];
            let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
            if !(g2 > 0.0) {
                break;
            }
            let prev = z;
            for i in 0..3 {
                z[i] -= v.f * g[i] / g2;
            }
            if (0..3).all(|i| (z[i] - prev[i]).abs() <= 1e-16 * (1.0 + prev[i].abs())) {
                return Ok(z);
            }
        }
        let v = self.ode.jet_values(&JetPoint { x: z[0], y: z[1], p: z[2] })?;
        if v.f.abs() <= 1e-12 * v.scale {
            Ok(z)
        } else {
            Err(TraceError::Projection { x: z[0], y: z[1], p: z[2] })
        }
    }

    fn fp(&self, z: &[f64; 3]) -> Result<f64, TraceError> {
        Ok(self.ode.jet_values(&JetPoint { x: z[0], y: z[1], p: z[2] })?.fp)
    }

    /// Projected DOPRI solution after a step `h` from `z` with frozen orientation.
    fn advance(&self, z: &[f64; 3], r: &[f64; 3], h: f64) -> Result<([f64; 3], [f64; 3]), TraceError> {
        let mut f = |_s: f64, w: &[f64; 3]| self.dir(w, r);
        dopri_step(&mut f, 0.0, z, h)
    }
}

fn inside(bounds: &Option<[f64; 4]>, z: &[f64; 3]) -> bool {
    bounds.is_none_or(|b| z[0] >= b[0] && z[0] <= b[1] && z[1] >= b[2] && z[1] <= b[3])
}

/// Traces the solution through `start` for `opts.arclength` of surface arclength.
pub fn trace_solution(ode: &ImplicitOde, start: &JetPoint, opts: &TraceOptions) -> Result<WebCurve, TraceError> {
    if !(opts.arclength > 0.0 && opts.tol > 0.0 && opts.max_step > 0.0) {
        return Err(TraceError::Invalid("arclength, tol and max_step must be positive".into()));
    }
    let z0 = start.as_array();
    if !inside(&opts.bounds, &z0) {
        return Err(TraceError::OutsideBox { x: start.x, y: start.y });
    }
    let field = Field { ode };
    let forward = ode.characteristic_direction(start).map_err(|_| TraceError::DegenerateDirection {
        x: start.x,
        y: start.y,
        p: start.p,
    })?;
    let sign = if opts.direction == Direction::Forward { 1.0 } else { -1.0 };
    let mut r = forward.map(|c| sign * c);
    let mut z = field.project(z0)?;

    let mut curve = WebCurve {
        points: vec![z],
        branch: Branch::Root(0),
        markers: Vec::new(),
        stats: TraceStats::default(),
        stops: Vec::new(),
    };
    let mut crossings = Vec::new();
    let scale0 = ode.jet_values(start)?.scale;
    if field.fp(&z)?.abs() <= 1e-12 * scale0 {
        crossings.push((0, r));
    }

    let mut s = 0.0;
    let mut h = opts.max_step.min(0.1 * opts.arclength);
    let h_min = 1e-14 * opts.arclength.max(1.0);
    let stop = loop {
        if s >= opts.arclength {
            break StopReason::Arclength;
        }
        h = h.min(opts.max_step).min(opts.arclength - s);
        let (z5, err) = field.advance(&z, &r, h)?;
        let ratio = error_ratio(&err, &z5, opts.tol, opts.tol);
        if ratio > 1.0 {
            curve.stats.rejected += 1;
            h *= step_factor(ratio);
            if h < h_min {
                return Err(TraceError::StepUnderflow { s });
            }
            continue;
        }
        curve.stats.accepted += 1;
        let next = field.project(z5)?;
        if !inside(&opts.bounds, &next) {
            let clipped = clip(&field, &z, &r, h, &opts.bounds)?;
            curve.points.push(clipped.0);
            s += clipped.1;
            break StopReason::Boundary;
        }
        let (fp0, fp1) = (field.fp(&z)?, field.fp(&next)?);
        if fp0 != 0.0 && fp0.signum() != fp1.signum() && fp1 != 0.0 {
            let zc = crossing(&field, &z, &r, h, fp0)?;
            crossings.push((curve.points.len(), r));
            curve.points.push(zc);
        }
        let next_r = field.dir(&next, &r).unwrap_or(r);
        curve.points.push(next);
        z = next;
        r = next_r;
        s += h;
        h *= step_factor(ratio);
    };
    curve.stops.push(stop);
    curve.stats.arclength = s;

    let projected: f64 = curve.points.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum();
    let average = if s > 0.0 { projected / s } else { 0.0 };
    for (index, reference) in crossings {
        let d = field.dir(&curve.points[index], &reference).ok();
        let speed = d.map_or(0.0, |d| d[0].hypot(d[1]));
        let kind = if speed <= CUSP_SPEED * average { MarkerKind::Cusp } else { MarkerKind::CriminantCrossing };
        curve.markers.push(Marker { kind, index });
    }
    Ok(curve)
}

/// Bisection on the step length for the sign change of `F_p`.
fn crossing(field: &Field, z: &[f64; 3], r: &[f64; 3], h: f64, fp0: f64) -> Result<[f64; 3], TraceError> {
    let (mut lo, mut hi) = (0.0, h);
    let mut best = *z;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let w = field.project(field.advance(z, r, mid)?.0)?;
        let fp = field.fp(&w)?;
        best = w;
        if fp == 0.0 {
            break;
        }
        if fp.signum() == fp0.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Last point inside the box along the step, by bisection.
fn clip(
    field: &Field,
    z: &[f64; 3],
    r: &[f64; 3],
    h: f64,
    bounds: &Option<[f64; 4]>,
) -> Result<([f64; 3], f64), TraceError> {
    let (mut lo, mut hi) = (0.0, h);
    let mut best = *z;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let w = field.project(field.advance(z, r, mid)?.0)?;
        if inside(bounds, &w) {
            lo = mid;
            best = w;
        } else {
            hi = mid;
        }
    }
    Ok((best, lo))
}

/// Largest `|I - I_0|` along the curve, relative to the largest `|I|`.
///
/// `integral` is an expression in `(x, y, p)`.
pub fn first_integral_drift(curve: &WebCurve, integral: &Expression) -> Result<f64, TraceError> {
    if integral.vars().len() != 3 {
        return Err(TraceError::Invalid("first integral must be over (x, y, p)".into()));
    }
    let values = curve.points.iter().map(|z| integral.eval(z)).collect::<Result<Vec<f64>, ExprError>>()?;
    let Some(&v0) = values.first() else {
        return Ok(0.0);
    };
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(values.iter().fold(0.0f64, |m, v| m.max((v - v0).abs())) / scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WebSample {
    pub curves: Vec<WebCurve>,
    /// Seed index, branch and error for curves that could not be traced.
    pub failures: Vec<(usize, Branch, String)>,
}

/// Seed index, branch and trace outcome.
type SeedTrace = (usize, Branch, Result<WebCurve, TraceError>);

/// One curve per lattice seed and real root, traced both ways and clipped to
/// `bounds`; degree-2 ODEs add a vertical line per seed column.
pub fn sample_web(
    ode: &ImplicitOde,
    bounds: [f64; 4],
    seeds_per_axis: usize,
    opts: &TraceOptions,
) -> Result<WebSample, TraceError> {
    if !(bounds[0] < bounds[1] && bounds[2] < bounds[3]) || seeds_per_axis == 0 {
        return Err(TraceError::Invalid("empty region or seed lattice".into()));
    }
    let inset = |lo: f64, hi: f64| {
        let pad = (hi - lo) / (2 * seeds_per_axis) as f64;
        linspace(lo + pad, hi - pad, seeds_per_axis)
    };
    let xs = inset(bounds[0], bounds[1]);
    let ys = inset(bounds[2], bounds[3]);
    let seeds: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    let opts = TraceOptions { bounds: Some(bounds), ..*opts };

    let roots_opts = RootOptions { allow_degree_drop: true, ..RootOptions::default() };
    let per_seed: Vec<Vec<SeedTrace>> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &(x, y))| {
            let roots = match ode.roots_at(x, y, &roots_opts) {
                Ok(r) => r,
                Err(e) => return vec![(k, Branch::Root(0), Err(e.into()))],
            };
            roots
                .values()
                .into_iter()
                .enumerate()
                .map(|(i, p)| (k, Branch::Root(i), trace_both(ode, x, y, p, &opts)))
                .collect()
        })
        .collect();

    let mut out = WebSample { curves: Vec::new(), failures: Vec::new() };
    for (k, branch, res) in per_seed.into_iter().flatten() {
        match res {
            Ok(mut c) => {
                c.branch = branch;
                out.curves.push(c);
            }
            Err(e) => out.failures.push((k, branch, e.to_string())),
        }
    }
    if ode.degree() == 2 {
        for &x in &xs {
            out.curves.push(WebCurve {
                points: vec![[x, bounds[2], f64::NAN], [x, bounds[3], f64::NAN]],
                branch: Branch::Vertical,
                markers: Vec::new(),
                stats: TraceStats { accepted: 1, rejected: 0, arclength: bounds[3] - bounds[2] },
                stops: vec![StopReason::Boundary],
            });
        }
    }
    Ok(out)
}

/// Backward and forward traces through `(x, y, p)` joined into one curve.
fn trace_both(ode: &ImplicitOde, x: f64, y: f64, p: f64, opts: &TraceOptions) -> Result<WebCurve, TraceError> {
    let start = JetPoint::new(x, y, p)?;
    let back = trace_solution(ode, &start, &TraceOptions { direction: Direction::Backward, ..*opts })?;
    let fwd = trace_solution(ode, &start, &TraceOptions { direction: Direction::Forward, ..*opts })?;
    let n_back = back.points.len();
    let mut points: Vec<[f64; 3]> = back.points.into_iter().rev().collect();
    points.extend_from_slice(&fwd.points[1..]);
    let mut markers: Vec<Marker> =
        back.markers.iter().map(|m| Marker { kind: m.kind, index: n_back - 1 - m.index }).collect();
    markers.reverse();
    markers.extend(
        fwd.markers.iter().filter(|m| m.index > 0).map(|m| Marker { kind: m.kind, index: m.index + n_back - 1 }),
    );
    Ok(WebCurve {
        points,
        branch: Branch::Root(0),
        markers,
        stats: TraceStats {
            accepted: back.stats.accepted + fwd.stats.accepted,
            rejected: back.stats.rejected + fwd.stats.rejected,
            arclength: back.stats.arclength + fwd.stats.arclength,
        },
        stops: [back.stops, fwd.stops].concat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;

    const XYP: &[&str] = &["x", "y", "p"];

    fn jet(x: f64, y: f64, p: f64) -> JetPoint {
        JetPoint::new(x, y, p).unwrap()
    }

    fn on_surface(ode: &ImplicitOde, c: &WebCurve) {
        for z in &c.points {
            assert!(ode.f(z[0], z[1], z[2]).unwrap().abs() <= 1e-8);
        }
    }

    #[test]
    fn clairaut_solution_is_a_line() {
        let ode = ImplicitOde::depressed_cubic("x", "-y").unwrap();
        let c = trace_solution(&ode, &jet(0.0, 1.0, 1.0), &TraceOptions::default()).unwrap();
        on_surface(&ode, &c);
        assert!(c.points.len() > 10);
        for z in &c.points {
            assert!((z[1] - z[0] - 1.0).abs() <= 1e-9, "{z:?}");
        }
        let drift = first_integral_drift(&c, &parse("p", XYP).unwrap()).unwrap();
        assert!(drift <= 1e-9);
    }

    #[test]
    fn fold_solution_is_a_parabola() {
        let ode = ImplicitOde::monic_quadratic("0", "-y").unwrap();
        for direction in [Direction::Forward, Direction::Backward] {
            let opts = TraceOptions { direction, arclength: 3.0, ..TraceOptions::default() };
            let c = trace_solution(&ode, &jet(0.0, 1.0, 1.0), &opts).unwrap();
            on_surface(&ode, &c);
            for z in &c.points {
                assert!((z[1] - (z[0] + 2.0).powi(2) / 4.0).abs() <= 1e-6, "{z:?}");
            }
        }
        // backward from (0, 1, 1) reaches the criminant at x = -2 and continues
        let opts = TraceOptions { direction: Direction::Backward, arclength: 3.0, ..TraceOptions::default() };
        let c = trace_solution(&ode, &jet(0.0, 1.0, 1.0), &opts).unwrap();
        assert!(c.points.last().unwrap()[2] < 0.0);
        assert_eq!(c.markers.len(), 1);
        assert_eq!(c.markers[0].kind, MarkerKind::CriminantCrossing);
    }

    #[test]
    fn cusp_markers_lie_on_the_discriminant() {
        let ode = ImplicitOde::depressed_cubic("2*x", "y").unwrap();
        let p: f64 = 0.5;
        let seed = jet(-1.5 * p * p, 2.0 * p * p * p, p);
        let c =
            trace_both(&ode, seed.x, seed.y, seed.p, &TraceOptions { arclength: 0.5, ..Default::default() }).unwrap();
        on_surface(&ode, &c);
        let cusps: Vec<[f64; 3]> = c.cusps().collect();
        assert_eq!(cusps.len(), 1, "{:?}", c.markers);
        for z in cusps {
            assert!((32.0 * z[0].powi(3) + 27.0 * z[1] * z[1]).abs() <= 1e-3);
        }
    }

    #[test]
    fn first_integral_of_normal_form_i() {
        let ode = ImplicitOde::depressed_cubic("2*x", "y").unwrap();
        let integral = parse("p^2*(x + 3*p^2/8)^3", XYP).unwrap();
        let c = trace_solution(&ode, &jet(-1.5, 0.0, 3f64.sqrt()), &TraceOptions::default()).unwrap();
        assert!(first_integral_drift(&c, &integral).unwrap() <= 1e-6);
        let one = parse("1", XYP).unwrap();
        assert_eq!(first_integral_drift(&c, &one).unwrap(), 0.0);
    }

    #[test]
    fn forward_then_backward_returns() {
        let ode = ImplicitOde::depressed_cubic("2*x", "y").unwrap();
        let tol = 1e-10;
        let opts = TraceOptions { tol, ..TraceOptions::default() };
        let c = trace_solution(&ode, &jet(-1.5, 0.0, 0.0), &opts).unwrap();
        let end = c.points.last().unwrap();
        let back = TraceOptions { direction: Direction::Backward, arclength: c.stats.arclength, ..opts };
        let r = trace_solution(&ode, &jet(end[0], end[1], end[2]), &back).unwrap();
        let z = r.points.last().unwrap();
        assert!((z[0] + 1.5).abs() + z[1].abs() + z[2].abs() <= 10.0 * tol, "{z:?}");
    }

    #[test]
    fn boundary_clips() {
        let ode = ImplicitOde::depressed_cubic("x", "-y").unwrap();
        let opts = TraceOptions { bounds: Some([-0.5, 0.5, 0.0, 2.0]), ..TraceOptions::default() };
        let c = trace_solution(&ode, &jet(0.0, 1.0, 1.0), &opts).unwrap();
        assert_eq!(c.stops, vec![StopReason::Boundary]);
        assert!((c.points.last().unwrap()[0] - 0.5).abs() < 1e-9);
        let err = trace_solution(&ode, &jet(3.0, 1.0 + 3.0, 1.0), &opts).unwrap_err();
        assert!(matches!(err, TraceError::OutsideBox { .. }));
    }

    #[test]
    fn sample_web_of_form_v_is_parallel_lines() {
        let ode = ImplicitOde::monic_quadratic("1", "0").unwrap();
        let w = sample_web(&ode, [-1.0, 1.0, -1.0, 1.0], 3, &TraceOptions { arclength: 4.0, ..Default::default() })
            .unwrap();
        assert!(w.failures.is_empty());
        assert_eq!(w.curves.len(), 3 * 3 * 2 + 3);
        for c in &w.curves {
            let p0 = c.points[0];
            for z in &c.points {
                match c.branch {
                    Branch::Vertical => assert_eq!(z[0], p0[0]),
                    Branch::Root(_) => assert_eq!(z[2], p0[2]),
                }
            }
        }
    }
}
