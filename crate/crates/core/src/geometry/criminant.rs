use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use super::{cross, norm3, rank_2x3, GeometryError, ImplicitOde, JetPoint, SingularKind, P_MAX};

/// A point of the criminant `F = F_p = 0` with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriminantSample {
    pub point: JetPoint,
    /// Tangent scaled so that its chart component is `+1`.
    pub tangent: [f64; 3],
    pub rank: usize,
    /// `dy - p dx` evaluated on `tangent`.
    pub pairing: f64,
    pub kind: SingularKind,
    pub f: f64,
    pub fp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceStop {
    Arclength,
    Boundary,
    RankDrop,
    ChartDegenerate,
    CorrectorFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriminantOptions {
    pub arclength: f64,
    pub step: f64,
    /// `[x_min, x_max, y_min, y_max]`.
    pub bounds: Option<[f64; 4]>,
}

impl Default for CriminantOptions {
    fn default() -> Self {
        Self { arclength: 1.0, step: 0.01, bounds: None }
    }
}

/// Continuation of the criminant in both directions from a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CriminantTrace {
    /// Ordered along the curve; the backward arc comes first.
    pub samples: Vec<CriminantSample>,
    pub seed_index: usize,
    /// Coordinate (0 = x, 1 = y, 2 = p) used to normalize tangents.
    pub chart: usize,
    pub stops: [TraceStop; 2],
}

impl CriminantTrace {
    /// Samples strictly before the seed, nearest first.
    pub fn backward_arc(&self) -> Vec<&CriminantSample> {
        self.samples[..self.seed_index].iter().rev().collect()
    }

    /// Samples strictly after the seed, nearest first.
    pub fn forward_arc(&self) -> Vec<&CriminantSample> {
        self.samples[self.seed_index + 1..].iter().collect()
    }

    pub fn seed(&self) -> &CriminantSample {
        &self.samples[self.seed_index]
    }
}

struct Local {
    g: [f64; 2],
    grad_f: [f64; 3],
    grad_fp: [f64; 3],
    scale: f64,
}

fn local(ode: &ImplicitOde, z: [f64; 3]) -> Result<Local, GeometryError> {
    let v = ode.jet_values(&JetPoint { x: z[0], y: z[1], p: z[2] })?;
    Ok(Local { g: [v.f, v.fp], grad_f: [v.fx, v.fy, v.fp], grad_fp: [v.fpx, v.fpy, v.fpp], scale: v.scale })
}

/// Minimum-norm Newton iteration onto `F = F_p = 0` from `seed`.
pub fn refine_to_criminant(ode: &ImplicitOde, seed: &JetPoint) -> Result<JetPoint, GeometryError> {
    let mut z = seed.as_array();
    for _ in 0..60 {
        let l = local(ode, z)?;
        if l.g[0].abs() <= 1e-12 * l.scale && l.g[1].abs() <= 1e-12 * l.scale {
            return JetPoint::new(z[0], z[1], z[2]);
        }
        // dz = J^T (J J^T)^-1 (-g)
        let (r1, r2) = (l.grad_f, l.grad_fp);
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let (m11, m12, m22) = (dot(r1, r1), dot(r1, r2), dot(r2, r2));
        let det = m11 * m22 - m12 * m12;
        let (w1, w2) = if det.abs() > 1e-14 * (m11 * m22).max(1e-300) {
            ((m22 * -l.g[0] - m12 * -l.g[1]) / det, (m11 * -l.g[1] - m12 * -l.g[0]) / det)
        } else if m11 >= m22 && m11 > 0.0 {
            (-l.g[0] / m11, 0.0)
        } else if m22 > 0.0 {
            (0.0, -l.g[1] / m22)
        } else {
            return Err(GeometryError::SeedDivergence);
        };
        for i in 0..3 {
            z[i] += w1 * r1[i] + w2 * r2[i];
        }
        if !z.iter().all(|c| c.is_finite()) || z[2].abs() > P_MAX {
            return Err(GeometryError::SeedDivergence);
        }
    }
    let l = local(ode, z)?;
    if l.g[0].abs() <= 1e-10 * l.scale && l.g[1].abs() <= 1e-10 * l.scale {
        JetPoint::new(z[0], z[1], z[2])
    } else {
        Err(GeometryError::SeedDivergence)
    }
}

fn unit_tangent(l: &Local) -> Option<[f64; 3]> {
    let t = cross(l.grad_f, l.grad_fp);
    let n = norm3(t);
    (n > 1e-12 * l.scale).then(|| t.map(|c| c / n))
}

fn sample(ode: &ImplicitOde, z: [f64; 3], unit: [f64; 3], chart: usize) -> Result<CriminantSample, GeometryError> {
    let point = JetPoint::new(z[0], z[1], z[2])?;
    let l = local(ode, z)?;
    let rank = rank_2x3(l.grad_f, l.grad_fp);
    let tangent = unit.map(|c| c / unit[chart]);
    let kind = ode.singular_kind(&point).unwrap_or(SingularKind::Degenerate);
    Ok(CriminantSample {
        point,
        tangent,
        rank,
        pairing: tangent[1] - point.p * tangent[0],
        kind,
        f: l.g[0],
        fp: l.g[1],
    })
}

/// Value of the contact form `dy - p dx` on the sample's chart-normalized tangent.
pub fn contact_pairing(s: &CriminantSample) -> Result<f64, GeometryError> {
    if s.rank < 2 {
        return Err(GeometryError::RankDeficient { rank: s.rank });
    }
    Ok(s.tangent[1] - s.point.p * s.tangent[0])
}

/// Predictor-corrector continuation of `F = F_p = 0` through the refined seed,
/// up to `arclength` in each direction.
///
/// Tangents are normalized in the chart of the coordinate that dominates the
/// tangent at the seed; an arc stops where that coordinate degenerates.
pub fn criminant_trace(
    ode: &ImplicitOde,
    seed: &JetPoint,
    opts: &CriminantOptions,
) -> Result<CriminantTrace, GeometryError> {
    let start = refine_to_criminant(ode, seed)?;
    let z0 = start.as_array();
    let l0 = local(ode, z0)?;
    let rank = rank_2x3(l0.grad_f, l0.grad_fp);
    if rank < 2 {
        return Err(GeometryError::RankDeficient { rank });
    }
    let t0 = unit_tangent(&l0).ok_or(GeometryError::RankDeficient { rank: 1 })?;
    let chart = (0..3).max_by(|&i, &j| t0[i].abs().total_cmp(&t0[j].abs())).expect("three components");
    let oriented = t0.map(|c| c * t0[chart].signum());
    let seed_sample = sample(ode, z0, oriented, chart)?;

    let (back, stop_b) = continue_arc(ode, z0, oriented.map(|c| -c), chart, opts)?;
    let (fwd, stop_f) = continue_arc(ode, z0, oriented, chart, opts)?;
    let seed_index = back.len();
    let mut samples: Vec<CriminantSample> = back.into_iter().rev().collect();
    samples.push(seed_sample);
    samples.extend(fwd);
    Ok(CriminantTrace { samples, seed_index, chart, stops: [stop_b, stop_f] })
}

fn inside(opts: &CriminantOptions, z: [f64; 3]) -> bool {
    let box_ok = opts.bounds.is_none_or(|b| z[0] >= b[0] && z[0] <= b[1] && z[1] >= b[2] && z[1] <= b[3]);
    box_ok && z[2].abs() <= P_MAX
}

fn continue_arc(
    ode: &ImplicitOde,
    z0: [f64; 3],
    t0: [f64; 3],
    chart: usize,
    opts: &CriminantOptions,
) -> Result<(Vec<CriminantSample>, TraceStop), GeometryError> {
    let mut out = Vec::new();
    let mut z = z0;
    let mut t = t0;
    let mut travelled = 0.0;
    let h_nominal = opts.step.min(opts.arclength).max(1e-12);
    loop {
        if travelled >= opts.arclength * (1.0 - 1e-12) {
            return Ok((out, TraceStop::Arclength));
        }
        let mut h = h_nominal.min(opts.arclength - travelled);
        let mut corrected = None;
        for _ in 0..12 {
            if let Some(w) = correct(ode, z, t, h)? {
                corrected = Some(w);
                break;
            }
            h *= 0.5;
        }
        let Some(w) = corrected else {
            return Ok((out, TraceStop::CorrectorFailure));
        };
        if !inside(opts, w) {
            return Ok((out, TraceStop::Boundary));
        }
        let l = local(ode, w)?;
        if rank_2x3(l.grad_f, l.grad_fp) < 2 {
            return Ok((out, TraceStop::RankDrop));
        }
        let Some(mut tn) = unit_tangent(&l) else {
            return Ok((out, TraceStop::RankDrop));
        };
        if tn.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
            tn = tn.map(|c| -c);
        }
        if tn[chart].abs() < 1e-3 {
            return Ok((out, TraceStop::ChartDegenerate));
        }
        travelled += norm3([w[0] - z[0], w[1] - z[1], w[2] - z[2]]);
        let oriented = tn.map(|c| c * tn[chart].signum());
        out.push(sample(ode, w, oriented, chart)?);
        z = w;
        t = tn;
    }
}

fn correct(ode: &ImplicitOde, z: [f64; 3], t: [f64; 3], h: f64) -> Result<Option<[f64; 3]>, GeometryError> {
    let pred = [z[0] + h * t[0], z[1] + h * t[1], z[2] + h * t[2]];
    let mut w = pred;
    for _ in 0..30 {
        let l = local(ode, w)?;
        let arc: f64 = (0..3).map(|i| t[i] * (w[i] - pred[i])).sum();
        let rhs = Vector3::new(-l.g[0], -l.g[1], -arc);
        let done = l.g[0].abs() <= 1e-13 * l.scale && l.g[1].abs() <= 1e-13 * l.scale;
        if done {
            return Ok(Some(w));
        }
        let jac = Matrix3::new(
            l.grad_f[0],
            l.grad_f[1],
            l.grad_f[2],
            l.grad_fp[0],
            l.grad_fp[1],
            l.grad_fp[2],
            t[0],
            t[1],
            t[2],
        );
        let Some(dw) = jac.lu().solve(&rhs) else {
            return Ok(None);
        };
        for i in 0..3 {
            w[i] += dw[i];
        }
        if !w.iter().all(|c| c.is_finite()) {
            return Ok(None);
        }
        if dw.norm() <= 1e-15 * (1.0 + norm3(w)) {
            let l = local(ode, w)?;
            let ok = l.g[0].abs() <= 1e-9 * l.scale && l.g[1].abs() <= 1e-9 * l.scale;
            return Ok(ok.then_some(w));
        }
    }
    let l = local(ode, w)?;
    let ok = l.g[0].abs() <= 1e-10 * l.scale && l.g[1].abs() <= 1e-10 * l.scale;
    // reject corrections that wandered far from the predictor
    let drift = norm3([w[0] - pred[0], w[1] - pred[1], w[2] - pred[2]]);
    Ok((ok && drift <= h).then_some(w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(ode: &ImplicitOde, seed: (f64, f64, f64), len: f64) -> CriminantTrace {
        let opts = CriminantOptions { arclength: len, step: 0.01, bounds: None };
        criminant_trace(ode, &JetPoint::new(seed.0, seed.1, seed.2).unwrap(), &opts).unwrap()
    }

    #[test]
    fn cusp_criminant_closed_form() {
        let ode = ImplicitOde::depressed_cubic("2*x", "y").unwrap();
        let off = trace(&ode, (0.01, -0.02, 0.03), 0.1);
        assert_eq!(off.seed().kind, SingularKind::Fold);
        let tr = trace(&ode, (0.0, 0.0, 0.0), 0.8);
        assert_eq!(tr.chart, 2);
        assert!(tr.samples.len() > 100);
        for s in &tr.samples {
            let p = s.point.p;
            assert!((s.point.x + 1.5 * p * p).abs() < 1e-8);
            assert!((s.point.y - 2.0 * p * p * p).abs() < 1e-8);
            assert!(s.f.abs() <= 1e-8 && s.fp.abs() <= 1e-8);
            assert!((s.pairing - 9.0 * p * p).abs() <= 1e-9 * (1.0 + p * p));
            assert_eq!(s.rank, 2);
        }
        assert_eq!(tr.seed().kind, SingularKind::Cusp);
        assert_eq!(tr.forward_arc()[5].kind, SingularKind::Fold);
    }

    #[test]
    fn clairaut_criminant_is_legendrian() {
        let ode = ImplicitOde::monic_cubic("0", "x", "-y").unwrap();
        let tr = trace(&ode, (0.0, 0.0, 0.0), 0.5);
        for s in &tr.samples {
            let p = s.point.p;
            assert!((s.point.x + 3.0 * p * p).abs() < 1e-8);
            assert!((s.point.y + 2.0 * p * p * p).abs() < 1e-8);
            assert!(contact_pairing(s).unwrap().abs() <= 1e-7);
        }
    }

    #[test]
    fn fold_criminants() {
        let iii = ImplicitOde::monic_quadratic("0", "-y").unwrap();
        let tr = trace(&iii, (0.0, 0.1, 0.1), 0.5);
        assert_eq!(tr.chart, 0);
        for s in &tr.samples {
            assert!(s.point.y.abs() < 1e-12 && s.point.p.abs() < 1e-12);
            assert_eq!(s.pairing, 0.0);
            assert_eq!(s.kind, SingularKind::Fold);
        }
        let iv = ImplicitOde::monic_quadratic("0", "-x").unwrap();
        let tr = trace(&iv, (0.0, 0.0, 0.0), 0.5);
        assert_eq!(tr.chart, 1);
        for s in &tr.samples {
            assert!((s.pairing - 1.0).abs() < 1e-12);
        }
        assert_eq!(tr.stops, [TraceStop::Arclength, TraceStop::Arclength]);
    }

    #[test]
    fn bounds_and_rank_errors() {
        let iii = ImplicitOde::monic_quadratic("0", "-y").unwrap();
        let opts = CriminantOptions { arclength: 5.0, step: 0.05, bounds: Some([-1.0, 1.0, -1.0, 1.0]) };
        let tr = criminant_trace(&iii, &JetPoint::new(0.0, 0.0, 0.0).unwrap(), &opts).unwrap();
        assert_eq!(tr.stops, [TraceStop::Boundary, TraceStop::Boundary]);
        assert!(tr.samples.iter().all(|s| s.point.x.abs() <= 1.0));

        let singular = ImplicitOde::depressed_cubic("-x", "0").unwrap();
        let err = criminant_trace(&singular, &JetPoint::new(0.0, 0.0, 0.0).unwrap(), &opts);
        assert_eq!(err.unwrap_err(), GeometryError::RankDeficient { rank: 1 });
    }
}
