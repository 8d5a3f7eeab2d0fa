use super::{ThreeWeb, WebError};
use crate::json::{Json, ToJson};
use crate::numeric::loglog_slope;

type Pt = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Hexagonal,
    NonHexagonal,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Hexagonal => "hexagonal",
            Verdict::NonHexagonal => "non-hexagonal",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HexagonOptions {
    pub eps: Vec<f64>,
    /// Integrator tolerance relative to the region size.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for HexagonOptions {
    fn default() -> Self {
        Self { eps: vec![0.16, 0.08, 0.04], tol: 1e-9, max_steps: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HexagonReport {
    pub center: Pt,
    pub eps: Vec<f64>,
    pub defects: Vec<f64>,
    /// Least-squares slope of `ln defect` against `ln eps` over defects above
    /// the roundoff floor `1e-12 * scale`; infinite when fewer than two are.
    pub slope: f64,
    pub verdict: Verdict,
    /// RK4 steps per `eps` of arclength.
    pub steps: usize,
    pub tol: f64,
    pub scale: f64,
    pub orientation: Orientation,
}

impl ToJson for HexagonReport {
    fn to_json(&self) -> Json {
        Json::obj([
            ("center", Json::nums(&self.center)),
            ("eps", Json::nums(&self.eps)),
            ("defects", Json::nums(&self.defects)),
            ("loglog_slope", if self.slope == f64::INFINITY { "unbounded".into() } else { self.slope.into() }),
            ("verdict", self.verdict.as_str().into()),
            ("steps_per_eps", self.steps.into()),
            ("tol", self.tol.into()),
            ("scale", self.scale.into()),
            (
                "orientation",
                Json::obj([
                    ("families", Json::Arr(self.orientation.families.iter().map(|&f| (f as i64).into()).collect())),
                    ("side", (self.orientation.side as i64).into()),
                ]),
            ),
        ])
    }
}

/// Start family, the two others in walking order, and the side of the
/// center the first vertex lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Orientation {
    pub families: [usize; 3],
    pub side: i8,
}

impl Orientation {
    /// All twelve orientations in the order the walker tries them.
    pub fn all() -> Vec<Orientation> {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        perms.iter().flat_map(|&families| [1, -1].map(|side| Orientation { families, side })).collect()
    }

    /// Leg `k` follows family `.0` from the current vertex to the curve
    /// through the center of family `.1`.
    fn legs(&self) -> [(usize, usize); 6] {
        let [a, b, c] = self.families;
        [(b, c), (a, b), (c, a), (b, c), (a, b), (c, a)]
    }
}

fn dot(a: Pt, b: Pt) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn dist(a: Pt, b: Pt) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

struct Walker<'a> {
    web: &'a ThreeWeb,
}

/// Polyline along one leaf; `refs[k]` orients the step leaving node `k`.
struct Leaf {
    pts: Vec<Pt>,
    refs: Vec<Pt>,
    fam: usize,
}

impl Walker<'_> {
    fn dir(&self, fam: usize, p: Pt, reference: Pt) -> Result<Pt, WebError> {
        if !self.web.region.contains(p[0], p[1]) {
            return Err(WebError::OutsideRegion { x: p[0], y: p[1] });
        }
        let d = self.web.directions_at(p[0], p[1])?[fam];
        Ok(if dot(d, reference) < 0.0 { [-d[0], -d[1]] } else { d })
    }

    fn step(&self, fam: usize, p: Pt, reference: Pt, h: f64) -> Result<(Pt, Pt), WebError> {
        let k1 = self.dir(fam, p, reference)?;
        let k2 = self.dir(fam, [p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]], k1)?;
        let k3 = self.dir(fam, [p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]], k1)?;
        let k4 = self.dir(fam, [p[0] + h * k3[0], p[1] + h * k3[1]], k1)?;
        let q = [
            p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        let next_ref = self.dir(fam, q, k1).unwrap_or(k1);
        Ok((q, next_ref))
    }

    /// Up to `n` steps of size `h`; stops early (without error) when the
    /// leaf leaves the region or the web degenerates.
    fn leaf(&self, fam: usize, start: Pt, reference: Pt, h: f64, n: usize) -> Leaf {
        let mut leaf = Leaf { pts: vec![start], refs: Vec::new(), fam };
        let Ok(mut r) = self.dir(fam, start, reference) else {
            return leaf;
        };
        let mut p = start;
        for _ in 0..n {
            match self.step(fam, p, r, h) {
                Ok((q, nr)) => {
                    leaf.refs.push(r);
                    leaf.pts.push(q);
                    p = q;
                    r = nr;
                }
                Err(_) => break,
            }
        }
        leaf
    }

    /// Leaf through `c` traced both ways, as one polyline.
    fn curve(&self, fam: usize, c: Pt, h: f64, n: usize) -> Result<Leaf, WebError> {
        let d = self.web.directions_at(c[0], c[1])?[fam];
        let fwd = self.leaf(fam, c, d, h, n);
        let back = self.leaf(fam, c, [-d[0], -d[1]], h, n);
        // reverse the backward half; its steps are re-oriented toward the center
        let mut pts: Vec<Pt> = back.pts.iter().rev().copied().collect();
        let mut refs: Vec<Pt> = back.refs.iter().rev().map(|r| [-r[0], -r[1]]).collect();
        pts.extend_from_slice(&fwd.pts[1..]);
        refs.extend_from_slice(&fwd.refs);
        Ok(Leaf { pts, refs, fam })
    }

    /// Walks from `start` along family `fam` in the direction that reaches
    /// `target` soonest; returns the refined crossing.
    fn leg(&self, leg: usize, fam: usize, start: Pt, target: &Leaf, h: f64, n: usize) -> Result<Pt, WebError> {
        let d = self.web.directions_at(start[0], start[1])?[fam];
        let mut best: Option<(usize, Pt)> = None;
        let mut exited = false;
        for sign in [1.0, -1.0] {
            let limit = best.map_or(n, |(steps, _)| steps);
            let found = self.march(fam, start, [sign * d[0], sign * d[1]], target, h, limit)?;
            match found {
                March::Hit(steps, p) if best.is_none_or(|(s, _)| steps < s) => best = Some((steps, p)),
                March::Exit => exited = true,
                _ => {}
            }
        }
        match best {
            Some((_, p)) => Ok(p),
            None if exited => Err(WebError::WalkExit { leg: leg + 1 }),
            None => Err(WebError::MissedCrossing { leg: leg + 1 }),
        }
    }

    fn march(&self, fam: usize, start: Pt, reference: Pt, target: &Leaf, h: f64, n: usize) -> Result<March, WebError> {
        let Ok(mut r) = self.dir(fam, start, reference) else {
            return Ok(March::Exit);
        };
        let mut p = start;
        for k in 0..n {
            let Ok((q, nr)) = self.step(fam, p, r, h) else {
                return Ok(March::Exit);
            };
            if let Some((s, j, t)) = first_crossing(p, q, target) {
                if !(k == 0 && s < 1e-9) {
                    let x = self.refine(fam, p, r, s * h, target, j, t)?;
                    return Ok(March::Hit(k + 1, x));
                }
            }
            p = q;
            r = nr;
        }
        Ok(March::Miss)
    }

    /// Newton on `walk(theta) = target(phi)` with RK4 substeps from the
    /// bracketing nodes.
    #[allow(clippy::too_many_arguments)]
    fn refine(&self, fam: usize, p: Pt, r: Pt, theta0: f64, target: &Leaf, j: usize, t: f64) -> Result<Pt, WebError> {
        let q0 = target.pts[j];
        let qr = target.refs[j];
        let seg = dist(target.pts[j], target.pts[j + 1]);
        let (mut theta, mut phi) = (theta0, t * seg);
        let mut best = None;
        for _ in 0..50 {
            let (w, _) = self.step(fam, p, r, theta)?;
            let (v, _) = self.step(target.fam, q0, qr, phi)?;
            let g = [w[0] - v[0], w[1] - v[1]];
            let gn = g[0].hypot(g[1]);
            best = Some(w);
            if gn <= 1e-15 * (1.0 + w[0].abs() + w[1].abs()) {
                break;
            }
            let dw = self.dir(fam, w, r)?;
            let dv = self.dir(target.fam, v, qr)?;
            // [dw, -dv] [dtheta, dphi]^T = -g
            let det = dw[0] * -dv[1] - -dv[0] * dw[1];
            if det.abs() < 1e-14 {
                break;
            }
            let dt = (-g[0] * -dv[1] - -dv[0] * -g[1]) / det;
            let dp = (dw[0] * -g[1] - dw[1] * -g[0]) / det;
            theta += dt;
            phi += dp;
            if dt.abs() + dp.abs() <= 1e-16 * (1.0 + theta.abs() + phi.abs()) {
                let (w, _) = self.step(fam, p, r, theta)?;
                best = Some(w);
                break;
            }
        }
        Ok(best.expect("at least one iteration"))
    }

    fn hexagon(&self, c: Pt, eps: f64, steps: usize, orient: Orientation) -> Result<f64, WebError> {
        let h = eps / steps as f64;
        let n = 8 * steps;
        let curves = [self.curve(0, c, h, n)?, self.curve(1, c, h, n)?, self.curve(2, c, h, n)?];
        let first = &curves[orient.families[0]];
        let origin = first.pts.iter().position(|p| *p == c).expect("center on its curve");
        let s0 = if orient.side > 0 {
            first.pts.get(origin + steps)
        } else {
            origin.checked_sub(steps).and_then(|i| first.pts.get(i))
        };
        let Some(&s0) = s0 else {
            return Err(WebError::WalkExit { leg: 0 });
        };
        let mut s = s0;
        for (leg, (fam, tgt)) in orient.legs().into_iter().enumerate() {
            s = self.leg(leg, fam, s, &curves[tgt], h, n)?;
        }
        Ok(dist(s, s0))
    }
}

enum March {
    Hit(usize, Pt),
    Exit,
    Miss,
}

/// First crossing of segment `p q` with `target`: (param on `p q`, target
/// segment index, param on it).
fn first_crossing(p: Pt, q: Pt, target: &Leaf) -> Option<(f64, usize, f64)> {
    let (xmin, xmax) = (p[0].min(q[0]), p[0].max(q[0]));
    let (ymin, ymax) = (p[1].min(q[1]), p[1].max(q[1]));
    let mut best: Option<(f64, usize, f64)> = None;
    let e = [q[0] - p[0], q[1] - p[1]];
    for j in 0..target.pts.len().saturating_sub(1) {
        let (a, b) = (target.pts[j], target.pts[j + 1]);
        if a[0].max(b[0]) < xmin || a[0].min(b[0]) > xmax || a[1].max(b[1]) < ymin || a[1].min(b[1]) > ymax {
            continue;
        }
        let f = [b[0] - a[0], b[1] - a[1]];
        let den = e[0] * f[1] - e[1] * f[0];
        if den == 0.0 {
            continue;
        }
        let w = [a[0] - p[0], a[1] - p[1]];
        let s = (w[0] * f[1] - w[1] * f[0]) / den;
        let t = (w[0] * e[1] - w[1] * e[0]) / den;
        if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t) && best.is_none_or(|(bs, _, _)| s < bs) {
            best = Some((s, j, t));
        }
    }
    best
}

/// Briançon hexagon closure around `center` for each `eps`.
///
/// The RK4 step count per `eps` of arclength is doubled until the largest
/// hexagon's endpoint changes by at most `tol * scale`, so numerical closure
/// error decays like `eps^5` on hexagonal webs.
pub fn hexagon_closure(web: &ThreeWeb, center: Pt, opts: &HexagonOptions) -> Result<HexagonReport, WebError> {
    if opts.eps.is_empty() || opts.eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(WebError::Invalid("eps values must be positive".into()));
    }
    if !web.region.contains(center[0], center[1]) {
        return Err(WebError::OutsideRegion { x: center[0], y: center[1] });
    }
    web.forms_at(center[0], center[1])?;
    let walker = Walker { web };
    let mut first_err = None;
    for orient in Orientation::all() {
        match closure_with(&walker, center, opts, orient) {
            Ok(r) => return Ok(r),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.expect("orientations are tried"))
}

fn closure_with(
    walker: &Walker,
    center: Pt,
    opts: &HexagonOptions,
    orient: Orientation,
) -> Result<HexagonReport, WebError> {
    let scale = walker.web.region.size();
    let eps_max = opts.eps.iter().cloned().fold(0.0, f64::max);

    let mut steps = 8;
    let mut current = walker.hexagon(center, eps_max, steps, orient)?;
    let mut defect_max = current;
    while 2 * steps <= opts.max_steps {
        let finer = walker.hexagon(center, eps_max, 2 * steps, orient)?;
        let settled = (finer - current).abs() <= opts.tol * scale;
        defect_max = if settled { current } else { finer };
        if settled {
            break;
        }
        steps *= 2;
        current = finer;
    }

    let mut defects = Vec::with_capacity(opts.eps.len());
    for &e in &opts.eps {
        defects.push(if e == eps_max { defect_max } else { walker.hexagon(center, e, steps, orient)? });
    }
    let slope = decay_slope(&opts.eps, &defects, 1e-12 * scale);
    let verdict = verdict(&opts.eps, &defects, opts.tol * scale, scale);
    Ok(HexagonReport {
        center,
        eps: opts.eps.clone(),
        defects,
        slope,
        verdict,
        steps,
        tol: opts.tol,
        scale,
        orientation: orient,
    })
}

/// Log-log slope over the defects above `floor`. Defects at the roundoff
/// floor carry no rate information; with fewer than two above it the decay
/// is reported as unbounded.
pub(crate) fn decay_slope(eps: &[f64], defects: &[f64], floor: f64) -> f64 {
    let (e, d): (Vec<f64>, Vec<f64>) =
        eps.iter().zip(defects).filter(|(_, d)| **d > floor).map(|(e, d)| (*e, *d)).unzip();
    if e.len() < 2 {
        f64::INFINITY
    } else {
        loglog_slope(&e, &d)
    }
}

/// Decision rule on defects, `tol_abs = tol * scale`.
///
/// Hexagonal: at least three sizes, each halving of `eps` shrinks the defect
/// by a factor of at least 6 (or the smaller defect is at roundoff level), and
/// the smallest-`eps` defect is at most `100 tol_abs`.
/// Non-hexagonal: defects above `100 tol_abs` whose local decay orders
/// `log(d_i / d_j) / log(eps_i / eps_j)` are at least 1 and agree to within 1.
pub(crate) fn verdict(eps: &[f64], defects: &[f64], tol_abs: f64, scale: f64) -> Verdict {
    let mut pairs: Vec<(f64, f64)> = eps.iter().copied().zip(defects.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let floor = 1e-12 * scale;
    let (_, d_min) = pairs[0];
    let decays = pairs.windows(2).all(|w| w[0].1 <= floor || w[1].1 >= 6.0 * w[0].1);
    if pairs.len() >= 3 && decays && d_min <= 100.0 * tol_abs {
        return Verdict::Hexagonal;
    }
    let large = pairs.iter().all(|(_, d)| *d > 100.0 * tol_abs);
    let orders: Vec<f64> = pairs.windows(2).map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln()).collect();
    let stable = orders.iter().all(|m| m.is_finite() && *m >= 1.0 && (m - orders[0]).abs() <= 1.0);
    if pairs.len() >= 2 && large && stable {
        Verdict::NonHexagonal
    } else {
        Verdict::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::super::{explicit_web, Region};
    use super::*;
    use crate::geometry::ImplicitOde;

    fn cubic_web(a: &str, b: &str) -> ThreeWeb {
        let ode = ImplicitOde::depressed_cubic(a, b).unwrap();
        ThreeWeb::from_ode(ode, Region::around(-1.0, 0.1, 0.64).unwrap()).unwrap()
    }

    #[test]
    fn parallel_lines_close_exactly() {
        let web = explicit_web([["0", "1"], ["1", "0"], ["1", "-1"]], Region::around(0.0, 0.0, 1.0).unwrap()).unwrap();
        let r = hexagon_closure(&web, [0.0, 0.0], &HexagonOptions::default()).unwrap();
        assert!(r.defects.iter().all(|d| *d <= 1e-10), "{r:?}");
        assert_eq!(r.verdict, Verdict::Hexagonal);
    }

    #[test]
    fn crossing_finder() {
        let target = Leaf { pts: vec![[0.0, -1.0], [0.0, 1.0]], refs: vec![[0.0, 1.0]], fam: 0 };
        let (s, j, t) = first_crossing([-1.0, 0.5], [1.0, 0.5], &target).unwrap();
        assert_eq!((s, j, t), (0.5, 0, 0.75));
        assert!(first_crossing([1.0, 0.5], [2.0, 0.5], &target).is_none());
    }

    #[test]
    fn slope_ignores_roundoff() {
        let eps = [0.16, 0.08, 0.04];
        assert_eq!(decay_slope(&eps, &[1e-15, 5e-17, 4e-16], 1e-12), f64::INFINITY);
        let s = decay_slope(&eps, &[8e-3, 1e-3, 1e-15], 1e-12);
        assert!((s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn verdict_rules() {
        let eps = [0.16, 0.08, 0.04];
        assert_eq!(verdict(&eps, &[3.2e-9, 1e-10, 3e-12], 1e-9, 1.0), Verdict::Hexagonal);
        assert_eq!(verdict(&eps, &[1e-15, 2e-16, 3e-16], 1e-9, 1.0), Verdict::Hexagonal);
        assert_eq!(verdict(&eps, &[2.56e-2, 6.4e-3, 1.6e-3], 1e-9, 1.0), Verdict::NonHexagonal);
        assert_eq!(verdict(&eps, &[3.2e-3, 4e-4, 5e-5], 1e-9, 1.0), Verdict::NonHexagonal);
        assert_eq!(verdict(&eps, &[1e-2, 1e-2, 1e-2], 1e-9, 1.0), Verdict::Inconclusive);
        assert_eq!(verdict(&eps, &[1e-2, 5e-3, 1e-4], 1e-9, 1.0), Verdict::Inconclusive);
        assert_eq!(verdict(&eps[..2], &[3.2e-9, 1e-10], 1e-9, 1.0), Verdict::Inconclusive);
    }

    #[test]
    fn cusp_normal_form_and_control() {
        let r = hexagon_closure(&cubic_web("2*x", "y"), [-1.0, 0.1], &HexagonOptions::default()).unwrap();
        let c = hexagon_closure(&cubic_web("x", "y"), [-1.0, 0.1], &HexagonOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Hexagonal);
        assert_eq!(c.verdict, Verdict::NonHexagonal, "{c:?}");
        assert!(c.slope <= r.slope - 1.0);
    }
}
