use std::sync::Arc;

use rayon::prelude::*;

use super::{g2, g3, vieta, EquivariantError, EquivariantIntegral, Pair};
use crate::expr::Expression;
use crate::hexagonality::{hexagon_closure, HexagonOptions, HexagonReport, Region, ThreeWeb, WebError, WebSource};
use crate::json::{Json, ToJson};
use crate::numeric::{linspace, monic_real_roots};

/// Sign of the first downstairs coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VietaConvention {
    /// `(x, y) = (A, B)`, the coefficients of `t^3 + A t + B`.
    Cubic,
    /// `(x, y) = (p^2 + pq + q^2, pq(p + q)) = (-A, B)`.
    Positive,
}

impl VietaConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            VietaConvention::Cubic => "cubic",
            VietaConvention::Positive => "positive",
        }
    }

    pub fn map(&self, pt: Pair) -> Pair {
        let (a, b) = vieta(pt);
        match self {
            VietaConvention::Cubic => (a, b),
            VietaConvention::Positive => (-a, b),
        }
    }

    fn jacobian(&self, (p, q): Pair) -> [[f64; 2]; 2] {
        let s = match self {
            VietaConvention::Cubic => -1.0,
            VietaConvention::Positive => 1.0,
        };
        [[s * (2.0 * p + q), s * (p + 2.0 * q)], [2.0 * p * q + q * q, p * p + 2.0 * p * q]]
    }

    /// Root pair `p > q > -p - q` over `(x, y)`, polished by Newton.
    pub fn invert(&self, x: f64, y: f64) -> Result<Pair, EquivariantError> {
        let fail = |reason: &str| EquivariantError::VietaInversion { x, y, reason: reason.into() };
        let a = match self {
            VietaConvention::Cubic => x,
            VietaConvention::Positive => -x,
        };
        let roots = monic_real_roots(&[y, a, 0.0], 1e-10);
        if roots.roots.len() != 3 {
            return Err(fail("fewer than three distinct real roots"));
        }
        let mut pt = (roots.roots[2].value, roots.roots[1].value);
        let scale = 1.0 + x.abs() + y.abs();
        for _ in 0..30 {
            let (fx, fy) = self.map(pt);
            let (rx, ry) = (fx - x, fy - y);
            if rx.abs().max(ry.abs()) <= 1e-15 * scale {
                return Ok(pt);
            }
            let j = self.jacobian(pt);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                return Err(fail("singular Jacobian"));
            }
            pt.0 -= (j[1][1] * rx - j[0][1] * ry) / det;
            pt.1 -= (-j[1][0] * rx + j[0][0] * ry) / det;
        }
        let (fx, fy) = self.map(pt);
        if (fx - x).abs().max((fy - y).abs()) <= 1e-12 * scale {
            Ok(pt)
        } else {
            Err(fail("Newton did not converge"))
        }
    }
}

/// Three functions upstairs whose level sets form a D3-symmetric web.
#[derive(Debug, Clone)]
pub enum Upstairs {
    /// `u, u2, u3`.
    Integral(EquivariantIntegral),
    /// `F(p, q)`, `F(q, -p - q)`, `F(-p - q, p)`, required to sum to zero.
    Function { f: Expression, fp: Expression, fq: Expression },
}

impl Upstairs {
    pub fn function(f: Expression) -> Result<Self, EquivariantError> {
        if f.vars() != ["p", "q"] {
            return Err(EquivariantError::Invalid("F must be an expression over (p, q)".into()));
        }
        let (fp, fq) = (f.differentiate("p")?, f.differentiate("q")?);
        let up = Upstairs::Function { f, fp, fq };
        for k in 0..24 {
            let t = 0.29 + k as f64 * std::f64::consts::PI / 12.0;
            let r = 0.2 + 0.05 * (k % 7) as f64;
            let pt = (r * t.cos(), r * t.sin());
            let v = up.values(pt)?;
            let scale = 1.0 + v.iter().map(|x| x.abs()).sum::<f64>();
            if v.iter().sum::<f64>().abs() > 1e-10 * scale {
                return Err(EquivariantError::Invariant(format!("F + G + H != 0 at {pt:?}")));
            }
        }
        Ok(up)
    }

    pub fn values(&self, pt: Pair) -> Result<[f64; 3], EquivariantError> {
        match self {
            Upstairs::Integral(u) => Ok([u.u(pt)?, u.u2(pt)?, u.u3(pt)?]),
            Upstairs::Function { f, .. } => {
                let (p, q) = pt;
                Ok([f.eval(&[p, q])?, f.eval(&[q, -p - q])?, f.eval(&[-p - q, p])?])
            }
        }
    }

    /// `(d/dp, d/dq)` of the three functions.
    pub fn gradients(&self, pt: Pair) -> Result<[[f64; 2]; 3], EquivariantError> {
        match self {
            Upstairs::Integral(u) => {
                let g = u.grad(pt)?;
                // u2 = -u o g2 with g2 (p, q) = (-p - q, q)
                let h = u.grad(g2(pt))?;
                let g2d = [h[0], h[0] - h[1]];
                // u3 = -u o g3 with g3 (p, q) = (q, p)
                let k = u.grad(g3(pt))?;
                Ok([g, g2d, [-k[1], -k[0]]])
            }
            Upstairs::Function { fp, fq, .. } => {
                let (p, q) = pt;
                let d = |at: [f64; 2]| -> Result<[f64; 2], EquivariantError> { Ok([fp.eval(&at)?, fq.eval(&at)?]) };
                let a = d([p, q])?;
                let b = d([q, -p - q])?;
                let c = d([-p - q, p])?;
                Ok([a, [-b[1], b[0] - b[1]], [c[1] - c[0], -c[0]]])
            }
        }
    }

    /// Downstairs directions of the three level curves through the image of `pt`.
    pub fn pushed_directions(&self, pt: Pair, convention: VietaConvention) -> Result<[[f64; 2]; 3], EquivariantError> {
        let j = convention.jacobian(pt);
        let grads = self.gradients(pt)?;
        Ok(grads.map(|g| {
            let t = [-g[1], g[0]];
            [j[0][0] * t[0] + j[0][1] * t[1], j[1][0] * t[0] + j[1][1] * t[1]]
        }))
    }

    fn directions_at(&self, x: f64, y: f64, convention: VietaConvention) -> Result<[[f64; 2]; 3], EquivariantError> {
        let pt = convention.invert(x, y)?;
        let d = self.pushed_directions(pt, convention)?;
        for i in 0..3 {
            let n = d[i][0].hypot(d[i][1]);
            let (u, v) = (d[i], d[(i + 1) % 3]);
            if n == 0.0 || (u[0] * v[1] - u[1] * v[0]).abs() <= 1e-10 * n * v[0].hypot(v[1]) {
                return Err(EquivariantError::ParallelSlopes { x, y });
            }
        }
        Ok(d)
    }
}

/// Coefficients `[c3, c2, c1, c0]` of `prod (dx_i P - dy_i)`, scaled to unit
/// max norm; the roots in `P` are the three slopes.
fn cubic_from_directions(d: &[[f64; 2]; 3]) -> [f64; 4] {
    let mut out = vec![1.0];
    for di in d {
        let mut next = vec![0.0; out.len() + 1];
        for (k, v) in out.iter().enumerate() {
            next[k] += v * di[0];
            next[k + 1] -= v * di[1];
        }
        out = next;
    }
    let m = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    [out[0] / m, out[1] / m, out[2] / m, out[3] / m]
}

#[derive(Debug, Clone)]
pub struct GeneratedOde {
    pub convention: VietaConvention,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `slopes[j][i]` at `(xs[i], ys[j])`; infinite for vertical directions.
    pub slopes: Vec<Vec<[f64; 3]>>,
    /// Sampled cubic in the slope, see [`GeneratedOde::cubic_at`].
    pub coefficients: Vec<Vec<[f64; 4]>>,
    pub web: ThreeWeb,
    pub report: HexagonReport,
}

impl GeneratedOde {
    /// Evaluates the sampled cubic `c3 P^3 + c2 P^2 + c1 P + c0` at grid node `(i, j)`.
    pub fn cubic_at(&self, i: usize, j: usize, slope: f64) -> f64 {
        let c = self.coefficients[j][i];
        ((c[0] * slope + c[1]) * slope + c[2]) * slope + c[3]
    }
}

impl ToJson for GeneratedOde {
    fn to_json(&self) -> Json {
        let rows = |f: &dyn Fn(usize, usize) -> Json| {
            Json::Arr((0..self.ys.len()).map(|j| Json::Arr((0..self.xs.len()).map(|i| f(i, j)).collect())).collect())
        };
        Json::obj([
            ("vieta", self.convention.as_str().into()),
            ("xs", Json::nums(&self.xs)),
            ("ys", Json::nums(&self.ys)),
            ("slopes", rows(&|i, j| Json::nums(&self.slopes[j][i]))),
            ("coefficients", rows(&|i, j| Json::nums(&self.coefficients[j][i]))),
            ("hexagon", self.report.to_json()),
        ])
    }
}

fn web_error(e: EquivariantError) -> WebError {
    match e {
        EquivariantError::VietaInversion { x, y, .. } => WebError::RootCollision { x, y },
        EquivariantError::ParallelSlopes { x, y } => WebError::Parallel { x, y },
        EquivariantError::Web(w) => w,
        other => WebError::Invalid(other.to_string()),
    }
}

/// Samples the downstairs web of `upstairs` on an `n x n` grid over `region`
/// and runs the hexagon walk at the region center.
pub fn generate_ode(
    upstairs: &Upstairs,
    region: Region,
    n: usize,
    convention: VietaConvention,
    hexagon: &HexagonOptions,
) -> Result<GeneratedOde, EquivariantError> {
    if n < 2 {
        return Err(EquivariantError::Invalid("grid needs at least 2 nodes per axis".into()));
    }
    let xs = linspace(region.x_min, region.x_max, n);
    let ys = linspace(region.y_min, region.y_max, n);
    let rows: Vec<Vec<[[f64; 2]; 3]>> = ys
        .par_iter()
        .map(|&y| xs.iter().map(|&x| upstairs.directions_at(x, y, convention)).collect())
        .collect::<Result<_, _>>()?;
    let slopes = rows.iter().map(|r| r.iter().map(|d| d.map(|v| v[1] / v[0])).collect()).collect();
    let coefficients = rows.iter().map(|r| r.iter().map(cubic_from_directions).collect()).collect();

    let up = Arc::new(upstairs.clone());
    let forms = move |x: f64, y: f64| {
        let d = up.directions_at(x, y, convention).map_err(web_error)?;
        Ok(d.map(|v| {
            let n = v[0].hypot(v[1]);
            [-v[1] / n, v[0] / n]
        }))
    };
    let web = ThreeWeb::new(WebSource::Custom(Arc::new(forms)), region)?;
    let (cx, cy) = region.center();
    let report = hexagon_closure(&web, [cx, cy], hexagon)?;
    Ok(GeneratedOde { convention, xs, ys, slopes, coefficients, web, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hexagonality::Verdict;

    fn example_cubic(x: f64, y: f64, p: f64) -> f64 {
        y * p.powi(3) - 2.0 / 3.0 * x * x * p * p + x * y * p + (2.0 * x.powi(3) - 27.0 * y * y) / 27.0
    }

    /// The same cubic on a unit direction `(dx, dy)`, so vertical slopes count.
    fn example_form(x: f64, y: f64, slope: f64) -> f64 {
        let (dx, dy): (f64, f64) = if slope.is_finite() { (1.0, slope) } else { (0.0, 1.0) };
        let n = dx.hypot(dy);
        let (dx, dy) = (dx / n, dy / n);
        y * dy.powi(3) - 2.0 / 3.0 * x * x * dy * dy * dx
            + x * y * dy * dx * dx
            + (2.0 * x.powi(3) - 27.0 * y * y) / 27.0 * dx.powi(3)
    }

    fn p_minus_q() -> Upstairs {
        Upstairs::function(Expression::parse("p - q", &["p", "q"]).unwrap()).unwrap()
    }

    #[test]
    fn worked_example_slope_at_one_zero() {
        let d = p_minus_q().pushed_directions((1.0, 0.0), VietaConvention::Positive).unwrap();
        assert_eq!(VietaConvention::Positive.map((1.0, 0.0)), (1.0, 0.0));
        assert!((d[0][1] / d[0][0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(example_cubic(1.0, 0.0, 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn linear_integral_slope() {
        let u = Upstairs::Integral(EquivariantIntegral::parse("1", "0").unwrap());
        let d = u.pushed_directions((1.0, 0.0), VietaConvention::Cubic).unwrap();
        assert_eq!(VietaConvention::Cubic.map((1.0, 0.0)), (-1.0, 0.0));
        assert!((d[0][1] / d[0][0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sibling_gradients_match_functions() {
        let u = Upstairs::Integral(EquivariantIntegral::parse("3*B + A", "-A").unwrap());
        let f = p_minus_q();
        for up in [u, f] {
            let pt = (0.63, -0.21);
            let g = up.gradients(pt).unwrap();
            let h = 1e-6;
            for k in 0..3 {
                let dp =
                    (up.values((pt.0 + h, pt.1)).unwrap()[k] - up.values((pt.0 - h, pt.1)).unwrap()[k]) / (2.0 * h);
                let dq =
                    (up.values((pt.0, pt.1 + h)).unwrap()[k] - up.values((pt.0, pt.1 - h)).unwrap()[k]) / (2.0 * h);
                assert!((g[k][0] - dp).abs() < 1e-8 && (g[k][1] - dq).abs() < 1e-8, "{k}");
            }
        }
    }

    #[test]
    fn inversion_round_trip() {
        for conv in [VietaConvention::Cubic, VietaConvention::Positive] {
            let pt = (1.1, 0.3);
            let (x, y) = conv.map(pt);
            let back = conv.invert(x, y).unwrap();
            assert!((back.0 - pt.0).abs() < 1e-13 && (back.1 - pt.1).abs() < 1e-13);
        }
        assert!(VietaConvention::Positive.invert(-1.0, 0.0).is_err());
    }

    #[test]
    fn worked_example_is_generated_and_hexagonal() {
        let region = Region::new(3.0, 5.0, -1.0, 1.0).unwrap();
        let g = generate_ode(&p_minus_q(), region, 5, VietaConvention::Positive, &HexagonOptions::default()).unwrap();
        for (j, &y) in g.ys.iter().enumerate() {
            for (i, &x) in g.xs.iter().enumerate() {
                for s in g.slopes[j][i] {
                    assert!(example_form(x, y, s).abs() <= 1e-8 * (1.0 + x.powi(3)), "{x} {y} {s}");
                    if s.is_finite() {
                        assert!(g.cubic_at(i, j, s).abs() <= 1e-10 * (1.0 + s.abs()).powi(3));
                    }
                }
            }
        }
        assert_eq!(g.report.verdict, Verdict::Hexagonal, "{:?}", g.report.defects);
        assert!(generate_ode(
            &p_minus_q(),
            Region::new(-1.0, 1.0, -1.0, 1.0).unwrap(),
            3,
            VietaConvention::Positive,
            &HexagonOptions::default()
        )
        .is_err());
    }

    #[test]
    fn integral_webs_are_hexagonal() {
        let u = Upstairs::Integral(EquivariantIntegral::parse("3*B + A^2", "-A").unwrap());
        let region = Region::new(-5.0, -3.0, -1.0, 1.0).unwrap();
        let g = generate_ode(&u, region, 3, VietaConvention::Cubic, &HexagonOptions::default()).unwrap();
        assert_eq!(g.report.verdict, Verdict::Hexagonal, "{:?}", g.report.defects);
    }

    #[test]
    fn sum_identity_is_enforced() {
        let bad = Expression::parse("p*q", &["p", "q"]).unwrap();
        assert!(matches!(Upstairs::function(bad), Err(EquivariantError::Invariant(_))));
    }
}
