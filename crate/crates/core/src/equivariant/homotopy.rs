use rayon::prelude::*;

use super::{g1, g2, g3, orbit, EquivariantError, EquivariantIntegral, Pair};
use crate::expr::Expression;
use crate::json::{Json, ToJson};
use crate::numeric::rk4_step;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomotopyOptions {
    /// RK4 steps in `t` from 0 to 1.
    pub steps: usize,
    /// Validation samples lie in the disc of this radius.
    pub radius: f64,
    pub samples: usize,
    /// Largest accepted relative residual of the pointwise least-squares solve.
    pub tol: f64,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        Self { steps: 64, radius: 0.2, samples: 60, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyResult {
    pub samples: Vec<Pair>,
    /// `psi_1` at each sample.
    pub images: Vec<Pair>,
    /// Largest `|u_target(psi(p, q)) - u0(p, q)|`.
    pub residual: f64,
    /// Largest `|psi(g(z)) - g(psi(z))|` over the three generators.
    pub equivariance: f64,
    /// Largest relative least-squares residual met along the flow.
    pub solve_residual: f64,
    pub steps: usize,
}

impl ToJson for HomotopyResult {
    fn to_json(&self) -> Json {
        let pairs = |v: &[Pair]| Json::Arr(v.iter().map(|p| Json::nums(&[p.0, p.1])).collect());
        Json::obj([
            ("steps", self.steps.into()),
            ("residual", self.residual.into()),
            ("equivariance", self.equivariance.into()),
            ("solve_residual", self.solve_residual.into()),
            ("samples", pairs(&self.samples)),
            ("images", pairs(&self.images)),
        ])
    }
}

struct Homotopy<'a> {
    u0: EquivariantIntegral,
    u1: &'a EquivariantIntegral,
    tol: f64,
}

impl Homotopy<'_> {
    /// `(alpha, beta)` at the orbit of `z` and the relative residual.
    fn coefficients(&self, z: Pair, t: f64) -> Result<([f64; 2], f64), EquivariantError> {
        let frame = orbit(z.0, z.1);
        let a = frame.a;
        let mut rows = [[0.0; 2]; 6];
        let mut rhs = [0.0; 6];
        for (k, &(p, q)) in frame.images.iter().enumerate() {
            let g0 = self.u0.grad((p, q))?;
            let g1 = self.u1.grad((p, q))?;
            let gp = (1.0 - t) * g0[0] + t * g1[0];
            let gq = (1.0 - t) * g0[1] + t * g1[1];
            rows[k] = [p * gp + q * gq, (a / 3.0 + p * q + q * q) * gp - (2.0 * a / 3.0 + q * q) * gq];
            rhs[k] = self.u0.u((p, q))? - self.u1.u((p, q))?;
        }
        let rhs_max = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rhs_max == 0.0 {
            return Ok(([0.0, 0.0], 0.0));
        }
        let mut n = [[0.0; 2]; 2];
        let mut r = [0.0; 2];
        for k in 0..6 {
            for i in 0..2 {
                r[i] += rows[k][i] * rhs[k];
                for j in 0..2 {
                    n[i][j] += rows[k][i] * rows[k][j];
                }
            }
        }
        let det = n[0][0] * n[1][1] - n[0][1] * n[1][0];
        if !(det.abs() > 1e-12 * n[0][0] * n[1][1]) {
            return Err(EquivariantError::SingularSystem { p: z.0, q: z.1 });
        }
        let x = [(n[1][1] * r[0] - n[0][1] * r[1]) / det, (n[0][0] * r[1] - n[1][0] * r[0]) / det];
        let res = (0..6).fold(0.0f64, |m, k| m.max((rows[k][0] * x[0] + rows[k][1] * x[1] - rhs[k]).abs()));
        let rel = res / rhs_max;
        if rel > self.tol {
            return Err(EquivariantError::Inadmissible { residual: rel, p: z.0, q: z.1 });
        }
        Ok((x, rel))
    }

    /// The equivariant field `(xi, eta)` at `z`.
    fn field(&self, z: Pair, t: f64, worst: &mut f64) -> Result<[f64; 2], EquivariantError> {
        let ([alpha, beta], rel) = self.coefficients(z, t)?;
        *worst = worst.max(rel);
        let (p, q) = z;
        let a = -(p * p + p * q + q * q);
        Ok([p * alpha + (a / 3.0 + p * q + q * q) * beta, q * alpha - (2.0 * a / 3.0 + q * q) * beta])
    }

    fn flow(&self, z: Pair, steps: usize) -> Result<(Pair, f64), EquivariantError> {
        let h = 1.0 / steps as f64;
        let mut y = [z.0, z.1];
        let mut worst = 0.0;
        for k in 0..steps {
            let mut f = |t: f64, w: &[f64; 2]| self.field((w[0], w[1]), t, &mut worst);
            y = rk4_step(&mut f, k as f64 * h, &y, h)?;
        }
        Ok(((y[0], y[1]), worst))
    }
}

/// Relative mismatch above which `target` does not agree with `u0` at
/// leading order near the origin.
const LEADING_TOL: f64 = 1e-2;

/// Checks `|u_target - u0| <= LEADING_TOL |u0|` on a small circle: the
/// target must vanish like `(2q + p)^3` with the scaling of `u0`.
fn leading_order(u0: &EquivariantIntegral, target: &EquivariantIntegral, radius: f64) -> Result<(), EquivariantError> {
    let r = 1e-2 * radius;
    let mut worst = (0.0f64, (0.0, 0.0));
    let mut size = 0.0f64;
    for k in 0..24 {
        let th = 0.1 + k as f64 * std::f64::consts::PI / 12.0;
        let z = (r * th.cos(), r * th.sin());
        let base = u0.u(z)?;
        size = size.max(base.abs());
        let diff = (target.u(z)? - base).abs();
        if diff > worst.0 {
            worst = (diff, z);
        }
    }
    let rel = worst.0 / size;
    if !(rel <= LEADING_TOL) {
        return Err(EquivariantError::Inadmissible { residual: rel, p: worst.1 .0, q: worst.1 .1 });
    }
    Ok(())
}

/// Samples in the disc of radius `r`, placed off the mirror lines.
fn validation_samples(r: f64, n: usize) -> Vec<Pair> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let rho = r * (0.2 + 0.8 * ((k as f64 + 0.5) / n as f64).sqrt());
            let th = 0.1 + golden * k as f64;
            (rho * th.cos(), rho * th.sin())
        })
        .filter(|&(p, q)| {
            let s = p.hypot(q);
            [(p - q).abs(), (p + 2.0 * q).abs(), (q + 2.0 * p).abs()].iter().all(|d| *d > 0.05 * s)
        })
        .collect()
}

/// Flows the equivariant field solving the homotopy equation between
/// `u0 = p (2q + p)^3` and `target` and checks `target o psi_1 = u0`.
///
/// `(alpha, beta)` are solved pointwise by least squares over the orbit. The
/// target is rejected when it differs from `u0` at leading order near the
/// origin, when the orbit residual exceeds `opts.tol`, or when the flow
/// leaves ten times the sample radius.
pub fn homotopy_normalize(
    target: &EquivariantIntegral,
    opts: &HomotopyOptions,
) -> Result<HomotopyResult, EquivariantError> {
    if opts.steps == 0 || !(opts.radius > 0.0) || opts.samples == 0 || !(opts.tol > 0.0) {
        return Err(EquivariantError::Invalid("steps, radius, samples and tol must be positive".into()));
    }
    let h = Homotopy { u0: EquivariantIntegral::cusp(), u1: target, tol: opts.tol };
    leading_order(&h.u0, target, opts.radius)?;
    let samples = validation_samples(opts.radius, opts.samples);
    let runs: Vec<(Pair, f64, f64, f64)> = samples
        .par_iter()
        .map(|&z| {
            let (img, worst) = h.flow(z, opts.steps)?;
            if !(img.0.hypot(img.1) <= 10.0 * opts.radius) {
                return Err(EquivariantError::Inadmissible { residual: f64::INFINITY, p: z.0, q: z.1 });
            }
            let residual = (target.u(img)? - h.u0.u(z)?).abs();
            let mut equivariance = 0.0f64;
            for g in [g1, g2, g3] {
                let (gi, _) = h.flow(g(z), opts.steps)?;
                let want = g(img);
                equivariance = equivariance.max((gi.0 - want.0).abs().max((gi.1 - want.1).abs()));
            }
            Ok((img, residual, equivariance, worst))
        })
        .collect::<Result<_, EquivariantError>>()?;
    Ok(HomotopyResult {
        images: runs.iter().map(|r| r.0).collect(),
        residual: runs.iter().fold(0.0, |m, r| m.max(r.1)),
        equivariance: runs.iter().fold(0.0, |m, r| m.max(r.2)),
        solve_residual: runs.iter().fold(0.0, |m, r| m.max(r.3)),
        samples,
        steps: opts.steps,
    })
}

/// Closed-form `(alpha, beta, M)` for `u1 - u0 = 4/3 A L + p K + pq L + q^2 L`,
/// with `K, L` over `(A, B)`.
pub fn printed_coefficients(
    k: &Expression,
    l: &Expression,
    a: f64,
    b: f64,
    t: f64,
) -> Result<(f64, f64, f64), EquivariantError> {
    let at = [a, b];
    let kv = k.eval(&at)?;
    let lv = l.eval(&at)?;
    let ka = k.differentiate("A")?.eval(&at)?;
    let kb = k.differentiate("B")?.eval(&at)?;
    let la = l.differentiate("A")?.eval(&at)?;
    let lb = l.differentiate("B")?.eval(&at)?;
    let m = -24.0
        + (-48.0 * kv - 12.0 * a * ka - 18.0 * b * (kb + 2.0 * la) + 8.0 * a * a * lb) * t
        + (-24.0 * kv * kv - 2.0 * a * (6.0 * kv * ka + 25.0 * lv * lv)
            + 3.0 * b * (15.0 * ka * lv - 6.0 * kv * kb - 12.0 * kv * la)
            + 2.0 * a * a * (4.0 * kv * lb - 10.0 * lv * la - 5.0 * kb * lv)
            - 30.0 * a * b * lv * lb
            + (27.0 * b * b + 4.0 * a.powi(3)) * (ka * lb - kb * la))
            * t
            * t;
    let alpha = (6.0 * kv
        + (6.0 * kv * kv + 2.0 * a * a * (kb * lv - kv * lb) + 9.0 * b * (kv * la - ka * lv) + 10.0 * a * lv * lv) * t)
        / m;
    let beta = (-12.0 * lv + (6.0 * a * (kv * la - ka * lv) + 9.0 * b * (kv * lb - kb * lv) + 3.0 * kv * lv) * t) / m;
    Ok((alpha, beta, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaled() -> EquivariantIntegral {
        EquivariantIntegral::parse("3*B*(1 + A/10)", "-A*(1 + A/10)").unwrap()
    }

    #[test]
    fn identity_for_u0() {
        let r = homotopy_normalize(&EquivariantIntegral::cusp(), &HomotopyOptions::default()).unwrap();
        assert_eq!(r.residual, 0.0);
        assert!(r.samples.iter().zip(&r.images).all(|(a, b)| a == b));
    }

    #[test]
    fn scaled_target_is_normalized() {
        let r = homotopy_normalize(&scaled(), &HomotopyOptions::default()).unwrap();
        assert!(r.samples.len() >= 30);
        assert!(r.residual <= 1e-6, "{}", r.residual);
        assert!(r.equivariance <= 1e-8, "{}", r.equivariance);
    }

    #[test]
    fn linear_target_is_inadmissible() {
        let target = EquivariantIntegral::parse("1", "0").unwrap();
        let err = homotopy_normalize(&target, &HomotopyOptions::default()).unwrap_err();
        assert!(matches!(err, EquivariantError::Inadmissible { .. }), "{err}");
        let doubled = EquivariantIntegral::parse("6*B", "-2*A").unwrap();
        assert!(homotopy_normalize(&doubled, &HomotopyOptions::default()).is_err());
    }

    #[test]
    fn pointwise_solve_matches_printed_coefficients() {
        let target = scaled();
        let h = Homotopy { u0: EquivariantIntegral::cusp(), u1: &target, tol: 1e-6 };
        let vars = ["A", "B"];
        let k = Expression::parse("A/10", &vars).unwrap();
        let l = Expression::parse("0", &vars).unwrap();
        for (z, t) in [((0.11, 0.05), 0.0), ((-0.07, 0.13), 0.5), ((0.15, -0.02), 1.0)] {
            let ([alpha, beta], _) = h.coefficients(z, t).unwrap();
            let o = orbit(z.0, z.1);
            let (pa, pb, m) = printed_coefficients(&k, &l, o.a, o.b, t).unwrap();
            assert!((alpha - pa).abs() <= 1e-9 && (beta - pb).abs() <= 1e-9, "{alpha} {pa} {beta} {pb}");
            assert!((alpha + o.a / 10.0 / (4.0 + 0.6 * t * o.a)).abs() <= 1e-12);
            let a = o.a;
            assert!((m - (-24.0 - 6.0 * a * t - 0.36 * a * a * t * t)).abs() <= 1e-12);
        }
    }
}
