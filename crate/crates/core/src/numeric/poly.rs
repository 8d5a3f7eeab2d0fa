//! Real roots of monic polynomials of degree at most three.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRoot {
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyRoots {
    /// Ascending.
    pub roots: Vec<RealRoot>,
    pub complex_pairs: usize,
    /// Coefficient scale `max(1, |a|, sqrt|b|, cbrt|c|)` used for tolerances.
    pub scale: f64,
}

impl PolyRoots {
    pub fn real_count(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    pub fn values(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.value).collect()
    }
}

/// Coefficient scale of the monic polynomial with lower coefficients `lower`
/// (ascending, `lower[k]` multiplies `t^k`).
pub fn monic_scale(lower: &[f64]) -> f64 {
    let n = lower.len();
    let mut s: f64 = 1.0;
    for (k, c) in lower.iter().enumerate() {
        s = s.max(c.abs().powf(1.0 / (n - k) as f64));
    }
    s
}

fn eval(lower: &[f64], t: f64) -> (f64, f64, f64) {
    // value, first and second derivative of t^n + sum lower[k] t^k
    let n = lower.len();
    let mut v = 1.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for k in (0..n).rev() {
        d2 = d2 * t + 2.0 * d1;
        d1 = d1 * t + v;
        v = v * t + lower[k];
    }
    (v, d1, d2)
}

fn newton_polish(lower: &[f64], mut t: f64, which: usize) -> f64 {
    // which = 0 polishes a root of the polynomial, 1 a root of its derivative
    let residual = |t: f64| {
        let (v, d1, d2) = eval(lower, t);
        if which == 0 {
            (v, d1)
        } else {
            (d1, d2)
        }
    };
    let (mut r, _) = residual(t);
    for _ in 0..60 {
        let (f, df) = residual(t);
        if f == 0.0 || df == 0.0 || !df.is_finite() {
            break;
        }
        let next = t - f / df;
        let (rn, _) = residual(next);
        if !(rn.abs() < r.abs()) {
            break;
        }
        t = next;
        r = rn;
    }
    t
}

/// Real roots of `t^n + lower[n-1] t^(n-1) + ... + lower[0]`, `n = lower.len()`
/// in 1..=3, with multiplicities decided by clustering at `rel_tol * scale`.
///
/// A complex pair whose imaginary part is below the clustering tolerance is
/// reported as a real double root.
pub fn monic_real_roots(lower: &[f64], rel_tol: f64) -> PolyRoots {
    let n = lower.len();
    assert!((1..=3).contains(&n), "degree {n} not supported");
    let s = monic_scale(lower);
    let tol = rel_tol * s;
    let mut candidates = match n {
        1 => vec![-lower[0]],
        2 => quadratic_candidates(lower[1], lower[0], tol),
        _ => cubic_candidates(lower, s, tol),
    };
    for c in candidates.iter_mut() {
        *c = newton_polish(lower, *c, 0);
    }
    candidates.sort_by(|a, b| a.total_cmp(b));

    let mut roots: Vec<RealRoot> = Vec::new();
    let mut group: Vec<f64> = Vec::new();
    let flush = |group: &mut Vec<f64>, roots: &mut Vec<RealRoot>| {
        if group.is_empty() {
            return;
        }
        let m = group.len();
        let mean = group.iter().sum::<f64>() / m as f64;
        let value = match m {
            1 => mean,
            2 if n >= 2 => {
                let v = newton_polish(lower, mean, 1);
                if (v - mean).abs() <= tol {
                    v
                } else {
                    mean
                }
            }
            3 => -lower[2] / 3.0,
            _ => mean,
        };
        roots.push(RealRoot { value, multiplicity: m });
        group.clear();
    };
    for c in candidates {
        if let Some(&last) = group.last() {
            if c - last > tol {
                flush(&mut group, &mut roots);
            }
        }
        group.push(c);
    }
    flush(&mut group, &mut roots);
    let real: usize = roots.iter().map(|r| r.multiplicity).sum();
    PolyRoots { roots, complex_pairs: (n - real) / 2, scale: s }
}

fn quadratic_candidates(a: f64, b: f64, tol: f64) -> Vec<f64> {
    let disc = a * a - 4.0 * b;
    if disc >= 0.0 {
        let q = -0.5 * (a + a.signum() * disc.sqrt());
        if q == 0.0 {
            vec![0.0, 0.0]
        } else {
            vec![q, b / q]
        }
    } else if 0.5 * (-disc).sqrt() <= tol {
        vec![-0.5 * a, -0.5 * a]
    } else {
        Vec::new()
    }
}

fn cubic_candidates(lower: &[f64], s: f64, tol: f64) -> Vec<f64> {
    let (a, b, c) = (lower[2] / s, lower[1] / (s * s), lower[0] / (s * s * s));
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let mut out = Vec::with_capacity(3);
    if disc < 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for k in 0..3 {
            out.push(m * (theta - 2.0 * PI * k as f64 / 3.0).cos());
        }
    } else {
        let w = -0.5 * q - q.signum() * disc.sqrt();
        let cr = w.cbrt();
        let u1 = if cr == 0.0 { 0.0 } else { cr - p / (3.0 * cr) };
        out.push(u1);
        // deflate: u^2 + u1 u + (u1^2 + p)
        for r in quadratic_candidates(u1, u1 * u1 + p, tol / s) {
            out.push(r);
        }
    }
    out.into_iter().map(|u| (u - shift) * s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roots_of(lower: &[f64]) -> PolyRoots {
        monic_real_roots(lower, 1e-7)
    }

    #[test]
    fn double_plus_simple() {
        // (t+1)^2 (t-2) = t^3 - 3t - 2
        let r = roots_of(&[-2.0, -3.0, 0.0]);
        assert_eq!(r.roots.len(), 2);
        assert!((r.roots[0].value + 1.0).abs() < 1e-12);
        assert_eq!(r.roots[0].multiplicity, 2);
        assert!((r.roots[1].value - 2.0).abs() < 1e-12);
        assert_eq!(r.roots[1].multiplicity, 1);
    }

    #[test]
    fn triple_root() {
        let r = roots_of(&[0.0, 0.0, 0.0]);
        assert_eq!(r.roots, vec![RealRoot { value: 0.0, multiplicity: 3 }]);
        // (t-2)^3
        let r = roots_of(&[-8.0, 12.0, -6.0]);
        assert_eq!(r.roots.len(), 1);
        assert_eq!(r.roots[0].multiplicity, 3);
        assert!((r.roots[0].value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn three_distinct_and_complex() {
        let r = roots_of(&[0.0, -3.0, 0.0]);
        let v = r.values();
        let s3 = 3f64.sqrt();
        assert!((v[0] + s3).abs() < 1e-13 && v[1].abs() < 1e-13 && (v[2] - s3).abs() < 1e-13);
        let r = roots_of(&[1.0, 1.0, 0.0]);
        assert_eq!(r.real_count(), 1);
        assert_eq!(r.complex_pairs, 1);
    }

    #[test]
    fn quadratics_and_linear() {
        let r = roots_of(&[0.0, 1.0]);
        assert_eq!(r.values(), vec![-1.0, 0.0]);
        let r = roots_of(&[1.0, 0.0]);
        assert_eq!(r.complex_pairs, 1);
        let r = roots_of(&[1.0, -2.0]);
        assert_eq!(r.roots, vec![RealRoot { value: 1.0, multiplicity: 2 }]);
        assert_eq!(roots_of(&[3.0]).values(), vec![-3.0]);
    }

    proptest! {
        #[test]
        fn reconstructs_distinct_roots(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
            prop_assume!((a - b).abs() > 1e-3 && (b - c).abs() > 1e-3 && (a - c).abs() > 1e-3);
            let lower = [-(a * b * c), a * b + b * c + a * c, -(a + b + c)];
            let r = roots_of(&lower);
            prop_assert_eq!(r.real_count(), 3);
            let mut expected = [a, b, c];
            expected.sort_by(|x, y| x.total_cmp(y));
            for (got, want) in r.values().iter().zip(expected) {
                prop_assert!((got - want).abs() < 1e-8 * r.scale);
            }
        }

        #[test]
        fn residuals_are_small(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0) {
            let lower = [c, b, a];
            let r = roots_of(&lower);
            for root in &r.roots {
                if root.multiplicity == 1 {
                    let (v, _, _) = eval(&lower, root.value);
                    prop_assert!(v.abs() <= 1e-12 * r.scale.powi(3));
                }
            }
            prop_assert_eq!(r.real_count() + 2 * r.complex_pairs, 3);
        }
    }
}
