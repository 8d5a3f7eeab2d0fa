//! The D3 picture upstairs: the root pair `(p, q)` with third root `-p - q`,
//! the Vieta map to cubic coefficients, Malgrange coordinates of functions on
//! an orbit, equivariant first integrals, generation of hexagonal ODEs and
//! the equivariant homotopy.

mod generate;
mod homotopy;

use nalgebra::{Matrix6, Vector6};
use thiserror::Error;

use crate::expr::{ExprError, Expression};
use crate::hexagonality::WebError;

pub use generate::{generate_ode, GeneratedOde, Upstairs, VietaConvention};
pub use homotopy::{homotopy_normalize, printed_coefficients, HomotopyOptions, HomotopyResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquivariantError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Web(#[from] WebError),
    #[error("orbit of ({p}, {q}) is degenerate")]
    DegenerateOrbit { p: f64, q: f64 },
    #[error("Malgrange system is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("invariant check failed: {0}")]
    Invariant(String),
    #[error("Vieta inversion failed at ({x}, {y}): {reason}")]
    VietaInversion { x: f64, y: f64, reason: String },
    #[error("pushed slopes are parallel at ({x}, {y})")]
    ParallelSlopes { x: f64, y: f64 },
    #[error("inadmissible target: relative mismatch {residual:.3e} at ({p}, {q})")]
    Inadmissible { residual: f64, p: f64, q: f64 },
    #[error("homotopy system is singular at ({p}, {q})")]
    SingularSystem { p: f64, q: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Pair = (f64, f64);

pub fn g1((p, q): Pair) -> Pair {
    (p, -p - q)
}

pub fn g2((p, q): Pair) -> Pair {
    (-p - q, q)
}

pub fn g3((p, q): Pair) -> Pair {
    (q, p)
}

/// `A = -p^2 - pq - q^2`, `B = pq(p + q)`: the monic cubic with roots
/// `p, q, -p - q` is `t^3 + A t + B`.
pub fn vieta((p, q): Pair) -> Pair {
    (-(p * p + p * q + q * q), p * q * (p + q))
}

/// A point upstairs with its six images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitFrame {
    pub base: Pair,
    /// Identity, `g1`, `g2`, `g3`, `g1 g3`, `g2 g3`.
    pub images: [Pair; 6],
    pub a: f64,
    pub b: f64,
    /// On a mirror line (or at the origin), where images coincide.
    pub degenerate: bool,
}

pub fn orbit(p: f64, q: f64) -> OrbitFrame {
    let base = (p, q);
    let images = [base, g1(base), g2(base), g3(base), g1(g3(base)), g2(g3(base))];
    let (a, b) = vieta(base);
    let scale = p.abs().max(q.abs());
    let gap = |u: Pair, v: Pair| (u.0 - v.0).abs().max((u.1 - v.1).abs());
    let degenerate = scale == 0.0 || (0..6).any(|i| (i + 1..6).any(|j| gap(images[i], images[j]) <= 1e-12 * scale));
    OrbitFrame { base, images, a, b, degenerate }
}

/// Coordinates in the basis `1, p, q, pq, q^2, pq^2` over `(A, B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MalgrangeCoeffs {
    pub f: [f64; 6],
    /// Largest reconstruction error over the orbit.
    pub residual: f64,
    pub condition: f64,
}

fn basis((p, q): Pair) -> [f64; 6] {
    [1.0, p, q, p * q, q * q, p * q * q]
}

pub fn reconstruct(f: &[f64; 6], at: Pair) -> f64 {
    basis(at).iter().zip(f).map(|(b, c)| b * c).sum()
}

/// Largest accepted condition number of the orbit basis matrix.
pub const MAX_CONDITION: f64 = 1e8;

/// Solves for the Malgrange coordinates of a function from its values at the
/// six orbit points, in the order of [`OrbitFrame::images`].
pub fn malgrange_decompose(values: &[f64; 6], frame: &OrbitFrame) -> Result<MalgrangeCoeffs, EquivariantError> {
    if frame.degenerate {
        return Err(EquivariantError::DegenerateOrbit { p: frame.base.0, q: frame.base.1 });
    }
    let m = Matrix6::from_fn(|i, j| basis(frame.images[i])[j]);
    let sv = m.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_CONDITION) {
        return Err(EquivariantError::IllConditioned(condition));
    }
    let rhs = Vector6::from_column_slice(values);
    let sol = m.lu().solve(&rhs).ok_or(EquivariantError::IllConditioned(f64::INFINITY))?;
    let f: [f64; 6] = sol.into();
    let residual =
        frame.images.iter().zip(values).fold(0.0f64, |acc, (pt, v)| acc.max((reconstruct(&f, *pt) - v).abs()));
    Ok(MalgrangeCoeffs { f, residual, condition })
}

/// `u(p, q) = (2q + p)(F1(A, B) + p F3(A, B))` with siblings
/// `u2 = -u o g2` and `u3 = -u o g3`.
#[derive(Debug, Clone)]
pub struct EquivariantIntegral {
    pub f1: Expression,
    pub f3: Expression,
    d: [Expression; 4],
}

const AB: &[&str] = &["A", "B"];

/// Built-in sample points for the invariant checks.
fn check_samples() -> Vec<Pair> {
    (0..48)
        .map(|k| {
            let t = 0.37 + k as f64 * 2.0 * std::f64::consts::PI / 48.0;
            let r = 0.15 + 0.6 * ((k * 7) % 11) as f64 / 11.0;
            (r * t.cos(), r * t.sin())
        })
        .collect()
}

pub fn build_integral(f1: Expression, f3: Expression) -> Result<EquivariantIntegral, EquivariantError> {
    if f1.vars() != AB || f3.vars() != AB {
        return Err(EquivariantError::Invalid("F1 and F3 must be expressions over (A, B)".into()));
    }
    let d = [f1.differentiate("A")?, f1.differentiate("B")?, f3.differentiate("A")?, f3.differentiate("B")?];
    let u = EquivariantIntegral { f1, f3, d };
    for pt in check_samples() {
        let v = u.u(pt)?;
        let scale = 1.0 + v.abs() + u.u2(pt)?.abs() + u.u3(pt)?.abs();
        if (u.u(g1(pt))? + v).abs() > 1e-10 * scale {
            return Err(EquivariantError::Invariant(format!("u o g1 != -u at {pt:?}")));
        }
        if (v + u.u2(pt)? + u.u3(pt)?).abs() > 1e-10 * scale {
            return Err(EquivariantError::Invariant(format!("u + u2 + u3 != 0 at {pt:?}")));
        }
    }
    Ok(u)
}

impl EquivariantIntegral {
    pub fn parse(f1: &str, f3: &str) -> Result<Self, EquivariantError> {
        build_integral(Expression::parse(f1, AB)?, Expression::parse(f3, AB)?)
    }

    /// `p (2q + p)^3`.
    pub fn cusp() -> Self {
        Self::parse("3*B", "-A").expect("valid integral")
    }

    pub fn u(&self, (p, q): Pair) -> Result<f64, EquivariantError> {
        let (a, b) = vieta((p, q));
        Ok((2.0 * q + p) * (self.f1.eval(&[a, b])? + p * self.f3.eval(&[a, b])?))
    }

    pub fn u2(&self, pt: Pair) -> Result<f64, EquivariantError> {
        Ok(-self.u(g2(pt))?)
    }

    pub fn u3(&self, pt: Pair) -> Result<f64, EquivariantError> {
        Ok(-self.u(g3(pt))?)
    }

    /// `(du/dp, du/dq)`.
    pub fn grad(&self, (p, q): Pair) -> Result<[f64; 2], EquivariantError> {
        let (a, b) = vieta((p, q));
        let ab = [a, b];
        let f1 = self.f1.eval(&ab)?;
        let f3 = self.f3.eval(&ab)?;
        let [f1a, f1b, f3a, f3b] = [0, 1, 2, 3].map(|i| self.d[i].eval(&ab));
        let (f1a, f1b, f3a, f3b) = (f1a?, f1b?, f3a?, f3b?);
        let (a_p, a_q) = (-2.0 * p - q, -p - 2.0 * q);
        let (b_p, b_q) = (2.0 * p * q + q * q, p * p + 2.0 * p * q);
        let inner = f1 + p * f3;
        let inner_p = f1a * a_p + f1b * b_p + f3 + p * (f3a * a_p + f3b * b_p);
        let inner_q = f1a * a_q + f1b * b_q + p * (f3a * a_q + f3b * b_q);
        let lin = 2.0 * q + p;
        Ok([inner + lin * inner_p, 2.0 * inner + lin * inner_q])
    }
}
