use super::ClassifyError;
use crate::expr::Expression;
use crate::geometry::{ImplicitOde, JetPoint, RootOptions, XY};
use crate::numeric::linspace;

/// Largest `|X^(1) F - lambda F|` over `samples`, where `X^(1)` is the first
/// prolongation of `xi d/dx + eta d/dy` and `lambda` is the least-squares
/// multiplier.
pub fn prolonged_symmetry_residual(
    ode: &ImplicitOde,
    xi: &Expression,
    eta: &Expression,
    samples: &[JetPoint],
) -> Result<f64, ClassifyError> {
    if xi.vars() != XY || eta.vars() != XY {
        return Err(ClassifyError::Invalid("symmetry components must be over (x, y)".into()));
    }
    let xi_x = xi.differentiate("x")?;
    let xi_y = xi.differentiate("y")?;
    let eta_x = eta.differentiate("x")?;
    let eta_y = eta.differentiate("y")?;
    let ev = |e: &Expression, m: &JetPoint| e.eval(&[m.x, m.y]);

    let mut actions = Vec::with_capacity(samples.len());
    let mut values = Vec::with_capacity(samples.len());
    for m in samples {
        let v = ode.jet_values(m)?;
        let p = m.p;
        let zeta = ev(&eta_x, m)? + (ev(&eta_y, m)? - ev(&xi_x, m)?) * p - ev(&xi_y, m)? * p * p;
        actions.push(ev(xi, m)? * v.fx + ev(eta, m)? * v.fy + zeta * v.fp);
        values.push(v.f);
    }
    let ff: f64 = values.iter().map(|f| f * f).sum();
    let lambda = if ff > 0.0 { actions.iter().zip(&values).map(|(a, f)| a * f).sum::<f64>() / ff } else { 0.0 };
    Ok(actions.iter().zip(&values).fold(0.0, |m, (a, f)| m.max((a - lambda * f).abs())))
}

/// Points of `F = 0` over an `n x n` lattice of `[x_min, x_max] x [y_min, y_max]`,
/// one per real root, in lattice order.
pub fn sample_surface(ode: &ImplicitOde, bounds: [f64; 4], n: usize) -> Result<Vec<JetPoint>, ClassifyError> {
    let mut out = Vec::new();
    let opts = RootOptions { allow_degree_drop: true, ..RootOptions::default() };
    for y in linspace(bounds[2], bounds[3], n) {
        for x in linspace(bounds[0], bounds[1], n) {
            let roots = ode.roots_at(x, y, &opts)?;
            for r in &roots.roots {
                out.push(JetPoint::new(x, y, r.value)?);
            }
        }
    }
    Ok(out)
}

/// Fold normal forms with an infinite symmetry pseudogroup, each acting on
/// jets through a function `F` of one variable with `F'(0) != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldSymmetry {
    /// `p^2 = y`, with integrals `u = x - 2p`, `v = x + 2p` of the two sheets.
    Legendrian,
    /// `p^2 = x`, with integrals `u = 3y - 2p^3`, `v = 3y + 2p^3`.
    Transverse,
}

impl FoldSymmetry {
    pub fn ode(&self) -> ImplicitOde {
        match self {
            FoldSymmetry::Legendrian => ImplicitOde::monic_quadratic("0", "-y"),
            FoldSymmetry::Transverse => ImplicitOde::monic_quadratic("0", "-x"),
        }
        .expect("normal form parses")
    }

    /// Image of a jet on the normal form; `F` is the identity for the
    /// identity map.
    pub fn apply(&self, f: impl Fn(f64) -> f64, m: &JetPoint) -> Result<JetPoint, ClassifyError> {
        let (base, scale) = match self {
            FoldSymmetry::Legendrian => (m.y, 1.0 + m.y.abs()),
            FoldSymmetry::Transverse => (m.x, 1.0 + m.x.abs()),
        };
        if (m.p * m.p - base).abs() > 1e-9 * scale {
            return Err(ClassifyError::Invalid("jet is not on the fold normal form".into()));
        }
        let image = match self {
            FoldSymmetry::Legendrian => {
                let (fu, fv) = (f(m.x - 2.0 * m.p), f(m.x + 2.0 * m.p));
                let p = 0.25 * (fv - fu);
                JetPoint::new(0.5 * (fu + fv), p * p, p)
            }
            FoldSymmetry::Transverse => {
                let p3 = m.p * m.p * m.p;
                let (fu, fv) = (f(3.0 * m.y - 2.0 * p3), f(3.0 * m.y + 2.0 * p3));
                let p = (0.25 * (fv - fu)).cbrt();
                JetPoint::new(p * p, (fu + fv) / 6.0, p)
            }
        };
        Ok(image?)
    }
}
