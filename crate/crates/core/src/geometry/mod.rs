//! Jet-space geometry of an implicit ODE `F(x, y, p) = 0`.
//!
//! Degree 3 means `e p^3 + a p^2 + b p + c` with `e = 1` unless a lead is given;
//! degree 2 means `e p^2 + a p + b`. Coefficients are expressions in `x, y`.

mod criminant;
mod depress;
mod roots;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse, ExprError, Expression};

pub use criminant::{
    contact_pairing, criminant_trace, refine_to_criminant, CriminantOptions, CriminantSample, CriminantTrace, TraceStop,
};
pub use depress::{depress, DepressedGrid};
pub use roots::{RootOptions, RootPattern, RootSet};

/// Default bound on finite slopes.
pub const P_MAX: f64 = 1e6;

pub const XY: &[&str] = &["x", "y"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid ODE spec: {0}")]
    InvalidSpec(String),
    #[error("jet point coordinates must be finite with |p| <= {P_MAX}")]
    InvalidJetPoint,
    #[error("leading coefficient vanishes at ({x}, {y})")]
    LeadingCoefficientVanishes { x: f64, y: f64 },
    #[error("point is off the surface F = 0 (|F| = {residual:e})")]
    NotOnSurface { residual: f64 },
    #[error("characteristic direction vanishes at ({x}, {y}, {p})")]
    DegenerateDirection { x: f64, y: f64, p: f64 },
    #[error("Newton refinement of the criminant seed diverged")]
    SeedDivergence,
    #[error("regularity rank {rank} < 2: criminant tangent undefined")]
    RankDeficient { rank: usize },
    #[error("operation requires {0}")]
    Unsupported(&'static str),
    #[error("integration left the region at x = {x}")]
    IntegrationEscape { x: f64 },
    #[error("step size underflow at x = {x}")]
    StepUnderflow { x: f64 },
}

/// ODE spec file contents. Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSpec {
    pub degree: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub depressed: bool,
}

/// A point `(x, y, p)` of the 1-jet space with finite slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JetPoint {
    pub x: f64,
    pub y: f64,
    pub p: f64,
}

impl JetPoint {
    pub fn new(x: f64, y: f64, p: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() && p.is_finite() && p.abs() <= P_MAX {
            Ok(Self { x, y, p })
        } else {
            Err(GeometryError::InvalidJetPoint)
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.p]
    }
}

#[derive(Debug, Clone)]
struct Coefficient {
    f: Expression,
    fx: Expression,
    fy: Expression,
}

impl Coefficient {
    fn new(f: Expression) -> Result<Self, GeometryError> {
        Ok(Self { fx: f.differentiate("x")?, fy: f.differentiate("y")?, f })
    }
}

/// Values of `F` and its partials at a jet point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetValues {
    pub f: f64,
    pub fp: f64,
    pub fpp: f64,
    pub fx: f64,
    pub fy: f64,
    pub fpx: f64,
    pub fpy: f64,
    /// `1 + sum |c_k p^k|`, a magnitude for relative tolerances.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SingularKind {
    Regular,
    Fold,
    Cusp,
    Degenerate,
}

impl SingularKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SingularKind::Regular => "regular",
            SingularKind::Fold => "fold",
            SingularKind::Cusp => "cusp",
            SingularKind::Degenerate => "degenerate",
        }
    }
}

/// Polynomial-in-`p` implicit ODE with expression coefficients.
#[derive(Debug, Clone)]
pub struct ImplicitOde {
    degree: usize,
    monic: bool,
    depressed: bool,
    /// `coeffs[k]` multiplies `p^k`.
    coeffs: Vec<Coefficient>,
}

fn expr_or_zero(text: Option<&str>) -> Result<Expression, GeometryError> {
    match text {
        Some(t) => Ok(parse(t, XY)?),
        None => Ok(Expression::constant(XY, 0.0)),
    }
}

impl ImplicitOde {
    /// Builds from parsed coefficient expressions, highest power first
    /// (`[e, a, b, c]` or `[e, a, b]`).
    pub fn from_coefficients(descending: Vec<Expression>) -> Result<Self, GeometryError> {
        let degree = descending.len().saturating_sub(1);
        if degree != 2 && degree != 3 {
            return Err(GeometryError::InvalidSpec(format!("degree must be 2 or 3, got {degree}")));
        }
        for e in &descending {
            if e.vars() != XY {
                return Err(GeometryError::InvalidSpec("coefficients must be over (x, y)".into()));
            }
        }
        if descending[0].is_zero() {
            return Err(GeometryError::InvalidSpec("leading coefficient is identically zero".into()));
        }
        let monic = descending[0].as_constant() == Some(1.0);
        let depressed = monic && degree == 3 && descending[1].is_zero();
        let mut coeffs = descending.into_iter().map(Coefficient::new).collect::<Result<Vec<_>, _>>()?;
        coeffs.reverse();
        Ok(Self { degree, monic, depressed, coeffs })
    }

    /// `p^3 + a p^2 + b p + c`.
    pub fn monic_cubic(a: &str, b: &str, c: &str) -> Result<Self, GeometryError> {
        Self::from_coefficients(vec![Expression::constant(XY, 1.0), parse(a, XY)?, parse(b, XY)?, parse(c, XY)?])
    }

    /// `p^3 + A p + B`.
    pub fn depressed_cubic(a_big: &str, b_big: &str) -> Result<Self, GeometryError> {
        Self::monic_cubic("0", a_big, b_big)
    }

    /// `p^2 + a p + b`.
    pub fn monic_quadratic(a: &str, b: &str) -> Result<Self, GeometryError> {
        Self::from_coefficients(vec![Expression::constant(XY, 1.0), parse(a, XY)?, parse(b, XY)?])
    }

    pub fn from_spec(spec: &OdeSpec) -> Result<Self, GeometryError> {
        let lead = match &spec.lead {
            Some(t) => parse(t, XY)?,
            None => Expression::constant(XY, 1.0),
        };
        let a = expr_or_zero(spec.a.as_deref())?;
        let b = parse(&spec.b, XY)?;
        let ode = match spec.degree {
            3 => {
                let c =
                    spec.c.as_deref().ok_or_else(|| GeometryError::InvalidSpec("degree 3 requires \"c\"".into()))?;
                if spec.depressed && (spec.lead.is_some() || !a.is_zero()) {
                    return Err(GeometryError::InvalidSpec("a depressed ODE is monic with a = 0".into()));
                }
                Self::from_coefficients(vec![lead, a, b, parse(c, XY)?])?
            }
            2 => {
                if spec.c.is_some() {
                    return Err(GeometryError::InvalidSpec("degree 2 takes only \"a\" and \"b\"".into()));
                }
                if spec.depressed {
                    return Err(GeometryError::InvalidSpec("only cubics can be depressed".into()));
                }
                Self::from_coefficients(vec![lead, a, b])?
            }
            d => return Err(GeometryError::InvalidSpec(format!("degree must be 2 or 3, got {d}"))),
        };
        Ok(ode)
    }

    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let spec: OdeSpec = serde_json::from_str(text).map_err(|e| GeometryError::InvalidSpec(e.to_string()))?;
        Self::from_spec(&spec)
    }

    /// Canonical spec: printed expressions, lead only when non-monic.
    pub fn to_spec(&self) -> OdeSpec {
        let text = |k: usize| self.coeffs[k].f.to_string();
        let d = self.degree;
        OdeSpec {
            degree: d as u8,
            lead: (!self.monic).then(|| text(d)),
            a: Some(text(d - 1)),
            b: text(d - 2),
            c: (d == 3).then(|| text(0)),
            depressed: self.depressed,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_monic(&self) -> bool {
        self.monic
    }

    pub fn is_depressed(&self) -> bool {
        self.depressed
    }

    /// Coefficient of `p^k`.
    pub fn coefficient(&self, k: usize) -> &Expression {
        &self.coeffs[k].f
    }

    /// `(A, B)` of a depressed cubic `p^3 + A p + B`.
    pub fn depressed_ab(&self) -> Option<(&Expression, &Expression)> {
        self.depressed.then(|| (&self.coeffs[1].f, &self.coeffs[0].f))
    }

    /// Coefficient values, highest power last, at `(x, y)`.
    pub fn coefficients_at(&self, x: f64, y: f64) -> Result<Vec<f64>, GeometryError> {
        self.coeffs.iter().map(|c| Ok(c.f.eval(&[x, y])?)).collect()
    }

    pub fn f(&self, x: f64, y: f64, p: f64) -> Result<f64, GeometryError> {
        let c = self.coefficients_at(x, y)?;
        Ok(c.iter().rev().fold(0.0, |acc, ck| acc * p + ck))
    }

    pub fn jet_values(&self, m: &JetPoint) -> Result<JetValues, GeometryError> {
        let pt = [m.x, m.y];
        let mut v = JetValues { f: 0.0, fp: 0.0, fpp: 0.0, fx: 0.0, fy: 0.0, fpx: 0.0, fpy: 0.0, scale: 1.0 };
        for (k, c) in self.coeffs.iter().enumerate() {
            let (ck, cx, cy) = (c.f.eval(&pt)?, c.fx.eval(&pt)?, c.fy.eval(&pt)?);
            let pk = m.p.powi(k as i32);
            v.f += ck * pk;
            v.fx += cx * pk;
            v.fy += cy * pk;
            v.scale += (ck * pk).abs();
            if k >= 1 {
                let pk1 = k as f64 * m.p.powi(k as i32 - 1);
                v.fp += ck * pk1;
                v.fpx += cx * pk1;
                v.fpy += cy * pk1;
            }
            if k >= 2 {
                v.fpp += ck * (k * (k - 1)) as f64 * m.p.powi(k as i32 - 2);
            }
        }
        Ok(v)
    }

    /// Polynomial in `(x, y)` vanishing where the `p`-polynomial has a multiple
    /// root. Cubics: `-(18eabc - 4a^3c + a^2b^2 - 4eb^3 - 27e^2c^2)`, which is
    /// `4A^3 + 27B^2` for depressed input and negative for three distinct real
    /// roots. Quadratics: `a^2 - 4eb`.
    pub fn discriminant(&self) -> Expression {
        if self.degree == 2 {
            let (e, a, b) = (&self.coeffs[2].f, &self.coeffs[1].f, &self.coeffs[0].f);
            return a.powi(2) - 4.0 * (e * b);
        }
        let (e, a, b, c) = (&self.coeffs[3].f, &self.coeffs[2].f, &self.coeffs[1].f, &self.coeffs[0].f);
        let t1 = 18.0 * (e * a) * (b * c);
        let t2 = 4.0 * a.powi(3) * c;
        let t3 = a.powi(2) * b.powi(2);
        let t4 = 4.0 * e * b.powi(3);
        let t5 = 27.0 * e.powi(2) * c.powi(2);
        t2 - t1 - t3 + t4 + t5
    }

    fn on_surface(&self, m: &JetPoint) -> Result<JetValues, GeometryError> {
        let v = self.jet_values(m)?;
        if v.f.abs() > 1e-6 * v.scale {
            return Err(GeometryError::NotOnSurface { residual: v.f.abs() });
        }
        Ok(v)
    }

    /// Unit direction of the characteristic field `[F_p : p F_p : -(F_x + p F_y)]`,
    /// first nonzero component positive.
    pub fn characteristic_direction(&self, m: &JetPoint) -> Result<[f64; 3], GeometryError> {
        let v = self.on_surface(m)?;
        let raw = [v.fp, m.p * v.fp, -(v.fx + m.p * v.fy)];
        let norm = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
        if norm <= 1e-12 * v.scale {
            return Err(GeometryError::DegenerateDirection { x: m.x, y: m.y, p: m.p });
        }
        let sign = raw.iter().find(|c| c.abs() > 1e-14 * norm).map_or(1.0, |c| c.signum());
        Ok(raw.map(|c| sign * c / norm))
    }

    /// Numerical rank of the Jacobian of `(F, F_p)` in `(x, y, p)`.
    pub fn regularity_rank(&self, m: &JetPoint) -> Result<usize, GeometryError> {
        let v = self.jet_values(m)?;
        Ok(rank_2x3([v.fx, v.fy, v.fp], [v.fpx, v.fpy, v.fpp]))
    }

    pub fn singular_kind(&self, m: &JetPoint) -> Result<SingularKind, GeometryError> {
        let v = self.on_surface(m)?;
        let tol = 1e-8 * v.scale;
        if v.fp.abs() > tol {
            return Ok(SingularKind::Regular);
        }
        if v.fpp.abs() > tol {
            return Ok(SingularKind::Fold);
        }
        let roots = self.roots_at(m.x, m.y, &RootOptions::default())?;
        let triple = roots.pattern == RootPattern::Triple;
        if triple && self.regularity_rank(m)? == 2 {
            Ok(SingularKind::Cusp)
        } else {
            Ok(SingularKind::Degenerate)
        }
    }
}

/// Singular values of a 2x3 matrix from its Frobenius norm and the norm of
/// the cross product of its rows.
pub(crate) fn rank_2x3(r1: [f64; 3], r2: [f64; 3]) -> usize {
    let fro2: f64 = r1.iter().chain(r2.iter()).map(|v| v * v).sum();
    let cross = cross(r1, r2);
    let det = norm3(cross);
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let s1 = ((fro2 + disc) / 2.0).sqrt();
    let s2 = if s1 > 0.0 { det / s1 } else { 0.0 };
    let thr = 1e-8 * fro2.sqrt().max(1.0);
    [s1, s2].iter().filter(|s| **s > thr).count()
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_i() -> ImplicitOde {
        ImplicitOde::depressed_cubic("2*x", "y").unwrap()
    }

    fn jet(x: f64, y: f64, p: f64) -> JetPoint {
        JetPoint::new(x, y, p).unwrap()
    }

    fn assert_parallel(v: [f64; 3], w: [f64; 3]) {
        let n = norm3(w);
        for i in 0..3 {
            assert!((v[i] - w[i] / n).abs() < 1e-12, "{v:?} vs {w:?}");
        }
    }

    #[test]
    fn spec_round_trip_and_rejection() {
        let text = r#"{"degree":3,"b":"2*x","c":"y","depressed":true}"#;
        let ode = ImplicitOde::from_json(text).unwrap();
        assert!(ode.is_depressed());
        let canonical = serde_json::to_string(&ode.to_spec()).unwrap();
        assert_eq!(canonical, r#"{"degree":3,"a":"0","b":"(2*x)","c":"y","depressed":true}"#);
        let again = ImplicitOde::from_json(&canonical).unwrap();
        assert_eq!(serde_json::to_string(&again.to_spec()).unwrap(), canonical);

        assert!(matches!(
            ImplicitOde::from_json(r#"{"degree":3,"b":"x","c":"y","extra":1}"#),
            Err(GeometryError::InvalidSpec(_))
        ));
        assert!(ImplicitOde::from_json(r#"{"degree":2,"a":"1","b":"0","c":"1"}"#).is_err());
        assert!(ImplicitOde::from_json(r#"{"degree":3,"lead":"0","b":"x","c":"y"}"#).is_err());
        assert!(ImplicitOde::from_json(r#"{"degree":4,"b":"x"}"#).is_err());
        assert!(ImplicitOde::from_json(r#"{"degree":3,"b":"x+","c":"y"}"#).is_err());
    }

    #[test]
    fn discriminant_examples() {
        let d = normal_i().discriminant();
        for (x, y) in [(0.3, -0.7), (-1.0, 2.0)] {
            let want = 32.0 * x * x * x + 27.0 * y * y;
            assert!((d.eval(&[x, y]).unwrap() - want).abs() < 1e-12);
        }
        let d = ImplicitOde::depressed_cubic("x", "-y").unwrap().discriminant();
        assert!((d.eval(&[1.5, 0.5]).unwrap() - (4.0 * 3.375 + 27.0 * 0.25)).abs() < 1e-12);
        let d = ImplicitOde::monic_quadratic("0", "-y").unwrap().discriminant();
        assert!((d.eval(&[3.0, 0.25]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn general_cubic_discriminant_vanishes_on_double_roots() {
        // (p - 1)^2 (p + 2) scaled by lead 2: 2p^3 + 0p^2 - 6p + 4
        let ode = ImplicitOde::from_coefficients(vec![
            parse("2", XY).unwrap(),
            parse("0*x", XY).unwrap(),
            parse("-6", XY).unwrap(),
            parse("4 + 0*y", XY).unwrap(),
        ])
        .unwrap();
        assert!(ode.discriminant().eval(&[0.0, 0.0]).unwrap().abs() < 1e-12);
        // three distinct roots give a negative value
        let ode = ImplicitOde::monic_cubic("1", "-1", "-1 + 0.1*x").unwrap();
        // p^3 + p^2 - p - 0.9 ...
        let d = ode.discriminant().eval(&[1.0, 0.0]).unwrap();
        let r = ode.roots_at(1.0, 0.0, &RootOptions::default()).unwrap();
        assert_eq!(d < 0.0, r.pattern == RootPattern::ThreeDistinct);
    }

    #[test]
    fn characteristic_direction_examples() {
        let iii = ImplicitOde::monic_quadratic("0", "-y").unwrap();
        assert_parallel(iii.characteristic_direction(&jet(0.0, 1.0, 1.0)).unwrap(), [2.0, 2.0, 1.0]);
        assert_parallel(normal_i().characteristic_direction(&jet(0.0, -1.0, 1.0)).unwrap(), [1.0, 1.0, -1.0]);
        let iv = ImplicitOde::monic_quadratic("0", "-x").unwrap();
        assert_parallel(iv.characteristic_direction(&jet(0.0, 0.7, 0.0)).unwrap(), [0.0, 0.0, 1.0]);
        assert!(matches!(iii.characteristic_direction(&jet(0.0, 1.0, 3.0)), Err(GeometryError::NotOnSurface { .. })));
        let flat = ImplicitOde::monic_quadratic("0", "0").unwrap();
        assert!(matches!(
            flat.characteristic_direction(&jet(0.0, 0.0, 0.0)),
            Err(GeometryError::DegenerateDirection { .. })
        ));
    }

    #[test]
    fn regularity_rank_examples() {
        assert_eq!(normal_i().regularity_rank(&jet(0.0, 0.0, 0.0)).unwrap(), 2);
        let singular = ImplicitOde::depressed_cubic("-x", "0").unwrap();
        assert_eq!(singular.regularity_rank(&jet(0.0, 0.0, 0.0)).unwrap(), 1);
        let iv = ImplicitOde::monic_quadratic("0", "-x").unwrap();
        assert_eq!(iv.regularity_rank(&jet(0.0, 0.0, 0.0)).unwrap(), 2);
        let flat = ImplicitOde::monic_cubic("0", "0", "0").unwrap();
        assert_eq!(flat.regularity_rank(&jet(0.0, 0.0, 0.0)).unwrap(), 0);
    }

    #[test]
    fn singular_kind_examples() {
        let iii = ImplicitOde::monic_quadratic("0", "-y").unwrap();
        assert_eq!(iii.singular_kind(&jet(0.0, 0.0, 0.0)).unwrap(), SingularKind::Fold);
        assert_eq!(normal_i().singular_kind(&jet(0.0, 0.0, 0.0)).unwrap(), SingularKind::Cusp);
        assert_eq!(normal_i().singular_kind(&jet(0.0, -1.0, 1.0)).unwrap(), SingularKind::Regular);
        let singular = ImplicitOde::depressed_cubic("-x", "0").unwrap();
        assert_eq!(singular.singular_kind(&jet(0.0, 0.0, 0.0)).unwrap(), SingularKind::Degenerate);
    }

    #[test]
    fn jet_point_bounds() {
        assert!(JetPoint::new(0.0, 0.0, 2e6).is_err());
        assert!(JetPoint::new(f64::NAN, 0.0, 0.0).is_err());
    }
}
