//! Hexagonality of planar 3-webs, decided three ways: the symbolic PDE
//! residual on `(A, B)`, numerical web curvature, and Briançon hexagon closure.

mod curvature;
mod hexagon;
mod pde;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{ExprError, Expression};
use crate::geometry::{GeometryError, ImplicitOde, RootOptions, RootPattern, XY};

pub use curvature::{curvature_numeric, sigma_forms, CurvatureOptions, CurvatureSample};
pub use hexagon::{hexagon_closure, HexagonOptions, HexagonReport, Orientation, Verdict};
pub use pde::{pde_residual, residual_grid, ResidualGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WebError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("roots collide at ({x}, {y}): inside the discriminant band")]
    RootCollision { x: f64, y: f64 },
    #[error("web directions are parallel at ({x}, {y})")]
    Parallel { x: f64, y: f64 },
    #[error("point ({x}, {y}) is outside the web region (or too close to its edge)")]
    OutsideRegion { x: f64, y: f64 },
    #[error("area form degenerates at ({x}, {y})")]
    DegenerateArea { x: f64, y: f64 },
    #[error("hexagon walk left the region on leg {leg}")]
    WalkExit { leg: usize },
    #[error("hexagon walk missed its crossing on leg {leg}")]
    MissedCrossing { leg: usize },
    #[error("invalid web input: {0}")]
    Invalid(String),
}

/// Axis-aligned box `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, WebError> {
        let ok = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) && x_min < x_max && y_min < y_max;
        if !ok {
            return Err(WebError::Invalid("region must be finite with min < max".into()));
        }
        Ok(Self { x_min, x_max, y_min, y_max })
    }

    /// Square of half-width `r` around `(x, y)`.
    pub fn around(x: f64, y: f64, r: f64) -> Result<Self, WebError> {
        Self::new(x - r, x + r, y - r, y + r)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.contains_with_margin(x, y, 0.0)
    }

    pub fn contains_with_margin(&self, x: f64, y: f64, margin: f64) -> bool {
        x >= self.x_min + margin && x <= self.x_max - margin && y >= self.y_min + margin && y <= self.y_max - margin
    }

    pub fn size(&self) -> f64 {
        (self.x_max - self.x_min).max(self.y_max - self.y_min)
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }
}

/// Three 1-forms `mu dx + nu dy` at a point, one per family.
pub type Forms = [[f64; 2]; 3];

pub type FormFn = dyn Fn(f64, f64) -> Result<Forms, WebError> + Send + Sync;

/// Where the three families come from.
#[derive(Clone)]
pub enum WebSource {
    /// Roots of an ODE in ascending order; a degree-2 ODE or a root at
    /// infinity contributes the vertical family `dx = 0`, listed last.
    Ode(ImplicitOde),
    /// The two roots of a quadratic ODE plus an explicit form `alpha dx + beta dy`.
    Mixed { ode: ImplicitOde, alpha: Expression, beta: Expression },
    /// Three explicit forms `(mu_i, nu_i)`.
    Explicit([[Expression; 2]; 3]),
    /// Sampled or computed forms.
    Custom(Arc<FormFn>),
}

impl fmt::Debug for WebSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WebSource::Ode(_) => f.write_str("Ode"),
            WebSource::Mixed { .. } => f.write_str("Mixed"),
            WebSource::Explicit(_) => f.write_str("Explicit"),
            WebSource::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// A 3-web over a region, given by three line fields.
#[derive(Clone, Debug)]
pub struct ThreeWeb {
    pub region: Region,
    source: WebSource,
    /// Minimum sine of the angle between two families.
    pub angle_tol: f64,
}

/// Clustering tolerance for web roots; ten times the default band.
const WEB_ROOT_TOL: f64 = 1e-6;

fn slope_form(p: f64) -> [f64; 2] {
    [-p, 1.0]
}

const VERTICAL: [f64; 2] = [1.0, 0.0];

fn ode_roots(ode: &ImplicitOde, x: f64, y: f64) -> Result<Vec<f64>, WebError> {
    let opts = RootOptions { rel_tol: WEB_ROOT_TOL, allow_degree_drop: true };
    let r = ode.roots_at(x, y, &opts)?;
    let distinct = r.roots.iter().all(|root| root.multiplicity == 1);
    if !distinct || r.complex_pairs > 0 {
        return Err(WebError::RootCollision { x, y });
    }
    Ok(r.values())
}

impl ThreeWeb {
    /// Builds the web and validates it at the region center.
    pub fn new(source: WebSource, region: Region) -> Result<Self, WebError> {
        match &source {
            WebSource::Mixed { ode, alpha, beta } => {
                if ode.degree() != 2 {
                    return Err(WebError::Invalid("mixed webs need a quadratic ODE".into()));
                }
                if alpha.vars() != XY || beta.vars() != XY {
                    return Err(WebError::Invalid("form coefficients must be over (x, y)".into()));
                }
            }
            WebSource::Explicit(forms) => {
                if forms.iter().flatten().any(|e| e.vars() != XY) {
                    return Err(WebError::Invalid("form coefficients must be over (x, y)".into()));
                }
            }
            _ => {}
        }
        let web = Self { region, source, angle_tol: 1e-6 };
        let (cx, cy) = region.center();
        web.forms_at(cx, cy)?;
        Ok(web)
    }

    pub fn from_ode(ode: ImplicitOde, region: Region) -> Result<Self, WebError> {
        Self::new(WebSource::Ode(ode), region)
    }

    pub fn source(&self) -> &WebSource {
        &self.source
    }

    fn raw_forms(&self, x: f64, y: f64) -> Result<Forms, WebError> {
        match &self.source {
            WebSource::Ode(ode) => {
                let roots = ode_roots(ode, x, y)?;
                match roots.len() {
                    3 => Ok([slope_form(roots[0]), slope_form(roots[1]), slope_form(roots[2])]),
                    2 => Ok([slope_form(roots[0]), slope_form(roots[1]), VERTICAL]),
                    _ => Err(WebError::RootCollision { x, y }),
                }
            }
            WebSource::Mixed { ode, alpha, beta } => {
                let roots = ode_roots(ode, x, y)?;
                if roots.len() != 2 {
                    return Err(WebError::RootCollision { x, y });
                }
                let form = [alpha.eval(&[x, y])?, beta.eval(&[x, y])?];
                Ok([slope_form(roots[0]), slope_form(roots[1]), form])
            }
            WebSource::Explicit(forms) => {
                let mut out = [[0.0; 2]; 3];
                for (i, pair) in forms.iter().enumerate() {
                    out[i] = [pair[0].eval(&[x, y])?, pair[1].eval(&[x, y])?];
                }
                Ok(out)
            }
            WebSource::Custom(f) => f(x, y),
        }
    }

    /// The three defining forms at `(x, y)`, checked pairwise transverse.
    pub fn forms_at(&self, x: f64, y: f64) -> Result<Forms, WebError> {
        let forms = self.raw_forms(x, y)?;
        for i in 0..3 {
            let ni = forms[i][0].hypot(forms[i][1]);
            if !(ni > 0.0) || !ni.is_finite() {
                return Err(WebError::Parallel { x, y });
            }
            for j in i + 1..3 {
                let nj = forms[j][0].hypot(forms[j][1]);
                let det = forms[i][0] * forms[j][1] - forms[i][1] * forms[j][0];
                if det.abs() < self.angle_tol * ni * nj {
                    return Err(WebError::Parallel { x, y });
                }
            }
        }
        Ok(forms)
    }

    /// Unit tangent directions `(dx, dy)` of the three families.
    pub fn directions_at(&self, x: f64, y: f64) -> Result<[[f64; 2]; 3], WebError> {
        let forms = self.forms_at(x, y)?;
        Ok(forms.map(|[mu, nu]| {
            let n = mu.hypot(nu);
            [nu / n, -mu / n]
        }))
    }

    /// Slopes `dy/dx`, `None` for vertical families.
    pub fn slopes_at(&self, x: f64, y: f64) -> Result<[Option<f64>; 3], WebError> {
        let forms = self.forms_at(x, y)?;
        Ok(forms.map(|[mu, nu]| if nu.abs() <= 1e-14 * mu.abs() { None } else { Some(-mu / nu) }))
    }

    /// The same web with families reordered: family `k` of the result is
    /// family `perm[k]` of `self`.
    pub fn permuted(&self, perm: [usize; 3]) -> ThreeWeb {
        let inner = self.clone();
        let f = move |x: f64, y: f64| {
            let forms = inner.forms_at(x, y)?;
            Ok([forms[perm[0]], forms[perm[1]], forms[perm[2]]])
        };
        ThreeWeb { region: self.region, source: WebSource::Custom(Arc::new(f)), angle_tol: self.angle_tol }
    }
}

/// Mixed web of a quadratic ODE and `alpha dx + beta dy = 0`, coefficients as text.
pub fn mixed_web(ode: ImplicitOde, alpha: &str, beta: &str, region: Region) -> Result<ThreeWeb, WebError> {
    let alpha = crate::parse(alpha, XY)?;
    let beta = crate::parse(beta, XY)?;
    ThreeWeb::new(WebSource::Mixed { ode, alpha, beta }, region)
}

/// Web of three explicit forms `mu_i dx + nu_i dy`, coefficients as text.
pub fn explicit_web(forms: [[&str; 2]; 3], region: Region) -> Result<ThreeWeb, WebError> {
    let mut parsed = Vec::with_capacity(3);
    for [mu, nu] in forms {
        parsed.push([crate::parse(mu, XY)?, crate::parse(nu, XY)?]);
    }
    let arr: [[Expression; 2]; 3] = parsed.try_into().expect("three forms");
    ThreeWeb::new(WebSource::Explicit(arr), region)
}

/// Root pattern check used before building ODE webs.
pub fn has_three_real_roots(ode: &ImplicitOde, x: f64, y: f64) -> bool {
    ode.roots_at(x, y, &RootOptions::default()).map(|r| r.pattern == RootPattern::ThreeDistinct).unwrap_or(false)
}
