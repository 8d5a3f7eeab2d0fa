use super::{Forms, ThreeWeb, WebError};
use crate::json::{Json, ToJson};

/// Normalized forms `sigma_i = det(omega_{i-1}, omega_{i+1}) omega_i`
/// (indices cyclic), which satisfy `sigma_1 + sigma_2 + sigma_3 = 0`.
pub fn sigma_forms(omega: &Forms) -> Forms {
    let det = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - a[1] * b[0];
    let mut out = [[0.0; 2]; 3];
    for i in 0..3 {
        let d = det(omega[(i + 2) % 3], omega[(i + 1) % 3]);
        out[i] = [d * omega[i][0], d * omega[i][1]];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureOptions {
    /// Finite-difference step; defaults to `1e-3` times the region size.
    pub h: Option<f64>,
    /// Largest acceptable error estimate.
    pub tol: f64,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        Self { h: None, tol: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSample {
    pub x: f64,
    pub y: f64,
    pub h: f64,
    /// Richardson-extrapolated curvature `d(gamma) / Omega`.
    pub k: f64,
    /// Estimates at steps `h` and `h/2`.
    pub k_h: f64,
    pub k_half: f64,
    pub error: f64,
    pub reliable: bool,
}

impl ToJson for CurvatureSample {
    fn to_json(&self) -> Json {
        Json::obj([
            ("x", self.x.into()),
            ("y", self.y.into()),
            ("h", self.h.into()),
            ("k", self.k.into()),
            ("k_h", self.k_h.into()),
            ("k_half", self.k_half.into()),
            ("error", self.error.into()),
            ("reliable", self.reliable.into()),
        ])
    }
}

struct Stencil<'a> {
    web: &'a ThreeWeb,
    h: f64,
}

impl Stencil<'_> {
    fn sigma(&self, x: f64, y: f64) -> Result<Forms, WebError> {
        Ok(sigma_forms(&self.web.forms_at(x, y)?))
    }

    fn area(s: &Forms) -> f64 {
        s[0][0] * s[1][1] - s[0][1] * s[1][0]
    }

    /// Connection form `gamma = h_2 sigma_1 - h_1 sigma_2` at a point, with
    /// `d sigma_i = h_i Omega` from central differences. Also returns `|sigma|`.
    fn gamma(&self, x: f64, y: f64) -> Result<([f64; 2], f64, f64), WebError> {
        let h = self.h;
        let s = self.sigma(x, y)?;
        let w = Self::area(&s);
        if !(w.abs() > 0.0) {
            return Err(WebError::DegenerateArea { x, y });
        }
        let (sxp, sxm) = (self.sigma(x + h, y)?, self.sigma(x - h, y)?);
        let (syp, sym) = (self.sigma(x, y + h)?, self.sigma(x, y - h)?);
        let mut hi = [0.0; 3];
        for i in 0..2 {
            let dbx = (sxp[i][1] - sxm[i][1]) / (2.0 * h);
            let day = (syp[i][0] - sym[i][0]) / (2.0 * h);
            hi[i] = (dbx - day) / w;
        }
        let g = [hi[1] * s[0][0] - hi[0] * s[1][0], hi[1] * s[0][1] - hi[0] * s[1][1]];
        let mag = s.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok((g, w, mag))
    }

    /// `d gamma / Omega` with nested central differences; also a roundoff scale.
    fn curvature(&self, x: f64, y: f64) -> Result<(f64, f64), WebError> {
        let h = self.h;
        let (_, w, mag) = self.gamma(x, y)?;
        let (gxp, _, _) = self.gamma(x + h, y)?;
        let (gxm, _, _) = self.gamma(x - h, y)?;
        let (gyp, _, _) = self.gamma(x, y + h)?;
        let (gym, _, _) = self.gamma(x, y - h)?;
        let dgy_dx = (gxp[1] - gxm[1]) / (2.0 * h);
        let dgx_dy = (gyp[0] - gym[0]) / (2.0 * h);
        let roundoff = 64.0 * f64::EPSILON * mag * mag / (h * h * w * w);
        Ok(((dgy_dx - dgx_dy) / w, roundoff))
    }
}

/// Numerical web curvature at `(x, y)` with Richardson extrapolation over
/// steps `h` and `h/2`.
pub fn curvature_numeric(web: &ThreeWeb, x: f64, y: f64, opts: &CurvatureOptions) -> Result<CurvatureSample, WebError> {
    let h = opts.h.unwrap_or(1e-3 * web.region.size());
    if !(h > 0.0) || !web.region.contains_with_margin(x, y, 4.0 * h) {
        return Err(WebError::OutsideRegion { x, y });
    }
    let (k_h, _) = Stencil { web, h }.curvature(x, y)?;
    let (k_half, roundoff) = Stencil { web, h: 0.5 * h }.curvature(x, y)?;
    let k = (4.0 * k_half - k_h) / 3.0;
    let error = (k_half - k_h).abs() / 3.0 + roundoff;
    Ok(CurvatureSample { x, y, h, k, k_h, k_half, error, reliable: error <= opts.tol })
}
