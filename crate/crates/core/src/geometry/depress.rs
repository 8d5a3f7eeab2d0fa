use super::{GeometryError, ImplicitOde};
use crate::numeric::{integrate_adaptive, linspace, IntegrateError};

/// Depressed form of a monic cubic sampled on a grid of new coordinates
/// `(x~, y~)`, with the map `x = x~`, `y = f(x~, y~)`.
///
/// Arrays are indexed `[i][j]` with `i` over `xs` and `j` over `ys`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepressedGrid {
    pub identity: bool,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub f: Vec<Vec<f64>>,
    pub f_y: Vec<Vec<f64>>,
    /// Coefficient of `p~^2` after the transform, from an independent
    /// finite-difference estimate of `f_x`; zero up to integration error.
    pub quadratic: Vec<Vec<f64>>,
    pub big_a: Vec<Vec<f64>>,
    pub big_b: Vec<Vec<f64>>,
}

impl DepressedGrid {
    /// Original coordinates of grid node `(i, j)`.
    pub fn map(&self, i: usize, j: usize) -> (f64, f64) {
        (self.xs[i], self.f[i][j])
    }

    /// Value of the transformed cubic `p^3 + A p + B` at node `(i, j)`.
    pub fn transformed(&self, i: usize, j: usize, p: f64) -> f64 {
        p * p * p + self.big_a[i][j] * p + self.big_b[i][j]
    }

    pub fn max_quadratic(&self) -> f64 {
        self.quadratic.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn lift(e: IntegrateError<GeometryError>) -> GeometryError {
    match e {
        IntegrateError::Rhs(g) => g,
        IntegrateError::StepUnderflow { t } | IntegrateError::StepLimit { t } => GeometryError::StepUnderflow { x: t },
    }
}

/// Removes the `p^2` term of a monic cubic by `y = f(x~, y~)` with
/// `df/dx~ = -a(x~, f)/3`, `f(x0, y~) = y~`, where `x0` is the point of the
/// x-range closest to 0.
pub fn depress(
    ode: &ImplicitOde,
    x_range: (f64, f64),
    y_range: (f64, f64),
    resolution: usize,
) -> Result<DepressedGrid, GeometryError> {
    if ode.degree() != 3 || !ode.is_monic() {
        return Err(GeometryError::Unsupported("a monic cubic"));
    }
    let n = resolution.max(2);
    let xs = linspace(x_range.0, x_range.1, n);
    let ys = linspace(y_range.0, y_range.1, n);
    let a = ode.coefficient(2);
    let a_y = a.differentiate("y")?;
    let coeffs = |x: f64, y: f64| ode.coefficients_at(x, y);

    if ode.is_depressed() {
        let mut g = DepressedGrid {
            identity: true,
            xs: xs.clone(),
            ys: ys.clone(),
            f: vec![vec![0.0; n]; n],
            f_y: vec![vec![1.0; n]; n],
            quadratic: vec![vec![0.0; n]; n],
            big_a: vec![vec![0.0; n]; n],
            big_b: vec![vec![0.0; n]; n],
        };
        for i in 0..n {
            for j in 0..n {
                let c = coeffs(xs[i], ys[j])?;
                g.f[i][j] = ys[j];
                g.big_a[i][j] = c[1];
                g.big_b[i][j] = c[0];
            }
        }
        return Ok(g);
    }

    let span = (y_range.1 - y_range.0).abs().max(1.0);
    let escape = (y_range.0 - span, y_range.1 + span);
    let mut rhs = |x: f64, s: &[f64; 2]| -> Result<[f64; 2], GeometryError> {
        if !(s[0] >= escape.0 && s[0] <= escape.1) {
            return Err(GeometryError::IntegrationEscape { x });
        }
        let av = a.eval(&[x, s[0]])?;
        let ay = a_y.eval(&[x, s[0]])?;
        Ok([-av / 3.0, -ay * s[1] / 3.0])
    };
    let x0 = 0f64.clamp(x_range.0.min(x_range.1), x_range.0.max(x_range.1));
    let mut f = vec![vec![0.0; n]; n];
    let mut f_y = vec![vec![0.0; n]; n];
    for j in 0..n {
        // march outward from x0 in both directions
        let start = [ys[j], 1.0];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| (xs[p] - x0).abs().total_cmp(&(xs[q] - x0).abs()));
        let mut left = (x0, start);
        let mut right = (x0, start);
        for &i in &order {
            let from = if xs[i] >= x0 { &mut right } else { &mut left };
            let s = integrate_adaptive(&mut rhs, from.0, from.1, xs[i], 1e-11).map_err(lift)?;
            *from = (xs[i], s);
            f[i][j] = s[0];
            f_y[i][j] = s[1];
        }
    }

    let dx = 1e-3 * (x_range.1 - x_range.0).abs().max(1e-6);
    let mut g = DepressedGrid {
        identity: false,
        xs: xs.clone(),
        ys,
        quadratic: vec![vec![0.0; n]; n],
        big_a: vec![vec![0.0; n]; n],
        big_b: vec![vec![0.0; n]; n],
        f,
        f_y,
    };
    for i in 0..n {
        for j in 0..n {
            let (x, fv, fy) = (xs[i], g.f[i][j], g.f_y[i][j]);
            // five-point derivative of f along x from short, tight integrations
            let mut shifted = [0.0; 4];
            for (k, off) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
                let s = integrate_adaptive(&mut rhs, x, [fv, fy], x + off * dx, 1e-14).map_err(lift)?;
                shifted[k] = s[0];
            }
            let f_x = (shifted[0] - 8.0 * shifted[1] + 8.0 * shifted[2] - shifted[3]) / (12.0 * dx);
            let c = coeffs(x, fv)?;
            let (av, bv, cv) = (c[2], c[1], c[0]);
            g.quadratic[i][j] = (3.0 * f_x + av) / fy;
            g.big_a[i][j] = (bv - av * av / 3.0) / (fy * fy);
            g.big_b[i][j] = (2.0 * av * av * av / 27.0 - av * bv / 3.0 + cv) / (fy * fy * fy);
        }
    }
    Ok(g)
}
