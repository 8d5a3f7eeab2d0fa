use rayon::prelude::*;

use super::{Region, WebError};
use crate::expr::Expression;
use crate::numeric::linspace;

/// Left-hand side of the hexagonality PDE for `p^3 + A p + B = 0`, assembled
/// term by term from `A, B` and their partials up to order two.
///
/// Vanishes identically iff the web of solutions is hexagonal.
pub fn pde_residual(a: &Expression, b: &Expression) -> Result<Expression, WebError> {
    let d = |e: &Expression, v: &str| e.differentiate(v);
    let (ax, ay, bx, by) = (d(a, "x")?, d(a, "y")?, d(b, "x")?, d(b, "y")?);
    let (axx, axy, ayy) = (d(&ax, "x")?, d(&ax, "y")?, d(&ay, "y")?);
    let (bxx, bxy, byy) = (d(&bx, "x")?, d(&bx, "y")?, d(&by, "y")?);
    let a2 = a.powi(2);
    let a3 = a.powi(3);
    let a4 = a.powi(4);
    let b2 = b.powi(2);
    let b3 = b.powi(3);
    let disc = 4.0 * &a3 + 27.0 * &b2;

    let second =
        9.0 * b * &axx - 2.0 * &a2 * &axy + 6.0 * (a * b) * &ayy - 6.0 * a * &bxx - 9.0 * b * &bxy - 4.0 * &a2 * &byy;

    let a2b = &a2 * b;
    let ab2 = a * &b2;
    let terms = [
        108.0 * &a2b * (&ax * &by),
        -108.0 * &ab2 * (&ax * &ay),
        162.0 * &b3 * ay.powi(2),
        40.0 * &a4 * (&ay * &by),
        -108.0 * &a2b * ax.powi(2),
        216.0 * &a2b * by.powi(2),
        -36.0 * &a3 * (&bx * &by),
        108.0 * &a2b * (&ay * &bx),
        -378.0 * &ab2 * (&ay * &by),
        -405.0 * &b2 * (&ax * &bx),
        -48.0 * (&a3 * b) * ay.powi(2),
        8.0 * &a4 * (&ax * &ay),
        243.0 * &b2 * (&bx * &by),
        84.0 * &a3 * (&ax * &bx),
        324.0 * (a * b) * bx.powi(2),
    ];
    Ok(terms.into_iter().fold(disc * second, |acc, t| acc + t))
}

/// Residual values on an `n x n` grid, row-major in `y` then `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[j][i]` at `(xs[i], ys[j])`.
    pub values: Vec<Vec<f64>>,
    pub max_abs: f64,
    /// Magnitude of the individual terms, for relative comparisons.
    pub scale: f64,
}

/// Evaluates `residual` on a grid; rows are computed in parallel and merged
/// in index order.
pub fn residual_grid(
    residual: &Expression,
    a: &Expression,
    b: &Expression,
    region: &Region,
    n: usize,
) -> Result<ResidualGrid, WebError> {
    let xs = linspace(region.x_min, region.x_max, n);
    let ys = linspace(region.y_min, region.y_max, n);
    let rows: Vec<Result<(Vec<f64>, f64), WebError>> = ys
        .par_iter()
        .map(|&y| {
            let mut row = Vec::with_capacity(xs.len());
            let mut scale: f64 = 0.0;
            for &x in &xs {
                row.push(residual.eval(&[x, y])?);
                let (av, bv) = (a.eval(&[x, y])?, b.eval(&[x, y])?);
                scale = scale.max((1.0 + av.abs() + bv.abs()).powi(5));
            }
            Ok((row, scale))
        })
        .collect();
    let mut values = Vec::with_capacity(n);
    let mut scale: f64 = 1.0;
    let mut max_abs: f64 = 0.0;
    for r in rows {
        let (row, s) = r?;
        max_abs = row.iter().fold(max_abs, |m, v| m.max(v.abs()));
        scale = scale.max(s);
        values.push(row);
    }
    Ok(ResidualGrid { xs, ys, values, max_abs, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;

    const XY: &[&str] = &["x", "y"];

    fn residual(a: &str, b: &str) -> Expression {
        pde_residual(&parse(a, XY).unwrap(), &parse(b, XY).unwrap()).unwrap()
    }

    #[test]
    fn hexagonal_normal_forms_vanish() {
        for (a, b) in [("2*x", "y"), ("x", "-y")] {
            let r = residual(a, b);
            for x in [-1.0, -0.3, 0.4, 1.0] {
                for y in [-1.0, 0.2, 0.9] {
                    assert!(r.eval(&[x, y]).unwrap().abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn control_residual() {
        let r = residual("x", "y");
        for (x, y) in [(-1.0, 0.1), (0.5, -0.7), (0.9, 0.9)] {
            let want = 216.0 * x * x * y;
            assert!((r.eval(&[x, y]).unwrap() - want).abs() <= 1e-9 * want.abs());
        }
    }

    #[test]
    fn grid_is_ordered() {
        let a = parse("x", XY).unwrap();
        let b = parse("y", XY).unwrap();
        let r = pde_residual(&a, &b).unwrap();
        let g = residual_grid(&r, &a, &b, &Region::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 5).unwrap();
        assert_eq!(g.values.len(), 5);
        assert!((g.values[4][0] - 216.0).abs() < 1e-9);
        assert!((g.max_abs - 216.0).abs() < 1e-9);
    }
}
