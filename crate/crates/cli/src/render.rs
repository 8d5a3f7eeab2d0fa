//! SVG figures of traced solution webs.

use std::fmt::Write as _;

use hexweb::webtrace::{MarkerKind, WebCurve};
use hexweb::Expression;
use thiserror::Error;

pub const CANVAS: f64 = 480.0;

/// Marching-squares cells per side for the discriminant contour.
const CONTOUR_CELLS: usize = 120;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("empty viewport")]
    EmptyViewport,
    #[error("nothing to render")]
    NoCurves,
    #[error(transparent)]
    Expr(#[from] hexweb::ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Draw `y` horizontally and `x` vertically.
    pub swap_axes: bool,
}

impl Viewport {
    pub fn new(bounds: [f64; 4], swap_axes: bool) -> Result<Self, RenderError> {
        let [x_min, x_max, y_min, y_max] = bounds;
        if !(x_min < x_max && y_min < y_max) || bounds.iter().any(|v| !v.is_finite()) {
            return Err(RenderError::EmptyViewport);
        }
        Ok(Self { x_min, x_max, y_min, y_max, swap_axes })
    }

    /// Canvas coordinates of a plane point.
    pub fn to_canvas(&self, x: f64, y: f64) -> (f64, f64) {
        let u = (x - self.x_min) / (self.x_max - self.x_min);
        let v = (y - self.y_min) / (self.y_max - self.y_min);
        if self.swap_axes {
            (v * CANVAS, (1.0 - u) * CANVAS)
        } else {
            (u * CANVAS, (1.0 - v) * CANVAS)
        }
    }

    /// Plane point of canvas coordinates.
    pub fn from_canvas(&self, cx: f64, cy: f64) -> (f64, f64) {
        let (u, v) = if self.swap_axes { (1.0 - cy / CANVAS, cx / CANVAS) } else { (cx / CANVAS, 1.0 - cy / CANVAS) };
        (self.x_min + u * (self.x_max - self.x_min), self.y_min + v * (self.y_max - self.y_min))
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// One `<path>` per curve, a dashed discriminant contour when given, and a
/// circle at every cusp marker.
pub fn render_svg(
    curves: &[WebCurve],
    discriminant: Option<&Expression>,
    view: &Viewport,
) -> Result<String, RenderError> {
    if curves.is_empty() {
        return Err(RenderError::NoCurves);
    }
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="480" height="480" viewBox="0 0 480 480">"#
    );
    let _ = writeln!(out, r#"<rect width="480" height="480" fill="white"/>"#);
    let _ = writeln!(out, r#"<g fill="none" stroke="black" stroke-width="0.8">"#);
    for c in curves {
        let mut d = String::new();
        for (k, z) in c.points.iter().enumerate() {
            let (cx, cy) = view.to_canvas(z[0], z[1]);
            let _ = write!(d, "{}{} {}", if k == 0 { "M" } else { " L" }, num(cx), num(cy));
        }
        let _ = writeln!(out, r#"<path d="{d}"/>"#);
    }
    let _ = writeln!(out, "</g>");
    if let Some(disc) = discriminant {
        let segments = contour(disc, view)?;
        if !segments.is_empty() {
            let mut d = String::new();
            for (a, b) in segments {
                let (ax, ay) = view.to_canvas(a.0, a.1);
                let (bx, by) = view.to_canvas(b.0, b.1);
                let _ = write!(d, "M{} {} L{} {} ", num(ax), num(ay), num(bx), num(by));
            }
            let _ = writeln!(
                out,
                r#"<path class="discriminant" d="{}" fill="none" stroke="red" stroke-width="1" stroke-dasharray="4 3"/>"#,
                d.trim_end()
            );
        }
    }
    for c in curves {
        for m in c.markers.iter().filter(|m| m.kind == MarkerKind::Cusp) {
            let z = c.points[m.index];
            let (cx, cy) = view.to_canvas(z[0], z[1]);
            let _ = writeln!(
                out,
                r#"<circle class="cusp" cx="{}" cy="{}" r="3" fill="none" stroke="blue"/>"#,
                num(cx),
                num(cy)
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

type Seg = ((f64, f64), (f64, f64));

/// Zero set of `f` over the viewport by marching squares with linear
/// interpolation on cell edges.
fn contour(f: &Expression, view: &Viewport) -> Result<Vec<Seg>, RenderError> {
    let n = CONTOUR_CELLS;
    let xs: Vec<f64> = (0..=n).map(|i| view.x_min + (view.x_max - view.x_min) * i as f64 / n as f64).collect();
    let ys: Vec<f64> = (0..=n).map(|j| view.y_min + (view.y_max - view.y_min) * j as f64 / n as f64).collect();
    let mut v = vec![vec![0.0; n + 1]; n + 1];
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            v[j][i] = f.eval(&[x, y])?;
        }
    }
    let lerp = |p: (f64, f64), q: (f64, f64), a: f64, b: f64| {
        let t = if a == b { 0.5 } else { a / (a - b) };
        (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
    };
    let mut segs = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let corners = [(xs[i], ys[j]), (xs[i + 1], ys[j]), (xs[i + 1], ys[j + 1]), (xs[i], ys[j + 1])];
            let vals = [v[j][i], v[j][i + 1], v[j + 1][i + 1], v[j + 1][i]];
            let mut cuts = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (vals[e], vals[(e + 1) % 4]);
                if (a > 0.0) != (b > 0.0) {
                    cuts.push(lerp(corners[e], corners[(e + 1) % 4], a, b));
                }
            }
            match cuts.len() {
                2 => segs.push((cuts[0], cuts[1])),
                4 => {
                    let centre = vals.iter().sum::<f64>() / 4.0;
                    if (centre > 0.0) == (vals[0] > 0.0) {
                        segs.push((cuts[0], cuts[3]));
                        segs.push((cuts[1], cuts[2]));
                    } else {
                        segs.push((cuts[0], cuts[1]));
                        segs.push((cuts[2], cuts[3]));
                    }
                }
                _ => {}
            }
        }
    }
    Ok(segs)
}

/// Cusp circle centres in an SVG produced by [`render_svg`], in canvas units.
pub fn cusp_circles(svg: &str) -> Vec<(f64, f64)> {
    svg.lines()
        .filter(|l| l.starts_with(r#"<circle class="cusp""#))
        .filter_map(|l| Some((attr(l, "cx")?, attr(l, "cy")?)))
        .collect()
}

fn attr(line: &str, name: &str) -> Option<f64> {
    let key = format!(" {name}=\"");
    let start = line.find(&key)? + key.len();
    let end = line[start..].find('"')? + start;
    line[start..end].parse().ok()
}
