//! Implicit cubic ODEs `F(x, y, p) = 0`, `p = dy/dx`, whose solutions form
//! planar 3-webs.
//!
//! The crate tests hexagonality of such webs (symbolic PDE residual, numerical
//! web curvature, Briançon hexagon closure), classifies singular points into
//! five normal forms, traces solution curves on the surface `F = 0` and builds
//! hexagonal ODEs from D3-equivariant first integrals.

pub mod classify;
pub mod equivariant;
pub mod expr;
pub mod geometry;
pub mod hexagonality;
pub mod json;
pub mod numeric;
pub mod webtrace;

pub use expr::{parse, ExprError, Expression};
pub use geometry::{ImplicitOde, JetPoint, OdeSpec, RootPattern, RootSet};
