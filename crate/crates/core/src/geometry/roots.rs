use serde::{Deserialize, Serialize};

use super::{GeometryError, ImplicitOde};
use crate::numeric::{monic_real_roots, RealRoot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootPattern {
    ThreeDistinct,
    DoublePlusSimple,
    Triple,
    OneRealPlusComplexPair,
    DegreeTwo,
    RootAtInfinityPresent,
}

impl RootPattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            RootPattern::ThreeDistinct => "three-distinct",
            RootPattern::DoublePlusSimple => "double-plus-simple",
            RootPattern::Triple => "triple",
            RootPattern::OneRealPlusComplexPair => "one-real-plus-complex-pair",
            RootPattern::DegreeTwo => "degree-two",
            RootPattern::RootAtInfinityPresent => "root-at-infinity-present",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Clustering tolerance relative to the coefficient scale.
    pub rel_tol: f64,
    /// Treat a vanishing leading coefficient as a root at infinity instead of
    /// an error.
    pub allow_degree_drop: bool,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-7, allow_degree_drop: false }
    }
}

/// Real slope roots over a base point, ascending, with multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub x: f64,
    pub y: f64,
    pub roots: Vec<RealRoot>,
    pub pattern: RootPattern,
    pub complex_pairs: usize,
    /// Multiplicity of the root at infinity (degree drop).
    pub at_infinity: usize,
    pub scale: f64,
}

impl RootSet {
    pub fn values(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.value).collect()
    }

    /// Roots listed with repetition.
    pub fn expanded(&self) -> Vec<f64> {
        self.roots.iter().flat_map(|r| std::iter::repeat_n(r.value, r.multiplicity)).collect()
    }

    pub fn max_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).max().unwrap_or(0)
    }
}

impl ImplicitOde {
    /// Real roots in `p` at `(x, y)`.
    pub fn roots_at(&self, x: f64, y: f64, opts: &RootOptions) -> Result<RootSet, GeometryError> {
        let c = self.coefficients_at(x, y)?;
        let n = self.degree();
        let size = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut lead_index = n;
        while lead_index > 0 && c[lead_index].abs() <= 1e-12 * size {
            if !opts.allow_degree_drop {
                return Err(GeometryError::LeadingCoefficientVanishes { x, y });
            }
            lead_index -= 1;
        }
        let at_infinity = n - lead_index;
        if lead_index == 0 {
            return Err(GeometryError::LeadingCoefficientVanishes { x, y });
        }
        let lead = c[lead_index];
        let lower: Vec<f64> = c[..lead_index].iter().map(|v| v / lead).collect();
        let found = monic_real_roots(&lower, opts.rel_tol);
        let pattern = if at_infinity > 0 {
            RootPattern::RootAtInfinityPresent
        } else if n == 2 {
            RootPattern::DegreeTwo
        } else if found.complex_pairs > 0 {
            RootPattern::OneRealPlusComplexPair
        } else {
            match found.roots.iter().map(|r| r.multiplicity).max() {
                Some(3) => RootPattern::Triple,
                Some(2) => RootPattern::DoublePlusSimple,
                _ => RootPattern::ThreeDistinct,
            }
        };
        Ok(RootSet {
            x,
            y,
            roots: found.roots,
            pattern,
            complex_pairs: found.complex_pairs,
            at_infinity,
            scale: found.scale,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn opts() -> RootOptions {
        RootOptions::default()
    }

    #[test]
    fn examples() {
        let ode = ImplicitOde::depressed_cubic("2*x", "y").unwrap();
        let r = ode.roots_at(-1.5, -2.0, &opts()).unwrap();
        assert_eq!(r.pattern, RootPattern::DoublePlusSimple);
        assert!((r.roots[0].value + 1.0).abs() < 1e-12 && r.roots[0].multiplicity == 2);
        assert!((r.roots[1].value - 2.0).abs() < 1e-12 && r.roots[1].multiplicity == 1);

        let r = ode.roots_at(0.0, 0.0, &opts()).unwrap();
        assert_eq!(r.pattern, RootPattern::Triple);
        assert_eq!(r.roots, vec![RealRoot { value: 0.0, multiplicity: 3 }]);

        let v = ImplicitOde::monic_quadratic("1", "0").unwrap();
        let r = v.roots_at(0.3, -7.0, &opts()).unwrap();
        assert_eq!(r.pattern, RootPattern::DegreeTwo);
        assert_eq!(r.values(), vec![-1.0, 0.0]);
    }

    #[test]
    fn degree_drop() {
        let ode = ImplicitOde::from_coefficients(vec![
            crate::parse("x", super::super::XY).unwrap(),
            crate::parse("1", super::super::XY).unwrap(),
            crate::parse("-1", super::super::XY).unwrap(),
            crate::parse("0", super::super::XY).unwrap(),
        ])
        .unwrap();
        assert!(matches!(ode.roots_at(0.0, 0.0, &opts()), Err(GeometryError::LeadingCoefficientVanishes { .. })));
        let r = ode.roots_at(0.0, 0.0, &RootOptions { allow_degree_drop: true, ..opts() }).unwrap();
        assert_eq!(r.pattern, RootPattern::RootAtInfinityPresent);
        assert_eq!(r.at_infinity, 1);
        assert_eq!(r.expanded().len(), 2);
    }

    proptest! {
        #[test]
        fn multiplicities_reproduce_coefficients(x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let ode = ImplicitOde::depressed_cubic("2*x", "y").unwrap();
            let r = ode.roots_at(x, y, &opts()).unwrap();
            prop_assume!(r.complex_pairs == 0);
            let e = r.expanded();
            let (s1, s2, s3) = (e[0] + e[1] + e[2], e[0] * e[1] + e[1] * e[2] + e[0] * e[2], e[0] * e[1] * e[2]);
            let scale = 1.0 + x.abs() + y.abs();
            prop_assert!(s1.abs() <= 1e-8 * scale);
            prop_assert!((s2 - 2.0 * x).abs() <= 1e-8 * scale);
            prop_assert!((-s3 - y).abs() <= 1e-8 * scale);
        }

        #[test]
        fn discriminant_sign_matches_root_pattern(x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let ode = ImplicitOde::depressed_cubic("2*x", "y").unwrap();
            let d = ode.discriminant().eval(&[x, y]).unwrap();
            prop_assume!(d.abs() > 1e-6);
            let r = ode.roots_at(x, y, &opts()).unwrap();
            prop_assert_eq!(d < 0.0, r.pattern == RootPattern::ThreeDistinct);
        }
    }
}
