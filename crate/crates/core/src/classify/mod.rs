//! Decision procedure mapping a point of `F = 0` to one of the five normal
//! forms of implicit ODEs with hexagonal 3-webs, plus symmetry checks.

mod symmetry;

use thiserror::Error;

use crate::geometry::{
    contact_pairing, criminant_trace, CriminantOptions, CriminantSample, GeometryError, ImplicitOde, JetPoint,
    RootOptions, RootPattern,
};
use crate::hexagonality::Verdict;
use crate::json::{Json, ToJson};

pub use symmetry::{prolonged_symmetry_residual, sample_surface, FoldSymmetry};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Expr(#[from] crate::expr::ExprError),
    #[error("classification needs a hexagonality verdict for the solution web")]
    MissingHexagonality,
    #[error("solution web is not known to be hexagonal (verdict: {0})")]
    NotHexagonal(&'static str),
    #[error("invalid classification input: {0}")]
    Invalid(String),
}

/// How hexagonality of the solution web was established.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hexagonality {
    /// Verdict of a hexagon walk (or curvature check) near the point.
    Verdict(Verdict),
    /// The caller asserts that `A, B` satisfy the hexagonality PDE.
    Asserted,
}

impl Hexagonality {
    fn as_str(&self) -> &'static str {
        match self {
            Hexagonality::Verdict(v) => v.as_str(),
            Hexagonality::Asserted => "asserted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    CuspTransverse,
    CuspLegendrian,
    FoldLegendrian,
    FoldTransverse,
    RegularHexagonal,
    NotClassifiable,
}

impl Tag {
    /// Roman numeral of the normal form, `None` when not classifiable.
    pub fn numeral(&self) -> Option<&'static str> {
        match self {
            Tag::CuspTransverse => Some("I"),
            Tag::CuspLegendrian => Some("II"),
            Tag::FoldLegendrian => Some("III"),
            Tag::FoldTransverse => Some("IV"),
            Tag::RegularHexagonal => Some("V"),
            Tag::NotClassifiable => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Tag::CuspTransverse => "I-cusp-transverse",
            Tag::CuspLegendrian => "II-cusp-Legendrian",
            Tag::FoldLegendrian => "III-fold-Legendrian",
            Tag::FoldTransverse => "IV-fold-transverse",
            Tag::RegularHexagonal => "V-regular-hexagonal",
            Tag::NotClassifiable => "NotClassifiable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Criminant arclength sampled on each side of the point.
    pub radius: f64,
    /// `|dy - p dx|` at or below this counts as Legendrian.
    pub legendrian_tol: f64,
    /// Case I needs `|pairing| >= ring_coefficient * dp^2` on the ring
    /// `0.1 radius <= |dp| <= radius`.
    pub ring_coefficient: f64,
    /// Minimum samples per criminant arc.
    pub min_samples: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { radius: 0.5, legendrian_tol: 1e-7, ring_coefficient: 0.01, min_samples: 20 }
    }
}

/// Contact pairing along one criminant arc.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArcSummary {
    pub samples: usize,
    pub max_abs: f64,
    pub min_abs: f64,
    /// Samples in the punctured ring used for case I, and how many pass.
    pub ring_samples: usize,
    pub ring_passing: usize,
}

impl ToJson for ArcSummary {
    fn to_json(&self) -> Json {
        Json::obj([
            ("samples", self.samples.into()),
            ("max_abs_pairing", self.max_abs.into()),
            ("min_abs_pairing", self.min_abs.into()),
            ("ring_samples", self.ring_samples.into()),
            ("ring_passing", self.ring_passing.into()),
        ])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub root_pattern: RootPattern,
    /// Multiplicity of the root `p` over `(x, y)`.
    pub multiplicity: usize,
    pub rank: Option<usize>,
    pub seed_pairing: Option<f64>,
    pub arcs: Option<[ArcSummary; 2]>,
    pub hexagonality: Hexagonality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularityClass {
    pub tag: Tag,
    pub reason: Option<String>,
    pub point: JetPoint,
    pub diagnostics: Diagnostics,
    pub options: ClassifyOptions,
}

impl ToJson for SingularityClass {
    fn to_json(&self) -> Json {
        let d = &self.diagnostics;
        let arcs = match &d.arcs {
            Some([b, f]) => Json::obj([("backward", b.to_json()), ("forward", f.to_json())]),
            None => Json::Null,
        };
        Json::obj([
            ("tag", self.tag.as_str().into()),
            ("normal_form", self.tag.numeral().map_or(Json::Null, Json::from)),
            ("reason", self.reason.clone().map_or(Json::Null, Json::from)),
            ("point", Json::nums(&self.point.as_array())),
            (
                "diagnostics",
                Json::obj([
                    ("root_pattern", d.root_pattern.as_str().into()),
                    ("multiplicity", d.multiplicity.into()),
                    ("rank", d.rank.map_or(Json::Null, Json::from)),
                    ("seed_pairing", d.seed_pairing.map_or(Json::Null, Json::from)),
                    ("criminant_arcs", arcs),
                    ("hexagonality", d.hexagonality.as_str().into()),
                ]),
            ),
            (
                "thresholds",
                Json::obj([
                    ("radius", self.options.radius.into()),
                    ("step", (self.options.radius / 40.0).into()),
                    ("legendrian_tol", self.options.legendrian_tol.into()),
                    ("ring_inner", (0.1 * self.options.radius).into()),
                    ("ring_coefficient", self.options.ring_coefficient.into()),
                    ("min_samples", self.options.min_samples.into()),
                ]),
            ),
        ])
    }
}

/// Classifies `m` into one of the five normal forms.
///
/// Hexagonality of the solution web is an input: `None` is an error, and so
/// is any verdict other than hexagonal.
pub fn classify_point(
    ode: &ImplicitOde,
    m: &JetPoint,
    hexagonality: Option<Hexagonality>,
    opts: &ClassifyOptions,
) -> Result<SingularityClass, ClassifyError> {
    let hexagonality = hexagonality.ok_or(ClassifyError::MissingHexagonality)?;
    if let Hexagonality::Verdict(v) = hexagonality {
        if v != Verdict::Hexagonal {
            return Err(ClassifyError::NotHexagonal(v.as_str()));
        }
    }
    if !(opts.radius > 0.0) || !opts.radius.is_finite() {
        return Err(ClassifyError::Invalid("radius must be positive".into()));
    }
    ode.singular_kind(m)?;

    let roots = ode.roots_at(m.x, m.y, &RootOptions { allow_degree_drop: true, ..RootOptions::default() })?;
    let nearest = roots
        .roots
        .iter()
        .min_by(|a, b| (a.value - m.p).abs().total_cmp(&(b.value - m.p).abs()))
        .ok_or_else(|| ClassifyError::Invalid("no real root over the point".into()))?;
    let mut diagnostics = Diagnostics {
        root_pattern: roots.pattern,
        multiplicity: nearest.multiplicity,
        rank: None,
        seed_pairing: None,
        arcs: None,
        hexagonality,
    };
    let result = |tag: Tag, reason: Option<String>, diagnostics: Diagnostics| SingularityClass {
        tag,
        reason,
        point: *m,
        diagnostics,
        options: *opts,
    };

    if nearest.multiplicity == 1 {
        let all_simple = roots.roots.iter().all(|r| r.multiplicity == 1) && roots.complex_pairs == 0;
        let families = roots.roots.len() + roots.at_infinity + usize::from(ode.degree() == 2);
        return Ok(if all_simple && families >= 3 {
            result(Tag::RegularHexagonal, None, diagnostics)
        } else {
            let why = if all_simple { "fewer than three real families" } else { "other roots collide over the point" };
            result(Tag::NotClassifiable, Some(why.into()), diagnostics)
        });
    }

    let rank = ode.regularity_rank(m)?;
    diagnostics.rank = Some(rank);
    if rank < 2 {
        return Ok(result(Tag::NotClassifiable, Some(format!("rank={rank}")), diagnostics));
    }

    let copts = CriminantOptions { arclength: opts.radius, step: opts.radius / 40.0, bounds: None };
    let trace = criminant_trace(ode, m, &copts)?;
    let seed = trace.seed();
    let seed_pairing = contact_pairing(seed)?;
    diagnostics.seed_pairing = Some(seed_pairing);
    let arcs =
        [summarize(&trace.backward_arc(), seed.point.p, opts)?, summarize(&trace.forward_arc(), seed.point.p, opts)?];
    diagnostics.arcs = Some(arcs);
    if arcs.iter().any(|a| a.samples < opts.min_samples) {
        let reason = format!("criminant arcs have fewer than {} samples", opts.min_samples);
        return Ok(result(Tag::NotClassifiable, Some(reason), diagnostics));
    }
    let tol = opts.legendrian_tol;
    let all_zero = seed_pairing.abs() <= tol && arcs.iter().all(|a| a.max_abs <= tol);
    let none_zero = seed_pairing.abs() > tol && arcs.iter().all(|a| a.min_abs > tol);

    match nearest.multiplicity {
        2 if all_zero => Ok(result(Tag::FoldLegendrian, None, diagnostics)),
        2 if none_zero => Ok(result(Tag::FoldTransverse, None, diagnostics)),
        2 => {
            let reason = "criminant is neither Legendrian nor transverse to the contact planes".to_string();
            Ok(result(Tag::NotClassifiable, Some(reason), diagnostics))
        }
        3 if all_zero => Ok(result(Tag::CuspLegendrian, None, diagnostics)),
        3 if seed_pairing.abs() <= tol
            && arcs.iter().all(|a| a.ring_samples > 0 && a.ring_passing == a.ring_samples) =>
        {
            Ok(result(Tag::CuspTransverse, None, diagnostics))
        }
        3 => {
            let reason = "contact pairing along the criminant matches neither cusp case".to_string();
            Ok(result(Tag::NotClassifiable, Some(reason), diagnostics))
        }
        k => Ok(result(Tag::NotClassifiable, Some(format!("root multiplicity {k}")), diagnostics)),
    }
}

fn summarize(arc: &[&CriminantSample], p0: f64, opts: &ClassifyOptions) -> Result<ArcSummary, ClassifyError> {
    let mut s = ArcSummary { min_abs: f64::INFINITY, ..ArcSummary::default() };
    for sample in arc {
        let v = contact_pairing(sample)?.abs();
        s.samples += 1;
        s.max_abs = s.max_abs.max(v);
        s.min_abs = s.min_abs.min(v);
        let dp = (sample.point.p - p0).abs();
        if dp >= 0.1 * opts.radius && dp <= opts.radius {
            s.ring_samples += 1;
            if v >= opts.ring_coefficient * dp * dp {
                s.ring_passing += 1;
            }
        }
    }
    if s.samples == 0 {
        s.min_abs = 0.0;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet(x: f64, y: f64, p: f64) -> JetPoint {
        JetPoint::new(x, y, p).unwrap()
    }

    fn tag(ode: &ImplicitOde, m: JetPoint) -> SingularityClass {
        classify_point(ode, &m, Some(Hexagonality::Asserted), &ClassifyOptions::default()).unwrap()
    }

    #[test]
    fn normal_forms_at_origin() {
        let cases = [
            (ImplicitOde::depressed_cubic("2*x", "y").unwrap(), Tag::CuspTransverse),
            (ImplicitOde::depressed_cubic("x", "-y").unwrap(), Tag::CuspLegendrian),
            (ImplicitOde::monic_quadratic("0", "-y").unwrap(), Tag::FoldLegendrian),
            (ImplicitOde::monic_quadratic("0", "-x").unwrap(), Tag::FoldTransverse),
            (ImplicitOde::monic_quadratic("1", "0").unwrap(), Tag::RegularHexagonal),
        ];
        for (ode, want) in cases {
            let c = tag(&ode, jet(0.0, 0.0, 0.0));
            assert_eq!(c.tag, want, "{c:?}");
        }
    }

    #[test]
    fn singular_surface_has_rank_one() {
        let ode = ImplicitOde::monic_cubic("0", "-x", "0").unwrap();
        let c = tag(&ode, jet(0.0, 0.0, 0.0));
        assert_eq!(c.tag, Tag::NotClassifiable);
        assert_eq!(c.reason.as_deref(), Some("rank=1"));
    }

    #[test]
    fn regular_points_are_form_v() {
        let ode = ImplicitOde::depressed_cubic("2*x", "y").unwrap();
        assert_eq!(tag(&ode, jet(-1.5, 0.0, 3f64.sqrt())).tag, Tag::RegularHexagonal);
        let ode = ImplicitOde::monic_quadratic("0", "-y").unwrap();
        assert_eq!(tag(&ode, jet(0.3, 1.0, -1.0)).tag, Tag::RegularHexagonal);
        let ode = ImplicitOde::depressed_cubic("2*x", "y").unwrap();
        let c = tag(&ode, jet(1.0, 0.0, 0.0));
        assert_eq!(c.tag, Tag::NotClassifiable);
    }

    #[test]
    fn hexagonality_is_required() {
        let ode = ImplicitOde::depressed_cubic("2*x", "y").unwrap();
        let m = jet(0.0, 0.0, 0.0);
        let opts = ClassifyOptions::default();
        assert_eq!(classify_point(&ode, &m, None, &opts).unwrap_err(), ClassifyError::MissingHexagonality);
        let err = classify_point(&ode, &m, Some(Hexagonality::Verdict(Verdict::Inconclusive)), &opts);
        assert!(matches!(err, Err(ClassifyError::NotHexagonal("inconclusive"))));
    }

    #[test]
    fn off_surface_point_is_rejected() {
        let ode = ImplicitOde::monic_quadratic("0", "-y").unwrap();
        let err = classify_point(&ode, &jet(0.0, 1.0, 0.0), Some(Hexagonality::Asserted), &ClassifyOptions::default());
        assert!(matches!(err, Err(ClassifyError::Geometry(GeometryError::NotOnSurface { .. }))));
    }
}
