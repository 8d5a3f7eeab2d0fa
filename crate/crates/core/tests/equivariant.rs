use hexweb::equivariant::{
    g1, g2, g3, homotopy_normalize, malgrange_decompose, orbit, vieta, EquivariantError, EquivariantIntegral,
    HomotopyOptions,
};
use proptest::prelude::*;

#[test]
fn cusp_integral_decomposes_exactly() {
    for (p, q) in [(0.7, 0.2), (-0.4, 1.1), (1.3, -0.25)] {
        let frame = orbit(p, q);
        let values = frame.images.map(|(p, q)| p * (2.0 * q + p).powi(3));
        let got = malgrange_decompose(&values, &frame).unwrap().f;
        let (a, b) = (frame.a, frame.b);
        for (g, w) in got.iter().zip([a * a, 3.0 * b, 6.0 * b, -a, a, 0.0]) {
            assert!((g - w).abs() <= 1e-9);
        }
    }
}

#[test]
fn homotopy_rejects_linear_target() {
    let err = homotopy_normalize(&EquivariantIntegral::parse("1", "0").unwrap(), &HomotopyOptions::default());
    assert!(matches!(err, Err(EquivariantError::Inadmissible { .. })));
}

fn coefficients() -> impl Strategy<Value = [f64; 4]> {
    proptest::array::uniform4(-1.0f64..1.0)
}

proptest! {
    #[test]
    fn skew_and_sum_identities(f1 in coefficients(), f3 in coefficients(), p in -1.5f64..1.5, q in -1.5f64..1.5) {
        let poly = |c: [f64; 4]| format!("({}) + ({})*A + ({})*B + ({})*A*B", c[0], c[1], c[2], c[3]);
        let u = EquivariantIntegral::parse(&poly(f1), &poly(f3)).unwrap();
        let pt = (p, q);
        let (a, b, c) = (u.u(pt).unwrap(), u.u2(pt).unwrap(), u.u3(pt).unwrap());
        let scale = 1.0f64.max(a.abs()).max(b.abs()).max(c.abs());
        prop_assert!((u.u(g1(pt)).unwrap() + a).abs() <= 1e-10 * scale);
        prop_assert!((a + b + c).abs() <= 1e-10 * scale);
    }

    #[test]
    fn generators_preserve_vieta(p in -2.0f64..2.0, q in -2.0f64..2.0) {
        let (a, b) = vieta((p, q));
        for g in [g1, g2, g3] {
            let (ga, gb) = vieta(g((p, q)));
            prop_assert!((ga - a).abs() <= 1e-12 * (1.0 + a.abs()) && (gb - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
