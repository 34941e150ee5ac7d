use num_complex::Complex;
use proptest::prelude::*;
use pshflat::domain::{sphere_point, DomainSpec};
use pshflat::mapping::{
    associated_lift, associated_map_transform, holder_report, map_field, projective_distance,
    pullback_determinant_check, random_unitary, totally_real_defect, HolomorphicMap, TargetField,
};
use pshflat::radial::ball_samples;
use pshflat::wirtinger::{to_complex_point, to_real_coordinates};

type C = Complex<f64>;

/// Ball automorphisms with `|a| <= 0.6`.
fn automorphism(n: usize) -> impl Strategy<Value = HolomorphicMap> {
    (prop::collection::vec(-1.0f64..1.0, 2 * n), 0.0f64..0.6).prop_map(move |(v, r)| {
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-9);
        let a: Vec<C> = v
            .chunks(2)
            .map(|p| C::new(p[0], p[1]) * (r / norm))
            .collect();
        HolomorphicMap::ball_automorphism(&a).unwrap()
    })
}

fn ball_map(n: usize) -> impl Strategy<Value = HolomorphicMap> {
    prop_oneof![
        automorphism(n),
        any::<u64>().prop_map(move |s| HolomorphicMap::linear(&random_unitary(n, s)).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn associated_transform_is_functorial(f in ball_map(2), g in ball_map(2), i in 1u64..1000) {
        let rho = DomainSpec::ball(2).unwrap().expression().clone();
        let lifted = associated_lift(&rho, &sphere_point(2, i)).unwrap();
        let stepwise = associated_map_transform(&g, &associated_map_transform(&f, &lifted).unwrap()).unwrap();
        let composed = associated_map_transform(&f.then(&g).unwrap(), &lifted).unwrap();
        prop_assert!(projective_distance(&stepwise.fiber, &composed.fiber) <= 1e-9);
        let gap = stepwise.base_point().iter().zip(composed.base_point()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-12);
    }

    #[test]
    fn totally_real_defect_is_unitarily_invariant(seed in any::<u64>(), i in 1u64..1000) {
        let domain = DomainSpec::ellipsoid(&[2.0, 1.0]).unwrap();
        let u = random_unitary(2, seed);
        // r' = r o U and z' = U* z lie on the rotated hypersurface.
        let rotated = domain.expression().compose_linear(&u);
        let x = domain.boundary_samples(1, i).unwrap().remove(0);
        let z = to_complex_point(&x);
        let zp: Vec<C> = (0..2).map(|k| (0..2).map(|j| u[j][k].conj() * z[j]).sum()).collect();
        let d = totally_real_defect(domain.expression(), &x).unwrap().defect;
        let dp = totally_real_defect(&rotated, &to_real_coordinates(&zp)).unwrap().defect;
        prop_assert!((d - dp).abs() <= 1e-8, "{d} vs {dp}");
    }

    #[test]
    fn pullback_identity_holds_for_catalog_pairs(f in ball_map(2), seed in any::<u64>()) {
        for target in [DomainSpec::ball(2).unwrap(), DomainSpec::ellipsoid(&[2.0, 1.0]).unwrap()] {
            for x in ball_samples(2, 5, seed) {
                let check = pullback_determinant_check(&f, TargetField::Expression(target.expression()), &x).unwrap();
                prop_assert!(check.discrepancy <= 1e-8, "{check:?}");
            }
        }
    }

    #[test]
    fn lipschitz_estimate_is_stable(f in automorphism(2), seed in any::<u64>()) {
        let report = holder_report(map_field(&f), 1.0, 2, 1000, seed).unwrap();
        prop_assert!(report.relative_change <= 0.05, "{report:?}");
    }
}

#[test]
fn image_of_the_sphere_stays_on_the_sphere() {
    let f = HolomorphicMap::parse("ball-auto:0.3,0.1i").unwrap();
    for i in 1..50 {
        let w = f.eval(&to_complex_point(&sphere_point(2, i))).unwrap();
        assert!((w.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
