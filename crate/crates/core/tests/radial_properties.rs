use proptest::prelude::*;
use pshflat::radial::{grid_refinement_change, solve_radial, Profile, RadialProblem};

fn solve(n: usize, profile: Profile) -> pshflat::radial::RadialSolution {
    solve_radial(&RadialProblem::new(n, profile)).unwrap()
}

/// Nonnegative quadratic profiles `c0 + c1 t + c2 t^2`.
fn profile() -> impl Strategy<Value = Profile> {
    (0.1f64..3.0, 0.0f64..2.0, 0.0f64..2.0).prop_map(|(a, b, c)| Profile::Poly(vec![a, b, c]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn larger_data_gives_smaller_solution(n in 1usize..=4, f in profile(), bump in 0.01f64..1.0) {
        let Profile::Poly(cs) = &f else { unreachable!() };
        let mut larger = cs.clone();
        larger[0] += bump;
        let (lo, hi) = (solve(n, f.clone()), solve(n, Profile::Poly(larger)));
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            prop_assert!(hi.value(t).unwrap() <= lo.value(t).unwrap() + 1e-12);
        }
    }

    #[test]
    fn scaling_data_by_lambda_to_the_n_scales_solution(n in 1usize..=4, f in profile(), lambda in 0.2f64..5.0) {
        let base = solve(n, f.clone());
        let scaled = solve(n, f.scaled(lambda.powi(n as i32)));
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let (u, v) = (base.value(t).unwrap(), scaled.value(t).unwrap());
            prop_assert!((v - lambda * u).abs() <= 1e-9 * (1.0 + lambda * u.abs()), "t={t}: {v} vs {}", lambda * u);
        }
    }

    #[test]
    fn solutions_are_plurisubharmonic(n in 1usize..=4, f in profile()) {
        let (slope, radial) = solve(n, f).psh_margins().unwrap();
        prop_assert!(slope >= -1e-10 && radial >= -1e-10, "{slope} {radial}");
    }

    #[test]
    fn grid_refinement_converges(n in 1usize..=4, f in profile()) {
        let change = grid_refinement_change(&RadialProblem::new(n, f)).unwrap();
        prop_assert!(change <= 1e-8, "{change}");
    }
}
