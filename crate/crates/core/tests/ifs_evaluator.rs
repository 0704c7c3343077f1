mod common;

use chfif::eval::{refine, sample_count};
use chfif::ifs::{apply_map, build_system, DataPoints, Knots};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coefficients_are_linear_in_data(
        (knots, params, d1, d2) in (2usize..5).prop_flat_map(|n| (common::knots(n), common::params(n), common::data(n), common::data(n))),
        a in -3.0f64..3.0,
    ) {
        let combo = DataPoints::new(
            d1.y.iter().zip(&d2.y).map(|(u, v)| a * u + v).collect(),
            d1.z.iter().zip(&d2.z).map(|(u, v)| a * u + v).collect(),
        );
        let s = build_system(knots.clone(), params.clone(), combo).unwrap();
        let s1 = build_system(knots.clone(), params.clone(), d1).unwrap();
        let s2 = build_system(knots, params, d2).unwrap();
        let (c, c1, c2) = (s.coeffs(), s1.coeffs(), s2.coeffs());
        for (x, (u, v)) in [(&c.c, (&c1.c, &c2.c)), (&c.d, (&c1.d, &c2.d)), (&c.e, (&c1.e, &c2.e)), (&c.h, (&c1.h, &c2.h))] {
            for i in 0..x.len() {
                prop_assert!((x[i] - (a * u[i] + v[i])).abs() < 1e-10 * (1.0 + x[i].abs()));
            }
        }
    }

    #[test]
    fn maps_send_end_points_to_adjacent_knots(
        (knots, params, data) in (2usize..6).prop_flat_map(|n| (common::knots(n), common::params(n), common::data(n))),
    ) {
        let s = build_system(knots.clone(), params, data.clone()).unwrap();
        let n = knots.n();
        let x = knots.values();
        for m in 1..=n {
            let lo = apply_map(&s, m, (x[0], data.y[0], data.z[0])).unwrap();
            let hi = apply_map(&s, m, (x[n], data.y[n], data.z[n])).unwrap();
            prop_assert!((lo.0 - x[m - 1]).abs() <= 1e-12 && (lo.1 - data.y[m - 1]).abs() <= 1e-12 && (lo.2 - data.z[m - 1]).abs() <= 1e-12);
            prop_assert!((hi.0 - x[m]).abs() <= 1e-12 && (hi.1 - data.y[m]).abs() <= 1e-12 && (hi.2 - data.z[m]).abs() <= 1e-12);
            prop_assert_eq!(knots.map(m, x[0]), x[m - 1]);
            prop_assert_eq!(knots.map(m, x[n]), x[m]);
        }
    }

    #[test]
    fn knot_samples_are_the_data(
        (knots, params, data) in (2usize..5).prop_flat_map(|n| (common::knots(n), common::params(n), common::data(n))),
        depth in 0u32..5,
    ) {
        let n = knots.n();
        let s = build_system(knots, params, data.clone()).unwrap();
        let g = refine(&s, depth).unwrap();
        let step = n.pow(depth);
        for i in 0..=n {
            prop_assert_eq!(g.f1[i * step], data.y[i]);
            prop_assert_eq!(g.f2[i * step], data.z[i]);
        }
    }

    #[test]
    fn refinement_is_bitwise_consistent(
        (knots, params, data) in (2usize..5).prop_flat_map(|n| (common::knots(n), common::params(n), common::data(n))),
        depth in 0u32..5,
    ) {
        let n = knots.n();
        let s = build_system(knots, params, data).unwrap();
        let coarse = refine(&s, depth).unwrap();
        let fine = refine(&s, depth + 1).unwrap();
        prop_assert_eq!(fine.len() as u128, sample_count(n, depth + 1).unwrap());
        let sub = fine.subsample(n);
        prop_assert_eq!(sub.xs, coarse.xs);
        prop_assert_eq!(sub.f1, coarse.f1);
        prop_assert_eq!(sub.f2, coarse.f2);
    }

    #[test]
    fn hidden_component_is_self_affine(
        (knots, params, data) in (2usize..5).prop_flat_map(|n| (common::knots(n), common::params(n), common::data(n))),
        depth in 0u32..4,
    ) {
        let n = knots.n();
        let s = build_system(knots.clone(), params.clone(), data).unwrap();
        let coarse = refine(&s, depth).unwrap();
        let fine = refine(&s, depth + 1).unwrap();
        let m = coarse.len() - 1;
        let c = s.coeffs();
        for k in 1..=n {
            for j in 0..=m {
                let want = params.gamma[k - 1] * coarse.f2[j] + c.e[k - 1] * coarse.xs[j] + c.h[k - 1];
                let got = fine.f2[(k - 1) * m + j];
                prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "interval {} point {}", k, j);
            }
        }
    }

    #[test]
    fn grid_maximum_grows_and_settles(
        (params, data) in (2usize..4).prop_flat_map(|n| (common::params(n), common::data(n))),
    ) {
        let n = params.n();
        let s = build_system(Knots::uniform(n), params.clone(), data).unwrap();
        let maxes: Vec<f64> = (0..9).map(|d| refine(&s, d).unwrap().f1.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
        for w in maxes.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        // Cauchy bound: the oscillation on a depth-d cell is at most
        // c^d times the global oscillation of (f1, f2).
        let c = params.modulus().max(1.0 / n as f64);
        let g = refine(&s, 8).unwrap();
        let sup = g.f1.iter().chain(&g.f2).fold(0.0f64, |m, v| m.max(v.abs()));
        for (d, w) in maxes.windows(2).enumerate() {
            prop_assert!(w[1] - w[0] <= 4.0 * sup * c.powi(d as i32) + 1e-12, "depth {}: {:?}", d, maxes);
        }
    }
}
