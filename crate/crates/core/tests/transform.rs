use std::collections::BTreeMap;

use chfif::basis::ScalingBasis;
use chfif::presets::published_point;
use chfif::transform::{max_difference, project, synthesize, Coeffs, FilterBank, SignalCoefficients, PROJECTION_DEPTH};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_orthogonal(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// Paraunitary bank `E(z) = Q1 diag(I, z^-1 I) Q0` split into `n` phases of
/// width `r`, so the filters have two blocks of taps.
fn paraunitary(rng: &mut ChaCha8Rng, n: usize, r: usize) -> FilterBank {
    let k = n * r;
    let q0 = random_orthogonal(rng, k);
    let q1 = random_orthogonal(rng, k);
    let half = k / 2;
    let mut e0 = DMatrix::zeros(k, k);
    let mut e1 = DMatrix::zeros(k, k);
    for i in 0..k {
        if i < half {
            e0[(i, i)] = 1.0;
        } else {
            e1[(i, i)] = 1.0;
        }
    }
    let (p0, p1) = (&q1 * e0 * &q0, &q1 * e1 * &q0);
    let tap = |rows: std::ops::Range<usize>, p: &DMatrix<f64>, shift: i64| -> Vec<(i64, DMatrix<f64>)> {
        (0..n).map(|ph| (shift * n as i64 + ph as i64, p.view((rows.start, ph * r), (rows.len(), r)).into_owned())).collect()
    };
    let low = [tap(0..r, &p0, 0), tap(0..r, &p1, 1)].concat();
    let high = [tap(r..k, &p0, 0), tap(r..k, &p1, 1)].concat();
    FilterBank::new(n, low, high).unwrap()
}

fn random_coeffs(rng: &mut ChaCha8Rng, shifts: std::ops::Range<i64>, width: usize) -> Coeffs {
    shifts.map(|l| (l, (0..width).map(|_| rng.random_range(-1.0..1.0)).collect())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn orthonormal_split_preserves_energy(seed in any::<u64>(), n in 2usize..4, r in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fb = paraunitary(&mut rng, n, r);
        prop_assert!(fb.orthogonality_defect() < 1e-12);
        let c = SignalCoefficients::new(0, random_coeffs(&mut rng, -10..10, r));
        let d = fb.decompose(&c).unwrap();
        prop_assert!((d.energy() - c.energy()).abs() < 1e-9);
        let back = fb.reconstruct(&d).unwrap();
        prop_assert!(max_difference(&back.scaling, &c.scaling) < 1e-12);
        let m = fb.multilevel(&c, 3).unwrap();
        let total = m.approximation.energy() + m.details.iter().map(SignalCoefficients::energy).sum::<f64>();
        prop_assert!((total - c.energy()).abs() < 1e-9);
        prop_assert!(max_difference(&fb.multilevel_inverse(&m).unwrap().scaling, &c.scaling) < 1e-12);
    }
}

fn basis() -> ScalingBasis {
    ScalingBasis::build(published_point(), true).unwrap()
}

/// `f` sampled at spacing `2^-p` on `[x0, x1]`.
fn grid(x0: f64, x1: f64, p: i32, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<(f64, f64)> {
    let h = 2f64.powi(-p);
    let k = ((x1 - x0) / h).round() as usize;
    let xs: Vec<f64> = (0..=k).map(|j| x0 + j as f64 * h).collect();
    xs.iter().copied().zip(f(&xs)).collect()
}

#[test]
fn elements_of_the_space_are_reproduced() {
    let b = basis();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for level in [0, -1] {
        let c = SignalCoefficients::new(level, random_coeffs(&mut rng, 2..6, 3));
        let s = grid(0.0, 8.0, 10, |xs| synthesize(&c, &b, xs, PROJECTION_DEPTH).unwrap());
        let p = project(&s, &b, level, PROJECTION_DEPTH).unwrap();
        assert!(max_difference(&p.coefficients.scaling, &c.scaling) < 1e-6, "level {level}");
    }
}

#[test]
fn projection_commutes_with_integer_shifts() {
    let b = basis();
    let f = |x: f64| (3.0 * x).sin() * (-0.1 * (x - 3.0).powi(2)).exp();
    let s0 = grid(0.0, 6.0, 9, |xs| xs.iter().map(|&x| f(x)).collect());
    let s1 = grid(1.0, 7.0, 9, |xs| xs.iter().map(|&x| f(x - 1.0)).collect());
    let p0 = project(&s0, &b, 0, PROJECTION_DEPTH).unwrap().coefficients.scaling;
    let p1 = project(&s1, &b, 0, PROJECTION_DEPTH).unwrap().coefficients.scaling;
    let shifted: Coeffs = p0.iter().map(|(l, v)| (l + 1, v.clone())).collect();
    assert!(max_difference(&shifted, &p1) < 1e-10);
}

#[test]
fn projection_scales_with_dilation() {
    let b = basis();
    let f = |x: f64| (x * x).cos() / (1.0 + x);
    // f(2 .) on [0, 4] at spacing 2^-10 against f on [0, 8] at 2^-9.
    let fine = grid(0.0, 4.0, 10, |xs| xs.iter().map(|&x| f(2.0 * x)).collect());
    let coarse = grid(0.0, 8.0, 9, |xs| xs.iter().map(|&x| f(x)).collect());
    for k in [-1, 0] {
        let a = project(&fine, &b, k, PROJECTION_DEPTH).unwrap().coefficients.scaling;
        let c = project(&coarse, &b, k + 1, PROJECTION_DEPTH).unwrap().coefficients.scaling;
        let scaled: Coeffs = c.iter().map(|(l, v)| (*l, v.iter().map(|x| x / 2f64.sqrt()).collect())).collect();
        assert!(max_difference(&a, &scaled) < 1e-10, "k = {k}");
    }
}

#[test]
fn constant_has_shift_invariant_interior_coefficients() {
    let b = basis();
    let s = grid(0.0, 10.0, 8, |xs| vec![1.0; xs.len()]);
    let p = project(&s, &b, 0, PROJECTION_DEPTH).unwrap().coefficients.scaling;
    for l in 4..6 {
        for (i, (a, b)) in p[&l].iter().zip(&p[&3]).enumerate() {
            assert!((a - b).abs() < 1e-8, "l={l} i={i}");
        }
    }
}

#[test]
fn published_point_bank_maps_zero_to_zero() {
    let b = basis();
    let sol = chfif::wavelet::solve_wavelets(&b, &Default::default()).unwrap().solution;
    let fb = FilterBank::from_basis(&b, Some(&sol)).unwrap();
    assert_eq!(fb.r, 3);
    assert_eq!(fb.wavelet_count(), 3);
    let z = SignalCoefficients::new(0, BTreeMap::new());
    let d = fb.decompose(&z).unwrap();
    assert_eq!(d.energy(), 0.0);
    assert_eq!(fb.reconstruct(&d).unwrap().energy(), 0.0);
}
