mod common;

use approx::assert_relative_eq;
use nalgebra::Matrix3;
use proptest::prelude::*;

use common::*;
use ldg_core::constitutive::ConstitutiveParams;
use ldg_core::tensor::{SymTensor2, Tensor2};

fn params(p: f64, delta: f64) -> ConstitutiveParams {
    ConstitutiveParams::new(p, delta).unwrap()
}

#[test]
fn rejects_bad_parameters() {
    assert!(ConstitutiveParams::new(1.0, 0.0).is_err());
    assert!(ConstitutiveParams::new(f64::NAN, 0.0).is_err());
    assert!(ConstitutiveParams::new(3.0, -1e-3).is_err());
    let c = params(3.0, 0.0);
    assert_relative_eq!(c.p_conj(), 1.5);
    assert!(c.phi(-1.0).is_err());
    assert!(c.phi_shifted(-0.1, 1.0).is_err());
}

#[test]
fn phi_small_cases() {
    assert_relative_eq!(params(3.0, 0.0).phi(1.0).unwrap(), 1.0 / 3.0, max_relative = 1e-15);
    for p in [1.5, 2.0, 2.25, 3.5] {
        for d in [0.0, 1e-4, 1.0] {
            assert_eq!(params(p, d).phi(0.0).unwrap(), 0.0);
            assert_eq!(params(p, d).phi_shifted(0.4, 0.0).unwrap(), 0.0);
        }
    }
}

#[test]
fn phi_matches_quadrature() {
    let c = params(2.5, 1e-4);
    let oracle = graded_integral(|s| (1e-4 + s).powf(0.5) * s, 2.0);
    assert_relative_eq!(c.phi(2.0).unwrap(), oracle, max_relative = 1e-12);
    let c = params(3.0, 1e-4);
    let oracle = graded_integral(|s| (1e-4 + 0.7 + s) * s, 1.3);
    assert_relative_eq!(c.phi_shifted(0.7, 1.3).unwrap(), oracle, max_relative = 1e-12);
    assert!(phi_quadrature_error() <= 1e-12);
}

#[test]
fn zero_shift_is_bitwise_phi() {
    for &(p, d, _, t) in &PHI_CASES {
        let c = params(p, d);
        assert_eq!(c.phi_shifted(0.0, t).unwrap().to_bits(), c.phi(t).unwrap().to_bits());
    }
}

#[test]
fn phi_is_midpoint_convex() {
    let grid: Vec<f64> = (0..40).map(|i| 1e-4 * 1.35f64.powi(i)).chain([0.0]).collect();
    for p in [1.5, 2.25, 3.0, 3.5] {
        let c = params(p, 1e-4);
        for &s in &grid {
            for &t in &grid {
                let mid = c.phi(0.5 * (s + t)).unwrap();
                let avg = 0.5 * (c.phi(s).unwrap() + c.phi(t).unwrap());
                assert!(mid <= avg * (1.0 + 1e-12) + 1e-300, "p {p}, s {s}, t {t}");
            }
        }
    }
}

#[test]
fn stress_examples() {
    let c = params(3.0, 1e-4);
    assert_eq!(c.stress(&Tensor2::ZERO), SymTensor2::ZERO);
    let s = c.stress(&Tensor2::new(1.0, 0.0, 0.0, 0.0));
    assert_relative_eq!(s.a11, 1.0001, max_relative = 1e-14);
    assert_eq!((s.a12, s.a22), (0.0, 0.0));

    // derivative of the potential Φ(A) = φ(|A^sym|)
    let a = Tensor2::new(1.0, 0.0, 0.0, 0.0);
    let pot = |t: &Tensor2| c.phi(t.sym().norm()).unwrap();
    let h = 1e-6;
    let d11 = (pot(&(a + Tensor2::new(h, 0.0, 0.0, 0.0))) - pot(&(a - Tensor2::new(h, 0.0, 0.0, 0.0)))) / (2.0 * h);
    assert_relative_eq!(d11, s.a11, max_relative = 1e-8);
}

#[test]
fn shifted_stress_example() {
    let c = params(2.5, 1e-4);
    let a = Tensor2::new(0.0, 1.0, 0.0, 0.0);
    let s = c.stress_shifted(0.3, &a);
    let n = 0.5f64.sqrt();
    let expect = (1e-4 + 0.3 + n).powf(0.5) * 0.5;
    assert_relative_eq!(s.a12, expect, max_relative = 1e-14);
    assert_eq!((s.a11, s.a22), (0.0, 0.0));
    let quotient = c.phi_shifted_prime(0.3, n) / n * 0.5;
    assert_relative_eq!(s.a12, quotient, max_relative = 1e-14);
    assert_eq!(c.stress_shifted(0.3, &Tensor2::ZERO), SymTensor2::ZERO);
    assert_eq!(c.stress_shifted(0.0, &a), c.stress(&a));
    assert_eq!(c.stress_shifted(0.3, &a), params(2.5, 1e-4 + 0.3).stress(&a));
}

#[test]
fn natural_distance_maps() {
    let c = params(3.0, 0.0);
    let f = c.f_map(&Tensor2::IDENTITY);
    assert_relative_eq!(f.a11, 2f64.powf(0.25), max_relative = 1e-15);
    assert_relative_eq!(f.a22, 1.189207115002721, max_relative = 1e-14);
    assert_eq!(f.a12, 0.0);
    assert_eq!(c.f_map(&Tensor2::ZERO), SymTensor2::ZERO);
    assert_eq!(c.fstar_map(&Tensor2::ZERO), SymTensor2::ZERO);
    let lin = params(2.0, 1e-4);
    let a = Tensor2::new(0.3, -1.2, 0.4, 2.0);
    assert_eq!(lin.f_map(&a), a.sym());
    assert_eq!(lin.fstar_map(&a), a.sym());
}

#[test]
fn derivative_at_origin() {
    let c = params(3.0, 1e-4);
    let b = Tensor2::new(0.2, 0.7, -0.1, 1.1);
    let out = c.stress_derivative(&Tensor2::ZERO).apply(&b);
    let expect = b.sym().scale(1e-4);
    assert_relative_eq!((out - expect).norm(), 0.0, epsilon = 1e-20);
}

#[test]
fn derivative_matches_central_differences() {
    for p in [1.5, 2.25, 3.0, 3.5] {
        for d in [0.0, 1e-4, 1.0] {
            let err = stress_derivative_fd_error(p, d, 2000, 11);
            assert!(err <= 1e-6, "p {p}, delta {d}: {err:e}");
        }
    }
}

#[test]
fn derivative_converges_with_step() {
    let c = params(3.0, 1e-4);
    let a = Tensor2::new(0.4, -0.3, 0.9, 0.2);
    let b = Tensor2::new(-0.5, 0.1, 0.6, 0.8);
    let exact = c.stress_derivative(&a).apply(&b);
    let err = |h: f64| ((c.stress(&(a + b.scale(h))) - c.stress(&a)).scale(1.0 / h) - exact).norm();
    let (e4, e5) = (err(1e-4), err(1e-5));
    assert!(e5 < 0.2 * e4, "one-sided errors {e4:e} {e5:e}");
}

#[test]
fn voigt_is_positive_semidefinite() {
    let c = params(3.0, 1e-4);
    let mut r = rng(5);
    for _ in 0..1000 {
        let a = random_tensor(&mut r, -3.0, 2.0);
        let v = c.stress_derivative(&a).voigt();
        let m = Matrix3::from_fn(|i, j| v[i][j]);
        assert_relative_eq!((m - m.transpose()).norm(), 0.0, epsilon = 1e-12 * m.norm());
        let eig = m.symmetric_eigen().eigenvalues;
        assert!(eig.min() >= -1e-12 * m.norm(), "{eig}");
    }
}

#[test]
fn monotonicity_ratios_are_bounded() {
    let (lo, hi) = RATIO_BOUNDS;
    assert!(hi / lo <= 100.0);
    for p in RATIO_GRID_P {
        for d in RATIO_GRID_DELTA {
            let st = constitutive_ratios(p, d, 10_000, 17);
            assert!(st.min_monotonicity >= 0.0, "p {p}, delta {d}");
            assert!(
                lo <= st.ratio_min && st.ratio_max <= hi,
                "p {p}, delta {d}: [{}, {}]",
                st.ratio_min,
                st.ratio_max
            );
            assert!(
                lo <= st.star_min && st.star_max <= hi,
                "p {p}, delta {d}: [{}, {}]",
                st.star_min,
                st.star_max
            );
        }
    }
}

proptest! {
    #[test]
    fn maps_depend_only_on_symmetric_part(
        c in prop::array::uniform4(-10.0f64..10.0),
        p in 1.2f64..4.0,
        d in 0.0f64..1.0,
    ) {
        let k = params(p, d);
        let a = Tensor2::from_components(c);
        let s = a.sym().to_tensor();
        prop_assert_eq!(k.stress(&a), k.stress(&s));
        prop_assert_eq!(k.f_map(&a), k.f_map(&s));
        prop_assert_eq!(k.fstar_map(&a), k.fstar_map(&s));
    }

    #[test]
    fn stress_is_monotone(
        a in prop::array::uniform4(-5.0f64..5.0),
        b in prop::array::uniform4(-5.0f64..5.0),
        p in 1.2f64..4.0,
        d in 0.0f64..1.0,
    ) {
        let k = params(p, d);
        let (a, b) = (Tensor2::from_components(a), Tensor2::from_components(b));
        let prod = (k.stress(&a) - k.stress(&b)).ddot(&(a - b).sym());
        prop_assert!(prod >= -1e-12);
    }

    #[test]
    fn phi_shift_is_offset_in_delta(
        p in 1.2f64..4.0,
        d in 0.0f64..1.0,
        a in 0.0f64..2.0,
        t in 0.0f64..5.0,
    ) {
        let lhs = params(p, d).phi_shifted(a, t).unwrap();
        let rhs = params(p, d + a).phi(t).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1e-300));
    }
}
