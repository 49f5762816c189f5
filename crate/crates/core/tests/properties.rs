use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use spectral_shift::boundary::BoundaryCondition;
use spectral_shift::boxspec::{free_segment, star};
use spectral_shift::fse::{arccosh_closed_form, arccosh_quadrature, fse_closed, gebert_coefficient, halfline_arccos_difference};
use spectral_shift::jost::{scattering, JostOptions};
use spectral_shift::linalg::{unitarity_defect, Mat2};
use spectral_shift::potentials::{Potential, WeightFunction};
use spectral_shift::ssf::SpectralShift;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn square(entries: &[f64], n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |i, j| c(entries[2 * (i * n + j)], entries[2 * (i * n + j) + 1]))
}

/// H1 ≻ 0.2 I and H1 + H2 ≻ 0.2 I.
fn admissible(a: &[f64], b: &[f64], n: usize) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let a = square(a, n);
    let b = square(b, n);
    let floor = DMatrix::from_diagonal_element(n, n, c(0.2, 0.0));
    let h1 = &floor + &a * a.adjoint();
    let h2 = &floor + &b * b.adjoint() - &h1;
    (h1, h2)
}

/// exp(iH) for H = [[p, q+ir], [q−ir, s]].
fn unitary(p: f64, q: f64, r: f64, s: f64) -> Mat2 {
    let h = Mat2::new(c(p, 0.0), c(q, r), c(q, -r), c(s, 0.0));
    let eig = h.symmetric_eigen();
    let phases = Mat2::from_diagonal(&eig.eigenvalues.map(|x| c(x.cos(), x.sin())));
    eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn scattering_matrix_is_unitary(depth in -4.0f64..4.0, left in -2.0f64..0.0, width in 0.2f64..2.5, k in 0.05f64..12.0) {
        prop_assume!(depth.abs() > 1e-3);
        let p = Potential::square_well(depth, left, left + width).unwrap();
        let d = scattering(&p, c(k, 0.0), &JostOptions::default()).unwrap();
        prop_assert!(unitarity_defect(&d.s_matrix()) < 1e-8);
    }

    #[test]
    fn arccosh_identity_holds(a in prop::collection::vec(-1.0f64..1.0, 8), b in prop::collection::vec(-1.0f64..1.0, 8)) {
        let (h1, h2) = admissible(&a, &b, 2);
        let closed = arccosh_closed_form(&h1, &h2).unwrap();
        let quad = arccosh_quadrature(&h1, &h2).unwrap();
        prop_assert!((closed - quad).abs() < 1e-8, "{} vs {}", closed, quad);
    }

    #[test]
    fn arccosh_identity_in_three_dimensions(a in prop::collection::vec(-1.0f64..1.0, 18), b in prop::collection::vec(-1.0f64..1.0, 18)) {
        let (h1, h2) = admissible(&a, &b, 3);
        let closed = arccosh_closed_form(&h1, &h2).unwrap();
        let quad = arccosh_quadrature(&h1, &h2).unwrap();
        prop_assert!((closed - quad).abs() < 1e-8);
    }

    #[test]
    fn boundary_scattering_matrix_is_unitary(p in -3.0f64..3.0, q in -3.0f64..3.0, r in -3.0f64..3.0, s in -3.0f64..3.0, k in 0.01f64..20.0) {
        let bc = BoundaryCondition::from_cayley(unitary(p, q, r, s)).unwrap();
        let u = bc.u_matrix_k(c(k, 0.0)).unwrap();
        prop_assert!(unitarity_defect(&u) < 1e-10);
        prop_assert!(BoundaryCondition::new(bc.a, bc.b).is_ok());
    }

    #[test]
    fn free_segments_compose(lambda in -60.0f64..60.0, d1 in 0.01f64..20.0, d2 in 0.01f64..20.0, scale in 0.05f64..2.0) {
        let joined = star(&free_segment(lambda, d1, scale), &free_segment(lambda, d2, scale));
        let whole = free_segment(lambda, d1 + d2, scale);
        prop_assert!((joined - whole).norm() < 1e-10);
        prop_assert!(unitarity_defect(&whole) < 1e-10);
    }

    #[test]
    fn scalar_phases_give_the_quadratic_family(eta in 0.0f64..0.5, frac in 0.0f64..1.0, t in 0.0f64..1.0) {
        let theta = frac * eta;
        let u = 0.5 - eta + theta;
        let xi = -u - 0.5 + t;
        let w = Complex64::from_polar(1.0, 2.0 * PI * (0.5 - eta + theta));
        let s = Complex64::from_polar(1.0, -2.0 * PI * xi);
        let lhs = halfline_arccos_difference(w, s).unwrap();
        let rhs = 4.0 * PI * PI * gebert_coefficient(xi, eta, theta);
        prop_assert!((lhs - rhs).abs() < 1e-9, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn closed_form_ignores_full_turns(phi in -PI..PI, turns in -3i32..3) {
        let p = Potential::square_well(-2.0, -1.0, 1.0).unwrap();
        let bc = BoundaryCondition::periodic();
        let f = WeightFunction::identity();
        let a = fse_closed(&p, &bc, 2.0, phi, &f).unwrap();
        let b = fse_closed(&p, &bc, 2.0, phi + 2.0 * PI * turns as f64, &f).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn birman_krein_holds(depth in -3.0f64..3.0, width in 0.3f64..2.0, lambda in 0.05f64..30.0) {
        prop_assume!(depth.abs() > 0.05);
        let p = Potential::square_well(depth, -0.5 * width, 0.5 * width).unwrap();
        let s = SpectralShift::new(&p).unwrap();
        prop_assert!(s.birman_krein_defect(lambda).unwrap() < 1e-8);
    }
}
