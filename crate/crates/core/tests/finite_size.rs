use nalgebra::DMatrix;
use num_complex::Complex64;
use spectral_shift::boundary::BoundaryCondition;
use spectral_shift::boxspec::{compensated_energy, free_spectrum, perturbed_spectrum};
use spectral_shift::fse::{
    arccosh_closed_form, fse_closed, fse_integral, gebert_coefficient, halfline_fse, halfline_length, halfline_spectra, richardson, FsePhase,
    HalfLineBC, HalfLineShift,
};
use spectral_shift::linalg::Mat2;
use spectral_shift::potentials::{Potential, WeightFunction};
use spectral_shift::ssf::fumi;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn well() -> Potential {
    Potential::square_well(-2.0, -1.0, 1.0).unwrap()
}

fn skew_condition() -> BoundaryCondition {
    let phase = c(0.3f64.cos(), 0.3f64.sin());
    let u0 = Mat2::new(c(0.6, 0.0), -phase.conj() * 0.8, phase * 0.8, c(0.6, 0.0));
    BoundaryCondition::from_cayley(u0).unwrap()
}

#[test]
fn closed_and_integral_forms_agree_on_a_sweep() {
    let f = WeightFunction::identity();
    let skewed = Potential::square_well(-1.5, -0.4, 1.1).unwrap();
    let bump = Potential::gaussian(1.5, 0.3, 0.7).unwrap();
    let cases: Vec<(&Potential, BoundaryCondition, f64, f64)> = vec![
        (&skewed, BoundaryCondition::dirichlet(), 0.0, 2.0),
        (&skewed, BoundaryCondition::neumann(), 0.4 * PI, 2.0),
        (&skewed, BoundaryCondition::periodic(), 0.9 * PI, 1.3),
        (&skewed, BoundaryCondition::robin(0.7, -0.4), 1.2 * PI, 2.0),
        (&skewed, skew_condition(), -0.6 * PI, 3.1),
        (&bump, BoundaryCondition::dirichlet(), 0.25 * PI, 2.0),
        (&bump, BoundaryCondition::periodic(), 0.0, 0.7),
        (&bump, skew_condition(), 0.5 * PI, 2.0),
        (&bump, BoundaryCondition::robin(1.1, 0.2), -0.3 * PI, 4.0),
        (&bump, BoundaryCondition::neumann(), 1.7 * PI, 1.5),
    ];
    for (p, bc, phi, nu) in &cases {
        let a = fse_closed(p, bc, *nu, *phi, &f).unwrap();
        let b = fse_integral(p, bc, *nu, *phi, &f).unwrap();
        assert!((a - b).abs() < 1e-6, "{} {} φ={phi} ν={nu}: {a} vs {b}", p.kind_name(), bc.name());
    }
}

#[test]
fn closed_form_is_two_pi_periodic_in_the_phase() {
    let f = WeightFunction::identity();
    for bc in [BoundaryCondition::dirichlet(), skew_condition()] {
        for phi in [0.0, 0.3, 2.0] {
            let a = fse_closed(&well(), &bc, 2.0, phi, &f).unwrap();
            let b = fse_closed(&well(), &bc, 2.0, phi + 2.0 * PI, &f).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn free_operator_has_no_finite_size_energy() {
    let f = WeightFunction::identity();
    let zero = Potential::zero();
    for bc in [BoundaryCondition::dirichlet(), BoundaryCondition::periodic()] {
        assert_eq!(fse_closed(&zero, &bc, 2.0, 0.4, &f).unwrap(), 0.0);
        assert_eq!(fse_integral(&zero, &bc, 2.0, 0.4, &f).unwrap(), 0.0);
    }
    assert_eq!(halfline_fse(&zero, &HalfLineBC::dirichlet(), 2.0, 0.3, &f).unwrap(), 0.0);
    let h1 = DMatrix::from_diagonal_element(2, 2, c(1.5, 0.0));
    assert_eq!(arccosh_closed_form(&h1, &DMatrix::zeros(2, 2)).unwrap(), 0.0);
}

#[test]
fn halfline_energy_follows_the_quadratic_family() {
    let p = Potential::square_well(-2.0, 0.0, 1.0).unwrap();
    let hbc = HalfLineBC::dirichlet();
    let f = WeightFunction::identity();
    let nu: f64 = 2.0;
    let xi = HalfLineShift::new(&p, &hbc).unwrap().xi(nu).unwrap();
    for eta in [0.0, 0.25, 0.5, 0.75] {
        let direct = halfline_fse(&p, &hbc, nu, eta, &f).unwrap();
        let family = PI * nu.sqrt() * gebert_coefficient(xi, eta, 0.0);
        assert!((direct - family).abs() < 1e-8, "η={eta}: {direct} vs {family}");
    }
}

#[test]
fn halfline_energy_matches_the_box() {
    let p = Potential::square_well(-2.0, 0.0, 1.0).unwrap();
    let hbc = HalfLineBC::dirichlet();
    let f = WeightFunction::identity();
    let (nu, eta): (f64, f64) = (2.0, 0.3);
    let fumi_hl = HalfLineShift::new(&p, &hbc).unwrap().fumi(nu, &f).unwrap();
    let samples: Vec<(f64, f64)> = [30u32, 60]
        .iter()
        .map(|&n| {
            let l = halfline_length(nu, eta, n);
            let (free, pert) = halfline_spectra(&p, &hbc, l, nu + 1e-6).unwrap();
            (l, l * (compensated_energy(&free, &pert, nu, &f) - fumi_hl))
        })
        .collect();
    let limit = richardson(&samples).unwrap();
    let expected = halfline_fse(&p, &hbc, nu, eta, &f).unwrap();
    assert!((limit - expected).abs() < 0.02 * expected.abs(), "{limit} vs {expected}");
}

#[test]
fn whole_line_energy_matches_the_box() {
    let p = well();
    let bc = BoundaryCondition::dirichlet();
    let f = WeightFunction::identity();
    let nu: f64 = 2.0;
    let fumi_v = fumi(&p, nu, &f).unwrap();
    let phase = FsePhase::new(0.5).unwrap();
    let samples: Vec<(f64, f64)> = [20u32, 40]
        .iter()
        .map(|&n| {
            let l = phase.length(nu, n);
            let free = free_spectrum(&bc, l, nu + 1e-6).unwrap();
            let pert = perturbed_spectrum(&p, &bc, l, nu + 1e-6).unwrap();
            (l, l * (compensated_energy(&free, &pert, nu, &f) - fumi_v))
        })
        .collect();
    let limit = richardson(&samples).unwrap();
    let expected = fse_closed(&p, &bc, nu, phase.phi(), &f).unwrap();
    assert!((limit - expected).abs() < 0.02 * expected.abs(), "{limit} vs {expected}");
}
