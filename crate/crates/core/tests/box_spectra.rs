mod common;

use common::FdBc;
use spectral_shift::boundary::BoundaryCondition;
use spectral_shift::boxspec::{free_spectrum, microcanonical, perturbed_spectrum};
use spectral_shift::potentials::Potential;
use std::f64::consts::PI;

fn potentials() -> Vec<Potential> {
    vec![
        Potential::square_well(-2.0, -1.0, 1.0).unwrap(),
        Potential::gaussian(1.5, 0.3, 0.7).unwrap(),
        Potential::poschl_teller(-2.0, 0.0, 1.0).unwrap(),
    ]
}

fn conditions() -> Vec<(BoundaryCondition, FdBc)> {
    vec![
        (BoundaryCondition::dirichlet(), FdBc::Dirichlet),
        (BoundaryCondition::periodic(), FdBc::Periodic),
        (BoundaryCondition::robin(0.7, -0.4), FdBc::Robin { right: 0.7, left: -0.4 }),
        (BoundaryCondition::neumann(), FdBc::Robin { right: PI / 2.0, left: PI / 2.0 }),
    ]
}

#[test]
fn free_dirichlet_and_periodic_levels_are_exact() {
    let l = 3.0;
    let d = free_spectrum(&BoundaryCondition::dirichlet(), l, 40.0).unwrap();
    let exact: Vec<f64> = (1..).map(|n| (n as f64 * PI / (2.0 * l)).powi(2)).take_while(|&e| e <= 40.0).collect();
    assert_eq!(d.eigenvalues().len(), exact.len());
    for (a, b) in d.eigenvalues().iter().zip(&exact) {
        assert!((a - b).abs() < 1e-9 * b, "{a} vs {b}");
    }

    let p = free_spectrum(&BoundaryCondition::periodic(), l, 40.0).unwrap();
    assert_eq!(p.levels[0].value.abs() < 1e-12, true);
    assert_eq!(p.levels[0].multiplicity, 1);
    for (n, lv) in p.levels.iter().enumerate().skip(1) {
        let e = (n as f64 * PI / l).powi(2);
        assert!((lv.value - e).abs() < 1e-9 * e);
        assert_eq!(lv.multiplicity, 2);
    }
}

#[test]
fn free_neumann_includes_the_constant() {
    let n = free_spectrum(&BoundaryCondition::neumann(), 2.0, 20.0).unwrap();
    let ev = n.eigenvalues();
    assert!(ev[0].abs() < 1e-12);
    assert!((ev[1] - (PI / 4.0).powi(2)).abs() < 1e-9);
}

#[test]
fn spectra_match_finite_differences() {
    let l = 5.0;
    for p in potentials() {
        for (bc, fd) in conditions() {
            let ours = perturbed_spectrum(&p, &bc, l, 6.0).unwrap().eigenvalues();
            let oracle = common::fd_extrapolated(&p, fd, l, 400, ours.len());
            for (j, (a, b)) in ours.iter().zip(&oracle).enumerate() {
                assert!((a - b).abs() < 1e-5 * (1.0 + b.abs()), "{} {} level {j}: {a} vs {b}", p.kind_name(), bc.name());
            }
        }
    }
}

#[test]
fn weyl_counting_holds_within_two() {
    for l in [10.0, 17.5] {
        for (bc, _) in conditions() {
            let s = free_spectrum(&bc, l, 30.0).unwrap();
            for lam in [0.5, 5.0, 12.0, 29.0] {
                let weyl = 2.0 * l * f64::sqrt(lam) / PI;
                let n = s.count_at_most(lam) as f64;
                assert!((n - weyl).abs() <= 2.0, "{} L={l}: N({lam}) = {n}, weyl {weyl}", bc.name());
            }
        }
    }
}

#[test]
fn every_level_respects_the_lower_bound() {
    for l in [2.0, 6.0] {
        for (bc, _) in conditions() {
            let c = bc.form_constant();
            let floor = |j: usize| -c * (1.0 / l + 4.0 * (c + 1.0)) + (PI * j as f64 / (2.0 * l)).powi(2) / (c + 1.0);
            let free = free_spectrum(&bc, l, 20.0).unwrap().eigenvalues();
            for (j, lam) in free.iter().enumerate() {
                assert!(*lam >= floor(j) - 1e-9, "{} j={j}: {lam} < {}", bc.name(), floor(j));
            }
            for p in potentials() {
                let pert = perturbed_spectrum(&p, &bc, l, 20.0).unwrap().eigenvalues();
                for (j, mu) in pert.iter().enumerate() {
                    assert!(*mu >= floor(j) + p.min_value() - 1e-9);
                }
            }
        }
    }
}

#[test]
fn repulsive_potential_raises_every_level() {
    let p = Potential::gaussian(1.5, 0.3, 0.7).unwrap();
    for (bc, _) in conditions() {
        let free = free_spectrum(&bc, 7.0, 25.0).unwrap().eigenvalues();
        let pert = perturbed_spectrum(&p, &bc, 7.0, 25.0).unwrap().eigenvalues();
        for (mu, lam) in pert.iter().zip(&free) {
            assert!(mu >= &(lam - 1e-9), "{}: {mu} < {lam}", bc.name());
        }
    }
}

#[test]
fn microcanonical_energy_splits_as_stated() {
    let p = Potential::square_well(-2.0, -1.0, 1.0).unwrap();
    for (bc, _) in conditions().into_iter().filter(|(b, _)| b.name() != "periodic") {
        for n in [5, 12] {
            let m = microcanonical(&p, &bc, 8.0, n).unwrap();
            assert!(m.relation_defect() < 1e-10, "{} N={n}: {}", bc.name(), m.relation_defect());
        }
    }
}
