//! Finite-size energy: the 1/L coefficient of E_L + f(ν)ξ_L − Fumi.
//!
//! Whole line: closed arccos² form and the s-integral form, built from
//! H₊ = Re(e^{iφ}σ_xU*S) and H₀ = Re(e^{iφ}σ_xU*) at k = √ν. Half line:
//! the scalar analogue with W(ν), plus the half-line spectral shift and box.

use nalgebra::DMatrix;

use crate::boundary::BoundaryCondition;
use crate::boxspec::{free_spectrum, perturbed_spectrum, BoxSpectrum};
use crate::error::{Error, Result};
use crate::jost::{scattering, solve_jost, JostOptions, Side};
use crate::linalg::{hermitian_eigenvalues, re_part, real, sigma_x, Mat2, C64, I};
use crate::potentials::{Potential, WeightFunction};
use crate::quad;
use crate::ssf::{anchor_wavenumber, interpolate, walk_phase};

use std::f64::consts::PI;

const CLAMP: f64 = 1e-10;
const CLAMP_LIMIT: f64 = 1e-8;

/// Limit phase of e^{2iL√ν} along an η-fixed length sequence; φ = πη.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsePhase {
    pub eta: f64,
}

impl FsePhase {
    pub fn new(eta: f64) -> Result<Self> {
        if !(-1.0..1.0).contains(&eta) {
            return Err(Error::InvalidArgument(format!("η must lie in [−1, 1), got {eta}")));
        }
        Ok(FsePhase { eta })
    }

    pub fn phi(&self) -> f64 {
        PI * self.eta
    }

    /// L_n = (φ/2 + πn)/√ν
    pub fn length(&self, nu: f64, n: u32) -> f64 {
        (0.5 * self.phi() + PI * n as f64) / nu.sqrt()
    }

    pub fn lengths(&self, nu: f64, ns: impl IntoIterator<Item = u32>) -> Vec<f64> {
        ns.into_iter().map(|n| self.length(nu, n)).collect()
    }
}

fn clamp_unit(x: f64) -> Result<f64> {
    if x.abs() > 1.0 + CLAMP_LIMIT {
        return Err(Error::EigenvalueOutOfRange(x));
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// tr arccos²(H) for a 2×2 Hermitian H with spectrum in [−1, 1].
pub fn arccos_sq_trace(h: &Mat2) -> Result<f64> {
    let mut sum = 0.0;
    for x in hermitian_eigenvalues(h) {
        let x = if (x.abs() - 1.0).abs() <= CLAMP { x.signum() } else { clamp_unit(x)? };
        sum += x.acos().powi(2);
    }
    Ok(sum)
}

/// (H₊, H₀) at k = √ν.
pub fn fse_matrices(p: &Potential, bc: &BoundaryCondition, nu: f64, phi: f64) -> Result<(Mat2, Mat2)> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("Fermi energy must be positive, got {nu}")));
    }
    let k = real(nu.sqrt());
    let s = scattering(p, k, &JostOptions::default())?.s_matrix();
    let u = bc.u_matrix_k(k)?;
    let base = sigma_x() * u.adjoint() * C64::from_polar(1.0, phi);
    Ok((re_part(&(base * s)), re_part(&base)))
}

/// tr[arccos²H₊ − arccos²H₀]
pub fn arccos_difference(h_plus: &Mat2, h_zero: &Mat2) -> Result<f64> {
    if h_plus == h_zero {
        return Ok(0.0);
    }
    Ok(arccos_sq_trace(h_plus)? - arccos_sq_trace(h_zero)?)
}

/// det(cosh s + H) written as q² + q tr(I+H) + det(I+H) with q = cosh s − 1.
fn shifted_det(h: &Mat2, q: f64) -> f64 {
    let g = Mat2::identity() + h;
    q * q + q * g.trace().re + g.determinant().re
}

/// Truncation of the s- and t-integrals: the integrands decay like
/// 4‖H‖e^{−s}, cut where that falls below 1e−14.
fn truncation(norm: f64) -> f64 {
    (4.0 * norm * 1e14).ln().max(20.0)
}

/// ∫₀^∞ ln[det(cosh s + H₊)/det(cosh s + H₀)] ds
pub fn log_det_integral(h_plus: &Mat2, h_zero: &Mat2) -> Result<f64> {
    let ht = h_plus - h_zero;
    let norm = ht.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let t = truncation(norm);
    let mut bad = false;
    let mut g = |s: f64| {
        let q = 2.0 * (0.5 * s).sinh().powi(2);
        let r = shifted_det(h_plus, q) / shifted_det(h_zero, q);
        if !(r > 0.0) || !r.is_finite() {
            bad = true;
            return 0.0;
        }
        r.ln()
    };
    // the first panel may carry a logarithmic singularity at s = 0
    let mut points = quad::graded_toward_start(0.0, 1.0, 0.25, 14);
    points.extend([2.0, 4.0, 8.0, 16.0].into_iter().filter(|&x| x < t));
    points.push(t);
    let head = quad::gl(points[0], points[1], 32, &mut g);
    let value = head + quad::adaptive_panels(&points[1..], 1e-13, &mut g)?;
    if bad {
        return Err(Error::SingularShift);
    }
    Ok(value)
}

/// (√ν/4π) f′(ν) tr[arccos²H₊ − arccos²H₀]
pub fn fse_closed(p: &Potential, bc: &BoundaryCondition, nu: f64, phi: f64, f: &WeightFunction) -> Result<f64> {
    if p.is_zero() {
        return Ok(0.0);
    }
    let (hp, h0) = fse_matrices(p, bc, nu, phi)?;
    Ok(nu.sqrt() / (4.0 * PI) * f.derivative_real(nu) * arccos_difference(&hp, &h0)?)
}

/// −(√ν/2π) f′(ν) ∫₀^∞ ln det[I + (cosh s + H₀)⁻¹H_T] ds
pub fn fse_integral(p: &Potential, bc: &BoundaryCondition, nu: f64, phi: f64, f: &WeightFunction) -> Result<f64> {
    if p.is_zero() {
        return Ok(0.0);
    }
    let (hp, h0) = fse_matrices(p, bc, nu, phi)?;
    Ok(-nu.sqrt() / (2.0 * PI) * f.derivative_real(nu) * log_det_integral(&hp, &h0)?)
}

fn hermitian_spectrum(h: &DMatrix<C64>) -> Vec<f64> {
    h.clone().symmetric_eigen().eigenvalues.iter().copied().collect()
}

fn check_square(h1: &DMatrix<C64>, h2: &DMatrix<C64>) -> Result<()> {
    if !h1.is_square() || h1.shape() != h2.shape() {
        return Err(Error::InvalidArgument("H1 and H2 must be square of equal size".into()));
    }
    for h in [h1, h2] {
        if (h - h.adjoint()).norm() > 1e-12 * (1.0 + h.norm()) {
            return Err(Error::InvalidArgument("matrices must be Hermitian".into()));
        }
    }
    Ok(())
}

fn check_positive(h1: &DMatrix<C64>, h2: &DMatrix<C64>) -> Result<()> {
    for h in [h1.clone(), h1 + h2] {
        let min = hermitian_spectrum(&h).into_iter().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite(min));
        }
    }
    Ok(())
}

/// arcosh²(x), continued to −1 ≤ x < 1 as −arccos²(x).
fn arcosh_sq(x: f64) -> f64 {
    if x >= 1.0 {
        x.acosh().powi(2)
    } else {
        -x.max(-1.0).acos().powi(2)
    }
}

/// ½ tr[arcosh²(H1 + H2 − I) − arcosh²(H1 − I)] for H1 > 0, H1 + H2 > 0.
pub fn arccosh_closed_form(h1: &DMatrix<C64>, h2: &DMatrix<C64>) -> Result<f64> {
    check_square(h1, h2)?;
    check_positive(h1, h2)?;
    let tr = |h: DMatrix<C64>| -> f64 { hermitian_spectrum(&h).into_iter().map(|x| arcosh_sq(x - 1.0)).sum() };
    Ok(0.5 * (tr(h1 + h2) - tr(h1.clone())))
}


/// ∫₀^T ln det(I + (f(t) + H1)⁻¹H2) dt with f(t) = cosh t − 1.
pub fn arccosh_quadrature(h1: &DMatrix<C64>, h2: &DMatrix<C64>) -> Result<f64> {
    check_square(h1, h2)?;
    check_positive(h1, h2)?;
    let norm = h2.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let n = h1.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let t = truncation(norm * n as f64);
    let mut g = |t: f64| {
        let shift = id.scale(2.0 * (0.5 * t).sinh().powi(2)) + h1;
        let x = shift.lu().solve(h2).expect("f(t) + H1 is positive definite");
        (&id + x).lu().determinant().norm().ln()
    };
    let mut points = vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
    points.retain(|&x| x < t);
    points.push(t);
    quad::adaptive_panels(&points, 1e-13, &mut g)
}

/// Two-point Richardson limit of y(L) = F + c/L from the last two samples.
pub fn richardson(samples: &[(f64, f64)]) -> Option<f64> {
    let [.., (l1, y1), (l2, y2)] = samples else { return None };
    if l1 == l2 {
        return None;
    }
    Some((l2 * y2 - l1 * y1) / (l2 - l1))
}

/// Origin condition aφ(0) = bφ′(0) and endpoint condition Aφ(L) = −Bφ′(L).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLineBC {
    pub a: C64,
    pub b: C64,
    pub big_a: C64,
    pub big_b: C64,
}

impl HalfLineBC {
    /// Normalizes |a|² + |b|² = 1 and |A|² + |B|² = 1.
    pub fn new(a: C64, b: C64, big_a: C64, big_b: C64) -> Result<Self> {
        let pair = |x: C64, y: C64, what: &str| -> Result<(C64, C64)> {
            let n = (x.norm_sqr() + y.norm_sqr()).sqrt();
            if n == 0.0 {
                return Err(Error::InvalidBoundaryCondition(format!("{what}: both coefficients vanish")));
            }
            let (x, y) = (x / n, y / n);
            if (x * y.conj()).im.abs() > 1e-12 {
                return Err(Error::InvalidBoundaryCondition(format!("{what}: coefficients must satisfy x ȳ = y x̄")));
            }
            Ok((x, y))
        };
        let (a, b) = pair(a, b, "origin")?;
        let (big_a, big_b) = pair(big_a, big_b, "endpoint")?;
        Ok(HalfLineBC { a, b, big_a, big_b })
    }

    pub fn dirichlet() -> Self {
        HalfLineBC { a: real(1.0), b: real(0.0), big_a: real(1.0), big_b: real(0.0) }
    }

    /// Real representatives of (a, b) up to a common phase.
    fn origin_real(&self) -> (f64, f64) {
        let lead = if self.a.norm() >= self.b.norm() { self.a } else { self.b };
        let rot = C64::from_polar(1.0, -lead.arg());
        ((self.a * rot).re, (self.b * rot).re)
    }

    /// The two-port condition of the box [−L/2, L/2] obtained by shifting
    /// [0, L]: right port gets (A, B), left port gets (a, b).
    pub fn box_condition(&self) -> BoundaryCondition {
        let z = real(0.0);
        BoundaryCondition::new(Mat2::new(self.big_a, z, z, self.a), Mat2::new(self.big_b, z, z, self.b))
            .expect("diagonal conditions with x ȳ real are self-adjoint")
    }
}

fn check_half_support(p: &Potential) -> Result<()> {
    let (lo, hi) = p.support();
    if !p.is_zero() && lo < 0.0 {
        return Err(Error::SupportViolation { lo, hi });
    }
    Ok(())
}

/// (ψ(k;0), ψ′(k;0)) for the right Jost solution.
fn jost_at_origin(p: &Potential, k: C64) -> Result<(C64, C64)> {
    if p.is_zero() {
        return Ok((real(1.0), I * k));
    }
    let sol = solve_jost(p, k, Side::Plus, &JostOptions::default())?;
    sol.psi_at(0.0).ok_or_else(|| Error::InvalidArgument("Jost grid misses the origin".into()))
}

/// Half-line scattering coefficient
/// S(k) = (ia + kb)/(ia − kb) · (aψ(−k;0) − bψ′(−k;0))/(aψ(k;0) − bψ′(k;0)).
pub fn halfline_scattering(p: &Potential, hbc: &HalfLineBC, k: f64) -> Result<C64> {
    check_half_support(p)?;
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("k must be positive, got {k}")));
    }
    let (psi, dpsi) = jost_at_origin(p, real(k))?;
    let (a, b) = (hbc.a, hbc.b);
    let num = a * psi.conj() - b * dpsi.conj();
    let den = a * psi - b * dpsi;
    Ok((I * a + k * b) / (I * a - k * b) * num / den)
}

/// W = −e^{−2πiη} (ia + kb)/(ia − kb) · (iA + kB)/(iA − kB)
pub fn halfline_w(hbc: &HalfLineBC, k: f64, eta: f64) -> C64 {
    let origin = (I * hbc.a + k * hbc.b) / (I * hbc.a - k * hbc.b);
    let end = (I * hbc.big_a + k * hbc.big_b) / (I * hbc.big_a - k * hbc.big_b);
    -C64::from_polar(1.0, -2.0 * PI * eta) * origin * end
}

/// arccos²(Re(W̄S)) − arccos²(Re W) for unimodular scalars.
pub fn halfline_arccos_difference(w: C64, s: C64) -> Result<f64> {
    Ok(clamp_unit((w.conj() * s).re)?.acos().powi(2) - clamp_unit(w.re)?.acos().powi(2))
}

/// (√ν/4π) f′(ν) [arccos²(Re(W̄S)) − arccos²(Re W)]
pub fn halfline_fse(p: &Potential, hbc: &HalfLineBC, nu: f64, eta: f64, f: &WeightFunction) -> Result<f64> {
    check_half_support(p)?;
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("Fermi energy must be positive, got {nu}")));
    }
    if p.is_zero() {
        return Ok(0.0);
    }
    let k = nu.sqrt();
    let s = halfline_scattering(p, hbc, k)?;
    let w = halfline_w(hbc, k, eta);
    Ok(k / (4.0 * PI) * f.derivative_real(nu) * halfline_arccos_difference(w, s)?)
}

/// ξ² + (1 − 2η + 2ϑ)ξ
pub fn gebert_coefficient(xi: f64, eta: f64, theta: f64) -> f64 {
    xi * xi + (1.0 - 2.0 * eta + 2.0 * theta) * xi
}

/// Half-line lengths L_n = π(n + η)/√ν, for which e^{2iL√ν} = e^{2πiη}.
pub fn halfline_length(nu: f64, eta: f64, n: u32) -> f64 {
    PI * (n as f64 + eta) / nu.sqrt()
}

/// Spectral shift of the half-line pair with a common origin condition.
/// ξ(λ > 0) = −arg S(√λ)/2π, continued from a high-energy anchor.
#[derive(Debug, Clone)]
pub struct HalfLineShift {
    pub potential: Potential,
    pub bc: HalfLineBC,
    /// Bound-state energies of the perturbed operator, ascending.
    pub bound_energies: Vec<f64>,
    /// Bound-state energies of the free operator (empty or one Robin state).
    pub free_bound_energies: Vec<f64>,
    phase_table: Vec<(f64, f64)>,
}

fn brent(f: &dyn Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo)?, f(hi)?);
    if flo * fhi > 0.0 {
        return Err(Error::RootIsolationFailure { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl HalfLineShift {
    pub fn new(p: &Potential, hbc: &HalfLineBC) -> Result<Self> {
        check_half_support(p)?;
        let (a, b) = hbc.origin_real();
        let free_beta = if b != 0.0 && -a / b > 0.0 { Some(-a / b) } else { None };
        let free_bound_energies: Vec<f64> = free_beta.iter().map(|&x| -x * x).collect();

        // D(iβ) e^{...} = a m(0) − b(−β m(0) + m′(0)), real for real V
        let d = |beta: f64| -> Result<f64> {
            if p.is_zero() {
                return Ok(a + b * beta);
            }
            let sol = solve_jost(p, C64::new(0.0, beta), Side::Plus, &JostOptions::default())?;
            let (m, dm) = sol.m_at(0.0).ok_or_else(|| Error::InvalidArgument("Jost grid misses the origin".into()))?;
            Ok((a * m - b * (-beta * m + dm)).re)
        };
        let beta_max = (-p.min_value()).max(0.0).sqrt() + free_beta.unwrap_or(0.0) + p.negative_part_norm() + 1.0;
        let n = 600;
        let mut bound = Vec::new();
        let mut prev = (1e-9, d(1e-9)?);
        for j in 1..=n {
            let beta = beta_max * j as f64 / n as f64;
            let v = d(beta)?;
            if v == 0.0 {
                bound.push(beta);
            } else if prev.1 * v < 0.0 {
                bound.push(brent(&d, prev.0, beta)?);
            }
            prev = (beta, v);
        }
        let mut bound_energies: Vec<f64> = bound.into_iter().map(|x| -x * x).collect();
        bound_energies.sort_by(f64::total_cmp);

        let hb = *hbc;
        let pc = p.clone();
        let phase = move |k: f64| -> Result<f64> { Ok(halfline_scattering(&pc, &hb, k)?.arg()) };
        let phase_table = walk_phase(phase, anchor_wavenumber(p))?;
        Ok(HalfLineShift { potential: p.clone(), bc: *hbc, bound_energies, free_bound_energies, phase_table })
    }

    pub fn xi(&self, lambda: f64) -> Result<f64> {
        if lambda == 0.0 {
            return Err(Error::InvalidArgument("ξ is not evaluated at the threshold λ = 0".into()));
        }
        if lambda < 0.0 {
            let all = self.bound_energies.iter().chain(&self.free_bound_energies);
            if all.clone().any(|&e| (e - lambda).abs() <= 1e-12 * (1.0 + e.abs())) {
                return Err(Error::JumpPoint(lambda));
            }
            let count = |v: &[f64]| v.iter().filter(|&&e| e <= lambda).count() as f64;
            return Ok(count(&self.free_bound_energies) - count(&self.bound_energies));
        }
        let k = lambda.sqrt();
        let raw = halfline_scattering(&self.potential, &self.bc, k)?.arg();
        let target = interpolate(&self.phase_table, k);
        let phase = raw + 2.0 * PI * ((target - raw) / (2.0 * PI)).round();
        Ok(-phase / (2.0 * PI))
    }

    pub fn negative_part(&self, f: &WeightFunction) -> f64 {
        let f0 = f.value_real(0.0);
        let step = |v: &[f64]| v.iter().map(|&e| f0 - f.value_real(e)).sum::<f64>();
        step(&self.free_bound_energies) - step(&self.bound_energies)
    }

    /// ∫_{−∞}^ν f′ξ dλ
    pub fn fumi(&self, nu: f64, f: &WeightFunction) -> Result<f64> {
        if !(nu > 0.0) {
            return Err(Error::InvalidArgument(format!("Fermi energy must be positive, got {nu}")));
        }
        let kn = nu.sqrt();
        let points = quad::graded_toward_start(0.0, kn, 0.5, 12);
        let mut err = None;
        let positive = quad::adaptive_panels(&points, 1e-8, &mut |k| match self.xi(k * k) {
            Ok(x) => 2.0 * k * f.derivative_real(k * k) * x,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(self.negative_part(f) + positive),
        }
    }
}

/// Free and perturbed spectra of the half-line box [0, L], computed on the
/// shifted interval [−L/2, L/2].
pub fn halfline_spectra(p: &Potential, hbc: &HalfLineBC, l: f64, cutoff: f64) -> Result<(BoxSpectrum, BoxSpectrum)> {
    check_half_support(p)?;
    let (lo, hi) = p.support();
    if !p.is_zero() && hi > l {
        return Err(Error::SupportViolation { lo, hi });
    }
    let bc = hbc.box_condition();
    let shifted = p.translated(-0.5 * l);
    Ok((free_spectrum(&bc, 0.5 * l, cutoff)?, perturbed_spectrum(&shifted, &bc, 0.5 * l, cutoff)?))
}
