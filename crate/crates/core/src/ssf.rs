//! Spectral shift function of the pair (H + V, H) and the Fumi term.
//!
//! For λ < 0, ξ(λ) is minus the number of bound-state energies ≤ λ. For
//! λ > 0 it is −arg t(√λ)/π, so that e^{−2πiξ} = det S. The continuous
//! branch is fixed by walking a table of arg t down from a high-energy anchor
//! where the principal value is taken.

use crate::detkit;
use crate::error::{Error, Result};
use crate::jost::{bound_states, inverse_transmission, scattering, BoundStateList, JostOptions};
use crate::linalg::{C64, I};
use crate::potentials::{Potential, WeightFunction};
use crate::quad;

const TAU: f64 = 2.0 * std::f64::consts::PI;
const K_MIN: f64 = 1e-4;
const MAX_PHASE_STEP: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct SpectralShift {
    pub potential: Potential,
    pub bound_states: BoundStateList,
    /// (k, arg t(k)) ascending in k, continuous in the phase.
    phase_table: Vec<(f64, f64)>,
    opts: JostOptions,
}

fn lift(target: f64, raw: f64) -> f64 {
    raw + TAU * ((target - raw) / TAU).round()
}

/// Walks a phase function from the principal value at `k_max` down to
/// K_MIN, keeping it continuous; returns (k, phase) ascending in k.
pub(crate) fn walk_phase<F: Fn(f64) -> Result<f64>>(phase: F, k_max: f64) -> Result<Vec<(f64, f64)>> {
    let mut table = vec![(k_max, phase(k_max)?)];
    let mut k = k_max;
    let mut dk = 0.1 * k_max;
    while k > K_MIN {
        let next = (k - dk.min(0.5 * k)).max(K_MIN);
        let prev = table.last().unwrap().1;
        let value = lift(prev, phase(next)?);
        if (value - prev).abs() > MAX_PHASE_STEP {
            dk = 0.5 * (k - next);
            if dk < 1e-12 * k {
                return Err(Error::BranchAnchorTooLow { k: next, jump: value - prev });
            }
            continue;
        }
        table.push((next, value));
        k = next;
        if (value - prev).abs() < 0.1 {
            dk *= 1.5;
        }
    }
    table.reverse();
    Ok(table)
}

/// Piecewise-linear lookup, constant beyond the ends.
pub(crate) fn interpolate(t: &[(f64, f64)], k: f64) -> f64 {
    if k <= t[0].0 {
        return t[0].1;
    }
    if k >= t[t.len() - 1].0 {
        return t[t.len() - 1].1;
    }
    let i = t.partition_point(|e| e.0 <= k);
    let (a, b) = (t[i - 1], t[i]);
    a.1 + (b.1 - a.1) * (k - a.0) / (b.0 - a.0)
}


/// Anchor wavenumber of the phase table.
pub fn anchor_wavenumber(p: &Potential) -> f64 {
    10.0 * p.l1_norm().max(1.0)
}

impl SpectralShift {
    pub fn new(p: &Potential) -> Result<Self> {
        Self::with_options(p, JostOptions::default())
    }

    pub fn with_options(p: &Potential, opts: JostOptions) -> Result<Self> {
        let bound = bound_states(p, &opts)?;
        let phase = |k: f64| -> Result<f64> { Ok(-inverse_transmission(p, C64::new(k, 0.0), &opts)?.arg()) };
        let table = walk_phase(phase, anchor_wavenumber(p))?;
        Ok(SpectralShift { potential: p.clone(), bound_states: bound, phase_table: table, opts })
    }

    fn table_phase(&self, k: f64) -> f64 {
        interpolate(&self.phase_table, k)
    }

    /// Continuous branch of arg t(k), k > 0.
    pub fn transmission_phase(&self, k: f64) -> Result<f64> {
        let raw = -inverse_transmission(&self.potential, C64::new(k, 0.0), &self.opts)?.arg();
        Ok(lift(self.table_phase(k), raw))
    }

    pub fn xi(&self, lambda: f64) -> Result<f64> {
        if lambda == 0.0 {
            return Err(Error::InvalidArgument("ξ is not evaluated at the threshold λ = 0".into()));
        }
        if lambda < 0.0 {
            let energies = self.bound_states.energies();
            if energies.iter().any(|&e| (e - lambda).abs() <= 1e-12 * (1.0 + e.abs())) {
                return Err(Error::JumpPoint(lambda));
            }
            return Ok(-(energies.iter().filter(|&&e| e <= lambda).count() as f64));
        }
        Ok(-self.transmission_phase(lambda.sqrt())? / std::f64::consts::PI)
    }

    /// (λ, ξ(λ)) at the nodes of the phase table.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.phase_table.iter().map(|&(k, ph)| (k * k, -ph / std::f64::consts::PI)).collect()
    }

    /// ξ just above the threshold, reported as a diagnostic. Generically it is
    /// ½ − (number of bound states); a zero-energy resonance, as for
    /// −2 sech²x, shifts it to −(number of bound states).
    pub fn threshold_value(&self) -> f64 {
        -self.phase_table[0].1 / std::f64::consts::PI
    }

    /// |e^{−2πiξ(λ)} − det S(λ)| for λ > 0.
    pub fn birman_krein_defect(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument("the scattering matrix lives on λ > 0".into()));
        }
        let s = scattering(&self.potential, C64::new(lambda.sqrt(), 0.0), &self.opts)?;
        let det = s.s_matrix().determinant();
        let xi = self.xi(lambda)?;
        Ok(((-TAU * I * xi).exp() - det).norm())
    }

    /// ∫_{−∞}^0 f′ξ dλ from the exact step structure: −Σ_j [f(0) − f(−β_j²)].
    pub fn negative_part(&self, f: &WeightFunction) -> f64 {
        let f0 = f.value_real(0.0);
        -self.bound_states.energies().iter().map(|&e| f0 - f.value_real(e)).sum::<f64>()
    }

    /// The same integral by quadrature of f′ between consecutive bound-state
    /// energies, where ξ is constant.
    pub fn negative_part_quadrature(&self, f: &WeightFunction) -> Result<f64> {
        let mut e = self.bound_states.energies();
        e.push(0.0);
        let mut sum = 0.0;
        for (j, w) in e.windows(2).enumerate() {
            let step = -((j + 1) as f64);
            sum += step * quad::adaptive(w[0], w[1], 1e-13, &mut |x| f.derivative_real(x))?;
        }
        Ok(sum)
    }

    /// ∫_0^ν f′ξ dλ written in k = √λ, on a mesh graded toward k = 0.
    pub fn positive_part(&self, nu: f64, f: &WeightFunction, tol: f64) -> Result<f64> {
        let kn = nu.sqrt();
        let points = quad::graded_toward_start(0.0, kn, 0.5, 12);
        let mut err = None;
        let value = quad::adaptive_panels(&points, tol, &mut |k| match self.xi(k * k) {
            Ok(x) => 2.0 * k * f.derivative_real(k * k) * x,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }

    /// Fumi term ∫_{−∞}^ν f′(λ) ξ(λ) dλ.
    pub fn fumi(&self, nu: f64, f: &WeightFunction) -> Result<f64> {
        if !(nu > 0.0) {
            return Err(Error::InvalidArgument(format!("Fermi energy must be positive, got {nu}")));
        }
        Ok(self.negative_part(f) + self.positive_part(nu, f, 1e-8)?)
    }
}

/// Fumi term from the ξ integral.
pub fn fumi(p: &Potential, nu: f64, f: &WeightFunction) -> Result<f64> {
    if p.is_zero() {
        return Ok(0.0);
    }
    SpectralShift::new(p)?.fumi(nu, f)
}

/// Resolution of the contour evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourOptions {
    /// Gauss nodes per contour piece.
    pub nodes: usize,
    /// Nyström nodes per determinant.
    pub n_det: usize,
}

impl Default for ContourOptions {
    fn default() -> Self {
        ContourOptions { nodes: 32, n_det: 400 }
    }
}

/// Fumi term as −(1/2πi)∮ f′(z) ln det(I − K_∞(z)) dz over the Fermi
/// parabolas of height b.
pub fn fumi_contour(p: &Potential, nu: f64, b: f64, f: &WeightFunction, opts: ContourOptions) -> Result<f64> {
    if p.is_zero() {
        return Ok(0.0);
    }
    let samples = detkit::logdet_along_contour(p, nu, b, opts.nodes, opts.n_det)?;
    Ok(samples.integrate(|z| f.derivative(z)).re)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_shift_vanishes() {
        let s = SpectralShift::new(&Potential::zero()).unwrap();
        assert_eq!(s.xi(2.0).unwrap(), 0.0);
        assert_eq!(s.xi(-1.0).unwrap(), 0.0);
        assert_eq!(fumi(&Potential::zero(), 2.0, &WeightFunction::identity()).unwrap(), 0.0);
    }

    #[test]
    fn poeschl_teller_counts_one_bound_state() {
        let p = Potential::poschl_teller(-2.0, 0.0, 1.0).unwrap();
        let s = SpectralShift::new(&p).unwrap();
        assert_eq!(s.xi(-0.5).unwrap(), -1.0);
        assert_eq!(s.xi(-1.5).unwrap(), 0.0);
    }

    #[test]
    fn jump_point_rejected() {
        let p = Potential::poschl_teller(-2.0, 0.0, 1.0).unwrap();
        let s = SpectralShift::new(&p).unwrap();
        let e = s.bound_states.energies()[0];
        assert!(matches!(s.xi(e), Err(Error::JumpPoint(_))));
    }

    #[test]
    fn square_well_phase_at_fermi_energy() {
        let p = Potential::square_well(-2.0, -1.0, 1.0).unwrap();
        let s = SpectralShift::new(&p).unwrap();
        assert!((s.xi(2.0).unwrap() + 0.382151558).abs() < 1e-7);
        assert!(s.birman_krein_defect(2.0).unwrap() < 1e-8);
    }
}
