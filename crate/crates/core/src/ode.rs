//! Dormand–Prince 5(4) integration of the fundamental system of
//! −u″ + V u = λ u.

use crate::error::{Error, Result};
use crate::potentials::Potential;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type State = [f64; 4];

fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..4 {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Tolerances of the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct OdeTolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        OdeTolerance { rel: 1e-10, abs: 1e-12 }
    }
}

/// Values (u1, u1′, u2, u2′) at b of the solutions with u1(a)=1, u1′(a)=0,
/// u2(a)=0, u2′(a)=1. V must be smooth on [a, b]; `panel` is the smooth
/// piece containing [a, b], used to sample V from the inside.
pub fn fundamental(pot: &Potential, lambda: f64, a: f64, b: f64, panel: (f64, f64), tol: OdeTolerance) -> Result<State> {
    let rhs = |x: f64, y: &State| -> State {
        let q = pot.eval_in_panel(x, panel.0, panel.1) - lambda;
        [y[1], q * y[0], y[3], q * y[2]]
    };
    let mut x = a;
    let mut y: State = [1.0, 0.0, 0.0, 1.0];
    let len = b - a;
    if len <= 0.0 {
        return Ok(y);
    }
    let scale = (pot.sup_norm() + lambda.abs()).sqrt().max(1.0);
    let mut h = (0.05 / scale).min(len);
    let h_min = 1e-14 * len.max(1.0);
    let mut k1 = rhs(x, &y);
    while x < b {
        if x + h > b {
            h = b - x;
        }
        let k2 = rhs(x + h / 5.0, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = rhs(x + 0.3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(x + 0.8 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(x + 8.0 / 9.0 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = rhs(x + h, &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = axpy(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = rhs(x + h, &y_new);
        let mut err: f64 = 0.0;
        for i in 0..4 {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            return Err(Error::OdeStepFailure(x));
        }
        if err <= 1.0 {
            x += h;
            y = y_new;
            k1 = k7;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < h_min && x < b {
            return Err(Error::OdeStepFailure(x));
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_potential_matches_trigonometric_solution() {
        let p = Potential::square_well(-2.0, -1.0, 1.0).unwrap();
        let y = fundamental(&p, 1.0, -1.0, 1.0, (-1.0, 1.0), OdeTolerance::default()).unwrap();
        let q = 3f64.sqrt();
        assert!((y[0] - (2.0 * q).cos()).abs() < 1e-9);
        assert!((y[2] - (2.0 * q).sin() / q).abs() < 1e-9);
        // Wronskian stays 1
        assert!((y[0] * y[3] - y[1] * y[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decaying_region() {
        let p = Potential::zero();
        let y = fundamental(&p, -4.0, 0.0, 1.0, (0.0, 1.0), OdeTolerance::default()).unwrap();
        assert!((y[0] - 2f64.cosh()).abs() < 1e-9 * 2f64.cosh());
    }
}
