//! Independent oracles: finite differences for box spectra and RK4
//! integration for scattering amplitudes.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use spectral_shift::potentials::Potential;

/// End conditions for the finite-difference box.
#[derive(Debug, Clone, Copy)]
pub enum FdBc {
    Dirichlet,
    Periodic,
    /// cos θ φ ∓ sin θ φ′ = 0 at x = ±L (θ = π/2 is Neumann).
    Robin { right: f64, left: f64 },
}

/// V at a node, averaging the one-sided limits at a jump.
fn node_value(p: &Potential, x: f64, h: f64) -> f64 {
    0.5 * (p.eval(x - 1e-9 * h) + p.eval(x + 1e-9 * h))
}

/// Eigenvalues of the 3-point discretization of −u″ + Vu on [−L, L] with n cells.
pub fn fd_eigenvalues(p: &Potential, bc: FdBc, l: f64, n: usize) -> Vec<f64> {
    let h = 2.0 * l / n as f64;
    let x = |j: usize| -l + j as f64 * h;
    let h2 = 1.0 / (h * h);
    let m = match bc {
        FdBc::Dirichlet => {
            let size = n - 1;
            DMatrix::from_fn(size, size, |i, j| {
                if i == j {
                    2.0 * h2 + node_value(p, x(i + 1), h)
                } else if i.abs_diff(j) == 1 {
                    -h2
                } else {
                    0.0
                }
            })
        }
        FdBc::Periodic => DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0 * h2 + node_value(p, x(i), h)
            } else if i.abs_diff(j) == 1 || i.abs_diff(j) == n - 1 {
                -h2
            } else {
                0.0
            }
        }),
        FdBc::Robin { right, left } => {
            // ghost nodes eliminated; the half weights at the ends make the matrix symmetric
            let size = n + 1;
            let cot = |t: f64| t.cos() / t.sin();
            let mut a = DMatrix::from_fn(size, size, |i, j| {
                if i == j {
                    2.0 * h2 + node_value(p, x(i), h)
                } else if i.abs_diff(j) == 1 {
                    -h2
                } else {
                    0.0
                }
            });
            a[(0, 0)] += 2.0 * h * cot(left) * h2;
            a[(n, n)] += 2.0 * h * cot(right) * h2;
            a[(0, 1)] = -2.0 * h2;
            a[(n, n - 1)] = -2.0 * h2;
            let s = std::f64::consts::SQRT_2;
            a[(0, 1)] /= s;
            a[(1, 0)] *= s;
            a[(n, n - 1)] /= s;
            a[(n - 1, n)] *= s;
            a
        }
    };
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Richardson combination of the n and 2n discretizations.
pub fn fd_extrapolated(p: &Potential, bc: FdBc, l: f64, n: usize, count: usize) -> Vec<f64> {
    let coarse = fd_eigenvalues(p, bc, l, n);
    let fine = fd_eigenvalues(p, bc, l, 2 * n);
    (0..count).map(|j| (4.0 * fine[j] - coarse[j]) / 3.0).collect()
}

/// (t, r1, r2) by RK4 integration of −ψ″ + Vψ = k²ψ across [a, b] ⊇ supp V.
pub fn rk4_scattering(p: &Potential, k: f64, a: f64, b: f64, steps: usize) -> (Complex64, Complex64, Complex64) {
    let i = Complex64::new(0.0, 1.0);
    let march = |x0: f64, x1: f64, y0: [Complex64; 2]| -> [Complex64; 2] {
        let h = (x1 - x0) / steps as f64;
        let f = |v: f64, y: [Complex64; 2]| [y[1], (v - k * k) * y[0]];
        let mut y = y0;
        for j in 0..steps {
            let x = x0 + j as f64 * h;
            // one-sided values keep jumps at step ends from spoiling the order
            let v0 = p.eval(x + 1e-9 * h);
            let vm = p.eval(x + 0.5 * h);
            let v1 = p.eval(x + h - 1e-9 * h);
            let k1 = f(v0, y);
            let k2 = f(vm, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f(vm, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f(v1, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for c in 0..2 {
                y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        y
    };
    // amplitudes of e^{ikx}, e^{−ikx} in (ψ, ψ′) at x
    let split = |x: f64, y: [Complex64; 2]| {
        let e = (i * k * x).exp();
        let plus = 0.5 * (y[0] + y[1] / (i * k)) / e;
        let minus = 0.5 * (y[0] - y[1] / (i * k)) * e;
        (plus, minus)
    };
    // wave incident from the left: t e^{ikx} on the right
    let start = [(i * k * b).exp(), i * k * (i * k * b).exp()];
    let (inc, refl) = split(a, march(b, a, start));
    let t = 1.0 / inc;
    let r_left = refl / inc;
    // wave incident from the right: t e^{−ikx} on the left
    let start = [(-i * k * a).exp(), -i * k * (-i * k * a).exp()];
    let (refl, inc) = split(b, march(a, b, start));
    let r_right = refl / inc;
    (t, r_right, r_left)
}
