//! Small complex matrix helpers.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity() -> Mat2 {
    Mat2::identity()
}

pub fn sigma_x() -> Mat2 {
    Mat2::new(real(0.0), real(1.0), real(1.0), real(0.0))
}

/// (M + M*)/2
pub fn re_part(m: &Mat2) -> Mat2 {
    (m + m.adjoint()).scale(0.5)
}

/// Root of z with nonnegative imaginary part. For z on the positive real
/// axis the positive root is returned.
pub fn sqrt_upper(z: C64) -> C64 {
    let k = z.sqrt();
    if k.im < 0.0 {
        -k
    } else {
        k
    }
}

/// Eigenvalues of a 2x2 Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &Mat2) -> [f64; 2] {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
    let mean = 0.5 * (a + d);
    let r = (0.5 * (a - d)).hypot(b.norm());
    [mean - r, mean + r]
}

/// Eigenphases of a 2x2 unitary matrix. The two phases are returned as
/// alpha - gamma and alpha + gamma with gamma in [0, pi]; this form keeps
/// full precision at degeneracies.
pub fn unitary_eigenphases(w: &Mat2) -> [f64; 2] {
    let det = w.determinant();
    let alpha = 0.5 * det.arg();
    let rot = C64::from_polar(1.0, -alpha);
    let v = w.map(|x| x * rot);
    let a = 0.5 * (v[(0, 0)] + v[(1, 1)].conj());
    let b = 0.5 * (v[(0, 1)] - v[(1, 0)].conj());
    let s = a.im.hypot(b.norm());
    let gamma = s.atan2(a.re);
    [alpha - gamma, alpha + gamma]
}

/// Singular values of a 2x2 matrix, ascending.
pub fn singular_values(m: &Mat2) -> [f64; 2] {
    let g = m.adjoint() * m;
    let e = hermitian_eigenvalues(&g);
    let big = e[1].max(0.0).sqrt();
    let det = m.determinant().norm();
    let small = if big > 0.0 { det / big } else { 0.0 };
    [small, big]
}

pub fn max_abs_entry(m: &Mat2) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Frobenius distance of M*M from the identity.
pub fn unitarity_defect(m: &Mat2) -> f64 {
    (m.adjoint() * m - identity()).norm()
}

/// Determinant of a dense complex matrix by LU with partial pivoting.
pub fn det_dense(m: DMatrix<C64>) -> C64 {
    m.lu().determinant()
}

/// Wraps an angle into (-pi, pi].
pub fn wrap(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x % two_pi;
    if y <= -std::f64::consts::PI {
        y += two_pi;
    } else if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

/// (exp(2ikh) - 1) / (2ik), stable for small |k h| and exact h at k = 0.
pub fn phase_increment(k: C64, h: f64) -> C64 {
    let w = 2.0 * I * k * h;
    if w.norm() < 1e-3 {
        let mut term = real(h);
        let mut sum = term;
        for n in 2..8 {
            term = term * w / n as f64;
            sum += term;
        }
        sum
    } else {
        let e = C64::new(w.re.exp_m1() * w.im.cos() - 2.0 * (0.5 * w.im).sin().powi(2), w.re.exp() * w.im.sin());
        e / (2.0 * I * k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenphases_of_diagonal_unitary() {
        let w = Mat2::new(C64::from_polar(1.0, 0.3), real(0.0), real(0.0), C64::from_polar(1.0, -1.1));
        let mut p = unitary_eigenphases(&w).map(wrap);
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((p[0] + 1.1).abs() < 1e-14 && (p[1] - 0.3).abs() < 1e-14);
    }

    #[test]
    fn eigenphases_of_degenerate_unitary_are_exact() {
        let w = identity().map(|x| x * C64::from_polar(1.0, 0.7));
        let p = unitary_eigenphases(&w);
        assert!((p[0] - 0.7).abs() < 1e-15 && (p[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn hermitian_eigenvalues_match_trace_and_det() {
        let m = Mat2::new(real(1.0), c(0.5, 0.2), c(0.5, -0.2), real(-0.3));
        let e = hermitian_eigenvalues(&m);
        assert!((e[0] + e[1] - 0.7).abs() < 1e-14);
        assert!((e[0] * e[1] - m.determinant().re).abs() < 1e-14);
    }

    #[test]
    fn phase_increment_matches_direct_formula() {
        for &k in &[c(1.0, 0.0), c(0.0, 2.0), c(3.0, 0.5)] {
            let h = 0.01;
            let direct = ((2.0 * I * k * h).exp() - 1.0) / (2.0 * I * k);
            assert!((phase_increment(k, h) - direct).norm() < 1e-10 * h, "{k} {} {}", phase_increment(k, h), direct);
        }
        let (k, h) = (c(1e-5, 1e-6), 0.01);
        let w = 2.0 * I * k * h;
        assert!((phase_increment(k, h) - h * (1.0 + w / 2.0 + w * w / 6.0)).norm() < 1e-18);
        assert_eq!(phase_increment(real(0.0), 0.25), real(0.25));
    }

    #[test]
    fn singular_values_of_rank_one() {
        let m = Mat2::new(real(1.0), real(2.0), real(2.0), real(4.0));
        let s = singular_values(&m);
        assert!(s[0].abs() < 1e-14 && (s[1] - 5.0).abs() < 1e-12);
    }
}
