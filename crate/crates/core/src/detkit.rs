//! Discretized Birman–Schwinger operators and their Fredholm determinants.
//!
//! Quadrature determinants of the free-resolvent kernel converge like N⁻²
//! because of the |x − y| kink on the diagonal; `perturbation_determinant`
//! removes the leading term by combining N and N/2 nodes.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::boundary::BoundaryCondition;
use crate::error::{Error, Result};
use crate::jost::{self, JostOptions, Side};
use crate::linalg::{det_dense, sigma_x, sqrt_upper, Mat2, C64, I};
use crate::potentials::Potential;
use crate::quad;

#[derive(Debug, Clone)]
pub struct DiscretizedKernel {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub matrix: DMatrix<C64>,
}

/// Wavenumber for energy z; on the positive axis `side` picks the boundary value.
pub fn wavenumber(z: C64, side: Side) -> C64 {
    let k = sqrt_upper(z);
    if z.im == 0.0 && z.re > 0.0 && side == Side::Minus {
        -k
    } else {
        k
    }
}

/// R_∞(z; x, y) = −i/(2k) e^{ik|x−y|}
pub fn free_green(k: C64, x: f64, y: f64) -> C64 {
    -I / (2.0 * k) * (I * k * (x - y).abs()).exp()
}

/// Gauss–Legendre nodes on the support, one rule per smooth panel, with even
/// per-panel counts so that halving is exact.
pub fn support_nodes(p: &Potential, n: usize) -> Vec<(f64, f64)> {
    let bps = p.breakpoints();
    if bps.len() < 2 {
        return vec![];
    }
    let total = bps[bps.len() - 1] - bps[0];
    let mut out = Vec::with_capacity(n);
    for w in bps.windows(2) {
        let share = (n as f64 * (w[1] - w[0]) / total).round() as usize;
        let m = (share + share % 2).max(2);
        out.extend(quad::nodes_on(w[0], w[1], m));
    }
    out
}

fn half_nodes(p: &Potential, n: usize) -> Vec<(f64, f64)> {
    let bps = p.breakpoints();
    if bps.len() < 2 {
        return vec![];
    }
    let total = bps[bps.len() - 1] - bps[0];
    let mut out = Vec::new();
    for w in bps.windows(2) {
        let share = (n as f64 * (w[1] - w[0]) / total).round() as usize;
        let m = (share + share % 2).max(2);
        out.extend(quad::nodes_on(w[0], w[1], m / 2));
    }
    out
}

fn kernel_on(p: &Potential, k: C64, nodes: &[(f64, f64)]) -> DiscretizedKernel {
    let n = nodes.len();
    let xs: Vec<f64> = nodes.iter().map(|q| q.0).collect();
    let ws: Vec<f64> = nodes.iter().map(|q| q.1).collect();
    let v: Vec<f64> = xs.iter().map(|&x| p.eval(x)).collect();
    let left: Vec<f64> = (0..n).map(|i| (ws[i] * v[i].abs()).sqrt()).collect();
    let right: Vec<f64> = (0..n).map(|j| left[j] * v[j].signum()).collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| free_green(k, xs[i], xs[j]) * (left[i] * right[j]));
    DiscretizedKernel { nodes: xs, weights: ws, matrix }
}

/// M_ij = √w_i √|V_i| R_∞(z; x_i, x_j) √|V_j| J_j √w_j
pub fn nystrom_k_infinity(p: &Potential, z: C64, side: Side, n: usize) -> DiscretizedKernel {
    kernel_on(p, wavenumber(z, side), &support_nodes(p, n))
}

/// det(I − M) by LU with partial pivoting.
pub fn fredholm_det(kern: &DiscretizedKernel) -> C64 {
    let n = kern.matrix.nrows();
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    det_dense(DMatrix::identity(n, n) - &kern.matrix)
}

fn extrapolate(fine: C64, coarse: C64) -> C64 {
    (4.0 * fine - coarse) / 3.0
}

/// Δ(z) = det(I − K_∞(z)) from n and n/2 nodes combined.
pub fn perturbation_determinant(p: &Potential, z: C64, side: Side, n: usize) -> C64 {
    if p.is_zero() {
        return C64::new(1.0, 0.0);
    }
    let k = wavenumber(z, side);
    let fine = fredholm_det(&kernel_on(p, k, &support_nodes(p, n)));
    let coarse = fredholm_det(&kernel_on(p, k, &half_nodes(p, n)));
    extrapolate(fine, coarse)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub defect: f64,
}

/// 1/t(k) against det(I − K_∞⁺(k²)).
pub fn jost_pais_check(p: &Potential, k: f64, n: usize) -> Result<IdentityCheck> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument("the Jost–Pais check needs k > 0".into()));
    }
    let lhs = jost::inverse_transmission(p, C64::new(k, 0.0), &JostOptions::default())?;
    let rhs = perturbation_determinant(p, C64::new(k * k, 0.0), Side::Plus, n);
    Ok(IdentityCheck { lhs, rhs, defect: (lhs - rhs).norm() })
}

/// Rank-two boundary part of the box resolvent, R_L = R_∞ − D_L with
/// D_L(x, y) = d_L/(2ik) Σ G_jl ε_j(x) ε̃_l(y), ε = (e^{ikx}, e^{−ikx}),
/// ε̃ = (e^{−iky}, e^{iky}).
#[derive(Debug, Clone)]
pub struct Rank2Correction {
    pub k: C64,
    pub d_l: C64,
    pub g_l: Mat2,
    pub eps1: Vec<C64>,
    pub eps2: Vec<C64>,
}

impl Rank2Correction {
    pub fn new(bc: &BoundaryCondition, z: C64, l: f64, nodes: &[f64]) -> Result<Self> {
        let k = sqrt_upper(z);
        let u = bc.u_matrix_k(k)?;
        let d_l = (2.0 * I * k * l).exp();
        let secular = Mat2::identity().map(|x| x * d_l) + u * sigma_x();
        let g_l = secular.try_inverse().ok_or(Error::SpectralCollision(secular.determinant().norm()))?;
        let eps1 = nodes.iter().map(|&x| (I * k * x).exp()).collect();
        let eps2 = nodes.iter().map(|&x| (-I * k * x).exp()).collect();
        Ok(Rank2Correction { k, d_l, g_l, eps1, eps2 })
    }

    /// ‖G_L (e^{2ikL} I + U σ_x) − I‖
    pub fn inverse_defect(&self, bc: &BoundaryCondition) -> f64 {
        let u = bc.u_matrix_k(self.k).expect("pencil checked at construction");
        let secular = Mat2::identity().map(|x| x * self.d_l) + u * sigma_x();
        (self.g_l * secular - Mat2::identity()).norm()
    }

    /// D_L(x_i, x_j)
    pub fn kernel(&self, i: usize, j: usize) -> C64 {
        let e = [self.eps1[i], self.eps2[i]];
        // ε̃_1 = ε_2, ε̃_2 = ε_1 on real nodes
        let et = [self.eps2[j], self.eps1[j]];
        let mut s = C64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                s += self.g_l[(a, b)] * e[a] * et[b];
            }
        }
        self.d_l / (2.0 * I * self.k) * s
    }
}

fn box_kernel(p: &Potential, bc: &BoundaryCondition, z: C64, l: f64, nodes: &[(f64, f64)]) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let k = sqrt_upper(z);
    let inf = kernel_on(p, k, nodes);
    let corr = Rank2Correction::new(bc, z, l, &inf.nodes)?;
    let n = nodes.len();
    let left: Vec<f64> = (0..n).map(|i| (inf.weights[i] * p.eval(inf.nodes[i]).abs()).sqrt()).collect();
    let right: Vec<f64> = (0..n).map(|j| left[j] * p.eval(inf.nodes[j]).signum()).collect();
    let boxed = DMatrix::from_fn(n, n, |i, j| inf.matrix[(i, j)] - corr.kernel(i, j) * (left[i] * right[j]));
    Ok((inf.matrix, boxed))
}

/// det(I − K_L) against det(I − K_∞,L) · det(I + d_L T_L G_L).
pub fn factorization_check(p: &Potential, bc: &BoundaryCondition, z: C64, l: f64, n: usize) -> Result<IdentityCheck> {
    let (lo, hi) = p.support();
    if !p.is_zero() && (lo < -l || hi > l) {
        return Err(Error::SupportViolation { lo, hi });
    }
    let k = sqrt_upper(z);
    let corr = Rank2Correction::new(bc, z, l, &[])?;
    let t_l = jost::scattering(p, k, &JostOptions::default())?.t_matrix();
    let boundary_factor = (Mat2::identity() + t_l.map(|x| x * corr.d_l) * corr.g_l).determinant();
    let det_pair = |nodes: &[(f64, f64)]| -> Result<(C64, C64)> {
        if nodes.is_empty() {
            return Ok((C64::new(1.0, 0.0), C64::new(1.0, 0.0)));
        }
        let (inf, boxed) = box_kernel(p, bc, z, l, nodes)?;
        let m = nodes.len();
        Ok((det_dense(DMatrix::identity(m, m) - inf), det_dense(DMatrix::identity(m, m) - boxed)))
    };
    let (inf_f, box_f) = det_pair(&support_nodes(p, n))?;
    let (inf_c, box_c) = det_pair(&half_nodes(p, n))?;
    let det_inf = extrapolate(inf_f, inf_c);
    let lhs = extrapolate(box_f, box_c);
    for v in [det_inf, boundary_factor] {
        if v.norm() < 1e-12 {
            return Err(Error::SpectralCollision(v.norm()));
        }
    }
    let rhs = det_inf * boundary_factor;
    Ok(IdentityCheck { lhs, rhs, defect: (lhs - rhs).norm() })
}

/// det(I − K_L(z)) alone.
pub fn box_determinant(p: &Potential, bc: &BoundaryCondition, z: C64, l: f64, n: usize) -> Result<C64> {
    let one = |nodes: &[(f64, f64)]| -> Result<C64> {
        if nodes.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        let (_, boxed) = box_kernel(p, bc, z, l, nodes)?;
        let m = nodes.len();
        Ok(det_dense(DMatrix::identity(m, m) - boxed))
    };
    Ok(extrapolate(one(&support_nodes(p, n))?, one(&half_nodes(p, n))?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourNode {
    pub z: C64,
    /// Quadrature weight times dz/dparameter, oriented counterclockwise.
    pub dz: C64,
    pub log_det: C64,
}

/// ln Δ sampled along Γ_{ν,b} in traversal order: from ν+i0 up the right
/// parabola, across the top parabola, and back to ν−i0.
#[derive(Debug, Clone)]
pub struct ContourSamples {
    pub nodes: Vec<ContourNode>,
    /// ln Δ(ν + i0)
    pub start: C64,
    /// ln Δ(ν − i0)
    pub end: C64,
}

impl ContourSamples {
    /// −(1/2πi) ∮ f′(z) ln Δ(z) dz
    pub fn integrate<F: Fn(C64) -> C64>(&self, fprime: F) -> C64 {
        let s: C64 = self.nodes.iter().map(|n| fprime(n.z) * n.log_det * n.dz).sum();
        -s / (2.0 * std::f64::consts::PI * I)
    }
}

fn unwrap_walk(values: &[C64], anchor_phase: f64) -> Result<(Vec<f64>, f64)> {
    let mut phases = Vec::with_capacity(values.len());
    let mut prev = anchor_phase;
    let mut worst: f64 = 0.0;
    for v in values {
        let a = v.arg();
        let two_pi = 2.0 * std::f64::consts::PI;
        let p = a + two_pi * ((prev - a) / two_pi).round();
        worst = worst.max((p - prev).abs());
        phases.push(p);
        prev = p;
    }
    Ok((phases, worst))
}

/// Samples ln det(I − K_∞(z)) along Γ_{ν,b} with a continuous phase anchored
/// at z = −b², where the determinant is real and positive.
pub fn logdet_along_contour(p: &Potential, nu: f64, b: f64, nodes: usize, n_det: usize) -> Result<ContourSamples> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument("ν must be positive".into()));
    }
    if !(2.0 * b > p.l1_norm()) {
        return Err(Error::InvalidArgument(format!("contour height b = {b} needs 2b > ‖V‖₁")));
    }
    let mut per_piece = nodes.max(4);
    for _ in 0..4 {
        match contour_once(p, nu, b, per_piece, n_det) {
            Ok(s) => return Ok(s),
            Err(Error::PhaseUnwrapFailure(j)) if per_piece < 1024 => {
                let _ = j;
                per_piece *= 2;
            }
            Err(e) => return Err(e),
        }
    }
    contour_once(p, nu, b, per_piece, n_det)
}

fn contour_once(p: &Potential, nu: f64, b: f64, m: usize, n_det: usize) -> Result<ContourSamples> {
    let sq = nu.sqrt();
    // (z, dz) for each piece in traversal order
    let mut upper = Vec::new();
    for (s, w) in quad::nodes_on(0.0, b, m) {
        let kk = C64::new(sq, s);
        upper.push((kk * kk, w * 2.0 * I * kk));
    }
    let mut top_right = Vec::new();
    for (t, w) in quad::nodes_on(0.0, sq, m).into_iter().rev() {
        let kk = C64::new(t, b);
        top_right.push((kk * kk, -w * 2.0 * kk));
    }
    let mut top_left = Vec::new();
    for (t, w) in quad::nodes_on(-sq, 0.0, m).into_iter().rev() {
        let kk = C64::new(t, b);
        top_left.push((kk * kk, -w * 2.0 * kk));
    }
    let mut lower = Vec::new();
    for (s, w) in quad::nodes_on(-b, 0.0, m) {
        let kk = C64::new(sq, s);
        lower.push((kk * kk, w * 2.0 * I * kk));
    }
    let eval = |pts: &[(C64, C64)]| -> Vec<C64> { pts.par_iter().map(|&(z, _)| perturbation_determinant(p, z, Side::Plus, n_det)).collect() };
    let anchor = perturbation_determinant(p, C64::new(-b * b, 0.0), Side::Plus, n_det);
    let start_det = perturbation_determinant(p, C64::new(nu, 0.0), Side::Plus, n_det);
    let end_det = perturbation_determinant(p, C64::new(nu, 0.0), Side::Minus, n_det);
    let d_upper = eval(&upper);
    let d_tr = eval(&top_right);
    let d_tl = eval(&top_left);
    let d_lower = eval(&lower);
    let anchor_phase = anchor.arg();

    // backward walk: anchor → top_right (reversed) → upper (reversed) → ν+i0
    let mut back: Vec<C64> = d_tr.iter().rev().copied().collect();
    back.extend(d_upper.iter().rev().copied());
    back.push(start_det);
    let (ph_back, jb) = unwrap_walk(&back, anchor_phase)?;
    // forward walk: anchor → top_left → lower → ν−i0
    let mut fwd: Vec<C64> = d_tl.clone();
    fwd.extend(d_lower.iter().copied());
    fwd.push(end_det);
    let (ph_fwd, jf) = unwrap_walk(&fwd, anchor_phase)?;
    let jump = jb.max(jf);
    if jump > 0.5 * std::f64::consts::PI {
        return Err(Error::PhaseUnwrapFailure(jump));
    }
    let log = |d: C64, ph: f64| C64::new(d.norm().ln(), ph);

    let n_tr = d_tr.len();
    let n_up = d_upper.len();
    let mut nodes = Vec::new();
    // upper, in traversal order (s ascending) = reverse of its position in `back`
    for i in 0..n_up {
        let idx = n_tr + (n_up - 1 - i);
        nodes.push(ContourNode { z: upper[i].0, dz: upper[i].1, log_det: log(d_upper[i], ph_back[idx]) });
    }
    for i in 0..n_tr {
        let idx = n_tr - 1 - i;
        nodes.push(ContourNode { z: top_right[i].0, dz: top_right[i].1, log_det: log(d_tr[i], ph_back[idx]) });
    }
    for i in 0..d_tl.len() {
        nodes.push(ContourNode { z: top_left[i].0, dz: top_left[i].1, log_det: log(d_tl[i], ph_fwd[i]) });
    }
    for i in 0..d_lower.len() {
        let idx = d_tl.len() + i;
        nodes.push(ContourNode { z: lower[i].0, dz: lower[i].1, log_det: log(d_lower[i], ph_fwd[idx]) });
    }
    Ok(ContourSamples {
        nodes,
        start: log(start_det, *ph_back.last().unwrap()),
        end: log(end_det, *ph_fwd.last().unwrap()),
    })
}
