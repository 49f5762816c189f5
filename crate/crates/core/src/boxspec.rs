//! Spectra of the box operators H_L = −d²/dx² and H_{V,L} = H_L + V on
//! [−L, L] with self-adjoint boundary conditions, and the energy differences
//! built from them.
//!
//! The perturbed spectrum uses, for each real λ, the unitary map X(λ) that
//! sends the boundary data Γ₁u − iΓ₂u of a solution u of −u″ + Vu = λu to
//! Γ₁u + iΓ₂u. It is assembled from segment maps (free segments in closed
//! form, the potential region by Dormand–Prince shooting) joined by a
//! Redheffer-type star product, which stays bounded where a plain transfer
//! matrix would overflow. λ is an eigenvalue exactly when W(λ) = U₀* X(λ) has
//! eigenvalue 1, U₀ being the Cayley transform of (A, B); roots are found by
//! tracking the eigenphases of W.

use crate::boundary::BoundaryCondition;
use crate::error::{Error, Result};
use crate::linalg::{sigma_x, singular_values, unitary_eigenphases, Mat2, C64, I};
use crate::ode::{self, OdeTolerance};
use crate::potentials::{Potential, WeightFunction};

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone)]
pub struct BoxSpectrum {
    pub l: f64,
    pub bc: BoundaryCondition,
    pub cutoff: f64,
    /// Distinct eigenvalues, ascending.
    pub levels: Vec<Level>,
    pub perturbed: bool,
}

impl BoxSpectrum {
    /// Eigenvalues repeated according to multiplicity.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.levels.iter().flat_map(|l| std::iter::repeat(l.value).take(l.multiplicity)).collect()
    }

    /// Number of eigenvalues ≤ x, with multiplicity.
    pub fn count_at_most(&self, x: f64) -> usize {
        self.levels.iter().filter(|l| l.value <= x).map(|l| l.multiplicity).sum()
    }

    pub fn distance_to(&self, x: f64) -> f64 {
        self.levels.iter().map(|l| (l.value - x).abs()).fold(f64::INFINITY, f64::min)
    }
}

/// X for one segment from a real basis of solutions given by their values
/// and derivatives at the left end a and the right end b. Derivatives enter
/// the port data multiplied by the length `scale`.
fn x_from_basis(ua: [f64; 2], dua: [f64; 2], ub: [f64; 2], dub: [f64; 2], scale: f64) -> Mat2 {
    let z = Mat2::new(
        C64::new(ub[0], scale * dub[0]),
        C64::new(ub[1], scale * dub[1]),
        C64::new(ua[0], -scale * dua[0]),
        C64::new(ua[1], -scale * dua[1]),
    );
    let zc = z.map(|x| x.conj());
    zc * z.try_inverse().expect("boundary data of a fundamental system are independent")
}

/// X of a free segment of length d.
pub fn free_segment(lambda: f64, d: f64, scale: f64) -> Mat2 {
    if lambda < 0.0 && (-lambda).sqrt() * d > 1.0 {
        let kappa = (-lambda).sqrt();
        let e = (-kappa * d).exp();
        // e^{κ(x−b)} and e^{−κ(x−a)}
        return x_from_basis([e, 1.0], [kappa * e, -kappa], [1.0, e], [kappa, -kappa * e], scale);
    }
    let (c, s, dc) = if lambda > 0.0 {
        let k = lambda.sqrt();
        ((k * d).cos(), (k * d).sin() / k, -k * (k * d).sin())
    } else if lambda < 0.0 {
        let k = (-lambda).sqrt();
        ((k * d).cosh(), (k * d).sinh() / k, k * (k * d).sinh())
    } else {
        (1.0, d, 0.0)
    };
    x_from_basis([1.0, 0.0], [0.0, 1.0], [c, s], [dc, c], scale)
}

/// Joins the maps of [a, m] and [m, b] into the map of [a, b].
pub fn star(left: &Mat2, right: &Mat2) -> Mat2 {
    let den = C64::new(1.0, 0.0) - right[(1, 1)] * left[(0, 0)];
    Mat2::new(
        right[(0, 0)] + right[(0, 1)] * left[(0, 0)] * right[(1, 0)] / den,
        right[(0, 1)] * left[(0, 1)] / den,
        left[(1, 0)] * right[(1, 0)] / den,
        left[(1, 1)] + left[(1, 0)] * right[(1, 1)] * left[(0, 1)] / den,
    )
}

/// Shooting data for H_{V,L}.
///
/// Besides W(λ) at the box ends, the propagator offers one monitor per
/// interior cut of the potential region: the box is opened at the cut, the
/// boundary condition closes the outer ports, and the monitor is the
/// resulting unitary on the two sides of the cut. A state localised inside
/// the potential region winds the end monitor only over an exponentially
/// narrow λ window, but winds a nearby cut monitor over an O(1) window.
pub struct BoxPropagator<'a> {
    pot: &'a Potential,
    l: f64,
    bc: BoundaryCondition,
    /// (a, b, smooth panel) pieces covering the potential region.
    pieces: Vec<(f64, f64, (f64, f64))>,
    region: Option<(f64, f64)>,
    tol: OdeTolerance,
}

const MAX_PIECE: f64 = 0.5;

impl<'a> BoxPropagator<'a> {
    pub fn new(pot: &'a Potential, bc: &BoundaryCondition, l: f64) -> Self {
        let mut pieces = Vec::new();
        let mut region = None;
        if !pot.is_zero() {
            let (lo, hi) = pot.support();
            let (lo, hi) = (lo.max(-l), hi.min(l));
            if hi > lo {
                region = Some((lo, hi));
                let mut bps: Vec<f64> = pot.breakpoints().into_iter().filter(|&x| x > lo && x < hi).collect();
                bps.insert(0, lo);
                bps.push(hi);
                for w in bps.windows(2) {
                    let n = ((w[1] - w[0]) / MAX_PIECE).ceil().max(1.0) as usize;
                    for j in 0..n {
                        let a = w[0] + (w[1] - w[0]) * j as f64 / n as f64;
                        let b = if j + 1 == n { w[1] } else { w[0] + (w[1] - w[0]) * (j + 1) as f64 / n as f64 };
                        pieces.push((a, b, (w[0], w[1])));
                    }
                }
            }
        }
        BoxPropagator { pot, l, bc: bc.clone(), pieces, region, tol: OdeTolerance::default() }
    }

    /// Port length scale at λ; keeps the eigenphase speed in √|λ| of order L.
    fn scale(&self, lambda: f64) -> f64 {
        1.0 / (lambda.abs() + self.l.powi(-2)).sqrt()
    }

    fn u0_adj(&self, scale: f64) -> Mat2 {
        let b = self.bc.b.map(|x| I * x / scale);
        (-((self.bc.a + b).try_inverse().expect("A + iB is invertible for self-adjoint conditions") * (self.bc.a - b))).adjoint()
    }

    fn segment_maps(&self, lambda: f64, scale: f64) -> Result<Vec<Mat2>> {
        let Some((lo, hi)) = self.region else {
            return Ok(vec![free_segment(lambda, 2.0 * self.l, scale)]);
        };
        let mut maps = Vec::with_capacity(self.pieces.len() + 2);
        maps.push(free_segment(lambda, lo + self.l, scale));
        for &(a, b, panel) in &self.pieces {
            let y = ode::fundamental(self.pot, lambda, a, b, panel, self.tol)?;
            maps.push(x_from_basis([1.0, 0.0], [0.0, 1.0], [y[0], y[2]], [y[1], y[3]], scale));
        }
        maps.push(free_segment(lambda, self.l - hi, scale));
        Ok(maps)
    }

    /// X(λ) for the whole box with unit port scale; ports ordered (L, −L)
    /// like Γ₁.
    pub fn x_matrix(&self, lambda: f64) -> Result<Mat2> {
        let maps = self.segment_maps(lambda, 1.0)?;
        Ok(maps[1..].iter().fold(maps[0], |acc, m| star(&acc, m)))
    }

    /// W(λ) = U₀* X(λ).
    pub fn w_matrix(&self, lambda: f64) -> Result<Mat2> {
        Ok(self.u0_adj(1.0) * self.x_matrix(lambda)?)
    }

    /// W(λ) followed by the cut monitors, all with the λ-dependent port
    /// scale; a cut monitor is `None` where the outer loop is numerically
    /// decoupled from the cut.
    pub fn monitors(&self, lambda: f64) -> Result<Vec<Option<Mat2>>> {
        let scale = self.scale(lambda);
        let u0_adj = self.u0_adj(scale);
        let maps = self.segment_maps(lambda, scale)?;
        let n = maps.len();
        let mut prefix = Vec::with_capacity(n);
        prefix.push(maps[0]);
        for m in &maps[1..] {
            let next = star(prefix.last().unwrap(), m);
            prefix.push(next);
        }
        let mut suffix = vec![maps[n - 1]; n];
        for j in (0..n - 1).rev() {
            suffix[j] = star(&maps[j], &suffix[j + 1]);
        }
        let mut out = Vec::with_capacity(n);
        out.push(Some(u0_adj * prefix[n - 1]));
        for j in 0..n - 1 {
            out.push(cut_monitor(&u0_adj, &prefix[j], &suffix[j + 1]));
        }
        Ok(out)
    }
}

fn cut_monitor(u0_adj: &Mat2, p: &Mat2, q: &Mat2) -> Option<Mat2> {
    let zero = C64::new(0.0, 0.0);
    let d = Mat2::new(q[(0, 0)], zero, zero, p[(1, 1)]);
    let e = Mat2::new(zero, q[(0, 1)], p[(1, 0)], zero);
    let f = Mat2::new(zero, p[(0, 1)], q[(1, 0)], zero);
    let inv = (Mat2::identity() - u0_adj * d).try_inverse()?;
    let y = Mat2::new(p[(0, 0)], zero, zero, q[(1, 1)]) + f * inv * u0_adj * e;
    let m = sigma_x() * y;
    (crate::linalg::unitarity_defect(&m) < 1e-9).then_some(m)
}

/// ½[(A − iB) + (A + iB) X(λ)]: the matrix A Γ₁ − B Γ₂ on the solution space.
pub fn characteristic_matrix(bc: &BoundaryCondition, x: &Mat2) -> Mat2 {
    let ib = bc.b.map(|v| I * v);
    ((bc.a - ib) + (bc.a + ib) * x).scale(0.5)
}

fn lift(target: f64, raw: f64) -> f64 {
    raw + TAU * ((target - raw) / TAU).round()
}

fn match_phases(prev: [f64; 2], raw: [f64; 2]) -> ([f64; 2], f64) {
    let a = [lift(prev[0], raw[0]), lift(prev[1], raw[1])];
    let b = [lift(prev[0], raw[1]), lift(prev[1], raw[0])];
    let cost = |c: &[f64; 2]| (c[0] - prev[0]).powi(2) + (c[1] - prev[1]).powi(2);
    let best = if cost(&a) <= cost(&b) { a } else { b };
    let jump = (best[0] - prev[0]).abs().max((best[1] - prev[1]).abs());
    (best, jump)
}

#[derive(Debug, Clone, Copy)]
struct Crossing {
    x: f64,
    monitor: usize,
    /// Phase speed over the bracketing step.
    speed: f64,
}

/// Points in [x0, x1] where one of the unitary families in `w(x)` has
/// eigenvalue 1, one entry per eigenphase crossing.
fn crossings<F>(w: &F, x0: f64, x1: f64, h_max: f64) -> Result<Vec<Crossing>>
where
    F: Fn(f64) -> Result<Vec<Option<Mat2>>>,
{
    let mut found = Vec::new();
    if !(x1 > x0) {
        return Ok(found);
    }
    let h_min = 1e-12 * (x1 - x0).max(1.0);
    let phases = |ms: Vec<Option<Mat2>>| -> Vec<Option<[f64; 2]>> { ms.iter().map(|m| m.as_ref().map(unitary_eigenphases)).collect() };
    let mut x = x0;
    let mut th = phases(w(x0)?);
    let mut h = h_max;
    while x < x1 {
        let xn = (x + h).min(x1);
        let raw = phases(w(xn)?);
        let mut cand = Vec::with_capacity(raw.len());
        let mut jump: f64 = 0.0;
        for (prev, r) in th.iter().zip(&raw) {
            match (prev, r) {
                (Some(p), Some(r)) => {
                    let (c, j) = match_phases(*p, *r);
                    jump = jump.max(j);
                    cand.push(Some(c));
                }
                (_, r) => cand.push(*r),
            }
        }
        if jump > 0.25 * std::f64::consts::PI && xn - x > h_min {
            h = 0.5 * (xn - x);
            continue;
        }
        for (mi, (prev, next)) in th.iter().zip(&cand).enumerate() {
            let (Some(p), Some(c)) = (prev, next) else { continue };
            let count: i64 = (0..2).map(|j| ((c[j] / TAU).floor() - (p[j] / TAU).floor()).abs() as i64).sum();
            if count == 0 {
                continue;
            }
            let speed = (0..2).map(|j| (c[j] - p[j]).abs()).fold(0.0, f64::max) / (xn - x);
            let at = |y: f64| monitor_at(w, y, mi);
            // a failed evaluation inside the step leaves the crossing to the other monitors
            if let Ok(roots) = step_roots(&at, x, xn, *p, *c, count as usize) {
                found.extend(roots.into_iter().map(|r| Crossing { x: r, monitor: mi, speed }));
            }
        }
        let speed = jump / (xn - x);
        th = cand;
        x = xn;
        h = (1.5 * h).min(h_max).min(0.3 / speed.max(1e-300)).max(h_min);
    }
    found.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    Ok(found)
}

fn monitor_at<F>(w: &F, y: f64, index: usize) -> Result<Mat2>
where
    F: Fn(f64) -> Result<Vec<Option<Mat2>>>,
{
    w(y)?.swap_remove(index).ok_or(Error::RootIsolationFailure { lo: y, hi: y })
}

/// sin(θ₁/2) sin(θ₂/2) = −det(W − I) e^{−iα}/4 with α = (θ₁ + θ₂)/2 lifted
/// next to `alpha_guess`; real, and it changes sign at each simple crossing.
fn realified(w: &Mat2, alpha_guess: f64) -> f64 {
    let alpha = 0.5 * lift(2.0 * alpha_guess, w.determinant().arg());
    let d = (w - Mat2::identity()).determinant() * C64::from_polar(1.0, -alpha);
    -0.25 * d.re
}

/// Roots inside one accepted scan step that carried `count` crossings.
fn step_roots<G>(w: &G, xa: f64, xb: f64, ta: [f64; 2], tb: [f64; 2], count: usize) -> Result<Vec<f64>>
where
    G: Fn(f64) -> Result<Mat2>,
{
    let (aa, ab) = (0.5 * (ta[0] + ta[1]), 0.5 * (tb[0] + tb[1]));
    let alpha = |y: f64| aa + (ab - aa) * (y - xa) / (xb - xa);
    let r = |y: f64| -> Result<f64> { Ok(realified(&w(y)?, alpha(y))) };
    let valid = |y: f64, need: usize| -> Result<bool> {
        let sv = singular_values(&(w(y)? - Mat2::identity()));
        Ok(sv[need - 1] < 1e-7)
    };
    let n = if count == 1 { 1 } else { 8 };
    let xs: Vec<f64> = (0..=n).map(|i| xa + (xb - xa) * i as f64 / n as f64).collect();
    let mut rs = Vec::with_capacity(n + 1);
    rs.push((0.5 * ta[0]).sin() * (0.5 * ta[1]).sin());
    for &y in &xs[1..n] {
        rs.push(r(y)?);
    }
    rs.push((0.5 * tb[0]).sin() * (0.5 * tb[1]).sin());
    let mut roots = Vec::new();
    for i in 0..n {
        if rs[i] == 0.0 {
            roots.push(xs[i]);
        } else if rs[i].signum() != rs[i + 1].signum() && rs[i + 1] != 0.0 {
            let y = illinois(&r, xs[i], xs[i + 1], rs[i], rs[i + 1])?;
            if valid(y, 1)? {
                roots.push(y);
            }
        }
    }
    if rs[n] == 0.0 {
        roots.push(xb);
    }
    if roots.len() + 2 <= count {
        // two roots closer than the sampling: zoom in on each local minimum of |R|
        for i in 0..=n {
            let left = if i > 0 { rs[i - 1].abs() } else { f64::INFINITY };
            let right = if i < n { rs[i + 1].abs() } else { f64::INFINITY };
            if rs[i].abs() <= left && rs[i].abs() <= right {
                let pair = zoom_pair(&r, xs[i.saturating_sub(1)], xs[(i + 1).min(n)])?;
                let fresh = |y: f64, roots: &[f64]| roots.iter().all(|&z| (z - y).abs() > 1e-9 * (1.0 + y.abs()));
                match pair {
                    ZoomResult::Split(a, b) => {
                        for y in [a, b] {
                            if valid(y, 1)? && fresh(y, &roots) {
                                roots.push(y);
                            }
                        }
                    }
                    ZoomResult::Double(y) => {
                        if valid(y, 2)? && fresh(y, &roots) {
                            roots.push(y);
                            roots.push(y);
                        }
                    }
                    ZoomResult::None => {}
                }
            }
        }
    }
    Ok(roots)
}

enum ZoomResult {
    Split(f64, f64),
    Double(f64),
    None,
}

/// Narrows [a, b] around the minimum of |R| until R changes sign twice or
/// the interval collapses onto a touching zero.
fn zoom_pair<R: Fn(f64) -> Result<f64>>(r: &R, a: f64, b: f64) -> Result<ZoomResult> {
    let (mut a, mut b) = (a, b);
    let n = 8;
    for _ in 0..60 {
        let xs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        let rs = xs.iter().map(|&y| r(y)).collect::<Result<Vec<f64>>>()?;
        let changes: Vec<usize> = (0..n).filter(|&i| rs[i] != 0.0 && rs[i].signum() != rs[i + 1].signum()).collect();
        if changes.len() >= 2 {
            let (i, j) = (changes[0], changes[1]);
            let y1 = illinois(r, xs[i], xs[i + 1], rs[i], rs[i + 1])?;
            let y2 = illinois(r, xs[j], xs[j + 1], rs[j], rs[j + 1])?;
            return Ok(ZoomResult::Split(y1, y2));
        }
        if changes.len() == 1 {
            return Ok(ZoomResult::None);
        }
        let k = (0..=n).min_by(|&p, &q| rs[p].abs().total_cmp(&rs[q].abs())).unwrap();
        let (na, nb) = (xs[k.saturating_sub(1)], xs[(k + 1).min(n)]);
        if nb - na <= 1e-14 * (1.0 + na.abs()) {
            return Ok(ZoomResult::Double(xs[k]));
        }
        a = na;
        b = nb;
    }
    Ok(ZoomResult::Double(0.5 * (a + b)))
}

fn illinois<R: Fn(f64) -> Result<f64>>(g: &R, xa: f64, xb: f64, ga: f64, gb: f64) -> Result<f64> {
    let (mut a, mut b, mut fa, mut fb) = (xa, xb, ga, gb);
    let tol = 1e-15 * (1.0 + a.abs().max(b.abs()));
    let mut side = 0i32;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mut c = b - fb * (b - a) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let fc = g(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Groups crossings of the same eigenvalue seen by one or more monitors. The
/// multiplicity is the largest number of crossings a single monitor shows in
/// the group; the position comes from the slowest such crossing.
fn cluster(found: &[Crossing]) -> Result<Vec<(f64, usize)>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < found.len() {
        let mut j = i + 1;
        while j < found.len() && (found[j].x - found[j - 1].x).abs() <= 1e-7 * (1.0 + found[i].x.abs()) {
            j += 1;
        }
        let group = &found[i..j];
        let mut counts = std::collections::BTreeMap::new();
        for c in group {
            *counts.entry(c.monitor).or_insert(0usize) += 1;
        }
        let mult = *counts.values().max().unwrap();
        if mult > 2 {
            return Err(Error::RootIsolationFailure { lo: group[0].x, hi: group[group.len() - 1].x });
        }
        let best = group
            .iter()
            .filter(|c| counts[&c.monitor] == mult)
            .min_by(|a, b| a.speed.partial_cmp(&b.speed).unwrap())
            .unwrap();
        out.push((best.x, mult));
        i = j;
    }
    Ok(out)
}

fn signed_square(s: f64) -> f64 {
    s * s.abs()
}

fn signed_root(lambda: f64) -> f64 {
    lambda.signum() * lambda.abs().sqrt()
}

fn scan_step(l: f64) -> f64 {
    std::f64::consts::PI / (8.0 * l)
}

fn shooting_step(l: f64) -> f64 {
    std::f64::consts::PI / (32.0 * l)
}

fn check_length(l: f64) -> Result<()> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidArgument(format!("box half-length must be positive, got {l}")));
    }
    Ok(())
}

/// Eigenvalues of H_L up to `cutoff`.
pub fn free_spectrum(bc: &BoundaryCondition, l: f64, cutoff: f64) -> Result<BoxSpectrum> {
    check_length(l)?;
    let lower = bc.lower_bound(l);
    if !(cutoff > lower) {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} below the spectral bound {lower}")));
    }
    let zero = Potential::zero();
    let prop = BoxPropagator::new(&zero, bc, l);
    let w_shoot = |s: f64| prop.monitors(signed_square(s));
    let mut levels = Vec::new();

    // λ < 0 on the imaginary-√λ segment, then λ = 0
    if lower < 0.0 {
        let s0 = -(-lower).sqrt() - 1e-6;
        let s1 = if cutoff < 0.0 { -(-cutoff).sqrt() } else { -1e-7 };
        let found = crossings(&w_shoot, s0, s1, shooting_step(l).min((s1 - s0) / 16.0))?;
        for (s, m) in cluster(&found)? {
            levels.push(Level { value: signed_square(s), multiplicity: m });
        }
    }
    if cutoff >= 0.0 {
        let sv = singular_values(&(prop.w_matrix(0.0)? - Mat2::identity()));
        let m = sv.iter().filter(|&&s| s < 1e-10).count();
        if m > 0 {
            levels.push(Level { value: 0.0, multiplicity: m });
        }
    }

    // λ > 0 from the secular matrix e^{2iLk} I + U(k) σ_x
    if cutoff > 0.0 {
        let kmax = cutoff.sqrt();
        let vsec = |k: f64| -> Result<Vec<Option<Mat2>>> {
            let u = bc.u_matrix_k(C64::new(k, 0.0))?;
            let d = (-2.0 * I * k * l).exp();
            Ok(vec![Some(-(u * sigma_x()).map(|x| x * d))])
        };
        let found: Vec<Crossing> = crossings(&vsec, 1e-9, kmax, scan_step(l))?.into_iter().filter(|c| c.x > 1e-8).collect();
        let positive = cluster(&found)?;
        let bound = 2.0 * std::f64::consts::PI / l;
        for w in positive.windows(2) {
            if w[1].0 - w[0].0 > bound {
                return Err(Error::MissedRootSuspected { lo: w[0].0 * w[0].0, hi: w[1].0 * w[1].0, gap: w[1].0 - w[0].0 });
            }
        }
        for (k, m) in positive {
            levels.push(Level { value: k * k, multiplicity: m });
        }
    }
    levels.retain(|lv| lv.value <= cutoff);
    levels.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    Ok(BoxSpectrum { l, bc: bc.clone(), cutoff, levels, perturbed: false })
}

/// Eigenvalues of H_{V,L} up to `cutoff` by shooting.
pub fn perturbed_spectrum(pot: &Potential, bc: &BoundaryCondition, l: f64, cutoff: f64) -> Result<BoxSpectrum> {
    check_length(l)?;
    let lower = bc.lower_bound(l) + pot.min_value();
    if !(cutoff > lower) {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} below the spectral bound {lower}")));
    }
    let prop = BoxPropagator::new(pot, bc, l);
    let w = |s: f64| prop.monitors(signed_square(s));
    let s0 = signed_root(lower.min(0.0)) - 1e-3;
    let s1 = signed_root(cutoff);
    let levels = cluster(&crossings(&w, s0, s1, shooting_step(l))?)?
        .into_iter()
        .map(|(s, m)| Level { value: signed_square(s), multiplicity: m })
        .filter(|lv| lv.value <= cutoff)
        .collect();
    Ok(BoxSpectrum { l, bc: bc.clone(), cutoff, levels, perturbed: true })
}

/// Canonical energy difference at Fermi energy ν.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDecomposition {
    pub l: f64,
    pub nu: f64,
    /// Σ_{μ≤ν} f(μ) − Σ_{λ≤ν} f(λ)
    pub e_l: f64,
    /// Number of perturbed eigenvalues ≤ ν.
    pub m: usize,
    /// Number of free eigenvalues ≤ ν.
    pub n: usize,
    /// N − M
    pub xi_l: i64,
    /// f(ν)
    pub f_nu: f64,
    pub fumi_ref: Option<f64>,
    pub fse_ref: Option<f64>,
}

impl EnergyDecomposition {
    /// E_L + f(ν) ξ_L
    pub fn compensated(&self) -> f64 {
        self.e_l + self.f_nu * self.xi_l as f64
    }
}

fn margin(nu: f64) -> f64 {
    1e-6 * (1.0 + nu.abs())
}

/// E_L and the eigenvalue counts; ν must not be an eigenvalue.
pub fn energy_difference(pot: &Potential, bc: &BoundaryCondition, l: f64, nu: f64, f: &WeightFunction) -> Result<EnergyDecomposition> {
    let free = free_spectrum(bc, l, nu + margin(nu))?;
    let pert = perturbed_spectrum(pot, bc, l, nu + margin(nu))?;
    energy_from_spectra(&free, &pert, nu, f)
}

pub fn energy_from_spectra(free: &BoxSpectrum, pert: &BoxSpectrum, nu: f64, f: &WeightFunction) -> Result<EnergyDecomposition> {
    let tol = 1e-10 * (1.0 + nu.abs());
    if free.distance_to(nu) <= tol || pert.distance_to(nu) <= tol {
        return Err(Error::NuOnEigenvalue(nu));
    }
    let sum = |s: &BoxSpectrum| -> f64 {
        s.levels.iter().filter(|lv| lv.value <= nu).map(|lv| lv.multiplicity as f64 * f.value_real(lv.value)).sum()
    };
    let m = pert.count_at_most(nu);
    let n = free.count_at_most(nu);
    Ok(EnergyDecomposition {
        l: free.l,
        nu,
        e_l: sum(pert) - sum(free),
        m,
        n,
        xi_l: n as i64 - m as i64,
        f_nu: f.value_real(nu),
        fumi_ref: None,
        fse_ref: None,
    })
}

/// Like `energy_from_spectra`, but levels within 1e−10(1+|ν|) of ν count
/// as occupied, so ν may sit on an eigenvalue.
pub fn energy_inclusive(free: &BoxSpectrum, pert: &BoxSpectrum, nu: f64, f: &WeightFunction) -> EnergyDecomposition {
    let top = nu + 1e-10 * (1.0 + nu.abs());
    let occupied = |s: &BoxSpectrum| -> (f64, usize) {
        s.levels.iter().filter(|lv| lv.value <= top).fold((0.0, 0), |(e, n), lv| {
            (e + lv.multiplicity as f64 * f.value_real(lv.value), n + lv.multiplicity)
        })
    };
    let (ep, m) = occupied(pert);
    let (ef, n) = occupied(free);
    EnergyDecomposition {
        l: free.l,
        nu,
        e_l: ep - ef,
        m,
        n,
        xi_l: n as i64 - m as i64,
        f_nu: f.value_real(nu),
        fumi_ref: None,
        fse_ref: None,
    }
}

/// Σ_{μ≤ν}(f(μ) − f(ν)) − Σ_{λ≤ν}(f(λ) − f(ν)), which equals E_L + f(ν) ξ_L
/// and is continuous when ν crosses an eigenvalue, so it is defined for ν on
/// the spectrum as well.
pub fn compensated_energy(free: &BoxSpectrum, pert: &BoxSpectrum, nu: f64, f: &WeightFunction) -> f64 {
    let f_nu = f.value_real(nu);
    let tol = 1e-10 * (1.0 + nu.abs());
    let sum = |s: &BoxSpectrum| -> f64 {
        s.levels
            .iter()
            .filter(|lv| lv.value <= nu + tol)
            .map(|lv| lv.multiplicity as f64 * (f.value_real(lv.value) - f_nu))
            .sum()
    };
    sum(pert) - sum(free)
}

/// Micro-canonical energy difference for a closed shell of `n_particles`.
#[derive(Debug, Clone, PartialEq)]
pub struct Microcanonical {
    /// Σ_{k≤N} (μ_k − λ_k)
    pub energy: f64,
    /// Fermi energy λ_N.
    pub nu: f64,
    pub canonical: EnergyDecomposition,
    /// sign(N − M) Σ_{min(N,M)<k≤max(N,M)} (μ_k − ν)
    pub correction: f64,
}

impl Microcanonical {
    /// |energy − (E_L + ν ξ_L + correction)|
    pub fn relation_defect(&self) -> f64 {
        (self.energy - (self.canonical.compensated() + self.correction)).abs()
    }
}

pub fn microcanonical(pot: &Potential, bc: &BoundaryCondition, l: f64, n_particles: usize) -> Result<Microcanonical> {
    if n_particles == 0 {
        return Err(Error::InvalidArgument("need at least one particle".into()));
    }
    // grow the cutoff until both spectra hold N + 1 levels
    let mut cutoff = (n_particles as f64 * std::f64::consts::PI / (2.0 * l)).powi(2) + pot.max_value() + 1.0;
    let (free, pert) = loop {
        let free = free_spectrum(bc, l, cutoff)?;
        let pert = perturbed_spectrum(pot, bc, l, cutoff)?;
        if free.eigenvalues().len() > n_particles && pert.eigenvalues().len() > n_particles {
            break (free, pert);
        }
        if cutoff > 1e8 {
            return Err(Error::InsufficientSpectrum { needed: n_particles, available: free.eigenvalues().len().min(pert.eigenvalues().len()) });
        }
        cutoff = 2.0 * cutoff + 1.0;
    };
    let lam = free.eigenvalues();
    let mu = pert.eigenvalues();
    let nu = lam[n_particles - 1];
    if lam[n_particles] - nu < 1e-9 * (1.0 + nu.abs()) {
        return Err(Error::InvalidArgument(format!("{n_particles} particles leave a degenerate level partly filled")));
    }
    let energy: f64 = (0..n_particles).map(|k| mu[k] - lam[k]).sum();
    let id = WeightFunction::identity();
    let m = pert.count_at_most(nu);
    let sum = |s: &BoxSpectrum| -> f64 {
        s.levels.iter().filter(|lv| lv.value <= nu).map(|lv| lv.multiplicity as f64 * lv.value).sum()
    };
    let canonical = EnergyDecomposition {
        l,
        nu,
        e_l: sum(&pert) - sum(&free),
        m,
        n: n_particles,
        xi_l: n_particles as i64 - m as i64,
        f_nu: id.value_real(nu),
        fumi_ref: None,
        fse_ref: None,
    };
    let (lo, hi) = (m.min(n_particles), m.max(n_particles));
    let sign = if n_particles >= m { 1.0 } else { -1.0 };
    let correction = sign * (lo..hi).map(|k| mu[k] - nu).sum::<f64>();
    Ok(Microcanonical { energy, nu, canonical, correction })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_of_free_segments_is_free() {
        for &lambda in &[3.0, -2.0, 0.0, -50.0, -0.7] {
            let joined = star(&free_segment(lambda, 1.3, 0.7), &free_segment(lambda, 2.2, 0.7));
            assert!((joined - free_segment(lambda, 3.5, 0.7)).norm() < 1e-12, "λ = {lambda}");
        }
    }

    #[test]
    fn segment_maps_are_unitary() {
        for &lambda in &[3.0, -2.0, 0.0, -900.0] {
            assert!(crate::linalg::unitarity_defect(&free_segment(lambda, 40.0, 0.3)) < 1e-12);
        }
    }

    #[test]
    fn dirichlet_unit_box() {
        let s = free_spectrum(&BoundaryCondition::dirichlet(), 1.0, 100.0).unwrap();
        let e = s.eigenvalues();
        for (j, v) in e.iter().enumerate() {
            let exact = ((j + 1) as f64 * std::f64::consts::PI / 2.0).powi(2);
            assert!((v - exact).abs() < 1e-10 * exact);
        }
        assert_eq!(e.len(), 6);
    }

    #[test]
    fn periodic_levels_are_double() {
        let s = free_spectrum(&BoundaryCondition::periodic(), 1.0, 50.0).unwrap();
        assert_eq!(s.levels[0], Level { value: 0.0, multiplicity: 1 });
        for (j, lv) in s.levels.iter().enumerate().skip(1) {
            let exact = (j as f64 * std::f64::consts::PI).powi(2);
            assert_eq!(lv.multiplicity, 2);
            assert!((lv.value - exact).abs() < 1e-10 * exact);
        }
    }

    #[test]
    fn shooting_agrees_with_secular_route() {
        let bc = BoundaryCondition::robin(0.7, -0.4);
        let free = free_spectrum(&bc, 3.0, 30.0).unwrap();
        let shot = perturbed_spectrum(&Potential::zero(), &bc, 3.0, 30.0).unwrap();
        let (a, b) = (free.eigenvalues(), shot.eigenvalues());
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn nu_on_eigenvalue_is_rejected() {
        let p = Potential::square_well(-2.0, -1.0, 1.0).unwrap();
        let nu = (std::f64::consts::PI / 2.0).powi(2);
        let r = energy_difference(&p, &BoundaryCondition::dirichlet(), 1.0, nu, &WeightFunction::identity());
        assert_eq!(r, Err(Error::NuOnEigenvalue(nu)));
    }
}
