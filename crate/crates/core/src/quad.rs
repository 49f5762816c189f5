//! Gauss–Legendre rules and adaptive panel quadrature.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};
use crate::linalg::C64;

fn cache() -> &'static Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Legendre nodes and weights on [-1, 1], ascending in the node.
pub fn rule(n: usize) -> Arc<Vec<(f64, f64)>> {
    let n = n.max(1);
    let mut map = cache().lock().expect("quadrature cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let gl = GaussLegendre::new(NonZeroUsize::new(n).unwrap());
            let mut v: Vec<(f64, f64)> = gl.as_node_weight_pairs().to_vec();
            v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            Arc::new(v)
        })
        .clone()
}

/// Nodes and weights of an n-point rule mapped to [a, b].
pub fn nodes_on(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule(n).iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
}

pub fn gl<F: FnMut(f64) -> f64>(a: f64, b: f64, n: usize, mut f: F) -> f64 {
    nodes_on(a, b, n).into_iter().map(|(x, w)| w * f(x)).sum()
}

pub fn gl_complex<F: FnMut(f64) -> C64>(a: f64, b: f64, n: usize, mut f: F) -> C64 {
    nodes_on(a, b, n).into_iter().map(|(x, w)| f(x) * w).sum()
}

const MAX_DEPTH: usize = 40;

/// Adaptive quadrature: each panel compares a 10-point and a 20-point rule
/// and is bisected until the difference is below its share of `tol`.
pub fn adaptive_complex<F: FnMut(f64) -> C64>(a: f64, b: f64, tol: f64, f: &mut F) -> Result<C64> {
    let mut stack = vec![(a, b, 0usize)];
    let mut total = C64::new(0.0, 0.0);
    let span = (b - a).abs().max(f64::MIN_POSITIVE);
    while let Some((lo, hi, depth)) = stack.pop() {
        let coarse = gl_complex(lo, hi, 10, &mut *f);
        let fine = gl_complex(lo, hi, 20, &mut *f);
        let share = tol * (hi - lo).abs() / span;
        if (fine - coarse).norm() <= share.max(1e-15 * fine.norm()) {
            total += fine;
        } else if depth >= MAX_DEPTH {
            return Err(Error::QuadratureFailure { a: lo, b: hi });
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(total)
}

pub fn adaptive<F: FnMut(f64) -> f64>(a: f64, b: f64, tol: f64, f: &mut F) -> Result<f64> {
    adaptive_complex(a, b, tol, &mut |x| C64::new(f(x), 0.0)).map(|z| z.re)
}

/// Adaptive integration over consecutive breakpoints.
pub fn adaptive_panels<F: FnMut(f64) -> f64>(points: &[f64], tol: f64, f: &mut F) -> Result<f64> {
    let n = points.len().saturating_sub(1).max(1) as f64;
    let mut sum = 0.0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            sum += adaptive(w[0], w[1], tol / n, f)?;
        }
    }
    Ok(sum)
}

/// Breakpoints on [a, b] graded geometrically toward `a`: a, a + d r^m, ..., a + d r, b
/// with d = b - a.
pub fn graded_toward_start(a: f64, b: f64, ratio: f64, levels: usize) -> Vec<f64> {
    let d = b - a;
    let mut pts = vec![a];
    for m in (1..=levels).rev() {
        pts.push(a + d * ratio.powi(m as i32));
    }
    pts.push(b);
    pts
}
