//! Admissible potentials and weight functions.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::quad;

const TAIL_MASS: f64 = 1e-12;
const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Zero,
    /// Constant `value` on [left, right].
    SquareWell { value: f64, left: f64, right: f64 },
    /// amplitude * exp(-((x - center)/width)^2)
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// amplitude * sech^2((x - center)/width)
    PoschlTeller { amplitude: f64, center: f64, width: f64 },
    /// Linear interpolation between (xs[i], vs[i]); zero outside [xs[0], xs[n-1]].
    Table { xs: Vec<f64>, vs: Vec<f64> },
}

/// A real, bounded potential with (effectively) compact support.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    shape: Shape,
    lo: f64,
    hi: f64,
}

impl Potential {
    pub fn zero() -> Self {
        Potential { shape: Shape::Zero, lo: 0.0, hi: 0.0 }
    }

    pub fn square_well(value: f64, left: f64, right: f64) -> Result<Self> {
        if !(left < right) || !value.is_finite() {
            return Err(Error::InvalidPotential(format!("square well needs left < right, got [{left}, {right}]")));
        }
        Ok(Self::from_shape(Shape::SquareWell { value, left, right }))
    }

    pub fn gaussian(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !amplitude.is_finite() || !center.is_finite() {
            return Err(Error::InvalidPotential("gaussian width must be positive".into()));
        }
        Ok(Self::from_shape(Shape::Gaussian { amplitude, center, width }))
    }

    pub fn poschl_teller(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !amplitude.is_finite() || !center.is_finite() {
            return Err(Error::InvalidPotential("Pöschl–Teller width must be positive".into()));
        }
        Ok(Self::from_shape(Shape::PoschlTeller { amplitude, center, width }))
    }

    pub fn table(xs: Vec<f64>, vs: Vec<f64>) -> Result<Self> {
        if xs.len() != vs.len() || xs.len() < 2 {
            return Err(Error::InvalidPotential("table needs at least two (x, V) rows of equal length".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPotential("table positions must be strictly increasing".into()));
        }
        if xs.iter().chain(vs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential("table contains non-finite values".into()));
        }
        Ok(Self::from_shape(Shape::Table { xs, vs }))
    }

    fn from_shape(shape: Shape) -> Self {
        let (lo, hi) = match &shape {
            Shape::Zero => (0.0, 0.0),
            Shape::SquareWell { value, left, right } => {
                if *value == 0.0 {
                    return Potential::zero();
                }
                (*left, *right)
            }
            Shape::Gaussian { amplitude, center, width } => {
                if *amplitude == 0.0 {
                    return Potential::zero();
                }
                // erfc(x) <= exp(-x^2)/(x sqrt(pi)) bounds each tail
                let scale = amplitude.abs() * width;
                let mut x: f64 = 1.0;
                while scale * (-x * x).exp() / x >= 0.5 * TAIL_MASS {
                    x += 0.01;
                }
                (center - x * width, center + x * width)
            }
            Shape::PoschlTeller { amplitude, center, width } => {
                if *amplitude == 0.0 {
                    return Potential::zero();
                }
                let r = 0.5 * width * (4.0 * amplitude.abs() * width / TAIL_MASS).ln().max(0.0);
                (center - r, center + r)
            }
            Shape::Table { xs, vs } => {
                if vs.iter().all(|v| *v == 0.0) {
                    return Potential::zero();
                }
                (xs[0], xs[xs.len() - 1])
            }
        };
        Potential { shape, lo, hi }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn kind_name(&self) -> &'static str {
        match self.shape {
            Shape::Zero => "zero",
            Shape::SquareWell { .. } => "square-well",
            Shape::Gaussian { .. } => "gaussian",
            Shape::PoschlTeller { .. } => "poeschl-teller",
            Shape::Table { .. } => "table",
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.shape, Shape::Zero)
    }

    /// Interval outside of which V vanishes (after truncation).
    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn support_radius(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Support endpoints plus interior points where V is not smooth, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Zero => vec![],
            Shape::Table { xs, .. } => xs.clone(),
            _ => vec![self.lo, self.hi],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::SquareWell { value, .. } => *value,
            Shape::Gaussian { amplitude, center, width } => {
                let u = (x - center) / width;
                amplitude * (-u * u).exp()
            }
            Shape::PoschlTeller { amplitude, center, width } => {
                let c = ((x - center) / width).cosh();
                amplitude / (c * c)
            }
            Shape::Table { xs, vs } => {
                let j = xs.partition_point(|&t| t <= x).clamp(1, xs.len() - 1);
                let (x0, x1) = (xs[j - 1], xs[j]);
                let s = (x - x0) / (x1 - x0);
                vs[j - 1] + s * (vs[j] - vs[j - 1])
            }
        }
    }

    /// Value just inside the panel [a, b] at the endpoint `x` (a or b), so that
    /// jump discontinuities at breakpoints are sampled from the correct side.
    pub fn eval_in_panel(&self, x: f64, a: f64, b: f64) -> f64 {
        let eps = 1e-13 * (b - a).max(1e-300);
        self.eval(x.clamp(a + eps, b - eps))
    }

    pub fn sup_norm(&self) -> f64 {
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::SquareWell { value, .. } => value.abs(),
            Shape::Gaussian { amplitude, .. } | Shape::PoschlTeller { amplitude, .. } => amplitude.abs(),
            Shape::Table { vs, .. } => vs.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn min_value(&self) -> f64 {
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::SquareWell { value, .. } => value.min(0.0),
            Shape::Gaussian { amplitude, .. } | Shape::PoschlTeller { amplitude, .. } => amplitude.min(0.0),
            Shape::Table { vs, .. } => vs.iter().fold(0.0, |m, v| m.min(*v)),
        }
    }

    pub fn max_value(&self) -> f64 {
        -self.scaled(-1.0).min_value()
    }

    fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mut pts = self.breakpoints();
        if self.lo < 0.0 && self.hi > 0.0 && !pts.contains(&0.0) {
            pts.push(0.0);
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        let mut sum = 0.0;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            sum += quad::adaptive(a, b, NORM_TOL, &mut |x| g(x) * self.eval_in_panel(x, a, b))
                .unwrap_or_else(|_| quad::gl(a, b, 200, |x| g(x) * self.eval_in_panel(x, a, b)));
        }
        sum
    }

    /// ∫ |x|^n |V(x)| dx
    pub fn moment_norm(&self, n: u32) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mut pts = self.breakpoints();
        if self.lo < 0.0 && self.hi > 0.0 && !pts.contains(&0.0) {
            pts.push(0.0);
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        let mut sum = 0.0;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mut f = |x: f64| x.abs().powi(n as i32) * self.eval_in_panel(x, a, b).abs();
            sum += quad::adaptive(a, b, NORM_TOL, &mut f).unwrap_or_else(|_| quad::gl(a, b, 200, f));
        }
        sum
    }

    pub fn l1_norm(&self) -> f64 {
        self.moment_norm(0)
    }

    /// ‖V_−‖₁ with V_− = max(−V, 0).
    pub fn negative_part_norm(&self) -> f64 {
        self.clone().mapped(|v| v.min(0.0)).l1_norm()
    }

    /// ∫ V dx
    pub fn integral(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// Σ_j ‖V χ_[j, j+1]‖₁^q over integer cells.
    pub fn birman_solomyak(&self, q: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let first = self.lo.floor() as i64;
        let last = self.hi.ceil() as i64;
        (first..last)
            .map(|j| {
                let (a, b) = (j as f64, (j + 1) as f64);
                let mut pts: Vec<f64> = self.breakpoints().into_iter().filter(|&x| x > a && x < b).collect();
                pts.insert(0, a);
                pts.push(b);
                let mut m = 0.0;
                for w in pts.windows(2) {
                    let (c, d) = (w[0], w[1]);
                    let mut f = |x: f64| self.eval_in_panel(x, c, d).abs();
                    m += quad::adaptive(c, d, NORM_TOL, &mut f).unwrap_or_else(|_| quad::gl(c, d, 200, f));
                }
                m.powf(q)
            })
            .sum()
    }

    /// Whether the preset is declared symmetric about the origin.
    pub fn is_even(&self) -> bool {
        match &self.shape {
            Shape::Zero => true,
            Shape::SquareWell { left, right, .. } => *left == -*right,
            Shape::Gaussian { center, .. } | Shape::PoschlTeller { center, .. } => *center == 0.0,
            Shape::Table { xs, vs } => {
                let n = xs.len();
                (0..n).all(|i| xs[i] == -xs[n - 1 - i] && vs[i] == vs[n - 1 - i])
            }
        }
    }

    /// ε·V
    pub fn scaled(&self, eps: f64) -> Self {
        self.clone().mapped(|v| eps * v)
    }

    fn mapped<F: Fn(f64) -> f64>(self, g: F) -> Self {
        let shape = match self.shape {
            Shape::Zero => Shape::Zero,
            Shape::SquareWell { value, left, right } => Shape::SquareWell { value: g(value), left, right },
            Shape::Gaussian { amplitude, center, width } => Shape::Gaussian { amplitude: g(amplitude), center, width },
            Shape::PoschlTeller { amplitude, center, width } => Shape::PoschlTeller { amplitude: g(amplitude), center, width },
            Shape::Table { xs, vs } => {
                // sign changes between nodes need an extra node at the crossing
                let mut nx = vec![xs[0]];
                let mut nv = vec![g(vs[0])];
                for i in 1..xs.len() {
                    let (v0, v1) = (vs[i - 1], vs[i]);
                    if v0 * v1 < 0.0 {
                        let x = xs[i - 1] + (xs[i] - xs[i - 1]) * v0 / (v0 - v1);
                        nx.push(x);
                        nv.push(g(0.0));
                    }
                    nx.push(xs[i]);
                    nv.push(g(v1));
                }
                Shape::Table { xs: nx, vs: nv }
            }
        };
        if let Shape::Table { xs, vs } = &shape {
            if vs.iter().all(|v| *v == 0.0) || xs.len() < 2 {
                return Potential::zero();
            }
        }
        let mut p = Potential::from_shape(shape);
        if !p.is_zero() && !matches!(p.shape, Shape::Table { .. }) {
            p.lo = self.lo;
            p.hi = self.hi;
        }
        p
    }

    /// x ↦ V(x − dx)
    pub fn translated(&self, dx: f64) -> Self {
        let shape = match &self.shape {
            Shape::Zero => return Potential::zero(),
            Shape::SquareWell { value, left, right } => Shape::SquareWell { value: *value, left: left + dx, right: right + dx },
            Shape::Gaussian { amplitude, center, width } => Shape::Gaussian { amplitude: *amplitude, center: center + dx, width: *width },
            Shape::PoschlTeller { amplitude, center, width } => Shape::PoschlTeller { amplitude: *amplitude, center: center + dx, width: *width },
            Shape::Table { xs, vs } => Shape::Table { xs: xs.iter().map(|x| x + dx).collect(), vs: vs.clone() },
        };
        Potential { shape, lo: self.lo + dx, hi: self.hi + dx }
    }

    /// x ↦ V(−x)
    pub fn reflected(&self) -> Self {
        let shape = match &self.shape {
            Shape::Zero => return Potential::zero(),
            Shape::SquareWell { value, left, right } => Shape::SquareWell { value: *value, left: -right, right: -left },
            Shape::Gaussian { amplitude, center, width } => Shape::Gaussian { amplitude: *amplitude, center: -center, width: *width },
            Shape::PoschlTeller { amplitude, center, width } => Shape::PoschlTeller { amplitude: *amplitude, center: -center, width: *width },
            Shape::Table { xs, vs } => Shape::Table {
                xs: xs.iter().rev().map(|x| -x).collect(),
                vs: vs.iter().rev().copied().collect(),
            },
        };
        Potential { shape, lo: -self.hi, hi: -self.lo }
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Zero => write!(f, "zero"),
            Shape::SquareWell { value, left, right } => write!(f, "square-well(value={value}, [{left}, {right}])"),
            Shape::Gaussian { amplitude, center, width } => write!(f, "gaussian(amplitude={amplitude}, center={center}, width={width})"),
            Shape::PoschlTeller { amplitude, center, width } => {
                write!(f, "poeschl-teller(amplitude={amplitude}, center={center}, width={width})")
            }
            Shape::Table { xs, .. } => write!(f, "table({} rows)", xs.len()),
        }
    }
}

type ComplexFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

/// Holomorphic weight f with its derivative.
#[derive(Clone)]
pub struct WeightFunction {
    name: String,
    value: ComplexFn,
    derivative: ComplexFn,
}

impl WeightFunction {
    pub fn new<F, G>(name: &str, value: F, derivative: G) -> Self
    where
        F: Fn(C64) -> C64 + Send + Sync + 'static,
        G: Fn(C64) -> C64 + Send + Sync + 'static,
    {
        WeightFunction { name: name.to_string(), value: Arc::new(value), derivative: Arc::new(derivative) }
    }

    /// f(z) = z
    pub fn identity() -> Self {
        Self::new("identity", |z| z, |_| C64::new(1.0, 0.0))
    }

    /// f(z) = z²
    pub fn square() -> Self {
        Self::new("square", |z| z * z, |z| 2.0 * z)
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Self::identity()),
            "square" => Some(Self::square()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, z: C64) -> C64 {
        (self.value)(z)
    }

    pub fn derivative(&self, z: C64) -> C64 {
        (self.derivative)(z)
    }

    pub fn value_real(&self, x: f64) -> f64 {
        self.value(C64::new(x, 0.0)).re
    }

    pub fn derivative_real(&self, x: f64) -> f64 {
        self.derivative(C64::new(x, 0.0)).re
    }
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightFunction({})", self.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn well() -> Potential {
        Potential::square_well(-2.0, -1.0, 1.0).unwrap()
    }

    #[test]
    fn square_well_values() {
        assert_eq!(well().eval(0.0), -2.0);
        assert_eq!(well().eval(3.0), 0.0);
        assert_eq!(Potential::zero().eval(0.3), 0.0);
    }

    #[test]
    fn square_well_norms() {
        assert!((well().moment_norm(0) - 4.0).abs() < 1e-12);
        assert!((well().moment_norm(1) - 2.0).abs() < 1e-12);
        assert!((well().moment_norm(2) - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(Potential::zero().moment_norm(3), 0.0);
        assert!((well().birman_solomyak(0.5) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((well().negative_part_norm() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_norm_and_tail() {
        let g = Potential::gaussian(1.5, 0.0, 0.7).unwrap();
        let exact = 1.5 * 0.7 * std::f64::consts::PI.sqrt();
        assert!((g.l1_norm() - exact).abs() < 1e-11);
        let (lo, hi) = g.support();
        assert!(lo < -3.0 && hi > 3.0);
        assert_eq!(g.eval(hi + 1e-9), 0.0);
    }

    #[test]
    fn poschl_teller_norm() {
        let p = Potential::poschl_teller(-2.0, 0.0, 1.0).unwrap();
        assert!((p.l1_norm() - 4.0).abs() < 1e-11);
        assert!((p.integral() + 4.0).abs() < 1e-11);
    }

    #[test]
    fn table_interpolates_and_vanishes_outside() {
        let t = Potential::table(vec![0.0, 1.0, 2.0], vec![0.0, -1.0, 0.0]).unwrap();
        assert!((t.eval(0.5) + 0.5).abs() < 1e-15);
        assert_eq!(t.eval(2.5), 0.0);
        assert!((t.l1_norm() - 1.0).abs() < 1e-12);
        assert!(Potential::table(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn translation_and_reflection() {
        let g = Potential::gaussian(1.0, 0.5, 1.0).unwrap();
        let t = g.translated(1.0);
        assert!((t.eval(1.7) - g.eval(0.7)).abs() < 1e-15);
        let r = g.reflected();
        assert!((r.eval(-0.3) - g.eval(0.3)).abs() < 1e-15);
    }

    #[test]
    fn scaling_keeps_support() {
        let g = Potential::gaussian(1.0, 0.0, 1.0).unwrap();
        let s = g.scaled(0.1);
        assert_eq!(s.support(), g.support());
        assert!((s.l1_norm() - 0.1 * g.l1_norm()).abs() < 1e-13);
    }

    #[test]
    fn weight_presets() {
        let f = WeightFunction::square();
        assert_eq!(f.value_real(3.0), 9.0);
        assert_eq!(f.derivative_real(3.0), 6.0);
        assert!(WeightFunction::by_name("cubic").is_none());
    }
}
