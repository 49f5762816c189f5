//! Self-adjoint boundary conditions A Γ₁φ − B Γ₂φ = 0 at x = ±L, with
//! Γ₁φ = (φ(L), φ(−L)) and Γ₂φ = (−φ′(L), φ′(−L)).

use crate::error::{Error, Result};
use crate::linalg::{real, sqrt_upper, unitary_eigenphases, Mat2, C64, I};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    pub a: Mat2,
    pub b: Mat2,
    name: String,
}

impl BoundaryCondition {
    pub fn new(a: Mat2, b: Mat2) -> Result<Self> {
        Self::named(a, b, "explicit")
    }

    fn named(a: Mat2, b: Mat2, name: &str) -> Result<Self> {
        let scale = 1.0 + a.norm() + b.norm();
        let sym = a * b.adjoint() - b * a.adjoint();
        if sym.norm() > 1e-12 * scale * scale {
            return Err(Error::InvalidBoundaryCondition(format!("A B* − B A* has norm {:e}", sym.norm())));
        }
        let gram = a * a.adjoint() + b * b.adjoint();
        if gram.determinant().norm() < 1e-12 * scale.powi(4) {
            return Err(Error::InvalidBoundaryCondition("rank(A|B) < 2".into()));
        }
        Ok(BoundaryCondition { a, b, name: name.to_string() })
    }

    pub fn dirichlet() -> Self {
        Self::named(Mat2::identity(), Mat2::zeros(), "dirichlet").unwrap()
    }

    pub fn neumann() -> Self {
        Self::named(Mat2::zeros(), Mat2::identity(), "neumann").unwrap()
    }

    pub fn periodic() -> Self {
        let a = Mat2::new(real(1.0), real(-1.0), real(0.0), real(0.0));
        let b = Mat2::new(real(0.0), real(0.0), real(1.0), real(1.0));
        Self::named(a, b, "periodic").unwrap()
    }

    /// cos θ φ ∓ sin θ φ′ = 0 at each end (θ = 0 Dirichlet, θ = π/2 Neumann).
    pub fn robin(theta_right: f64, theta_left: f64) -> Self {
        let a = Mat2::new(real(theta_right.cos()), real(0.0), real(0.0), real(theta_left.cos()));
        let b = Mat2::new(real(theta_right.sin()), real(0.0), real(0.0), real(theta_left.sin()));
        Self::named(a, b, "robin").unwrap()
    }

    /// The condition whose Cayley transform −(A+iB)⁻¹(A−iB) is the unitary `u0`.
    pub fn from_cayley(u0: Mat2) -> Result<Self> {
        let id = Mat2::identity();
        let a = (id - u0).scale(0.5);
        let b = (id + u0).map(|x| x / (2.0 * I));
        Self::named(a, b, "explicit")
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "dirichlet" => Some(Self::dirichlet()),
            "neumann" => Some(Self::neumann()),
            "periodic" => Some(Self::periodic()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// U = (iA − kB)⁻¹(iA + kB) for a given wavenumber.
    pub fn u_matrix_k(&self, k: C64) -> Result<Mat2> {
        let left = self.a.map(|x| I * x) - self.b.map(|x| k * x);
        let right = self.a.map(|x| I * x) + self.b.map(|x| k * x);
        if left.determinant().norm() <= 1e-13 * left.norm_squared() {
            return Err(Error::SingularPencil(format!("{k}")));
        }
        Ok(left.try_inverse().ok_or_else(|| Error::SingularPencil(format!("{k}")))? * right)
    }

    /// U(z) with √z taken in the closed upper half-plane.
    pub fn u_matrix(&self, z: C64) -> Result<Mat2> {
        if z.norm() == 0.0 {
            return Err(Error::InvalidArgument("U(z) is defined for z ≠ 0".into()));
        }
        self.u_matrix_k(sqrt_upper(z))
    }

    /// −(A + iB)⁻¹(A − iB), unitary.
    pub fn cayley(&self) -> Mat2 {
        let plus = self.a + self.b.map(|x| I * x);
        let minus = self.a - self.b.map(|x| I * x);
        -(plus.try_inverse().expect("A + iB is invertible for self-adjoint conditions") * minus)
    }

    /// sup |(Γ₁φ, Γ₂φ)| / |Γ₁φ|², read off the eigenphases of the Cayley transform.
    pub fn form_constant(&self) -> f64 {
        unitary_eigenphases(&self.cayley())
            .iter()
            .map(|&t| {
                let h = 0.5 * crate::linalg::wrap(t);
                if (h.abs() - 0.5 * std::f64::consts::PI).abs() < 1e-9 {
                    0.0
                } else {
                    h.tan().abs()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Lower bound −c(1/L + 4(c+1)) on the spectrum of the free box operator.
    pub fn lower_bound(&self, l: f64) -> f64 {
        let cst = self.form_constant();
        -cst * (1.0 / l + 4.0 * (cst + 1.0))
    }
}

/// Secular matrix e^{2iLk} I + U σ_x.
pub fn secular_matrix(bc: &BoundaryCondition, k: C64, l: f64) -> Result<Mat2> {
    let u = bc.u_matrix_k(k)?;
    let d = (2.0 * I * k * l).exp();
    Ok(Mat2::identity().map(|x| x * d) + u * crate::linalg::sigma_x())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, unitarity_defect};

    #[test]
    fn presets_give_expected_u() {
        let z = c(3.0, 0.4);
        assert!((BoundaryCondition::dirichlet().u_matrix(z).unwrap() - Mat2::identity()).norm() < 1e-15);
        assert!((BoundaryCondition::neumann().u_matrix(z).unwrap() + Mat2::identity()).norm() < 1e-15);
        let per = BoundaryCondition::periodic().u_matrix(real(4.0)).unwrap();
        assert!((per + crate::linalg::sigma_x()).norm() < 1e-14);
    }

    #[test]
    fn u_is_unitary_on_positive_axis() {
        let u0 = Mat2::new(c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.8), c(0.6, 0.0));
        let bc = BoundaryCondition::from_cayley(u0).unwrap();
        assert!((bc.cayley() - u0).norm() < 1e-14);
        assert!(unitarity_defect(&bc.u_matrix(real(4.0)).unwrap()) < 1e-12);
    }

    #[test]
    fn rejects_non_selfadjoint() {
        let a = Mat2::identity();
        let b = Mat2::new(real(0.0), real(1.0), real(0.0), real(0.0));
        assert!(BoundaryCondition::new(a, b).is_err());
        assert!(BoundaryCondition::new(Mat2::zeros(), Mat2::zeros()).is_err());
    }

    #[test]
    fn form_constant_of_presets() {
        assert_eq!(BoundaryCondition::dirichlet().form_constant(), 0.0);
        assert!(BoundaryCondition::neumann().form_constant() < 1e-15);
        assert!(BoundaryCondition::periodic().form_constant() < 1e-12);
        assert!((BoundaryCondition::robin(0.3, 0.0).form_constant() - 1.0 / 0.3f64.tan()).abs() < 1e-12);
    }
}
