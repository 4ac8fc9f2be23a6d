use crate::error::{Error, Result};
use crate::num::Real;

/// Scalar coefficients of the scheme and Newton controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams<T> {
    pub dt: T,
    /// Penalty parameter.
    pub eps: T,
    /// Artificial viscosity exponent; the flux diffusion is `h^alpha`.
    pub alpha: T,
    pub mu: T,
    pub lambda: T,
    pub kappa: T,
    pub gamma: T,
    pub tol_newton: T,
    pub max_newton: usize,
    /// Smallest admissible backtracking factor.
    pub damping_floor: T,
}

impl<T: Real> SchemeParams<T> {
    /// Defaults for everything except the step and penalty sizes.
    pub fn with_steps(dt: T, eps: T) -> Self {
        SchemeParams {
            dt,
            eps,
            alpha: T::zero(),
            mu: T::lit(0.1),
            lambda: T::zero(),
            kappa: T::lit(0.1),
            gamma: T::lit(1.4),
            tol_newton: T::lit(1e-11),
            max_newton: 30,
            damping_floor: T::lit(2f64.powi(-20)),
        }
    }

    /// `c_v = 1/(γ − 1)`.
    #[inline]
    pub fn cv(&self) -> T {
        T::one() / (self.gamma - T::one())
    }

    /// Artificial diffusion coefficient `h^alpha`.
    #[inline]
    pub fn diffusion(&self, h: T) -> T {
        h.powf(self.alpha)
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let pos = |x: T| x > T::zero() && x.is_finite();
        if !pos(self.dt) {
            v.push(format!("time step must be positive, got {}", self.dt));
        }
        if !pos(self.eps) {
            v.push(format!(
                "penalty parameter ε must be positive, got {}",
                self.eps
            ));
        }
        if !(self.alpha > -T::one()) || !self.alpha.is_finite() {
            v.push(format!(
                "artificial viscosity exponent must satisfy α > −1, got {}",
                self.alpha
            ));
        }
        if !pos(self.mu) {
            v.push(format!(
                "shear viscosity μ must be positive, got {}",
                self.mu
            ));
        }
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            v.push(format!(
                "bulk viscosity λ must be nonnegative, got {}",
                self.lambda
            ));
        }
        if !pos(self.kappa) {
            v.push(format!(
                "heat conductivity κ must be positive, got {}",
                self.kappa
            ));
        }
        if !(self.gamma > T::one()) || !self.gamma.is_finite() {
            v.push(format!("γ must exceed 1, got {}", self.gamma));
        }
        if !pos(self.tol_newton) {
            v.push(format!(
                "Newton tolerance must be positive, got {}",
                self.tol_newton
            ));
        }
        if self.max_newton == 0 {
            v.push("at least one Newton iteration is required".to_string());
        }
        if !(self.damping_floor > T::zero() && self.damping_floor <= T::one()) {
            v.push(format!(
                "damping floor must lie in (0, 1], got {}",
                self.damping_floor
            ));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(v.join("; ")))
        }
    }
}
