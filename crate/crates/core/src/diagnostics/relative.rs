//! Relative energy between a numerical state and a reference triple.

use super::bregman::{remainder_log, remainder_xlogx};
use crate::error::{Error, Result};
use crate::num::{pairwise_sum, Real};
use crate::scheme::State;

/// Relative energy and the squared `L²` distance it is equivalent to under
/// uniform bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeEnergy<T> {
    pub value: T,
    /// `‖ρ − ρ̃‖² + ‖u − ũ‖² + ‖θ − θ̃‖²`.
    pub l2_sq: T,
}

/// Pointwise relative energy density
/// `½ρ|u − ũ|² + H_θ̃(ρ, θ) − ∂_ρ H_θ̃(ρ̃, θ̃)(ρ − ρ̃) − H_θ̃(ρ̃, θ̃)`
/// with `H_Θ(ρ, θ) = ρ(c_v θ − Θ s(ρ, θ))`.
///
/// Evaluated as `c_v ρ (θ − θ̃ − θ̃ log(θ/θ̃)) + θ̃ (ρ log(ρ/ρ̃) − ρ + ρ̃)` plus
/// the kinetic part, which is the same quantity without cancellation.
pub fn relative_energy_density<T: Real>(
    rho: T,
    u: &[T],
    theta: T,
    rho_ref: T,
    u_ref: &[T],
    theta_ref: T,
    cv: T,
) -> T {
    let du = u
        .iter()
        .zip(u_ref)
        .fold(T::zero(), |a, (&x, &y)| a + (x - y) * (x - y));
    let thermal = -cv * rho * theta_ref * remainder_log(theta, theta_ref);
    let density = theta_ref * remainder_xlogx(rho, rho_ref);
    T::half() * rho * du + thermal + density
}

/// `∫ E(ρ, u, θ | ρ̃, ũ, θ̃)` over the torus.
pub fn relative_energy<T: Real>(
    state: &State<T>,
    reference: &State<T>,
    cv: T,
) -> Result<RelativeEnergy<T>> {
    let g = state.grid();
    if !reference.grid().same_as(g) {
        return Err(Error::FieldMismatch(
            "reference lives on another grid".into(),
        ));
    }
    for s in [state, reference] {
        if !(s.rho.min() > T::zero() && s.theta.min() > T::zero()) {
            return Err(Error::Positivity(
                "relative energy needs positive ρ and θ".into(),
            ));
        }
    }
    let nc = g.num_cells();
    let dens: Vec<T> = (0..nc)
        .map(|k| {
            relative_energy_density(
                state.rho.at(k),
                state.u.cell(k),
                state.theta.at(k),
                reference.rho.at(k),
                reference.u.cell(k),
                reference.theta.at(k),
                cv,
            )
        })
        .collect();
    let dist: Vec<T> = (0..nc)
        .map(|k| {
            let dr = state.rho.at(k) - reference.rho.at(k);
            let dt = state.theta.at(k) - reference.theta.at(k);
            let du = state
                .u
                .cell(k)
                .iter()
                .zip(reference.u.cell(k))
                .fold(T::zero(), |a, (&x, &y)| a + (x - y) * (x - y));
            dr * dr + du + dt * dt
        })
        .collect();
    let vol = g.cell_volume();
    Ok(RelativeEnergy {
        value: pairwise_sum(&dens) * vol,
        l2_sq: pairwise_sum(&dist) * vol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn h(rho: f64, theta: f64, big_theta: f64, cv: f64) -> f64 {
        rho * (cv * theta - big_theta * (cv * theta.ln() - rho.ln()))
    }

    /// Direct evaluation of the defining expression.
    fn direct(rho: f64, theta: f64, rr: f64, tr: f64, cv: f64) -> f64 {
        let s_ref = cv * tr.ln() - rr.ln();
        let d_rho = cv * tr - tr * s_ref + tr;
        h(rho, theta, tr, cv) - d_rho * (rho - rr) - h(rr, tr, tr, cv)
    }

    #[test]
    fn one_cell_value() {
        let v = relative_energy_density(1.0, &[0.0], 2.0, 1.0, &[0.0], 1.0, 1.5);
        assert!((v - 1.5 * (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!((v - 0.460279).abs() < 1e-6);
        assert!((v - direct(1.0, 2.0, 1.0, 1.0, 1.5)).abs() < 1e-14);
    }

    #[test]
    fn matches_definition_and_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let (r, t, rr, tr): (f64, f64, f64, f64) = (
                rng.random_range(0.5..2.0),
                rng.random_range(0.5..2.0),
                rng.random_range(0.5..2.0),
                rng.random_range(0.5..2.0),
            );
            let v = relative_energy_density(r, &[0.1], t, rr, &[0.3], tr, 2.5);
            assert!(v >= 0.0);
            let expect = direct(r, t, rr, tr, 2.5) + 0.5 * r * 0.04;
            assert!((v - expect).abs() < 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn identical_states_give_zero() {
        let g = Grid::<f64>::new(2, 4, 1.0).unwrap();
        let s = State::constant(&g, 1.3, &[0.2, -0.1], 0.7).unwrap();
        let e = relative_energy(&s, &s, 2.5).unwrap();
        assert_eq!((e.value, e.l2_sq), (0.0, 0.0));
        let other = State::constant(&g, 1.3, &[0.2, -0.1], 0.9).unwrap();
        let e = relative_energy(&s, &other, 2.5).unwrap();
        assert!(e.value > 0.0);
        assert!((e.l2_sq - 0.04).abs() < 1e-15);
    }
}
