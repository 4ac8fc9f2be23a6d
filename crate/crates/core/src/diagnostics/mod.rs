//! Per-step balance ledgers, the relative energy and running bounds.

mod balances;
mod bregman;
mod monitor;
mod relative;

pub use balances::{
    ballistic_balance, energy_balance, entropy_balance, renormalized_continuity, BallisticLedger,
    EnergyLedger, EntropyLedger, Renormalization, RenormalizedLedger, IDENTITY_TOLERANCE_FACTOR,
};
pub use bregman::{remainder_log, remainder_xlogx};
pub use monitor::BoundsMonitor;
pub use relative::{relative_energy, relative_energy_density, RelativeEnergy};

use crate::error::Result;
use crate::fields::Field;
use crate::mesh::DomainMask;
use crate::num::Real;
use crate::scheme::{run_simulation, BoundaryData, SchemeParams, State, StepRecord, Trajectory};

/// All ledgers of one accepted step.
///
/// The entropy balance is evaluated with `φ ≡ 1` and `φ = θ_B`; the ballistic
/// balance uses `φ = θ_B` at both time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport<T> {
    pub step: usize,
    pub t: T,
    pub newton_iters: usize,
    pub mass: T,
    pub min_rho: T,
    pub max_rho: T,
    pub min_theta: T,
    pub max_theta: T,
    pub energy: EnergyLedger<T>,
    pub entropy_unit: EntropyLedger<T>,
    pub entropy_boundary: EntropyLedger<T>,
    pub ballistic: BallisticLedger<T>,
    /// Renormalized continuity with `φ ≡ 1` for `B = ρ²` and `B = ρ log ρ`.
    pub renormalized: [RenormalizedLedger<T>; 2],
}

impl<T: Real> BalanceReport<T> {
    /// Entropy residual of larger magnitude among the two test functions.
    pub fn entropy_residual(&self) -> T {
        let (a, b) = (self.entropy_unit.residual, self.entropy_boundary.residual);
        if a.abs() >= b.abs() {
            a
        } else {
            b
        }
    }

    /// Every identity within `IDENTITY_TOLERANCE_FACTOR · tol · scale`.
    pub fn identities_hold(&self, tol: T) -> bool {
        self.energy.passed(tol)
            && self.entropy_unit.passed(tol)
            && self.entropy_boundary.passed(tol)
            && self.ballistic.passed(tol)
            && self.renormalized.iter().all(|r| r.passed(tol))
    }

    /// `D_E` and `D_{s,i}(φ)` termwise nonnegative for both entropy weights.
    pub fn dissipation_nonnegative(&self) -> bool {
        self.energy.dissipation_nonnegative()
            && self.entropy_unit.dissipation_nonnegative()
            && self.entropy_boundary.dissipation_nonnegative()
    }

    /// Names of the identities that fail at `tol`.
    pub fn failures(&self, tol: T) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.energy.passed(tol) {
            out.push("energy");
        }
        if !self.entropy_unit.passed(tol) || !self.entropy_boundary.passed(tol) {
            out.push("entropy");
        }
        if !self.ballistic.passed(tol) {
            out.push("ballistic");
        }
        if !self.renormalized.iter().all(|r| r.passed(tol)) {
            out.push("renormalized continuity");
        }
        out
    }
}

/// Builds the report of the step `old → new`; `bdata_old` is the boundary
/// data at the old time level.
#[allow(clippy::too_many_arguments)]
pub fn balance_report<T: Real>(
    step: usize,
    newton_iters: usize,
    new: &State<T>,
    old: &State<T>,
    params: &SchemeParams<T>,
    mask: &DomainMask,
    bdata: &BoundaryData<T>,
    bdata_old: &BoundaryData<T>,
) -> Result<BalanceReport<T>> {
    let g = new.grid();
    let one = Field::constant(g, 1, T::one());
    let energy = energy_balance(new, old, params, mask, bdata)?;
    let entropy_unit = entropy_balance(new, old, &one, params, mask, bdata)?;
    let entropy_boundary = entropy_balance(new, old, &bdata.theta_b, params, mask, bdata)?;
    let ballistic = ballistic_balance(
        new,
        old,
        &bdata.theta_b,
        &bdata_old.theta_b,
        params,
        mask,
        bdata,
    )?;
    let renormalized = [
        renormalized_continuity(new, old, Renormalization::Square, &one, params)?,
        renormalized_continuity(new, old, Renormalization::EntropyLike, &one, params)?,
    ];
    Ok(BalanceReport {
        step,
        t: new.t,
        newton_iters,
        mass: new.mass(),
        min_rho: new.rho.min(),
        max_rho: new.rho.max(),
        min_theta: new.theta.min(),
        max_theta: new.theta.max(),
        energy,
        entropy_unit,
        entropy_boundary,
        ballistic,
        renormalized,
    })
}

/// Trajectory together with its ledgers and bounds.
#[derive(Debug, Clone)]
pub struct RunReport<T> {
    pub trajectory: Trajectory<T>,
    pub reports: Vec<BalanceReport<T>>,
    pub monitor: BoundsMonitor<T>,
}

/// Runs `steps` implicit steps and evaluates every ledger after each one.
/// `on_step` sees the step and its report before the next step starts.
pub fn run_with_reports<T: Real>(
    initial: &State<T>,
    params: &SchemeParams<T>,
    mask: &DomainMask,
    bdata: &BoundaryData<T>,
    steps: usize,
    mut on_step: impl FnMut(&StepRecord<'_, T>, &BalanceReport<T>) -> Result<()>,
) -> Result<RunReport<T>> {
    let mut reports = Vec::with_capacity(steps);
    let mut monitor = BoundsMonitor::new(initial, T::zero(), T::zero());
    let trajectory = run_simulation(initial, params, mask, bdata, steps, |rec| {
        let bold = bdata.at_time(rec.old.t);
        let report = balance_report(
            rec.step,
            rec.stats.iterations,
            rec.new,
            rec.old,
            params,
            mask,
            rec.bdata,
            &bold,
        )?;
        monitor.update(rec.new, params, mask, rec.bdata);
        on_step(rec, &report)?;
        reports.push(report);
        Ok(())
    })?;
    Ok(RunReport {
        trajectory,
        reports,
        monitor,
    })
}
