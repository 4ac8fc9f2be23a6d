//! Running bounds and accumulated dissipation along a trajectory.

use crate::mesh::DomainMask;
use crate::num::{pairwise_sum, Real};
use crate::ops::{grad_dual, sym_grad_h};
use crate::scheme::{BoundaryData, SchemeParams, State};

/// Observed extrema and time-integrated dissipation of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsMonitor<T> {
    pub min_rho: T,
    pub max_rho: T,
    pub min_theta: T,
    pub max_theta: T,
    /// Largest `‖p‖_∞` seen.
    pub max_pressure: T,
    /// `‖u‖_{L²}` at the last update.
    pub u_l2: T,
    /// `Σ Δt ‖∇_E θ‖²`.
    pub grad_theta_sq: T,
    /// `Σ Δt ‖D_h u‖²`.
    pub sym_grad_sq: T,
    /// `Σ Δt ∫_E (h^α + |avg u·n|)(jump ρ² + jump p² + |jump u|²)`.
    pub face_dissipation: T,
    /// `Σ Δt (1/ε) ∫_{Ω^s_h} (|u|² + (θ − θ_B)²)`.
    pub penalty: T,
    /// `Σ Δt ∫_{Ω^s_h} |u|²`.
    pub solid_velocity_sq: T,
    /// Lower bounds that the run is expected to respect.
    pub rho_floor: T,
    pub theta_floor: T,
    /// Set once `min ρ < rho_floor` or `min θ < theta_floor`.
    pub floor_violated: bool,
    pub steps: usize,
}

impl<T: Real> BoundsMonitor<T> {
    /// Starts monitoring at `initial`; floors of zero only flag lost positivity.
    pub fn new(initial: &State<T>, rho_floor: T, theta_floor: T) -> Self {
        let mut m = BoundsMonitor {
            min_rho: T::infinity(),
            max_rho: T::neg_infinity(),
            min_theta: T::infinity(),
            max_theta: T::neg_infinity(),
            max_pressure: T::zero(),
            u_l2: T::zero(),
            grad_theta_sq: T::zero(),
            sym_grad_sq: T::zero(),
            face_dissipation: T::zero(),
            penalty: T::zero(),
            solid_velocity_sq: T::zero(),
            rho_floor,
            theta_floor,
            floor_violated: false,
            steps: 0,
        };
        m.observe(initial);
        m
    }

    fn observe(&mut self, s: &State<T>) {
        let g = s.grid();
        self.min_rho = self.min_rho.min(s.rho.min());
        self.max_rho = self.max_rho.max(s.rho.max());
        self.min_theta = self.min_theta.min(s.theta.min());
        self.max_theta = self.max_theta.max(s.theta.max());
        let pmax =
            (0..g.num_cells()).fold(T::zero(), |m, k| m.max((s.rho.at(k) * s.theta.at(k)).abs()));
        self.max_pressure = self.max_pressure.max(pmax);
        let usq: Vec<T> = s.u.values().iter().map(|&v| v * v).collect();
        self.u_l2 = (pairwise_sum(&usq) * g.cell_volume()).sqrt();
        if !(self.min_rho >= self.rho_floor && self.min_theta >= self.theta_floor) {
            self.floor_violated = true;
        }
    }

    /// Records the accepted state `new` of one step.
    pub fn update(
        &mut self,
        new: &State<T>,
        params: &SchemeParams<T>,
        mask: &DomainMask,
        bdata: &BoundaryData<T>,
    ) {
        self.observe(new);
        let g = *new.grid();
        let d = g.dim();
        let nc = g.num_cells();
        let dt = params.dt;

        let gt = grad_dual(&new.theta);
        let gsq: Vec<T> = gt.values().iter().map(|&v| v * v).collect();
        self.grad_theta_sq = self.grad_theta_sq + dt * pairwise_sum(&gsq) * g.dual_volume();
        let sym = sym_grad_h(&new.u);
        let dsq: Vec<T> = sym.values().iter().map(|&v| v * v).collect();
        self.sym_grad_sq = self.sym_grad_sq + dt * pairwise_sum(&dsq) * g.cell_volume();

        let diffusion = params.diffusion(g.h());
        let faces: Vec<T> = (0..d * nc)
            .map(|f| {
                let (axis, k) = (f / nc, f % nc);
                let l = g.shift(k, axis, 1);
                let w = (new.u.get(k, axis) + new.u.get(l, axis)) * T::half();
                let jr = new.rho.at(l) - new.rho.at(k);
                let jp = new.rho.at(l) * new.theta.at(l) - new.rho.at(k) * new.theta.at(k);
                let ju = (0..d).fold(T::zero(), |a, j| {
                    let v = new.u.get(l, j) - new.u.get(k, j);
                    a + v * v
                });
                (diffusion + w.abs()) * (jr * jr + jp * jp + ju)
            })
            .collect();
        self.face_dissipation = self.face_dissipation + dt * pairwise_sum(&faces) * g.face_area();

        let (mut pen, mut vel) = (Vec::new(), Vec::new());
        for k in (0..nc).filter(|&k| mask.is_solid(k)) {
            let u2 = new.u.cell(k).iter().fold(T::zero(), |a, &v| a + v * v);
            let e = new.theta.at(k) - bdata.theta_b.at(k);
            pen.push(u2 + e * e);
            vel.push(u2);
        }
        let vol = g.cell_volume();
        self.penalty = self.penalty + dt * pairwise_sum(&pen) * vol / params.eps;
        self.solid_velocity_sq = self.solid_velocity_sq + dt * pairwise_sum(&vel) * vol;
        self.steps += 1;
    }

    pub fn all_finite(&self) -> bool {
        [
            self.min_rho,
            self.max_rho,
            self.min_theta,
            self.max_theta,
            self.max_pressure,
            self.u_l2,
            self.grad_theta_sq,
            self.sym_grad_sq,
            self.face_dissipation,
            self.penalty,
            self.solid_velocity_sq,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}
