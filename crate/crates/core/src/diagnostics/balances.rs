//! Discrete energy, entropy, ballistic energy and renormalized continuity
//! balances evaluated on an accepted step.
//!
//! Every ledger stores the individual terms, the residual `left − right` and
//! a scale. The scale bounds how far the Newton tolerance can move the
//! identity: `max(1, ‖old‖_∞) · |Ω| · max_K w_K`, where `w_K` is the sum of
//! the absolute weights with which the identity combines the scheme rows of
//! cell `K`.

use super::bregman::{remainder_log, remainder_xlogx};
use crate::error::{Error, Result};
use crate::fields::Field;
use crate::mesh::{DomainMask, Grid};
use crate::num::{pairwise_sum, Real};
use crate::ops::{div_h, grad_h, grad_h_vector, sym_grad_h};
use crate::scheme::{viscous_stress, BoundaryData, SchemeParams, State};

/// Identity residuals are accepted up to this multiple of `tol · scale`.
pub const IDENTITY_TOLERANCE_FACTOR: f64 = 10.0;

fn within<T: Real>(residual: T, scale: T, tol: T) -> bool {
    residual.is_finite() && residual.abs() <= T::lit(IDENTITY_TOLERANCE_FACTOR) * tol * scale
}

/// Per-cell thermodynamic values of one time level.
struct Level<T> {
    rho: Vec<T>,
    theta: Vec<T>,
    p: Vec<T>,
    s: Vec<T>,
    rho_s: Vec<T>,
}

impl<T: Real> Level<T> {
    fn new(state: &State<T>, cv: T) -> Result<Self> {
        let nc = state.grid().num_cells();
        let rho: Vec<T> = state.rho.values().to_vec();
        let theta: Vec<T> = state.theta.values().to_vec();
        if rho.iter().chain(&theta).any(|&v| !(v > T::zero())) {
            return Err(Error::Positivity(
                "balances need positive density and temperature".into(),
            ));
        }
        let p = (0..nc).map(|k| rho[k] * theta[k]).collect();
        let s: Vec<T> = (0..nc).map(|k| cv * theta[k].ln() - rho[k].ln()).collect();
        let rho_s = (0..nc).map(|k| rho[k] * s[k]).collect();
        Ok(Level {
            rho,
            theta,
            p,
            s,
            rho_s,
        })
    }
}

/// Face `axis`, inner cell `k`, outer cell `l` and `w = avg(u)·n`.
#[derive(Clone, Copy)]
struct FaceData<T> {
    axis: usize,
    k: usize,
    l: usize,
    w: T,
}

impl<T: Real> FaceData<T> {
    /// Upwind and downwind cells; ties take the inner cell.
    fn up_down(&self) -> (usize, usize) {
        if self.w >= T::zero() {
            (self.k, self.l)
        } else {
            (self.l, self.k)
        }
    }
}

fn faces<T: Real>(g: &Grid<T>, u: &Field<T>) -> Vec<FaceData<T>> {
    let nc = g.num_cells();
    (0..g.dim() * nc)
        .map(|f| {
            let (axis, k) = (f / nc, f % nc);
            let l = g.shift(k, axis, 1);
            let w = (u.get(k, axis) + u.get(l, axis)) * T::half();
            FaceData { axis, k, l, w }
        })
        .collect()
}

fn check_pair<T: Real>(new: &State<T>, old: &State<T>, fields: &[&Field<T>]) -> Result<()> {
    let g = new.grid();
    if !old.grid().same_as(g)
        || fields
            .iter()
            .any(|f| !f.grid().same_as(g) || f.ncomp() != 1)
    {
        return Err(Error::FieldMismatch(
            "balance inputs must be scalar fields on one grid".into(),
        ));
    }
    Ok(())
}

fn cell_sum<T: Real>(g: &Grid<T>, f: impl Fn(usize) -> T) -> T {
    let v: Vec<T> = (0..g.num_cells()).map(f).collect();
    pairwise_sum(&v) * g.cell_volume()
}

fn solid_sum<T: Real>(g: &Grid<T>, mask: &DomainMask, f: impl Fn(usize) -> T) -> T {
    cell_sum(g, |k| if mask.is_solid(k) { f(k) } else { T::zero() })
}

fn face_sum<T: Real>(g: &Grid<T>, fs: &[FaceData<T>], f: impl Fn(&FaceData<T>) -> T) -> T {
    let v: Vec<T> = fs.iter().map(f).collect();
    pairwise_sum(&v) * g.face_area()
}

fn scale_from_weights<T: Real>(old: &State<T>, w: impl Fn(usize) -> T) -> T {
    let g = old.grid();
    let wmax = (0..g.num_cells()).fold(T::one(), |m, k| m.max(w(k)));
    T::one().max(old.max_abs()) * g.domain_volume() * wmax
}

fn kinetic<T: Real>(s: &State<T>, k: usize) -> T {
    s.u.cell(k).iter().fold(T::zero(), |a, &v| a + v * v)
}

/// Terms of the discrete energy balance
/// `D_t ∫(½ρ|u|² + c_v ρθ) + P_u + P_θ = −D_E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLedger<T> {
    /// `∫(½ρ|u|² + c_v ρθ)` at the new level.
    pub energy: T,
    pub energy_old: T,
    /// `D_t ∫(½ρ|u|² + c_v ρθ)`.
    pub time: T,
    /// `(1/ε) ∫_{Ω^s_h} |u|²`.
    pub penalty_u: T,
    /// `(1/ε) ∫_{Ω^s_h} (θ − θ_B)`.
    pub penalty_theta: T,
    /// `(Δt/2) ∫ ρ^◁ |D_t u|²`.
    pub dissipation_time: T,
    /// `h^α ∫_E avg(ρ) |jump u|²`.
    pub dissipation_diffusion: T,
    /// `½ ∫_E ρ^up |avg u·n| |jump u|²`.
    pub dissipation_upwind: T,
    pub residual: T,
    pub scale: T,
}

impl<T: Real> EnergyLedger<T> {
    /// `D_E`.
    pub fn dissipation(&self) -> T {
        self.dissipation_time + self.dissipation_diffusion + self.dissipation_upwind
    }

    pub fn passed(&self, tol: T) -> bool {
        within(self.residual, self.scale, tol)
    }

    pub fn dissipation_nonnegative(&self) -> bool {
        self.dissipation_time >= T::zero()
            && self.dissipation_diffusion >= T::zero()
            && self.dissipation_upwind >= T::zero()
    }
}

/// Energy balance of the step `old → new`.
pub fn energy_balance<T: Real>(
    new: &State<T>,
    old: &State<T>,
    params: &SchemeParams<T>,
    mask: &DomainMask,
    bdata: &BoundaryData<T>,
) -> Result<EnergyLedger<T>> {
    check_pair(new, old, &[&bdata.theta_b])?;
    let g = *new.grid();
    let cv = params.cv();
    let (dt, inv_eps) = (params.dt, T::one() / params.eps);
    let total = |s: &State<T>| {
        cell_sum(&g, |k| {
            let r = s.rho.at(k);
            T::half() * r * kinetic(s, k) + cv * r * s.theta.at(k)
        })
    };
    let energy = total(new);
    let energy_old = total(old);
    let time = (energy - energy_old) / dt;
    let penalty_u = solid_sum(&g, mask, |k| kinetic(new, k)) * inv_eps;
    let penalty_theta = solid_sum(&g, mask, |k| new.theta.at(k) - bdata.theta_b.at(k)) * inv_eps;

    let du_sq = |k: usize| {
        (0..g.dim()).fold(T::zero(), |a, j| {
            let v = new.u.get(k, j) - old.u.get(k, j);
            a + v * v
        })
    };
    let dissipation_time = cell_sum(&g, |k| old.rho.at(k) * du_sq(k)) / (T::two() * dt);
    let fs = faces(&g, &new.u);
    let jump_u_sq = |f: &FaceData<T>| {
        (0..g.dim()).fold(T::zero(), |a, j| {
            let v = new.u.get(f.l, j) - new.u.get(f.k, j);
            a + v * v
        })
    };
    let dissipation_diffusion = params.diffusion(g.h())
        * face_sum(&g, &fs, |f| {
            (new.rho.at(f.k) + new.rho.at(f.l)) * T::half() * jump_u_sq(f)
        });
    let dissipation_upwind = T::half()
        * face_sum(&g, &fs, |f| {
            let (up, _) = f.up_down();
            new.rho.at(up) * f.w.abs() * jump_u_sq(f)
        });

    let mut ledger = EnergyLedger {
        energy,
        energy_old,
        time,
        penalty_u,
        penalty_theta,
        dissipation_time,
        dissipation_diffusion,
        dissipation_upwind,
        residual: T::zero(),
        scale: T::zero(),
    };
    ledger.residual = time + penalty_u + penalty_theta + ledger.dissipation();
    ledger.scale = scale_from_weights(old, |k| {
        let u1 = new.u.cell(k).iter().fold(T::zero(), |a, &v| a + v.abs());
        T::one() + u1 + T::half() * kinetic(new, k)
    });
    Ok(ledger)
}

/// Terms of the discrete entropy balance tested with `φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyLedger<T> {
    /// `∫ D_t(ρs) φ`.
    pub time: T,
    /// `−∫_E Up(ρs, u) jump φ`.
    pub flux: T,
    /// `(1/ε) ∫_{Ω^s_h} (θ − θ_B) φ/θ`.
    pub penalty: T,
    /// `∫ (φ/θ) S_h:∇_h u`; enters the left side with a minus sign.
    pub viscous_production: T,
    /// `κ ∫ ∇_E θ · ∇_E(φ/θ)`.
    pub heat: T,
    pub d_s1: T,
    pub d_s2: T,
    pub d_s3: T,
    pub r_s: T,
    /// `∫_E (h^α + |avg u·n|)(jump ρ² + jump p² + |jump u|²)` at the new level.
    pub face_dissipation: T,
    pub residual: T,
    pub scale: T,
}

impl<T: Real> EntropyLedger<T> {
    /// `D_s = D_{s,1} + D_{s,2} + D_{s,3}`.
    pub fn d_s(&self) -> T {
        self.d_s1 + self.d_s2 + self.d_s3
    }

    pub fn passed(&self, tol: T) -> bool {
        within(self.residual, self.scale, tol)
    }

    pub fn dissipation_nonnegative(&self) -> bool {
        self.d_s1 >= T::zero() && self.d_s2 >= T::zero() && self.d_s3 >= T::zero()
    }
}

/// Entropy balance of the step `old → new` tested with `phi`.
///
/// The identity holds for any `phi`; the dissipation terms are nonnegative
/// when `phi ≥ 0`.
pub fn entropy_balance<T: Real>(
    new: &State<T>,
    old: &State<T>,
    phi: &Field<T>,
    params: &SchemeParams<T>,
    mask: &DomainMask,
    bdata: &BoundaryData<T>,
) -> Result<EntropyLedger<T>> {
    check_pair(new, old, &[phi, &bdata.theta_b])?;
    let g = *new.grid();
    let d = g.dim();
    let cv = params.cv();
    let (dt, inv_eps, h) = (params.dt, T::one() / params.eps, g.h());
    let diffusion = params.diffusion(h);
    let a = Level::new(new, cv)?;
    let o = Level::new(old, cv)?;
    let ph = |k: usize| phi.at(k);

    let time = cell_sum(&g, |k| (a.rho_s[k] - o.rho_s[k]) / dt * ph(k));
    let fs = faces(&g, &new.u);
    let flux = -face_sum(&g, &fs, |f| {
        let (up, _) = f.up_down();
        a.rho_s[up] * f.w * (ph(f.l) - ph(f.k))
    });
    let penalty = solid_sum(&g, mask, |k| {
        (a.theta[k] - bdata.theta_b.at(k)) * ph(k) / a.theta[k]
    }) * inv_eps;
    let production =
        viscous_stress(&new.u, params.mu, params.lambda).contract(&grad_h_vector(&new.u));
    let viscous_production = cell_sum(&g, |k| ph(k) / a.theta[k] * production.at(k));
    let heat = params.kappa / h
        * face_sum(&g, &fs, |f| {
            (a.theta[f.l] - a.theta[f.k]) * (ph(f.l) / a.theta[f.l] - ph(f.k) / a.theta[f.k])
        });

    let d_s1 = cell_sum(&g, |k| {
        ph(k)
            * (remainder_xlogx(o.rho[k], a.rho[k])
                - cv * o.rho[k] * remainder_log(o.theta[k], a.theta[k]))
    }) / dt;
    let d_s2 = face_sum(&g, &fs, |f| {
        let (up, down) = f.up_down();
        f.w.abs()
            * ph(down)
            * (remainder_xlogx(a.rho[up], a.rho[down])
                - cv * a.rho[up] * remainder_log(a.theta[up], a.theta[down]))
    });
    // a = ∂_ρ(−ρs) = c_v + 1 − s, b = ∂_p(−ρs) = −c_v/θ
    let ga = |k: usize| cv + T::one() - a.s[k];
    let gb = |k: usize| -cv / a.theta[k];
    let d_s3 = diffusion
        * face_sum(&g, &fs, |f| {
            let (k, l) = (f.k, f.l);
            (ph(k) + ph(l))
                * T::half()
                * ((ga(l) - ga(k)) * (a.rho[l] - a.rho[k]) + (gb(l) - gb(k)) * (a.p[l] - a.p[k]))
        });
    let r_s = diffusion
        * face_sum(&g, &fs, |f| {
            let (k, l) = (f.k, f.l);
            (ph(l) - ph(k))
                * ((ga(l) + ga(k)) * T::half() * (a.rho[l] - a.rho[k])
                    + (gb(l) + gb(k)) * T::half() * (a.p[l] - a.p[k]))
        });
    let face_dissipation = face_sum(&g, &fs, |f| {
        let (k, l) = (f.k, f.l);
        let ju = (0..d).fold(T::zero(), |acc, j| {
            let v = new.u.get(l, j) - new.u.get(k, j);
            acc + v * v
        });
        let (jr, jp) = (a.rho[l] - a.rho[k], a.p[l] - a.p[k]);
        (diffusion + f.w.abs()) * (jr * jr + jp * jp + ju)
    });

    let lhs = time + flux + penalty - viscous_production + heat;
    let rhs = d_s1 + d_s2 + d_s3 + r_s;
    Ok(EntropyLedger {
        time,
        flux,
        penalty,
        viscous_production,
        heat,
        d_s1,
        d_s2,
        d_s3,
        r_s,
        face_dissipation,
        residual: lhs - rhs,
        scale: scale_from_weights(old, |k| ph(k).abs() * (T::one() / a.theta[k] + ga(k).abs())),
    })
}

/// Terms of the ballistic energy balance with weight `φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallisticLedger<T> {
    /// `D_t ∫(½ρ|u|² + c_v ρθ − ρ s φ)`.
    pub time: T,
    pub penalty_u: T,
    /// `(1/ε) ∫_{Ω^s_h} (θ − θ_B)²/θ`.
    pub penalty_theta_sq: T,
    /// `κ ∫ avg(φ)/(θ^in θ^out) |∇_E θ|²`.
    pub heat_dissipation: T,
    /// `∫ (φ/θ)(2μ|D_h u|² + λ|div_h u|²)`.
    pub viscous_production: T,
    pub d_s: T,
    pub d_e: T,
    /// `−∫ ρ s (D_t φ + u·∇_h φ)`.
    pub transport: T,
    /// `κ ∫ avg(1/θ) ∇_E θ · ∇_E φ`.
    pub heat_cross: T,
    pub r_b1: T,
    pub r_b2: T,
    pub r_s: T,
    pub residual: T,
    pub scale: T,
}

impl<T: Real> BallisticLedger<T> {
    pub fn passed(&self, tol: T) -> bool {
        within(self.residual, self.scale, tol)
    }
}

/// Ballistic energy balance of the step `old → new` with weight `phi` at the
/// new level and `phi_old` at the old level.
///
/// `D_E`, `D_s` and `R_s` are taken from the energy and entropy ledgers; all
/// other terms are evaluated here.
pub fn ballistic_balance<T: Real>(
    new: &State<T>,
    old: &State<T>,
    phi: &Field<T>,
    phi_old: &Field<T>,
    params: &SchemeParams<T>,
    mask: &DomainMask,
    bdata: &BoundaryData<T>,
) -> Result<BallisticLedger<T>> {
    check_pair(new, old, &[phi, phi_old, &bdata.theta_b])?;
    if !(phi.min() > T::zero()) {
        return Err(Error::Positivity(
            "ballistic weight must be positive".into(),
        ));
    }
    let energy = energy_balance(new, old, params, mask, bdata)?;
    let entropy = entropy_balance(new, old, phi, params, mask, bdata)?;
    let g = *new.grid();
    let cv = params.cv();
    let (dt, inv_eps, h) = (params.dt, T::one() / params.eps, g.h());
    let a = Level::new(new, cv)?;
    let o = Level::new(old, cv)?;
    let ph = |k: usize| phi.at(k);
    let dphi = |k: usize| (phi.at(k) - phi_old.at(k)) / dt;
    let tb = |k: usize| bdata.theta_b.at(k);

    let weighted = cell_sum(&g, |k| a.rho_s[k] * ph(k));
    let weighted_old = cell_sum(&g, |k| o.rho_s[k] * phi_old.at(k));
    let time = energy.time - (weighted - weighted_old) / dt;
    let penalty_theta_sq = solid_sum(&g, mask, |k| {
        let e = a.theta[k] - tb(k);
        e * e / a.theta[k]
    }) * inv_eps;
    let fs = faces(&g, &new.u);
    let heat_dissipation = params.kappa / h
        * face_sum(&g, &fs, |f| {
            let jt = a.theta[f.l] - a.theta[f.k];
            (ph(f.k) + ph(f.l)) * T::half() * jt * jt / (a.theta[f.k] * a.theta[f.l])
        });
    let sym = sym_grad_h(&new.u);
    let div = div_h(&new.u);
    let viscous_production = cell_sum(&g, |k| {
        let dd = sym.cell(k).iter().fold(T::zero(), |acc, &v| acc + v * v);
        let dv = div.at(k);
        ph(k) / a.theta[k] * (T::two() * params.mu * dd + params.lambda * dv * dv)
    });
    let grad_phi = grad_h(phi);
    let transport = -cell_sum(&g, |k| {
        let adv = (0..g.dim()).fold(T::zero(), |acc, i| {
            acc + new.u.get(k, i) * grad_phi.get(k, i)
        });
        a.rho_s[k] * (dphi(k) + adv)
    });
    let heat_cross = params.kappa / h
        * face_sum(&g, &fs, |f| {
            let inv_avg = (T::one() / a.theta[f.k] + T::one() / a.theta[f.l]) * T::half();
            inv_avg * (a.theta[f.l] - a.theta[f.k]) * (ph(f.l) - ph(f.k))
        });
    let r_b1 = solid_sum(&g, mask, |k| {
        (a.theta[k] - tb(k)) * (ph(k) - tb(k)) / a.theta[k]
    }) * inv_eps
        + dt * cell_sum(&g, |k| (a.rho_s[k] - o.rho_s[k]) / dt * dphi(k));
    let quarter = T::half() * T::half();
    let r_b2 = face_sum(&g, &fs, |f| {
        let ju = new.u.get(f.l, f.axis) - new.u.get(f.k, f.axis);
        (T::half() * f.w.abs() + quarter * ju) * (a.rho_s[f.l] - a.rho_s[f.k]) * (ph(f.l) - ph(f.k))
    });

    let d_s = entropy.d_s();
    let d_e = energy.dissipation();
    let lhs = time
        + energy.penalty_u
        + penalty_theta_sq
        + heat_dissipation
        + viscous_production
        + d_s
        + d_e;
    let rhs = transport + heat_cross + r_b1 + r_b2 - entropy.r_s;
    Ok(BallisticLedger {
        time,
        penalty_u: energy.penalty_u,
        penalty_theta_sq,
        heat_dissipation,
        viscous_production,
        d_s,
        d_e,
        transport,
        heat_cross,
        r_b1,
        r_b2,
        r_s: entropy.r_s,
        residual: lhs - rhs,
        scale: energy.scale + entropy.scale,
    })
}

/// Renormalizing function `B` of the density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Renormalization {
    /// `B(ρ) = ρ`.
    Linear,
    /// `B(ρ) = ρ²`.
    Square,
    /// `B(ρ) = ρ log ρ`.
    EntropyLike,
}

impl Renormalization {
    pub fn value<T: Real>(self, r: T) -> T {
        match self {
            Renormalization::Linear => r,
            Renormalization::Square => r * r,
            Renormalization::EntropyLike => r * r.ln(),
        }
    }

    pub fn derivative<T: Real>(self, r: T) -> T {
        match self {
            Renormalization::Linear => T::one(),
            Renormalization::Square => T::two() * r,
            Renormalization::EntropyLike => r.ln() + T::one(),
        }
    }

    /// `E_B(x|y) = B(x) − B'(y)(x − y) − B(y)`.
    pub fn remainder<T: Real>(self, x: T, y: T) -> T {
        match self {
            Renormalization::Linear => T::zero(),
            Renormalization::Square => (x - y) * (x - y),
            Renormalization::EntropyLike => remainder_xlogx(x, y),
        }
    }
}

/// Terms of the renormalized continuity equation tested with `φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormalizedLedger<T> {
    /// `∫ D_t B(ρ) φ`.
    pub time: T,
    /// `−∫_E Up[B(ρ), u] jump φ`.
    pub flux: T,
    /// `∫ φ (ρ B'(ρ) − B(ρ)) div_h u`.
    pub compression: T,
    /// `−(1/Δt) ∫ φ E_B(ρ^◁|ρ)`.
    pub remainder_time: T,
    /// `−h^α ∫_E jump ρ jump(B'(ρ) φ)`.
    pub remainder_diffusion: T,
    /// `−∫_E |avg u·n| φ^down E_B(ρ^up|ρ^down)`.
    pub remainder_upwind: T,
    pub residual: T,
    pub scale: T,
}

impl<T: Real> RenormalizedLedger<T> {
    pub fn passed(&self, tol: T) -> bool {
        within(self.residual, self.scale, tol)
    }
}

/// Renormalized continuity balance of the step `old → new`.
pub fn renormalized_continuity<T: Real>(
    new: &State<T>,
    old: &State<T>,
    b: Renormalization,
    phi: &Field<T>,
    params: &SchemeParams<T>,
) -> Result<RenormalizedLedger<T>> {
    check_pair(new, old, &[phi])?;
    if new.rho.min() <= T::zero() || old.rho.min() <= T::zero() {
        return Err(Error::Positivity(
            "renormalization needs positive densities".into(),
        ));
    }
    let g = *new.grid();
    let dt = params.dt;
    let diffusion = params.diffusion(g.h());
    let r = |k: usize| new.rho.at(k);
    let ph = |k: usize| phi.at(k);
    let time = cell_sum(&g, |k| {
        (b.value(r(k)) - b.value(old.rho.at(k))) / dt * ph(k)
    });
    let fs = faces(&g, &new.u);
    let flux = -face_sum(&g, &fs, |f| {
        let (up, _) = f.up_down();
        b.value(r(up)) * f.w * (ph(f.l) - ph(f.k))
    });
    let div = div_h(&new.u);
    let compression = cell_sum(&g, |k| {
        ph(k) * (r(k) * b.derivative(r(k)) - b.value(r(k))) * div.at(k)
    });
    let remainder_time = -cell_sum(&g, |k| ph(k) * b.remainder(old.rho.at(k), r(k))) / dt;
    let remainder_diffusion = -diffusion
        * face_sum(&g, &fs, |f| {
            (r(f.l) - r(f.k)) * (b.derivative(r(f.l)) * ph(f.l) - b.derivative(r(f.k)) * ph(f.k))
        });
    let remainder_upwind = -face_sum(&g, &fs, |f| {
        let (up, down) = f.up_down();
        f.w.abs() * ph(down) * b.remainder(r(up), r(down))
    });
    Ok(RenormalizedLedger {
        time,
        flux,
        compression,
        remainder_time,
        remainder_diffusion,
        remainder_upwind,
        residual: time + flux + compression
            - (remainder_time + remainder_diffusion + remainder_upwind),
        scale: scale_from_weights(old, |k| (b.derivative(r(k)) * ph(k)).abs()),
    })
}
