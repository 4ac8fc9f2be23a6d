//! Self-convergence studies against a fine-grid reference and observed
//! orders of convergence.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{relative_energy, BoundsMonitor};
use crate::error::{Error, Result};
use crate::fields::Field;
use crate::mesh::{split_domain, Grid};
use crate::num::Real;
use crate::ops::{dual_inner, grad_dual, sym_grad_h, DualField, TensorField};
use crate::problem::Problem;
use crate::scheme::{run_simulation, step_count, SchemeParams, State};

/// `c · h^a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub coefficient: f64,
    pub exponent: f64,
}

impl Coupling {
    pub fn new(coefficient: f64, exponent: f64) -> Self {
        Coupling {
            coefficient,
            exponent,
        }
    }

    /// Integer exponents use repeated multiplication so that dyadic `h` give
    /// exact step sizes.
    pub fn eval<T: Real>(&self, h: T) -> T {
        let p = if self.exponent.fract() == 0.0 && self.exponent.abs() < 64.0 {
            h.powi(self.exponent as i32)
        } else {
            h.powf(T::lit(self.exponent))
        };
        T::lit(self.coefficient) * p
    }

    fn is_valid(&self) -> bool {
        self.coefficient > 0.0 && self.coefficient.is_finite() && self.exponent.is_finite()
    }
}

/// A mesh family with coupled step and penalty sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec<T> {
    pub dim: usize,
    pub length: T,
    /// Study resolutions, each dividing the next.
    pub resolutions: Vec<usize>,
    /// Reference resolution, a multiple of every study resolution and at least
    /// four times the finest.
    pub n_ref: usize,
    pub dt: Coupling,
    pub eps: Coupling,
    pub t_end: T,
    /// Physics and Newton controls; `dt` and `eps` are replaced per resolution.
    pub params: SchemeParams<T>,
}

impl<T: Real> SweepSpec<T> {
    pub fn h(&self, n: usize) -> T {
        self.length / T::from_usize_exact(n)
    }

    pub fn grid(&self, n: usize) -> Result<Grid<T>> {
        Grid::new(self.dim, n, self.length)
    }

    pub fn params_for(&self, n: usize) -> SchemeParams<T> {
        let h = self.h(n);
        SchemeParams {
            dt: self.dt.eval(h),
            eps: self.eps.eval(h),
            ..self.params
        }
    }

    pub fn steps_for(&self, n: usize) -> Result<usize> {
        step_count(self.t_end, self.params_for(n).dt)
    }

    /// Snapshot interval of the reference: the step of the finest study grid.
    pub fn snapshot_dt(&self) -> T {
        let finest = *self.resolutions.iter().max().unwrap_or(&self.n_ref);
        self.params_for(finest).dt
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.dim == 2 || self.dim == 3) {
            v.push(format!("dimension must be 2 or 3, got {}", self.dim));
        }
        if !(self.length > T::zero() && self.length.is_finite()) {
            v.push(format!(
                "domain length must be positive, got {}",
                self.length
            ));
        }
        if self.resolutions.is_empty() {
            v.push("at least one study resolution is required".into());
        }
        if self.resolutions.contains(&0) {
            v.push("study resolutions must be positive".into());
        }
        for w in self.resolutions.windows(2) {
            if !(w[1] > w[0] && w[0] > 0 && w[1] % w[0] == 0) {
                v.push(format!(
                    "resolutions must be nested: {} does not divide {}",
                    w[0], w[1]
                ));
            }
        }
        let finest = self.resolutions.iter().copied().max().unwrap_or(0);
        if finest > 0 {
            if self.n_ref < 4 * finest {
                v.push(format!(
                    "reference resolution {} is below 4 × {finest}",
                    self.n_ref
                ));
            }
            if self
                .resolutions
                .iter()
                .any(|&n| n > 0 && self.n_ref % n != 0)
            {
                v.push(format!(
                    "reference resolution {} is not a multiple of every study resolution",
                    self.n_ref
                ));
            }
        }
        if !self.dt.is_valid() {
            v.push("time-step coupling needs a positive coefficient".into());
        }
        if !self.eps.is_valid() {
            v.push("penalty coupling needs a positive coefficient".into());
        }
        if !(self.t_end > T::zero() && self.t_end.is_finite()) {
            v.push(format!("final time must be positive, got {}", self.t_end));
        }
        if !v.is_empty() {
            return v;
        }
        for &n in self.resolutions.iter().chain(std::iter::once(&self.n_ref)) {
            let p = self.params_for(n);
            for msg in p.violations() {
                v.push(format!("n = {n}: {msg}"));
            }
            if let Err(e) = step_count(self.t_end, p.dt) {
                v.push(format!("n = {n}: {e}"));
            }
        }
        let snap = self.snapshot_dt();
        if step_count(snap, self.params_for(self.n_ref).dt).is_err() {
            v.push("reference step does not divide the finest study step".into());
        }
        for &n in &self.resolutions {
            if step_count(self.params_for(n).dt, snap).is_err() {
                v.push(format!(
                    "n = {n}: step is not a multiple of the finest study step"
                ));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

/// Fine-grid trajectory sampled every `dt_snapshot`, starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory<T> {
    pub grid: Grid<T>,
    pub dt_snapshot: T,
    pub snapshots: Vec<State<T>>,
}

impl<T: Real> ReferenceTrajectory<T> {
    /// Snapshot at time `t`, which must be a multiple of the snapshot step.
    pub fn at(&self, t: T) -> Option<&State<T>> {
        let m = step_count(t, self.dt_snapshot).ok()?;
        self.snapshots.get(m)
    }

    pub fn final_time(&self) -> T {
        self.dt_snapshot * T::from_usize_exact(self.snapshots.len().saturating_sub(1))
    }
}

/// Runs the reference resolution to `t_end`, storing a snapshot at every
/// multiple of the finest study step. `progress` sees `(step, total)`.
pub fn generate_reference<T: Real>(
    spec: &SweepSpec<T>,
    problem: &Problem<T>,
    mut progress: impl FnMut(usize, usize),
) -> Result<ReferenceTrajectory<T>> {
    spec.validate()?;
    let grid = spec.grid(spec.n_ref)?;
    let params = spec.params_for(spec.n_ref);
    let steps = spec.steps_for(spec.n_ref)?;
    let every = step_count(spec.snapshot_dt(), params.dt)?;
    let mask = split_domain(&grid, problem.shape())?;
    let bdata = problem.boundary_data(&grid)?;
    let initial = problem.initial_state(&grid)?;
    let mut snapshots = vec![initial.clone()];
    run_simulation(&initial, &params, &mask, &bdata, steps, |rec| {
        if rec.step % every == 0 {
            snapshots.push(rec.new.clone());
        }
        progress(rec.step, steps);
        Ok(())
    })?;
    Ok(ReferenceTrajectory {
        grid,
        dt_snapshot: spec.snapshot_dt(),
        snapshots,
    })
}

fn refinement<T: Real>(fine: &Grid<T>, coarse: &Grid<T>) -> Result<usize> {
    let ok = fine.dim() == coarse.dim()
        && fine.len() == coarse.len()
        && coarse.n() > 0
        && fine.n() % coarse.n() == 0;
    if !ok {
        return Err(Error::FieldMismatch(format!(
            "grid n = {} does not refine n = {}",
            fine.n(),
            coarse.n()
        )));
    }
    Ok(fine.n() / coarse.n())
}

/// Block means of cell-major data with `ncomp` values per cell.
fn block_mean<T: Real>(
    fine: &Grid<T>,
    data: &[T],
    ncomp: usize,
    coarse: &Grid<T>,
) -> Result<Vec<T>> {
    let r = refinement(fine, coarse)?;
    let d = coarse.dim();
    let block = r.pow(d as u32);
    let inv = T::one() / T::from_usize_exact(block);
    let mut out = vec![T::zero(); ncomp * coarse.num_cells()];
    for k in 0..coarse.num_cells() {
        let m = coarse.multi_index(k);
        let mut acc = vec![T::zero(); ncomp];
        for b in 0..block {
            let mut idx = [0usize; 3];
            let mut rest = b;
            for a in 0..d {
                idx[a] = m[a] * r + rest % r;
                rest /= r;
            }
            let f = fine.cell_id(idx);
            for (c, v) in acc.iter_mut().enumerate() {
                *v = *v + data[f * ncomp + c];
            }
        }
        for (c, v) in acc.into_iter().enumerate() {
            out[k * ncomp + c] = v * inv;
        }
    }
    Ok(out)
}

/// Exact block-mean restriction of a cell field to a nested coarse grid.
pub fn restrict_field<T: Real>(fine: &Field<T>, coarse: &Grid<T>) -> Result<Field<T>> {
    let data = block_mean(fine.grid(), fine.values(), fine.ncomp(), coarse)?;
    Field::from_vec(coarse, fine.ncomp(), data)
}

/// Block-mean restriction of a per-cell tensor field.
pub fn restrict_tensor<T: Real>(fine: &TensorField<T>, coarse: &Grid<T>) -> Result<TensorField<T>> {
    let dd = coarse.dim() * coarse.dim();
    let data = block_mean(fine.grid(), fine.values(), dd, coarse)?;
    Ok(TensorField::from_vec(coarse, data).expect("block mean keeps the layout"))
}

/// Restriction of a dual field: each fine face contributes in proportion to
/// the overlap of its dual cell with the coarse dual cell.
pub fn restrict_dual<T: Real>(fine: &DualField<T>, coarse: &Grid<T>) -> Result<DualField<T>> {
    let fg = fine.grid();
    let r = refinement(fg, coarse)?;
    let d = coarse.dim();
    let n_f = fg.n() as isize;
    let half = r as f64 / 2.0;
    let span = r as isize;
    let weights: Vec<(isize, T)> = (-span..=span)
        .filter_map(|j| {
            let jf = j as f64;
            let w = (jf + 0.5).min(half) - (jf - 0.5).max(-half);
            (w > 0.0).then(|| (j, T::lit(w)))
        })
        .collect();
    let transverse = r.pow(d as u32 - 1);
    let inv = T::one() / T::from_usize_exact(r * transverse);
    let nc = coarse.num_cells();
    let mut out = vec![T::zero(); coarse.num_faces()];
    for axis in 0..d {
        for k in 0..nc {
            let m = coarse.multi_index(k);
            let mut acc = T::zero();
            for &(j, w) in &weights {
                for t in 0..transverse {
                    let mut idx = [0usize; 3];
                    let mut rest = t;
                    for a in 0..d {
                        if a == axis {
                            let i = ((m[a] + 1) * r) as isize - 1 + j;
                            idx[a] = i.rem_euclid(n_f) as usize;
                        } else {
                            idx[a] = m[a] * r + rest % r;
                            rest /= r;
                        }
                    }
                    acc = acc + w * fine.at(fg.face(axis, fg.cell_id(idx)));
                }
            }
            out[coarse.face(axis, k).0] = acc * inv;
        }
    }
    Ok(DualField::from_vec(coarse, out).expect("one value per face"))
}

/// Replaces cells whose centre lies outside the fluid shape by the solid data
/// `(ρ₀^s, 0, θ_B(t))`.
pub fn overwrite_solid<T: Real>(state: &State<T>, problem: &Problem<T>) -> State<T> {
    let mut s = state.clone();
    let g = *state.grid();
    let d = g.dim();
    let shape = problem.shape();
    let (rho_s, theta_b) = (problem.data.rho_s(), problem.data.theta_b());
    for k in 0..g.num_cells() {
        let x = g.cell_center(k);
        if shape.contains(&x) {
            continue;
        }
        s.rho.set(k, 0, rho_s(state.t, &x));
        for j in 0..d {
            s.u.set(k, j, T::zero());
        }
        s.theta.set(k, 0, theta_b(state.t, &x));
    }
    s
}

/// Solid overwrite followed by block means.
pub fn restrict_state<T: Real>(
    fine: &State<T>,
    coarse: &Grid<T>,
    problem: &Problem<T>,
) -> Result<State<T>> {
    let s = overwrite_solid(fine, problem);
    State::new(
        restrict_field(&s.rho, coarse)?,
        restrict_field(&s.u, coarse)?,
        restrict_field(&s.theta, coarse)?,
        fine.t,
    )
}

/// Error metrics recorded by a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Relative energy at the final time.
    RelativeEnergy,
    /// `L²` distance of `(ρ, u, θ)` at the final time.
    L2Final,
    /// `L^∞(0,T; L²)` distance of `(ρ, u, θ)`.
    LinfL2,
    /// `L²(0,T)` distance of `D_h u`.
    SymGradVelocity,
    /// `L²(0,T)` distance of `∇_E θ`.
    GradTemperature,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::RelativeEnergy,
        Metric::L2Final,
        Metric::LinfL2,
        Metric::SymGradVelocity,
        Metric::GradTemperature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::RelativeEnergy => "rel_energy",
            Metric::L2Final => "l2_final",
            Metric::LinfL2 => "linf_l2",
            Metric::SymGradVelocity => "l2_sym_grad_u",
            Metric::GradTemperature => "l2_grad_theta",
        }
    }

    fn index(self) -> usize {
        Metric::ALL
            .iter()
            .position(|&m| m == self)
            .expect("listed metric")
    }
}

/// One resolution of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct EocRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub eps: f64,
    /// Indexed like [`Metric::ALL`]; `None` when the run failed.
    pub errors: Vec<Option<f64>>,
    /// Order against the previous row; `None` for the first row, failed runs
    /// and non-positive errors.
    pub orders: Vec<Option<f64>>,
    /// `(1/ε) ∫₀ᵀ ∫_{Ω^s_h} (|u|² + (θ − θ_B)²)`.
    pub penalty: Option<f64>,
    /// `‖u‖_{L²((0,T) × Ω^s_h)}`.
    pub solid_velocity: Option<f64>,
    pub newton_iters: usize,
    pub failure: Option<String>,
}

impl EocRow {
    pub fn error(&self, m: Metric) -> Option<f64> {
        self.errors[m.index()]
    }

    pub fn order(&self, m: Metric) -> Option<f64> {
        self.orders[m.index()]
    }
}

/// Rows of a study ordered from coarse to fine.
#[derive(Debug, Clone, PartialEq)]
pub struct EocTable {
    pub rows: Vec<EocRow>,
}

/// Penalty term growth and decay of the solid velocity along a study.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyTrend {
    /// Penalty of each row over the previous one.
    pub ratios: Vec<Option<f64>>,
    pub velocity_decreasing: bool,
}

impl PenaltyTrend {
    /// Ratios at most `bound` and a decreasing solid velocity.
    pub fn holds(&self, bound: f64) -> bool {
        self.velocity_decreasing
            && self
                .ratios
                .iter()
                .all(|r| matches!(r, Some(x) if *x <= bound))
    }
}

impl EocTable {
    /// Recomputes every order from the errors.
    pub fn with_orders(mut self) -> Self {
        let hs: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        for m in Metric::ALL {
            let errs: Vec<f64> = self
                .rows
                .iter()
                .map(|r| r.error(m).unwrap_or(f64::NAN))
                .collect();
            let orders = compute_eoc(&errs, &hs);
            for (i, row) in self.rows.iter_mut().enumerate() {
                row.orders[m.index()] = if i == 0 { None } else { orders[i - 1] };
            }
        }
        self
    }

    pub fn errors(&self, m: Metric) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.error(m)).collect()
    }

    /// Orders between consecutive rows.
    pub fn orders(&self, m: Metric) -> Vec<Option<f64>> {
        self.rows.iter().skip(1).map(|r| r.order(m)).collect()
    }

    pub fn all_succeeded(&self) -> bool {
        self.rows.iter().all(|r| r.failure.is_none())
    }

    /// Errors non-increasing under refinement, allowing one inversion of at
    /// most 5 % between the two coarsest rows.
    pub fn is_monotone(&self, m: Metric) -> bool {
        let e = self.errors(m);
        e.windows(2).enumerate().all(|(i, w)| match (w[0], w[1]) {
            (Some(a), Some(b)) => b <= a || (i == 0 && b <= 1.05 * a),
            _ => false,
        })
    }

    pub fn penalty_trend(&self) -> PenaltyTrend {
        let ratios = self
            .rows
            .windows(2)
            .map(|w| match (w[0].penalty, w[1].penalty) {
                (Some(a), Some(b)) if a > 0.0 => Some(b / a),
                (Some(a), Some(b)) if a == 0.0 && b == 0.0 => Some(1.0),
                _ => None,
            })
            .collect();
        let velocity_decreasing =
            self.rows
                .windows(2)
                .all(|w| match (w[0].solid_velocity, w[1].solid_velocity) {
                    (Some(a), Some(b)) => b < a,
                    _ => false,
                });
        PenaltyTrend {
            ratios,
            velocity_decreasing,
        }
    }
}

/// `log(e_i/e_{i+1}) / log(h_i/h_{i+1})` for consecutive pairs; `None` unless
/// both errors are strictly positive and finite.
pub fn compute_eoc(errors: &[f64], hs: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(errors.len(), hs.len(), "one mesh size per error");
    errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| {
            let ok = e.iter().all(|x| *x > 0.0 && x.is_finite()) && h[0] != h[1];
            ok.then(|| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        })
        .collect()
}

/// Squared distances of one coarse state to the restricted reference.
struct Distances<T> {
    relative: T,
    l2_sq: T,
    sym_grad_sq: T,
    grad_theta_sq: T,
}

fn distances<T: Real>(
    coarse: &State<T>,
    fine: &State<T>,
    problem: &Problem<T>,
    cv: T,
) -> Result<Distances<T>> {
    let g = coarse.grid();
    let reference = restrict_state(fine, g, problem)?;
    let rel = relative_energy(coarse, &reference, cv)?;
    let du = restrict_tensor(&sym_grad_h(&fine.u), g)?;
    let sym_grad_sq = sym_grad_h(&coarse.u)
        .lin_comb(T::one(), &du, -T::one())
        .norm_sq();
    let dt_ref = restrict_dual(&grad_dual(&fine.theta), g)?;
    let gt = grad_dual(&coarse.theta);
    let diff: Vec<T> = gt
        .values()
        .iter()
        .zip(dt_ref.values())
        .map(|(&a, &b)| a - b)
        .collect();
    let diff = DualField::from_vec(g, diff).expect("one value per face");
    Ok(Distances {
        relative: rel.value,
        l2_sq: rel.l2_sq,
        sym_grad_sq,
        grad_theta_sq: dual_inner(&diff, &diff),
    })
}

fn run_row<T: Real>(
    spec: &SweepSpec<T>,
    problem: &Problem<T>,
    reference: &ReferenceTrajectory<T>,
    n: usize,
    row: &mut EocRow,
) -> Result<()> {
    let grid = spec.grid(n)?;
    let params = spec.params_for(n);
    let steps = spec.steps_for(n)?;
    let mask = split_domain(&grid, problem.shape())?;
    let bdata = problem.boundary_data(&grid)?;
    let initial = problem.initial_state(&grid)?;
    let cv = params.cv();
    let fine_at = |t: T| {
        reference
            .at(t)
            .ok_or_else(|| Error::FieldMismatch(format!("reference has no snapshot at t = {t}")))
    };
    let d0 = distances(&initial, fine_at(T::zero())?, problem, cv)?;
    let mut linf = d0.l2_sq;
    let (mut sym, mut grad) = (T::zero(), T::zero());
    let mut last = d0;
    let mut monitor = BoundsMonitor::new(&initial, T::zero(), T::zero());
    let traj = run_simulation(&initial, &params, &mask, &bdata, steps, |rec| {
        let d = distances(rec.new, fine_at(rec.new.t)?, problem, cv)?;
        linf = linf.max(d.l2_sq);
        sym = sym + params.dt * d.sym_grad_sq;
        grad = grad + params.dt * d.grad_theta_sq;
        last = d;
        monitor.update(rec.new, &params, &mask, rec.bdata);
        Ok(())
    })?;
    let f = |x: T| x.to_f64_lossy();
    let mut errors = vec![None; Metric::ALL.len()];
    errors[Metric::RelativeEnergy.index()] = Some(f(last.relative));
    errors[Metric::L2Final.index()] = Some(f(last.l2_sq.sqrt()));
    errors[Metric::LinfL2.index()] = Some(f(linf.sqrt()));
    errors[Metric::SymGradVelocity.index()] = Some(f(sym.sqrt()));
    errors[Metric::GradTemperature.index()] = Some(f(grad.sqrt()));
    row.errors = errors;
    row.penalty = Some(f(monitor.penalty));
    row.solid_velocity = Some(f(monitor.solid_velocity_sq.sqrt()));
    row.newton_iters = traj.stats.iter().map(|s| s.iterations).sum();
    Ok(())
}

/// Runs every study resolution against `reference` and tabulates the errors.
/// A failed run is recorded in its row; the table is still returned.
pub fn convergence_study<T: Real>(
    spec: &SweepSpec<T>,
    problem: &Problem<T>,
    reference: &ReferenceTrajectory<T>,
    mut progress: impl FnMut(&EocRow),
) -> Result<EocTable> {
    spec.validate()?;
    if reference.grid.n() != spec.n_ref || reference.grid.dim() != spec.dim {
        return Err(Error::FieldMismatch(
            "reference does not match the sweep".into(),
        ));
    }
    if reference.final_time() < spec.t_end * (T::one() - T::lit(1e-12)) {
        return Err(Error::FieldMismatch(format!(
            "reference ends at t = {} before t_end = {}",
            reference.final_time(),
            spec.t_end
        )));
    }
    let mut rows = Vec::new();
    for &n in &spec.resolutions {
        let p = spec.params_for(n);
        let mut row = EocRow {
            n,
            h: spec.h(n).to_f64_lossy(),
            dt: p.dt.to_f64_lossy(),
            eps: p.eps.to_f64_lossy(),
            errors: vec![None; Metric::ALL.len()],
            orders: vec![None; Metric::ALL.len()],
            penalty: None,
            solid_velocity: None,
            newton_iters: 0,
            failure: None,
        };
        if let Err(e) = run_row(spec, problem, reference, n, &mut row) {
            row.errors = vec![None; Metric::ALL.len()];
            row.penalty = None;
            row.solid_velocity = None;
            row.failure = Some(e.to_string());
        }
        progress(&row);
        rows.push(row);
    }
    Ok(EocTable { rows }.with_orders())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::project_cells;
    use crate::geometry::FluidShape;
    use crate::problem::{BoundarySpec, InitialSpec};

    fn spec(resolutions: Vec<usize>, n_ref: usize, t_end: f64) -> SweepSpec<f64> {
        SweepSpec {
            dim: 2,
            length: 1.0,
            resolutions,
            n_ref,
            dt: Coupling::new(1.0, 2.0),
            eps: Coupling::new(1.0, 2.0),
            t_end,
            params: SchemeParams::with_steps(1.0, 1.0),
        }
    }

    fn disk() -> FluidShape<f64> {
        FluidShape::ball(2, [0.5, 0.5, 0.0], 0.25)
    }

    #[test]
    fn eoc_of_halving_errors() {
        let o = compute_eoc(&[4e-2, 2e-2, 1e-2], &[0.5, 0.25, 0.125]);
        assert_eq!(o.len(), 2);
        for x in o {
            assert!((x.unwrap() - 1.0).abs() < 1e-14);
        }
        assert_eq!(compute_eoc(&[0.0, 0.0], &[0.5, 0.25]), vec![None]);
        assert_eq!(compute_eoc(&[1.0, f64::NAN], &[0.5, 0.25]), vec![None]);
    }

    #[test]
    fn sweep_constraints() {
        assert!(spec(vec![8, 16, 32], 128, 1.0 / 32.0)
            .violations()
            .is_empty());
        let v = spec(vec![8, 12], 32, 1.0 / 32.0).violations();
        assert!(v.iter().any(|m| m.contains("nested")), "{v:?}");
        assert!(spec(vec![8, 16], 32, 1.0 / 32.0)
            .violations()
            .iter()
            .any(|m| m.contains("4 ×")));
        let v = spec(vec![8], 32, 0.01).violations();
        assert!(v.iter().any(|m| m.contains("integer multiple")), "{v:?}");
        let mut s = spec(vec![8], 32, 1.0 / 32.0);
        s.params.gamma = 0.9;
        assert!(!s.violations().is_empty());
    }

    #[test]
    fn coupling_is_exact_for_dyadic_steps() {
        assert_eq!(Coupling::new(1.0, 2.0).eval(0.125f64), 1.0 / 64.0);
        assert_eq!(Coupling::new(0.5, 1.0).eval(0.25f64), 0.125);
        assert!((Coupling::new(1.0, 0.5).eval(0.25f64) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn restriction_matches_direct_block_mean() {
        let fine = Grid::<f64>::new(2, 64, 1.0).unwrap();
        let coarse = Grid::<f64>::new(2, 16, 1.0).unwrap();
        let f = project_cells(|x| (6.0 * x[0]).sin() * (1.0 + x[1] * x[1]), &fine);
        let r = restrict_field(&f, &coarse).unwrap();
        for k in 0..coarse.num_cells() {
            let (lo, hi) = coarse.cell_bounds(k);
            let members: Vec<f64> = (0..fine.num_cells())
                .filter(|&c| {
                    let x = fine.cell_center(c);
                    (0..2).all(|a| x[a] > lo[a] && x[a] < hi[a])
                })
                .map(|c| f.at(c))
                .collect();
            assert_eq!(members.len(), 16);
            let mean = members.iter().sum::<f64>() / 16.0;
            assert!((r.at(k) - mean).abs() < 1e-15);
        }
        let same = restrict_field(&f, &fine).unwrap();
        assert_eq!(same, f);
        assert!(restrict_field(&f, &Grid::new(2, 24, 1.0).unwrap()).is_err());
    }

    #[test]
    fn dual_restriction_reproduces_coarse_gradient() {
        for dim in [2, 3] {
            let n = if dim == 2 { 8 } else { 4 };
            for r in [1usize, 2, 3, 4] {
                let coarse = Grid::<f64>::new(dim, n, 1.0).unwrap();
                let fine = Grid::<f64>::new(dim, n * r, 1.0).unwrap();
                let c = project_cells(
                    |x| (6.3 * x[0]).sin() + x[1] * x[2] + (6.3 * x[1]).cos(),
                    &coarse,
                );
                let prolonged = Field::scalar_from_fn(&fine, |k| {
                    let m = fine.multi_index(k);
                    c.at(coarse.cell_id([m[0] / r, m[1] / r, m[2] / r]))
                });
                let restricted = restrict_dual(&grad_dual(&prolonged), &coarse).unwrap();
                let direct = grad_dual(&c);
                for (a, b) in restricted.values().iter().zip(direct.values()) {
                    assert!(
                        (a - b).abs() < 1e-12 * (1.0 + b.abs()),
                        "dim {dim} r {r}: {a} vs {b}"
                    );
                }
                let uniform = DualField::from_vec(&fine, vec![2.5; fine.num_faces()]).unwrap();
                let ru = restrict_dual(&uniform, &coarse).unwrap();
                assert!(ru.values().iter().all(|v| (v - 2.5).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn solid_overwrite_uses_boundary_data() {
        let g = Grid::<f64>::new(2, 16, 1.0).unwrap();
        let bc = BoundarySpec {
            theta_b: 2.0,
            rho_s: 3.0,
            ..BoundarySpec::default()
        };
        let p = Problem::new(
            disk(),
            &InitialSpec::constant(1.0, &[0.1, 0.2], 1.0),
            &bc,
            1.0,
            0,
        )
        .unwrap();
        let s = State::constant(&g, 1.0, &[0.1, 0.2], 1.0).unwrap();
        let o = overwrite_solid(&s, &p);
        for k in 0..g.num_cells() {
            let inside = p.shape().contains(&g.cell_center(k));
            assert_eq!(o.rho.at(k), if inside { 1.0 } else { 3.0 });
            assert_eq!(o.theta.at(k), if inside { 1.0 } else { 2.0 });
            assert_eq!(o.u.get(k, 1), if inside { 0.2 } else { 0.0 });
        }
    }

    #[test]
    fn constant_state_has_zero_error() {
        let s = spec(vec![8, 16], 64, 1.0 / 64.0);
        let p = Problem::new(
            disk(),
            &InitialSpec::constant(1.0, &[0.0, 0.0], 1.0),
            &BoundarySpec::default(),
            1.0,
            0,
        )
        .unwrap();
        let reference = generate_reference(&s, &p, |_, _| {}).unwrap();
        assert_eq!(reference.snapshots.len(), 5);
        assert_eq!(reference.final_time(), 1.0 / 64.0);
        assert!(reference
            .snapshots
            .iter()
            .all(|x| x.rho.values().iter().all(|&v| v == 1.0)));
        let table = convergence_study(&s, &p, &reference, |_| {}).unwrap();
        assert!(
            table.all_succeeded(),
            "{:?}",
            table.rows.iter().map(|r| &r.failure).collect::<Vec<_>>()
        );
        for m in Metric::ALL {
            assert!(table.errors(m).iter().all(|e| *e == Some(0.0)), "{m:?}");
            assert!(table.orders(m).iter().all(|o| o.is_none()));
        }
        let trend = table.penalty_trend();
        assert_eq!(trend.ratios, vec![Some(1.0)]);
        assert!(!trend.velocity_decreasing);
    }

    #[test]
    fn smooth_study_errors_shrink() {
        let s = spec(vec![8, 16], 64, 1.0 / 32.0);
        let init = InitialSpec {
            amplitude: 0.3,
            width: 0.15,
            ..InitialSpec::default()
        };
        let p = Problem::new(disk(), &init, &BoundarySpec::default(), 1.0, 0).unwrap();
        let reference = generate_reference(&s, &p, |_, _| {}).unwrap();
        let table = convergence_study(&s, &p, &reference, |_| {}).unwrap();
        assert!(
            table.all_succeeded(),
            "{:?}",
            table.rows.iter().map(|r| &r.failure).collect::<Vec<_>>()
        );
        for m in Metric::ALL {
            let e = table.errors(m);
            assert!(e.iter().all(|x| x.unwrap() > 0.0), "{m:?} {e:?}");
        }
        assert!(table.is_monotone(Metric::L2Final));
        assert!(table.rows[1].order(Metric::L2Final).is_some());
    }

    #[test]
    fn monotonicity_allows_one_small_coarse_inversion() {
        let row = |e: f64| EocRow {
            n: 0,
            h: 0.0,
            dt: 0.0,
            eps: 0.0,
            errors: vec![Some(e); 5],
            orders: vec![None; 5],
            penalty: None,
            solid_velocity: None,
            newton_iters: 0,
            failure: None,
        };
        let t = |es: &[f64]| EocTable {
            rows: es.iter().map(|&e| row(e)).collect(),
        };
        assert!(t(&[1.0, 1.04, 0.5]).is_monotone(Metric::L2Final));
        assert!(!t(&[1.0, 1.1, 0.5]).is_monotone(Metric::L2Final));
        assert!(!t(&[1.0, 0.5, 0.51]).is_monotone(Metric::L2Final));
    }
}
