use rayon::prelude::*;

use super::params::SchemeParams;
use super::residual::{residual_unchecked, viscous_stress};
use super::state::{BoundaryData, State};
use crate::fields::Field;
use crate::mesh::{DomainMask, Grid};
use crate::num::Real;
use crate::ops::{div_h, TensorField};
use crate::sparse::CsrMatrix;

/// Transported quantity `r = ρ q` in a flux.
#[derive(Clone, Copy)]
enum Carrier {
    Density,
    Velocity(usize),
    Temperature,
}

struct Ctx<'a, T> {
    g: Grid<T>,
    d: usize,
    s: &'a State<T>,
    diffusion: T,
}

impl<T: Real> Ctx<'_, T> {
    #[inline]
    fn idx(&self, cell: usize, comp: usize) -> usize {
        cell * (self.d + 2) + comp
    }

    fn q(&self, cell: usize, c: Carrier) -> (T, Option<usize>) {
        match c {
            Carrier::Density => (T::one(), None),
            Carrier::Velocity(j) => (self.s.u.get(cell, j), Some(1 + j)),
            Carrier::Temperature => (self.s.theta.at(cell), Some(self.d + 1)),
        }
    }

    /// Adds `coef · ∂F/∂x` for the flux of `ρ q` across the face `a → a + e_axis`.
    fn flux(&self, row: &mut Vec<(usize, T)>, coef: T, axis: usize, a: usize, c: Carrier) {
        let b = self.g.shift(a, axis, 1);
        let s = self.s;
        let w = (s.u.get(a, axis) + s.u.get(b, axis)) * T::half();
        let up_a = w >= T::zero();
        let (qa, comp) = self.q(a, c);
        let (qb, _) = self.q(b, c);
        let (ra, rb) = (s.rho.at(a), s.rho.at(b));
        let r_up = if up_a { ra * qa } else { rb * qb };
        let dfa = if up_a { w } else { T::zero() } + self.diffusion;
        let dfb = if up_a { T::zero() } else { w } - self.diffusion;
        row.push((self.idx(a, 0), coef * dfa * qa));
        row.push((self.idx(b, 0), coef * dfb * qb));
        if let Some(m) = comp {
            row.push((self.idx(a, m), coef * dfa * ra));
            row.push((self.idx(b, m), coef * dfb * rb));
        }
        let half = coef * r_up * T::half();
        row.push((self.idx(a, 1 + axis), half));
        row.push((self.idx(b, 1 + axis), half));
    }

    /// Flux divergence `(1/h) Σ_i (F_{K+½e_i} − F_{K−½e_i})` of `ρ q`.
    fn flux_divergence(&self, row: &mut Vec<(usize, T)>, scale: T, k: usize, c: Carrier) {
        let inv_h = scale / self.g.h();
        for i in 0..self.d {
            self.flux(row, inv_h, i, k, c);
            self.flux(row, -inv_h, i, self.g.shift(k, i, -1), c);
        }
    }
}

struct Env<'a, T> {
    ctx: Ctx<'a, T>,
    g: Grid<T>,
    new: &'a State<T>,
    mask: &'a DomainMask,
    stress: TensorField<T>,
    div_u: Field<T>,
    inv_2h: T,
    inv_h2: T,
    inv_dt: T,
    inv_eps: T,
    cv: T,
    mu: T,
    lambda: T,
    kappa: T,
}

impl<'a, T: Real> Env<'a, T> {
    fn new(new: &'a State<T>, params: &SchemeParams<T>, mask: &'a DomainMask) -> Self {
        let g = *new.grid();
        let h = g.h();
        Env {
            ctx: Ctx {
                g,
                d: g.dim(),
                s: new,
                diffusion: params.diffusion(h),
            },
            g,
            new,
            mask,
            stress: viscous_stress(&new.u, params.mu, params.lambda),
            div_u: div_h(&new.u),
            inv_2h: T::half() / h,
            inv_h2: T::one() / (h * h),
            inv_dt: T::one() / params.dt,
            inv_eps: T::one() / params.eps,
            cv: params.cv(),
            mu: params.mu,
            lambda: params.lambda,
            kappa: params.kappa,
        }
    }
}

/// Entries of the `d + 2` rows of cell `k`, in a state-independent order.
fn emit_cell<T: Real>(e: &Env<'_, T>, k: usize, block: &mut [Vec<(usize, T)>]) {
    let d = e.g.dim();
    let h = e.g.h();
    let (inv_2h, inv_h2, inv_dt, inv_eps, cv) = (e.inv_2h, e.inv_h2, e.inv_dt, e.inv_eps, e.cv);
    let (mu, lambda, kappa) = (e.mu, e.lambda, e.kappa);
    for row in block.iter_mut() {
        row.clear();
    }
    let rho = e.new.rho.at(k);
    let th = e.new.theta.at(k);
    let ind = e.mask.solid_indicator::<T>(k);

    // continuity
    let row = &mut block[0];
    row.push((e.ctx.idx(k, 0), inv_dt));
    e.ctx.flux_divergence(row, T::one(), k, Carrier::Density);

    // momentum
    for j in 0..d {
        let row = &mut block[1 + j];
        let uj = e.new.u.get(k, j);
        row.push((e.ctx.idx(k, 0), uj * inv_dt));
        row.push((e.ctx.idx(k, 1 + j), rho * inv_dt + ind * inv_eps));
        e.ctx
            .flux_divergence(row, T::one(), k, Carrier::Velocity(j));
        // −(div_h S)_j = −Σ_i (S_ji(K+e_i) − S_ji(K−e_i)) / 2h
        for i in 0..d {
            for sgn in [1isize, -1] {
                let m = e.g.shift(k, i, sgn);
                let c0 = -T::lit(sgn as f64) * inv_2h;
                let cm = c0 * mu * inv_2h;
                row.push((e.ctx.idx(e.g.shift(m, i, 1), 1 + j), cm));
                row.push((e.ctx.idx(e.g.shift(m, i, -1), 1 + j), -cm));
                row.push((e.ctx.idx(e.g.shift(m, j, 1), 1 + i), cm));
                row.push((e.ctx.idx(e.g.shift(m, j, -1), 1 + i), -cm));
                if i == j {
                    let cl = c0 * lambda * inv_2h;
                    for a in 0..d {
                        row.push((e.ctx.idx(e.g.shift(m, a, 1), 1 + a), cl));
                        row.push((e.ctx.idx(e.g.shift(m, a, -1), 1 + a), -cl));
                    }
                }
            }
        }
        // pressure gradient
        for sgn in [1isize, -1] {
            let m = e.g.shift(k, j, sgn);
            let c = T::lit(sgn as f64) * inv_2h;
            let (rm, tm) = (e.new.rho.at(m), e.new.theta.at(m));
            let positive = tm > T::zero();
            row.push((e.ctx.idx(m, 0), if positive { c * tm } else { T::zero() }));
            row.push((
                e.ctx.idx(m, d + 1),
                if positive { c * rm } else { T::zero() },
            ));
        }
    }

    // internal energy
    let row = &mut block[d + 1];
    row.push((e.ctx.idx(k, 0), cv * th * inv_dt));
    row.push((
        e.ctx.idx(k, d + 1),
        cv * rho * inv_dt + ind * inv_eps + T::lit(2.0 * d as f64) * kappa * inv_h2,
    ));
    e.ctx.flux_divergence(row, cv, k, Carrier::Temperature);
    for i in 0..d {
        row.push((e.ctx.idx(e.g.shift(k, i, 1), d + 1), -kappa * inv_h2));
        row.push((e.ctx.idx(e.g.shift(k, i, -1), d + 1), -kappa * inv_h2));
    }
    // −S:∇u, with ∂(S:∇u)/∂∇u = 2S
    for j in 0..d {
        for i in 0..d {
            let c = e.stress.get(k, j, i) / h;
            row.push((e.ctx.idx(e.g.shift(k, i, 1), 1 + j), -c));
            row.push((e.ctx.idx(e.g.shift(k, i, -1), 1 + j), c));
        }
    }
    // + p div u
    let positive = th > T::zero();
    let p = if positive { rho * th } else { T::zero() };
    let dv = e.div_u.at(k);
    row.push((e.ctx.idx(k, 0), if positive { th * dv } else { T::zero() }));
    row.push((
        e.ctx.idx(k, d + 1),
        if positive { rho * dv } else { T::zero() },
    ));
    for i in 0..d {
        row.push((e.ctx.idx(e.g.shift(k, i, 1), 1 + i), p * inv_2h));
        row.push((e.ctx.idx(e.g.shift(k, i, -1), 1 + i), -p * inv_2h));
    }
}

/// Sparsity pattern of the Jacobian plus, for every emitted entry, its slot
/// in the CSR value array.
#[derive(Debug, Clone)]
pub struct JacobianPattern<T> {
    structure: CsrMatrix<T>,
    slots: Vec<usize>,
    slot_ptr: Vec<usize>,
}

impl<T: Real> JacobianPattern<T> {
    /// Builds the pattern for `grid`; the state used is irrelevant.
    pub fn new(grid: &Grid<T>) -> Self {
        let d = grid.dim();
        let b = d + 2;
        let nc = grid.num_cells();
        let probe = State::constant(grid, T::one(), &vec![T::one(); d], T::one())
            .expect("valid probe state");
        let params = SchemeParams::with_steps(T::one(), T::one());
        let mask = DomainMask::all_fluid(nc);
        let env = Env::new(&probe, &params, &mask);
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); b * nc];
        for (k, block) in rows.chunks_mut(b).enumerate() {
            emit_cell(&env, k, block);
        }
        let structure = CsrMatrix::from_rows(b * nc, rows.clone());
        let mut slots = Vec::new();
        let mut slot_ptr = vec![0];
        for (r, row) in rows.iter().enumerate() {
            let (cols, _) = structure.row(r);
            for &(c, _) in row {
                slots.push(cols.binary_search(&c).expect("column in pattern"));
            }
            slot_ptr.push(slots.len());
        }
        JacobianPattern {
            structure,
            slots,
            slot_ptr,
        }
    }

    pub fn matches(&self, grid: &Grid<T>) -> bool {
        self.structure.nrows() == (grid.dim() + 2) * grid.num_cells()
    }

    /// Analytic Jacobian at `new` (see [`assemble_jacobian`]).
    pub fn assemble(
        &self,
        new: &State<T>,
        params: &SchemeParams<T>,
        mask: &DomainMask,
    ) -> CsrMatrix<T> {
        let g = *new.grid();
        assert!(self.matches(&g), "Jacobian pattern built for another grid");
        let b = g.dim() + 2;
        let env = Env::new(new, params, mask);
        let mut values = vec![T::zero(); self.structure.nnz()];
        let indptr = self.structure.indptr();
        let mut chunks = Vec::with_capacity(g.num_cells());
        let mut rest = values.as_mut_slice();
        for k in 0..g.num_cells() {
            let len = indptr[(k + 1) * b] - indptr[k * b];
            let (head, tail) = rest.split_at_mut(len);
            chunks.push(head);
            rest = tail;
        }
        chunks.into_par_iter().enumerate().for_each_init(
            || vec![Vec::new(); b],
            |block, (k, out)| {
                emit_cell(&env, k, block);
                let base = indptr[k * b];
                for (m, row) in block.iter().enumerate() {
                    let r = k * b + m;
                    let off = indptr[r] - base;
                    let slots = &self.slots[self.slot_ptr[r]..self.slot_ptr[r + 1]];
                    for (&(_, v), &s) in row.iter().zip(slots) {
                        out[off + s] = out[off + s] + v;
                    }
                }
            },
        );
        self.structure.with_values(values)
    }
}

/// Analytic Jacobian of [`super::assemble_residual`] with respect to the new
/// state, with upwind directions taken from `new`.
///
/// Every stencil entry is stored even when its value is zero, so the sparsity
/// pattern depends only on the grid.
pub fn assemble_jacobian<T: Real>(
    new: &State<T>,
    params: &SchemeParams<T>,
    mask: &DomainMask,
) -> CsrMatrix<T> {
    JacobianPattern::new(new.grid()).assemble(new, params, mask)
}

/// Dense central-difference Jacobian of the residual, column by column.
/// Meant for verification on small grids.
pub fn finite_difference_jacobian<T: Real>(
    new: &State<T>,
    old: &State<T>,
    params: &SchemeParams<T>,
    mask: &DomainMask,
    bdata: &BoundaryData<T>,
    rel_step: T,
) -> Vec<Vec<T>> {
    let g = *new.grid();
    let x0 = new.to_vector();
    let n = x0.len();
    let scale = x0.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let step = rel_step * scale;
    let mut jac = vec![vec![T::zero(); n]; n];
    let mut x = x0.clone();
    for col in 0..n {
        x[col] = x0[col] + step;
        let plus = State::from_vector(&g, &x, new.t).expect("perturbed state");
        let rp = residual_unchecked(&plus, old, params, mask, bdata);
        x[col] = x0[col] - step;
        let minus = State::from_vector(&g, &x, new.t).expect("perturbed state");
        let rm = residual_unchecked(&minus, old, params, mask, bdata);
        x[col] = x0[col];
        for row in 0..n {
            jac[row][col] = (rp[row] - rm[row]) / (T::two() * step);
        }
    }
    jac
}
