//! Piecewise-constant fields, cell projection, and face traces.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{FaceId, Grid, Point};
use crate::num::{pairwise_sum, Real};

/// Gauss points per axis used by [`project_cells`].
pub const PROJECTION_ORDER: usize = 4;

/// Piecewise-constant field with `ncomp` components per cell, stored cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Grid<T>,
    ncomp: usize,
    data: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: &Grid<T>, ncomp: usize) -> Self {
        Field {
            grid: *grid,
            ncomp,
            data: vec![T::zero(); ncomp * grid.num_cells()],
        }
    }

    pub fn constant(grid: &Grid<T>, ncomp: usize, value: T) -> Self {
        Field {
            grid: *grid,
            ncomp,
            data: vec![value; ncomp * grid.num_cells()],
        }
    }

    pub fn from_vec(grid: &Grid<T>, ncomp: usize, data: Vec<T>) -> Result<Self> {
        if ncomp == 0 || data.len() != ncomp * grid.num_cells() {
            return Err(Error::FieldMismatch(format!(
                "expected {} values ({} components), got {}",
                ncomp * grid.num_cells(),
                ncomp,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field data".into()));
        }
        Ok(Field {
            grid: *grid,
            ncomp,
            data,
        })
    }

    pub fn scalar_from_fn(grid: &Grid<T>, f: impl Fn(usize) -> T) -> Self {
        Field {
            grid: *grid,
            ncomp: 1,
            data: (0..grid.num_cells()).map(f).collect(),
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    #[inline]
    pub fn get(&self, cell: usize, comp: usize) -> T {
        self.data[cell * self.ncomp + comp]
    }

    #[inline]
    pub fn set(&mut self, cell: usize, comp: usize, value: T) {
        self.data[cell * self.ncomp + comp] = value;
    }

    /// Scalar value of a one-component field.
    #[inline]
    pub fn at(&self, cell: usize) -> T {
        self.data[cell * self.ncomp]
    }

    pub fn cell(&self, cell: usize) -> &[T] {
        &self.data[cell * self.ncomp..(cell + 1) * self.ncomp]
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<T> {
        self.data
    }

    /// Copy of one component as a scalar field.
    pub fn component(&self, comp: usize) -> Field<T> {
        Field::scalar_from_fn(&self.grid, |k| self.get(k, comp))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Field<T> {
        Field {
            grid: self.grid,
            ncomp: self.ncomp,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: T, other: &Field<T>, b: T) -> Field<T> {
        debug_assert_eq!(self.data.len(), other.data.len());
        Field {
            grid: self.grid,
            ncomp: self.ncomp,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn min(&self) -> T {
        self.data.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max(&self) -> T {
        self.data.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn max_abs(&self) -> T {
        crate::num::max_abs(&self.data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `∫ f` for a scalar field.
    pub fn integral(&self) -> T {
        assert_eq!(self.ncomp, 1, "integral of a multi-component field");
        pairwise_sum(&self.data) * self.grid.cell_volume()
    }

    /// Face traces of one component.
    pub fn trace(&self, face: FaceId, comp: usize) -> FaceTrace<T> {
        face_traces(self, face, comp)
    }
}

/// `∫ f g` for scalar fields, as an exact cell sum.
pub fn inner_product<T: Real>(f: &Field<T>, g: &Field<T>) -> T {
    let terms: Vec<T> = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(&a, &b)| a * b)
        .collect();
    pairwise_sum(&terms) * f.grid().cell_volume()
}

/// Inner/outer values on a face, oriented by the stored normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceTrace<T> {
    pub inner: T,
    pub outer: T,
}

impl<T: Real> FaceTrace<T> {
    #[inline]
    pub fn avg(&self) -> T {
        (self.inner + self.outer) * T::half()
    }

    #[inline]
    pub fn jump(&self) -> T {
        self.outer - self.inner
    }

    /// The same face seen with the opposite normal.
    #[inline]
    pub fn flipped(&self) -> Self {
        FaceTrace {
            inner: self.outer,
            outer: self.inner,
        }
    }
}

pub fn face_traces<T: Real>(field: &Field<T>, face: FaceId, comp: usize) -> FaceTrace<T> {
    let (k, l) = field.grid().face_cells(face);
    FaceTrace {
        inner: field.get(k, comp),
        outer: field.get(l, comp),
    }
}

/// `(r^up, r^down)` for the normal velocity `avg(u)·n`; ties select the inner value.
#[inline]
pub fn upwind_trace<T: Real>(r: FaceTrace<T>, normal_velocity: T) -> (T, T) {
    if normal_velocity >= T::zero() {
        (r.inner, r.outer)
    } else {
        (r.outer, r.inner)
    }
}

/// Upwind pair for `r` using the averaged velocity of field `u` on `face`.
pub fn upwind_on_face<T: Real>(r: &Field<T>, u: &Field<T>, face: FaceId) -> (T, T) {
    let axis = r.grid().face_axis(face);
    let w = face_traces(u, face, axis).avg();
    upwind_trace(face_traces(r, face, 0), w)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q {
        // Chebyshev initial guess, then Newton on P_q
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if q == 1 { x } else { p1 };
            let pm1 = if q == 1 { 1.0 } else { p0 };
            dp = q as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn tensor_rule<T: Real>(grid: &Grid<T>, q: usize) -> Vec<(Point<T>, T)> {
    let (x1, w1) = gauss_legendre(q);
    let d = grid.dim();
    let total = q.pow(d as u32);
    let mut rule = Vec::with_capacity(total);
    for m in 0..total {
        let mut p = [T::zero(); 3];
        let mut w = 1.0;
        let mut rest = m;
        for slot in p.iter_mut().take(d) {
            let i = rest % q;
            rest /= q;
            *slot = T::lit(x1[i]);
            w *= w1[i];
        }
        rule.push((p, T::lit(w)));
    }
    rule
}

/// Cell means of `f` (the projection onto piecewise constants) by
/// tensor-product Gauss quadrature of order `q` per axis.
pub fn project_cells_with_order<T, F>(f: F, grid: &Grid<T>, ncomp: usize, q: usize) -> Field<T>
where
    T: Real,
    F: Fn(&Point<T>, &mut [T]) + Sync,
{
    let rule = tensor_rule(grid, q);
    let h = grid.h();
    let d = grid.dim();
    let mut data = vec![T::zero(); ncomp * grid.num_cells()];
    data.par_chunks_mut(ncomp)
        .enumerate()
        .for_each(|(cell, out)| {
            let (lo, _) = grid.cell_bounds(cell);
            let mut buf = vec![T::zero(); ncomp];
            let mut acc = vec![T::zero(); ncomp];
            let mut first: Option<Vec<T>> = None;
            let mut uniform = true;
            for (xi, w) in &rule {
                let mut x = [T::zero(); 3];
                for a in 0..d {
                    x[a] = lo[a] + xi[a] * h;
                }
                f(&x, &mut buf);
                for c in 0..ncomp {
                    acc[c] = acc[c] + *w * buf[c];
                }
                match &first {
                    None => first = Some(buf.clone()),
                    Some(v) => uniform &= v == &buf,
                }
            }
            // a cellwise constant integrand is reproduced exactly
            match first {
                Some(v) if uniform => out.copy_from_slice(&v),
                _ => out.copy_from_slice(&acc),
            }
        });
    Field {
        grid: *grid,
        ncomp,
        data,
    }
}

/// Projection of a scalar function with the default quadrature order.
pub fn project_cells<T: Real>(f: impl Fn(&Point<T>) -> T + Sync, grid: &Grid<T>) -> Field<T> {
    project_cells_with_order(|x, out: &mut [T]| out[0] = f(x), grid, 1, PROJECTION_ORDER)
}
