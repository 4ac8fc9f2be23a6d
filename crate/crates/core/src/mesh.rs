//! Uniform periodic mesh, face topology, and the fluid/solid/strip splitting.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::{BoxRelation, FluidShape};
use crate::num::Real;

/// Point in physical space; components past `dim` are zero.
pub type Point<T> = [T; 3];

/// Index of a face: the face between `cell` and `cell + e_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FaceId(pub usize);

/// Uniform structured mesh of the torus `[0, L)^d`.
///
/// Cells are numbered with axis 0 running fastest. Face `axis * cells + K`
/// separates `K` (the inner cell) from `K + e_axis` (the outer cell); its
/// normal is `e_axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    dim: usize,
    n: usize,
    len: T,
    h: T,
}

impl<T: Real> Grid<T> {
    pub fn new(dim: usize, n: usize, len: T) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if n < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 cells per axis, got {n}"
            )));
        }
        if !(len > T::zero()) || !len.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "torus side length must be positive, got {len}"
            )));
        }
        Ok(Grid {
            dim,
            n,
            len,
            h: len / T::from_usize_exact(n),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> T {
        self.len
    }

    #[inline]
    pub fn h(&self) -> T {
        self.h
    }

    #[inline]
    pub fn num_cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    #[inline]
    pub fn num_faces(&self) -> usize {
        self.dim * self.num_cells()
    }

    /// `|K| = h^d`.
    #[inline]
    pub fn cell_volume(&self) -> T {
        self.h.powi(self.dim as i32)
    }

    /// `|σ| = h^(d-1)`.
    #[inline]
    pub fn face_area(&self) -> T {
        self.h.powi(self.dim as i32 - 1)
    }

    /// `|D_σ| = h^d`.
    #[inline]
    pub fn dual_volume(&self) -> T {
        self.cell_volume()
    }

    pub fn domain_volume(&self) -> T {
        self.len.powi(self.dim as i32)
    }

    #[inline]
    pub fn multi_index(&self, cell: usize) -> [usize; 3] {
        let n = self.n;
        let mut idx = [0; 3];
        let mut rest = cell;
        for slot in idx.iter_mut().take(self.dim) {
            *slot = rest % n;
            rest /= n;
        }
        idx
    }

    #[inline]
    pub fn cell_id(&self, idx: [usize; 3]) -> usize {
        let n = self.n;
        let mut id = 0;
        for a in (0..self.dim).rev() {
            id = id * n + idx[a] % n;
        }
        id
    }

    /// Cell reached by moving `offset` cells along `axis` with periodic wrap.
    #[inline]
    pub fn shift(&self, cell: usize, axis: usize, offset: isize) -> usize {
        let n = self.n;
        let stride = n.pow(axis as u32);
        let i = (cell / stride) % n;
        let j = (i as isize + offset).rem_euclid(n as isize) as usize;
        cell + j * stride - i * stride
    }

    #[inline]
    pub fn face(&self, axis: usize, inner: usize) -> FaceId {
        FaceId(axis * self.num_cells() + inner)
    }

    #[inline]
    pub fn face_axis(&self, face: FaceId) -> usize {
        face.0 / self.num_cells()
    }

    /// `(inner, outer)` cells of a face; the normal points from inner to outer.
    #[inline]
    pub fn face_cells(&self, face: FaceId) -> (usize, usize) {
        let nc = self.num_cells();
        let axis = face.0 / nc;
        let inner = face.0 % nc;
        (inner, self.shift(inner, axis, 1))
    }

    /// The `2d` faces of a cell with the sign of their normal relative to the
    /// outward normal of the cell (`+1` when the cell is the inner cell).
    pub fn cell_faces(&self, cell: usize) -> Vec<(FaceId, i8)> {
        let mut out = Vec::with_capacity(2 * self.dim);
        for axis in 0..self.dim {
            out.push((self.face(axis, cell), 1));
            out.push((self.face(axis, self.shift(cell, axis, -1)), -1));
        }
        out
    }

    pub fn cell_center(&self, cell: usize) -> Point<T> {
        let idx = self.multi_index(cell);
        let mut x = [T::zero(); 3];
        for a in 0..self.dim {
            x[a] = (T::from_usize_exact(idx[a]) + T::half()) * self.h;
        }
        x
    }

    /// Lower and upper corners of a cell.
    pub fn cell_bounds(&self, cell: usize) -> (Point<T>, Point<T>) {
        let idx = self.multi_index(cell);
        let mut lo = [T::zero(); 3];
        let mut hi = [T::zero(); 3];
        for a in 0..self.dim {
            lo[a] = T::from_usize_exact(idx[a]) * self.h;
            hi[a] = T::from_usize_exact(idx[a] + 1) * self.h;
        }
        (lo, hi)
    }

    pub fn face_center(&self, face: FaceId) -> Point<T> {
        let axis = self.face_axis(face);
        let (inner, _) = self.face_cells(face);
        let mut x = self.cell_center(inner);
        x[axis] = x[axis] + self.h * T::half();
        x
    }

    /// All cells in the closed Moore neighbourhood (3^d cells including `cell`).
    pub fn moore_neighbourhood(&self, cell: usize) -> Vec<usize> {
        let mut cells = vec![cell];
        for axis in 0..self.dim {
            let current = cells.clone();
            for c in current {
                cells.push(self.shift(c, axis, -1));
                cells.push(self.shift(c, axis, 1));
            }
        }
        cells
    }

    /// Whether two grids describe the same mesh.
    pub fn same_as(&self, other: &Grid<T>) -> bool {
        self.dim == other.dim && self.n == other.n && self.len == other.len
    }
}

/// Splitting of the cells into fluid/solid and inner/strip/outer parts.
#[derive(Debug, Clone)]
pub struct DomainMask {
    fluid: Vec<bool>,
    strip: Vec<bool>,
    /// Moore distance of a solid cell to the nearest fluid cell (0 for fluid cells).
    solid_layer: Vec<usize>,
}

/// Cell label with respect to the inner/strip/outer splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    Inner,
    Strip,
    Outer,
}

impl DomainMask {
    pub fn num_cells(&self) -> usize {
        self.fluid.len()
    }

    #[inline]
    pub fn is_fluid(&self, cell: usize) -> bool {
        self.fluid[cell]
    }

    #[inline]
    pub fn is_solid(&self, cell: usize) -> bool {
        !self.fluid[cell]
    }

    #[inline]
    pub fn is_strip(&self, cell: usize) -> bool {
        self.strip[cell]
    }

    #[inline]
    pub fn is_inner(&self, cell: usize) -> bool {
        self.fluid[cell] && !self.strip[cell]
    }

    #[inline]
    pub fn is_outer(&self, cell: usize) -> bool {
        !self.fluid[cell] && !self.strip[cell]
    }

    pub fn zone(&self, cell: usize) -> Zone {
        if self.strip[cell] {
            Zone::Strip
        } else if self.fluid[cell] {
            Zone::Inner
        } else {
            Zone::Outer
        }
    }

    /// Value of the solid indicator on a cell (1 on penalized cells).
    #[inline]
    pub fn solid_indicator<T: Real>(&self, cell: usize) -> T {
        if self.fluid[cell] {
            T::zero()
        } else {
            T::one()
        }
    }

    pub fn count_fluid(&self) -> usize {
        self.fluid.iter().filter(|&&f| f).count()
    }

    pub fn count_solid(&self) -> usize {
        self.num_cells() - self.count_fluid()
    }

    pub fn count_strip(&self) -> usize {
        self.strip.iter().filter(|&&s| s).count()
    }

    pub fn count_inner(&self) -> usize {
        (0..self.num_cells()).filter(|&k| self.is_inner(k)).count()
    }

    pub fn count_outer(&self) -> usize {
        (0..self.num_cells()).filter(|&k| self.is_outer(k)).count()
    }

    /// Solid cells lying between `k` and 2 Moore layers beyond the fluid cells:
    /// the strip pushed `k` cells into the solid (`k` is 1 or 2).
    pub fn shifted_strip(&self, k: usize) -> Vec<bool> {
        self.solid_layer
            .iter()
            .map(|&l| l >= k.max(1) && l <= 2)
            .collect()
    }

    /// Mask with every cell fluid.
    pub fn all_fluid(num_cells: usize) -> Self {
        DomainMask {
            fluid: vec![true; num_cells],
            strip: vec![false; num_cells],
            solid_layer: vec![0; num_cells],
        }
    }

    /// Checks the partition and inclusion properties; returns a description of
    /// the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for k in 0..self.num_cells() {
            let labels = [self.is_inner(k), self.is_strip(k), self.is_outer(k)];
            if labels.iter().filter(|&&b| b).count() != 1 {
                return Err(format!(
                    "cell {k} is not in exactly one of inner/strip/outer"
                ));
            }
            if self.is_inner(k) && !self.is_fluid(k) {
                return Err(format!("inner cell {k} is not fluid"));
            }
            if self.is_outer(k) && !self.is_solid(k) {
                return Err(format!("outer cell {k} is not solid"));
            }
        }
        Ok(())
    }
}

/// Builds the uniform torus mesh.
pub fn build_grid<T: Real>(dim: usize, n: usize, len: T) -> Result<Grid<T>> {
    Grid::new(dim, n, len)
}

fn cell_sample_points<T: Real>(grid: &Grid<T>, cell: usize) -> Vec<Point<T>> {
    let (lo, hi) = grid.cell_bounds(cell);
    let d = grid.dim();
    let mut pts = Vec::with_capacity((1 << d) + 1);
    for mask in 0..(1usize << d) {
        let mut p = [T::zero(); 3];
        for a in 0..d {
            p[a] = if mask & (1 << a) != 0 { hi[a] } else { lo[a] };
        }
        pts.push(p);
    }
    pts.push(grid.cell_center(cell));
    pts
}

/// Splits the mesh against a fluid shape.
///
/// A cell is fluid when its `2^d` corners and centre lie strictly inside the
/// shape (tangent cells are therefore solid). A cell belongs to the strip when
/// some cell of its closed Moore neighbourhood meets the shape boundary.
pub fn split_domain<T: Real>(grid: &Grid<T>, shape: &FluidShape<T>) -> Result<DomainMask> {
    shape.validate_for(grid)?;
    let nc = grid.num_cells();
    let fluid: Vec<bool> = (0..nc)
        .map(|k| {
            cell_sample_points(grid, k)
                .iter()
                .all(|p| shape.contains(p))
        })
        .collect();
    let touches: Vec<bool> = (0..nc)
        .map(|k| {
            let (lo, hi) = grid.cell_bounds(k);
            shape.classify_box(&lo, &hi, grid.dim()) == BoxRelation::Straddles
        })
        .collect();
    let strip: Vec<bool> = (0..nc)
        .map(|k| grid.moore_neighbourhood(k).into_iter().any(|l| touches[l]))
        .collect();

    // multi-source BFS from the fluid cells over Moore neighbours
    let mut solid_layer = vec![usize::MAX; nc];
    let mut queue = VecDeque::new();
    for k in 0..nc {
        if fluid[k] {
            solid_layer[k] = 0;
            queue.push_back(k);
        }
    }
    while let Some(k) = queue.pop_front() {
        let next = solid_layer[k] + 1;
        for l in grid.moore_neighbourhood(k) {
            if solid_layer[l] == usize::MAX {
                solid_layer[l] = next;
                queue.push_back(l);
            }
        }
    }

    Ok(DomainMask {
        fluid,
        strip,
        solid_layer,
    })
}
