//! Discrete differential operators on the periodic mesh.
//!
//! Cell operators use the central form `(r_{K+e_i} − r_{K−e_i}) / 2h`, which
//! equals the face-average sum over the faces of `K`. Dual operators live on
//! faces and store the normal component only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fields::Field;
use crate::mesh::{FaceId, Grid};
use crate::num::{pairwise_sum, Real};
use crate::sparse::CsrMatrix;

/// Per-cell `d×d` matrices, entry `(j, i)` stored at `j*d + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField<T> {
    grid: Grid<T>,
    data: Vec<T>,
}

impl<T: Real> TensorField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        let d = grid.dim();
        TensorField {
            grid: *grid,
            data: vec![T::zero(); d * d * grid.num_cells()],
        }
    }

    /// Wraps cell-major data; `None` on a length mismatch.
    pub fn from_vec(grid: &Grid<T>, data: Vec<T>) -> Option<Self> {
        let d = grid.dim();
        (data.len() == d * d * grid.num_cells()).then_some(TensorField { grid: *grid, data })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn get(&self, cell: usize, j: usize, i: usize) -> T {
        let d = self.grid.dim();
        self.data[cell * d * d + j * d + i]
    }

    #[inline]
    pub fn set(&mut self, cell: usize, j: usize, i: usize, v: T) {
        let d = self.grid.dim();
        self.data[cell * d * d + j * d + i] = v;
    }

    pub fn cell(&self, cell: usize) -> &[T] {
        let dd = self.grid.dim() * self.grid.dim();
        &self.data[cell * dd..(cell + 1) * dd]
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn trace(&self) -> Field<T> {
        let d = self.grid.dim();
        Field::scalar_from_fn(&self.grid, |k| {
            (0..d).fold(T::zero(), |s, a| s + self.get(k, a, a))
        })
    }

    pub fn transpose(&self) -> Self {
        let d = self.grid.dim();
        let mut out = self.clone();
        for k in 0..self.grid.num_cells() {
            for j in 0..d {
                for i in 0..d {
                    out.set(k, j, i, self.get(k, i, j));
                }
            }
        }
        out
    }

    /// Cellwise `A:B = Σ_{ji} A_ji B_ji`.
    pub fn contract(&self, other: &TensorField<T>) -> Field<T> {
        let dd = self.grid.dim() * self.grid.dim();
        Field::scalar_from_fn(&self.grid, |k| {
            let a = &self.data[k * dd..(k + 1) * dd];
            let b = &other.data[k * dd..(k + 1) * dd];
            a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
        })
    }

    pub fn lin_comb(&self, a: T, other: &TensorField<T>, b: T) -> Self {
        TensorField {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        }
    }

    /// Adds `s_K · I` to every cell.
    pub fn add_scaled_identity(&self, s: &Field<T>) -> Self {
        let d = self.grid.dim();
        let mut out = self.clone();
        for k in 0..self.grid.num_cells() {
            for a in 0..d {
                let v = out.get(k, a, a) + s.at(k);
                out.set(k, a, a, v);
            }
        }
        out
    }

    pub fn max_asymmetry(&self) -> T {
        let d = self.grid.dim();
        let mut m = T::zero();
        for k in 0..self.grid.num_cells() {
            for j in 0..d {
                for i in 0..d {
                    m = m.max((self.get(k, j, i) - self.get(k, i, j)).abs());
                }
            }
        }
        m
    }

    /// `∫ |A|²`.
    pub fn norm_sq(&self) -> T {
        let terms: Vec<T> = self.data.iter().map(|&x| x * x).collect();
        pairwise_sum(&terms) * self.grid.cell_volume()
    }
}

/// One value per face, the normal component of a field on the dual cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField<T> {
    grid: Grid<T>,
    data: Vec<T>,
}

impl<T: Real> DualField<T> {
    /// Wraps face-indexed data; `None` on a length mismatch.
    pub fn from_vec(grid: &Grid<T>, data: Vec<T>) -> Option<Self> {
        (data.len() == grid.num_faces()).then_some(DualField { grid: *grid, data })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn at(&self, face: FaceId) -> T {
        self.data[face.0]
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `Σ_σ |D_σ| a_σ b_σ`.
pub fn dual_inner<T: Real>(a: &DualField<T>, b: &DualField<T>) -> T {
    let terms: Vec<T> = a.data.iter().zip(&b.data).map(|(&x, &y)| x * y).collect();
    pairwise_sum(&terms) * a.grid.dual_volume()
}

fn inv_two_h<T: Real>(grid: &Grid<T>) -> T {
    T::one() / (T::two() * grid.h())
}

/// Cell gradient of a scalar field.
pub fn grad_h<T: Real>(r: &Field<T>) -> Field<T> {
    assert_eq!(r.ncomp(), 1);
    let grid = *r.grid();
    let d = grid.dim();
    let c = inv_two_h(&grid);
    let mut data = vec![T::zero(); d * grid.num_cells()];
    data.par_chunks_mut(d).enumerate().for_each(|(k, out)| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (r.at(grid.shift(k, i, 1)) - r.at(grid.shift(k, i, -1))) * c;
        }
    });
    Field::from_vec(&grid, d, data).expect("gradient of a finite field")
}

/// Cell divergence of a vector field.
pub fn div_h<T: Real>(v: &Field<T>) -> Field<T> {
    let grid = *v.grid();
    let d = grid.dim();
    assert_eq!(v.ncomp(), d);
    let c = inv_two_h(&grid);
    let mut data = vec![T::zero(); grid.num_cells()];
    data.par_iter_mut().enumerate().for_each(|(k, o)| {
        let mut s = T::zero();
        for i in 0..d {
            s = s + (v.get(grid.shift(k, i, 1), i) - v.get(grid.shift(k, i, -1), i));
        }
        *o = s * c;
    });
    Field::from_vec(&grid, 1, data).expect("divergence of a finite field")
}

/// Cell gradient of a vector field: entry `(j, i) = ∂_i v_j`.
pub fn grad_h_vector<T: Real>(v: &Field<T>) -> TensorField<T> {
    let grid = *v.grid();
    let d = grid.dim();
    assert_eq!(v.ncomp(), d);
    let c = inv_two_h(&grid);
    let mut data = vec![T::zero(); d * d * grid.num_cells()];
    data.par_chunks_mut(d * d).enumerate().for_each(|(k, out)| {
        for i in 0..d {
            let (p, m) = (grid.shift(k, i, 1), grid.shift(k, i, -1));
            for j in 0..d {
                out[j * d + i] = (v.get(p, j) - v.get(m, j)) * c;
            }
        }
    });
    TensorField { grid, data }
}

/// Symmetric part of the cell gradient.
pub fn sym_grad_h<T: Real>(v: &Field<T>) -> TensorField<T> {
    let g = grad_h_vector(v);
    let d = g.grid.dim();
    let mut out = g.clone();
    for k in 0..g.grid.num_cells() {
        for j in 0..d {
            for i in j..d {
                let s = (g.get(k, j, i) + g.get(k, i, j)) * T::half();
                out.set(k, j, i, s);
                out.set(k, i, j, s);
            }
        }
    }
    out
}

/// Row-wise divergence of a tensor field: `(div M)_j = Σ_i ∂_i M_ji`,
/// the negative adjoint of [`grad_h_vector`].
pub fn div_h_tensor<T: Real>(m: &TensorField<T>) -> Field<T> {
    let grid = m.grid;
    let d = grid.dim();
    let c = inv_two_h(&grid);
    let mut data = vec![T::zero(); d * grid.num_cells()];
    data.par_chunks_mut(d).enumerate().for_each(|(k, out)| {
        for (j, o) in out.iter_mut().enumerate() {
            let mut s = T::zero();
            for i in 0..d {
                s = s + (m.get(grid.shift(k, i, 1), j, i) - m.get(grid.shift(k, i, -1), j, i));
            }
            *o = s * c;
        }
    });
    Field::from_vec(&grid, d, data).expect("divergence of a finite tensor")
}

/// Dual gradient `jump(r)/h` on every face.
pub fn grad_dual<T: Real>(r: &Field<T>) -> DualField<T> {
    let grid = *r.grid();
    let inv_h = T::one() / grid.h();
    let data = (0..grid.num_faces())
        .map(|f| {
            let (k, l) = grid.face_cells(FaceId(f));
            (r.get(l, 0) - r.get(k, 0)) * inv_h
        })
        .collect();
    DualField { grid, data }
}

/// Five-point (seven-point in 3D) Laplacian.
pub fn laplace_h<T: Real>(r: &Field<T>) -> Field<T> {
    assert_eq!(r.ncomp(), 1);
    let grid = *r.grid();
    let d = grid.dim();
    let inv_h2 = T::one() / (grid.h() * grid.h());
    let mut data = vec![T::zero(); grid.num_cells()];
    data.par_iter_mut().enumerate().for_each(|(k, o)| {
        let mut s = T::zero();
        for i in 0..d {
            s = s + (r.at(grid.shift(k, i, 1)) + r.at(grid.shift(k, i, -1)) - T::two() * r.at(k));
        }
        *o = s * inv_h2;
    });
    Field::from_vec(&grid, 1, data).expect("Laplacian of a finite field")
}

/// `∂_axis` as a cell-to-cell matrix.
pub fn grad_matrix<T: Real>(grid: &Grid<T>, axis: usize) -> CsrMatrix<T> {
    let c = inv_two_h(grid);
    let mut trip = Vec::with_capacity(2 * grid.num_cells());
    for k in 0..grid.num_cells() {
        trip.push((k, grid.shift(k, axis, 1), c));
        trip.push((k, grid.shift(k, axis, -1), -c));
    }
    CsrMatrix::from_triplets(grid.num_cells(), grid.num_cells(), &trip)
}

/// Dual gradient as a face-by-cell matrix.
pub fn dual_grad_matrix<T: Real>(grid: &Grid<T>) -> CsrMatrix<T> {
    let inv_h = T::one() / grid.h();
    let mut trip = Vec::with_capacity(2 * grid.num_faces());
    for f in 0..grid.num_faces() {
        let (k, l) = grid.face_cells(FaceId(f));
        trip.push((f, l, inv_h));
        trip.push((f, k, -inv_h));
    }
    CsrMatrix::from_triplets(grid.num_faces(), grid.num_cells(), &trip)
}

/// Laplacian as a cell-to-cell matrix.
pub fn laplace_matrix<T: Real>(grid: &Grid<T>) -> CsrMatrix<T> {
    let inv_h2 = T::one() / (grid.h() * grid.h());
    let d = grid.dim();
    let mut trip = Vec::with_capacity((2 * d + 1) * grid.num_cells());
    for k in 0..grid.num_cells() {
        for i in 0..d {
            trip.push((k, grid.shift(k, i, 1), inv_h2));
            trip.push((k, grid.shift(k, i, -1), inv_h2));
        }
        trip.push((k, k, -T::lit(2.0 * d as f64) * inv_h2));
    }
    CsrMatrix::from_triplets(grid.num_cells(), grid.num_cells(), &trip)
}

/// One summation-by-parts identity evaluated on concrete fields.
#[derive(Debug, Clone)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / max(1, |lhs|, |rhs|, term scale)`.
    pub rel_residual: f64,
}

#[derive(Debug, Clone)]
pub struct IbpReport {
    pub checks: Vec<IdentityCheck>,
}

impl IbpReport {
    pub fn max_rel_residual(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.rel_residual)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_residual() <= tol
    }
}

fn check(name: &'static str, lhs: f64, rhs: f64, scale: f64) -> IdentityCheck {
    let s = scale.max(lhs.abs()).max(rhs.abs()).max(1.0);
    IdentityCheck {
        name,
        lhs,
        rhs,
        rel_residual: (lhs - rhs).abs() / s,
    }
}

/// Sum of `|a_K b_K| |K|`, the natural magnitude of a cell integral.
fn abs_scale<T: Real>(a: &[T], b: &[T], vol: T) -> f64 {
    let terms: Vec<T> = a.iter().zip(b).map(|(&x, &y)| (x * y).abs()).collect();
    (pairwise_sum(&terms) * vol).to_f64_lossy()
}

fn random_field<T: Real>(grid: &Grid<T>, ncomp: usize, rng: &mut ChaCha8Rng) -> Field<T> {
    let data = (0..ncomp * grid.num_cells())
        .map(|_| T::lit(rng.random_range(-1.0..1.0)))
        .collect();
    Field::from_vec(grid, ncomp, data).expect("finite random data")
}

fn vec_inner<T: Real>(a: &Field<T>, b: &Field<T>) -> T {
    let terms: Vec<T> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| x * y)
        .collect();
    pairwise_sum(&terms) * a.grid().cell_volume()
}

/// Evaluates the discrete integration-by-parts identities on seeded random
/// fields:
///
/// * `∫ r div_h v = −∫ ∇_h r · v`
/// * `∫ Δ_h r f = −Σ_σ |D_σ| ∇_E r ∇_E f`
/// * `∫ Δ_h r f = ∫ r Δ_h f`
/// * `∫ M : ∇_h v = −∫ div_h M · v`
/// * `Σ_K |K| r_K Σ_σ∈E(K) ±w_σ/h = −Σ_σ |D_σ| ∇_E r w_σ` for face data `w`
pub fn check_ibp_identities<T: Real>(grid: &Grid<T>, seed: u64) -> IbpReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let vol = grid.cell_volume();
    let r = random_field(grid, 1, &mut rng);
    let f = random_field(grid, 1, &mut rng);
    let v = random_field(grid, d, &mut rng);
    let mut checks = Vec::new();

    let div_v = div_h(&v);
    let grad_r = grad_h(&r);
    let lhs = vec_inner(&r, &div_v);
    let rhs = -vec_inner(&grad_r, &v);
    let scale =
        abs_scale(r.values(), div_v.values(), vol).max(abs_scale(grad_r.values(), v.values(), vol));
    checks.push(check(
        "r div v = -grad r . v",
        lhs.to_f64_lossy(),
        rhs.to_f64_lossy(),
        scale,
    ));

    let lap_r = laplace_h(&r);
    let lap_f = laplace_h(&f);
    let gr = grad_dual(&r);
    let gf = grad_dual(&f);
    let a = vec_inner(&lap_r, &f).to_f64_lossy();
    let b = -dual_inner(&gr, &gf).to_f64_lossy();
    let c = vec_inner(&r, &lap_f).to_f64_lossy();
    let dual_scale = {
        let terms: Vec<T> = gr
            .values()
            .iter()
            .zip(gf.values())
            .map(|(&x, &y)| (x * y).abs())
            .collect();
        (pairwise_sum(&terms) * grid.dual_volume()).to_f64_lossy()
    };
    let scale = abs_scale(lap_r.values(), f.values(), vol)
        .max(abs_scale(r.values(), lap_f.values(), vol))
        .max(dual_scale);
    checks.push(check("lap r . f = -grad_E r . grad_E f", a, b, scale));
    checks.push(check("grad_E r . grad_E f = -r . lap f", b, c, scale));
    checks.push(check("lap r . f = r . lap f", a, c, scale));

    let mdata = (0..d * d * grid.num_cells())
        .map(|_| T::lit(rng.random_range(-1.0..1.0)))
        .collect();
    let m = TensorField {
        grid: *grid,
        data: mdata,
    };
    let gv = grad_h_vector(&v);
    let div_m = div_h_tensor(&m);
    let lhs = pairwise_sum(m.contract(&gv).values()) * vol;
    let rhs = -vec_inner(&div_m, &v);
    let scale =
        abs_scale(m.values(), gv.values(), vol).max(abs_scale(div_m.values(), v.values(), vol));
    checks.push(check(
        "M : grad v = -div M . v",
        lhs.to_f64_lossy(),
        rhs.to_f64_lossy(),
        scale,
    ));

    // cell divergence of face data against the dual gradient
    let w: Vec<T> = (0..grid.num_faces())
        .map(|_| T::lit(rng.random_range(-1.0..1.0)))
        .collect();
    let inv_h = T::one() / grid.h();
    let div_w: Vec<T> = (0..grid.num_cells())
        .map(|k| {
            grid.cell_faces(k)
                .iter()
                .fold(T::zero(), |s, &(face, sign)| {
                    let wf = w[face.0];
                    if sign > 0 {
                        s + wf * inv_h
                    } else {
                        s - wf * inv_h
                    }
                })
        })
        .collect();
    let lhs_terms: Vec<T> = r
        .values()
        .iter()
        .zip(&div_w)
        .map(|(&x, &y)| x * y)
        .collect();
    let lhs = pairwise_sum(&lhs_terms) * vol;
    let wf = DualField {
        grid: *grid,
        data: w,
    };
    let rhs = -dual_inner(&gr, &wf);
    let scale = abs_scale(r.values(), &div_w, vol);
    checks.push(check(
        "r div_T w = -grad_E r . w",
        lhs.to_f64_lossy(),
        rhs.to_f64_lossy(),
        scale,
    ));

    let tr = sym_grad_h(&v).trace();
    let diff = tr
        .values()
        .iter()
        .zip(div_v.values())
        .fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs().to_f64_lossy()));
    checks.push(IdentityCheck {
        name: "div v = tr D_h v",
        lhs: 0.0,
        rhs: diff,
        rel_residual: diff / div_v.max_abs().to_f64_lossy().max(1.0),
    });

    IbpReport { checks }
}
