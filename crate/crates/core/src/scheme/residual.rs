use rayon::prelude::*;

use super::params::SchemeParams;
use super::state::{pressure, BoundaryData, State};
use crate::error::{Error, Result};
use crate::fields::{face_traces, upwind_trace, FaceTrace, Field};
use crate::mesh::{DomainMask, FaceId, Grid};
use crate::num::Real;
use crate::ops::{div_h, div_h_tensor, grad_h_vector, laplace_h, sym_grad_h, TensorField};

/// `Up[r, u] − h^α jump(r)` for traces of `r` and the normal velocity `avg(u)·n`.
#[inline]
pub fn upwind_flux<T: Real>(r: FaceTrace<T>, normal_velocity: T, diffusion: T) -> T {
    let (up, _) = upwind_trace(r, normal_velocity);
    up * normal_velocity - diffusion * r.jump()
}

/// Diffusive upwind flux of the scalar field `r` transported by `u` across `face`.
pub fn diffusive_upwind_flux<T: Real>(
    r: &Field<T>,
    u: &Field<T>,
    face: FaceId,
    alpha: T,
    h: T,
) -> T {
    let axis = r.grid().face_axis(face);
    let w = face_traces(u, face, axis).avg();
    upwind_flux(face_traces(r, face, 0), w, h.powf(alpha))
}

/// `S_h = 2μ D_h u + λ div_h u I`.
pub fn viscous_stress<T: Real>(u: &Field<T>, mu: T, lambda: T) -> TensorField<T> {
    let d = sym_grad_h(u);
    let div = div_h(u).map(|x| lambda * x);
    d.lin_comb(T::two() * mu, &d, T::zero())
        .add_scaled_identity(&div)
}

pub(crate) fn check_inputs<T: Real>(
    new: &State<T>,
    old: &State<T>,
    mask: &DomainMask,
    bdata: &BoundaryData<T>,
) -> Result<()> {
    let g = new.grid();
    if !old.grid().same_as(g)
        || !bdata.theta_b.grid().same_as(g)
        || mask.num_cells() != g.num_cells()
    {
        return Err(Error::FieldMismatch(
            "states, mask and boundary data must share one grid".into(),
        ));
    }
    for (name, s) in [("new state", new), ("old state", old)] {
        if !(s.rho.all_finite() && s.u.all_finite() && s.theta.all_finite()) {
            return Err(Error::NonFinite(name.into()));
        }
    }
    Ok(())
}

/// Fluxes of `ρ`, `ρu_1..ρu_d`, `ρθ` on every face, stored face-major.
pub(crate) fn face_fluxes<T: Real>(s: &State<T>, diffusion: T) -> Vec<T> {
    let g = *s.grid();
    let d = g.dim();
    let b = d + 2;
    let nc = g.num_cells();
    let mut out = vec![T::zero(); b * g.num_faces()];
    out.par_chunks_mut(b).enumerate().for_each(|(f, fl)| {
        let axis = f / nc;
        let k = f % nc;
        let l = g.shift(k, axis, 1);
        let w = (s.u.get(k, axis) + s.u.get(l, axis)) * T::half();
        let up = if w >= T::zero() { k } else { l };
        let (rk, rl, ru) = (s.rho.at(k), s.rho.at(l), s.rho.at(up));
        fl[0] = ru * w - diffusion * (rl - rk);
        for j in 0..d {
            fl[1 + j] =
                ru * s.u.get(up, j) * w - diffusion * (rl * s.u.get(l, j) - rk * s.u.get(k, j));
        }
        fl[d + 1] = ru * s.theta.at(up) * w - diffusion * (rl * s.theta.at(l) - rk * s.theta.at(k));
    });
    out
}

/// Residual of the implicit step, one block `[ρ, u_1..u_d, θ]` per cell.
///
/// Rows are the cell equations divided by `|K|`: continuity, momentum and
/// internal energy tested with cell indicators.
pub fn assemble_residual<T: Real>(
    new: &State<T>,
    old: &State<T>,
    params: &SchemeParams<T>,
    mask: &DomainMask,
    bdata: &BoundaryData<T>,
) -> Result<Vec<T>> {
    check_inputs(new, old, mask, bdata)?;
    Ok(residual_unchecked(new, old, params, mask, bdata))
}

pub(crate) fn residual_unchecked<T: Real>(
    new: &State<T>,
    old: &State<T>,
    params: &SchemeParams<T>,
    mask: &DomainMask,
    bdata: &BoundaryData<T>,
) -> Vec<T> {
    let g: Grid<T> = *new.grid();
    let d = g.dim();
    let b = d + 2;
    let nc = g.num_cells();
    let h = g.h();
    let inv_h = T::one() / h;
    let inv_2h = T::half() * inv_h;
    let inv_dt = T::one() / params.dt;
    let inv_eps = T::one() / params.eps;
    let cv = params.cv();

    let fluxes = face_fluxes(new, params.diffusion(h));
    let grad_u = grad_h_vector(&new.u);
    let stress = viscous_stress(&new.u, params.mu, params.lambda);
    let div_s = div_h_tensor(&stress);
    let div_u = div_h(&new.u);
    let lap_theta = laplace_h(&new.theta);
    let p: Vec<T> = (0..nc)
        .map(|k| pressure(new.rho.at(k), new.theta.at(k)))
        .collect();

    let mut res = vec![T::zero(); b * nc];
    res.par_chunks_mut(b).enumerate().for_each(|(k, row)| {
        let mut div_f = vec![T::zero(); b];
        for i in 0..d {
            let out = (i * nc + k) * b;
            let inn = (i * nc + g.shift(k, i, -1)) * b;
            for c in 0..b {
                div_f[c] = div_f[c] + (fluxes[out + c] - fluxes[inn + c]);
            }
        }
        let (rho, rho_o) = (new.rho.at(k), old.rho.at(k));
        let (th, th_o) = (new.theta.at(k), old.theta.at(k));
        let ind = mask.solid_indicator::<T>(k);

        row[0] = (rho - rho_o) * inv_dt + div_f[0] * inv_h;
        for j in 0..d {
            let (uj, uj_o) = (new.u.get(k, j), old.u.get(k, j));
            let grad_p = (p[g.shift(k, j, 1)] - p[g.shift(k, j, -1)]) * inv_2h;
            row[1 + j] =
                (rho * uj - rho_o * uj_o) * inv_dt + div_f[1 + j] * inv_h + ind * uj * inv_eps
                    - div_s.get(k, j)
                    + grad_p;
        }
        let sg = (0..d * d).fold(T::zero(), |acc, m| {
            acc + stress.cell(k)[m] * grad_u.cell(k)[m]
        });
        row[d + 1] = cv * (rho * th - rho_o * th_o) * inv_dt + cv * div_f[d + 1] * inv_h
            - params.kappa * lap_theta.at(k)
            + ind * (th - bdata.theta_b.at(k)) * inv_eps
            - (sg - p[k] * div_u.at(k));
    });
    res
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::inner_product;
    use crate::geometry::FluidShape;
    use crate::mesh::split_domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flux_hand_values() {
        let tr = FaceTrace {
            inner: 2.0,
            outer: 1.0,
        };
        assert!((upwind_flux(tr, 0.5, 0.1f64.powf(0.0)) - 2.0).abs() < 1e-15);
        assert!((upwind_flux(tr, 0.5, 0.04f64.powf(0.5)) - 1.2).abs() < 1e-15);
        let c = FaceTrace {
            inner: 3.0,
            outer: 3.0,
        };
        assert_eq!(upwind_flux(c, -0.25, 1.0), -0.75);
    }

    #[test]
    fn flux_on_face_uses_grid_traces() {
        let g = Grid::<f64>::new(2, 4, 1.0).unwrap();
        let r = Field::scalar_from_fn(&g, |k| if k == 0 { 2.0 } else { 1.0 });
        let u = Field::constant(&g, 2, 0.5);
        // face between cells 0 and 1 along axis 0, h = 0.25
        let f = diffusive_upwind_flux(&r, &u, g.face(0, 0), 0.0, 0.25);
        assert!((f - 2.0).abs() < 1e-15);
    }

    fn random_state(g: &Grid<f64>, seed: u64) -> State<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = g.dim();
        let nc = g.num_cells();
        let rho = (0..nc).map(|_| rng.random_range(0.5..1.5)).collect();
        let u = (0..d * nc).map(|_| rng.random_range(-0.5..0.5)).collect();
        let th = (0..nc).map(|_| rng.random_range(0.5..1.5)).collect();
        State::new(
            Field::from_vec(g, 1, rho).unwrap(),
            Field::from_vec(g, d, u).unwrap(),
            Field::from_vec(g, 1, th).unwrap(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn constant_state_has_zero_residual() {
        let g = Grid::<f64>::new(2, 16, 1.0).unwrap();
        let shape = FluidShape::ball(2, [0.5, 0.5, 0.0], 0.3);
        let mask = split_domain(&g, &shape).unwrap();
        let s = State::constant(&g, 1.3, &[0.0, 0.0], 0.7).unwrap();
        let bd = BoundaryData::constant(&g, 0.7, 1.0).unwrap();
        let p = SchemeParams::with_steps(1e-2, 1e-3);
        let r = assemble_residual(&s, &s, &p, &mask, &bd).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn continuity_rows_telescope() {
        let g = Grid::<f64>::new(2, 6, 1.0).unwrap();
        let mask = DomainMask::all_fluid(g.num_cells());
        let new = random_state(&g, 1);
        let old = random_state(&g, 2);
        let bd = BoundaryData::constant(&g, 1.0, 1.0).unwrap();
        let p = SchemeParams::with_steps(1e-2, 1e-3);
        let r = assemble_residual(&new, &old, &p, &mask, &bd).unwrap();
        let total: f64 = (0..g.num_cells()).map(|k| r[k * 4]).sum::<f64>() * g.cell_volume();
        let expected = (new.mass() - old.mass()) / p.dt;
        assert!((total - expected).abs() < 1e-11);
    }

    #[test]
    fn continuity_rows_match_weak_form() {
        // direct evaluation of ∫ D_t ρ φ − Σ_σ |σ| F jump(φ)
        let g = Grid::<f64>::new(3, 4, 1.0).unwrap();
        let mask = DomainMask::all_fluid(g.num_cells());
        let new = random_state(&g, 3);
        let old = random_state(&g, 4);
        let bd = BoundaryData::constant(&g, 1.0, 1.0).unwrap();
        let mut p = SchemeParams::with_steps(1e-2, 1e-3);
        p.alpha = 0.5;
        let r = assemble_residual(&new, &old, &p, &mask, &bd).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phi = Field::from_vec(
            &g,
            1,
            (0..g.num_cells())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let mut weak = inner_product(&new.rho.lin_comb(1.0 / p.dt, &old.rho, -1.0 / p.dt), &phi);
        for f in 0..g.num_faces() {
            let face = FaceId(f);
            let flux = diffusive_upwind_flux(&new.rho, &new.u, face, p.alpha, g.h());
            weak -= g.face_area() * flux * face_traces(&phi, face, 0).jump();
        }
        let rows: f64 = (0..g.num_cells())
            .map(|k| r[k * 5] * phi.at(k))
            .sum::<f64>()
            * g.cell_volume();
        assert!(
            (rows - weak).abs() <= 1e-12 * weak.abs().max(1.0),
            "{rows} vs {weak}"
        );
    }

    #[test]
    fn stress_work_identity() {
        let g = Grid::<f64>::new(2, 8, 1.0).unwrap();
        let s = random_state(&g, 5);
        let (mu, lambda) = (0.3, 0.2);
        let st = viscous_stress(&s.u, mu, lambda);
        let work = st.contract(&grad_h_vector(&s.u)).integral();
        let dh = sym_grad_h(&s.u);
        let div = div_h(&s.u);
        let expected = 2.0 * mu * dh.norm_sq() + lambda * inner_product(&div, &div);
        assert!((work - expected).abs() <= 1e-12 * expected.abs());
        // ‖D_h u‖ ≤ ‖∇_h u‖ and ‖S_h‖ ≥ 2μ‖D_h u‖
        assert!(dh.norm_sq() <= grad_h_vector(&s.u).norm_sq() * (1.0 + 1e-14));
        assert!(st.norm_sq() >= 4.0 * mu * mu * dh.norm_sq() * (1.0 - 1e-14));
        assert_eq!(st.max_asymmetry(), 0.0);
    }
}
