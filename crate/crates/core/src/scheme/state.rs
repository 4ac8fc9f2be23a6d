use crate::error::{Error, Result};
use crate::fields::{project_cells, project_cells_with_order, Field, PROJECTION_ORDER};
use crate::geometry::{ExtendedTriple, ScalarFn};
use crate::mesh::{DomainMask, Grid};
use crate::num::Real;

/// Pressure, internal energy and entropy of a perfect gas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thermo<T> {
    pub p: T,
    pub e: T,
    pub s: T,
}

/// Perfect-gas law `p = ρθ`, `e = c_v θ`, `s = c_v log θ − log ρ`.
pub fn eos<T: Real>(rho: T, theta: T, cv: T) -> Result<Thermo<T>> {
    if !(rho > T::zero()) || !(theta > T::zero()) {
        return Err(Error::Positivity(format!(
            "entropy needs ρ > 0 and θ > 0, got ρ = {rho}, θ = {theta}"
        )));
    }
    Ok(Thermo {
        p: rho * theta,
        e: cv * theta,
        s: entropy(rho, theta, cv),
    })
}

/// Pressure extended by zero for nonpositive temperature.
#[inline]
pub fn pressure<T: Real>(rho: T, theta: T) -> T {
    if theta > T::zero() {
        rho * theta
    } else {
        T::zero()
    }
}

#[inline]
pub fn entropy<T: Real>(rho: T, theta: T, cv: T) -> T {
    cv * theta.ln() - rho.ln()
}

/// Density, velocity and temperature at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State<T> {
    pub rho: Field<T>,
    pub u: Field<T>,
    pub theta: Field<T>,
    pub t: T,
}

impl<T: Real> State<T> {
    /// Builds a state and checks shapes and positivity.
    pub fn new(rho: Field<T>, u: Field<T>, theta: Field<T>, t: T) -> Result<Self> {
        let s = State { rho, u, theta, t };
        s.check()?;
        Ok(s)
    }

    pub fn constant(grid: &Grid<T>, rho: T, u: &[T], theta: T) -> Result<Self> {
        let d = grid.dim();
        if u.len() != d {
            return Err(Error::FieldMismatch(format!(
                "velocity needs {d} components, got {}",
                u.len()
            )));
        }
        let data = (0..grid.num_cells())
            .flat_map(|_| u.iter().copied())
            .collect();
        Self::new(
            Field::constant(grid, 1, rho),
            Field::from_vec(grid, d, data)?,
            Field::constant(grid, 1, theta),
            T::zero(),
        )
    }

    pub fn grid(&self) -> &Grid<T> {
        self.rho.grid()
    }

    pub fn check(&self) -> Result<()> {
        let g = *self.rho.grid();
        let d = g.dim();
        if self.rho.ncomp() != 1 || self.theta.ncomp() != 1 || self.u.ncomp() != d {
            return Err(Error::FieldMismatch(
                "state needs scalar ρ, θ and a d-vector u".into(),
            ));
        }
        if !self.u.grid().same_as(&g) || !self.theta.grid().same_as(&g) {
            return Err(Error::FieldMismatch(
                "state fields live on different grids".into(),
            ));
        }
        if !(self.rho.all_finite() && self.u.all_finite() && self.theta.all_finite()) {
            return Err(Error::NonFinite("state".into()));
        }
        let (rmin, tmin) = (self.rho.min(), self.theta.min());
        if !(rmin > T::zero()) || !(tmin > T::zero()) {
            return Err(Error::Positivity(format!("min ρ = {rmin}, min θ = {tmin}")));
        }
        Ok(())
    }

    /// Unknowns per cell: `ρ, u_1..u_d, θ`.
    pub fn block_size(&self) -> usize {
        self.grid().dim() + 2
    }

    /// Interleaved unknown vector, one block per cell.
    pub fn to_vector(&self) -> Vec<T> {
        let g = self.grid();
        let d = g.dim();
        let mut x = Vec::with_capacity((d + 2) * g.num_cells());
        for k in 0..g.num_cells() {
            x.push(self.rho.at(k));
            x.extend_from_slice(self.u.cell(k));
            x.push(self.theta.at(k));
        }
        x
    }

    /// Inverse of [`State::to_vector`]; positivity is not checked.
    pub fn from_vector(grid: &Grid<T>, x: &[T], t: T) -> Result<Self> {
        let d = grid.dim();
        let b = d + 2;
        if x.len() != b * grid.num_cells() {
            return Err(Error::FieldMismatch(format!(
                "unknown vector has length {}",
                x.len()
            )));
        }
        let nc = grid.num_cells();
        let rho = (0..nc).map(|k| x[k * b]).collect();
        let u = (0..nc)
            .flat_map(|k| x[k * b + 1..k * b + 1 + d].iter().copied())
            .collect();
        let theta = (0..nc).map(|k| x[k * b + d + 1]).collect();
        Ok(State {
            rho: Field::from_vec(grid, 1, rho)?,
            u: Field::from_vec(grid, d, u)?,
            theta: Field::from_vec(grid, 1, theta)?,
            t,
        })
    }

    /// `∫ ρ`.
    pub fn mass(&self) -> T {
        self.rho.integral()
    }

    /// Largest absolute unknown.
    pub fn max_abs(&self) -> T {
        self.rho
            .max_abs()
            .max(self.u.max_abs())
            .max(self.theta.max_abs())
    }

    /// Cell projection of an extended triple at time `t`.
    pub fn project(grid: &Grid<T>, data: &ExtendedTriple<T>, t: T) -> Result<Self> {
        let d = grid.dim();
        let b = d + 2;
        let all = project_cells_with_order(
            |x, out: &mut [T]| {
                let p = data.eval(t, x);
                out[0] = p.rho;
                out[1..=d].copy_from_slice(&p.u[..d]);
                out[d + 1] = p.theta;
            },
            grid,
            b,
            PROJECTION_ORDER,
        );
        let mut s = Self::from_vector(grid, all.values(), t)?;
        s.t = t;
        s.check()?;
        Ok(s)
    }
}

/// Boundary temperature and solid density on the cells.
#[derive(Clone)]
pub struct BoundaryData<T> {
    /// Cell projection of `θ_B` at the current time.
    pub theta_b: Field<T>,
    /// Cell projection of the solid-region density `ρ₀^s`.
    pub rho_s: Field<T>,
    source: Option<ScalarFn<T>>,
}

impl<T: Real> std::fmt::Debug for BoundaryData<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryData")
            .field("theta_b", &self.theta_b)
            .field("rho_s", &self.rho_s)
            .field("time_dependent", &self.source.is_some())
            .finish()
    }
}

impl<T: Real> BoundaryData<T> {
    /// Time-independent data.
    pub fn fixed(theta_b: Field<T>, rho_s: Field<T>) -> Result<Self> {
        let b = BoundaryData {
            theta_b,
            rho_s,
            source: None,
        };
        b.check()?;
        Ok(b)
    }

    pub fn constant(grid: &Grid<T>, theta_b: T, rho_s: T) -> Result<Self> {
        Self::fixed(
            Field::constant(grid, 1, theta_b),
            Field::constant(grid, 1, rho_s),
        )
    }

    /// Projects `θ_B(t, ·)` and `ρ₀^s`; `θ_B` is resampled by [`BoundaryData::at_time`]
    /// when `time_dependent` is set.
    pub fn from_functions(
        grid: &Grid<T>,
        theta_b: ScalarFn<T>,
        rho_s: ScalarFn<T>,
        t: T,
        time_dependent: bool,
    ) -> Result<Self> {
        let tb = theta_b.clone();
        let theta = project_cells(move |x| tb(t, x), grid);
        let rho = project_cells(move |x| rho_s(T::zero(), x), grid);
        let b = BoundaryData {
            theta_b: theta,
            rho_s: rho,
            source: time_dependent.then_some(theta_b),
        };
        b.check()?;
        Ok(b)
    }

    pub fn is_time_dependent(&self) -> bool {
        self.source.is_some()
    }

    /// Data sampled at time `t`.
    pub fn at_time(&self, t: T) -> Self {
        match &self.source {
            None => self.clone(),
            Some(f) => {
                let f = f.clone();
                let grid = *self.theta_b.grid();
                let theta_b = project_cells(move |x| f(t, x), &grid);
                BoundaryData {
                    theta_b,
                    rho_s: self.rho_s.clone(),
                    source: self.source.clone(),
                }
            }
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.theta_b.min() > T::zero()) {
            return Err(Error::Positivity(format!(
                "boundary temperature must be positive, min {}",
                self.theta_b.min()
            )));
        }
        if !(self.rho_s.min() > T::zero()) {
            return Err(Error::Positivity(format!(
                "solid density must be positive, min {}",
                self.rho_s.min()
            )));
        }
        Ok(())
    }
}

/// Helper for the solid indicator as a field.
pub fn solid_indicator_field<T: Real>(grid: &Grid<T>, mask: &DomainMask) -> Field<T> {
    Field::scalar_from_fn(grid, |k| mask.solid_indicator(k))
}
