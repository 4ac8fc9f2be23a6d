//! Named initial-data presets and boundary data, assembled into extended
//! triples on the torus.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{extend_initial_data, ExtendedTriple, FluidShape, PointState, ScalarFn};
use crate::mesh::{Grid, Point};
use crate::num::Real;
use crate::scheme::{BoundaryData, State};

fn one() -> f64 {
    1.0
}

fn default_preset() -> String {
    "gaussian-bump".into()
}

fn default_amplitude() -> f64 {
    0.2
}

fn default_width() -> f64 {
    0.1
}

fn default_modes() -> usize {
    2
}

/// Initial data in the fluid region.
///
/// Presets: `constant` (`rho`, `velocity`, `theta`), `gaussian-bump` (density
/// and temperature bump with a swirl of the same profile), `shear`
/// (`u_1 = a sin(2π x_2 / L)`) and `smooth-random` (seeded Fourier modes up to
/// `modes` per axis, relative amplitude at most `amplitude`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default = "one")]
    pub rho: f64,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub velocity: Vec<f64>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    /// Bump centre in physical coordinates; the domain centre when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub center: Vec<f64>,
    #[serde(default = "default_modes")]
    pub modes: usize,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            preset: default_preset(),
            rho: 1.0,
            theta: 1.0,
            velocity: vec![],
            amplitude: default_amplitude(),
            width: default_width(),
            center: vec![],
            modes: default_modes(),
        }
    }
}

impl InitialSpec {
    pub fn constant(rho: f64, velocity: &[f64], theta: f64) -> Self {
        InitialSpec {
            preset: "constant".into(),
            rho,
            theta,
            velocity: velocity.to_vec(),
            ..Self::default()
        }
    }

    /// All violations for dimension `dim`.
    pub fn violations(&self, dim: usize) -> Vec<String> {
        let mut v = Vec::new();
        if !["constant", "gaussian-bump", "shear", "smooth-random"].contains(&self.preset.as_str())
        {
            v.push(format!(
                "unknown initial preset '{}' (expected constant, gaussian-bump, shear or smooth-random)",
                self.preset
            ));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            v.push(format!(
                "initial density must be positive, got {}",
                self.rho
            ));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            v.push(format!(
                "initial temperature must be positive, got {}",
                self.theta
            ));
        }
        if !self.velocity.is_empty() && self.velocity.len() != dim {
            v.push(format!(
                "velocity needs {dim} components, got {}",
                self.velocity.len()
            ));
        }
        if self.velocity.iter().any(|x| !x.is_finite()) {
            v.push("velocity must be finite".into());
        }
        if !(0.0..1.0).contains(&self.amplitude) {
            v.push(format!(
                "amplitude must lie in [0, 1), got {}",
                self.amplitude
            ));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            v.push(format!("width must be positive, got {}", self.width));
        }
        if !self.center.is_empty() && self.center.len() != dim {
            v.push(format!(
                "center needs {dim} components, got {}",
                self.center.len()
            ));
        }
        if self.preset == "smooth-random" && self.modes == 0 {
            v.push("smooth-random needs at least one mode".into());
        }
        v
    }
}

/// Boundary temperature `θ_B(t, x) = θ_b (1 + a sin(2π x_1 / L))(1 + r t)` and
/// solid density `ρ₀^s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(default = "one")]
    pub theta_b: f64,
    #[serde(default)]
    pub theta_b_amplitude: f64,
    #[serde(default)]
    pub theta_b_rate: f64,
    #[serde(default = "one")]
    pub rho_s: f64,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec {
            theta_b: 1.0,
            theta_b_amplitude: 0.0,
            theta_b_rate: 0.0,
            rho_s: 1.0,
        }
    }
}

impl BoundarySpec {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.theta_b > 0.0 && self.theta_b.is_finite()) {
            v.push(format!(
                "boundary temperature must be positive, got {}",
                self.theta_b
            ));
        }
        if !(self.theta_b_amplitude.abs() < 1.0) {
            v.push(format!(
                "boundary temperature amplitude must lie in (-1, 1), got {}",
                self.theta_b_amplitude
            ));
        }
        if !(self.theta_b_rate >= 0.0 && self.theta_b_rate.is_finite()) {
            v.push(format!(
                "boundary temperature rate must be nonnegative, got {}",
                self.theta_b_rate
            ));
        }
        if !(self.rho_s > 0.0 && self.rho_s.is_finite()) {
            v.push(format!(
                "solid density must be positive, got {}",
                self.rho_s
            ));
        }
        v
    }

    pub fn is_time_dependent(&self) -> bool {
        self.theta_b_rate != 0.0
    }
}

/// Seeded sum of Fourier modes bounded by 1 in absolute value.
#[derive(Debug, Clone)]
struct RandomModes {
    waves: Vec<([f64; 3], f64, f64)>,
}

impl RandomModes {
    fn new(rng: &mut ChaCha8Rng, dim: usize, modes: usize) -> Self {
        let m = modes as i64;
        let mut waves = Vec::new();
        let range = -m..=m;
        let zs: Vec<i64> = if dim == 3 {
            range.clone().collect()
        } else {
            vec![0]
        };
        for kx in range.clone() {
            for ky in range.clone() {
                for &kz in &zs {
                    if (kx, ky, kz) == (0, 0, 0) {
                        continue;
                    }
                    let c: f64 = rng.random_range(-1.0..1.0);
                    let phase: f64 = rng.random_range(0.0..TAU);
                    waves.push(([kx as f64, ky as f64, kz as f64], c, phase));
                }
            }
        }
        let norm: f64 = waves.iter().map(|w| w.1.abs()).sum();
        for w in &mut waves {
            w.1 /= norm;
        }
        RandomModes { waves }
    }

    fn eval(&self, x: &[f64; 3], len: f64) -> f64 {
        self.waves
            .iter()
            .map(|(k, c, ph)| {
                c * (TAU * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]) / len + ph).sin()
            })
            .sum()
    }
}

fn to_f64<T: Real>(x: &Point<T>) -> [f64; 3] {
    [
        x[0].to_f64_lossy(),
        x[1].to_f64_lossy(),
        x[2].to_f64_lossy(),
    ]
}

/// Fluid data of a preset as a pointwise function.
pub fn fluid_data<T: Real>(
    spec: &InitialSpec,
    dim: usize,
    length: f64,
    seed: u64,
) -> Result<impl Fn(&Point<T>) -> PointState<T> + Send + Sync + 'static> {
    let errors = spec.violations(dim);
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    let spec = spec.clone();
    let center: [f64; 3] = {
        let mut c = [0.5 * length; 3];
        if !spec.center.is_empty() {
            c[..dim].copy_from_slice(&spec.center);
        }
        if dim == 2 {
            c[2] = 0.0;
        }
        c
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random: Vec<RandomModes> = if spec.preset == "smooth-random" {
        (0..dim + 2)
            .map(|_| RandomModes::new(&mut rng, dim, spec.modes))
            .collect()
    } else {
        Vec::new()
    };
    Ok(move |x: &Point<T>| {
        let p = to_f64(x);
        let (a, r0, t0) = (spec.amplitude, spec.rho, spec.theta);
        let mut u = [0.0f64; 3];
        let (rho, theta) = match spec.preset.as_str() {
            "constant" => {
                u[..spec.velocity.len()].copy_from_slice(&spec.velocity);
                (r0, t0)
            }
            "gaussian-bump" => {
                let r2: f64 = (0..dim).map(|i| (p[i] - center[i]).powi(2)).sum();
                let bump = (-r2 / (spec.width * spec.width)).exp();
                u[0] = -a * bump * (p[1] - center[1]) / spec.width;
                u[1] = a * bump * (p[0] - center[0]) / spec.width;
                (r0 * (1.0 + a * bump), t0 * (1.0 + 0.5 * a * bump))
            }
            "shear" => {
                u[0] = a * (TAU * p[1] / length).sin();
                (r0, t0)
            }
            _ => {
                for (j, uj) in u.iter_mut().enumerate().take(dim) {
                    *uj = a * random[1 + j].eval(&p, length);
                }
                (
                    r0 * (1.0 + a * random[0].eval(&p, length)),
                    t0 * (1.0 + a * random[dim + 1].eval(&p, length)),
                )
            }
        };
        PointState {
            rho: T::lit(rho),
            u: [T::lit(u[0]), T::lit(u[1]), T::lit(u[2])],
            theta: T::lit(theta),
        }
    })
}

/// `θ_B` of a boundary spec.
pub fn boundary_temperature<T: Real>(spec: &BoundarySpec, length: f64) -> ScalarFn<T> {
    let s = spec.clone();
    Arc::new(move |t: T, x: &Point<T>| {
        let x1 = x[0].to_f64_lossy();
        let v = s.theta_b
            * (1.0 + s.theta_b_amplitude * (TAU * x1 / length).sin())
            * (1.0 + s.theta_b_rate * t.to_f64_lossy());
        T::lit(v)
    })
}

/// Initial data, boundary data and fluid shape of one run.
#[derive(Clone)]
pub struct Problem<T> {
    pub data: ExtendedTriple<T>,
    pub time_dependent: bool,
}

impl<T: Real> std::fmt::Debug for Problem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("data", &self.data)
            .field("time_dependent", &self.time_dependent)
            .finish()
    }
}

impl<T: Real> Problem<T> {
    pub fn new(
        shape: FluidShape<T>,
        initial: &InitialSpec,
        boundary: &BoundarySpec,
        length: f64,
        seed: u64,
    ) -> Result<Self> {
        let errors = boundary.violations();
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        let fluid = fluid_data::<T>(initial, shape.dim(), length, seed)?;
        let rho_s = T::lit(boundary.rho_s);
        let data = extend_initial_data(
            fluid,
            Arc::new(move |_t, _x| rho_s),
            boundary_temperature(boundary, length),
            shape,
        );
        Ok(Problem {
            data,
            time_dependent: boundary.is_time_dependent(),
        })
    }

    pub fn shape(&self) -> &FluidShape<T> {
        self.data.shape()
    }

    /// Cell projection of the extended initial data.
    pub fn initial_state(&self, grid: &Grid<T>) -> Result<State<T>> {
        State::project(grid, &self.data, T::zero())
    }

    /// Projected `θ_B` and `ρ₀^s` at `t = 0`.
    pub fn boundary_data(&self, grid: &Grid<T>) -> Result<BoundaryData<T>> {
        BoundaryData::from_functions(
            grid,
            self.data.theta_b().clone(),
            self.data.rho_s().clone(),
            T::zero(),
            self.time_dependent,
        )
    }
}
