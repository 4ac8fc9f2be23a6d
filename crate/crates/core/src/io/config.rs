//! Run configuration in TOML, validated as a whole.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{Coupling, SweepSpec};
use crate::geometry::{make_shape, FluidShape, ShapeSpec};
use crate::mesh::Grid;
use crate::num::Real;
use crate::problem::{BoundarySpec, InitialSpec, Problem};
use crate::scheme::{step_count, SchemeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_length")]
    pub length: f64,
}

fn default_dim() -> usize {
    2
}

fn default_n() -> usize {
    32
}

fn default_length() -> f64 {
    1.0
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dim: default_dim(),
            n: default_n(),
            length: default_length(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_mu() -> f64 {
    0.1
}

fn default_kappa() -> f64 {
    0.1
}

fn default_gamma() -> f64 {
    1.4
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            mu: default_mu(),
            lambda: 0.0,
            kappa: default_kappa(),
            gamma: default_gamma(),
        }
    }
}

/// Step sizes and Newton controls. `dt` and `eps` default to `h²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_tol")]
    pub tol_newton: f64,
    #[serde(default = "default_max_newton")]
    pub max_newton: usize,
    #[serde(default = "default_damping_floor")]
    pub damping_floor: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
}

fn default_tol() -> f64 {
    1e-11
}

fn default_max_newton() -> usize {
    30
}

fn default_damping_floor() -> f64 {
    2f64.powi(-20)
}

fn default_t_end() -> f64 {
    1.0 / 32.0
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            dt: None,
            eps: None,
            alpha: 0.0,
            tol_newton: default_tol(),
            max_newton: default_max_newton(),
            damping_floor: default_damping_floor(),
            t_end: default_t_end(),
        }
    }
}

/// What a run records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Evaluate the balance ledgers after every step.
    #[serde(default = "yes")]
    pub ledgers: bool,
    /// Write `diagnostics.csv`.
    #[serde(default = "yes")]
    pub csv: bool,
    /// VTK snapshot every this many steps; 0 writes the initial and final
    /// states only.
    #[serde(default)]
    pub snapshot_every: usize,
    /// Treat a violated identity as a failed run.
    #[serde(default = "yes")]
    pub fail_on_identity: bool,
}

fn yes() -> bool {
    true
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            ledgers: true,
            csv: true,
            snapshot_every: 0,
            fail_on_identity: true,
        }
    }
}

/// Convergence sweep; physics, geometry and data come from the rest of the
/// configuration and `t_end` from `[scheme]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
    #[serde(default = "default_n_ref")]
    pub n_ref: usize,
    #[serde(default = "quadratic")]
    pub dt: Coupling,
    #[serde(default = "quadratic")]
    pub eps: Coupling,
}

fn default_resolutions() -> Vec<usize> {
    vec![8, 16, 32]
}

fn default_n_ref() -> usize {
    128
}

fn quadratic() -> Coupling {
    Coupling::new(1.0, 2.0)
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            resolutions: default_resolutions(),
            n_ref: default_n_ref(),
            dt: quadratic(),
            eps: quadratic(),
        }
    }
}

fn default_geometry() -> ShapeSpec {
    ShapeSpec::ball(&[], 0.25)
}

/// Everything a run, study or reference generation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    /// Fluid region; an empty `center` means the centre of the domain.
    #[serde(default = "default_geometry")]
    pub geometry: ShapeSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub study: StudyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: None,
            grid: GridConfig::default(),
            physics: PhysicsConfig::default(),
            scheme: SchemeConfig::default(),
            geometry: default_geometry(),
            boundary: BoundarySpec::default(),
            initial: InitialSpec::default(),
            diagnostics: DiagnosticsConfig::default(),
            study: StudyConfig::default(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    /// Parses and validates TOML text. Syntax errors carry a line number;
    /// semantic errors are all reported together.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().trim().to_string();
            Error::Config(vec![match e.span() {
                Some(span) => format!("line {}: {msg}", line_of(text, span.start)),
                None => msg,
            }])
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn h(&self) -> f64 {
        self.grid.length / self.grid.n as f64
    }

    pub fn dt(&self) -> f64 {
        self.scheme.dt.unwrap_or_else(|| self.h() * self.h())
    }

    pub fn eps(&self) -> f64 {
        self.scheme.eps.unwrap_or_else(|| self.h() * self.h())
    }

    pub fn grid<T: Real>(&self) -> Result<Grid<T>> {
        Grid::new(self.grid.dim, self.grid.n, T::lit(self.grid.length))
    }

    /// Geometry with an empty centre placed at the domain centre.
    pub fn shape_spec(&self) -> ShapeSpec {
        let mut s = self.geometry.clone();
        if s.center.is_empty() && !matches!(s.kind.as_str(), "full" | "torus" | "empty" | "none") {
            s.center = vec![0.5 * self.grid.length; self.grid.dim];
        }
        s
    }

    pub fn shape<T: Real>(&self) -> Result<FluidShape<T>> {
        make_shape(&self.shape_spec(), self.grid.dim)
    }

    fn params_with<T: Real>(&self, dt: f64, eps: f64) -> SchemeParams<T> {
        SchemeParams {
            dt: T::lit(dt),
            eps: T::lit(eps),
            alpha: T::lit(self.scheme.alpha),
            mu: T::lit(self.physics.mu),
            lambda: T::lit(self.physics.lambda),
            kappa: T::lit(self.physics.kappa),
            gamma: T::lit(self.physics.gamma),
            tol_newton: T::lit(self.scheme.tol_newton),
            max_newton: self.scheme.max_newton,
            damping_floor: T::lit(self.scheme.damping_floor),
        }
    }

    pub fn params<T: Real>(&self) -> SchemeParams<T> {
        self.params_with(self.dt(), self.eps())
    }

    /// Number of steps to `t_end`.
    pub fn steps(&self) -> Result<usize> {
        step_count(self.scheme.t_end, self.dt())
    }

    pub fn problem<T: Real>(&self) -> Result<Problem<T>> {
        Problem::new(
            self.shape()?,
            &self.initial,
            &self.boundary,
            self.grid.length,
            self.seed,
        )
    }

    pub fn sweep<T: Real>(&self) -> SweepSpec<T> {
        SweepSpec {
            dim: self.grid.dim,
            length: T::lit(self.grid.length),
            resolutions: self.study.resolutions.clone(),
            n_ref: self.study.n_ref,
            dt: self.study.dt,
            eps: self.study.eps,
            t_end: T::lit(self.scheme.t_end),
            params: self.params_with(1.0, 1.0),
        }
    }

    /// Every violated constraint of the run and of the study section.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let g = &self.grid;
        let grid_ok =
            (g.dim == 2 || g.dim == 3) && g.n >= 2 && g.length > 0.0 && g.length.is_finite();
        if !(g.dim == 2 || g.dim == 3) {
            v.push(format!("grid.dim must be 2 or 3, got {}", g.dim));
        }
        if g.n < 2 {
            v.push(format!("grid.n must be at least 2, got {}", g.n));
        }
        if !(g.length > 0.0 && g.length.is_finite()) {
            v.push(format!("grid.length must be positive, got {}", g.length));
        }
        v.extend(self.params::<f64>().violations());
        if !(self.scheme.t_end > 0.0 && self.scheme.t_end.is_finite()) {
            v.push(format!(
                "final time must be positive, got {}",
                self.scheme.t_end
            ));
        } else if self.dt() > 0.0 && step_count(self.scheme.t_end, self.dt()).is_err() {
            v.push(format!(
                "t_end = {} is not an integer multiple of Δt = {} (to 1e-12)",
                self.scheme.t_end,
                self.dt()
            ));
        }
        if grid_ok {
            match self.shape::<f64>() {
                Err(e) => v.push(e.to_string()),
                Ok(shape) => {
                    let grid = self.grid::<f64>().expect("grid checked above");
                    if let Err(e) = shape.validate_for(&grid) {
                        v.push(e.to_string());
                    }
                }
            }
            v.extend(self.initial.violations(g.dim));
        }
        v.extend(self.boundary.violations());
        v
    }

    /// Constraints of the `[study]` section, checked only by studies and
    /// reference generation.
    pub fn study_violations(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .sweep::<f64>()
            .violations()
            .into_iter()
            .map(|m| format!("study: {m}"))
            .collect();
        if let Ok(shape) = self.shape::<f64>() {
            let coarsest = self
                .study
                .resolutions
                .iter()
                .copied()
                .filter(|&n| n > 0)
                .min();
            if let Some(n) = coarsest {
                if let Ok(grid) = Grid::new(self.grid.dim, n, self.grid.length) {
                    if let Err(e) = shape.validate_for(&grid) {
                        v.push(format!("study: n = {n}: {e}"));
                    }
                }
            }
        }
        v
    }

    pub fn validate_study(&self) -> Result<()> {
        let v = self.study_violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
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

/// Reads and validates a configuration file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn messages(text: &str) -> Vec<String> {
        match RunConfig::from_toml_str(text) {
            Err(Error::Config(v)) => v,
            other => panic!("expected a configuration error, got {other:?}"),
        }
    }

    #[test]
    fn empty_text_gives_documented_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!((c.grid.dim, c.grid.n, c.grid.length), (2, 32, 1.0));
        assert_eq!(c.dt(), 1.0 / 1024.0);
        assert_eq!(c.steps().unwrap(), 32);
        assert_eq!(c.shape_spec().center, vec![0.5, 0.5]);
        let p = c.params::<f64>();
        assert_eq!(
            (p.mu, p.lambda, p.kappa, p.gamma, p.alpha),
            (0.1, 0.0, 0.1, 1.4, 0.0)
        );
    }

    #[test]
    fn gamma_and_alpha_constraints() {
        let m = messages("[physics]\ngamma = 0.9\n");
        assert!(m.iter().any(|s| s.contains("γ must exceed 1")), "{m:?}");
        let m = messages("[scheme]\nalpha = -1.0\n");
        assert!(m.iter().any(|s| s.contains("α > −1")), "{m:?}");
    }

    #[test]
    fn all_semantic_errors_are_reported() {
        let m = messages(
            "[physics]\ngamma = 0.9\nmu = -1.0\n[scheme]\nalpha = -2.0\n[boundary]\nrho_s = 0.0\n",
        );
        assert!(m.len() >= 4, "{m:?}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let m = messages("seed = 1\n\n[grid]\nn = = 3\n");
        assert!(m[0].starts_with("line 4:"), "{m:?}");
        let m = messages("[grid]\nn = 8\nspacing = 2\n");
        assert!(
            m[0].starts_with("line 3:") && m[0].contains("spacing"),
            "{m:?}"
        );
    }

    #[test]
    fn step_must_divide_final_time() {
        let m = messages("[scheme]\ndt = 0.003\nt_end = 0.01\n");
        assert!(m.iter().any(|s| s.contains("integer multiple")), "{m:?}");
        assert!(RunConfig::from_toml_str("[scheme]\ndt = 0.001\nt_end = 0.01\n").is_ok());
    }

    #[test]
    fn study_section_is_checked_separately() {
        let c = RunConfig::from_toml_str("[study]\nresolutions = [8, 12]\nn_ref = 40\n").unwrap();
        let v = c.study_violations();
        assert!(v.iter().any(|s| s.contains("nested")), "{v:?}");
        assert!(RunConfig::default().study_violations().is_empty());
        let c = RunConfig::from_toml_str("[study]\nresolutions = [4, 8]\nn_ref = 32\n").unwrap();
        assert!(c
            .study_violations()
            .iter()
            .any(|s| s.contains("feature size")));
    }

    #[test]
    fn coarse_grid_rejects_small_shapes() {
        let m = messages("[grid]\nn = 4\n");
        assert!(m.iter().any(|s| s.contains("feature size")), "{m:?}");
    }

    #[test]
    fn serialization_round_trips() {
        let text = r#"
seed = 7
output_dir = "out"
[grid]
dim = 3
n = 16
[scheme]
dt = 0.001
eps = 0.002
t_end = 0.01
[geometry]
kind = "box"
center = [0.5, 0.5, 0.5]
half_widths = [0.2, 0.3, 0.25]
[initial]
preset = "smooth-random"
modes = 3
[boundary]
theta_b_amplitude = 0.1
[study]
resolutions = [8, 16]
n_ref = 64
dt = { coefficient = 0.5, exponent = 2.0 }
"#;
        let c = RunConfig::from_toml_str(text).unwrap();
        let again = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.to_toml_string(), c.to_toml_string());
        let d = RunConfig::default();
        assert_eq!(RunConfig::from_toml_str(&d.to_toml_string()).unwrap(), d);
    }
}
