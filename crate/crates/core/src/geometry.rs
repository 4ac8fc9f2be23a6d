//! Fluid-domain shapes and the extension of fluid data to the whole torus.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Grid, Point};
use crate::num::Real;

/// How a closed box sits relative to a shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxRelation {
    /// Entirely inside the open shape.
    Inside,
    /// Disjoint from the shape boundary and outside the shape.
    Outside,
    /// The box meets the shape boundary.
    Straddles,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind<T> {
    Ball {
        center: Point<T>,
        radius: T,
    },
    Ellipsoid {
        center: Point<T>,
        radii: Point<T>,
    },
    Box {
        center: Point<T>,
        half_widths: Point<T>,
    },
    Full,
    Empty,
}

/// Fluid region `Ω^f` embedded in the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidShape<T> {
    dim: usize,
    kind: ShapeKind<T>,
}

/// Plain-data description of a shape, as read from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub center: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub radii: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub half_widths: Vec<f64>,
}

impl ShapeSpec {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        ShapeSpec {
            kind: "ball".into(),
            center: center.to_vec(),
            radius: Some(radius),
            ..Self::full()
        }
    }

    pub fn full() -> Self {
        ShapeSpec {
            kind: "full".into(),
            center: vec![],
            radius: None,
            radii: vec![],
            half_widths: vec![],
        }
    }

    pub fn empty() -> Self {
        ShapeSpec {
            kind: "empty".into(),
            ..Self::full()
        }
    }
}

fn point_from<T: Real>(v: &[f64], dim: usize, what: &str) -> Result<Point<T>> {
    if v.len() != dim {
        return Err(Error::InvalidShape(format!(
            "{what} needs {dim} components, got {}",
            v.len()
        )));
    }
    let mut p = [T::zero(); 3];
    for (slot, &x) in p.iter_mut().zip(v) {
        if !x.is_finite() {
            return Err(Error::InvalidShape(format!(
                "{what} has a non-finite component"
            )));
        }
        *slot = T::lit(x);
    }
    Ok(p)
}

fn positive_point<T: Real>(v: &[f64], dim: usize, what: &str) -> Result<Point<T>> {
    let p = point_from::<T>(v, dim, what)?;
    if p.iter().take(dim).any(|&x| !(x > T::zero())) {
        return Err(Error::InvalidShape(format!("{what} must be positive")));
    }
    Ok(p)
}

/// Builds a shape from its description.
pub fn make_shape<T: Real>(spec: &ShapeSpec, dim: usize) -> Result<FluidShape<T>> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidShape(format!(
            "dimension must be 2 or 3, got {dim}"
        )));
    }
    let kind = match spec.kind.as_str() {
        "ball" | "disk" | "sphere" => {
            let r = spec
                .radius
                .ok_or_else(|| Error::InvalidShape("ball needs a radius".into()))?;
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidShape(format!(
                    "ball radius must be positive, got {r}"
                )));
            }
            ShapeKind::Ball {
                center: point_from(&spec.center, dim, "center")?,
                radius: T::lit(r),
            }
        }
        "ellipse" | "ellipsoid" => ShapeKind::Ellipsoid {
            center: point_from(&spec.center, dim, "center")?,
            radii: positive_point(&spec.radii, dim, "radii")?,
        },
        "box" => ShapeKind::Box {
            center: point_from(&spec.center, dim, "center")?,
            half_widths: positive_point(&spec.half_widths, dim, "half_widths")?,
        },
        "full" | "torus" => ShapeKind::Full,
        "empty" | "none" => ShapeKind::Empty,
        other => return Err(Error::InvalidShape(format!("unknown shape kind '{other}'"))),
    };
    Ok(FluidShape { dim, kind })
}

impl<T: Real> FluidShape<T> {
    pub fn new(dim: usize, kind: ShapeKind<T>) -> Self {
        FluidShape { dim, kind }
    }

    pub fn full(dim: usize) -> Self {
        FluidShape {
            dim,
            kind: ShapeKind::Full,
        }
    }

    pub fn empty(dim: usize) -> Self {
        FluidShape {
            dim,
            kind: ShapeKind::Empty,
        }
    }

    pub fn ball(dim: usize, center: Point<T>, radius: T) -> Self {
        FluidShape {
            dim,
            kind: ShapeKind::Ball { center, radius },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ShapeKind<T> {
        &self.kind
    }

    /// Strict membership in the open fluid region.
    pub fn contains(&self, x: &Point<T>) -> bool {
        let d = self.dim;
        match &self.kind {
            ShapeKind::Ball { center, radius } => {
                let r2 = (0..d)
                    .map(|a| (x[a] - center[a]).powi(2))
                    .fold(T::zero(), |s, v| s + v);
                r2 < *radius * *radius
            }
            ShapeKind::Ellipsoid { center, radii } => {
                let q = (0..d)
                    .map(|a| ((x[a] - center[a]) / radii[a]).powi(2))
                    .fold(T::zero(), |s, v| s + v);
                q < T::one()
            }
            ShapeKind::Box {
                center,
                half_widths,
            } => (0..d).all(|a| (x[a] - center[a]).abs() < half_widths[a]),
            ShapeKind::Full => true,
            ShapeKind::Empty => false,
        }
    }

    /// Exact classification of the closed box `[lo, hi]`.
    pub fn classify_box(&self, lo: &Point<T>, hi: &Point<T>, dim: usize) -> BoxRelation {
        match &self.kind {
            ShapeKind::Full => BoxRelation::Inside,
            ShapeKind::Empty => BoxRelation::Outside,
            ShapeKind::Ball { center, radius } => {
                let ones = [T::one(); 3];
                classify_scaled_ball(lo, hi, center, &ones, *radius, dim)
            }
            ShapeKind::Ellipsoid { center, radii } => {
                classify_scaled_ball(lo, hi, center, radii, T::one(), dim)
            }
            ShapeKind::Box {
                center,
                half_widths,
            } => {
                let mut inside = true;
                for a in 0..dim {
                    let blo = center[a] - half_widths[a];
                    let bhi = center[a] + half_widths[a];
                    if hi[a] < blo || lo[a] > bhi {
                        return BoxRelation::Outside;
                    }
                    if !(lo[a] > blo && hi[a] < bhi) {
                        inside = false;
                    }
                }
                if inside {
                    BoxRelation::Inside
                } else {
                    BoxRelation::Straddles
                }
            }
        }
    }

    /// Smallest length scale of the boundary (minimal radius of curvature or
    /// half-width); infinite for shapes without boundary.
    pub fn min_feature_size(&self) -> T {
        let d = self.dim;
        match &self.kind {
            ShapeKind::Ball { radius, .. } => *radius,
            ShapeKind::Ellipsoid { radii, .. } => {
                let rmin = (0..d).map(|a| radii[a]).fold(T::infinity(), T::min);
                let rmax = (0..d).map(|a| radii[a]).fold(T::zero(), T::max);
                rmin * rmin / rmax
            }
            ShapeKind::Box { half_widths, .. } => {
                (0..d).map(|a| half_widths[a]).fold(T::infinity(), T::min)
            }
            ShapeKind::Full | ShapeKind::Empty => T::infinity(),
        }
    }

    fn bounding_box(&self) -> Option<(Point<T>, Point<T>)> {
        let d = self.dim;
        let (center, ext) = match &self.kind {
            ShapeKind::Ball { center, radius } => (center, [*radius; 3]),
            ShapeKind::Ellipsoid { center, radii } => (center, *radii),
            ShapeKind::Box {
                center,
                half_widths,
            } => (center, *half_widths),
            ShapeKind::Full | ShapeKind::Empty => return None,
        };
        let mut lo = [T::zero(); 3];
        let mut hi = [T::zero(); 3];
        for a in 0..d {
            lo[a] = center[a] - ext[a];
            hi[a] = center[a] + ext[a];
        }
        Some((lo, hi))
    }

    /// Requires the boundary to be resolved (feature size at least `2h`) and
    /// the shape to sit inside the torus with a clearance of `2h`.
    pub fn validate_for(&self, grid: &Grid<T>) -> Result<()> {
        if self.dim != grid.dim() {
            return Err(Error::InvalidShape(format!(
                "shape dimension {} does not match grid dimension {}",
                self.dim,
                grid.dim()
            )));
        }
        let two_h = T::two() * grid.h();
        let feature = self.min_feature_size();
        if feature < two_h {
            return Err(Error::InvalidShape(format!(
                "boundary feature size {feature} is below 2h = {two_h}; refine the mesh"
            )));
        }
        if let Some((lo, hi)) = self.bounding_box() {
            for a in 0..self.dim {
                if lo[a] < two_h || hi[a] > grid.len() - two_h {
                    return Err(Error::InvalidShape(format!(
                        "shape leaves less than 2h clearance to the torus edge along axis {a}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Classifies a box against `{ sum ((x - c) / s)^2 < r^2 }` through the axis
/// scaling that maps the ellipsoid to a ball.
fn classify_scaled_ball<T: Real>(
    lo: &Point<T>,
    hi: &Point<T>,
    center: &Point<T>,
    scale: &Point<T>,
    radius: T,
    dim: usize,
) -> BoxRelation {
    let mut near = T::zero();
    let mut far = T::zero();
    for a in 0..dim {
        let l = (lo[a] - center[a]) / scale[a];
        let u = (hi[a] - center[a]) / scale[a];
        let nearest = if l > T::zero() {
            l
        } else if u < T::zero() {
            u
        } else {
            T::zero()
        };
        let farthest = l.abs().max(u.abs());
        near = near + nearest * nearest;
        far = far + farthest * farthest;
    }
    let r2 = radius * radius;
    if far < r2 {
        BoxRelation::Inside
    } else if near > r2 {
        BoxRelation::Outside
    } else {
        BoxRelation::Straddles
    }
}

/// Density, velocity and temperature at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState<T> {
    pub rho: T,
    pub u: [T; 3],
    pub theta: T,
}

pub type ScalarFn<T> = Arc<dyn Fn(T, &Point<T>) -> T + Send + Sync>;
pub type StateFn<T> = Arc<dyn Fn(T, &Point<T>) -> PointState<T> + Send + Sync>;

/// Data defined on the whole torus: a fluid-region triple on `Ω^f`,
/// `(ρ₀^s, 0, θ_B)` on the solid complement.
#[derive(Clone)]
pub struct ExtendedTriple<T> {
    shape: FluidShape<T>,
    fluid: StateFn<T>,
    rho_s: ScalarFn<T>,
    theta_b: ScalarFn<T>,
}

impl<T: Real> std::fmt::Debug for ExtendedTriple<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExtendedTriple")
            .field("shape", &self.shape)
            .finish_non_exhaustive()
    }
}

impl<T: Real> ExtendedTriple<T> {
    pub fn eval(&self, t: T, x: &Point<T>) -> PointState<T> {
        if self.shape.contains(x) {
            (self.fluid)(t, x)
        } else {
            PointState {
                rho: (self.rho_s)(t, x),
                u: [T::zero(); 3],
                theta: (self.theta_b)(t, x),
            }
        }
    }

    pub fn shape(&self) -> &FluidShape<T> {
        &self.shape
    }

    pub fn theta_b(&self) -> &ScalarFn<T> {
        &self.theta_b
    }

    pub fn rho_s(&self) -> &ScalarFn<T> {
        &self.rho_s
    }
}

/// Extends initial fluid data by `(ρ₀^s, 0, θ_B)` on the solid region.
///
/// `rho_s` and `theta_b` receive the evaluation time as first argument; the
/// fluid data are time independent.
pub fn extend_initial_data<T: Real>(
    fluid_data: impl Fn(&Point<T>) -> PointState<T> + Send + Sync + 'static,
    rho_s: ScalarFn<T>,
    theta_b: ScalarFn<T>,
    shape: FluidShape<T>,
) -> ExtendedTriple<T> {
    ExtendedTriple {
        shape,
        fluid: Arc::new(move |_t, x| fluid_data(x)),
        rho_s,
        theta_b,
    }
}

/// Extends a time-dependent fluid-region reference in the same way.
pub fn extend_reference<T: Real>(
    fluid_reference: StateFn<T>,
    rho_s: ScalarFn<T>,
    theta_b: ScalarFn<T>,
    shape: FluidShape<T>,
) -> ExtendedTriple<T> {
    ExtendedTriple {
        shape,
        fluid: fluid_reference,
        rho_s,
        theta_b,
    }
}

pub fn constant_fn<T: Real>(value: T) -> ScalarFn<T> {
    Arc::new(move |_t, _x| value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_ball() -> FluidShape<f64> {
        make_shape(&ShapeSpec::ball(&[0.5, 0.5], 0.3), 2).unwrap()
    }

    #[test]
    fn ball_membership() {
        let s = unit_ball();
        assert!(s.contains(&[0.5, 0.5, 0.0]));
        assert!(!s.contains(&[0.9, 0.5, 0.0]));
        assert!(
            !s.contains(&[0.8, 0.5, 0.0]),
            "boundary point is not in the open disk"
        );
    }

    #[test]
    fn full_contains_everything() {
        let s: FluidShape<f64> = make_shape(&ShapeSpec::full(), 3).unwrap();
        for x in [[0.0, 0.0, 0.0], [0.99, 0.3, 0.7]] {
            assert!(s.contains(&x));
        }
    }

    #[test]
    fn ellipse_quadratic_form() {
        let spec = ShapeSpec {
            kind: "ellipse".into(),
            center: vec![0.5, 0.5],
            radius: None,
            radii: vec![0.4, 0.25],
            half_widths: vec![],
        };
        let s: FluidShape<f64> = make_shape(&spec, 2).unwrap();
        // (0.39/0.4)^2 = 0.950625 < 1
        assert!(s.contains(&[0.89, 0.5, 0.0]));
        assert!(!s.contains(&[0.5, 0.76, 0.0]));
        assert!((s.min_feature_size() - 0.25 * 0.25 / 0.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed_specs() {
        assert!(make_shape::<f64>(&ShapeSpec::ball(&[0.5], 0.3), 2).is_err());
        assert!(make_shape::<f64>(&ShapeSpec::ball(&[0.5, 0.5], -0.3), 2).is_err());
        let mut bad = ShapeSpec::full();
        bad.kind = "torus-knot".into();
        assert!(make_shape::<f64>(&bad, 2).is_err());
    }

    #[test]
    fn validation_against_grid() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        assert!(unit_ball().validate_for(&g).is_ok());
        let tiny = FluidShape::ball(2, [0.5, 0.5, 0.0], 0.1);
        assert!(tiny.validate_for(&g).is_err(), "radius 0.1 < 2h = 0.125");
        let touching = FluidShape::ball(2, [0.5, 0.5, 0.0], 0.45);
        assert!(touching.validate_for(&g).is_err(), "clearance below 2h");
    }

    #[test]
    fn box_classification() {
        let s = unit_ball();
        let r = s.classify_box(&[0.45, 0.45, 0.0], &[0.55, 0.55, 0.0], 2);
        assert_eq!(r, BoxRelation::Inside);
        let r = s.classify_box(&[0.0, 0.0, 0.0], &[0.1, 0.1, 0.0], 2);
        assert_eq!(r, BoxRelation::Outside);
        let r = s.classify_box(&[0.75, 0.45, 0.0], &[0.85, 0.55, 0.0], 2);
        assert_eq!(r, BoxRelation::Straddles);
    }

    #[test]
    fn extension_selects_by_region() {
        let ext = extend_initial_data(
            |_x: &Point<f64>| PointState {
                rho: 1.0,
                u: [0.3, 0.1, 0.0],
                theta: 2.0,
            },
            constant_fn(2.0),
            constant_fn(1.5),
            unit_ball(),
        );
        let inside = ext.eval(0.0, &[0.5, 0.5, 0.0]);
        assert_eq!(inside.rho, 1.0);
        assert_eq!(inside.u[0], 0.3);
        let outside = ext.eval(0.0, &[0.05, 0.05, 0.0]);
        assert_eq!(
            outside,
            PointState {
                rho: 2.0,
                u: [0.0; 3],
                theta: 1.5
            }
        );
    }

    #[test]
    fn extension_of_empty_and_full_shapes() {
        let data = |_x: &Point<f64>| PointState {
            rho: 1.0,
            u: [0.2, 0.0, 0.0],
            theta: 3.0,
        };
        let full = extend_initial_data(
            data,
            constant_fn(5.0),
            constant_fn(7.0),
            FluidShape::full(2),
        );
        assert_eq!(full.eval(0.0, &[0.1, 0.9, 0.0]).theta, 3.0);
        let empty = extend_initial_data(
            data,
            constant_fn(5.0),
            constant_fn(7.0),
            FluidShape::empty(2),
        );
        assert_eq!(
            empty.eval(0.0, &[0.5, 0.5, 0.0]),
            PointState {
                rho: 5.0,
                u: [0.0; 3],
                theta: 7.0
            }
        );
    }

    #[test]
    fn constant_reference_extends_to_constant() {
        let reference: StateFn<f64> = Arc::new(|_t, _x| PointState {
            rho: 1.0,
            u: [0.0; 3],
            theta: 1.0,
        });
        let ext = extend_reference(reference, constant_fn(1.0), constant_fn(1.0), unit_ball());
        for x in [[0.5, 0.5, 0.0], [0.01, 0.99, 0.0], [0.8, 0.5, 0.0]] {
            assert_eq!(
                ext.eval(0.3, &x),
                PointState {
                    rho: 1.0,
                    u: [0.0; 3],
                    theta: 1.0
                }
            );
        }
    }
}
