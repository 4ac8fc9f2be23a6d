use super::jacobian::JacobianPattern;
use super::params::SchemeParams;
use super::residual::{check_inputs, residual_unchecked};
use super::state::{BoundaryData, State};
use crate::error::{Error, Result};
use crate::mesh::{DomainMask, Grid};
use crate::num::{max_abs, Real};
use crate::sparse::{gmres, GmresOptions, Ilu0};

/// Outcome of one Newton solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats<T> {
    /// Residual evaluations at accepted iterates (1 when the initial guess
    /// already satisfies the tolerance).
    pub iterations: usize,
    /// Max norm of the final residual.
    pub residual: T,
    pub linear_iterations: usize,
    /// Smallest backtracking factor used.
    pub min_damping: T,
    /// Accepted on the rounding-floor criterion rather than the plain one.
    pub stagnated: bool,
}

fn positive<T: Real>(x: &[T], block: usize) -> bool {
    x.chunks(block)
        .all(|c| c[0] > T::zero() && c[block - 1] > T::zero() && c.iter().all(|v| v.is_finite()))
}

/// Solves the implicit system for the state at `old.t + dt`.
///
/// Newton's method with the upwind directions of the current iterate, an
/// ILU(0)-preconditioned GMRES inner solve, and step halving until density
/// and temperature stay positive. The iteration stops when the residual max
/// norm is below `tol_newton · max(1, ‖old‖_∞)`, or when `Δt` times the
/// residual is below that bound and the residual no longer halves per
/// iteration (rounding floor).
pub fn advance_step<T: Real>(
    old: &State<T>,
    params: &SchemeParams<T>,
    mask: &DomainMask,
    bdata: &BoundaryData<T>,
) -> Result<(State<T>, SolveStats<T>)> {
    Stepper::new(old.grid()).advance(old, params, mask, bdata)
}

/// Time stepper that keeps the Jacobian sparsity pattern between steps.
#[derive(Debug, Clone)]
pub struct Stepper<T> {
    pattern: JacobianPattern<T>,
}

impl<T: Real> Stepper<T> {
    pub fn new(grid: &Grid<T>) -> Self {
        Stepper {
            pattern: JacobianPattern::new(grid),
        }
    }

    /// One implicit step; see [`advance_step`].
    pub fn advance(
        &self,
        old: &State<T>,
        params: &SchemeParams<T>,
        mask: &DomainMask,
        bdata: &BoundaryData<T>,
    ) -> Result<(State<T>, SolveStats<T>)> {
        if !self.pattern.matches(old.grid()) {
            return Err(Error::FieldMismatch(
                "stepper was built for another grid".into(),
            ));
        }
        newton(&self.pattern, old, params, mask, bdata)
    }
}

fn newton<T: Real>(
    pattern: &JacobianPattern<T>,
    old: &State<T>,
    params: &SchemeParams<T>,
    mask: &DomainMask,
    bdata: &BoundaryData<T>,
) -> Result<(State<T>, SolveStats<T>)> {
    params.validate()?;
    old.check()?;
    let g = *old.grid();
    let t_new = old.t + params.dt;
    let bnew = bdata.at_time(t_new);
    let block = g.dim() + 2;
    let scale = T::one().max(old.max_abs());
    let target = params.tol_newton * scale;
    let lin_opts = GmresOptions {
        restart: 50,
        max_iter: 1000,
        rel_tol: T::lit(1e-10).max(T::epsilon() * T::lit(100.0)),
        abs_tol: T::zero(),
    };

    let mut x = State {
        t: t_new,
        ..old.clone()
    };
    check_inputs(&x, old, mask, &bnew)?;
    let mut stats = SolveStats {
        iterations: 0,
        residual: T::infinity(),
        linear_iterations: 0,
        min_damping: T::one(),
        stagnated: false,
    };
    let mut prev = T::infinity();
    for _ in 0..params.max_newton {
        let r = residual_unchecked(&x, old, params, mask, &bnew);
        let rn = max_abs(&r);
        stats.iterations += 1;
        stats.residual = rn;
        if !rn.is_finite() {
            return Err(Error::NonFinite("Newton residual".into()));
        }
        if rn <= target {
            return Ok((x, stats));
        }
        if rn * params.dt <= target && rn > prev * T::half() {
            stats.stagnated = true;
            return Ok((x, stats));
        }
        prev = rn;

        let jac = pattern.assemble(&x, params, mask);
        let ilu = Ilu0::new(&jac)?;
        let rhs: Vec<T> = r.iter().map(|&v| -v).collect();
        let mut delta = vec![T::zero(); rhs.len()];
        let lin = gmres(&jac, &ilu, &rhs, &mut delta, &lin_opts);
        stats.linear_iterations += lin.iterations;
        if !lin.residual.is_finite() || delta.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolver(format!(
                "non-finite update after {} iterations",
                lin.iterations
            )));
        }

        let x0 = x.to_vector();
        let mut damping = T::one();
        let trial = loop {
            let cand: Vec<T> = x0
                .iter()
                .zip(&delta)
                .map(|(&a, &b)| a + damping * b)
                .collect();
            if positive(&cand, block) {
                break cand;
            }
            damping = damping * T::half();
            if damping < params.damping_floor {
                return Err(Error::PositivityLost {
                    damping: damping.to_f64_lossy(),
                });
            }
        };
        stats.min_damping = stats.min_damping.min(damping);
        x = State::from_vector(&g, &trial, t_new)?;
    }
    Err(Error::NoConvergence {
        iterations: stats.iterations,
        residual: stats.residual.to_f64_lossy(),
    })
}

/// Number of steps `t_end / dt`, which must be an integer to `1e-12` relative.
pub fn step_count<T: Real>(t_end: T, dt: T) -> Result<usize> {
    let ratio = (t_end / dt).to_f64_lossy();
    let n = ratio.round();
    if !(ratio >= 0.0) || (ratio - n).abs() > 1e-12 * n.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "final time {t_end} is not an integer multiple of Δt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// What a step hook sees after each accepted step.
pub struct StepRecord<'a, T> {
    /// 1-based step index.
    pub step: usize,
    pub old: &'a State<T>,
    pub new: &'a State<T>,
    /// Boundary data at the new time level.
    pub bdata: &'a BoundaryData<T>,
    pub stats: &'a SolveStats<T>,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub final_state: State<T>,
    pub stats: Vec<SolveStats<T>>,
}

/// Runs `steps` implicit steps, calling `hook` after each accepted one.
pub fn run_simulation<T: Real>(
    initial: &State<T>,
    params: &SchemeParams<T>,
    mask: &DomainMask,
    bdata: &BoundaryData<T>,
    steps: usize,
    mut hook: impl FnMut(&StepRecord<'_, T>) -> Result<()>,
) -> Result<Trajectory<T>> {
    let stepper = Stepper::new(initial.grid());
    let mut state = initial.clone();
    let mut all = Vec::with_capacity(steps);
    for step in 1..=steps {
        let (new, stats) = stepper.advance(&state, params, mask, bdata)?;
        let bnew = bdata.at_time(new.t);
        hook(&StepRecord {
            step,
            old: &state,
            new: &new,
            bdata: &bnew,
            stats: &stats,
        })?;
        all.push(stats);
        state = new;
    }
    Ok(Trajectory {
        final_state: state,
        stats: all,
    })
}
