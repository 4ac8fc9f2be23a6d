//! Taylor remainders of the convex functions that appear in the balances,
//! written so that they stay nonnegative under rounding.

use crate::num::Real;

const SERIES_CUTOFF: f64 = 1e-2;
const SERIES_TERMS: usize = 12;

/// `(1 + δ) log(1 + δ) − δ`, which is `≥ 0` for `δ > −1`.
fn xlogx_gap<T: Real>(delta: T) -> T {
    if delta.abs() < T::lit(SERIES_CUTOFF) {
        // Σ_{k≥2} (−1)^k δ^k / (k (k − 1))
        let mut acc = T::zero();
        let mut pow = delta * delta;
        for k in 2..2 + SERIES_TERMS {
            let term = pow / T::from_usize_exact(k * (k - 1));
            acc = if k % 2 == 0 { acc + term } else { acc - term };
            pow = pow * delta;
        }
        acc
    } else {
        ((T::one() + delta) * delta.ln_1p() - delta).max(T::zero())
    }
}

/// `δ − log(1 + δ)`, which is `≥ 0` for `δ > −1`.
fn log_gap<T: Real>(delta: T) -> T {
    if delta.abs() < T::lit(SERIES_CUTOFF) {
        // Σ_{k≥2} (−1)^k δ^k / k
        let mut acc = T::zero();
        let mut pow = delta * delta;
        for k in 2..2 + SERIES_TERMS {
            let term = pow / T::from_usize_exact(k);
            acc = if k % 2 == 0 { acc + term } else { acc - term };
            pow = pow * delta;
        }
        acc
    } else {
        (delta - delta.ln_1p()).max(T::zero())
    }
}

/// `E_B(x|y)` for `B(ρ) = ρ log ρ`, i.e. `x log(x/y) − x + y`.
pub fn remainder_xlogx<T: Real>(x: T, y: T) -> T {
    if x == y {
        return T::zero();
    }
    y * xlogx_gap((x - y) / y)
}

/// `E_log(x|y) = log x − (x − y)/y − log y`, which is `≤ 0`.
pub fn remainder_log<T: Real>(x: T, y: T) -> T {
    if x == y {
        return T::zero();
    }
    -log_gap((x - y) / y)
}
