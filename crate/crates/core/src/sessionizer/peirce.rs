//! Peirce's criterion for rejecting outlying observations.
//!
//! The maximum allowable deviation ratio `R` for `n` doubtful observations out
//! of `N` is found with Gould's fixed-point iteration, falling back to
//! bisection where the iteration does not converge. Rejection then follows
//! the usual procedure: mean and sample standard deviation are computed once
//! from all observations; starting from one doubtful observation, every value
//! farther than `R·σ` from the mean is rejected, and the number of doubtful
//! observations is raised to one more than the rejected count until a round
//! rejects fewer values than it assumed.

use statrs::function::erf::erfc;

/// Unknown quantities estimated from the sample (the mean).
const UNKNOWNS: usize = 1;
const MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeirceOutcome {
    /// Kept samples, in input order.
    pub retained: Vec<f64>,
    /// Rejected samples, in input order.
    pub removed: Vec<f64>,
}

/// Ratio `R` of maximum allowable deviation to standard deviation for
/// `n_doubtful` suspected outliers among `n_obs` observations.
///
/// Returns `None` when the combination is not admissible
/// (`n_doubtful == 0` or `n_doubtful + 1 >= n_obs`) or when Gould's equation
/// has no positive root, which happens only for `n_doubtful` close to `n_obs`.
pub fn peirce_ratio(n_obs: usize, n_doubtful: usize) -> Option<f64> {
    if n_doubtful == 0 || n_doubtful + UNKNOWNS >= n_obs {
        return None;
    }
    let big_n = n_obs as f64;
    let n = n_doubtful as f64;
    let m = UNKNOWNS as f64;

    // N·ln Q, kept in log space so large N does not underflow.
    let ln_qn = n * n.ln() + (big_n - n) * (big_n - n).ln() - big_n * big_n.ln();

    let mut r_new = 1.0_f64;
    let mut r_old = 0.0_f64;
    let mut x2 = 0.0_f64;
    for _ in 0..MAX_ITERATIONS {
        if (r_new - r_old).abs() <= big_n * 2.0e-16 {
            if x2 > 0.0 {
                return Some(x2.sqrt());
            }
            break;
        }
        let ln_lambda = (ln_qn - n * r_new.ln()) / (big_n - n);
        x2 = 1.0 + (big_n - m - n) / n * (1.0 - (2.0 * ln_lambda).exp());
        r_old = r_new;
        if x2 <= 0.0 {
            break;
        }
        // exp((x²-1)/2)·erfc(x/√2)
        r_new = (-0.5_f64).exp() * erfcx((x2 / 2.0).sqrt());
    }
    // The iteration leaves its basin when the root is below one; bisect.
    bisect_ratio(big_n, n, m, ln_qn)
}

/// Root of `n ln R(x) + (N-n)/2 ln λ²(x) - N ln Q` on `(0, x_max)`, where
/// `λ²` reaches zero at `x_max`.
fn bisect_ratio(big_n: f64, n: f64, m: f64, ln_qn: f64) -> Option<f64> {
    let g = |x: f64| {
        let ln_r = -0.5 + erfcx(x / std::f64::consts::SQRT_2).ln();
        let lambda2 = 1.0 - (x * x - 1.0) * n / (big_n - m - n);
        n * ln_r + (big_n - n) / 2.0 * lambda2.ln() - ln_qn
    };
    let mut lo = 0.0_f64;
    let mut hi = (1.0 + (big_n - m - n) / n).sqrt();
    let g_lo = g(lo);
    if g_lo <= 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Scaled complementary error function `exp(x²)·erfc(x)` for `x ≥ 0`.
fn erfcx(x: f64) -> f64 {
    if x < 20.0 {
        (x * x).exp() * erfc(x)
    } else {
        let inv2 = 1.0 / (x * x);
        (1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2)
            / (x * std::f64::consts::PI.sqrt())
    }
}

/// Splits `samples` into retained and rejected values.
///
/// Fewer than three samples, or samples with no spread, are returned intact.
/// The result depends only on the multiset of values, not their order.
pub fn peirce_filter(samples: &[f64]) -> PeirceOutcome {
    let keep_all = || PeirceOutcome {
        retained: samples.to_vec(),
        removed: Vec::new(),
    };
    let n_obs = samples.len();
    if n_obs < 3 || samples.iter().all(|&x| x == samples[0]) {
        return keep_all();
    }

    // Summing in sorted order makes the statistics independent of input order.
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n_obs as f64;
    let mut deviations: Vec<f64> = sorted.iter().map(|x| (x - mean).abs()).collect();
    let var = deviations.iter().map(|d| d * d).sum::<f64>() / (n_obs - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return keep_all();
    }
    deviations.sort_by(|a, b| b.total_cmp(a));

    let mut limit = f64::INFINITY;
    let mut doubtful = 1;
    while let Some(ratio) = peirce_ratio(n_obs, doubtful) {
        let max_dev = ratio * sd;
        let rejected = deviations.iter().take_while(|&&d| d > max_dev).count();
        if rejected < doubtful {
            break;
        }
        limit = max_dev;
        doubtful = rejected + 1;
    }

    let (removed, retained): (Vec<f64>, Vec<f64>) =
        samples.iter().partition(|&&x| (x - mean).abs() > limit);
    PeirceOutcome { retained, removed }
}
