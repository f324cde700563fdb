//! Closed-form performance model of PeerNomination under truthful reviews and
//! a uniformly random assignment.
//!
//! An agent at true rank `r` lands at pool position `y` with a
//! hypergeometric probability. Summing over the nominated positions gives the
//! per-pool nomination probability `q_r`, and treating the `m` pools as
//! independent trials gives the acceptance probability as a binomial tail.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::{binomial, ln_binomial};

use crate::domain::Instance;
use crate::error::{Error, Result};
use crate::mechanism::{base_quota, NominationQuota};

/// Acceptance probability per true rank `r = 1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceCurve {
    pub points: Vec<(usize, f64)>,
}

/// One point of the ROC / PR sweep over the nomination quota.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub quota: f64,
    pub tpr: f64,
    pub fpr: f64,
    /// Reported as 1 when the expected selection is empty; see `ppv_undefined`.
    pub ppv: f64,
    #[serde(skip)]
    pub ppv_undefined: bool,
}

/// `P[Y = y | R = r]`: probability that the agent of true rank `r` sits at
/// position `y` of a random pool of size `m`.
///
/// `C(r-1, y-1)·C(n-r, m-y) / C(n-1, m-1)`. When numerator and denominator
/// are integers exactly representable as `f64` the result is the correctly
/// rounded ratio; otherwise it is evaluated in log space.
pub fn pool_position_pmf(n: usize, m: usize, r: usize, y: usize) -> f64 {
    if r == 0 || r > n || y == 0 || y > m || m > n - 1 {
        return 0.0;
    }
    if y - 1 > r - 1 || m - y > n - r {
        return 0.0;
    }
    let exact = exact_binomial(r - 1, y - 1)
        .zip(exact_binomial(n - r, m - y))
        .and_then(|(a, b)| a.checked_mul(b))
        .zip(exact_binomial(n - 1, m - 1));
    match exact {
        Some((num, den)) if num <= MAX_EXACT && den <= MAX_EXACT => num as f64 / den as f64,
        _ => {
            let ln = ln_binomial((r - 1) as u64, (y - 1) as u64)
                + ln_binomial((n - r) as u64, (m - y) as u64)
                - ln_binomial((n - 1) as u64, (m - 1) as u64);
            ln.exp()
        }
    }
}

/// Largest integer below which every integer is an exact `f64`.
const MAX_EXACT: u128 = 1 << 53;

fn exact_binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(c)
}

fn nomination_prob_for_quota(n: usize, m: usize, r: usize, quota: &NominationQuota) -> f64 {
    let whole = quota.integer_part();
    if whole >= m {
        return 1.0;
    }
    let mut q: f64 = (1..=whole).map(|y| pool_position_pmf(n, m, r, y)).sum();
    if quota.fractional_part() > 0.0 {
        q += quota.fractional_part() * pool_position_pmf(n, m, r, whole + 1);
    }
    q.min(1.0)
}

/// `q_r^ε`: probability that one reviewer nominates the agent of true rank `r`.
pub fn nomination_prob_from_rank(instance: &Instance, epsilon: f64, r: usize) -> Result<f64> {
    let quota = NominationQuota::new(instance, epsilon)?;
    Ok(nomination_prob_for_quota(
        instance.n(),
        instance.m(),
        r,
        &quota,
    ))
}

/// `Σ_{i=t}^{m} C(m,i) q^i (1-q)^{m-i}`.
pub fn binomial_tail(m: usize, q: f64, threshold: usize) -> f64 {
    if threshold == 0 || q >= 1.0 {
        return if threshold <= m { 1.0 } else { 0.0 };
    }
    if q <= 0.0 {
        return 0.0;
    }
    let tail: f64 = (threshold..=m)
        .map(|i| binomial(m as u64, i as u64) * q.powi(i as i32) * (1.0 - q).powi((m - i) as i32))
        .sum();
    tail.min(1.0)
}

fn acceptance_for_quota(instance: &Instance, r: usize, quota: &NominationQuota) -> f64 {
    let q = nomination_prob_for_quota(instance.n(), instance.m(), r, quota);
    binomial_tail(instance.m(), q, instance.majority())
}

/// `P[accept | R = r]` with the acceptance threshold `⌈m/2⌉`.
pub fn acceptance_probability(instance: &Instance, epsilon: f64, r: usize) -> Result<f64> {
    let quota = NominationQuota::new(instance, epsilon)?;
    Ok(acceptance_for_quota(instance, r, &quota))
}

pub fn acceptance_curve(instance: &Instance, epsilon: f64) -> Result<AcceptanceCurve> {
    let quota = NominationQuota::new(instance, epsilon)?;
    let points = (1..=instance.n())
        .map(|r| (r, acceptance_for_quota(instance, r, &quota)))
        .collect();
    Ok(AcceptanceCurve { points })
}

struct Sums {
    top: f64,
    rest: f64,
}

fn acceptance_sums(instance: &Instance, quota: &NominationQuota) -> Sums {
    let mut sums = Sums {
        top: 0.0,
        rest: 0.0,
    };
    for r in 1..=instance.n() {
        let p = acceptance_for_quota(instance, r, quota);
        if r <= instance.k() {
            sums.top += p;
        } else {
            sums.rest += p;
        }
    }
    sums
}

/// Expected size of the accepted set: the sum of acceptance probabilities.
pub fn expected_size(instance: &Instance, epsilon: f64) -> Result<f64> {
    let quota = NominationQuota::new(instance, epsilon)?;
    let s = acceptance_sums(instance, &quota);
    Ok(s.top + s.rest)
}

/// Mean acceptance probability over the true top `k`.
pub fn expected_recall(instance: &Instance, epsilon: f64) -> Result<f64> {
    let quota = NominationQuota::new(instance, epsilon)?;
    Ok(acceptance_sums(instance, &quota).top / instance.k() as f64)
}

/// Finds ε with `|expected_size - target| <= tolerance` by bisection over
/// `ε ∈ [-k_q, m - k_q]`, i.e. quotas from 0 to `m`.
///
/// Expected size is continuous and nondecreasing in ε, running from 0 at
/// quota 0 to `n` at quota `m`.
pub fn calibrate_epsilon(instance: &Instance, target: f64, tolerance: f64) -> Result<f64> {
    let n = instance.n() as f64;
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tolerance} must be positive"
        )));
    }
    if !(target > 0.0 && target <= n) {
        return Err(Error::UnreachableTarget {
            target,
            low: 0.0,
            high: n,
        });
    }
    let kq = base_quota(instance.n(), instance.m(), instance.k());
    let size_at = |quota: f64| -> f64 {
        let q = NominationQuota::from_value(quota).expect("quota within [0, m]");
        let s = acceptance_sums(instance, &q);
        s.top + s.rest
    };
    let (mut lo, mut hi) = (0.0_f64, instance.m() as f64);
    let (f_lo, f_hi) = (size_at(lo), size_at(hi));
    if (f_hi - target).abs() <= tolerance {
        return Ok(hi - kq);
    }
    if target < f_lo - tolerance || target > f_hi + tolerance {
        return Err(Error::UnreachableTarget {
            target,
            low: f_lo,
            high: f_hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if size_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (s_lo, s_hi) = (size_at(lo), size_at(hi));
    let quota = if (s_hi - target).abs() <= (s_lo - target).abs() {
        hi
    } else {
        lo
    };
    let achieved = size_at(quota);
    if (achieved - target).abs() > tolerance {
        return Err(Error::UnreachableTarget {
            target,
            low: f_lo,
            high: f_hi,
        });
    }
    Ok(quota - kq)
}

/// Analytic ROC / PR points on a uniform quota grid over `[0, m]`.
pub fn roc_pr_curves(instance: &Instance, grid_size: usize) -> Result<Vec<CurvePoint>> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid size {grid_size} must be at least 2"
        )));
    }
    let (n, m, k) = (instance.n(), instance.m(), instance.k());
    let kq = base_quota(n, m, k);
    let negatives = (n - k) as f64;
    let points = (0..grid_size)
        .map(|g| {
            let quota_value = m as f64 * g as f64 / (grid_size - 1) as f64;
            let quota = NominationQuota::from_value(quota_value)?;
            let s = acceptance_sums(instance, &quota);
            let tpr = s.top / k as f64;
            let fpr = if negatives > 0.0 {
                s.rest / negatives
            } else {
                0.0
            };
            let selected = s.top + s.rest;
            let (ppv, ppv_undefined) = if selected > 0.0 {
                (s.top / selected, false)
            } else {
                (1.0, true)
            };
            Ok(CurvePoint {
                epsilon: quota_value - kq,
                quota: quota_value,
                tpr,
                fpr,
                ppv,
                ppv_undefined,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(points)
}
