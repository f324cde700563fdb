//! The PeerNomination mechanism.
//!
//! Reviewer `i` nominates everyone in the first `⌊quota⌋` positions of their
//! ranking and the agent at position `⌊quota⌋ + 1` with probability equal to
//! the quota's fractional part, where `quota = (k/n)·m + ε`. An agent is
//! accepted when at least `⌈m/2⌉` of their reviewers nominate them. Each
//! agent's outcome depends only on the reviews they receive, never on the
//! review they give.

use rand::Rng as _;

use crate::domain::{Assignment, FractionalDraw, Instance, Profile, SelectionResult};
use crate::error::{Error, Result};
use crate::seed;

/// `quota = (k/n)·m + ε` split into its integer and fractional parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominationQuota {
    value: f64,
    integer_part: usize,
    fractional_part: f64,
}

impl NominationQuota {
    /// `(k·m)/n + ε`. Negative ε is fine as long as the quota stays `>= 0`.
    pub fn new(instance: &Instance, epsilon: f64) -> Result<Self> {
        Self::from_parts(instance.n(), instance.m(), instance.k(), epsilon)
    }

    pub fn from_parts(n: usize, m: usize, k: usize, epsilon: f64) -> Result<Self> {
        Self::from_value(base_quota(n, m, k) + epsilon)
    }

    pub fn from_value(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "nomination quota {value} must be finite and >= 0"
            )));
        }
        let floor = value.floor();
        Ok(NominationQuota {
            value,
            integer_part: floor as usize,
            fractional_part: value - floor,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn integer_part(&self) -> usize {
        self.integer_part
    }

    pub fn fractional_part(&self) -> f64 {
        self.fractional_part
    }
}

/// `(k/n)·m` with a single rounding.
pub fn base_quota(n: usize, m: usize, k: usize) -> f64 {
    (k * m) as f64 / n as f64
}

/// Probability that a reviewer nominates the agent they placed at `rank`.
pub fn nomination_probability(rank: usize, quota: &NominationQuota) -> f64 {
    if rank <= quota.integer_part {
        1.0
    } else if rank == quota.integer_part + 1 {
        quota.fractional_part
    } else {
        0.0
    }
}

/// Runs the mechanism once. The fractional draw of reviewer `i` on agent `j`
/// uses the sub-seed `(seed, i, j)`, so draws are independent and replayable.
pub fn run_peer_nomination(
    instance: &Instance,
    assignment: &Assignment,
    profile: &Profile,
    epsilon: f64,
    seed: u64,
) -> Result<SelectionResult> {
    let quota = NominationQuota::new(instance, epsilon)?;
    let n = instance.n();
    let mut counts = vec![0usize; n];
    let mut draws = Vec::new();
    for i in 1..=assignment.n() {
        for (pos, &j) in profile.ranking(i).iter().enumerate() {
            let rank = pos + 1;
            if rank <= quota.integer_part {
                counts[j - 1] += 1;
            } else if rank == quota.integer_part + 1 && quota.fractional_part > 0.0 {
                let mut rng = seed::derive_rng(seed, seed::tag::NOMINATION, &[i as u64, j as u64]);
                let nominated = rng.random::<f64>() < quota.fractional_part;
                if nominated {
                    counts[j - 1] += 1;
                }
                draws.push(FractionalDraw {
                    reviewer: i,
                    reviewee: j,
                    nominated,
                });
            }
        }
    }
    let threshold = instance.majority();
    let accepted = (1..=n).filter(|&j| counts[j - 1] >= threshold).collect();
    Ok(SelectionResult {
        accepted,
        nomination_counts: counts,
        fractional_draws: draws,
    })
}

/// Exact per-agent acceptance probability over the mechanism's own randomness.
///
/// Agent `j`'s nomination count is a sum of independent Bernoulli variables,
/// one per reviewer in `A⁻¹(j)`, so its tail is a Poisson-binomial tail.
/// Reviewers are processed in ascending index order, which makes entry `j`
/// a function of the reviews `j` receives and nothing else.
pub fn exact_selection_probabilities(
    instance: &Instance,
    assignment: &Assignment,
    profile: &Profile,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let quota = NominationQuota::new(instance, epsilon)?;
    let threshold = instance.majority();
    let mut probs = Vec::with_capacity(instance.m());
    (1..=instance.n())
        .map(|j| {
            probs.clear();
            for &i in assignment.reviewers(j) {
                let rank = profile.rank(i, j).ok_or_else(|| {
                    Error::InvalidProfile(format!("reviewer {i} does not rank agent {j}"))
                })?;
                probs.push(nomination_probability(rank, &quota));
            }
            Ok(poisson_binomial_tail(&probs, threshold))
        })
        .collect()
}

/// `P[X >= threshold]` for `X` a sum of independent Bernoulli(`p_i`).
///
/// Certain successes shift the threshold and certain failures drop out
/// before the O(len²) dynamic programme runs over the rest.
pub fn poisson_binomial_tail(probs: &[f64], threshold: usize) -> f64 {
    let certain = probs.iter().filter(|&&p| p >= 1.0).count();
    if threshold <= certain {
        return 1.0;
    }
    let needed = threshold - certain;
    let uncertain: Vec<f64> = probs
        .iter()
        .copied()
        .filter(|&p| p > 0.0 && p < 1.0)
        .collect();
    if needed > uncertain.len() {
        return 0.0;
    }
    // dist[c] = P[c successes among the trials seen so far]
    let mut dist = vec![0.0; uncertain.len() + 1];
    dist[0] = 1.0;
    for (seen, &p) in uncertain.iter().enumerate() {
        for c in (1..=seen + 1).rev() {
            dist[c] = dist[c] * (1.0 - p) + dist[c - 1] * p;
        }
        dist[0] *= 1.0 - p;
    }
    dist[needed..].iter().rev().sum::<f64>().min(1.0)
}
