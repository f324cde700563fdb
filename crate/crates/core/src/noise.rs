//! Mallows-model review noise centred on the ground truth.

use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::domain::{Assignment, Profile};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Dispersion `φ ∈ [0, 1]`; the reference ranking is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MallowsParams {
    phi: f64,
}

impl MallowsParams {
    pub fn new(phi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::InvalidParameter(format!(
                "phi={phi} must lie in [0, 1]"
            )));
        }
        Ok(MallowsParams { phi })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// Draws a ranking of `1..=n` (best first) with probability proportional to
/// `φ^d`, `d` the Kendall-tau distance to the identity.
///
/// Repeated insertion: item `i` is inserted so that it lands above `v` of the
/// `i - 1` items already placed, with `P(v) ∝ φ^v`. Each such `v` adds exactly
/// `v` discordant pairs, which gives the Mallows pmf exactly.
pub fn sample_mallows_ranking_with(n: usize, params: &MallowsParams, rng: &mut Rng) -> Vec<usize> {
    let phi = params.phi;
    let mut ranking = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 1..=n {
        let v = if phi == 0.0 || i == 1 {
            0
        } else if phi == 1.0 {
            rng.random_range(0..i)
        } else {
            weights.clear();
            let mut w = 1.0;
            let mut total = 0.0;
            for _ in 0..i {
                weights.push(w);
                total += w;
                w *= phi;
            }
            let mut u = rng.random::<f64>() * total;
            let mut v = i - 1;
            for (idx, &w) in weights.iter().enumerate() {
                if u < w {
                    v = idx;
                    break;
                }
                u -= w;
            }
            v
        };
        ranking.insert(i - 1 - v, i);
    }
    ranking
}

pub fn sample_mallows_ranking(n: usize, params: &MallowsParams, seed: u64) -> Vec<usize> {
    sample_mallows_ranking_with(n, params, &mut seed::rng(seed))
}

/// One independent full ranking per reviewer; reviewer `i` uses the sub-seed
/// `(seed, i)`.
pub fn sample_full_rankings(n: usize, params: &MallowsParams, seed: u64) -> Vec<Vec<usize>> {
    (1..=n)
        .map(|i| {
            let mut rng = seed::derive_rng(seed, seed::tag::NOISE, &[i as u64]);
            sample_mallows_ranking_with(n, params, &mut rng)
        })
        .collect()
}

/// Restricts each reviewer's full ranking to their pool.
pub fn project_profile(assignment: &Assignment, full_rankings: &[Vec<usize>]) -> Result<Profile> {
    let n = assignment.n();
    if full_rankings.len() != n {
        return Err(Error::InvalidProfile(format!(
            "{} full rankings for {n} reviewers",
            full_rankings.len()
        )));
    }
    let mut in_pool = vec![false; n + 1];
    let mut rankings = Vec::with_capacity(n);
    for (idx, full) in full_rankings.iter().enumerate() {
        let pool = assignment.pool(idx + 1);
        for &j in pool {
            in_pool[j] = true;
        }
        let ranking: Vec<usize> = full
            .iter()
            .copied()
            .filter(|&a| a <= n && in_pool[a])
            .collect();
        for &j in pool {
            in_pool[j] = false;
        }
        if ranking.len() != pool.len() {
            return Err(Error::InvalidProfile(format!(
                "full ranking of reviewer {} does not cover its pool",
                idx + 1
            )));
        }
        rankings.push(ranking);
    }
    Ok(Profile::from_rankings_unchecked(rankings))
}

/// Number of pairs ordered differently by the two rankings.
pub fn kendall_tau(a: &[usize], b: &[usize]) -> Result<u64> {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb || sa.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter(
            "rankings do not order the same set".into(),
        ));
    }
    // Inversions of `a` read through positions in `b`.
    let pos_in_b: HashMap<usize, usize> = b.iter().enumerate().map(|(p, &x)| (x, p)).collect();
    let seq: Vec<usize> = a.iter().map(|x| pos_in_b[x]).collect();
    let mut d = 0u64;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                d += 1;
            }
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::truthful_profile;

    #[test]
    fn kendall_tau_examples() {
        assert_eq!(kendall_tau(&[1, 2, 3, 4], &[1, 2, 3, 4]).unwrap(), 0);
        assert_eq!(kendall_tau(&[4, 3, 2, 1], &[1, 2, 3, 4]).unwrap(), 6);
        assert_eq!(kendall_tau(&[1, 3, 2], &[1, 2, 3]).unwrap(), 1);
        assert_eq!(kendall_tau(&[9, 5, 7], &[5, 7, 9]).unwrap(), 2);
        assert!(kendall_tau(&[1, 2], &[1, 3]).is_err());
        assert!(kendall_tau(&[1, 1], &[1, 1]).is_err());
    }

    #[test]
    fn phi_zero_is_identity() {
        let p = MallowsParams::new(0.0).unwrap();
        for seed in 0..10 {
            assert_eq!(
                sample_mallows_ranking(10, &p, seed),
                (1..=10).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn phi_bounds() {
        assert!(MallowsParams::new(-0.1).is_err());
        assert!(MallowsParams::new(1.1).is_err());
        assert!(MallowsParams::new(f64::NAN).is_err());
    }

    #[test]
    fn projection_restricts_the_full_ranking() {
        let a = Assignment::from_pools(vec![vec![2, 3], vec![1, 3], vec![1, 2]]);
        let full = vec![vec![3, 1, 2], vec![3, 1, 2], vec![3, 1, 2]];
        let p = project_profile(&a, &full).unwrap();
        assert_eq!(p.ranking(1), &[3, 2]);
        assert_eq!(p.ranking(2), &[3, 1]);
        assert_eq!(p.ranking(3), &[1, 2]);
    }

    #[test]
    fn phi_zero_projection_is_truthful() {
        let inst = crate::domain::Instance::new(40, 6, 10).unwrap();
        let a = crate::assignment::generate_assignment(&inst, 3).unwrap();
        let full = sample_full_rankings(40, &MallowsParams::new(0.0).unwrap(), 11);
        assert_eq!(project_profile(&a, &full).unwrap(), truthful_profile(&a));
    }

    #[test]
    fn full_pool_projection_drops_only_self() {
        let inst = crate::domain::Instance::new(6, 5, 2).unwrap();
        let a = crate::assignment::generate_assignment(&inst, 5).unwrap();
        let full = sample_full_rankings(6, &MallowsParams::new(0.7).unwrap(), 2);
        let p = project_profile(&a, &full).unwrap();
        for i in 1..=6 {
            let expected: Vec<usize> = full[i - 1].iter().copied().filter(|&x| x != i).collect();
            assert_eq!(p.ranking(i), expected.as_slice());
        }
    }
}
