//! Exact-size comparison mechanisms: Vanilla (Borda), Partition and Exact
//! Dollar Partition.
//!
//! Ties between equal scores are always broken in favour of the lower agent
//! index.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::assignment::Clustering;
use crate::domain::{Assignment, Instance, Profile, SelectionResult};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Per-agent accumulated score, indexed by `agent - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub scores: Vec<f64>,
}

impl ScoreTable {
    pub fn get(&self, agent: usize) -> f64 {
        self.scores[agent - 1]
    }
}

/// Each reviewer awards `m - σ_i(j)` points to `j`.
pub fn borda_scores(assignment: &Assignment, profile: &Profile) -> ScoreTable {
    let n = assignment.n();
    let mut scores = vec![0.0; n];
    for i in 1..=n {
        let ranking = profile.ranking(i);
        let m = ranking.len();
        for (pos, &j) in ranking.iter().enumerate() {
            scores[j - 1] += (m - pos - 1) as f64;
        }
    }
    ScoreTable { scores }
}

/// Borda points normalised so each reviewer hands out exactly one unit.
///
/// Pools all have size `m`, so this is each agent's Borda total divided by
/// `m(m-1)/2`. With `m = 1` the single reviewee gets the whole unit.
pub fn dollar_scores(
    instance: &Instance,
    assignment: &Assignment,
    profile: &Profile,
) -> ScoreTable {
    let m = instance.m();
    if m == 1 {
        let scores = (1..=assignment.n())
            .map(|j| assignment.reviewers(j).len() as f64)
            .collect();
        return ScoreTable { scores };
    }
    let per_reviewer = (m * (m - 1) / 2) as f64;
    let borda = borda_scores(assignment, profile);
    ScoreTable {
        scores: borda.scores.iter().map(|s| s / per_reviewer).collect(),
    }
}

fn top_by_score(members: &[usize], scores: &ScoreTable, count: usize) -> Vec<usize> {
    let mut sorted = members.to_vec();
    sorted.sort_by(|&a, &b| scores.get(b).total_cmp(&scores.get(a)).then(a.cmp(&b)));
    sorted.truncate(count);
    sorted
}

/// The `k` agents with the highest Borda totals.
pub fn run_vanilla(
    instance: &Instance,
    assignment: &Assignment,
    profile: &Profile,
) -> SelectionResult {
    let scores = borda_scores(assignment, profile);
    let all: Vec<usize> = (1..=instance.n()).collect();
    SelectionResult::from_accepted(top_by_score(&all, &scores, instance.k()))
}

/// `⌊k/l⌋` per cluster, with the `k mod l` extra slots handed to randomly
/// ordered clusters that still have room.
pub fn partition_quotas(clustering: &Clustering, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let l = clustering.l();
    if k > clustering.n() {
        return Err(Error::InvalidParameter(format!(
            "cannot select {k} of {} agents",
            clustering.n()
        )));
    }
    let sizes: Vec<usize> = clustering.cells().iter().map(Vec::len).collect();
    let mut quotas: Vec<usize> = sizes.iter().map(|&s| s.min(k / l)).collect();
    let mut remaining = k - quotas.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..l).collect();
    order.shuffle(rng);
    while remaining > 0 {
        for &c in &order {
            if remaining > 0 && quotas[c] < sizes[c] {
                quotas[c] += 1;
                remaining -= 1;
            }
        }
    }
    Ok(quotas)
}

/// Partition: fixed per-cluster quotas filled by Borda points from other clusters.
pub fn run_partition(
    instance: &Instance,
    clustering: &Clustering,
    assignment: &Assignment,
    profile: &Profile,
    seed: u64,
) -> Result<SelectionResult> {
    clustering.check_respected_by(assignment)?;
    let mut rng = seed::rng(seed);
    let quotas = partition_quotas(clustering, instance.k(), &mut rng)?;
    let scores = borda_scores(assignment, profile);
    let accepted = clustering
        .cells()
        .iter()
        .zip(&quotas)
        .flat_map(|(cell, &q)| top_by_score(cell, &scores, q))
        .collect();
    Ok(SelectionResult::from_accepted(accepted))
}

/// EDP cluster targets `x_c·k`, where `x_c` is the share of all dollar mass
/// received by cluster `c`. Targets above a cluster's size are capped and the
/// excess is spread proportionally over the other clusters.
pub fn edp_cluster_targets(
    instance: &Instance,
    clustering: &Clustering,
    assignment: &Assignment,
    profile: &Profile,
) -> Result<Vec<f64>> {
    clustering.check_respected_by(assignment)?;
    let scores = dollar_scores(instance, assignment, profile);
    // Every reviewer hands out exactly one unit, so the total mass is n.
    let total = instance.n() as f64;
    let k = instance.k() as f64;
    let shares: Vec<f64> = clustering
        .cells()
        .iter()
        .map(|cell| cell.iter().map(|&j| scores.get(j)).sum::<f64>() / total)
        .collect();
    let sizes: Vec<f64> = clustering.cells().iter().map(|c| c.len() as f64).collect();
    Ok(cap_targets(&shares, &sizes, k))
}

fn cap_targets(shares: &[f64], sizes: &[f64], k: f64) -> Vec<f64> {
    let mut targets: Vec<f64> = shares.iter().map(|s| s * k).collect();
    let mut capped = vec![false; shares.len()];
    loop {
        let over: Vec<usize> = (0..targets.len())
            .filter(|&c| !capped[c] && targets[c] > sizes[c])
            .collect();
        if over.is_empty() {
            break;
        }
        for c in over {
            capped[c] = true;
            targets[c] = sizes[c];
        }
        let fixed: f64 = (0..targets.len())
            .filter(|&c| capped[c])
            .map(|c| sizes[c])
            .sum();
        let free: Vec<usize> = (0..targets.len()).filter(|&c| !capped[c]).collect();
        let remaining = (k - fixed).max(0.0);
        let free_share: f64 = free.iter().map(|&c| shares[c]).sum();
        let free_room: f64 = free.iter().map(|&c| sizes[c]).sum();
        for &c in &free {
            targets[c] = if free_share > 0.0 {
                remaining * shares[c] / free_share
            } else {
                remaining * sizes[c] / free_room
            };
        }
    }
    for (t, &s) in targets.iter_mut().zip(sizes) {
        *t = t.min(s);
    }
    targets
}

/// Exact Dollar Partition with systematic randomised rounding of the cluster
/// targets; always returns exactly `k` agents.
pub fn run_edp(
    instance: &Instance,
    clustering: &Clustering,
    assignment: &Assignment,
    profile: &Profile,
    seed: u64,
) -> Result<SelectionResult> {
    let targets = edp_cluster_targets(instance, clustering, assignment, profile)?;
    let quotas = apportion_with(&targets, &mut seed::rng(seed))?;
    let scores = dollar_scores(instance, assignment, profile);
    let accepted = clustering
        .cells()
        .iter()
        .zip(&quotas)
        .flat_map(|(cell, &q)| top_by_score(cell, &scores, q))
        .collect();
    Ok(SelectionResult::from_accepted(accepted))
}

/// Rounds nonnegative targets summing to an integer `K` to integers with
/// `q_c ∈ {⌊t_c⌋, ⌈t_c⌉}`, `Σ q_c = K` on every draw and `E[q_c] = t_c`.
pub fn randomized_apportionment(targets: &[f64], seed: u64) -> Result<Vec<usize>> {
    apportion_with(targets, &mut seed::rng(seed))
}

/// Systematic rounding: one uniform offset `u`, and
/// `q_c = ⌊S_c + u⌋ - ⌊S_{c-1} + u⌋` over the running sums `S_c`.
pub fn apportion_with(targets: &[f64], rng: &mut Rng) -> Result<Vec<usize>> {
    if let Some(bad) = targets.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "apportionment target {bad} must be finite and >= 0"
        )));
    }
    let sum: f64 = targets.iter().sum();
    let total = sum.round();
    if (sum - total).abs() > 1e-9 {
        return Err(Error::NonIntegralTotal { sum });
    }
    let u: f64 = rng.random();
    let mut quotas = Vec::with_capacity(targets.len());
    let mut running = 0.0;
    let mut prev = 0.0_f64; // ⌊0 + u⌋
    for (c, &t) in targets.iter().enumerate() {
        running += t;
        let edge = if c + 1 == targets.len() {
            total + u
        } else {
            running + u
        };
        let cur = edge.floor().max(prev);
        quotas.push((cur - prev) as usize);
        prev = cur;
    }
    Ok(quotas)
}
