//! Agents, review assignments, profiles and selections.
//!
//! Agents are numbered `1..=n` and the number doubles as the agent's rank in
//! the ground truth, so agent 1 is the best. Per-agent vectors are indexed by
//! `agent - 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Problem size: `n` agents, each giving and receiving `m` reviews, target `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instance {
    n: usize,
    m: usize,
    k: usize,
}

impl Instance {
    pub fn new(n: usize, m: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInstance(format!("n={n} must be at least 2")));
        }
        if m == 0 || m >= n {
            return Err(Error::InvalidInstance(format!(
                "m={m} must satisfy 1 <= m <= n-1 = {}",
                n - 1
            )));
        }
        if k == 0 || k > n {
            return Err(Error::InvalidInstance(format!(
                "k={k} must satisfy 1 <= k <= n = {n}"
            )));
        }
        Ok(Instance { n, m, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Same agents and assignment degree, different target size.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        Instance::new(self.n, self.m, k)
    }

    /// True top-k membership under the identity ground truth.
    pub fn in_top_k(&self, agent: usize) -> bool {
        agent >= 1 && agent <= self.k
    }

    /// Acceptance threshold `⌈m/2⌉`; exactly `m/2` for even `m`.
    pub fn majority(&self) -> usize {
        self.m.div_ceil(2)
    }
}

/// Reviewer-to-pool map `A` with its inverse `A⁻¹`.
///
/// Construction never fails: structural problems are reported by
/// [`validate_assignment`] as data. Pools and reviewer lists are kept sorted
/// ascending; pool order carries no meaning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pools: Vec<Vec<usize>>,
    reviewers: Vec<Vec<usize>>,
}

impl Assignment {
    /// `pools[i - 1]` is the pool of reviewer `i`. Out-of-range entries are
    /// kept in the pool but left out of the inverse.
    pub fn from_pools(mut pools: Vec<Vec<usize>>) -> Self {
        let n = pools.len();
        let mut reviewers = vec![Vec::new(); n];
        for (idx, pool) in pools.iter_mut().enumerate() {
            pool.sort_unstable();
            for &j in pool.iter() {
                if (1..=n).contains(&j) {
                    reviewers[j - 1].push(idx + 1);
                }
            }
        }
        Assignment { pools, reviewers }
    }

    pub fn n(&self) -> usize {
        self.pools.len()
    }

    /// `A(i)`, ascending.
    pub fn pool(&self, reviewer: usize) -> &[usize] {
        &self.pools[reviewer - 1]
    }

    /// `A⁻¹(j)`, ascending.
    pub fn reviewers(&self, agent: usize) -> &[usize] {
        &self.reviewers[agent - 1]
    }

    pub fn pools(&self) -> &[Vec<usize>] {
        &self.pools
    }

    /// Serialises as the truthful profile text (pools in ascending order).
    pub fn to_text(&self) -> String {
        format_rankings(&self.pools)
    }

    /// Parses `reviewer: a>b>c` lines, ignoring the declared order.
    pub fn parse(text: &str) -> Result<Self> {
        Ok(Assignment::from_pools(parse_rankings(text)?))
    }
}

/// A single structural defect found by [`validate_assignment`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    AgentCount {
        expected: usize,
        found: usize,
    },
    SelfReview {
        reviewer: usize,
    },
    OutOfRange {
        reviewer: usize,
        reviewee: usize,
    },
    DuplicateReview {
        reviewer: usize,
        reviewee: usize,
    },
    PoolSize {
        reviewer: usize,
        size: usize,
        m: usize,
    },
    ReviewCount {
        agent: usize,
        count: usize,
        m: usize,
    },
    InverseMismatch {
        reviewer: usize,
        reviewee: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::AgentCount { expected, found } => {
                write!(f, "assignment has {found} reviewers, expected n={expected}")
            }
            Violation::SelfReview { reviewer } => write!(f, "self-review by {reviewer}"),
            Violation::OutOfRange { reviewer, reviewee } => {
                write!(f, "reviewer {reviewer} reviews unknown agent {reviewee}")
            }
            Violation::DuplicateReview { reviewer, reviewee } => {
                write!(f, "reviewer {reviewer} reviews {reviewee} more than once")
            }
            Violation::PoolSize { reviewer, size, m } => {
                write!(
                    f,
                    "reviewer {reviewer} reviews {size} agents, expected m={m}"
                )
            }
            Violation::ReviewCount { agent, count, m } => {
                write!(f, "agent {agent} reviewed {count} times, expected m={m}")
            }
            Violation::InverseMismatch { reviewer, reviewee } => {
                write!(
                    f,
                    "inverse of {reviewee} is inconsistent with pool of {reviewer}"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks no self-review, `|A(i)| = m`, `|A⁻¹(j)| = m` and inverse consistency.
pub fn validate_assignment(instance: &Instance, assignment: &Assignment) -> ValidationReport {
    let n = instance.n();
    let m = instance.m();
    let mut violations = Vec::new();
    if assignment.n() != n {
        violations.push(Violation::AgentCount {
            expected: n,
            found: assignment.n(),
        });
        return ValidationReport { violations };
    }
    for i in 1..=n {
        let pool = assignment.pool(i);
        if pool.contains(&i) {
            violations.push(Violation::SelfReview { reviewer: i });
        }
        for &j in pool {
            if !(1..=n).contains(&j) {
                violations.push(Violation::OutOfRange {
                    reviewer: i,
                    reviewee: j,
                });
            }
        }
        for w in pool.windows(2) {
            if w[0] == w[1] {
                violations.push(Violation::DuplicateReview {
                    reviewer: i,
                    reviewee: w[0],
                });
            }
        }
        if pool.len() != m {
            violations.push(Violation::PoolSize {
                reviewer: i,
                size: pool.len(),
                m,
            });
        }
    }
    for j in 1..=n {
        let revs = assignment.reviewers(j);
        if revs.len() != m {
            violations.push(Violation::ReviewCount {
                agent: j,
                count: revs.len(),
                m,
            });
        }
        for &i in revs {
            if assignment.pool(i).binary_search(&j).is_err() {
                violations.push(Violation::InverseMismatch {
                    reviewer: i,
                    reviewee: j,
                });
            }
        }
    }
    ValidationReport { violations }
}

/// Declared rankings `σ`: for each reviewer, their pool listed best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    rankings: Vec<Vec<usize>>,
}

impl Profile {
    /// Checks that every ranking is a strict order over exactly the reviewer's pool.
    pub fn new(assignment: &Assignment, rankings: Vec<Vec<usize>>) -> Result<Self> {
        if rankings.len() != assignment.n() {
            return Err(Error::InvalidProfile(format!(
                "{} rankings for {} reviewers",
                rankings.len(),
                assignment.n()
            )));
        }
        for (idx, ranking) in rankings.iter().enumerate() {
            let mut sorted = ranking.clone();
            sorted.sort_unstable();
            if sorted != assignment.pools[idx] {
                return Err(Error::InvalidProfile(format!(
                    "ranking of reviewer {} is not a strict order of its pool",
                    idx + 1
                )));
            }
        }
        Ok(Profile { rankings })
    }

    pub(crate) fn from_rankings_unchecked(rankings: Vec<Vec<usize>>) -> Self {
        Profile { rankings }
    }

    /// Reviewer `i`'s pool, best first.
    pub fn ranking(&self, reviewer: usize) -> &[usize] {
        &self.rankings[reviewer - 1]
    }

    pub fn rankings(&self) -> &[Vec<usize>] {
        &self.rankings
    }

    /// `σ_i(j)`, 1 = best; `None` if `j` is not in `i`'s pool.
    pub fn rank(&self, reviewer: usize, agent: usize) -> Option<usize> {
        self.ranking(reviewer)
            .iter()
            .position(|&a| a == agent)
            .map(|p| p + 1)
    }

    /// Copy with reviewer `i`'s ranking replaced. The new ranking must order
    /// the same pool.
    pub fn with_ranking(&self, reviewer: usize, ranking: Vec<usize>) -> Result<Self> {
        let mut current = self.rankings[reviewer - 1].clone();
        let mut proposed = ranking.clone();
        current.sort_unstable();
        proposed.sort_unstable();
        if current != proposed {
            return Err(Error::InvalidProfile(format!(
                "replacement ranking for reviewer {reviewer} does not order the same pool"
            )));
        }
        let mut rankings = self.rankings.clone();
        rankings[reviewer - 1] = ranking;
        Ok(Profile { rankings })
    }

    pub fn to_text(&self) -> String {
        format_rankings(&self.rankings)
    }

    /// Parses `reviewer: a>b>c` lines into the implied assignment and profile.
    pub fn parse(text: &str) -> Result<(Assignment, Profile)> {
        let rankings = parse_rankings(text)?;
        let assignment = Assignment::from_pools(rankings.clone());
        let profile = Profile::new(&assignment, rankings)?;
        Ok((assignment, profile))
    }
}

/// The unique profile consistent with the ground truth: pools by ascending index.
pub fn truthful_profile(assignment: &Assignment) -> Profile {
    Profile {
        rankings: assignment.pools.clone(),
    }
}

/// One fractional-position Bernoulli draw made by PeerNomination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FractionalDraw {
    pub reviewer: usize,
    pub reviewee: usize,
    pub nominated: bool,
}

/// Outcome of a selection mechanism.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Accepted agents, ascending.
    pub accepted: Vec<usize>,
    /// Per-agent nomination counts (PeerNomination only; empty otherwise).
    pub nomination_counts: Vec<usize>,
    /// Fractional draws in (reviewer, reviewee) order (PeerNomination only).
    pub fractional_draws: Vec<FractionalDraw>,
}

impl SelectionResult {
    pub fn from_accepted(mut accepted: Vec<usize>) -> Self {
        accepted.sort_unstable();
        SelectionResult {
            accepted,
            ..Default::default()
        }
    }

    pub fn size(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_accepted(&self, agent: usize) -> bool {
        self.accepted.binary_search(&agent).is_ok()
    }
}

fn format_rankings(rankings: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for (idx, ranking) in rankings.iter().enumerate() {
        let items: Vec<String> = ranking.iter().map(|a| a.to_string()).collect();
        out.push_str(&format!("{}: {}\n", idx + 1, items.join(">")));
    }
    out
}

// Blank lines and `#` comments are skipped. Reviewers may appear in any
// order but must be exactly 1..=n.
fn parse_rankings(text: &str) -> Result<Vec<Vec<usize>>> {
    let mut entries: Vec<(usize, Vec<usize>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line, message };
        let (head, tail) = content
            .split_once(':')
            .ok_or_else(|| err("expected `reviewer: a>b>c`".into()))?;
        let reviewer: usize = head
            .trim()
            .parse()
            .map_err(|_| err(format!("bad reviewer index `{}`", head.trim())))?;
        let tail = tail.trim();
        if tail.contains('=') || tail.contains(',') {
            return Err(err("ties are not allowed in a ranking".into()));
        }
        let mut ranking = Vec::new();
        if !tail.is_empty() {
            for tok in tail.split('>') {
                let agent: usize = tok
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad agent index `{}`", tok.trim())))?;
                if ranking.contains(&agent) {
                    return Err(err(format!("agent {agent} ranked twice")));
                }
                ranking.push(agent);
            }
        }
        entries.push((reviewer, ranking));
    }
    let n = entries.len();
    let mut rankings: Vec<Option<Vec<usize>>> = vec![None; n];
    for (reviewer, ranking) in entries {
        if reviewer == 0 || reviewer > n {
            return Err(Error::Parse {
                line: 0,
                message: format!("reviewer {reviewer} outside 1..={n}"),
            });
        }
        if rankings[reviewer - 1].replace(ranking).is_some() {
            return Err(Error::Parse {
                line: 0,
                message: format!("reviewer {reviewer} listed twice"),
            });
        }
    }
    Ok(rankings
        .into_iter()
        .map(|r| r.unwrap_or_default())
        .collect())
}
