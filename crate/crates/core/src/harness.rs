//! Monte-Carlo experiment driver.
//!
//! Every random draw in a trial comes from a sub-seed of the master seed keyed
//! by the parameters that draw depends on plus the trial index, so rows are
//! identical whether trials run serially or in parallel. Within one trial all
//! mechanisms see the same reviewers' noisy rankings, and the clustered
//! mechanisms share one clustering.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::assignment::{generate_assignment, generate_clustered_assignment, Clustering};
use crate::baselines::{run_edp, run_partition, run_vanilla};
use crate::domain::{Assignment, Instance, Profile, SelectionResult};
use crate::error::{Error, Result};
use crate::mechanism::run_peer_nomination;
use crate::metrics::{confusion, rates};
use crate::noise::{project_profile, sample_full_rankings, MallowsParams};
use crate::report::Format;
use crate::seed::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    PeerNomination,
    Vanilla,
    Partition,
    Edp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::PeerNomination,
        Algorithm::Vanilla,
        Algorithm::Partition,
        Algorithm::Edp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::PeerNomination => "peernomination",
            Algorithm::Vanilla => "vanilla",
            Algorithm::Partition => "partition",
            Algorithm::Edp => "edp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "peernomination" | "pn" => Ok(Algorithm::PeerNomination),
            "vanilla" | "borda" => Ok(Algorithm::Vanilla),
            "partition" => Ok(Algorithm::Partition),
            "edp" => Ok(Algorithm::Edp),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm `{other}`"
            ))),
        }
    }

    pub fn uses_clusters(&self) -> bool {
        matches!(self, Algorithm::Partition | Algorithm::Edp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EpsilonMode {
    Fixed(f64),
    /// ε chosen analytically per (n, m, k) so the expected size is `k`.
    Calibrated,
}

/// Which assignment PeerNomination and Vanilla run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignmentMode {
    /// The clustered assignment used by Partition and EDP.
    ClusteredShared,
    /// A separate unclustered assignment.
    Separate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub l: usize,
    pub phi: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub epsilon_mode: EpsilonMode,
    pub assignment_mode: AssignmentMode,
    /// Allowed gap between the analytic expected size and `k` when calibrating.
    pub calibration_tolerance: f64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

impl Default for ExperimentConfig {
    /// The published grid: n=120, l=4, φ=0.5, 1000 trials, all mechanisms.
    fn default() -> Self {
        ExperimentConfig {
            n: 120,
            m_values: vec![5, 7, 9, 11],
            k_values: vec![15, 20, 25, 30, 35],
            l: 4,
            phi: 0.5,
            trials: 1000,
            master_seed: 0,
            algorithms: Algorithm::ALL.to_vec(),
            epsilon_mode: EpsilonMode::Calibrated,
            assignment_mode: AssignmentMode::ClusteredShared,
            calibration_tolerance: 0.01,
            output_path: None,
            format: Format::Csv,
        }
    }
}

impl ExperimentConfig {
    fn needs_clusters(&self) -> bool {
        self.algorithms.iter().any(Algorithm::uses_clusters)
            || (self.assignment_mode == AssignmentMode::ClusteredShared
                && !self.algorithms.is_empty())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be positive".into()));
        }
        if self.m_values.is_empty() || self.k_values.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one m and one k value are required".into(),
            ));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidParameter("no algorithms selected".into()));
        }
        MallowsParams::new(self.phi)?;
        for &m in &self.m_values {
            for &k in &self.k_values {
                let cell = |source: Error| Error::Cell {
                    n: self.n,
                    m,
                    k,
                    l: self.l,
                    source: Box::new(source),
                };
                let inst = Instance::new(self.n, m, k).map_err(cell)?;
                if self.needs_clusters() {
                    check_cluster_feasible(&inst, self.l).map_err(cell)?;
                }
                if let EpsilonMode::Fixed(eps) = self.epsilon_mode {
                    crate::mechanism::NominationQuota::new(&inst, eps).map_err(cell)?;
                }
            }
        }
        Ok(())
    }
}

fn check_cluster_feasible(inst: &Instance, l: usize) -> Result<()> {
    let (n, m) = (inst.n(), inst.m());
    let largest = if l == 0 { n } else { n.div_ceil(l) };
    if l < 2 || l > n || largest > n - largest || m > n - largest {
        return Err(Error::ClusteringInfeasible { n, m, l });
    }
    Ok(())
}

/// One mechanism run in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: usize,
    pub algorithm: Algorithm,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub l: usize,
    pub phi: f64,
    /// Slack used by PeerNomination; empty for the other mechanisms.
    pub epsilon: Option<f64>,
    pub size: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub ppv: f64,
    pub tpr: f64,
    pub fpr: f64,
}

impl ResultRow {
    fn new(
        trial: usize,
        algorithm: Algorithm,
        instance: &Instance,
        l: usize,
        phi: f64,
        epsilon: Option<f64>,
        selection: &SelectionResult,
    ) -> Self {
        let c = confusion(instance, selection);
        let r = rates(&c);
        ResultRow {
            trial,
            algorithm,
            n: instance.n(),
            m: instance.m(),
            k: instance.k(),
            l,
            phi,
            epsilon,
            size: selection.size(),
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            ppv: r.ppv,
            tpr: r.tpr,
            fpr: r.fpr,
        }
    }
}

/// Per-trial inputs shared by every mechanism in that trial.
struct TrialWorld {
    clustered: Option<(Clustering, Assignment, Profile)>,
    plain: Option<(Assignment, Profile)>,
}

impl TrialWorld {
    fn build(
        config: &ExperimentConfig,
        instance: &Instance,
        trial: usize,
        need_plain: bool,
    ) -> Result<Self> {
        let (n, m) = (instance.n() as u64, instance.m() as u64);
        let t = trial as u64;
        let params = MallowsParams::new(config.phi)?;
        let noise_seed = seed::derive(
            config.master_seed,
            tag::NOISE,
            &[n, config.phi.to_bits(), t],
        );
        let full = sample_full_rankings(instance.n(), &params, noise_seed);
        let clustered = if config.needs_clusters() {
            let s = seed::derive(
                config.master_seed,
                tag::CLUSTERING,
                &[n, m, config.l as u64, t],
            );
            let (c, a) = generate_clustered_assignment(instance, config.l, s)?;
            let p = project_profile(&a, &full)?;
            Some((c, a, p))
        } else {
            None
        };
        let plain = if need_plain {
            let s = seed::derive(config.master_seed, tag::ASSIGNMENT, &[n, m, t]);
            let a = generate_assignment(instance, s)?;
            let p = project_profile(&a, &full)?;
            Some((a, p))
        } else {
            None
        };
        Ok(TrialWorld { clustered, plain })
    }

    fn for_unclustered(&self, mode: AssignmentMode) -> (&Assignment, &Profile) {
        match (mode, &self.plain, &self.clustered) {
            (AssignmentMode::Separate, Some((a, p)), _) => (a, p),
            (_, _, Some((_, a, p))) => (a, p),
            (_, Some((a, p)), None) => (a, p),
            _ => unreachable!("trial world built without any assignment"),
        }
    }

    fn clustered(&self) -> (&Clustering, &Assignment, &Profile) {
        let (c, a, p) = self
            .clustered
            .as_ref()
            .expect("clustered assignment requested");
        (c, a, p)
    }
}

fn mechanism_seed(
    config: &ExperimentConfig,
    purpose: u64,
    instance: &Instance,
    trial: usize,
) -> u64 {
    seed::derive(
        config.master_seed,
        purpose,
        &[
            instance.n() as u64,
            instance.m() as u64,
            instance.k() as u64,
            config.l as u64,
            trial as u64,
        ],
    )
}

fn cell_epsilon(config: &ExperimentConfig, instance: &Instance) -> Result<f64> {
    match config.epsilon_mode {
        EpsilonMode::Fixed(eps) => Ok(eps),
        EpsilonMode::Calibrated => {
            analytic::calibrate_epsilon(instance, instance.k() as f64, config.calibration_tolerance)
        }
    }
}

fn for_each_cell<F>(config: &ExperimentConfig, per_trial: F) -> Result<Vec<ResultRow>>
where
    F: Fn(&Instance, f64, usize) -> Result<Vec<ResultRow>> + Sync,
{
    config.validate()?;
    let mut rows = Vec::new();
    for &m in &config.m_values {
        for &k in &config.k_values {
            let cell = |source: Error| Error::Cell {
                n: config.n,
                m,
                k,
                l: config.l,
                source: Box::new(source),
            };
            let instance = Instance::new(config.n, m, k).map_err(cell)?;
            let epsilon = cell_epsilon(config, &instance).map_err(cell)?;
            let per: Vec<Vec<ResultRow>> = (0..config.trials)
                .into_par_iter()
                .map(|t| per_trial(&instance, epsilon, t))
                .collect::<Result<_>>()
                .map_err(cell)?;
            rows.extend(per.into_iter().flatten());
        }
    }
    Ok(rows)
}

/// Runs every selected mechanism on every (m, k) cell for `trials` trials.
///
/// Rows are ordered by cell (m outer, k inner), trial, then the configured
/// algorithm order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let need_plain = config.assignment_mode == AssignmentMode::Separate
        && config.algorithms.iter().any(|a| !a.uses_clusters());
    for_each_cell(config, |instance, epsilon, trial| {
        let world = TrialWorld::build(config, instance, trial, need_plain)?;
        config
            .algorithms
            .iter()
            .map(|&alg| {
                let (selection, eps) = match alg {
                    Algorithm::PeerNomination => {
                        let (a, p) = world.for_unclustered(config.assignment_mode);
                        let s = mechanism_seed(config, tag::NOMINATION, instance, trial);
                        (
                            run_peer_nomination(instance, a, p, epsilon, s)?,
                            Some(epsilon),
                        )
                    }
                    Algorithm::Vanilla => {
                        let (a, p) = world.for_unclustered(config.assignment_mode);
                        (run_vanilla(instance, a, p), None)
                    }
                    Algorithm::Partition => {
                        let (c, a, p) = world.clustered();
                        let s = mechanism_seed(config, tag::PARTITION, instance, trial);
                        (run_partition(instance, c, a, p, s)?, None)
                    }
                    Algorithm::Edp => {
                        let (c, a, p) = world.clustered();
                        let s = mechanism_seed(config, tag::EDP, instance, trial);
                        (run_edp(instance, c, a, p, s)?, None)
                    }
                };
                Ok(ResultRow::new(
                    trial, alg, instance, config.l, config.phi, eps, &selection,
                ))
            })
            .collect()
    })
}

/// PeerNomination at target `k`, then EDP asked for exactly as many agents as
/// PeerNomination returned, on the same clustered assignment and profile.
/// Both rows are scored against the true top `k`.
pub fn run_forced_size_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let forced = ExperimentConfig {
        algorithms: vec![Algorithm::PeerNomination, Algorithm::Edp],
        ..config.clone()
    };
    for_each_cell(&forced, |instance, epsilon, trial| {
        let world = TrialWorld::build(&forced, instance, trial, false)?;
        let (c, a, p) = world.clustered();
        let s = mechanism_seed(&forced, tag::NOMINATION, instance, trial);
        let pn = run_peer_nomination(instance, a, p, epsilon, s)?;
        let edp = if pn.size() == 0 {
            SelectionResult::default()
        } else {
            let sized = instance.with_k(pn.size())?;
            run_edp(
                &sized,
                c,
                a,
                p,
                mechanism_seed(&forced, tag::EDP, instance, trial),
            )?
        };
        Ok(vec![
            ResultRow::new(
                trial,
                Algorithm::PeerNomination,
                instance,
                forced.l,
                forced.phi,
                Some(epsilon),
                &pn,
            ),
            ResultRow::new(
                trial,
                Algorithm::Edp,
                instance,
                forced.l,
                forced.phi,
                None,
                &edp,
            ),
        ])
    })
}

/// Optional-field mirror of [`ExperimentConfig`] read from a TOML file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: Option<usize>,
    pub m: Option<Vec<usize>>,
    pub k: Option<Vec<usize>>,
    pub clusters: Option<usize>,
    pub phi: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub algorithms: Option<Vec<String>>,
    /// A number, or the string "calibrated".
    pub epsilon: Option<toml::Value>,
    pub assignment_mode: Option<AssignmentMode>,
    pub calibration_tolerance: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::Config {
            path: path.into(),
            message: e.to_string(),
        })
    }

    pub fn epsilon_mode(&self) -> Result<Option<EpsilonMode>> {
        match &self.epsilon {
            None => Ok(None),
            Some(v) => parse_epsilon_value(v).map(Some),
        }
    }
}

fn parse_epsilon_value(v: &toml::Value) -> Result<EpsilonMode> {
    match v {
        toml::Value::Float(f) => Ok(EpsilonMode::Fixed(*f)),
        toml::Value::Integer(i) => Ok(EpsilonMode::Fixed(*i as f64)),
        toml::Value::String(s) => parse_epsilon(s),
        other => Err(Error::InvalidParameter(format!(
            "epsilon must be a number or \"calibrated\", got {other}"
        ))),
    }
}

/// `"calibrated"` or a number.
pub fn parse_epsilon(s: &str) -> Result<EpsilonMode> {
    if s.trim().eq_ignore_ascii_case("calibrated") {
        return Ok(EpsilonMode::Calibrated);
    }
    s.trim()
        .parse::<f64>()
        .map(EpsilonMode::Fixed)
        .map_err(|_| {
            Error::InvalidParameter(format!(
                "epsilon `{s}` is neither a number nor \"calibrated\""
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n: 40,
            m_values: vec![5],
            k_values: vec![8],
            trials: 6,
            master_seed: 17,
            ..Default::default()
        }
    }

    #[test]
    fn row_count_and_order() {
        let rows = run_experiment(&small()).unwrap();
        assert_eq!(rows.len(), 6 * 4);
        for (idx, row) in rows.iter().enumerate() {
            assert_eq!(row.trial, idx / 4);
            assert_eq!(row.algorithm, Algorithm::ALL[idx % 4]);
            assert_eq!(row.size, row.tp + row.fp);
            assert_eq!(row.tp + row.fp + row.tn + row.fn_, 40);
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let cfg = small();
        assert_eq!(run_experiment(&cfg).unwrap(), run_experiment(&cfg).unwrap());
        let mut other = cfg.clone();
        other.master_seed = 18;
        assert_ne!(
            run_experiment(&cfg).unwrap(),
            run_experiment(&other).unwrap()
        );
    }

    #[test]
    fn separate_mode_and_fixed_epsilon() {
        let cfg = ExperimentConfig {
            assignment_mode: AssignmentMode::Separate,
            epsilon_mode: EpsilonMode::Fixed(0.1),
            algorithms: vec![Algorithm::PeerNomination, Algorithm::Vanilla],
            ..small()
        };
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(rows
            .iter()
            .filter(|r| r.algorithm == Algorithm::PeerNomination)
            .all(|r| r.epsilon == Some(0.1)));
        assert!(rows
            .iter()
            .filter(|r| r.algorithm == Algorithm::Vanilla)
            .all(|r| r.epsilon.is_none() && r.size == 8));
    }

    #[test]
    fn forced_size_rows_pair_up() {
        let rows = run_forced_size_experiment(&small()).unwrap();
        assert_eq!(rows.len(), 12);
        for pair in rows.chunks(2) {
            assert_eq!(pair[0].trial, pair[1].trial);
            assert_eq!(pair[0].size, pair[1].size);
            assert_eq!(pair[1].k, 8);
        }
    }

    #[test]
    fn invalid_cells_are_named() {
        let cfg = ExperimentConfig {
            m_values: vec![5, 40],
            ..small()
        };
        match run_experiment(&cfg) {
            Err(Error::Cell { m: 40, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let cfg = ExperimentConfig { l: 1, ..small() };
        assert!(matches!(cfg.validate(), Err(Error::Cell { l: 1, .. })));
        let cfg = ExperimentConfig {
            trials: 0,
            ..small()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn epsilon_parsing() {
        assert_eq!(
            parse_epsilon("calibrated").unwrap(),
            EpsilonMode::Calibrated
        );
        assert_eq!(parse_epsilon(" 0.13").unwrap(), EpsilonMode::Fixed(0.13));
        assert!(parse_epsilon("abc").is_err());
        assert_eq!(Algorithm::parse("EDP").unwrap(), Algorithm::Edp);
        assert!(Algorithm::parse("raffle").is_err());
    }
}
