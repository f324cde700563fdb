//! Acceptance suite. Each test prints one PASS/FAIL line to stderr (bypassing
//! the test harness capture) and then asserts on the same verdict.

use std::io::Write;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use peer_nomination::analytic::{
    calibrate_epsilon, expected_size, pool_position_pmf, roc_pr_curves,
};
use peer_nomination::assignment::{generate_assignment, generate_clustered_assignment};
use peer_nomination::baselines::{randomized_apportionment, run_edp, run_partition, run_vanilla};
use peer_nomination::domain::truthful_profile;
use peer_nomination::harness::{
    run_experiment, run_forced_size_experiment, Algorithm, AssignmentMode, ExperimentConfig,
};
use peer_nomination::noise::{project_profile, sample_full_rankings, MallowsParams};
use peer_nomination::report::{summarize, CellSummary, Stat};
use peer_nomination::{
    exact_selection_probabilities, run_peer_nomination, Assignment, Instance, Profile,
};

fn verdict(id: u32, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let line = format!(
        "[{}] criterion {id:>2} {name} ({:.2}s): {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

struct Case {
    instance: Instance,
    epsilon: f64,
    assignment: Assignment,
    profile: Profile,
}

fn random_ranking(pool: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut r = pool.to_vec();
    r.shuffle(rng);
    r
}

/// Random instances with n ≤ `max_n`, m ≤ `max_m`, random ε and random profiles.
fn corpus(count: usize, max_n: usize, max_m: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(3..=max_n);
            let m = rng.random_range(1..=max_m.min(n - 1));
            let k = rng.random_range(1..=n);
            let instance = Instance::new(n, m, k).unwrap();
            let epsilon = rng.random_range(0.0..1.0);
            let assignment = generate_assignment(&instance, rng.random()).unwrap();
            let rankings = (1..=n)
                .map(|i| random_ranking(assignment.pool(i), &mut rng))
                .collect();
            let profile = Profile::new(&assignment, rankings).unwrap();
            Case {
                instance,
                epsilon,
                assignment,
                profile,
            }
        })
        .collect()
}

fn example_one() -> (Instance, Assignment, Profile) {
    let assignment = Assignment::from_pools(vec![vec![2, 3], vec![1, 3], vec![1, 2]]);
    let profile = Profile::new(&assignment, vec![vec![2, 3], vec![3, 1], vec![1, 2]]).unwrap();
    (Instance::new(3, 2, 1).unwrap(), assignment, profile)
}

fn cell(summaries: &[CellSummary], alg: Algorithm, m: usize, l: usize) -> &CellSummary {
    summaries
        .iter()
        .find(|s| s.algorithm == alg && s.m == m && s.l == l)
        .expect("cell present")
}

#[test]
fn criterion_01_expected_size() {
    let start = Instant::now();
    let inst = Instance::new(130, 9, 30).unwrap();
    let at_zero = expected_size(&inst, 0.0).unwrap();
    let at_slack = expected_size(&inst, 0.13).unwrap();
    let elapsed = start.elapsed();
    let zero_ok = (26.8..=28.0).contains(&at_zero);
    let slack_ok = (29.7..=30.3).contains(&at_slack);
    let detail = format!(
        "E|S|(ε=0) = {at_zero:.4} {} [26.8, 28.0]; E|S|(ε=0.13) = {at_slack:.4} {} [29.7, 30.3]",
        if zero_ok { "in" } else { "NOT in" },
        if slack_ok { "in" } else { "NOT in" }
    );
    verdict(
        1,
        "expected size",
        zero_ok && slack_ok && elapsed < Duration::from_secs(1),
        elapsed,
        &detail,
    );
}

#[test]
fn criterion_02_calibration() {
    let start = Instant::now();
    let inst = Instance::new(130, 9, 30).unwrap();
    let eps = calibrate_epsilon(&inst, 30.0, 0.05).unwrap();
    let elapsed = start.elapsed();
    let size = expected_size(&inst, eps).unwrap();
    let pass = (0.10..=0.16).contains(&eps) && elapsed < Duration::from_secs(1);
    verdict(
        2,
        "calibration",
        pass,
        elapsed,
        &format!("ε = {eps:.5} (E|S| = {size:.4}), band [0.10, 0.16]"),
    );
}

#[test]
fn criterion_03_exact_impartiality() {
    let start = Instant::now();
    let cases = corpus(200, 20, 6, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut checks = 0usize;
    let mut violations = Vec::new();
    for (c, case) in cases.iter().enumerate() {
        let base = exact_selection_probabilities(
            &case.instance,
            &case.assignment,
            &case.profile,
            case.epsilon,
        )
        .unwrap();
        for i in 1..=case.instance.n() {
            let pool = case.assignment.pool(i);
            let mut replacements: Vec<Vec<usize>> =
                (0..3).map(|_| random_ranking(pool, &mut rng)).collect();
            replacements.push(case.profile.ranking(i).iter().rev().copied().collect());
            for ranking in replacements {
                let changed = case.profile.with_ranking(i, ranking).unwrap();
                let probs = exact_selection_probabilities(
                    &case.instance,
                    &case.assignment,
                    &changed,
                    case.epsilon,
                )
                .unwrap();
                checks += 1;
                if probs[i - 1].to_bits() != base[i - 1].to_bits() {
                    violations.push((c, i, base[i - 1], probs[i - 1]));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = violations.is_empty() && elapsed < Duration::from_secs(10);
    let detail = format!(
        "{checks} review replacements on 200 instances, {} changed the reviewer's own probability",
        violations.len()
    );
    verdict(3, "exact impartiality", pass, elapsed, &detail);
}

#[test]
fn criterion_04_exact_monotonicity() {
    let start = Instant::now();
    let cases = corpus(200, 20, 6, 3);
    let mut checks = 0usize;
    let mut violations = Vec::new();
    for (c, case) in cases.iter().enumerate() {
        let base = exact_selection_probabilities(
            &case.instance,
            &case.assignment,
            &case.profile,
            case.epsilon,
        )
        .unwrap();
        for i in 1..=case.instance.n() {
            let ranking = case.profile.ranking(i);
            for pos in 1..ranking.len() {
                let promoted = ranking[pos];
                let mut up = ranking.to_vec();
                up.swap(pos - 1, pos);
                let changed = case.profile.with_ranking(i, up).unwrap();
                let probs = exact_selection_probabilities(
                    &case.instance,
                    &case.assignment,
                    &changed,
                    case.epsilon,
                )
                .unwrap();
                checks += 1;
                if probs[promoted - 1] < base[promoted - 1] {
                    violations.push((c, i, promoted, base[promoted - 1], probs[promoted - 1]));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = violations.is_empty() && elapsed < Duration::from_secs(30);
    let detail = format!(
        "{checks} single-step promotions, {} decreased the promoted agent's probability",
        violations.len()
    );
    verdict(4, "exact monotonicity", pass, elapsed, &detail);
}

#[test]
fn criterion_05_oracle_vs_monte_carlo() {
    let start = Instant::now();
    let (inst, a, p) = example_one();
    let runs = 30_000u64;
    let mut hits = [0u64; 3];
    let mut sizes_seen = [false; 4];
    for seed in 0..runs {
        let s = run_peer_nomination(&inst, &a, &p, 0.0, seed).unwrap();
        sizes_seen[s.size()] = true;
        for &j in &s.accepted {
            hits[j - 1] += 1;
        }
    }
    let tol = 4.0 * ((2.0 / 9.0) / runs as f64).sqrt();
    let freqs: Vec<f64> = hits.iter().map(|&h| h as f64 / runs as f64).collect();
    let example_ok =
        freqs.iter().all(|f| (f - 2.0 / 3.0).abs() <= tol) && sizes_seen.iter().all(|&s| s);

    let runs = 4000u64;
    let mut worst = 0.0f64;
    let mut random_ok = true;
    for case in corpus(20, 10, 4, 5) {
        let exact = exact_selection_probabilities(
            &case.instance,
            &case.assignment,
            &case.profile,
            case.epsilon,
        )
        .unwrap();
        let mut counts = vec![0u64; case.instance.n()];
        for seed in 0..runs {
            let s = run_peer_nomination(
                &case.instance,
                &case.assignment,
                &case.profile,
                case.epsilon,
                seed,
            )
            .unwrap();
            for &j in &s.accepted {
                counts[j - 1] += 1;
            }
        }
        for (j, &c) in counts.iter().enumerate() {
            let freq = c as f64 / runs as f64;
            let se = (exact[j] * (1.0 - exact[j]) / runs as f64).sqrt();
            let dev = (freq - exact[j]).abs();
            if se > 0.0 {
                worst = worst.max(dev / se);
            }
            if dev > 4.0 * se {
                random_ok = false;
            }
        }
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "example frequencies {:.4}/{:.4}/{:.4} vs 2/3 ± {tol:.4}, all sizes 0..3 seen: {}; 20 random instances, worst deviation {worst:.2} SE",
        freqs[0],
        freqs[1],
        freqs[2],
        sizes_seen.iter().all(|&s| s)
    );
    verdict(
        5,
        "oracle vs Monte-Carlo",
        example_ok && random_ok,
        elapsed,
        &detail,
    );
}

/// Enumerates every co-pool of agent `r` and counts where `r` lands.
fn pmf_by_enumeration(n: usize, m: usize, r: usize) -> Vec<BigRational> {
    let others: Vec<usize> = (1..=n).filter(|&a| a != r).collect();
    let mut counts = vec![0i64; m + 1];
    let mut total = 0i64;
    for mask in 0u32..(1 << others.len()) {
        if mask.count_ones() as usize != m - 1 {
            continue;
        }
        let better = others
            .iter()
            .enumerate()
            .filter(|(b, &a)| mask >> b & 1 == 1 && a < r)
            .count();
        counts[better + 1] += 1;
        total += 1;
    }
    counts
        .iter()
        .map(|&c| BigRational::new(c.into(), total.into()))
        .collect()
}

#[test]
fn criterion_06_pool_position_pmf() {
    let start = Instant::now();
    let mut compared = 0usize;
    let mut mismatches = 0usize;
    for n in 2..=8 {
        for m in 1..=4.min(n - 1) {
            for r in 1..=n {
                let exact = pmf_by_enumeration(n, m, r);
                let total: BigRational = exact[1..].iter().sum();
                assert!(total == BigRational::from_integer(1.into()));
                for (y, want) in exact.iter().enumerate().skip(1) {
                    // Both sides are small integers over small integers, so the
                    // correctly rounded quotient is the exact rational's nearest f64.
                    let nearest = if want.is_zero() {
                        0.0
                    } else {
                        want.numer().to_f64().unwrap() / want.denom().to_f64().unwrap()
                    };
                    compared += 1;
                    if pool_position_pmf(n, m, r, y).to_bits() != nearest.to_bits() {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    let mut worst_sum_err = 0.0f64;
    for r in 1..=130 {
        let s: f64 = (1..=9).map(|y| pool_position_pmf(130, 9, r, y)).sum();
        worst_sum_err = worst_sum_err.max((s - 1.0).abs());
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && worst_sum_err <= 1e-12;
    let detail = format!(
        "{compared} (n, m, r, y) values vs exact enumeration, {mismatches} mismatches; n=130, m=9 max |Σ−1| = {worst_sum_err:.2e}"
    );
    verdict(6, "pool-position pmf", pass, elapsed, &detail);
}

#[test]
fn criterion_07_analytic_vs_simulated_size() {
    let start = Instant::now();
    let inst = Instance::new(130, 9, 30).unwrap();
    let analytic = expected_size(&inst, 0.13).unwrap();
    let sizes: Vec<f64> = (0..1000u64)
        .map(|t| {
            let a = generate_assignment(&inst, 7_000 + t).unwrap();
            let p = truthful_profile(&a);
            run_peer_nomination(&inst, &a, &p, 0.13, 9_000 + t)
                .unwrap()
                .size() as f64
        })
        .collect();
    let stat = Stat::of(&sizes);
    let se = stat.se(sizes.len());
    let elapsed = start.elapsed();
    let z = (stat.mean - analytic) / se;
    let pass = z.abs() <= 4.0 && elapsed < Duration::from_secs(60);
    let detail = format!(
        "simulated mean |S| = {:.4} (SE {se:.4}), analytic {analytic:.4}, z = {z:.2}",
        stat.mean
    );
    verdict(7, "analytic vs simulated size", pass, elapsed, &detail);
}

#[test]
fn criterion_08_roc_curve() {
    let start = Instant::now();
    let inst = Instance::new(120, 8, 25).unwrap();
    let pts = roc_pr_curves(&inst, 200).unwrap();
    let elapsed = start.elapsed();
    let first = pts[0];
    let last = pts[pts.len() - 1];
    let endpoints = pts.len() == 200
        && (first.tpr, first.fpr) == (0.0, 0.0)
        && (last.tpr, last.fpr) == (1.0, 1.0);
    let monotone = pts
        .windows(2)
        .all(|w| w[1].tpr >= w[0].tpr && w[1].fpr >= w[0].fpr);
    let best = pts
        .iter()
        .filter(|p| p.fpr <= 0.05)
        .map(|p| p.tpr)
        .fold(0.0f64, f64::max);
    let pass = endpoints && monotone && best >= 0.75;
    let detail = format!(
        "{} points, start ({}, {}), end ({}, {}), monotone: {monotone}, best TPR at FPR ≤ 0.05: {best:.4}",
        pts.len(),
        first.tpr,
        first.fpr,
        last.tpr,
        last.fpr
    );
    verdict(8, "ROC endpoints and monotonicity", pass, elapsed, &detail);
}

#[test]
fn criterion_09_comparative_study() {
    let start = Instant::now();
    let config = ExperimentConfig {
        n: 120,
        m_values: vec![5, 7, 9, 11],
        k_values: vec![30],
        l: 4,
        phi: 0.5,
        trials: 1000,
        master_seed: 2024,
        ..Default::default()
    };
    let summaries = summarize(&run_experiment(&config).unwrap());
    let elapsed = start.elapsed();
    let mut pass = elapsed < Duration::from_secs(600);
    let mut parts = Vec::new();
    for m in [5, 7, 9, 11] {
        let pn = cell(&summaries, Algorithm::PeerNomination, m, 4).tpr.mean;
        let edp = cell(&summaries, Algorithm::Edp, m, 4).tpr.mean;
        let vanilla = cell(&summaries, Algorithm::Vanilla, m, 4).tpr.mean;
        if m != 5 {
            pass &= pn >= edp - 0.01;
        }
        if m == 9 {
            pass &= (pn - vanilla).abs() <= 0.05;
        }
        parts.push(format!(
            "m={m}: PN {pn:.4} EDP {edp:.4} Vanilla {vanilla:.4}"
        ));
    }
    verdict(9, "comparative recall", pass, elapsed, &parts.join("; "));
}

#[test]
fn criterion_10_forced_size() {
    let start = Instant::now();
    let config = ExperimentConfig {
        master_seed: 10,
        ..Default::default()
    };
    let rows = run_forced_size_experiment(&config).unwrap();
    let elapsed = start.elapsed();
    let paired = rows.len().is_multiple_of(2)
        && rows.chunks(2).all(|p| {
            p[0].algorithm == Algorithm::PeerNomination
                && p[1].algorithm == Algorithm::Edp
                && p[0].trial == p[1].trial
                && p[0].size == p[1].size
        });
    let summaries = summarize(&rows);
    let excess: Vec<(usize, usize, f64)> = summaries
        .iter()
        .filter(|s| s.algorithm == Algorithm::PeerNomination)
        .map(|s| (s.m, s.k, s.size.mean - s.k as f64))
        .collect();
    let worst = excess
        .iter()
        .cloned()
        .fold((0, 0, f64::MIN), |a, b| if b.2 > a.2 { b } else { a });
    let pass = paired && worst.2 < 1.0;
    let detail = format!(
        "{} trials over {} cells, sizes paired on every trial: {paired}; largest mean |S| − k = {:.3} at m={}, k={}",
        rows.len() / 2,
        excess.len(),
        worst.2,
        worst.0,
        worst.1
    );
    verdict(10, "forced-size experiment", pass, elapsed, &detail);
}

#[test]
fn criterion_11_baselines_exact_size() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut wrong = 0usize;
    let trials = 10_000;
    for t in 0..trials {
        // Redraw until the cross-cluster regularity constraints are satisfiable.
        let (inst, clustering, a) = loop {
            let n: usize = rng.random_range(6..=60);
            let l = rng.random_range(2..=6.min(n / 2));
            let m = rng.random_range(1..=(n - n.div_ceil(l)).min(11));
            let inst = Instance::new(n, m, rng.random_range(1..=n)).unwrap();
            if let Ok((clustering, a)) = generate_clustered_assignment(&inst, l, rng.random()) {
                break (inst, clustering, a);
            }
        };
        let n = inst.n();
        let full = sample_full_rankings(
            n,
            &MallowsParams::new(rng.random_range(0.0..=1.0)).unwrap(),
            rng.random(),
        );
        let p = project_profile(&a, &full).unwrap();
        let sizes = [
            run_vanilla(&inst, &a, &p).size(),
            run_partition(&inst, &clustering, &a, &p, t).unwrap().size(),
            run_edp(&inst, &clustering, &a, &p, t).unwrap().size(),
        ];
        wrong += sizes.iter().filter(|&&s| s != inst.k()).count();
    }

    let target_sets: [&[f64]; 3] = [
        &[7.3, 8.2, 6.5, 8.0],
        &[0.25, 2.5, 3.75, 1.1, 2.4],
        &[29.0 / 3.0, 29.0 / 3.0, 29.0 / 3.0],
    ];
    let draws = 20_000u64;
    let mut sum_errors = 0usize;
    let mut worst_z = 0.0f64;
    for (s, targets) in target_sets.iter().enumerate() {
        let total = targets.iter().sum::<f64>().round() as usize;
        let mut sums = vec![0u64; targets.len()];
        for d in 0..draws {
            let q = randomized_apportionment(targets, (s as u64) << 32 | d).unwrap();
            if q.iter().sum::<usize>() != total {
                sum_errors += 1;
            }
            for (acc, v) in sums.iter_mut().zip(&q) {
                *acc += *v as u64;
            }
        }
        for (c, &x) in targets.iter().enumerate() {
            let frac = x - x.floor();
            let sigma = (frac * (1.0 - frac) / draws as f64).sqrt();
            let dev = (sums[c] as f64 / draws as f64 - x).abs();
            let z = if sigma > 0.0 {
                dev / sigma
            } else if dev > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst_z = worst_z.max(z);
        }
    }
    let elapsed = start.elapsed();
    let pass = wrong == 0 && sum_errors == 0 && worst_z <= 3.0;
    let detail = format!(
        "{trials} random trials, {wrong} baseline runs with |S| ≠ k; apportionment: {sum_errors} draws with wrong total, worst marginal deviation {worst_z:.2}σ"
    );
    verdict(11, "baselines select exactly k", pass, elapsed, &detail);
}

#[test]
fn criterion_12_cluster_sensitivity() {
    let start = Instant::now();
    let mut shared = Vec::new();
    let mut separate = Vec::new();
    for l in 2..=10 {
        let config = ExperimentConfig {
            n: 120,
            m_values: vec![9],
            k_values: vec![30],
            l,
            phi: 0.5,
            trials: 1000,
            master_seed: 12,
            ..Default::default()
        };
        shared.extend(summarize(&run_experiment(&config).unwrap()));
        // PeerNomination on its own cluster-free assignment.
        let own = ExperimentConfig {
            algorithms: vec![Algorithm::PeerNomination],
            assignment_mode: AssignmentMode::Separate,
            ..config
        };
        separate.extend(summarize(&run_experiment(&own).unwrap()));
    }
    let elapsed = start.elapsed();
    let spread = |summaries: &[CellSummary]| {
        let pn: Vec<f64> = (2..=10)
            .map(|l| cell(summaries, Algorithm::PeerNomination, 9, l).tpr.mean)
            .collect();
        pn.iter().cloned().fold(f64::MIN, f64::max) - pn.iter().cloned().fold(f64::MAX, f64::min)
    };
    let (flat, shared_spread) = (spread(&separate), spread(&shared));
    let part = |l| cell(&shared, Algorithm::Partition, 9, l).tpr.mean;
    let edp = |l| cell(&shared, Algorithm::Edp, 9, l).tpr.mean;
    let pass = flat < 0.01 && part(10) < part(2) && edp(10) < edp(2);
    let detail = format!(
        "PN recall spread over l=2..10: {flat:.4} (on the clustered assignment: {shared_spread:.4}); \
         Partition {:.4} → {:.4}; EDP {:.4} → {:.4} (l=2 → l=10)",
        part(2),
        part(10),
        edp(2),
        edp(10)
    );
    verdict(12, "cluster sensitivity", pass, elapsed, &detail);
}
