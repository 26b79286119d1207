//! Seeded Monte Carlo execution of policies.
//!
//! Trajectory randomness comes from a ChaCha8 stream seeded per replication;
//! replication seeds are pure functions of (master seed, replication index),
//! so runs are reproducible within this build regardless of thread count.
//! Every round consumes exactly three draws (arrival, sampling, acceptance),
//! whether or not they are used, so trajectories are comparable under common
//! random numbers across policy parameters.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::{Instance, OriginMap};
use crate::policy::{Policy, PolicyState, RoundOutcome, SamplingDistribution};
use crate::stats::Moments;

/// One realized run of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub outcomes: Vec<RoundOutcome>,
    pub profit: f64,
    /// Total number of successful assignments.
    pub matches: u64,
    /// Successful assignments per original offline type (capacity copies
    /// re-aggregated).
    pub matches_by_type: Vec<u64>,
}

/// Aggregate statistics over replications. Variance-derived fields require
/// at least two replications and are absent otherwise.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct McSummary {
    pub n: usize,
    pub master_seed: u64,
    pub mean_profit: f64,
    pub mean_matches: f64,
    pub var_profit: Option<f64>,
    pub var_matches: Option<f64>,
    pub se_mean_profit: Option<f64>,
    pub se_mean_matches: Option<f64>,
    pub se_var_matches: Option<f64>,
}

/// Replication seeds are derived from the master seed with a SplitMix64
/// round, keeping streams decorrelated without sharing generator state.
pub fn replication_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Precomputed per-round arrival tables and sampling distributions; both
/// policies sample independently of the remaining capacities, so the
/// distributions are fixed once the LP is solved.
struct TrajectorySampler<'a, 'p> {
    policy: &'a Policy<'p>,
    /// Per round: (cumulative arrival probability, online type, distribution).
    rounds: Vec<Vec<(f64, usize, SamplingDistribution)>>,
}

impl<'a, 'p> TrajectorySampler<'a, 'p> {
    fn new(policy: &'a Policy<'p>) -> Result<Self> {
        let inst = policy.instance();
        let mut rounds = Vec::with_capacity(inst.horizon());
        for t in 0..inst.horizon() {
            let mut row = Vec::new();
            let mut cum = 0.0;
            for (j, q) in inst.arrival_support(t) {
                cum += q;
                row.push((cum, j, policy.sampling_distribution(j, t)?));
            }
            rounds.push(row);
        }
        Ok(TrajectorySampler { policy, rounds })
    }

    fn run(&self, origin: &OriginMap, seed: u64) -> Trajectory {
        let inst = self.policy.instance();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = PolicyState::new(inst.n_offline());
        let mut outcomes = Vec::with_capacity(inst.horizon());
        let mut profit = 0.0;
        let mut per_copy = vec![0u64; inst.n_offline()];

        for (t, row) in self.rounds.iter().enumerate() {
            // Fixed draw schedule: three per round.
            let u_arrival: f64 = rng.gen();
            let u_sample: f64 = rng.gen();
            let u_accept: f64 = rng.gen();

            let (_, j, dist) = row
                .iter()
                .find(|(cum, _, _)| u_arrival < *cum)
                .or_else(|| row.last())
                .expect("validated instances have arrival mass in every round");

            let mut sampled = None;
            let mut accept = false;
            let mut acc = 0.0;
            for &(f, p_sample) in &dist.entries {
                acc += p_sample;
                if u_sample < acc {
                    sampled = Some(f);
                    accept = u_accept
                        < inst
                            .p(f, t)
                            .expect("sampled assignments carry acceptance entries");
                    break;
                }
            }

            let outcome = self
                .policy
                .step(&mut state, t, *j, sampled, accept)
                .expect("sampler-produced inputs satisfy the step contract");
            profit += outcome.profit;
            if outcome.matched() {
                per_copy[inst.edge(outcome.sampled.unwrap().edge).offline] += 1;
            }
            outcomes.push(outcome);
        }

        let matches = per_copy.iter().sum();
        debug_assert!(matches <= inst.total_capacity());
        Trajectory {
            seed,
            outcomes,
            profit,
            matches,
            matches_by_type: origin.aggregate(&per_copy),
        }
    }
}

/// Runs one seeded trajectory: per round, draw the arrival, draw the sampled
/// assignment from the policy's distribution, draw acceptance, and apply the
/// step.
pub fn run_trajectory(policy: &Policy, origin: &OriginMap, seed: u64) -> Result<Trajectory> {
    Ok(TrajectorySampler::new(policy)?.run(origin, seed))
}

/// Runs `n` independent replications and aggregates their statistics.
/// Replications execute in parallel into pre-assigned slots; the reduction
/// is sequential over slot order, so the summary is identical however the
/// work was scheduled.
pub fn monte_carlo(
    policy: &Policy,
    origin: &OriginMap,
    n: usize,
    master_seed: u64,
) -> Result<McSummary> {
    let sampler = TrajectorySampler::new(policy)?;
    if n == 0 {
        return Err(Error::parameter("at least one replication is required"));
    }
    let per_rep: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let traj = sampler.run(origin, replication_seed(master_seed, idx as u64));
            (traj.profit, traj.matches as f64)
        })
        .collect();
    Ok(summarize(&per_rep, master_seed))
}

/// Sequential variant that also streams every round of every replication to
/// a CSV event log. Produces the same summary as [`monte_carlo`].
pub fn monte_carlo_logged<W: Write>(
    policy: &Policy,
    origin: &OriginMap,
    n: usize,
    master_seed: u64,
    writer: W,
) -> Result<McSummary> {
    let sampler = TrajectorySampler::new(policy)?;
    if n == 0 {
        return Err(Error::parameter("at least one replication is required"));
    }
    let mut log = EventLogWriter::new(policy.instance(), writer)?;
    let mut per_rep = Vec::with_capacity(n);
    for idx in 0..n {
        let traj = sampler.run(origin, replication_seed(master_seed, idx as u64));
        log.write_trajectory(idx, &traj)?;
        per_rep.push((traj.profit, traj.matches as f64));
    }
    log.flush()?;
    Ok(summarize(&per_rep, master_seed))
}

fn summarize(per_rep: &[(f64, f64)], master_seed: u64) -> McSummary {
    let mut profit = Moments::new();
    let mut matches = Moments::new();
    for &(p, h) in per_rep {
        profit.push(p);
        matches.push(h);
    }
    McSummary {
        n: per_rep.len(),
        master_seed,
        mean_profit: profit.mean(),
        mean_matches: matches.mean(),
        var_profit: profit.sample_variance(),
        var_matches: matches.sample_variance(),
        se_mean_profit: profit.se_mean(),
        se_mean_matches: matches.se_mean(),
        se_var_matches: matches.se_variance(),
    }
}

/// Writes per-round event logs as CSV with columns
/// `replication,t,arrival,sampled_edge,price_index,safe,accepted,profit`.
pub struct EventLogWriter<'a, W: Write> {
    inst: &'a Instance,
    writer: csv::Writer<W>,
}

impl<'a, W: Write> EventLogWriter<'a, W> {
    pub fn new(inst: &'a Instance, writer: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(writer);
        writer
            .write_record([
                "replication",
                "t",
                "arrival",
                "sampled_edge",
                "price_index",
                "safe",
                "accepted",
                "profit",
            ])
            .map_err(|e| Error::contract(format!("event log write failed: {e}")))?;
        Ok(EventLogWriter { inst, writer })
    }

    pub fn write_trajectory(&mut self, replication: usize, traj: &Trajectory) -> Result<()> {
        for outcome in &traj.outcomes {
            let (edge_label, price_label) = match outcome.sampled {
                Some(f) => {
                    let edge = self.inst.edge(f.edge);
                    (
                        format!(
                            "{}->{}",
                            self.inst.offline_types()[edge.offline].id,
                            self.inst.online_types()[edge.online].id
                        ),
                        (f.price + 1).to_string(),
                    )
                }
                None => (String::new(), String::new()),
            };
            self.writer
                .write_record([
                    replication.to_string(),
                    (outcome.t + 1).to_string(),
                    self.inst.online_types()[outcome.arrival].id.clone(),
                    edge_label,
                    price_label,
                    outcome.safe.to_string(),
                    outcome.accepted.to_string(),
                    outcome.profit.to_string(),
                ])
                .map_err(|e| Error::contract(format!("event log write failed: {e}")))?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer
            .flush()
            .map_err(|e| Error::contract(format!("event log flush failed: {e}")))
    }
}

/// Chebyshev upper bound on the probability that an outcome with the given
/// mean and variance falls at or below `threshold`:
/// `min(1, variance / (mean - threshold)^2)`.
pub fn risk_bound(mean: f64, variance: f64, threshold: f64) -> Result<f64> {
    if variance.is_nan() || variance < 0.0 {
        return Err(Error::parameter(format!(
            "variance must be non-negative, got {variance}"
        )));
    }
    if mean.is_nan() || threshold.is_nan() || threshold >= mean {
        return Err(Error::parameter(format!(
            "the bound is vacuous unless threshold < mean (got threshold {threshold}, mean {mean})"
        )));
    }
    let gap = mean - threshold;
    Ok((variance / (gap * gap)).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{
        build_reference_instance, Edge, OfflineType, OnlineType, ParamTable, ReferenceSpec,
    };
    use crate::lp::{build_lp, solve_lp, DEFAULT_TOL};
    use crate::oracle::{exact_policy_eval, Budget};
    use crate::policy::{PolicyConfig, PolicyKind};
    use approx::assert_abs_diff_eq;

    fn identity_origin(inst: &Instance) -> OriginMap {
        OriginMap::identity(inst.offline_types().iter().map(|o| o.id.clone()).collect())
    }

    fn single_edge_instance() -> Instance {
        let mut p = ParamTable::new();
        let mut w = ParamTable::new();
        p.set_constant(0, 0, 1.0);
        w.set_constant(0, 0, 2.0);
        Instance::new(
            vec![OfflineType {
                id: "a".into(),
                capacity: 1,
            }],
            vec![OnlineType { id: "x".into() }],
            vec![1.0],
            vec![Edge {
                offline: 0,
                online: 0,
            }],
            1,
            vec![vec![1.0]],
            p,
            w,
        )
    }

    #[test]
    fn zero_gamma_earns_nothing() {
        let inst = build_reference_instance(&ReferenceSpec::AttVar { m: 3 }).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let config = PolicyConfig::new(PolicyKind::Att, 0.0).unwrap();
        let policy = Policy::new(&inst, &sol, config).unwrap();
        let origin = identity_origin(&inst);
        for seed in [0u64, 1, 99] {
            let traj = run_trajectory(&policy, &origin, seed).unwrap();
            assert_eq!(traj.matches, 0);
            assert_eq!(traj.profit, 0.0);
        }
    }

    #[test]
    fn deterministic_single_round_match() {
        let inst = single_edge_instance();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let config = PolicyConfig::new(PolicyKind::Samp, 1.0).unwrap();
        let policy = Policy::new(&inst, &sol, config).unwrap();
        let origin = identity_origin(&inst);
        for seed in 0..20u64 {
            let traj = run_trajectory(&policy, &origin, seed).unwrap();
            assert_eq!(traj.matches, 1);
            assert_eq!(traj.profit, 2.0);
            assert_eq!(traj.matches_by_type, vec![1]);
        }
    }

    #[test]
    fn trajectories_are_reproducible() {
        let inst = build_reference_instance(&ReferenceSpec::AttCr { eps: 0.1 }).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let config = PolicyConfig::new(PolicyKind::Att, 0.5).unwrap();
        let policy = Policy::new(&inst, &sol, config).unwrap();
        let origin = identity_origin(&inst);
        let a = run_trajectory(&policy, &origin, 1234).unwrap();
        let b = run_trajectory(&policy, &origin, 1234).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn common_random_numbers_share_arrivals() {
        let inst = build_reference_instance(&ReferenceSpec::AttCr { eps: 0.1 }).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let origin = identity_origin(&inst);
        let arrivals = |gamma: f64| {
            let config = PolicyConfig::new(PolicyKind::Att, gamma).unwrap();
            let policy = Policy::new(&inst, &sol, config).unwrap();
            run_trajectory(&policy, &origin, 77)
                .unwrap()
                .outcomes
                .iter()
                .map(|o| o.arrival)
                .collect::<Vec<_>>()
        };
        assert_eq!(arrivals(0.1), arrivals(0.5));
    }

    #[test]
    fn monte_carlo_is_bit_identical_across_runs() {
        let inst = build_reference_instance(&ReferenceSpec::AttVar { m: 4 }).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let config = PolicyConfig::new(PolicyKind::Att, 0.4).unwrap();
        let policy = Policy::new(&inst, &sol, config).unwrap();
        let origin = identity_origin(&inst);
        let a = monte_carlo(&policy, &origin, 5000, 42).unwrap();
        let b = monte_carlo(&policy, &origin, 5000, 42).unwrap();
        assert_eq!(a, b);
        // The logged sequential path aggregates identically.
        let mut sink = Vec::new();
        let c = monte_carlo_logged(&policy, &origin, 5000, 42, &mut sink).unwrap();
        assert_eq!(a, c);
        assert!(!sink.is_empty());
    }

    #[test]
    fn single_replication_has_no_variance_fields() {
        let inst = single_edge_instance();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let config = PolicyConfig::new(PolicyKind::Samp, 0.5).unwrap();
        let policy = Policy::new(&inst, &sol, config).unwrap();
        let summary = monte_carlo(&policy, &identity_origin(&inst), 1, 7).unwrap();
        assert_eq!(summary.n, 1);
        assert!(summary.var_matches.is_none());
        assert!(summary.se_var_matches.is_none());
        assert!(monte_carlo(&policy, &identity_origin(&inst), 0, 7).is_err());
    }

    #[test]
    fn monte_carlo_tracks_the_exact_oracle() {
        let inst = build_reference_instance(&ReferenceSpec::AttVar { m: 3 }).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let config = PolicyConfig::new(PolicyKind::Att, 0.5).unwrap();
        let exact = exact_policy_eval(&inst, &sol, config, &Budget::default()).unwrap();
        let policy = Policy::new(&inst, &sol, config).unwrap();
        let summary = monte_carlo(&policy, &identity_origin(&inst), 20_000, 42).unwrap();
        let se_mean = summary.se_mean_matches.unwrap();
        assert!(
            (summary.mean_matches - exact.expected_matches).abs() <= 4.0 * se_mean,
            "mean {} vs exact {}",
            summary.mean_matches,
            exact.expected_matches
        );
        let se_var = summary.se_var_matches.unwrap();
        assert!(
            (summary.var_matches.unwrap() - exact.variance_matches).abs() <= 4.0 * se_var,
            "var {} vs exact {}",
            summary.var_matches.unwrap(),
            exact.variance_matches
        );
        // Empirical variance stays under the theoretical bound plus noise.
        let bound = config.variance_bound(inst.total_capacity());
        assert!(summary.var_matches.unwrap() <= bound + 4.0 * se_var);
    }

    #[test]
    fn capacity_copies_reaggregate_per_original_type() {
        use crate::instance::expand_capacities;

        // One type of capacity 2 and one of capacity 1; sure arrivals and
        // sure acceptance so every round matches something while capacity
        // remains.
        let mut p = ParamTable::new();
        let mut w = ParamTable::new();
        for e in 0..2 {
            p.set_constant(e, 0, 1.0);
            w.set_constant(e, 0, 1.0);
        }
        let inst = Instance::new(
            vec![
                OfflineType {
                    id: "big".into(),
                    capacity: 2,
                },
                OfflineType {
                    id: "small".into(),
                    capacity: 1,
                },
            ],
            vec![OnlineType { id: "x".into() }, OnlineType { id: "y".into() }],
            vec![1.0],
            vec![
                Edge {
                    offline: 0,
                    online: 0,
                },
                Edge {
                    offline: 1,
                    online: 1,
                },
            ],
            4,
            vec![vec![0.5, 0.5]; 4],
            p,
            w,
        );
        let expanded = expand_capacities(&inst).unwrap();
        let sol = solve_lp(&build_lp(&expanded.instance).unwrap(), DEFAULT_TOL).unwrap();
        let config = PolicyConfig::new(PolicyKind::Samp, 1.0).unwrap();
        let policy = Policy::new(&expanded.instance, &sol, config).unwrap();
        for seed in 0..50u64 {
            let traj = run_trajectory(&policy, &expanded.origin, seed).unwrap();
            assert_eq!(traj.matches_by_type.len(), 2);
            assert_eq!(traj.matches_by_type.iter().sum::<u64>(), traj.matches);
            assert!(traj.matches_by_type[0] <= 2);
            assert!(traj.matches_by_type[1] <= 1);
            assert!(traj.matches <= inst.total_capacity());
        }
    }

    #[test]
    fn event_log_has_one_row_per_round() {
        let inst = build_reference_instance(&ReferenceSpec::AttCr { eps: 0.1 }).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let config = PolicyConfig::new(PolicyKind::Att, 0.5).unwrap();
        let policy = Policy::new(&inst, &sol, config).unwrap();
        let mut sink = Vec::new();
        monte_carlo_logged(&policy, &identity_origin(&inst), 3, 1, &mut sink).unwrap();
        let text = String::from_utf8(sink).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 3 * inst.horizon());
        assert_eq!(
            lines[0],
            "replication,t,arrival,sampled_edge,price_index,safe,accepted,profit"
        );
    }

    #[test]
    fn chebyshev_bound_values() {
        assert_abs_diff_eq!(
            risk_bound(50.0, 10.5, 40.0).unwrap(),
            0.105,
            epsilon = 1e-12
        );
        assert_eq!(risk_bound(5.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(risk_bound(1.0, 100.0, 0.0).unwrap(), 1.0);
        assert!(risk_bound(1.0, 1.0, 1.0).is_err());
        assert!(risk_bound(1.0, -1.0, 0.0).is_err());
    }
}
