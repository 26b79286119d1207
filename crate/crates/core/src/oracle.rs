//! Exact small-instance computations: the clairvoyant optimum (full arrival
//! sequence known in advance), the online optimum (real-time decisions), and
//! exact expectation/variance evaluation of the sampling policies. These are
//! the ground truth against which every bound is checked.
//!
//! Safe sets are encoded as bitmasks over the (unit-capacity) offline agents.
//! The optimum recursions memoize on the projection of the safe set onto the
//! agents still reachable from the current round, so instances whose rounds
//! touch few agents stay cheap regardless of the total agent count. Size
//! guards are enforced on the states actually visited.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{Assignment, Instance};
use crate::lp::LpSolution;
use crate::policy::{Policy, PolicyConfig};
use crate::stats::Moments;

/// Size caps for the exact computations. `GIGMATCH_BUDGET` (parsed by
/// [`Budget::from_env`]) overrides them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    /// Maximum offline-agent count for the safe-set distribution recursion
    /// (it stores `2^n` probabilities). Hard-capped at 24.
    pub max_mask_agents: usize,
    /// Maximum number of memoized states across an optimum computation.
    pub max_dp_states: usize,
    /// Maximum number of arrival sequences enumerated exactly.
    pub max_sequences: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_mask_agents: 16,
            max_dp_states: 10_000_000,
            max_sequences: 1_000_000,
        }
    }
}

impl Budget {
    /// Reads `GIGMATCH_BUDGET`. A plain integer `N` sets both the state and
    /// sequence caps to `N` and the mask cap to `log2(N)` (at most 24);
    /// alternatively a comma list of `states=..`, `sequences=..`, `mask=..`
    /// overrides fields individually. Unset or unparsable values fall back
    /// to the defaults.
    pub fn from_env() -> Self {
        let Ok(raw) = std::env::var("GIGMATCH_BUDGET") else {
            return Budget::default();
        };
        let mut budget = Budget::default();
        if let Ok(n) = raw.trim().parse::<u64>() {
            budget.max_dp_states = n as usize;
            budget.max_sequences = n;
            budget.max_mask_agents = (63 - n.max(2).leading_zeros() as u64).min(24) as usize;
            return budget;
        }
        for part in raw.split(',') {
            match part.trim().split_once('=') {
                Some(("states", v)) => {
                    if let Ok(n) = v.trim().parse() {
                        budget.max_dp_states = n;
                    }
                }
                Some(("sequences", v)) => {
                    if let Ok(n) = v.trim().parse() {
                        budget.max_sequences = n;
                    }
                }
                Some(("mask", v)) => {
                    if let Ok(n) = v.trim().parse::<usize>() {
                        budget.max_mask_agents = n.min(24);
                    }
                }
                _ => {}
            }
        }
        budget
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    ExactEnumeration,
    ArrivalSampled,
}

/// A benchmark value with its provenance: exact values carry zero standard
/// error, sampled ones the standard error of the sequence-value mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    pub method: OracleMethod,
    pub std_error: f64,
}

/// How the clairvoyant optimum handles the expectation over arrival
/// sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffMode {
    /// Enumerate every arrival sequence; error if over budget.
    Exact,
    /// Average the per-sequence optimum over seeded sampled sequences.
    Sampled { samples: usize, seed: u64 },
    /// Exact when the sequence count fits the budget, sampled otherwise.
    Auto { samples: usize, seed: u64 },
}

/// Per-round arrival branches. Online types with no edges cannot affect any
/// decision, so their mass is lumped into a single `None` branch.
fn arrival_branches(inst: &Instance) -> Vec<Vec<(Option<usize>, f64)>> {
    (0..inst.horizon())
        .map(|t| {
            let mut branches = Vec::new();
            let mut idle_mass = 0.0;
            for (j, q) in inst.arrival_support(t) {
                if inst.edges_of_online(j).is_empty() {
                    idle_mass += q;
                } else {
                    branches.push((Some(j), q));
                }
            }
            if idle_mass > 0.0 {
                branches.push((None, idle_mass));
            }
            branches
        })
        .collect()
}

fn require_unit(inst: &Instance) -> Result<()> {
    if !inst.is_unit_capacity() {
        return Err(Error::contract(
            "exact computations require a unit-capacity instance; run expand_capacities first",
        ));
    }
    Ok(())
}

/// The optimum recursions keep safe sets in 64-bit masks.
fn require_mask_width(inst: &Instance) -> Result<()> {
    if inst.n_offline() > 64 {
        return Err(Error::size_budget(format!(
            "safe sets are stored in 64-bit masks; instance has {} offline agents",
            inst.n_offline()
        )));
    }
    Ok(())
}

/// Bit masks of the offline agents reachable (adjacent to a possible future
/// arrival) from each round onward; entry `t` covers rounds `t..T`.
fn reachable_suffix_masks(inst: &Instance, arrivals_at: impl Fn(usize) -> Vec<usize>) -> Vec<u64> {
    let horizon = inst.horizon();
    let mut masks = vec![0u64; horizon + 1];
    for t in (0..horizon).rev() {
        let mut mask = masks[t + 1];
        for j in arrivals_at(t) {
            for &e in inst.edges_of_online(j) {
                mask |= 1u64 << inst.edge(e).offline;
            }
        }
        masks[t] = mask;
    }
    masks
}

struct DpGuard {
    states: usize,
    cap: usize,
}

impl DpGuard {
    fn count(&mut self) -> Result<()> {
        self.states += 1;
        if self.states > self.cap {
            return Err(Error::size_budget(format!(
                "optimum recursion exceeded {} memoized states; raise GIGMATCH_BUDGET or use \
                 a sampled mode",
                self.cap
            )));
        }
        Ok(())
    }
}

/// Optimal expected profit for one fixed arrival sequence, by backward
/// recursion over (round, reachable safe set). Acceptance coins stay
/// stochastic: clairvoyance covers arrivals only.
fn sequence_value(inst: &Instance, seq: &[Option<usize>], guard: &mut DpGuard) -> Result<f64> {
    let relevant = reachable_suffix_masks(inst, |t| seq[t].into_iter().collect());
    let mut memo: HashMap<(usize, u64), f64> = HashMap::new();

    fn rec(
        inst: &Instance,
        seq: &[Option<usize>],
        relevant: &[u64],
        memo: &mut HashMap<(usize, u64), f64>,
        guard: &mut DpGuard,
        t: usize,
        mask: u64,
    ) -> Result<f64> {
        if t == seq.len() {
            return Ok(0.0);
        }
        let key = (t, mask & relevant[t]);
        if let Some(&v) = memo.get(&key) {
            return Ok(v);
        }
        let keep = rec(inst, seq, relevant, memo, guard, t + 1, mask)?;
        let mut best = keep;
        if let Some(j) = seq[t] {
            for f in inst.assignments_of_online(j) {
                let i = inst.edge(f.edge).offline;
                if mask & (1 << i) == 0 {
                    continue;
                }
                let p = inst
                    .p(f, t)
                    .ok_or_else(|| Error::contract("undefined acceptance"))?;
                let w = inst
                    .w(f, t)
                    .ok_or_else(|| Error::contract("undefined profit"))?;
                let taken = rec(inst, seq, relevant, memo, guard, t + 1, mask & !(1 << i))?;
                let value = p * (w + taken) + (1.0 - p) * keep;
                if value > best {
                    best = value;
                }
            }
        }
        memo.insert(key, best);
        guard.count()?;
        Ok(best)
    }

    let full = if inst.n_offline() == 64 {
        u64::MAX
    } else {
        (1u64 << inst.n_offline()) - 1
    };
    rec(inst, seq, &relevant, &mut memo, guard, 0, full)
}

/// Clairvoyant optimal expected profit: the decision maker observes the full
/// arrival sequence before acting, then plays optimally against the
/// stochastic acceptance draws. Exact mode enumerates arrival sequences and
/// weights each optimal value by its probability; sampled mode averages over
/// seeded sequences and reports a standard error.
pub fn opt_off(inst: &Instance, mode: OffMode, budget: &Budget) -> Result<OracleValue> {
    require_unit(inst)?;
    require_mask_width(inst)?;
    let branches = arrival_branches(inst);

    let mut n_seq: u64 = 1;
    for round in &branches {
        n_seq = n_seq.saturating_mul(round.len().max(1) as u64);
    }

    let (samples, seed) = match mode {
        OffMode::Exact => {
            if n_seq > budget.max_sequences {
                return Err(Error::size_budget(format!(
                    "{n_seq} arrival sequences exceed the cap of {}; use a sampled mode",
                    budget.max_sequences
                )));
            }
            (None, 0)
        }
        OffMode::Sampled { samples, seed } => (Some(samples), seed),
        OffMode::Auto { samples, seed } => {
            if n_seq > budget.max_sequences {
                (Some(samples), seed)
            } else {
                (None, 0)
            }
        }
    };

    let mut guard = DpGuard {
        states: 0,
        cap: budget.max_dp_states,
    };

    if let Some(samples) = samples {
        if samples == 0 {
            return Err(Error::parameter(
                "sampled mode requires at least one sample",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut moments = Moments::new();
        let mut seq = vec![None; inst.horizon()];
        for _ in 0..samples {
            for (t, round) in branches.iter().enumerate() {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                // Fall back to the last branch if roundoff leaves a sliver
                // of unassigned mass.
                let mut chosen = round.last().and_then(|&(j, _)| j);
                for &(j, q) in round {
                    acc += q;
                    if u < acc {
                        chosen = j;
                        break;
                    }
                }
                seq[t] = chosen;
            }
            moments.push(sequence_value(inst, &seq, &mut guard)?);
        }
        return Ok(OracleValue {
            value: moments.mean(),
            method: OracleMethod::ArrivalSampled,
            std_error: moments.se_mean().unwrap_or(0.0),
        });
    }

    // Exact enumeration over the product of per-round branches.
    fn enumerate(
        inst: &Instance,
        branches: &[Vec<(Option<usize>, f64)>],
        guard: &mut DpGuard,
        seq: &mut [Option<usize>],
        t: usize,
        prob: f64,
        total: &mut f64,
    ) -> Result<()> {
        if t == branches.len() {
            *total += prob * sequence_value(inst, seq, guard)?;
            return Ok(());
        }
        if branches[t].is_empty() {
            seq[t] = None;
            return enumerate(inst, branches, guard, seq, t + 1, prob, total);
        }
        for &(j, q) in &branches[t] {
            seq[t] = j;
            enumerate(inst, branches, guard, seq, t + 1, prob * q, total)?;
        }
        Ok(())
    }

    let mut total = 0.0;
    let mut seq: Vec<Option<usize>> = vec![None; inst.horizon()];
    enumerate(inst, &branches, &mut guard, &mut seq, 0, 1.0, &mut total)?;
    Ok(OracleValue {
        value: total,
        method: OracleMethod::ExactEnumeration,
        std_error: 0.0,
    })
}

/// Online optimal expected profit: backward recursion without arrival
/// foreknowledge.
pub fn opt_on(inst: &Instance, budget: &Budget) -> Result<OracleValue> {
    require_unit(inst)?;
    require_mask_width(inst)?;
    let branches = arrival_branches(inst);
    let relevant = reachable_suffix_masks(inst, |t| {
        branches[t].iter().filter_map(|&(j, _)| j).collect()
    });
    let mut memo: HashMap<(usize, u64), f64> = HashMap::new();
    let mut guard = DpGuard {
        states: 0,
        cap: budget.max_dp_states,
    };

    #[allow(clippy::too_many_arguments)]
    fn rec(
        inst: &Instance,
        branches: &[Vec<(Option<usize>, f64)>],
        relevant: &[u64],
        memo: &mut HashMap<(usize, u64), f64>,
        guard: &mut DpGuard,
        t: usize,
        mask: u64,
    ) -> Result<f64> {
        if t == branches.len() {
            return Ok(0.0);
        }
        let key = (t, mask & relevant[t]);
        if let Some(&v) = memo.get(&key) {
            return Ok(v);
        }
        let keep = rec(inst, branches, relevant, memo, guard, t + 1, mask)?;
        let mut value = 0.0;
        for &(j, q) in &branches[t] {
            let mut best = keep;
            if let Some(j) = j {
                for f in inst.assignments_of_online(j) {
                    let i = inst.edge(f.edge).offline;
                    if mask & (1 << i) == 0 {
                        continue;
                    }
                    let p = inst
                        .p(f, t)
                        .ok_or_else(|| Error::contract("undefined acceptance"))?;
                    let w = inst
                        .w(f, t)
                        .ok_or_else(|| Error::contract("undefined profit"))?;
                    let taken = rec(
                        inst,
                        branches,
                        relevant,
                        memo,
                        guard,
                        t + 1,
                        mask & !(1 << i),
                    )?;
                    let cand = p * (w + taken) + (1.0 - p) * keep;
                    if cand > best {
                        best = cand;
                    }
                }
            }
            value += q * best;
        }
        memo.insert(key, value);
        guard.count()?;
        Ok(value)
    }

    let full = if inst.n_offline() == 64 {
        u64::MAX
    } else {
        (1u64 << inst.n_offline()) - 1
    };
    let value = rec(inst, &branches, &relevant, &mut memo, &mut guard, 0, full)?;
    Ok(OracleValue {
        value,
        method: OracleMethod::ExactEnumeration,
        std_error: 0.0,
    })
}

/// Everything the safe-set distribution recursion produces.
#[derive(Debug, Clone)]
pub struct ExactEval {
    pub expected_profit: f64,
    /// Exact success probability per (assignment, round).
    pub success_prob: BTreeMap<(Assignment, usize), f64>,
    /// `safe_prob[i][t]` = probability agent `i` is safe at the start of
    /// round `t`; the last column is the end of the horizon.
    pub safe_prob: Vec<Vec<f64>>,
    /// Distribution of the final safe set, indexed by bitmask.
    pub final_dist: Vec<f64>,
    pub expected_matches: f64,
    pub variance_matches: f64,
}

/// Exact policy evaluation by forward recursion on the distribution over
/// safe sets. The mean and variance of the total match count are read off
/// the final safe-set distribution (`H = |I| - |S|` under unit capacities).
pub fn exact_policy_eval(
    inst: &Instance,
    sol: &LpSolution,
    config: PolicyConfig,
    budget: &Budget,
) -> Result<ExactEval> {
    require_unit(inst)?;
    let n = inst.n_offline();
    let cap = budget.max_mask_agents.min(24);
    if n > cap {
        return Err(Error::size_budget(format!(
            "safe-set distribution over {n} agents exceeds the cap of {cap}; use match_moments \
             for match-count statistics at this size"
        )));
    }
    let policy = Policy::new(inst, sol, config)?;
    let horizon = inst.horizon();
    let size = 1usize << n;
    let full = size - 1;

    let mut dist = vec![0.0f64; size];
    dist[full] = 1.0;
    let mut safe_prob = vec![vec![0.0f64; horizon + 1]; n];
    let mut success_prob: BTreeMap<(Assignment, usize), f64> = BTreeMap::new();

    for t in 0..horizon {
        for (i, row) in safe_prob.iter_mut().enumerate() {
            row[t] = dist
                .iter()
                .enumerate()
                .filter(|(mask, _)| mask & (1 << i) != 0)
                .map(|(_, &p)| p)
                .sum();
        }

        // The sampling distributions are state-independent, so compute them
        // once per (arrival, round); the recursion still resolves
        // sampled-but-unsafe draws against each concrete safe set below.
        let mut support = Vec::new();
        for (j, q) in inst.arrival_support(t) {
            let dist_j = if inst.edges_of_online(j).is_empty() {
                None
            } else {
                Some(policy.sampling_distribution(j, t)?)
            };
            support.push((j, q, dist_j));
        }

        let mut next = vec![0.0f64; size];
        for (mask, &pm) in dist.iter().enumerate() {
            if pm == 0.0 {
                continue;
            }
            for (_, q, dist_j) in &support {
                let jq = pm * q;
                let Some(dist_j) = dist_j else {
                    next[mask] += jq;
                    continue;
                };
                next[mask] += jq * dist_j.reject;
                for &(f, prob) in &dist_j.entries {
                    let i = inst.edge(f.edge).offline;
                    let sampled = jq * prob;
                    if mask & (1 << i) != 0 {
                        let p = inst.p(f, t).expect("validated instance");
                        let success = sampled * p;
                        *success_prob.entry((f, t)).or_insert(0.0) += success;
                        next[mask & !(1 << i)] += success;
                        next[mask] += sampled * (1.0 - p);
                    } else {
                        next[mask] += sampled;
                    }
                }
            }
        }
        dist = next;
        debug_assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    for (i, row) in safe_prob.iter_mut().enumerate() {
        row[horizon] = dist
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask & (1 << i) != 0)
            .map(|(_, &p)| p)
            .sum();
    }

    let mut e_h = 0.0;
    let mut e_h2 = 0.0;
    for (mask, &p) in dist.iter().enumerate() {
        let h = (n - mask.count_ones() as usize) as f64;
        e_h += p * h;
        e_h2 += p * h * h;
    }

    let expected_profit = success_prob
        .iter()
        .map(|(&(f, t), &prob)| prob * inst.w(f, t).expect("validated instance"))
        .sum();

    Ok(ExactEval {
        expected_profit,
        success_prob,
        safe_prob,
        final_dist: dist,
        expected_matches: e_h,
        variance_matches: (e_h2 - e_h * e_h).max(0.0),
    })
}

/// Exact first and second moments of the match count, computed without
/// materializing the safe-set distribution.
///
/// Because both policies sample independently of the remaining capacities
/// and at most one assignment is sampled per round, each agent's safety is a
/// two-state Markov chain with per-round hazard
/// `P_i(t) = sum_j q[j,t] * sum_{f in F_i cap F_j} pi[f,t] * p[f,t]`, and
/// each pair of agents a four-state chain (both cannot be matched in the
/// same round). Pairwise covariances therefore determine `Var[H]` exactly,
/// in `O(|I|^2 T)`, which covers instance sizes far beyond the safe-set
/// recursion. Cross-checked against [`exact_policy_eval`] in tests.
#[derive(Debug, Clone)]
pub struct MatchMoments {
    pub expected_profit: f64,
    pub success_prob: BTreeMap<(Assignment, usize), f64>,
    pub safe_prob: Vec<Vec<f64>>,
    /// Per-agent probability of ending matched.
    pub match_prob: Vec<f64>,
    pub expected_matches: f64,
    pub variance_matches: f64,
}

pub fn match_moments(
    inst: &Instance,
    sol: &LpSolution,
    config: PolicyConfig,
) -> Result<MatchMoments> {
    require_unit(inst)?;
    let policy = Policy::new(inst, sol, config)?;
    let n = inst.n_offline();
    let horizon = inst.horizon();

    // Per-agent, per-round match hazards.
    let mut hazard = vec![vec![0.0f64; horizon]; n];
    let mut per_round: Vec<Vec<(usize, f64, Assignment, f64)>> = vec![Vec::new(); horizon];
    for (t, round) in per_round.iter_mut().enumerate() {
        for (j, q) in inst.arrival_support(t) {
            if inst.edges_of_online(j).is_empty() {
                continue;
            }
            let dist_j = policy.sampling_distribution(j, t)?;
            for (f, prob) in dist_j.entries {
                let i = inst.edge(f.edge).offline;
                let p = inst.p(f, t).expect("validated instance");
                hazard[i][t] += q * prob * p;
                round.push((i, q * prob, f, p));
            }
        }
    }

    let mut safe_prob = vec![vec![1.0f64; horizon + 1]; n];
    for i in 0..n {
        for t in 0..horizon {
            safe_prob[i][t + 1] = safe_prob[i][t] * (1.0 - hazard[i][t]);
        }
    }

    let mut success_prob: BTreeMap<(Assignment, usize), f64> = BTreeMap::new();
    let mut expected_profit = 0.0;
    for (t, round) in per_round.iter().enumerate() {
        for &(i, sample_mass, f, p) in round {
            let chi = sample_mass * safe_prob[i][t] * p;
            *success_prob.entry((f, t)).or_insert(0.0) += chi;
            expected_profit += chi * inst.w(f, t).expect("validated instance");
        }
    }

    let match_prob: Vec<f64> = (0..n).map(|i| 1.0 - safe_prob[i][horizon]).collect();
    let expected_matches: f64 = match_prob.iter().sum();

    // Var[H] = sum_i Var[H_i] + 2 sum_{i<i'} Cov[H_i, H_i'], with each pair's
    // joint endpoint taken from its four-state chain.
    let mut variance: f64 = match_prob.iter().map(|&mu| mu * (1.0 - mu)).sum();
    for i1 in 0..n {
        for i2 in (i1 + 1)..n {
            let mut p11 = 1.0f64; // both safe
            let mut p10 = 0.0f64; // i1 safe, i2 matched
            let mut p01 = 0.0f64;
            for (&a, &b) in hazard[i1].iter().zip(&hazard[i2]) {
                debug_assert!(a + b <= 1.0 + 1e-9);
                let n11 = p11 * (1.0 - a - b);
                let n10 = p10 * (1.0 - a) + p11 * b;
                let n01 = p01 * (1.0 - b) + p11 * a;
                p11 = n11;
                p10 = n10;
                p01 = n01;
            }
            let cov = p11 - safe_prob[i1][horizon] * safe_prob[i2][horizon];
            variance += 2.0 * cov;
        }
    }

    Ok(MatchMoments {
        expected_profit,
        success_prob,
        safe_prob,
        match_prob,
        expected_matches,
        variance_matches: variance.max(0.0),
    })
}
