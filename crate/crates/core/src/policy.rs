//! The two LP-based sampling policies.
//!
//! Both solve the benchmark LP offline and then, on the arrival of online
//! type `j` in round `t`, sample at most one assignment `f` with probability
//! proportional to the LP mass `x[f,t] / q[j,t]`:
//!
//! * the attenuated policy (`Att`, `gamma in [0, 1/2]`) multiplies by
//!   `gamma / beta[i,t]`, where the precomputed attenuation factor
//!   `beta[i,t] = 1 - gamma * sum_{t'<t} sum_{f in F_i} x[f,t'] * p[f,t']`
//!   equals the exact probability that offline agent `i` is still safe at
//!   `t`, making every assignment succeed with probability exactly
//!   `gamma * x[f,t] * p[f,t]`;
//! * the plain sampling policy (`Samp`, `gamma in [0, 1]`) multiplies by
//!   `gamma` and accepts the weaker per-agent safety guarantee.
//!
//! Sampling never looks at the remaining capacities: a sampled assignment
//! whose offline agent is already exhausted is rejected at the selection
//! step, and the round is recorded so empirical safety is measurable.

use crate::error::{Error, Result};
use crate::instance::{Assignment, Instance};
use crate::lp::{self, LpSolution};

/// Which sampling rule to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Att,
    Samp,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Att => "att",
            PolicyKind::Samp => "samp",
        }
    }
}

/// A validated (kind, gamma) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    kind: PolicyKind,
    gamma: f64,
}

impl PolicyConfig {
    /// The attenuated policy requires `gamma <= 1/2` so that the attenuation
    /// factors stay at or above `gamma` and sampling masses stay at or below
    /// one; the plain policy allows the full `[0, 1]`.
    pub fn new(kind: PolicyKind, gamma: f64) -> Result<Self> {
        let max = match kind {
            PolicyKind::Att => 0.5,
            PolicyKind::Samp => 1.0,
        };
        if !gamma.is_finite() || !(0.0..=max).contains(&gamma) {
            return Err(Error::parameter(format!(
                "gamma for the {} policy must lie in [0, {max}], got {gamma}",
                kind.name()
            )));
        }
        Ok(PolicyConfig { kind, gamma })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The guaranteed fraction of the LP optimum this policy earns in
    /// expectation.
    pub fn cr_bound(&self) -> f64 {
        match self.kind {
            PolicyKind::Att => self.gamma,
            PolicyKind::Samp => self.gamma * (1.0 - self.gamma),
        }
    }

    /// Upper bound on the variance of the total match count, given the total
    /// capacity `b`. The effective per-agent match probability is capped at
    /// `min(gamma, 1/2)` for both policies.
    pub fn variance_bound(&self, total_capacity: u64) -> f64 {
        let g = self.gamma.min(0.5);
        g * (1.0 - g) * total_capacity as f64
    }
}

/// Precomputed attenuation factors `beta[i][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationTable {
    beta: Vec<Vec<f64>>,
}

impl AttenuationTable {
    pub fn beta(&self, offline: usize, t: usize) -> f64 {
        self.beta[offline][t]
    }

    pub fn min_beta(&self) -> f64 {
        self.beta
            .iter()
            .flat_map(|row| row.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Computes the attenuation table in one forward pass over rounds, using
/// running per-agent accumulators of the LP's expected capacity use.
pub fn precompute_attenuation(
    inst: &Instance,
    sol: &LpSolution,
    gamma: f64,
) -> Result<AttenuationTable> {
    if !(0.0..=0.5).contains(&gamma) || !gamma.is_finite() {
        return Err(Error::parameter(format!(
            "attenuation requires gamma in [0, 1/2], got {gamma}"
        )));
    }
    if !inst.is_unit_capacity() {
        return Err(Error::contract(
            "attenuation factors require a unit-capacity instance",
        ));
    }
    let audit = lp::check_feasibility(inst, sol.entries(), lp::DEFAULT_TOL);
    if !audit.ok() {
        return Err(Error::contract(format!(
            "attenuation factors require an LP-feasible solution: {audit}"
        )));
    }

    let usage = lp::capacity_usage(inst, sol);
    let horizon = inst.horizon();
    let mut beta = vec![vec![1.0f64; horizon]; inst.n_offline()];
    for (i, row) in usage.iter().enumerate() {
        let mut used = 0.0;
        for t in 0..horizon {
            beta[i][t] = 1.0 - gamma * used;
            used += row[t];
        }
    }
    Ok(AttenuationTable { beta })
}

/// The per-round sampling distribution over assignments of the arriving
/// online type, in deterministic (edge, price) order, plus the residual
/// probability of sampling nothing.
#[derive(Debug, Clone)]
pub struct SamplingDistribution {
    pub entries: Vec<(Assignment, f64)>,
    pub reject: f64,
}

impl SamplingDistribution {
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn prob_of(&self, f: Assignment) -> f64 {
        self.entries
            .iter()
            .find(|(g, _)| *g == f)
            .map_or(0.0, |(_, p)| *p)
    }
}

/// A ready-to-run policy: instance, LP solution, configuration, and (for the
/// attenuated kind) the attenuation table. Immutable and shareable across
/// replications.
#[derive(Debug, Clone)]
pub struct Policy<'a> {
    inst: &'a Instance,
    sol: &'a LpSolution,
    config: PolicyConfig,
    attenuation: Option<AttenuationTable>,
    /// `columns[t][j]` = indices into the solution's column list.
    columns: Vec<Vec<Vec<usize>>>,
}

impl<'a> Policy<'a> {
    pub fn new(inst: &'a Instance, sol: &'a LpSolution, config: PolicyConfig) -> Result<Self> {
        if !inst.is_unit_capacity() {
            return Err(Error::contract("policies run on unit-capacity instances"));
        }
        let attenuation = match config.kind {
            PolicyKind::Att => Some(precompute_attenuation(inst, sol, config.gamma)?),
            PolicyKind::Samp => {
                let audit = lp::check_feasibility(inst, sol.entries(), lp::DEFAULT_TOL);
                if !audit.ok() {
                    return Err(Error::contract(format!(
                        "policies require an LP-feasible solution: {audit}"
                    )));
                }
                None
            }
        };

        let mut columns = vec![vec![Vec::new(); inst.n_online()]; inst.horizon()];
        for (idx, key) in sol.columns.iter().enumerate() {
            let j = inst.edge(key.f.edge).online;
            columns[key.t][j].push(idx);
        }

        Ok(Policy {
            inst,
            sol,
            config,
            attenuation,
            columns,
        })
    }

    pub fn instance(&self) -> &Instance {
        self.inst
    }

    pub fn solution(&self) -> &LpSolution {
        self.sol
    }

    pub fn config(&self) -> PolicyConfig {
        self.config
    }

    pub fn attenuation(&self) -> Option<&AttenuationTable> {
        self.attenuation.as_ref()
    }

    /// Sampling distribution for online type `j` arriving in round `t`.
    /// Requires `q[j,t] > 0`; callers never query non-arriving types. The
    /// distribution does not depend on the remaining capacities.
    pub fn sampling_distribution(&self, j: usize, t: usize) -> Result<SamplingDistribution> {
        let q = self.inst.q(j, t);
        if q <= 0.0 {
            return Err(Error::contract(format!(
                "online type {j} has zero arrival mass in round {}",
                t + 1
            )));
        }
        let mut entries = Vec::new();
        let mut total = 0.0f64;
        for &col in &self.columns[t][j] {
            let x = self.sol.x[col];
            if x <= 0.0 {
                continue;
            }
            let f = self.sol.columns[col].f;
            let prob = match self.config.kind {
                PolicyKind::Att => {
                    let beta = self
                        .attenuation
                        .as_ref()
                        .expect("att table")
                        .beta(self.inst.edge(f.edge).offline, t);
                    (x / q) * (self.config.gamma / beta)
                }
                PolicyKind::Samp => self.config.gamma * x / q,
            };
            if prob > 0.0 {
                entries.push((f, prob));
                total += prob;
            }
        }
        debug_assert!(total <= 1.0 + 1e-9, "sampling mass {total} exceeds one");
        Ok(SamplingDistribution {
            entries,
            reject: (1.0 - total).max(0.0),
        })
    }

    /// Applies one round's resolved randomness to the state. `sampled` is the
    /// assignment drawn from [`Self::sampling_distribution`] (or `None` for
    /// the reject mass); `accept` is the arriving agent's acceptance draw and
    /// is only meaningful when something was sampled.
    pub fn step(
        &self,
        state: &mut PolicyState,
        t: usize,
        j: usize,
        sampled: Option<Assignment>,
        accept: bool,
    ) -> Result<RoundOutcome> {
        if state.round != t {
            return Err(Error::contract(format!(
                "state is at round {}, but step was called for round {}",
                state.round + 1,
                t + 1
            )));
        }
        let mut outcome = RoundOutcome {
            t,
            arrival: j,
            sampled,
            safe: false,
            accepted: false,
            profit: 0.0,
        };
        if let Some(f) = sampled {
            if f.edge >= self.inst.n_edges() || self.inst.edge(f.edge).online != j {
                return Err(Error::contract(format!(
                    "sampled assignment does not involve arriving online type {j}"
                )));
            }
            if f.price >= self.inst.n_prices() {
                return Err(Error::contract(
                    "sampled assignment has an unknown price index",
                ));
            }
            let i = self.inst.edge(f.edge).offline;
            if state.is_safe(i) {
                outcome.safe = true;
                outcome.accepted = accept;
                if accept {
                    state.occupy(i);
                    outcome.profit = self.inst.w(f, t).ok_or_else(|| {
                        Error::contract("undefined profit for sampled assignment")
                    })?;
                }
            }
            // An unsafe agent leads to rejection at the selection step; the
            // round is still recorded so empirical safety is measurable.
        }
        state.round += 1;
        Ok(outcome)
    }
}

/// Remaining capacities over one run. Owned by a single trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyState {
    safe: Vec<bool>,
    round: usize,
}

impl PolicyState {
    pub fn new(n_offline: usize) -> Self {
        PolicyState {
            safe: vec![true; n_offline],
            round: 0,
        }
    }

    pub fn is_safe(&self, offline: usize) -> bool {
        self.safe[offline]
    }

    pub fn occupy(&mut self, offline: usize) {
        debug_assert!(self.safe[offline]);
        self.safe[offline] = false;
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn n_safe(&self) -> usize {
        self.safe.iter().filter(|&&s| s).count()
    }
}

/// What happened in one round: the arrival, the sampled assignment (if any),
/// whether its offline agent was safe when sampled, the acceptance draw, and
/// the profit earned. Profit is positive only when sampled, safe, and
/// accepted all hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutcome {
    pub t: usize,
    pub arrival: usize,
    pub sampled: Option<Assignment>,
    pub safe: bool,
    pub accepted: bool,
    pub profit: f64,
}

impl RoundOutcome {
    pub fn matched(&self) -> bool {
        self.sampled.is_some() && self.safe && self.accepted
    }
}
