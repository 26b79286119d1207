//! The input model: a bipartite graph between offline agent types (with
//! capacities) and online agent types, a ground set of price levels, a round
//! horizon, per-round arrival distributions, and per-assignment acceptance
//! probabilities and profits.
//!
//! An assignment is an edge plus a price index; the set of assignments is the
//! implicit product of edges and price levels and is never materialized.
//! Instances are immutable after construction and safe to share across
//! threads.

mod generators;
mod io;

pub use generators::{
    build_reference_instance, from_prophet, random_instance, RandomDims, ReferenceSpec,
};
pub use io::{from_json, to_canonical_json};

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Tolerance for per-round arrival masses summing to one.
pub const ARRIVAL_MASS_TOL: f64 = 1e-9;

/// An offline (static) agent type with a matching capacity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfflineType {
    pub id: String,
    pub capacity: u32,
}

/// An online (dynamic) agent type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OnlineType {
    pub id: String,
}

/// An edge of the bipartite graph, by type indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub offline: usize,
    pub online: usize,
}

/// An assignment: an edge together with a price index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment {
    pub edge: usize,
    pub price: usize,
}

/// Per-assignment parameter with an optional constant-over-rounds shorthand
/// and per-round overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamValue {
    pub default: Option<f64>,
    pub per_round: BTreeMap<usize, f64>,
}

impl ParamValue {
    pub fn constant(v: f64) -> Self {
        ParamValue {
            default: Some(v),
            per_round: BTreeMap::new(),
        }
    }

    pub fn at(&self, t: usize) -> Option<f64> {
        self.per_round.get(&t).copied().or(self.default)
    }
}

/// Sparse table mapping assignments to per-round parameter values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamTable {
    entries: BTreeMap<(usize, usize), ParamValue>,
}

impl ParamTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_constant(&mut self, edge: usize, price: usize, value: f64) {
        self.entries.entry((edge, price)).or_default().default = Some(value);
    }

    pub fn set_at(&mut self, edge: usize, price: usize, t: usize, value: f64) {
        self.entries
            .entry((edge, price))
            .or_default()
            .per_round
            .insert(t, value);
    }

    pub fn get(&self, edge: usize, price: usize, t: usize) -> Option<f64> {
        self.entries.get(&(edge, price)).and_then(|v| v.at(t))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &ParamValue)> {
        self.entries.iter()
    }
}

/// A full problem instance. Rounds are indexed `0..horizon` internally;
/// user-facing formats number them from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    offline: Vec<OfflineType>,
    online: Vec<OnlineType>,
    prices: Vec<f64>,
    edges: Vec<Edge>,
    horizon: usize,
    /// `arrival[t][j]` = probability that online type `j` arrives in round `t`.
    arrival: Vec<Vec<f64>>,
    accept_prob: ParamTable,
    profit: ParamTable,
    /// Edge indices adjacent to each online type, in edge order.
    edges_by_online: Vec<Vec<usize>>,
    /// Edge indices adjacent to each offline type, in edge order.
    edges_by_offline: Vec<Vec<usize>>,
}

impl Instance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        offline: Vec<OfflineType>,
        online: Vec<OnlineType>,
        prices: Vec<f64>,
        edges: Vec<Edge>,
        horizon: usize,
        arrival: Vec<Vec<f64>>,
        accept_prob: ParamTable,
        profit: ParamTable,
    ) -> Self {
        let mut edges_by_online = vec![Vec::new(); online.len()];
        let mut edges_by_offline = vec![Vec::new(); offline.len()];
        for (e, edge) in edges.iter().enumerate() {
            // Out-of-range endpoints are reported by validate(); skip them
            // here so adjacency stays well-formed.
            if edge.online < online.len() && edge.offline < offline.len() {
                edges_by_online[edge.online].push(e);
                edges_by_offline[edge.offline].push(e);
            }
        }
        Instance {
            offline,
            online,
            prices,
            edges,
            horizon,
            arrival,
            accept_prob,
            profit,
            edges_by_online,
            edges_by_offline,
        }
    }

    pub fn n_offline(&self) -> usize {
        self.offline.len()
    }

    pub fn n_online(&self) -> usize {
        self.online.len()
    }

    pub fn n_prices(&self) -> usize {
        self.prices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn offline_types(&self) -> &[OfflineType] {
        &self.offline
    }

    pub fn online_types(&self) -> &[OnlineType] {
        &self.online
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    /// Probability that online type `j` arrives in round `t` (0-based).
    pub fn q(&self, j: usize, t: usize) -> f64 {
        self.arrival[t][j]
    }

    pub fn arrival_row(&self, t: usize) -> &[f64] {
        &self.arrival[t]
    }

    /// Acceptance probability of assignment `f` in round `t`, if defined.
    pub fn p(&self, f: Assignment, t: usize) -> Option<f64> {
        self.accept_prob.get(f.edge, f.price, t)
    }

    /// Profit of assignment `f` in round `t`, if defined.
    pub fn w(&self, f: Assignment, t: usize) -> Option<f64> {
        self.profit.get(f.edge, f.price, t)
    }

    pub fn accept_prob_table(&self) -> &ParamTable {
        &self.accept_prob
    }

    pub fn profit_table(&self) -> &ParamTable {
        &self.profit
    }

    pub fn edges_of_online(&self, j: usize) -> &[usize] {
        &self.edges_by_online[j]
    }

    pub fn edges_of_offline(&self, i: usize) -> &[usize] {
        &self.edges_by_offline[i]
    }

    /// Assignments involving online type `j`, in deterministic
    /// (edge order, then price index) order.
    pub fn assignments_of_online(&self, j: usize) -> impl Iterator<Item = Assignment> + '_ {
        let prices = self.prices.len();
        self.edges_by_online[j]
            .iter()
            .flat_map(move |&e| (0..prices).map(move |k| Assignment { edge: e, price: k }))
    }

    /// Assignments involving offline type `i`, in deterministic order.
    pub fn assignments_of_offline(&self, i: usize) -> impl Iterator<Item = Assignment> + '_ {
        let prices = self.prices.len();
        self.edges_by_offline[i]
            .iter()
            .flat_map(move |&e| (0..prices).map(move |k| Assignment { edge: e, price: k }))
    }

    /// Total matching capacity over all offline types.
    pub fn total_capacity(&self) -> u64 {
        self.offline.iter().map(|o| o.capacity as u64).sum()
    }

    pub fn is_unit_capacity(&self) -> bool {
        self.offline.iter().all(|o| o.capacity == 1)
    }

    /// Online types with positive arrival mass in round `t`.
    pub fn arrival_support(&self, t: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.arrival[t]
            .iter()
            .enumerate()
            .filter(|(_, &q)| q > 0.0)
            .map(|(j, &q)| (j, q))
    }
}

/// One broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    pub rule: String,
    pub location: String,
    pub message: String,
}

/// Result of validating a candidate instance. Violations are data, not
/// failures: `ok` holds exactly when the list is empty, and serialized
/// reports carry both fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl serde::Serialize for ValidationReport {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut state = serializer.serialize_struct("ValidationReport", 2)?;
        state.serialize_field("ok", &self.ok())?;
        state.serialize_field("violations", &self.violations)?;
        state.end()
    }
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, rule: &str, location: String, message: String) {
        self.violations.push(Violation {
            rule: rule.to_string(),
            location,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return write!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "[{}] {}: {}", v.rule, v.location, v.message)?;
        }
        Ok(())
    }
}

/// Checks every instance invariant and reports all violations found.
pub fn validate(inst: &Instance) -> ValidationReport {
    let mut report = ValidationReport::default();

    if inst.horizon == 0 {
        report.push(
            "horizon-positive",
            "horizon".into(),
            "horizon must be at least 1".into(),
        );
    }
    if inst.prices.is_empty() {
        report.push(
            "prices-empty",
            "prices".into(),
            "at least one price level is required".into(),
        );
    }
    for (k, &a) in inst.prices.iter().enumerate() {
        if !a.is_finite() || a < 0.0 {
            report.push(
                "price-domain",
                format!("price[{}]", k + 1),
                format!("price level must be a non-negative real, got {a}"),
            );
        }
    }

    for (idx, o) in inst.offline.iter().enumerate() {
        if o.capacity < 1 {
            report.push(
                "capacity-range",
                format!("offline '{}'", o.id),
                "capacity must be a positive integer".into(),
            );
        }
        if inst
            .offline
            .iter()
            .skip(idx + 1)
            .any(|other| other.id == o.id)
        {
            report.push(
                "duplicate-id",
                format!("offline '{}'", o.id),
                "offline type ids must be unique".into(),
            );
        }
    }
    for (idx, o) in inst.online.iter().enumerate() {
        if inst
            .online
            .iter()
            .skip(idx + 1)
            .any(|other| other.id == o.id)
        {
            report.push(
                "duplicate-id",
                format!("online '{}'", o.id),
                "online type ids must be unique".into(),
            );
        }
    }

    let mut seen_edges = std::collections::HashSet::new();
    for (e, edge) in inst.edges.iter().enumerate() {
        if edge.offline >= inst.offline.len() || edge.online >= inst.online.len() {
            report.push(
                "edge-ref",
                format!("edge[{e}]"),
                format!(
                    "edge ({}, {}) references an unknown type index",
                    edge.offline, edge.online
                ),
            );
            continue;
        }
        if !seen_edges.insert((edge.offline, edge.online)) {
            report.push(
                "duplicate-edge",
                format!("edge[{e}]"),
                format!(
                    "edge ('{}', '{}') appears more than once",
                    inst.offline[edge.offline].id, inst.online[edge.online].id
                ),
            );
        }
    }

    // Arrival matrix: shape, entry domain, and per-round total mass.
    if inst.arrival.len() != inst.horizon {
        report.push(
            "arrival-shape",
            "arrival".into(),
            format!(
                "expected {} rounds of arrival mass, got {}",
                inst.horizon,
                inst.arrival.len()
            ),
        );
    }
    for (t, row) in inst.arrival.iter().enumerate() {
        if row.len() != inst.online.len() {
            report.push(
                "arrival-shape",
                format!("round {}", t + 1),
                format!("expected {} entries, got {}", inst.online.len(), row.len()),
            );
            continue;
        }
        let mut mass = 0.0;
        for (j, &q) in row.iter().enumerate() {
            if !q.is_finite() || !(0.0..=1.0).contains(&q) {
                report.push(
                    "arrival-range",
                    format!("q(online '{}', round {})", inst.online[j].id, t + 1),
                    format!("arrival probability must lie in [0,1], got {q}"),
                );
            }
            mass += q;
        }
        if (mass - 1.0).abs() > ARRIVAL_MASS_TOL {
            report.push(
                "arrival-mass",
                format!("round {}", t + 1),
                format!("arrival probabilities must sum to 1, got {mass}"),
            );
        }
    }

    // Parameter tables: every entry must reference a real assignment, and
    // every assignment must carry an acceptance probability in (0,1] and a
    // non-negative profit at each round in which its online type can arrive.
    for (table, name) in [(&inst.accept_prob, "accept_prob"), (&inst.profit, "profit")] {
        for (&(e, k), _) in table.iter() {
            if e >= inst.edges.len() {
                report.push(
                    "edge-ref",
                    format!("{name} entry"),
                    format!("entry references unknown edge index {e}"),
                );
            }
            if k >= inst.prices.len() {
                report.push(
                    "price-ref",
                    format!("{name} entry"),
                    format!(
                        "entry references price index {} of {}",
                        k + 1,
                        inst.prices.len()
                    ),
                );
            }
        }
    }

    for (e, edge) in inst.edges.iter().enumerate() {
        if edge.offline >= inst.offline.len() || edge.online >= inst.online.len() {
            continue;
        }
        for k in 0..inst.prices.len() {
            let f = Assignment { edge: e, price: k };
            for t in 0..inst.horizon.min(inst.arrival.len()) {
                if inst.arrival[t].len() != inst.online.len() || inst.arrival[t][edge.online] <= 0.0
                {
                    continue;
                }
                let loc = format!(
                    "assignment ('{}','{}',k={}) round {}",
                    inst.offline[edge.offline].id,
                    inst.online[edge.online].id,
                    k + 1,
                    t + 1
                );
                match inst.p(f, t) {
                    None => report.push(
                        "param-missing",
                        loc.clone(),
                        "no acceptance probability defined".into(),
                    ),
                    Some(p) if !p.is_finite() || p <= 0.0 || p > 1.0 => report.push(
                        "accept-prob-range",
                        loc.clone(),
                        format!("acceptance probability must lie in (0,1], got {p}"),
                    ),
                    _ => {}
                }
                match inst.w(f, t) {
                    None => report.push("param-missing", loc.clone(), "no profit defined".into()),
                    Some(w) if !w.is_finite() || w < 0.0 => report.push(
                        "negative-profit",
                        loc,
                        format!("profit must be non-negative, got {w}"),
                    ),
                    _ => {}
                }
            }
        }
    }

    report
}

/// Maps offline types of an expanded instance back to the originals.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginMap {
    /// `origin[i]` = index of the original offline type behind unit copy `i`.
    origin: Vec<usize>,
    n_original: usize,
    original_ids: Vec<String>,
}

impl OriginMap {
    pub fn identity(ids: Vec<String>) -> Self {
        let n = ids.len();
        OriginMap {
            origin: (0..n).collect(),
            n_original: n,
            original_ids: ids,
        }
    }

    pub fn origin_of(&self, copy: usize) -> usize {
        self.origin[copy]
    }

    pub fn n_original(&self) -> usize {
        self.n_original
    }

    pub fn original_ids(&self) -> &[String] {
        &self.original_ids
    }

    /// Sums a per-copy tally into a per-original-type tally.
    pub fn aggregate(&self, per_copy: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; self.n_original];
        for (copy, &v) in per_copy.iter().enumerate() {
            out[self.origin[copy]] += v;
        }
        out
    }
}

/// A unit-capacity instance together with the mapping back to the original
/// offline types.
#[derive(Debug, Clone, PartialEq)]
pub struct Expanded {
    pub instance: Instance,
    pub origin: OriginMap,
}

/// Rewrites an instance so that every offline type has unit capacity, by
/// replacing each type of capacity `b` with `b` copies that inherit all of
/// its edges, acceptance probabilities, and profits. Types that already have
/// unit capacity are kept as-is (same id); copies of a type `x` with `b > 1`
/// are named `x#1 .. x#b`, in that order.
pub fn expand_capacities(inst: &Instance) -> Result<Expanded> {
    let report = validate(inst);
    if !report.ok() {
        return Err(Error::Validation(report));
    }

    if inst.is_unit_capacity() {
        let ids = inst.offline.iter().map(|o| o.id.clone()).collect();
        return Ok(Expanded {
            instance: inst.clone(),
            origin: OriginMap::identity(ids),
        });
    }

    let mut offline = Vec::new();
    let mut origin = Vec::new();
    let mut copies_of = Vec::with_capacity(inst.offline.len());
    for (i, o) in inst.offline.iter().enumerate() {
        let mut copies = Vec::new();
        if o.capacity == 1 {
            copies.push(offline.len());
            offline.push(OfflineType {
                id: o.id.clone(),
                capacity: 1,
            });
            origin.push(i);
        } else {
            for c in 1..=o.capacity {
                copies.push(offline.len());
                offline.push(OfflineType {
                    id: format!("{}#{c}", o.id),
                    capacity: 1,
                });
                origin.push(i);
            }
        }
        copies_of.push(copies);
    }

    let mut seen = std::collections::HashSet::new();
    for o in &offline {
        if !seen.insert(o.id.as_str()) {
            return Err(Error::contract(format!(
                "capacity expansion produced a duplicate offline id '{}'; rename the \
                 conflicting original type",
                o.id
            )));
        }
    }

    // Duplicate each edge (and its parameter entries) once per copy, keeping
    // the original edge order as the outer order so LP column ordering stays
    // reproducible.
    let mut edges = Vec::new();
    let mut accept_prob = ParamTable::new();
    let mut profit = ParamTable::new();
    for (e, edge) in inst.edges.iter().enumerate() {
        for &copy in &copies_of[edge.offline] {
            let new_e = edges.len();
            edges.push(Edge {
                offline: copy,
                online: edge.online,
            });
            for k in 0..inst.prices.len() {
                if let Some(v) = inst.accept_prob.entries.get(&(e, k)) {
                    if let Some(d) = v.default {
                        accept_prob.set_constant(new_e, k, d);
                    }
                    for (&t, &pv) in &v.per_round {
                        accept_prob.set_at(new_e, k, t, pv);
                    }
                }
                if let Some(v) = inst.profit.entries.get(&(e, k)) {
                    if let Some(d) = v.default {
                        profit.set_constant(new_e, k, d);
                    }
                    for (&t, &wv) in &v.per_round {
                        profit.set_at(new_e, k, t, wv);
                    }
                }
            }
        }
    }

    let n_original = inst.offline.len();
    let original_ids = inst.offline.iter().map(|o| o.id.clone()).collect();
    let expanded = Instance::new(
        offline,
        inst.online.clone(),
        inst.prices.clone(),
        edges,
        inst.horizon,
        inst.arrival.clone(),
        accept_prob,
        profit,
    );
    debug_assert!(validate(&expanded).ok());
    Ok(Expanded {
        instance: expanded,
        origin: OriginMap {
            origin,
            n_original,
            original_ids,
        },
    })
}
