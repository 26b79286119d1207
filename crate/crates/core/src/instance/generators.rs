//! Built-in instance constructions: the four worst-case examples used by the
//! tightness checks, the single-item selection reduction, and seeded random
//! instances for property tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Edge, Instance, OfflineType, OnlineType, ParamTable};
use crate::error::{Error, Result};

/// Selects one of the four built-in reference instances.
///
/// * `AttCr` — one unit-capacity offline agent, three online types, two
///   rounds. The first round surely brings a type worth 1; the second brings
///   a worthless type with probability `1-eps` and a type worth `1/eps` with
///   probability `eps`. Pins the competitive-ratio behaviour of the
///   attenuated policy and the `1/(2-eps)` online-vs-clairvoyant barrier.
/// * `SampCr` — same graph, but the rare type is worth `1/eps^2`, which pins
///   the non-attenuated policy's `gamma*(1-gamma)` ratio as `eps -> 0`.
/// * `AttVar` — `m` disjoint edges, one sure arrival per round, unit profits
///   and acceptance; the match-count variance of the attenuated policy is
///   exactly `gamma*(1-gamma)*m` here.
/// * `SampVar` — the disjoint-edge graph with acceptance probability
///   `min(1, (1/2)/gamma)` everywhere, which caps the per-agent match
///   probability at `min(1/2, gamma)` under the non-attenuated policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceSpec {
    AttCr { eps: f64 },
    SampCr { eps: f64 },
    AttVar { m: usize },
    SampVar { m: usize, gamma: f64 },
}

impl ReferenceSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ReferenceSpec::AttCr { .. } => "att-cr",
            ReferenceSpec::SampCr { .. } => "samp-cr",
            ReferenceSpec::AttVar { .. } => "att-var",
            ReferenceSpec::SampVar { .. } => "samp-var",
        }
    }
}

/// Builds the reference instance described by `spec`.
pub fn build_reference_instance(spec: &ReferenceSpec) -> Result<Instance> {
    match *spec {
        ReferenceSpec::AttCr { eps } => {
            check_eps(eps)?;
            Ok(two_round_star(eps, 1.0 / eps))
        }
        ReferenceSpec::SampCr { eps } => {
            check_eps(eps)?;
            Ok(two_round_star(eps, 1.0 / (eps * eps)))
        }
        ReferenceSpec::AttVar { m } => {
            check_m(m)?;
            Ok(disjoint_edges(m, 1.0))
        }
        ReferenceSpec::SampVar { m, gamma } => {
            check_m(m)?;
            if !gamma.is_finite() || !(0.0..=1.0).contains(&gamma) {
                return Err(Error::parameter(format!(
                    "samp-var requires gamma in [0,1], got {gamma}"
                )));
            }
            let p = if gamma == 0.0 {
                1.0
            } else {
                (0.5 / gamma).min(1.0)
            };
            Ok(disjoint_edges(m, p))
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !eps.is_finite() || eps <= 0.0 || eps >= 1.0 {
        return Err(Error::parameter(format!(
            "eps must lie in (0,1), got {eps}"
        )));
    }
    Ok(())
}

fn check_m(m: usize) -> Result<()> {
    if m < 1 {
        return Err(Error::parameter("m must be at least 1"));
    }
    Ok(())
}

/// One offline agent, three online types, `T = 2`, single price, `p = 1`.
/// Profits are `(1, 0, high)`; arrivals are `(1,0,0)` then `(0, 1-eps, eps)`.
fn two_round_star(eps: f64, high: f64) -> Instance {
    let mut p = ParamTable::new();
    let mut w = ParamTable::new();
    for (e, profit) in [1.0, 0.0, high].into_iter().enumerate() {
        p.set_constant(e, 0, 1.0);
        w.set_constant(e, 0, profit);
    }
    Instance::new(
        vec![OfflineType {
            id: "a".into(),
            capacity: 1,
        }],
        vec![
            OnlineType { id: "j1".into() },
            OnlineType { id: "j2".into() },
            OnlineType { id: "j3".into() },
        ],
        vec![1.0],
        vec![
            Edge {
                offline: 0,
                online: 0,
            },
            Edge {
                offline: 0,
                online: 1,
            },
            Edge {
                offline: 0,
                online: 2,
            },
        ],
        2,
        vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0 - eps, eps]],
        p,
        w,
    )
}

/// `m` disjoint unit-capacity edges; in round `t` (1-based) online type `t`
/// arrives surely. Unit profits, acceptance probability `p` everywhere.
fn disjoint_edges(m: usize, p: f64) -> Instance {
    let mut pt = ParamTable::new();
    let mut wt = ParamTable::new();
    for e in 0..m {
        pt.set_constant(e, 0, p);
        wt.set_constant(e, 0, 1.0);
    }
    let mut arrival = vec![vec![0.0; m]; m];
    for (t, row) in arrival.iter_mut().enumerate() {
        row[t] = 1.0;
    }
    Instance::new(
        (1..=m)
            .map(|i| OfflineType {
                id: format!("i{i}"),
                capacity: 1,
            })
            .collect(),
        (1..=m)
            .map(|j| OnlineType {
                id: format!("j{j}"),
            })
            .collect(),
        vec![1.0],
        (0..m)
            .map(|e| Edge {
                offline: e,
                online: e,
            })
            .collect(),
        m,
        arrival,
        pt,
        wt,
    )
}

/// Casts a single-item selection problem as an instance: one unit-capacity
/// offline agent, one price level, an edge to every online type, sure
/// acceptance, and a round-independent value `values[j]` for picking type `j`.
/// `arrival[t][j]` gives the per-round arrival distribution.
pub fn from_prophet(values: &[f64], arrival: &[Vec<f64>]) -> Result<Instance> {
    if values.is_empty() {
        return Err(Error::parameter("at least one value is required"));
    }
    for (j, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::parameter(format!(
                "value[{j}] must be non-negative, got {v}"
            )));
        }
    }
    if arrival.is_empty() {
        return Err(Error::parameter("arrival must cover at least one round"));
    }
    for (t, row) in arrival.iter().enumerate() {
        if row.len() != values.len() {
            return Err(Error::parameter(format!(
                "arrival row {} has {} entries, expected {}",
                t + 1,
                row.len(),
                values.len()
            )));
        }
        let mass: f64 = row.iter().sum();
        if row
            .iter()
            .any(|q| !q.is_finite() || !(0.0..=1.0).contains(q))
            || (mass - 1.0).abs() > super::ARRIVAL_MASS_TOL
        {
            return Err(Error::parameter(format!(
                "arrival row {} is not a probability distribution (mass {mass})",
                t + 1
            )));
        }
    }

    let mut p = ParamTable::new();
    let mut w = ParamTable::new();
    for (e, &v) in values.iter().enumerate() {
        p.set_constant(e, 0, 1.0);
        w.set_constant(e, 0, v);
    }
    Ok(Instance::new(
        vec![OfflineType {
            id: "item".into(),
            capacity: 1,
        }],
        (1..=values.len())
            .map(|j| OnlineType {
                id: format!("j{j}"),
            })
            .collect(),
        vec![1.0],
        (0..values.len())
            .map(|e| Edge {
                offline: 0,
                online: e,
            })
            .collect(),
        arrival.len(),
        arrival.to_vec(),
        p,
        w,
    ))
}

/// Dimensions for [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomDims {
    pub offline: usize,
    pub online: usize,
    pub prices: usize,
    pub horizon: usize,
    /// Probability that each (offline, online) pair carries an edge.
    pub density: f64,
}

/// Generates a valid unit-capacity instance, deterministically for a fixed
/// seed: normalized arrival columns, acceptance probabilities in (0,1],
/// profits in the unit interval, all drawn per round.
pub fn random_instance(seed: u64, dims: &RandomDims) -> Result<Instance> {
    if dims.offline == 0 || dims.online == 0 || dims.prices == 0 || dims.horizon == 0 {
        return Err(Error::parameter("all dimensions must be positive"));
    }
    if !(dims.density > 0.0 && dims.density <= 1.0) {
        return Err(Error::parameter(format!(
            "density must lie in (0,1], got {}",
            dims.density
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let offline: Vec<_> = (1..=dims.offline)
        .map(|i| OfflineType {
            id: format!("i{i}"),
            capacity: 1,
        })
        .collect();
    let online: Vec<_> = (1..=dims.online)
        .map(|j| OnlineType {
            id: format!("j{j}"),
        })
        .collect();
    let prices: Vec<f64> = (0..dims.prices).map(|_| rng.gen_range(0.1..10.0)).collect();

    let mut edges = Vec::new();
    for i in 0..dims.offline {
        for j in 0..dims.online {
            if rng.gen::<f64>() < dims.density {
                edges.push(Edge {
                    offline: i,
                    online: j,
                });
            }
        }
    }

    let mut arrival = Vec::with_capacity(dims.horizon);
    for _ in 0..dims.horizon {
        let raw: Vec<f64> = (0..dims.online).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        arrival.push(raw.into_iter().map(|v| v / total).collect::<Vec<_>>());
    }

    let mut p = ParamTable::new();
    let mut w = ParamTable::new();
    for e in 0..edges.len() {
        for k in 0..dims.prices {
            for t in 0..dims.horizon {
                // 1 - u with u in [0,1) keeps acceptance inside (0,1].
                p.set_at(e, k, t, 1.0 - rng.gen::<f64>());
                w.set_at(e, k, t, rng.gen::<f64>());
            }
        }
    }

    let inst = Instance::new(offline, online, prices, edges, dims.horizon, arrival, p, w);
    debug_assert!(super::validate(&inst).ok());
    Ok(inst)
}
