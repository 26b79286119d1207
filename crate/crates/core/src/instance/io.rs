//! Instance file format: a single JSON document.
//!
//! ```json
//! {
//!   "offline": [{ "id": "a", "capacity": 1 }],
//!   "online": ["j1", "j2", "j3"],
//!   "prices": [1.0],
//!   "edges": [["a", "j1"], ["a", "j2"], ["a", "j3"]],
//!   "horizon": 2,
//!   "arrival": [[1.0, 0.0], [0.0, 0.9], [0.0, 0.1]],
//!   "accept_prob": [{ "edge": ["a", "j1"], "price_index": 1, "value": 1.0 }],
//!   "profit": [{ "edge": ["a", "j1"], "price_index": 1, "value": 1.0, "t": 2 }]
//! }
//! ```
//!
//! `arrival` is either a dense matrix (one row per online type, one column
//! per round) or a list of sparse triplets `{"online", "t", "q"}`; omitted
//! cells are zero. `accept_prob` and `profit` entries without a `"t"` apply
//! to all rounds; entries with `"t"` override the constant for that round.
//! Rounds and price indices are 1-based in files. The canonical form written
//! by [`to_canonical_json`] uses the dense arrival matrix and sorted
//! parameter entries, so serialize → parse → serialize is byte-identical.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Edge, Instance, OfflineType, OnlineType, ParamTable};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    offline: Vec<OfflineEntry>,
    online: Vec<String>,
    prices: Vec<f64>,
    edges: Vec<(String, String)>,
    horizon: usize,
    arrival: ArrivalFile,
    accept_prob: Vec<ParamEntry>,
    profit: Vec<ParamEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OfflineEntry {
    id: String,
    capacity: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ArrivalFile {
    Dense(Vec<Vec<f64>>),
    Sparse(Vec<ArrivalTriplet>),
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrivalTriplet {
    online: String,
    t: usize,
    q: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    edge: (String, String),
    price_index: usize,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<usize>,
}

/// Parses an instance from its JSON document. Structural problems (malformed
/// JSON, unknown ids, out-of-range rounds) are parse errors; domain rules are
/// left to [`super::validate`].
pub fn from_json(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;

    let mut offline_index = HashMap::new();
    for (i, o) in file.offline.iter().enumerate() {
        if offline_index.insert(o.id.clone(), i).is_some() {
            return Err(Error::Parse(format!("duplicate offline id '{}'", o.id)));
        }
    }
    let mut online_index = HashMap::new();
    for (j, id) in file.online.iter().enumerate() {
        if online_index.insert(id.clone(), j).is_some() {
            return Err(Error::Parse(format!("duplicate online id '{id}'")));
        }
    }

    let lookup_edge = |pair: &(String, String)| -> Result<Edge> {
        let offline = *offline_index
            .get(&pair.0)
            .ok_or_else(|| Error::Parse(format!("unknown offline id '{}'", pair.0)))?;
        let online = *online_index
            .get(&pair.1)
            .ok_or_else(|| Error::Parse(format!("unknown online id '{}'", pair.1)))?;
        Ok(Edge { offline, online })
    };

    let mut edges = Vec::with_capacity(file.edges.len());
    let mut edge_index = HashMap::new();
    for pair in &file.edges {
        let edge = lookup_edge(pair)?;
        edge_index
            .entry((edge.offline, edge.online))
            .or_insert(edges.len());
        edges.push(edge);
    }

    let arrival = match &file.arrival {
        ArrivalFile::Dense(rows) => {
            if rows.len() != file.online.len() {
                return Err(Error::Parse(format!(
                    "dense arrival matrix has {} rows, expected one per online type ({})",
                    rows.len(),
                    file.online.len()
                )));
            }
            let mut arrival = vec![vec![0.0; file.online.len()]; file.horizon];
            for (j, row) in rows.iter().enumerate() {
                if row.len() != file.horizon {
                    return Err(Error::Parse(format!(
                        "arrival row for '{}' has {} columns, expected horizon {}",
                        file.online[j],
                        row.len(),
                        file.horizon
                    )));
                }
                for (t, &q) in row.iter().enumerate() {
                    arrival[t][j] = q;
                }
            }
            arrival
        }
        ArrivalFile::Sparse(triplets) => {
            let mut arrival = vec![vec![0.0; file.online.len()]; file.horizon];
            for tr in triplets {
                let j = *online_index
                    .get(&tr.online)
                    .ok_or_else(|| Error::Parse(format!("unknown online id '{}'", tr.online)))?;
                if tr.t < 1 || tr.t > file.horizon {
                    return Err(Error::Parse(format!(
                        "arrival entry for '{}' has round {}, expected 1..={}",
                        tr.online, tr.t, file.horizon
                    )));
                }
                arrival[tr.t - 1][j] = tr.q;
            }
            arrival
        }
    };

    let parse_table = |entries: &[ParamEntry], name: &str| -> Result<ParamTable> {
        let mut table = ParamTable::new();
        for entry in entries {
            let edge = lookup_edge(&entry.edge)?;
            let e = *edge_index
                .get(&(edge.offline, edge.online))
                .ok_or_else(|| {
                    Error::Parse(format!(
                        "{name} entry references edge ('{}', '{}') which is not in the edge list",
                        entry.edge.0, entry.edge.1
                    ))
                })?;
            if entry.price_index < 1 {
                return Err(Error::Parse(format!(
                    "{name} entry has price_index 0; indices are 1-based"
                )));
            }
            let k = entry.price_index - 1;
            match entry.t {
                None => {
                    if table
                        .entries
                        .get(&(e, k))
                        .is_some_and(|v| v.default.is_some())
                    {
                        return Err(Error::Parse(format!(
                            "{name} has two constant entries for edge ('{}', '{}') price {}",
                            entry.edge.0, entry.edge.1, entry.price_index
                        )));
                    }
                    table.set_constant(e, k, entry.value);
                }
                Some(t) => {
                    if t < 1 || t > file.horizon {
                        return Err(Error::Parse(format!(
                            "{name} entry has round {t}, expected 1..={}",
                            file.horizon
                        )));
                    }
                    if table
                        .entries
                        .get(&(e, k))
                        .is_some_and(|v| v.per_round.contains_key(&(t - 1)))
                    {
                        return Err(Error::Parse(format!(
                            "{name} has two entries for edge ('{}', '{}') price {} round {t}",
                            entry.edge.0, entry.edge.1, entry.price_index
                        )));
                    }
                    table.set_at(e, k, t - 1, entry.value);
                }
            }
        }
        Ok(table)
    };

    let accept_prob = parse_table(&file.accept_prob, "accept_prob")?;
    let profit = parse_table(&file.profit, "profit")?;

    Ok(Instance::new(
        file.offline
            .into_iter()
            .map(|o| OfflineType {
                id: o.id,
                capacity: o.capacity,
            })
            .collect(),
        file.online
            .into_iter()
            .map(|id| OnlineType { id })
            .collect(),
        file.prices,
        edges,
        file.horizon,
        arrival,
        accept_prob,
        profit,
    ))
}

/// Serializes an instance to its canonical JSON document: dense arrival
/// matrix, parameter entries sorted by (edge, price, constant-then-round),
/// pretty-printed, trailing newline.
pub fn to_canonical_json(inst: &Instance) -> String {
    let edge_pair = |e: usize| {
        let edge = inst.edge(e);
        (
            inst.offline_types()[edge.offline].id.clone(),
            inst.online_types()[edge.online].id.clone(),
        )
    };

    let dump_table = |table: &ParamTable| {
        let mut out = Vec::new();
        for (&(e, k), value) in table.iter() {
            if let Some(v) = value.default {
                out.push(ParamEntry {
                    edge: edge_pair(e),
                    price_index: k + 1,
                    value: v,
                    t: None,
                });
            }
            for (&t, &v) in &value.per_round {
                out.push(ParamEntry {
                    edge: edge_pair(e),
                    price_index: k + 1,
                    value: v,
                    t: Some(t + 1),
                });
            }
        }
        out
    };

    let dense: Vec<Vec<f64>> = (0..inst.n_online())
        .map(|j| (0..inst.horizon()).map(|t| inst.q(j, t)).collect())
        .collect();

    let file = InstanceFile {
        offline: inst
            .offline_types()
            .iter()
            .map(|o| OfflineEntry {
                id: o.id.clone(),
                capacity: o.capacity,
            })
            .collect(),
        online: inst.online_types().iter().map(|o| o.id.clone()).collect(),
        prices: inst.prices().to_vec(),
        edges: (0..inst.n_edges()).map(edge_pair).collect(),
        horizon: inst.horizon(),
        arrival: ArrivalFile::Dense(dense),
        accept_prob: dump_table(inst.accept_prob_table()),
        profit: dump_table(inst.profit_table()),
    };

    let mut text = serde_json::to_string_pretty(&file).expect("instance serialization");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::super::generators::{
        build_reference_instance, random_instance, RandomDims, ReferenceSpec,
    };
    use super::*;
    use crate::instance::validate;

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let inst = build_reference_instance(&ReferenceSpec::AttCr { eps: 0.1 }).unwrap();
        let text = to_canonical_json(&inst);
        let parsed = from_json(&text).unwrap();
        assert_eq!(parsed, inst);
        assert_eq!(to_canonical_json(&parsed), text);
    }

    #[test]
    fn sparse_arrival_and_constants_parse() {
        let text = r#"{
            "offline": [{"id": "a", "capacity": 1}],
            "online": ["x", "y"],
            "prices": [1.0, 2.0],
            "edges": [["a", "x"], ["a", "y"]],
            "horizon": 2,
            "arrival": [
                {"online": "x", "t": 1, "q": 1.0},
                {"online": "y", "t": 2, "q": 1.0}
            ],
            "accept_prob": [
                {"edge": ["a", "x"], "price_index": 1, "value": 0.5},
                {"edge": ["a", "x"], "price_index": 2, "value": 0.5},
                {"edge": ["a", "y"], "price_index": 1, "value": 0.9},
                {"edge": ["a", "y"], "price_index": 2, "value": 0.9, "t": 2}
            ],
            "profit": [
                {"edge": ["a", "x"], "price_index": 1, "value": 1.0},
                {"edge": ["a", "x"], "price_index": 2, "value": 2.0},
                {"edge": ["a", "y"], "price_index": 1, "value": 3.0},
                {"edge": ["a", "y"], "price_index": 2, "value": 4.0}
            ]
        }"#;
        let inst = from_json(text).unwrap();
        assert_eq!(inst.q(0, 0), 1.0);
        assert_eq!(inst.q(1, 1), 1.0);
        assert_eq!(inst.q(1, 0), 0.0);
        let f = crate::instance::Assignment { edge: 1, price: 1 };
        // Round-specific entry, no constant: undefined at round 1, set at 2.
        assert_eq!(inst.p(f, 0), None);
        assert_eq!(inst.p(f, 1), Some(0.9));
        // Missing p at a round where y cannot arrive is not a violation.
        assert!(validate(&inst).ok(), "{}", validate(&inst));
    }

    #[test]
    fn parse_errors_are_reported() {
        assert!(matches!(from_json("{"), Err(Error::Parse(_))));
        let unknown_id = r#"{
            "offline": [{"id": "a", "capacity": 1}],
            "online": ["x"],
            "prices": [1.0],
            "edges": [["a", "nope"]],
            "horizon": 1,
            "arrival": [[1.0]],
            "accept_prob": [],
            "profit": []
        }"#;
        assert!(matches!(from_json(unknown_id), Err(Error::Parse(_))));
    }

    #[test]
    fn random_instances_round_trip() {
        for seed in [1u64, 7, 23] {
            let dims = RandomDims {
                offline: 3,
                online: 4,
                prices: 2,
                horizon: 3,
                density: 0.6,
            };
            let inst = random_instance(seed, &dims).unwrap();
            let text = to_canonical_json(&inst);
            let reparsed = from_json(&text).unwrap();
            assert_eq!(reparsed, inst);
            assert_eq!(to_canonical_json(&reparsed), text);
        }
    }
}
