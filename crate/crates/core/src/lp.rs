//! The benchmark linear program.
//!
//! One variable per (assignment, round) pair whose online type can arrive in
//! that round; the objective weights each variable by acceptance probability
//! times profit. Arrival rows cap the per-(online type, round) selection mass
//! by the arrival probability; capacity rows cap each offline type's expected
//! number of accepted matches by its (unit) capacity. The optimal value upper
//! bounds the clairvoyant optimum, which makes it the reference point for
//! competitive-ratio bookkeeping.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::instance::{Assignment, Instance, ValidationReport, Violation};
use crate::simplex::{self, Constraint, SimplexOptions, SimplexStatus};

/// Default feasibility tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Desk-scale guard on problem size; see [`build_lp_with_limit`].
pub const DEFAULT_MAX_COLUMNS: usize = 5000;

/// Identifies one LP variable: an assignment at a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnKey {
    pub f: Assignment,
    pub t: usize,
}

#[derive(Debug, Clone)]
pub struct ArrivalRow {
    pub online: usize,
    pub t: usize,
    pub rhs: f64,
    /// Column indices with coefficient one.
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CapacityRow {
    pub offline: usize,
    pub rhs: f64,
    /// (column index, acceptance probability) pairs.
    pub coeffs: Vec<(usize, f64)>,
}

/// The assembled benchmark LP for a unit-capacity instance.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub columns: Vec<ColumnKey>,
    /// Objective coefficient per column: acceptance probability times profit.
    pub objective: Vec<f64>,
    pub arrival_rows: Vec<ArrivalRow>,
    pub capacity_rows: Vec<CapacityRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    UnboundedGuard,
}

/// A solution to the benchmark LP. `x` is aligned with the problem's column
/// order, so the solution is self-contained for downstream consumers.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub columns: Vec<ColumnKey>,
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
}

impl LpSolution {
    pub fn entries(&self) -> impl Iterator<Item = (ColumnKey, f64)> + '_ {
        self.columns.iter().copied().zip(self.x.iter().copied())
    }

    /// Selection mass of assignment `f` at round `t` (zero for absent columns).
    pub fn value(&self, f: Assignment, t: usize) -> f64 {
        self.columns
            .iter()
            .position(|c| c.f == f && c.t == t)
            .map_or(0.0, |idx| self.x[idx])
    }
}

/// Builds the benchmark LP with the default column cap.
pub fn build_lp(inst: &Instance) -> Result<LpProblem> {
    build_lp_with_limit(inst, DEFAULT_MAX_COLUMNS)
}

/// Builds the benchmark LP. Columns are ordered round-major, then by edge
/// order, then by price index; rounds with zero arrival mass for an online
/// type contribute no columns (the arrival row would force them to zero).
pub fn build_lp_with_limit(inst: &Instance, max_columns: usize) -> Result<LpProblem> {
    if !inst.is_unit_capacity() {
        return Err(Error::contract(
            "the benchmark LP requires unit capacities; run expand_capacities first",
        ));
    }

    let mut columns = Vec::new();
    let mut objective = Vec::new();
    let mut arrival_rows = Vec::new();
    // Column indices per offline type, with acceptance probabilities.
    let mut capacity_coeffs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.n_offline()];

    for t in 0..inst.horizon() {
        for j in 0..inst.n_online() {
            let q = inst.q(j, t);
            if q <= 0.0 {
                continue;
            }
            let mut row_columns = Vec::new();
            for f in inst.assignments_of_online(j) {
                let p = inst
                    .p(f, t)
                    .ok_or_else(|| Error::contract("instance has undefined acceptance entries"))?;
                let w = inst
                    .w(f, t)
                    .ok_or_else(|| Error::contract("instance has undefined profit entries"))?;
                let idx = columns.len();
                columns.push(ColumnKey { f, t });
                objective.push(p * w);
                row_columns.push(idx);
                capacity_coeffs[inst.edge(f.edge).offline].push((idx, p));
                if columns.len() > max_columns {
                    return Err(Error::size_budget(format!(
                        "benchmark LP exceeds {max_columns} columns; raise the limit to solve \
                         instances of this size"
                    )));
                }
            }
            if !row_columns.is_empty() {
                arrival_rows.push(ArrivalRow {
                    online: j,
                    t,
                    rhs: q,
                    columns: row_columns,
                });
            }
        }
    }

    let capacity_rows = capacity_coeffs
        .into_iter()
        .enumerate()
        .map(|(i, coeffs)| CapacityRow {
            offline: i,
            rhs: 1.0,
            coeffs,
        })
        .collect();

    Ok(LpProblem {
        columns,
        objective,
        arrival_rows,
        capacity_rows,
    })
}

/// Solves the benchmark LP to optimality and audits the result: the returned
/// solution is primal-feasible within `tol` and its objective matches the
/// recomputed inner product within `tol` (scaled by the objective magnitude).
pub fn solve_lp(prob: &LpProblem, tol: f64) -> Result<LpSolution> {
    let constraints: Vec<Constraint> = prob
        .arrival_rows
        .iter()
        .map(|row| Constraint {
            coeffs: row.columns.iter().map(|&c| (c, 1.0)).collect(),
            rhs: row.rhs,
        })
        .chain(prob.capacity_rows.iter().map(|row| Constraint {
            coeffs: row.coeffs.clone(),
            rhs: row.rhs,
        }))
        .collect();

    let result = simplex::maximize(&prob.objective, &constraints, &SimplexOptions::default())?;
    if result.status == SimplexStatus::UnboundedGuard {
        // The benchmark LP is bounded by construction (x <= q); reaching this
        // indicates a solver defect, but surface it as a status for audit.
        return Ok(LpSolution {
            columns: prob.columns.clone(),
            x: result.x,
            objective: f64::INFINITY,
            status: LpStatus::UnboundedGuard,
        });
    }

    let solution = LpSolution {
        columns: prob.columns.clone(),
        x: result.x,
        objective: result.objective,
        status: LpStatus::Optimal,
    };

    let audit = audit_problem(prob, &solution, tol);
    if !audit.ok() {
        return Err(Error::Solver {
            message: format!("solution failed its feasibility audit: {audit}"),
            iterations: result.iterations,
        });
    }
    Ok(solution)
}

fn audit_problem(prob: &LpProblem, sol: &LpSolution, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |rule: &str, location: String, message: String| {
        report.violations.push(Violation {
            rule: rule.into(),
            location,
            message,
        });
    };

    for (idx, &v) in sol.x.iter().enumerate() {
        if v < -tol {
            push("negativity", format!("column {idx}"), format!("x = {v}"));
        }
    }
    for row in &prob.arrival_rows {
        let sum: f64 = row.columns.iter().map(|&c| sol.x[c]).sum();
        if sum > row.rhs + tol {
            push(
                "arrival-cap",
                format!("online {} round {}", row.online, row.t + 1),
                format!(
                    "selection mass {sum} exceeds arrival probability {}",
                    row.rhs
                ),
            );
        }
    }
    for row in &prob.capacity_rows {
        let sum: f64 = row.coeffs.iter().map(|&(c, p)| sol.x[c] * p).sum();
        if sum > row.rhs + tol {
            push(
                "capacity-cap",
                format!("offline {}", row.offline),
                format!("expected matches {sum} exceed capacity {}", row.rhs),
            );
        }
    }
    let recomputed: f64 = prob.objective.iter().zip(&sol.x).map(|(c, x)| c * x).sum();
    let scale = 1.0f64.max(recomputed.abs());
    if (recomputed - sol.objective).abs() > tol * scale {
        push(
            "objective-identity",
            "objective".into(),
            format!("reported {} vs recomputed {recomputed}", sol.objective),
        );
    }
    report
}

/// Audits an arbitrary candidate `x` against the instance's constraints:
/// per-(online, round) selection mass at most the arrival probability,
/// per-offline expected matches at most one, and non-negativity.
pub fn check_feasibility<X>(inst: &Instance, x: X, tol: f64) -> ValidationReport
where
    X: IntoIterator<Item = (ColumnKey, f64)>,
{
    let mut report = ValidationReport::default();
    let mut push = |rule: &str, location: String, message: String| {
        report.violations.push(Violation {
            rule: rule.into(),
            location,
            message,
        });
    };

    let mut arrival_mass = std::collections::BTreeMap::new();
    let mut capacity_mass = vec![0.0f64; inst.n_offline()];

    for (key, value) in x {
        if key.f.edge >= inst.n_edges() || key.f.price >= inst.n_prices() || key.t >= inst.horizon()
        {
            push(
                "unknown-assignment",
                format!(
                    "edge {} price {} round {}",
                    key.f.edge,
                    key.f.price + 1,
                    key.t + 1
                ),
                "entry does not correspond to an assignment of this instance".into(),
            );
            continue;
        }
        if value < -tol {
            push(
                "negativity",
                format!(
                    "edge {} price {} round {}",
                    key.f.edge,
                    key.f.price + 1,
                    key.t + 1
                ),
                format!("x = {value}"),
            );
        }
        let edge = inst.edge(key.f.edge);
        *arrival_mass.entry((edge.online, key.t)).or_insert(0.0) += value;
        let p = inst.p(key.f, key.t).unwrap_or(1.0);
        capacity_mass[edge.offline] += value * p;
    }

    for ((j, t), mass) in arrival_mass {
        let q = inst.q(j, t);
        if mass > q + tol {
            push(
                "arrival-cap",
                format!("online '{}' round {}", inst.online_types()[j].id, t + 1),
                format!("selection mass {mass} exceeds arrival probability {q}"),
            );
        }
    }
    for (i, mass) in capacity_mass.iter().enumerate() {
        if *mass > 1.0 + tol {
            push(
                "capacity-cap",
                format!("offline '{}'", inst.offline_types()[i].id),
                format!("expected matches {mass} exceed unit capacity"),
            );
        }
    }
    report
}

/// Per-(offline type, round) expected capacity use `sum_f x[f,t] * p[f,t]`
/// under a solution; the running prefix sums of these drive the attenuation
/// factors.
pub fn capacity_usage(inst: &Instance, sol: &LpSolution) -> Vec<Vec<f64>> {
    let mut usage = vec![vec![0.0f64; inst.horizon()]; inst.n_offline()];
    for (key, value) in sol.entries() {
        let edge = inst.edge(key.f.edge);
        let p = inst.p(key.f, key.t).unwrap_or(0.0);
        usage[edge.offline][key.t] += value * p;
    }
    usage
}

/// Renders the problem in LP text form (CPLEX-style) for external
/// cross-checks. Variables are `x0..xN`; a comment block maps each back to
/// its (edge, price, round) triple.
pub fn dump_lp(prob: &LpProblem, inst: &Instance) -> String {
    let mut out = String::new();
    out.push_str("\\ benchmark LP\n");
    for (idx, col) in prob.columns.iter().enumerate() {
        let edge = inst.edge(col.f.edge);
        let _ = writeln!(
            out,
            "\\ x{idx} = edge('{}','{}') price {} round {}",
            inst.offline_types()[edge.offline].id,
            inst.online_types()[edge.online].id,
            col.f.price + 1,
            col.t + 1
        );
    }
    out.push_str("Maximize\n obj:");
    for (idx, c) in prob.objective.iter().enumerate() {
        let _ = write!(out, " {} {} x{idx}", if idx == 0 { "" } else { "+" }, c);
    }
    out.push_str("\nSubject To\n");
    for row in &prob.arrival_rows {
        let _ = write!(out, " arr_{}_t{}:", row.online, row.t + 1);
        for (n, &c) in row.columns.iter().enumerate() {
            let _ = write!(out, " {}x{c}", if n == 0 { "" } else { "+ " });
        }
        let _ = writeln!(out, " <= {}", row.rhs);
    }
    for row in &prob.capacity_rows {
        let _ = write!(out, " cap_{}:", row.offline);
        for (n, &(c, p)) in row.coeffs.iter().enumerate() {
            let _ = write!(out, " {}{p} x{c}", if n == 0 { "" } else { "+ " });
        }
        let _ = writeln!(out, " <= {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for idx in 0..prob.columns.len() {
        let _ = writeln!(out, " 0 <= x{idx}");
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{
        build_reference_instance, expand_capacities, Edge, OfflineType, OnlineType, ParamTable,
        ReferenceSpec,
    };
    use approx::assert_abs_diff_eq;

    fn fig1(eps: f64) -> Instance {
        build_reference_instance(&ReferenceSpec::AttCr { eps }).unwrap()
    }

    fn single_edge(w: f64) -> Instance {
        let mut p = ParamTable::new();
        let mut wt = ParamTable::new();
        p.set_constant(0, 0, 1.0);
        wt.set_constant(0, 0, w);
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
            wt,
        )
    }

    #[test]
    fn fig1_structure() {
        let prob = build_lp(&fig1(0.1)).unwrap();
        // Columns: (f1, t=1), (f2, t=2), (f3, t=2) in that order.
        assert_eq!(prob.columns.len(), 3);
        assert_eq!(
            prob.columns[0],
            ColumnKey {
                f: Assignment { edge: 0, price: 0 },
                t: 0
            }
        );
        assert_eq!(
            prob.columns[1],
            ColumnKey {
                f: Assignment { edge: 1, price: 0 },
                t: 1
            }
        );
        assert_eq!(
            prob.columns[2],
            ColumnKey {
                f: Assignment { edge: 2, price: 0 },
                t: 1
            }
        );
        assert_eq!(prob.arrival_rows.len(), 3);
        assert_eq!(prob.capacity_rows.len(), 1);
        assert_abs_diff_eq!(prob.arrival_rows[1].rhs, 0.9);
    }

    #[test]
    fn disjoint_structure() {
        let inst = build_reference_instance(&ReferenceSpec::AttVar { m: 3 }).unwrap();
        let prob = build_lp(&inst).unwrap();
        assert_eq!(prob.columns.len(), 3);
        assert_eq!(prob.capacity_rows.len(), 3);
        assert_eq!(prob.arrival_rows.len(), 3);
    }

    #[test]
    fn single_edge_structure_and_solution() {
        let prob = build_lp(&single_edge(2.0)).unwrap();
        assert_eq!(prob.columns.len(), 1);
        assert_eq!(prob.arrival_rows.len() + prob.capacity_rows.len(), 2);
        let sol = solve_lp(&prob, DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!(sol.objective, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_non_unit_capacities() {
        let mut inst = single_edge(1.0);
        inst = Instance::new(
            vec![OfflineType {
                id: "a".into(),
                capacity: 2,
            }],
            inst.online_types().to_vec(),
            inst.prices().to_vec(),
            inst.edges().to_vec(),
            inst.horizon(),
            vec![vec![1.0]],
            inst.accept_prob_table().clone(),
            inst.profit_table().clone(),
        );
        assert!(matches!(build_lp(&inst), Err(Error::Contract(_))));
    }

    #[test]
    fn fig1_objective() {
        let prob = build_lp(&fig1(0.1)).unwrap();
        let sol = solve_lp(&prob, DEFAULT_TOL).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 1.9, epsilon = 1e-9);
        assert!(check_feasibility(&fig1(0.1), sol.entries(), DEFAULT_TOL).ok());
    }

    #[test]
    fn samp_cr_objective() {
        let inst = build_reference_instance(&ReferenceSpec::SampCr { eps: 0.01 }).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!(sol.objective, 100.99, epsilon = 1e-7);
    }

    #[test]
    fn scaled_solution_violates_constraints() {
        let inst = fig1(0.1);
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let scaled = sol.entries().map(|(k, v)| (k, v * 1.5));
        let report = check_feasibility(&inst, scaled, DEFAULT_TOL);
        assert!(!report.ok());
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == "arrival-cap" || v.rule == "capacity-cap"));
    }

    #[test]
    fn zero_solution_is_feasible() {
        let inst = fig1(0.1);
        let report = check_feasibility(&inst, std::iter::empty(), DEFAULT_TOL);
        assert!(report.ok());
    }

    #[test]
    fn capacity_expansion_preserves_objective() {
        // One offline type of capacity 2 vs its expanded form: the optimum
        // must agree with the aggregated-capacity LP solved directly.
        let mut p = ParamTable::new();
        let mut w = ParamTable::new();
        for e in 0..2 {
            p.set_constant(e, 0, 0.8);
            w.set_constant(e, 0, 1.0 + e as f64);
        }
        let inst = Instance::new(
            vec![OfflineType {
                id: "a".into(),
                capacity: 2,
            }],
            vec![OnlineType { id: "x".into() }, OnlineType { id: "y".into() }],
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
            ],
            4,
            vec![vec![0.5, 0.5]; 4],
            p,
            w,
        );
        let expanded = expand_capacities(&inst).unwrap();
        let sol = solve_lp(&build_lp(&expanded.instance).unwrap(), DEFAULT_TOL).unwrap();

        // Aggregated form built by hand: same columns, capacity rhs 2.
        let prob = build_lp(&expanded.instance).unwrap();
        let mut agg_objective = Vec::new();
        let mut agg_columns: Vec<ColumnKey> = Vec::new();
        for t in 0..inst.horizon() {
            for j in 0..inst.n_online() {
                if inst.q(j, t) <= 0.0 {
                    continue;
                }
                for f in inst.assignments_of_online(j) {
                    agg_columns.push(ColumnKey { f, t });
                    agg_objective.push(inst.p(f, t).unwrap() * inst.w(f, t).unwrap());
                }
            }
        }
        let mut constraints = Vec::new();
        for t in 0..inst.horizon() {
            for j in 0..inst.n_online() {
                let cols: Vec<(usize, f64)> = agg_columns
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.t == t && inst.edge(c.f.edge).online == j)
                    .map(|(idx, _)| (idx, 1.0))
                    .collect();
                if !cols.is_empty() {
                    constraints.push(Constraint {
                        coeffs: cols,
                        rhs: inst.q(j, t),
                    });
                }
            }
        }
        let cap: Vec<(usize, f64)> = agg_columns
            .iter()
            .enumerate()
            .map(|(idx, c)| (idx, inst.p(c.f, c.t).unwrap()))
            .collect();
        constraints.push(Constraint {
            coeffs: cap,
            rhs: 2.0,
        });
        let agg =
            simplex::maximize(&agg_objective, &constraints, &SimplexOptions::default()).unwrap();

        assert_abs_diff_eq!(sol.objective, agg.objective, epsilon = 1e-7);
        assert!(prob.columns.len() > agg_columns.len()); // expansion duplicates columns
    }

    #[test]
    fn dump_contains_all_rows() {
        let inst = fig1(0.1);
        let prob = build_lp(&inst).unwrap();
        let text = dump_lp(&prob, &inst);
        assert!(text.contains("Maximize"));
        assert_eq!(text.matches("arr_").count(), 3);
        assert_eq!(text.matches("cap_").count(), 1);
    }

    #[test]
    fn column_cap_is_enforced() {
        let inst = fig1(0.1);
        assert!(matches!(
            build_lp_with_limit(&inst, 2),
            Err(Error::SizeBudget { .. })
        ));
    }
}
