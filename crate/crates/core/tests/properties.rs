//! Property tests over seeded random instances.

use gigmatch_core::instance::{
    expand_capacities, from_json, random_instance, to_canonical_json, validate, Instance,
    OfflineType, RandomDims,
};
use gigmatch_core::lp::{build_lp, check_feasibility, solve_lp, DEFAULT_TOL};
use gigmatch_core::oracle::{exact_policy_eval, opt_off, opt_on, Budget, OffMode};
use gigmatch_core::policy::{precompute_attenuation, Policy, PolicyConfig, PolicyKind};
use proptest::prelude::*;

fn dims_strategy() -> impl Strategy<Value = RandomDims> {
    (1usize..=4, 1usize..=4, 1usize..=2, 1usize..=4, 0.3f64..=1.0).prop_map(
        |(offline, online, prices, horizon, density)| RandomDims {
            offline,
            online,
            prices,
            horizon,
            density,
        },
    )
}

/// Clone an instance with capacities bumped per offline type.
fn with_capacities(inst: &Instance, caps: &[u32]) -> Instance {
    Instance::new(
        inst.offline_types()
            .iter()
            .zip(caps)
            .map(|(o, &c)| OfflineType {
                id: o.id.clone(),
                capacity: c,
            })
            .collect(),
        inst.online_types().to_vec(),
        inst.prices().to_vec(),
        inst.edges().to_vec(),
        inst.horizon(),
        (0..inst.horizon())
            .map(|t| inst.arrival_row(t).to_vec())
            .collect(),
        inst.accept_prob_table().clone(),
        inst.profit_table().clone(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_instances_validate_and_round_trip(seed in any::<u64>(), dims in dims_strategy()) {
        let inst = random_instance(seed, &dims).unwrap();
        prop_assert!(validate(&inst).ok());
        let text = to_canonical_json(&inst);
        let reparsed = from_json(&text).unwrap();
        prop_assert_eq!(&reparsed, &inst);
        prop_assert_eq!(to_canonical_json(&reparsed), text);
    }

    #[test]
    fn sampling_mass_never_exceeds_one(
        seed in any::<u64>(),
        dims in dims_strategy(),
        gamma in 0.0f64..=1.0,
    ) {
        let inst = random_instance(seed, &dims).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        for (kind, g) in [(PolicyKind::Att, gamma.min(0.5)), (PolicyKind::Samp, gamma)] {
            let policy = Policy::new(&inst, &sol, PolicyConfig::new(kind, g).unwrap()).unwrap();
            for t in 0..inst.horizon() {
                for (j, _) in inst.arrival_support(t) {
                    let dist = policy.sampling_distribution(j, t).unwrap();
                    let total = dist.total_mass();
                    prop_assert!(total <= 1.0 + 1e-12, "mass {} at ({}, {})", total, j, t);
                    prop_assert!(dist.reject >= 0.0);
                    for (_, p) in &dist.entries {
                        prop_assert!(*p >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn attenuation_is_monotone_and_bounded(
        seed in any::<u64>(),
        dims in dims_strategy(),
        gamma in 0.0f64..=0.5,
    ) {
        let inst = random_instance(seed, &dims).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let table = precompute_attenuation(&inst, &sol, gamma).unwrap();
        for i in 0..inst.n_offline() {
            prop_assert_eq!(table.beta(i, 0), 1.0);
            for t in 1..inst.horizon() {
                prop_assert!(table.beta(i, t) <= table.beta(i, t - 1) + 1e-15);
            }
        }
        prop_assert!(table.min_beta() >= gamma - 1e-9);
        prop_assert!(table.min_beta() >= 1.0 - gamma - 1e-9);
    }

    #[test]
    fn lp_solutions_are_feasible(seed in any::<u64>(), dims in dims_strategy()) {
        let inst = random_instance(seed, &dims).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        prop_assert!(check_feasibility(&inst, sol.entries(), DEFAULT_TOL).ok());
        let recomputed: f64 = sol
            .entries()
            .map(|(key, x)| x * inst.p(key.f, key.t).unwrap() * inst.w(key.f, key.t).unwrap())
            .sum();
        prop_assert!((recomputed - sol.objective).abs() <= 1e-9 * recomputed.abs().max(1.0));
    }

    #[test]
    fn capacity_expansion_preserves_the_lp_optimum(
        seed in any::<u64>(),
        caps in proptest::collection::vec(1u32..=3, 3),
    ) {
        let dims = RandomDims { offline: 3, online: 3, prices: 1, horizon: 3, density: 0.8 };
        let base = random_instance(seed, &dims).unwrap();
        let multi = with_capacities(&base, &caps);
        let expanded = expand_capacities(&multi).unwrap();
        prop_assert_eq!(expanded.instance.total_capacity(), multi.total_capacity());

        // Reference value: unit-capacity LP is exact; solving the instance
        // where each type keeps capacity 1 bounds nothing in general, so
        // compare against the expanded LP solved twice under permuted copies
        // is pointless. Instead verify against the aggregated-capacity LP
        // solved directly with the simplex core.
        let sol = solve_lp(&build_lp(&expanded.instance).unwrap(), DEFAULT_TOL).unwrap();

        let mut columns = Vec::new();
        let mut objective = Vec::new();
        for t in 0..multi.horizon() {
            for j in 0..multi.n_online() {
                if multi.q(j, t) <= 0.0 {
                    continue;
                }
                for f in multi.assignments_of_online(j) {
                    columns.push((f, t));
                    objective.push(multi.p(f, t).unwrap() * multi.w(f, t).unwrap());
                }
            }
        }
        let mut constraints = Vec::new();
        for t in 0..multi.horizon() {
            for j in 0..multi.n_online() {
                let cols: Vec<(usize, f64)> = columns
                    .iter()
                    .enumerate()
                    .filter(|(_, (f, ct))| *ct == t && multi.edge(f.edge).online == j)
                    .map(|(idx, _)| (idx, 1.0))
                    .collect();
                if !cols.is_empty() {
                    constraints.push(gigmatch_core::simplex::Constraint {
                        coeffs: cols,
                        rhs: multi.q(j, t),
                    });
                }
            }
        }
        for i in 0..multi.n_offline() {
            let coeffs: Vec<(usize, f64)> = columns
                .iter()
                .enumerate()
                .filter(|(_, (f, _))| multi.edge(f.edge).offline == i)
                .map(|(idx, (f, t))| (idx, multi.p(*f, *t).unwrap()))
                .collect();
            constraints.push(gigmatch_core::simplex::Constraint {
                coeffs,
                rhs: multi.offline_types()[i].capacity as f64,
            });
        }
        let agg = gigmatch_core::simplex::maximize(
            &objective,
            &constraints,
            &gigmatch_core::simplex::SimplexOptions::default(),
        )
        .unwrap();
        prop_assert!(
            (sol.objective - agg.objective).abs() <= 1e-7,
            "expanded {} vs aggregated {}",
            sol.objective,
            agg.objective
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn att_identities_hold_exactly(seed in any::<u64>(), gamma in 0.0f64..=0.5) {
        let dims = RandomDims { offline: 4, online: 3, prices: 2, horizon: 4, density: 0.6 };
        let inst = random_instance(seed, &dims).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let config = PolicyConfig::new(PolicyKind::Att, gamma).unwrap();
        let eval = exact_policy_eval(&inst, &sol, config, &Budget::default()).unwrap();
        let table = precompute_attenuation(&inst, &sol, gamma).unwrap();
        // Safety equals the attenuation factor, and every assignment
        // succeeds with probability gamma * x * p.
        for i in 0..inst.n_offline() {
            for t in 0..inst.horizon() {
                prop_assert!((eval.safe_prob[i][t] - table.beta(i, t)).abs() <= 1e-9);
            }
        }
        for (key, x) in sol.entries() {
            let expected = gamma * x * inst.p(key.f, key.t).unwrap();
            let got = eval.success_prob.get(&(key.f, key.t)).copied().unwrap_or(0.0);
            prop_assert!((got - expected).abs() <= 1e-9);
        }
        prop_assert!((eval.expected_profit - gamma * sol.objective).abs() <= 1e-9);
    }

    #[test]
    fn samp_safety_and_cr_lower_bounds(seed in any::<u64>(), gamma in 0.0f64..=1.0) {
        let dims = RandomDims { offline: 4, online: 3, prices: 2, horizon: 4, density: 0.6 };
        let inst = random_instance(seed, &dims).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let config = PolicyConfig::new(PolicyKind::Samp, gamma).unwrap();
        let eval = exact_policy_eval(&inst, &sol, config, &Budget::default()).unwrap();
        for i in 0..inst.n_offline() {
            for t in 0..=inst.horizon() {
                prop_assert!(eval.safe_prob[i][t] >= 1.0 - gamma - 1e-9);
            }
        }
        prop_assert!(
            eval.expected_profit >= gamma * (1.0 - gamma) * sol.objective - 1e-7
        );
        let bound = config.variance_bound(inst.total_capacity());
        prop_assert!(eval.variance_matches <= bound + 1e-7);
    }

    #[test]
    fn benchmark_ordering(seed in any::<u64>()) {
        let dims = RandomDims { offline: 3, online: 3, prices: 2, horizon: 3, density: 0.7 };
        let inst = random_instance(seed, &dims).unwrap();
        let sol = solve_lp(&build_lp(&inst).unwrap(), DEFAULT_TOL).unwrap();
        let budget = Budget::default();
        let off = opt_off(&inst, OffMode::Exact, &budget).unwrap().value;
        let on = opt_on(&inst, &budget).unwrap().value;
        prop_assert!(sol.objective >= off - 1e-6);
        prop_assert!(off >= on - 1e-6);
        prop_assert!(on >= -1e-12);
    }
}
