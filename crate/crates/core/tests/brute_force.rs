//! Cross-checks the exact evaluators against a brute-force enumeration of
//! every randomness path (arrival, sampled assignment, acceptance draw).
//!
//! The enumerator is deliberately independent of the library's policy and
//! oracle code: sampling probabilities are recomputed here from the LP
//! solution and the policy formulas, and the state is a plain safe-flag
//! vector walked depth-first.

use std::collections::BTreeMap;

use gigmatch_core::instance::{
    build_reference_instance, random_instance, Assignment, Instance, RandomDims, ReferenceSpec,
};
use gigmatch_core::lp::{build_lp, solve_lp, LpSolution, DEFAULT_TOL};
use gigmatch_core::oracle::{exact_policy_eval, match_moments, Budget};
use gigmatch_core::policy::{PolicyConfig, PolicyKind};

struct BruteEval {
    expected_profit: f64,
    expected_matches: f64,
    variance_matches: f64,
    /// alpha[i][t] = probability i is safe at the start of round t (t = T is
    /// the end of the horizon).
    alpha: Vec<Vec<f64>>,
    /// E[chi] per (assignment, round).
    chi: BTreeMap<(Assignment, usize), f64>,
}

/// Per-(assignment, round) sampling probabilities recomputed from scratch.
fn sampling_probs(
    inst: &Instance,
    sol: &LpSolution,
    kind: PolicyKind,
    gamma: f64,
) -> Vec<Vec<Vec<(Assignment, f64)>>> {
    // Attenuation factors straight from the definition.
    let mut used = vec![vec![0.0f64; inst.horizon() + 1]; inst.n_offline()];
    for (key, x) in sol.entries() {
        let i = inst.edge(key.f.edge).offline;
        used[i][key.t + 1] += x * inst.p(key.f, key.t).unwrap();
    }
    let mut beta = vec![vec![1.0f64; inst.horizon()]; inst.n_offline()];
    for i in 0..inst.n_offline() {
        let mut acc = 0.0;
        for t in 0..inst.horizon() {
            acc += used[i][t];
            beta[i][t] = 1.0 - gamma * acc;
        }
    }

    let mut probs = vec![vec![Vec::new(); inst.n_online()]; inst.horizon()];
    for (key, x) in sol.entries() {
        if x <= 0.0 {
            continue;
        }
        let edge = inst.edge(key.f.edge);
        let q = inst.q(edge.online, key.t);
        let prob = match kind {
            PolicyKind::Att => (x / q) * (gamma / beta[edge.offline][key.t]),
            PolicyKind::Samp => gamma * x / q,
        };
        probs[key.t][edge.online].push((key.f, prob));
    }
    probs
}

fn brute_force(inst: &Instance, sol: &LpSolution, kind: PolicyKind, gamma: f64) -> BruteEval {
    let probs = sampling_probs(inst, sol, kind, gamma);
    let n = inst.n_offline();
    let mut eval = BruteEval {
        expected_profit: 0.0,
        expected_matches: 0.0,
        variance_matches: 0.0,
        alpha: vec![vec![0.0; inst.horizon() + 1]; n],
        chi: BTreeMap::new(),
    };
    let mut e_h2 = 0.0;

    // Depth-first walk over rounds. Subtree probabilities always sum to the
    // prefix probability, so safety tallies can be booked at node entry.
    #[allow(clippy::too_many_arguments)]
    fn walk(
        inst: &Instance,
        probs: &[Vec<Vec<(Assignment, f64)>>],
        t: usize,
        prefix: f64,
        safe: &mut Vec<bool>,
        profit: f64,
        matches: u64,
        eval: &mut BruteEval,
        e_h2: &mut f64,
    ) {
        for (i, &s) in safe.iter().enumerate() {
            if s {
                eval.alpha[i][t] += prefix;
            }
        }
        if t == inst.horizon() {
            eval.expected_profit += prefix * profit;
            eval.expected_matches += prefix * matches as f64;
            *e_h2 += prefix * (matches * matches) as f64;
            return;
        }
        for (j, q) in inst.arrival_support(t) {
            let arrival = prefix * q;
            let mut reject_mass = 1.0;
            for &(f, p_sample) in &probs[t][j] {
                reject_mass -= p_sample;
                let sampled = arrival * p_sample;
                if sampled == 0.0 {
                    continue;
                }
                let i = inst.edge(f.edge).offline;
                if safe[i] {
                    let p = inst.p(f, t).unwrap();
                    let w = inst.w(f, t).unwrap();
                    if sampled * p > 0.0 {
                        *eval.chi.entry((f, t)).or_insert(0.0) += sampled * p;
                        safe[i] = false;
                        walk(
                            inst,
                            probs,
                            t + 1,
                            sampled * p,
                            safe,
                            profit + w,
                            matches + 1,
                            eval,
                            e_h2,
                        );
                        safe[i] = true;
                    }
                    if sampled * (1.0 - p) > 0.0 {
                        walk(
                            inst,
                            probs,
                            t + 1,
                            sampled * (1.0 - p),
                            safe,
                            profit,
                            matches,
                            eval,
                            e_h2,
                        );
                    }
                } else {
                    walk(
                        inst,
                        probs,
                        t + 1,
                        sampled,
                        safe,
                        profit,
                        matches,
                        eval,
                        e_h2,
                    );
                }
            }
            if arrival * reject_mass > 0.0 {
                walk(
                    inst,
                    probs,
                    t + 1,
                    arrival * reject_mass,
                    safe,
                    profit,
                    matches,
                    eval,
                    e_h2,
                );
            }
        }
    }

    let mut safe = vec![true; n];
    walk(
        inst, &probs, 0, 1.0, &mut safe, 0.0, 0, &mut eval, &mut e_h2,
    );
    eval.variance_matches = e_h2 - eval.expected_matches * eval.expected_matches;
    eval
}

fn check(inst: &Instance, kind: PolicyKind, gamma: f64) {
    let sol = solve_lp(&build_lp(inst).unwrap(), DEFAULT_TOL).unwrap();
    let config = PolicyConfig::new(kind, gamma).unwrap();
    let brute = brute_force(inst, &sol, kind, gamma);
    let eval = exact_policy_eval(inst, &sol, config, &Budget::default()).unwrap();
    let chain = match_moments(inst, &sol, config).unwrap();

    let tol = 1e-10;
    for (label, got) in [
        ("recursion", &eval.expected_profit),
        ("chain", &chain.expected_profit),
    ] {
        assert!(
            (got - brute.expected_profit).abs() < tol,
            "{label} profit {got} vs brute {}",
            brute.expected_profit
        );
    }
    assert!((eval.expected_matches - brute.expected_matches).abs() < tol);
    assert!((chain.expected_matches - brute.expected_matches).abs() < tol);
    assert!(
        (eval.variance_matches - brute.variance_matches).abs() < tol,
        "recursion var {} vs brute {}",
        eval.variance_matches,
        brute.variance_matches
    );
    assert!((chain.variance_matches - brute.variance_matches).abs() < tol);

    for i in 0..inst.n_offline() {
        for t in 0..=inst.horizon() {
            assert!(
                (eval.safe_prob[i][t] - brute.alpha[i][t]).abs() < tol,
                "alpha[{i}][{t}]: recursion {} vs brute {}",
                eval.safe_prob[i][t],
                brute.alpha[i][t]
            );
        }
    }
    for (key, &chi) in &brute.chi {
        let got = eval.success_prob.get(key).copied().unwrap_or(0.0);
        assert!(
            (got - chi).abs() < tol,
            "chi {key:?}: recursion {got} vs brute {chi}"
        );
    }
}

#[test]
fn reference_instances_agree_with_brute_force() {
    let fig1 = build_reference_instance(&ReferenceSpec::AttCr { eps: 0.1 }).unwrap();
    check(&fig1, PolicyKind::Att, 0.5);
    check(&fig1, PolicyKind::Att, 0.3);
    check(&fig1, PolicyKind::Samp, 0.8);

    let fig2 = build_reference_instance(&ReferenceSpec::AttVar { m: 3 }).unwrap();
    check(&fig2, PolicyKind::Att, 0.3);
    check(&fig2, PolicyKind::Samp, 1.0);

    let fig3 = build_reference_instance(&ReferenceSpec::SampCr { eps: 0.01 }).unwrap();
    check(&fig3, PolicyKind::Samp, 0.5);

    let fig4 = build_reference_instance(&ReferenceSpec::SampVar { m: 2, gamma: 0.8 }).unwrap();
    check(&fig4, PolicyKind::Samp, 0.8);
}

#[test]
fn random_instances_agree_with_brute_force() {
    for seed in 0..10u64 {
        let inst = random_instance(
            seed,
            &RandomDims {
                offline: 3,
                online: 3,
                prices: 2,
                horizon: 3,
                density: 0.7,
            },
        )
        .unwrap();
        check(&inst, PolicyKind::Att, 0.5);
        check(&inst, PolicyKind::Att, 0.2);
        check(&inst, PolicyKind::Samp, 0.7);
        check(&inst, PolicyKind::Samp, 1.0);
    }
}
