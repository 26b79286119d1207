//! One-command reproduction of the four built-in tightness scenarios:
//! exact oracle values, closed-form targets, and seeded Monte Carlo
//! estimates with 4-standard-error pass bands.

use std::fmt::Write as _;

use gigmatch_core::instance::ReferenceSpec;
use gigmatch_core::oracle::{exact_policy_eval, match_moments, opt_off, opt_on, Budget, OffMode};
use gigmatch_core::policy::{Policy, PolicyConfig, PolicyKind};
use gigmatch_core::simulate::monte_carlo;

use crate::{prepare, CliError, InstanceSource, EXIT_DOMAIN};

/// One scenario row: a (instance, gamma) pair with its exact values, theory
/// targets, and Monte Carlo estimates.
#[derive(Debug, Clone)]
pub struct ReproduceRow {
    pub label: String,
    pub gamma: f64,
    pub opt_lp: f64,
    pub opt_off: f64,
    pub opt_on: f64,
    pub exact_profit: f64,
    pub exact_matches: f64,
    pub exact_var: f64,
    /// Closed-form expected profit for this scenario.
    pub theory_profit: f64,
    /// Closed-form (or bounding) match-count variance.
    pub theory_var: f64,
    /// exact_profit / OPT-OFF.
    pub cr_exact: f64,
    pub cr_bound: f64,
    pub mc_profit: f64,
    pub se_profit: f64,
    pub mc_matches: f64,
    pub se_matches: f64,
    pub mc_var: f64,
    pub se_var: f64,
    /// Band failures, empty when the row passes.
    pub failures: Vec<String>,
}

impl ReproduceRow {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ReproduceReport {
    pub figure: u8,
    pub title: String,
    pub n: usize,
    pub seed: u64,
    pub rows: Vec<ReproduceRow>,
}

impl ReproduceReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(ReproduceRow::pass)
    }
}

struct Scenario {
    label: String,
    spec: ReferenceSpec,
    kind: PolicyKind,
    gamma: f64,
    theory_profit: f64,
    theory_var: f64,
}

fn scenarios(figure: u8) -> Result<(String, Vec<Scenario>), CliError> {
    let mut rows = Vec::new();
    let title = match figure {
        1 => {
            let eps = 0.1;
            for gamma in [0.1, 0.3, 0.5] {
                rows.push(Scenario {
                    label: format!("gamma={gamma}"),
                    spec: ReferenceSpec::AttCr { eps },
                    kind: PolicyKind::Att,
                    gamma,
                    theory_profit: gamma * (2.0 - eps),
                    theory_var: gamma * (1.0 - gamma),
                });
            }
            format!("att-cr (eps={eps}), att policy: ratio to OPT-OFF equals gamma")
        }
        2 => {
            let m = 50;
            for gamma in [0.1, 0.3, 0.5] {
                rows.push(Scenario {
                    label: format!("gamma={gamma}"),
                    spec: ReferenceSpec::AttVar { m },
                    kind: PolicyKind::Att,
                    gamma,
                    theory_profit: gamma * m as f64,
                    theory_var: gamma * (1.0 - gamma) * m as f64,
                });
            }
            format!("att-var (m={m}), att policy: Var[H] equals gamma*(1-gamma)*B")
        }
        3 => {
            let gamma = 0.5;
            for eps in [0.1, 0.01, 0.001] {
                rows.push(Scenario {
                    label: format!("eps={eps}"),
                    spec: ReferenceSpec::SampCr { eps },
                    kind: PolicyKind::Samp,
                    gamma,
                    theory_profit: gamma * (1.0 - eps)
                        + (gamma / eps) * (1.0 - gamma + gamma * eps),
                    theory_var: 0.25, // variance bound for B = 1
                });
            }
            format!(
                "samp-cr, samp policy (gamma={gamma}): ratio tends to gamma*(1-gamma) \
                 as eps shrinks"
            )
        }
        4 => {
            let m = 40;
            for gamma in [0.3, 0.8] {
                let capped = f64::min(gamma, 0.5);
                rows.push(Scenario {
                    label: format!("gamma={gamma}"),
                    spec: ReferenceSpec::SampVar { m, gamma },
                    kind: PolicyKind::Samp,
                    gamma,
                    theory_profit: capped * m as f64,
                    theory_var: capped * (1.0 - capped) * m as f64,
                });
            }
            format!("samp-var (m={m}), samp policy: Var[H] equals min(g,1/2)*(1-min(g,1/2))*B")
        }
        other => {
            return Err(CliError::new(
                EXIT_DOMAIN,
                format!("no such figure: {other} (use 1-4)"),
            ))
        }
    };
    Ok((title, rows))
}

/// Runs one figure's scenarios. Exact expectations and variances come from
/// the safe-set recursion on the small graphs and the pairwise-chain moments
/// on the large ones; Monte Carlo estimates must land within four standard
/// errors of the exact values.
pub fn reproduce(
    figure: u8,
    n: usize,
    seed: u64,
    budget: &Budget,
) -> Result<ReproduceReport, CliError> {
    let (title, scenarios) = scenarios(figure)?;
    let mut rows = Vec::new();
    for sc in scenarios {
        let inst = InstanceSource::Reference(sc.spec).load()?;
        let prepared = prepare(&inst)?;
        let inst = &prepared.expanded.instance;
        let config = PolicyConfig::new(sc.kind, sc.gamma)?;

        // Exact fourth central moment of H, when the safe-set distribution
        // is affordable; it gives the exact standard error of the sample
        // variance, which the plug-in estimate understates badly when H is
        // a near-fair Bernoulli (the variance map is flat at p = 1/2).
        let (exact_profit, exact_matches, exact_var, exact_m4) =
            if inst.n_offline() <= budget.max_mask_agents {
                let eval = exact_policy_eval(inst, &prepared.solution, config, budget)?;
                let n_agents = inst.n_offline();
                let m4 = eval
                    .final_dist
                    .iter()
                    .enumerate()
                    .map(|(mask, &p)| {
                        let h = (n_agents - mask.count_ones() as usize) as f64;
                        p * (h - eval.expected_matches).powi(4)
                    })
                    .sum::<f64>();
                (
                    eval.expected_profit,
                    eval.expected_matches,
                    eval.variance_matches,
                    Some(m4),
                )
            } else {
                let moments = match_moments(inst, &prepared.solution, config)?;
                (
                    moments.expected_profit,
                    moments.expected_matches,
                    moments.variance_matches,
                    None,
                )
            };

        let off = opt_off(
            inst,
            OffMode::Auto {
                samples: 20_000,
                seed,
            },
            budget,
        )?;
        let on = opt_on(inst, budget)?;

        let policy = Policy::new(inst, &prepared.solution, config)?;
        let summary = monte_carlo(&policy, &prepared.expanded.origin, n, seed)?;

        // Exact standard error of the unbiased sample variance when the
        // fourth moment is known: sqrt((mu4 - sigma^4 (n-3)/(n-1)) / n).
        let nf = n as f64;
        let se_var = match exact_m4 {
            Some(m4) => ((m4 - exact_var * exact_var * (nf - 3.0) / (nf - 1.0)) / nf)
                .max(0.0)
                .sqrt(),
            None => summary.se_var_matches.unwrap_or(0.0),
        };
        let se_matches = summary.se_mean_matches.unwrap_or(0.0);

        let mut failures = Vec::new();
        let mut band = |name: &str, mc: f64, exact: f64, width: f64| {
            // A zero-variance estimator must match exactly.
            if (mc - exact).abs() > width.max(1e-12) {
                failures.push(format!("{name}: |{mc} - {exact}| > {width}"));
            }
        };
        band(
            "profit",
            summary.mean_profit,
            exact_profit,
            4.0 * summary.se_mean_profit.unwrap_or(0.0),
        );
        band(
            "matches",
            summary.mean_matches,
            exact_matches,
            4.0 * se_matches,
        );
        // The sample variance shifts by -(mean error)^2 * n/(n-1) exactly;
        // cover that skew term at four standard errors of the mean as well.
        band(
            "var",
            summary.var_matches.unwrap_or(0.0),
            exact_var,
            4.0 * se_var + 16.0 * se_matches * se_matches,
        );

        rows.push(ReproduceRow {
            label: sc.label,
            gamma: sc.gamma,
            opt_lp: prepared.solution.objective,
            opt_off: off.value,
            opt_on: on.value,
            exact_profit,
            exact_matches,
            exact_var,
            theory_profit: sc.theory_profit,
            theory_var: sc.theory_var,
            cr_exact: exact_profit / off.value,
            cr_bound: config.cr_bound(),
            mc_profit: summary.mean_profit,
            se_profit: summary.se_mean_profit.unwrap_or(0.0),
            mc_matches: summary.mean_matches,
            se_matches: summary.se_mean_matches.unwrap_or(0.0),
            mc_var: summary.var_matches.unwrap_or(0.0),
            se_var,
            failures,
        });
    }
    Ok(ReproduceReport {
        figure,
        title,
        n,
        seed,
        rows,
    })
}

pub fn render_report(report: &ReproduceReport) -> String {
    let mut out = format!(
        "figure {}: {} (n={}, seed={})\n",
        report.figure, report.title, report.n, report.seed
    );
    for row in &report.rows {
        let _ = writeln!(
            out,
            "[{}] OPT-LP={:.6} OPT-OFF={:.6} OPT-ON={:.6}",
            row.label, row.opt_lp, row.opt_off, row.opt_on
        );
        let _ = writeln!(
            out,
            "  profit  exact={:.6} theory={:.6} mc={:.6} se={:.6}",
            row.exact_profit, row.theory_profit, row.mc_profit, row.se_profit
        );
        let _ = writeln!(
            out,
            "  matches exact={:.6} mc={:.6} se={:.6}",
            row.exact_matches, row.mc_matches, row.se_matches
        );
        let _ = writeln!(
            out,
            "  var[H]  exact={:.6} theory={:.6} mc={:.6} se={:.6}",
            row.exact_var, row.theory_var, row.mc_var, row.se_var
        );
        let _ = writeln!(
            out,
            "  ratio   exact={:.6} bound={:.6}  -> {}",
            row.cr_exact,
            row.cr_bound,
            if row.pass() { "PASS" } else { "FAIL" }
        );
        for failure in &row.failures {
            let _ = writeln!(out, "  band violated: {failure}");
        }
    }
    let _ = writeln!(
        out,
        "{}",
        if report.all_pass() {
            "all 4-sigma bands passed"
        } else {
            "some bands FAILED"
        }
    );
    out
}
