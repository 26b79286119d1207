//! The validate / lp / run / sweep command engines.

use std::fmt::Write as _;
use std::path::PathBuf;

use gigmatch_core::instance::{self, ReferenceSpec};
use gigmatch_core::lp::{build_lp, dump_lp};
use gigmatch_core::oracle::{opt_off, Budget, OffMode};
use gigmatch_core::policy::{Policy, PolicyConfig, PolicyKind};
use gigmatch_core::simulate::{monte_carlo, monte_carlo_logged, McSummary};

use crate::{prepare, CliError, InstanceSource, EXIT_DOMAIN};

pub const DEFAULT_N: usize = 100_000;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A fully resolved run request: one instance source, a policy, and the
/// replication plan.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub source: InstanceSource,
    pub policy: PolicyKind,
    pub gamma: f64,
    pub n: usize,
    pub seed: u64,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

/// Validation report plus the exit code the binary should use.
pub fn cmd_validate(path: &PathBuf) -> Result<(String, i32), CliError> {
    let text = std::fs::read_to_string(path)?;
    let inst = instance::from_json(&text)?;
    let report = instance::validate(&inst);
    if report.ok() {
        Ok(("ok".to_string(), 0))
    } else {
        Ok((format!("{report}"), EXIT_DOMAIN))
    }
}

/// Writes an instance (typically a built-in reference) in the canonical
/// JSON file format.
pub fn cmd_export(source: &InstanceSource) -> Result<String, CliError> {
    let inst = source.load()?;
    Ok(instance::to_canonical_json(&inst))
}

/// Prints the LP optimum to nine decimals; optionally the LP in text form.
pub fn cmd_lp(source: &InstanceSource, dump: bool) -> Result<String, CliError> {
    let inst = source.load()?;
    let prepared = prepare(&inst)?;
    let mut out = format!("{:.9}\n", prepared.solution.objective);
    if dump {
        let problem = build_lp(&prepared.expanded.instance)?;
        out.push_str(&dump_lp(&problem, &prepared.expanded.instance));
    }
    Ok(out)
}

#[derive(Debug, serde::Serialize)]
pub struct RunOutput {
    pub source: String,
    pub policy: &'static str,
    pub gamma: f64,
    pub n: usize,
    pub seed: u64,
    pub opt_lp: f64,
    /// Guaranteed expected profit: cr_bound * OPT-LP.
    pub profit_bound: f64,
    /// Match-count variance bound over the total capacity.
    pub var_bound: f64,
    pub mean_profit: f64,
    pub se_mean_profit: Option<f64>,
    pub var_profit: Option<f64>,
    pub mean_matches: f64,
    pub se_mean_matches: Option<f64>,
    pub var_matches: Option<f64>,
    pub se_var_matches: Option<f64>,
    /// mean_profit / OPT-LP; absent for a zero-value LP.
    pub lp_ratio: Option<f64>,
}

/// Expand, solve, run replications, and attach the theoretical reference
/// values for the chosen policy.
pub fn cmd_run(spec: &RunSpec) -> Result<RunOutput, CliError> {
    let inst = spec.source.load()?;
    let prepared = prepare(&inst)?;
    let config = PolicyConfig::new(spec.policy, spec.gamma)?;
    let policy = Policy::new(&prepared.expanded.instance, &prepared.solution, config)?;

    let summary = match &spec.log {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            monte_carlo_logged(&policy, &prepared.expanded.origin, spec.n, spec.seed, file)?
        }
        None => monte_carlo(&policy, &prepared.expanded.origin, spec.n, spec.seed)?,
    };

    let opt_lp = prepared.solution.objective;
    Ok(RunOutput {
        source: spec.source.describe(),
        policy: spec.policy.name(),
        gamma: spec.gamma,
        n: spec.n,
        seed: spec.seed,
        opt_lp,
        profit_bound: config.cr_bound() * opt_lp,
        var_bound: config.variance_bound(prepared.expanded.instance.total_capacity()),
        mean_profit: summary.mean_profit,
        se_mean_profit: summary.se_mean_profit,
        var_profit: summary.var_profit,
        mean_matches: summary.mean_matches,
        se_mean_matches: summary.se_mean_matches,
        var_matches: summary.var_matches,
        se_var_matches: summary.se_var_matches,
        lp_ratio: (opt_lp > 0.0).then(|| summary.mean_profit / opt_lp),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn render_run(output: &RunOutput, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut text = serde_json::to_string_pretty(output).expect("serializable output");
            text.push('\n');
            text
        }
        OutputFormat::Csv => {
            let mut text = format!(
                "# gigmatch run source={} policy={} gamma={} n={} seed={}\n",
                output.source, output.policy, output.gamma, output.n, output.seed
            );
            text.push_str(
                "policy,gamma,n,seed,opt_lp,profit_bound,var_bound,mean_profit,\
                 se_mean_profit,var_profit,mean_matches,se_mean_matches,var_matches,\
                 se_var_matches,lp_ratio\n",
            );
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                output.policy,
                output.gamma,
                output.n,
                output.seed,
                output.opt_lp,
                output.profit_bound,
                output.var_bound,
                output.mean_profit,
                fmt_opt(output.se_mean_profit),
                fmt_opt(output.var_profit),
                output.mean_matches,
                fmt_opt(output.se_mean_matches),
                fmt_opt(output.var_matches),
                fmt_opt(output.se_var_matches),
                fmt_opt(output.lp_ratio),
            );
            text
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub policy: PolicyKind,
    pub gammas: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

/// Reference family swept over gamma. The variance instances keep their
/// size; the acceptance probability of `samp-var` follows the swept gamma,
/// matching its construction.
#[derive(Debug, Clone, Copy)]
pub enum SweepKind {
    AttCr { eps: f64 },
    SampCr { eps: f64 },
    AttVar { m: usize },
    SampVar { m: usize },
}

impl SweepKind {
    fn reference(&self, gamma: f64) -> ReferenceSpec {
        match *self {
            SweepKind::AttCr { eps } => ReferenceSpec::AttCr { eps },
            SweepKind::SampCr { eps } => ReferenceSpec::SampCr { eps },
            SweepKind::AttVar { m } => ReferenceSpec::AttVar { m },
            SweepKind::SampVar { m } => ReferenceSpec::SampVar { m, gamma },
        }
    }

    fn describe(&self) -> String {
        match *self {
            SweepKind::AttCr { eps } => format!("att-cr eps={eps}"),
            SweepKind::SampCr { eps } => format!("samp-cr eps={eps}"),
            SweepKind::AttVar { m } => format!("att-var m={m}"),
            SweepKind::SampVar { m } => format!("samp-var m={m}"),
        }
    }
}

#[derive(Debug, serde::Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub mean_profit: f64,
    /// mean_profit / OPT-OFF.
    pub cr_estimate: Option<f64>,
    pub var_matches: Option<f64>,
    pub cr_bound: f64,
    pub var_bound: f64,
    pub se_mean_profit: Option<f64>,
    pub se_var_matches: Option<f64>,
}

/// One Monte Carlo run per grid point; the competitive-ratio estimate is
/// taken against the clairvoyant optimum (exact when the sequence budget
/// allows, sampled otherwise).
pub fn cmd_sweep(spec: &SweepSpec) -> Result<String, CliError> {
    if spec.gammas.is_empty() {
        return Err(CliError::new(EXIT_DOMAIN, "the gamma grid is empty"));
    }
    let budget = Budget::from_env();
    let mut rows = Vec::new();
    for &gamma in &spec.gammas {
        let config = PolicyConfig::new(spec.policy, gamma)?;
        let source = InstanceSource::Reference(spec.kind.reference(gamma));
        let inst = source.load()?;
        let prepared = prepare(&inst)?;
        let policy = Policy::new(&prepared.expanded.instance, &prepared.solution, config)?;
        let summary: McSummary =
            monte_carlo(&policy, &prepared.expanded.origin, spec.n, spec.seed)?;
        let off = opt_off(
            &prepared.expanded.instance,
            OffMode::Auto {
                samples: 10_000,
                seed: spec.seed,
            },
            &budget,
        )?;
        rows.push(SweepRow {
            gamma,
            mean_profit: summary.mean_profit,
            cr_estimate: (off.value > 0.0).then(|| summary.mean_profit / off.value),
            var_matches: summary.var_matches,
            cr_bound: config.cr_bound(),
            var_bound: config.variance_bound(prepared.expanded.instance.total_capacity()),
            se_mean_profit: summary.se_mean_profit,
            se_var_matches: summary.se_var_matches,
        });
    }

    let mut text = format!(
        "# gigmatch sweep kind={} policy={} n={} seed={}\n",
        spec.kind.describe(),
        spec.policy.name(),
        spec.n,
        spec.seed
    );
    text.push_str(
        "gamma,mean_profit,cr_estimate,var_matches,cr_bound,var_bound,\
         se_mean_profit,se_var_matches\n",
    );
    for row in &rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            row.gamma,
            row.mean_profit,
            fmt_opt(row.cr_estimate),
            fmt_opt(row.var_matches),
            row.cr_bound,
            row.var_bound,
            fmt_opt(row.se_mean_profit),
            fmt_opt(row.se_var_matches),
        );
    }
    Ok(text)
}
