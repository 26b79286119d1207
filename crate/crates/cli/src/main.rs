use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gigmatch_cli::commands::{
    cmd_export, cmd_lp, cmd_run, cmd_sweep, cmd_validate, render_run, OutputFormat, RunSpec,
    SweepKind, SweepSpec, DEFAULT_N, DEFAULT_SEED,
};
use gigmatch_cli::reproduce::{render_report, reproduce};
use gigmatch_cli::{CliError, InstanceSource, EXIT_DOMAIN};
use gigmatch_core::instance::ReferenceSpec;
use gigmatch_core::oracle::Budget;
use gigmatch_core::policy::PolicyKind;

/// Matching-and-pricing policy testbed: benchmark LP, sampling policies,
/// exact oracles, and seeded Monte Carlo. `GIGMATCH_BUDGET` overrides the
/// oracle size caps (an integer, or `states=..,sequences=..,mask=..`).
#[derive(Parser)]
#[command(name = "gigmatch", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file against every model invariant.
    Validate {
        /// Path to an instance JSON document.
        #[arg(long)]
        instance: PathBuf,
    },
    /// Write an instance in the canonical JSON file format (useful for
    /// exporting the built-in references).
    Export {
        #[command(flatten)]
        source: SourceArgs,
        /// Reference gamma (needed by --ref samp-var).
        #[arg(long)]
        gamma: Option<f64>,
        /// Write output here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the benchmark LP and print its optimum to nine decimals.
    Lp {
        #[command(flatten)]
        source: SourceArgs,
        /// Reference gamma (needed by --ref samp-var).
        #[arg(long)]
        gamma: Option<f64>,
        /// Also emit the LP in text form for external cross-checks.
        #[arg(long)]
        dump: bool,
        /// Write output here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run seeded Monte Carlo replications of a policy.
    Run {
        #[command(flatten)]
        source: SourceArgs,
        /// Policy to run.
        #[arg(long)]
        policy: PolicyArg,
        /// Policy parameter gamma (also sets the samp-var reference's
        /// acceptance probability).
        #[arg(long)]
        gamma: f64,
        /// Number of replications.
        #[arg(long, default_value_t = DEFAULT_N)]
        n: usize,
        /// Master seed; replication seeds derive from it.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Write output here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a per-round CSV event log (runs replications
        /// sequentially).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run a policy across a gamma grid on a reference family (CSV, one row
    /// per gamma).
    Sweep {
        /// Reference kind: att-cr | samp-cr | att-var | samp-var.
        #[arg(long = "ref")]
        reference: String,
        /// Scale parameter for the cr kinds.
        #[arg(long)]
        eps: Option<f64>,
        /// Size parameter for the var kinds.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        policy: PolicyArg,
        /// Comma-separated gamma grid, e.g. 0.1,0.3,0.5.
        #[arg(long)]
        gammas: String,
        #[arg(long, default_value_t = DEFAULT_N)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run one of the four built-in tightness scenarios and compare
    /// Monte Carlo estimates against exact values (4-standard-error bands).
    Reproduce {
        /// Scenario index, 1-4.
        #[arg(long)]
        figure: u8,
        #[arg(long, default_value_t = DEFAULT_N)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct SourceArgs {
    /// Path to an instance JSON document.
    #[arg(long, conflicts_with = "reference")]
    instance: Option<PathBuf>,
    /// Built-in reference kind: att-cr | samp-cr | att-var | samp-var.
    #[arg(long = "ref")]
    reference: Option<String>,
    /// Scale parameter for the cr kinds.
    #[arg(long)]
    eps: Option<f64>,
    /// Size parameter for the var kinds.
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Att,
    Samp,
}

impl From<PolicyArg> for PolicyKind {
    fn from(arg: PolicyArg) -> Self {
        match arg {
            PolicyArg::Att => PolicyKind::Att,
            PolicyArg::Samp => PolicyKind::Samp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(arg: FormatArg) -> Self {
        match arg {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

fn reference_spec(
    kind: &str,
    eps: Option<f64>,
    m: Option<usize>,
    gamma: Option<f64>,
) -> Result<ReferenceSpec, CliError> {
    let need_eps =
        || eps.ok_or_else(|| CliError::new(EXIT_DOMAIN, format!("--ref {kind} requires --eps")));
    let need_m =
        || m.ok_or_else(|| CliError::new(EXIT_DOMAIN, format!("--ref {kind} requires --m")));
    match kind {
        "att-cr" => Ok(ReferenceSpec::AttCr { eps: need_eps()? }),
        "samp-cr" => Ok(ReferenceSpec::SampCr { eps: need_eps()? }),
        "att-var" => Ok(ReferenceSpec::AttVar { m: need_m()? }),
        "samp-var" => Ok(ReferenceSpec::SampVar {
            m: need_m()?,
            gamma: gamma
                .ok_or_else(|| CliError::new(EXIT_DOMAIN, "--ref samp-var requires --gamma"))?,
        }),
        other => Err(CliError::new(
            EXIT_DOMAIN,
            format!("unknown reference kind '{other}' (use att-cr, samp-cr, att-var, samp-var)"),
        )),
    }
}

fn resolve_source(args: &SourceArgs, gamma: Option<f64>) -> Result<InstanceSource, CliError> {
    match (&args.instance, &args.reference) {
        (Some(path), None) => Ok(InstanceSource::Path(path.clone())),
        (None, Some(kind)) => Ok(InstanceSource::Reference(reference_spec(
            kind, args.eps, args.m, gamma,
        )?)),
        _ => Err(CliError::new(
            EXIT_DOMAIN,
            "exactly one instance source is required: --instance PATH or --ref KIND",
        )),
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_gammas(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(|part| {
            part.trim().parse::<f64>().map_err(|_| {
                CliError::new(EXIT_DOMAIN, format!("bad gamma value '{}'", part.trim()))
            })
        })
        .collect()
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Validate { instance } => {
            let (report, code) = cmd_validate(&instance)?;
            println!("{report}");
            Ok(code)
        }
        Command::Export { source, gamma, out } => {
            let source = resolve_source(&source, gamma)?;
            let text = cmd_export(&source)?;
            emit(&text, out.as_ref())?;
            Ok(0)
        }
        Command::Lp {
            source,
            gamma,
            dump,
            out,
        } => {
            let source = resolve_source(&source, gamma)?;
            let text = cmd_lp(&source, dump)?;
            emit(&text, out.as_ref())?;
            Ok(0)
        }
        Command::Run {
            source,
            policy,
            gamma,
            n,
            seed,
            format,
            out,
            log,
        } => {
            let spec = RunSpec {
                source: resolve_source(&source, Some(gamma))?,
                policy: policy.into(),
                gamma,
                n,
                seed,
                format: format.into(),
                out: out.clone(),
                log,
            };
            let output = cmd_run(&spec)?;
            emit(&render_run(&output, spec.format), out.as_ref())?;
            Ok(0)
        }
        Command::Sweep {
            reference,
            eps,
            m,
            policy,
            gammas,
            n,
            seed,
            out,
        } => {
            let need_eps = || {
                eps.ok_or_else(|| {
                    CliError::new(EXIT_DOMAIN, format!("--ref {reference} requires --eps"))
                })
            };
            let need_m = || {
                m.ok_or_else(|| {
                    CliError::new(EXIT_DOMAIN, format!("--ref {reference} requires --m"))
                })
            };
            let kind = match reference.as_str() {
                "att-cr" => SweepKind::AttCr { eps: need_eps()? },
                "samp-cr" => SweepKind::SampCr { eps: need_eps()? },
                "att-var" => SweepKind::AttVar { m: need_m()? },
                "samp-var" => SweepKind::SampVar { m: need_m()? },
                other => {
                    return Err(CliError::new(
                        EXIT_DOMAIN,
                        format!("unknown reference kind '{other}'"),
                    ))
                }
            };
            let spec = SweepSpec {
                kind,
                policy: policy.into(),
                gammas: parse_gammas(&gammas)?,
                n,
                seed,
            };
            let text = cmd_sweep(&spec)?;
            emit(&text, out.as_ref())?;
            Ok(0)
        }
        Command::Reproduce { figure, n, seed } => {
            let report = reproduce(figure, n, seed, &Budget::from_env())?;
            print!("{}", render_report(&report));
            Ok(if report.all_pass() { 0 } else { EXIT_DOMAIN })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code as u8)
        }
    }
}
