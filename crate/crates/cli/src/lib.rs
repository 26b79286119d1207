//! Command engines behind the `gigmatch` binary. The binary is a thin
//! argument parser over these functions so that tests can drive the same
//! code paths in-process.

pub mod commands;
pub mod reproduce;

use std::path::PathBuf;

use gigmatch_core::instance::{self, Expanded, Instance, ReferenceSpec};
use gigmatch_core::lp::{build_lp, solve_lp, LpSolution, DEFAULT_TOL};
use gigmatch_core::Error;

/// Exit codes: 0 pass, 1 domain violation or failed check, 2 parse/I-O,
/// 3 solver failure, 4 size budget exceeded.
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_PARSE_IO: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::Parse(_) => EXIT_PARSE_IO,
            Error::Solver { .. } => EXIT_SOLVER,
            Error::SizeBudget { .. } => EXIT_BUDGET,
            Error::Parameter(_) | Error::Contract(_) | Error::Validation(_) => EXIT_DOMAIN,
        };
        CliError::new(code, err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::new(EXIT_PARSE_IO, err.to_string())
    }
}

/// Where an instance comes from: a JSON file or a built-in reference kind.
#[derive(Debug, Clone)]
pub enum InstanceSource {
    Path(PathBuf),
    Reference(ReferenceSpec),
}

impl InstanceSource {
    pub fn describe(&self) -> String {
        match self {
            InstanceSource::Path(p) => format!("file:{}", p.display()),
            InstanceSource::Reference(spec) => match *spec {
                ReferenceSpec::AttCr { eps } => format!("ref:att-cr eps={eps}"),
                ReferenceSpec::SampCr { eps } => format!("ref:samp-cr eps={eps}"),
                ReferenceSpec::AttVar { m } => format!("ref:att-var m={m}"),
                ReferenceSpec::SampVar { m, gamma } => {
                    format!("ref:samp-var m={m} gamma={gamma}")
                }
            },
        }
    }

    /// Loads (or builds) and validates the instance. File violations are
    /// domain errors carrying the full report.
    pub fn load(&self) -> Result<Instance, CliError> {
        let inst = match self {
            InstanceSource::Path(path) => {
                let text = std::fs::read_to_string(path)?;
                instance::from_json(&text)?
            }
            InstanceSource::Reference(spec) => instance::build_reference_instance(spec)?,
        };
        let report = instance::validate(&inst);
        if !report.ok() {
            return Err(CliError::new(
                EXIT_DOMAIN,
                format!("instance is invalid:\n{report}"),
            ));
        }
        Ok(inst)
    }
}

/// Instance expanded to unit capacities plus its solved benchmark LP; the
/// common head of every policy pipeline.
pub struct Prepared {
    pub expanded: Expanded,
    pub solution: LpSolution,
}

pub fn prepare(inst: &Instance) -> Result<Prepared, CliError> {
    let expanded = instance::expand_capacities(inst)?;
    let problem = build_lp(&expanded.instance)?;
    let solution = solve_lp(&problem, DEFAULT_TOL)?;
    Ok(Prepared { expanded, solution })
}
