//! Run configuration: command-line flags merged over an optional TOML file.
//!
//! ```toml
//! [scenario]
//! state = "ghz"            # ghz | w | custom:<path>
//! scenario = "B"
//! direction = "1to2"
//! inequality = "g1"
//! lambdas = [0.507, 1.0]
//!
//! [search]
//! tolerance = 1e-4
//! grid = 13
//! optimizer = "fixed-xyz"
//!
//! [output]
//! format = "csv"
//! path = "table.csv"
//! ```
//!
//! Relative `custom:` paths in a file resolve against the file's directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::cascade::Scenario;
use crate::error::{Error, Result};
use crate::inequalities::{InequalityKind, SteeringDirection};
use crate::measurement::Sharpness;
use crate::search::{AngleGrid, Optimizer, PredecessorRule, SearchConfig};
use crate::states::{load_state_file, StateSpec};

use super::RunArgs;

const STATE_VALUES: &str = "ghz, w, custom:<path>";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Cascade,
    Threshold,
    Table,
    Optimize,
    Audit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Cascade => "cascade",
            Command::Threshold => "threshold",
            Command::Table => "table",
            Command::Optimize => "optimize",
            Command::Audit => "audit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (expected text, csv or json)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub scenario: Scenario,
    pub direction: SteeringDirection,
    pub inequality: InequalityKind,
    pub state: StateSpec,
    /// Observer sharpness values. For `threshold` these are the predecessors
    /// of the observer being searched; otherwise the last one is 1.
    pub lambdas: Vec<f64>,
    /// 1-based observer picked by `optimize`; defaults to the last one.
    pub observer: Option<usize>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub search: SearchConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    scenario: ScenarioSection,
    #[serde(default)]
    search: SearchSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    state: Option<String>,
    scenario: Option<String>,
    direction: Option<String>,
    inequality: Option<String>,
    lambdas: Option<Vec<f64>>,
    observer: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchSection {
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    grid: Option<usize>,
    optimizer: Option<String>,
    refinement_rounds: Option<usize>,
    predecessor_lambda: Option<f64>,
    max_rows: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    format: Option<String>,
    path: Option<PathBuf>,
}

/// A value together with the name it was given under, for diagnostics.
struct Sourced<T> {
    value: T,
    key: &'static str,
}

fn pick<T>(flag: Option<T>, flag_key: &'static str, file: Option<T>, file_key: &'static str) -> Option<Sourced<T>> {
    match (flag, file) {
        (Some(value), _) => Some(Sourced { value, key: flag_key }),
        (None, Some(value)) => Some(Sourced { value, key: file_key }),
        (None, None) => None,
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("{key}: {msg}"))
}

fn parse_enum<T: FromStr<Err = String>>(s: Option<Sourced<String>>) -> Result<Option<T>> {
    s.map(|s| s.value.parse().map_err(|e: String| invalid(s.key, e)))
        .transpose()
}

fn parse_state(s: &Sourced<String>, base: Option<&Path>) -> Result<StateSpec> {
    match s.value.as_str() {
        "ghz" => Ok(StateSpec::Ghz),
        "w" => Ok(StateSpec::W),
        other => match other.strip_prefix("custom:") {
            Some(path) if !path.is_empty() => {
                let path = match base {
                    Some(dir) if Path::new(path).is_relative() => dir.join(path),
                    _ => PathBuf::from(path),
                };
                let rho = load_state_file(&path).map_err(|e| invalid(s.key, e))?;
                StateSpec::custom(rho)
            }
            _ => Err(invalid(
                s.key,
                format!("unknown state `{other}` (expected one of {STATE_VALUES})"),
            )),
        },
    }
}

/// Parses `0.627,1.0` into sharpness values, each in `(0, 1]`.
pub fn parse_lambda_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let v: f64 = tok
                .parse()
                .map_err(|_| format!("`{tok}` is not a number"))?;
            Sharpness::new(v).map(Sharpness::value).map_err(|e| e.to_string())
        })
        .collect()
}

fn infer_inequality(state: &StateSpec, direction: SteeringDirection) -> Result<InequalityKind> {
    use InequalityKind::*;
    use SteeringDirection::*;
    match (state, direction) {
        (StateSpec::Ghz, OneToTwo) => Ok(G1),
        (StateSpec::Ghz, TwoToOne) => Ok(G2),
        (StateSpec::W, OneToTwo) => Ok(W1),
        (StateSpec::W, TwoToOne) => Ok(W2),
        (StateSpec::Custom(_), _) => Err(Error::InvalidConfig(
            "--ineq is required for custom states (expected one of g1, g2, w1, w2)".into(),
        )),
    }
}

pub(crate) fn resolve(command: Command, args: RunArgs) -> Result<RunConfig> {
    let (file, base) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| invalid("--config", format!("{}: {e}", path.display())))?;
            let cfg: FileConfig = toml::from_str(&text)
                .map_err(|e| invalid(&path.display().to_string(), e.message()))?;
            (cfg, path.parent().map(Path::to_path_buf))
        }
        None => (FileConfig::default(), None),
    };
    let sc = file.scenario;
    let se = file.search;
    let out = file.output;

    let state_src = match (args.state, sc.state) {
        (Some(v), _) => Sourced { value: v, key: "--state" },
        (None, Some(v)) => Sourced { value: v, key: "scenario.state" },
        (None, None) => {
            return Err(Error::InvalidConfig(format!(
                "missing --state (expected one of {STATE_VALUES})"
            )))
        }
    };
    let state = match state_src.key {
        "--state" => parse_state(&state_src, None)?,
        _ => parse_state(&state_src, base.as_deref())?,
    };

    let scenario: Scenario = parse_enum(pick(args.scenario, "--scenario", sc.scenario, "scenario.scenario"))?
        .unwrap_or(Scenario::A);
    let direction_src = pick(args.direction, "--direction", sc.direction, "scenario.direction");
    let direction_key = direction_src.as_ref().map(|s| s.key);
    let direction: Option<SteeringDirection> = parse_enum(direction_src)?;
    let ineq_src = pick(args.ineq, "--ineq", sc.inequality, "scenario.inequality");
    let ineq_key = ineq_src.as_ref().map(|s| s.key);
    let ineq: Option<InequalityKind> = parse_enum(ineq_src)?;

    let (direction, inequality) = match (direction, ineq) {
        (Some(d), Some(i)) if i.direction() != d => {
            return Err(Error::InvalidConfig(format!(
                "{} = {d} conflicts with {} = {i}, which detects {} steering",
                direction_key.unwrap_or("direction"),
                ineq_key.unwrap_or("inequality"),
                i.direction()
            )))
        }
        (_, Some(i)) => (i.direction(), i),
        (Some(d), None) => (d, infer_inequality(&state, d)?),
        (None, None) => {
            let d = SteeringDirection::OneToTwo;
            (d, infer_inequality(&state, d)?)
        }
    };

    let lambdas_src = match (args.lambdas, sc.lambdas) {
        (Some(text), _) => Some(Sourced {
            value: parse_lambda_list(&text).map_err(|e| invalid("--lambdas", e))?,
            key: "--lambdas",
        }),
        (None, Some(list)) => {
            for &l in &list {
                Sharpness::new(l).map_err(|e| invalid("scenario.lambdas", e))?;
            }
            Some(Sourced { value: list, key: "scenario.lambdas" })
        }
        (None, None) => None,
    };
    let lambdas = match (command, lambdas_src) {
        (Command::Table, Some(s)) => {
            return Err(invalid(s.key, "the table command chooses every sharpness itself"))
        }
        (Command::Table, None) => vec![],
        (Command::Threshold, s) => s.map(|s| s.value).unwrap_or_default(),
        (_, s) => {
            let mut v = s.map(|s| s.value).unwrap_or_default();
            if v.last() != Some(&1.0) {
                v.push(1.0);
            }
            v
        }
    };

    let observer = pick(args.observer, "--observer", sc.observer, "scenario.observer");
    if let Some(o) = &observer {
        if command != Command::Optimize {
            return Err(invalid(o.key, "only the optimize command takes an observer index"));
        }
        if o.value == 0 || o.value > lambdas.len() {
            return Err(invalid(
                o.key,
                format!("observer {} does not exist (cascade has {})", o.value, lambdas.len()),
            ));
        }
    }

    let mut search = SearchConfig {
        optimizer: if command == Command::Optimize {
            Optimizer::GridRefine
        } else {
            Optimizer::FixedXyz
        },
        ..SearchConfig::default()
    };
    if let Some(s) = pick(args.tol, "--tol", se.tolerance, "search.tolerance") {
        search.tolerance = s.value;
        search.validate().map_err(|e| invalid(s.key, e))?;
    }
    if let Some(s) = pick(args.max_iterations, "--max-iterations", se.max_iterations, "search.max_iterations") {
        search.max_iterations = s.value;
        search.validate().map_err(|e| invalid(s.key, e))?;
    }
    if let Some(s) = pick(args.grid, "--grid", se.grid, "search.grid") {
        search.grid = AngleGrid::with_resolution(s.value).map_err(|e| invalid(s.key, e))?;
    }
    if let Some(o) = parse_enum::<Optimizer>(pick(args.optimizer, "--optimizer", se.optimizer, "search.optimizer"))? {
        search.optimizer = o;
    }
    if let Some(r) = se.refinement_rounds {
        search.refinement_rounds = r;
    }
    if let Some(s) = pick(args.predecessor_lambda, "--predecessor-lambda", se.predecessor_lambda, "search.predecessor_lambda") {
        let l = Sharpness::new(s.value).map_err(|e| invalid(s.key, e))?;
        search.predecessor_rule = PredecessorRule::Fixed(l);
    }
    if let Some(s) = pick(args.max_rows, "--max-rows", se.max_rows, "search.max_rows") {
        search.max_rows = s.value;
        search.validate().map_err(|e| invalid(s.key, e))?;
    }

    let format = parse_enum(pick(args.format, "--format", out.format, "output.format"))?.unwrap_or_default();
    let out = args.out.or(out.path);

    Ok(RunConfig {
        command,
        scenario,
        direction,
        inequality,
        state,
        lambdas,
        observer: observer.map(|o| o.value),
        format,
        out,
        search,
    })
}
