//! The `seqsteer` command line.

mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::cascade::{no_signalling_audit, run_cascade, ScenarioSpec};
use crate::error::{Error, Result};
use crate::measurement::{SettingTriple, Sharpness};
use crate::qop::BlochDirection;
use crate::search::{build_table, optimize_angles, threshold_lambda, ThresholdProblem, ThresholdTable};

pub use config::{parse_lambda_list, Command, Format, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "seqsteer", version, about = "Sequential unsharp steering of three-qubit states")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Evaluate every observer of a cascade.
    Cascade(RunArgs),
    /// Smallest violating sharpness of the observer after the given ones.
    Threshold(RunArgs),
    /// Threshold of every observer until none can violate.
    Table(RunArgs),
    /// Search one observer's measurement directions.
    Optimize(RunArgs),
    /// Largest no-signalling deviation over the cascade.
    Audit(RunArgs),
}

#[derive(Debug, Clone, Default, clap::Args)]
pub(crate) struct RunArgs {
    /// TOML file with [scenario], [search] and [output] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ghz, w or custom:<path>.
    #[arg(long)]
    state: Option<String>,
    /// A (sequential Alices) or B (sequential Charlies).
    #[arg(long)]
    scenario: Option<String>,
    /// 1to2 or 2to1.
    #[arg(long)]
    direction: Option<String>,
    /// g1, g2, w1 or w2.
    #[arg(long)]
    ineq: Option<String>,
    /// Comma-separated sharpness values.
    #[arg(long)]
    lambdas: Option<String>,
    /// 1-based observer for optimize.
    #[arg(long)]
    observer: Option<usize>,
    /// text, csv or json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bisection tolerance on lambda.
    #[arg(long)]
    tol: Option<f64>,
    /// Coarse grid samples over theta.
    #[arg(long)]
    grid: Option<usize>,
    /// fixed-xyz, grid-refine or nelder-mead.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Pin every predecessor at this sharpness instead of its threshold.
    #[arg(long)]
    predecessor_lambda: Option<f64>,
    #[arg(long)]
    max_rows: Option<usize>,
}

fn split(cli: Cli) -> (Command, RunArgs) {
    match cli.command {
        CliCommand::Cascade(a) => (Command::Cascade, a),
        CliCommand::Threshold(a) => (Command::Threshold, a),
        CliCommand::Table(a) => (Command::Table, a),
        CliCommand::Optimize(a) => (Command::Optimize, a),
        CliCommand::Audit(a) => (Command::Audit, a),
    }
}

/// Parses arguments (program name first) and any `--config` file.
pub fn parse_config<I, T>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let (command, args) = split(cli);
    config::resolve(command, args)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub m: usize,
    pub lambda_min: Option<f64>,
    pub directions: [BlochDirection; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub observer: usize,
    pub lambda: f64,
    /// Value with `X, Y, Z` directions.
    pub baseline: f64,
    pub value: f64,
    pub directions: [BlochDirection; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub observers: usize,
    pub max_deviation: f64,
}

fn spec_of(cfg: &RunConfig) -> Result<ScenarioSpec> {
    ScenarioSpec::xyz(cfg.scenario, cfg.inequality, cfg.state.clone(), &cfg.lambdas)
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))
}

fn header(cfg: &RunConfig) -> String {
    format!(
        "# state {}, scenario {}, {} ({})\n",
        cfg.state, cfg.scenario, cfg.inequality, cfg.direction
    )
}

fn render_table(cfg: &RunConfig, t: &ThresholdTable) -> Result<String> {
    match cfg.format {
        Format::Csv => Ok(t.to_csv()),
        Format::Json => json(t),
        Format::Text => {
            let mut s = header(cfg);
            for row in &t.rows {
                match row.lambda_min {
                    Some(l) => writeln!(s, "lambda_{} > {l:.4}", row.m),
                    None => writeln!(s, "lambda_{}: no valid range", row.m),
                }
                .expect("write to string");
            }
            writeln!(s, "max observers: {}", t.max_observers()).expect("write to string");
            Ok(s)
        }
    }
}

fn fmt_dir(d: &BlochDirection) -> String {
    format!("theta {:.6} phi {:.6}", d.theta(), d.phi())
}

/// Runs one command and returns what it emits.
pub fn render(cfg: &RunConfig) -> Result<String> {
    match cfg.command {
        Command::Cascade => {
            let r = run_cascade(&spec_of(cfg)?)?;
            match cfg.format {
                Format::Json => json(&r),
                Format::Csv => {
                    let mut s = String::from("observer,lambda,value,detected\n");
                    for rec in r.records() {
                        writeln!(s, "{},{},{:.6},{}", rec.observer, rec.lambda, rec.value, rec.detected)
                            .expect("write to string");
                    }
                    Ok(s)
                }
                Format::Text => {
                    let mut s = header(cfg);
                    for rec in r.records() {
                        let verdict = if rec.detected { "violated" } else { "not violated" };
                        writeln!(
                            s,
                            "observer {}: lambda {:.4}  value {:+.6}  {verdict}",
                            rec.observer, rec.lambda, rec.value
                        )
                        .expect("write to string");
                    }
                    Ok(s)
                }
            }
        }
        Command::Table => {
            let t = build_table(cfg.scenario, cfg.direction, cfg.inequality, &cfg.state, &cfg.search)?;
            render_table(cfg, &t)
        }
        Command::Threshold => {
            let predecessors = cfg
                .lambdas
                .iter()
                .map(|&l| Ok(SettingTriple::xyz(Sharpness::new(l)?)))
                .collect::<Result<Vec<_>>>()?;
            let problem = ThresholdProblem {
                scenario: cfg.scenario,
                inequality: cfg.inequality,
                state: cfg.state.clone(),
                predecessors,
                directions: SettingTriple::xyz(Sharpness::PROJECTIVE).directions,
            };
            let t = threshold_lambda(&problem, &cfg.search)?;
            let report = ThresholdReport {
                m: cfg.lambdas.len() + 1,
                lambda_min: t.map(|t| t.lambda),
                directions: t.map(|t| t.directions).unwrap_or(problem.directions),
            };
            match cfg.format {
                Format::Json => json(&report),
                Format::Csv => Ok(match report.lambda_min {
                    Some(l) => format!("m,lambda_min,status\n{},{l:.4},valid\n", report.m),
                    None => format!("m,lambda_min,status\n{},,none\n", report.m),
                }),
                Format::Text => {
                    let mut s = header(cfg);
                    match report.lambda_min {
                        Some(l) => writeln!(s, "lambda_{} > {l:.4}", report.m),
                        None => writeln!(s, "lambda_{}: no valid range", report.m),
                    }
                    .expect("write to string");
                    Ok(s)
                }
            }
        }
        Command::Optimize => {
            let spec = spec_of(cfg)?;
            let m = cfg.observer.unwrap_or(spec.observers.len());
            let (best, value) = optimize_angles(&spec, m, &cfg.search)?;
            let mut fixed = cfg.search;
            fixed.optimizer = crate::search::Optimizer::FixedXyz;
            let (_, baseline) = optimize_angles(&spec, m, &fixed)?;
            let report = OptimizeReport {
                observer: m,
                lambda: best.lambda.value(),
                baseline,
                value,
                directions: best.directions,
            };
            match cfg.format {
                Format::Json => json(&report),
                Format::Csv => {
                    let mut s = String::from("observer,lambda,baseline,value");
                    for k in 1..=3 {
                        write!(s, ",theta{k},phi{k}").expect("write to string");
                    }
                    write!(s, "\n{},{},{:.6},{:.6}", m, report.lambda, baseline, value).expect("write to string");
                    for d in &best.directions {
                        write!(s, ",{:.6},{:.6}", d.theta(), d.phi()).expect("write to string");
                    }
                    s.push('\n');
                    Ok(s)
                }
                Format::Text => {
                    let mut s = header(cfg);
                    writeln!(s, "observer {m}, lambda {:.4}", report.lambda).expect("write to string");
                    writeln!(s, "X, Y, Z value: {baseline:+.6}").expect("write to string");
                    writeln!(s, "best value:    {value:+.6}").expect("write to string");
                    for (k, d) in best.directions.iter().enumerate() {
                        writeln!(s, "setting {}: {}", k + 1, fmt_dir(d)).expect("write to string");
                    }
                    Ok(s)
                }
            }
        }
        Command::Audit => {
            let spec = spec_of(cfg)?;
            let report = AuditReport {
                observers: spec.observers.len(),
                max_deviation: no_signalling_audit(&spec)?,
            };
            match cfg.format {
                Format::Json => json(&report),
                Format::Csv => Ok(format!(
                    "observers,max_deviation\n{},{:e}\n",
                    report.observers, report.max_deviation
                )),
                Format::Text => Ok(format!(
                    "{}max no-signalling deviation over {} observer(s): {:e}\n",
                    header(cfg),
                    report.observers,
                    report.max_deviation
                )),
            }
        }
    }
}

/// Renders and writes to `--out` when given; otherwise returns the text for
/// stdout.
pub fn run(cfg: &RunConfig) -> Result<Option<String>> {
    let text = render(cfg)?;
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, text)
                .map_err(|e| Error::InvalidConfig(format!("--out {}: {e}", path.display())))?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("SEQSTEER_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("SEQSTEER_THREADS: `{v}` is not a positive integer")))?;
    // fails only if the global pool already exists
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (command, args) = split(cli);
    let result = configure_threads()
        .and_then(|_| config::resolve(command, args))
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(Some(text)) => {
            print!("{text}");
            0
        }
        Ok(None) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::Scenario;
    use crate::inequalities::{InequalityKind, SteeringDirection};
    use crate::search::{Optimizer, PredecessorRule};
    use crate::states::StateSpec;

    fn parse(args: &str) -> Result<RunConfig> {
        parse_config(std::iter::once("seqsteer").chain(args.split_whitespace()))
    }

    #[test]
    fn table_flags_map_to_config() {
        let c = parse("table --state ghz --scenario B --direction 1to2").unwrap();
        assert_eq!(c.command, Command::Table);
        assert_eq!(c.scenario, Scenario::B);
        assert_eq!(c.inequality, InequalityKind::G1);
        assert_eq!(c.search.optimizer, Optimizer::FixedXyz);
        assert!(c.lambdas.is_empty());
    }

    #[test]
    fn cascade_defaults() {
        let c = parse("cascade --state ghz --ineq g1 --lambdas 0.627").unwrap();
        assert_eq!(c.lambdas, vec![0.627, 1.0]);
        assert_eq!(c.scenario, Scenario::A);
        assert_eq!(c.direction, SteeringDirection::OneToTwo);
        let c = parse("cascade --state w --direction 2to1").unwrap();
        assert_eq!(c.inequality, InequalityKind::W2);
        assert_eq!(c.lambdas, vec![1.0]);
    }

    #[test]
    fn missing_state_lists_choices() {
        let e = parse("cascade --ineq g1").unwrap_err().to_string();
        assert!(e.contains("ghz, w, custom:<path>"), "{e}");
    }

    #[test]
    fn diagnostics_name_the_key() {
        let cases = [
            ("cascade --state ghz --scenario C", "--scenario"),
            ("cascade --state ghz --ineq g3", "--ineq"),
            ("cascade --state ghz --format xml", "--format"),
            ("cascade --state ghz --lambdas 0.5,x", "--lambdas"),
            ("cascade --state ghz --lambdas 1.5", "--lambdas"),
            ("cascade --state qutrit", "--state"),
            ("table --state ghz --tol 0", "--tol"),
            ("table --state ghz --lambdas 0.5", "--lambdas"),
            ("cascade --state ghz --observer 1", "--observer"),
        ];
        for (args, key) in cases {
            let e = parse(args).unwrap_err().to_string();
            assert!(e.contains(key), "{args}: {e}");
        }
    }

    #[test]
    fn conflicting_direction_and_inequality() {
        let e = parse("cascade --state ghz --direction 2to1 --ineq g1").unwrap_err().to_string();
        assert!(e.contains("conflicts"), "{e}");
    }

    #[test]
    fn custom_state_requires_inequality() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.txt");
        let rho = crate::states::build_state(&StateSpec::Ghz).unwrap();
        std::fs::write(&path, crate::states::format_state_text(&rho)).unwrap();
        let arg = format!("cascade --state custom:{}", path.display());
        assert!(parse(&arg).unwrap_err().to_string().contains("--ineq"));
        let c = parse(&format!("{arg} --ineq g1")).unwrap();
        assert!(matches!(c.state, StateSpec::Custom(_)));
    }

    #[test]
    fn file_values_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "[scenario]\nstate = \"w\"\nscenario = \"B\"\nlambdas = [0.6]\n\n[search]\ntolerance = 1e-5\npredecessor_lambda = 0.3\n\n[output]\nformat = \"json\"\n",
        )
        .unwrap();
        let base = format!("cascade --config {}", path.display());
        let c = parse(&base).unwrap();
        assert_eq!(c.state, StateSpec::W);
        assert_eq!(c.scenario, Scenario::B);
        assert_eq!(c.lambdas, vec![0.6, 1.0]);
        assert_eq!(c.search.tolerance, 1e-5);
        assert_eq!(c.format, Format::Json);
        assert_eq!(
            c.search.predecessor_rule,
            PredecessorRule::Fixed(Sharpness::new(0.3).unwrap())
        );
        let c = parse(&format!("{base} --scenario A --format csv --tol 1e-3")).unwrap();
        assert_eq!(c.scenario, Scenario::A);
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.search.tolerance, 1e-3);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[scenario]\nstate = \"ghz\"\nsharpness = 0.5\n").unwrap();
        let e = parse(&format!("cascade --config {}", path.display())).unwrap_err().to_string();
        assert!(e.contains("sharpness"), "{e}");
        std::fs::write(&path, "[scenario]\nstate = \"ghz\"\nscenario = \"Q\"\n").unwrap();
        let e = parse(&format!("cascade --config {}", path.display())).unwrap_err().to_string();
        assert!(e.contains("scenario.scenario"), "{e}");
    }

    #[test]
    fn optimize_defaults_to_grid_search() {
        let c = parse("optimize --state ghz --ineq g1").unwrap();
        assert_eq!(c.search.optimizer, Optimizer::GridRefine);
        let c = parse("optimize --state ghz --optimizer nelder-mead --grid 7").unwrap();
        assert_eq!(c.search.optimizer, Optimizer::NelderMead);
        assert_eq!(c.search.grid.theta_samples, 7);
    }

    #[test]
    fn threshold_keeps_predecessors_only() {
        let c = parse("threshold --state ghz --lambdas 0.5775").unwrap();
        assert_eq!(c.lambdas, vec![0.5775]);
        let text = render(&c).unwrap();
        assert!(text.contains("lambda_2 > 0.65"), "{text}");
    }
}
