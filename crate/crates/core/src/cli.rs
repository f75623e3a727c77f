//! Command-line experiment runner.
//!
//! Exit codes: 0 success, 2 usage, 3 parse, 4 validation, 5 optimizer
//! options, 6 execution, 7 I/O. Failures print a single line
//! `error: code=<KIND> detail=<message>` to stderr.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::channel::{
    classify_state, sample_law, validate_law, ChannelError, DistributionSpec, FadingLaw, FadingState, PowerMode,
};
use crate::exec::{with_jobs, Exec};
use crate::optimize::{maximize_joint, maximize_separable, OptimizationResult, OptimizeError, OptimizeOptions};
use crate::rates;
use crate::schemes::{self, SchemeError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Classify,
    OptimizeJoint,
    OptimizeSeparable,
    Compare,
    SubclassReport,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dist {
    Rayleigh,
    Lognormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Multiplies both cross gains of every state.
    Cross,
    /// Multiplies both budgets.
    Budget,
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "hkfade",
    version,
    about = "Han-Kobayashi sum-rates for ergodic fading interference channels"
)]
pub struct Args {
    /// Law file (JSON).
    #[arg(long, value_name = "FILE", conflicts_with_all = ["dist", "state"])]
    pub law: Option<PathBuf>,
    /// Inline state `g11,g12,g21,g22`; repeat for several equiprobable states.
    #[arg(long, value_name = "GAINS", conflicts_with = "dist")]
    pub state: Vec<String>,
    /// Sample the law from a fading distribution.
    #[arg(long, value_enum)]
    pub dist: Option<Dist>,
    /// Number of sampled states.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Seed for sampling and for the optimizer's random starts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mean-square gains `g11,g12,g21,g22` of the sampled links.
    #[arg(long, value_name = "GAINS", default_value = "1,0.5,0.5,1")]
    pub gains: String,
    /// Log-normal spread in dB.
    #[arg(long, default_value_t = 6.0)]
    pub sigma_db: f64,
    /// Power budgets `B1,B2`; a law file's own budgets apply when omitted.
    #[arg(long, value_name = "B1,B2")]
    pub budgets: Option<String>,
    /// Power constraint; a law file's own mode applies when omitted.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<PowerMode>,
    #[arg(long, value_enum)]
    pub task: Task,
    /// Random restarts on top of the structured starts [default: 8].
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Ascent iterations per start [default: 2000].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Step size numerator `a` in `a / (1 + t / b)` [default: 0.25].
    #[arg(long)]
    pub step_a: Option<f64>,
    /// Step size decay `b` [default: 50].
    #[arg(long)]
    pub step_b: Option<f64>,
    /// Bounds within this of the minimum count as active [default: 1e-6].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed the joint ascent with the best point of a grid search.
    #[arg(long, value_name = "G")]
    pub oracle_grid: Option<usize>,
    /// Output directory for report.json and CSV tables; the report goes to
    /// stdout when omitted.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum, default_value_t = SweepParam::Cross)]
    pub sweep_param: SweepParam,
    /// Comma-separated scale factors (default 0.1, 0.2, ..., 3.0).
    #[arg(long, value_name = "LIST")]
    pub sweep_values: Option<String>,
}

fn parse_mode(s: &str) -> Result<PowerMode, String> {
    s.parse()
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Options(String),
    #[error("{0}")]
    Execution(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Options(_) => 5,
            CliError::Execution(_) => 6,
            CliError::Io(_) => 7,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "PARSE",
            CliError::Validation(_) => "VALIDATION",
            CliError::Options(_) => "OPTIONS",
            CliError::Execution(_) => "EXECUTION",
            CliError::Io(_) => "IO",
        }
    }

    /// The one-line message printed on failure.
    pub fn line(&self) -> String {
        let detail = self.to_string().replace('\n', " ");
        format!("error: code={} detail={}", self.kind(), detail)
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::InvalidOptions(_) | OptimizeError::GridTooLarge { .. } => CliError::Options(e.to_string()),
            OptimizeError::InfeasibleLaw(_) | OptimizeError::InvalidBudget(_) => CliError::Validation(e.to_string()),
            OptimizeError::Rate(_) => CliError::Execution(e.to_string()),
        }
    }
}

impl From<SchemeError> for CliError {
    fn from(e: SchemeError) -> Self {
        match e {
            SchemeError::Optimize(inner) => inner.into(),
            other => CliError::Execution(other.to_string()),
        }
    }
}

/// Reads and validates a law file. Unknown fields and numbers outside the
/// `f64` range are rejected with the offending line and column.
pub fn parse_law_file(path: &Path) -> Result<FadingLaw, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_law_str(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_law_str(text: &str) -> Result<FadingLaw, CliError> {
    let law: FadingLaw = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(validate_law(law)?)
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Parse(format!("{what}: `{t}` is not a finite number")))
        })
        .collect()
}

fn parse_fixed<const N: usize>(s: &str, what: &str) -> Result<[f64; N], CliError> {
    let v = parse_list(s, what)?;
    v.try_into()
        .map_err(|v: Vec<f64>| CliError::Parse(format!("{what}: expected {N} values, got {}", v.len())))
}

/// Law source after flag resolution, recorded in the report.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Source {
    File {
        path: String,
    },
    Inline,
    Sampled {
        distribution: DistributionSpec,
        n: usize,
        seed: u64,
    },
}

fn resolve_law(args: &Args) -> Result<(FadingLaw, Source), CliError> {
    let budgets = args
        .budgets
        .as_deref()
        .map(|b| parse_fixed::<2>(b, "--budgets"))
        .transpose()?;
    if let Some(path) = &args.law {
        let mut law = parse_law_file(path)?;
        if let Some([b1, b2]) = budgets {
            law.budget1 = b1;
            law.budget2 = b2;
        }
        if let Some(m) = args.mode {
            law.mode = m;
        }
        let law = validate_law(law)?;
        return Ok((
            law,
            Source::File {
                path: path.display().to_string(),
            },
        ));
    }
    let budgets = budgets.unwrap_or([1.0, 1.0]);
    let mode = args.mode.unwrap_or_default();
    if !args.state.is_empty() {
        let states = args
            .state
            .iter()
            .map(|s| parse_fixed::<4>(s, "--state").map(|g| FadingState::new(g[0], g[1], g[2], g[3])))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok((FadingLaw::uniform(states, budgets, mode)?, Source::Inline));
    }
    let Some(dist) = args.dist else {
        return Err(CliError::Parse("one of --law, --state or --dist is required".into()));
    };
    let mean_square = parse_fixed::<4>(&args.gains, "--gains")?;
    let distribution = match dist {
        Dist::Rayleigh => DistributionSpec::Rayleigh { mean_square },
        Dist::Lognormal => DistributionSpec::LogNormal {
            mean_square,
            sigma_db: args.sigma_db,
        },
    };
    let law = sample_law(&distribution, args.n, args.seed, budgets, mode)?;
    Ok((
        law,
        Source::Sampled {
            distribution,
            n: args.n,
            seed: args.seed,
        },
    ))
}

fn resolve_options(args: &Args) -> Result<OptimizeOptions, CliError> {
    let d = OptimizeOptions::default();
    let opts = OptimizeOptions {
        restarts: args.restarts.unwrap_or(d.restarts),
        iters: args.iters.unwrap_or(d.iters),
        step_a: args.step_a.unwrap_or(d.step_a),
        step_b: args.step_b.unwrap_or(d.step_b),
        tol: args.tol.unwrap_or(d.tol),
        oracle_grid: args.oracle_grid.or(d.oracle_grid),
        seed: args.seed,
        exec: if args.jobs == Some(1) {
            Exec::Sequential
        } else {
            Exec::Parallel
        },
    };
    opts.validate()?;
    if args.jobs == Some(0) {
        return Err(CliError::Options("--jobs must be at least 1".into()));
    }
    Ok(opts)
}

fn sweep_values(args: &Args) -> Result<Vec<f64>, CliError> {
    match &args.sweep_values {
        Some(s) => {
            let v = parse_list(s, "--sweep-values")?;
            if v.iter().any(|&x| x < 0.0) {
                return Err(CliError::Options("sweep values must be nonnegative".into()));
            }
            Ok(v)
        }
        None => Ok((1..=30).map(|i| i as f64 / 10.0).collect()),
    }
}

/// Fixed 12-significant-digit decimal rendering for tables.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // guards against rounding up to the next power of ten
    if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > 12 && decimals > 0 {
        let d = decimals - 1;
        return format!("{x:.d$}");
    }
    s
}

struct Table {
    name: &'static str,
    text: String,
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Self {
        Table {
            name,
            text: header.join(",") + "\n",
        }
    }

    fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }
}

fn state_table(law: &FadingLaw) -> Table {
    let mut t = Table::new("states.csv", &["state", "prob", "g11", "g12", "g21", "g22", "class"]);
    for (i, (s, p)) in law.states.iter().zip(&law.probs).enumerate() {
        let mut cells = vec![i.to_string(), fmt_sig(*p)];
        cells.extend(s.gains().iter().map(|g| fmt_sig(*g)));
        cells.push(format!("{:?}", classify_state(s)));
        t.row(&cells);
    }
    t
}

fn policy_table(law: &FadingLaw, results: &[(&str, &OptimizationResult)]) -> Table {
    let mut header = vec!["state".to_owned(), "prob".to_owned(), "class".to_owned()];
    for (tag, _) in results {
        for col in ["alpha1", "alpha2", "p1", "p2"] {
            header.push(format!("{tag}{col}"));
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new("policy.csv", &header);
    for (i, s) in law.states.iter().enumerate() {
        let mut cells = vec![i.to_string(), fmt_sig(law.probs[i]), format!("{:?}", classify_state(s))];
        for (_, r) in results {
            let a = r.split.0[i];
            let p = r.power.0[i];
            cells.extend([a[0], a[1], p[0], p[1]].iter().map(|v| fmt_sig(*v)));
        }
        t.row(&cells);
    }
    t
}

/// The optimum with all rate bounds and sum-rates spelled out.
fn optimum_json(law: &FadingLaw, r: &OptimizationResult) -> Result<Value, CliError> {
    let b = rates::rate_bounds(law, &r.split, &r.power).map_err(|e| CliError::Execution(e.to_string()))?;
    let mut v = serde_json::to_value(r).map_err(|e| CliError::Execution(e.to_string()))?;
    v["rate_bounds"] = json!(b.0);
    Ok(v)
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Execution(e.to_string()))
}

fn run_task(args: &Args, law: &FadingLaw, opts: &OptimizeOptions) -> Result<(Value, Vec<Table>), CliError> {
    match args.task {
        Task::Classify => {
            let class = schemes::classify_with_evs(law)?;
            let witness = schemes::check_evs(law)?;
            let states: Vec<_> = law.states.iter().map(classify_state).collect();
            Ok((
                json!({
                    "class": to_value(&class)?,
                    "structural": class.structural.to_string(),
                    "state_classes": to_value(&states)?,
                    "evs_witness": to_value(&witness)?,
                }),
                vec![state_table(law)],
            ))
        }
        Task::OptimizeJoint | Task::OptimizeSeparable => {
            let r = if args.task == Task::OptimizeJoint {
                maximize_joint(law, opts)?
            } else {
                maximize_separable(law, opts)?
            };
            let class = schemes::classify_with_evs(law)?;
            Ok((
                json!({
                    "class": to_value(&class)?,
                    "optimum": optimum_json(law, &r)?,
                }),
                vec![state_table(law), policy_table(law, &[("", &r)])],
            ))
        }
        Task::Compare => {
            let c = schemes::compare_joint_vs_separable(law, opts)?;
            let mut v = to_value(&c)?;
            v["joint"] = optimum_json(law, &c.joint)?;
            v["separable"] = optimum_json(law, &c.separable)?;
            let tables = vec![
                state_table(law),
                policy_table(law, &[("joint_", &c.joint), ("separable_", &c.separable)]),
            ];
            Ok((v, tables))
        }
        Task::SubclassReport => {
            let rep = schemes::subclass_report(law, opts)?;
            let mut v = to_value(&rep)?;
            v["sum_rate"] = optimum_json(law, &rep.sum_rate)?;
            let tables = vec![state_table(law), policy_table(law, &[("", &rep.sum_rate)])];
            Ok((v, tables))
        }
        Task::Sweep => {
            let values = sweep_values(args)?;
            let laws: Vec<(f64, FadingLaw)> = values
                .iter()
                .map(|&k| {
                    let mut l = law.clone();
                    match args.sweep_param {
                        SweepParam::Cross => {
                            for s in &mut l.states {
                                s.g12 *= k;
                                s.g21 *= k;
                            }
                        }
                        SweepParam::Budget => {
                            l.budget1 *= k;
                            l.budget2 *= k;
                        }
                    }
                    (k, l)
                })
                .collect();
            let rows = opts.exec.map(laws, |(k, l)| {
                schemes::compare_joint_vs_separable(&l, opts).map(|c| (k, c))
            });
            let mut table = Table::new(
                "sweep.csv",
                &["scale", "class", "evs", "joint_value", "separable_value"],
            );
            let mut points = Vec::new();
            for row in rows {
                let (k, c) = row?;
                table.row(&[
                    fmt_sig(k),
                    c.class.structural.to_string(),
                    c.class.evs.to_string(),
                    fmt_sig(c.joint.value),
                    fmt_sig(c.separable.value),
                ]);
                points.push(json!({
                    "scale": k,
                    "class": to_value(&c.class)?,
                    "joint_value": c.joint.value,
                    "separable_value": c.separable.value,
                    "gap": c.gap,
                }));
            }
            Ok((
                json!({ "parameter": to_value(&args.sweep_param)?, "points": points }),
                vec![table],
            ))
        }
    }
}

/// Everything in the report except the `runtime` section is a pure function
/// of the resolved configuration.
pub fn build_report(args: &Args) -> Result<(Value, Vec<(String, String)>), CliError> {
    let (law, source) = resolve_law(args)?;
    let opts = resolve_options(args)?;
    let started = Instant::now();
    let (result, tables) = with_jobs(args.jobs, || run_task(args, &law, &opts))?;
    let elapsed = started.elapsed().as_secs_f64();
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "library_version": env!("CARGO_PKG_VERSION"),
        "config": {
            "task": to_value(&args.task)?,
            "source": to_value(&source)?,
            "options": to_value(&opts)?,
            "sweep": if args.task == Task::Sweep {
                json!({ "parameter": to_value(&args.sweep_param)?, "values": sweep_values(args)? })
            } else {
                Value::Null
            },
        },
        "law": to_value(&law)?,
        "result": result,
        "runtime": { "elapsed_seconds": elapsed, "jobs": args.jobs },
    });
    Ok((
        report,
        tables.into_iter().map(|t| (t.name.to_owned(), t.text)).collect(),
    ))
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let (report, tables) = build_report(args)?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Execution(e.to_string()))?;
    text.push('\n');
    match &args.out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(dir) => {
            let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
            std::fs::create_dir_all(dir).map_err(io)?;
            std::fs::write(dir.join("report.json"), text).map_err(io)?;
            for (name, body) in tables {
                std::fs::write(dir.join(name), body).map_err(io)?;
            }
            let mut msg = String::new();
            let _ = writeln!(msg, "wrote {}", dir.join("report.json").display());
            eprint!("{msg}");
            Ok(())
        }
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(2.0), "2.00000000000");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(-1234.5), "-1234.50000000");
        assert_eq!(fmt_sig(9.9999999999999), "10.0000000000");
    }

    #[test]
    fn law_parsing() {
        let ok = r#"{"states":[{"g11":1,"g12":0.5,"g21":0.5,"g22":1},{"g11":2,"g12":0.1,"g21":0.3,"g22":1}],
                     "probs":[0.5,0.5],"budget1":1,"budget2":1}"#;
        assert_eq!(parse_law_str(ok).unwrap().len(), 2);
        let neg = ok.replace("\"g12\":0.5", "\"g12\":-0.5");
        assert!(matches!(parse_law_str(&neg), Err(CliError::Validation(m)) if m.contains("g12")));
        let unknown = ok.replace("\"g12\":0.5", "\"g12\":0.5,\"g13\":1");
        assert!(matches!(parse_law_str(&unknown), Err(CliError::Parse(m)) if m.contains("g13")));
        let huge = ok.replace("\"g12\":0.5", "\"g12\":1e400");
        assert!(matches!(parse_law_str(&huge), Err(CliError::Parse(_))));
    }

    #[test]
    fn round_trip() {
        let law = FadingLaw::uniform(
            vec![
                FadingState::new(1.0, 0.3, 0.7, 2.0),
                FadingState::new(0.1, 1.0 / 3.0, 0.2, 1.0),
            ],
            [1.5, 0.25],
            PowerMode::PerStatePower,
        )
        .unwrap();
        assert_eq!(parse_law_str(&law.to_json()).unwrap(), law);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["hkfade", "--task", "classify"]), 3);
        assert_eq!(
            main_with_args(["hkfade", "--task", "classify", "--state", "1,-1,0,1"]),
            4
        );
        assert_eq!(
            main_with_args([
                "hkfade",
                "--task",
                "optimize-joint",
                "--state",
                "1,1,0,1",
                "--oracle-grid",
                "1"
            ]),
            5
        );
        assert_eq!(main_with_args(["hkfade", "--task", "nope"]), 2);
        assert_eq!(
            main_with_args(["hkfade", "--task", "classify", "--law", "/nonexistent/law.json"]),
            7
        );
    }
}
