//! `spatprice`: scenario-driven front end for the spatial pricing solvers.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid scenario or arguments,
//! 3 search budget refused by a solver, 4 methods that disagree under
//! `compare` or a bundle that fails `validate`.

mod run;
mod scenario;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spatprice::{SearchConfig, SearchMode};

use run::{Bundle, Provenance};
use scenario::Scenario;

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Budget(String),
    Io(anyhow::Error),
}

impl From<spatprice::Error> for Failure {
    fn from(e: spatprice::Error) -> Self {
        match e {
            spatprice::Error::BudgetExceeded { .. } => Failure::Budget(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Budget(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "invalid input: {m}"),
            Failure::Budget(m) => write!(f, "solver refused: {m}"),
            Failure::Io(e) => write!(f, "i/o error: {e:#}"),
        }
    }
}

fn io(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Io(e.into())
}

#[derive(Parser)]
#[command(
    name = "spatprice",
    version,
    about = "Optimal spatial pricing under transportation costs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write the result bundle.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Solver name, optionally suffixed with `:exhaustive` or `:ascent`.
        #[arg(long)]
        method: Option<String>,
        /// Write only one kind of output (both by default).
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Solve a scenario with several methods and tabulate the results.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated method names, each optionally suffixed with a
        /// search mode as in `w_search:ascent`.
        #[arg(long, value_delimiter = ',', required = true)]
        methods: Vec<String>,
        /// Also write the table (without runtimes) to DIR/compare.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a result bundle against its embedded scenario.
    Validate {
        #[arg(long)]
        result: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the solvers (all cores by default).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Structured,
}

struct Loaded {
    text: String,
    scenario: Scenario,
    seed: u64,
}

fn load(common: &Common) -> Result<Loaded, Failure> {
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(Failure::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Validation(format!("thread pool: {e}")))?;
    }
    let text = fs::read_to_string(&common.scenario).map_err(|e| {
        Failure::Validation(format!("cannot read {}: {e}", common.scenario.display()))
    })?;
    let scenario = Scenario::parse(&text)?;
    let seed = common.seed.unwrap_or(scenario.seed);
    Ok(Loaded {
        text,
        scenario,
        seed,
    })
}

/// 17 significant digits, `inf` for unbounded values.
fn real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v > 0.0 {
        "inf".into()
    } else if v < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

fn series_csv(bundle: &Bundle) -> String {
    let s = &bundle.series;
    let dim = s.coords.first().map_or(1, Vec::len);
    let mut out = String::from(if dim == 2 { "index,x,y" } else { "index,x" });
    out.push_str(",price,value,assignment,captured\n");
    for i in 0..s.price.len() {
        let _ = write!(out, "{i}");
        for c in &s.coords[i] {
            let _ = write!(out, ",{}", real(*c));
        }
        let price = s.price[i].map(real).unwrap_or_default();
        let target = s.assignment[i].map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            ",{price},{},{target},{}",
            real(s.value[i]),
            u8::from(s.captured[i])
        );
    }
    out
}

fn trace_csv(bundle: &Bundle) -> String {
    let mut out = String::from("round,player,sup_delta,payoff\n");
    for r in &bundle.trace {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.round,
            r.player,
            real(r.sup_delta),
            real(r.payoff)
        );
    }
    out
}

fn write_bundle(dir: &Path, bundle: &Bundle, format: Option<Format>) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(io)?;
    if format != Some(Format::Csv) {
        let mut json = serde_json::to_string_pretty(bundle).map_err(io)?;
        json.push('\n');
        fs::write(dir.join("result.json"), json).map_err(io)?;
    }
    if format != Some(Format::Structured) {
        fs::write(dir.join("series.csv"), series_csv(bundle)).map_err(io)?;
        if !bundle.trace.is_empty() {
            fs::write(dir.join("trace.csv"), trace_csv(bundle)).map_err(io)?;
        }
    }
    Ok(())
}

/// `name` or `name:mode`, the suffix overriding the scenario's search mode.
fn method_and_config(name: &str, base: &SearchConfig) -> Result<(String, SearchConfig), Failure> {
    let mut cfg = *base;
    let (method, mode) = match name.split_once(':') {
        Some((m, mode)) => (m, Some(mode)),
        None => (name, None),
    };
    match mode {
        None => {}
        Some("exhaustive") => cfg.mode = SearchMode::Exhaustive,
        Some("ascent") => cfg.mode = SearchMode::Ascent,
        Some(other) => return Err(Failure::Validation(format!("unknown search mode {other}"))),
    }
    Ok((method.to_owned(), cfg))
}

fn cmd_run(
    common: &Common,
    out: &Path,
    method: Option<&str>,
    format: Option<Format>,
) -> Result<(), Failure> {
    let loaded = load(common)?;
    let sc = &loaded.scenario;
    let inst = sc.instance()?;
    let (method, cfg) = method_and_config(&sc.method(method), &sc.search_config(loaded.seed)?)?;
    let outcome = run::solve(sc, &inst, &method, &cfg)?;
    let bundle = Bundle {
        provenance: Provenance {
            tool: run::TOOL.into(),
            version: run::VERSION.into(),
            scenario_sha256: run::sha256_hex(loaded.text.as_bytes()),
            seed: loaded.seed,
        },
        scenario: loaded.text.clone(),
        summary: outcome.summary,
        report: outcome.report,
        series: outcome.series,
        trace: outcome.trace,
    };
    write_bundle(out, &bundle, format)?;
    println!(
        "{} {}: profit {}",
        bundle.summary.model,
        bundle.summary.method,
        real(bundle.summary.profit)
    );
    Ok(())
}

fn cmd_compare(common: &Common, methods: &[String], out: Option<&Path>) -> Result<bool, Failure> {
    let loaded = load(common)?;
    let sc = &loaded.scenario;
    let inst = sc.instance()?;
    let base = sc.search_config(loaded.seed)?;
    let mut rows = Vec::new();
    for m in methods {
        let (method, cfg) = method_and_config(m, &base)?;
        let start = Instant::now();
        let outcome = run::solve(sc, &inst, &method, &cfg)?;
        rows.push((m.clone(), outcome, start.elapsed().as_secs_f64()));
    }
    let first = &rows[0].1.series.price;
    let mut table = String::from("method,profit,discrete_profit,max_price_deviation,resolution\n");
    let mut stdout =
        String::from("method,profit,discrete_profit,max_price_deviation,resolution,runtime_s\n");
    for (m, o, secs) in &rows {
        let dev = o
            .series
            .price
            .iter()
            .zip(first)
            .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).abs()))
            .fold(0.0, f64::max);
        let line = format!(
            "{m},{},{},{},{}",
            real(o.summary.profit),
            real(o.summary.discrete_profit),
            real(dev),
            real(o.resolution)
        );
        let _ = writeln!(table, "{line}");
        let _ = writeln!(stdout, "{line},{secs:.3}");
    }
    let mass = inst.measure.total_mass();
    let tolerance = mass * rows.iter().map(|(_, o, _)| o.resolution).sum::<f64>()
        + inst.kernel.tol() * (1.0 + mass);
    let profits: Vec<f64> = rows.iter().map(|(_, o, _)| o.summary.profit).collect();
    let spread = profits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - profits.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let agree = spread <= tolerance;
    let tail = format!(
        "max_profit_delta,{}\ntolerance,{}\nagree,{agree}\n",
        real(spread),
        real(tolerance)
    );
    table.push_str(&tail);
    stdout.push_str(&tail);
    print!("{stdout}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join("compare.csv"), table).map_err(io)?;
    }
    Ok(agree)
}

fn cmd_validate(path: &Path) -> Result<bool, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
    let bundle: Bundle = serde_json::from_str(&text)
        .map_err(|e| Failure::Validation(format!("result bundle: {e}")))?;
    let problems = run::validate(&bundle)?;
    for p in &problems {
        println!("violation: {p}");
    }
    if problems.is_empty() {
        println!("ok");
    }
    Ok(problems.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            common,
            out,
            method,
            format,
        } => cmd_run(common, out, method.as_deref(), *format).map(|_| true),
        Command::Compare {
            common,
            methods,
            out,
        } => cmd_compare(common, methods, out.as_deref()),
        Command::Validate { result } => cmd_validate(result),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("spatprice: {e}");
            ExitCode::from(e.code())
        }
    }
}
