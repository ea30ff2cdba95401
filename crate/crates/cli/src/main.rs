use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cmcq::bound::{compute_bound_with, format_rational, BoundMode, Optimizations};
use cmcq::engine::{evaluate, Algorithm, Database, Metrics, ResultSet};
use cmcq::model::{parse_query, validate, ValidatedQuery};
use cmcq::par::Execution;
use cmcq::testkit::{gen_family, FamilyKind, QUERY_FILE};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "cmcq", version, about = "Size bounds and evaluation for cross-model conjunctive queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print worst-case size exponents as JSON.
    Bound {
        query: PathBuf,
        #[arg(long, value_enum, default_value_t = BoundSelection::All)]
        mode: BoundSelection,
        /// Disable the conversion-before-split pruning.
        #[arg(long)]
        no_opt1: bool,
        /// Disable the leaf-split pruning.
        #[arg(long)]
        no_opt2: bool,
    },
    /// Evaluate a query over the data files it names.
    Run {
        query: PathBuf,
        #[arg(long, default_value = "cmjoin")]
        algo: AlgoArg,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Result file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Metrics report file; standard error when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Run the join on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Write a generated instance and its query file into a directory.
    Gen {
        family: FamilyArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run cmjoin, sj and vj over every family at several scales.
    Bench {
        /// Directory that receives the generated fixtures.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 16, 64])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundSelection {
    All,
    R1,
    R2,
    R3,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

/// clap adapters for the library's own `FromStr` types.
#[derive(Clone, Copy)]
struct AlgoArg(Algorithm);

impl FromStr for AlgoArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(AlgoArg)
    }
}

#[derive(Clone, Copy)]
struct FamilyArg(FamilyKind);

impl FromStr for FamilyArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(FamilyArg).map_err(|e: cmcq::testkit::TestkitError| e.to_string())
    }
}

/// A broken internal invariant, reported with exit code 2.
#[derive(Debug)]
struct Internal(String);

impl fmt::Display for Internal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "internal error: {}", self.0)
    }
}

impl std::error::Error for Internal {}

fn main() -> ExitCode {
    // Usage errors share exit code 1 with bad input; 2 is kept for
    // internal failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Bound { query, mode, no_opt1, no_opt2 } => {
            cmd_bound(&query, mode, Optimizations { opt1: !no_opt1, opt2: !no_opt2 })
        }
        Command::Run { query, algo, format, out, report, sequential } => {
            let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            cmd_run(&query, algo.0, format, out.as_deref(), report.as_deref(), exec)
        }
        Command::Gen { family, n, dir, seed } => cmd_gen(family.0, n, &dir, seed),
        Command::Bench { dir, out, sizes, seed } => cmd_bench(&dir, &out, &sizes, seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Internal>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn read_query(path: &Path) -> Result<ValidatedQuery> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let q = parse_query(&text).with_context(|| format!("in {}", path.display()))?;
    validate(q).with_context(|| format!("in {}", path.display()))
}

fn cmd_bound(path: &Path, selection: BoundSelection, opts: Optimizations) -> Result<()> {
    let q = read_query(path)?;
    let modes = [("rho1", "r1", BoundMode::AllPositions), ("rho2", "r2", BoundMode::BranchPositions), ("rho3", "r3", BoundMode::LabelsOnly)];
    let mut out = Map::new();
    let mut reports = Map::new();
    for (key, short, mode) in modes {
        let wanted = match selection {
            BoundSelection::All => true,
            BoundSelection::R1 => short == "r1",
            BoundSelection::R2 => short == "r2",
            BoundSelection::R3 => short == "r3",
        };
        if !wanted {
            continue;
        }
        let b = compute_bound_with(&q, mode, opts);
        out.insert(key.into(), Value::String(format_rational(&b.exponent)));
        reports.insert(short.into(), serde_json::to_value(b.report())?);
    }
    out.insert("reports".into(), Value::Object(reports));
    writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&Value::Object(out))?)?;
    Ok(())
}

fn base_dir(query: &Path) -> &Path {
    query.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."))
}

fn execute(path: &Path, algo: Algorithm, exec: Execution) -> Result<(ResultSet, Metrics)> {
    let q = read_query(path)?;
    let db = Database::load(q.query(), base_dir(path))?;
    let (rs, metrics) = evaluate(algo, &q, &db, exec)?;
    if !metrics.audit() {
        return Err(Internal("intermediate total does not match its steps".into()).into());
    }
    if rs.rows.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Internal("result rows are not sorted and distinct".into()).into());
    }
    Ok((rs, metrics))
}

fn cmd_run(
    path: &Path,
    algo: Algorithm,
    format: Format,
    out: Option<&Path>,
    report: Option<&Path>,
    exec: Execution,
) -> Result<()> {
    let (rs, metrics) = execute(path, algo, exec)?;
    let text = match format {
        Format::Csv => rs.to_csv(),
        Format::Jsonl => rs.to_jsonl(),
    };
    match out {
        Some(f) => std::fs::write(f, text).with_context(|| format!("cannot write {}", f.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    let json = serde_json::to_string_pretty(&metrics)?;
    match report {
        Some(f) => std::fs::write(f, json + "\n").with_context(|| format!("cannot write {}", f.display()))?,
        None => eprintln!("{json}"),
    }
    Ok(())
}

fn cmd_gen(kind: FamilyKind, n: usize, dir: &Path, seed: u64) -> Result<()> {
    let f = gen_family(kind, n, seed)?;
    let path = f.write(dir).with_context(|| format!("cannot write fixtures to {}", dir.display()))?;
    writeln!(std::io::stdout(), "{}", path.display())?;
    Ok(())
}

fn cmd_bench(dir: &Path, out: &Path, sizes: &[usize], seed: u64) -> Result<()> {
    if sizes.is_empty() {
        bail!("no sizes given");
    }
    let mut w = csv::Writer::from_path(out).with_context(|| format!("cannot write {}", out.display()))?;
    w.write_record(["query", "algo", "n", "rows", "total_intermediate", "ms"])?;
    for kind in FamilyKind::ALL {
        for &n in sizes {
            let cell = dir.join(format!("{kind}-{n}"));
            let f = gen_family(kind, n, seed)?;
            let query = f.write(&cell).with_context(|| format!("cannot write fixtures to {}", cell.display()))?;
            debug_assert!(query.ends_with(QUERY_FILE));
            for algo in [Algorithm::Cmjoin, Algorithm::Sj, Algorithm::Vj] {
                let (rs, m) = execute(&query, algo, Execution::Sequential)?;
                w.write_record([
                    kind.name().to_owned(),
                    algo.name().to_owned(),
                    n.to_string(),
                    rs.len().to_string(),
                    m.total_intermediate.to_string(),
                    format!("{:.3}", m.total_ms),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
