use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fram::harness::{self, Algorithm, InputSpec, ScalingReport, TrialResult, TrialSpec};
use fram::sandbox::Variant;
use fram::sim::AdversarySpec;

/// Run resilient algorithms on a simulated faulty memory and check every
/// run against an oracle.
#[derive(Parser)]
#[command(name = "fram", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resilient selection of the k-th smallest value.
    Select(Common),
    /// Resilient splitting at position k.
    Split(Common),
    /// Resilient quicksort.
    Sort(Common),
    /// k-d tree build plus random range queries.
    Kdtree {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        dims: usize,
        #[arg(long, default_value_t = 20)]
        queries: usize,
        /// Only build, then check one query covering everything.
        #[arg(long)]
        build_only: bool,
    },
    /// Step-count scaling over several sizes.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "det-select")]
        algorithm: Algorithm,
        /// Comma-separated input sizes.
        #[arg(long, value_delimiter = ',', default_values_t = [1000usize, 10000, 100000])]
        sizes: Vec<usize>,
        /// Comma-separated fault budgets; defaults to --delta.
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<u64>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Target rank or split point; defaults to ceil(n/2).
    #[arg(long)]
    k: Option<usize>,
    /// Corruption budget.
    #[arg(long, default_value_t = 0)]
    delta: u64,
    /// Hide the budget from the algorithm.
    #[arg(long)]
    delta_unknown: bool,
    /// none, uniform[:R], targeted[:R], replica[:R], burst:S,S:SIZE,
    /// scripted-worst[:H], bound-flip[:M].
    #[arg(long, default_value = "none")]
    adversary: AdversarySpec,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// det or rand.
    #[arg(long, default_value = "det")]
    variant: Variant,
    /// random-permutation, reverse, duplicates[:P] or file:PATH.
    #[arg(long, default_value = "random-permutation")]
    input: InputSpec,
    /// Write results as JSON to this file (`-` for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write one CSV row per trial to this file (`-` for stdout).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Dump traces of every trial, not only failing ones.
    #[arg(long)]
    trace: bool,
}

impl Common {
    fn spec(&self, algorithm: Algorithm) -> TrialSpec {
        TrialSpec {
            k: self.k,
            delta: self.delta,
            delta_unknown: self.delta_unknown,
            adversary: self.adversary.clone(),
            trials: self.trials,
            seed: self.seed,
            input: self.input.clone(),
            variant: self.variant,
            ..TrialSpec::new(algorithm, self.n)
        }
    }
}

fn open_output(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdout().lock()));
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn trace_dir() -> PathBuf {
    std::env::var_os("FRAM_TRACE_DIR").map_or_else(|| PathBuf::from("traces"), PathBuf::from)
}

fn dump_traces(spec: &TrialSpec, result: &TrialResult, all: bool) -> Result<()> {
    let wanted: Vec<_> = result.trials.iter().filter(|t| all || !t.passed).collect();
    if wanted.is_empty() {
        return Ok(());
    }
    let dir = trace_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for t in wanted {
        let (_, events) = harness::run_trial(spec, t.index, true)?;
        let path = dir.join(format!(
            "{}-trial{}-seed{:016x}.jsonl",
            spec.algorithm, t.index, t.seed
        ));
        let mut w = BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        for e in events.unwrap_or_default() {
            serde_json::to_writer(&mut w, &e)?;
            writeln!(w)?;
        }
        w.flush()?;
        eprintln!("trace written to {}", path.display());
    }
    Ok(())
}

fn print_trials(r: &TrialResult) {
    let s = &r.spec;
    println!(
        "{} n={} delta={} adversary={} variant={} input={} trials={}",
        s.algorithm, r.trials[0].n, s.delta, s.adversary, s.variant, s.input, s.trials
    );
    println!(
        "{:>6} {:>20} {:>12} {:>8} {:>14} {:>8} {:>7}  result",
        "trial", "seed", "steps", "alpha", "output", "rank_err", "reps"
    );
    for t in &r.trials {
        let output = t.output.map_or_else(|| "-".into(), |v| v.to_string());
        let err = t.rank_error.map_or_else(|| "-".into(), |v| v.to_string());
        let verdict = match &t.failure {
            None => "PASS".to_string(),
            Some(why) => format!("FAIL: {why}"),
        };
        println!(
            "{:>6} {:>20} {:>12} {:>8} {:>14} {:>8} {:>7}  {verdict}",
            t.index, t.seed, t.steps, t.alpha, output, err, t.repetitions
        );
    }
    println!(
        "pass_rate={:.4} mean_steps={:.1} max_steps={} mean_alpha={:.2} steps/{:?}={:.3}",
        r.pass_rate,
        r.mean_steps,
        r.max_steps,
        r.mean_alpha,
        s.algorithm.envelope(),
        r.steps_constant
    );
}

fn write_trials_csv(path: &Path, r: &TrialResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_output(path)?);
    w.write_record([
        "trial",
        "seed",
        "n",
        "steps",
        "alpha",
        "output",
        "rank_error",
        "repetitions",
        "halted",
        "extra_cells",
        "query_cost",
        "reported",
        "passed",
    ])?;
    for t in &r.trials {
        let opt = |v: Option<String>| v.unwrap_or_default();
        w.write_record([
            t.index.to_string(),
            t.seed.to_string(),
            t.n.to_string(),
            t.steps.to_string(),
            t.alpha.to_string(),
            opt(t.output.map(|v| v.to_string())),
            opt(t.rank_error.map(|v| v.to_string())),
            t.repetitions.to_string(),
            t.halted.to_string(),
            t.extra_cells.to_string(),
            t.query_cost.to_string(),
            t.reported.to_string(),
            t.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn print_scaling(r: &ScalingReport) {
    println!("{} scaling, normalized by {:?}", r.algorithm, r.envelope);
    println!(
        "{:>10} {:>8} {:>14} {:>10} {:>10} {:>9}",
        "n", "delta", "mean_steps", "alpha", "constant", "pass"
    );
    for row in &r.rows {
        println!(
            "{:>10} {:>8} {:>14.1} {:>10.2} {:>10.3} {:>9.4}",
            row.n, row.delta, row.mean_steps, row.mean_alpha, row.constant, row.pass_rate
        );
    }
    println!("spread (max/min constant) = {:.3}", r.spread);
}

fn write_scaling_csv(path: &Path, r: &ScalingReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_output(path)?);
    w.write_record([
        "n",
        "delta",
        "mean_steps",
        "mean_alpha",
        "constant",
        "pass_rate",
    ])?;
    for row in &r.rows {
        w.serialize((
            row.n,
            row.delta,
            row.mean_steps,
            row.mean_alpha,
            row.constant,
            row.pass_rate,
        ))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut w = open_output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run_command(common: &Common, spec: TrialSpec) -> Result<bool> {
    let result = harness::run_trials(&spec)?;
    if common.json.as_deref() != Some(Path::new("-"))
        && common.csv.as_deref() != Some(Path::new("-"))
    {
        print_trials(&result);
    }
    if let Some(p) = &common.json {
        write_json(p, &result)?;
    }
    if let Some(p) = &common.csv {
        write_trials_csv(p, &result)?;
    }
    dump_traces(&spec, &result, common.trace)?;
    Ok(result.all_passed())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Select(c) => {
            let algorithm = match c.variant {
                Variant::Deterministic => Algorithm::DetSelect,
                Variant::Randomized => Algorithm::RandSelect,
            };
            let spec = c.spec(algorithm);
            run_command(&c, spec)
        }
        Command::Split(c) => run_command(&c, c.spec(Algorithm::Split)),
        Command::Sort(c) => run_command(&c, c.spec(Algorithm::Quicksort)),
        Command::Kdtree {
            common,
            dims,
            queries,
            build_only,
        } => {
            let algorithm = if build_only {
                Algorithm::KdBuild
            } else {
                Algorithm::KdQuery
            };
            let spec = TrialSpec {
                dims,
                queries,
                ..common.spec(algorithm)
            };
            run_command(&common, spec)
        }
        Command::Bench {
            common,
            algorithm,
            sizes,
            deltas,
        } => {
            let deltas = if deltas.is_empty() {
                vec![common.delta]
            } else {
                deltas
            };
            let report = harness::scaling_report(&common.spec(algorithm), &sizes, &deltas)?;
            if common.json.as_deref() != Some(Path::new("-"))
                && common.csv.as_deref() != Some(Path::new("-"))
            {
                print_scaling(&report);
            }
            if let Some(p) = &common.json {
                write_json(p, &report)?;
            }
            if let Some(p) = &common.csv {
                write_scaling_csv(p, &report)?;
            }
            Ok(report.rows.iter().all(|r| r.pass_rate == 1.0))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
