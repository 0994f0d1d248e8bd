//! `diskmc`: explore a model to disk, check a property against an explored
//! working directory, inspect a working directory, or run the bundled
//! corpus.
//!
//! Exit codes: 0 on success, 1 when a run or a self-test check fails, 2 on
//! usage errors (bad flags, unreadable or ill-formed models, unknown
//! properties, a working directory that cannot be used).

mod info;
mod report;
mod selftest;
mod workdir;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use diskmc_core::{
    analyze, compile, explore, AnalysisReport, Compiled, ConvergenceConfig, Error,
    ExplorationConfig, ExplorationReport, PartitionStore, PropertyKind,
};

use report::{Format, Report};

#[derive(Parser, Debug)]
#[command(name = "diskmc", version, about = "Out-of-core probabilistic model checker for MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Explore the state space into a working directory.
    Explore {
        #[command(flatten)]
        model: ModelArgs,
        /// Directory that receives the partition files.
        #[arg(long)]
        workdir: PathBuf,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Explore, then compute the property's value.
    Check {
        #[command(flatten)]
        model: ModelArgs,
        /// Directory for the partition files; a temporary one by default.
        #[arg(long)]
        workdir: Option<PathBuf>,
        #[command(flatten)]
        opts: RunArgs,
        #[command(flatten)]
        convergence: ConvergenceArgs,
    },
    /// Print per-partition statistics of an explored working directory.
    Info {
        /// Working directory written by `explore` or `check`.
        #[arg(long)]
        workdir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run the bundled models and compare against known values.
    Selftest {
        /// Restrict to these corpus models (repeatable).
        #[arg(long = "model")]
        models: Vec<String>,
        /// Compress partition files.
        #[arg(long)]
        compress: bool,
    },
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model file in the guarded-command language.
    model: PathBuf,
    /// Property name declared in the model, or an inline property such as
    /// `Pmax=? [F x=3]`. Defaults to the first declared property.
    #[arg(long)]
    property: Option<String>,
    /// Partition expression overriding the model's, e.g. `floor(x/8)+1 bound 4`.
    #[arg(long)]
    partition: Option<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Compress partition files with LZ4 frames.
    #[arg(long)]
    compress: bool,
    /// Clear a non-empty working directory left by an earlier run.
    #[arg(long)]
    force: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    /// Relative-error threshold for value iteration.
    #[arg(
        long,
        default_value_t = diskmc_core::analyze::DEFAULT_EPSILON,
        value_parser = parse_epsilon,
        allow_hyphen_values = true
    )]
    epsilon: f64,
    /// Give up after this many outer iterations.
    #[arg(long)]
    max_outer: Option<usize>,
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("epsilon must be a finite positive number".into())
    }
}

/// Failure classes, mapped to exit codes 2 and 1.
enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::Type(_) | Error::UnknownProperty(_) | Error::Workdir(_) => {
                Failure::Usage(e.into())
            }
            _ => Failure::Run(e.into()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.into())
    }
}

fn load(args: &ModelArgs) -> Result<Compiled, Failure> {
    let src = std::fs::read_to_string(&args.model)
        .with_context(|| format!("cannot read {}", args.model.display()))
        .map_err(Failure::Usage)?;
    let property = match &args.property {
        Some(p) => p.clone(),
        None => {
            let ast = diskmc_core::lang::parse_model(&src)
                .map_err(|e| Failure::Usage(anyhow!("{}: {e}", args.model.display())))?;
            ast.properties.first().map(|p| p.name.clone()).ok_or_else(|| {
                Failure::Usage(anyhow!(
                    "{} declares no property; pass --property",
                    args.model.display()
                ))
            })?
        }
    };
    compile(&src, &property, args.partition.as_deref()).map_err(|e| match Failure::from(e) {
        Failure::Usage(e) => Failure::Usage(e.context(args.model.display().to_string())),
        other => other,
    })
}

fn prepare_workdir(dir: &Path, force: bool) -> Result<(), Failure> {
    workdir::prepare(dir, force).map_err(Failure::Usage)
}

fn model_rows(r: &mut Report, args: &ModelArgs, c: &Compiled) {
    r.show("model", "model", args.model.display());
    r.show("property", "property", &c.property_spec);
    r.show("partition", "partitioning", &c.partition);
}

fn exploration_rows(r: &mut Report, e: &ExplorationReport, compressed: bool) {
    r.show("states_total", "states", e.states_total);
    r.show("p", "partitions", e.partition_count);
    r.show("n_max", "n_max", e.n_max);
    r.show("s_max", "s_max", e.s_max);
    r.show("c_max", "c_max", e.c_max);
    r.show("outer_explore", "explore passes", e.outer_iterations);
    r.show("explore_seconds", "explore seconds", report::seconds(e.seconds));
    r.show("compressed", "compressed", compressed);
    r.show("matrix_bytes_raw", "matrix bytes raw", e.matrix_bytes_raw);
    r.show("matrix_bytes_disk", "matrix bytes disk", e.matrix_bytes_disk);
    r.kv("transitions_total", e.transitions_total);
    r.kv("branches_total", e.branches_total);
    r.kv("cross_branches", e.cross_edge_count);
    r.kv("peak_resident_states", e.peak_resident_states);
    r.kv("explore_bytes_read", e.io.bytes_read);
    r.kv("explore_bytes_written", e.io.bytes_written);
    r.kv("explore_backward_seeks", e.io.backward_seeks);
    for (kind, bytes) in &e.bytes_written {
        r.kv(format!("written.{kind}"), bytes);
    }
}

fn analysis_rows(r: &mut Report, a: &AnalysisReport, kind: PropertyKind) {
    r.show("outer_check", "check passes", a.outer_iterations);
    r.show("check_seconds", "check seconds", report::seconds(a.check_seconds()));
    r.kv("inner_sweeps", a.inner_sweeps);
    r.kv("partition_visits", a.partition_visits);
    if let Some(pre) = a.precompute {
        r.kv("precompute_outer", pre.outer_iterations);
        r.kv("precompute_rounds", pre.nested_rounds);
        r.kv("precompute_seconds", report::seconds(a.precompute_seconds));
    }
    r.kv("iterate_seconds", report::seconds(a.iterate_seconds));
    r.kv("check_bytes_read", a.io.bytes_read);
    r.kv("check_bytes_written", a.io.bytes_written);
    r.kv("check_backward_seeks", a.io.backward_seeks);
    let label = match kind {
        PropertyKind::ReachProbability => "probability",
        PropertyKind::ExpectedReward => "expected reward",
    };
    r.show("value", label, report::value(a.value));
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Explore {
            model,
            workdir,
            opts,
        } => {
            let c = load(&model)?;
            prepare_workdir(&workdir, opts.force)?;
            let mut cfg = ExplorationConfig::new(&workdir);
            cfg.compress = opts.compress;
            let e = explore(&c.model, &c.property, &cfg)?;
            let mut r = Report::default();
            model_rows(&mut r, &model, &c);
            r.show("workdir", "workdir", workdir.display());
            exploration_rows(&mut r, &e, opts.compress);
            r.write(opts.format, &mut out)?;
        }
        Command::Check {
            model,
            workdir,
            opts,
            convergence,
        } => {
            let c = load(&model)?;
            let tmp;
            let dir = match workdir {
                Some(d) => {
                    prepare_workdir(&d, opts.force)?;
                    d
                }
                None => {
                    tmp = tempfile::tempdir()?;
                    tmp.path().join("work")
                }
            };
            let mut cfg = ExplorationConfig::new(&dir);
            cfg.compress = opts.compress;
            let conv = ConvergenceConfig {
                epsilon: convergence.epsilon,
                max_outer: convergence.max_outer,
            };
            let e = explore(&c.model, &c.property, &cfg)?;
            let store = PartitionStore::new(&dir, opts.compress);
            let a = analyze(&store, &c.property, &conv)?;
            let mut r = Report::default();
            model_rows(&mut r, &model, &c);
            r.show("epsilon", "epsilon", format!("{:e}", conv.epsilon));
            exploration_rows(&mut r, &e, opts.compress);
            analysis_rows(&mut r, &a, c.property.kind);
            r.write(opts.format, &mut out)?;
        }
        Command::Info { workdir, format } => {
            let r = info::report(&workdir).map_err(Failure::Run)?;
            r.write(format, &mut out)?;
        }
        Command::Selftest { models, compress } => {
            let summary = selftest::run(&models, compress, &mut out).map_err(Failure::Usage)?;
            out.flush()?;
            if summary.failed > 0 {
                return Ok(ExitCode::from(1));
            }
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

/// Joins the error chain, skipping causes already spelled out by the
/// message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (e, code) = match run(cli) {
        Ok(code) => return code,
        Err(Failure::Usage(e)) => (e, 2),
        Err(Failure::Run(e)) => (e, 1),
    };
    eprintln!("diskmc: {}", describe(&e));
    ExitCode::from(code)
}
