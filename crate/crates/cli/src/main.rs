use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Arg, ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};

use stress_core::config::KEYS;
use stress_core::manifest::{Input, OutputFormat, RunManifest, Task};
use stress_core::run::{run, RunOptions, RunReport};
use stress_core::series::{ingest_csv, CrisisRegistry};

/// Entropy, recurrence and instantaneous-amplitude stress measures for daily
/// price series.
///
/// Every configuration key is also a flag, e.g. `--entropy.r 0.2`; flags beat
/// manifest values, which beat defaults.
#[derive(Parser, Debug)]
#[command(name = "stress", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug)]
struct Global {
    /// Directory for artifacts (default: the manifest's, or the current one).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Catastrophe outputs: csv, svg or both.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// Worker threads (default: all cores); results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Validate price CSVs and write the cleaned, forward-filled series.
    Ingest { csv: Vec<PathBuf> },
    /// Rolling univariate entropy per file.
    Mse { csv: Vec<PathBuf> },
    /// Rolling multivariate entropy of a basket (at least two files).
    Mmse { csv: Vec<PathBuf> },
    /// Rolling recurrence determinism per file.
    Det { csv: Vec<PathBuf> },
    /// Monthly latent stress index per file.
    Alis { csv: Vec<PathBuf> },
    /// Arousal/performance paths of each target against a basket.
    Catastrophe {
        /// Basket price CSVs (at least two).
        #[arg(long, num_args = 2.., required = true)]
        basket: Vec<PathBuf>,
        /// Performance targets; may repeat basket files.
        #[arg(required = true)]
        target: Vec<PathBuf>,
    },
    /// Execute a run manifest.
    Run { manifest: PathBuf },
}

fn command() -> Command {
    KEYS.iter().fold(Cli::command_for_keys(), |cmd, (key, help)| {
        cmd.arg(
            Arg::new(*key)
                .long(*key)
                .value_name("VALUE")
                .help(*help)
                .global(true)
                .help_heading("Configuration"),
        )
    })
}

impl Cli {
    fn command_for_keys() -> Command {
        <Self as clap::CommandFactory>::command()
    }
}

fn config_flags(matches: &ArgMatches) -> BTreeMap<String, String> {
    KEYS.iter()
        .filter_map(|(k, _)| matches.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect()
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .with_context(|| format!("{} has no file name", path.display()))
}

fn inputs(paths: &[PathBuf]) -> Result<Vec<Input>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in paths {
        let id = stem(p)?;
        if !seen.insert(id.clone()) {
            if out.iter().any(|i: &Input| i.path == *p) {
                continue;
            }
            bail!("two inputs share the instrument id {id}");
        }
        out.push(Input {
            id,
            declared: p.display().to_string(),
            path: p.clone(),
        });
    }
    if out.is_empty() {
        bail!("no input files given");
    }
    Ok(out)
}

fn ad_hoc(task: Task, basket: &[PathBuf], targets: &[PathBuf]) -> Result<RunManifest> {
    let all: Vec<PathBuf> = basket.iter().chain(targets).cloned().collect();
    let inputs = inputs(&all)?;
    let ids = |ps: &[PathBuf]| ps.iter().map(|p| stem(p)).collect::<Result<Vec<_>>>();
    let basket = ids(basket)?;
    if matches!(task, Task::Mmse | Task::Catastrophe) && basket.len() < 2 {
        bail!("{task} needs at least two basket files");
    }
    Ok(RunManifest {
        inputs,
        basket,
        targets: ids(targets)?,
        measures: BTreeSet::from([task]),
        output_dir: PathBuf::from("."),
        format: OutputFormat::default(),
        registry: CrisisRegistry::crisis_segments(),
        config: BTreeMap::new(),
    })
}

fn report(r: &RunReport) -> ExitCode {
    for a in &r.artifacts {
        println!("wrote {}", a.display());
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    for f in &r.failures {
        eprintln!("failed: {f}");
    }
    if r.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ingest(paths: &[PathBuf], out: &Path) -> Result<ExitCode> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut ok = true;
    for p in paths {
        match ingest_csv(p) {
            Ok(ing) => {
                let dest = out.join(format!("{}.csv", ing.series.id()));
                ing.series.write_csv(&dest)?;
                println!(
                    "{}: {} days, {} forward-filled -> {}",
                    ing.series.id(),
                    ing.series.len(),
                    ing.fill_count,
                    dest.display()
                );
            }
            Err(e) => {
                eprintln!("failed: {e}");
                ok = false;
            }
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> Result<ExitCode> {
    let matches = command().get_matches();
    let cli = Cli::from_arg_matches(&matches)?;
    let flags = config_flags(&matches);
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let opts = RunOptions {
        output_dir: cli.global.output_dir.clone(),
        format: cli.global.format,
        flags,
    };
    let manifest = match &cli.command {
        Cmd::Ingest { csv } => {
            let out = cli.global.output_dir.unwrap_or_else(|| PathBuf::from("."));
            return ingest(csv, &out);
        }
        Cmd::Run { manifest } => RunManifest::load(manifest)?,
        Cmd::Mse { csv } => ad_hoc(Task::Mse, &[], csv)?,
        Cmd::Det { csv } => ad_hoc(Task::Det, &[], csv)?,
        Cmd::Alis { csv } => ad_hoc(Task::Alis, &[], csv)?,
        Cmd::Mmse { csv } => ad_hoc(Task::Mmse, csv, &[])?,
        Cmd::Catastrophe { basket, target } => ad_hoc(Task::Catastrophe, basket, target)?,
    };
    Ok(report(&run(&manifest, &opts)?))
}
