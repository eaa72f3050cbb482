use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use mastlab::audit::{audit, compute_constants, AuditParams, Correspondence};
use mastlab::cascade::MassCascade;
use mastlab::excursion::CoupledTree;
use mastlab::harness::{run_experiment, write_rows, ExperimentConfig, OutputFormat};
use mastlab::randkit::{derive_seed, stream};
use mastlab::{cladogram, mast, Cladogram, Error};

#[derive(Parser)]
#[command(name = "mastlab", version, about = "Random tree MAST and Brownian tree decomposition lab")]
struct Cli {
    /// Master seed; defaults to 0, or to the config's seed for `experiment`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Independent,
    Identity,
    Perturbed,
}

#[derive(Subcommand)]
enum Command {
    /// Uniform random cladograms, one Newick string per line.
    Sample {
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// MAST of two Newick trees, printed as JSON.
    Mast {
        #[arg(long)]
        tree_a: PathBuf,
        #[arg(long)]
        tree_b: PathBuf,
    },
    /// Mass cascade of the recursive decomposition as JSONL.
    Cascade {
        #[arg(long)]
        depth: usize,
    },
    /// Glued excursion trees: leaf distance matrix as CSV.
    Couple {
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 1 << 14)]
        grid: usize,
        /// Where to write backbone and weights as JSON.
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Mismatch and martingale audit along a size-biased path.
    Audit {
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = Rule::Independent)]
        rule: Rule,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Defaults to delta^2 / 10.
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Explicit constants with the inequality each one satisfies.
    Constants,
    /// Run a configured experiment and write its rows.
    Experiment,
}

fn open_out(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_tree(path: &Path) -> anyhow::Result<Cladogram> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(Cladogram::parse_newick(&text)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut out = open_out(cli.out.as_deref())?;
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Sample { n, count } => {
            if n < 2 {
                return Err(Error::Domain(format!("need n >= 2, got {n}")).into());
            }
            let mut rng = stream(seed);
            for _ in 0..count {
                writeln!(out, "{}", cladogram::sample_uniform(n, &mut rng).to_newick())?;
            }
        }
        Command::Mast { tree_a, tree_b } => {
            let result = mast::mast(&read_tree(&tree_a)?, &read_tree(&tree_b)?)?;
            serde_json::to_writer(&mut out, &result)?;
            writeln!(out)?;
        }
        Command::Cascade { depth } => {
            MassCascade::build(depth, &mut stream(seed))?.write_jsonl(&mut out)?;
        }
        Command::Couple { n, grid, meta } => {
            let tree = CoupledTree::sample(n, grid, &mut stream(seed))?;
            let d = tree.leaf_distances();
            let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
            writeln!(out, "{}", header.join(","))?;
            for row in &d {
                let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
            if let Some(path) = meta {
                fs::write(&path, serde_json::to_string_pretty(&tree.metadata())?)
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
        }
        Command::Audit { depth, rule, alpha, delta, mu } => {
            let mut rng = stream(seed);
            let source = MassCascade::build(depth, &mut rng)?;
            let corr = match rule {
                Rule::Independent => Correspondence::same_words(source, &MassCascade::build(depth, &mut rng)?)?,
                Rule::Identity => Correspondence::identity(source),
                Rule::Perturbed => Correspondence::perturbed(source, delta, alpha),
            };
            let path = corr.source.size_biased_path(depth, &mut stream(derive_seed(seed, 1)))?;
            let params = AuditParams { alpha, delta, mu: mu.unwrap_or(delta * delta / 10.0) };
            serde_json::to_writer_pretty(&mut out, &audit(&corr, &path, params)?)?;
            writeln!(out)?;
        }
        Command::Constants => {
            let ledger = compute_constants()?;
            write!(out, "{ledger}")?;
        }
        Command::Experiment => {
            let Some(path) = cli.config else { bail!("experiment needs --config <json>") };
            let mut cfg = ExperimentConfig::load(&path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let format = match cli.format {
                Some(Format::Jsonl) => OutputFormat::Jsonl,
                Some(Format::Csv) => OutputFormat::Csv,
                None => cfg.format.unwrap_or_default(),
            };
            let rows = run_experiment(&cfg)?;
            if cli.out.is_none() {
                if let Some(p) = &cfg.output {
                    out = open_out(Some(p))?;
                }
            }
            write_rows(&rows, format, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Budget(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
