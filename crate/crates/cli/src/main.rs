use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clustkit_cli::pipeline::{run, run_interpret, ReportBundle, Scope};
use clustkit_cli::{generate_synthetic, CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "clustkit", version, about = "Clustering pipeline for tabular feature data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// kmeans, minibatch, fuzzy, gmm or hierarchical. With a sweep config,
    /// selects the swept method.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Load, engineer, standardize and reduce; write the tables.
    Ingest(RunArgs),
    /// Cluster and score.
    Cluster(RunArgs),
    /// Run the config's k-sweep or grid search.
    Sweep(RunArgs),
    /// Describe existing labels with profiles, importances, a tree and Jenks.
    Interpret {
        #[command(flatten)]
        run: RunArgs,
        /// CSV of `row_id,cluster`.
        #[arg(long)]
        labels: PathBuf,
    },
    /// Full pipeline into a report bundle.
    Report(RunArgs),
    /// Write a synthetic dataset with planted regimes.
    Synth {
        #[arg(long, default_value_t = 300)]
        rows: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, CliError> {
        RunConfig::load(&self.config)?.apply(&Overrides {
            seed: self.seed,
            output_dir: self.out.clone(),
            method: self.method.clone(),
            k: self.k,
        })
    }
}

fn describe(b: &ReportBundle) -> String {
    let mut s = format!("wrote {} files to {}", b.manifest.files.len() + 1, b.dir.display());
    if let Some(c) = &b.clustering {
        s.push_str(&format!("\n{}: {} clusters", c.description, c.scores.k));
        for (name, v) in &c.scores.scores {
            s.push_str(&format!(", {name} {v:.4}"));
        }
    }
    s
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Ingest(a) => run(&a.config()?, Scope::Ingest).map(|b| describe(&b)),
        Command::Cluster(a) => run(&a.config()?, Scope::Cluster).map(|b| describe(&b)),
        Command::Sweep(a) => {
            let cfg = a.config()?;
            if !cfg.method.is_search() {
                return Err(CliError::Config(format!(
                    "sweep needs a sweep or grid method, config has `{}`",
                    cfg.method.name()
                )));
            }
            run(&cfg, Scope::Cluster).map(|b| describe(&b))
        }
        Command::Interpret { run: a, labels } => run_interpret(&a.config()?, labels).map(|b| describe(&b)),
        Command::Report(a) => run(&a.config()?, Scope::Report).map(|b| describe(&b)),
        Command::Synth { rows, seed, out } => {
            let data = generate_synthetic(*rows, *seed).map_err(|e| match e {
                clustkit::Error::InvalidParameter(m) => CliError::Config(m),
                other => CliError::Stage {
                    stage: clustkit_cli::Stage::Ingest,
                    source: other,
                },
            })?;
            let files = data.write(out).map_err(|e| CliError::Output {
                stage: clustkit_cli::Stage::Emit,
                path: out.display().to_string(),
                source: e,
            })?;
            Ok(format!(
                "wrote {}, {}, {} and {}",
                files.features.display(),
                files.cases.display(),
                files.deaths.display(),
                files.planted.display()
            ))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(msg) => {
            if !cli.quiet {
                println!("{msg}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
