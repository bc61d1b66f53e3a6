use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heretic_core::pipeline::{extract_only, run_experiment, train_only, write_outputs};
use heretic_core::{Error, ErrorClass, ExperimentConfig, Model, Report, Result};

/// Extract propositional rules from trained feed-forward networks.
#[derive(Debug, Parser)]
#[command(name = "heretic", version, about)]
struct Cli {
    /// Print the effective configuration (defaults merged with --config) as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,

    /// Experiment configuration file (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(long, short, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a network on the configured training data and save it.
    Train {
        /// Where to write the model (network and input encoding).
        #[arg(long, short)]
        model: PathBuf,
    },
    /// Extract rules from a saved model, without training.
    Extract {
        #[arg(long, short)]
        model: PathBuf,
        /// CSV with the model's feature columns and a class column.
        #[arg(long, short)]
        data: PathBuf,
        /// Directory for rules.txt and rules.json; rules go to stdout if omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Train, extract, evaluate against the baselines and write a report.
    Run {
        /// Output directory; overrides `output.dir`.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Override the number of repeats (e.g. 1 for a quick run).
        #[arg(long)]
        repeats: Option<usize>,
        /// Override the experiment seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the text tables of a stored report.json.
    Report { report: PathBuf },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(Command::Run { repeats, seed, .. }) = &cli.command {
        cfg.repeats = repeats.unwrap_or(cfg.repeats);
        cfg.seed = seed.unwrap_or(cfg.seed);
    }
    if cli.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Error::Config("no subcommand given; see --help".into()));
    };
    match command {
        Command::Train { model } => {
            let m = train_only(&cfg)?;
            m.save(&model)?;
            log::info!("model written to {}", model.display());
        }
        Command::Extract { model, data, out } => {
            let m = Model::load(&model)?;
            let ex = extract_only(&m, &data, &cfg)?;
            for w in &ex.warnings {
                log::warn!("{w}");
            }
            let text = ex.minimized.to_text();
            match out {
                Some(dir) => {
                    write_file(&dir.join("rules.txt"), &text)?;
                    write_file(&dir.join("rules.json"), &ex.minimized.to_json()?)?;
                }
                None => print!("{text}"),
            }
        }
        Command::Run { out, .. } => {
            let dir = out
                .or_else(|| cfg.output.dir.as_ref().map(|d| cfg.resolve(d)))
                .ok_or_else(|| Error::Config("no output directory: pass --out or set output.dir".into()))?;
            let output = run_experiment(&cfg)?;
            write_outputs(&output, &dir)?;
            print!("{}", output.report.to_text());
            log::info!("outputs written to {}", dir.display());
        }
        Command::Report { report } => {
            let text = fs::read_to_string(&report).map_err(|e| Error::io(&report, e))?;
            print!("{}", Report::from_json(&text)?.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Pipeline => 4,
            })
        }
    }
}
