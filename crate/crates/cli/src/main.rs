use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oscmodes::error::Error;
use oscmodes_cli::commands;
use oscmodes_cli::config::{ClusterMethod, RunConfig};

/// Coupled-oscillator mode recognition pipeline: synthesize labeled
/// datasets, train the autoencoder, project latent trajectories, classify
/// or cluster cycles, and evaluate.
#[derive(Parser)]
#[command(name = "oscmodes", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration (strict schema; unknown keys rejected).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Master seed override (applies to both the generator and training).
    #[arg(long)]
    seed: Option<u64>,
    /// Record per-stage wall-clock timings in run_report.json. Timed
    /// reports are exempt from the byte-identical rerun guarantee.
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the labeled synthetic dataset suite and its manifest.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train the autoencoder on every mode's training matrix.
    Train {
        /// Dataset manifest written by `synth`.
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Project one dataset CSV to its latent trajectory CSV.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Supervised Wasserstein-distance classification of prediction cycles.
    ClassifyWd {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Cycles pooled per query distribution.
        #[arg(long, value_name = "N")]
        group_size: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Unsupervised clustering of prediction cycles.
    Cluster {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// gmm-dtw, gmm, or kshape.
        #[arg(long)]
        method: Option<String>,
        /// Cluster count (defaults to the number of modes).
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// PCA reconstruction-error curve against the trained model.
    PcaCompare {
        #[arg(long)]
        manifest: PathBuf,
        /// Trained model for the latent-2 reference row.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        k_max: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Batch-size × learning-rate sensitivity sweep.
    Sensitivity {
        #[command(flatten)]
        common: Common,
    },
    /// Full chain: synth → train → classify-wd → cluster → pca-compare.
    Pipeline {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.override_seed(common.seed);
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth { common } => {
            let config = load_config(&common)?;
            commands::cmd_synth(&config, &common.out, common.timings)?;
        }
        Command::Train { manifest, common } => {
            let config = load_config(&common)?;
            commands::cmd_train(&manifest, &config, &common.out, common.timings)?;
        }
        Command::Encode { model, data, common } => {
            commands::cmd_encode(&model, &data, &common.out, common.timings)?;
        }
        Command::ClassifyWd { model, manifest, group_size, common } => {
            let mut config = load_config(&common)?;
            if let Some(g) = group_size {
                config.classify.group_size = g;
            }
            commands::cmd_classify_wd(&model, &manifest, &config, &common.out, common.timings)?;
        }
        Command::Cluster { model, manifest, method, k, common } => {
            let mut config = load_config(&common)?;
            if let Some(name) = method {
                config.cluster.method = ClusterMethod::parse(&name)?;
            }
            if k.is_some() {
                config.cluster.k = k;
            }
            commands::cmd_cluster(&model, &manifest, &config, &common.out, common.timings)?;
        }
        Command::PcaCompare { manifest, model, k_max, common } => {
            let mut config = load_config(&common)?;
            if let Some(k_max) = k_max {
                config.pca.k_max = k_max;
            }
            commands::cmd_pca_compare(
                &manifest,
                model.as_deref(),
                &config,
                &common.out,
                common.timings,
            )?;
        }
        Command::Sensitivity { common } => {
            let config = load_config(&common)?;
            commands::cmd_sensitivity(&config, &common.out, common.timings)?;
        }
        Command::Pipeline { common } => {
            let config = load_config(&common)?;
            commands::cmd_pipeline(&config, &common.out, common.timings)?;
        }
    }
    Ok(())
}

/// Exit codes: 0 success, 1 usage, 2 I/O, 3 data/shape, 4 numerical.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(..) => 2,
        Error::Format(_)
        | Error::Data(_)
        | Error::Shape(_)
        | Error::DegenerateSignal(_)
        | Error::Unsupported(_) => 3,
        Error::Numerical(_) => 4,
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("OSC_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("usage error: OSC_THREADS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap's help/version paths exit 0; anything else is a usage error
            if err.use_stderr() {
                eprint!("{err}");
                return ExitCode::from(1);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
