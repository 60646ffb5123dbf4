use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use risbeam::pipeline;
use risbeam::RunConfig;
use risbeam_core::setnet::Variant;

#[derive(Parser)]
#[command(name = "risbeam", version, about = "Camera-aided RIS beam selection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes, oracle labels and one dataset per camera.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Also write every link's frequency-domain channel.
        #[arg(long)]
        dump_channels: bool,
    },
    /// Train a network on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// set_sum, reuse_concat or vanilla_fc.
        #[arg(long, default_value = "set_sum")]
        variant: String,
    },
    /// Accuracy and recall on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Top-k rate ratio against exhaustive search on the test split.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Candidate set sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
    },
}

fn load(common: &Common) -> anyhow::Result<RunConfig> {
    let cfg = RunConfig::load(&common.config)?.with_seed(common.seed);
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen { common, dump_channels } => {
            let cfg = load(&common)?;
            let m = pipeline::run_gen(&cfg, &common.out, dump_channels)?;
            for c in &m.cameras {
                println!(
                    "camera {}: {} samples ({} images without candidates) -> {}",
                    c.camera_id, c.samples, c.empty_beam_sets, c.dataset
                );
            }
        }
        Command::Train {
            common,
            dataset,
            variant,
        } => {
            let variant: Variant = variant.parse()?;
            let cfg = load(&common)?;
            let t = pipeline::run_train(&cfg, &dataset, variant, &common.out)?;
            if let Some(last) = t.history.last() {
                println!(
                    "epoch {}: train loss {:.5}, test loss {:.5}",
                    last.epoch, last.train_loss, last.test_loss
                );
            }
            println!("{}", t.model.display());
        }
        Command::Eval {
            common,
            dataset,
            model,
        } => {
            let cfg = load(&common)?;
            let r = pipeline::run_eval(&cfg, &dataset, &model, &common.out)?;
            println!("accuracy {:.4}, recall {:.4} over {} samples", r.accuracy, r.recall, r.n_test);
        }
        Command::Sweep {
            common,
            dataset,
            model,
            k,
        } => {
            let cfg = load(&common)?;
            for (k, ratio) in pipeline::run_sweep(&cfg, &dataset, &model, &k, &common.out)? {
                println!("k = {k}: {ratio:.4}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
