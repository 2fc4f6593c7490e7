use anyhow::Result;
use clap::{Parser, Subcommand};
use doorslam_cli::commands;
use doorslam_cli::config::RunConfig;
use doorslam_cli::scenario::parse_events;
use doorslam_core::synth::NoiseKind;
use std::path::PathBuf;

/// Door-slam detection pipeline: synthetic data, training, evaluation, and
/// a simulated device with a BLE-style frame receiver.
#[derive(Parser)]
#[command(name = "doorslam", version, about)]
struct Cli {
    /// Config file of flat `section.key = value` pairs; flags win over the
    /// file, the file wins over built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic dataset (WAV + CSV pairs + manifest).
    Synth {
        /// Clips per class.
        #[arg(long)]
        n: usize,
        /// Dataset seed (default: synth.rng_seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the classifier on a dataset manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Where to write the model JSON.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Training seed (init + shuffling).
        #[arg(long)]
        seed: Option<u64>,
        /// Held-out fraction excluded from training (0 trains on everything).
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        split_seed: Option<u64>,
        /// Max background mix ratio of the noise-mixed training views
        /// (0 disables augmentation).
        #[arg(long)]
        augment: Option<f64>,
    },
    /// Noise-robustness sweep on the held-out split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated mix ratios, e.g. 0,0.25,0.5,1.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a CSV summary here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        split_seed: Option<u64>,
        #[arg(long)]
        noise_seed: Option<u64>,
    },
    /// Simulate the deployed device over a scheduled scenario.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// Scenario seed (default: synth.rng_seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Timeline length in seconds.
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        /// Scheduled events as label@time_s, e.g. slam@5,slam@25,normal@45.
        #[arg(long)]
        events: Option<String>,
        /// Continuous background bed: white, hum, or babble.
        #[arg(long)]
        background: Option<String>,
        /// Background mix ratio relative to the signal.
        #[arg(long, default_value_t = 0.5)]
        noise_ratio: f64,
        /// JSON-lines event log output.
        #[arg(long)]
        out_log: PathBuf,
        /// Binary frame stream output.
        #[arg(long)]
        out_frames: PathBuf,
        #[arg(long)]
        device_id: Option<u16>,
    },
    /// Decode a frame file into a table (the phone-app stand-in).
    Listen {
        #[arg(long)]
        frames: PathBuf,
        /// Append decoded events to this JSON-lines log.
        #[arg(long)]
        out_log: Option<PathBuf>,
    },
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = RunConfig::load(cli.config.as_deref())?;

    match cli.command {
        Command::Synth { n, seed, out } => {
            let seed = seed.unwrap_or(cfg.synth.rng_seed);
            commands::cmd_synth(&cfg, n, seed, &out)
        }
        Command::Train {
            manifest,
            out,
            epochs,
            learning_rate,
            batch_size,
            seed,
            test_fraction,
            split_seed,
            augment,
        } => {
            apply(&mut cfg.train.epochs, epochs);
            apply(&mut cfg.train.learning_rate, learning_rate);
            apply(&mut cfg.train.batch_size, batch_size);
            apply(&mut cfg.train.rng_seed, seed);
            apply(&mut cfg.eval.test_fraction, test_fraction);
            apply(&mut cfg.eval.split_seed, split_seed);
            apply(&mut cfg.augment.max_ratio, augment);
            commands::cmd_train(&cfg, &manifest, &out)
        }
        Command::Eval {
            model,
            manifest,
            ratios,
            out,
            csv,
            test_fraction,
            split_seed,
            noise_seed,
        } => {
            apply(&mut cfg.eval.ratios, ratios);
            apply(&mut cfg.eval.test_fraction, test_fraction);
            apply(&mut cfg.eval.split_seed, split_seed);
            apply(&mut cfg.eval.noise_seed, noise_seed);
            commands::cmd_eval(&cfg, &model, &manifest, out.as_deref(), csv.as_deref())
        }
        Command::Simulate {
            model,
            seed,
            duration,
            events,
            background,
            noise_ratio,
            out_log,
            out_frames,
            device_id,
        } => {
            apply(&mut cfg.device_id, device_id);
            let seed = seed.unwrap_or(cfg.synth.rng_seed);
            let events = parse_events(events.as_deref().unwrap_or(""))?;
            let background = background
                .map(|name| name.parse::<NoiseKind>())
                .transpose()?
                .map(|kind| (kind, noise_ratio));
            commands::cmd_simulate(
                &cfg, &model, seed, duration, &events, background, &out_log, &out_frames,
            )
        }
        Command::Listen { frames, out_log } => commands::cmd_listen(&frames, out_log.as_deref()),
    }
}

fn apply<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
