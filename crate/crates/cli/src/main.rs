//! `emovox`: speech emotion recognition from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emovox::dsp::Descriptor;

use config::CliConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(emovox::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{}: {e}", e.name()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<emovox::Error> for CliError {
    fn from(e: emovox::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    pub fn io(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime(e.into())
            }
        }
    )*};
}
runtime_from!(
    emovox::audio::AudioError,
    emovox::dsp::DspError,
    emovox::model::ModelError,
    emovox::dataset::DatasetError,
    emovox::train::TrainError
);

#[derive(Debug, Parser)]
#[command(name = "emovox", version, about = "Speech emotion recognition with a fully convolutional network")]
struct Cli {
    /// TOML config file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed (falls back to EMOVOX_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to standard error (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override config file values.
#[derive(Debug, Args)]
struct Overrides {
    /// mfcc, mel_spectrogram_db or mel_spectrogram_power.
    #[arg(long, global = true)]
    descriptor: Option<Descriptor>,
    #[arg(long, global = true)]
    n_mfcc: Option<usize>,
    #[arg(long, global = true)]
    n_mels: Option<usize>,
    #[arg(long, global = true)]
    max_epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    patience: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    val_fraction: Option<f64>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    #[arg(long, global = true)]
    ratio: Option<f64>,
    /// Keep class shares equal across train and test splits.
    #[arg(long, global = true)]
    stratified: bool,
    #[arg(long, global = true)]
    cadence: Option<f64>,
    /// Always extract features afresh.
    #[arg(long, global = true)]
    no_cache: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract feature maps for every labelled WAV under DATA.
    Extract {
        data: PathBuf,
        /// Built-in scheme (ravdess, emodb, tess) or a mapping file;
        /// defaults to DATA/labels.map.
        #[arg(long)]
        scheme: Option<String>,
        /// fmap or csv.
        #[arg(long, default_value = "fmap")]
        format: String,
    },
    /// Train one model on every labelled WAV under DATA.
    Train {
        data: PathBuf,
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Monte Carlo cross-validation over DATA.
    Crossval {
        data: PathBuf,
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Accuracy and confusion matrix of MODEL on DATA.
    Evaluate {
        model: PathBuf,
        data: PathBuf,
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Predict the emotion of one WAV file; prints JSON.
    Predict { model: PathBuf, wav: PathBuf },
    /// Emotion timeline of a WAV file, or of raw PCM16 on standard input.
    Stream {
        model: PathBuf,
        /// WAV file; omit or pass `-` to read mono PCM16 LE from stdin.
        input: Option<PathBuf>,
        /// Sample rate of stdin PCM.
        #[arg(long, default_value_t = emovox::CANONICAL_SAMPLE_RATE)]
        rate: u32,
        /// Split a WAV into N equal segments.
        #[arg(long, conflicts_with = "window")]
        splits: Option<usize>,
        /// Split a WAV into windows of this many seconds.
        #[arg(long)]
        window: Option<f64>,
        /// Write CSV instead of JSON lines.
        #[arg(long)]
        csv: bool,
    },
    /// Generate the seeded synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 7)]
        classes: usize,
        #[arg(long, default_value_t = 70)]
        per_class: usize,
    },
    /// Summary table over cross-validation output directories.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

impl Cli {
    fn resolve_config(&self) -> Result<CliConfig, CliError> {
        let mut cfg = CliConfig::load(self.config.as_deref())?;
        let o = &self.overrides;
        if let Some(v) = &self.out {
            cfg.run.out = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.run.seed = v;
        }
        if let Some(v) = self.threads {
            cfg.run.threads = v;
        }
        if let Some(v) = o.descriptor {
            cfg.features.descriptor = v;
        }
        if let Some(v) = o.n_mfcc {
            cfg.features.n_mfcc = v;
        }
        if let Some(v) = o.n_mels {
            cfg.features.mel.n_mels = v;
        }
        if let Some(v) = o.max_epochs {
            cfg.train.max_epochs = v;
        }
        if let Some(v) = o.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = o.patience {
            cfg.train.early_stop.patience = v;
        }
        if let Some(v) = o.lr {
            cfg.train.adam.lr = v;
        }
        if let Some(v) = o.val_fraction {
            cfg.train.val_fraction = v;
        }
        if let Some(v) = o.folds {
            cfg.crossval.folds = v;
        }
        if let Some(v) = o.ratio {
            cfg.crossval.ratio = v;
        }
        if o.stratified {
            cfg.crossval.stratified = true;
        }
        if let Some(v) = o.cadence {
            cfg.stream.cadence_s = v;
        }
        if o.no_cache {
            cfg.run.cache = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.resolve_config()?;
    if cfg.run.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    // Commands that only print keep the filesystem untouched unless an
    // output directory was requested.
    let explicit_out = cli.out.is_some();
    match cli.command {
        Command::Extract { data, scheme, format } => commands::extract(&cfg, &data, scheme.as_deref(), &format),
        Command::Train { data, scheme } => commands::train(&cfg, &data, scheme.as_deref()),
        Command::Crossval { data, scheme } => commands::crossval(&cfg, &data, scheme.as_deref()),
        Command::Evaluate { model, data, scheme } => commands::evaluate(&cfg, &model, &data, scheme.as_deref()),
        Command::Predict { model, wav } => commands::predict(&cfg, &model, &wav, explicit_out),
        Command::Stream {
            model,
            input,
            rate,
            splits,
            window,
            csv,
        } => commands::stream(
            &cfg,
            &model,
            input.as_deref(),
            rate,
            commands::StreamMode::from_flags(splits, window),
            csv,
            explicit_out,
        ),
        Command::Synth { classes, per_class } => commands::synth(&cfg, classes, per_class),
        Command::Report { dirs } => commands::report(&dirs),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: usage: {m}"),
                CliError::Runtime(_) => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
