use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stc_core::toolkit::{
    convert_file, eval_conversion, run_bottleneck_grid, ClassifierConfig, ConversionRequest, DomainClassifier,
    EvalOptions, GridConfig, GridReport,
};
use stc_core::trainer::{make_synthetic_corpus, train, Corpus, CorpusSpec, RunDir, TrainConfig, TrainState};
use stc_core::vocoder::stcf::{self, StcfFile};
use stc_core::{audio, features, vocoder, Result, StcError, Technique};

/// Cached next to the corpus so `eval` and `grid` share one classifier.
const CLASSIFIER_FILE: &str = "classifier.stck";

#[derive(Parser)]
#[command(name = "stc", version, about = "Singing technique conversion toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a WAV file into an STCF feature file.
    Analyze {
        wav: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Technique label stored with the network features.
        #[arg(long)]
        technique: Option<Technique>,
    },
    /// Resynthesize an STCF file to WAV.
    Synth {
        stcf: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Corpus utilities.
    Corpus {
        #[command(subcommand)]
        action: CorpusCommand,
    },
    /// Train a converter.
    Train(TrainArgs),
    /// Convert a recording to another technique.
    Convert {
        wav: PathBuf,
        #[arg(long)]
        target: Technique,
        #[arg(long)]
        ckpt: PathBuf,
        /// Constant F0 shift in semitones.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        shift: f64,
        /// Defaults to `<input>_<target>.wav`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score a checkpoint on the corpus holdout split.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        classifier: ClassifierArgs,
        /// Write the report as JSON instead of printing it.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train and score every bottleneck depth.
    Grid {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = stc_core::trainer::DESK_ITERATIONS)]
        iters: u64,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 4])]
        depths: Vec<usize>,
        /// Also write a CSV table with one line per row and pair.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Keep per-cell run directories here.
        #[arg(long)]
        runs: Option<PathBuf>,
        #[command(flatten)]
        classifier: ClassifierArgs,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Render the synthetic four-technique corpus.
    Make {
        /// JSON corpus spec; defaults apply to missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..=4))]
    depth: u64,
    #[arg(long, default_value_t = stc_core::trainer::DESK_ITERATIONS)]
    iters: u64,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    lambda_cls: Option<f64>,
    #[arg(long)]
    lambda_rec: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Use the full channel widths and long schedule.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 0)]
    snapshot_every: u64,
    /// Continue from a checkpoint up to `--iters`.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifierArgs {
    /// Pretrained classifier; otherwise one is trained and cached in the
    /// corpus directory.
    #[arg(long)]
    classifier: Option<PathBuf>,
}

fn load_or_train_classifier(corpus: &Corpus, args: &ClassifierArgs) -> Result<DomainClassifier> {
    if let Some(path) = &args.classifier {
        return DomainClassifier::load(path);
    }
    let cached = corpus.root.join(CLASSIFIER_FILE);
    if cached.exists() {
        return DomainClassifier::load(&cached);
    }
    log::info!("training technique classifier");
    let clf = DomainClassifier::train(corpus, ClassifierConfig::default())?;
    clf.save(&cached)?;
    Ok(clf)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn grid_csv(report: &GridReport) -> String {
    let mut out = String::from("bottleneck,depth,recon_l1,runtime_s,src,tgt,mcd,cls_acc\n");
    for row in &report.rows {
        for p in &row.pairs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.bottleneck, row.depth, row.recon_l1, row.runtime_s, p.src, p.tgt, p.mcd, p.cls_acc
            ));
        }
    }
    out
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let depth = a.depth as usize;
    let mut cfg = if a.full {
        TrainConfig {
            iterations: a.iters,
            ..TrainConfig::paper_scale(depth)?
        }
    } else {
        TrainConfig::desk(depth, a.iters)?
    };
    cfg.decay_span = cfg.decay_span.min(cfg.iterations);
    cfg.seed = a.seed;
    cfg.snapshot_every = a.snapshot_every;
    if let Some(v) = a.lambda_cls {
        cfg.weights.lambda_cls = v;
    }
    if let Some(v) = a.lambda_rec {
        cfg.weights.lambda_rec = v;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze { wav, output, technique } => {
            let clip = audio::read_wav(&wav)?.to_analysis_rate()?;
            let frames = vocoder::analyze(&clip)?;
            let feats = features::encode(&frames, technique)?;
            stcf::write(
                &output,
                &StcfFile {
                    frames,
                    features: Some(feats.to_chunk()),
                },
            )?;
            println!("{} frames -> {}", feats.frames(), output.display());
        }
        Command::Synth { stcf: input, output } => {
            let file = stcf::read(&input)?;
            let clip = vocoder::synthesize(&file.frames)?;
            audio::write_wav(&clip, &output)?;
            println!("{:.3} s -> {}", clip.duration_secs(), output.display());
        }
        Command::Corpus {
            action: CorpusCommand::Make { spec, seed, output },
        } => {
            let spec = match spec {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p)?)?,
                None => CorpusSpec::default(),
            };
            let index = make_synthetic_corpus(&spec, seed, &output)?;
            println!("{} clips -> {}", index.clips.len(), output.display());
        }
        Command::Train(args) => {
            let corpus = Corpus::load(&args.corpus)?;
            let state = match &args.resume {
                Some(ckpt) => {
                    let mut s = TrainState::load(ckpt)?;
                    s.config.iterations = args.iters;
                    s.config.validate()?;
                    s
                }
                None => TrainState::new(train_config(&args)?, corpus.norm.clone())?,
            };
            let dir = RunDir(args.output.clone());
            let (state, _) = train(state, &corpus, Some(&dir))?;
            println!("{} iterations -> {}", state.iteration, dir.model().display());
        }
        Command::Convert {
            wav,
            target,
            ckpt,
            shift,
            output,
        } => {
            let output = output.unwrap_or_else(|| {
                let stem = wav.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
                wav.with_file_name(format!("{stem}_{target}.wav"))
            });
            let conv = convert_file(&ConversionRequest {
                input: wav,
                output: output.clone(),
                target,
                checkpoint: ckpt,
                pitch_shift_semitones: shift,
            })?;
            println!(
                "{} -> {} frames, {:.3} s -> {}",
                conv.input_frames.len(),
                conv.output_frames.len(),
                conv.audio.duration_secs(),
                output.display()
            );
        }
        Command::Eval {
            ckpt,
            corpus,
            classifier,
            output,
        } => {
            let corpus = Corpus::load(&corpus)?;
            let clf = load_or_train_classifier(&corpus, &classifier)?;
            let state = TrainState::load(&ckpt)?;
            let report = eval_conversion(&state, &corpus, &clf, &EvalOptions::default())?;
            match output {
                Some(p) => write_json(&p, &report)?,
                None => {
                    println!("recon_l1 {:.5}", report.recon_l1);
                    for p in &report.pairs {
                        println!("{}2{} mcd {:.3} dB cls_acc {:.3}", p.src.letter(), p.tgt.letter(), p.mcd, p.cls_acc);
                    }
                    println!("mean cls_acc {:.3}", report.mean_cls_acc());
                }
            }
        }
        Command::Grid {
            corpus,
            iters,
            output,
            seeds,
            depths,
            csv,
            runs,
            classifier,
        } => {
            if seeds.is_empty() || depths.is_empty() {
                return Err(StcError::Argument("grid needs at least one seed and one depth".into()));
            }
            let corpus = Corpus::load(&corpus)?;
            let clf = load_or_train_classifier(&corpus, &classifier)?;
            let mut cfg = GridConfig::desk(iters, seeds)?;
            cfg.depths = depths;
            let report = run_bottleneck_grid(&corpus, &cfg, &clf, runs.as_deref());
            write_json(&output, &report)?;
            if let Some(p) = csv {
                fs::write(p, grid_csv(&report))?;
            }
            for row in &report.rows {
                match &row.failure {
                    Some(f) => println!("{} failed: {f}", row.bottleneck),
                    None => println!("{} recon_l1 {:.5} ({:.0} s)", row.bottleneck, row.recon_l1, row.runtime_s),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
