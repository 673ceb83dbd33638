use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use vowelrec::manifest::{self, Manifest};
use vowelrec::mfcc::mfcc;
use vowelrec::phoneme::consonant_by_symbol;
use vowelrec::pipeline::{self, FrontendConfig, PipelineConfig, REFERENCE_PERCENT};
use vowelrec::segment::extract_vowel;
use vowelrec::synth::{self, CorpusConfig, VowelProfiles};
use vowelrec::{read_wav, MlpModel, TrainOptions, VowelLabel};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "vowelrec",
    version,
    about = "Vowel recognition from consonant-vowel recordings"
)]
struct Cli {
    /// JSON file supplying defaults for any flag; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus with manifest.csv and manifest.json.
    Synth {
        #[arg(long)]
        speakers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sample_rate: Option<u32>,
        /// Comma-separated consonant symbols to include (default: all 23).
        #[arg(long, value_delimiter = ',')]
        consonants: Option<Vec<String>>,
        /// JSON file of base vowel formant profiles.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Detect the vowel interval in a WAV file.
    Segment {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write per-frame MFCCs of the detected vowel as CSV.
    Features {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on all speakers except the held-out ones.
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        test_speakers: Option<Vec<String>>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the training report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Per-vowel recognition percentages on a manifest.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Restrict evaluation to these speakers.
        #[arg(long, value_delimiter = ',')]
        speakers: Option<Vec<String>>,
        #[arg(long)]
        json: bool,
        /// Also write the JSON report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify the vowel in one WAV file.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        file: PathBuf,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    speakers: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    sample_rate: Option<u32>,
    consonants: Option<Vec<String>>,
    profiles: Option<PathBuf>,
    manifest: Option<PathBuf>,
    test_speakers: Option<Vec<String>>,
    model: Option<PathBuf>,
    epochs: Option<usize>,
    report: Option<PathBuf>,
    hidden: Option<usize>,
    frontend: Option<FrontendConfig>,
    train: Option<TrainOptions>,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.to_string())
    }
}

fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, Failure> {
    flag.or(file).ok_or_else(|| Failure::Usage(format!("missing --{name}")))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            serde_json::from_str(&read_text(p)?).map_err(|e| Failure::Usage(format!("config {}: {e}", p.display())))
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(cli.config.as_deref())?;
    let frontend = cfg.frontend.clone().unwrap_or_default();
    match cli.command {
        Command::Synth {
            speakers,
            seed,
            out,
            sample_rate,
            consonants,
            profiles,
        } => {
            let out = required(out, cfg.out, "out")?;
            let mut corpus = CorpusConfig {
                speakers: speakers.or(cfg.speakers).unwrap_or(10),
                seed: seed.or(cfg.seed).unwrap_or(0),
                ..Default::default()
            };
            if let Some(rate) = sample_rate.or(cfg.sample_rate) {
                corpus.sample_rate = rate;
            }
            if let Some(list) = consonants.or(cfg.consonants) {
                corpus.consonants = list
                    .iter()
                    .map(|s| {
                        consonant_by_symbol(s)
                            .map(|(i, _)| i)
                            .ok_or_else(|| Failure::Usage(format!("unknown consonant {s:?}")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            if let Some(p) = profiles.or(cfg.profiles) {
                corpus.profiles = VowelProfiles::from_json(&read_text(&p)?)?;
            }
            fs::create_dir_all(&out).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
            let m = synth::generate_corpus(&corpus, &out)?;
            eprintln!(
                "wrote {} clips for {} speakers to {}",
                m.len(),
                corpus.speakers,
                out.join("manifest.csv").display()
            );
        }
        Command::Segment { file, json } => {
            let seg = extract_vowel(&read_wav(&file)?, &frontend.segment)?;
            if json {
                println!("{}", seg.to_json());
            } else {
                println!(
                    "vowel {:.4}s - {:.4}s (noise ceiling {:.6}, threshold {:.6})",
                    seg.start_s(),
                    seg.end_s(),
                    seg.noise_ceiling,
                    seg.threshold
                );
            }
        }
        Command::Features { file, out } => {
            let out = required(out, cfg.out, "out")?;
            let clip = read_wav(&file)?;
            let seg = extract_vowel(&clip, &frontend.segment)?;
            let m = mfcc(&clip, &seg, &frontend.mfcc)?;
            fs::write(&out, m.to_csv()).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
            let snapshot = serde_json::json!({
                "frontend": frontend,
                "sample_rate": clip.sample_rate(),
                "frames": m.n_frames(),
                "segment": seg.to_json(),
            });
            let side = out.with_extension("json");
            fs::write(&side, serde_json::to_string_pretty(&snapshot)? + "\n")
                .map_err(|e| Failure::Data(format!("{}: {e}", side.display())))?;
        }
        Command::Train {
            manifest: manifest_path,
            test_speakers,
            model,
            epochs,
            seed,
            report,
        } => {
            let manifest_path = required(manifest_path, cfg.manifest, "manifest")?;
            let model_path = required(model, cfg.model, "model")?;
            let all = Manifest::read(&manifest_path)?;
            let held_out = test_speakers
                .or(cfg.test_speakers)
                .unwrap_or_else(|| manifest::default_test_speakers(&all));
            let (train, test) = manifest::split_by_speaker(&all, &held_out)?;

            let mut pc = PipelineConfig {
                frontend,
                train: cfg.train.unwrap_or_default(),
                ..Default::default()
            };
            if let Some(h) = cfg.hidden {
                pc.hidden = h;
            }
            if let Some(e) = epochs.or(cfg.epochs) {
                pc.train.max_epochs = e;
            }
            if let Some(s) = seed.or(cfg.seed) {
                pc.train.seed = s;
            }
            let (model, rep) = pipeline::train_pipeline(&train, &pc)?;
            model.save(&model_path)?;
            eprintln!(
                "trained on {} examples ({} skipped), held out {} ({} entries); {} epochs, {:?}, performance {:.6} -> {:.6}",
                rep.examples,
                rep.skipped,
                held_out.join(","),
                test.len(),
                rep.train.epochs,
                rep.train.stop_reason,
                rep.train.performance[0],
                rep.train.final_performance
            );
            if let Some(p) = report.or(cfg.report) {
                fs::write(&p, serde_json::to_string_pretty(&rep)? + "\n")
                    .map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            }
        }
        Command::Eval {
            model,
            manifest: manifest_path,
            speakers,
            json,
            out,
        } => {
            let model = MlpModel::load(required(model, cfg.model, "model")?)?;
            let mut m = Manifest::read(required(manifest_path, cfg.manifest, "manifest")?)?;
            if let Some(s) = speakers.or(cfg.test_speakers) {
                m = m.filter_speakers(&s)?;
            }
            let report = pipeline::evaluate(&model, &m)?;
            if let Some(p) = &out {
                fs::write(p, report.to_json()).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            }
            if json {
                print!("{}", report.to_json());
            } else {
                print!("{report}");
                let reference: Vec<String> = VowelLabel::ALL
                    .iter()
                    .zip(REFERENCE_PERCENT)
                    .map(|(v, p)| format!("{v} {p}"))
                    .collect();
                println!("(reference rates on recorded speech: {})", reference.join(", "));
            }
        }
        Command::Predict { model, file } => {
            let model = MlpModel::load(required(model, cfg.model, "model")?)?;
            let p = pipeline::predict_file(&model, &file)?;
            println!("{}", p.to_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
