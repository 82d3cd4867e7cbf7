//! `hoidiag`: evaluate and diagnose HOI detector outputs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hoidiag::metrics::{action_map, negative_pair_ap};
use hoidiag::report::{parse_categories, parse_formats, run_evaluate, Analysis, Format, RunConfig};
use hoidiag::synth::{generate, verify, ScenarioSpec, ScenarioTruth};
use hoidiag::{classify_errors, match_triplets, HoiCategory, HoiError, Result};

#[derive(Parser)]
#[command(
    name = "hoidiag",
    version,
    about = "Error diagnosis for human-object interaction detectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: writes report.json, summary.csv and plot data
    Evaluate {
        #[command(flatten)]
        input: Input,
        /// Output directory
        #[arg(long, env = "HOIDIAG_OUT")]
        out: PathBuf,
        /// Comma-separated subset of json, csv, plot
        #[arg(long, env = "HOIDIAG_FORMATS", default_value = "json,csv,plot", value_parser = formats)]
        formats: BTreeSet<Format>,
        /// Comma-separated oracle names (default: all nine)
        #[arg(long, env = "HOIDIAG_ORACLES", value_delimiter = ',')]
        oracles: Option<Vec<String>>,
    },
    /// Error histogram and ΔmAP per oracle, as JSON on stdout
    Diagnose {
        #[command(flatten)]
        input: Input,
        #[arg(long, env = "HOIDIAG_ORACLES", value_delimiter = ',')]
        oracles: Option<Vec<String>>,
    },
    /// Pair recall, precision and #Pairs, as JSON on stdout
    PairMetrics {
        #[command(flatten)]
        input: Input,
    },
    /// Negative-pair AP and action mAP, as JSON on stdout
    ActionMetrics {
        #[command(flatten)]
        input: Input,
    },
    /// Generate a scenario with known injected errors
    Synth {
        /// Scenario spec (JSON); defaults apply to missing fields
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Overrides the spec's seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "HOIDIAG_OUT")]
        out: PathBuf,
    },
    /// Diagnose a generated scenario and compare with what was injected
    Verify {
        /// Directory written by `synth`
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, env = "HOIDIAG_IOU", default_value_t = 0.5)]
        iou: f64,
    },
}

#[derive(Args)]
struct Input {
    /// Ground-truth file
    #[arg(long, env = "HOIDIAG_GT")]
    gt: PathBuf,
    /// Prediction file
    #[arg(long, env = "HOIDIAG_PREDS")]
    preds: PathBuf,
    #[arg(long, env = "HOIDIAG_IOU", default_value_t = 0.5)]
    iou: f64,
    /// Drop predictions whose human or object score is below this
    #[arg(long, env = "HOIDIAG_SCORE_THR")]
    score_thr: Option<f64>,
    /// Pair-level NMS before matching
    #[arg(long, env = "HOIDIAG_NMS")]
    nms: bool,
    #[arg(long, env = "HOIDIAG_NMS_THR", default_value_t = 0.7)]
    nms_thr: f64,
    /// Categories with fewer annotations than this are rare
    #[arg(long, env = "HOIDIAG_RARE_THR", default_value_t = 10)]
    rare_thr: usize,
    /// Comma-separated OBJECT:ACTION ids, e.g. 4:12,4:13
    #[arg(long, env = "HOIDIAG_CATEGORIES", value_parser = categories)]
    categories: Option<BTreeSet<HoiCategory>>,
}

fn formats(s: &str) -> std::result::Result<BTreeSet<Format>, String> {
    parse_formats(s).map_err(|e| e.to_string())
}

fn categories(s: &str) -> std::result::Result<BTreeSet<HoiCategory>, String> {
    parse_categories(s).map_err(|e| e.to_string())
}

impl Input {
    fn config(self, out: PathBuf) -> RunConfig {
        let mut c = RunConfig::new(self.gt, self.preds, out);
        c.iou_threshold = self.iou;
        c.score_threshold = self.score_thr;
        c.nms = self.nms;
        c.nms_threshold = self.nms_thr;
        c.rare_threshold = self.rare_thr;
        c.categories = self.categories;
        c
    }
}

fn print_json(v: &impl serde::Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("serializable output")
    );
}

fn read_spec(path: &Path) -> Result<ScenarioSpec> {
    let bytes = std::fs::read(path).map_err(|source| HoiError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|source| HoiError::Parse {
        what: "scenario spec",
        path: path.to_path_buf(),
        source,
    })
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Evaluate {
            input,
            out,
            formats,
            oracles,
        } => {
            let mut config = input.config(out);
            config.formats = formats;
            config.oracles = oracles;
            let report = run_evaluate(&config)?;
            println!(
                "mAP {:.1} (rare {}, non-rare {})",
                report.metrics.map,
                opt(report.metrics.map_rare),
                opt(report.metrics.map_non_rare)
            );
            println!("wrote {}", config.out.display());
        }
        Command::Diagnose { input, oracles } => {
            let mut config = input.config(PathBuf::new());
            config.oracles = oracles;
            let report = Analysis::load(&config)?.report(&config)?;
            print_json(&serde_json::json!({
                "errors": report.errors,
                "delta_map": report.delta_map,
            }));
        }
        Command::PairMetrics { input } => {
            let config = input.config(PathBuf::new());
            print_json(&Analysis::load(&config)?.pair_metrics()?);
        }
        Command::ActionMetrics { input } => {
            let config = input.config(PathBuf::new());
            let a = Analysis::load(&config)?;
            let actions = action_map(&a.pairs, &a.dataset);
            print_json(&serde_json::json!({
                "negative_pair_ap": negative_pair_ap(&a.pairs),
                "action_map": actions.map,
                "per_action": actions.per_action.iter().map(|(k, v)| (k.0.to_string(), serde_json::json!(v))).collect::<serde_json::Map<_, _>>(),
            }));
        }
        Command::Synth { spec, seed, out } => {
            let mut spec = match spec {
                Some(p) => read_spec(&p)?,
                None => ScenarioSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let truth = generate(&spec)?;
            truth.write_dir(&out)?;
            println!(
                "wrote {} images, {} predictions to {}",
                truth.dataset.images().len(),
                truth.predictions.len(),
                out.display()
            );
        }
        Command::Verify { scenario, iou } => {
            let t = ScenarioTruth::load_dir(&scenario)?;
            let ledger = match_triplets(&t.dataset, &t.predictions, iou);
            let diagnosed = classify_errors(&ledger, &t.dataset, &t.predictions, iou);
            let m = verify(&t, &diagnosed)?;
            print_json(&m);
            if !m.is_diagonal() {
                return Err(HoiError::Computation {
                    stage: "verify",
                    message: format!(
                        "{} predictions or triplets diagnosed differently than injected",
                        m.mismatches.len()
                    ),
                });
            }
        }
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.1}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
