use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use voicepad::analysis::Correction;
use voicepad::distance::PoolingMode;
use voicepad::frontend::FrontendKind;
use voicepad::metrics::TdcfCosts;

#[derive(Debug, Parser)]
#[command(name = "voicepad", version, about = "Voice presentation-attack detection toolkit")]
pub struct Cli {
    /// Worker threads for extraction, training and scoring (default: one per core).
    /// Outputs do not depend on this value.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn jobs(&self) -> Option<usize> {
        self.jobs.map(usize::from)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract features from a list of WAV files, one PADF file per input.
    Extract(ExtractArgs),
    /// Train bona fide and spoof GMMs and write them to a PADG model file.
    TrainGmm(TrainGmmArgs),
    /// Fit bona fide and spoof Gaussians over pooled utterance embeddings.
    TrainMdist(TrainMdistArgs),
    /// Score trials with a GMM model (log-likelihood ratio).
    ScoreGmm(ScoreArgs),
    /// Score trials with a Mahalanobis-distance model.
    ScoreMdist(ScoreArgs),
    /// Report EER, its threshold and optionally min t-DCF.
    Eval(EvalArgs),
    /// Write the DET curve as CSV.
    DetExport(DetExportArgs),
    /// Weighted average of several score files over their shared trials.
    Fuse(FuseArgs),
    /// Pairwise EER significance tests between systems.
    Sigtest(SigtestArgs),
    /// Compare analytic loss gradients with central finite differences.
    LossCheck(LossCheckArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long, value_parser = parse_frontend)]
    pub frontend: FrontendKind,
    /// `key=value` overrides applied on top of the front end's defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Text file with one WAV path per line; the file stem is the trial id.
    #[arg(long)]
    pub list: PathBuf,
    /// Output directory for `<trial_id>.padf` files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainCommon {
    /// Protocol file assigning each training trial its key.
    #[arg(long)]
    pub protocol: PathBuf,
    /// Directory holding `<trial_id>.padf` files.
    #[arg(long)]
    pub features: PathBuf,
    /// Output PADG model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainGmmArgs {
    #[command(flatten)]
    pub common: TrainCommon,
    /// Mixture components per class.
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u32).range(1..))]
    pub components: u32,
    /// Seed for the mean-splitting sign pattern; both classes use it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// EM iterations per splitting stage.
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Stage stops when one iteration gains less than this fraction of the stage's gain.
    #[arg(long, default_value_t = 1e-5, value_parser = parse_non_negative)]
    pub rel_tol: f64,
    /// Variance floor as a fraction of the global per-dimension variance.
    #[arg(long, default_value_t = 1e-3, value_parser = parse_non_negative)]
    pub var_floor: f64,
}

#[derive(Debug, Args)]
pub struct TrainMdistArgs {
    #[command(flatten)]
    pub common: TrainCommon,
    /// Covariance regularizer, scaled by trace / dimension.
    #[arg(long, default_value_t = 1e-6, value_parser = parse_non_negative)]
    pub ridge: f64,
    /// Utterance pooling: `mean` or `meanstd`.
    #[arg(long, default_value_t = PoolingMode::MeanStd, value_parser = parse_pooling)]
    pub pooling: PoolingMode,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// PADG model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory holding `<trial_id>.padf` files.
    #[arg(long)]
    pub features: PathBuf,
    /// Trials to score: one trial id per line, or a protocol file.
    #[arg(long)]
    pub list: PathBuf,
    /// Output score file (`trial_id score` lines in list order).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub protocol: PathBuf,
    /// Normalized t-DCF costs `C0,C1,C2`.
    #[arg(long, value_parser = parse_costs)]
    pub tdcf_costs: Option<Costs>,
    /// Also write the DET curve CSV here.
    #[arg(long)]
    pub det_out: Option<PathBuf>,
    /// Print a flat JSON object with raw values instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct DetExportArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub protocol: PathBuf,
    /// Output CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Member score files, in fusion order.
    #[arg(required = true, num_args = 2..)]
    pub scores: Vec<PathBuf>,
    /// Comma-separated weights, one per member (default: uniform).
    #[arg(long, value_parser = parse_weights)]
    pub weights: Option<Weights>,
    /// Output score file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SigtestArgs {
    /// One score file per system.
    #[arg(required = true, num_args = 2..)]
    pub scores: Vec<PathBuf>,
    #[arg(long)]
    pub protocol: PathBuf,
    /// Comma-separated system labels (default: score file stems).
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    pub alpha: f64,
    /// `none`, `bonferroni` or `holm`.
    #[arg(long, default_value_t = Correction::Holm, value_parser = parse_correction)]
    pub correction: Correction,
    /// Divide the critical value by the number of tests instead of adjusting the level.
    #[arg(long = "paper-literal")]
    pub divide_critical: bool,
    /// Output CSV of 0/1 significance cells (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output CSV of z values.
    #[arg(long)]
    pub z_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossCheckArgs {
    /// Random inputs per loss configuration.
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-6, value_parser = parse_positive)]
    pub step: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-6, value_parser = parse_positive)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Costs(pub f64, pub f64, pub f64);

#[derive(Debug, Clone)]
pub struct Weights(pub Vec<f64>);

fn parse_frontend(s: &str) -> Result<FrontendKind, String> {
    s.parse().map_err(|e: voicepad::FrontendError| e.to_string())
}

fn parse_pooling(s: &str) -> Result<PoolingMode, String> {
    s.parse().map_err(|e: voicepad::DistanceError| e.to_string())
}

fn parse_correction(s: &str) -> Result<Correction, String> {
    s.parse().map_err(|e: voicepad::AnalysisError| e.to_string())
}

fn parse_finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    parse_finite(s).and_then(|v| {
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(format!("`{s}` is negative"))
        }
    })
}

fn parse_positive(s: &str) -> Result<f64, String> {
    parse_finite(s).and_then(|v| {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(format!("`{s}` is not positive"))
        }
    })
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    parse_finite(s).and_then(|v| {
        if v > 0.0 && v < 1.0 {
            Ok(v)
        } else {
            Err(format!("alpha must lie in (0, 1), got {s}"))
        }
    })
}

fn parse_costs(s: &str) -> Result<Costs, String> {
    let v = s.split(',').map(parse_finite).collect::<Result<Vec<_>, _>>()?;
    let [c0, c1, c2] = v[..] else {
        return Err(format!("expected three comma-separated costs, got {}", v.len()));
    };
    TdcfCosts::new(c0, c1, c2).map_err(|e| e.to_string())?;
    Ok(Costs(c0, c1, c2))
}

fn parse_weights(s: &str) -> Result<Weights, String> {
    s.split(',')
        .map(parse_finite)
        .collect::<Result<Vec<_>, _>>()
        .map(Weights)
}

/// Cross-flag checks that clap cannot express; runs before any data is read.
pub fn validate(cli: &Cli) -> Result<(), clap::Error> {
    let usage = |msg: String| Err(Cli::command().error(ErrorKind::ArgumentConflict, msg));
    match &cli.command {
        Command::Fuse(a) => {
            if let Some(w) = &a.weights {
                if w.0.len() != a.scores.len() {
                    return usage(format!(
                        "{} weights given for {} score files",
                        w.0.len(),
                        a.scores.len()
                    ));
                }
            }
        }
        Command::Sigtest(a) => {
            if let Some(l) = &a.labels {
                if l.len() != a.scores.len() {
                    return usage(format!("{} labels given for {} score files", l.len(), a.scores.len()));
                }
            }
        }
        _ => {}
    }
    Ok(())
}
