use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "vnd", version, about = "Visual narration detection: curate, train, pseudo-label, evaluate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with planted visual/non-visual labels.
    Synth(SynthArgs),
    /// Derive a curated training set (SS, VR or MC rule).
    Curate(CurateArgs),
    /// Train the dual encoder on a curated set.
    Train(TrainArgs),
    /// Pseudo-label unlabeled clips and write the enlarged set.
    Pseudo(PseudoArgs),
    /// Score clips against gold labels and report ROC-AUC.
    Eval(EvalArgs),
    /// Sweep (c, |N|) and report validation ROC-AUC per cell.
    Grid(GridArgs),
    /// Audio-only detector: spectrograms, training, evaluation.
    Audio(AudioArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Curate(_) => "curate",
            Command::Train(_) => "train",
            Command::Pseudo(_) => "pseudo",
            Command::Eval(_) => "eval",
            Command::Grid(_) => "grid",
            Command::Audio(a) => match a.command {
                AudioCommand::Mel(_) => "audio mel",
                AudioCommand::Train(_) => "audio train",
                AudioCommand::Eval(_) => "audio eval",
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Labeled training clips.
    #[arg(long)]
    pub clips: usize,
    #[arg(long)]
    pub seed: u64,
    /// Unlabeled clips, written without annotations to unlabeled.jsonl.
    #[arg(long, default_value_t = 0)]
    pub unlabeled: usize,
    /// Validation clips (gold labels in gold_val.jsonl).
    #[arg(long, default_value_t = 0)]
    pub val: usize,
    /// Test clips (gold labels in gold_test.jsonl).
    #[arg(long, default_value_t = 0)]
    pub test: usize,
    #[arg(long, default_value_t = 0.5)]
    pub visual_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 4)]
    pub tasks: usize,
    #[arg(long, default_value_t = 4)]
    pub keysteps: usize,
    /// Feature dimension used for video, word and sentence vectors.
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 3)]
    pub tokens: usize,
    /// Also write a short synthetic narration waveform per clip.
    #[arg(long)]
    pub audio: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Ss,
    Vr,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub rule: Rule,
    /// Sentence-similarity threshold (SS).
    #[arg(long)]
    pub c: Option<f64>,
    /// Rank cut-off (MC).
    #[arg(long)]
    pub k: Option<usize>,
    /// Which clips to curate; defaults to the training split when the corpus has one.
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    /// Gradient-descent iterations for the MC task classifiers.
    #[arg(long, default_value_t = 200)]
    pub clf_iterations: usize,
    #[arg(long, default_value_t = 0.5)]
    pub clf_lr: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Nce,
    Milnce,
    Oc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

/// Training hyperparameters; each flag overrides the config file.
#[derive(Debug, Clone, Args, Default)]
pub struct TrainFlags {
    /// TOML file with TrainConfig keys (batch_size, lr, n_negatives, ...).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Negatives per positive, |N|.
    #[arg(long)]
    pub neg: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Adjacent narrations per item for MIL-NCE, |P|.
    #[arg(long)]
    pub mil_p: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub freeze_text_head: bool,
    #[arg(long)]
    pub symmetric_negatives: bool,
    #[arg(long)]
    pub no_bias: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus files holding every clip the curated set refers to (merged).
    #[arg(long, required = true, num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    /// Curated set whose label-1 clips are the positives.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Validation corpus for per-epoch ROC-AUC and early stopping.
    #[arg(long, requires = "val_gold")]
    pub val_corpus: Option<PathBuf>,
    #[arg(long, requires = "val_corpus")]
    pub val_gold: Option<PathBuf>,
    /// Per-epoch training log (JSON lines).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PseudoArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub unlabeled: PathBuf,
    /// The curated set being enlarged.
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Fixed detection threshold (accepts inf / -inf). Without it the
    /// Youden-J optimum on --val-corpus/--val-gold is used.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    #[arg(long, requires = "val_gold")]
    pub val_corpus: Option<PathBuf>,
    #[arg(long, requires = "val_corpus")]
    pub val_gold: Option<PathBuf>,
    /// Pseudo-label/retrain rounds; rounds after the first retrain on the
    /// union of --corpus and --unlabeled.
    #[arg(long, default_value_t = 1)]
    pub rounds: usize,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMethod {
    Model,
    Objects,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Required by the model method.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, value_enum, default_value = "model")]
    pub method: EvalMethod,
    /// Machine-readable report (summary line, then one line per clip).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Corpus with train and val splits.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub val_gold: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.4, 0.5, 0.6])]
    pub c_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [3, 5, 7, 9])]
    pub neg_grid: Vec<usize>,
    /// Optional extra axis: batch sizes, each getting its own c × |N| table.
    #[arg(long, value_delimiter = ',')]
    pub batch_grid: Vec<usize>,
    /// Optional extra axis: learning rates, each getting its own c × |N| table.
    #[arg(long, value_delimiter = ',')]
    pub lr_grid: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Tab-separated table, one row per cell.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AudioArgs {
    #[command(subcommand)]
    pub command: AudioCommand,
}

#[derive(Debug, Subcommand)]
pub enum AudioCommand {
    /// Log-mel spectrogram of one waveform file.
    Mel(AudioMelArgs),
    /// Train the logistic audio head on clips with audio.
    Train(AudioTrainArgs),
    /// Score clips with an audio model against gold labels.
    Eval(AudioEvalArgs),
}

#[derive(Debug, Args)]
pub struct AudioMelArgs {
    #[arg(long)]
    pub waveform: PathBuf,
    #[arg(long)]
    pub n_mels: Option<usize>,
    /// Spectrogram as JSON (`frames × n_mels`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AudioTrainArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    /// Curated set; both label-1 and label-0 clips are used.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AudioEvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
