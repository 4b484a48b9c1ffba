use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "polyg2p", version, about = "Multilingual grapheme-to-phoneme conversion")]
pub struct Cli {
    /// `key = value` config file, or a run manifest written by an earlier run.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one config key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, clean and split a lexicon; build vocabularies.
    Prepare(PrepareArgs),
    /// Train a model on prepared data.
    Train(TrainArgs),
    /// Write n-best pronunciations for words.
    Translate(TranslateArgs),
    /// Decode a test lexicon and report WER, WER100 and PER.
    Evaluate(EvaluateArgs),
    /// Inspect embeddings or translate one word under several language tokens.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long, value_name = "FILE")]
    pub train_lexicon: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Comma-separated ISO 639-3 codes to keep.
    #[arg(long, value_name = "CODES")]
    pub languages: Option<String>,
    /// File with one ISO 639-3 code per line to keep.
    #[arg(long, value_name = "FILE", conflicts_with = "languages")]
    pub languages_file: Option<PathBuf>,
    /// Phoneme inventory table used to clean transcriptions.
    #[arg(long, value_name = "FILE")]
    pub inventory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub checkpoint_dir: Option<PathBuf>,
    /// Continue from the final checkpoint in the checkpoint directory.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// A single word to translate.
    #[arg(long, conflicts_with = "input")]
    pub word: Option<String>,
    /// One word per line, optionally `lang<TAB>word`.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Language of words given without one.
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
    /// Write the n-best list here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub width: Option<usize>,
    /// Score only languages absent from the checkpoint's training data.
    #[arg(long)]
    pub unseen_only: bool,
    #[arg(long, value_name = "DIR", default_value = "eval")]
    pub out_dir: PathBuf,
    /// Worker threads for decoding (0: all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeMode {
    /// Nearest phonemes by target-embedding cosine similarity.
    Phonemes,
    /// Nearest language tokens by source-embedding cosine similarity.
    Languages,
    /// One word translated under several language tokens.
    Crosstoken,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub mode: AnalyzeMode,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Phonemes or language codes to query.
    #[arg(value_name = "QUERY")]
    pub queries: Vec<String>,
    #[arg(short, long, default_value_t = 5)]
    pub k: usize,
    /// Word for cross-token translation.
    #[arg(long)]
    pub word: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
}
