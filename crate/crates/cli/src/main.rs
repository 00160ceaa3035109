use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use selnmt::commands::{cmd_evaluate, cmd_inspect, cmd_train, cmd_translate};
use selnmt::commands::{EvaluateArgs, InspectArgs, TrainArgs, TranslateArgs};
use selnmt::runconfig::parse_window;
use selnmt::Mode;
use selnmt_core::ContextWindow;

/// Context-aware translation: an encoder that reads neighbouring sentences
/// and progressively discards the unhelpful context tokens.
#[derive(Parser)]
#[command(name = "selnmt", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model; writes checkpoints, the vocabulary, and a metrics log.
    Train {
        /// Corpus JSONL: one document per line with doc_id, src, tgt.
        #[arg(long)]
        corpus: PathBuf,
        /// Run configuration JSON; {} means all defaults.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the configured mode.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue a run from one of its checkpoints.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Translate a corpus with a trained checkpoint.
    Translate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output JSONL with a hyp array per document.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Beam width; 1 is greedy.
        #[arg(long)]
        beam: Option<usize>,
        /// Context window override as P,N sentences (e.g. 1,0 for online).
        #[arg(long, value_parser = parse_window)]
        window: Option<ContextWindow>,
    },
    /// Score hypotheses against references with corpus BLEU.
    Evaluate {
        /// Hypotheses: plain text (one sentence per line) or translation JSONL.
        #[arg(long)]
        hyp: PathBuf,
        /// References: plain text or corpus/translation JSONL with tgt.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Add-one smoothing for zero higher-order n-gram counts.
        #[arg(long)]
        smooth: bool,
    },
    /// Export the selection trace for one example as JSON.
    Inspect {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Example index in corpus order, counting every sentence.
        #[arg(long)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Train { corpus, config, out, mode, seed, resume } => {
            cmd_train(&TrainArgs { corpus, config, out, mode, seed, resume })
        }
        Cmd::Translate { corpus, checkpoint, out, mode, beam, window } => {
            cmd_translate(&TranslateArgs { corpus, checkpoint, out, mode, beam, window })
        }
        Cmd::Evaluate { hyp, reference, smooth } => {
            cmd_evaluate(&EvaluateArgs { hyp, reference, smooth })
        }
        Cmd::Inspect { corpus, checkpoint, index, out } => {
            cmd_inspect(&InspectArgs { corpus, checkpoint, index, out })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
