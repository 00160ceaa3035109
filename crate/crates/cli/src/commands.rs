//! The four subcommands: train, translate, evaluate, inspect.

use std::fs;
use std::path::PathBuf;

use selnmt_core::bleu::corpus_bleu_owned;
use selnmt_core::data::{build_examples, make_batches, source_concat};
use selnmt_core::translate::{translate_corpus, TranslationMode};
use selnmt_core::{ContextWindow, DocumentCorpus, Session, Trainer, Vocabulary};

use crate::checkpoint::{check_state_matches, Checkpoint};
use crate::corpus_io::{read_corpus, read_sentences, write_translations, TranslationRecord};
use crate::fail::{io_fail, Failure};
use crate::metrics::MetricsWriter;
use crate::runconfig::{Mode, RunConfig};
use crate::trace_io::{build_trace, write_trace};
use crate::vocab_io::write_vocab;

pub struct TrainArgs {
    pub corpus: PathBuf,
    pub config: PathBuf,
    pub out: PathBuf,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub resume: Option<PathBuf>,
}

pub struct TranslateArgs {
    pub corpus: PathBuf,
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    pub mode: Option<Mode>,
    pub beam: Option<usize>,
    pub window: Option<ContextWindow>,
}

pub struct EvaluateArgs {
    pub hyp: PathBuf,
    pub reference: PathBuf,
    pub smooth: bool,
}

pub struct InspectArgs {
    pub corpus: PathBuf,
    pub checkpoint: PathBuf,
    pub index: usize,
    pub out: PathBuf,
}

fn build_vocabulary(config: &RunConfig, corpus: &DocumentCorpus) -> Result<Vocabulary, Failure> {
    let sentences = corpus
        .documents
        .iter()
        .flat_map(|d| d.src.iter().chain(d.tgt.iter().flatten()))
        .map(String::as_str);
    let vocab = if config.subword {
        Vocabulary::build_subword(sentences, config.max_vocab, config.merge_rounds)?
    } else {
        Vocabulary::build(sentences, config.max_vocab)?
    };
    Ok(vocab)
}

fn echo_config(config: &RunConfig) {
    println!("config: {}", serde_json::to_string(config).expect("config serializes"));
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), Failure> {
    let corpus = read_corpus(&args.corpus)?;
    let (mut trainer, config, vocab) = match &args.resume {
        Some(ckpt_path) => {
            if args.mode.is_some() || args.seed.is_some() {
                return Err(Failure::Usage(
                    "--mode and --seed cannot change when resuming; they are part of the checkpoint".into(),
                ));
            }
            println!("resuming from {}; configuration comes from the checkpoint", ckpt_path.display());
            Checkpoint::read(ckpt_path)?.into_trainer()?
        }
        None => {
            let mut config = RunConfig::load(&args.config)?;
            if let Some(mode) = args.mode {
                config.mode = mode;
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            let vocab = build_vocabulary(&config, &corpus)?;
            config.finalize(vocab.len())?;
            let trainer = Trainer::new(config.model_config(), config.train_config())?;
            (trainer, config, vocab)
        }
    };
    echo_config(&config);

    let examples = build_examples(&corpus, &vocab, &config.context_window)?;
    let batches = make_batches(&examples, config.max_tokens)?;
    if batches.is_empty() {
        return Err(Failure::Data(format!(
            "{}: corpus produced no training examples",
            args.corpus.display()
        )));
    }
    println!(
        "{} documents, {} examples, {} batches, vocabulary of {} tokens",
        corpus.documents.len(),
        examples.len(),
        batches.len(),
        vocab.len()
    );

    fs::create_dir_all(&args.out).map_err(|e| io_fail(&args.out, e))?;
    write_vocab(&args.out.join("vocab.txt"), &vocab)?;
    let metrics_path = args.out.join("metrics.jsonl");
    let mut metrics = if args.resume.is_some() && metrics_path.exists() {
        MetricsWriter::append(&metrics_path)?
    } else {
        MetricsWriter::create(&metrics_path, &config)?
    };

    let total = config.steps;
    let n = batches.len() as u64;
    let stride = (total / 20).max(1);
    let mut order = Vec::new();
    let mut order_epoch = u64::MAX;
    for step in trainer.completed_steps() + 1..=total {
        let epoch = (step - 1) / n;
        if epoch != order_epoch {
            order = trainer.batch_order(epoch, batches.len());
            order_epoch = epoch;
        }
        let m = trainer.train_step(&batches[order[((step - 1) % n) as usize]])?;
        metrics.log(&m)?;
        if step % stride == 0 || step == total {
            println!("step {step}/{total} loss {:.4} lr {:.6}", m.loss_all, m.lr);
        }
        if config.checkpoint_every > 0 && step % config.checkpoint_every == 0 && step != total {
            let path = args.out.join(format!("checkpoint-{step:06}.bin"));
            Checkpoint::from_trainer(&config, &vocab, &trainer).write(&path)?;
        }
    }
    metrics.finish()?;
    let final_path = args.out.join("checkpoint-final.bin");
    Checkpoint::from_trainer(&config, &vocab, &trainer).write(&final_path)?;
    println!("final checkpoint: {}", final_path.display());
    Ok(())
}

pub fn cmd_translate(args: &TranslateArgs) -> Result<(), Failure> {
    let ckpt = Checkpoint::read(&args.checkpoint)?;
    let mut config = ckpt.config.clone();
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    if let Some(beam) = args.beam {
        config.beam = beam;
    }
    if let Some(window) = args.window {
        config.context_window = window;
    }
    config.validate()?;
    let model = config.model_config();
    check_state_matches(&model, &ckpt.vocab, &ckpt.state)?;
    let corpus = read_corpus(&args.corpus)?;
    echo_config(&config);

    let mode = match config.mode {
        Mode::Mono => TranslationMode::Mono,
        Mode::Bi => TranslationMode::Bi,
    };
    let hyps = translate_corpus(&model, &ckpt.state, &ckpt.vocab, &corpus.documents, mode, &config.beam_config())?;
    let records: Vec<TranslationRecord> = corpus
        .documents
        .iter()
        .zip(hyps)
        .map(|(d, hyp)| TranslationRecord {
            doc_id: d.doc_id.clone(),
            src: d.src.clone(),
            tgt: d.tgt.clone(),
            hyp,
        })
        .collect();
    write_translations(&args.out, &config, &records)?;
    println!("translated {} documents into {}", records.len(), args.out.display());
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Failure> {
    let hyps = read_sentences(&args.hyp, true)?;
    let refs = read_sentences(&args.reference, false)?;
    let bleu = corpus_bleu_owned(&hyps, &refs, args.smooth)?;
    println!("BLEU = {:.2}", bleu.score);
    Ok(())
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<(), Failure> {
    let ckpt = Checkpoint::read(&args.checkpoint)?;
    let config = ckpt.config.clone();
    config.validate()?;
    let model = config.model_config();
    check_state_matches(&model, &ckpt.vocab, &ckpt.state)?;
    let corpus = read_corpus(&args.corpus)?;
    let examples = build_examples(&corpus, &ckpt.vocab, &config.context_window)?;
    let example = examples.get(args.index).ok_or_else(|| {
        Failure::Data(format!("index {} out of range ({} examples)", args.index, examples.len()))
    })?;

    let input = source_concat(example)?;
    let mut sess = Session::eval(&model, &ckpt.state);
    let output = sess.encode(&input)?;
    let trace = build_trace(&config, &ckpt.vocab, example, &input, &output);
    write_trace(&args.out, &trace)?;
    println!(
        "wrote trace for document {} sentence {} to {}",
        trace.doc_id,
        trace.index,
        args.out.display()
    );
    Ok(())
}
