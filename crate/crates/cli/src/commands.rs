use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use stegodetect::corpus::{
    load_tsteg_layout, prepare, tokenize, LabeledCorpus, Manifest, PrepareOptions, Split, SplitRatios, Task,
    TextCorpus, MAX_BPW, MAX_SENTENCE_LEN,
};
use stegodetect::evaluation::{evaluate, export_features, predict_argmax, predict_binary, Metrics};
use stegodetect::network::{ModelConfig, ModelParams};
use stegodetect::numerics::{Rng, Scalar};
use stegodetect::persist::{self, Checkpoint};
use stegodetect::stegogen::{decode, file_name, synthesize_dataset, train_lm, write_dataset};
use stegodetect::training::{train_with_progress, EpochRecord, Precision, TrainConfig};
use stegodetect::Error;

use crate::error::{CliError, CliResult};
use crate::settings::{Command, Settings};

pub fn run(s: &Settings) -> CliResult<()> {
    match s.command {
        Command::Generate => generate(s),
        Command::Train => train(s),
        Command::Eval => eval(s),
        Command::Predict => predict(s),
        Command::ExportFeatures => export(s),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io {
            path: path.into(),
            source: e,
        }
        .into()
    })
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| {
        Error::Io {
            path: path.into(),
            source: e,
        }
        .into()
    })
}

fn generate(s: &Settings) -> CliResult<()> {
    let source = s.path("source");
    let out_dir = s.path("out-dir");
    let bpw_set: Vec<u8> = s.list("bpw")?;
    if let Some(b) = bpw_set.iter().find(|&&b| b > MAX_BPW) {
        return Err(CliError::Usage(format!("--bpw {b} is out of range 0..={MAX_BPW}")));
    }
    let text = read_text(&source)?;
    let lm = train_lm(text.lines(), s.parse("order")?)?;
    eprintln!("language model: {} words, order {}", lm.num_words(), lm.order());
    let corpus = synthesize_dataset(&lm, s.parse("per-class")?, &bpw_set, s.parse("seed")?)?;
    write_dataset(&corpus, &out_dir)?;

    println!("bpw\tsentences\tfile");
    for (bpw, n) in corpus.histogram() {
        println!("{bpw}\t{n}\t{}", out_dir.join(file_name(bpw)).display());
    }

    if s.flag("verify")? {
        let mut checked = 0;
        for bpw in corpus.histogram().into_keys().filter(|&b| b > 0) {
            let path = out_dir.join(file_name(bpw));
            let written = read_text(&path)?;
            for (line_no, (line, original)) in written.lines().zip(corpus.by_bpw(bpw)).enumerate() {
                let bits = decode(&lm, &tokenize(line), bpw)
                    .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), line_no + 1)))?;
                if bits != original.payload {
                    return Err(Error::Data(format!(
                        "{}:{}: decoded payload differs from the embedded one",
                        path.display(),
                        line_no + 1
                    ))
                    .into());
                }
                checked += 1;
            }
        }
        println!("verify\t{checked}\tpayloads recovered");
    }
    Ok(())
}

fn parse_task(s: &Settings) -> CliResult<Option<Task>> {
    Ok(match s.get("task") {
        "binary" => Some(Task::Binary { bpw: s.parse("bpw")? }),
        "rate" => Some(Task::Rate),
        _ => None,
    })
}

fn ratios(s: &Settings) -> CliResult<SplitRatios> {
    match s.list::<f64>("split-ratios")?.as_slice() {
        &[train, validation, test] => Ok(SplitRatios::new(train, validation, test)?),
        _ => Err(CliError::Usage(
            "--split-ratios needs three comma-separated fractions".into(),
        )),
    }
}

fn load_text(s: &Settings) -> CliResult<TextCorpus> {
    let manifest_path = s.path("manifest");
    let manifest = Manifest::load(&manifest_path)?;
    let report = load_tsteg_layout(&s.path("data"), &manifest)?;
    for path in report.unmapped.iter().filter(|p| **p != manifest_path) {
        eprintln!("warning: no manifest rule for {}, skipped", path.display());
    }
    for ((format, bpw), n) in &report.counts {
        eprintln!("ingested {format} bpw {bpw}: {n} sentences");
    }
    Ok(report.corpus)
}

fn train(s: &Settings) -> CliResult<()> {
    let task = parse_task(s)?.expect("train always has a concrete task");
    let text = load_text(s)?;
    let opts = PrepareOptions {
        ratios: ratios(s)?,
        split_seed: s.parse("split-seed")?,
        vocab_cap: s.parse("vocab-cap")?,
        min_freq: s.parse("min-freq")?,
    };
    let (vocab, corpus) = prepare(&text, task, &opts)?;
    let model = ModelConfig {
        vocab_size: vocab.len(),
        embedding_dim: s.parse("embedding-dim")?,
        num_layers: s.parse("num-layers")?,
        hidden_units: s.parse("hidden-units")?,
        bidirectional: s.get("arch") == "ts-birnn",
        fused_dim: s.parse("fused-dim")?,
        num_classes: task.num_classes(),
        dropout_rate: s.parse("dropout")?,
        threshold: s.parse("threshold")?,
    };
    let cfg = TrainConfig {
        learning_rate: s.parse("learning-rate")?,
        batch_size: s.parse("batch-size")?,
        dropout: s.parse("dropout")?,
        l2_coeff: s.parse("l2-coeff")?,
        max_epochs: s.parse("max-epochs")?,
        patience: s.parse("patience")?,
        clip_norm: s.parse("clip-norm")?,
        seed: s.parse("seed")?,
        precision: s.parse("precision").map_err(|_| {
            CliError::Usage(format!(
                "--precision: expected f32 or f64, got {:?}",
                s.get("precision")
            ))
        })?,
    };
    eprintln!(
        "task {task}: {} samples, vocabulary {}, {} train / {} validation / {} test",
        corpus.len(),
        vocab.len(),
        corpus.indices(Split::Train).len(),
        corpus.indices(Split::Validation).len(),
        corpus.indices(Split::Test).len()
    );
    let params = match cfg.precision {
        Precision::F32 => fit::<f32>(&model, &corpus, &cfg, s)?,
        Precision::F64 => fit::<f64>(&model, &corpus, &cfg, s)?,
    };
    let checkpoint = Checkpoint { task, vocab, params };
    persist::save(&checkpoint, &s.path("checkpoint"))?;
    println!("checkpoint\t{}", s.get("checkpoint"));
    Ok(())
}

fn fit<T: Scalar>(
    model: &ModelConfig,
    corpus: &LabeledCorpus,
    cfg: &TrainConfig,
    s: &Settings,
) -> CliResult<ModelParams<f32>> {
    let params: ModelParams<T> = ModelParams::init(model, &mut Rng::new(cfg.seed).substream(0))?;
    eprintln!("{} parameters, {} precision", params.num_parameters(), cfg.precision);
    eprintln!("{}", EpochRecord::HEADER);
    let outcome = train_with_progress(params, corpus, cfg, |r| eprintln!("{}", r.to_line()))?;
    write_text(&s.path("log"), &outcome.log.to_tsv())?;
    let best = outcome.log.best().expect("best epoch is logged");
    println!("best_epoch\t{}", best.epoch);
    println!("val_acc\t{:.6}", best.val_acc);
    Ok(outcome.params.cast())
}

/// Loads the checkpoint and re-encodes the corpus with its vocabulary and
/// the configured split.
fn checkpoint_and_corpus(s: &Settings) -> CliResult<(Checkpoint, LabeledCorpus)> {
    let ck = persist::load(&s.path("checkpoint"))?;
    let bpw_flag = s.get("bpw");
    if let Some(task) = parse_task(s).ok().flatten() {
        if task != ck.task {
            return Err(CliError::Usage(format!(
                "checkpoint was trained for task {}, but {task} was requested",
                ck.task
            )));
        }
    } else if let (Task::Binary { bpw }, Ok(requested)) = (ck.task, bpw_flag.parse::<u8>()) {
        if bpw != requested {
            return Err(CliError::Usage(format!(
                "checkpoint detects bpw {bpw}, but bpw {requested} was requested"
            )));
        }
    }
    let text = load_text(s)?;
    let mut corpus = LabeledCorpus::encode(&text, &ck.vocab, ck.task)?;
    if corpus.is_empty() {
        return Err(Error::Data(format!("corpus has no samples for task {}", ck.task)).into());
    }
    corpus.assign_splits(ratios(s)?, s.parse("split-seed")?)?;
    Ok((ck, corpus))
}

fn selected(s: &Settings, corpus: &LabeledCorpus) -> CliResult<Vec<usize>> {
    let split = match s.get("split") {
        "all" => return Ok((0..corpus.len()).collect()),
        "train" => Split::Train,
        "validation" | "val" => Split::Validation,
        "test" => Split::Test,
        other => {
            return Err(CliError::Usage(format!(
                "--split: expected train, validation, test or all, got {other:?}"
            )))
        }
    };
    Ok(corpus.indices(split))
}

/// Report lines: `bpw acc p r` for the headline metrics and, for the rate
/// task, one row per class with its one-vs-rest accuracy.
fn report_rows(task: Task, m: &Metrics) -> Vec<(String, f64, f64, f64)> {
    match task {
        Task::Binary { bpw } => vec![(bpw.to_string(), m.accuracy, m.precision(), m.recall())],
        Task::Rate => {
            let total = m.samples() as f64;
            let mut rows = vec![("macro".to_string(), m.accuracy, m.macro_precision, m.macro_recall)];
            for (c, scores) in m.per_class.iter().enumerate() {
                let k = m.confusion.classes();
                let fp: u64 = (0..k).filter(|&t| t != c).map(|t| m.confusion.get(t, c)).sum();
                let fn_: u64 = (0..k).filter(|&p| p != c).map(|p| m.confusion.get(c, p)).sum();
                let acc = 1.0 - (fp + fn_) as f64 / total;
                rows.push((c.to_string(), acc, scores.precision, scores.recall));
            }
            rows
        }
    }
}

fn eval(s: &Settings) -> CliResult<()> {
    let (ck, corpus) = checkpoint_and_corpus(s)?;
    let indices = selected(s, &corpus)?;
    let m = evaluate(&ck.params, &corpus, &indices)?;
    let rows = report_rows(ck.task, &m);

    println!("task {}: {} samples ({} split)", ck.task, m.samples(), s.get("split"));
    println!("{:>6} {:>10} {:>10} {:>10}", "bpw", "Acc", "P", "R");
    for (label, acc, p, r) in &rows {
        println!("{label:>6} {acc:>10.6} {p:>10.6} {r:>10.6}");
    }
    println!("F1 {:.6}", m.f1());
    println!("confusion (rows true, columns predicted):\n{}", m.confusion);

    let mut report = String::from("bpw\tacc\tp\tr\n");
    for (label, acc, p, r) in &rows {
        report.push_str(&format!("{label}\t{acc:.6}\t{p:.6}\t{r:.6}\n"));
    }
    report.push_str(&format!("# f1\t{:.6}\n", m.f1()));
    write_text(&s.path("report"), &report)?;
    Ok(())
}

fn predict(s: &Settings) -> CliResult<()> {
    let ck = persist::load(&s.path("checkpoint"))?;
    let input_path = s.get("input");
    let mut raw = String::new();
    if input_path == "-" {
        io::stdin().read_to_string(&mut raw).map_err(|e| Error::Io {
            path: "<stdin>".into(),
            source: e,
        })?;
    } else {
        let f = fs::File::open(input_path).map_err(|e| Error::Io {
            path: input_path.into(),
            source: e,
        })?;
        for line in BufReader::new(f).lines() {
            raw.push_str(&line.map_err(|e| Error::Io {
                path: input_path.into(),
                source: e,
            })?);
            raw.push('\n');
        }
    }

    let encoded: Vec<Option<Vec<u32>>> = raw
        .lines()
        .map(|line| {
            let mut tokens = tokenize(line);
            tokens.truncate(MAX_SENTENCE_LEN);
            (!tokens.is_empty()).then(|| ck.vocab.encode(&tokens))
        })
        .collect();
    let seqs: Vec<&[u32]> = encoded.iter().flatten().map(Vec::as_slice).collect();
    let (labels, probs) = if seqs.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let probs = ck.params.predict_proba(&seqs)?;
        let labels = if ck.params.config.num_classes == 2 {
            predict_binary(&probs, ck.params.config.threshold)
        } else {
            predict_argmax(&probs)
        };
        let p: Vec<f32> = labels.iter().enumerate().map(|(r, &l)| probs.get(r, l)).collect();
        (labels, p)
    };

    let mut out = String::new();
    let mut next = 0;
    for e in &encoded {
        match e {
            Some(_) => {
                out.push_str(&format!("{}\t{:.6}\n", labels[next], probs[next]));
                next += 1;
            }
            None => out.push_str("skip\tempty after tokenization\n"),
        }
    }
    match s.get("output") {
        "-" => io::stdout().write_all(out.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        })?,
        path => write_text(Path::new(path), &out)?,
    }
    Ok(())
}

fn export(s: &Settings) -> CliResult<()> {
    let (ck, corpus) = checkpoint_and_corpus(s)?;
    let indices = selected(s, &corpus)?;
    let n = export_features(&ck.params, &corpus, &indices, &s.path("features"))?;
    println!("features\t{n}\t{}", s.get("features"));
    Ok(())
}
