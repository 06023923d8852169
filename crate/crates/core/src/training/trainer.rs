use std::fmt;

use super::adam::{adam_step, AdamState};
use super::clip::clip_gradients;
use super::loss::{add_l2_gradient, compute_loss};
use crate::corpus::{batches, LabeledCorpus, Split, DEFAULT_BATCH_SIZE};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Metrics};
use crate::network::{Mode, ModelParams, DEFAULT_DROPOUT};
use crate::numerics::{Rng, Scalar};

/// Floating-point width used for a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" | "32" => Ok(Precision::F32),
            "f64" | "64" => Ok(Precision::F64),
            other => Err(Error::usage(format!(
                "unknown precision {other:?} (expected f32 or f64)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub l2_coeff: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: DEFAULT_BATCH_SIZE,
            dropout: DEFAULT_DROPOUT,
            l2_coeff: 1e-4,
            max_epochs: 30,
            patience: 5,
            clip_norm: 5.0,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::usage(format!("train config: {what}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.l2_coeff >= 0.0 && self.l2_coeff.is_finite()) {
            return bad("l2_coeff must be nonnegative");
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return bad("max_epochs and patience must be positive");
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub val_p: f64,
    pub val_r: f64,
    pub val_f1: f64,
}

impl EpochRecord {
    pub const HEADER: &'static str = "epoch\ttrain_loss\tval_acc\tval_p\tval_r\tval_f1";

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            self.epoch, self.train_loss, self.val_acc, self.val_p, self.val_r, self.val_f1
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainingLog {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(EpochRecord::HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.best_epoch)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Parameters from the epoch with the best validation accuracy.
    pub params: ModelParams<T>,
    pub log: TrainingLog,
    pub best_validation: Metrics,
}

/// [`train_with_progress`] without a progress callback.
pub fn train<T: Scalar>(params: ModelParams<T>, corpus: &LabeledCorpus, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_with_progress(params, corpus, cfg, |_| {})
}

/// Mini-batch Adam on the training split with early stopping on validation
/// accuracy. `on_epoch` sees every log record as it is produced.
pub fn train_with_progress<T: Scalar>(
    mut params: ModelParams<T>,
    corpus: &LabeledCorpus,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let train_idx = corpus.indices(Split::Train);
    let val_idx = corpus.indices(Split::Validation);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::usage("training needs nonempty train and validation splits"));
    }
    if params.config.num_classes != corpus.num_classes() {
        return Err(Error::usage(format!(
            "model has {} classes but the task {} has {}",
            params.config.num_classes,
            corpus.task,
            corpus.num_classes()
        )));
    }
    params.config.dropout_rate = cfg.dropout;

    let root = Rng::new(cfg.seed);
    let mut dropout_rng = root.substream(1);
    let shuffle_rng = root.substream(2);
    let mut adam = AdamState::new(&params);
    let mut grads = params.zeros_like();
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, ModelParams<T>, Metrics)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        let shuffle_seed = shuffle_rng.substream(epoch as u64).next_u64();
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for (b, batch) in batches(corpus, &train_idx, cfg.batch_size, Some(shuffle_seed))
            .iter()
            .enumerate()
        {
            let rows = batch.rows();
            let trace = params.forward(&rows, Mode::Train, Some(&mut dropout_rng))?;
            let out = compute_loss(&trace.probs, &batch.labels, &params, cfg.l2_coeff)?;
            let loss = out.loss.to_f64_lossy();
            if !loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "loss is {loss} at epoch {epoch}, batch {}",
                    b + 1
                )));
            }
            grads.zero();
            params.backward(&trace, &out.d_logits, &mut grads)?;
            add_l2_gradient(&params, cfg.l2_coeff, &mut grads);
            clip_gradients(&mut grads, cfg.clip_norm);
            adam_step(&mut params, &grads, &mut adam, cfg.learning_rate).map_err(|e| match e {
                Error::Divergence(what) => Error::Divergence(format!("{what} at epoch {epoch}, batch {}", b + 1)),
                other => other,
            })?;
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
        }

        let val = evaluate(&params, corpus, &val_idx)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            val_acc: val.accuracy,
            val_p: val.precision(),
            val_r: val.recall(),
            val_f1: val.f1(),
        };
        on_epoch(&record);
        log.records.push(record);

        if best.as_ref().is_none_or(|(acc, _, _)| val.accuracy > *acc) {
            best = Some((val.accuracy, params.clone(), val));
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let (_, params, best_validation) = best.expect("at least one epoch runs");
    Ok(TrainOutcome {
        params,
        log,
        best_validation,
    })
}
