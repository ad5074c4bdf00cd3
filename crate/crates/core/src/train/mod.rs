//! Training: configuration, the combined objective, and the epoch loop.

mod adagrad;
mod loss;

pub use adagrad::{adagrad_step, AdagradState, ADAGRAD_EPSILON};
pub use loss::{
    batch_loss, batch_loss_into, temporal_smoothness, BatchLossParts, BatchWorkspace, TimeRegMask,
};

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::data::{augment_reciprocal, BlockShuffleReader, Dataset, FilterIndex, Quadruple};
use crate::error::Result;
use crate::eval::evaluate;
use crate::geometry::FusionMode;
use crate::model::{
    save_checkpoint, Gradients, InitConfig, ModelParams, ScoreKind, ScorePlan, VariantSpec,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Real;

/// Hyperparameters of one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// cube-norm regularizer weight
    pub lambda_u: f64,
    /// temporal smoothing weight
    pub lambda_tau: f64,
    pub d: usize,
    /// epochs between validation passes; 0 disables validation
    pub eval_every: usize,
    /// validation passes without improvement before stopping
    pub patience: usize,
    pub seed: u64,
    pub fusion: FusionMode,
    pub score_kind: ScoreKind,
    pub init: InitConfig,
    /// override for the smoothing mask (default: derived from the variant)
    pub time_reg_mask: Option<TimeRegMask>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            batch_size: 1000,
            max_epochs: 100,
            lambda_u: 0.0,
            lambda_tau: 0.0,
            d: 32,
            eval_every: 5,
            patience: 10,
            seed: 0,
            fusion: FusionMode::Vector,
            score_kind: ScoreKind::Similarity,
            init: InitConfig::default(),
            time_reg_mask: None,
        }
    }
}

impl TrainConfig {
    /// Published full-scale profile for a benchmark dataset, by name
    /// (ICEWS14, ICEWS05-15, GDELT; case-insensitive).
    pub fn paper_profile(dataset: &str) -> Option<TrainConfig> {
        let base = TrainConfig {
            eval_every: 5,
            patience: 10,
            ..TrainConfig::default()
        };
        let name = dataset.to_ascii_uppercase();
        let cfg = match name.as_str() {
            "ICEWS14" => TrainConfig {
                learning_rate: 0.01,
                d: 6000,
                batch_size: 4000,
                max_epochs: 400,
                lambda_u: 0.0025,
                lambda_tau: 0.01,
                ..base
            },
            "ICEWS05-15" => TrainConfig {
                learning_rate: 0.08,
                d: 8000,
                batch_size: 6000,
                max_epochs: 100,
                lambda_u: 0.002,
                lambda_tau: 0.1,
                ..base
            },
            "GDELT" => TrainConfig {
                learning_rate: 0.35,
                d: 6000,
                batch_size: 2000,
                max_epochs: 50,
                lambda_u: 0.001,
                lambda_tau: 0.001,
                ..base
            },
            _ => return None,
        };
        Some(cfg)
    }

    /// CPU-friendly ICEWS14 profile (d = 256) used by the scaled-down runs.
    pub fn desk_icews14() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.05,
            d: 256,
            batch_size: 1000,
            max_epochs: 100,
            lambda_u: 0.0025,
            lambda_tau: 0.01,
            ..TrainConfig::default()
        }
    }
}

/// Where the training examples come from.
pub enum TrainSource<'a> {
    /// Reciprocal-augmented examples held in memory and fully shuffled each
    /// epoch.
    InMemory(Vec<Quadruple>),
    /// Block-shuffled streaming from a dataset cache.
    Streamed(&'a BlockShuffleReader),
}

impl TrainSource<'_> {
    pub fn n_examples(&self) -> usize {
        match self {
            TrainSource::InMemory(v) => v.len(),
            TrainSource::Streamed(r) => r.n_examples() as usize,
        }
    }
}

/// Everything the loop needs besides parameters.
pub struct TrainContext<'a> {
    pub dataset: &'a Dataset,
    pub filter: &'a FilterIndex,
    pub source: TrainSource<'a>,
    /// Where to write the best-validation checkpoint, if anywhere.
    pub checkpoint_path: Option<PathBuf>,
}

impl<'a> TrainContext<'a> {
    /// In-memory context over a dataset's train split.
    pub fn in_memory(
        dataset: &'a Dataset,
        filter: &'a FilterIndex,
        checkpoint_path: Option<PathBuf>,
    ) -> Result<Self> {
        let augmented =
            augment_reciprocal(&dataset.train, dataset.vocab.n_relations() as u32)?;
        Ok(TrainContext {
            dataset,
            filter,
            source: TrainSource::InMemory(augmented),
            checkpoint_path,
        })
    }
}

/// One line of the training report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// epoch mean of the full objective: ce + λ_u·n3 + λ_τ·temporal
    pub loss: f64,
    pub ce: f64,
    pub n3: f64,
    pub temporal: f64,
    pub seconds: f64,
    pub valid_mrr: Option<f64>,
}

impl EpochRecord {
    /// Line-oriented record, one per epoch.
    pub fn line(&self) -> String {
        let mut s = format!(
            "epoch={} loss={:.6} ce={:.6} n3={:.6} temporal={:.6} secs={:.2}",
            self.epoch, self.loss, self.ce, self.n3, self.temporal, self.seconds
        );
        if let Some(mrr) = self.valid_mrr {
            s.push_str(&format!(" valid_mrr={mrr:.6}"));
        }
        s
    }
}

/// Outcome of a training run. The best parameters (by validation MRR, or
/// the final state when validation is disabled) are returned in memory;
/// they are also on disk when a checkpoint path was configured.
pub struct TrainReport<S> {
    pub epochs: Vec<EpochRecord>,
    pub best_valid_mrr: Option<f64>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub best: Option<Box<(ModelParams<S>, AdagradState<S>)>>,
}

impl<S> TrainReport<S> {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

/// Run the epoch loop: seeded shuffles, batched gradient steps, periodic
/// filtered validation, best-checkpoint tracking and early stopping.
pub fn train_loop<S: Real>(
    cfg: &TrainConfig,
    variant: &VariantSpec,
    ctx: &TrainContext,
    params: &mut ModelParams<S>,
    state: &mut AdagradState<S>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainReport<S>> {
    let plan = ScorePlan::new(variant.clone(), cfg.fusion);
    let mask = cfg
        .time_reg_mask
        .unwrap_or_else(|| TimeRegMask::for_variant(variant));
    let n_relations = ctx.dataset.vocab.n_relations() as u32;
    let use_temporal = cfg.lambda_tau != 0.0 && ctx.dataset.vocab.n_timestamps() >= 2;

    let mut ws = BatchWorkspace::new();
    let mut grads = Gradients::zeros(params.dims());
    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.max_epochs),
        best_valid_mrr: None,
        best_epoch: None,
        stopped_early: false,
        best: None,
    };
    let mut evals_since_best = 0usize;

    let mut in_memory_examples: Option<Vec<Quadruple>> = match &ctx.source {
        TrainSource::InMemory(v) => Some(v.clone()),
        TrainSource::Streamed(_) => None,
    };

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let epoch_seed = derive_seed(cfg.seed, epoch as u64);
        let mut ce_sum = 0.0;
        let mut n3_sum = 0.0;
        let mut objective_sum = 0.0;
        let mut temporal_sum = 0.0;
        let mut n_examples = 0usize;
        let mut n_batches = 0usize;

        let mut run_batch = |batch: &[Quadruple],
                             params: &mut ModelParams<S>,
                             state: &mut AdagradState<S>,
                             ws: &mut BatchWorkspace,
                             grads: &mut Gradients|
         -> Result<()> {
            zero_gradients(grads);
            let parts = batch_loss_into(
                params,
                &plan,
                cfg.score_kind,
                batch,
                cfg.lambda_u,
                ws,
                grads,
            )?;
            let temporal = if use_temporal {
                temporal_smoothness(params, mask, cfg.lambda_tau, Some(grads))?
            } else {
                0.0
            };
            adagrad_step(params, state, grads, cfg.learning_rate)?;
            let w = batch.len() as f64;
            ce_sum += parts.ce * w;
            n3_sum += parts.n3 * w;
            objective_sum += (parts.objective + cfg.lambda_tau * temporal) * w;
            temporal_sum += temporal;
            n_examples += batch.len();
            n_batches += 1;
            Ok(())
        };

        match (&ctx.source, &mut in_memory_examples) {
            (TrainSource::InMemory(_), Some(examples)) => {
                let mut rng = rng_from_seed(epoch_seed);
                examples.shuffle(&mut rng);
                for batch in examples.chunks(cfg.batch_size) {
                    run_batch(batch, params, state, &mut ws, &mut grads)?;
                }
            }
            (TrainSource::Streamed(reader), _) => {
                for block in reader.epoch(epoch_seed)? {
                    let block = block?;
                    for batch in block.chunks(cfg.batch_size) {
                        run_batch(batch, params, state, &mut ws, &mut grads)?;
                    }
                }
            }
            _ => unreachable!("source/list mismatch"),
        }
        drop(run_batch);

        let n = n_examples.max(1) as f64;
        let mut record = EpochRecord {
            epoch,
            loss: objective_sum / n,
            ce: ce_sum / n,
            n3: n3_sum / n,
            temporal: temporal_sum / n_batches.max(1) as f64,
            seconds: started.elapsed().as_secs_f64(),
            valid_mrr: None,
        };

        let is_last = epoch == cfg.max_epochs;
        let do_eval = cfg.eval_every != 0
            && !ctx.dataset.valid.is_empty()
            && (epoch % cfg.eval_every == 0 || is_last);
        if do_eval {
            let eval = evaluate(
                params,
                &plan,
                cfg.score_kind,
                &ctx.dataset.valid,
                n_relations,
                ctx.filter,
            )?;
            record.valid_mrr = Some(eval.both.mrr);
            let improved = report
                .best_valid_mrr
                .map(|b| eval.both.mrr > b)
                .unwrap_or(true);
            if improved {
                report.best_valid_mrr = Some(eval.both.mrr);
                report.best_epoch = Some(epoch);
                report.best = Some(Box::new((params.clone(), state.clone())));
                evals_since_best = 0;
                if let Some(path) = &ctx.checkpoint_path {
                    save_checkpoint(path, params, &state.accum, variant.name)?;
                }
            } else {
                evals_since_best += 1;
            }
        }

        on_epoch(&record);
        report.epochs.push(record);

        if do_eval && cfg.patience != 0 && evals_since_best >= cfg.patience {
            report.stopped_early = true;
            break;
        }
    }

    // without validation the final state is the best state
    if report.best.is_none() {
        report.best = Some(Box::new((params.clone(), state.clone())));
        if let Some(path) = &ctx.checkpoint_path {
            save_checkpoint(path, params, &state.accum, variant.name)?;
        }
    }
    Ok(report)
}

fn zero_gradients(grads: &mut Gradients) {
    for id in crate::model::TableId::ALL {
        grads.table_mut(id).data_mut().fill(0.0);
    }
}
