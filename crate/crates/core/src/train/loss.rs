//! The training objective: reciprocal full-softmax cross-entropy with
//! cube-norm regularization, plus the temporal smoothing term.

use rayon::prelude::*;

use crate::data::Quadruple;
use crate::error::{Error, Result};
use crate::geometry::AtomKind;
use crate::model::{
    backward, forward, fused_operator_sum, score_tails_from_head, Gradients, ModelParams,
    ScoreKind, ScorePlan, TableId,
};
use crate::scalar::{norm3_cubed, Real};
use crate::model::VariantSpec;

/// Loss components of one batch, each a per-example mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLossParts {
    /// ce + lambda_u * n3 (what the optimizer sees, without the temporal term)
    pub objective: f64,
    pub ce: f64,
    /// unweighted cube-norm term
    pub n3: f64,
}

/// Reusable buffers for batch computation; sized lazily to the largest
/// (batch, entity) product seen.
#[derive(Default)]
pub struct BatchWorkspace {
    scores: Vec<f64>,
    dscores: Vec<f64>,
    dheads: Vec<f64>,
}

impl BatchWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

const ENTITY_BLOCK: usize = 64;

/// Mean cross-entropy of the batch plus the cube-norm regularizer, with
/// gradients for every touched row accumulated into `grads` (which the
/// caller zeroes between batches).
///
/// Each batch element is one reciprocal-augmented example: the loss term
/// `-φ(gold) + log Σ_o' exp φ(o')` ranges over all candidate tails. The
/// regularizer adds `lambda_u · (‖e_s‖₃³ + ‖t+s fused‖₃³ + ‖e_o‖₃³)` per
/// example, where `t+s fused` is the elementwise sum of the fused
/// translate/scale operator vectors.
pub fn batch_loss_into<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    kind: ScoreKind,
    batch: &[Quadruple],
    lambda_u: f64,
    ws: &mut BatchWorkspace,
    grads: &mut Gradients,
) -> Result<BatchLossParts> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let n_batch = batch.len();
    let n_entities = params.n_entities();
    let d = params.d();
    let inv_b = 1.0 / n_batch as f64;

    // forward traces
    let traces = batch
        .par_iter()
        .map(|q| {
            params.entity_row(q.tail)?; // validate tail id up front
            forward(params, plan, q.head, q.rel, q.time)
        })
        .collect::<Result<Vec<_>>>()?;

    // scores for every candidate tail
    ws.scores.resize(n_batch * n_entities, 0.0);
    ws.scores
        .par_chunks_mut(n_entities)
        .zip(&traces)
        .for_each(|(row, trace)| score_tails_from_head(params, kind, trace.head(), row));

    // softmax rows -> per-example CE and dscores = (p - onehot)/B
    ws.dscores.resize(n_batch * n_entities, 0.0);
    let per_example: Vec<Result<(f64, f64, Vec<f64>)>> = ws
        .dscores
        .par_chunks_mut(n_entities)
        .zip(ws.scores.par_chunks(n_entities))
        .zip(&traces)
        .enumerate()
        .map(|(b, ((drow, srow), trace))| {
            let q = &batch[b];
            let max = srow.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(Error::NonFinite {
                    what: "batch scores",
                    example: Some(b),
                });
            }
            let mut sum = 0.0;
            for (dst, &s) in drow.iter_mut().zip(srow.iter()) {
                let e = (s - max).exp();
                *dst = e;
                sum += e;
            }
            let lse = max + sum.ln();
            let ce = lse - srow[q.tail as usize];
            if !ce.is_finite() {
                return Err(Error::NonFinite {
                    what: "cross-entropy",
                    example: Some(b),
                });
            }
            for dst in drow.iter_mut() {
                *dst = *dst / sum * inv_b;
            }
            drow[q.tail as usize] -= inv_b;

            let u = fused_operator_sum(plan, trace);
            let n3 = norm3_cubed(&trace.xs[0])
                + u.iter().map(|x| x.abs().powi(3)).sum::<f64>()
                + norm3_cubed(params.entity_row(q.tail)?);
            Ok((ce, n3, u))
        })
        .collect();

    let mut ce_sum = 0.0;
    let mut n3_sum = 0.0;
    let mut reg_vectors: Vec<Vec<f64>> = Vec::with_capacity(n_batch);
    for r in per_example {
        let (ce, n3, u) = r?;
        ce_sum += ce;
        n3_sum += n3;
        reg_vectors.push(u);
    }
    let ce = ce_sum * inv_b;
    let n3 = n3_sum * inv_b;

    // cotangent of each transformed head: dH_b = Σ_o dscores[b,o] · dφ/dh
    ws.dheads.resize(n_batch * d, 0.0);
    {
        let dheads = &mut ws.dheads;
        let dscores = &ws.dscores;
        let scores = &ws.scores;
        let traces_ref = &traces;
        dheads.par_chunks_mut(d).enumerate().for_each(|(b, dh)| {
            dh.fill(0.0);
            let drow = &dscores[b * n_entities..(b + 1) * n_entities];
            match kind {
                ScoreKind::Similarity => {
                    for (o, &c) in drow.iter().enumerate() {
                        let row = params.entity.row(o);
                        for i in 0..d {
                            dh[i] += c * row[i].to_f64();
                        }
                    }
                }
                ScoreKind::Distance => {
                    let srow = &scores[b * n_entities..(b + 1) * n_entities];
                    let h = traces_ref[b].head();
                    let mut qsum = 0.0;
                    for (o, &c) in drow.iter().enumerate() {
                        let dist = (-srow[o]).max(1e-300);
                        let qc = c / dist;
                        qsum += qc;
                        let row = params.entity.row(o);
                        for i in 0..d {
                            dh[i] += qc * row[i].to_f64();
                        }
                    }
                    for i in 0..d {
                        dh[i] -= qsum * h[i].to_f64();
                    }
                }
            }
        });
    }

    // dense entity gradient: dE_o = Σ_b dscores[b,o] · dφ/dE_o
    {
        let dscores = &ws.dscores;
        let scores = &ws.scores;
        let traces = &traces;
        grads
            .entity
            .data_mut()
            .par_chunks_mut(ENTITY_BLOCK * d)
            .enumerate()
            .for_each(|(blk, dst)| {
                let o0 = blk * ENTITY_BLOCK;
                let width = dst.len() / d;
                for b in 0..n_batch {
                    let h = traces[b].head();
                    let coeffs = &dscores[b * n_entities + o0..b * n_entities + o0 + width];
                    match kind {
                        ScoreKind::Similarity => {
                            for (j, &c) in coeffs.iter().enumerate() {
                                let out = &mut dst[j * d..(j + 1) * d];
                                for i in 0..d {
                                    out[i] += c * h[i].to_f64();
                                }
                            }
                        }
                        ScoreKind::Distance => {
                            let srow = &scores[b * n_entities + o0..b * n_entities + o0 + width];
                            for (j, &c) in coeffs.iter().enumerate() {
                                let dist = (-srow[j]).max(1e-300);
                                let qc = c / dist;
                                let row = params.entity.row(o0 + j);
                                let out = &mut dst[j * d..(j + 1) * d];
                                for i in 0..d {
                                    out[i] += qc * (h[i].to_f64() - row[i].to_f64());
                                }
                            }
                        }
                    }
                }
            });
    }

    // per-example backward through pipeline + fusion, regularizer included
    let reg_scale = 3.0 * lambda_u * inv_b;
    let example_grads: Vec<(crate::model::AtomGrads, Vec<f64>)> = traces
        .par_iter()
        .enumerate()
        .map(|(b, trace)| {
            let q = &batch[b];
            let dh = &ws.dheads[b * d..(b + 1) * d];
            let reg_cotangent: Vec<f64> = reg_vectors[b]
                .iter()
                .map(|&x| reg_scale * x.abs() * x)
                .collect();
            let reg_opt = if lambda_u != 0.0 && !reg_cotangent.is_empty() {
                Some(reg_cotangent.as_slice())
            } else {
                None
            };
            let mut atom_grads = backward(plan, trace, dh, reg_opt);
            // ‖e_s‖³ term
            if lambda_u != 0.0 {
                for (g, v) in atom_grads.d_e_head.iter_mut().zip(&trace.xs[0]) {
                    let x = v.to_f64();
                    *g += reg_scale * x.abs() * x;
                }
            }
            // ‖e_o‖³ term
            let tail_reg: Vec<f64> = if lambda_u != 0.0 {
                params
                    .entity
                    .row(q.tail as usize)
                    .iter()
                    .map(|v| {
                        let x = v.to_f64();
                        reg_scale * x.abs() * x
                    })
                    .collect()
            } else {
                Vec::new()
            };
            (atom_grads, tail_reg)
        })
        .collect();

    // sequential scatter in batch order keeps accumulation deterministic
    let pipeline = &plan.variant.pipeline;
    for ((g, tail_reg), q) in example_grads.iter().zip(batch) {
        for (dst, v) in grads
            .entity
            .row_mut(q.head as usize)
            .iter_mut()
            .zip(&g.d_e_head)
        {
            *dst += *v;
        }
        if !tail_reg.is_empty() {
            for (dst, v) in grads
                .entity
                .row_mut(q.tail as usize)
                .iter_mut()
                .zip(tail_reg)
            {
                *dst += *v;
            }
        }
        for (atom, values) in pipeline.head_atoms().iter().zip(&g.d_head_rows) {
            let id = TableId::for_atom(*atom);
            for (dst, v) in grads
                .table_mut(id)
                .row_mut(q.rel as usize)
                .iter_mut()
                .zip(values)
            {
                *dst += *v;
            }
        }
        for (atom, values) in pipeline.time_atoms().iter().zip(&g.d_time_rows) {
            let id = TableId::for_atom(*atom);
            for (dst, v) in grads
                .table_mut(id)
                .row_mut(q.time as usize)
                .iter_mut()
                .zip(values)
            {
                *dst += *v;
            }
        }
    }

    Ok(BatchLossParts {
        objective: ce + lambda_u * n3,
        ce,
        n3,
    })
}

/// Allocating convenience wrapper around [`batch_loss_into`]: returns the
/// loss parts and a fresh gradient set.
pub fn batch_loss<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    kind: ScoreKind,
    batch: &[Quadruple],
    lambda_u: f64,
) -> Result<(BatchLossParts, Gradients)> {
    let mut grads = Gradients::zeros(params.dims());
    let mut ws = BatchWorkspace::new();
    let parts = batch_loss_into(params, plan, kind, batch, lambda_u, &mut ws, &mut grads)?;
    Ok((parts, grads))
}

/// Which time tables the smoothing regularizer covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeRegMask {
    pub translate: bool,
    pub scale: bool,
    pub rotate: bool,
}

impl TimeRegMask {
    /// Both vector tables always; the rotation table when the variant has a
    /// time rotation atom.
    pub fn for_variant(variant: &VariantSpec) -> Self {
        let rotate = variant
            .pipeline
            .time_atoms()
            .iter()
            .any(|a| a.kind == AtomKind::Rotate);
        TimeRegMask {
            translate: true,
            scale: true,
            rotate,
        }
    }

    fn tables(&self) -> Vec<TableId> {
        let mut out = Vec::new();
        if self.translate {
            out.push(TableId::TimeTranslate);
        }
        if self.scale {
            out.push(TableId::TimeScale);
        }
        if self.rotate {
            out.push(TableId::TimeRotate);
        }
        out
    }
}

/// Smoothness penalty between chronologically adjacent timestamp rows:
/// `(1/(N_τ - 1)) Σ_i ‖row_{i+1} - row_i‖₃³` summed over the masked time
/// tables. Returns the raw (unweighted) value; gradients are accumulated
/// into `grads` scaled by `weight`.
pub fn temporal_smoothness<S: Real>(
    params: &ModelParams<S>,
    mask: TimeRegMask,
    weight: f64,
    mut grads: Option<&mut Gradients>,
) -> Result<f64> {
    let n_t = params.dims().n_timestamps;
    if n_t < 2 {
        return Err(Error::TooFewTimestamps(n_t));
    }
    let norm = 1.0 / (n_t as f64 - 1.0);
    let mut total = 0.0;
    for id in mask.tables() {
        let table = params.table(id);
        let cols = table.cols();
        if cols == 0 {
            continue;
        }
        for i in 0..n_t - 1 {
            let a = table.row(i);
            let b = table.row(i + 1);
            for j in 0..cols {
                let delta = b[j].to_f64() - a[j].to_f64();
                total += delta.abs().powi(3);
                if let Some(g) = grads.as_deref_mut() {
                    let dg = 3.0 * delta.abs() * delta * norm * weight;
                    let t = g.table_mut(id);
                    t.row_mut(i + 1)[j] += dg;
                    t.row_mut(i)[j] -= dg;
                }
            }
        }
    }
    Ok(total * norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FusionMode;
    use crate::model::{Dims, InitConfig};

    fn dims(n_e: usize, n_t: usize) -> Dims {
        Dims {
            d: 4,
            n_entities: n_e,
            n_relations: 2,
            n_timestamps: n_t,
        }
    }

    #[test]
    fn single_candidate_gives_zero_cross_entropy() {
        let params: ModelParams<f64> =
            ModelParams::init(dims(1, 2), &InitConfig::default(), 3);
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        let batch = [Quadruple::new(0, 1, 0, 1)];
        let (parts, _) =
            batch_loss(&params, &plan, ScoreKind::Similarity, &batch, 0.0).unwrap();
        assert!(parts.ce.abs() < 1e-12, "ce = {}", parts.ce);
        assert_eq!(parts.objective, parts.ce);
    }

    #[test]
    fn uniform_scores_give_log_e() {
        // zero entity table makes every score 0 -> softmax uniform
        let params: ModelParams<f64> = ModelParams::zeros(dims(20, 2));
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        let batch = [Quadruple::new(0, 1, 5, 1), Quadruple::new(1, 0, 2, 0)];
        let (parts, _) =
            batch_loss(&params, &plan, ScoreKind::Similarity, &batch, 0.0).unwrap();
        let expect = (20.0f64).ln();
        assert!((parts.ce - expect).abs() < 1e-12, "{} vs {expect}", parts.ce);
    }

    #[test]
    fn n3_term_is_nonnegative_and_zero_iff_zero_vectors() {
        let params: ModelParams<f64> = ModelParams::zeros(dims(4, 2));
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        let batch = [Quadruple::new(0, 1, 2, 1)];
        let (parts, _) =
            batch_loss(&params, &plan, ScoreKind::Similarity, &batch, 0.5).unwrap();
        assert_eq!(parts.n3, 0.0);
        let params: ModelParams<f64> =
            ModelParams::init(dims(4, 2), &InitConfig::default(), 5);
        let (parts, _) =
            batch_loss(&params, &plan, ScoreKind::Similarity, &batch, 0.5).unwrap();
        assert!(parts.n3 > 0.0);
        assert_eq!(parts.objective, parts.ce + 0.5 * parts.n3);
    }

    #[test]
    fn empty_batch_errors() {
        let params: ModelParams<f64> = ModelParams::zeros(dims(4, 2));
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        assert!(matches!(
            batch_loss(&params, &plan, ScoreKind::Similarity, &[], 0.0),
            Err(Error::Empty("batch"))
        ));
    }

    #[test]
    fn identical_time_rows_smooth_to_zero() {
        let mut params: ModelParams<f64> = ModelParams::zeros(dims(3, 4));
        for i in 0..4 {
            params.set_row(TableId::TimeTranslate, i, &[0.5, -1.0, 2.0, 0.0]);
            params.set_row(TableId::TimeScale, i, &[1.0, 1.0, 1.0, 1.0]);
        }
        let mask = TimeRegMask {
            translate: true,
            scale: true,
            rotate: false,
        };
        let v = temporal_smoothness(&params, mask, 1.0, None).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn two_timestamps_hand_value() {
        // t rows (0,0) and (1,1), s rows equal: value = |1|³ + |1|³ = 2
        let mut params: ModelParams<f64> = ModelParams::zeros(
            Dims {
                d: 2,
                n_entities: 2,
                n_relations: 1,
                n_timestamps: 2,
            },
        );
        params.set_row(TableId::TimeTranslate, 1, &[1.0, 1.0]);
        let mask = TimeRegMask {
            translate: true,
            scale: true,
            rotate: false,
        };
        let v = temporal_smoothness(&params, mask, 1.0, None).unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn smoothness_invariant_under_constant_shift() {
        let mut params: ModelParams<f64> =
            ModelParams::init(dims(3, 5), &InitConfig::default(), 8);
        let mask = TimeRegMask {
            translate: true,
            scale: true,
            rotate: true,
        };
        let before = temporal_smoothness(&params, mask, 1.0, None).unwrap();
        for i in 0..5 {
            for v in params.time_translate.row_mut(i) {
                *v += 10.0;
            }
        }
        let after = temporal_smoothness(&params, mask, 1.0, None).unwrap();
        assert!((before - after).abs() < 1e-9, "{before} vs {after}");
    }

    #[test]
    fn one_timestamp_is_rejected() {
        let params: ModelParams<f64> = ModelParams::zeros(dims(3, 1));
        let mask = TimeRegMask {
            translate: true,
            scale: true,
            rotate: false,
        };
        assert!(matches!(
            temporal_smoothness(&params, mask, 1.0, None),
            Err(Error::TooFewTimestamps(1))
        ));
    }
}
