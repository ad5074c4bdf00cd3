//! Filtered ranking evaluation, per-stage rank analysis, and embedding
//! export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::data::{FilterIndex, Quadruple, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{forward, score_tails_from_head, ModelParams, ScoreKind, ScorePlan, TableId};
use crate::scalar::Real;

/// Ranking quality over one query set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingReport {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub count: usize,
}

impl RankingReport {
    fn from_ranks(ranks: &[usize]) -> RankingReport {
        let n = ranks.len().max(1) as f64;
        let mut mrr = 0.0;
        let (mut h1, mut h3, mut h10) = (0usize, 0usize, 0usize);
        for &r in ranks {
            mrr += 1.0 / r as f64;
            if r <= 1 {
                h1 += 1;
            }
            if r <= 3 {
                h3 += 1;
            }
            if r <= 10 {
                h10 += 1;
            }
        }
        RankingReport {
            mrr: mrr / n,
            hits1: h1 as f64 / n,
            hits3: h3 as f64 / n,
            hits10: h10 as f64 / n,
            count: ranks.len(),
        }
    }

    /// Machine-readable key=value line.
    pub fn key_value_line(&self) -> String {
        format!(
            "mrr={:.6} hits1={:.6} hits3={:.6} hits10={:.6} n={}",
            self.mrr, self.hits1, self.hits3, self.hits10, self.count
        )
    }
}

/// Reports for both prediction directions and their per-query aggregate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub tail: RankingReport,
    pub head: RankingReport,
    pub both: RankingReport,
}

/// Mid-rank of `target` among candidate scores: 1 + (# strictly greater)
/// + ceil((# ties among others) / 2). Entities in `golds` other than the
/// target are excluded from the competition (the filtered protocol);
/// `golds` must be sorted ascending.
pub fn filtered_rank_of(scores: &[f64], golds: &[u32], target: u32) -> usize {
    let target_score = scores[target as usize];
    let mut greater = 0usize;
    let mut ties = 0usize;
    let mut gold_iter = golds.iter().peekable();
    for (i, &s) in scores.iter().enumerate() {
        let id = i as u32;
        // advance the sorted gold pointer; skip known-true competitors
        let mut filtered = false;
        while let Some(&&g) = gold_iter.peek() {
            if g < id {
                gold_iter.next();
            } else {
                if g == id {
                    filtered = true;
                }
                break;
            }
        }
        if id == target {
            continue;
        }
        if filtered {
            continue;
        }
        if s > target_score {
            greater += 1;
        } else if s == target_score {
            ties += 1;
        }
    }
    1 + greater + (ties + 1) / 2
}

/// Rank one query's gold tail under the filtered protocol.
fn query_rank<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    kind: ScoreKind,
    q: &Quadruple,
    filter: &FilterIndex,
    buf: &mut Vec<f64>,
) -> Result<usize> {
    buf.resize(params.n_entities(), 0.0);
    crate::model::score_all_tails_into(params, plan, kind, q.head, q.rel, q.time, buf)?;
    Ok(filtered_rank_of(buf, filter.golds(q.head, q.rel, q.time), q.tail))
}

/// Filtered ranking metrics over an (unaugmented) split. Each fact yields a
/// tail query and, through its inverse relation, a head query; `filter` must
/// be built over the reciprocal-augmented union of all splits.
pub fn evaluate<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    kind: ScoreKind,
    split: &[Quadruple],
    n_relations: u32,
    filter: &FilterIndex,
) -> Result<EvalReport> {
    if split.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    let ranks: Vec<Result<(usize, usize)>> = split
        .par_iter()
        .map_init(
            || Vec::with_capacity(params.n_entities()),
            |buf, q| {
                let tail_rank = query_rank(params, plan, kind, q, filter, buf)?;
                let head_q = q.inverse(n_relations);
                let head_rank = query_rank(params, plan, kind, &head_q, filter, buf)?;
                Ok((tail_rank, head_rank))
            },
        )
        .collect();

    let mut tail_ranks = Vec::with_capacity(split.len());
    let mut head_ranks = Vec::with_capacity(split.len());
    for r in ranks {
        let (t, h) = r?;
        tail_ranks.push(t);
        head_ranks.push(h);
    }
    let mut all = tail_ranks.clone();
    all.extend_from_slice(&head_ranks);
    Ok(EvalReport {
        tail: RankingReport::from_ranks(&tail_ranks),
        head: RankingReport::from_ranks(&head_ranks),
        both: RankingReport::from_ranks(&all),
    })
}

/// Unfiltered gold-tail ranks at each stage of the transform pipeline:
/// the raw head embedding, the intermediate after each atom. Requires a
/// two-atom (translate, scale) pipeline so the stages line up with the
/// raw → translated → fully-transformed reading.
#[derive(Debug, Clone, Copy)]
pub struct StageRank {
    pub query: Quadruple,
    pub raw: usize,
    pub translated: usize,
    pub full: usize,
}

pub fn stage_ranks<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    kind: ScoreKind,
    queries: &[Quadruple],
) -> Result<Vec<StageRank>> {
    if plan.effective_atoms().len() != 2 {
        return Err(Error::VariantMismatch {
            expected: "a two-stage pipeline (translate, scale)".into(),
            got: plan.variant.name.into(),
        });
    }
    queries
        .par_iter()
        .map_init(
            || Vec::with_capacity(params.n_entities()),
            |buf, q| {
                let trace = forward(params, plan, q.head, q.rel, q.time)?;
                let mut stage = [0usize; 3];
                for (i, vec) in trace.xs.iter().enumerate() {
                    buf.resize(params.n_entities(), 0.0);
                    score_tails_from_head(params, kind, vec, buf);
                    stage[i] = filtered_rank_of(buf, &[], q.tail);
                }
                Ok(StageRank {
                    query: *q,
                    raw: stage[0],
                    translated: stage[1],
                    full: stage[2],
                })
            },
        )
        .collect()
}

/// Export format for embedding tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Tsv,
    Binary,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(ExportFormat::Tsv),
            "binary" | "bin" => Ok(ExportFormat::Binary),
            other => Err(format!("unknown export format `{other}` (expected tsv|binary)")),
        }
    }
}

fn label_for(vocab: &Vocabulary, table: TableId, id: u32) -> String {
    let label = match table {
        TableId::Entity => vocab.entity_name(id).map(str::to_string),
        TableId::RelTranslate | TableId::RelScale | TableId::RelRotate => {
            vocab.relation_label(id)
        }
        TableId::TimeTranslate | TableId::TimeScale | TableId::TimeRotate => {
            vocab.timestamp_name(id).map(str::to_string)
        }
    };
    label.unwrap_or_else(|| format!("#{id}"))
}

/// Write one table as `id <tab> label <tab> values...` rows (TSV) or as a
/// small binary container (same little-endian u32/f32 conventions as the
/// checkpoint). Returns the number of rows written.
pub fn export_embeddings<S: Real>(
    params: &ModelParams<S>,
    vocab: &Vocabulary,
    which: TableId,
    path: &Path,
    format: ExportFormat,
) -> Result<usize> {
    let table = params.table(which);
    let ctx = || format!("writing export {}", path.display());
    let file = File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    match format {
        ExportFormat::Tsv => {
            (|| -> std::io::Result<()> {
                for (i, row) in table.iter_rows().enumerate() {
                    write!(w, "{}\t{}", i, label_for(vocab, which, i as u32))?;
                    for v in row {
                        write!(w, "\t{:.9e}", v.to_f64())?;
                    }
                    writeln!(w)?;
                }
                w.flush()
            })()
            .map_err(|e| Error::io(ctx(), e))?;
        }
        ExportFormat::Binary => {
            (|| -> std::io::Result<()> {
                w.write_all(crate::model::CHECKPOINT_MAGIC)?;
                w.write_all(&1u32.to_le_bytes())?;
                let name = which.name().as_bytes();
                w.write_all(&(name.len() as u32).to_le_bytes())?;
                w.write_all(name)?;
                w.write_all(&(table.rows() as u32).to_le_bytes())?;
                w.write_all(&(table.cols() as u32).to_le_bytes())?;
                for v in table.data() {
                    w.write_all(&v.to_f32().to_le_bytes())?;
                }
                w.flush()
            })()
            .map_err(|e| Error::io(ctx(), e))?;
        }
    }
    Ok(table.rows())
}

/// Export the three stage vectors of each sampled query plus the (distinct)
/// tail embeddings, for external projection tools. Returns the row count:
/// 3 * samples + distinct tails.
pub fn export_stages<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    vocab: &Vocabulary,
    queries: &[Quadruple],
    path: &Path,
) -> Result<usize> {
    if plan.effective_atoms().len() != 2 {
        return Err(Error::VariantMismatch {
            expected: "a two-stage pipeline (translate, scale)".into(),
            got: plan.variant.name.into(),
        });
    }
    let ctx = || format!("writing stage export {}", path.display());
    let file = File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    let mut rows = 0usize;
    let mut tails: Vec<u32> = queries.iter().map(|q| q.tail).collect();
    tails.sort_unstable();
    tails.dedup();
    let stage_names = ["raw", "translated", "full"];
    (|| -> Result<()> {
        for (qi, q) in queries.iter().enumerate() {
            let trace = forward(params, plan, q.head, q.rel, q.time)?;
            for (stage, vec) in trace.xs.iter().enumerate() {
                write!(
                    w,
                    "{}\t{}\t{}",
                    qi,
                    stage_names[stage],
                    label_for(vocab, TableId::Entity, q.head)
                )
                .map_err(|e| Error::io(ctx(), e))?;
                for v in vec {
                    write!(w, "\t{:.9e}", v.to_f64()).map_err(|e| Error::io(ctx(), e))?;
                }
                writeln!(w).map_err(|e| Error::io(ctx(), e))?;
                rows += 1;
            }
        }
        for t in &tails {
            write!(
                w,
                "-\ttail\t{}",
                label_for(vocab, TableId::Entity, *t)
            )
            .map_err(|e| Error::io(ctx(), e))?;
            for v in params.entity_row(*t)? {
                write!(w, "\t{:.9e}", v.to_f64()).map_err(|e| Error::io(ctx(), e))?;
            }
            writeln!(w).map_err(|e| Error::io(ctx(), e))?;
            rows += 1;
        }
        w.flush().map_err(|e| Error::io(ctx(), e))
    })()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_filter_index;
    use crate::geometry::FusionMode;
    use crate::model::InitConfig;

    #[test]
    fn rank_basics() {
        // scores: target id 1 has 0.5; id 0 greater; id 2 smaller
        let scores = [0.9, 0.5, 0.1];
        assert_eq!(filtered_rank_of(&scores, &[], 1), 2);
        // filtering out the stronger gold moves the target to rank 1
        assert_eq!(filtered_rank_of(&scores, &[0, 1], 1), 1);
        // tie with one other: mid-rank = 1 + ceil(1/2)
        let tied = [0.5, 0.5, 0.1];
        assert_eq!(filtered_rank_of(&tied, &[], 0), 2);
        assert_eq!(filtered_rank_of(&tied, &[], 1), 2);
    }

    #[test]
    fn two_entities_rank_two() {
        // gold always ranked 2 -> MRR 0.5, H@1 = 0, H@3 = 1
        let report = RankingReport::from_ranks(&[2, 2, 2, 2]);
        assert_eq!(report.mrr, 0.5);
        assert_eq!(report.hits1, 0.0);
        assert_eq!(report.hits3, 1.0);
        assert_eq!(report.hits10, 1.0);
    }

    #[test]
    fn report_invariants_hold() {
        let report = RankingReport::from_ranks(&[1, 2, 5, 11, 3]);
        assert!(report.hits1 <= report.hits3);
        assert!(report.hits3 <= report.hits10);
        assert!(report.mrr >= report.hits1);
        assert!(report.mrr <= 1.0);
    }

    #[test]
    fn rank_invariant_under_monotone_transforms() {
        let scores: Vec<f64> = vec![0.3, -1.0, 2.5, 0.0, 0.3, 1.1];
        let golds = vec![2u32];
        for target in 0..scores.len() as u32 {
            let base = filtered_rank_of(&scores, &golds, target);
            let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
            let aff: Vec<f64> = scores.iter().map(|s| 3.0 * s + 7.0).collect();
            assert_eq!(filtered_rank_of(&exp, &golds, target), base);
            assert_eq!(filtered_rank_of(&aff, &golds, target), base);
        }
    }

    #[test]
    fn filtering_never_worsens_rank() {
        let scores: Vec<f64> = vec![5.0, 4.0, 3.0, 2.0, 1.0];
        let unfiltered = filtered_rank_of(&scores, &[], 3);
        let filtered = filtered_rank_of(&scores, &[0, 1, 3], 3);
        assert!(filtered <= unfiltered);
        assert_eq!(unfiltered, 4);
        assert_eq!(filtered, 2);
    }

    #[test]
    fn evaluate_empty_split_errors() {
        let dims = crate::model::Dims {
            d: 4,
            n_entities: 2,
            n_relations: 1,
            n_timestamps: 1,
        };
        let params: ModelParams<f64> = ModelParams::init(dims, &InitConfig::default(), 1);
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        let filter = build_filter_index(&[]);
        let err = evaluate(&params, &plan, ScoreKind::Similarity, &[], 1, &filter).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
    }

    #[test]
    fn stage_ranks_equal_under_identity_parameters() {
        let dims = crate::model::Dims {
            d: 8,
            n_entities: 6,
            n_relations: 2,
            n_timestamps: 2,
        };
        let mut params: ModelParams<f64> = ModelParams::init(dims, &InitConfig::default(), 3);
        params.set_identity_operators();
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        let queries = vec![Quadruple::new(0, 1, 2, 1), Quadruple::new(3, 0, 4, 0)];
        let stages = stage_ranks(&params, &plan, ScoreKind::Similarity, &queries).unwrap();
        for s in stages {
            assert_eq!(s.raw, s.translated);
            assert_eq!(s.translated, s.full);
        }
    }
}
