//! Score computation and its gradients.
//!
//! The score of a quadruple is the semantic similarity (dot product) between
//! the transformed head embedding and the tail embedding; a distance scorer
//! (negated L2, so larger is always better) is available behind the same
//! interface.
//!
//! Gradients come in two flavors: a closed-form path for the default
//! variant, and a generic reverse-mode chain through the pipeline atoms that
//! works for every variant and both scorers. Both are checked against
//! central finite differences in the test suite.

use crate::data::Quadruple;
use crate::error::{Error, Result};
use crate::geometry::{
    apply_atom_inplace, atom_backward, AtomKind, FusionMode, OpAtom,
};
use crate::scalar::{dot_f64, sq_dist_f64, Real};

use super::params::{ModelParams, TableId};
use super::variants::{variant_by_name, VariantSpec};

/// Which scoring rule ranks candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreKind {
    /// Dot product of transformed head and tail.
    #[default]
    Similarity,
    /// Negated Euclidean distance between transformed head and tail.
    Distance,
}

impl std::str::FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "similarity" | "sim" => Ok(ScoreKind::Similarity),
            "distance" | "dist" => Ok(ScoreKind::Distance),
            other => Err(format!("unknown scorer `{other}` (expected similarity|distance)")),
        }
    }
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScoreKind::Similarity => write!(f, "similarity"),
            ScoreKind::Distance => write!(f, "distance"),
        }
    }
}

/// Where an effective atom's parameter row originates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AtomOrigin {
    Head(usize),
    Time(usize),
}

/// A variant lowered for evaluation: the applied atom sequence plus the
/// bookkeeping needed to route parameters and gradients.
#[derive(Debug, Clone)]
pub struct ScorePlan {
    pub variant: VariantSpec,
    pub fusion: FusionMode,
    atoms: Vec<OpAtom>,
    origins: Vec<AtomOrigin>,
    /// True when time atoms fuse onto the carrier's parameter vector.
    vector_fused: bool,
}

impl ScorePlan {
    pub fn new(variant: VariantSpec, fusion: FusionMode) -> Self {
        let pipeline = &variant.pipeline;
        let has_time = !pipeline.time_atoms().is_empty();
        let vector_fused = has_time && !pipeline.is_direct() && fusion == FusionMode::Vector;
        let atoms = pipeline.effective_atoms(fusion);
        let origins = if vector_fused || !has_time {
            (0..pipeline.head_atoms().len()).map(AtomOrigin::Head).collect()
        } else if pipeline.is_direct() {
            let mut o: Vec<AtomOrigin> =
                (0..pipeline.head_atoms().len()).map(AtomOrigin::Head).collect();
            o.extend((0..pipeline.time_atoms().len()).map(AtomOrigin::Time));
            o
        } else {
            // matrix mode with a carrier: head atoms up to and including the
            // carrier, then time atoms, then the rest
            let c = pipeline.carrier().expect("carrier checked at construction");
            let mut o: Vec<AtomOrigin> = (0..=c).map(AtomOrigin::Head).collect();
            o.extend((0..pipeline.time_atoms().len()).map(AtomOrigin::Time));
            o.extend((c + 1..pipeline.head_atoms().len()).map(AtomOrigin::Head));
            o
        };
        debug_assert_eq!(atoms.len(), origins.len());
        ScorePlan {
            variant,
            fusion,
            atoms,
            origins,
            vector_fused,
        }
    }

    pub fn for_name(name: &str, fusion: FusionMode) -> Result<Self> {
        Ok(ScorePlan::new(variant_by_name(name)?, fusion))
    }

    /// The atom sequence applied to the head entity.
    pub fn effective_atoms(&self) -> &[OpAtom] {
        &self.atoms
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.variant.requires_even_dim() && d % 2 != 0 {
            return Err(Error::OddRotationDim { d });
        }
        Ok(())
    }
}

/// Forward pass record: every intermediate needed for reverse mode.
pub(crate) struct Trace<S> {
    /// Carrier parameter chain under vector fusion: entry 0 is the carrier's
    /// base row, entry j+1 the row after applying time atom j to it.
    fusion_xs: Vec<Vec<S>>,
    /// Raw time parameter rows (vector fusion only), aligned with the
    /// pipeline's time atoms.
    fusion_time_rows: Vec<Vec<S>>,
    /// Parameter rows aligned with the plan's effective atoms (the carrier
    /// row already fused).
    pub rows: Vec<Vec<S>>,
    /// Entity vector chain: xs[0] is the head embedding, xs[i+1] the result
    /// of atom i. The last entry is the transformed head.
    pub xs: Vec<Vec<S>>,
}

impl<S: Real> Trace<S> {
    pub fn head(&self) -> &[S] {
        self.xs.last().expect("trace has at least the input")
    }
}

pub(crate) fn forward<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    head: u32,
    rel: u32,
    time: u32,
) -> Result<Trace<S>> {
    plan.check_dim(params.d())?;
    let pipeline = &plan.variant.pipeline;
    let e_head = params.entity_row(head)?;

    // Fused parameter rows for the effective atom sequence.
    let mut fusion_xs: Vec<Vec<S>> = Vec::new();
    let mut fusion_time_rows: Vec<Vec<S>> = Vec::new();
    let mut rows: Vec<Vec<S>> = Vec::with_capacity(plan.atoms.len());
    if plan.vector_fused {
        let carrier = pipeline.carrier().ok_or(Error::CarrierMissing)?;
        let carrier_kind = pipeline.head_atoms()[carrier].kind;
        for (i, atom) in pipeline.head_atoms().iter().enumerate() {
            let base = params.atom_row(*atom, rel, time)?.to_vec();
            if i != carrier {
                rows.push(base);
                continue;
            }
            // chain the time atoms over the carrier's parameter vector
            fusion_xs.push(base);
            for t_atom in pipeline.time_atoms() {
                let t_row = params.atom_row(*t_atom, rel, time)?.to_vec();
                let mut next = fusion_xs.last().unwrap().clone();
                if carrier_kind == AtomKind::Rotate {
                    // angle addition
                    for (a, b) in next.iter_mut().zip(&t_row) {
                        *a = a.add(*b);
                    }
                } else {
                    apply_atom_inplace(t_atom.kind, &t_row, &mut next)?;
                }
                fusion_time_rows.push(t_row);
                fusion_xs.push(next);
            }
            rows.push(fusion_xs.last().unwrap().clone());
        }
    } else {
        for (atom, _origin) in plan.atoms.iter().zip(&plan.origins) {
            rows.push(params.atom_row(*atom, rel, time)?.to_vec());
        }
    }

    // Apply the pipeline, recording intermediates.
    let mut xs: Vec<Vec<S>> = Vec::with_capacity(plan.atoms.len() + 1);
    xs.push(e_head.to_vec());
    for (atom, row) in plan.atoms.iter().zip(&rows) {
        let mut next = xs.last().unwrap().clone();
        apply_atom_inplace(atom.kind, row, &mut next)?;
        xs.push(next);
    }

    Ok(Trace {
        fusion_xs,
        fusion_time_rows,
        rows,
        xs,
    })
}

/// The transformed head embedding for a (head, relation, time) query.
pub fn transformed_head<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    head: u32,
    rel: u32,
    time: u32,
) -> Result<Vec<S>> {
    let mut trace = forward(params, plan, head, rel, time)?;
    Ok(trace.xs.pop().expect("trace has at least the input"))
}

#[inline]
pub(crate) fn score_pair<S: Real>(kind: ScoreKind, head: &[S], tail: &[S]) -> f64 {
    match kind {
        ScoreKind::Similarity => dot_f64(head, tail),
        ScoreKind::Distance => -sq_dist_f64(head, tail).sqrt(),
    }
}

/// Score one quadruple.
pub fn score<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    kind: ScoreKind,
    q: Quadruple,
) -> Result<f64> {
    let trace = forward(params, plan, q.head, q.rel, q.time)?;
    let e_tail = params.entity_row(q.tail)?;
    Ok(score_pair(kind, trace.head(), e_tail))
}

/// Score every candidate tail for a (head, relation, time) query, writing
/// into `out` (length = number of entities). Equals elementwise [`score`]
/// calls; this is the vectorized hot path.
pub fn score_all_tails_into<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    kind: ScoreKind,
    head: u32,
    rel: u32,
    time: u32,
    out: &mut [f64],
) -> Result<()> {
    if out.len() != params.n_entities() {
        return Err(Error::DimensionMismatch {
            context: "score output buffer",
            expected: params.n_entities(),
            got: out.len(),
        });
    }
    let trace = forward(params, plan, head, rel, time)?;
    score_tails_from_head(params, kind, trace.head(), out);
    Ok(())
}

/// Same as [`score_all_tails_into`] but with a precomputed transformed head.
pub(crate) fn score_tails_from_head<S: Real>(
    params: &ModelParams<S>,
    kind: ScoreKind,
    head_vec: &[S],
    out: &mut [f64],
) {
    match kind {
        ScoreKind::Similarity => {
            for (o, row) in out.iter_mut().zip(params.entity.iter_rows()) {
                *o = dot_f64(head_vec, row);
            }
        }
        ScoreKind::Distance => {
            for (o, row) in out.iter_mut().zip(params.entity.iter_rows()) {
                *o = -sq_dist_f64(head_vec, row).sqrt();
            }
        }
    }
}

/// Allocating convenience wrapper around [`score_all_tails_into`].
pub fn score_all_tails<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    kind: ScoreKind,
    head: u32,
    rel: u32,
    time: u32,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.n_entities()];
    score_all_tails_into(params, plan, kind, head, rel, time, &mut out)?;
    Ok(out)
}

/// One gradient row: which table, which row, and the cotangent values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrad {
    pub table: TableId,
    pub row: usize,
    pub values: Vec<f64>,
}

/// Per-atom cotangents produced by the reverse pass.
pub(crate) struct AtomGrads {
    pub d_e_head: Vec<f64>,
    /// Aligned with the pipeline's head atoms.
    pub d_head_rows: Vec<Vec<f64>>,
    /// Aligned with the pipeline's time atoms.
    pub d_time_rows: Vec<Vec<f64>>,
}

/// Reverse pass through pipeline and fusion.
///
/// `d_out` is the cotangent of the transformed head. `reg_cotangent`, when
/// present, is added to the cotangent of every translate/scale fused row
/// before fusion backward (this is how the cube-norm regularizer on the
/// fused operator vector flows back to base parameters).
pub(crate) fn backward<S: Real>(
    plan: &ScorePlan,
    trace: &Trace<S>,
    d_out: &[f64],
    reg_cotangent: Option<&[f64]>,
) -> AtomGrads {
    let pipeline = &plan.variant.pipeline;
    let n = plan.atoms.len();
    let mut d_rows: Vec<Vec<f64>> = trace.rows.iter().map(|r| vec![0.0; r.len()]).collect();

    // chain through the applied atoms, last to first
    let mut d_cur = d_out.to_vec();
    for i in (0..n).rev() {
        let mut d_prev = vec![0.0; trace.xs[i].len()];
        atom_backward(
            plan.atoms[i].kind,
            &trace.rows[i],
            &trace.xs[i],
            &d_cur,
            &mut d_prev,
            &mut d_rows[i],
        );
        d_cur = d_prev;
    }
    let d_e_head = d_cur;

    // regularizer cotangent lands on the fused translate/scale rows
    if let Some(g) = reg_cotangent {
        for (atom, dr) in plan.atoms.iter().zip(d_rows.iter_mut()) {
            if matches!(atom.kind, AtomKind::Translate | AtomKind::Scale) {
                for (a, b) in dr.iter_mut().zip(g) {
                    *a += *b;
                }
            }
        }
    }

    let mut d_head_rows: Vec<Vec<f64>> = pipeline
        .head_atoms()
        .iter()
        .map(|a| vec![0.0; a.kind.param_len(trace.xs[0].len())])
        .collect();
    let mut d_time_rows: Vec<Vec<f64>> = pipeline
        .time_atoms()
        .iter()
        .map(|a| vec![0.0; a.kind.param_len(trace.xs[0].len())])
        .collect();

    if plan.vector_fused {
        let carrier = pipeline.carrier().expect("vector_fused implies carrier");
        let carrier_kind = pipeline.head_atoms()[carrier].kind;
        for (i, dr) in d_rows.into_iter().enumerate() {
            if i != carrier {
                d_head_rows[i] = dr;
                continue;
            }
            // chain the carrier cotangent back through the time atoms
            let m = pipeline.time_atoms().len();
            let mut d_chain = dr;
            for j in (0..m).rev() {
                let t_atom = pipeline.time_atoms()[j];
                if carrier_kind == AtomKind::Rotate {
                    // fused = base + Σ angle rows: cotangent passes through
                    for (a, b) in d_time_rows[j].iter_mut().zip(&d_chain) {
                        *a += *b;
                    }
                } else {
                    let t_row = &trace.fusion_time_rows[j];
                    let mut d_prev = vec![0.0; d_chain.len()];
                    atom_backward(
                        t_atom.kind,
                        t_row,
                        &trace.fusion_xs[j],
                        &d_chain,
                        &mut d_prev,
                        &mut d_time_rows[j],
                    );
                    d_chain = d_prev;
                }
            }
            d_head_rows[carrier] = d_chain;
        }
    } else {
        for ((origin, _atom), dr) in plan.origins.iter().zip(&plan.atoms).zip(d_rows) {
            match origin {
                AtomOrigin::Head(i) => d_head_rows[*i] = dr,
                AtomOrigin::Time(j) => d_time_rows[*j] = dr,
            }
        }
    }

    AtomGrads {
        d_e_head,
        d_head_rows,
        d_time_rows,
    }
}

/// The fused translate+scale operator vector (sum of every translate/scale
/// fused row), used by the cube-norm regularizer. Empty when the effective
/// sequence has no translate/scale atom.
pub(crate) fn fused_operator_sum<S: Real>(plan: &ScorePlan, trace: &Trace<S>) -> Vec<f64> {
    let d = trace.xs[0].len();
    let mut sum = vec![0.0; d];
    let mut any = false;
    for (atom, row) in plan.atoms.iter().zip(&trace.rows) {
        if matches!(atom.kind, AtomKind::Translate | AtomKind::Scale) {
            any = true;
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v.to_f64();
            }
        }
    }
    if any {
        sum
    } else {
        Vec::new()
    }
}

/// Closed-form score gradients for the default variant under the similarity
/// scorer. `upstream` scales every partial.
pub fn score_gradients<S: Real>(
    params: &ModelParams<S>,
    variant: &VariantSpec,
    q: Quadruple,
    upstream: f64,
) -> Result<Vec<SparseGrad>> {
    if variant.name != "TCompoundE" {
        return Err(Error::VariantMismatch {
            expected: "TCompoundE".into(),
            got: variant.name.into(),
        });
    }
    let d = params.d();
    let e_s = params.entity_row(q.head)?;
    let e_o = params.entity_row(q.tail)?;
    let t_r = params
        .rel_translate
        .try_row("rel_translate", q.rel as usize)?;
    let s_r = params.rel_scale.try_row("rel_scale", q.rel as usize)?;
    let t_tau = params
        .time_translate
        .try_row("time_translate", q.time as usize)?;
    let s_tau = params.time_scale.try_row("time_scale", q.time as usize)?;

    let mut base = vec![0.0f64; d]; // e_s + t_r
    let mut s_fused = vec![0.0f64; d]; // s_tau ⊙ (s_r + t_tau)
    for i in 0..d {
        base[i] = e_s[i].to_f64() + t_r[i].to_f64();
        s_fused[i] = s_tau[i].to_f64() * (s_r[i].to_f64() + t_tau[i].to_f64());
    }

    let mut d_e_o = vec![0.0f64; d];
    let mut d_e_s = vec![0.0f64; d]; // shared with d_t_r
    let mut d_s_r = vec![0.0f64; d]; // shared with d_t_tau
    let mut d_s_tau = vec![0.0f64; d];
    for i in 0..d {
        let o = e_o[i].to_f64();
        d_e_o[i] = s_fused[i] * base[i] * upstream;
        d_e_s[i] = s_fused[i] * o * upstream;
        d_s_r[i] = s_tau[i].to_f64() * base[i] * o * upstream;
        d_s_tau[i] = (s_r[i].to_f64() + t_tau[i].to_f64()) * base[i] * o * upstream;
    }

    Ok(vec![
        SparseGrad {
            table: TableId::Entity,
            row: q.tail as usize,
            values: d_e_o,
        },
        SparseGrad {
            table: TableId::Entity,
            row: q.head as usize,
            values: d_e_s.clone(),
        },
        SparseGrad {
            table: TableId::RelTranslate,
            row: q.rel as usize,
            values: d_e_s,
        },
        SparseGrad {
            table: TableId::RelScale,
            row: q.rel as usize,
            values: d_s_r.clone(),
        },
        SparseGrad {
            table: TableId::TimeTranslate,
            row: q.time as usize,
            values: d_s_r,
        },
        SparseGrad {
            table: TableId::TimeScale,
            row: q.time as usize,
            values: d_s_tau,
        },
    ])
}

/// Generic score gradients through the pipeline chain, any variant, either
/// scorer.
pub fn score_gradients_generic<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    kind: ScoreKind,
    q: Quadruple,
    upstream: f64,
) -> Result<Vec<SparseGrad>> {
    let trace = forward(params, plan, q.head, q.rel, q.time)?;
    let e_o = params.entity_row(q.tail)?;
    let h = trace.head();
    let d = h.len();

    let mut d_h = vec![0.0f64; d];
    let mut d_e_o = vec![0.0f64; d];
    match kind {
        ScoreKind::Similarity => {
            for i in 0..d {
                d_h[i] = e_o[i].to_f64() * upstream;
                d_e_o[i] = h[i].to_f64() * upstream;
            }
        }
        ScoreKind::Distance => {
            let dist = sq_dist_f64(h, e_o).sqrt().max(1e-300);
            for i in 0..d {
                let diff = h[i].to_f64() - e_o[i].to_f64();
                d_h[i] = -diff / dist * upstream;
                d_e_o[i] = diff / dist * upstream;
            }
        }
    }

    let grads = backward(plan, &trace, &d_h, None);
    let pipeline = &plan.variant.pipeline;
    let mut out = Vec::with_capacity(2 + grads.d_head_rows.len() + grads.d_time_rows.len());
    out.push(SparseGrad {
        table: TableId::Entity,
        row: q.tail as usize,
        values: d_e_o,
    });
    out.push(SparseGrad {
        table: TableId::Entity,
        row: q.head as usize,
        values: grads.d_e_head,
    });
    for (atom, values) in pipeline.head_atoms().iter().zip(grads.d_head_rows) {
        out.push(SparseGrad {
            table: TableId::for_atom(*atom),
            row: q.rel as usize,
            values,
        });
    }
    for (atom, values) in pipeline.time_atoms().iter().zip(grads.d_time_rows) {
        out.push(SparseGrad {
            table: TableId::for_atom(*atom),
            row: q.time as usize,
            values,
        });
    }
    Ok(out)
}
