//! Executable relation-pattern witnesses and empirical detectors.
//!
//! Each `construct_*` function emits a concrete parameter assignment under
//! which the score function provably realizes a pattern (symmetry,
//! asymmetry, inversion, temporal evolution), then verifies it by sampling
//! random entity embeddings and comparing scores through the public scoring
//! interface only. Equality of composed operator maps implies equality of
//! scores for all entities; that implication is the direction the witnesses
//! check. Tolerances separate algebraic identities (1e-12 relative) from
//! learned approximations (1e-6).

use rand::Rng;

use crate::data::Quadruple;
use crate::error::{Error, Result};
use crate::geometry::FusionMode;
use crate::model::{
    fill_gaussian, score, Dims, ModelParams, ScoreKind, ScorePlan, TableId,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Real;

/// Exact-construction tolerance (double precision algebraic identities).
pub const EXACT_TOL: f64 = 1e-12;
/// Empirical detection tolerance for trained models.
pub const DETECT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    Symmetric,
    Asymmetric,
    Inverse,
    TemporalEvolution,
}

impl PatternKind {
    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Symmetric => "symmetric",
            PatternKind::Asymmetric => "asymmetric",
            PatternKind::Inverse => "inverse",
            PatternKind::TemporalEvolution => "temporal-evolution",
        }
    }
}

/// What a witness asserts about score comparisons.
#[derive(Debug, Clone)]
enum CheckSpec {
    /// score(s, rel, o, time) vs score(o, rel, s, time): equal (symmetric)
    /// or different for almost all pairs (asymmetric).
    SwapEntities { rel: u32, time: u32, expect_equal: bool },
    /// score(s, rel_a, o, time) == score(o, rel_b, s, time).
    CrossRelation { rel_a: u32, rel_b: u32, time: u32 },
    /// score(s, rel_a, o, time_a) == score(s, rel_b, o, time_b).
    CrossRelTime { a: (u32, u32), b: (u32, u32) },
}

/// A constructive pattern witness: explicit operator parameters plus the
/// comparison they must satisfy. Entity rows are randomized afresh on every
/// verification trial.
#[derive(Debug, Clone)]
pub struct PatternWitness {
    pub pattern: PatternKind,
    pub tolerance: f64,
    pub degenerate: bool,
    params: ModelParams<f64>,
    check: CheckSpec,
}

/// Outcome of verifying one witness.
#[derive(Debug, Clone)]
pub struct WitnessReport {
    pub pattern: PatternKind,
    pub pass: bool,
    pub degenerate: bool,
    /// max relative gap seen (equality checks) or fraction of unequal pairs
    /// (asymmetry).
    pub statistic: f64,
    pub trials: usize,
    pub detail: String,
}

impl WitnessReport {
    pub fn line(&self) -> String {
        format!(
            "pattern={} pass={} stat={:.3e} trials={} {}",
            self.pattern.name(),
            self.pass,
            self.statistic,
            self.trials,
            self.detail
        )
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-30)
}

fn witness_dims(d: usize) -> Dims {
    Dims {
        d,
        n_entities: 2,
        n_relations: 2,
        n_timestamps: 2,
    }
}

/// Random nonzero vector, entries bounded away from zero.
fn nonzero_vec<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let mag: f64 = rng.random_range(0.5..2.0);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            sign * mag
        })
        .collect()
}

fn base_witness_params(d: usize) -> ModelParams<f64> {
    let mut p = ModelParams::zeros(witness_dims(d));
    p.set_identity_operators();
    p
}

impl PatternWitness {
    /// Run `trials` random-entity comparisons through the public score
    /// operation.
    pub fn verify(&self, trials: usize, seed: u64) -> Result<WitnessReport> {
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector)?;
        let mut params = self.params.clone();
        let mut rng = rng_from_seed(derive_seed(seed, 0xA77));
        let mut max_gap = 0.0f64;
        let mut unequal = 0usize;
        for _ in 0..trials {
            fill_gaussian(&mut params.entity, 1.0, &mut rng);
            let (a, b) = match self.check {
                CheckSpec::SwapEntities { rel, time, .. } => (
                    score(&params, &plan, ScoreKind::Similarity, Quadruple::new(0, rel, 1, time))?,
                    score(&params, &plan, ScoreKind::Similarity, Quadruple::new(1, rel, 0, time))?,
                ),
                CheckSpec::CrossRelation { rel_a, rel_b, time } => (
                    score(&params, &plan, ScoreKind::Similarity, Quadruple::new(0, rel_a, 1, time))?,
                    score(&params, &plan, ScoreKind::Similarity, Quadruple::new(1, rel_b, 0, time))?,
                ),
                CheckSpec::CrossRelTime { a, b } => (
                    score(&params, &plan, ScoreKind::Similarity, Quadruple::new(0, a.0, 1, a.1))?,
                    score(&params, &plan, ScoreKind::Similarity, Quadruple::new(0, b.0, 1, b.1))?,
                ),
            };
            let gap = rel_gap(a, b);
            max_gap = max_gap.max(gap);
            if gap > DETECT_TOL {
                unequal += 1;
            }
        }
        let expect_equal = !matches!(
            self.check,
            CheckSpec::SwapEntities {
                expect_equal: false,
                ..
            }
        );
        let report = if expect_equal {
            WitnessReport {
                pattern: self.pattern,
                pass: max_gap <= self.tolerance,
                degenerate: self.degenerate,
                statistic: max_gap,
                trials,
                detail: format!("max_rel_gap={max_gap:.3e} tol={:.0e}", self.tolerance),
            }
        } else {
            let rate = unequal as f64 / trials.max(1) as f64;
            let pass = !self.degenerate && rate >= 0.99;
            WitnessReport {
                pattern: self.pattern,
                pass,
                degenerate: self.degenerate,
                statistic: rate,
                trials,
                detail: if self.degenerate {
                    "zero scaling collapses every score to 0; excluded by construction".into()
                } else {
                    format!("unequal_rate={rate:.3}")
                },
            }
        };
        Ok(report)
    }
}

/// Zero relation translation with any nonzero fused scaling: the score is a
/// diagonal bilinear form, so swapping head and tail leaves it unchanged.
pub fn construct_symmetric(d: usize, seed: u64) -> PatternWitness {
    let mut params = base_witness_params(d);
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    params.set_row(TableId::RelScale, 0, &nonzero_vec(d, &mut rng));
    PatternWitness {
        pattern: PatternKind::Symmetric,
        tolerance: EXACT_TOL,
        degenerate: false,
        params,
        check: CheckSpec::SwapEntities {
            rel: 0,
            time: 0,
            expect_equal: true,
        },
    }
}

/// A generic nonzero relation translation breaks the swap symmetry for
/// almost every entity pair. With `zero_scale` the witness is the documented
/// degenerate case: a zero fused scaling collapses all scores.
pub fn construct_asymmetric(d: usize, seed: u64, zero_scale: bool) -> PatternWitness {
    let mut params = base_witness_params(d);
    let mut rng = rng_from_seed(derive_seed(seed, 2));
    params.set_row(TableId::RelTranslate, 0, &vec![1.0; d]);
    if zero_scale {
        params.set_row(TableId::RelScale, 0, &vec![0.0; d]);
    } else {
        params.set_row(TableId::RelScale, 0, &nonzero_vec(d, &mut rng));
    }
    PatternWitness {
        pattern: PatternKind::Asymmetric,
        tolerance: DETECT_TOL,
        degenerate: zero_scale,
        params,
        check: CheckSpec::SwapEntities {
            rel: 0,
            time: 0,
            expect_equal: false,
        },
    }
}

/// Two relations with zero translations and identical fused scaling vectors
/// score as mutual inverses: score(s, r1, o, τ) == score(o, r2, s, τ).
pub fn construct_inverse(d: usize, seed: u64) -> PatternWitness {
    let mut params = base_witness_params(d);
    let mut rng = rng_from_seed(derive_seed(seed, 3));
    let shared = nonzero_vec(d, &mut rng);
    params.set_row(TableId::RelScale, 0, &shared);
    params.set_row(TableId::RelScale, 1, &shared);
    PatternWitness {
        pattern: PatternKind::Inverse,
        tolerance: EXACT_TOL,
        degenerate: false,
        params,
        check: CheckSpec::CrossRelation {
            rel_a: 0,
            rel_b: 1,
            time: 0,
        },
    }
}

/// Solve for the second relation's scaling so that (r2, τ2) composes to the
/// same operator as (r1, τ1): `s_r2 = (s_τ1 ⊙ (s_r1 + t_τ1)) ⊘ s_τ2 - t_τ2`.
/// Rejects a zero entry in `s_tau2`.
pub fn solve_matching_scale(
    s_r1: &[f64],
    t_tau1: &[f64],
    s_tau1: &[f64],
    t_tau2: &[f64],
    s_tau2: &[f64],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(s_r1.len());
    for i in 0..s_r1.len() {
        if s_tau2[i] == 0.0 {
            return Err(Error::DegenerateWitness(format!(
                "time scaling has a zero entry at dimension {i}; cannot invert"
            )));
        }
        out.push(s_tau1[i] * (s_r1[i] + t_tau1[i]) / s_tau2[i] - t_tau2[i]);
    }
    Ok(out)
}

/// Two (relation, time) pairs whose fused operators coincide: relation
/// translations shared, and the second scaling solved so the fused scalings
/// match. Scores then agree for every entity pair.
pub fn construct_temporal_evolution(d: usize, seed: u64) -> Result<PatternWitness> {
    let mut params = base_witness_params(d);
    let mut rng = rng_from_seed(derive_seed(seed, 4));
    let t_r = nonzero_vec(d, &mut rng);
    let s_r1 = nonzero_vec(d, &mut rng);
    let t_tau1 = nonzero_vec(d, &mut rng);
    let s_tau1 = nonzero_vec(d, &mut rng);
    let t_tau2 = nonzero_vec(d, &mut rng);
    let s_tau2 = nonzero_vec(d, &mut rng);
    let s_r2 = solve_matching_scale(&s_r1, &t_tau1, &s_tau1, &t_tau2, &s_tau2)?;

    params.set_row(TableId::RelTranslate, 0, &t_r);
    params.set_row(TableId::RelTranslate, 1, &t_r);
    params.set_row(TableId::RelScale, 0, &s_r1);
    params.set_row(TableId::RelScale, 1, &s_r2);
    params.set_row(TableId::TimeTranslate, 0, &t_tau1);
    params.set_row(TableId::TimeTranslate, 1, &t_tau2);
    params.set_row(TableId::TimeScale, 0, &s_tau1);
    params.set_row(TableId::TimeScale, 1, &s_tau2);
    Ok(PatternWitness {
        pattern: PatternKind::TemporalEvolution,
        tolerance: EXACT_TOL,
        degenerate: false,
        params,
        check: CheckSpec::CrossRelTime {
            a: (0, 0),
            b: (1, 1),
        },
    })
}

/// All four constructive witnesses in proposition order.
pub fn all_witnesses(d: usize, seed: u64, allow_zero_scale: bool) -> Result<Vec<PatternWitness>> {
    Ok(vec![
        construct_symmetric(d, seed),
        construct_asymmetric(d, seed, allow_zero_scale),
        construct_inverse(d, seed),
        construct_temporal_evolution(d, seed)?,
    ])
}

/// Empirical per-relation pattern statistics on a trained model.
#[derive(Debug, Clone)]
pub struct RelationPatternStats {
    pub rel: u32,
    /// mean relative gap between score(s,r,o,τ) and score(o,r,s,τ)
    pub sym_gap: f64,
    /// relation whose inverse reading best matches this one
    pub inv_partner: Option<u32>,
    pub inv_gap: f64,
    pub samples: usize,
}

impl RelationPatternStats {
    pub fn line(&self, label: &str, partner_label: Option<&str>) -> String {
        format!(
            "rel={} sym_gap={:.6e} inv_partner={} inv_gap={:.6e}",
            label,
            self.sym_gap,
            partner_label.unwrap_or("none"),
            self.inv_gap
        )
    }
}

/// Estimate symmetry and inverse gaps per base relation from sampled facts.
/// Relations with a gap below `tol` satisfy the pattern empirically.
pub fn detect_patterns<S: Real>(
    params: &ModelParams<S>,
    plan: &ScorePlan,
    kind: ScoreKind,
    facts: &[Quadruple],
    n_relations: u32,
    max_samples_per_rel: usize,
) -> Result<Vec<RelationPatternStats>> {
    if facts.is_empty() {
        return Err(Error::Empty("pattern detection sample"));
    }
    // bucket sampled facts by base relation
    let mut by_rel: Vec<Vec<Quadruple>> = vec![Vec::new(); n_relations as usize];
    for f in facts {
        if f.rel < n_relations {
            let bucket = &mut by_rel[f.rel as usize];
            if bucket.len() < max_samples_per_rel {
                bucket.push(*f);
            }
        }
    }

    let mut stats = Vec::new();
    for (r, bucket) in by_rel.iter().enumerate() {
        if bucket.is_empty() {
            continue;
        }
        let mut sym_gap = 0.0;
        for q in bucket {
            let a = score(params, plan, kind, *q)?;
            let swapped = Quadruple::new(q.tail, q.rel, q.head, q.time);
            let b = score(params, plan, kind, swapped)?;
            sym_gap += rel_gap(a, b);
        }
        sym_gap /= bucket.len() as f64;

        let mut best: Option<(u32, f64)> = None;
        for r2 in 0..n_relations {
            let mut gap = 0.0;
            for q in bucket {
                let a = score(params, plan, kind, *q)?;
                let inv_q = Quadruple::new(q.tail, r2, q.head, q.time);
                let b = score(params, plan, kind, inv_q)?;
                gap += rel_gap(a, b);
            }
            gap /= bucket.len() as f64;
            if best.map(|(_, g)| gap < g).unwrap_or(true) {
                best = Some((r2, gap));
            }
        }
        let (inv_partner, inv_gap) = match best {
            Some((p, g)) => (Some(p), g),
            None => (None, f64::INFINITY),
        };
        stats.push(RelationPatternStats {
            rel: r as u32,
            sym_gap,
            inv_partner,
            inv_gap,
            samples: bucket.len(),
        });
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_bilinear_form_is_symmetric_algebraically() {
        // <m ⊙ a, b> == <m ⊙ b, a> for arbitrary vectors, up to the 1-ulp
        // reassociation of the triple product
        let mut rng = rng_from_seed(7);
        for _ in 0..100 {
            let d = 16;
            let m = nonzero_vec(d, &mut rng);
            let a = nonzero_vec(d, &mut rng);
            let b = nonzero_vec(d, &mut rng);
            let left: f64 = (0..d).map(|i| (m[i] * a[i]) * b[i]).sum();
            let right: f64 = (0..d).map(|i| (m[i] * b[i]) * a[i]).sum();
            let gap = rel_gap(left, right);
            assert!(gap < 1e-14, "left {left} right {right}");
        }
    }

    #[test]
    fn symmetric_witness_passes() {
        let w = construct_symmetric(16, 5);
        let r = w.verify(100, 11).unwrap();
        assert!(r.pass, "{}", r.line());
    }

    #[test]
    fn unit_scale_symmetric_scores_equal_plain_dot() {
        // s fused = 1-vector: both directions equal <e_s, e_o>
        let mut w = construct_symmetric(8, 1);
        w.params.set_row(TableId::RelScale, 0, &vec![1.0; 8]);
        let r = w.verify(50, 3).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn nonzero_translation_breaks_symmetry() {
        let mut w = construct_symmetric(16, 9);
        w.params.set_row(TableId::RelTranslate, 0, &vec![1.0; 16]);
        let r = w.verify(100, 13).unwrap();
        assert!(!r.pass, "translation should break exact symmetry");
    }

    #[test]
    fn asymmetric_witness_reaches_99_percent() {
        let w = construct_asymmetric(8, 5, false);
        let r = w.verify(100, 17).unwrap();
        assert!(r.pass, "{}", r.line());
        assert!(r.statistic >= 0.99);
    }

    #[test]
    fn degenerate_zero_scale_is_reported_not_passed() {
        let w = construct_asymmetric(8, 5, true);
        let r = w.verify(50, 19).unwrap();
        assert!(!r.pass);
        assert!(r.degenerate);
        assert!(r.detail.contains("excluded"));
    }

    #[test]
    fn inverse_witness_passes_and_perturbation_breaks_it() {
        let w = construct_inverse(16, 23);
        let r = w.verify(100, 29).unwrap();
        assert!(r.pass, "{}", r.line());

        let mut broken = w.clone();
        let mut perturbed: Vec<f64> = broken.params.rel_scale.row(1).to_vec();
        for v in perturbed.iter_mut() {
            *v *= 1.01;
        }
        broken.params.set_row(TableId::RelScale, 1, &perturbed);
        let r = broken.verify(100, 31).unwrap();
        assert!(!r.pass, "1% perturbation must break exact equality");
    }

    #[test]
    fn temporal_evolution_witness_passes() {
        let w = construct_temporal_evolution(16, 37).unwrap();
        let r = w.verify(100, 41).unwrap();
        assert!(r.pass, "{}", r.line());
    }

    #[test]
    fn same_relation_same_time_is_trivially_evolution() {
        let mut w = construct_temporal_evolution(8, 43).unwrap();
        w.check = CheckSpec::CrossRelTime {
            a: (0, 0),
            b: (0, 0),
        };
        let r = w.verify(20, 47).unwrap();
        assert!(r.pass);
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn zero_time_scale_rejects_the_solve() {
        let err = solve_matching_scale(
            &[1.0, 2.0],
            &[0.1, 0.2],
            &[1.0, 1.0],
            &[0.0, 0.0],
            &[1.0, 0.0],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateWitness(_)));
    }

    #[test]
    fn detector_flags_constructed_symmetric_relation() {
        let w = construct_symmetric(16, 53);
        let mut params = w.params.clone();
        let mut rng = rng_from_seed(59);
        fill_gaussian(&mut params.entity, 1.0, &mut rng);
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        let facts = vec![Quadruple::new(0, 0, 1, 0), Quadruple::new(1, 0, 0, 0)];
        let stats =
            detect_patterns(&params, &plan, ScoreKind::Similarity, &facts, 2, 10).unwrap();
        let s = stats.iter().find(|s| s.rel == 0).unwrap();
        assert!(s.sym_gap < 1e-9, "sym_gap = {}", s.sym_gap);
    }

    #[test]
    fn detector_rejects_random_model_at_tight_tolerance() {
        let dims = witness_dims(16);
        let params: ModelParams<f64> =
            ModelParams::init(dims, &crate::model::InitConfig::default(), 61);
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        let facts = vec![Quadruple::new(0, 0, 1, 0), Quadruple::new(0, 1, 1, 1)];
        let stats =
            detect_patterns(&params, &plan, ScoreKind::Similarity, &facts, 2, 10).unwrap();
        for s in stats {
            assert!(s.sym_gap > 1e-12, "random model should not be exactly symmetric");
        }
    }

    #[test]
    fn empty_sample_errors() {
        let dims = witness_dims(8);
        let params: ModelParams<f64> = ModelParams::zeros(dims);
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        assert!(matches!(
            detect_patterns(&params, &plan, ScoreKind::Similarity, &[], 2, 10),
            Err(Error::Empty(_))
        ));
    }
}
