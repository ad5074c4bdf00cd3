//! Parameter tables, the variant registry, scoring and checkpoints.

mod checkpoint;
mod params;
mod scoring;
mod table;
mod variants;

pub use checkpoint::{
    load_checkpoint, read_checkpoint_header, save_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC,
};
pub use params::{fill_gaussian, Dims, Gradients, InitConfig, ModelParams, TableId};
pub use scoring::{
    score, score_all_tails, score_all_tails_into, score_gradients, score_gradients_generic,
    transformed_head, ScoreKind, ScorePlan, SparseGrad,
};
pub use table::EmbeddingTable;
pub use variants::{variant_by_name, variant_registry, VariantSpec};

pub(crate) use scoring::{
    backward, forward, fused_operator_sum, score_tails_from_head, AtomGrads,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Quadruple;
    use crate::geometry::FusionMode;

    fn dims(d: usize, n_e: usize) -> Dims {
        Dims {
            d,
            n_entities: n_e,
            n_relations: 2,
            n_timestamps: 3,
        }
    }

    fn identity_params(d: usize, n_e: usize) -> ModelParams<f64> {
        let mut p = ModelParams::zeros(dims(d, n_e));
        p.set_identity_operators();
        p
    }

    #[test]
    fn identity_transform_self_dot_is_one() {
        let mut p = identity_params(4, 3);
        p.set_row(TableId::Entity, 0, &[1.0, 0.0, 0.0, 0.0]);
        p.set_row(TableId::Entity, 1, &[1.0, 0.0, 0.0, 0.0]);
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        let s = score(
            &p,
            &plan,
            ScoreKind::Similarity,
            Quadruple::new(0, 0, 1, 0),
        )
        .unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn hand_expanded_score_example() {
        // d = 2: e_s = (1,1), t_r = (1,1), s_r = (1,2), t_tau = (1,0),
        // s_tau = (3,3). Fused scale = (6,6); head = (12,12); e_o = (1,0).
        let mut p: ModelParams<f64> = ModelParams::zeros(dims(2, 2));
        p.set_row(TableId::Entity, 0, &[1.0, 1.0]);
        p.set_row(TableId::Entity, 1, &[1.0, 0.0]);
        p.set_row(TableId::RelTranslate, 0, &[1.0, 1.0]);
        p.set_row(TableId::RelScale, 0, &[1.0, 2.0]);
        p.set_row(TableId::TimeTranslate, 0, &[1.0, 0.0]);
        p.set_row(TableId::TimeScale, 0, &[3.0, 3.0]);
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        let s = score(
            &p,
            &plan,
            ScoreKind::Similarity,
            Quadruple::new(0, 0, 1, 0),
        )
        .unwrap();
        assert_eq!(s, 12.0);
        let h = transformed_head(&p, &plan, 0, 0, 0).unwrap();
        assert_eq!(h, vec![12.0, 12.0]);
    }

    #[test]
    fn score_all_tails_identity_basis() {
        // identity params, e_s = basis 0, entity table = identity matrix
        let mut p = identity_params(3, 3);
        p.set_row(TableId::Entity, 0, &[1.0, 0.0, 0.0]);
        p.set_row(TableId::Entity, 1, &[0.0, 1.0, 0.0]);
        p.set_row(TableId::Entity, 2, &[0.0, 0.0, 1.0]);
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        let scores =
            score_all_tails(&p, &plan, ScoreKind::Similarity, 0, 0, 0).unwrap();
        assert_eq!(scores, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn score_all_tails_is_deterministic_bitwise() {
        let p: ModelParams<f32> =
            ModelParams::init(dims(8, 10), &InitConfig::default(), 42);
        let plan = ScorePlan::for_name("V5", FusionMode::Vector).unwrap();
        let a = score_all_tails(&p, &plan, ScoreKind::Similarity, 3, 1, 2).unwrap();
        let b = score_all_tails(&p, &plan, ScoreKind::Similarity, 3, 1, 2).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn v1_identity_time_reduces_to_translation() {
        // V1 with identity time parameters: head = e_s + t_r
        let mut p = identity_params(4, 2);
        p.set_row(TableId::Entity, 0, &[0.1, 0.2, 0.3, 0.4]);
        p.set_row(TableId::RelTranslate, 0, &[1.0, 2.0, 3.0, 4.0]);
        let plan = ScorePlan::for_name("V1", FusionMode::Vector).unwrap();
        let h = transformed_head(&p, &plan, 0, 0, 0).unwrap();
        assert_eq!(h, vec![1.1, 2.2, 3.3, 4.4]);
    }

    #[test]
    fn closed_form_gradients_identity_case() {
        // identity params: dφ/de_o = e_s
        let mut p = identity_params(4, 2);
        p.set_row(TableId::Entity, 0, &[0.5, -1.0, 2.0, 0.25]);
        p.set_row(TableId::Entity, 1, &[1.0, 1.0, 1.0, 1.0]);
        let variant = variant_by_name("TCompoundE").unwrap();
        let grads =
            score_gradients(&p, &variant, Quadruple::new(0, 1, 1, 2), 1.0).unwrap();
        let d_e_o = grads
            .iter()
            .find(|g| g.table == TableId::Entity && g.row == 1)
            .unwrap();
        assert_eq!(d_e_o.values, vec![0.5, -1.0, 2.0, 0.25]);
    }

    #[test]
    fn zero_tail_zeroes_all_but_tail_gradient() {
        let mut p: ModelParams<f64> =
            ModelParams::init(dims(4, 3), &InitConfig::default(), 9);
        p.set_row(TableId::Entity, 2, &[0.0; 4]);
        let variant = variant_by_name("TCompoundE").unwrap();
        let grads =
            score_gradients(&p, &variant, Quadruple::new(0, 1, 2, 1), 1.0).unwrap();
        for g in &grads {
            if g.table == TableId::Entity && g.row == 2 {
                continue; // dφ/de_o = transformed head, generally nonzero
            }
            assert!(g.values.iter().all(|v| *v == 0.0), "{:?}", g.table);
        }
    }

    #[test]
    fn closed_form_requires_default_variant() {
        let p = identity_params(4, 2);
        let variant = variant_by_name("V4").unwrap();
        let err = score_gradients(&p, &variant, Quadruple::new(0, 0, 1, 0), 1.0).unwrap_err();
        assert!(matches!(err, crate::error::Error::VariantMismatch { .. }));
    }

    #[test]
    fn generic_gradients_match_closed_form() {
        let p: ModelParams<f64> = ModelParams::init(dims(6, 4), &InitConfig::default(), 11);
        let variant = variant_by_name("TCompoundE").unwrap();
        let plan = ScorePlan::new(variant.clone(), FusionMode::Vector);
        let q = Quadruple::new(1, 2, 3, 1);
        let closed = score_gradients(&p, &variant, q, 2.5).unwrap();
        let generic =
            score_gradients_generic(&p, &plan, ScoreKind::Similarity, q, 2.5).unwrap();
        for c in &closed {
            let g = generic
                .iter()
                .find(|g| g.table == c.table && g.row == c.row)
                .expect("generic path covers the same rows");
            for (a, b) in c.values.iter().zip(&g.values) {
                assert!((a - b).abs() < 1e-12, "{:?}: {a} vs {b}", c.table);
            }
        }
    }

    #[test]
    fn ids_out_of_range_error() {
        let p = identity_params(4, 2);
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        assert!(score(&p, &plan, ScoreKind::Similarity, Quadruple::new(5, 0, 0, 0)).is_err());
        assert!(score(&p, &plan, ScoreKind::Similarity, Quadruple::new(0, 9, 0, 0)).is_err());
        assert!(score(&p, &plan, ScoreKind::Similarity, Quadruple::new(0, 0, 0, 7)).is_err());
    }

    #[test]
    fn rotation_variant_rejects_odd_dimension() {
        let p = identity_params(5, 2);
        let plan = ScorePlan::for_name("V6", FusionMode::Vector).unwrap();
        let err =
            score(&p, &plan, ScoreKind::Similarity, Quadruple::new(0, 0, 1, 0)).unwrap_err();
        assert!(matches!(err, crate::error::Error::OddRotationDim { d: 5 }));
    }

    #[test]
    fn pure_scaling_scores_symmetrically() {
        // t_r = 0, identity time: score(s, r, o) == score(o, r, s) up to
        // product-reassociation rounding
        let mut p: ModelParams<f64> =
            ModelParams::init(dims(8, 5), &InitConfig::default(), 21);
        p.fill_table(TableId::RelTranslate, 0.0);
        p.fill_table(TableId::TimeTranslate, 0.0);
        p.fill_table(TableId::TimeScale, 1.0);
        let plan = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        for (s, o) in [(0u32, 1u32), (2, 4), (3, 0)] {
            let a = score(&p, &plan, ScoreKind::Similarity, Quadruple::new(s, 1, o, 2)).unwrap();
            let b = score(&p, &plan, ScoreKind::Similarity, Quadruple::new(o, 1, s, 2)).unwrap();
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-30);
            assert!(rel < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn matrix_fusion_mode_differs_from_vector() {
        let p: ModelParams<f64> = ModelParams::init(dims(4, 3), &InitConfig::default(), 5);
        let q = Quadruple::new(0, 1, 2, 1);
        let vector = ScorePlan::for_name("TCompoundE", FusionMode::Vector).unwrap();
        let matrix = ScorePlan::for_name("TCompoundE", FusionMode::Matrix).unwrap();
        let a = score(&p, &vector, ScoreKind::Similarity, q).unwrap();
        let b = score(&p, &matrix, ScoreKind::Similarity, q).unwrap();
        assert_ne!(a, b);
        // matrix reading: head = s_tau ⊙ (s_r ⊙ (e_s + t_r) + t_tau)
        let d = 4;
        let mut expect = 0.0;
        for i in 0..d {
            let es = p.entity.row(0)[i];
            let eo = p.entity.row(2)[i];
            let tr = p.rel_translate.row(1)[i];
            let sr = p.rel_scale.row(1)[i];
            let tt = p.time_translate.row(1)[i];
            let st = p.time_scale.row(1)[i];
            expect += st * (sr * (es + tr) + tt) * eo;
        }
        assert!((b - expect).abs() < 1e-12);
    }
}
