//! The registry of model variants.
//!
//! Each variant is an operator pipeline in the general form
//! `rotate ∘ scale ∘ translate` applied to the head entity (translation
//! first), with time atoms bound to one relation atom. The default model
//! fuses time translation and scaling onto the relation scaling vector and
//! keeps the relation translation time-invariant; the numbered variants vary
//! which relation atoms are active and where the time atoms attach.

use crate::error::{Error, Result};
use crate::geometry::{AtomKind, OpAtom, OperatorPipeline};

/// A named model variant: its pipeline plus bookkeeping.
#[derive(Debug, Clone)]
pub struct VariantSpec {
    pub name: &'static str,
    pub pipeline: OperatorPipeline,
}

impl VariantSpec {
    pub fn requires_even_dim(&self) -> bool {
        self.pipeline.uses_rotation()
    }
}

const T: AtomKind = AtomKind::Translate;
const S: AtomKind = AtomKind::Scale;
const R: AtomKind = AtomKind::Rotate;

fn rel(kinds: &[AtomKind]) -> Vec<OpAtom> {
    kinds.iter().map(|&k| OpAtom::relation(k)).collect()
}

fn time(kinds: &[AtomKind]) -> Vec<OpAtom> {
    kinds.iter().map(|&k| OpAtom::time(k)).collect()
}

fn carrier(name: &'static str, head: &[AtomKind], tatoms: &[AtomKind], idx: usize) -> VariantSpec {
    VariantSpec {
        name,
        pipeline: OperatorPipeline::with_carrier(rel(head), time(tatoms), idx)
            .expect("registry pipeline is valid"),
    }
}

fn direct(name: &'static str, head: &[AtomKind], tatoms: &[AtomKind]) -> VariantSpec {
    VariantSpec {
        name,
        pipeline: OperatorPipeline::direct(rel(head), time(tatoms))
            .expect("registry pipeline is valid"),
    }
}

/// All sixteen variants in a fixed order: the default model first, then
/// V1..V15.
///
/// First group (V1..V7): time atoms fixed to translate-then-scale, relation
/// atoms and the attachment point vary. Second group (V8..V15): relation
/// atoms fixed to translate-then-scale, time atoms vary. V6 and V7 attach
/// time operations to the relation rotation; since translation/scaling
/// cannot act on an angle vector, those two compose directly on the entity
/// after the rotation.
pub fn variant_registry() -> Vec<VariantSpec> {
    vec![
        carrier("TCompoundE", &[T, S], &[T, S], 1),
        carrier("V1", &[T], &[T, S], 0),
        carrier("V2", &[T, S], &[T, S], 0),
        carrier("V3", &[T, S, R], &[T, S], 0),
        carrier("V4", &[S], &[T, S], 0),
        carrier("V5", &[T, S, R], &[T, S], 1),
        direct("V6", &[R], &[T, S]),
        direct("V7", &[T, S, R], &[T, S]),
        carrier("V8", &[T, S], &[T], 0),
        carrier("V9", &[T, S], &[S], 0),
        carrier("V10", &[T, S], &[R], 0),
        carrier("V11", &[T, S], &[T, S, R], 0),
        carrier("V12", &[T, S], &[T], 1),
        carrier("V13", &[T, S], &[S], 1),
        carrier("V14", &[T, S], &[R], 1),
        carrier("V15", &[T, S], &[T, S, R], 1),
    ]
}

/// Look a variant up by name (ASCII case-insensitive).
pub fn variant_by_name(name: &str) -> Result<VariantSpec> {
    variant_registry()
        .into_iter()
        .find(|v| v.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownVariant(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn registry_has_sixteen_unique_names() {
        let reg = variant_registry();
        assert_eq!(reg.len(), 16);
        let names: HashSet<&str> = reg.iter().map(|v| v.name).collect();
        assert_eq!(names.len(), 16);
        assert!(names.contains("TCompoundE"));
        for k in 1..=15 {
            assert!(names.contains(format!("V{k}").as_str()), "missing V{k}");
        }
    }

    #[test]
    fn default_model_matches_its_definition() {
        let v = variant_by_name("tcompounde").unwrap();
        let head: Vec<AtomKind> = v.pipeline.head_atoms().iter().map(|a| a.kind).collect();
        let tk: Vec<AtomKind> = v.pipeline.time_atoms().iter().map(|a| a.kind).collect();
        assert_eq!(head, vec![T, S]);
        assert_eq!(tk, vec![T, S]);
        assert_eq!(v.pipeline.carrier(), Some(1));
        assert!(!v.pipeline.is_direct());
    }

    #[test]
    fn rotation_needs_even_dim_flag() {
        assert!(!variant_by_name("TCompoundE").unwrap().requires_even_dim());
        assert!(variant_by_name("V6").unwrap().requires_even_dim());
        assert!(variant_by_name("V14").unwrap().requires_even_dim());
    }

    #[test]
    fn unknown_variant_is_an_error() {
        assert!(matches!(
            variant_by_name("V99"),
            Err(Error::UnknownVariant(_))
        ));
    }
}
