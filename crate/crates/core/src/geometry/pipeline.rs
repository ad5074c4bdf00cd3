//! Operator pipelines: ordered atom sequences with time fusion.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::atom::{apply_atom_inplace, AtomKind, OpAtom, ParamSource};

/// How time-specific operations are combined with relation-specific ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    /// Time atoms act on the carrier atom's parameter vector as if it were a
    /// point; the applied sequence stays the relation atoms. Default.
    Vector,
    /// Time atoms are spliced into the applied sequence right after the
    /// carrier, acting on the entity vector itself.
    Matrix,
}

impl std::str::FromStr for FusionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "vector" => Ok(FusionMode::Vector),
            "matrix" => Ok(FusionMode::Matrix),
            other => Err(format!("unknown fusion mode `{other}` (expected vector|matrix)")),
        }
    }
}

/// An ordered compound of relation-sourced atoms applied to the head entity,
/// plus time-sourced atoms bound to it either through a carrier (parameter
/// fusion) or by direct composition.
///
/// `head_atoms` and `time_atoms` are listed in application order: the first
/// listed atom is applied first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorPipeline {
    head_atoms: Vec<OpAtom>,
    time_atoms: Vec<OpAtom>,
    carrier: Option<usize>,
    direct: bool,
}

impl OperatorPipeline {
    /// Pipeline whose time atoms fuse onto `head_atoms[carrier]`'s parameter
    /// vector.
    pub fn with_carrier(
        head_atoms: Vec<OpAtom>,
        time_atoms: Vec<OpAtom>,
        carrier: usize,
    ) -> Result<Self> {
        let p = OperatorPipeline {
            head_atoms,
            time_atoms,
            carrier: Some(carrier),
            direct: false,
        };
        p.validate()?;
        Ok(p)
    }

    /// Pipeline whose time atoms are applied to the entity vector directly,
    /// after all relation atoms.
    pub fn direct(head_atoms: Vec<OpAtom>, time_atoms: Vec<OpAtom>) -> Result<Self> {
        let p = OperatorPipeline {
            head_atoms,
            time_atoms,
            carrier: None,
            direct: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// Pipeline without any time atoms.
    pub fn relation_only(head_atoms: Vec<OpAtom>) -> Result<Self> {
        let p = OperatorPipeline {
            head_atoms,
            time_atoms: Vec::new(),
            carrier: None,
            direct: false,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Err(Error::InvalidPipeline { reason });
        if self.head_atoms.is_empty() {
            return invalid("head_atoms must be non-empty".into());
        }
        if self.head_atoms.iter().any(|a| a.source != ParamSource::Relation) {
            return invalid("head atoms must be relation-sourced".into());
        }
        if self.time_atoms.iter().any(|a| a.source != ParamSource::Time) {
            return invalid("time atoms must be time-sourced".into());
        }
        if let Some(c) = self.carrier {
            let Some(atom) = self.head_atoms.get(c) else {
                return invalid(format!(
                    "carrier index {c} out of range ({} head atoms)",
                    self.head_atoms.len()
                ));
            };
            // A Rotate carrier only admits angle addition, so every time atom
            // must itself be a rotation.
            if atom.kind == AtomKind::Rotate
                && self.time_atoms.iter().any(|t| t.kind != AtomKind::Rotate)
            {
                return invalid(
                    "a Rotate carrier only accepts Rotate time atoms (angle addition)".into(),
                );
            }
        }
        Ok(())
    }

    pub fn head_atoms(&self) -> &[OpAtom] {
        &self.head_atoms
    }

    pub fn time_atoms(&self) -> &[OpAtom] {
        &self.time_atoms
    }

    pub fn carrier(&self) -> Option<usize> {
        self.carrier
    }

    /// True when time atoms join the applied sequence instead of fusing.
    pub fn is_direct(&self) -> bool {
        self.direct
    }

    /// True if any atom (under either fusion mode) is a rotation, which
    /// constrains d to be even.
    pub fn uses_rotation(&self) -> bool {
        self.head_atoms
            .iter()
            .chain(&self.time_atoms)
            .any(|a| a.kind == AtomKind::Rotate)
    }

    /// The atom sequence actually applied to the head entity under `mode`.
    pub fn effective_atoms(&self, mode: FusionMode) -> Vec<OpAtom> {
        if self.time_atoms.is_empty() {
            return self.head_atoms.clone();
        }
        if self.direct {
            let mut seq = self.head_atoms.clone();
            seq.extend_from_slice(&self.time_atoms);
            return seq;
        }
        match mode {
            FusionMode::Vector => self.head_atoms.clone(),
            FusionMode::Matrix => {
                // splice time atoms right after the carrier
                let c = self.carrier.unwrap_or(self.head_atoms.len() - 1);
                let mut seq = Vec::with_capacity(self.head_atoms.len() + self.time_atoms.len());
                seq.extend_from_slice(&self.head_atoms[..=c]);
                seq.extend_from_slice(&self.time_atoms);
                seq.extend_from_slice(&self.head_atoms[c + 1..]);
                seq
            }
        }
    }
}

/// Fuse time parameters into the carrier atom's parameter row.
///
/// `rel_rows[i]` is the parameter row of `head_atoms[i]`; `time_rows[j]` the
/// row of `time_atoms[j]`. Time atoms are applied to the carrier row in
/// listed order, treating it as a point: translation adds, scaling
/// multiplies, rotation rotates pairs. A Rotate carrier fuses rotations by
/// angle addition. Non-carrier rows pass through unchanged.
///
/// For a direct-composition pipeline the returned rows are the relation rows
/// followed by the time rows, matching
/// [`OperatorPipeline::effective_atoms`].
pub fn apply_time_fusion<S: Real>(
    pipeline: &OperatorPipeline,
    rel_rows: &[&[S]],
    time_rows: &[&[S]],
) -> Result<Vec<Vec<S>>> {
    if rel_rows.len() != pipeline.head_atoms.len() {
        return Err(Error::DimensionMismatch {
            context: "relation rows vs head atoms",
            expected: pipeline.head_atoms.len(),
            got: rel_rows.len(),
        });
    }
    if time_rows.len() != pipeline.time_atoms.len() {
        return Err(Error::DimensionMismatch {
            context: "time rows vs time atoms",
            expected: pipeline.time_atoms.len(),
            got: time_rows.len(),
        });
    }
    let mut fused: Vec<Vec<S>> = rel_rows.iter().map(|r| r.to_vec()).collect();
    if pipeline.time_atoms.is_empty() {
        return Ok(fused);
    }
    if pipeline.direct {
        fused.extend(time_rows.iter().map(|r| r.to_vec()));
        return Ok(fused);
    }
    let Some(c) = pipeline.carrier else {
        return Err(Error::CarrierMissing);
    };
    let carrier_kind = pipeline.head_atoms[c].kind;
    for (atom, row) in pipeline.time_atoms.iter().zip(time_rows) {
        if carrier_kind == AtomKind::Rotate {
            // angle addition (validated: only Rotate time atoms reach here)
            let target = &mut fused[c];
            if row.len() != target.len() {
                return Err(Error::DimensionMismatch {
                    context: "angle fusion",
                    expected: target.len(),
                    got: row.len(),
                });
            }
            for (t, a) in target.iter_mut().zip(row.iter()) {
                *t = t.add(*a);
            }
        } else {
            apply_atom_inplace(atom.kind, row, &mut fused[c])?;
        }
    }
    Ok(fused)
}

/// Convenience used by tests and the oracle path: fused rows for the
/// effective atom sequence under `mode`. Under `Matrix` (or for direct
/// pipelines) no parameter arithmetic happens; rows are just arranged to
/// match the applied sequence.
pub fn fused_rows_for<S: Real>(
    pipeline: &OperatorPipeline,
    rel_rows: &[&[S]],
    time_rows: &[&[S]],
    mode: FusionMode,
) -> Result<Vec<Vec<S>>> {
    if pipeline.time_atoms.is_empty() || pipeline.direct || mode == FusionMode::Vector {
        return apply_time_fusion(pipeline, rel_rows, time_rows);
    }
    // Matrix mode with a carrier: splice rows after the carrier.
    let c = pipeline.carrier.ok_or(Error::CarrierMissing)?;
    let mut rows: Vec<Vec<S>> = Vec::with_capacity(rel_rows.len() + time_rows.len());
    for r in &rel_rows[..=c] {
        rows.push(r.to_vec());
    }
    for t in time_rows {
        rows.push(t.to_vec());
    }
    for r in &rel_rows[c + 1..] {
        rows.push(r.to_vec());
    }
    Ok(rows)
}

/// Apply an effective atom sequence to a head-entity vector.
///
/// `fused_rows` must align with `pipeline.effective_atoms(mode)` — use
/// [`apply_time_fusion`] (vector mode) or [`fused_rows_for`].
pub fn apply_pipeline<S: Real>(
    atoms: &[OpAtom],
    fused_rows: &[Vec<S>],
    e_head: &[S],
) -> Result<Vec<S>> {
    if atoms.len() != fused_rows.len() {
        return Err(Error::DimensionMismatch {
            context: "fused rows vs effective atoms",
            expected: atoms.len(),
            got: fused_rows.len(),
        });
    }
    let mut x = e_head.to_vec();
    for (atom, row) in atoms.iter().zip(fused_rows) {
        apply_atom_inplace(atom.kind, row, &mut x)?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::atom::OpAtom;

    fn tcompounde_pipeline() -> OperatorPipeline {
        OperatorPipeline::with_carrier(
            vec![
                OpAtom::relation(AtomKind::Translate),
                OpAtom::relation(AtomKind::Scale),
            ],
            vec![
                OpAtom::time(AtomKind::Translate),
                OpAtom::time(AtomKind::Scale),
            ],
            1,
        )
        .unwrap()
    }

    #[test]
    fn fusion_with_no_time_atoms_passes_rows_through() {
        let p = OperatorPipeline::relation_only(vec![OpAtom::relation(AtomKind::Scale)]).unwrap();
        let rows = apply_time_fusion::<f64>(&p, &[&[2.0, 3.0]], &[]).unwrap();
        assert_eq!(rows, vec![vec![2.0, 3.0]]);
    }

    #[test]
    fn scale_carrier_fusion_hand_expansion() {
        // s_r = (1,2), t_tau = (1,0), s_tau = (3,3):
        // fused scale = s_tau ⊙ (s_r + t_tau) = (6, 6)
        let p = tcompounde_pipeline();
        let rows = apply_time_fusion::<f64>(
            &p,
            &[&[9.0, 9.0], &[1.0, 2.0]],
            &[&[1.0, 0.0], &[3.0, 3.0]],
        )
        .unwrap();
        assert_eq!(rows[0], vec![9.0, 9.0]); // non-carrier row untouched
        assert_eq!(rows[1], vec![6.0, 6.0]);
    }

    #[test]
    fn identity_time_parameters_leave_rows_unchanged() {
        let p = tcompounde_pipeline();
        let rows = apply_time_fusion::<f64>(
            &p,
            &[&[0.5, -0.5], &[1.5, 2.5]],
            &[&[0.0, 0.0], &[1.0, 1.0]],
        )
        .unwrap();
        assert_eq!(rows[0], vec![0.5, -0.5]);
        assert_eq!(rows[1], vec![1.5, 2.5]);
    }

    #[test]
    fn missing_carrier_with_time_atoms_errors() {
        let p = OperatorPipeline {
            head_atoms: vec![OpAtom::relation(AtomKind::Scale)],
            time_atoms: vec![OpAtom::time(AtomKind::Scale)],
            carrier: None,
            direct: false,
        };
        let err = apply_time_fusion::<f64>(&p, &[&[1.0, 1.0]], &[&[2.0, 2.0]]).unwrap_err();
        assert!(matches!(err, Error::CarrierMissing));
    }

    #[test]
    fn identity_pipeline_leaves_head_unchanged() {
        let p = tcompounde_pipeline();
        let atoms = p.effective_atoms(FusionMode::Vector);
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let y = apply_pipeline(&atoms, &rows, &[0.7, -0.3]).unwrap();
        assert_eq!(y, vec![0.7, -0.3]);
    }

    #[test]
    fn tcompounde_pipeline_hand_expansion() {
        // e_s = (1,1), t_r = (1,1), fused scale = (2,3) -> (4, 6)
        let p = tcompounde_pipeline();
        let atoms = p.effective_atoms(FusionMode::Vector);
        let rows = vec![vec![1.0, 1.0], vec![2.0, 3.0]];
        let y = apply_pipeline(&atoms, &rows, &[1.0, 1.0]).unwrap();
        assert_eq!(y, vec![4.0, 6.0]);
    }

    #[test]
    fn atom_order_matters() {
        // translate-then-scale vs scale-then-translate on x = 0:
        // (0 + 1) * 2 = 2 vs 0 * 2 + 1 = 1.
        let t_then_s = vec![
            OpAtom::relation(AtomKind::Translate),
            OpAtom::relation(AtomKind::Scale),
        ];
        let s_then_t = vec![
            OpAtom::relation(AtomKind::Scale),
            OpAtom::relation(AtomKind::Translate),
        ];
        let ones = vec![1.0f64; 2];
        let twos = vec![2.0f64; 2];
        let a = apply_pipeline(&t_then_s, &[ones.clone(), twos.clone()], &[0.0, 0.0]).unwrap();
        let b = apply_pipeline(&s_then_t, &[twos, ones], &[0.0, 0.0]).unwrap();
        assert_eq!(a, vec![2.0, 2.0]);
        assert_eq!(b, vec![1.0, 1.0]);
    }

    #[test]
    fn rotate_carrier_requires_rotate_time_atoms() {
        let err = OperatorPipeline::with_carrier(
            vec![OpAtom::relation(AtomKind::Rotate)],
            vec![OpAtom::time(AtomKind::Translate)],
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidPipeline { .. }));
    }

    #[test]
    fn rotate_carrier_fuses_by_angle_addition() {
        let p = OperatorPipeline::with_carrier(
            vec![OpAtom::relation(AtomKind::Rotate)],
            vec![OpAtom::time(AtomKind::Rotate)],
            0,
        )
        .unwrap();
        let rows = apply_time_fusion::<f64>(&p, &[&[0.25, -0.5]], &[&[0.75, 0.5]]).unwrap();
        assert_eq!(rows[0], vec![1.0, 0.0]);
    }

    #[test]
    fn direct_pipeline_appends_time_atoms() {
        let p = OperatorPipeline::direct(
            vec![OpAtom::relation(AtomKind::Rotate)],
            vec![
                OpAtom::time(AtomKind::Translate),
                OpAtom::time(AtomKind::Scale),
            ],
        )
        .unwrap();
        let seq = p.effective_atoms(FusionMode::Vector);
        assert_eq!(seq.len(), 3);
        assert_eq!(seq[0].kind, AtomKind::Rotate);
        assert_eq!(seq[2].kind, AtomKind::Scale);
    }

    #[test]
    fn matrix_mode_splices_after_carrier() {
        let p = tcompounde_pipeline();
        let seq = p.effective_atoms(FusionMode::Matrix);
        let kinds: Vec<AtomKind> = seq.iter().map(|a| a.kind).collect();
        assert_eq!(
            kinds,
            vec![
                AtomKind::Translate, // t_r
                AtomKind::Scale,     // s_r (carrier)
                AtomKind::Translate, // t_tau
                AtomKind::Scale,     // s_tau
            ]
        );
        let srcs: Vec<ParamSource> = seq.iter().map(|a| a.source).collect();
        assert_eq!(
            srcs,
            vec![
                ParamSource::Relation,
                ParamSource::Relation,
                ParamSource::Time,
                ParamSource::Time
            ]
        );
    }

    #[test]
    fn empty_head_atoms_rejected() {
        let err = OperatorPipeline::relation_only(vec![]).unwrap_err();
        assert!(matches!(err, Error::InvalidPipeline { .. }));
    }
}
