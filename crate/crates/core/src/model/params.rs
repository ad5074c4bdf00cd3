//! The full parameter set: one table per (operation kind, parameter family).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{AtomKind, OpAtom, ParamSource};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Real;

use super::table::EmbeddingTable;

/// Table sizes of a model instance. `n_relations` is the base relation count
/// |R|; relation tables are allocated with 2|R| rows so that row `r + |R|`
/// holds relation r's inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub d: usize,
    pub n_entities: usize,
    pub n_relations: usize,
    pub n_timestamps: usize,
}

impl Dims {
    pub fn n_relations_aug(&self) -> usize {
        2 * self.n_relations
    }

    pub fn half_d(&self) -> usize {
        self.d / 2
    }
}

/// Identifies one of the seven parameter tables. The enumeration order is
/// also the serialization order of the checkpoint container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableId {
    Entity,
    RelTranslate,
    RelScale,
    RelRotate,
    TimeTranslate,
    TimeScale,
    TimeRotate,
}

impl TableId {
    pub const ALL: [TableId; 7] = [
        TableId::Entity,
        TableId::RelTranslate,
        TableId::RelScale,
        TableId::RelRotate,
        TableId::TimeTranslate,
        TableId::TimeScale,
        TableId::TimeRotate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableId::Entity => "entity",
            TableId::RelTranslate => "rel_translate",
            TableId::RelScale => "rel_scale",
            TableId::RelRotate => "rel_rotate",
            TableId::TimeTranslate => "time_translate",
            TableId::TimeScale => "time_scale",
            TableId::TimeRotate => "time_rotate",
        }
    }

    /// The table an operator atom reads its parameter row from.
    pub fn for_atom(atom: OpAtom) -> TableId {
        match (atom.source, atom.kind) {
            (ParamSource::Relation, AtomKind::Translate) => TableId::RelTranslate,
            (ParamSource::Relation, AtomKind::Scale) => TableId::RelScale,
            (ParamSource::Relation, AtomKind::Rotate) => TableId::RelRotate,
            (ParamSource::Time, AtomKind::Translate) => TableId::TimeTranslate,
            (ParamSource::Time, AtomKind::Scale) => TableId::TimeScale,
            (ParamSource::Time, AtomKind::Rotate) => TableId::TimeRotate,
        }
    }
}

/// Initialization settings. Every entry is drawn i.i.d. Gaussian with mean 0
/// and standard deviation `init_scale`; `scale_at_identity` instead centers
/// the two scaling tables at 1.
#[derive(Debug, Clone, Copy)]
pub struct InitConfig {
    pub init_scale: f64,
    pub scale_at_identity: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            init_scale: 0.01,
            scale_at_identity: false,
        }
    }
}

/// All parameter tables of one model. Also reused, zero-filled, as the
/// container for Adagrad accumulators and batch gradients, which share the
/// table shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    dims: Dims,
    pub entity: EmbeddingTable<S>,
    pub rel_translate: EmbeddingTable<S>,
    pub rel_scale: EmbeddingTable<S>,
    pub rel_rotate: EmbeddingTable<S>,
    pub time_translate: EmbeddingTable<S>,
    pub time_scale: EmbeddingTable<S>,
    pub time_rotate: EmbeddingTable<S>,
}

impl<S: Real> ModelParams<S> {
    pub fn zeros(dims: Dims) -> Self {
        let half = dims.half_d();
        ModelParams {
            dims,
            entity: EmbeddingTable::zeros(dims.n_entities, dims.d),
            rel_translate: EmbeddingTable::zeros(dims.n_relations_aug(), dims.d),
            rel_scale: EmbeddingTable::zeros(dims.n_relations_aug(), dims.d),
            rel_rotate: EmbeddingTable::zeros(dims.n_relations_aug(), half),
            time_translate: EmbeddingTable::zeros(dims.n_timestamps, dims.d),
            time_scale: EmbeddingTable::zeros(dims.n_timestamps, dims.d),
            time_rotate: EmbeddingTable::zeros(dims.n_timestamps, half),
        }
    }

    /// Gaussian initialization, reproducible from the seed alone.
    pub fn init(dims: Dims, cfg: &InitConfig, seed: u64) -> Self {
        let mut params = Self::zeros(dims);
        let normal = Normal::new(0.0f64, cfg.init_scale).expect("positive std dev");
        for (salt, id) in TableId::ALL.into_iter().enumerate() {
            let mut rng = rng_from_seed(derive_seed(seed, salt as u64));
            let at_identity = cfg.scale_at_identity
                && matches!(id, TableId::RelScale | TableId::TimeScale);
            let offset = if at_identity { 1.0 } else { 0.0 };
            let table = params.table_mut(id);
            for v in table.data_mut() {
                *v = S::from_f64(offset + normal.sample(&mut rng));
            }
        }
        params
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn d(&self) -> usize {
        self.dims.d
    }

    pub fn n_entities(&self) -> usize {
        self.dims.n_entities
    }

    pub fn table(&self, id: TableId) -> &EmbeddingTable<S> {
        match id {
            TableId::Entity => &self.entity,
            TableId::RelTranslate => &self.rel_translate,
            TableId::RelScale => &self.rel_scale,
            TableId::RelRotate => &self.rel_rotate,
            TableId::TimeTranslate => &self.time_translate,
            TableId::TimeScale => &self.time_scale,
            TableId::TimeRotate => &self.time_rotate,
        }
    }

    pub fn table_mut(&mut self, id: TableId) -> &mut EmbeddingTable<S> {
        match id {
            TableId::Entity => &mut self.entity,
            TableId::RelTranslate => &mut self.rel_translate,
            TableId::RelScale => &mut self.rel_scale,
            TableId::RelRotate => &mut self.rel_rotate,
            TableId::TimeTranslate => &mut self.time_translate,
            TableId::TimeScale => &mut self.time_scale,
            TableId::TimeRotate => &mut self.time_rotate,
        }
    }

    /// Parameter row for an atom at the given relation/time ids.
    pub(crate) fn atom_row(&self, atom: OpAtom, rel: u32, time: u32) -> Result<&[S]> {
        let id = TableId::for_atom(atom);
        let row = match atom.source {
            ParamSource::Relation => rel as usize,
            ParamSource::Time => time as usize,
        };
        self.table(id).try_row(id.name(), row)
    }

    pub fn entity_row(&self, id: u32) -> Result<&[S]> {
        self.entity.try_row("entity", id as usize)
    }

    pub fn check_finite(&self) -> Result<()> {
        for id in TableId::ALL {
            if !self.table(id).all_finite() {
                return Err(Error::NonFinite {
                    what: id.name(),
                    example: None,
                });
            }
        }
        Ok(())
    }

    pub fn convert<T: Real>(&self) -> ModelParams<T> {
        ModelParams {
            dims: self.dims,
            entity: self.entity.convert(),
            rel_translate: self.rel_translate.convert(),
            rel_scale: self.rel_scale.convert(),
            rel_rotate: self.rel_rotate.convert(),
            time_translate: self.time_translate.convert(),
            time_scale: self.time_scale.convert(),
            time_rotate: self.time_rotate.convert(),
        }
    }

    /// Fill a row with a literal value set (test and witness construction).
    pub fn set_row(&mut self, id: TableId, row: usize, values: &[f64]) {
        let table = self.table_mut(id);
        assert_eq!(values.len(), table.cols(), "row width for {}", id.name());
        for (dst, v) in table.row_mut(row).iter_mut().zip(values) {
            *dst = S::from_f64(*v);
        }
    }

    /// Fill an entire table with a constant (e.g. 1.0 for identity scales).
    pub fn fill_table(&mut self, id: TableId, value: f64) {
        for v in self.table_mut(id).data_mut() {
            *v = S::from_f64(value);
        }
    }

    /// Identity-transform parameters: zero translations and rotations, unit
    /// scales. Entities keep their current values.
    pub fn set_identity_operators(&mut self) {
        self.fill_table(TableId::RelTranslate, 0.0);
        self.fill_table(TableId::RelRotate, 0.0);
        self.fill_table(TableId::TimeTranslate, 0.0);
        self.fill_table(TableId::TimeRotate, 0.0);
        self.fill_table(TableId::RelScale, 1.0);
        self.fill_table(TableId::TimeScale, 1.0);
    }
}

/// Gradients always accumulate in double precision, whatever the parameter
/// storage type.
pub type Gradients = ModelParams<f64>;

/// Random Gaussian fill of one table (used by tests and witnesses).
pub fn fill_gaussian<S: Real, R: Rng>(
    table: &mut EmbeddingTable<S>,
    std_dev: f64,
    rng: &mut R,
) {
    let normal = Normal::new(0.0f64, std_dev).expect("positive std dev");
    for v in table.data_mut() {
        *v = S::from_f64(normal.sample(rng));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_dims() -> Dims {
        Dims {
            d: 4,
            n_entities: 3,
            n_relations: 2,
            n_timestamps: 2,
        }
    }

    #[test]
    fn shapes_follow_dims() {
        let p: ModelParams<f32> = ModelParams::zeros(small_dims());
        assert_eq!(p.entity.rows(), 3);
        assert_eq!(p.entity.cols(), 4);
        assert_eq!(p.rel_translate.rows(), 4); // 2|R|
        assert_eq!(p.rel_rotate.cols(), 2); // d/2
        assert_eq!(p.time_scale.rows(), 2);
    }

    #[test]
    fn init_is_reproducible_and_seed_sensitive() {
        let dims = small_dims();
        let cfg = InitConfig::default();
        let a: ModelParams<f64> = ModelParams::init(dims, &cfg, 7);
        let b: ModelParams<f64> = ModelParams::init(dims, &cfg, 7);
        let c: ModelParams<f64> = ModelParams::init(dims, &cfg, 8);
        assert_eq!(a, b);
        assert_ne!(a.entity.data(), c.entity.data());
    }

    #[test]
    fn identity_init_offsets_scale_tables() {
        let cfg = InitConfig {
            init_scale: 0.001,
            scale_at_identity: true,
        };
        let p: ModelParams<f64> = ModelParams::init(small_dims(), &cfg, 1);
        let mean: f64 =
            p.rel_scale.data().iter().sum::<f64>() / p.rel_scale.data().len() as f64;
        assert!((mean - 1.0).abs() < 0.01);
        let mean_t: f64 =
            p.rel_translate.data().iter().sum::<f64>() / p.rel_translate.data().len() as f64;
        assert!(mean_t.abs() < 0.01);
    }

    #[test]
    fn finite_check_flags_nan() {
        let mut p: ModelParams<f64> = ModelParams::zeros(small_dims());
        assert!(p.check_finite().is_ok());
        p.entity.row_mut(0)[0] = f64::NAN;
        assert!(p.check_finite().is_err());
    }
}
