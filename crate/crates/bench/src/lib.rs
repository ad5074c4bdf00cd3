//! Shared fixtures for the criterion benches.

use tce_core::data::{synthetic_dataset, Dataset, SyntheticSpec};
use tce_core::model::{InitConfig, ModelParams};

/// A mid-sized synthetic dataset and matching initialized parameters.
pub fn bench_fixture(d: usize) -> (Dataset, ModelParams<f32>) {
    let ds = synthetic_dataset(&SyntheticSpec {
        n_entities: 500,
        n_relations: 20,
        n_timestamps: 30,
        n_facts: 2000,
        seed: 99,
    });
    let params = ModelParams::init(ds.dims(d), &InitConfig::default(), 7);
    (ds, params)
}
