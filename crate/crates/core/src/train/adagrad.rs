//! Adagrad with per-entry accumulators.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParams, TableId};
use crate::scalar::Real;

pub const ADAGRAD_EPSILON: f64 = 1e-10;

/// One non-negative accumulator per parameter entry, same shapes as the
/// parameter tables. Accumulators only ever grow.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState<S> {
    pub accum: ModelParams<S>,
    pub epsilon: f64,
}

impl<S: Real> AdagradState<S> {
    pub fn new(dims: crate::model::Dims) -> Self {
        AdagradState {
            accum: ModelParams::zeros(dims),
            epsilon: ADAGRAD_EPSILON,
        }
    }

    pub fn from_tables(accum: ModelParams<S>) -> Self {
        AdagradState {
            accum,
            epsilon: ADAGRAD_EPSILON,
        }
    }
}

/// One optimizer step: for every entry with a nonzero gradient,
/// `G += g²; θ -= lr · g / (√G + ε)`. Entries with zero gradient (and hence
/// untouched rows) are left exactly as they were.
pub fn adagrad_step<S: Real>(
    params: &mut ModelParams<S>,
    state: &mut AdagradState<S>,
    grads: &Gradients,
    lr: f64,
) -> Result<()> {
    let eps = state.epsilon;
    for id in TableId::ALL {
        let g_table = grads.table(id);
        if g_table.data().iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: id.name(),
                example: None,
            });
        }
        let cols = g_table.cols();
        if cols == 0 {
            continue;
        }
        let theta = params.table_mut(id);
        let acc = state.accum.table_mut(id);
        theta
            .data_mut()
            .par_chunks_mut(cols)
            .zip(acc.data_mut().par_chunks_mut(cols))
            .zip(g_table.data().par_chunks(cols))
            .for_each(|((t_row, a_row), g_row)| {
                for i in 0..cols {
                    let g = g_row[i];
                    if g == 0.0 {
                        continue;
                    }
                    let a = a_row[i].to_f64() + g * g;
                    a_row[i] = S::from_f64(a);
                    let t = t_row[i].to_f64() - lr * g / (a.sqrt() + eps);
                    t_row[i] = S::from_f64(t);
                }
            });
    }
    Ok(())
}
