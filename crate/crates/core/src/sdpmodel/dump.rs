//! JSON description of a model for offline solving and regression diffs.

use std::sync::Arc;

use serde::Serialize;

use super::real::{BlockBasis, StandardForm};
use super::result::prepare;
use super::{ConicModel, Field, Subspace};
use crate::error::{Error, Result};

/// Version tag written into every dump.
pub const DUMP_FORMAT: &str = "vnlearn-conic-1";

#[derive(Clone, Debug, Serialize)]
pub struct SubspaceDump {
    pub dim: usize,
    /// Per basis element, nonzero upper-triangle entries `[row, col, value]`.
    pub entries: Vec<Vec<(usize, usize, f64)>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockDump {
    pub name: String,
    pub dim: usize,
    pub field: Field,
    /// First coordinate of the block in `x`.
    pub offset: usize,
    pub coordinates: usize,
    /// Index into `subspaces`, absent for unrestricted blocks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subspace: Option<usize>,
    /// Side of each PSD cone the block contributes, in cone order.
    pub cone_sides: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelDump {
    pub format: &'static str,
    pub name: String,
    /// The original model is maximized; `standard_form` minimizes `q·x`.
    pub sense: &'static str,
    pub blocks: Vec<BlockDump>,
    pub subspaces: Vec<SubspaceDump>,
    pub equalities: usize,
    pub removed_rows: usize,
    pub standard_form: StandardForm,
}

/// Real standard form after presolve plus the block layout needed to map a
/// solution back.
pub fn dump_model(name: &str, model: &ConicModel) -> Result<ModelDump> {
    let prep = prepare(model).map_err(|(_, msg)| Error::Solver(msg))?;
    let mut subspaces: Vec<Arc<Subspace>> = Vec::new();
    let blocks = prep
        .real
        .blocks
        .iter()
        .map(|b| {
            let subspace = match &b.basis {
                BlockBasis::Standard => None,
                BlockBasis::Dense(s) => Some(match subspaces.iter().position(|x| Arc::ptr_eq(x, s)) {
                    Some(k) => k,
                    None => {
                        subspaces.push(s.clone());
                        subspaces.len() - 1
                    }
                }),
            };
            BlockDump {
                name: b.name.clone(),
                dim: b.dim,
                field: b.field,
                offset: b.offset,
                coordinates: b.n_coords,
                subspace,
                cone_sides: b.cones.iter().map(|c| c.len()).collect(),
            }
        })
        .collect();
    Ok(ModelDump {
        format: DUMP_FORMAT,
        name: name.to_string(),
        sense: "maximize",
        blocks,
        subspaces: subspaces
            .iter()
            .map(|s| SubspaceDump {
                dim: s.dim(),
                entries: s.entries().to_vec(),
            })
            .collect(),
        equalities: model.equalities().len(),
        removed_rows: prep.removed_rows,
        standard_form: prep.standard_form(),
    })
}
