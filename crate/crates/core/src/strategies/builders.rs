use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::blocks::{block_shape, ChoiBlocks};
use super::constraints::{LinearMap, MatrixEquality, RowLowering, RowSpace, WireMap};
use super::covariance::{commutant_subspace, covariance_constraints};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, SubsystemShape, C64};
use crate::process::{assemble_storage, lv_terms, qubit_parity_constraints, ProcessMatrix};
use crate::sdpmodel::{BlockId, ConicModel, Functional, SolveResult, SolveStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    /// Storage by a process matrix, no fixed order between the N uses.
    Causal,
    /// Sequential comb: uses in a fixed order, later inputs may depend on
    /// earlier outcomes.
    Adaptive,
    /// All N uses at once.
    Parallel,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [Self::Causal, Self::Adaptive, Self::Parallel];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Causal => "causal",
            Self::Adaptive => "adaptive",
            Self::Parallel => "parallel",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "causal" => Ok(Self::Causal),
            "adaptive" => Ok(Self::Adaptive),
            "parallel" => Ok(Self::Parallel),
            other => Err(format!(
                "unknown scheme `{other}` (expected causal, adaptive or parallel)"
            )),
        }
    }
}

/// How covariance under `Ū ⊗ U^{⊗N}` is imposed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceMode {
    /// Real symmetric blocks parametrized inside the commutant.
    #[default]
    Subspace,
    /// Complex blocks with one equality per generator and basis element.
    Functionals,
}

/// How the causal strategy's validity condition is written.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalPath {
    /// Parity sums for qubits, the projector otherwise.
    #[default]
    Auto,
    /// `Σ_j (−1)^{k·j}` sums; qubits only.
    Parity,
    /// `W = L_V(W)` restricted to classical outputs.
    Projector,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildOptions {
    pub covariance: CovarianceMode,
    pub causal_path: CausalPath,
}

/// A built model plus the ids of its `L_{i,j}` blocks in flat order.
#[derive(Clone, Debug)]
pub struct StrategyModel {
    pub kind: StrategyKind,
    pub d: usize,
    pub n: usize,
    pub options: BuildOptions,
    pub model: ConicModel,
    pub blocks: Vec<BlockId>,
}

impl StrategyModel {
    /// The solved blocks as a [`ChoiBlocks`] family.
    pub fn choi_blocks(&self, result: &SolveResult) -> Result<ChoiBlocks> {
        choi_blocks_from(result, self.d, self.n)
    }
}

fn choi_blocks_from(result: &SolveResult, d: usize, n: usize) -> Result<ChoiBlocks> {
    let count = d.pow(n as u32 + 1);
    if result.blocks.len() < count {
        return Err(Error::DimensionMismatch {
            expected: count,
            found: result.blocks.len(),
        });
    }
    let shape = block_shape(d, n);
    let blocks = result.blocks[..count]
        .iter()
        .map(|b| b.reshaped(shape.clone()))
        .collect::<Result<Vec<_>>>()?;
    ChoiBlocks::new(d, n, blocks)
}

/// Stored process matrix of an optimal solution.
pub fn extract_storage(result: &SolveResult, d: usize, n: usize) -> Result<ProcessMatrix> {
    if result.status != SolveStatus::Optimal {
        return Err(Error::NotOptimal(format!(
            "cannot extract storage from a {} solution",
            result.status
        )));
    }
    assemble_storage(&choi_blocks_from(result, d, n)?)
}

pub fn build_causal(d: usize, n: usize) -> Result<StrategyModel> {
    build(StrategyKind::Causal, d, n, &BuildOptions::default())
}

pub fn build_adaptive(d: usize, n: usize) -> Result<StrategyModel> {
    build(StrategyKind::Adaptive, d, n, &BuildOptions::default())
}

pub fn build_parallel(d: usize, n: usize) -> Result<StrategyModel> {
    build(StrategyKind::Parallel, d, n, &BuildOptions::default())
}

/// Variables `L_{i,j} ⪰ 0`, objective `(1/d) Σ ⟨|i j⟩⟨i j|, L_{i,j}⟩`, the
/// retrieval condition `Σ_i L_{i,j} = prescript_{X_in}(Σ_i L_{i,j})`,
/// covariance, `Σ tr L = d^{N+1}`, and the strategy's storage condition on
/// `W_j = (1/d) tr_{X_in} Σ_i L_{i,j}`.
pub fn build(kind: StrategyKind, d: usize, n: usize, options: &BuildOptions) -> Result<StrategyModel> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("d must be at least 2, got {d}")));
    }
    if n < 1 {
        return Err(Error::InvalidParameter(format!("N must be at least 1, got {n}")));
    }
    let shape = block_shape(d, n);
    let dim = shape.total();
    let labels = d.pow(n as u32);
    let mut model = ConicModel::new();

    let space = match options.covariance {
        CovarianceMode::Subspace => RowSpace::Subspace(commutant_subspace(d, n)?),
        CovarianceMode::Functionals => RowSpace::Full,
    };
    let blocks: Vec<BlockId> = (0..d * labels)
        .map(|flat| {
            let id = match &space {
                RowSpace::Subspace(s) => model.add_subspace_block(s.clone()),
                RowSpace::Full => model.add_psd_block(dim),
            };
            debug_assert_eq!(id.0, flat);
            id
        })
        .collect();
    let block = |i: usize, j: usize| blocks[i * labels + j];

    let mut objective = Functional::new();
    for (flat, &b) in blocks.iter().enumerate() {
        // block (i, j) rewards its own diagonal entry |i j⟩⟨i j|
        let mut e = ComplexMatrix::zeros(shape.clone());
        e.set(flat, flat, C64::new(1.0, 0.0));
        objective.push(b, 1.0 / d as f64, Arc::new(e));
    }
    model.set_objective(objective)?;

    let identity = Arc::new(ComplexMatrix::identity(shape.clone()));
    let mut norm = Functional::new();
    for &b in &blocks {
        norm.push(b, 1.0, identity.clone());
    }
    model.add_equality(norm, dim as f64)?;

    if options.covariance == CovarianceMode::Functionals {
        let coeffs: Vec<Arc<ComplexMatrix>> = covariance_constraints(d, n)?.into_iter().map(Arc::new).collect();
        for &b in &blocks {
            for c in &coeffs {
                model.add_equality(Functional::new().with(b, 1.0, c.clone()), 0.0)?;
            }
        }
    }

    let mut lower = RowLowering::new(space, shape.clone());

    let retrieval = Arc::new(LinearMap::new(vec![
        (1.0, WireMap::identity()),
        (
            -1.0,
            WireMap {
                traced: Vec::new(),
                prescripted: vec![0],
            },
        ),
    ]));
    for j in 0..labels {
        let mut eq = MatrixEquality::new();
        for i in 0..d {
            eq.push(block(i, j), 1.0, &retrieval);
        }
        lower.lower(&mut model, &eq)?;
    }

    let storage = storage_equalities(kind, d, n, options.causal_path, &block)?;
    for eq in &storage {
        lower.lower(&mut model, eq)?;
    }

    Ok(StrategyModel {
        kind,
        d,
        n,
        options: *options,
        model,
        blocks,
    })
}

/// The storage condition as matrix equalities over the blocks.
pub(crate) fn storage_equalities(
    kind: StrategyKind,
    d: usize,
    n: usize,
    path: CausalPath,
    block: &dyn Fn(usize, usize) -> BlockId,
) -> Result<Vec<MatrixEquality>> {
    let labels = SubsystemShape::uniform(d, n)?;
    let count = labels.total();
    let mut out = Vec::new();
    match kind {
        StrategyKind::Parallel => {
            // W_j = W_0
            let tr_x = Arc::new(LinearMap::single(WireMap::trace(vec![0])));
            for j in 1..count {
                let mut eq = MatrixEquality::new();
                for i in 0..d {
                    eq.push(block(i, j), 1.0, &tr_x);
                    eq.push(block(i, 0), -1.0, &tr_x);
                }
                out.push(eq);
            }
        }
        StrategyKind::Adaptive => {
            // stage m: the marginal on A_I^1..A_I^m does not depend on j_m;
            // with the later stages this removes dependence on j_m..j_N
            for m in 1..=n {
                let mut traced = vec![0];
                traced.extend(m + 1..=n);
                let map = Arc::new(LinearMap::single(WireMap::trace(traced)));
                for j in 0..count {
                    let digits = labels.unravel(j);
                    if digits[m - 1] == 0 {
                        continue;
                    }
                    let mut base = digits.clone();
                    base[m - 1] = 0;
                    let j0 = labels.ravel(&base);
                    let mut eq = MatrixEquality::new();
                    for i in 0..d {
                        eq.push(block(i, j), 1.0, &map);
                        eq.push(block(i, j0), -1.0, &map);
                    }
                    out.push(eq);
                }
            }
        }
        StrategyKind::Causal => {
            let use_parity = match path {
                CausalPath::Parity => true,
                CausalPath::Projector => false,
                CausalPath::Auto => d == 2,
            };
            if use_parity {
                for c in qubit_parity_constraints(n, &vec![d; n])? {
                    let map = Arc::new(LinearMap::single(WireMap::trace(c.traced_block_positions())));
                    let mut eq = MatrixEquality::new();
                    for j in 0..count {
                        let s = c.sign(&labels.unravel(j));
                        for i in 0..d {
                            eq.push(block(i, j), s, &map);
                        }
                    }
                    out.push(eq);
                }
            } else {
                out.extend(projector_equalities(d, n, block)?);
            }
        }
    }
    Ok(out)
}

/// `W_{j'} − L_V(W)_{j'} = 0` for every `j'`, with `W_j = (1/d) tr_X Σ_i L_{i,j}`.
///
/// A projector monomial with output set `O` and input set `I` maps the
/// family to `d^{−|O|} Σ_{j_O} prescript_I(W_j)`, the average over the
/// outcomes in `O`.
fn projector_equalities(
    d: usize,
    n: usize,
    block: &dyn Fn(usize, usize) -> BlockId,
) -> Result<Vec<MatrixEquality>> {
    let labels = SubsystemShape::uniform(d, n)?;
    let strides = labels.strides();
    let terms = lv_terms(n);
    let mut maps: BTreeMap<Vec<usize>, Arc<LinearMap>> = BTreeMap::new();
    let tr_x = Arc::new(LinearMap::single(WireMap::trace(vec![0])));
    maps.insert(Vec::new(), tr_x.clone());
    for t in terms.iter() {
        let inputs = t.input_parties();
        maps.entry(inputs.clone()).or_insert_with(|| {
            Arc::new(LinearMap::single(WireMap {
                traced: vec![0],
                prescripted: inputs,
            }))
        });
    }
    let inv_d = 1.0 / d as f64;
    let mut out = Vec::new();
    for target in 0..labels.total() {
        let digits = labels.unravel(target);
        let mut eq = MatrixEquality::new();
        for i in 0..d {
            eq.push(block(i, target), inv_d, &tr_x);
        }
        for t in terms.iter() {
            let outputs = t.output_parties();
            let map = &maps[&t.input_parties()];
            let weight = t.coefficient as f64 / (d as f64).powi(outputs.len() as i32);
            let base: usize = (0..n)
                .filter(|p| !outputs.contains(p))
                .map(|p| digits[p] * strides[p])
                .sum();
            for g in 0..d.pow(outputs.len() as u32) {
                // base-d digits of g fill the averaged outcome slots
                let mut rest = g;
                let mut j = base;
                for &p in outputs.iter().rev() {
                    j += (rest % d) * strides[p];
                    rest /= d;
                }
                for i in 0..d {
                    eq.push(block(i, j), -weight * inv_d, map);
                }
            }
        }
        out.push(eq);
    }
    Ok(out)
}
