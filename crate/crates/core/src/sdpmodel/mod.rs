//! Solver-agnostic semidefinite models.
//!
//! A [`ConicModel`] has Hermitian (or real symmetric) PSD blocks, real linear
//! equality constraints and a linear objective to maximize. Functionals are
//! lists of `(block, scale, coefficient)` terms with value
//! `Σ scale · Re tr(A† X_block)`; coefficients are Hermitian and shared
//! through `Arc` so that thousands of rows can reuse a handful of matrices.
//!
//! Blocks may be restricted to a linear subspace spanned by an orthonormal
//! real symmetric basis; the block is then `Σ_c x_c B_c` and only the
//! coordinates `x_c` are decision variables.

mod admm;
mod dump;
mod ipm;
mod presolve;
mod real;
mod result;

pub use dump::{dump_model, BlockDump, ModelDump, SubspaceDump, DUMP_FORMAT};
pub use presolve::{presolve, Presolved};
pub use real::{embed_hermitian, to_real_conic, BlockBasis, Cone, RealBlock, RealConicModel, SparseRow, StandardForm};
pub use result::{prepare, Prepared, Backend, Residuals, SolveOptions, SolveResult, SolveStatus};

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, SubsystemShape};

/// Tolerance on `‖A − A†‖_F` for functional coefficients.
const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BlockId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

/// Orthonormal basis of a subspace of real symmetric `dim × dim` matrices.
#[derive(Debug)]
pub struct Subspace {
    dim: usize,
    basis: Vec<DMatrix<f64>>,
    /// Per basis element: nonzero `(row, col, value)` with `row ≤ col`.
    entries: Vec<Vec<(usize, usize, f64)>>,
    /// Index classes connected through the joint sparsity pattern; every
    /// element of the subspace is block diagonal over them.
    components: Vec<Vec<usize>>,
}

impl Subspace {
    /// Checks symmetry and orthonormality to `1e-9`.
    pub fn new(dim: usize, basis: Vec<DMatrix<f64>>) -> Result<Self> {
        for (k, b) in basis.iter().enumerate() {
            if b.nrows() != dim || b.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: b.nrows(),
                });
            }
            if (b - b.transpose()).norm() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "subspace basis element {k} is not symmetric"
                )));
            }
            for (l, c) in basis.iter().enumerate().take(k + 1) {
                let g = b.dot(c);
                let expect = if l == k { 1.0 } else { 0.0 };
                if (g - expect).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "subspace basis is not orthonormal at ({k}, {l})"
                    )));
                }
            }
        }
        let entries: Vec<Vec<(usize, usize, f64)>> = basis
            .iter()
            .map(|b| {
                let mut e = Vec::new();
                for c in 0..dim {
                    for r in 0..=c {
                        let v = b[(r, c)];
                        if v != 0.0 {
                            e.push((r, c, v));
                        }
                    }
                }
                e
            })
            .collect();
        let components = pattern_components(dim, &entries);
        Ok(Self {
            dim,
            basis,
            entries,
            components,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    pub fn entries(&self) -> &[Vec<(usize, usize, f64)>] {
        &self.entries
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    /// Coordinates `⟨B_c, Re A⟩` of the orthogonal projection of `Re A`.
    pub fn project(&self, a: &ComplexMatrix) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| {
                e.iter()
                    .map(|&(r, c, v)| {
                        if r == c {
                            v * a.get(r, r).re
                        } else {
                            v * (a.get(r, c).re + a.get(c, r).re)
                        }
                    })
                    .sum()
            })
            .collect()
    }

    /// `Σ_c x_c B_c`.
    pub fn combine(&self, coords: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (e, &x) in self.entries.iter().zip(coords) {
            if x == 0.0 {
                continue;
            }
            for &(r, c, v) in e {
                m[(r, c)] += x * v;
                if r != c {
                    m[(c, r)] += x * v;
                }
            }
        }
        m
    }

    /// Distance from `A` to the subspace, `‖Re A − P(Re A)‖_F` plus `‖Im A‖_F`.
    pub fn distance(&self, a: &ComplexMatrix) -> f64 {
        let p = self.combine(&self.project(a));
        let mut acc = 0.0;
        for c in 0..self.dim {
            for r in 0..self.dim {
                let z = a.get(r, c);
                acc += (z.re - p[(r, c)]).powi(2) + z.im * z.im;
            }
        }
        acc.sqrt()
    }
}

fn pattern_components(dim: usize, entries: &[Vec<(usize, usize, f64)>]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in entries {
        for &(r, c, _) in e {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for k in 0..dim {
        let root = find(&mut parent, k);
        groups.entry(root).or_default().push(k);
    }
    groups.into_values().collect()
}

/// A PSD variable block.
#[derive(Clone, Debug)]
pub struct BlockSpec {
    pub name: String,
    pub dim: usize,
    pub field: Field,
    pub subspace: Option<Arc<Subspace>>,
}

#[derive(Clone, Debug)]
pub struct Term {
    pub block: BlockId,
    pub scale: f64,
    pub coeff: Arc<ComplexMatrix>,
}

/// Real linear functional `Σ scale · Re tr(A† X_block)` over the blocks.
#[derive(Clone, Debug, Default)]
pub struct Functional {
    pub terms: Vec<Term>,
}

impl Functional {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, block: BlockId, scale: f64, coeff: Arc<ComplexMatrix>) -> Self {
        self.push(block, scale, coeff);
        self
    }

    pub fn push(&mut self, block: BlockId, scale: f64, coeff: Arc<ComplexMatrix>) {
        if scale != 0.0 {
            self.terms.push(Term {
                block,
                scale,
                coeff,
            });
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate(&self, blocks: &[ComplexMatrix]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.scale * t.coeff.inner_re(&blocks[t.block.0]))
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct Equality {
    pub functional: Functional,
    pub rhs: f64,
}

/// Maximize `objective` subject to `equalities` and every block PSD.
#[derive(Clone, Debug, Default)]
pub struct ConicModel {
    blocks: Vec<BlockSpec>,
    equalities: Vec<Equality>,
    objective: Functional,
}

impl ConicModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Complex Hermitian PSD block of side `dim`.
    pub fn add_psd_block(&mut self, dim: usize) -> BlockId {
        self.add_block(format!("X{}", self.blocks.len()), dim, Field::Complex, None)
    }

    /// Real symmetric PSD block of side `dim`.
    pub fn add_real_psd_block(&mut self, dim: usize) -> BlockId {
        self.add_block(format!("X{}", self.blocks.len()), dim, Field::Real, None)
    }

    /// Real symmetric PSD block confined to `subspace`.
    pub fn add_subspace_block(&mut self, subspace: Arc<Subspace>) -> BlockId {
        let dim = subspace.dim();
        self.add_block(
            format!("X{}", self.blocks.len()),
            dim,
            Field::Real,
            Some(subspace),
        )
    }

    pub fn add_block(
        &mut self,
        name: String,
        dim: usize,
        field: Field,
        subspace: Option<Arc<Subspace>>,
    ) -> BlockId {
        assert!(dim >= 1, "PSD blocks need dim >= 1");
        self.blocks.push(BlockSpec {
            name,
            dim,
            field,
            subspace,
        });
        BlockId(self.blocks.len() - 1)
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &BlockSpec {
        &self.blocks[id.0]
    }

    pub fn equalities(&self) -> &[Equality] {
        &self.equalities
    }

    pub fn objective(&self) -> &Functional {
        &self.objective
    }

    pub fn add_equality(&mut self, functional: Functional, rhs: f64) -> Result<()> {
        self.check_functional(&functional)?;
        self.equalities.push(Equality { functional, rhs });
        Ok(())
    }

    pub fn set_objective(&mut self, functional: Functional) -> Result<()> {
        self.check_functional(&functional)?;
        self.objective = functional;
        Ok(())
    }

    /// Reorders the equality list; the feasible set is unchanged.
    pub fn permute_equalities(&mut self, order: &[usize]) {
        assert_eq!(order.len(), self.equalities.len());
        let old = std::mem::take(&mut self.equalities);
        self.equalities = order.iter().map(|&k| old[k].clone()).collect();
    }

    fn check_functional(&self, f: &Functional) -> Result<()> {
        for t in &f.terms {
            let spec = self.blocks.get(t.block.0).ok_or_else(|| {
                Error::MalformedFunctional(format!("unknown block {}", t.block.0))
            })?;
            if t.coeff.dim() != spec.dim {
                return Err(Error::MalformedFunctional(format!(
                    "coefficient of side {} on block `{}` of side {}",
                    t.coeff.dim(),
                    spec.name,
                    spec.dim
                )));
            }
            if !t.scale.is_finite() || t.coeff.data().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::MalformedFunctional("non-finite coefficient".into()));
            }
            let h = t.coeff.hermiticity_residual();
            if h > HERMITIAN_TOL * (1.0 + t.coeff.max_abs()) {
                return Err(Error::MalformedFunctional(format!(
                    "coefficient on block `{}` is not Hermitian (residual {h:.3e})",
                    spec.name
                )));
            }
        }
        Ok(())
    }

    /// Largest `|f(X) − rhs|` over the equalities.
    pub fn equality_residual(&self, blocks: &[ComplexMatrix]) -> f64 {
        self.equalities
            .iter()
            .map(|e| (e.functional.evaluate(blocks) - e.rhs).abs())
            .fold(0.0, f64::max)
    }
}

/// Hermitian coefficient `|r⟩⟨c| + |c⟩⟨r|` (halved on the diagonal) that
/// reads off `Re X_rc` through `Re tr(A† X)`.
pub fn entry_coefficient(dim: usize, r: usize, c: usize) -> ComplexMatrix {
    let shape = SubsystemShape::single(dim).expect("dim >= 1");
    let mut a = ComplexMatrix::zeros(shape);
    if r == c {
        a.set(r, r, crate::linalg::ONE);
    } else {
        a.set(r, c, crate::linalg::C64::new(0.5, 0.0));
        a.set(c, r, crate::linalg::C64::new(0.5, 0.0));
    }
    a
}

/// Solves `model`; failures surface in the returned status, never as panics.
pub fn solve(model: &ConicModel, options: &SolveOptions) -> SolveResult {
    result::solve_model(model, options)
}
