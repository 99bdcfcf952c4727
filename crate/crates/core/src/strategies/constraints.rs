//! Matrix-valued linear equalities between blocks, lowered to scalar rows.
//!
//! An equality `Σ_t s_t M_t(L_{b_t}) = 0` holds iff it holds against an
//! orthonormal basis `{T_r}` of a space containing every possible left-hand
//! side. For blocks confined to a subspace `span{B_c}` that space is
//! `span{M_t(B_c)}`; for unrestricted blocks it is all Hermitian operators on
//! the output. Each row is `Σ_t s_t ⟨M_t^*(T_r), L_{b_t}⟩ = 0`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use super::covariance::hermitian_basis;
use crate::error::{Error, Result};
use crate::linalg::{embed_operator, partial_trace, prescript, ComplexMatrix, SubsystemShape};
use crate::sdpmodel::{BlockId, ConicModel, Functional, Subspace};

/// Relative eigenvalue cutoff when orthonormalizing images.
const SPAN_TOL: f64 = 1e-10;

/// Partial trace over `traced` block positions, then a prescript on
/// `prescripted` positions of what remains.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WireMap {
    pub traced: Vec<usize>,
    pub prescripted: Vec<usize>,
}

impl WireMap {
    pub fn identity() -> Self {
        Self {
            traced: Vec::new(),
            prescripted: Vec::new(),
        }
    }

    pub fn trace(traced: Vec<usize>) -> Self {
        Self {
            traced,
            prescripted: Vec::new(),
        }
    }

    pub fn output_shape(&self, input: &SubsystemShape) -> Result<SubsystemShape> {
        let traced = input.check_subset(&self.traced)?;
        let kept: Vec<usize> = input
            .dims()
            .iter()
            .enumerate()
            .filter(|(p, _)| !traced.contains(p))
            .map(|(_, &d)| d)
            .collect();
        SubsystemShape::new(kept)
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let reduced = if self.traced.is_empty() {
            x.clone()
        } else {
            partial_trace(x, &self.traced)?
        };
        prescript(&reduced, &self.prescripted)
    }

    /// `Y ↦ prescript(Y) ⊗ I_traced`, re-embedded on `input`.
    pub fn adjoint(&self, y: &ComplexMatrix, input: &SubsystemShape) -> Result<ComplexMatrix> {
        let p = prescript(y, &self.prescripted)?;
        if self.traced.is_empty() {
            return Ok(p);
        }
        let kept: Vec<usize> = (0..input.len()).filter(|q| !self.traced.contains(q)).collect();
        embed_operator(&p, &kept, input)
    }
}

/// Real combination `Σ_k a_k M_k` of wire maps with a common output.
#[derive(Clone, Debug)]
pub struct LinearMap {
    parts: Vec<(f64, WireMap)>,
}

impl LinearMap {
    pub fn new(parts: Vec<(f64, WireMap)>) -> Self {
        Self { parts }
    }

    pub fn single(map: WireMap) -> Self {
        Self::new(vec![(1.0, map)])
    }

    fn key(&self) -> Vec<(u64, WireMap)> {
        self.parts.iter().map(|(a, m)| (a.to_bits(), m.clone())).collect()
    }

    pub fn output_shape(&self, input: &SubsystemShape) -> Result<SubsystemShape> {
        let first = self
            .parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty linear map".into()))?
            .1
            .output_shape(input)?;
        for (_, m) in &self.parts[1..] {
            if m.output_shape(input)? != first {
                return Err(Error::InvalidParameter("linear map parts disagree on output".into()));
            }
        }
        Ok(first)
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let mut out: Option<ComplexMatrix> = None;
        for (a, m) in &self.parts {
            let y = m.apply(x)?;
            match out.as_mut() {
                Some(acc) => acc.add_scaled(*a, &y),
                None => out = Some(y.scale(*a)),
            }
        }
        out.ok_or_else(|| Error::InvalidParameter("empty linear map".into()))
    }

    pub fn adjoint(&self, y: &ComplexMatrix, input: &SubsystemShape) -> Result<ComplexMatrix> {
        let mut out = ComplexMatrix::zeros(input.clone());
        for (a, m) in &self.parts {
            out.add_scaled(*a, &m.adjoint(y, input)?);
        }
        Ok(out)
    }
}

/// `Σ_t s_t M_t(L_{b_t}) = 0`.
#[derive(Clone, Debug, Default)]
pub struct MatrixEquality {
    terms: Vec<(BlockId, f64, Arc<LinearMap>)>,
}

impl MatrixEquality {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `scale · map(L_block)`, merging with an earlier term on the same
    /// block and map.
    pub fn push(&mut self, block: BlockId, scale: f64, map: &Arc<LinearMap>) {
        if let Some(t) = self
            .terms
            .iter_mut()
            .find(|t| t.0 == block && Arc::ptr_eq(&t.2, map))
        {
            t.1 += scale;
        } else {
            self.terms.push((block, scale, map.clone()));
        }
    }

    pub fn terms(&self) -> &[(BlockId, f64, Arc<LinearMap>)] {
        &self.terms
    }

    /// Evaluates the left-hand side on explicit blocks.
    pub fn evaluate(&self, blocks: &[ComplexMatrix]) -> Result<ComplexMatrix> {
        let mut out: Option<ComplexMatrix> = None;
        for (b, s, m) in &self.terms {
            let y = m.apply(&blocks[b.0])?;
            match out.as_mut() {
                Some(acc) => acc.add_scaled(*s, &y),
                None => out = Some(y.scale(*s)),
            }
        }
        out.ok_or_else(|| Error::InvalidParameter("empty matrix equality".into()))
    }
}

/// Where the test matrices `T_r` come from.
#[derive(Clone, Debug)]
pub enum RowSpace {
    /// Blocks live in this subspace; rows span the images of its basis.
    Subspace(Arc<Subspace>),
    /// Unrestricted Hermitian blocks; rows span all Hermitian outputs.
    Full,
}

type Signature = Vec<Vec<(u64, WireMap)>>;

/// Lowers matrix equalities to scalar model rows, sharing coefficient
/// matrices between equalities that use the same maps.
pub struct RowLowering {
    space: RowSpace,
    input: SubsystemShape,
    cache: HashMap<Signature, Arc<Vec<Vec<Arc<ComplexMatrix>>>>>,
}

impl RowLowering {
    pub fn new(space: RowSpace, input: SubsystemShape) -> Self {
        Self {
            space,
            input,
            cache: HashMap::new(),
        }
    }

    /// Orthonormal basis of `span{M(B_c)}` over the given maps.
    fn image_basis(&self, maps: &[Arc<LinearMap>], out: &SubsystemShape) -> Result<Vec<ComplexMatrix>> {
        let sub = match &self.space {
            RowSpace::Full => return Ok(hermitian_basis(out)),
            RowSpace::Subspace(s) => s,
        };
        let mut images: Vec<DMatrix<f64>> = Vec::new();
        for m in maps {
            for b in sub.basis() {
                let x = ComplexMatrix::from_real(b, self.input.clone())?;
                let y = m.apply(&x)?;
                images.push(y.data().map(|z| z.re));
            }
        }
        let k = images.len();
        let gram = DMatrix::<f64>::from_fn(k, k, |a, b| images[a].dot(&images[b]));
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let mut order: Vec<usize> = (0..k).filter(|&r| eig.eigenvalues[r] > SPAN_TOL * top).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        order
            .iter()
            .map(|&r| {
                let u = eig.eigenvectors.column(r);
                let norm = eig.eigenvalues[r].sqrt();
                let mut t = DMatrix::<f64>::zeros(out.total(), out.total());
                for (c, img) in images.iter().enumerate() {
                    t += img * (u[c] / norm);
                }
                // symmetrize away rounding so coefficients pass the Hermitian check
                let t = (&t + t.transpose()) * 0.5;
                ComplexMatrix::from_real(&t, out.clone())
            })
            .collect()
    }

    /// Appends the rows of `eq` to `model`; returns how many were added.
    pub fn lower(&mut self, model: &mut ConicModel, eq: &MatrixEquality) -> Result<usize> {
        let mut maps: Vec<Arc<LinearMap>> = Vec::new();
        for (_, _, m) in eq.terms() {
            if !maps.iter().any(|x| Arc::ptr_eq(x, m) || x.key() == m.key()) {
                maps.push(m.clone());
            }
        }
        maps.sort_by_key(|m| m.key());
        let signature: Signature = maps.iter().map(|m| m.key()).collect();
        let coeffs = match self.cache.get(&signature) {
            Some(c) => c.clone(),
            None => {
                let out = maps[0].output_shape(&self.input)?;
                for m in &maps[1..] {
                    if m.output_shape(&self.input)? != out {
                        return Err(Error::InvalidParameter(
                            "maps in one equality must share their output".into(),
                        ));
                    }
                }
                let rows = self.image_basis(&maps, &out)?;
                let per_map = maps
                    .iter()
                    .map(|m| {
                        rows.iter()
                            .map(|t| m.adjoint(t, &self.input).map(Arc::new))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                let c = Arc::new(per_map);
                self.cache.insert(signature.clone(), c.clone());
                c
            }
        };
        let slots: Vec<usize> = eq
            .terms()
            .iter()
            .map(|(_, _, m)| {
                let key = m.key();
                signature
                    .iter()
                    .position(|k| *k == key)
                    .expect("map is in the signature")
            })
            .collect();
        let n_rows = coeffs.first().map_or(0, |c| c.len());
        for r in 0..n_rows {
            let mut f = Functional::new();
            for ((b, s, _), &k) in eq.terms().iter().zip(&slots) {
                f.push(*b, *s, coeffs[k][r].clone());
            }
            if !f.is_empty() {
                model.add_equality(f, 0.0)?;
            }
        }
        Ok(n_rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_hermitian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wire_map_adjoint_identity() {
        let shape = SubsystemShape::new(vec![2, 3, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for map in [
            WireMap::identity(),
            WireMap::trace(vec![0]),
            WireMap::trace(vec![0, 2]),
            WireMap {
                traced: vec![1],
                prescripted: vec![0],
            },
            WireMap {
                traced: Vec::new(),
                prescripted: vec![0, 2],
            },
        ] {
            let out = map.output_shape(&shape).unwrap();
            let x = random_hermitian(shape.dims(), &mut rng);
            let y = random_hermitian(out.dims(), &mut rng);
            let lhs = y.inner_re(&map.apply(&x).unwrap());
            let rhs = map.adjoint(&y, &shape).unwrap().inner_re(&x);
            assert!((lhs - rhs).abs() < 1e-10, "{map:?}");
        }
    }

    #[test]
    fn lowered_rows_reproduce_the_matrix_equality() {
        // (id − prescript_0)(L_0 − 2 L_1) = 0
        let shape = SubsystemShape::new(vec![2, 2]).unwrap();
        let map = Arc::new(LinearMap::new(vec![
            (1.0, WireMap::identity()),
            (
                -1.0,
                WireMap {
                    traced: Vec::new(),
                    prescripted: vec![0],
                },
            ),
        ]));
        let mut eq = MatrixEquality::new();
        eq.push(BlockId(0), 1.0, &map);
        eq.push(BlockId(1), -2.0, &map);
        let mut model = ConicModel::new();
        model.add_psd_block(4);
        model.add_psd_block(4);
        let mut low = RowLowering::new(RowSpace::Full, shape.clone());
        let rows = low.lower(&mut model, &eq).unwrap();
        assert_eq!(rows, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let blocks = vec![
            random_hermitian(shape.dims(), &mut rng),
            random_hermitian(shape.dims(), &mut rng),
        ];
        let lhs = eq.evaluate(&blocks).unwrap();
        let row_norm: f64 = model
            .equalities()
            .iter()
            .map(|e| e.functional.evaluate(&blocks).powi(2))
            .sum::<f64>()
            .sqrt();
        // rows are coordinates of the left-hand side in an orthonormal basis
        assert!((row_norm - lhs.frobenius_norm()).abs() < 1e-10);
    }
}
