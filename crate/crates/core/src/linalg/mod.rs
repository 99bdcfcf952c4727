//! Dense multi-subsystem complex linear algebra.
//!
//! Every operator is a square [`ComplexMatrix`] tagged with a
//! [`SubsystemShape`]: the ordered list of elementary subsystem dimensions.
//! Linear indices are row-major over the subsystems, so the first subsystem
//! is the most significant digit.

mod choi;
mod gellmann;
mod haar;
pub mod qmx;

pub use choi::{link_product, von_neumann_choi, LabeledChoi};
pub use gellmann::su_basis;
pub use haar::{
    haar_unitary, haar_unitary_with, random_density, random_hermitian, random_matrix,
};

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Ordered list of elementary subsystem dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsystemShape {
    dims: Vec<usize>,
}

impl SubsystemShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidShape(format!(
                "subsystem {pos} has dimension 0"
            )));
        }
        Ok(Self { dims })
    }

    /// Shape with a single subsystem.
    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    /// `count` copies of a `dim`-dimensional subsystem.
    pub fn uniform(dim: usize, count: usize) -> Result<Self> {
        Self::new(vec![dim; count])
    }

    /// Shape of a 1x1 operator: no subsystems at all.
    pub fn scalar() -> Self {
        Self { dims: Vec::new() }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Concatenation `self ⊗ other`.
    pub fn concat(&self, other: &SubsystemShape) -> SubsystemShape {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SubsystemShape { dims }
    }

    /// Checks a subset of positions and returns it sorted.
    pub fn check_subset(&self, subset: &[usize]) -> Result<Vec<usize>> {
        let mut seen = BTreeSet::new();
        for &p in subset {
            if p >= self.dims.len() {
                return Err(Error::InvalidSubsystem {
                    position: p,
                    count: self.dims.len(),
                });
            }
            if !seen.insert(p) {
                return Err(Error::RepeatedSubsystem(p));
            }
        }
        Ok(seen.into_iter().collect())
    }

    fn complement(&self, sorted_subset: &[usize]) -> Vec<usize> {
        (0..self.dims.len())
            .filter(|p| sorted_subset.binary_search(p).is_err())
            .collect()
    }

    fn select(&self, positions: &[usize]) -> SubsystemShape {
        SubsystemShape {
            dims: positions.iter().map(|&p| self.dims[p]).collect(),
        }
    }

    /// Linear-index contributions of every multi-index over `positions`,
    /// enumerated row-major in the order the positions are listed.
    pub(crate) fn offsets(&self, positions: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut out = vec![0usize];
        for &p in positions {
            let mut next = Vec::with_capacity(out.len() * self.dims[p]);
            for &base in &out {
                for v in 0..self.dims[p] {
                    next.push(base + v * strides[p]);
                }
            }
            out = next;
        }
        out
    }

    /// Digits of a linear index.
    pub fn unravel(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            digits[k] = index % self.dims[k];
            index /= self.dims[k];
        }
        digits
    }

    pub fn ravel(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&v, &d)| acc * d + v)
    }
}

impl fmt::Display for SubsystemShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", parts.join("⊗"))
    }
}

/// Dense square complex matrix on a tensor product of subsystems.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    data: DMatrix<C64>,
    shape: SubsystemShape,
}

impl ComplexMatrix {
    pub fn new(data: DMatrix<C64>, shape: SubsystemShape) -> Result<Self> {
        let n = shape.total();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: data.nrows().max(data.ncols()),
            });
        }
        Ok(Self { data, shape })
    }

    /// Single-subsystem matrix from a square `DMatrix`.
    pub fn from_dmatrix(data: DMatrix<C64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::InvalidShape(format!(
                "{}x{} matrix is not square",
                data.nrows(),
                data.ncols()
            )));
        }
        let shape = SubsystemShape::single(data.nrows())?;
        Self::new(data, shape)
    }

    /// Row-major complex entries.
    pub fn from_rows(rows: &[Vec<C64>], shape: SubsystemShape) -> Result<Self> {
        let n = shape.total();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rows.len(),
            });
        }
        Ok(Self {
            data: DMatrix::from_fn(n, n, |r, c| rows[r][c]),
            shape,
        })
    }

    pub fn from_real(data: &DMatrix<f64>, shape: SubsystemShape) -> Result<Self> {
        Self::new(data.map(|x| C64::new(x, 0.0)), shape)
    }

    pub fn from_fn(shape: SubsystemShape, f: impl FnMut(usize, usize) -> C64) -> Self {
        let n = shape.total();
        Self {
            data: DMatrix::from_fn(n, n, f),
            shape,
        }
    }

    pub fn zeros(shape: SubsystemShape) -> Self {
        let n = shape.total();
        Self {
            data: DMatrix::zeros(n, n),
            shape,
        }
    }

    pub fn identity(shape: SubsystemShape) -> Self {
        let n = shape.total();
        Self {
            data: DMatrix::identity(n, n),
            shape,
        }
    }

    /// Diagonal matrix from real entries.
    pub fn diagonal(values: &[f64], shape: SubsystemShape) -> Result<Self> {
        let n = shape.total();
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: values.len(),
            });
        }
        let mut m = Self::zeros(shape);
        for (k, &v) in values.iter().enumerate() {
            m.data[(k, k)] = C64::new(v, 0.0);
        }
        Ok(m)
    }

    /// Rank-one projector `|v⟩⟨v|`.
    pub fn outer(v: &[C64], shape: SubsystemShape) -> Result<Self> {
        let n = shape.total();
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
        Ok(Self::from_fn(shape, |r, c| v[r] * v[c].conj()))
    }

    pub fn shape(&self) -> &SubsystemShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<C64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[(row, col)] = value;
    }

    /// Same entries, different subsystem decomposition of the same total.
    pub fn reshaped(&self, shape: SubsystemShape) -> Result<Self> {
        Self::new(self.data.clone(), shape)
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.adjoint(),
            shape: self.shape.clone(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            data: self.data.transpose(),
            shape: self.shape.clone(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            data: self.data.map(|z| z.conj()),
            shape: self.shape.clone(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            data: self.data.map(|z| z * s),
            shape: self.shape.clone(),
        }
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self {
            data: self.data.map(|z| z * s),
            shape: self.shape.clone(),
        }
    }

    /// `self += s * other`; shapes must have equal totals.
    pub fn add_scaled(&mut self, s: f64, other: &ComplexMatrix) {
        assert_eq!(self.dim(), other.dim(), "add_scaled dimension mismatch");
        self.data.zip_apply(&other.data, |a, b| *a += b * s);
    }

    /// Hilbert–Schmidt inner product `tr(A† B)`.
    pub fn inner(&self, other: &ComplexMatrix) -> C64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Real part of the Hilbert–Schmidt inner product.
    pub fn inner_re(&self, other: &ComplexMatrix) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius distance to another matrix of the same size.
    pub fn distance(&self, other: &ComplexMatrix) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `‖A − A†‖_F`.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for c in 0..n {
            for r in 0..n {
                acc += (self.data[(r, c)] - self.data[(c, r)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self {
            data: (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0),
            shape: self.shape.clone(),
        }
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues_hermitian(&self) -> Vec<f64> {
        let mut all = Vec::with_capacity(self.dim());
        let h = self.hermitian_part();
        for component in h.connected_components() {
            let sub = DMatrix::from_fn(component.len(), component.len(), |r, c| {
                h.data[(component[r], component[c])]
            });
            all.extend(SymmetricEigen::new(sub).eigenvalues.iter().copied());
        }
        all.sort_by(f64::total_cmp);
        all
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues_hermitian()
            .first()
            .copied()
            .unwrap_or(f64::INFINITY)
    }

    /// PSD within tolerance: smallest eigenvalue ≥ −tol and Hermitian.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(tol.max(1e-12) * (1.0 + self.max_abs())) && self.min_eigenvalue() >= -tol
    }

    /// Index classes that are connected through nonzero entries. Eigenvalue
    /// computations run per class, so block-diagonal operators stay cheap.
    fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.dim();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for c in 0..n {
            for r in 0..c {
                if self.data[(r, c)] != ZERO || self.data[(c, r)] != ZERO {
                    let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for k in 0..n {
            let root = find(&mut parent, k);
            groups.entry(root).or_default().push(k);
        }
        groups.into_values().collect()
    }

    /// `‖U†U − I‖_F`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim();
        let prod = self.data.adjoint() * &self.data;
        (prod - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim(), other.dim(), "matmul dimension mismatch");
        ComplexMatrix {
            data: &self.data * &other.data,
            shape: self.shape.clone(),
        }
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data * &other.data - &other.data * &self.data,
            shape: self.shape.clone(),
        }
    }

    /// `A X A†`.
    pub fn conjugate_by(&self, unitary: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &unitary.data * &self.data * unitary.data.adjoint(),
            shape: self.shape.clone(),
        }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data + &rhs.data,
            shape: self.shape.clone(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data - &rhs.data,
            shape: self.shape.clone(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Kronecker product; the result shape concatenates both shapes.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix {
        data: a.data.kronecker(&b.data),
        shape: a.shape.concat(&b.shape),
    }
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[ComplexMatrix]) -> ComplexMatrix {
    let mut acc = ComplexMatrix::identity(SubsystemShape::scalar());
    for f in factors {
        acc = kron(&acc, f);
    }
    acc
}

/// Traces out the subsystems in `subset`; the kept subsystems keep their order.
pub fn partial_trace(m: &ComplexMatrix, subset: &[usize]) -> Result<ComplexMatrix> {
    let traced = m.shape.check_subset(subset)?;
    let kept = m.shape.complement(&traced);
    let ko = m.shape.offsets(&kept);
    let to = m.shape.offsets(&traced);
    let out_shape = m.shape.select(&kept);
    let n = ko.len();
    let mut data = DMatrix::<C64>::zeros(n, n);
    for (c, &kc) in ko.iter().enumerate() {
        for (r, &kr) in ko.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &to {
                acc += m.data[(kr + t, kc + t)];
            }
            data[(r, c)] = acc;
        }
    }
    Ok(ComplexMatrix {
        data,
        shape: out_shape,
    })
}

/// Transposes the subsystems in `subset` and leaves the rest untouched.
pub fn partial_transpose(m: &ComplexMatrix, subset: &[usize]) -> Result<ComplexMatrix> {
    let flipped = m.shape.check_subset(subset)?;
    let kept = m.shape.complement(&flipped);
    let ko = m.shape.offsets(&kept);
    let fo = m.shape.offsets(&flipped);
    let mut data = DMatrix::<C64>::zeros(m.dim(), m.dim());
    for &kc in &ko {
        for &kr in &ko {
            for &fc in &fo {
                for &fr in &fo {
                    data[(kr + fr, kc + fc)] = m.data[(kr + fc, kc + fr)];
                }
            }
        }
    }
    Ok(ComplexMatrix {
        data,
        shape: m.shape.clone(),
    })
}

/// Reorders subsystems: position `p` of the result holds subsystem `perm[p]`
/// of the input.
pub fn permute_subsystems(m: &ComplexMatrix, perm: &[usize]) -> Result<ComplexMatrix> {
    let k = m.shape.len();
    let mut seen = vec![false; k];
    if perm.len() != k {
        return Err(Error::NotAPermutation(k));
    }
    for &p in perm {
        if p >= k || seen[p] {
            return Err(Error::NotAPermutation(k));
        }
        seen[p] = true;
    }
    let map = m.shape.offsets(perm);
    let n = m.dim();
    let data = DMatrix::from_fn(n, n, |r, c| m.data[(map[r], map[c])]);
    Ok(ComplexMatrix {
        data,
        shape: m.shape.select(perm),
    })
}

/// Inverse of a permutation given as a slice.
pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (p, &q) in perm.iter().enumerate() {
        inv[q] = p;
    }
    inv
}

/// Replaces the subsystems in `subset` by their normalized identity, in place:
/// `(1_S / dim S) ⊗ tr_S M` with the original subsystem order preserved.
pub fn prescript(m: &ComplexMatrix, subset: &[usize]) -> Result<ComplexMatrix> {
    let sel = m.shape.check_subset(subset)?;
    if sel.is_empty() {
        return Ok(m.clone());
    }
    let kept = m.shape.complement(&sel);
    let ko = m.shape.offsets(&kept);
    let so = m.shape.offsets(&sel);
    let norm = 1.0 / so.len() as f64;
    let mut data = DMatrix::<C64>::zeros(m.dim(), m.dim());
    for &kc in &ko {
        for &kr in &ko {
            let mut acc = ZERO;
            for &s in &so {
                acc += m.data[(kr + s, kc + s)];
            }
            let v = acc * norm;
            for &s in &so {
                data[(kr + s, kc + s)] = v;
            }
        }
    }
    Ok(ComplexMatrix {
        data,
        shape: m.shape.clone(),
    })
}

/// Embeds an operator acting on the listed positions of `shape` into the
/// full space, tensored with identity on the other positions.
pub fn embed_operator(
    op: &ComplexMatrix,
    positions: &[usize],
    shape: &SubsystemShape,
) -> Result<ComplexMatrix> {
    let sorted = shape.check_subset(positions)?;
    let expected: Vec<usize> = positions.iter().map(|&p| shape.dims()[p]).collect();
    if op.shape.dims() != expected.as_slice() {
        return Err(Error::InvalidShape(format!(
            "operator shape {} does not match target positions {:?}",
            op.shape, positions
        )));
    }
    let rest = shape.complement(&sorted);
    let po = shape.offsets(positions);
    let ro = shape.offsets(&rest);
    let n = shape.total();
    let mut data = DMatrix::<C64>::zeros(n, n);
    for &base in &ro {
        for (c, &oc) in po.iter().enumerate() {
            for (r, &or) in po.iter().enumerate() {
                data[(base + or, base + oc)] = op.data[(r, c)];
            }
        }
    }
    Ok(ComplexMatrix {
        data,
        shape: shape.clone(),
    })
}

/// `|k⟩⟨k|` on a `dim`-dimensional system.
pub fn basis_projector(dim: usize, k: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(SubsystemShape { dims: vec![dim] });
    m.data[(k, k)] = ONE;
    m
}
