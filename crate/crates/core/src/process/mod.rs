//! N-partite process matrices.
//!
//! Wires are ordered `A_I^1, A_O^1, …, A_I^N, A_O^N`: party `p` (0-based)
//! owns positions `2p` (input) and `2p + 1` (output).

mod parity;

pub use parity::{qubit_parity_constraints, QubitParityConstraint};

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{prescript, ComplexMatrix, SubsystemShape};
use crate::strategies::ChoiBlocks;

/// Equality residual tolerance used when no tolerance is given.
pub const DEFAULT_EQUALITY_TOL: f64 = 1e-7;
/// Accepted negative slack on the smallest eigenvalue by default.
pub const DEFAULT_EIGENVALUE_TOL: f64 = 1e-9;

pub fn input_wire(party: usize) -> usize {
    2 * party
}

pub fn output_wire(party: usize) -> usize {
    2 * party + 1
}

/// One signed prescript monomial of the expanded projector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PrescriptTerm {
    pub coefficient: i64,
    /// Sorted wire positions replaced by their normalized identity.
    pub subset: Vec<usize>,
}

impl PrescriptTerm {
    /// Parties whose output wire is in the subset.
    pub fn output_parties(&self) -> Vec<usize> {
        self.subset
            .iter()
            .filter(|&&w| w % 2 == 1)
            .map(|&w| w / 2)
            .collect()
    }

    /// Parties whose input wire is in the subset.
    pub fn input_parties(&self) -> Vec<usize> {
        self.subset
            .iter()
            .filter(|&&w| w % 2 == 0)
            .map(|&w| w / 2)
            .collect()
    }
}

/// Expands `1 − ∏_p (1 − A_O^p + A_I^p A_O^p) + ∏_p A_I^p A_O^p` into canonical
/// prescript terms.
///
/// Each party contributes one of three factors, so the product has `3^N`
/// monomials; the all-ones monomial cancels the leading `1` and the
/// all-`A_I A_O` monomial cancels the trailing product, leaving `3^N − 2`.
pub fn lv_expand(n: usize) -> Vec<PrescriptTerm> {
    assert!(n >= 1, "lv_expand needs N >= 1");
    let mut acc: HashMap<Vec<usize>, i64> = HashMap::new();
    *acc.entry(Vec::new()).or_default() += 1;
    *acc.entry((0..2 * n).collect()).or_default() += 1;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let mut sign = -1i64;
        let mut subset = Vec::new();
        for p in 0..n {
            match c % 3 {
                0 => {}
                1 => {
                    sign = -sign;
                    subset.push(output_wire(p));
                }
                _ => {
                    subset.push(input_wire(p));
                    subset.push(output_wire(p));
                }
            }
            c /= 3;
        }
        *acc.entry(subset).or_default() += sign;
    }
    let mut terms: Vec<PrescriptTerm> = acc
        .into_iter()
        .filter(|(_, c)| *c != 0)
        .map(|(subset, coefficient)| PrescriptTerm {
            coefficient,
            subset,
        })
        .collect();
    terms.sort_by(|a, b| (a.subset.len(), &a.subset).cmp(&(b.subset.len(), &b.subset)));
    terms
}

/// Cached [`lv_expand`]; the cache is write-once per `N`.
pub fn lv_terms(n: usize) -> Arc<Vec<PrescriptTerm>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<PrescriptTerm>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("lv cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(lv_expand(n)))
        .clone()
}

fn parties_of(shape: &SubsystemShape) -> Result<usize> {
    let k = shape.len();
    if k == 0 || !k.is_multiple_of(2) {
        return Err(Error::InvalidShape(format!(
            "process operators need an even, positive number of wires, got {k}"
        )));
    }
    Ok(k / 2)
}

/// `Σ_t c_t · prescript(W, S_t)`.
pub fn lv_apply(w: &ComplexMatrix, terms: &[PrescriptTerm]) -> Result<ComplexMatrix> {
    let parties = parties_of(w.shape())?;
    let mut out = ComplexMatrix::zeros(w.shape().clone());
    for t in terms {
        if t.subset.iter().any(|&p| p >= 2 * parties) {
            return Err(Error::InvalidSubsystem {
                position: *t.subset.iter().max().expect("nonempty"),
                count: 2 * parties,
            });
        }
        out.add_scaled(t.coefficient as f64, &prescript(w, &t.subset)?);
    }
    Ok(out)
}

/// Applies the projector to `W` with its own party count.
pub fn lv_project(w: &ComplexMatrix) -> Result<ComplexMatrix> {
    let parties = parties_of(w.shape())?;
    lv_apply(w, &lv_terms(parties))
}

/// The projector restricted to operators that are diagonal on every output
/// wire, `W = Σ_j |j⟩⟨j| ⊗ W_j`, acting on the family `{W_j}` directly.
///
/// `family[ravel(j)]` lives on `A_I^1 ⊗ … ⊗ A_I^N` with output dimension `d`
/// on every wire. A prescript on `A_O^p` averages the family over `j_p`; a
/// prescript on `A_I^p` is the ordinary prescript on position `p`.
pub fn lv_apply_classical(
    family: &[ComplexMatrix],
    d: usize,
    n: usize,
    terms: &[PrescriptTerm],
) -> Result<Vec<ComplexMatrix>> {
    let labels = SubsystemShape::uniform(d, n)?;
    if family.len() != labels.total() {
        return Err(Error::DimensionMismatch {
            expected: labels.total(),
            found: family.len(),
        });
    }
    let shape = family[0].shape().clone();
    if shape.len() != n {
        return Err(Error::InvalidShape(format!(
            "family members need {n} input wires, got {}",
            shape.len()
        )));
    }
    let mut out: Vec<ComplexMatrix> = family
        .iter()
        .map(|_| ComplexMatrix::zeros(shape.clone()))
        .collect();
    let mut cache: HashMap<Vec<usize>, Vec<ComplexMatrix>> = HashMap::new();
    for t in terms {
        let inputs = t.input_parties();
        let outputs = t.output_parties();
        if !cache.contains_key(&inputs) {
            let pre = family
                .iter()
                .map(|w| prescript(w, &inputs))
                .collect::<Result<Vec<_>>>()?;
            cache.insert(inputs.clone(), pre);
        }
        let pre = &cache[&inputs];
        let weight = t.coefficient as f64 / d.pow(outputs.len() as u32) as f64;
        let strides = labels.strides();
        let group = labels.offsets(&outputs);
        for (jp, target) in out.iter_mut().enumerate() {
            let digits = labels.unravel(jp);
            let base: usize = (0..n)
                .filter(|p| !outputs.contains(p))
                .map(|p| digits[p] * strides[p])
                .sum();
            for &g in &group {
                target.add_scaled(weight, &pre[base + g]);
            }
        }
    }
    Ok(out)
}

/// An operator on `A_I^1 ⊗ A_O^1 ⊗ … ⊗ A_I^N ⊗ A_O^N` claimed to be a valid
/// process matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    matrix: ComplexMatrix,
    parties: usize,
}

impl ProcessMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let parties = parties_of(matrix.shape())?;
        Ok(Self { matrix, parties })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    /// `(dim A_I^p, dim A_O^p)` per party.
    pub fn wire_dims(&self) -> Vec<(usize, usize)> {
        let dims = self.matrix.shape().dims();
        (0..self.parties)
            .map(|p| (dims[input_wire(p)], dims[output_wire(p)]))
            .collect()
    }

    /// `∏_p dim A_O^p`.
    pub fn expected_trace(&self) -> f64 {
        self.wire_dims().iter().map(|&(_, o)| o as f64).product()
    }

    pub fn validate(&self, tol: f64) -> Result<ValidityReport> {
        is_process_matrix(&self.matrix, tol)
    }
}

/// Residuals of the three process-matrix conditions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidityReport {
    /// `‖W − L_V(W)‖_F`.
    pub projector_residual: f64,
    /// `|tr W − ∏ dim A_O|`.
    pub trace_residual: f64,
    /// Smallest eigenvalue of the Hermitian part.
    pub min_eigenvalue: f64,
    /// `‖W − W†‖_F`.
    pub hermiticity_residual: f64,
    /// Bound on the projector, trace and Hermiticity residuals.
    pub tolerance: f64,
    /// Accepted negative slack on `min_eigenvalue`.
    pub eigenvalue_tolerance: f64,
    pub valid: bool,
}

impl ValidityReport {
    /// `max(0, −λ_min)`.
    pub fn psd_residual(&self) -> f64 {
        (-self.min_eigenvalue).max(0.0)
    }
}

/// Checks `W = L_V(W)`, `tr W = ∏ dim A_O^p` and `W ⪰ 0`, each to `tol`.
pub fn is_process_matrix(w: &ComplexMatrix, tol: f64) -> Result<ValidityReport> {
    is_process_matrix_with(w, tol, tol)
}

/// [`is_process_matrix`] with separate bounds for the equality residuals and
/// the eigenvalue slack; [`DEFAULT_EQUALITY_TOL`] and
/// [`DEFAULT_EIGENVALUE_TOL`] are the defaults.
pub fn is_process_matrix_with(w: &ComplexMatrix, tol: f64, eigenvalue_tol: f64) -> Result<ValidityReport> {
    let pm = ProcessMatrix::new(w.clone())?;
    let projected = lv_apply(w, &lv_terms(pm.parties))?;
    let projector_residual = w.distance(&projected);
    let trace_residual = (w.trace() - crate::linalg::C64::new(pm.expected_trace(), 0.0)).norm();
    let min_eigenvalue = w.min_eigenvalue();
    let hermiticity_residual = w.hermiticity_residual();
    let valid = projector_residual <= tol
        && trace_residual <= tol
        && min_eigenvalue >= -eigenvalue_tol
        && hermiticity_residual <= tol;
    Ok(ValidityReport {
        projector_residual,
        trace_residual,
        min_eigenvalue,
        hermiticity_residual,
        tolerance: tol,
        eigenvalue_tolerance: eigenvalue_tol,
        valid,
    })
}

/// Embeds a family `{W_j}` on the input wires as the process matrix
/// `Σ_j |j⟩⟨j|_{A_O} ⊗ W_j`, interleaving input and output wires.
pub fn classical_process(family: &[ComplexMatrix], d: usize, n: usize) -> Result<ProcessMatrix> {
    let labels = SubsystemShape::uniform(d, n)?;
    if family.len() != labels.total() {
        return Err(Error::DimensionMismatch {
            expected: labels.total(),
            found: family.len(),
        });
    }
    let in_dims = family[0].shape().dims().to_vec();
    if in_dims.len() != n {
        return Err(Error::InvalidShape(format!(
            "family members need {n} input wires, got {}",
            in_dims.len()
        )));
    }
    let mut dims = Vec::with_capacity(2 * n);
    for &di in &in_dims {
        dims.push(di);
        dims.push(d);
    }
    let shape = SubsystemShape::new(dims)?;
    let in_pos: Vec<usize> = (0..n).map(input_wire).collect();
    let out_pos: Vec<usize> = (0..n).map(output_wire).collect();
    let in_off = shape.offsets(&in_pos);
    let out_off = shape.offsets(&out_pos);
    let mut w = ComplexMatrix::zeros(shape);
    for (j, wj) in family.iter().enumerate() {
        let o = out_off[j];
        for (c, &ic) in in_off.iter().enumerate() {
            for (r, &ir) in in_off.iter().enumerate() {
                w.set(ir + o, ic + o, wj.get(r, c));
            }
        }
    }
    ProcessMatrix::new(w)
}

/// Splits an operator that is diagonal on the output wires back into its
/// family `{W_j}`; off-diagonal output entries are ignored.
pub fn classical_family(w: &ProcessMatrix) -> Result<Vec<ComplexMatrix>> {
    let shape = w.matrix().shape();
    let n = w.parties();
    let in_pos: Vec<usize> = (0..n).map(input_wire).collect();
    let out_pos: Vec<usize> = (0..n).map(output_wire).collect();
    let in_shape = SubsystemShape::new(in_pos.iter().map(|&p| shape.dims()[p]).collect())?;
    let in_off = shape.offsets(&in_pos);
    let out_off = shape.offsets(&out_pos);
    Ok(out_off
        .iter()
        .map(|&o| {
            ComplexMatrix::from_fn(in_shape.clone(), |r, c| {
                w.matrix().get(in_off[r] + o, in_off[c] + o)
            })
        })
        .collect())
}

/// Storage process matrix `W = Σ_j |j⟩⟨j|_{A_O} ⊗ (1/d) tr_{X_in} Σ_i L_{i,j}`.
pub fn assemble_storage(blocks: &ChoiBlocks) -> Result<ProcessMatrix> {
    classical_process(&blocks.storage_family(), blocks.d(), blocks.n())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, kron_all, random_density, random_hermitian, C64};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_shape(n: usize) -> SubsystemShape {
        SubsystemShape::uniform(2, 2 * n).unwrap()
    }

    #[test]
    fn single_party_projector_is_output_prescript() {
        assert_eq!(
            lv_expand(1),
            vec![PrescriptTerm {
                coefficient: 1,
                subset: vec![1]
            }]
        );
    }

    #[test]
    fn coefficients_sum_to_one() {
        for n in 1..=5 {
            let terms = lv_expand(n);
            assert_eq!(terms.iter().map(|t| t.coefficient).sum::<i64>(), 1);
            assert!(terms.len() <= 3usize.pow(n as u32) + 1);
            assert_eq!(terms.len(), 3usize.pow(n as u32) - 2);
        }
    }

    #[test]
    fn cache_returns_same_terms() {
        assert_eq!(*lv_terms(3), lv_expand(3));
        assert!(Arc::ptr_eq(&lv_terms(2), &lv_terms(2)));
    }

    #[test]
    fn identity_is_fixed() {
        for n in 1..=3 {
            let s = qubit_shape(n);
            let id = ComplexMatrix::identity(s.clone()).scale(1.0 / s.total() as f64);
            assert!(lv_project(&id).unwrap().distance(&id) < 1e-14);
        }
    }

    #[test]
    fn state_tensor_identity_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let rho = random_density(&[3], &mut rng);
        let w = kron(&rho, &ComplexMatrix::identity(SubsystemShape::single(2).unwrap()));
        assert!(lv_project(&w).unwrap().distance(&w) < 1e-13);
        let report = is_process_matrix(&w, 1e-9).unwrap();
        assert!(report.valid, "{report:?}");
    }

    #[test]
    fn idempotent_on_random_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let m = random_hermitian(&[2, 2, 2, 2], &mut rng);
        let once = lv_project(&m).unwrap();
        let twice = lv_project(&once).unwrap();
        assert!(twice.distance(&once) < 1e-10);
        assert!((once.trace() - m.trace()).norm() < 1e-10);
        assert!(once.is_hermitian(1e-12));
    }

    #[test]
    fn causally_ordered_wiring_is_valid() {
        // 1/d ⊗ J(id: A_O^1 → A_I^2) ⊗ 1, wires (A_I^1, A_O^1, A_I^2, A_O^2)
        let d = 2;
        let id = ComplexMatrix::identity(SubsystemShape::single(d).unwrap());
        let j = crate::linalg::LabeledChoi::unitary(&id, "a_i2", "a_o1").unwrap();
        let chan = crate::linalg::permute_subsystems(j.matrix(), &[1, 0]).unwrap();
        let w = kron_all(&[id.scale(1.0 / d as f64), chan, id.clone()]);
        let w = w.scale(d as f64 * d as f64 / w.trace().re);
        let report = is_process_matrix(&w, 1e-10).unwrap();
        assert!(report.valid, "{report:?}");
        assert!(report.projector_residual < 1e-12);
    }

    #[test]
    fn wrong_trace_is_flagged() {
        let w = ComplexMatrix::identity(qubit_shape(1));
        let report = is_process_matrix(&w, 1e-7).unwrap();
        assert!(!report.valid);
        assert!((report.trace_residual - 2.0).abs() < 1e-12);
        assert!(report.projector_residual < 1e-12);
    }

    #[test]
    fn eigenvalue_slack_has_its_own_bound() {
        let eps = 1e-8;
        let rho = ComplexMatrix::diagonal(&[1.0 + eps, -eps], SubsystemShape::single(2).unwrap()).unwrap();
        let w = kron(&rho, &ComplexMatrix::identity(SubsystemShape::single(2).unwrap()));
        assert!(is_process_matrix(&w, DEFAULT_EQUALITY_TOL).unwrap().valid);
        let strict = is_process_matrix_with(&w, DEFAULT_EQUALITY_TOL, DEFAULT_EIGENVALUE_TOL).unwrap();
        assert!(!strict.valid);
        assert!(strict.projector_residual < 1e-12 && strict.trace_residual < 1e-12);
    }

    #[test]
    fn odd_wire_count_rejected() {
        let w = ComplexMatrix::identity(SubsystemShape::uniform(2, 3).unwrap());
        assert!(lv_project(&w).is_err());
        assert!(is_process_matrix(&w, 1e-7).is_err());
    }

    #[test]
    fn classical_projector_matches_full_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in 1..=3 {
            let family: Vec<ComplexMatrix> = (0..2usize.pow(n as u32))
                .map(|_| random_hermitian(&vec![2; n], &mut rng))
                .collect();
            let full = lv_project(classical_process(&family, 2, n).unwrap().matrix()).unwrap();
            let fam = lv_apply_classical(&family, 2, n, &lv_terms(n)).unwrap();
            let via = classical_process(&fam, 2, n).unwrap();
            assert!(full.distance(via.matrix()) < 1e-12, "N={n}");
        }
    }

    #[test]
    fn classical_family_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let family: Vec<ComplexMatrix> = (0..9).map(|_| random_hermitian(&[3, 3], &mut rng)).collect();
        let w = classical_process(&family, 3, 2).unwrap();
        assert_eq!(w.wire_dims(), vec![(3, 3), (3, 3)]);
        let back = classical_family(&w).unwrap();
        for (a, b) in family.iter().zip(&back) {
            assert!(a.distance(b) < 1e-15);
        }
    }

    #[test]
    fn assembled_identity_blocks() {
        let (d, n) = (2, 2);
        let blocks = ChoiBlocks::from_fn(d, n, |_, _| {
            ComplexMatrix::identity(crate::strategies::block_shape(d, n)).scale(1.0 / 8.0)
        })
        .unwrap();
        let w = assemble_storage(&blocks).unwrap();
        let expect = ComplexMatrix::identity(qubit_shape(2)).scale(0.25);
        assert!(w.matrix().distance(&expect) < 1e-14);
        assert!((w.matrix().trace() - C64::new(4.0, 0.0)).norm() < 1e-12);
        assert!(w.validate(1e-9).unwrap().valid);
    }
}
