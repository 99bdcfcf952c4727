use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{partial_trace, ComplexMatrix};
use crate::strategies::ChoiBlocks;

/// Parity condition for qubit wires with classical outputs:
/// `Σ_j (−1)^{k·j} tr_{X_in, A_I^l : k_l = 0} Σ_i L_{i,j} = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QubitParityConstraint {
    /// Nonzero bitstring, one entry per party.
    pub k: Vec<u8>,
}

impl QubitParityConstraint {
    pub fn parties(&self) -> usize {
        self.k.len()
    }

    /// Parties whose input wire survives the trace.
    pub fn kept_parties(&self) -> Vec<usize> {
        (0..self.k.len()).filter(|&l| self.k[l] == 1).collect()
    }

    /// Block positions traced out: `X_in` (position 0) and every `A_I^l` with
    /// `k_l = 0` (position `l + 1`).
    pub fn traced_block_positions(&self) -> Vec<usize> {
        std::iter::once(0)
            .chain((0..self.k.len()).filter(|&l| self.k[l] == 0).map(|l| l + 1))
            .collect()
    }

    /// Input-wire positions traced out of a family member on `A_I^1 … A_I^N`.
    pub fn traced_family_positions(&self) -> Vec<usize> {
        (0..self.k.len()).filter(|&l| self.k[l] == 0).collect()
    }

    /// `(−1)^{k·j}` for a label string `j ∈ {0,1}^N`.
    pub fn sign(&self, j: &[usize]) -> f64 {
        let dot: usize = self.k.iter().zip(j).map(|(&a, &b)| a as usize * b).sum();
        if dot.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// The constraint's left-hand side evaluated on a stored-state family
    /// `{W_j}` indexed by flat `j`.
    pub fn residual_on_family(&self, family: &[ComplexMatrix]) -> Result<ComplexMatrix> {
        let n = self.k.len();
        if family.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: family.len(),
            });
        }
        let traced = self.traced_family_positions();
        let mut acc: Option<ComplexMatrix> = None;
        for (flat, w) in family.iter().enumerate() {
            let j: Vec<usize> = (0..n).map(|p| (flat >> (n - 1 - p)) & 1).collect();
            let part = partial_trace(w, &traced)?;
            match acc.as_mut() {
                Some(a) => a.add_scaled(self.sign(&j), &part),
                None => acc = Some(part.scale(self.sign(&j))),
            }
        }
        Ok(acc.expect("family is nonempty"))
    }

    /// Same left-hand side on the block family (up to the factor `1/d`
    /// relating `Σ_i L_{i,j}` to `W_j`).
    pub fn residual(&self, blocks: &ChoiBlocks) -> Result<ComplexMatrix> {
        if blocks.d() != 2 {
            return Err(Error::NonQubitWires(vec![blocks.d(); blocks.n() + 1]));
        }
        Ok(self.residual_on_family(&blocks.storage_family())?.scale(2.0))
    }
}

/// The `2^N − 1` parity constraints, one per nonzero `k ∈ {0,1}^N`.
pub fn qubit_parity_constraints(n: usize, wire_dims: &[usize]) -> Result<Vec<QubitParityConstraint>> {
    if n < 1 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    if wire_dims.iter().any(|&d| d != 2) {
        return Err(Error::NonQubitWires(wire_dims.to_vec()));
    }
    Ok((1..(1usize << n))
        .map(|code| QubitParityConstraint {
            k: (0..n).map(|p| ((code >> (n - 1 - p)) & 1) as u8).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_hermitian, SubsystemShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts() {
        for n in 1..=5 {
            assert_eq!(qubit_parity_constraints(n, &vec![2; 2 * n]).unwrap().len(), (1 << n) - 1);
        }
        assert!(matches!(
            qubit_parity_constraints(2, &[2, 3, 2, 2]),
            Err(Error::NonQubitWires(_))
        ));
    }

    #[test]
    fn single_party_instance() {
        let c = qubit_parity_constraints(1, &[2, 2]).unwrap();
        assert_eq!(c, vec![QubitParityConstraint { k: vec![1] }]);
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let blocks = ChoiBlocks::from_fn(2, 1, |_, _| random_hermitian(&[2, 2], &mut rng)).unwrap();
        let direct = {
            let s0 = partial_trace(&blocks.outcome_sum(0), &[0]).unwrap();
            let s1 = partial_trace(&blocks.outcome_sum(1), &[0]).unwrap();
            &s0 - &s1
        };
        assert!(c[0].residual(&blocks).unwrap().distance(&direct) < 1e-12);
        assert_eq!(c[0].traced_block_positions(), vec![0]);
    }

    #[test]
    fn kept_wires_follow_k() {
        let c = QubitParityConstraint { k: vec![1, 0, 1] };
        assert_eq!(c.kept_parties(), vec![0, 2]);
        assert_eq!(c.traced_block_positions(), vec![0, 2]);
        assert_eq!(c.sign(&[1, 1, 0]), -1.0);
        assert_eq!(c.sign(&[1, 1, 1]), 1.0);
        let fam: Vec<ComplexMatrix> = (0..8)
            .map(|_| ComplexMatrix::identity(SubsystemShape::uniform(2, 3).unwrap()))
            .collect();
        let r = c.residual_on_family(&fam).unwrap();
        assert_eq!(r.shape().dims(), &[2, 2]);
        assert!(r.frobenius_norm() < 1e-12);
    }
}
