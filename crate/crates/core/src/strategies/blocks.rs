use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{partial_trace, ComplexMatrix, SubsystemShape};

/// The SDP variable family `{L_{i,j}}`: one operator on `X_in ⊗ A_I^1 ⊗ … ⊗ A_I^N`
/// per retrieval outcome `i ∈ [d]` and stored outcome string `j ∈ [d]^N`.
///
/// Blocks are stored with `i` as the most significant digit followed by
/// `j_1, …, j_N`; outcomes are 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiBlocks {
    d: usize,
    n: usize,
    blocks: Vec<ComplexMatrix>,
}

impl ChoiBlocks {
    pub fn new(d: usize, n: usize, blocks: Vec<ComplexMatrix>) -> Result<Self> {
        check_params(d, n)?;
        let count = d.pow(n as u32 + 1);
        if blocks.len() != count {
            let missing = blocks.len().min(count);
            let digits = label_digits(d, n, missing);
            return Err(Error::MissingBlock {
                outcome: digits[0],
                labels: digits[1..].to_vec(),
            });
        }
        let shape = block_shape(d, n);
        for b in &blocks {
            if b.shape().total() != shape.total() {
                return Err(Error::DimensionMismatch {
                    expected: shape.total(),
                    found: b.dim(),
                });
            }
        }
        let blocks = blocks
            .into_iter()
            .map(|b| b.reshaped(shape.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { d, n, blocks })
    }

    /// Builds the family from an explicit `(i, j) → L_{i,j}` map; every key
    /// must be present.
    pub fn from_map(
        d: usize,
        n: usize,
        mut map: HashMap<(usize, Vec<usize>), ComplexMatrix>,
    ) -> Result<Self> {
        check_params(d, n)?;
        let count = d.pow(n as u32 + 1);
        let mut blocks = Vec::with_capacity(count);
        for idx in 0..count {
            let digits = label_digits(d, n, idx);
            let key = (digits[0], digits[1..].to_vec());
            match map.remove(&key) {
                Some(b) => blocks.push(b),
                None => {
                    return Err(Error::MissingBlock {
                        outcome: key.0,
                        labels: key.1,
                    })
                }
            }
        }
        Self::new(d, n, blocks)
    }

    pub fn from_fn(
        d: usize,
        n: usize,
        mut f: impl FnMut(usize, &[usize]) -> ComplexMatrix,
    ) -> Result<Self> {
        check_params(d, n)?;
        let count = d.pow(n as u32 + 1);
        let blocks = (0..count)
            .map(|idx| {
                let digits = label_digits(d, n, idx);
                f(digits[0], &digits[1..])
            })
            .collect();
        Self::new(d, n, blocks)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored outcome strings, `d^N`.
    pub fn label_count(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    pub fn block_dim(&self) -> usize {
        self.d.pow(self.n as u32 + 1)
    }

    pub fn block_shape(&self) -> SubsystemShape {
        block_shape(self.d, self.n)
    }

    pub fn index(&self, i: usize, j: &[usize]) -> usize {
        debug_assert_eq!(j.len(), self.n);
        j.iter().fold(i, |acc, &v| acc * self.d + v)
    }

    pub fn get(&self, i: usize, j: &[usize]) -> &ComplexMatrix {
        &self.blocks[self.index(i, j)]
    }

    /// Block by flat index `i·d^N + ravel(j)`.
    pub fn block(&self, flat: usize) -> &ComplexMatrix {
        &self.blocks[flat]
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    /// `(i, j)` digits of a flat index.
    pub fn digits(&self, flat: usize) -> Vec<usize> {
        label_digits(self.d, self.n, flat)
    }

    pub fn total_trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace().re).sum()
    }

    /// `S_j = Σ_i L_{i,j}` for the flat label index `j`.
    pub fn outcome_sum(&self, j: usize) -> ComplexMatrix {
        let stride = self.label_count();
        let mut s = self.blocks[j].clone();
        for i in 1..self.d {
            s.add_scaled(1.0, &self.blocks[i * stride + j]);
        }
        s
    }

    /// Stored-state family `W_j = (1/d) tr_{X_in} Σ_i L_{i,j}` on `A_I^1 … A_I^N`,
    /// indexed by flat `j`.
    pub fn storage_family(&self) -> Vec<ComplexMatrix> {
        (0..self.label_count())
            .map(|j| {
                partial_trace(&self.outcome_sum(j), &[0])
                    .expect("position 0 exists")
                    .scale(1.0 / self.d as f64)
            })
            .collect()
    }

    /// Largest violation of positivity over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.min_eigenvalue())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Shape `[d; N+1]` of one block: `X_in` then `A_I^1 … A_I^N`.
pub fn block_shape(d: usize, n: usize) -> SubsystemShape {
    SubsystemShape::uniform(d, n + 1).expect("d >= 1")
}

fn check_params(d: usize, n: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("d must be at least 2, got {d}")));
    }
    if n < 1 {
        return Err(Error::InvalidParameter(format!("N must be at least 1, got {n}")));
    }
    Ok(())
}

/// Base-`d` digits `(i, j_1, …, j_N)` of a flat block index.
pub fn label_digits(d: usize, n: usize, mut flat: usize) -> Vec<usize> {
    let mut digits = vec![0; n + 1];
    for k in (0..=n).rev() {
        digits[k] = flat % d;
        flat /= d;
    }
    digits
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaled_identity(d: usize, n: usize) -> ChoiBlocks {
        ChoiBlocks::from_fn(d, n, |_, _| {
            ComplexMatrix::identity(block_shape(d, n)).scale(1.0 / d.pow(n as u32 + 1) as f64)
        })
        .unwrap()
    }

    #[test]
    fn indexing_round_trips() {
        let b = scaled_identity(3, 2);
        for flat in 0..27 {
            let dg = b.digits(flat);
            assert_eq!(b.index(dg[0], &dg[1..]), flat);
        }
        assert_eq!(b.label_count(), 9);
        assert_eq!(b.block_dim(), 27);
    }

    #[test]
    fn missing_blocks_are_rejected() {
        let mut map = HashMap::new();
        let shape = block_shape(2, 1);
        for (i, j) in [(0, 0), (0, 1), (1, 0)] {
            map.insert((i, vec![j]), ComplexMatrix::identity(shape.clone()));
        }
        match ChoiBlocks::from_map(2, 1, map) {
            Err(Error::MissingBlock { outcome, labels }) => {
                assert_eq!((outcome, labels), (1, vec![1]));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(ChoiBlocks::new(2, 1, vec![]).is_err());
        assert!(ChoiBlocks::new(1, 1, vec![]).is_err());
    }

    #[test]
    fn storage_family_of_identity_blocks() {
        let b = scaled_identity(2, 2);
        assert!((b.total_trace() - 8.0).abs() < 1e-12);
        let fam = b.storage_family();
        assert_eq!(fam.len(), 4);
        // blocks I/8 give S_j = I/4 and W_j = (1/2)·tr_X(I/4) = I/4
        let expect = ComplexMatrix::identity(SubsystemShape::uniform(2, 2).unwrap()).scale(0.25);
        for w in fam {
            assert!(w.distance(&expect) < 1e-12);
        }
    }
}
