//! Oracles that do not go through the SDP: per-unitary fidelity of a block
//! family, Haar Monte Carlo averages and twirls, and the reference table.

mod table;

pub use table::{
    reference_values, reproduce_table, Reference, Table, TableCell, TableOptions, TABLE_TOL,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{haar_unitary_with, kron_all, ComplexMatrix, C64};
use crate::strategies::{block_shape, ChoiBlocks};

/// Accepted unitarity defect of a caller-supplied `U`.
const UNITARY_TOL: f64 = 1e-8;

/// Haar sample `k` of the stream seeded by `seed`.
///
/// Sample `k` uses ChaCha8 seeded with `seed` on stream `k`, so every sample
/// is reproducible on its own regardless of evaluation order.
pub fn sample_unitary(d: usize, seed: u64, k: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    haar_unitary_with(d, &mut rng)
}

fn check_unitary(u: &ComplexMatrix, d: usize) -> Result<()> {
    if u.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: u.dim(),
        });
    }
    let r = u.unitarity_residual();
    if r > UNITARY_TOL {
        return Err(Error::NotUnitary(r));
    }
    Ok(())
}

fn kron_vectors(parts: &[Vec<C64>]) -> Vec<C64> {
    parts.iter().fold(vec![C64::new(1.0, 0.0)], |acc, p| {
        acc.iter().flat_map(|a| p.iter().map(move |b| a * b)).collect()
    })
}

/// `(1/d) Σ_{i,j} v† L_{i,j} v` with `v = conj(U|i⟩) ⊗ U|j_1⟩ ⊗ … ⊗ U|j_N⟩`:
/// the average over outcomes of the probability that the retrieved
/// measurement reproduces outcome `i` of `P_U` on input `U|i⟩`.
pub fn fidelity_for_unitary(blocks: &ChoiBlocks, u: &ComplexMatrix) -> Result<f64> {
    let d = blocks.d();
    check_unitary(u, d)?;
    let cols: Vec<Vec<C64>> = (0..d).map(|k| (0..d).map(|r| u.get(r, k)).collect()).collect();
    let conj_cols: Vec<Vec<C64>> = cols.iter().map(|c| c.iter().map(|z| z.conj()).collect()).collect();
    let mut total = 0.0;
    for flat in 0..blocks.blocks().len() {
        let digits = blocks.digits(flat);
        let mut parts = vec![conj_cols[digits[0]].clone()];
        parts.extend(digits[1..].iter().map(|&j| cols[j].clone()));
        let v = kron_vectors(&parts);
        let l = blocks.block(flat).data();
        let mut acc = C64::new(0.0, 0.0);
        for c in 0..v.len() {
            if v[c] == C64::new(0.0, 0.0) {
                continue;
            }
            let mut lv = C64::new(0.0, 0.0);
            for r in 0..v.len() {
                lv += v[r].conj() * l[(r, c)];
            }
            acc += lv * v[c];
        }
        total += acc.re;
    }
    Ok(total / d as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityReport {
    pub mean: f64,
    /// Sample standard deviation of the per-unitary fidelity (not of the mean).
    pub std: f64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl FidelityReport {
    fn from_values(values: Vec<f64>) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            samples: n,
            values: Some(values),
        }
    }

    pub fn without_values(mut self) -> Self {
        self.values = None;
        self
    }
}

/// Haar average of [`fidelity_for_unitary`] over `samples` draws of
/// [`sample_unitary`]`(d, seed, k)`, `k = 0..samples`.
pub fn mc_average_fidelity(blocks: &ChoiBlocks, samples: usize, seed: u64) -> Result<FidelityReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is required".into()));
    }
    let d = blocks.d();
    let values = (0..samples as u64)
        .into_par_iter()
        .map(|k| fidelity_for_unitary(blocks, &sample_unitary(d, seed, k)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(FidelityReport::from_values(values))
}

/// `Ū ⊗ U^{⊗N}`.
pub fn collective_unitary(u: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let mut factors = vec![u.conj()];
    factors.extend(std::iter::repeat_n(u.clone(), n));
    kron_all(&factors)
}

/// `avg_k V_k X V_k†` with `V_k = Ū_k ⊗ U_k^{⊗N}` over Haar samples.
pub fn mc_twirl(x: &ComplexMatrix, d: usize, n: usize, samples: usize, seed: u64) -> Result<ComplexMatrix> {
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is required".into()));
    }
    let shape = block_shape(d, n);
    if x.dim() != shape.total() {
        return Err(Error::DimensionMismatch {
            expected: shape.total(),
            found: x.dim(),
        });
    }
    let x = x.reshaped(shape.clone())?;
    let terms: Vec<ComplexMatrix> = (0..samples as u64)
        .into_par_iter()
        .map(|k| x.conjugate_by(&collective_unitary(&sample_unitary(d, seed, k), n)))
        .collect();
    // fixed summation order keeps the result independent of scheduling
    let mut acc = ComplexMatrix::zeros(shape);
    for t in &terms {
        acc.add_scaled(1.0 / samples as f64, t);
    }
    Ok(acc)
}
