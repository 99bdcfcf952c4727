use std::collections::HashMap;

use super::{ComplexMatrix, SubsystemShape, C64, ZERO};
use crate::error::{Error, Result};

/// Tolerance on `‖U†U − I‖_F` accepted by [`von_neumann_choi`].
pub const UNITARITY_TOL: f64 = 1e-8;

/// A Choi operator whose subsystems carry unique wire labels.
///
/// Convention: `J(Φ) = Σ_{ij} Φ(|i⟩⟨j|) ⊗ |i⟩⟨j|`, output wires first,
/// input wires second.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledChoi {
    matrix: ComplexMatrix,
    labels: Vec<String>,
}

impl LabeledChoi {
    pub fn new(matrix: ComplexMatrix, labels: Vec<String>) -> Result<Self> {
        if labels.len() != matrix.shape().len() {
            return Err(Error::InvalidShape(format!(
                "{} labels for {} subsystems",
                labels.len(),
                matrix.shape().len()
            )));
        }
        for (k, l) in labels.iter().enumerate() {
            if labels[..k].contains(l) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { matrix, labels })
    }

    /// A state on a single wire.
    pub fn state(rho: ComplexMatrix, label: &str) -> Result<Self> {
        Self::new(rho, vec![label.to_string()])
    }

    /// Choi operator of `ρ ↦ Σ K ρ K†` with labels `(output, input)`.
    pub fn from_kraus(kraus: &[ComplexMatrix], output: &str, input: &str) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty Kraus list".into()))?;
        let d_in = first.data().ncols();
        let d_out = first.data().nrows();
        let shape = SubsystemShape::new(vec![d_out, d_in])?;
        let mut m = ComplexMatrix::zeros(shape);
        for k in kraus {
            if k.data().ncols() != d_in || k.data().nrows() != d_out {
                return Err(Error::DimensionMismatch {
                    expected: d_in,
                    found: k.data().ncols(),
                });
            }
            // vec(K) = Σ_i K|i⟩ ⊗ |i⟩, J = Σ vec(K) vec(K)†
            let v: Vec<C64> = (0..d_out * d_in)
                .map(|idx| k.get(idx / d_in, idx % d_in))
                .collect();
            for c in 0..v.len() {
                for r in 0..v.len() {
                    let cur = m.get(r, c);
                    m.set(r, c, cur + v[r] * v[c].conj());
                }
            }
        }
        Self::new(m, vec![output.to_string(), input.to_string()])
    }

    /// Choi operator of the unitary channel `ρ ↦ UρU†`.
    pub fn unitary(u: &ComplexMatrix, output: &str, input: &str) -> Result<Self> {
        Self::from_kraus(std::slice::from_ref(u), output, input)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Reorders the wires to the given label order.
    pub fn reordered(&self, labels: &[&str]) -> Result<Self> {
        let mut perm = Vec::with_capacity(labels.len());
        for l in labels {
            perm.push(
                self.position(l)
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown label `{l}`")))?,
            );
        }
        let m = super::permute_subsystems(&self.matrix, &perm)?;
        Self::new(m, labels.iter().map(|s| s.to_string()).collect())
    }
}

/// Link product `N * M`: contraction over every label the two operands share.
///
/// In index form
/// `R[(f_N, f_M), (f_N', f_M')] = Σ_{a,b} N[(f_N, a), (f_N', b)] · M[(f_M, a), (f_M', b)]`
/// where `a, b` run over the shared wires, which equals
/// `tr_Z[(1 ⊗ M^{T_Z})(N ⊗ 1)]`. The result lists `N`'s free wires, then `M`'s.
pub fn link_product(n: &LabeledChoi, m: &LabeledChoi) -> Result<LabeledChoi> {
    let m_pos: HashMap<&str, usize> = m
        .labels
        .iter()
        .enumerate()
        .map(|(k, l)| (l.as_str(), k))
        .collect();
    let n_dims = n.matrix.shape().dims();
    let m_dims = m.matrix.shape().dims();
    let mut shared_n = Vec::new();
    let mut shared_m = Vec::new();
    let mut free_n = Vec::new();
    for (k, l) in n.labels.iter().enumerate() {
        match m_pos.get(l.as_str()) {
            Some(&j) => {
                if n_dims[k] != m_dims[j] {
                    return Err(Error::LabelMismatch {
                        label: l.clone(),
                        left: n_dims[k],
                        right: m_dims[j],
                    });
                }
                shared_n.push(k);
                shared_m.push(j);
            }
            None => free_n.push(k),
        }
    }
    let free_m: Vec<usize> = (0..m.labels.len())
        .filter(|j| !shared_m.contains(j))
        .collect();

    let n_shape = n.matrix.shape();
    let m_shape = m.matrix.shape();
    let fn_off = n_shape.offsets(&free_n);
    let an_off = n_shape.offsets(&shared_n);
    let fm_off = m_shape.offsets(&free_m);
    let am_off = m_shape.offsets(&shared_m);

    let mut dims: Vec<usize> = free_n.iter().map(|&k| n_dims[k]).collect();
    dims.extend(free_m.iter().map(|&j| m_dims[j]));
    let mut labels: Vec<String> = free_n.iter().map(|&k| n.labels[k].clone()).collect();
    labels.extend(free_m.iter().map(|&j| m.labels[j].clone()));
    let shape = SubsystemShape::new(dims)?;

    let nd = n.matrix.data();
    let md = m.matrix.data();
    let w = fm_off.len();
    let out_dim = fn_off.len() * w;
    let mut out = ComplexMatrix::zeros(shape);
    for c in 0..out_dim {
        let (cn, cm) = (fn_off[c / w], fm_off[c % w]);
        for r in 0..out_dim {
            let (rn, rm) = (fn_off[r / w], fm_off[r % w]);
            let mut acc = ZERO;
            for (&an, &am) in an_off.iter().zip(&am_off) {
                for (&bn, &bm) in an_off.iter().zip(&am_off) {
                    acc += nd[(rn + an, cn + bn)] * md[(rm + am, cm + bm)];
                }
            }
            out.set(r, c, acc);
        }
    }
    LabeledChoi::new(out, labels)
}

/// Choi operator of the von Neumann measurement defined by `U`.
///
/// `P_U = Σ_i |i⟩⟨i| ⊗ conj(U|i⟩⟨i|U†)` with labels `("out", "in")`: the
/// classical outcome is the first factor, the quantum input the second.
pub fn von_neumann_choi(u: &ComplexMatrix) -> Result<LabeledChoi> {
    let res = u.unitarity_residual();
    if res.is_nan() || res > UNITARITY_TOL {
        return Err(Error::NotUnitary(res));
    }
    let d = u.dim();
    let shape = SubsystemShape::new(vec![d, d])?;
    let mut m = ComplexMatrix::zeros(shape);
    for i in 0..d {
        for c in 0..d {
            for r in 0..d {
                // conj(U_{ri} conj(U_{ci}))
                let v = (u.get(r, i) * u.get(c, i).conj()).conj();
                m.set(i * d + r, i * d + c, v);
            }
        }
    }
    LabeledChoi::new(m, vec!["out".into(), "in".into()])
}
