//! Unitary covariance of the storage blocks: `[L, Ū ⊗ U^{⊗N}] = 0` for all
//! `U ∈ SU(d)`.
//!
//! Two representations are provided. [`covariance_constraints`] emits one
//! real functional per (generator, Hermitian basis element), to be imposed
//! on unrestricted complex blocks. [`commutant_subspace`] instead computes an
//! orthonormal basis of the real symmetric commutant, so blocks can be
//! parametrized inside it and the constraints disappear.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use super::blocks::block_shape;
use crate::error::{Error, Result};
use crate::linalg::{embed_operator, su_basis, ComplexMatrix, SubsystemShape, C64};
use crate::sdpmodel::Subspace;

/// Relative eigenvalue cutoff separating the nullspace from the rest.
const NULLSPACE_TOL: f64 = 1e-9;

fn check_size(d: usize, n: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("d must be at least 2, got {d}")));
    }
    if n < 1 {
        return Err(Error::InvalidParameter(format!("N must be at least 1, got {n}")));
    }
    Ok(())
}

/// Lie-algebra action of `λ` on `X_in ⊗ A_I^1 ⊗ … ⊗ A_I^N`:
/// `(−λᵀ) ⊗ I + Σ_k I ⊗ … ⊗ λ ⊗ … ⊗ I`.
pub fn collective_generator(lambda: &ComplexMatrix, d: usize, n: usize) -> Result<ComplexMatrix> {
    check_size(d, n)?;
    let shape = block_shape(d, n);
    let mut g = embed_operator(&lambda.transpose().scale(-1.0), &[0], &shape)?;
    for k in 1..=n {
        g.add_scaled(1.0, &embed_operator(lambda, &[k], &shape)?);
    }
    Ok(g)
}

/// Collective generators for the Gell-Mann basis of su(d).
pub fn covariance_generators(d: usize, n: usize) -> Result<Vec<ComplexMatrix>> {
    check_size(d, n)?;
    su_basis(d)
        .iter()
        .map(|l| collective_generator(l, d, n))
        .collect()
}

/// Orthonormal Hermitian basis of `dim × dim` matrices: `E_rr`, then
/// `(E_rc + E_cr)/√2` and `i(E_rc − E_cr)/√2` for `r < c`.
pub fn hermitian_basis(shape: &SubsystemShape) -> Vec<ComplexMatrix> {
    let dim = shape.total();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(dim * dim);
    for r in 0..dim {
        let mut m = ComplexMatrix::zeros(shape.clone());
        m.set(r, r, C64::new(1.0, 0.0));
        out.push(m);
    }
    for c in 0..dim {
        for r in 0..c {
            let mut re = ComplexMatrix::zeros(shape.clone());
            re.set(r, c, C64::new(s, 0.0));
            re.set(c, r, C64::new(s, 0.0));
            out.push(re);
            let mut im = ComplexMatrix::zeros(shape.clone());
            im.set(r, c, C64::new(0.0, -s));
            im.set(c, r, C64::new(0.0, s));
            out.push(im);
        }
    }
    out
}

/// Coefficients `C` with `⟨C, L⟩ = 0` for every block `L` expressing
/// `[L, G_a] = 0` for all collective generators `G_a`.
///
/// `C = i[E, G_a]` ranges over an orthonormal Hermitian basis `E`, since
/// `⟨E, i[G_a, L]⟩ = ⟨i[E, G_a], L⟩` and `i[G_a, L]` is Hermitian. The list
/// has `(d² − 1) d^{2(N+1)}` entries with many zeros and dependencies; it is
/// meant for small sizes and cross-checks.
pub fn covariance_constraints(d: usize, n: usize) -> Result<Vec<ComplexMatrix>> {
    let gens = covariance_generators(d, n)?;
    let basis = hermitian_basis(&block_shape(d, n));
    let i = C64::new(0.0, 1.0);
    let mut out = Vec::new();
    for g in &gens {
        for e in &basis {
            let c = e.commutator(g).scale_complex(i);
            if c.max_abs() > 1e-14 {
                out.push(c);
            }
        }
    }
    Ok(out)
}

/// `max_a ‖[X, G_a]‖_F`.
pub fn covariance_residual(x: &ComplexMatrix, d: usize, n: usize) -> Result<f64> {
    let shape = block_shape(d, n);
    if x.shape() != &shape {
        return Err(Error::DimensionMismatch {
            expected: shape.total(),
            found: x.dim(),
        });
    }
    Ok(covariance_generators(d, n)?
        .iter()
        .map(|g| x.commutator(g).frobenius_norm())
        .fold(0.0, f64::max))
}

/// Basis states grouped by their weight `−e_x + Σ_k e_{a_k}` under the
/// diagonal torus; every covariant operator is block diagonal over them.
pub fn weight_classes(d: usize, n: usize) -> Vec<Vec<usize>> {
    let shape = block_shape(d, n);
    let mut classes: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for idx in 0..shape.total() {
        let digits = shape.unravel(idx);
        let mut w = vec![0i64; d];
        w[digits[0]] -= 1;
        for &a in &digits[1..] {
            w[a] += 1;
        }
        classes.entry(w).or_default().push(idx);
    }
    let mut out: Vec<Vec<usize>> = classes.into_values().collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Real matrix of the collective action of `E_jk` (`j ≠ k`).
fn raising_action(d: usize, n: usize, j: usize, k: usize) -> DMatrix<f64> {
    let shape = block_shape(d, n);
    let dim = shape.total();
    let strides = shape.strides();
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let digits = shape.unravel(col);
        // conjugate factor carries −E_jkᵀ = −E_kj: |j⟩ ↦ −|k⟩
        if digits[0] == j {
            m[(col - j * strides[0] + k * strides[0], col)] -= 1.0;
        }
        // other factors carry E_jk: |k⟩ ↦ |j⟩
        for p in 1..=n {
            if digits[p] == k {
                m[(col - k * strides[p] + j * strides[p], col)] += 1.0;
            }
        }
    }
    m
}

/// Orthonormal basis of the real symmetric operators on `X_in ⊗ A_I^{1..N}`
/// commuting with `Ū ⊗ U^{⊗N}`.
///
/// Unknowns are the symmetric coordinates on the weight-class pattern (which
/// already handles the Cartan generators); the off-diagonal generators
/// `E_jk` then cut out the commutant as a nullspace.
pub fn compute_commutant(d: usize, n: usize) -> Result<Subspace> {
    check_size(d, n)?;
    let dim = block_shape(d, n).total();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut coords: Vec<(usize, usize)> = Vec::new();
    for class in weight_classes(d, n) {
        for (b, &c) in class.iter().enumerate() {
            for &r in &class[..=b] {
                coords.push((r, c));
            }
        }
    }
    let gens: Vec<DMatrix<f64>> = (0..d)
        .flat_map(|j| (0..d).filter(move |&k| k != j).map(move |k| (j, k)))
        .map(|(j, k)| raising_action(d, n, j, k))
        .collect();

    // column p of the constraint matrix is vec([P_p, R]) stacked over R
    let block = dim * dim;
    let mut cols = DMatrix::<f64>::zeros(block * gens.len(), coords.len());
    let mut comm = DMatrix::<f64>::zeros(dim, dim);
    for (p, &(r, c)) in coords.iter().enumerate() {
        let w = if r == c { 1.0 } else { s };
        for (g, rg) in gens.iter().enumerate() {
            comm.fill(0.0);
            for t in 0..dim {
                // P R: rows r and c pick up rows c and r of R
                comm[(r, t)] += w * rg[(c, t)];
                // −R P: columns c and r pick up columns r and c of R
                comm[(t, c)] -= w * rg[(t, r)];
                if r != c {
                    comm[(c, t)] += w * rg[(r, t)];
                    comm[(t, r)] -= w * rg[(t, c)];
                }
            }
            for (t, &v) in comm.iter().enumerate() {
                cols[(g * block + t, p)] = v;
            }
        }
    }
    let gram = cols.transpose() * &cols;
    let eig = SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.iter().cloned().fold(1.0, f64::max);
    let mut null: Vec<usize> = (0..coords.len())
        .filter(|&k| eig.eigenvalues[k] <= NULLSPACE_TOL * scale)
        .collect();
    null.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let basis = null
        .iter()
        .map(|&k| {
            let v = eig.eigenvectors.column(k);
            let mut m = DMatrix::zeros(dim, dim);
            for (p, &(r, c)) in coords.iter().enumerate() {
                if r == c {
                    m[(r, r)] = v[p];
                } else {
                    m[(r, c)] = s * v[p];
                    m[(c, r)] = s * v[p];
                }
            }
            m
        })
        .collect();
    Subspace::new(dim, basis)
}

type CommutantCache = Mutex<HashMap<(usize, usize), Arc<Subspace>>>;

/// Cached [`compute_commutant`]; entries are written once per `(d, N)`.
pub fn commutant_subspace(d: usize, n: usize) -> Result<Arc<Subspace>> {
    static CACHE: OnceLock<CommutantCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(s) = cache.lock().expect("commutant cache poisoned").get(&(d, n)) {
        return Ok(s.clone());
    }
    let sub = Arc::new(compute_commutant(d, n)?);
    let mut guard = cache.lock().expect("commutant cache poisoned");
    Ok(guard.entry((d, n)).or_insert(sub).clone())
}
