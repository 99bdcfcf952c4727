use std::collections::HashSet;

use nalgebra::DMatrix;

use super::real::SparseRow;

/// Pivots below this fraction of the largest Gram diagonal count as dependent.
const RANK_TOL: f64 = 1e-10;
/// Dependent rows whose right-hand side disagrees by more than this (relative)
/// make the system inconsistent.
const CONSISTENCY_TOL: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct Presolved {
    /// Indices of the retained rows in the input order.
    pub kept: Vec<usize>,
    pub duplicates: usize,
    pub dependent: usize,
    /// Set when a dependent row contradicts the retained ones.
    pub inconsistent: Option<String>,
}

/// Removes exact duplicates, then linearly dependent rows (pivoted Cholesky of
/// the Gram matrix), and checks that dropped rows are consistent.
pub fn presolve(rows: &[SparseRow], rhs: &[f64], n_vars: usize) -> Presolved {
    let mut seen: HashSet<(Vec<usize>, Vec<u64>, u64)> = HashSet::new();
    let mut unique = Vec::new();
    let mut duplicates = 0;
    let mut zero_rows = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        if row.is_zero() {
            zero_rows.push(k);
            continue;
        }
        let key = (
            row.idx.clone(),
            row.val.iter().map(|v| v.to_bits()).collect(),
            rhs[k].to_bits(),
        );
        if seen.insert(key) {
            unique.push(k);
        } else {
            duplicates += 1;
        }
    }
    for &k in &zero_rows {
        if rhs[k].abs() > CONSISTENCY_TOL {
            return Presolved {
                kept: Vec::new(),
                duplicates,
                dependent: 0,
                inconsistent: Some(format!("row {k} reads 0 = {}", rhs[k])),
            };
        }
    }

    let m = unique.len();
    if m == 0 {
        return Presolved {
            kept: Vec::new(),
            duplicates,
            dependent: zero_rows.len(),
            inconsistent: None,
        };
    }
    let mut a = DMatrix::<f64>::zeros(m, n_vars);
    for (i, &k) in unique.iter().enumerate() {
        for (&j, &v) in rows[k].idx.iter().zip(&rows[k].val) {
            a[(i, j)] = v;
        }
    }
    let gram = &a * a.transpose();
    let (perm, rank, factor) = pivoted_cholesky(&gram);

    let kept_local: Vec<usize> = perm[..rank].to_vec();
    let b_kept: Vec<f64> = kept_local.iter().map(|&i| rhs[unique[i]]).collect();
    let mut inconsistent = None;
    for &i in &perm[rank..] {
        // least-squares combination of the kept rows reproducing row i
        let g: Vec<f64> = kept_local.iter().map(|&k| gram[(k, i)]).collect();
        let lambda = cholesky_solve(&factor, rank, &g);
        let predicted: f64 = lambda.iter().zip(&b_kept).map(|(l, b)| l * b).sum();
        let actual = rhs[unique[i]];
        if (predicted - actual).abs() > CONSISTENCY_TOL * (1.0 + actual.abs()) {
            inconsistent = Some(format!(
                "row {} is a combination of other rows but its right-hand side {actual} differs from the implied {predicted}",
                unique[i]
            ));
            break;
        }
    }
    let mut kept: Vec<usize> = kept_local.iter().map(|&i| unique[i]).collect();
    kept.sort_unstable();
    Presolved {
        kept,
        duplicates,
        dependent: m - rank + zero_rows.len(),
        inconsistent,
    }
}

/// Pivoted Cholesky `P G Pᵀ ≈ L Lᵀ`. Returns the pivot order, the numerical
/// rank and `L` (lower triangle, in pivoted order; first `rank` columns valid).
fn pivoted_cholesky(g: &DMatrix<f64>) -> (Vec<usize>, usize, DMatrix<f64>) {
    let m = g.nrows();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut diag: Vec<f64> = (0..m).map(|i| g[(i, i)]).collect();
    let max_diag = diag.iter().cloned().fold(0.0, f64::max);
    let mut l = DMatrix::<f64>::zeros(m, m);
    let mut rank = 0;
    for k in 0..m {
        let (piv, &best) = diag[k..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i + k, v))
            .expect("nonempty");
        if best <= RANK_TOL * max_diag {
            break;
        }
        perm.swap(k, piv);
        diag.swap(k, piv);
        l.swap_rows(k, piv);
        let lkk = best.sqrt();
        l[(k, k)] = lkk;
        let pk = perm[k];
        let lk = l.view((k, 0), (1, k)).transpose();
        let prod = l.view((k + 1, 0), (m - k - 1, k)) * lk;
        for i in (k + 1)..m {
            let v = (g[(perm[i], pk)] - prod[i - k - 1]) / lkk;
            l[(i, k)] = v;
            diag[i] -= v * v;
        }
        rank += 1;
    }
    (perm, rank, l)
}

/// Solves `(L Lᵀ) y = g` with the leading `rank × rank` factor.
fn cholesky_solve(l: &DMatrix<f64>, rank: usize, g: &[f64]) -> Vec<f64> {
    let mut y = g.to_vec();
    for i in 0..rank {
        let mut s = y[i];
        for j in 0..i {
            s -= l[(i, j)] * y[j];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..rank).rev() {
        let mut s = y[i];
        for j in (i + 1)..rank {
            s -= l[(j, i)] * y[j];
        }
        y[i] = s / l[(i, i)];
    }
    y
}
