//! Over-relaxed ADMM for the real conic model.
//!
//! Splits `max c·x  s.t.  A x = b,  G x ∈ K` into an affine `x`-step and a
//! cone projection on `z = G x`, where `G` maps coordinates to the PSD cone
//! matrices. `GᵀG` is diagonal (coordinates are orthonormal per block, doubled
//! for embedded complex blocks), so the `x`-step is a `D`-weighted projection
//! onto `{A x = b}` with one Cholesky factorization of `A D⁻¹ Aᵀ`.
//! The returned `x` satisfies the equalities to machine precision; positivity
//! holds up to the final primal residual.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::real::{BlockBasis, RealConicModel};
use super::result::{BackendOutput, Prepared, SolveStatus};

const ALPHA: f64 = 1.6;
const ADAPT_EVERY: u32 = 25;
const BALANCE: f64 = 5.0;

/// One coordinate's contribution to one upper-triangle cone entry.
#[derive(Clone, Copy)]
struct Entry {
    cone: u32,
    p: u32,
    q: u32,
    coord: u32,
    w: f64,
}

struct ConeMap {
    sides: Vec<usize>,
    entries: Vec<Entry>,
    diag: Vec<f64>,
}

impl ConeMap {
    fn new(real: &RealConicModel) -> Self {
        let mut sides = Vec::new();
        let mut entries = Vec::new();
        let mut terms = Vec::new();
        for blk in &real.blocks {
            let first = sides.len();
            let mut where_is = vec![(usize::MAX, 0usize); blk.side];
            for (ci, comp) in blk.cones.iter().enumerate() {
                for (local, &g) in comp.iter().enumerate() {
                    where_is[g] = (first + ci, local);
                }
                sides.push(comp.len());
            }
            match &blk.basis {
                BlockBasis::Dense(sub) => {
                    for (k, list) in sub.entries().iter().enumerate() {
                        for &(r, c, v) in list {
                            let (cone, p) = where_is[r];
                            let (cone_c, q) = where_is[c];
                            debug_assert_eq!(cone, cone_c, "entry crosses components");
                            let (p, q) = (p.min(q), p.max(q));
                            entries.push(Entry {
                                cone: cone as u32,
                                p: p as u32,
                                q: q as u32,
                                coord: (blk.offset + k) as u32,
                                w: v,
                            });
                        }
                    }
                }
                BlockBasis::Standard => {
                    for q in 0..blk.side {
                        for p in 0..=q {
                            real.entry_terms(blk, p, q, &mut terms);
                            for &(k, w) in &terms {
                                entries.push(Entry {
                                    cone: first as u32,
                                    p: p as u32,
                                    q: q as u32,
                                    coord: (blk.offset + k) as u32,
                                    w,
                                });
                            }
                        }
                    }
                }
            }
        }
        let mut diag = vec![0.0; real.n_vars];
        for e in &entries {
            let mult = if e.p == e.q { 1.0 } else { 2.0 };
            diag[e.coord as usize] += mult * e.w * e.w;
        }
        Self {
            sides,
            entries,
            diag,
        }
    }

    fn zeros(&self) -> Vec<DMatrix<f64>> {
        self.sides.iter().map(|&s| DMatrix::zeros(s, s)).collect()
    }

    fn apply(&self, x: &[f64], out: &mut [DMatrix<f64>]) {
        for m in out.iter_mut() {
            m.fill(0.0);
        }
        for e in &self.entries {
            out[e.cone as usize][(e.p as usize, e.q as usize)] += e.w * x[e.coord as usize];
        }
        for m in out.iter_mut() {
            let s = m.nrows();
            for q in 0..s {
                for p in 0..q {
                    m[(q, p)] = m[(p, q)];
                }
            }
        }
    }

    fn adjoint(&self, mats: &[DMatrix<f64>], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for e in &self.entries {
            let mult = if e.p == e.q { 1.0 } else { 2.0 };
            out[e.coord as usize] += mult * e.w * mats[e.cone as usize][(e.p as usize, e.q as usize)];
        }
    }
}

fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 1 {
        return m.map(|v| v.max(0.0));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let v = eig.eigenvectors.column(k);
            out.ger(lam, &v, &v, 1.0);
        }
    }
    out
}

fn norm(mats: &[DMatrix<f64>]) -> f64 {
    mats.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

pub(crate) fn solve(prep: &Prepared, tol: f64, max_iter: u32, verbose: bool) -> BackendOutput {
    let real = &prep.real;
    let n = real.n_vars;
    let map = ConeMap::new(real);
    if map.diag.iter().any(|&d| d <= 0.0) {
        return BackendOutput::failure("a coordinate does not enter any cone".into());
    }
    let dinv: Vec<f64> = map.diag.iter().map(|d| 1.0 / d).collect();

    let m = prep.rows.len();
    let mut a = DMatrix::<f64>::zeros(m, n);
    for (i, row) in prep.rows.iter().enumerate() {
        for (&j, &v) in row.idx.iter().zip(&row.val) {
            a[(i, j)] = v;
        }
    }
    let b = DVector::from_column_slice(&prep.rhs);
    let mut ad = a.clone();
    for (j, &s) in dinv.iter().enumerate().take(n) {
        ad.column_mut(j).scale_mut(s);
    }
    let kkt = &ad * a.transpose();
    let chol = match kkt.cholesky() {
        Some(c) => c,
        None if m == 0 => DMatrix::<f64>::zeros(0, 0).cholesky().expect("empty"),
        None => return BackendOutput::failure("equality system is rank deficient".into()),
    };

    let c = &real.c;
    let mut rho = 1.0;
    let mut z = map.zeros();
    let mut u = map.zeros();
    let mut gx = map.zeros();
    let mut v = map.zeros();
    let mut gt = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut status = SolveStatus::Inaccurate;
    let mut iterations = 0;
    let mut message = Some(format!("ADMM stopped after {max_iter} iterations"));

    for it in 1..=max_iter {
        iterations = it;
        // x-step: D-weighted projection of D⁻¹(Gᵀ(z − u) + c/ρ) onto A x = b
        for ((vk, zk), uk) in v.iter_mut().zip(&z).zip(&u) {
            vk.copy_from(zk);
            *vk -= uk;
        }
        map.adjoint(&v, &mut gt);
        let y = DVector::from_iterator(n, (0..n).map(|k| dinv[k] * (gt[k] + c[k] / rho)));
        if m > 0 {
            let nu = chol.solve(&(&a * &y - &b));
            let corr = a.transpose() * nu;
            for k in 0..n {
                x[k] = y[k] - dinv[k] * corr[k];
            }
        } else {
            x.copy_from_slice(y.as_slice());
        }
        map.apply(&x, &mut gx);

        // relaxed z- and u-steps
        let z_old: Vec<DMatrix<f64>> = z.clone();
        for k in 0..z.len() {
            let relaxed = &gx[k] * ALPHA + &z_old[k] * (1.0 - ALPHA);
            z[k] = project_psd(&(&relaxed + &u[k]));
            u[k] += &relaxed - &z[k];
        }

        let r_prim = gx
            .iter()
            .zip(&z)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt();
        let dz: Vec<DMatrix<f64>> = z.iter().zip(&z_old).map(|(a, b)| a - b).collect();
        map.adjoint(&dz, &mut gt);
        let r_dual = rho * gt.iter().map(|g| g * g).sum::<f64>().sqrt();

        let eps_prim = tol * (1.0 + norm(&gx).max(norm(&z)));
        let eps_dual = tol * (1.0 + rho * norm(&u));
        if verbose && (it % 100 == 0 || it == 1) {
            let obj: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
            eprintln!("admm {it:6} obj {obj:.8} r_p {r_prim:.2e} r_d {r_dual:.2e} rho {rho:.2e}");
        }
        if r_prim <= eps_prim && r_dual <= eps_dual {
            status = SolveStatus::Optimal;
            message = None;
            break;
        }
        if it % ADAPT_EVERY == 0 {
            let scale = if r_prim > BALANCE * r_dual {
                2.0
            } else if r_dual > BALANCE * r_prim {
                0.5
            } else {
                1.0
            };
            if scale != 1.0 {
                rho *= scale;
                for uk in u.iter_mut() {
                    *uk /= scale;
                }
            }
        }
    }
    let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    BackendOutput {
        x,
        status,
        objective,
        dual_objective: None,
        iterations,
        message,
    }
}
