//! Real coordinates and the standard primal conic form.
//!
//! Coordinates of a standard real symmetric block of side `n` follow the
//! upper triangle column by column, `x = M_rr` on the diagonal and
//! `x = √2 M_rc` off it. A complex Hermitian block appends `√2 Im H_rc`
//! (`r < c`, same order) to the coordinates of `Re H`. Both coordinate maps
//! are isometries, so a coefficient `A` becomes the coordinate vector
//! `⟨A, basis_k⟩` and functional values are preserved exactly.
//!
//! PSD-ness of a complex block is imposed on its real embedding
//! `[[Re H, −Im H], [Im H, Re H]]`. Pairing an embedded coefficient with the
//! embedding counts every entry twice, so a coefficient expressed at that
//! level must be halved; working in coordinates makes that implicit.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{ConicModel, Field, Subspace};
use crate::error::Result;
use crate::linalg::{ComplexMatrix, SubsystemShape, C64};

/// `(row, col)` to the basis elements touching it, with their weights.
type EntryMap = HashMap<(usize, usize), Vec<(usize, f64)>>;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Debug)]
pub enum BlockBasis {
    Standard,
    Dense(Arc<Subspace>),
}

/// Placement of one model block in the real coordinate vector.
#[derive(Clone, Debug)]
pub struct RealBlock {
    pub name: String,
    pub offset: usize,
    pub n_coords: usize,
    /// Side of the Hermitian block.
    pub dim: usize,
    pub field: Field,
    /// Side of the real symmetric matrix the PSD cones act on: `dim`, or
    /// `2·dim` for embedded complex blocks.
    pub side: usize,
    pub basis: BlockBasis,
    /// Index sets of the real matrix, one PSD cone each.
    pub cones: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SparseRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseRow {
    fn from_map(map: HashMap<usize, f64>) -> Self {
        let mut pairs: Vec<(usize, f64)> = map.into_iter().filter(|(_, v)| *v != 0.0).collect();
        pairs.sort_by_key(|p| p.0);
        Self {
            idx: pairs.iter().map(|p| p.0).collect(),
            val: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| v * x[i]).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.idx.is_empty()
    }
}

/// The model over real coordinates: maximize `c·x` subject to `rows·x = rhs`
/// and the PSD cones of every block.
#[derive(Clone, Debug)]
pub struct RealConicModel {
    pub n_vars: usize,
    pub c: Vec<f64>,
    pub rows: Vec<SparseRow>,
    pub rhs: Vec<f64>,
    pub blocks: Vec<RealBlock>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Cone {
    Zero { dim: usize },
    PsdTriangle { side: usize },
}

/// `minimize q·x  s.t.  A x + s = b,  s ∈ K` with `K` a product of a zero cone
/// and PSD triangle cones (upper triangle, column-major, off-diagonal `√2`).
#[derive(Clone, Debug, Serialize)]
pub struct StandardForm {
    pub n: usize,
    pub m: usize,
    pub q: Vec<f64>,
    pub a_rows: Vec<usize>,
    pub a_cols: Vec<usize>,
    pub a_vals: Vec<f64>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

fn standard_coords(dim: usize, field: Field) -> usize {
    match field {
        Field::Real => dim * (dim + 1) / 2,
        Field::Complex => dim * dim,
    }
}

/// Position of `(r, c)`, `r ≤ c`, in the column-major upper triangle.
fn tri_index(r: usize, c: usize) -> usize {
    c * (c + 1) / 2 + r
}

/// Position of `(r, c)`, `r < c`, in the strict upper triangle.
fn strict_index(r: usize, c: usize) -> usize {
    c * (c - 1) / 2 + r
}

/// Maps a model to real coordinates.
pub fn to_real_conic(model: &ConicModel) -> Result<RealConicModel> {
    let mut blocks = Vec::with_capacity(model.blocks().len());
    let mut offset = 0;
    for spec in model.blocks() {
        let (n_coords, basis, side, cones) = match &spec.subspace {
            Some(sub) => {
                let touched: Vec<bool> = {
                    let mut t = vec![false; spec.dim];
                    for e in sub.entries() {
                        for &(r, c, _) in e {
                            t[r] = true;
                            t[c] = true;
                        }
                    }
                    t
                };
                let cones = sub
                    .components()
                    .iter()
                    .filter(|comp| comp.iter().any(|&k| touched[k]))
                    .cloned()
                    .collect();
                (sub.len(), BlockBasis::Dense(sub.clone()), spec.dim, cones)
            }
            None => {
                let side = match spec.field {
                    Field::Real => spec.dim,
                    Field::Complex => 2 * spec.dim,
                };
                (
                    standard_coords(spec.dim, spec.field),
                    BlockBasis::Standard,
                    side,
                    vec![(0..side).collect()],
                )
            }
        };
        blocks.push(RealBlock {
            name: spec.name.clone(),
            offset,
            n_coords,
            dim: spec.dim,
            field: spec.field,
            side,
            basis,
            cones,
        });
        offset += n_coords;
    }

    let mut cache: HashMap<(usize, usize), Arc<Vec<f64>>> = HashMap::new();
    let mut row_of = |f: &super::Functional| -> SparseRow {
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for t in &f.terms {
            let blk = &blocks[t.block.0];
            let key = (Arc::as_ptr(&t.coeff) as usize, t.block.0);
            let coords = cache
                .entry(key)
                .or_insert_with(|| Arc::new(coefficient_coords(blk, &t.coeff)))
                .clone();
            for (k, &v) in coords.iter().enumerate() {
                if v != 0.0 {
                    *acc.entry(blk.offset + k).or_default() += t.scale * v;
                }
            }
        }
        SparseRow::from_map(acc)
    };

    let objective = row_of(model.objective());
    let mut c = vec![0.0; offset];
    for (&i, &v) in objective.idx.iter().zip(&objective.val) {
        c[i] = v;
    }
    let mut rows = Vec::with_capacity(model.equalities().len());
    let mut rhs = Vec::with_capacity(model.equalities().len());
    for e in model.equalities() {
        rows.push(row_of(&e.functional));
        rhs.push(e.rhs);
    }
    Ok(RealConicModel {
        n_vars: offset,
        c,
        rows,
        rhs,
        blocks,
    })
}

/// Coordinates of a coefficient matrix in a block's basis.
fn coefficient_coords(blk: &RealBlock, a: &ComplexMatrix) -> Vec<f64> {
    match &blk.basis {
        BlockBasis::Dense(sub) => sub.project(a),
        BlockBasis::Standard => {
            let n = blk.dim;
            let mut out = vec![0.0; blk.n_coords];
            for c in 0..n {
                for r in 0..=c {
                    out[tri_index(r, c)] = if r == c {
                        a.get(r, r).re
                    } else {
                        (a.get(r, c).re + a.get(c, r).re) / SQRT2
                    };
                }
            }
            if blk.field == Field::Complex {
                let base = n * (n + 1) / 2;
                for c in 1..n {
                    for r in 0..c {
                        out[base + strict_index(r, c)] = (a.get(r, c).im - a.get(c, r).im) / SQRT2;
                    }
                }
            }
            out
        }
    }
}

impl RealConicModel {
    /// Coordinate coefficients of the real matrix entry `(p, q)`, `p ≤ q`.
    pub(crate) fn entry_terms(&self, blk: &RealBlock, p: usize, q: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        match &blk.basis {
            BlockBasis::Dense(_) => unreachable!("dense blocks use basis entries"),
            BlockBasis::Standard => {
                let n = blk.dim;
                let re = |r: usize, c: usize, out: &mut Vec<(usize, f64)>| {
                    let (r, c) = (r.min(c), r.max(c));
                    if r == c {
                        out.push((tri_index(r, r), 1.0));
                    } else {
                        out.push((tri_index(r, c), 1.0 / SQRT2));
                    }
                };
                if p < n && q < n {
                    re(p, q, out);
                } else if p >= n && q >= n {
                    re(p - n, q - n, out);
                } else {
                    // p < n ≤ q: entry −Im H_{p, q−n}
                    let (r, c) = (p, q - n);
                    let base = n * (n + 1) / 2;
                    if r < c {
                        out.push((base + strict_index(r, c), -1.0 / SQRT2));
                    } else if r > c {
                        out.push((base + strict_index(c, r), 1.0 / SQRT2));
                    }
                }
            }
        }
    }

    /// The real symmetric matrix (side `blk.side`) of block `k` at `x`.
    pub fn real_matrix(&self, k: usize, x: &[f64]) -> DMatrix<f64> {
        let blk = &self.blocks[k];
        let xs = &x[blk.offset..blk.offset + blk.n_coords];
        match &blk.basis {
            BlockBasis::Dense(sub) => sub.combine(xs),
            BlockBasis::Standard => {
                let mut m = DMatrix::zeros(blk.side, blk.side);
                let mut terms = Vec::new();
                for q in 0..blk.side {
                    for p in 0..=q {
                        self.entry_terms(blk, p, q, &mut terms);
                        let v: f64 = terms.iter().map(|&(i, w)| w * xs[i]).sum();
                        m[(p, q)] = v;
                        m[(q, p)] = v;
                    }
                }
                m
            }
        }
    }

    /// Hermitian block `k` at `x`.
    pub fn block_matrix(&self, k: usize, x: &[f64]) -> ComplexMatrix {
        let blk = &self.blocks[k];
        let shape = SubsystemShape::single(blk.dim).expect("dim >= 1");
        let xs = &x[blk.offset..blk.offset + blk.n_coords];
        match (&blk.basis, blk.field) {
            (BlockBasis::Dense(sub), _) => {
                ComplexMatrix::from_real(&sub.combine(xs), shape).expect("sized")
            }
            (BlockBasis::Standard, field) => {
                let n = blk.dim;
                let base = n * (n + 1) / 2;
                ComplexMatrix::from_fn(shape, |r, c| {
                    let (lo, hi) = (r.min(c), r.max(c));
                    if lo == hi {
                        return C64::new(xs[tri_index(lo, lo)], 0.0);
                    }
                    let re = xs[tri_index(lo, hi)] / SQRT2;
                    let im = if field == Field::Complex {
                        xs[base + strict_index(lo, hi)] / SQRT2
                    } else {
                        0.0
                    };
                    if r < c {
                        C64::new(re, im)
                    } else {
                        C64::new(re, -im)
                    }
                })
            }
        }
    }

    pub fn recover(&self, x: &[f64]) -> Vec<ComplexMatrix> {
        (0..self.blocks.len()).map(|k| self.block_matrix(k, x)).collect()
    }

    /// Coordinates of Hermitian blocks (projected onto subspaces when present).
    pub fn coords_of(&self, blocks: &[ComplexMatrix]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_vars];
        for (blk, h) in self.blocks.iter().zip(blocks) {
            let v = coefficient_coords(blk, h);
            x[blk.offset..blk.offset + blk.n_coords].copy_from_slice(&v);
        }
        x
    }

    /// Number of scalar rows in all PSD cones.
    pub fn cone_rows(&self) -> usize {
        self.blocks
            .iter()
            .flat_map(|b| b.cones.iter())
            .map(|c| c.len() * (c.len() + 1) / 2)
            .sum()
    }

    /// `Σ (cone rows)²`, a proxy for interior-point cost.
    pub fn cone_work(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.cones.iter())
            .map(|c| {
                let t = (c.len() * (c.len() + 1) / 2) as f64;
                t * t
            })
            .sum()
    }

    /// Standard form with the given equality rows first and one PSD triangle
    /// cone per block component.
    pub fn standard_form(&self, rows: &[SparseRow], rhs: &[f64]) -> StandardForm {
        let mut a_rows = Vec::new();
        let mut a_cols = Vec::new();
        let mut a_vals = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (&j, &v) in row.idx.iter().zip(&row.val) {
                a_rows.push(i);
                a_cols.push(j);
                a_vals.push(v);
            }
            b.push(rhs[i]);
        }
        if !rows.is_empty() {
            cones.push(Cone::Zero { dim: rows.len() });
        }
        let mut m = rows.len();
        let mut terms = Vec::new();
        for blk in &self.blocks {
            // per dense basis element, entries keyed by (row, col)
            let dense_map: Option<EntryMap> = match &blk.basis {
                BlockBasis::Dense(sub) => {
                    let mut map = EntryMap::new();
                    for (k, e) in sub.entries().iter().enumerate() {
                        for &(r, c, v) in e {
                            map.entry((r, c)).or_default().push((k, v));
                        }
                    }
                    Some(map)
                }
                BlockBasis::Standard => None,
            };
            for comp in &blk.cones {
                for (qq, &q) in comp.iter().enumerate() {
                    for &p in &comp[..=qq] {
                        let scale = if p == q { 1.0 } else { SQRT2 };
                        match &dense_map {
                            Some(map) => {
                                if let Some(list) = map.get(&(p, q)) {
                                    for &(k, v) in list {
                                        a_rows.push(m);
                                        a_cols.push(blk.offset + k);
                                        a_vals.push(-scale * v);
                                    }
                                }
                            }
                            None => {
                                self.entry_terms(blk, p, q, &mut terms);
                                for &(k, v) in &terms {
                                    a_rows.push(m);
                                    a_cols.push(blk.offset + k);
                                    a_vals.push(-scale * v);
                                }
                            }
                        }
                        b.push(0.0);
                        m += 1;
                    }
                }
                cones.push(Cone::PsdTriangle { side: comp.len() });
            }
        }
        StandardForm {
            n: self.n_vars,
            m,
            q: self.c.iter().map(|v| -v).collect(),
            a_rows,
            a_cols,
            a_vals,
            b,
            cones,
        }
    }
}

/// Real embedding `[[Re H, −Im H], [Im H, Re H]]` of a complex matrix.
pub fn embed_hermitian(h: &ComplexMatrix) -> DMatrix<f64> {
    let n = h.dim();
    DMatrix::from_fn(2 * n, 2 * n, |p, q| {
        let z = h.get(p % n, q % n);
        match (p < n, q < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_hermitian, random_matrix};
    use crate::sdpmodel::{BlockId, Functional};
    use nalgebra::SymmetricEigen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sorted_eigs(m: DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn identity_embeds_to_identity() {
        let i2 = ComplexMatrix::identity(SubsystemShape::single(2).unwrap());
        assert_eq!(embed_hermitian(&i2), DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn pauli_y_embedding() {
        let y = crate::linalg::su_basis(2)[1].clone();
        let e = embed_hermitian(&y);
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
            ],
        );
        assert_eq!(e, expect);
        for (got, want) in sorted_eigs(e).iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn embedding_doubles_spectrum_and_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for _ in 0..20 {
            let h = random_hermitian(&[3], &mut rng);
            let a = random_hermitian(&[3], &mut rng);
            let mut doubled: Vec<f64> = h
                .eigenvalues_hermitian()
                .into_iter()
                .flat_map(|x| [x, x])
                .collect();
            doubled.sort_by(f64::total_cmp);
            for (x, y) in sorted_eigs(embed_hermitian(&h)).iter().zip(&doubled) {
                assert!((x - y).abs() < 1e-10);
            }
            let full = embed_hermitian(&a).dot(&embed_hermitian(&h));
            assert!((0.5 * full - a.inner_re(&h)).abs() < 1e-10);
        }
        let g = random_matrix(&[4], &mut rng);
        let psd = g.matmul(&g.adjoint());
        assert!(sorted_eigs(embed_hermitian(&psd))[0] > -1e-10);
    }

    fn model_with(field: Field) -> ConicModel {
        let mut m = ConicModel::new();
        match field {
            Field::Real => m.add_real_psd_block(3),
            Field::Complex => m.add_psd_block(3),
        };
        m
    }

    #[test]
    fn coordinates_round_trip_and_preserve_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for field in [Field::Real, Field::Complex] {
            let mut model = model_with(field);
            let mut a = random_hermitian(&[3], &mut rng);
            let mut h = random_hermitian(&[3], &mut rng);
            if field == Field::Real {
                a = ComplexMatrix::from_real(&a.data().map(|z| z.re), a.shape().clone()).unwrap();
                h = ComplexMatrix::from_real(&h.data().map(|z| z.re), h.shape().clone()).unwrap();
            }
            let f = Functional::new().with(BlockId(0), 2.0, Arc::new(a.clone()));
            model.add_equality(f.clone(), 0.0).unwrap();
            model.set_objective(f.clone()).unwrap();
            let real = to_real_conic(&model).unwrap();
            let x = real.coords_of(std::slice::from_ref(&h));
            let back = real.block_matrix(0, &x);
            assert!(back.distance(&h) < 1e-12);
            let direct = f.evaluate(std::slice::from_ref(&h));
            assert!((real.rows[0].dot(&x) - direct).abs() < 1e-12);
            let cx: f64 = real.c.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((cx - direct).abs() < 1e-12);
            let rm = real.real_matrix(0, &x);
            let expect = match field {
                Field::Real => h.data().map(|z| z.re),
                Field::Complex => embed_hermitian(&h),
            };
            assert!((rm - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn standard_form_svec_matches_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let mut model = model_with(Field::Complex);
        model
            .add_equality(
                Functional::new().with(
                    BlockId(0),
                    1.0,
                    Arc::new(ComplexMatrix::identity(SubsystemShape::single(3).unwrap())),
                ),
                1.0,
            )
            .unwrap();
        let real = to_real_conic(&model).unwrap();
        let sf = real.standard_form(&real.rows, &real.rhs);
        assert_eq!(sf.cones, vec![Cone::Zero { dim: 1 }, Cone::PsdTriangle { side: 6 }]);
        let h = random_hermitian(&[3], &mut rng);
        let x = real.coords_of(std::slice::from_ref(&h));
        let mut s = sf.b.clone();
        for ((&r, &c), &v) in sf.a_rows.iter().zip(&sf.a_cols).zip(&sf.a_vals) {
            s[r] -= v * x[c];
        }
        let e = embed_hermitian(&h);
        let mut k = 1;
        for q in 0..6 {
            for p in 0..=q {
                let expect = if p == q { e[(p, q)] } else { SQRT2 * e[(p, q)] };
                assert!((s[k] - expect).abs() < 1e-12);
                k += 1;
            }
        }
    }
}
