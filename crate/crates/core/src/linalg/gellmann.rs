use super::{ComplexMatrix, SubsystemShape, C64};

/// Generalized Gell-Mann basis of su(d).
///
/// Order: symmetric off-diagonal generators, antisymmetric off-diagonal
/// generators, then the `d − 1` diagonal (Cartan) generators. Every element
/// is traceless Hermitian with `tr(λ_a λ_b) = 2 δ_ab`.
pub fn su_basis(d: usize) -> Vec<ComplexMatrix> {
    assert!(d >= 2, "su_basis needs d >= 2");
    let shape = SubsystemShape::single(d).expect("d >= 2");
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = ComplexMatrix::zeros(shape.clone());
            m.set(j, k, C64::new(1.0, 0.0));
            m.set(k, j, C64::new(1.0, 0.0));
            out.push(m);
        }
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = ComplexMatrix::zeros(shape.clone());
            m.set(j, k, C64::new(0.0, -1.0));
            m.set(k, j, C64::new(0.0, 1.0));
            out.push(m);
        }
    }
    for l in 1..d {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut diag = vec![0.0; d];
        for v in diag.iter_mut().take(l) {
            *v = norm;
        }
        diag[l] = -(l as f64) * norm;
        out.push(ComplexMatrix::diagonal(&diag, shape.clone()).expect("length d"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qubit_basis_is_pauli() {
        let b = su_basis(2);
        assert_eq!(b.len(), 3);
        let x = [[0.0, 1.0], [1.0, 0.0]];
        for (r, row) in x.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                assert_eq!(b[0].get(r, c), C64::new(v, 0.0));
            }
        }
        assert_eq!(b[1].get(0, 1), C64::new(0.0, -1.0));
        assert_eq!(b[1].get(1, 0), C64::new(0.0, 1.0));
        assert_eq!(b[2].get(0, 0), C64::new(1.0, 0.0));
        assert_eq!(b[2].get(1, 1), C64::new(-1.0, 0.0));
    }

    #[test]
    fn traceless_hermitian_orthogonal() {
        for d in 2..=4 {
            let b = su_basis(d);
            assert_eq!(b.len(), d * d - 1);
            for (a, x) in b.iter().enumerate() {
                assert!(x.trace().norm() < 1e-14);
                assert!(x.is_hermitian(1e-15));
                for (c, y) in b.iter().enumerate() {
                    let g = x.matmul(y).trace();
                    let expect = if a == c { 2.0 } else { 0.0 };
                    assert!((g - C64::new(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
    }
}
