use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ComplexMatrix, SubsystemShape, C64};

/// Haar-random `d × d` unitary drawn from a ChaCha8 stream seeded with `seed`.
pub fn haar_unitary(d: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_unitary_with(d, &mut rng)
}

/// Haar-random unitary from a caller-owned generator.
///
/// QR of a complex Ginibre matrix, with the columns of `Q` rephased so that
/// the diagonal of `R` is positive; this makes the distribution exactly Haar.
pub fn haar_unitary_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    assert!(d >= 1, "haar_unitary needs d >= 1");
    let g = ginibre(d, d, rng);
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for k in 0..d {
        let rkk = r[(k, k)];
        let n = rkk.norm();
        let phase = if n > 0.0 { rkk / n } else { C64::new(1.0, 0.0) };
        for row in 0..d {
            q[(row, k)] *= phase;
        }
    }
    ComplexMatrix::from_dmatrix(q).expect("square by construction")
}

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Matrix with i.i.d. standard complex Gaussian entries on the given dims.
pub fn random_matrix<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> ComplexMatrix {
    let shape = SubsystemShape::new(dims.to_vec()).expect("positive dims");
    let n = shape.total();
    ComplexMatrix::new(ginibre(n, n, rng), shape).expect("sized by shape")
}

/// Random Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> ComplexMatrix {
    random_matrix(dims, rng).hermitian_part()
}

/// Random density matrix `G G† / tr(G G†)`.
pub fn random_density<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> ComplexMatrix {
    let g = random_matrix(dims, rng);
    let p = g.matmul(&g.adjoint());
    let t = p.trace().re;
    p.scale(1.0 / t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_unitary() {
        for d in 1..=5 {
            for seed in 0..5 {
                assert!(haar_unitary(d, seed).unitarity_residual() < 1e-12);
            }
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        assert_eq!(haar_unitary(3, 42), haar_unitary(3, 42));
        assert_ne!(haar_unitary(3, 42), haar_unitary(3, 43));
    }

    #[test]
    fn first_moment_of_trace() {
        // ∫|tr U|² dU = 1
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let vals: Vec<f64> = (0..n)
            .map(|_| haar_unitary_with(3, &mut rng).trace().norm_sqr())
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn diagonal_entry_moment() {
        // ∫|U₀₀|² dU = 1/d
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| haar_unitary_with(2, &mut rng).get(0, 0).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn left_invariance_of_a_statistic() {
        // |⟨0|VU|0⟩|² has the same law as |⟨0|U|0⟩|² for fixed V
        let v = haar_unitary(2, 99);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 10_000;
        let mut m4 = 0.0;
        for _ in 0..n {
            let u = haar_unitary_with(2, &mut rng);
            m4 += v.matmul(&u).get(0, 0).norm_sqr().powi(2);
        }
        // E|U₀₀|⁴ = 2/(d(d+1)) = 1/3 at d=2
        assert!((m4 / n as f64 - 1.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn random_density_is_a_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let rho = random_density(&[2, 3], &mut rng);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        assert!(rho.min_eigenvalue() > -1e-12);
    }
}
