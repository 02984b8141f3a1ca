//! Property tests for the kernel invariants.

use lossboot::bootstrap::{llb_sample, BootstrapConfig};
use lossboot::loss::phi2;
use lossboot::numkit::{compensated_sum, dirichlet_uniform, Cholesky, Matrix, RngStream};
use lossboot::{Dataset, QuadraticLoss};
use proptest::prelude::*;

proptest! {
    /// Every Dirichlet weight vector lies on the simplex.
    #[test]
    fn dirichlet_weights_on_simplex(seed in any::<u64>(), stream in any::<u64>(), n in 1usize..2000) {
        let mut rng = RngStream::new(seed, stream);
        let w = dirichlet_uniform(n, &mut rng).unwrap();
        prop_assert_eq!(w.len(), n);
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        let sum = compensated_sum(w.as_slice());
        prop_assert!((sum - 1.0).abs() <= 1e-12, "sum {}", sum);
    }

    /// phi2 is nonincreasing and nonnegative everywhere.
    #[test]
    fn phi2_monotone_nonnegative(xi in -50.0f64..50.0) {
        let (value, first, _) = phi2(xi);
        prop_assert!(value >= 0.0);
        prop_assert!(first <= 0.0);
    }

    /// Cholesky round-trip: factoring L L^T recovers it to 1e-10 relative.
    #[test]
    fn cholesky_round_trip(seed in any::<u64>(), d in 1usize..7) {
        let mut rng = RngStream::new(seed, 0);
        let mut l = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let u = lossboot::numkit::standard_normal(&mut rng);
                l[(i, j)] = if i == j { 0.4 + u.abs() } else { 0.5 * u };
            }
        }
        let a = l.matmul(&l.transpose());
        let f = Cholesky::factor(&a).unwrap();
        let back = f.lower().matmul(&f.lower().transpose());
        let rel = back.sub(&a).frobenius_norm() / a.frobenius_norm();
        prop_assert!(rel <= 1e-10, "relative error {}", rel);
    }

    /// Identical (seed, B, data) give bit-identical draws for 1 and 4 threads.
    #[test]
    fn llb_thread_determinism(seed in any::<u64>()) {
        let data = Dataset::from_rows(&[vec![0.1], vec![1.4], vec![-0.7], vec![2.2]]).unwrap();
        let loss = QuadraticLoss::standard(1);
        let a = llb_sample(&loss, &data, &BootstrapConfig::new(12, seed)).unwrap();
        let b = llb_sample(&loss, &data, &BootstrapConfig::new(12, seed).with_threads(4)).unwrap();
        prop_assert_eq!(a.draws(), b.draws());
    }
}
