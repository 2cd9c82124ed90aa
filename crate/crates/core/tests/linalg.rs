mod common;

use nalgebra::{DMatrix, DVector};
use physarum::generate::seeded_rng;
use physarum::linalg::{spd_factorize, spd_solve};
use proptest::prelude::*;
use rand::Rng;

fn random_spd(seed: u64, n: usize) -> DMatrix<f64> {
    let mut rng = seeded_rng(seed);
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    g.transpose() * &g + DMatrix::identity(n, n)
}

#[test]
fn recovers_known_solution_10x10() {
    let m = random_spd(42, 10);
    let mut rng = seeded_rng(43);
    let x0 = DVector::from_fn(10, |_, _| rng.gen_range(-5.0..5.0));
    let f = spd_factorize(&m).unwrap();
    assert_eq!(f.regularization_applied, 0.0);
    let x = spd_solve(&f, &(&m * &x0)).unwrap();
    assert!((&x - &x0).amax() / x0.amax() <= 1e-8);
}

proptest! {
    #[test]
    fn solve_inverts_product(seed in any::<u64>(), n in 1usize..12) {
        let m = random_spd(seed, n);
        let mut rng = seeded_rng(seed ^ 0x9e37);
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
        let f = spd_factorize(&m).unwrap();
        let back = spd_solve(&f, &(&m * &v)).unwrap();
        prop_assert!((&back - &v).amax() / v.amax().max(1e-12) <= 1e-8);
        // reconstruction
        prop_assert!((f.reconstruct() - &m).amax() <= 1e-10 * m.amax());
        // relative residual
        let rhs = &m * &v;
        prop_assert!((&m * &back - &rhs).norm() / rhs.norm().max(1e-300) <= 1e-8);
    }
}
