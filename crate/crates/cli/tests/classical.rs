use tree_kaczmarz::linalg::{distance, Matrix};
use tree_kaczmarz::solver::iterate;
use tree_kaczmarz_cli::experiment::{instance, ExperimentConfig};
use tree_kaczmarz_cli::generate::MatrixKind;

/// Textbook cyclic Kaczmarz sweep with relaxation.
fn classical_sweep(a: &Matrix, b: &[f64], omega: f64, x: &[f64]) -> Vec<f64> {
    let mut x = x.to_vec();
    for (i, &bi) in b.iter().enumerate() {
        let row = a.row(i);
        let r = bi - row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>();
        let nn: f64 = row.iter().map(|v| v * v).sum();
        for (xj, aj) in x.iter_mut().zip(row) {
            *xj += omega * r / nn * aj;
        }
    }
    x
}

#[test]
fn chain_column_is_classical_kaczmarz() {
    for seed in 0..10 {
        let cfg = ExperimentConfig::new(3, 1, seed);
        for kind in MatrixKind::ALL {
            let (g, chain) = instance(&cfg, kind, 0).unwrap();
            for omega in [0.5, 1.0, 1.7, 1.95] {
                let (mut x, mut y) = (vec![0.0; 3], vec![0.0; 3]);
                for _ in 0..10 {
                    x = iterate(&chain, omega, &x).unwrap();
                    y = classical_sweep(&g.matrix, &g.rhs, omega, &y);
                    assert!(distance(&x, &y) <= 1e-12, "seed {seed} {kind:?} ω={omega}");
                }
            }
        }
    }
}

#[test]
fn exact_orthogonal_converges_in_one_sweep() {
    use rand::SeedableRng;
    use tree_kaczmarz::TreeSystem;
    use tree_kaczmarz_cli::experiment::error_after;
    use tree_kaczmarz_cli::generate::{random_orthogonal, unit_vector};
    for seed in 0..10 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for n in [3, 8] {
            let q = random_orthogonal(&mut rng, n);
            let x = unit_vector(&mut rng, n);
            let b = q.mul_vec(&x).unwrap();
            let chain = TreeSystem::chain(&q, &b).unwrap();
            assert!(error_after(&chain, &x, 1.0, 1).unwrap() <= 1e-12);
        }
    }
}
