//! Regression problems checked against dense nalgebra references.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use tailopt::noise::{empirical_moment, NoiseSpec};
use tailopt::problems::{gen_gaussian_regression, gen_syntoken, Batch, RegressionProblem};
use tailopt::stream::{Purpose, Streams};
use tailopt::vectorops::Vector;

fn problem(seed: u64, rows: usize, dims: usize, nodes: usize, noise: NoiseSpec) -> RegressionProblem<f64> {
    let s = Streams::new(seed);
    gen_gaussian_regression::<f64, _>(rows, dims, &mut s.features())
        .unwrap()
        .contaminate_labels(&noise, &mut s.contamination())
        .shard_iid(nodes, &mut s.sharding())
        .unwrap()
}

fn design(p: &RegressionProblem<f64>, rows: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let m = p.dims();
    let x = DMatrix::from_fn(rows.len(), m, |i, j| p.features()[rows[i] * m + j]);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&r| p.labels()[r]));
    (x, y)
}

fn dense_point(x: &Vector<f64>) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

fn random_point(rng: &mut impl Rng, dims: usize) -> Vector<f64> {
    Vector::from_vec((0..dims).map(|_| rng.random_range(-2.0..2.0)).collect())
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}

#[test]
fn full_shard_gradient_matches_dense_multiply() {
    let p = problem(1, 90, 7, 4, NoiseSpec::student_t(1.0, 1.5).unwrap());
    let mut rng = Streams::new(1).substream(Purpose::Custom(0), 0, 0, 0);
    for node in 0..4 {
        let x = random_point(&mut rng, 7);
        let (xs, y) = design(&p, p.shard(node));
        let reference = xs.transpose() * (&xs * dense_point(&x) - y) / p.shard(node).len() as f64;
        let g = p.node_gradient(node, &x, Batch::Full, &mut rng).unwrap();
        assert!(rel_err(g.as_slice(), reference.as_slice()) < 1e-12);
    }
}

#[test]
fn optimum_solves_the_weighted_normal_equations() {
    let p = problem(2, 150, 12, 5, NoiseSpec::gaussian(0.5).unwrap());
    let all: Vec<usize> = (0..p.rows()).collect();
    let (x, y) = design(&p, &all);
    // IID shards of near-equal size: weights p_i / |S_i| are 1 / M up to the
    // remainder rows, so rebuild the exact weighting row by row.
    let mut w = DVector::zeros(p.rows());
    for node in 0..p.nodes() {
        for &r in p.shard(node) {
            w[r] = p.node_weights()[node] / p.shard(node).len() as f64;
        }
    }
    let wx = DMatrix::from_fn(p.rows(), p.dims(), |i, j| w[i] * x[(i, j)]);
    let a = x.transpose() * &wx;
    let b = wx.transpose() * y;
    let reference = a.cholesky().unwrap().solve(&b);
    let opt = p.exact_optimum();
    assert!(!opt.regularized);
    assert!(rel_err(opt.point.as_slice(), reference.as_slice()) < 1e-10);
}

#[test]
fn uncontaminated_least_squares_recovers_the_generator() {
    let p = problem(3, 300, 20, 3, NoiseSpec::none());
    let opt = p.exact_optimum();
    assert!(rel_err(opt.point.as_slice(), p.w_star().as_slice()) < 1e-8);
    assert!(p.objective_value(&opt.point).unwrap() < 1e-20);
}

#[test]
fn size_one_batches_average_to_the_shard_gradient() {
    let p = problem(4, 80, 6, 3, NoiseSpec::student_t(1.0, 1.5).unwrap());
    let mut rng = Streams::new(4).substream(Purpose::Custom(0), 0, 0, 0);
    for node in 0..3 {
        let x = random_point(&mut rng, 6);
        let shard = p.shard(node);
        let mut mean = vec![0.0; 6];
        for r in shard {
            let g = p
                .node_gradient(node, &x, Batch::Rows(std::slice::from_ref(r)), &mut rng)
                .unwrap();
            for (m, gi) in mean.iter_mut().zip(g.iter()) {
                *m += gi / shard.len() as f64;
            }
        }
        let full = p.node_gradient(node, &x, Batch::Full, &mut rng).unwrap();
        assert!(rel_err(&mean, full.as_slice()) < 1e-10);
    }
}

#[test]
fn gap_dominates_the_strong_convexity_bound() {
    let p = problem(5, 200, 15, 4, NoiseSpec::gaussian(1.0).unwrap());
    let h = DMatrix::from_row_slice(15, 15, p.hessian());
    let lambda_min = h.symmetric_eigenvalues().min();
    assert!(lambda_min > 0.0);
    let opt = p.exact_optimum();
    let f_star = p.objective_value(&opt.point).unwrap();
    let mut rng = Streams::new(5).substream(Purpose::Custom(0), 0, 0, 0);
    for _ in 0..100 {
        let x = random_point(&mut rng, 15);
        let gap = p.objective_value(&x).unwrap() - f_star;
        let dist = x.sub(&opt.point).unwrap().l2_norm();
        assert!(
            gap >= 0.5 * lambda_min * dist * dist * (1.0 - 1e-9),
            "{gap} < {}",
            0.5 * lambda_min * dist * dist
        );
    }
}

#[test]
fn hessian_matches_dense_gram() {
    let s = Streams::new(6);
    let p = gen_syntoken::<f64, _>(120, 30, 0.1, &mut s.features())
        .unwrap()
        .shard_iid(4, &mut s.sharding())
        .unwrap();
    let all: Vec<usize> = (0..p.rows()).collect();
    let (x, _) = design(&p, &all);
    let mut reference = DMatrix::zeros(30, 30);
    for node in 0..4 {
        let (xs, _) = design(&p, p.shard(node));
        reference += xs.transpose() * xs * (p.node_weights()[node] / p.shard(node).len() as f64);
    }
    let h = DMatrix::from_row_slice(30, 30, p.hessian());
    assert!((h - &reference).norm() <= 1e-12 * reference.norm());
    assert_eq!(x.nrows(), 120);
}

const SMALL: usize = 1_000;
const LARGE: usize = 100_000;
const REPLICATES: usize = 15;

/// Median over disjoint blocks of the ratio between the sample moment of
/// `LARGE` and of `SMALL` single-row gradient coordinates at x = 0.
fn median_moment_growth(noise: NoiseSpec, order: f64) -> f64 {
    let rows = REPLICATES * (SMALL + LARGE);
    let p = problem(7, rows, 1, 1, noise);
    let x = Vector::zeros(1);
    let mut rng = Streams::new(7).substream(Purpose::Custom(0), 0, 0, 0);
    let g: Vec<f64> = (0..rows)
        .map(|r| p.node_gradient(0, &x, Batch::Rows(&[r]), &mut rng).unwrap()[0])
        .collect();
    let mut ratios: Vec<f64> = g
        .chunks(SMALL + LARGE)
        .map(|block| {
            let (small, large) = block.split_at(SMALL);
            empirical_moment(large, order).unwrap() / empirical_moment(small, order).unwrap()
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    ratios[REPLICATES / 2]
}

/// Single-row gradient coordinates inherit the label tail: the typical
/// second moment climbs with the sample count while the 1.2-moment settles.
/// A Gaussian-contaminated control stays flat.
#[test]
fn label_contamination_makes_gradients_heavy_tailed() {
    let heavy = NoiseSpec::student_t(1.0, 1.5).unwrap();
    let second = median_moment_growth(heavy, 2.0);
    let low = median_moment_growth(heavy, 1.2);
    let control = median_moment_growth(NoiseSpec::gaussian(1.0).unwrap(), 2.0);
    assert!(second > 2.0, "second moment grew only {second}x");
    assert!((control - 1.0).abs() < 0.2, "control grew {control}x");
    assert!((low - 1.0).abs() < 0.2, "1.2-moment grew {low}x");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn batch_gradients_match_central_differences(seed in 0u64..1000, size in 1usize..20) {
        let p = problem(seed, 60, 5, 2, NoiseSpec::student_t(1.0, 1.5).unwrap());
        let mut rng = Streams::new(seed).substream(Purpose::Custom(1), 0, 0, 0);
        let x = random_point(&mut rng, 5);
        let rows = p.sample_batch(1, size, &mut rng).unwrap_or_else(|| p.shard(1).to_vec());
        let (xs, y) = design(&p, &rows);
        let f = |v: &DVector<f64>| (&xs * v - &y).norm_squared() / (2.0 * rows.len() as f64);
        let g = p.node_gradient(1, &x, Batch::Rows(&rows), &mut rng).unwrap();
        let h = 1e-6;
        let fd: Vec<f64> = (0..5)
            .map(|j| {
                let mut up = dense_point(&x);
                let mut down = up.clone();
                up[j] += h;
                down[j] -= h;
                (f(&up) - f(&down)) / (2.0 * h)
            })
            .collect();
        prop_assert!(rel_err(&fd, g.as_slice()) < 1e-6);
    }
}
