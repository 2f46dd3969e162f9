//! Synthetic least-squares problems spread over simulated compute nodes.
//!
//! A [`RegressionProblem`] holds a feature matrix `X` (`rows x dims`), the
//! generating weights `w*`, clean labels `X w*`, possibly contaminated labels,
//! and an IID partition of the rows into node shards. The global objective is
//!
//! ```text
//! F(x) = sum_i p_i * (1 / (2 |S_i|)) * || y_i - X_i x ||^2,   p_i = |S_i| / rows
//! ```
//!
//! Noise enters in one of two ways. Under [`NoiseMode::LabelContamination`]
//! the labels are perturbed once at generation time and minibatch sampling
//! produces the stochastic gradients. Under [`NoiseMode::AdditiveGradient`]
//! every gradient query returns the exact shard gradient plus a fresh noise
//! draw; objective values then refer to the noiseless `F`.

mod linalg;

use std::io::Write;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::noise::{sample_noise, NoiseSpec};
use crate::scalar::Real;
use crate::vectorops::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    LabelContamination,
    AdditiveGradient,
}

/// Rows used for one gradient query.
#[derive(Debug, Clone, Copy)]
pub enum Batch<'a> {
    /// Every row of the node's shard.
    Full,
    /// Global row indices, all belonging to the node's shard.
    Rows(&'a [usize]),
}

#[derive(Debug, Clone)]
struct Shard<T> {
    rows: Vec<usize>,
    /// `X_S^T X_S / |S|`, row-major `dims x dims`.
    gram: Vec<T>,
    /// `X_S^T y_S / |S|`.
    moment: Vec<T>,
    /// `||y_S||^2 / (2 |S|)`.
    half_label_energy: T,
}

/// Minimizer of the global objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum<T> {
    pub point: Vector<T>,
    pub value: T,
    /// The normal equations were singular and a ridge term was added.
    pub regularized: bool,
}

#[derive(Debug, Clone)]
pub struct RegressionProblem<T> {
    rows: usize,
    dims: usize,
    features: Vec<T>,
    w_star: Vector<T>,
    labels_true: Vec<T>,
    labels: Vec<T>,
    shards: Vec<Shard<T>>,
    row_owner: Vec<usize>,
    node_weights: Vec<T>,
    noise_mode: NoiseMode,
    gradient_noise: NoiseSpec,
    /// Global `A = sum p_i gram_i`.
    hessian: Vec<T>,
    /// Global `b = sum p_i moment_i`.
    rhs: Vec<T>,
    offset: T,
}

/// Gaussian features and weights: `X_ij ~ N(0,1)`, `w* ~ N(0, I)`.
pub fn gen_gaussian_regression<T: Real, R: Rng + ?Sized>(
    rows: usize,
    dims: usize,
    rng: &mut R,
) -> Result<RegressionProblem<T>> {
    if dims == 0 || rows < dims {
        return Err(Error::contract(format!(
            "gaussian regression needs rows >= dims >= 1, got rows={rows}, dims={dims}"
        )));
    }
    let features = (0..rows * dims).map(|_| T::of(StandardNormal.sample(rng))).collect();
    Ok(RegressionProblem::from_parts(rows, dims, features, rng))
}

/// Token-like binary features: the first `floor(common_fraction * dims)`
/// columns are active with probability 0.9, the rest with probability 0.1.
pub fn gen_syntoken<T: Real, R: Rng + ?Sized>(
    rows: usize,
    dims: usize,
    common_fraction: f64,
    rng: &mut R,
) -> Result<RegressionProblem<T>> {
    if rows == 0 || dims == 0 {
        return Err(Error::contract("syntoken needs at least one row and one column"));
    }
    if !(common_fraction > 0.0 && common_fraction < 1.0) {
        return Err(Error::contract(format!(
            "common_fraction must lie in (0, 1), got {common_fraction}"
        )));
    }
    let common = (common_fraction * dims as f64).floor() as usize;
    let frequent = Bernoulli::new(0.9).expect("valid probability");
    let rare = Bernoulli::new(0.1).expect("valid probability");
    let mut features = Vec::with_capacity(rows * dims);
    for _ in 0..rows {
        for j in 0..dims {
            let on = if j < common {
                frequent.sample(rng)
            } else {
                rare.sample(rng)
            };
            features.push(if on { T::one() } else { T::zero() });
        }
    }
    Ok(RegressionProblem::from_parts(rows, dims, features, rng))
}

impl<T: Real> RegressionProblem<T> {
    fn from_parts<R: Rng + ?Sized>(rows: usize, dims: usize, features: Vec<T>, rng: &mut R) -> Self {
        let w_star = Vector::from_vec((0..dims).map(|_| T::of(StandardNormal.sample(rng))).collect());
        Self::from_data(rows, dims, features, w_star)
    }

    /// Builds an uncontaminated single-shard problem with labels `X w*`.
    pub fn from_data(rows: usize, dims: usize, features: Vec<T>, w_star: Vector<T>) -> Self {
        assert_eq!(features.len(), rows * dims, "feature matrix shape");
        assert_eq!(w_star.dim(), dims, "ground-truth dimension");
        let labels_true: Vec<T> = features
            .chunks_exact(dims)
            .map(|row| row.iter().zip(w_star.iter()).map(|(&a, &b)| a * b).sum())
            .collect();
        let mut problem = Self {
            rows,
            dims,
            features,
            w_star,
            labels: labels_true.clone(),
            labels_true,
            shards: Vec::new(),
            row_owner: vec![0; rows],
            node_weights: Vec::new(),
            noise_mode: NoiseMode::LabelContamination,
            gradient_noise: NoiseSpec::none(),
            hessian: Vec::new(),
            rhs: Vec::new(),
            offset: T::zero(),
        };
        problem.set_shards(vec![(0..rows).collect()]);
        problem
    }

    /// Replaces the labels by `X w* + xi`, one fixed draw of `xi` per row.
    pub fn contaminate_labels<R: Rng + ?Sized>(mut self, spec: &NoiseSpec, rng: &mut R) -> Self {
        let noise: Vector<T> = sample_noise(spec, self.rows, rng);
        self.labels = self
            .labels_true
            .iter()
            .zip(noise.iter())
            .map(|(&y, &xi)| y + xi)
            .collect();
        self.noise_mode = NoiseMode::LabelContamination;
        self.refresh();
        self
    }

    /// Switches to additive gradient noise drawn from `spec` on every query.
    pub fn with_gradient_noise(mut self, spec: NoiseSpec) -> Self {
        self.noise_mode = NoiseMode::AdditiveGradient;
        self.gradient_noise = spec;
        self
    }

    /// Random IID partition into `nodes` shards; the first `rows % nodes`
    /// shards get one extra row.
    pub fn shard_iid<R: Rng + ?Sized>(mut self, nodes: usize, rng: &mut R) -> Result<Self> {
        if nodes == 0 || nodes > self.rows {
            return Err(Error::contract(format!(
                "cannot split {} rows into {nodes} shards",
                self.rows
            )));
        }
        let mut order: Vec<usize> = (0..self.rows).collect();
        order.shuffle(rng);
        let base = self.rows / nodes;
        let extra = self.rows % nodes;
        let mut shards = Vec::with_capacity(nodes);
        let mut start = 0;
        for i in 0..nodes {
            let len = base + usize::from(i < extra);
            shards.push(order[start..start + len].to_vec());
            start += len;
        }
        self.set_shards(shards);
        Ok(self)
    }

    fn set_shards(&mut self, shards: Vec<Vec<usize>>) {
        for (node, rows) in shards.iter().enumerate() {
            for &r in rows {
                self.row_owner[r] = node;
            }
        }
        let total = T::of_usize(self.rows);
        self.node_weights = shards.iter().map(|s| T::of_usize(s.len()) / total).collect();
        self.shards = shards
            .into_iter()
            .map(|rows| Shard {
                rows,
                gram: Vec::new(),
                moment: Vec::new(),
                half_label_energy: T::zero(),
            })
            .collect();
        self.refresh();
    }

    fn row(&self, r: usize) -> &[T] {
        &self.features[r * self.dims..(r + 1) * self.dims]
    }

    /// Recomputes shard statistics and the global normal system.
    fn refresh(&mut self) {
        let m = self.dims;
        for s in 0..self.shards.len() {
            let inv = T::one() / T::of_usize(self.shards[s].rows.len());
            let mut gram = vec![T::zero(); m * m];
            let mut moment = vec![T::zero(); m];
            let mut energy = T::zero();
            for &r in &self.shards[s].rows {
                let x = self.row(r);
                let y = self.labels[r];
                for i in 0..m {
                    let xi = x[i];
                    if xi == T::zero() {
                        continue;
                    }
                    moment[i] = moment[i] + xi * y;
                    let g = &mut gram[i * m..(i + 1) * m];
                    for j in 0..m {
                        g[j] = g[j] + xi * x[j];
                    }
                }
                energy = energy + y * y;
            }
            let shard = &mut self.shards[s];
            shard.gram = gram.into_iter().map(|v| v * inv).collect();
            shard.moment = moment.into_iter().map(|v| v * inv).collect();
            shard.half_label_energy = energy * inv / T::of(2.0);
        }
        self.hessian = vec![T::zero(); m * m];
        self.rhs = vec![T::zero(); m];
        self.offset = T::zero();
        for (shard, &p) in self.shards.iter().zip(&self.node_weights) {
            for (h, &g) in self.hessian.iter_mut().zip(&shard.gram) {
                *h = *h + p * g;
            }
            for (b, &v) in self.rhs.iter_mut().zip(&shard.moment) {
                *b = *b + p * v;
            }
            self.offset = self.offset + p * shard.half_label_energy;
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn nodes(&self) -> usize {
        self.shards.len()
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn w_star(&self) -> &Vector<T> {
        &self.w_star
    }

    pub fn labels_true(&self) -> &[T] {
        &self.labels_true
    }

    pub fn labels(&self) -> &[T] {
        &self.labels
    }

    pub fn shard(&self, node: usize) -> &[usize] {
        &self.shards[node].rows
    }

    pub fn node_weights(&self) -> &[T] {
        &self.node_weights
    }

    pub fn noise_mode(&self) -> NoiseMode {
        self.noise_mode
    }

    pub fn gradient_noise(&self) -> &NoiseSpec {
        &self.gradient_noise
    }

    /// Weighted Hessian `A` of the global objective, row-major.
    pub fn hessian(&self) -> &[T] {
        &self.hessian
    }

    fn check_point(&self, x: &Vector<T>) -> Result<()> {
        if x.dim() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                found: x.dim(),
            });
        }
        Ok(())
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.shards.len() {
            return Err(Error::contract(format!(
                "node {node} out of range for {} shards",
                self.shards.len()
            )));
        }
        Ok(())
    }

    /// Exact gradient of the node objective over its whole shard.
    fn shard_gradient(&self, node: usize, x: &Vector<T>) -> Vector<T> {
        let shard = &self.shards[node];
        let mut g = linalg::matvec(&shard.gram, self.dims, x.as_slice());
        for (gi, &h) in g.iter_mut().zip(&shard.moment) {
            *gi = *gi - h;
        }
        Vector::from_vec(g)
    }

    /// Stochastic gradient of node `node` at `x`.
    ///
    /// Label mode: `X_b^T (X_b x - y_b) / |b|` over the batch rows. Additive
    /// mode: exact shard gradient plus one draw of the gradient noise; the
    /// batch argument only selects nothing there and is ignored.
    pub fn node_gradient<R: Rng + ?Sized>(
        &self,
        node: usize,
        x: &Vector<T>,
        batch: Batch<'_>,
        rng: &mut R,
    ) -> Result<Vector<T>> {
        self.check_node(node)?;
        self.check_point(x)?;
        match self.noise_mode {
            NoiseMode::AdditiveGradient => {
                let mut g = self.shard_gradient(node, x);
                if !self.gradient_noise.is_none() {
                    let xi: Vector<T> = sample_noise(&self.gradient_noise, self.dims, rng);
                    g.axpy_in_place(T::one(), &xi)?;
                }
                Ok(g)
            }
            NoiseMode::LabelContamination => match batch {
                Batch::Full => Ok(self.shard_gradient(node, x)),
                Batch::Rows(rows) => self.batch_gradient(node, x, rows),
            },
        }
    }

    fn batch_gradient(&self, node: usize, x: &Vector<T>, rows: &[usize]) -> Result<Vector<T>> {
        if rows.is_empty() {
            return Err(Error::contract("gradient batch is empty"));
        }
        let mut g = vec![T::zero(); self.dims];
        for &r in rows {
            if r >= self.rows || self.row_owner[r] != node {
                return Err(Error::contract(format!("row {r} is not in the shard of node {node}")));
            }
            let feat = self.row(r);
            let residual = feat.iter().zip(x.iter()).map(|(&a, &b)| a * b).sum::<T>() - self.labels[r];
            for (gi, &a) in g.iter_mut().zip(feat) {
                *gi = *gi + a * residual;
            }
        }
        let inv = T::one() / T::of_usize(rows.len());
        Ok(Vector::from_vec(g.into_iter().map(|v| v * inv).collect()))
    }

    /// Uniformly samples `size` distinct rows of the node's shard, or the
    /// whole shard when it is not larger than `size`.
    pub fn sample_batch<R: Rng + ?Sized>(&self, node: usize, size: usize, rng: &mut R) -> Option<Vec<usize>> {
        let rows = &self.shards[node].rows;
        if size >= rows.len() {
            return None;
        }
        Some(
            index::sample(rng, rows.len(), size)
                .into_iter()
                .map(|i| rows[i])
                .collect(),
        )
    }

    /// `(1 / (2 |S_i|)) ||y_i - X_i x||^2` by direct residuals.
    pub fn node_objective(&self, node: usize, x: &Vector<T>) -> Result<T> {
        self.check_node(node)?;
        self.check_point(x)?;
        let shard = &self.shards[node].rows;
        let sum: T = shard
            .iter()
            .map(|&r| {
                let fit: T = self.row(r).iter().zip(x.iter()).map(|(&a, &b)| a * b).sum();
                let res = self.labels[r] - fit;
                res * res
            })
            .sum();
        Ok(sum / (T::of(2.0) * T::of_usize(shard.len())))
    }

    /// Global objective `sum_i p_i F_i(x)`.
    pub fn objective_value(&self, x: &Vector<T>) -> Result<T> {
        let mut total = T::zero();
        for (node, &p) in self.node_weights.iter().enumerate() {
            total = total + p * self.node_objective(node, x)?;
        }
        Ok(total)
    }

    /// Deterministic global gradient `A x - b`.
    pub fn full_gradient(&self, x: &Vector<T>) -> Result<Vector<T>> {
        self.check_point(x)?;
        let mut g = linalg::matvec(&self.hessian, self.dims, x.as_slice());
        for (gi, &b) in g.iter_mut().zip(&self.rhs) {
            *gi = *gi - b;
        }
        Ok(Vector::from_vec(g))
    }

    /// `F(x) - F(x*) = (x - x*)^T A (x - x*) / 2`, exact for this quadratic
    /// and free of the cancellation in subtracting two objective values.
    pub fn objective_gap(&self, x: &Vector<T>, optimum: &Optimum<T>) -> Result<T> {
        let e = x.sub(&optimum.point)?;
        let ae = linalg::matvec(&self.hessian, self.dims, e.as_slice());
        let quad: T = e.iter().zip(&ae).map(|(&a, &b)| a * b).sum();
        Ok(quad / T::of(2.0))
    }

    /// Minimizer of [`objective_value`](Self::objective_value) from the
    /// weighted normal equations. Singular systems get a ridge of
    /// `1e-10 * trace(A)` and are flagged.
    pub fn exact_optimum(&self) -> Optimum<T> {
        let m = self.dims;
        let (solution, regularized) = match linalg::solve_spd(&self.hessian, m, &self.rhs) {
            Some(x) => (x, false),
            None => {
                let trace: T = (0..m).map(|i| self.hessian[i * m + i]).sum();
                let ridge = T::of(1e-10) * trace.max(T::min_positive_value());
                let mut a = self.hessian.clone();
                for i in 0..m {
                    a[i * m + i] = a[i * m + i] + ridge;
                }
                let x = linalg::solve_spd(&a, m, &self.rhs).expect("ridge-regularized system is positive definite");
                (x, true)
            }
        };
        let point = Vector::from_vec(solution);
        let value = self.objective_value(&point).expect("optimum has the problem dimension");
        Optimum {
            point,
            value,
            regularized,
        }
    }

    /// Writes the problem as CSV: header `row,shard,y_true,y_hat,x_0..x_{m-1}`,
    /// one line per data row, then a final line whose `row` field is `w_star`
    /// carrying the ground-truth weights in the `x_j` columns.
    pub fn write_columnar(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let mut header = String::from("row,shard,y_true,y_hat");
        for j in 0..self.dims {
            header.push_str(&format!(",x_{j}"));
        }
        writeln!(out, "{header}").map_err(io)?;
        for r in 0..self.rows {
            let mut line = format!(
                "{r},{},{:.16e},{:.16e}",
                self.row_owner[r],
                self.labels_true[r].as_f64(),
                self.labels[r].as_f64()
            );
            for &v in self.row(r) {
                line.push_str(&format!(",{:.16e}", v.as_f64()));
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        let mut line = String::from("w_star,,,");
        for &v in self.w_star.iter() {
            line.push_str(&format!(",{:.16e}", v.as_f64()));
        }
        writeln!(out, "{line}").map_err(io)?;
        out.flush().map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{Purpose, Streams};

    fn rng(tag: u64) -> crate::stream::StreamRng {
        Streams::new(99).substream(Purpose::Custom(tag), 0, 0, 0)
    }

    fn scalar_problem(x: f64, y: f64) -> RegressionProblem<f64> {
        RegressionProblem::from_data(1, 1, vec![x], Vector::from_vec(vec![y / x]))
    }

    #[test]
    fn gaussian_entries_are_standard_normal() {
        let p: RegressionProblem<f64> = gen_gaussian_regression(200, 50, &mut rng(1)).unwrap();
        let n = p.features().len() as f64;
        let mean = p.features().iter().sum::<f64>() / n;
        let var = p.features().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05 && (var - 1.0).abs() < 0.1, "{mean} {var}");
    }

    #[test]
    fn scalar_gaussian_labels() {
        let p: RegressionProblem<f64> = gen_gaussian_regression(1, 1, &mut rng(2)).unwrap();
        assert_eq!(p.labels_true()[0], p.features()[0] * p.w_star()[0]);
    }

    #[test]
    fn generation_is_deterministic() {
        let a: RegressionProblem<f64> = gen_syntoken(50, 10, 0.2, &mut rng(3)).unwrap();
        let b: RegressionProblem<f64> = gen_syntoken(50, 10, 0.2, &mut rng(3)).unwrap();
        assert_eq!(a.features(), b.features());
        assert_eq!(a.w_star(), b.w_star());
        assert!(gen_gaussian_regression::<f64, _>(3, 5, &mut rng(4)).is_err());
    }

    #[test]
    fn syntoken_activation_rates() {
        let p: RegressionProblem<f64> = gen_syntoken(10_000, 100, 0.1, &mut rng(5)).unwrap();
        for j in 0..100 {
            let rate = (0..10_000).map(|r| p.features()[r * 100 + j]).sum::<f64>() / 10_000.0;
            let expected = if j < 10 { 0.9 } else { 0.1 };
            assert!((rate - expected).abs() < 0.02, "column {j}: {rate}");
        }
    }

    #[test]
    fn syntoken_boundaries() {
        let p: RegressionProblem<f64> = gen_syntoken(2000, 5, 0.1, &mut rng(6)).unwrap();
        let rate = p.features().iter().sum::<f64>() / p.features().len() as f64;
        assert!((rate - 0.1).abs() < 0.02, "all columns rare: {rate}");
        let q: RegressionProblem<f64> = gen_syntoken(1, 2, 0.5, &mut rng(7)).unwrap();
        assert!(q.features().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(gen_syntoken::<f64, _>(1, 2, 1.0, &mut rng(7)).is_err());
    }

    #[test]
    fn contamination_is_fixed_and_replayable() {
        let base: RegressionProblem<f64> = gen_gaussian_regression(100, 5, &mut rng(8)).unwrap();
        let clean = base.clone().contaminate_labels(&NoiseSpec::none(), &mut rng(9));
        assert_eq!(clean.labels(), clean.labels_true());
        let spec = NoiseSpec::student_t(1.0, 1.5).unwrap();
        let a = base.clone().contaminate_labels(&spec, &mut rng(10));
        let b = base.contaminate_labels(&spec, &mut rng(10));
        assert_eq!(a.labels(), b.labels());
        assert_ne!(a.labels(), a.labels_true());
    }

    #[test]
    fn gaussian_contamination_is_centered() {
        let base = RegressionProblem::from_data(1_000_000, 1, vec![1.0; 1_000_000], Vector::from_vec(vec![0.5]));
        let p = base.contaminate_labels(&NoiseSpec::gaussian(1.0).unwrap(), &mut rng(11));
        let mean = p.labels().iter().zip(p.labels_true()).map(|(a, b)| a - b).sum::<f64>() / 1e6;
        assert!(mean.abs() < 0.005, "{mean}");
    }

    #[test]
    fn sharding_sizes_and_weights() {
        let p: RegressionProblem<f64> = gen_gaussian_regression(100, 3, &mut rng(12)).unwrap();
        let even = p.clone().shard_iid(10, &mut rng(13)).unwrap();
        assert!((0..10).all(|i| even.shard(i).len() == 10));
        assert!(even.node_weights().iter().all(|&w| w == 0.1));

        let q: RegressionProblem<f64> = gen_gaussian_regression(101, 3, &mut rng(14)).unwrap();
        let odd = q.shard_iid(10, &mut rng(15)).unwrap();
        assert_eq!(odd.shard(0).len(), 11);
        assert!((1..10).all(|i| odd.shard(i).len() == 10));
        assert!((odd.node_weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let mut all: Vec<usize> = (0..10).flat_map(|i| odd.shard(i).to_vec()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());

        let single = p.clone().shard_iid(1, &mut rng(16)).unwrap();
        assert_eq!(single.shard(0).len(), 100);
        assert_eq!(single.node_weights(), &[1.0]);
        assert!(p.shard_iid(101, &mut rng(17)).is_err());
    }

    #[test]
    fn scalar_gradient_example() {
        let p = RegressionProblem::from_data(1, 1, vec![1.0], Vector::from_vec(vec![0.0]));
        let g = p
            .node_gradient(0, &Vector::from_vec(vec![2.0]), Batch::Rows(&[0]), &mut rng(18))
            .unwrap();
        assert_eq!(g.as_slice(), &[2.0]);
        assert!(p
            .node_gradient(0, &Vector::from_vec(vec![2.0]), Batch::Rows(&[]), &mut rng(18))
            .is_err());
    }

    #[test]
    fn additive_mode_without_noise_is_exact() {
        let p: RegressionProblem<f64> = gen_gaussian_regression(40, 4, &mut rng(19)).unwrap();
        let p = p
            .shard_iid(2, &mut rng(20))
            .unwrap()
            .with_gradient_noise(NoiseSpec::none());
        let x = Vector::from_vec(vec![0.3, -1.0, 2.0, 0.5]);
        let g = p.node_gradient(1, &x, Batch::Full, &mut rng(21)).unwrap();
        assert_eq!(g, p.shard_gradient(1, &x));
    }

    #[test]
    fn batch_rows_must_belong_to_the_node() {
        let p: RegressionProblem<f64> = gen_gaussian_regression(20, 2, &mut rng(22)).unwrap();
        let p = p.shard_iid(2, &mut rng(23)).unwrap();
        let foreign = p.shard(1)[0];
        let x = Vector::zeros(2);
        assert!(p.node_gradient(0, &x, Batch::Rows(&[foreign]), &mut rng(24)).is_err());
        assert!(p.node_gradient(2, &x, Batch::Full, &mut rng(24)).is_err());
    }

    #[test]
    fn optimum_examples() {
        let p = scalar_problem(2.0, 6.0);
        let opt = p.exact_optimum();
        assert!((opt.point[0] - 3.0).abs() < 1e-15 && !opt.regularized);

        let q: RegressionProblem<f64> = gen_gaussian_regression(60, 8, &mut rng(25)).unwrap();
        let opt = q.exact_optimum();
        let err = opt.point.sub(q.w_star()).unwrap().linf_norm();
        assert!(err < 1e-8, "{err}");
        assert!(q.objective_value(q.w_star()).unwrap() == 0.0);
    }

    #[test]
    fn singular_system_is_regularized_and_flagged() {
        // Two identical columns.
        let features = vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        let p = RegressionProblem::from_data(3, 2, features, Vector::from_vec(vec![1.0, 1.0]));
        let opt = p.exact_optimum();
        assert!(opt.regularized);
        assert!(opt.value < 1e-8);
    }

    #[test]
    fn objective_is_nonnegative_and_gap_matches_difference() {
        let p: RegressionProblem<f64> = gen_gaussian_regression(50, 5, &mut rng(26)).unwrap();
        let p = p
            .contaminate_labels(&NoiseSpec::gaussian(1.0).unwrap(), &mut rng(27))
            .shard_iid(3, &mut rng(28))
            .unwrap();
        let opt = p.exact_optimum();
        for k in 0..20 {
            let x: Vector<f64> = sample_noise(&NoiseSpec::gaussian(2.0).unwrap(), 5, &mut rng(100 + k));
            let f = p.objective_value(&x).unwrap();
            assert!(f >= 0.0);
            let gap = p.objective_gap(&x, &opt).unwrap();
            assert!((gap - (f - opt.value)).abs() < 1e-10 * (1.0 + f));
        }
    }

    #[test]
    fn columnar_export_layout() {
        let p: RegressionProblem<f64> = gen_gaussian_regression(4, 2, &mut rng(29)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("problem.csv");
        p.write_columnar(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "row,shard,y_true,y_hat,x_0,x_1");
        assert_eq!(lines.len(), 6);
        assert!(lines[5].starts_with("w_star,,,,"));
        let w0: f64 = lines[5].split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(w0, p.w_star()[0]);
    }
}
