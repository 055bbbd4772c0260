//! Gaussian Bayesian networks, their covariances, and synthetic data.
//!
//! A [`Gbn`] is a linear structural equation model: a weighted DAG `W` where
//! each node is a linear combination of its parents plus Gaussian noise,
//! `x_i = Σ_j W[j][i]·x_j + z_i`. This module generates random
//! Erdős–Rényi instances, computes the exact covariance
//! `Σ = σ_z²(I−Wᵀ)⁻¹(I−Wᵀ)⁻ᵀ`, simulates samples, pushes them through a
//! sparse measurement system `y = Ax + n`, and forms sample covariances.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Mat;
use crate::sampler::SensingMatrix;
use crate::special::standard_normal;
use crate::{Error, Result};

/// A Gaussian Bayesian network: weighted DAG adjacency plus noise variance.
///
/// `weights().get(i, j)` is the weight of the directed edge `x_i → x_j`;
/// the diagonal is zero and the directed graph is acyclic (both enforced at
/// construction).
#[derive(Debug, Clone, PartialEq)]
pub struct Gbn {
    w: Mat,
    noise_var: f64,
}

impl Gbn {
    /// Wraps a weighted adjacency matrix, validating shape, zero diagonal,
    /// and acyclicity.
    pub fn new(w: Mat, noise_var: f64) -> Result<Self> {
        if w.rows() != w.cols() {
            return Err(Error::InvalidParameter("adjacency matrix must be square"));
        }
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::InvalidParameter("noise variance must be positive and finite"));
        }
        for i in 0..w.rows() {
            if w.get(i, i) != 0.0 {
                return Err(Error::InvalidParameter("adjacency diagonal must be zero"));
            }
        }
        let g = Self { w, noise_var };
        g.topological_order()?;
        Ok(g)
    }

    /// Node count.
    pub fn p(&self) -> usize {
        self.w.rows()
    }

    /// Weighted adjacency (`get(i, j)` = weight of edge `x_i → x_j`).
    pub fn weights(&self) -> &Mat {
        &self.w
    }

    /// Intrinsic noise variance σ_z².
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Directed edges as `(parent, child, weight)` triplets, row-major.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.p() {
            for j in 0..self.p() {
                let w = self.w.get(i, j);
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// A topological order of the DAG (Kahn's algorithm, smallest index
    /// first among ready nodes, so the order is deterministic).
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let p = self.p();
        let mut indeg = vec![0usize; p];
        for j in 0..p {
            for i in 0..p {
                if self.w.get(i, j) != 0.0 {
                    indeg[j] += 1;
                }
            }
        }
        let mut order = Vec::with_capacity(p);
        let mut ready: Vec<usize> = (0..p).filter(|&j| indeg[j] == 0).collect();
        while let Some(v) = ready.pop() {
            order.push(v);
            for j in 0..p {
                if self.w.get(v, j) != 0.0 {
                    indeg[j] -= 1;
                    if indeg[j] == 0 {
                        ready.push(j);
                    }
                }
            }
        }
        if order.len() != p {
            return Err(Error::InvalidParameter("adjacency matrix contains a directed cycle"));
        }
        Ok(order)
    }
}

/// Samples an Erdős–Rényi Gaussian Bayesian network.
///
/// A uniformly random permutation fixes a topological order; every ordered
/// pair under that order carries an edge independently with probability
/// `edge_prob`, with weight `±weight_magnitude` by fair coin. Noise variance
/// is 1. Deterministic given `seed`.
pub fn gen_er_dag(p: usize, edge_prob: f64, weight_magnitude: f64, seed: u64) -> Result<Gbn> {
    if p == 0 {
        return Err(Error::InvalidParameter("node count must be positive"));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidParameter("edge probability must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..p).collect();
    for i in (1..p).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut w = Mat::zeros(p, p);
    for a in 0..p {
        for b in (a + 1)..p {
            if rng.gen::<f64>() < edge_prob {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                w.set(order[a], order[b], sign * weight_magnitude);
            }
        }
    }
    Gbn::new(w, 1.0)
}

/// Exact covariance `Σ = σ_z² (I−Wᵀ)⁻¹ (I−Wᵀ)⁻ᵀ` of the network's
/// stationary joint distribution.
pub fn true_covariance(g: &Gbn) -> Result<Mat> {
    let p = g.p();
    let mut m = Mat::eye(p);
    // I − Wᵀ.
    for i in 0..p {
        for j in 0..p {
            let w = g.weights().get(j, i);
            if w != 0.0 {
                m.set(i, j, m.get(i, j) - w);
            }
        }
    }
    let minv = m.inv()?;
    Ok(minv.matmul(&minv.t()).scale(g.noise_var()))
}

/// A batch of N column vectors (samples) of a fixed dimension.
///
/// Stored as a dim×N matrix whose k-th column is the k-th sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: Mat,
}

impl SampleSet {
    /// Wraps a dim×N matrix of samples; every entry must be finite, N ≥ 1.
    pub fn new(data: Mat) -> Result<Self> {
        if data.cols() == 0 || data.rows() == 0 {
            return Err(Error::InvalidParameter("sample set must be non-empty"));
        }
        if data.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("sample set contains non-finite values"));
        }
        Ok(Self { data })
    }

    /// Sample dimension.
    pub fn dim(&self) -> usize {
        self.data.rows()
    }

    /// Number of samples N.
    pub fn n(&self) -> usize {
        self.data.cols()
    }

    /// The dim×N sample matrix.
    pub fn data(&self) -> &Mat {
        &self.data
    }

    /// Copy of sample k as a vector.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data.get(i, k)).collect()
    }

    /// A new set holding samples `0..count` of this one.
    pub fn prefix(&self, count: usize) -> Result<SampleSet> {
        if count == 0 || count > self.n() {
            return Err(Error::InvalidParameter("prefix length out of range"));
        }
        let rows: Vec<usize> = (0..self.dim()).collect();
        let cols: Vec<usize> = (0..count).collect();
        SampleSet::new(self.data.select(&rows, &cols))
    }

    /// A new set holding samples `start..N` of this one.
    pub fn suffix(&self, start: usize) -> Result<SampleSet> {
        if start >= self.n() {
            return Err(Error::InvalidParameter("suffix start out of range"));
        }
        let rows: Vec<usize> = (0..self.dim()).collect();
        let cols: Vec<usize> = (start..self.n()).collect();
        SampleSet::new(self.data.select(&rows, &cols))
    }
}

/// Simulates N samples of the structural equation model.
///
/// Each sample draws intrinsic noise for every node (in node-index order)
/// and then accumulates `x_i = Σ_j W[j][i]·x_j + z_i` in topological order.
/// Deterministic given `seed`.
pub fn simulate_sem(g: &Gbn, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive"));
    }
    let p = g.p();
    let order = g.topological_order()?;
    // Parent lists once, rather than scanning W per sample.
    let mut parents: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p];
    for (i, j, w) in g.edges() {
        parents[j].push((i, w));
    }
    let noise_std = libm::sqrt(g.noise_var());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Mat::zeros(p, n);
    let mut x = vec![0.0; p];
    for k in 0..n {
        for v in x.iter_mut() {
            *v = noise_std * standard_normal(&mut rng);
        }
        for &node in &order {
            let mut acc = x[node];
            for &(par, w) in &parents[node] {
                acc += w * x[par];
            }
            x[node] = acc;
        }
        for i in 0..p {
            data.set(i, k, x[i]);
        }
    }
    SampleSet::new(data)
}

/// A sensing matrix together with the measurement-noise level of `y = Ax + n`.
#[derive(Debug, Clone)]
pub struct MeasurementSystem<'a> {
    /// The sparse sensing matrix A.
    pub a: &'a SensingMatrix,
    /// Standard deviation σ of the additive measurement noise (0 = noiseless).
    pub meas_noise_std: f64,
}

/// Applies the measurement system to every sample: `y_k = A x_k + n_k` with
/// `n_k ~ Normal(0, σ² I)`.
///
/// With σ = 0 the map is exactly linear and consumes no randomness.
/// Deterministic given `seed`.
pub fn measure(ms: &MeasurementSystem<'_>, xs: &SampleSet, seed: u64) -> Result<SampleSet> {
    if xs.dim() != ms.a.p() {
        return Err(Error::InvalidParameter("sample dimension does not match sensing matrix columns"));
    }
    if !(ms.meas_noise_std >= 0.0) || !ms.meas_noise_std.is_finite() {
        return Err(Error::InvalidParameter("measurement noise std must be non-negative"));
    }
    let d = ms.a.d();
    let n = xs.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Mat::zeros(d, n);
    for k in 0..n {
        let x = xs.column(k);
        let mut y = ms.a.matvec(&x);
        if ms.meas_noise_std > 0.0 {
            for v in y.iter_mut() {
                *v += ms.meas_noise_std * standard_normal(&mut rng);
            }
        }
        for i in 0..d {
            data.set(i, k, y[i]);
        }
    }
    SampleSet::new(data)
}

/// Uncentered sample covariance `(1/N) Σ_k y_k y_kᵀ`.
pub fn sample_covariance(ys: &SampleSet) -> Mat {
    let y = ys.data();
    y.matmul(&y.t()).scale(1.0 / ys.n() as f64)
}

/// Centered sample covariance `(1/N) Σ_k (y_k − ȳ)(y_k − ȳ)ᵀ`.
///
/// The uncentered form matched to the recovery pipeline is the default
/// elsewhere; this variant exists for zero-mean sanity checks.
pub fn sample_covariance_centered(ys: &SampleSet) -> Mat {
    let dim = ys.dim();
    let n = ys.n() as f64;
    let mut mean = vec![0.0; dim];
    for k in 0..ys.n() {
        for i in 0..dim {
            mean[i] += ys.data().get(i, k);
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut centered = ys.data().clone();
    for k in 0..ys.n() {
        for i in 0..dim {
            centered.set(i, k, centered.get(i, k) - mean[i]);
        }
    }
    centered.matmul(&centered.t()).scale(1.0 / n)
}
