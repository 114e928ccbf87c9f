//! Monte-Carlo stress test of the commuting-case inequality for
//! non-Gaussian `X`.
//!
//! Entropies are estimated with the Kozachenko–Leonenko k-nearest-neighbour
//! estimator
//!
//! ```text
//! h ~ psi(m) - psi(k) + ln V_n + (n / m) sum_i ln eps_i
//! ```
//!
//! where `eps_i` is the Euclidean distance from sample `i` to its `k`-th
//! nearest neighbour and `V_n` the volume of the unit `n`-ball. Neighbours
//! are found exactly with a k-d tree. Standard errors come from re-running
//! the estimator on 16 disjoint folds (`i mod 16`).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::epi::EpiInstance;
use crate::error::{Error, Result};
use crate::gaussian::GaussianVector;
use crate::math;
use crate::matrix::{self, Matrix, SymMatrix};
use crate::random::{seeded_rng, StreamRng};

/// Folds used for the subsampling standard error.
pub const SE_FOLDS: usize = 16;

/// Default neighbour rank.
pub const DEFAULT_K: usize = 5;

/// Zero nearest-neighbour distances (exact ties) are replaced by this
/// fraction of the sample's RMS spread.
pub const TIE_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

/// Finite Gaussian mixture; weights are positive and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    components: Vec<MixtureComponent>,
    factors: Vec<Matrix>,
}

impl MixtureSpec {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or(Error::InvalidMixture("no components"))?;
        let n = first.cov.n();
        let mut total = 0.0;
        let mut factors = Vec::with_capacity(components.len());
        for c in &components {
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidMixture("weights must be positive and finite"));
            }
            if c.mean.len() != n || c.cov.n() != n {
                return Err(Error::InvalidMixture("component dimensions differ"));
            }
            if c.mean.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMixture("non-finite mean"));
            }
            let chol = c
                .cov
                .as_matrix()
                .clone()
                .cholesky()
                .ok_or(Error::InvalidMixture(
                    "component covariance is not positive definite",
                ))?;
            factors.push(chol.unpack());
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMixture("weights must sum to 1"));
        }
        Ok(Self {
            components,
            factors,
        })
    }

    /// Single zero-mean component.
    pub fn gaussian(cov: SymMatrix) -> Result<Self> {
        let n = cov.n();
        Self::new(vec![MixtureComponent {
            weight: 1.0,
            mean: vec![0.0; n],
            cov,
        }])
    }

    pub fn n(&self) -> usize {
        self.components[0].cov.n()
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, m: usize, out: &mut Vec<f64>) {
        let n = self.n();
        let mut z = vec![0.0; n];
        for _ in 0..m {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = self.components.len() - 1;
            for (i, c) in self.components.iter().enumerate() {
                acc += c.weight;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let l = &self.factors[pick];
            let mean = &self.components[pick].mean;
            for i in 0..n {
                let mut x = mean[i];
                for j in 0..=i {
                    x += l[(i, j)] * z[j];
                }
                out.push(x);
            }
        }
    }
}

/// `m` points in `R^n`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n: usize,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() % n != 0 {
            return Err(Error::DimensionMismatch {
                what: "sample buffer",
                expected: n,
                found: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.n];
        for p in self.data.chunks_exact(self.n) {
            for (a, x) in mu.iter_mut().zip(p) {
                *a += x;
            }
        }
        let m = self.len() as f64;
        mu.iter_mut().for_each(|a| *a /= m);
        mu
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> SymMatrix {
        let n = self.n;
        let mu = self.mean();
        let mut c = Matrix::zeros(n, n);
        for p in self.data.chunks_exact(n) {
            for i in 0..n {
                for j in 0..=i {
                    c[(i, j)] += (p[i] - mu[i]) * (p[j] - mu[j]);
                }
            }
        }
        let denom = (self.len() as f64 - 1.0).max(1.0);
        for i in 0..n {
            for j in 0..=i {
                c[(i, j)] /= denom;
                c[(j, i)] = c[(i, j)];
            }
        }
        SymMatrix::from_symmetric_product(c)
    }

    /// Every point moved by `shift`.
    pub fn translated(&self, shift: &[f64]) -> SampleSet {
        let mut data = self.data.clone();
        for p in data.chunks_exact_mut(self.n) {
            for (x, s) in p.iter_mut().zip(shift) {
                *x += s;
            }
        }
        SampleSet { n: self.n, data }
    }

    /// Every point multiplied by `c`.
    pub fn scaled(&self, c: f64) -> SampleSet {
        SampleSet {
            n: self.n,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    /// Pointwise `self + M other`.
    fn add_transformed(&self, m: &Matrix, other: &SampleSet) -> SampleSet {
        let n = self.n;
        let mut data = self.data.clone();
        for (p, q) in data.chunks_exact_mut(n).zip(other.data.chunks_exact(n)) {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += m[(i, j)] * q[j];
                }
                p[i] += acc;
            }
        }
        SampleSet { n, data }
    }
}

fn sample_with(spec: &MixtureSpec, m: usize, rng: &mut StreamRng) -> Result<SampleSet> {
    if m == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1"));
    }
    let mut data = Vec::with_capacity(m * spec.n());
    spec.draw_into(rng, m, &mut data);
    SampleSet::new(spec.n(), data)
}

/// `m` i.i.d. draws from the mixture, deterministic per seed.
pub fn sample_mixture(spec: &MixtureSpec, m: usize, seed: u64) -> Result<SampleSet> {
    sample_with(spec, m, &mut seeded_rng(seed, 0))
}

/// `m` i.i.d. draws from `N(0, cov)`; same stream as the equivalent
/// single-component mixture.
pub fn sample_gaussian(g: &GaussianVector, m: usize, seed: u64) -> Result<SampleSet> {
    sample_mixture(&MixtureSpec::gaussian(g.cov().clone())?, m, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub nats: f64,
    pub standard_error: f64,
    pub k: usize,
    pub m: usize,
}

impl EntropyEstimate {
    /// `e^{2h/n}` with its delta-method standard error.
    pub fn entropy_power(&self, n: usize) -> (f64, f64) {
        let ep = math::exp(2.0 * self.nats / n as f64);
        (ep, ep * 2.0 / n as f64 * self.standard_error)
    }
}

/// Kozachenko–Leonenko estimate in nats with a 16-fold subsampling
/// standard error (infinite when the folds are too small to use).
pub fn knn_entropy(samples: &SampleSet, k: usize) -> Result<EntropyEstimate> {
    let m = samples.len();
    if k == 0 || m <= k {
        return Err(Error::TooFewSamples { m, k });
    }
    let n = samples.n();
    let spread = rms_spread(samples);
    if !(spread > 0.0) {
        return Err(Error::Singular {
            what: "sample set (all points coincide)",
        });
    }
    let nats = kl_estimate(samples.as_slice(), n, k, spread);

    let folds = SE_FOLDS.min(m / (k + 1));
    let standard_error = if folds >= 2 {
        let mut estimates = Vec::with_capacity(folds);
        for f in 0..folds {
            let fold: Vec<f64> = samples
                .as_slice()
                .chunks_exact(n)
                .enumerate()
                .filter(|(i, _)| i % folds == f)
                .flat_map(|(_, p)| p.iter().copied())
                .collect();
            estimates.push(kl_estimate(&fold, n, k, spread));
        }
        let mean = estimates.iter().sum::<f64>() / folds as f64;
        let var = estimates
            .iter()
            .map(|e| (e - mean) * (e - mean))
            .sum::<f64>()
            / (folds as f64 - 1.0);
        math::sqrt(var / folds as f64)
    } else {
        f64::INFINITY
    };
    Ok(EntropyEstimate {
        nats,
        standard_error,
        k,
        m,
    })
}

fn rms_spread(samples: &SampleSet) -> f64 {
    let mu = samples.mean();
    let mut acc = 0.0;
    for p in samples.as_slice().chunks_exact(samples.n()) {
        for (x, c) in p.iter().zip(&mu) {
            acc += (x - c) * (x - c);
        }
    }
    math::sqrt(acc / samples.len() as f64)
}

fn log_unit_ball_volume(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    half * math::ln(core::f64::consts::PI) - math::lgamma(half + 1.0)
}

fn kl_estimate(points: &[f64], n: usize, k: usize, spread: f64) -> f64 {
    let m = points.len() / n;
    let distances = kth_neighbor_sq_distances(points, n, k);
    let floor = TIE_JITTER * spread;
    let floor_sq = floor * floor;
    let sum_log: f64 = distances
        .iter()
        .map(|&d2| 0.5 * math::ln(d2.max(floor_sq)))
        .sum();
    math::digamma_int(m) - math::digamma_int(k)
        + log_unit_ball_volume(n)
        + n as f64 * sum_log / m as f64
}

/// Squared Euclidean distance from each point to its `k`-th nearest other
/// point.
pub fn kth_neighbor_sq_distances(points: &[f64], n: usize, k: usize) -> Vec<f64> {
    let tree = KdTree::build(points, n);
    let mut best = Vec::with_capacity(k);
    (0..points.len() / n)
        .map(|i| {
            best.clear();
            tree.query(i, k, &mut best);
            best[k - 1].0
        })
        .collect()
}

const LEAF_SIZE: usize = 16;

struct Node {
    start: usize,
    end: usize,
    dim: usize,
    split: f64,
    children: Option<(usize, usize)>,
}

struct KdTree<'a> {
    points: &'a [f64],
    n: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    fn build(points: &'a [f64], n: usize) -> Self {
        let m = points.len() / n;
        let mut tree = KdTree {
            points,
            n,
            order: (0..m).collect(),
            nodes: Vec::new(),
        };
        tree.build_node(0, m);
        tree
    }

    fn coord(&self, i: usize, d: usize) -> f64 {
        self.points[i * self.n + d]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            dim: 0,
            split: 0.0,
            children: None,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let mut dim = 0;
        let mut widest = -1.0;
        for d in 0..self.n {
            let (lo, hi) = self.order[start..end].iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), &i| {
                    let x = self.coord(i, d);
                    (lo.min(x), hi.max(x))
                },
            );
            if hi - lo > widest {
                widest = hi - lo;
                dim = d;
            }
        }
        if !(widest > 0.0) {
            return id;
        }
        let mid = (start + end) / 2;
        let (points, n) = (self.points, self.n);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * n + dim]
                .total_cmp(&points[b * n + dim])
                .then(a.cmp(&b))
        });
        let split = self.coord(self.order[mid], dim);
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        let node = &mut self.nodes[id];
        node.dim = dim;
        node.split = split;
        node.children = Some((left, right));
        id
    }

    /// Fills `best` with the `k` nearest `(sq distance, index)` pairs to
    /// point `query`, excluding itself, ascending.
    fn query(&self, query: usize, k: usize, best: &mut Vec<(f64, usize)>) {
        let q = &self.points[query * self.n..(query + 1) * self.n];
        self.visit(0, query, q, k, best);
    }

    fn visit(&self, node: usize, query: usize, q: &[f64], k: usize, best: &mut Vec<(f64, usize)>) {
        let nd = &self.nodes[node];
        match nd.children {
            None => {
                for &i in &self.order[nd.start..nd.end] {
                    if i == query {
                        continue;
                    }
                    let p = &self.points[i * self.n..(i + 1) * self.n];
                    let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                    if best.len() < k || d2 < best[best.len() - 1].0 {
                        let pos = best.partition_point(|&(d, _)| d <= d2);
                        if best.len() == k {
                            best.pop();
                        }
                        best.insert(pos, (d2, i));
                    }
                }
            }
            Some((left, right)) => {
                let diff = q[nd.dim] - nd.split;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.visit(near, query, q, k, best);
                if best.len() < k || diff * diff < best[best.len() - 1].0 {
                    self.visit(far, query, q, k, best);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conclusion {
    /// `lhs >= rhs` within three combined standard errors.
    Consistent,
    Inconclusive,
    /// `lhs + 3 se_lhs < rhs - 3 se_rhs`. Since the commuting case is a
    /// theorem, this points at estimator bias rather than a counterexample.
    Suspicious,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub lhs_estimate: f64,
    pub lhs_se: f64,
    pub rhs_estimate: f64,
    pub rhs_se: f64,
    /// Entropy of `X`, `X + A^{1/2} Z` and `X + Z`, each from its own sample set.
    pub h_x: EntropyEstimate,
    pub h_x_weighted_noise: EntropyEstimate,
    pub h_x_noise: EntropyEstimate,
    pub samples: usize,
    pub k: usize,
    pub seed: u64,
    pub conclusion: Conclusion,
}

/// Estimates both sides of the commuting-case inequality for a mixture `X`.
pub fn mc_theorem1_check(
    x_spec: &MixtureSpec,
    sigma_z: &SymMatrix,
    a: &SymMatrix,
    m: usize,
    k: usize,
    seed: u64,
    tol: f64,
) -> Result<McReport> {
    let n = x_spec.n();
    let feasibility = EpiInstance::new(SymMatrix::identity(n), sigma_z.clone(), a.clone(), tol)?;
    let commutator = matrix::commutator_norm(a, sigma_z)?;
    let threshold = tol * (1.0 + a.frobenius_norm() * sigma_z.frobenius_norm());
    if commutator > threshold {
        return Err(Error::NotCommuting {
            commutator,
            threshold,
        });
    }
    let noise =
        MixtureSpec::gaussian(sigma_z.clone()).map_err(|_| Error::Singular { what: "sigma_z" })?;

    let stream = |i: u64| seeded_rng(seed, i);
    let x_alone = sample_with(x_spec, m, &mut stream(0))?;
    let x_lhs = sample_with(x_spec, m, &mut stream(1))?;
    let z_lhs = sample_with(&noise, m, &mut stream(2))?;
    let x_rhs = sample_with(x_spec, m, &mut stream(3))?;
    let z_rhs = sample_with(&noise, m, &mut stream(4))?;

    let weighted = x_lhs.add_transformed(feasibility.a_sqrt().as_matrix(), &z_lhs);
    let plain = x_rhs.add_transformed(&Matrix::identity(n, n), &z_rhs);

    let h_x = knn_entropy(&x_alone, k)?;
    let h_x_weighted_noise = knn_entropy(&weighted, k)?;
    let h_x_noise = knn_entropy(&plain, k)?;

    let eigen_a = feasibility.a_eigenvalues();
    let root = |values: &mut dyn Iterator<Item = f64>| {
        math::exp(matrix::log_det_from_eigenvalues(&values.collect::<Vec<_>>()) / n as f64)
    };
    let coef_x = root(&mut eigen_a.iter().map(|v| 1.0 - v));
    let coef_xz = root(&mut eigen_a.iter().copied());

    let (lhs_estimate, lhs_se) = h_x_weighted_noise.entropy_power(n);
    let (ep_x, se_x) = h_x.entropy_power(n);
    let (ep_xz, se_xz) = h_x_noise.entropy_power(n);
    let rhs_estimate = coef_x * ep_x + coef_xz * ep_xz;
    let rhs_se =
        math::sqrt((coef_x * se_x) * (coef_x * se_x) + (coef_xz * se_xz) * (coef_xz * se_xz));

    let conclusion = if lhs_estimate + 3.0 * lhs_se < rhs_estimate - 3.0 * rhs_se {
        Conclusion::Suspicious
    } else if lhs_estimate - rhs_estimate >= -3.0 * math::sqrt(lhs_se * lhs_se + rhs_se * rhs_se) {
        Conclusion::Consistent
    } else {
        Conclusion::Inconclusive
    };

    Ok(McReport {
        lhs_estimate,
        lhs_se,
        rhs_estimate,
        rhs_se,
        h_x,
        h_x_weighted_noise,
        h_x_noise,
        samples: m,
        k,
        seed,
        conclusion,
    })
}
