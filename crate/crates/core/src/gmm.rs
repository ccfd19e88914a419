//! Gaussian mixture models: EM fitting, densities, sampling and hard assignment.
//!
//! All density work happens in the log domain. Components keep a cached
//! Cholesky factor of their covariance, so evaluating `log N(x; mu, Sigma)` is a
//! triangular solve.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Lower bound on covariance eigenvalues (on variances in diagonal mode).
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Lower bound on mixture weights.
pub const MIN_WEIGHT: f64 = 1e-12;
/// Components whose total responsibility falls below this are re-seeded.
pub const DEGENERATE_MASS: f64 = 1e-10;

pub const GMM_FORMAT_VERSION: u32 = 1;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    #[default]
    Full,
    Diagonal,
}

/// Lower-triangular Cholesky factor of a `d x d` row-major SPD matrix.
fn cholesky<T: Scalar>(d: usize, a: &[T]) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Projects a covariance onto `{S : S >= floor * I}`: symmetrize, then raise
/// any eigenvalue below the floor. This is the exact constrained maximizer of
/// the M-step objective, so EM stays monotone. Matrices already above the floor
/// are left bit-for-bit unchanged. Jitter is a last resort for rounding.
fn regularize_full<T: Scalar>(d: usize, cov: &mut [T]) -> Vec<T> {
    let floor = T::of(VARIANCE_FLOOR);
    for i in 0..d {
        for j in 0..i {
            let m = (cov[i * d + j] + cov[j * d + i]) * T::of(0.5);
            cov[i * d + j] = m;
            cov[j * d + i] = m;
        }
    }
    let sym = nalgebra::DMatrix::from_fn(d, d, |i, j| cov[i * d + j].to_f64_exact());
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l >= VARIANCE_FLOOR)) {
        let clipped = eig.eigenvalues.map(|l| if l >= VARIANCE_FLOOR { l } else { VARIANCE_FLOOR });
        let v = &eig.eigenvectors;
        let s = v * nalgebra::DMatrix::from_diagonal(&clipped) * v.transpose();
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] = T::of(0.5 * (s[(i, j)] + s[(j, i)]));
            }
        }
    }
    let mut jitter = floor;
    loop {
        if let Some(l) = cholesky(d, cov) {
            return l;
        }
        for i in 0..d {
            cov[i * d + i] += jitter;
        }
        jitter *= T::of(10.0);
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Component<T> {
    mean: Vec<T>,
    /// `d x d` row-major (full) or length-`d` variances (diagonal).
    covariance: Vec<T>,
    /// Cholesky factor (full) or standard deviations (diagonal).
    factor: Vec<T>,
    log_det: T,
}

impl<T: Scalar> Component<T> {
    fn new(mean: Vec<T>, mut covariance: Vec<T>, mode: CovarianceMode) -> Self {
        let d = mean.len();
        let (factor, log_det) = match mode {
            CovarianceMode::Full => {
                let l = regularize_full(d, &mut covariance);
                let log_det = (0..d).map(|i| l[i * d + i].ln()).sum::<T>() * T::of(2.0);
                (l, log_det)
            }
            CovarianceMode::Diagonal => {
                let floor = T::of(VARIANCE_FLOOR);
                for v in covariance.iter_mut() {
                    *v = v.max(floor);
                }
                let sd: Vec<T> = covariance.iter().map(|v| v.sqrt()).collect();
                let log_det = covariance.iter().map(|v| v.ln()).sum();
                (sd, log_det)
            }
        };
        Self {
            mean,
            covariance,
            factor,
            log_det,
        }
    }

    /// Squared Mahalanobis distance of `x` to the component.
    fn mahalanobis2(&self, x: &[T], mode: CovarianceMode, scratch: &mut [T]) -> T {
        let d = self.mean.len();
        match mode {
            CovarianceMode::Full => {
                let l = &self.factor;
                let mut acc = T::zero();
                for i in 0..d {
                    let mut s = x[i] - self.mean[i];
                    for k in 0..i {
                        s -= l[i * d + k] * scratch[k];
                    }
                    let y = s / l[i * d + i];
                    scratch[i] = y;
                    acc += y * y;
                }
                acc
            }
            CovarianceMode::Diagonal => x
                .iter()
                .zip(&self.mean)
                .zip(&self.factor)
                .map(|((&xi, &mi), &sd)| {
                    let y = (xi - mi) / sd;
                    y * y
                })
                .sum(),
        }
    }

    fn log_density(&self, x: &[T], mode: CovarianceMode, scratch: &mut [T]) -> T {
        let d = T::from_usize(self.mean.len()).unwrap();
        T::of(-0.5) * (d * T::of(LN_2PI) + self.log_det + self.mahalanobis2(x, mode, scratch))
    }
}

/// Weighted mixture of Gaussian components.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel<T> {
    mode: CovarianceMode,
    weights: Vec<T>,
    components: Vec<Component<T>>,
}

impl<T: Scalar> GmmModel<T> {
    /// Validates and normalizes the parameters. Full covariances are given
    /// row-major `d x d`; diagonal ones as `d` variances.
    pub fn new(
        weights: Vec<T>,
        means: Vec<Vec<T>>,
        covariances: Vec<Vec<T>>,
        mode: CovarianceMode,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(invalid(format!(
                "gmm: {k} weights, {} means and {} covariances",
                means.len(),
                covariances.len()
            )));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(invalid("gmm: zero-dimensional means"));
        }
        let cov_len = match mode {
            CovarianceMode::Full => d * d,
            CovarianceMode::Diagonal => d,
        };
        let all = weights
            .iter()
            .chain(means.iter().flatten())
            .chain(covariances.iter().flatten());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(invalid("gmm: non-finite parameter"));
        }
        if weights.iter().any(|&w| !(w > T::zero())) {
            return Err(invalid("gmm: weights must be positive"));
        }
        for (m, c) in means.iter().zip(&covariances) {
            if m.len() != d || c.len() != cov_len {
                return Err(invalid("gmm: inconsistent component dimensions"));
            }
        }
        let components = means
            .into_iter()
            .zip(covariances)
            .map(|(m, c)| Component::new(m, c, mode))
            .collect();
        Ok(Self {
            mode,
            weights: normalize_weights(weights),
            components,
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn covariance_mode(&self) -> CovarianceMode {
        self.mode
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn mean(&self, k: usize) -> &[T] {
        &self.components[k].mean
    }

    pub fn means(&self) -> Vec<Vec<T>> {
        self.components.iter().map(|c| c.mean.clone()).collect()
    }

    /// Covariance after flooring/regularization (row-major or diagonal).
    pub fn covariance(&self, k: usize) -> &[T] {
        &self.components[k].covariance
    }

    /// Covariance of component `k` as a full `d x d` row-major matrix.
    pub fn full_covariance(&self, k: usize) -> Vec<T> {
        let c = &self.components[k];
        match self.mode {
            CovarianceMode::Full => c.covariance.clone(),
            CovarianceMode::Diagonal => {
                let d = self.dim();
                let mut m = vec![T::zero(); d * d];
                for i in 0..d {
                    m[i * d + i] = c.covariance[i];
                }
                m
            }
        }
    }

    fn check_dim(&self, data: &Tensor<T>) -> Result<()> {
        if data.shape().len() != 2 || (data.rows() > 0 && data.cols() != self.dim()) {
            return Err(Error::ShapeMismatch {
                op: "gmm",
                lhs: data.shape().to_vec(),
                rhs: vec![self.dim()],
            });
        }
        Ok(())
    }

    /// `log pi_k + log N(x; mu_k, Sigma_k)` for every component.
    fn joint_log(&self, x: &[T], out: &mut [T], scratch: &mut [T]) {
        for (k, (c, &w)) in self.components.iter().zip(&self.weights).enumerate() {
            out[k] = w.ln() + c.log_density(x, self.mode, scratch);
        }
    }

    /// Total log-likelihood `sum_x log sum_k pi_k N(x; mu_k, Sigma_k)`.
    pub fn log_likelihood(&self, data: &Tensor<T>) -> Result<T> {
        self.check_dim(data)?;
        let mut joint = vec![T::zero(); self.n_components()];
        let mut scratch = vec![T::zero(); self.dim()];
        let mut total = T::zero();
        for i in 0..data.rows() {
            self.joint_log(data.row(i), &mut joint, &mut scratch);
            total += log_sum_exp(&joint);
        }
        Ok(total)
    }

    /// Posterior component probabilities for every sample.
    pub fn e_step(&self, data: &Tensor<T>) -> Result<Responsibilities<T>> {
        self.check_dim(data)?;
        let (n, k) = (data.rows(), self.n_components());
        let mut gamma = vec![T::zero(); n * k];
        let mut log_density = vec![T::zero(); n];
        let mut scratch = vec![T::zero(); self.dim()];
        for i in 0..n {
            let row = &mut gamma[i * k..(i + 1) * k];
            self.joint_log(data.row(i), row, &mut scratch);
            let lse = log_sum_exp(row);
            for g in row.iter_mut() {
                *g = (*g - lse).exp();
            }
            // Renormalize so each row sums to one to working precision.
            let s: T = row.iter().copied().sum();
            for g in row.iter_mut() {
                *g /= s;
            }
            log_density[i] = lse;
        }
        Ok(Responsibilities {
            k,
            gamma,
            log_density: Some(log_density),
        })
    }

    /// Most probable component per sample; ties go to the lowest index.
    pub fn predict(&self, data: &Tensor<T>) -> Result<Vec<usize>> {
        self.check_dim(data)?;
        let mut joint = vec![T::zero(); self.n_components()];
        let mut scratch = vec![T::zero(); self.dim()];
        Ok((0..data.rows())
            .map(|i| {
                self.joint_log(data.row(i), &mut joint, &mut scratch);
                argmax(&joint)
            })
            .collect())
    }

    /// Draws `n` samples and the component each came from.
    pub fn sample(&self, n: usize, seed: u64) -> (Tensor<T>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with(&self, n: usize, rng: &mut impl Rng) -> (Tensor<T>, Vec<usize>) {
        let d = self.dim();
        let mut cumulative = Vec::with_capacity(self.n_components());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w.to_f64_exact();
            cumulative.push(acc);
        }
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        let mut eps = vec![T::zero(); d];
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let k = cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(cumulative.len() - 1);
            for e in eps.iter_mut() {
                *e = T::of(rng.sample::<f64, _>(StandardNormal));
            }
            let c = &self.components[k];
            for i in 0..d {
                let offset = match self.mode {
                    CovarianceMode::Full => (0..=i).map(|j| c.factor[i * d + j] * eps[j]).sum(),
                    CovarianceMode::Diagonal => c.factor[i] * eps[i],
                };
                data.push(c.mean[i] + offset);
            }
            labels.push(k);
        }
        (Tensor::from_parts(vec![n, d], data), labels)
    }
}

/// Floors and renormalizes. Weights already summing to one up to rounding are
/// kept as given, so serialized models reload bit-for-bit.
fn normalize_weights<T: Scalar>(weights: Vec<T>) -> Vec<T> {
    let floor = T::of(MIN_WEIGHT);
    let w: Vec<T> = weights.into_iter().map(|v| v.max(floor)).collect();
    let s: T = w.iter().copied().sum();
    if (s - T::one()).abs() <= T::epsilon() * T::of(4.0 * w.len() as f64) {
        return w;
    }
    w.into_iter().map(|v| v / s).collect()
}

fn log_sum_exp<T: Scalar>(v: &[T]) -> T {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<T>().ln()
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `n x K` posterior matrix from an E-step.
#[derive(Clone, Debug, PartialEq)]
pub struct Responsibilities<T> {
    k: usize,
    gamma: Vec<T>,
    /// `log p(x_i)` under the model that produced these responsibilities.
    log_density: Option<Vec<T>>,
}

impl<T: Scalar> Responsibilities<T> {
    /// Wraps an externally built `n x k` matrix; rows must be probability vectors.
    pub fn from_matrix(k: usize, gamma: Vec<T>) -> Result<Self> {
        if k == 0 || !gamma.len().is_multiple_of(k) {
            return Err(invalid("responsibilities: length is not a multiple of K"));
        }
        let tol = T::of(1e-9);
        for row in gamma.chunks(k) {
            let s: T = row.iter().copied().sum();
            if row.iter().any(|&g| g < T::zero() || g > T::one()) || (s - T::one()).abs() > tol {
                return Err(invalid("responsibilities: rows must be probability vectors"));
            }
        }
        Ok(Self {
            k,
            gamma,
            log_density: None,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.gamma.len() / self.k
    }

    pub fn n_components(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.gamma[i * self.k..(i + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.gamma
    }

    /// Total log-likelihood of the model that produced these responsibilities.
    pub fn log_likelihood(&self) -> Option<T> {
        self.log_density.as_ref().map(|v| v.iter().copied().sum())
    }
}

/// Outcome of an M-step.
#[derive(Clone, Debug)]
pub struct MStep<T> {
    pub model: GmmModel<T>,
    /// Components that were re-seeded because their mass collapsed.
    pub rescued: Vec<usize>,
}

fn global_covariance<T: Scalar>(data: &Tensor<T>, mode: CovarianceMode) -> Vec<T> {
    let (n, d) = (data.rows(), data.cols());
    let nf = T::from_usize(n).unwrap();
    let mut mean = vec![T::zero(); d];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(data.row(i)) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= nf;
    }
    match mode {
        CovarianceMode::Full => {
            let mut c = vec![T::zero(); d * d];
            for i in 0..n {
                let x = data.row(i);
                for a in 0..d {
                    for b in 0..d {
                        c[a * d + b] += (x[a] - mean[a]) * (x[b] - mean[b]);
                    }
                }
            }
            c.iter_mut().for_each(|v| *v /= nf);
            c
        }
        CovarianceMode::Diagonal => {
            let mut c = vec![T::zero(); d];
            for i in 0..n {
                for (a, &x) in data.row(i).iter().enumerate() {
                    c[a] += (x - mean[a]) * (x - mean[a]);
                }
            }
            c.iter_mut().for_each(|v| *v /= nf);
            c
        }
    }
}

/// Maximum-likelihood parameters given responsibilities.
///
/// A component whose total responsibility is below [`DEGENERATE_MASS`] is
/// re-seeded at the sample with the lowest density under the model that
/// produced `resp` (or, for externally built responsibilities, the sample
/// with the smallest maximal responsibility), with the global data
/// covariance and weight `1/n`.
pub fn m_step<T: Scalar>(
    data: &Tensor<T>,
    resp: &Responsibilities<T>,
    mode: CovarianceMode,
) -> Result<MStep<T>> {
    let (n, d, k) = (data.rows(), data.cols(), resp.n_components());
    if resp.n_samples() != n || n == 0 {
        return Err(Error::ShapeMismatch {
            op: "m_step",
            lhs: data.shape().to_vec(),
            rhs: vec![resp.n_samples(), k],
        });
    }
    let nf = T::from_usize(n).unwrap();
    let mut mass = vec![T::zero(); k];
    let mut means = vec![vec![T::zero(); d]; k];
    for i in 0..n {
        let x = data.row(i);
        for (j, &g) in resp.row(i).iter().enumerate() {
            mass[j] += g;
            for (m, &xi) in means[j].iter_mut().zip(x) {
                *m += g * xi;
            }
        }
    }
    let cov_len = if mode == CovarianceMode::Full { d * d } else { d };
    let mut covs = vec![vec![T::zero(); cov_len]; k];
    let mut rescued = Vec::new();
    let degenerate = T::of(DEGENERATE_MASS);
    for j in 0..k {
        if mass[j] < degenerate {
            rescued.push(j);
            continue;
        }
        for m in means[j].iter_mut() {
            *m /= mass[j];
        }
    }
    for i in 0..n {
        let x = data.row(i);
        for j in 0..k {
            if mass[j] < degenerate {
                continue;
            }
            let g = resp.row(i)[j];
            let mu = &means[j];
            let c = &mut covs[j];
            match mode {
                CovarianceMode::Full => {
                    for a in 0..d {
                        let da = g * (x[a] - mu[a]);
                        for b in 0..d {
                            c[a * d + b] += da * (x[b] - mu[b]);
                        }
                    }
                }
                CovarianceMode::Diagonal => {
                    for a in 0..d {
                        c[a] += g * (x[a] - mu[a]) * (x[a] - mu[a]);
                    }
                }
            }
        }
    }
    let mut weights: Vec<T> = mass.iter().map(|&m| m / nf).collect();
    for j in 0..k {
        if mass[j] >= degenerate {
            covs[j].iter_mut().for_each(|v| *v /= mass[j]);
        }
    }
    if !rescued.is_empty() {
        let order = rescue_order(resp);
        let global = global_covariance(data, mode);
        for (&j, &i) in rescued.iter().zip(order.iter().cycle()) {
            means[j] = data.row(i).to_vec();
            covs[j] = global.clone();
            weights[j] = T::one() / nf;
        }
    }
    let model = GmmModel::new(weights, means, covs, mode)?;
    Ok(MStep { model, rescued })
}

/// Samples ordered from least to best explained.
fn rescue_order<T: Scalar>(resp: &Responsibilities<T>) -> Vec<usize> {
    let score: Vec<T> = match &resp.log_density {
        Some(ld) => ld.clone(),
        None => (0..resp.n_samples())
            .map(|i| resp.row(i).iter().copied().fold(T::zero(), T::max))
            .collect(),
    };
    let mut idx: Vec<usize> = (0..score.len()).collect();
    idx.sort_by(|&a, &b| score[a].partial_cmp(&score[b]).unwrap().then(a.cmp(&b)));
    idx
}

/// EM settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once the per-sample log-likelihood gain drops below this.
    pub tol: f64,
    pub n_restarts: usize,
    pub seed: u64,
    pub covariance_mode: CovarianceMode,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-6,
            n_restarts: 5,
            seed: 0,
            covariance_mode: CovarianceMode::Full,
        }
    }
}

/// Result of [`fit_em`].
#[derive(Clone, Debug)]
pub struct EmFit<T> {
    pub model: GmmModel<T>,
    /// Total log-likelihood of `model` on the training data.
    pub log_likelihood: T,
    /// Log-likelihood before the first M-step and after each iteration of the winning restart.
    pub history: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub rescues: usize,
    pub restart: usize,
}

fn kmeans_pp<T: Scalar>(data: &Tensor<T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = data.rows();
    let dist2 = |a: &[T], b: &[T]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| (x - y).to_f64_exact().powi(2))
            .sum()
    };
    let mut centers = vec![data.row(rng.random_range(0..n)).to_vec()];
    let mut nearest: Vec<f64> = (0..n).map(|i| dist2(data.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist2(data.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

/// Fits a `k`-component mixture by EM, keeping the best of several restarts.
pub fn fit_em<T: Scalar>(data: &Tensor<T>, k: usize, config: &EmConfig) -> Result<EmFit<T>> {
    let (n, d) = (data.rows(), data.cols());
    if k == 0 {
        return Err(invalid("fit_em: K must be positive"));
    }
    if d == 0 || data.shape().len() != 2 {
        return Err(invalid("fit_em: data must be an n x d matrix with d >= 1"));
    }
    if n < k {
        return Err(invalid(format!("fit_em: {n} samples cannot support {k} components")));
    }
    if !data.is_finite() {
        return Err(invalid("fit_em: data contains non-finite values"));
    }
    let mode = config.covariance_mode;
    let nf = n as f64;
    let global = global_covariance(data, mode);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<EmFit<T>> = None;

    for restart in 0..config.n_restarts.max(1) {
        let means = kmeans_pp(data, k, &mut rng);
        let weights = vec![T::one() / T::from_usize(k).unwrap(); k];
        let mut model = GmmModel::new(weights, means, vec![global.clone(); k], mode)?;
        let mut resp = model.e_step(data)?;
        let mut ll = resp.log_likelihood().unwrap();
        let mut history = vec![ll];
        let mut converged = false;
        let mut iterations = 0;
        let mut rescues = 0;
        for _ in 0..config.max_iters {
            let step = m_step(data, &resp, mode)?;
            rescues += step.rescued.len();
            model = step.model;
            resp = model.e_step(data)?;
            let next = resp.log_likelihood().unwrap();
            history.push(next);
            iterations += 1;
            let gain = (next - ll).to_f64_exact() / nf;
            ll = next;
            if gain < config.tol && step.rescued.is_empty() {
                converged = true;
                break;
            }
        }
        let better = best
            .as_ref()
            .is_none_or(|b| ll > b.log_likelihood);
        if better {
            best = Some(EmFit {
                model,
                log_likelihood: ll,
                history,
                iterations,
                converged,
                rescues,
                restart,
            });
        }
    }
    Ok(best.expect("at least one restart runs"))
}

/// Serialized mixture. Covariances are row-major `d x d` (full) or `d` variances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmRecord {
    pub format_version: u32,
    pub covariance_mode: CovarianceMode,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
}

impl<T: Scalar> From<&GmmModel<T>> for GmmRecord {
    fn from(m: &GmmModel<T>) -> Self {
        let conv = |v: &[T]| v.iter().map(|x| x.to_f64_exact()).collect::<Vec<_>>();
        Self {
            format_version: GMM_FORMAT_VERSION,
            covariance_mode: m.mode,
            dim: m.dim(),
            weights: conv(&m.weights),
            means: m.components.iter().map(|c| conv(&c.mean)).collect(),
            covariances: m.components.iter().map(|c| conv(&c.covariance)).collect(),
        }
    }
}

impl GmmRecord {
    pub fn to_model<T: Scalar>(&self) -> Result<GmmModel<T>> {
        if self.format_version != GMM_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                expected: GMM_FORMAT_VERSION,
            });
        }
        let conv = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<_>>();
        let model = GmmModel::new(
            conv(&self.weights),
            self.means.iter().map(|m| conv(m)).collect(),
            self.covariances.iter().map(|c| conv(c)).collect(),
            self.covariance_mode,
        )?;
        if model.dim() != self.dim {
            return Err(invalid("gmm record: dim does not match means"));
        }
        Ok(model)
    }
}

impl<T: Scalar> GmmModel<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GmmRecord::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<GmmRecord>(s)?.to_model()
    }
}
