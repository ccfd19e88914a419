//! Brute-force reference implementations used as test oracles.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::HashMap;

use gael::autodiff::Tensor;
use gael::gmm::GmmModel;
use rand::Rng;

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Minimum assignment cost and the first (lexicographic) permutation attaining it.
pub fn brute_assignment(cost: &[Vec<f64>], tol: f64) -> (Vec<usize>, f64) {
    let k = cost.len();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for p in permutations(k) {
        let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        if best.as_ref().is_none_or(|(_, b)| c < b - tol) {
            best = Some((p, c));
        }
    }
    best.unwrap_or((Vec::new(), 0.0))
}

/// Best fraction of matches over all one-to-one maps of predicted ids onto true ids.
pub fn brute_acc(pred: &[usize], truth: &[usize]) -> f64 {
    let k = pred.iter().chain(truth).max().unwrap() + 1;
    let n = pred.len() as f64;
    permutations(k)
        .iter()
        .map(|p| pred.iter().zip(truth).filter(|(&a, &b)| p[a] == b).count() as f64 / n)
        .fold(0.0, f64::max)
}

fn probabilities(labels: &[usize]) -> HashMap<usize, f64> {
    let mut counts = HashMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .map(|(l, c)| (l, c as f64 / labels.len() as f64))
        .collect()
}

/// NMI from explicit joint and marginal distributions, geometric-mean normalized.
pub fn brute_nmi(a: &[usize], b: &[usize]) -> f64 {
    let pa = probabilities(a);
    let pb = probabilities(b);
    let pairs: Vec<usize> = a.iter().zip(b).map(|(&x, &y)| x * 1000 + y).collect();
    let pab = probabilities(&pairs);
    let h = |p: &HashMap<usize, f64>| -> f64 { p.values().map(|&v| -v * v.ln()).sum() };
    let (ha, hb) = (h(&pa), h(&pb));
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    if ha == 0.0 || hb == 0.0 {
        return 0.0;
    }
    let mi: f64 = pab
        .iter()
        .map(|(&key, &p)| p * (p / (pa[&(key / 1000)] * pb[&(key % 1000)])).ln())
        .sum();
    mi / (ha * hb).sqrt()
}

/// ARI by enumerating every pair of samples.
pub fn pair_ari(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b, mut total) = (0i64, 0i64, 0i64, 0i64);
    let mut agree_everywhere = true;
    for i in 0..n {
        for j in i + 1..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            total += 1;
            in_a += sa as i64;
            in_b += sb as i64;
            both += (sa && sb) as i64;
            agree_everywhere &= sa == sb;
        }
    }
    let expected = (in_a * in_b) as f64 / total as f64;
    let max = (in_a + in_b) as f64 / 2.0;
    if 2 * in_a * in_b == total * (in_a + in_b) {
        return if agree_everywhere { 1.0 } else { 0.0 };
    }
    (both as f64 - expected) / (max - expected)
}

pub fn random_labels(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// Determinant and inverse by Gauss-Jordan elimination with partial pivoting.
pub fn det_inverse(d: usize, a: &[f64]) -> (f64, Vec<f64>) {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        inv[i * d + i] = 1.0;
    }
    let mut det = 1.0;
    for c in 0..d {
        let p = (c..d)
            .max_by(|&i, &j| m[i * d + c].abs().partial_cmp(&m[j * d + c].abs()).unwrap())
            .unwrap();
        if p != c {
            for j in 0..d {
                m.swap(p * d + j, c * d + j);
                inv.swap(p * d + j, c * d + j);
            }
            det = -det;
        }
        let piv = m[c * d + c];
        det *= piv;
        for j in 0..d {
            m[c * d + j] /= piv;
            inv[c * d + j] /= piv;
        }
        for i in 0..d {
            if i != c {
                let f = m[i * d + c];
                for j in 0..d {
                    m[i * d + j] -= f * m[c * d + j];
                    inv[i * d + j] -= f * inv[c * d + j];
                }
            }
        }
    }
    (det, inv)
}

/// `N(x; mu, sigma)` evaluated directly from the density formula.
pub fn gaussian_pdf(x: &[f64], mu: &[f64], sigma: &[f64]) -> f64 {
    let d = x.len();
    let (det, inv) = det_inverse(d, sigma);
    let diff: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    let mut q = 0.0;
    for i in 0..d {
        for j in 0..d {
            q += diff[i] * inv[i * d + j] * diff[j];
        }
    }
    (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powi(d as i32) * det).sqrt()
}

/// `sum_x log sum_k pi_k N(x)` without any log-domain tricks.
pub fn naive_log_likelihood(model: &GmmModel<f64>, data: &Tensor<f64>) -> f64 {
    (0..data.rows())
        .map(|i| {
            (0..model.n_components())
                .map(|k| model.weights()[k] * gaussian_pdf(data.row(i), model.mean(k), &model.full_covariance(k)))
                .sum::<f64>()
                .ln()
        })
        .sum()
}

/// Sample mean and maximum-likelihood covariance.
pub fn mean_cov(data: &Tensor<f64>) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (data.rows(), data.cols());
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += data.at(i, j) / n as f64;
        }
    }
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += (data.at(i, a) - mean[a]) * (data.at(i, b) - mean[b]) / n as f64;
            }
        }
    }
    (mean, cov)
}

/// Log-likelihood of the single-Gaussian MLE: `-n/2 (d ln 2pi + ln|S| + d)`.
pub fn gaussian_mle_log_likelihood(data: &Tensor<f64>) -> f64 {
    let (n, d) = (data.rows() as f64, data.cols());
    let (_, cov) = mean_cov(data);
    let (det, _) = det_inverse(d, &cov);
    -0.5 * n * (d as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln() + d as f64)
}

/// Points scattered around `k` random centers in `d` dimensions.
pub fn random_blobs(rng: &mut impl Rng, n: usize, d: usize, k: usize) -> Tensor<f64> {
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let c = &centers[rng.random_range(0..k)];
            let s: f64 = rng.random_range(0.3..1.5);
            c.iter()
                .map(|&m| m + s * rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()
        })
        .collect();
    Tensor::from_rows(&rows).unwrap()
}
