//! Distribution summaries and comparisons.
//!
//! Samples of `(h_ks, h_deg)` are summarized by bivariate Gaussians and
//! compared with the closed-form Kullback–Leibler divergence (nats). The
//! module also carries the bootstrap zero baseline, size-matching
//! downsampling, paired t statistics and a two-feature logistic classifier.

use std::fmt::Write as _;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::measures::CostPair;

/// Ridge added to a singular covariance, relative to its trace.
pub const COVARIANCE_RIDGE: f64 = 1e-10;
pub const LOGISTIC_L2: f64 = 1e-6;
pub const LOGISTIC_TOLERANCE: f64 = 1e-8;
pub const LOGISTIC_MAX_ITERATIONS: usize = 100;
/// Fraction of examples held out by [`train_logistic`].
pub const HOLDOUT_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSummary {
    /// Means of `(h_ks, h_deg)`.
    pub mu: Vector2<f64>,
    /// Sample covariance with an `n-1` denominator.
    pub sigma: Matrix2<f64>,
    pub n: usize,
}

impl GaussianSummary {
    /// True when the covariance cannot be inverted as is.
    pub fn is_degenerate(&self) -> bool {
        is_singular(&self.sigma)
    }
}

pub fn fit_gaussian(samples: &[CostPair]) -> Result<GaussianSummary> {
    let points: Vec<[f64; 2]> = samples.iter().map(CostPair::as_array).collect();
    fit_points(&points)
}

pub fn fit_points(points: &[[f64; 2]]) -> Result<GaussianSummary> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: n });
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateDistribution("non-finite sample"));
    }
    let mu = points.iter().fold(Vector2::zeros(), |acc, p| acc + Vector2::new(p[0], p[1])) / n as f64;
    let sigma = points.iter().fold(Matrix2::zeros(), |acc, p| {
        let d = Vector2::new(p[0], p[1]) - mu;
        acc + d * d.transpose()
    }) / (n - 1) as f64;
    Ok(GaussianSummary { mu, sigma, n })
}

fn is_singular(m: &Matrix2<f64>) -> bool {
    let trace = m.trace();
    m.determinant() <= f64::EPSILON * trace * trace || m[(0, 0)] <= 0.0 || m[(1, 1)] <= 0.0
}

fn regularized(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    if !is_singular(m) {
        return Ok(*m);
    }
    let ridged = m + Matrix2::identity() * (COVARIANCE_RIDGE * m.trace());
    if is_singular(&ridged) {
        return Err(Error::DegenerateDistribution("covariance singular after ridge"));
    }
    Ok(ridged)
}

/// `D(P‖Q) = ½(tr(S⁻¹Σ) − 2 + (m−μ)ᵀS⁻¹(m−μ) + ln(det S / det Σ))` in nats.
pub fn kld_gaussian(p: &GaussianSummary, q: &GaussianSummary) -> Result<f64> {
    if p.mu == q.mu && p.sigma == q.sigma {
        return Ok(0.0);
    }
    let sigma = regularized(&p.sigma)?;
    let s = regularized(&q.sigma)?;
    let s_inv = s.try_inverse().ok_or(Error::DegenerateDistribution("covariance not invertible"))?;
    let diff = q.mu - p.mu;
    let trace = (s_inv * sigma).trace();
    let mahalanobis = diff.dot(&(s_inv * diff));
    Ok(0.5 * (trace - 2.0 + mahalanobis + (s.determinant() / sigma.determinant()).ln()))
}

fn resample<T: Clone, R: Rng + ?Sized>(samples: &[T], rng: &mut R) -> Vec<T> {
    (0..samples.len()).map(|_| samples[rng.random_range(0..samples.len())].clone()).collect()
}

/// KLD from the sample's fit to the fit of each equally sized resample.
pub fn bootstrap_zero_replicates<R: Rng + ?Sized>(samples: &[CostPair], rng: &mut R, reps: usize) -> Result<Vec<f64>> {
    if reps == 0 {
        return Err(Error::Config("bootstrap needs at least one replicate".into()));
    }
    let base = fit_gaussian(samples)?;
    (0..reps).map(|_| kld_gaussian(&base, &fit_gaussian(&resample(samples, rng))?)).collect()
}

/// Mean bootstrap KLD: the floor against which other divergences are read.
pub fn bootstrap_zero<R: Rng + ?Sized>(samples: &[CostPair], rng: &mut R, reps: usize) -> Result<f64> {
    let reps = bootstrap_zero_replicates(samples, rng, reps)?;
    Ok(reps.iter().sum::<f64>() / reps.len() as f64)
}

/// Uniform subsample without replacement.
pub fn downsample<T: Clone, R: Rng + ?Sized>(samples: &[T], target_n: usize, rng: &mut R) -> Result<Vec<T>> {
    if target_n > samples.len() {
        return Err(Error::SampleSize { requested: target_n, available: samples.len() });
    }
    Ok(index::sample(rng, samples.len(), target_n).into_iter().map(|i| samples[i].clone()).collect())
}

/// Downsamples the larger of two samples to the size of the smaller one.
pub fn match_sizes<T: Clone, R: Rng + ?Sized>(a: &[T], b: &[T], rng: &mut R) -> Result<(Vec<T>, Vec<T>)> {
    use std::cmp::Ordering::*;
    Ok(match a.len().cmp(&b.len()) {
        Greater => (downsample(a, b.len(), rng)?, b.to_vec()),
        Less => (a.to_vec(), downsample(b, a.len(), rng)?),
        Equal => (a.to_vec(), b.to_vec()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedT {
    pub t: f64,
    pub df: usize,
}

pub fn paired_t(a: &[f64], b: &[f64]) -> Result<PairedT> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(PairedT { t: mean / (var.sqrt() / (n as f64).sqrt()), df: n - 1 })
}

/// Logistic model over the normalized features `(H_ks, H_deg)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifierModel {
    pub weights: [f64; 2],
    pub bias: f64,
}

impl ClassifierModel {
    pub fn logit(&self, x: &[f64; 2]) -> f64 {
        self.bias + self.weights[0] * x[0] + self.weights[1] * x[1]
    }

    pub fn probability(&self, x: &[f64; 2]) -> f64 {
        1.0 / (1.0 + (-self.logit(x)).exp())
    }

    pub fn predict(&self, x: &[f64; 2]) -> bool {
        self.logit(x) > 0.0
    }

    /// Fraction of correctly predicted labels.
    pub fn accuracy(&self, features: &[[f64; 2]], labels: &[bool]) -> f64 {
        let hits = features.iter().zip(labels).filter(|(x, &y)| self.predict(x) == y).count();
        hits as f64 / features.len().max(1) as f64
    }
}

#[derive(Clone, Debug)]
pub struct IrlsFit {
    pub model: ClassifierModel,
    /// Penalized negative log-likelihood before the first and after every step.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn design(x: &[f64; 2]) -> Vector3<f64> {
    Vector3::new(1.0, x[0], x[1])
}

fn penalized_loss(beta: &Vector3<f64>, features: &[[f64; 2]], labels: &[bool]) -> f64 {
    let nll: f64 = features
        .iter()
        .zip(labels)
        .map(|(x, &y)| {
            let z = beta.dot(&design(x));
            softplus(z) - if y { z } else { 0.0 }
        })
        .sum();
    nll + 0.5 * LOGISTIC_L2 * beta.norm_squared()
}

/// Fits by iteratively reweighted least squares (Newton steps with step
/// halving, so the loss never increases).
pub fn fit_irls(features: &[[f64; 2]], labels: &[bool]) -> Result<IrlsFit> {
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch(features.len(), labels.len()));
    }
    if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
        return Err(Error::DegenerateLabels);
    }
    let mut beta = Vector3::zeros();
    let mut loss = penalized_loss(&beta, features, labels);
    let mut loss_trace = vec![loss];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < LOGISTIC_MAX_ITERATIONS {
        iterations += 1;
        let mut gradient = beta * LOGISTIC_L2;
        let mut hessian = Matrix3::identity() * LOGISTIC_L2;
        for (x, &y) in features.iter().zip(labels) {
            let xt = design(x);
            let p = 1.0 / (1.0 + (-beta.dot(&xt)).exp());
            gradient += xt * (p - if y { 1.0 } else { 0.0 });
            hessian += xt * xt.transpose() * (p * (1.0 - p));
        }
        let step = match hessian.cholesky() {
            Some(c) => c.solve(&gradient),
            None => break,
        };
        let mut scale = 1.0;
        let mut next = beta;
        let mut next_loss = loss;
        while scale > 1e-12 {
            let candidate = beta - step * scale;
            let candidate_loss = penalized_loss(&candidate, features, labels);
            if candidate_loss <= loss {
                next = candidate;
                next_loss = candidate_loss;
                break;
            }
            scale *= 0.5;
        }
        let change = (next - beta).amax();
        beta = next;
        loss = next_loss;
        loss_trace.push(loss);
        if change < LOGISTIC_TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(IrlsFit {
        model: ClassifierModel { weights: [beta[1], beta[2]], bias: beta[0] },
        loss_trace,
        iterations,
        converged,
    })
}

#[derive(Clone, Debug)]
pub struct HoldoutFit {
    pub model: ClassifierModel,
    /// Accuracy on the held-out split.
    pub accuracy: f64,
    pub train_size: usize,
    pub test_size: usize,
}

/// Fits on a random 90% of the examples and scores the remaining 10%.
pub fn train_logistic<R: Rng + ?Sized>(features: &[[f64; 2]], labels: &[bool], rng: &mut R) -> Result<HoldoutFit> {
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch(features.len(), labels.len()));
    }
    let n = features.len();
    let test_size = ((n as f64 * HOLDOUT_FRACTION).round() as usize).max(1);
    if n <= test_size {
        return Err(Error::InsufficientSamples { needed: test_size + 1, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let (test, train) = order.split_at(test_size);
    let positives = train.iter().filter(|&&i| labels[i]).count();
    if positives < 2 || train.len() - positives < 2 {
        return Err(Error::DegenerateLabels);
    }
    let pick = |idx: &[usize]| -> (Vec<[f64; 2]>, Vec<bool>) { idx.iter().map(|&i| (features[i], labels[i])).unzip() };
    let (train_x, train_y) = pick(train);
    let (test_x, test_y) = pick(test);
    let model = fit_irls(&train_x, &train_y)?.model;
    Ok(HoldoutFit { accuracy: evaluate(&model, &test_x, &test_y), model, train_size: train.len(), test_size })
}

pub fn evaluate(model: &ClassifierModel, features: &[[f64; 2]], labels: &[bool]) -> f64 {
    model.accuracy(features, labels)
}

/// Real-versus-synthetic comparison for one language and condition.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub language: String,
    pub condition: String,
    pub n_real: usize,
    pub n_synthetic: usize,
    /// Sample size after downsampling the larger side.
    pub n_compared: usize,
    /// `D(p_real ‖ p_condition)` in nats.
    pub kld_vs_real: f64,
    /// Bootstrap KLD of the (downsampled) real sample against itself.
    pub zero_baseline: f64,
    pub accuracy_all: Option<f64>,
    pub accuracy_min10: Option<f64>,
    pub mean_real: [f64; 2],
    pub mean_synthetic: [f64; 2],
    pub alpha_real: f64,
    pub alpha_synthetic: f64,
}

impl ComparisonReport {
    pub fn to_key_value(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "na".to_string(), crate::io::fmt_sig);
        let f = crate::io::fmt_sig;
        let mut s = String::from("# deptopo comparison report v1 (key=value; KLD in nats)\n");
        let _ = writeln!(s, "language={}", self.language);
        let _ = writeln!(s, "condition={}", self.condition);
        let _ = writeln!(s, "n_real={}", self.n_real);
        let _ = writeln!(s, "n_synthetic={}", self.n_synthetic);
        let _ = writeln!(s, "n_compared={}", self.n_compared);
        let _ = writeln!(s, "kld_vs_real={}", f(self.kld_vs_real));
        let _ = writeln!(s, "zero_baseline={}", f(self.zero_baseline));
        let _ = writeln!(s, "accuracy_all={}", opt(self.accuracy_all));
        let _ = writeln!(s, "accuracy_min10={}", opt(self.accuracy_min10));
        let _ = writeln!(s, "mean_H_ks_real={}", f(self.mean_real[0]));
        let _ = writeln!(s, "mean_H_deg_real={}", f(self.mean_real[1]));
        let _ = writeln!(s, "mean_H_ks_synthetic={}", f(self.mean_synthetic[0]));
        let _ = writeln!(s, "mean_H_deg_synthetic={}", f(self.mean_synthetic[1]));
        let _ = writeln!(s, "mean_alpha_hat_real={}", f(self.alpha_real));
        let _ = writeln!(s, "mean_alpha_hat_synthetic={}", f(self.alpha_synthetic));
        s
    }
}
