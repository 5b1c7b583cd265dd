//! Synthetic baseline trees and the attachment-exponent estimator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{DirectedTree, ExtendedPrueferCode};

/// Draws each of the `n-1` extended-code symbols uniformly, so every directed
/// tree on `n` vertices is equally likely.
pub fn sample_uniform_code<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ExtendedPrueferCode> {
    if n < 2 {
        return Err(Error::UnsupportedSize { n, reason: "uniform sampling needs n >= 2" });
    }
    let symbols: Vec<usize> = (0..n - 1).map(|_| rng.random_range(0..n)).collect();
    ExtendedPrueferCode::from_symbols(&symbols)
}

pub fn sample_uniform_directed_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DirectedTree> {
    Ok(sample_uniform_code(n, rng)?.decode())
}

/// Grows a tree by non-linear preferential attachment.
///
/// A uniformly chosen root starts the tree. Each step picks an unlinked
/// vertex uniformly and attaches it below a linked vertex `i` chosen with
/// probability proportional to `K[i]^alpha`, where `K` starts at 1 for every
/// vertex and grows by one per attachment received.
pub fn sample_pa_tree<R: Rng + ?Sized>(n: usize, alpha: f64, rng: &mut R) -> Result<DirectedTree> {
    if n == 0 {
        return Err(Error::UnsupportedSize { n, reason: "a tree needs at least one vertex" });
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("attachment exponent must be finite and >= 0, got {alpha}")));
    }
    // weight[k] = k^alpha for the possible counts 1..=n
    let weight: Vec<f64> = (0..=n).map(|k| (k as f64).powf(alpha)).collect();
    let mut unlinked: Vec<usize> = (0..n).collect();
    let mut k = vec![0usize; n];
    let mut linked = Vec::with_capacity(n);
    let mut parents = vec![None; n];

    let root = unlinked.swap_remove(rng.random_range(0..unlinked.len()));
    linked.push(root);
    k[root] = 1;
    while !unlinked.is_empty() {
        let new_node = unlinked.swap_remove(rng.random_range(0..unlinked.len()));
        let total: f64 = linked.iter().map(|&i| weight[k[i]]).sum();
        let mut target = rng.random::<f64>() * total;
        let mut source = *linked.last().expect("root is linked");
        for &i in &linked {
            target -= weight[k[i]];
            if target < 0.0 {
                source = i;
                break;
            }
        }
        linked.push(new_node);
        k[new_node] = 1;
        k[source] += 1;
        parents[new_node] = Some(source);
    }
    DirectedTree::from_parents(parents)
}

/// Per-tree estimate of the sublinear attachment exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha_hat: f64,
    pub n: usize,
    pub k_max: usize,
}

/// `1 − ln ln n / ln k_max`, with `k_max` the largest undirected degree.
pub fn estimate_alpha(tree: &DirectedTree) -> Result<AlphaEstimate> {
    let n = tree.n();
    if n < 4 {
        return Err(Error::UnsupportedSize { n, reason: "the exponent estimator needs n >= 4" });
    }
    let k_max = tree.max_degree();
    Ok(AlphaEstimate { alpha_hat: alpha_hat(n, k_max), n, k_max })
}

pub fn alpha_hat(n: usize, k_max: usize) -> f64 {
    1.0 - (n as f64).ln().ln() / (k_max as f64).ln()
}

/// Mean of the per-sentence estimates.
pub fn language_alpha(estimates: &[AlphaEstimate]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(estimates.iter().map(|e| e.alpha_hat).sum::<f64>() / estimates.len() as f64)
}
