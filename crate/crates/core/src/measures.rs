//! Production and comprehension cost measures.
//!
//! `h_deg` is the Shannon entropy (bits) of the out-degree distribution and
//! `h_ks` is `log2` of the spectral radius of the undirected adjacency matrix.
//! Both depend on tree size, so they are rescaled to `[0, 1]` against exact
//! per-size extrema held in an [`EntropyExtremaTable`].

use std::collections::HashSet;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{AdjacencyMatrix, DegreeHistogram, DirectedTree};

/// Eigenvalue change below which the residual is checked.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-10;
/// Required `‖Av − λv‖∞` of the returned eigenpair.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Raw entropies of one tree, in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostPair {
    pub h_ks: f64,
    pub h_deg: f64,
}

impl CostPair {
    pub fn new(h_ks: f64, h_deg: f64) -> Self {
        Self { h_ks, h_deg }
    }

    pub fn of(tree: &DirectedTree) -> Result<Self> {
        Ok(Self { h_ks: h_ks(tree)?, h_deg: h_deg(tree) })
    }

    /// Noise-free efficiency `ρ·h_ks − (1−ρ)·h_deg`.
    pub fn efficiency(&self, rho: f64) -> f64 {
        rho * self.h_ks - (1.0 - rho) * self.h_deg
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.h_ks, self.h_deg]
    }
}

/// Entropies rescaled to `[0, 1]` for their tree size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCostPair {
    pub h_ks: f64,
    pub h_deg: f64,
}

impl NormalizedCostPair {
    pub fn as_array(&self) -> [f64; 2] {
        [self.h_ks, self.h_deg]
    }
}

/// Shannon entropy in bits of a histogram, summed in iteration order.
pub(crate) fn entropy_bits(counts: impl IntoIterator<Item = usize>, total: usize) -> f64 {
    let total = total as f64;
    -counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Out-degree entropy in bits.
pub fn h_deg(tree: &DirectedTree) -> f64 {
    let hist = DegreeHistogram::of(tree);
    entropy_bits(hist.iter().map(|(_, c)| c), tree.n())
}

/// Kolmogorov–Sinai entropy: `log2` of the adjacency spectral radius.
pub fn h_ks(tree: &DirectedTree) -> Result<f64> {
    if tree.n() < 2 {
        return Err(Error::UnsupportedSize { n: tree.n(), reason: "h_ks needs at least one edge" });
    }
    Ok(power_iteration(&tree.neighbors())?.value.log2())
}

/// Dominant eigenvalue and unit eigenvector of a symmetric adjacency matrix.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub fn spectral_radius(adjacency: &AdjacencyMatrix) -> Result<f64> {
    dominant_eigenpair(adjacency).map(|e| e.value)
}

pub fn dominant_eigenpair(adjacency: &AdjacencyMatrix) -> Result<Eigenpair> {
    power_iteration(&adjacency.neighbors())
}

fn apply(adj: &[Vec<usize>], x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(adj) {
        *o = row.iter().map(|&j| x[j]).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Trees are bipartite, so A has both λ and −λ as extreme eigenvalues and plain
// power iteration on A oscillates. Iterating on A² converges to a mix u of the
// two eigenvectors; A·u + λ·u then isolates the Perron vector.
fn power_iteration(adj: &[Vec<usize>]) -> Result<Eigenpair> {
    let n = adj.len();
    if n < 2 {
        return Err(Error::InvalidMatrix("need at least two vertices".into()));
    }
    let cap = (10 * n * n).max(100);
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut previous = f64::NAN;
    let mut residual = f64::INFINITY;
    for iteration in 1..=cap {
        apply(adj, &x, &mut y);
        apply(adj, &y, &mut z);
        let mu = dot(&x, &z);
        let norm = dot(&z, &z).sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidMatrix("matrix has no edges".into()));
        }
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi = zi / norm);
        let estimate = mu.sqrt();
        if (estimate - previous).abs() < EIGENVALUE_TOLERANCE {
            apply(adj, &x, &mut y);
            let mut v: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a + estimate * b).collect();
            let vn = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|vi| *vi /= vn);
            apply(adj, &v, &mut y);
            let value = dot(&v, &y);
            residual = y.iter().zip(&v).map(|(a, b)| (a - value * b).abs()).fold(0.0, f64::max);
            if residual < RESIDUAL_TOLERANCE {
                return Ok(Eigenpair { value, vector: v, residual, iterations: iteration });
            }
        }
        previous = estimate;
    }
    Err(Error::NoConvergence { iterations: cap, residual })
}

/// Maximum out-degree entropy over all directed trees on `n` vertices.
///
/// Walks the integer partitions of the `n-1` edges into positive
/// out-degrees, starting from all ones and merging pairs of parts; the
/// remaining `n - L` vertices are leaves.
pub fn max_h_deg(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let start = vec![1u16; n - 1];
    let mut seen: HashSet<Vec<u16>> = HashSet::from([start.clone()]);
    let mut stack = vec![start];
    let mut best = 0.0f64;
    let mut counts = Vec::with_capacity(n);
    while let Some(t) = stack.pop() {
        let len = t.len();
        // histogram in increasing degree order: leaves first, then runs of t
        counts.clear();
        counts.push(n - len);
        let mut run = 1;
        for w in t.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                counts.push(run);
                run = 1;
            }
        }
        counts.push(run);
        let v = entropy_bits(counts.iter().copied(), n);
        if v >= best {
            best = v;
        }
        if len > 1 {
            for i in 0..len {
                // equal parts give identical merges
                if i > 0 && t[i] == t[i - 1] {
                    continue;
                }
                for j in i + 1..len {
                    if j > i + 1 && t[j] == t[j - 1] {
                        continue;
                    }
                    let mut merged = t.clone();
                    merged[i] += merged[j];
                    merged.remove(j);
                    merged.sort_unstable();
                    if !seen.contains(&merged) {
                        seen.insert(merged.clone());
                        stack.push(merged);
                    }
                }
            }
        }
    }
    best
}

/// `log2 n − ((n−1)/n)·log2(n−1)`, attained by stars and paths.
pub fn min_h_deg(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    nf.log2() - (nf - 1.0) / nf * (nf - 1.0).log2()
}

/// `½·log2(n−1)`, attained by the star.
pub fn max_h_ks(n: usize) -> f64 {
    0.5 * (n as f64 - 1.0).log2()
}

/// `h_ks` of the `n`-vertex path, computed numerically.
pub fn min_h_ks(n: usize) -> Result<f64> {
    h_ks(&DirectedTree::path(n))
}

/// Per-size extrema of both measures, in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub n: usize,
    pub min_h_ks: f64,
    pub max_h_ks: f64,
    pub min_h_deg: f64,
    pub max_h_deg: f64,
}

impl Extrema {
    pub fn compute(n: usize) -> Result<Self> {
        Ok(Self { n, min_h_ks: min_h_ks(n)?, max_h_ks: max_h_ks(n), min_h_deg: min_h_deg(n), max_h_deg: max_h_deg(n) })
    }
}

/// Extrema for `n = 2..=n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyExtremaTable {
    rows: Vec<Extrema>,
}

const TABLE_SCHEMA: &str = "# deptopo extrema table v1: n,min_h_ks,max_h_ks,min_h_deg,max_h_deg (bits)";

impl EntropyExtremaTable {
    pub fn n_max(&self) -> usize {
        self.rows.len() + 1
    }

    pub fn get(&self, n: usize) -> Result<&Extrema> {
        n.checked_sub(2).and_then(|i| self.rows.get(i)).ok_or(Error::TableRange(n))
    }

    pub fn rows(&self) -> &[Extrema] {
        &self.rows
    }

    /// Writes the table as comma-separated text at full double precision.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TABLE_SCHEMA}")?;
        writeln!(out, "n,min_h_ks,max_h_ks,min_h_deg,max_h_deg")?;
        for r in &self.rows {
            writeln!(out, "{},{:?},{:?},{:?},{:?}", r.n, r.min_h_ks, r.max_h_ks, r.min_h_deg, r.max_h_deg)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut rows = Vec::new();
        for record in reader.deserialize() {
            let row: Extrema = record?;
            if row.n != rows.len() + 2 {
                return Err(Error::Format(format!(
                    "extrema rows must run 2,3,..; found n={} at position {}",
                    row.n,
                    rows.len()
                )));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Format("empty extrema table".into()));
        }
        Ok(Self { rows })
    }
}

pub fn build_extrema_table(n_max: usize) -> Result<EntropyExtremaTable> {
    if n_max < 4 {
        return Err(Error::UnsupportedSize { n: n_max, reason: "extrema table needs n_max >= 4" });
    }
    let rows = (2..=n_max).into_par_iter().map(Extrema::compute).collect::<Result<Vec<_>>>()?;
    Ok(EntropyExtremaTable { rows })
}

/// Distance from 0 or 1 within which a normalized value is rounding noise.
pub const NORMALIZATION_SNAP: f64 = 1e-12;

/// `(h − min) / (max − min)` per measure.
///
/// Values within [`NORMALIZATION_SNAP`] of an end are set to it, since an
/// extremal tree labelled differently from the reference can differ from it
/// in the last bits. Anything further out is returned as is.
pub fn normalize(cost: CostPair, n: usize, table: &EntropyExtremaTable) -> Result<NormalizedCostPair> {
    if n <= 3 {
        return Err(Error::DegenerateSize(n));
    }
    let e = table.get(n)?;
    Ok(NormalizedCostPair {
        h_ks: snap((cost.h_ks - e.min_h_ks) / (e.max_h_ks - e.min_h_ks)),
        h_deg: snap((cost.h_deg - e.min_h_deg) / (e.max_h_deg - e.min_h_deg)),
    })
}

fn snap(x: f64) -> f64 {
    if x.abs() < NORMALIZATION_SNAP {
        0.0
    } else if (x - 1.0).abs() < NORMALIZATION_SNAP {
        1.0
    } else {
        x
    }
}
