//! Directed labelled trees and their extended Prüfer encoding.
//!
//! Vertices are dense integers `0..n`. A [`DirectedTree`] stores one parent
//! pointer per vertex; the root is the only vertex without one. An
//! [`ExtendedPrueferCode`] is the standard Prüfer sequence of the undirected
//! skeleton followed by the root id, so there are exactly `n^(n-1)` codes and
//! each one names a distinct directed tree.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

/// Largest size accepted by the exhaustive enumerator (`8^7` ≈ 2.1M trees).
pub const MAX_ENUMERATION_SIZE: usize = 8;

/// A rooted tree on `n` labelled vertices with edges oriented parent → child.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DirectedTree {
    parents: Vec<Option<usize>>,
    root: usize,
}

impl DirectedTree {
    /// Builds a tree from one optional parent per vertex.
    pub fn from_parents(parents: Vec<Option<usize>>) -> Result<Self> {
        let n = parents.len();
        if n == 0 {
            return Err(Error::InvalidTree("a tree needs at least one vertex".into()));
        }
        let mut root = None;
        for (v, p) in parents.iter().enumerate() {
            match *p {
                None if root.is_some() => return Err(Error::InvalidTree("more than one root".into())),
                None => root = Some(v),
                Some(p) if p >= n => return Err(Error::InvalidTree(format!("parent {p} of vertex {v} out of range"))),
                Some(p) if p == v => return Err(Error::InvalidTree(format!("self-loop on vertex {v}"))),
                Some(_) => {}
            }
        }
        let root = root.ok_or_else(|| Error::InvalidTree("no root (cycle)".into()))?;

        // 0 = unvisited, 1 = on the current chain, 2 = known to reach the root.
        let mut state = vec![0u8; n];
        state[root] = 2;
        let mut chain = Vec::new();
        for start in 0..n {
            let mut v = start;
            while state[v] == 0 {
                state[v] = 1;
                chain.push(v);
                v = parents[v].expect("only the root lacks a parent");
            }
            if state[v] == 1 {
                return Err(Error::InvalidTree(format!("cycle through vertex {v}")));
            }
            for u in chain.drain(..) {
                state[u] = 2;
            }
        }
        Ok(Self { parents, root })
    }

    /// Builds a tree from `(parent, child)` pairs over vertices `0..n`.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(Error::InvalidTree("a tree needs at least one vertex".into()));
        }
        let mut parents = vec![None; n];
        let mut count = 0;
        for (p, c) in edges {
            if p >= n || c >= n {
                return Err(Error::InvalidTree(format!("edge {p}>{c} out of range for n={n}")));
            }
            if p == c {
                return Err(Error::InvalidTree(format!("self-loop on vertex {p}")));
            }
            if parents[c].is_some() {
                return Err(Error::InvalidTree(format!("vertex {c} has more than one parent")));
            }
            parents[c] = Some(p);
            count += 1;
        }
        if count != n - 1 {
            return Err(Error::InvalidTree(format!("{count} edges for {n} vertices")));
        }
        Self::from_parents(parents)
    }

    /// Star on `n` vertices with hub 0 as root.
    pub fn star(n: usize) -> Self {
        let parents = (0..n).map(|v| (v > 0).then_some(0)).collect();
        Self { parents, root: 0 }
    }

    /// Path `0 → 1 → … → n-1` rooted at vertex 0.
    pub fn path(n: usize) -> Self {
        let parents = (0..n).map(|v| v.checked_sub(1)).collect();
        Self { parents, root: 0 }
    }

    pub fn n(&self) -> usize {
        self.parents.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parents[v]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    /// `(parent, child)` pairs ordered by child id.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents.iter().enumerate().filter_map(|(c, p)| p.map(|p| (p, c)))
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n()];
        for p in self.parents.iter().flatten() {
            deg[*p] += 1;
        }
        deg
    }

    /// Degrees in the undirected skeleton.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n()];
        for (p, c) in self.edges() {
            deg[p] += 1;
            deg[c] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// Neighbour lists of the undirected skeleton.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n()];
        for (p, c) in self.edges() {
            adj[p].push(c);
            adj[c].push(p);
        }
        adj
    }

    /// Renames vertex `v` to `perm[v]`. `perm` must be a permutation of `0..n`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::LengthMismatch(perm.len(), n));
        }
        Self::from_edges(n, self.edges().map(|(p, c)| (perm[p], perm[c])))
    }

    /// Same skeleton, rooted at `root`.
    pub fn rerooted(&self, root: usize) -> Result<Self> {
        if root >= self.n() {
            return Err(Error::InvalidTree(format!("root {root} out of range")));
        }
        Ok(orient(&self.neighbors(), root))
    }
}

impl fmt::Debug for DirectedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DirectedTree(n={}, root={}, edges=[", self.n(), self.root)?;
        for (i, (p, c)) in self.edges().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{p}>{c}")?;
        }
        f.write_str("])")
    }
}

fn orient(adj: &[Vec<usize>], root: usize) -> DirectedTree {
    let mut parents = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                parents[u] = Some(v);
                queue.push_back(u);
            }
        }
    }
    DirectedTree { parents, root }
}

/// Standard Prüfer sequence (length `n-2`) plus the root id.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExtendedPrueferCode {
    code: Vec<usize>,
    root: usize,
}

impl ExtendedPrueferCode {
    pub fn new(code: Vec<usize>, root: usize) -> Result<Self> {
        let n = code.len() + 2;
        if let Some(&bad) = code.iter().find(|&&s| s >= n) {
            return Err(Error::InvalidCode(format!("symbol {bad} out of range for n={n}")));
        }
        if root >= n {
            return Err(Error::InvalidCode(format!("root {root} out of range for n={n}")));
        }
        Ok(Self { code, root })
    }

    /// Builds a code from its `n-1` symbols; the last one is the root.
    pub fn from_symbols(symbols: &[usize]) -> Result<Self> {
        match symbols.split_last() {
            Some((&root, code)) => Self::new(code.to_vec(), root),
            None => Err(Error::InvalidCode("need at least one symbol".into())),
        }
    }

    /// Number of vertices of the encoded tree.
    pub fn n(&self) -> usize {
        self.code.len() + 2
    }

    pub fn code(&self) -> &[usize] {
        &self.code
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Number of symbols, `n-1`; position `len()-1` holds the root.
    pub fn len(&self) -> usize {
        self.code.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn symbol(&self, pos: usize) -> usize {
        if pos == self.code.len() {
            self.root
        } else {
            self.code[pos]
        }
    }

    pub fn symbols(&self) -> Vec<usize> {
        let mut s = self.code.clone();
        s.push(self.root);
        s
    }

    /// Copy with the symbol at `pos` replaced.
    pub fn with_symbol(&self, pos: usize, value: usize) -> Result<Self> {
        if pos >= self.len() {
            return Err(Error::InvalidCode(format!("position {pos} out of range")));
        }
        if value >= self.n() {
            return Err(Error::InvalidCode(format!("symbol {value} out of range for n={}", self.n())));
        }
        let mut out = self.clone();
        if pos == self.code.len() {
            out.root = value;
        } else {
            out.code[pos] = value;
        }
        Ok(out)
    }

    /// Decodes with smallest-leaf-first Prüfer decoding, then orients edges
    /// away from the root.
    pub fn decode(&self) -> DirectedTree {
        let n = self.n();
        let mut degree = vec![1usize; n];
        for &s in &self.code {
            degree[s] += 1;
        }
        let mut adj = vec![Vec::new(); n];
        let mut link = |a: usize, b: usize| {
            adj[a].push(b);
            adj[b].push(a);
        };
        let mut ptr = degree.iter().position(|&d| d == 1).expect("a code always leaves a leaf");
        let mut leaf = ptr;
        for &v in &self.code {
            link(leaf, v);
            degree[v] -= 1;
            if degree[v] == 1 && v < ptr {
                leaf = v;
            } else {
                ptr += 1;
                while degree[ptr] != 1 {
                    ptr += 1;
                }
                leaf = ptr;
            }
        }
        link(leaf, n - 1);
        orient(&adj, self.root)
    }

    /// Inverse of [`decode`](Self::decode). Trees with fewer than two
    /// vertices have no code.
    pub fn encode(tree: &DirectedTree) -> Result<Self> {
        let n = tree.n();
        if n < 2 {
            return Err(Error::UnsupportedSize { n, reason: "Prüfer codes need n >= 2" });
        }
        let adj = tree.neighbors();
        // Parent pointers with respect to vertex n-1, the last survivor.
        let toward_last = orient(&adj, n - 1);
        let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
        let mut code = Vec::with_capacity(n - 2);
        let mut ptr = degree.iter().position(|&d| d == 1).expect("trees have leaves");
        let mut leaf = ptr;
        for _ in 0..n - 2 {
            let next = toward_last.parents[leaf].expect("leaf below n-1 has a parent");
            code.push(next);
            degree[next] -= 1;
            if degree[next] == 1 && next < ptr {
                leaf = next;
            } else {
                ptr += 1;
                while degree[ptr] != 1 {
                    ptr += 1;
                }
                leaf = ptr;
            }
        }
        Ok(Self { code, root: tree.root })
    }

    /// Every extended code for `n` vertices, in lexicographic symbol order.
    pub fn all(n: usize) -> impl Iterator<Item = ExtendedPrueferCode> {
        let len = n.saturating_sub(1);
        let mut next = (n >= 2).then(|| vec![0usize; len]);
        std::iter::from_fn(move || {
            let current = next.take()?;
            let mut succ = current.clone();
            for i in (0..len).rev() {
                succ[i] += 1;
                if succ[i] < n {
                    next = Some(succ);
                    break;
                }
                succ[i] = 0;
            }
            let (root, code) = current.split_last().expect("n >= 2");
            Some(ExtendedPrueferCode { code: code.to_vec(), root: *root })
        })
    }
}

/// Decodes an extended Prüfer code into its directed tree.
pub fn decode_extended_pruefer(code: &ExtendedPrueferCode) -> DirectedTree {
    code.decode()
}

/// Yields every directed tree on `n` labelled vertices exactly once.
pub fn enumerate_directed_trees(n: usize) -> Result<impl Iterator<Item = DirectedTree>> {
    if !(2..=MAX_ENUMERATION_SIZE).contains(&n) {
        return Err(Error::UnsupportedSize { n, reason: "exhaustive enumeration supports 2 <= n <= 8" });
    }
    Ok(ExtendedPrueferCode::all(n).map(|c| c.decode()))
}

/// Number of vertices per out-degree.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DegreeHistogram {
    counts: BTreeMap<usize, usize>,
}

impl DegreeHistogram {
    pub fn of(tree: &DirectedTree) -> Self {
        let mut counts = BTreeMap::new();
        for k in tree.out_degrees() {
            *counts.entry(k).or_insert(0) += 1;
        }
        Self { counts }
    }

    pub fn count(&self, k: usize) -> usize {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    /// `(out-degree, vertex count)` in increasing degree order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.counts.iter().map(|(&k, &c)| (k, c))
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

pub fn out_degree_histogram(tree: &DirectedTree) -> DegreeHistogram {
    DegreeHistogram::of(tree)
}

/// Dense symmetric 0/1 matrix with a zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    data: Vec<u8>,
}

impl AdjacencyMatrix {
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!("row {i} has {} entries, want {n}", row.len())));
            }
            data.extend_from_slice(row);
        }
        let m = Self { n, data };
        for i in 0..n {
            if m.get(i, i) != 0 {
                return Err(Error::InvalidMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let a = m.get(i, j);
                if a > 1 {
                    return Err(Error::InvalidMatrix(format!("entry ({i},{j}) is not 0/1")));
                }
                if a != m.get(j, i) {
                    return Err(Error::InvalidMatrix(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn ones(&self) -> usize {
        self.data.iter().map(|&a| a as usize).sum()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        (0..self.n).map(|i| (0..self.n).filter(|&j| self.get(i, j) == 1).collect()).collect()
    }
}

/// Adjacency matrix of the undirected skeleton.
pub fn undirected_adjacency(tree: &DirectedTree) -> AdjacencyMatrix {
    let n = tree.n();
    let mut data = vec![0u8; n * n];
    for (p, c) in tree.edges() {
        data[p * n + c] = 1;
        data[c * n + p] = 1;
    }
    AdjacencyMatrix { n, data }
}
