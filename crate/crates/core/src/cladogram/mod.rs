//! Unrooted leaf-labelled binary trees (cladograms).
//!
//! A cladogram on `n` leaves has `n` leaves, `n - 2` internal nodes of degree
//! three and `2n - 3` edges. The trees on zero and one leaf are represented
//! explicitly. Leaves normally carry distinct labels; unlabelled leaves only
//! appear in trees cut out of a region (see [`Region::to_cladogram`]).

mod newick;
mod region;

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use rand::Rng;

use crate::error::{domain, Result};

pub use region::{count_large_branch_points, random_region, Region};

pub type Label = u32;

const NONE: usize = usize::MAX;

#[derive(Clone, Debug)]
pub struct Cladogram {
    adj: Vec<Vec<usize>>,
    labels: Vec<Option<Label>>,
    leaf_of: BTreeMap<Label, usize>,
}

impl Cladogram {
    pub fn empty() -> Self {
        Cladogram { adj: Vec::new(), labels: Vec::new(), leaf_of: BTreeMap::new() }
    }

    pub fn single(label: Label) -> Self {
        Cladogram { adj: vec![Vec::new()], labels: vec![Some(label)], leaf_of: BTreeMap::from([(label, 0)]) }
    }

    /// Builds a tree from an edge list, checking that the result is a binary
    /// tree with labels only on leaves and no repeated label.
    pub fn from_edges(labels: Vec<Option<Label>>, edges: &[(usize, usize)]) -> Result<Self> {
        let nodes = labels.len();
        let mut adj = vec![Vec::new(); nodes];
        for &(u, v) in edges {
            if u >= nodes || v >= nodes || u == v {
                return Err(domain(format!("bad edge ({u}, {v})")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        Self::from_adjacency(labels, adj)
    }

    pub(crate) fn from_adjacency(labels: Vec<Option<Label>>, adj: Vec<Vec<usize>>) -> Result<Self> {
        let nodes = labels.len();
        if adj.len() != nodes {
            return Err(domain("adjacency and label vectors differ in length"));
        }
        let mut leaf_of = BTreeMap::new();
        for (v, l) in labels.iter().enumerate() {
            if let Some(l) = *l {
                if leaf_of.insert(l, v).is_some() {
                    return Err(domain(format!("label {l} appears twice")));
                }
            }
        }
        let t = Cladogram { adj, labels, leaf_of };
        if nodes == 0 {
            return Ok(t);
        }
        if nodes == 1 {
            if t.labels[0].is_none() && !t.adj[0].is_empty() {
                return Err(domain("malformed single-node tree"));
            }
            return Ok(t);
        }
        let degree_sum: usize = t.adj.iter().map(Vec::len).sum();
        if degree_sum != 2 * (nodes - 1) {
            return Err(domain("edge count does not match a tree"));
        }
        for v in 0..nodes {
            match t.adj[v].len() {
                1 => {}
                3 if t.labels[v].is_none() => {}
                3 => return Err(domain(format!("internal node {v} carries a label"))),
                d => return Err(domain(format!("node {v} has degree {d}"))),
            }
        }
        let (order, _) = t.dfs(0);
        if order.len() != nodes {
            return Err(domain("graph is not connected"));
        }
        Ok(t)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Number of leaves, labelled or not.
    pub fn leaf_count(&self) -> usize {
        self.adj.iter().filter(|a| a.len() <= 1).count()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.adj[v].len() <= 1
    }

    pub fn label(&self, v: usize) -> Option<Label> {
        self.labels[v]
    }

    /// Node carrying `label`.
    pub fn leaf(&self, label: Label) -> Option<usize> {
        self.leaf_of.get(&label).copied()
    }

    /// Labels in increasing order.
    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.leaf_of.keys().copied()
    }

    pub fn label_set(&self) -> BTreeSet<Label> {
        self.leaf_of.keys().copied().collect()
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.adj.len()).filter(|&v| self.adj[v].len() == 3)
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, nbrs) in self.adj.iter().enumerate() {
            for &v in nbrs {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Iterative depth-first search from `root`: pre-order and parent array.
    pub(crate) fn dfs(&self, root: usize) -> (Vec<usize>, Vec<usize>) {
        let mut parent = vec![NONE; self.adj.len()];
        let mut seen = vec![false; self.adj.len()];
        let mut order = Vec::with_capacity(self.adj.len());
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(v) = stack.pop() {
            order.push(v);
            for &w in self.adj[v].iter().rev() {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = v;
                    stack.push(w);
                }
            }
        }
        (order, parent)
    }

    /// Subdivides edge number `edge` of [`Cladogram::edges`] and hangs a new
    /// leaf labelled `label` from the middle.
    pub fn attach_leaf(&self, edge: usize, label: Label) -> Result<Cladogram> {
        if self.leaf_of.contains_key(&label) {
            return Err(domain(format!("label {label} already present")));
        }
        let mut adj = self.adj.clone();
        let mut labels = self.labels.clone();
        match self.adj.len() {
            0 => return Ok(Cladogram::single(label)),
            1 => {
                adj[0].push(1);
                adj.push(vec![0]);
                labels.push(Some(label));
                return Cladogram::from_adjacency(labels, adj);
            }
            _ => {}
        }
        let edges = self.edges();
        let &(u, v) = edges.get(edge).ok_or_else(|| domain(format!("edge index {edge} out of range")))?;
        let w = adj.len();
        let leaf = w + 1;
        replace(&mut adj[u], v, w);
        replace(&mut adj[v], u, w);
        adj.push(vec![u, v, leaf]);
        adj.push(vec![w]);
        labels.push(None);
        labels.push(Some(label));
        let mut leaf_of = self.leaf_of.clone();
        leaf_of.insert(label, leaf);
        Ok(Cladogram { adj, labels, leaf_of })
    }

    /// Tree spanned by the leaves whose labels are in `keep`, with degree-two
    /// nodes suppressed.
    pub fn induced_subtree(&self, keep: &BTreeSet<Label>) -> Result<Cladogram> {
        for l in keep {
            if !self.leaf_of.contains_key(l) {
                return Err(domain(format!("label {l} is not a leaf of the tree")));
            }
        }
        let mut it = keep.iter();
        let first = match it.next() {
            None => return Ok(Cladogram::empty()),
            Some(&l) => l,
        };
        if keep.len() == 1 {
            return Ok(Cladogram::single(first));
        }
        let root = self.leaf_of[&first];
        let (order, parent) = self.dfs(root);
        let mut hits = vec![0u32; self.adj.len()];
        for &v in order.iter().rev() {
            if matches!(self.labels[v], Some(l) if keep.contains(&l)) {
                hits[v] += 1;
            }
            if parent[v] != NONE {
                hits[parent[v]] += hits[v];
            }
        }
        // Every kept node sits on a path towards the root leaf, so the span is
        // exactly the set of nodes whose subtree holds a kept leaf.
        let span_degree = |v: usize| -> usize {
            let up = usize::from(v != root);
            up + self.adj[v].iter().filter(|&&w| w != parent[v] && hits[w] > 0).count()
        };
        let mut new_id = vec![NONE; self.adj.len()];
        let mut anchor = vec![NONE; self.adj.len()];
        let mut labels = Vec::new();
        let mut edges = Vec::new();
        for &v in &order {
            if hits[v] == 0 {
                continue;
            }
            if v == root || span_degree(v) != 2 {
                new_id[v] = labels.len();
                labels.push(self.labels[v]);
                if v != root {
                    edges.push((new_id[anchor[parent[v]]], new_id[v]));
                }
                anchor[v] = v;
            } else {
                anchor[v] = anchor[parent[v]];
            }
        }
        Cladogram::from_edges(labels, &edges)
    }

    /// Canonical Newick encoding: rooted at the smallest label, children
    /// ordered by their smallest label. Two trees are isomorphic (fixing
    /// labels) exactly when their canonical forms agree.
    pub fn canonical_form(&self) -> String {
        let nodes = self.adj.len();
        if nodes == 0 {
            return ";".to_string();
        }
        let root = match self.leaf_of.values().next() {
            Some(&v) => v,
            None => (0..nodes).find(|&v| self.is_leaf(v)).unwrap_or(0),
        };
        if nodes == 1 {
            return format!("{};", leaf_name(self.labels[root]));
        }
        let top = self.adj[root][0];
        let (order, parent) = self.dfs(top);
        let mut enc: Vec<String> = vec![String::new(); nodes];
        let mut key: Vec<Label> = vec![Label::MAX; nodes];
        for &v in order.iter().rev() {
            let mut kids: Vec<usize> = self.adj[v].iter().copied().filter(|&w| w != parent[v]).collect();
            if kids.is_empty() {
                enc[v] = leaf_name(self.labels[v]);
                key[v] = self.labels[v].unwrap_or(Label::MAX);
                continue;
            }
            kids.sort_by(|&a, &b| key[a].cmp(&key[b]).then_with(|| enc[a].cmp(&enc[b])));
            key[v] = key[kids[0]];
            let mut s = String::from("(");
            for (i, &k) in kids.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push_str(&std::mem::take(&mut enc[k]));
            }
            s.push(')');
            enc[v] = s;
        }
        if nodes == 2 {
            let (a, b) = (self.labels[0], self.labels[1]);
            let (a, b) = if a.unwrap_or(Label::MAX) <= b.unwrap_or(Label::MAX) { (a, b) } else { (b, a) };
            return format!("({},{});", leaf_name(a), leaf_name(b));
        }
        let mut out = std::mem::take(&mut enc[top]);
        out.push(';');
        out
    }

    pub fn to_newick(&self) -> String {
        self.canonical_form()
    }

    pub fn parse_newick(text: &str) -> Result<Cladogram> {
        newick::parse(text)
    }

    pub fn same_shape(&self, other: &Cladogram) -> bool {
        self.canonical_form() == other.canonical_form()
    }
}

fn leaf_name(l: Option<Label>) -> String {
    l.map(|l| l.to_string()).unwrap_or_default()
}

fn replace(list: &mut [usize], from: usize, to: usize) {
    if let Some(x) = list.iter_mut().find(|x| **x == from) {
        *x = to;
    }
}

/// `#B_n = (2n - 5)!!`, with the convention `#B_n = 1` for `n <= 3`.
pub fn count_cladograms(n: u32) -> BigUint {
    let mut acc = BigUint::from(1u32);
    let mut k = 3u32;
    while n >= 4 && k <= 2 * n - 5 {
        acc *= k;
        k += 2;
    }
    acc
}

/// Uniform cladogram on the labels `1..=n`: leaf `k` is attached to a
/// uniformly chosen edge of the tree on the first `k - 1` leaves.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Cladogram {
    match n {
        0 => return Cladogram::empty(),
        1 => return Cladogram::single(1),
        _ => {}
    }
    let nodes = 2 * n - 2;
    let mut adj: Vec<Vec<usize>> = Vec::with_capacity(nodes);
    let mut labels: Vec<Option<Label>> = Vec::with_capacity(nodes);
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(2 * n - 3);
    adj.push(vec![1]);
    adj.push(vec![0]);
    labels.push(Some(1));
    labels.push(Some(2));
    edges.push((0, 1));
    for k in 3..=n {
        let e = rng.gen_range(0..edges.len());
        let (u, v) = edges[e];
        let w = adj.len();
        let leaf = w + 1;
        replace(&mut adj[u], v, w);
        replace(&mut adj[v], u, w);
        adj.push(vec![u, v, leaf]);
        adj.push(vec![w]);
        labels.push(None);
        labels.push(Some(k as Label));
        edges[e] = (u, w);
        edges.push((w, v));
        edges.push((w, leaf));
    }
    let leaf_of = labels.iter().enumerate().filter_map(|(v, l)| l.map(|l| (l, v))).collect();
    Cladogram { adj, labels, leaf_of }
}

/// Largest `n` accepted by [`enumerate_cladograms`].
pub const MAX_ENUMERATE_LEAVES: usize = 8;

/// Lazily enumerates every cladogram on the labels `1..=n`, each exactly
/// once, for `2 <= n <= 8`.
pub fn enumerate_cladograms(n: usize) -> Result<Enumerate> {
    if !(2..=MAX_ENUMERATE_LEAVES).contains(&n) {
        return Err(domain(format!("enumeration needs 2 <= n <= {MAX_ENUMERATE_LEAVES}, got {n}")));
    }
    let start = Cladogram::from_edges(vec![Some(1), Some(2)], &[(0, 1)]).expect("two-leaf tree");
    Ok(Enumerate { n, stack: vec![start] })
}

pub struct Enumerate {
    n: usize,
    stack: Vec<Cladogram>,
}

impl Iterator for Enumerate {
    type Item = Cladogram;

    fn next(&mut self) -> Option<Cladogram> {
        while let Some(t) = self.stack.pop() {
            let k = t.leaf_count();
            if k >= self.n {
                return Some(t);
            }
            for e in (0..t.edge_count()).rev() {
                let child = t.attach_leaf(e, (k + 1) as Label).expect("edge index in range");
                self.stack.push(child);
            }
        }
        None
    }
}
