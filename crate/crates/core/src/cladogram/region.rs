use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;

use super::{Cladogram, Label};
use crate::error::{domain, Result};

/// Connected component left after blowing up at most two internal nodes.
///
/// Blowing up a node gives each of its three edges a private copy of it, so
/// a boundary node appears in the region as an unlabelled leaf.
#[derive(Clone, Debug)]
pub struct Region<'a> {
    tree: &'a Cladogram,
    boundary: Vec<usize>,
    nodes: Vec<usize>,
    edges: Vec<(usize, usize)>,
    size: usize,
}

impl<'a> Region<'a> {
    pub fn whole(tree: &'a Cladogram) -> Region<'a> {
        let nodes: Vec<usize> = (0..tree.node_count()).collect();
        Region { tree, boundary: Vec::new(), size: tree.leaf_of.len(), edges: tree.edges(), nodes }
    }

    /// Component containing the edge `selector` once the nodes in `boundary`
    /// are blown up.
    pub fn new(tree: &'a Cladogram, boundary: &[usize], selector: (usize, usize)) -> Result<Region<'a>> {
        if boundary.len() > 2 {
            return Err(domain("a region has at most two boundary nodes"));
        }
        if boundary.len() == 2 && boundary[0] == boundary[1] {
            return Err(domain("boundary nodes must be distinct"));
        }
        for &b in boundary {
            if b >= tree.node_count() || tree.degree(b) != 3 {
                return Err(domain(format!("boundary node {b} is not an internal node")));
            }
        }
        let (u, v) = selector;
        if u >= tree.node_count() || !tree.neighbors(u).contains(&v) {
            return Err(domain(format!("({u}, {v}) is not an edge")));
        }
        let mut seen = vec![false; tree.node_count()];
        let mut stack = vec![u, v];
        seen[u] = true;
        seen[v] = true;
        let mut edges = vec![(u.min(v), u.max(v))];
        while let Some(x) = stack.pop() {
            if boundary.contains(&x) {
                continue;
            }
            for &y in tree.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    edges.push((x.min(y), x.max(y)));
                    stack.push(y);
                }
            }
        }
        edges.sort_unstable();
        let nodes: Vec<usize> = (0..tree.node_count()).filter(|&x| seen[x]).collect();
        let size = nodes.iter().filter(|&&x| tree.label(x).is_some()).count();
        Ok(Region { tree, boundary: boundary.to_vec(), nodes, edges, size })
    }

    pub fn tree(&self) -> &'a Cladogram {
        self.tree
    }

    /// Number of labelled leaves in the region.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        self.nodes.iter().filter_map(|&x| self.tree.label(x)).collect()
    }

    /// The region as a standalone tree; boundary copies become unlabelled
    /// leaves.
    pub fn to_cladogram(&self) -> Cladogram {
        if self.edges.is_empty() {
            return self.tree.clone();
        }
        let mut id = vec![usize::MAX; self.tree.node_count()];
        for (i, &x) in self.nodes.iter().enumerate() {
            id[x] = i;
        }
        let labels = self.nodes.iter().map(|&x| self.tree.label(x)).collect();
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|&(a, b)| (id[a], id[b])).collect();
        Cladogram::from_edges(labels, &edges).expect("a region of a binary tree is a binary tree")
    }
}

/// A region with a uniformly chosen number (0, 1 or 2) of uniformly chosen
/// boundary nodes and a uniformly chosen selector edge.
pub fn random_region<'a, R: Rng + ?Sized>(tree: &'a Cladogram, rng: &mut R) -> Region<'a> {
    let internal: Vec<usize> = tree.internal_nodes().collect();
    let edges = tree.edges();
    if edges.is_empty() {
        return Region::whole(tree);
    }
    let k = rng.gen_range(0..=internal.len().min(2));
    let boundary: Vec<usize> = sample(rng, internal.len(), k).into_iter().map(|i| internal[i]).collect();
    let selector = edges[rng.gen_range(0..edges.len())];
    Region::new(tree, &boundary, selector).expect("sampled boundary and selector are valid")
}

/// Number of internal nodes `c` of the region whose removal leaves no
/// component with fewer than `m` labelled leaves. At most `size / m`.
pub fn count_large_branch_points(region: &Region<'_>, m: usize) -> Result<usize> {
    if m == 0 {
        return Err(domain("m must be at least 1"));
    }
    let t = region.to_cladogram();
    let Some(root) = (0..t.node_count()).find(|&v| t.is_leaf(v)) else {
        return Ok(0);
    };
    let (order, parent) = t.dfs(root);
    let mut below = vec![0usize; t.node_count()];
    for &v in order.iter().rev() {
        if t.label(v).is_some() {
            below[v] += 1;
        }
        if parent[v] != usize::MAX {
            below[parent[v]] += below[v];
        }
    }
    let total = below[root];
    let count = t
        .internal_nodes()
        .filter(|&c| {
            let up = total - below[c];
            let smallest = t.neighbors(c).iter().filter(|&&w| w != parent[c]).map(|&w| below[w]).fold(up, usize::min);
            smallest >= m
        })
        .count();
    Ok(count)
}
