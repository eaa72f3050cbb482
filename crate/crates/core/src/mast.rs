//! Maximum agreement subtree of two cladograms.
//!
//! [`mast`] runs a quadratic dynamic program over pairs of directed edges.
//! A directed edge `u -> v` stands for the subtree hanging off `v` away from
//! `u`, rooted at `v`. For two such rooted subtrees `A` (children `A1`, `A2`)
//! and `B` (children `B1`, `B2`) the rooted agreement size is
//!
//! ```text
//! R(A, B) = max( R(A1,B1) + R(A2,B2), R(A1,B2) + R(A2,B1),
//!                R(A,B1), R(A,B2), R(A1,B), R(A2,B) )
//! ```
//!
//! with `R(leaf x, B) = [x in B]`. An unrooted agreement subtree splits along
//! any of its edges into two rooted halves sitting on opposite sides of one
//! edge in each tree, so the unrooted answer is the maximum over directed
//! edge pairs `(a, b)` of `R(a, b) + R(rev a, rev b)`.

use std::collections::BTreeSet;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::cladogram::{Cladogram, Label, Region};
use crate::error::{domain, Error, Result};

/// Largest common label set accepted by [`mast`].
pub const MAX_MAST_LEAVES: usize = 2048;
/// Largest common label set accepted by [`mast_bruteforce`].
pub const MAX_BRUTEFORCE_LEAVES: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MastResult {
    pub size: usize,
    /// Sorted labels of one maximum agreement set.
    pub witness: Vec<Label>,
}

fn common_labels(a: &Cladogram, b: &Cladogram) -> BTreeSet<Label> {
    a.label_set().intersection(&b.label_set()).copied().collect()
}

/// Checks that `witness` induces the same tree in `a` and `b`.
pub fn is_agreement_set(a: &Cladogram, b: &Cladogram, witness: &[Label]) -> Result<bool> {
    let keep: BTreeSet<Label> = witness.iter().copied().collect();
    Ok(a.induced_subtree(&keep)?.same_shape(&b.induced_subtree(&keep)?))
}

pub fn mast(a: &Cladogram, b: &Cladogram) -> Result<MastResult> {
    let common = common_labels(a, b);
    if common.len() > MAX_MAST_LEAVES {
        return Err(Error::Budget(format!(
            "{} common labels exceeds the MAST limit of {MAX_MAST_LEAVES}",
            common.len()
        )));
    }
    let result = if common.len() <= 2 {
        MastResult { size: common.len(), witness: common.iter().copied().collect() }
    } else {
        let labels: Vec<Label> = common.iter().copied().collect();
        let ta = EdgeTree::new(&a.induced_subtree(&common)?, &labels);
        let tb = EdgeTree::new(&b.induced_subtree(&common)?, &labels);
        solve(&ta, &tb, &labels)
    };
    if cfg!(debug_assertions) && !is_agreement_set(a, b, &result.witness)? {
        return Err(Error::Invariant("MAST witness does not induce equal trees".into()));
    }
    Ok(result)
}

/// Exhaustive search over label subsets, largest first and lexicographic
/// within a size. Exponential; refuses more than [`MAX_BRUTEFORCE_LEAVES`]
/// common labels.
pub fn mast_bruteforce(a: &Cladogram, b: &Cladogram) -> Result<MastResult> {
    let common = common_labels(a, b);
    if common.len() > MAX_BRUTEFORCE_LEAVES {
        return Err(domain(format!(
            "brute force over {} labels exceeds the limit of {MAX_BRUTEFORCE_LEAVES}",
            common.len()
        )));
    }
    let labels: Vec<Label> = common.into_iter().collect();
    for size in (1..=labels.len()).rev() {
        for subset in labels.iter().copied().combinations(size) {
            if is_agreement_set(a, b, &subset)? {
                return Ok(MastResult { size, witness: subset });
            }
        }
    }
    Ok(MastResult { size: 0, witness: Vec::new() })
}

/// MAST of two regions, restricted to the labels they share.
pub fn mast_regions(r: &Region<'_>, r2: &Region<'_>) -> Result<MastResult> {
    let common: BTreeSet<Label> = r.labels().intersection(&r2.labels()).copied().collect();
    // Paths between leaves of a region stay inside it, so restricting the
    // parent tree to labels of the region gives the same induced tree.
    let a = r.tree().induced_subtree(&common)?;
    let b = r2.tree().induced_subtree(&common)?;
    mast(&a, &b)
}

const NIL: u32 = u32::MAX;

/// Directed edges of a fully labelled tree, numbered by increasing leaf count
/// of the subtree they point to, so every child edge precedes its parent.
struct EdgeTree {
    kids: Vec<[u32; 2]>,
    rev: Vec<u32>,
    /// Dense label index of the head when the head is a leaf.
    head: Vec<u32>,
    /// Leaves of the subtree form `[lo, hi)` in DFS leaf order, or its
    /// complement when `inside` is false.
    lo: Vec<u32>,
    hi: Vec<u32>,
    inside: Vec<bool>,
    /// DFS leaf position of each dense label index.
    pos: Vec<u32>,
}

impl EdgeTree {
    fn new(t: &Cladogram, labels: &[Label]) -> EdgeTree {
        let nodes = t.node_count();
        let root = t.leaf(labels[0]).expect("label present");
        let (order, parent) = t.dfs(root);
        let mut pos = vec![0u32; labels.len()];
        let mut node_lo = vec![u32::MAX; nodes];
        let mut node_hi = vec![0u32; nodes];
        let mut next = 0u32;
        for &v in &order {
            if let Some(l) = t.label(v) {
                let idx = labels.binary_search(&l).expect("restricted tree") as u32;
                pos[idx as usize] = next;
                node_lo[v] = next;
                node_hi[v] = next + 1;
                next += 1;
            }
        }
        for &v in order.iter().rev() {
            let p = parent[v];
            if p != usize::MAX {
                node_lo[p] = node_lo[p].min(node_lo[v]);
                node_hi[p] = node_hi[p].max(node_hi[v]);
            }
        }
        let total = labels.len() as u32;

        // Raw ids: slot k of node u is the edge u -> adj[u][k].
        let mut offset = vec![0usize; nodes + 1];
        for u in 0..nodes {
            offset[u + 1] = offset[u] + t.degree(u);
        }
        let d = offset[nodes];
        let raw = |u: usize, v: usize| -> usize {
            offset[u] + t.neighbors(u).iter().position(|&w| w == v).expect("adjacent")
        };
        let mut count = vec![0u32; d];
        let mut tail = vec![0usize; d];
        let mut headv = vec![0usize; d];
        for u in 0..nodes {
            for (k, &v) in t.neighbors(u).iter().enumerate() {
                let e = offset[u] + k;
                tail[e] = u;
                headv[e] = v;
                count[e] = if parent[v] == u { node_hi[v] - node_lo[v] } else { total - (node_hi[u] - node_lo[u]) };
            }
        }
        let mut by_count: Vec<usize> = (0..d).collect();
        by_count.sort_by_key(|&e| (count[e], e));
        let mut rank = vec![0u32; d];
        for (r, &e) in by_count.iter().enumerate() {
            rank[e] = r as u32;
        }

        let mut out = EdgeTree {
            kids: vec![[NIL; 2]; d],
            rev: vec![0; d],
            head: vec![NIL; d],
            lo: vec![0; d],
            hi: vec![0; d],
            inside: vec![true; d],
            pos,
        };
        for e in 0..d {
            let (u, v) = (tail[e], headv[e]);
            let r = rank[e] as usize;
            out.rev[r] = rank[raw(v, u)];
            if let Some(l) = t.label(v) {
                out.head[r] = labels.binary_search(&l).expect("restricted tree") as u32;
            } else {
                let mut k = 0;
                for &w in t.neighbors(v) {
                    if w != u {
                        out.kids[r][k] = rank[raw(v, w)];
                        k += 1;
                    }
                }
            }
            if parent[v] == u {
                out.lo[r] = node_lo[v];
                out.hi[r] = node_hi[v];
            } else {
                out.lo[r] = node_lo[u];
                out.hi[r] = node_hi[u];
                out.inside[r] = false;
            }
        }
        out
    }

    fn len(&self) -> usize {
        self.rev.len()
    }

    #[inline]
    fn contains(&self, e: usize, label: u32) -> bool {
        let p = self.pos[label as usize];
        (self.lo[e] <= p && p < self.hi[e]) == self.inside[e]
    }
}

struct Table {
    cols: usize,
    cells: Vec<u16>,
}

impl Table {
    #[inline]
    fn get(&self, a: u32, b: u32) -> u16 {
        self.cells[a as usize * self.cols + b as usize]
    }
}

fn fill(ta: &EdgeTree, tb: &EdgeTree) -> Table {
    let (d1, d2) = (ta.len(), tb.len());
    let mut cells = vec![0u16; d1 * d2];
    for a in 0..d1 {
        let (before, rest) = cells.split_at_mut(a * d2);
        let row = &mut rest[..d2];
        if ta.head[a] != NIL {
            let x = ta.head[a];
            for (b, cell) in row.iter_mut().enumerate() {
                *cell = u16::from(tb.contains(b, x));
            }
            continue;
        }
        let [c1, c2] = ta.kids[a];
        let r1 = &before[c1 as usize * d2..c1 as usize * d2 + d2];
        let r2 = &before[c2 as usize * d2..c2 as usize * d2 + d2];
        for b in 0..d2 {
            let value = if tb.head[b] != NIL {
                u16::from(ta.contains(a, tb.head[b]))
            } else {
                let [e1, e2] = tb.kids[b];
                let (e1, e2) = (e1 as usize, e2 as usize);
                (r1[e1] + r2[e2]).max(r1[e2] + r2[e1]).max(row[e1]).max(row[e2]).max(r1[b]).max(r2[b])
            };
            row[b] = value;
        }
    }
    Table { cols: d2, cells }
}

fn solve(ta: &EdgeTree, tb: &EdgeTree, labels: &[Label]) -> MastResult {
    let table = fill(ta, tb);
    let mut best = (0u16, 0u32, 0u32);
    for a in 0..ta.len() as u32 {
        let ra = ta.rev[a as usize];
        for b in 0..tb.len() as u32 {
            let v = table.get(a, b) + table.get(ra, tb.rev[b as usize]);
            if v > best.0 {
                best = (v, a, b);
            }
        }
    }
    let (size, a, b) = best;
    let mut witness = Vec::with_capacity(size as usize);
    trace(ta, tb, &table, a, b, &mut witness);
    trace(ta, tb, &table, ta.rev[a as usize], tb.rev[b as usize], &mut witness);
    let mut witness: Vec<Label> = witness.into_iter().map(|i| labels[i as usize]).collect();
    witness.sort_unstable();
    debug_assert_eq!(witness.len(), size as usize);
    MastResult { size: size as usize, witness }
}

/// Follows the first optimal case of the recurrence, in the order it is
/// written above.
fn trace(ta: &EdgeTree, tb: &EdgeTree, table: &Table, a: u32, b: u32, out: &mut Vec<u32>) {
    let mut stack = vec![(a, b)];
    while let Some((a, b)) = stack.pop() {
        let v = table.get(a, b);
        if v == 0 {
            continue;
        }
        if ta.head[a as usize] != NIL {
            out.push(ta.head[a as usize]);
            continue;
        }
        if tb.head[b as usize] != NIL {
            out.push(tb.head[b as usize]);
            continue;
        }
        let [c1, c2] = ta.kids[a as usize];
        let [e1, e2] = tb.kids[b as usize];
        if table.get(c1, e1) + table.get(c2, e2) == v {
            stack.push((c2, e2));
            stack.push((c1, e1));
        } else if table.get(c1, e2) + table.get(c2, e1) == v {
            stack.push((c2, e1));
            stack.push((c1, e2));
        } else if table.get(a, e1) == v {
            stack.push((a, e1));
        } else if table.get(a, e2) == v {
            stack.push((a, e2));
        } else if table.get(c1, b) == v {
            stack.push((c1, b));
        } else {
            stack.push((c2, b));
        }
    }
}
