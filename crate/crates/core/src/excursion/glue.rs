//! Gluing excursion pieces along a uniform cladogram.
//!
//! Each edge `e_i = (v_i^1, v_i^2)` of a uniform backbone `T_n` carries an
//! independent excursion tree with two uniform marked points `X_i^1`,
//! `X_i^2`, rescaled to mass `W_i` (distances by `sqrt(W_i)`), where
//! `(W_i)` is Dir(1/2, ..., 1/2). Marked points are identified whenever the
//! backbone nodes they stand for coincide. Edge `e_i` for `i <= n` is the
//! edge of leaf `i`, oriented away from it, so `X_i^1` is the `i`-th leaf of
//! the glued tree.

use std::collections::VecDeque;

use rand::Rng;
use serde_json::json;

use super::ExcursionTree;
use crate::cladogram::{sample_uniform, Cladogram};
use crate::error::{domain, Error, Result};
use crate::mast::MAX_MAST_LEAVES;
use crate::randkit::{sample_symmetric_dirichlet, DirichletVector};

pub const MAX_GLUE_LEAVES: usize = 64;

#[derive(Clone, Debug)]
pub struct Piece {
    pub tree: ExcursionTree,
    /// Grid indices of `X^1` and `X^2`.
    pub marks: [usize; 2],
    pub weight: f64,
}

impl Piece {
    /// Rescaled distance between the two marked points.
    pub fn span(&self) -> f64 {
        self.weight.sqrt() * self.tree.distance_unchecked(self.marks[0], self.marks[1])
    }

    /// Whether grid point `c` lies on the geodesic between `s` and `t`.
    fn separates(&self, c: usize, s: usize, t: usize) -> bool {
        let d = |a, b| self.tree.distance_unchecked(a, b);
        d(s, c) + d(c, t) - d(s, t) <= 1e-12
    }
}

#[derive(Clone, Debug)]
pub struct CoupledTree {
    pub backbone: Cladogram,
    /// `(v^1, v^2)` for each piece, leaf edges first in label order.
    pub edges: Vec<(usize, usize)>,
    pub weights: DirichletVector,
    pub pieces: Vec<Piece>,
    incident: Vec<Vec<(usize, usize)>>,
}

/// A point of the glued tree: grid index `index` of piece `piece`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutPoint {
    pub piece: usize,
    pub index: usize,
}

/// Closure of a component of the glued tree minus at most two points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeRegion {
    Empty,
    Whole,
    /// Component containing `anchor` after removing `cuts`.
    Component {
        cuts: Vec<CutPoint>,
        anchor: CutPoint,
    },
}

pub struct GlueSample {
    pub tree: CoupledTree,
    /// `distances[a][b]` between leaves `a + 1` and `b + 1`.
    pub distances: Vec<Vec<f64>>,
}

/// Coupled tree on `3..=64` leaves together with its leaf distance matrix.
pub fn glue_coupling<R: Rng + ?Sized>(n: usize, grid: usize, rng: &mut R) -> Result<GlueSample> {
    if !(3..=MAX_GLUE_LEAVES).contains(&n) {
        return Err(domain(format!("glue_coupling needs 3 <= n <= {MAX_GLUE_LEAVES}, got {n}")));
    }
    let tree = CoupledTree::sample(n, grid, rng)?;
    let distances = tree.leaf_distances();
    Ok(GlueSample { tree, distances })
}

impl CoupledTree {
    pub fn sample<R: Rng + ?Sized>(n: usize, grid: usize, rng: &mut R) -> Result<CoupledTree> {
        if n < 3 {
            return Err(domain("a coupled tree needs at least three leaves"));
        }
        if n > MAX_MAST_LEAVES {
            return Err(Error::Budget(format!("coupled tree on {n} leaves exceeds {MAX_MAST_LEAVES}")));
        }
        let backbone = sample_uniform(n, rng);
        let mut edges = Vec::with_capacity(2 * n - 3);
        for label in 1..=n as u32 {
            let leaf = backbone.leaf(label).expect("labels 1..=n");
            edges.push((leaf, backbone.neighbors(leaf)[0]));
        }
        edges.extend(backbone.edges().into_iter().filter(|&(u, v)| !backbone.is_leaf(u) && !backbone.is_leaf(v)));
        let weights = sample_symmetric_dirichlet(0.5, edges.len(), rng)?;
        let mut pieces = Vec::with_capacity(edges.len());
        for &w in &weights.weights {
            let tree = ExcursionTree::sample(grid, rng)?;
            let marks = [rng.gen_range(0..grid), rng.gen_range(0..grid)];
            pieces.push(Piece { tree, marks, weight: w });
        }
        let mut incident = vec![Vec::new(); backbone.node_count()];
        for (p, &(u, v)) in edges.iter().enumerate() {
            incident[u].push((v, p));
            incident[v].push((u, p));
        }
        Ok(CoupledTree { backbone, edges, weights, pieces, incident })
    }

    pub fn leaf_count(&self) -> usize {
        self.backbone.leaf_count()
    }

    pub fn total_mass(&self) -> f64 {
        self.pieces.iter().map(|p| p.weight).sum()
    }

    /// Sum of piece spans along the backbone path from leaf `a` to every node.
    fn distances_from(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::NAN; self.backbone.node_count()];
        dist[source] = 0.0;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            for &(w, p) in &self.incident[v] {
                if dist[w].is_nan() {
                    dist[w] = dist[v] + self.pieces[p].span();
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn leaf_distances(&self) -> Vec<Vec<f64>> {
        let n = self.leaf_count();
        let leaves: Vec<usize> = (1..=n as u32).map(|l| self.backbone.leaf(l).expect("label")).collect();
        let mut out: Vec<Vec<f64>> = leaves
            .iter()
            .map(|&a| {
                let d = self.distances_from(a);
                leaves.iter().map(|&b| d[b]).collect()
            })
            .collect();
        for a in 1..n {
            let (upper, rest) = out.split_at_mut(a);
            for (b, row) in upper.iter_mut().enumerate() {
                row[a] = rest[0][b];
            }
        }
        out
    }

    pub fn metadata(&self) -> serde_json::Value {
        json!({
            "leaves": self.leaf_count(),
            "grid": self.pieces.first().map(|p| p.tree.grid()),
            "backbone": self.backbone.to_newick(),
            "edges": self.edges.iter().map(|&(u, v)| json!({
                "from": u,
                "to": v,
                "from_label": self.backbone.label(u),
                "to_label": self.backbone.label(v),
            })).collect::<Vec<_>>(),
            "weights": self.weights.weights,
            "marks": self.pieces.iter().map(|p| p.marks).collect::<Vec<_>>(),
        })
    }

    /// A uniform point of the mass measure.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> CutPoint {
        let u = rng.gen::<f64>();
        let mut acc = 0.0;
        let mut piece = self.pieces.len() - 1;
        for (p, x) in self.pieces.iter().enumerate() {
            acc += x.weight;
            if u < acc {
                piece = p;
                break;
            }
        }
        CutPoint { piece, index: rng.gen_range(0..self.pieces[piece].tree.grid()) }
    }

    /// Region cut out by 0, 1 or 2 uniform points, containing another uniform
    /// point.
    pub fn random_region<R: Rng + ?Sized>(&self, rng: &mut R) -> TreeRegion {
        let k = rng.gen_range(0..=2);
        let cuts = (0..k).map(|_| self.random_point(rng)).collect();
        TreeRegion::Component { cuts, anchor: self.random_point(rng) }
    }

    fn check_point(&self, p: CutPoint) -> Result<()> {
        match self.pieces.get(p.piece) {
            Some(x) if p.index <= x.tree.grid() => Ok(()),
            _ => Err(domain(format!("cut point {p:?} is not in the tree"))),
        }
    }

    /// `(#R, |R|)`: leaves `X_i^1` inside the region and its mass.
    pub fn leaf_region_counts(&self, region: &TreeRegion) -> Result<(usize, f64)> {
        let (cuts, anchor) = match region {
            TreeRegion::Empty => return Ok((0, 0.0)),
            TreeRegion::Whole => return Ok((self.leaf_count(), self.total_mass())),
            TreeRegion::Component { cuts, anchor } => (cuts, *anchor),
        };
        if cuts.len() > 2 {
            return Err(domain("a region has at most two cut points"));
        }
        for &c in cuts.iter().chain(std::iter::once(&anchor)) {
            self.check_point(c)?;
        }
        let mut cuts_in: Vec<Vec<usize>> = vec![Vec::new(); self.pieces.len()];
        for c in cuts {
            cuts_in[c.piece].push(c.index);
        }
        let blocked = |p: usize, s: usize, t: usize| cuts_in[p].iter().any(|&c| self.pieces[p].separates(c, s, t));

        let mut connected = vec![false; self.backbone.node_count()];
        let mut queue = VecDeque::new();
        let home = anchor.piece;
        for (end, &v) in [self.edges[home].0, self.edges[home].1].iter().enumerate() {
            if !blocked(home, anchor.index, self.pieces[home].marks[end]) && !connected[v] {
                connected[v] = true;
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &(w, p) in &self.incident[v] {
                if p == home || connected[w] {
                    continue;
                }
                let (mv, mw) = if self.edges[p].0 == v {
                    (self.pieces[p].marks[0], self.pieces[p].marks[1])
                } else {
                    (self.pieces[p].marks[1], self.pieces[p].marks[0])
                };
                if !blocked(p, mv, mw) {
                    connected[w] = true;
                    queue.push_back(w);
                }
            }
        }

        let mut mass = 0.0;
        for (p, piece) in self.pieces.iter().enumerate() {
            let grid = piece.tree.grid();
            let (v1, v2) = self.edges[p];
            let inside = if p == home {
                (0..grid).filter(|&s| !blocked(p, s, anchor.index)).count()
            } else if cuts_in[p].is_empty() {
                if connected[v1] || connected[v2] {
                    grid
                } else {
                    0
                }
            } else {
                (0..grid)
                    .filter(|&s| {
                        (connected[v1] && !blocked(p, s, piece.marks[0]))
                            || (connected[v2] && !blocked(p, s, piece.marks[1]))
                    })
                    .count()
            };
            mass += piece.weight * inside as f64 / grid as f64;
        }
        let leaves =
            (1..=self.leaf_count() as u32).filter(|&l| connected[self.backbone.leaf(l).expect("label")]).count();
        Ok((leaves, mass))
    }
}
