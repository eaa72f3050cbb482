//! Seeded random streams and Dirichlet algebra.
//!
//! Every replicate draws from its own ChaCha8 stream whose seed is a hash of
//! the master seed and the replicate index, so results do not depend on how
//! replicates are scheduled.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn substream(master: u64, index: u64) -> Stream {
    stream(derive_seed(master, index))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletVector {
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DirichletVector {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Dir(params) as normalized independent Gamma(params_i, 1) variables.
pub fn sample_dirichlet<R: Rng + ?Sized>(params: &[f64], rng: &mut R) -> Result<DirichletVector> {
    if params.is_empty() {
        return Err(domain("Dirichlet needs at least one parameter"));
    }
    let mut gammas = Vec::with_capacity(params.len());
    for &a in params {
        if !(a.is_finite() && a > 0.0) {
            return Err(domain(format!("Dirichlet parameter {a} is not positive")));
        }
        gammas.push(Gamma::new(a, 1.0).map_err(|e| domain(e.to_string()))?);
    }
    for _ in 0..64 {
        let mut weights: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 && total.is_finite() {
            weights.iter_mut().for_each(|w| *w /= total);
            if weights.iter().all(|&w| w > 0.0) {
                return Ok(DirichletVector { params: params.to_vec(), weights });
            }
        }
    }
    Err(Error::Invariant("Dirichlet draw kept underflowing to zero".into()))
}

pub fn sample_symmetric_dirichlet<R: Rng + ?Sized>(a: f64, len: usize, rng: &mut R) -> Result<DirichletVector> {
    sample_dirichlet(&vec![a; len], rng)
}

/// Dir(1/2, 1/2, 1/2): a Gamma(1/2) variable is half the square of a standard
/// normal, so the split is the normalized vector of three squared normals.
pub fn half_split<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let z: [f64; 3] = std::array::from_fn(|_| {
            let x: f64 = StandardNormal.sample(rng);
            x * x
        });
        let total = z[0] + z[1] + z[2];
        if z.iter().all(|&x| x > 0.0) {
            return [z[0] / total, z[1] / total, z[2] / total];
        }
    }
}

/// Splitting a Dirichlet vector after its first `i` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregation {
    /// `W_1 + ... + W_i`, distributed Beta(a_1 + ... + a_i, a_{i+1} + ... + a_n).
    pub head_mass: f64,
    /// Normalized head, Dir(a_1, ..., a_i).
    pub head: DirichletVector,
    /// Normalized tail, Dir(a_{i+1}, ..., a_n).
    pub tail: DirichletVector,
}

pub fn aggregate(w: &DirichletVector, i: usize) -> Result<Aggregation> {
    if i == 0 || i >= w.len() {
        return Err(domain(format!("split index {i} outside 1..{}", w.len())));
    }
    let normalize = |ws: &[f64], ps: &[f64]| {
        let s: f64 = ws.iter().sum();
        DirichletVector { params: ps.to_vec(), weights: ws.iter().map(|x| x / s).collect() }
    };
    let head_mass: f64 = w.weights[..i].iter().sum();
    Ok(Aggregation {
        head_mass,
        head: normalize(&w.weights[..i], &w.params[..i]),
        tail: normalize(&w.weights[i..], &w.params[i..]),
    })
}

/// Index `i` with probability `w_i / sum(w)` (zero-based).
pub fn size_biased_index<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &x) in w.iter().enumerate() {
        if u < x {
            return i;
        }
        u -= x;
    }
    w.iter().rposition(|&x| x > 0.0).unwrap_or(w.len() - 1)
}
