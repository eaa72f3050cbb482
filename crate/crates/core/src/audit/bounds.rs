use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cladogram::{random_region, sample_uniform, Region};
use crate::error::{domain, Error, Result};
use crate::mast::{mast, mast_regions};
use crate::randkit::substream;

/// Largest tree size accepted by [`refined_sqrt_bound_experiment`].
pub const MAX_REFINED_LEAVES: usize = 512;

/// `C(m, s) 2^{s-2} s / s!`, a bound on `P(MAST >= s)` for two independent
/// exchangeable trees on `m` leaves.
pub fn exchangeable_tail_bound(m: usize, s: usize) -> Result<f64> {
    if s == 0 || s > m {
        return Err(domain(format!("need 1 <= s <= m, got s = {s}, m = {m}")));
    }
    let ln = |x: usize| (x as f64).ln();
    let ln_choose: f64 = (0..s).map(|i| ln(m - i) - ln(i + 1)).sum();
    let ln_fact: f64 = (1..=s).map(ln).sum();
    Ok((ln_choose + (s as f64 - 2.0) * std::f64::consts::LN_2 + ln(s) - ln_fact).exp())
}

/// Empirical law of `MAST(T_m, T'_m)` for independent uniform trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MastTail {
    pub m: usize,
    pub replicates: usize,
    /// `counts[s]` replicates had MAST exactly `s`.
    pub counts: Vec<usize>,
}

impl MastTail {
    /// Empirical `P(MAST >= s)`.
    pub fn tail(&self, s: usize) -> f64 {
        let hits: usize = self.counts.iter().skip(s).sum();
        hits as f64 / self.replicates as f64
    }

    pub fn tail_stderr(&self, s: usize) -> f64 {
        let f = self.tail(s);
        (f * (1.0 - f) / self.replicates as f64).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.counts.iter().enumerate().map(|(s, &c)| (s * c) as f64).sum::<f64>() / self.replicates as f64
    }
}

pub fn exchangeable_tail_experiment(m: usize, replicates: usize, seed: u64) -> Result<MastTail> {
    let sizes: Vec<usize> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r);
            let a = sample_uniform(m, &mut rng);
            let b = sample_uniform(m, &mut rng);
            mast(&a, &b).map(|x| x.size)
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0; m + 1];
    for s in sizes {
        counts[s] += 1;
    }
    Ok(MastTail { m, replicates, counts })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionTail {
    pub n: usize,
    pub m: usize,
    pub m2: usize,
    pub epsilon: f64,
    pub threshold: f64,
    pub replicates: usize,
    pub frequency: f64,
    pub stderr: f64,
    /// `2 exp(-2 n^ε / 3)`.
    pub bound: f64,
    pub mean_intersection: f64,
}

impl IntersectionTail {
    pub fn within_bound(&self) -> bool {
        self.frequency <= self.bound + 3.0 * self.stderr
    }
}

/// Frequency of `#(S ∩ S') >= scale · 8 (n^ε ∨ m m' / n)` for independent
/// uniform subsets of sizes `m` and `m2`. `threshold_scale = 1` is the
/// stated threshold.
pub fn intersection_tail_experiment(
    n: usize,
    m: usize,
    m2: usize,
    epsilon: f64,
    replicates: usize,
    threshold_scale: f64,
    seed: u64,
) -> Result<IntersectionTail> {
    if m > n || m2 > n {
        return Err(domain("subset sizes must not exceed n"));
    }
    if replicates == 0 {
        return Err(domain("need at least one replicate"));
    }
    let nf = n as f64;
    let threshold = threshold_scale * 8.0 * nf.powf(epsilon).max((m * m2) as f64 / nf);
    let sizes: Vec<usize> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r);
            let mut member = vec![false; n];
            for i in sample(&mut rng, n, m) {
                member[i] = true;
            }
            sample(&mut rng, n, m2).into_iter().filter(|&i| member[i]).count()
        })
        .collect();
    let hits = sizes.iter().filter(|&&k| k as f64 >= threshold).count();
    let frequency = hits as f64 / replicates as f64;
    Ok(IntersectionTail {
        n,
        m,
        m2,
        epsilon,
        threshold,
        replicates,
        frequency,
        stderr: (frequency * (1.0 - frequency) / replicates as f64).sqrt(),
        bound: 2.0 * (-2.0 * nf.powf(epsilon) / 3.0).exp(),
        mean_intersection: sizes.iter().sum::<usize>() as f64 / replicates as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedBound {
    pub n: usize,
    pub epsilon: f64,
    pub replicates: usize,
    pub region_pairs: usize,
    pub constant_scale: f64,
    pub violating_trees: usize,
    pub violation_fraction: f64,
    /// Largest `MAST(R, R') / bound` among the pairs that needed a MAST.
    pub max_ratio: f64,
}

/// `4 e √2 (n^ε ∨ √(#R #R' / n))`.
pub fn refined_bound(n: usize, epsilon: f64, r: usize, r2: usize) -> f64 {
    let nf = n as f64;
    4.0 * std::f64::consts::E * std::f64::consts::SQRT_2 * nf.powf(epsilon).max(((r * r2) as f64 / nf).sqrt())
}

/// For each replicate pair `(T_n, T'_n)`, checks the whole trees and then
/// `region_pairs - 1` random region pairs against `scale · 4e√2 (n^ε ∨
/// √(#R #R'/n))`. Returns the fraction of tree pairs with any violation.
pub fn refined_sqrt_bound_experiment(
    n: usize,
    epsilon: f64,
    replicates: usize,
    region_pairs: usize,
    constant_scale: f64,
    seed: u64,
) -> Result<RefinedBound> {
    if n > MAX_REFINED_LEAVES {
        return Err(Error::Budget(format!("refined bound experiment limited to n <= {MAX_REFINED_LEAVES}")));
    }
    if replicates == 0 || region_pairs == 0 {
        return Err(domain("need at least one replicate and one region pair"));
    }
    let per_tree: Vec<(bool, f64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| -> Result<(bool, f64)> {
            let mut rng = substream(seed, rep);
            let t = sample_uniform(n, &mut rng);
            let t2 = sample_uniform(n, &mut rng);
            let mut violated = false;
            let mut max_ratio: f64 = 0.0;
            for k in 0..region_pairs {
                let (r, r2) = if k == 0 {
                    (Region::whole(&t), Region::whole(&t2))
                } else {
                    (random_region(&t, &mut rng), random_region(&t2, &mut rng))
                };
                let bound = constant_scale * refined_bound(n, epsilon, r.size(), r2.size());
                let common = r.labels().intersection(&r2.labels()).count();
                if common as f64 <= bound {
                    continue;
                }
                let size = mast_regions(&r, &r2)?.size as f64;
                max_ratio = max_ratio.max(size / bound);
                violated |= size > bound;
            }
            Ok((violated, max_ratio))
        })
        .collect::<Result<_>>()?;
    let violating_trees = per_tree.iter().filter(|x| x.0).count();
    Ok(RefinedBound {
        n,
        epsilon,
        replicates,
        region_pairs,
        constant_scale,
        violating_trees,
        violation_fraction: violating_trees as f64 / replicates as f64,
        max_ratio: per_tree.iter().map(|x| x.1).fold(0.0, f64::max),
    })
}
