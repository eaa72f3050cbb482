//! Mismatch and martingale audits of correspondences between two cascades,
//! probabilistic tail bounds for agreement subtrees, and the constants ledger.
//!
//! A homeomorphism `Ψ` between two Brownian trees only enters the mass
//! arguments through the numbers `|R[i]|` and `|Ψ(R[i])|`. A
//! [`Correspondence`] stores exactly those: a source cascade and an image
//! mass for every word.

mod bounds;
mod constants;

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{MassCascade, Word};
use crate::error::{domain, Result};
use crate::randkit::{half_split, size_biased_index};

pub use bounds::{
    exchangeable_tail_bound, exchangeable_tail_experiment, intersection_tail_experiment, refined_bound,
    refined_sqrt_bound_experiment, IntersectionTail, MastTail, RefinedBound,
};
pub use constants::{compute_constants, Constant, ConstantsLedger};

/// Source and image split of a word: the children's shares of `R[w]` and of
/// `Ψ(R[w])`.
pub trait Splits {
    fn splits(&mut self, w: &Word) -> ([f64; 3], [f64; 3]);
    /// `|Ψ(R[∅])|`.
    fn image_root(&self) -> f64;
}

/// Image split obtained from a source split by moving `delta` of mass off
/// the largest share and onto the other two in proportion to their shares,
/// whenever every share is at least `alpha`. Every eligible split becomes a
/// weak mismatch while `Σ √(p q)` stays as close to 1 as second order allows.
pub fn perturb_split(p: [f64; 3], delta: f64, alpha: f64) -> [f64; 3] {
    let top = (0..3).fold(0, |b, i| if p[i] > p[b] { i } else { b });
    if p.iter().any(|&x| x < alpha) || p[top] <= delta {
        return p;
    }
    let rest = 1.0 - p[top];
    let shift = delta * (1.0 + 1e-9);
    let mut q = p;
    for (i, x) in q.iter_mut().enumerate() {
        if i == top {
            *x -= shift;
        } else {
            *x += shift * p[i] / rest;
        }
    }
    q
}

#[derive(Clone, Debug)]
pub struct Correspondence {
    pub source: MassCascade,
    image: Vec<Vec<f64>>,
}

impl Correspondence {
    /// Image masses given level by level in word order.
    pub fn from_image(source: MassCascade, image: Vec<Vec<f64>>) -> Result<Correspondence> {
        if image.len() != source.depth() + 1 {
            return Err(domain("image and source depths differ"));
        }
        if !(image[0].len() == 1 && image[0][0] > 0.0 && image[0][0] <= 1.0 + 1e-12) {
            return Err(domain("image root mass must lie in (0, 1]"));
        }
        for j in 0..source.depth() {
            if image[j + 1].len() != 3 * image[j].len() {
                return Err(domain(format!("image level {} has the wrong length", j + 1)));
            }
            for (i, &m) in image[j].iter().enumerate() {
                let kids = &image[j + 1][3 * i..3 * i + 3];
                if kids.iter().any(|&x| x.is_nan() || x <= 0.0) || (kids.iter().sum::<f64>() - m).abs() > 1e-12 {
                    return Err(domain(format!(
                        "image children of word {} do not partition it",
                        Word::from_index(j, i)
                    )));
                }
            }
        }
        Ok(Correspondence { source, image })
    }

    /// `Ψ` preserving every mass.
    pub fn identity(source: MassCascade) -> Correspondence {
        let image = (0..=source.depth()).map(|j| source.level(j).to_vec()).collect();
        Correspondence { source, image }
    }

    /// Image masses read off an independent cascade at the same words.
    pub fn same_words(source: MassCascade, image: &MassCascade) -> Result<Correspondence> {
        let levels = (0..=image.depth()).map(|j| image.level(j).to_vec()).collect();
        Correspondence::from_image(source, levels)
    }

    /// Image built from the source by [`perturb_split`] at every word.
    pub fn perturbed(source: MassCascade, delta: f64, alpha: f64) -> Correspondence {
        let mut image = vec![vec![1.0]];
        for j in 0..source.depth() {
            let mut next = Vec::with_capacity(3 * image[j].len());
            for (i, &m) in image[j].iter().enumerate() {
                let p = source.split(&Word::from_index(j, i)).expect("inside depth");
                next.extend(perturb_split(p, delta, alpha).iter().map(|x| m * x));
            }
            image.push(next);
        }
        Correspondence { source, image }
    }

    pub fn depth(&self) -> usize {
        self.source.depth()
    }

    pub fn image_mass(&self, w: &Word) -> Result<f64> {
        if w.depth() > self.depth() {
            return Err(domain(format!("word {w} is deeper than the correspondence")));
        }
        Ok(self.image[w.depth()][w.index()])
    }

    pub fn image_split(&self, w: &Word) -> Result<[f64; 3]> {
        if w.depth() >= self.depth() {
            return Err(domain(format!("word {w} has no children")));
        }
        let m = self.image[w.depth()][w.index()];
        let base = 3 * w.index();
        let kids = &self.image[w.depth() + 1][base..base + 3];
        Ok([kids[0] / m, kids[1] / m, kids[2] / m])
    }

    /// `Σ_{|i| = k} sqrt(|R[i]| |Ψ(R[i])|)`.
    pub fn sqrt_product_sum(&self, k: usize) -> Result<f64> {
        if k > self.depth() {
            return Err(domain("depth beyond the correspondence"));
        }
        Ok(self.source.level(k).iter().zip(&self.image[k]).map(|(a, b)| (a * b).sqrt()).sum())
    }
}

impl Splits for Correspondence {
    fn splits(&mut self, w: &Word) -> ([f64; 3], [f64; 3]) {
        (self.source.split(w).expect("word inside depth"), self.image_split(w).expect("word inside depth"))
    }

    fn image_root(&self) -> f64 {
        self.image[0][0]
    }
}

pub fn sqrt_product_sum(corr: &Correspondence, k: usize) -> Result<f64> {
    corr.sqrt_product_sum(k)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageRule {
    /// Independent Dir(1/2, 1/2, 1/2) image splits.
    Independent,
    /// Image equal to source.
    Identity,
    /// [`perturb_split`] of the source split.
    Perturbed { delta: f64, alpha: f64 },
}

/// A pair of cascades realized only at the words that are visited, for paths
/// deeper than a stored cascade allows. Splits are remembered so every
/// visit to a word sees the same values.
pub struct LazyPair<R> {
    rule: ImageRule,
    rng: R,
    memo: HashMap<Word, ([f64; 3], [f64; 3])>,
}

impl<R: Rng> LazyPair<R> {
    pub fn new(rule: ImageRule, rng: R) -> Self {
        LazyPair { rule, rng, memo: HashMap::new() }
    }

    pub fn visited(&self) -> usize {
        self.memo.len()
    }
}

impl<R: Rng> Splits for LazyPair<R> {
    fn splits(&mut self, w: &Word) -> ([f64; 3], [f64; 3]) {
        if let Some(&s) = self.memo.get(w) {
            return s;
        }
        let p = half_split(&mut self.rng);
        let q = match self.rule {
            ImageRule::Independent => half_split(&mut self.rng),
            ImageRule::Identity => p,
            ImageRule::Perturbed { delta, alpha } => perturb_split(p, delta, alpha),
        };
        self.memo.insert(w.clone(), (p, q));
        (p, q)
    }

    fn image_root(&self) -> f64 {
        1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditParams {
    pub alpha: f64,
    pub delta: f64,
    pub mu: f64,
}

impl AuditParams {
    /// Largest μ for which a weak mismatch step keeps `E[exp(Z̃/2)] <= 1`.
    pub fn admissible_mu(delta: f64) -> f64 {
        -2.0 * (-delta * delta / 8.0).ln_1p()
    }

    pub fn in_regime(&self) -> bool {
        self.mu <= Self::admissible_mu(self.delta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleFlags {
    /// Depth of the region whose split is examined.
    pub scale: usize,
    pub good: bool,
    pub weak: bool,
    pub strict: bool,
}

/// Weak mismatch: every source share is at least `alpha` and some image share
/// differs from its source share by at least `delta`.
pub fn is_weak_mismatch(p: &[f64; 3], q: &[f64; 3], alpha: f64, delta: f64) -> bool {
    p.iter().all(|&x| x >= alpha) && p.iter().zip(q).any(|(a, b)| (a - b).abs() >= delta)
}

/// Flags for the splits of `R[i_0], ..., R[i_{k-1}]` along `path`.
pub fn detect_mismatches<S: Splits + ?Sized>(
    corr: &mut S,
    path: &Word,
    alpha: f64,
    delta: f64,
) -> Result<Vec<ScaleFlags>> {
    if delta.is_nan() || alpha.is_nan() || delta >= alpha {
        return Err(domain("detect_mismatches needs delta < alpha"));
    }
    let letters = path.letters();
    let k = letters.len();
    let mut flags = Vec::with_capacity(k);
    for j in 0..k {
        let (p, q) = corr.splits(&path.prefix(j));
        let weak = is_weak_mismatch(&p, &q, alpha, delta);
        let good = j % 2 == 1 && letters[j - 1] == 3 && letters[j] == 3 && p.iter().all(|&x| x >= alpha);
        flags.push(ScaleFlags { scale: j, good, weak, strict: weak && good });
    }
    Ok(flags)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub path: String,
    pub params: AuditParams,
    pub flags: Vec<ScaleFlags>,
    /// `M_0, ..., M_k`.
    pub martingale: Vec<f64>,
    /// `Z_1, ..., Z_k`.
    pub increments: Vec<f64>,
    /// `Z̃_j = Z_j + μ 1{weak mismatch at scale j - 1}`.
    pub penalized: Vec<f64>,
    /// `Σ √(|R[i]| |Ψ(R[i])|)` for depths `0..=k` when the cascades are stored.
    pub sqrt_product_sums: Vec<f64>,
}

/// `M_j = |Ψ(R[i_j])| / |R[i_j]|` along `path`, with increments in log space.
pub fn martingale_path<S: Splits + ?Sized>(corr: &mut S, path: &Word, params: AuditParams) -> Result<AuditReport> {
    let letters = path.letters();
    let mut log_m = corr.image_root().ln();
    let mut martingale = vec![log_m.exp()];
    let mut increments = Vec::with_capacity(letters.len());
    let mut penalized = Vec::with_capacity(letters.len());
    let mut flags = Vec::with_capacity(letters.len());
    for (j, &a) in letters.iter().enumerate() {
        let (p, q) = corr.splits(&path.prefix(j));
        let i = usize::from(a - 1);
        if !(p[i] > 0.0 && q[i] > 0.0) {
            return Err(domain(format!("zero mass on the path at depth {}", j + 1)));
        }
        let z = q[i].ln() - p[i].ln();
        let weak = is_weak_mismatch(&p, &q, params.alpha, params.delta);
        let good = j % 2 == 1 && letters[j - 1] == 3 && a == 3 && p.iter().all(|&x| x >= params.alpha);
        flags.push(ScaleFlags { scale: j, good, weak, strict: weak && good });
        log_m += z;
        martingale.push(log_m.exp());
        increments.push(z);
        penalized.push(z + if weak { params.mu } else { 0.0 });
    }
    Ok(AuditReport {
        path: path.to_string(),
        params,
        flags,
        martingale,
        increments,
        penalized,
        sqrt_product_sums: Vec::new(),
    })
}

/// [`martingale_path`] on stored cascades, with the sqrt-product sums filled in.
pub fn audit(corr: &Correspondence, path: &Word, params: AuditParams) -> Result<AuditReport> {
    if path.depth() > corr.depth() {
        return Err(domain("path deeper than the correspondence"));
    }
    let mut c = corr.clone();
    let mut report = martingale_path(&mut c, path, params)?;
    report.sqrt_product_sums = (0..=path.depth()).map(|k| corr.sqrt_product_sum(k)).collect::<Result<_>>()?;
    Ok(report)
}

/// `e^{μ/2} Σ √(p_i q_i)`, the value of `E[exp((Z + μ)/2)]` when `I ~ p` and
/// `Z = log q_I - log p_I`.
pub fn mismatch_kernel(p: &[f64; 3], q: &[f64; 3], mu: f64) -> Result<f64> {
    if p.iter().any(|&x| x.is_nan() || x <= 0.0) {
        return Err(domain("p must be strictly positive"));
    }
    if q.iter().any(|&x| x.is_nan() || x < 0.0) {
        return Err(domain("q must be non-negative"));
    }
    for v in [p, q] {
        if (v.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(domain("simplex points must sum to 1"));
        }
    }
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    Ok((mu / 2.0).exp() * s)
}

/// Draws a path of depth `k` with letters chosen by source shares.
pub fn size_biased_path<S: Splits + ?Sized, R: Rng + ?Sized>(corr: &mut S, k: usize, rng: &mut R) -> Word {
    let mut w = Word::root();
    for _ in 0..k {
        let (p, _) = corr.splits(&w);
        w = w.child(size_biased_index(&p, rng) as u8 + 1);
    }
    w
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupermartingaleEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    pub depth: usize,
    /// Whether μ is within the admissible regime for δ.
    pub in_regime: bool,
    /// Mean number of weak mismatches per path.
    pub mean_mismatches: f64,
}

impl SupermartingaleEstimate {
    /// `mean <= 1 + 3 stderr`.
    pub fn bounded(&self) -> bool {
        self.mean <= 1.0 + 3.0 * self.stderr
    }

    /// `mean > 1 + 3 stderr`.
    pub fn exceeds_one(&self) -> bool {
        self.mean > 1.0 + 3.0 * self.stderr
    }
}

/// Monte Carlo estimate of `E[exp(½ Σ_{j<=k} Z̃_j)]` over size-biased paths.
pub fn chernoff_supermartingale_check<S: Splits + ?Sized, R: Rng + ?Sized>(
    corr: &mut S,
    paths: usize,
    k: usize,
    params: AuditParams,
    rng: &mut R,
) -> Result<SupermartingaleEstimate> {
    if paths < 2 {
        return Err(domain("need at least two paths"));
    }
    let mut values = Vec::with_capacity(paths);
    let mut mismatches = 0usize;
    for _ in 0..paths {
        let path = size_biased_path(corr, k, rng);
        let report = martingale_path(corr, &path, params)?;
        mismatches += report.flags.iter().filter(|f| f.weak).count();
        values.push((0.5 * report.penalized.iter().sum::<f64>()).exp());
    }
    let (mean, stderr) = mean_stderr(&values);
    Ok(SupermartingaleEstimate {
        mean,
        stderr,
        paths,
        depth: k,
        in_regime: params.in_regime(),
        mean_mismatches: mismatches as f64 / paths as f64,
    })
}

pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
