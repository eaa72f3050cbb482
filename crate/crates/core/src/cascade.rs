//! Ternary mass cascades.
//!
//! Region `i1 i2 ... ik` of the recursive decomposition has mass
//! `W^{(∅)}_{i1} W^{(i1)}_{i2} ... `, one independent Dir(1/2, 1/2, 1/2)
//! split per internal word. A uniform point of the tree falls into child `a`
//! of its current region with probability equal to that child's share, which
//! makes the letters along its path size-biased; [`zoom_trace`] samples that
//! path directly without building the cascade.

use std::fmt;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::randkit::{half_split, size_biased_index};

pub const MAX_CASCADE_DEPTH: usize = 14;

/// Word over the alphabet {1, 2, 3}.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn root() -> Word {
        Word(Vec::new())
    }

    pub fn from_letters(letters: &[u8]) -> Result<Word> {
        if let Some(&bad) = letters.iter().find(|&&a| !(1..=3).contains(&a)) {
            return Err(domain(format!("letter {bad} is not in 1..=3")));
        }
        Ok(Word(letters.to_vec()))
    }

    pub fn parse(s: &str) -> Result<Word> {
        let letters: Vec<u8> = s.bytes().map(|b| b.wrapping_sub(b'0')).collect();
        Word::from_letters(&letters)
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn child(&self, a: u8) -> Word {
        let mut w = self.0.clone();
        w.push(a);
        Word(w)
    }

    pub fn prefix(&self, j: usize) -> Word {
        Word(self.0[..j].to_vec())
    }

    /// Position among the `3^depth` words of the same depth.
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &a| 3 * acc + usize::from(a - 1))
    }

    pub fn from_index(depth: usize, mut index: usize) -> Word {
        let mut letters = vec![0u8; depth];
        for slot in letters.iter_mut().rev() {
            *slot = (index % 3) as u8 + 1;
            index /= 3;
        }
        Word(letters)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.0 {
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Region masses for every word of depth at most `depth`.
#[derive(Clone, Debug)]
pub struct MassCascade {
    levels: Vec<Vec<f64>>,
}

impl MassCascade {
    pub fn build<R: Rng + ?Sized>(depth: usize, rng: &mut R) -> Result<MassCascade> {
        if depth > MAX_CASCADE_DEPTH {
            return Err(Error::Budget(format!(
                "cascade depth {depth} needs 3^{depth} masses; limit is {MAX_CASCADE_DEPTH}"
            )));
        }
        let mut levels = vec![vec![1.0]];
        for j in 0..depth {
            let parent = &levels[j];
            let mut next = Vec::with_capacity(parent.len() * 3);
            for &m in parent {
                let w = half_split(rng);
                next.extend(w.iter().map(|x| m * x));
            }
            levels.push(next);
        }
        Ok(MassCascade { levels })
    }

    /// Cascade built from explicit splits, listed level by level in word
    /// order. Each split must be a point of the simplex.
    pub fn from_splits(depth: usize, splits: &[[f64; 3]]) -> Result<MassCascade> {
        let needed = (3usize.pow(depth as u32) - 1) / 2;
        if splits.len() != needed {
            return Err(domain(format!("depth {depth} needs {needed} splits, got {}", splits.len())));
        }
        let mut levels = vec![vec![1.0]];
        let mut it = splits.iter();
        for j in 0..depth {
            let mut next = Vec::with_capacity(levels[j].len() * 3);
            for &m in &levels[j] {
                let w = it.next().expect("counted above");
                if w.iter().any(|&x| x.is_nan() || x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(domain(format!("split {w:?} is not on the simplex")));
                }
                next.extend(w.iter().map(|x| m * x));
            }
            levels.push(next);
        }
        Ok(MassCascade { levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, j: usize) -> &[f64] {
        &self.levels[j]
    }

    pub fn mass(&self, w: &Word) -> Result<f64> {
        if w.depth() > self.depth() {
            return Err(domain(format!("word {w} is deeper than the cascade")));
        }
        Ok(self.levels[w.depth()][w.index()])
    }

    /// Shares of the three children of `w` in its mass.
    pub fn split(&self, w: &Word) -> Result<[f64; 3]> {
        if w.depth() >= self.depth() {
            return Err(domain(format!("word {w} has no children in the cascade")));
        }
        let m = self.levels[w.depth()][w.index()];
        let base = 3 * w.index();
        let kids = &self.levels[w.depth() + 1][base..base + 3];
        Ok([kids[0] / m, kids[1] / m, kids[2] / m])
    }

    /// Largest `|sum of children - parent|` over the cascade.
    pub fn conservation_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.depth() {
            for (i, &m) in self.levels[j].iter().enumerate() {
                let s: f64 = self.levels[j + 1][3 * i..3 * i + 3].iter().sum();
                worst = worst.max((s - m).abs());
            }
        }
        worst
    }

    /// Descends from the root choosing each child with probability equal to
    /// its share, i.e. the path of a uniform point.
    pub fn size_biased_path<R: Rng + ?Sized>(&self, depth: usize, rng: &mut R) -> Result<Word> {
        if depth > self.depth() {
            return Err(domain("path deeper than the cascade"));
        }
        let mut w = Word::root();
        for _ in 0..depth {
            let s = self.split(&w)?;
            w = w.child(size_biased_index(&s, rng) as u8 + 1);
        }
        Ok(w)
    }

    /// Per depth: minimum and maximum of `log |R[i]|` (a branching random walk).
    pub fn brw_envelope(&self) -> Vec<(f64, f64)> {
        self.levels
            .iter()
            .map(|lvl| {
                lvl.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| (lo.min(m.ln()), hi.max(m.ln())))
            })
            .collect()
    }

    /// One JSON object per word: `{"word": "...", "mass": ...}`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (j, lvl) in self.levels.iter().enumerate() {
            for (i, &m) in lvl.iter().enumerate() {
                let row = serde_json::json!({ "word": Word::from_index(j, i).to_string(), "mass": m });
                writeln!(out, "{row}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoomRecord {
    /// Split of the current region into its three children.
    pub weights: [f64; 3],
    /// Child entered next, in 1..=3.
    pub letter: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoomTrace {
    pub records: Vec<ZoomRecord>,
}

impl ZoomTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn word(&self) -> Word {
        Word(self.records.iter().map(|r| r.letter).collect())
    }

    /// `log` of the mass of the region reached after `j` steps.
    pub fn log_mass(&self, j: usize) -> f64 {
        self.records[..j].iter().map(|r| r.weights[usize::from(r.letter - 1)].ln()).sum()
    }
}

/// `k` i.i.d. records: a Dir(1/2, 1/2, 1/2) split and a letter drawn with
/// probability proportional to it.
pub fn zoom_trace<R: Rng + ?Sized>(k: usize, rng: &mut R) -> ZoomTrace {
    let records = (0..k)
        .map(|_| {
            let weights = half_split(rng);
            let letter = size_biased_index(&weights, rng) as u8 + 1;
            ZoomRecord { weights, letter }
        })
        .collect();
    ZoomTrace { records }
}

/// Whether scale `j` (1-based, the depth of the region `i_j`) is α-good:
/// `j` odd, `i_j = i_{j+1} = 3`, and every child of `R[i_j]` keeps at least
/// an α share. Record `j - 1` carries letter `i_j`; record `j` carries the
/// split of `R[i_j]` and the letter `i_{j+1}`.
pub fn is_good_scale(trace: &ZoomTrace, j: usize, alpha: f64) -> bool {
    if j == 0 || j.is_multiple_of(2) || j >= trace.len() {
        return false;
    }
    let (here, next) = (&trace.records[j - 1], &trace.records[j]);
    here.letter == 3 && next.letter == 3 && next.weights.iter().all(|&w| w >= alpha)
}

pub fn good_scales(trace: &ZoomTrace, alpha: f64) -> Vec<usize> {
    (1..trace.len()).filter(|&j| is_good_scale(trace, j, alpha)).collect()
}
