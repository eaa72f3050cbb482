use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use super::config::{ExperimentConfig, ExperimentKind};
use super::stats::{ks_two_sample, mean_stderr, ols, quantile};
use super::ExperimentRow;
use crate::audit::{
    chernoff_supermartingale_check, exchangeable_tail_bound, exchangeable_tail_experiment,
    intersection_tail_experiment, mismatch_kernel, refined_sqrt_bound_experiment, AuditParams, Correspondence,
    ImageRule, LazyPair,
};
use crate::cascade::{good_scales, zoom_trace, MassCascade, MAX_CASCADE_DEPTH};
use crate::cladogram::sample_uniform;
use crate::error::{domain, Error, Result};
use crate::excursion::{glue_coupling, ExcursionTree};
use crate::mast::{mast, MAX_MAST_LEAVES};
use crate::randkit::{derive_seed, half_split, stream, substream};

/// Largest depth used by the audit suite's stored cascades.
pub const MAX_AUDIT_DEPTH: usize = 12;

struct Sink {
    kind: &'static str,
    seed: u64,
    rows: Vec<ExperimentRow>,
}

impl Sink {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        statistic: &str,
        params: Value,
        value: f64,
        stderr: Option<f64>,
        replicates: usize,
        key: u64,
        started: Instant,
    ) {
        let params = match params {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        self.rows.push(ExperimentRow {
            experiment: self.kind.to_string(),
            statistic: statistic.to_string(),
            params,
            value,
            stderr,
            replicates,
            seed: self.seed,
            substream: key,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::MastScaling => run_mast_scaling(cfg),
        ExperimentKind::CascadeStats => run_cascade_stats(cfg),
        ExperimentKind::CouplingCheck => run_coupling_check(cfg),
        ExperimentKind::AuditSuite => run_audit_suite(cfg),
        ExperimentKind::BoundsSuite => run_bounds_suite(cfg),
    }
}

#[derive(Clone, Debug)]
pub struct ScalingPoint {
    pub n: usize,
    pub sizes: Vec<usize>,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug)]
pub struct ScalingFit {
    pub points: Vec<ScalingPoint>,
    /// Slope of `log mean MAST` against `log n`.
    pub exponent: f64,
    pub intercept: f64,
    /// 95% percentile bootstrap band for the exponent.
    pub ci_low: f64,
    pub ci_high: f64,
}

fn fit_means(points: &[(usize, f64)]) -> (f64, f64) {
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    ols(&xs, &ys)
}

fn check_budget(n_grid: &[usize]) -> Result<()> {
    if let Some(&n) = n_grid.iter().find(|&&n| n > MAX_MAST_LEAVES) {
        let cells = (4 * n) as f64 * (4 * n) as f64;
        return Err(Error::Budget(format!(
            "n = {n} exceeds {MAX_MAST_LEAVES}: about {:.1e} table cells ({:.1} GB) per replicate",
            cells,
            2.0 * cells / 1e9
        )));
    }
    Ok(())
}

/// MAST sizes of `replicates` independent uniform pairs on `n` leaves.
pub fn scaling_point(n: usize, replicates: usize, seed: u64) -> Result<ScalingPoint> {
    check_budget(&[n])?;
    if replicates == 0 {
        return Err(domain("need at least one replicate"));
    }
    let key = derive_seed(seed, n as u64);
    let sizes: Vec<usize> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(key, r);
            let a = sample_uniform(n, &mut rng);
            let b = sample_uniform(n, &mut rng);
            mast(&a, &b).map(|m| m.size)
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let (mean, stderr) = mean_stderr(&xs);
    Ok(ScalingPoint { n, sizes, mean, stderr })
}

/// Mean MAST of independent uniform pairs on each `n`, with an OLS exponent
/// fit on log-log means and a bootstrap band from resampled replicates.
pub fn mast_scaling(n_grid: &[usize], replicates: usize, bootstrap: usize, seed: u64) -> Result<ScalingFit> {
    check_budget(n_grid)?;
    if n_grid.len() < 2 || replicates == 0 {
        return Err(domain("scaling needs at least two grid points and one replicate"));
    }
    let points = n_grid.iter().map(|&n| scaling_point(n, replicates, seed)).collect::<Result<Vec<_>>>()?;
    let (exponent, intercept) = fit_means(&points.iter().map(|p| (p.n, p.mean)).collect::<Vec<_>>());
    let mut rng = stream(derive_seed(seed, u64::MAX));
    let mut slopes = Vec::with_capacity(bootstrap);
    for _ in 0..bootstrap {
        let means: Vec<(usize, f64)> = points
            .iter()
            .map(|p| {
                let total: usize = (0..p.sizes.len()).map(|_| p.sizes[rng.gen_range(0..p.sizes.len())]).sum();
                (p.n, total as f64 / p.sizes.len() as f64)
            })
            .collect();
        slopes.push(fit_means(&means).0);
    }
    let (ci_low, ci_high) =
        if slopes.is_empty() { (exponent, exponent) } else { (quantile(&slopes, 0.025), quantile(&slopes, 0.975)) };
    Ok(ScalingFit { points, exponent, intercept, ci_low, ci_high })
}

fn run_mast_scaling(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    let n_grid = if cfg.n_grid.is_empty() { vec![64, 128, 256, 512, 1024] } else { cfg.n_grid.clone() };
    let replicates = cfg.replicates.unwrap_or(200);
    let started = Instant::now();
    let fit = if n_grid.len() >= 2 {
        Some(mast_scaling(&n_grid, replicates, cfg.bootstrap.unwrap_or(1000), cfg.seed)?)
    } else {
        None
    };
    let points = match &fit {
        Some(f) => f.points.clone(),
        None => vec![scaling_point(n_grid[0], replicates, cfg.seed)?],
    };
    let mut sink = Sink { kind: "mast-scaling", seed: cfg.seed, rows: Vec::new() };
    for p in &points {
        let key = derive_seed(cfg.seed, p.n as u64);
        let xs: Vec<f64> = p.sizes.iter().map(|&s| s as f64).collect();
        let limit = 2.0 * std::f64::consts::E * (p.n as f64).sqrt();
        let above = xs.iter().filter(|&&x| x > limit).count() as f64 / xs.len() as f64;
        let params = json!({ "n": p.n });
        sink.push("mean_mast", params.clone(), p.mean, Some(p.stderr), replicates, key, started);
        sink.push(
            "mean_over_sqrt_n",
            params.clone(),
            p.mean / (p.n as f64).sqrt(),
            Some(p.stderr / (p.n as f64).sqrt()),
            replicates,
            key,
            started,
        );
        for q in [0.1, 0.5, 0.9] {
            sink.push("quantile", json!({ "n": p.n, "q": q }), quantile(&xs, q), None, replicates, key, started);
        }
        sink.push("frac_above_2e_sqrt_n", params, above, None, replicates, key, started);
    }
    if let Some(fit) = fit {
        sink.push(
            "exponent",
            json!({ "n_grid": n_grid, "ci_low": fit.ci_low, "ci_high": fit.ci_high, "intercept": fit.intercept }),
            fit.exponent,
            Some((fit.ci_high - fit.ci_low) / (2.0 * 1.96)),
            replicates,
            derive_seed(cfg.seed, u64::MAX),
            started,
        );
    }
    Ok(sink.rows)
}

fn run_cascade_stats(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    let k_grid = if cfg.k_grid.is_empty() { vec![2, 4, 6, 8, 10] } else { cfg.k_grid.clone() };
    if let Some(&k) = k_grid.iter().find(|&&k| k > MAX_CASCADE_DEPTH) {
        return Err(Error::Budget(format!("cascade depth {k} exceeds {MAX_CASCADE_DEPTH}")));
    }
    let replicates = cfg.replicates.unwrap_or(200);
    let alpha = cfg.alpha.unwrap_or(1e-6);
    let mut sink = Sink { kind: "cascade-stats", seed: cfg.seed, rows: Vec::new() };
    for &k in &k_grid {
        let started = Instant::now();
        let key = derive_seed(cfg.seed, k as u64);
        struct Rep {
            leaf_error: f64,
            env: Vec<(f64, f64)>,
            good_rate: f64,
            selected: f64,
            threes: f64,
        }
        let reps: Vec<Rep> = (0..replicates as u64)
            .into_par_iter()
            .map(|r| -> Result<Rep> {
                let mut rng = substream(key, r);
                let c = MassCascade::build(k, &mut rng)?;
                let leaf_error = (c.level(k).iter().sum::<f64>() - 1.0).abs();
                let t = zoom_trace(k + 1, &mut rng);
                let odd = (1..=k).filter(|j| j % 2 == 1).count().max(1);
                let good_rate = good_scales(&t, alpha).len() as f64 / odd as f64;
                let selected =
                    t.records.iter().map(|x| x.weights[usize::from(x.letter - 1)]).sum::<f64>() / t.len() as f64;
                let threes = t.records.iter().filter(|x| x.letter == 3).count() as f64 / t.len() as f64;
                Ok(Rep { leaf_error, env: c.brw_envelope(), good_rate, selected, threes })
            })
            .collect::<Result<_>>()?;
        let col = |f: &dyn Fn(&Rep) -> f64| mean_stderr(&reps.iter().map(f).collect::<Vec<_>>());
        let params = json!({ "k": k, "alpha": alpha });
        let worst = reps.iter().map(|r| r.leaf_error).fold(0.0, f64::max);
        sink.push("leaf_mass_sum_max_error", params.clone(), worst, None, replicates, key, started);
        let (m, s) = col(&|r| r.good_rate);
        sink.push("good_scale_rate", params.clone(), m, Some(s), replicates, key, started);
        let (m, s) = col(&|r| r.selected);
        sink.push("selected_weight_mean", params.clone(), m, Some(s), replicates, key, started);
        let (m, s) = col(&|r| r.threes);
        sink.push("letter_3_frequency", params.clone(), m, Some(s), replicates, key, started);
        if k > 0 {
            let (m, s) = col(&|r| r.env[k].0 / k as f64);
            sink.push("brw_min_log_mass_per_level", params.clone(), m, Some(s), replicates, key, started);
            let (m, s) = col(&|r| r.env[k].1 / k as f64);
            sink.push("brw_max_log_mass_per_level", params, m, Some(s), replicates, key, started);
        }
    }
    Ok(sink.rows)
}

#[derive(Clone, Debug)]
pub struct CouplingSamples {
    /// `d(X_1, X_2)` in glued trees.
    pub glued: Vec<f64>,
    /// Distance between two uniform grid points of one excursion tree.
    pub single: Vec<f64>,
}

impl CouplingSamples {
    pub fn ks(&self) -> f64 {
        ks_two_sample(&self.glued, &self.single)
    }
}

pub fn coupling_samples(n: usize, grid: usize, samples: usize, seed: u64) -> Result<CouplingSamples> {
    let glue_key = derive_seed(seed, 1);
    let single_key = derive_seed(seed, 2);
    let glued = (0..samples as u64)
        .into_par_iter()
        .map(|r| glue_coupling(n, grid, &mut substream(glue_key, r)).map(|g| g.distances[0][1]))
        .collect::<Result<Vec<f64>>>()?;
    let single = (0..samples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(single_key, r);
            let e = ExcursionTree::sample(grid, &mut rng)?;
            let (s, t) = (rng.gen_range(0..grid), rng.gen_range(0..grid));
            e.distance(s, t)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CouplingSamples { glued, single })
}

fn run_coupling_check(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    let n = cfg.n_grid.first().copied().unwrap_or(5);
    let grid = cfg.grid.unwrap_or(1 << 14);
    let replicates = cfg.replicates.unwrap_or(2000);
    let started = Instant::now();
    let s = coupling_samples(n, grid, replicates, cfg.seed)?;
    let mut sink = Sink { kind: "coupling-check", seed: cfg.seed, rows: Vec::new() };
    let params = json!({ "n": n, "grid": grid });
    sink.push("ks_distance", params.clone(), s.ks(), None, replicates, derive_seed(cfg.seed, 1), started);
    let (m, e) = mean_stderr(&s.glued);
    sink.push("mean_glued_distance", params.clone(), m, Some(e), replicates, derive_seed(cfg.seed, 1), started);
    let (m, e) = mean_stderr(&s.single);
    sink.push("mean_single_distance", params, m, Some(e), replicates, derive_seed(cfg.seed, 2), started);
    Ok(sink.rows)
}

fn run_audit_suite(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    let k_grid = if cfg.k_grid.is_empty() { (1..=8).collect() } else { cfg.k_grid.clone() };
    let depth = *k_grid.iter().max().expect("non-empty");
    if depth > MAX_AUDIT_DEPTH {
        return Err(Error::Budget(format!("audit depth {depth} exceeds {MAX_AUDIT_DEPTH}")));
    }
    let replicates = cfg.replicates.unwrap_or(1000);
    let paths = cfg.paths.unwrap_or(10_000);
    let mut sink = Sink { kind: "audit-suite", seed: cfg.seed, rows: Vec::new() };

    let started = Instant::now();
    let key = derive_seed(cfg.seed, 1);
    let sums: Vec<Vec<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut rng = substream(key, r);
            let a = MassCascade::build(depth, &mut rng)?;
            let b = MassCascade::build(depth, &mut rng)?;
            let corr = Correspondence::same_words(a, &b)?;
            (0..=depth).map(|k| corr.sqrt_product_sum(k)).collect()
        })
        .collect::<Result<_>>()?;
    let mut fit_pts = Vec::new();
    for &k in &k_grid {
        let (m, s) = mean_stderr(&sums.iter().map(|v| v[k]).collect::<Vec<_>>());
        fit_pts.push((k as f64, m.ln()));
        sink.push(
            "sqrt_product_sum_mean",
            json!({ "k": k, "target": 0.75f64.powi(k as i32) }),
            m,
            Some(s),
            replicates,
            key,
            started,
        );
    }
    if fit_pts.len() >= 2 {
        let (slope, _) =
            ols(&fit_pts.iter().map(|p| p.0).collect::<Vec<_>>(), &fit_pts.iter().map(|p| p.1).collect::<Vec<_>>());
        sink.push("sqrt_product_decay_ratio", json!({ "k_grid": k_grid }), slope.exp(), None, replicates, key, started);
    }
    let identity = Correspondence::identity(MassCascade::build(depth, &mut substream(key, u64::MAX))?);
    let worst = (0..=depth).map(|k| (identity.sqrt_product_sum(k).expect("in depth") - 1.0).abs()).fold(0.0, f64::max);
    sink.push("identity_sqrt_product_sum_max_error", json!({ "depth": depth }), worst, None, 1, key, started);

    let grid: Vec<(f64, f64)> = match (cfg.delta, cfg.alpha) {
        (Some(d), Some(a)) => vec![(d, a)],
        _ => vec![(0.05, 0.01), (0.1, 0.05), (0.3, 0.01), (0.3, 0.05)],
    };
    let k_paths = 50;
    for (i, &(delta, alpha)) in grid.iter().enumerate() {
        let started = Instant::now();
        let mu = cfg.mu.unwrap_or(delta * delta / 10.0);
        let params = AuditParams { alpha, delta, mu };
        let base = derive_seed(cfg.seed, 100 + i as u64);
        for (j, (label, rule, p)) in [
            ("independent", ImageRule::Independent, params),
            ("perturbed", ImageRule::Perturbed { delta, alpha }, params),
            (
                "perturbed_negative_control",
                ImageRule::Perturbed { delta, alpha },
                AuditParams { mu: 10.0 * AuditParams::admissible_mu(delta), ..params },
            ),
        ]
        .into_iter()
        .enumerate()
        {
            let key = derive_seed(base, j as u64);
            let mut pair = LazyPair::new(rule, substream(key, 0));
            let est = chernoff_supermartingale_check(&mut pair, paths, k_paths, p, &mut substream(key, 1))?;
            let row = json!({
                "delta": delta, "alpha": alpha, "mu": p.mu, "k": k_paths, "correspondence": label,
                "in_regime": est.in_regime, "bounded": est.bounded(), "mean_mismatches": est.mean_mismatches,
            });
            sink.push("supermartingale_mean", row, est.mean, Some(est.stderr), paths, key, started);
        }
        let key = derive_seed(base, 9);
        let violations = kernel_violations(delta, alpha, replicates, key);
        sink.push(
            "kernel_bound_violations",
            json!({ "delta": delta, "alpha": alpha }),
            violations as f64,
            None,
            replicates,
            key,
            started,
        );
    }
    Ok(sink.rows)
}

/// Uniform simplex point conditioned on every coordinate being at least `alpha`.
fn simplex_at_least<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> [f64; 3] {
    let free = 1.0 - 3.0 * alpha;
    let mut u = [rng.gen::<f64>(), rng.gen::<f64>()];
    if u[0] > u[1] {
        u.swap(0, 1);
    }
    [alpha + free * u[0], alpha + free * (u[1] - u[0]), alpha + free * (1.0 - u[1])]
}

/// Number of pairs `(p, q)` with `min p >= alpha`, `max |p - q| >= delta`
/// and kernel above `e^{μ/2}(1 - δ²/8)`, among `pairs` random such pairs.
pub fn kernel_violations(delta: f64, alpha: f64, pairs: usize, seed: u64) -> usize {
    let mu = delta * delta / 10.0;
    let bound = (mu / 2.0).exp() * (1.0 - delta * delta / 8.0);
    (0..pairs as u64)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = substream(seed, r);
            let p = simplex_at_least(alpha, &mut rng);
            let q = loop {
                let q = if rng.gen::<bool>() { half_split(&mut rng) } else { simplex_at_least(0.0, &mut rng) };
                if p.iter().zip(&q).any(|(a, b)| (a - b).abs() >= delta) {
                    break q;
                }
            };
            mismatch_kernel(&p, &q, mu).expect("valid simplex points") > bound + 1e-12
        })
        .count()
}

fn run_bounds_suite(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    let mut sink = Sink { kind: "bounds-suite", seed: cfg.seed, rows: Vec::new() };

    // Exchangeable tail: MAST of two uniform trees on m leaves.
    let started = Instant::now();
    let m = 20;
    let reps = cfg.replicates.unwrap_or(10_000);
    let key = derive_seed(cfg.seed, 43);
    let tail = exchangeable_tail_experiment(m, reps, key)?;
    let mut all_ok = true;
    let mut control_failed = false;
    for s in 1..=m {
        let bound = exchangeable_tail_bound(m, s)?;
        let emp = tail.tail(s);
        all_ok &= emp <= bound + 3.0 * tail.tail_stderr(s);
        control_failed |= bound < 1.0 && tail.tail(s.div_ceil(2)) > bound + 3.0 * tail.tail_stderr(s.div_ceil(2));
        sink.push(
            "mast_tail",
            json!({ "m": m, "s": s, "bound": bound }),
            emp,
            Some(tail.tail_stderr(s)),
            reps,
            key,
            started,
        );
    }
    sink.push("exchangeable_tail_pass", json!({ "m": m }), f64::from(u8::from(all_ok)), None, reps, key, started);
    sink.push(
        "exchangeable_tail_negative_control_failed",
        json!({ "m": m, "threshold": "halved" }),
        f64::from(u8::from(control_failed)),
        None,
        reps,
        key,
        started,
    );

    // Intersections of uniform subsets.
    let started = Instant::now();
    let key = derive_seed(cfg.seed, 44);
    let eps = cfg.epsilon.unwrap_or(0.3);
    let reps = cfg.replicates.unwrap_or(10_000);
    for (label, scale) in [("intersection_tail", 1.0), ("intersection_tail_negative_control", 0.125)] {
        let t = intersection_tail_experiment(10_000, 1000, 1000, eps, reps, scale, key)?;
        let params = json!({ "n": 10_000, "m": 1000, "m2": 1000, "epsilon": eps, "threshold": t.threshold, "bound": t.bound, "within_bound": t.within_bound() });
        sink.push(label, params, t.frequency, Some(t.stderr), reps, key, started);
    }

    // Refined square-root bound over regions.
    let started = Instant::now();
    let key = derive_seed(cfg.seed, 42);
    let n = cfg.n_grid.first().copied().unwrap_or(128);
    let reps = cfg.replicates.map(|r| r.min(200)).unwrap_or(200);
    for (label, scale) in [("refined_bound_violation_fraction", 1.0), ("refined_bound_negative_control", 1.0 / 16.0)] {
        let r = refined_sqrt_bound_experiment(n, 0.2, reps, 50, scale, key)?;
        let params =
            json!({ "n": n, "epsilon": 0.2, "region_pairs": 50, "constant_scale": scale, "max_ratio": r.max_ratio });
        sink.push(label, params, r.violation_fraction, None, reps, key, started);
    }
    Ok(sink.rows)
}

/// CDF of the arcsine law on `[0, 1]`, the law of `Beta(1/2, 1/2)`.
pub fn arcsine_cdf(t: f64) -> f64 {
    2.0 / std::f64::consts::PI * t.clamp(0.0, 1.0).sqrt().asin()
}
