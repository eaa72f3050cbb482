//! Acceptance run: one PASS/FAIL line per criterion, all from one fixed seed.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mastlab::audit::{
    chernoff_supermartingale_check, compute_constants, exchangeable_tail_bound, exchangeable_tail_experiment,
    intersection_tail_experiment, mismatch_kernel, refined_sqrt_bound_experiment, AuditParams, Correspondence,
    ImageRule, LazyPair,
};
use mastlab::cascade::{zoom_trace, MassCascade};
use mastlab::cladogram::{count_cladograms, enumerate_cladograms, sample_uniform};
use mastlab::harness::stats::{chi_square_uniform, ks_one_sample};
use mastlab::harness::{arcsine_cdf, coupling_samples, mast_scaling};
use mastlab::mast::{is_agreement_set, mast, mast_bruteforce};
use mastlab::randkit::{derive_seed, half_split, stream, substream};
use num_bigint::BigUint;
use rand::Rng;
use statrs::function::gamma::gamma;

const ACCEPTANCE_SEED: u64 = 1729;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn seed(criterion: u64) -> u64 {
    derive_seed(ACCEPTANCE_SEED, criterion)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let b5: Vec<_> = enumerate_cladograms(5).unwrap().collect();
    let mut pairs = 0;
    let mut bad = 0;
    for a in &b5 {
        for b in &b5 {
            let dp = mast(a, b).unwrap();
            let bf = mast_bruteforce(a, b).unwrap();
            pairs += 1;
            if dp.size != bf.size || !is_agreement_set(a, b, &dp.witness).unwrap() {
                bad += 1;
            }
        }
    }
    let mut rng = stream(seed(1));
    for _ in 0..1000 {
        let n = rng.gen_range(2..=10);
        let a = sample_uniform(n, &mut rng);
        let b = sample_uniform(n, &mut rng);
        let dp = mast(&a, &b).unwrap();
        pairs += 1;
        if dp.size != mast_bruteforce(&a, &b).unwrap().size || !is_agreement_set(&a, &b, &dp.witness).unwrap() {
            bad += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        bad == 0 && t < Duration::from_secs(60),
        format!("{pairs} pairs, {bad} discrepancies, {:.1}s", t.as_secs_f64()),
    )
}

fn counting() -> Outcome {
    let expected = [1u32, 3, 15, 105, 945];
    let mut ok = true;
    let mut seen = Vec::new();
    for (n, &want) in (3..=7).zip(&expected) {
        let enumerated = enumerate_cladograms(n).unwrap().count();
        ok &= count_cladograms(n as u32) == BigUint::from(want) && enumerated == want as usize;
        seen.push(enumerated);
    }
    outcome(ok, format!("enumerated {seen:?}"))
}

fn uniformity() -> Outcome {
    let index: HashMap<String, usize> =
        enumerate_cladograms(5).unwrap().enumerate().map(|(i, t)| (t.canonical_form(), i)).collect();
    let mut counts = vec![0usize; index.len()];
    let mut rng = stream(seed(3));
    for _ in 0..15_000 {
        counts[index[&sample_uniform(5, &mut rng).canonical_form()]] += 1;
    }
    let (chi2, p) = chi_square_uniform(&counts);
    outcome(p >= 1e-3, format!("chi2 = {chi2:.2} on 14 df, p = {p:.4}"))
}

fn decomposition_laws() -> Outcome {
    let trace = zoom_trace(100_000, &mut stream(seed(4)));
    let n = trace.len() as f64;
    let mut freq = [0.0; 3];
    for r in &trace.records {
        freq[usize::from(r.letter - 1)] += 1.0 / n;
    }
    let selected = trace.records.iter().map(|r| r.weights[usize::from(r.letter - 1)]).sum::<f64>() / n;
    let ratios: Vec<f64> = trace.records.iter().map(|r| r.weights[1] / (r.weights[1] + r.weights[2])).collect();
    let ks = ks_one_sample(&ratios, arcsine_cdf);
    // E[W_I] = 3 E[W_1^2] for Dir(1/2, 1/2, 1/2), W_1 ~ Beta(1/2, 1).
    let oracle = 3.0 * (0.5 * 1.5) / (1.5 * 2.5);
    let ok = freq.iter().all(|f| (f - 1.0 / 3.0).abs() <= 0.005) && (selected - oracle).abs() <= 0.01 && ks < 0.01;
    outcome(
        ok,
        format!(
            "I freq = [{:.4}, {:.4}, {:.4}], E[W_I] = {selected:.4} (oracle {oracle}), KS = {ks:.4}",
            freq[0], freq[1], freq[2]
        ),
    )
}

fn sqrt_product_law() -> Outcome {
    // E[sqrt W] for W ~ Beta(1/2, 1), times 3 children with independent images.
    let root_moment = gamma(1.0) * gamma(1.5) / (gamma(0.5) * gamma(2.0));
    let ratio = 3.0 * root_moment * root_moment;
    let depth = 10;
    let reps = 1000;
    let mut sums = vec![0.0; depth + 1];
    let mut identity_err: f64 = 0.0;
    let mut rng = stream(seed(5));
    for _ in 0..reps {
        let a = MassCascade::build(depth, &mut rng).unwrap();
        let b = MassCascade::build(depth, &mut rng).unwrap();
        for (k, s) in sums.iter_mut().enumerate() {
            *s += a.level(k).iter().zip(b.level(k)).map(|(x, y)| (x * y).sqrt()).sum::<f64>() / reps as f64;
        }
        let corr = Correspondence::same_words(a.clone(), &b).unwrap();
        assert!(
            (corr.sqrt_product_sum(depth).unwrap()
                - a.level(depth).iter().zip(b.level(depth)).map(|(x, y)| (x * y).sqrt()).sum::<f64>())
            .abs()
                < 1e-12
        );
        let id = Correspondence::identity(a);
        for k in 0..=depth {
            identity_err = identity_err.max((id.sqrt_product_sum(k).unwrap() - 1.0).abs());
        }
    }
    let worst = (1..=depth).map(|k| (sums[k] / ratio.powi(k as i32) - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        worst <= 0.05 && identity_err < 1e-9,
        format!(
            "ratio oracle {ratio}, worst relative error {worst:.4} over k = 1..10, identity error {identity_err:.1e}"
        ),
    )
}

fn supermartingale() -> Outcome {
    let (delta, alpha) = (0.1, 0.05);
    let params = AuditParams { alpha, delta, mu: delta * delta / 10.0 };
    let run = |rule: ImageRule, p: AuditParams, key: u64| {
        let mut pair = LazyPair::new(rule, substream(seed(6), key));
        chernoff_supermartingale_check(&mut pair, 10_000, 50, p, &mut substream(seed(6), key + 100)).unwrap()
    };
    let independent = run(ImageRule::Independent, params, 0);
    let perturbed = run(ImageRule::Perturbed { delta, alpha }, params, 1);
    let control_params = AuditParams { mu: 10.0 * AuditParams::admissible_mu(delta), ..params };
    let control = run(ImageRule::Perturbed { delta, alpha }, control_params, 2);
    outcome(
        independent.bounded() && perturbed.bounded() && control.exceeds_one(),
        format!(
            "independent {:.4} ± {:.4}, perturbed {:.4} ± {:.4}, control (mu = {:.4}) {:.4} ± {:.4}",
            independent.mean,
            independent.stderr,
            perturbed.mean,
            perturbed.stderr,
            control_params.mu,
            control.mean,
            control.stderr
        ),
    )
}

fn simplex_point<R: Rng>(lo: f64, rng: &mut R) -> [f64; 3] {
    let (mut u, mut v) = (rng.gen::<f64>(), rng.gen::<f64>());
    if u > v {
        std::mem::swap(&mut u, &mut v);
    }
    let free = 1.0 - 3.0 * lo;
    [lo + free * u, lo + free * (v - u), lo + free * (1.0 - v)]
}

fn kernel_lemma() -> Outcome {
    let mut violations = 0;
    let mut mismatched_impl = 0;
    let mut worst_gap = f64::INFINITY;
    for (g, delta) in [0.05f64, 0.1, 0.3].into_iter().enumerate() {
        for (h, alpha) in [0.01, 0.05].into_iter().enumerate() {
            let mu = delta * delta / 10.0;
            let bound = (mu / 2.0).exp() * (1.0 - delta * delta / 8.0);
            let mut rng = substream(seed(7), (g * 2 + h) as u64);
            for _ in 0..100_000 {
                let p = simplex_point(alpha, &mut rng);
                let q = loop {
                    let q = if rng.gen::<bool>() { half_split(&mut rng) } else { simplex_point(0.0, &mut rng) };
                    if p.iter().zip(&q).any(|(a, b)| (a - b).abs() >= delta) {
                        break q;
                    }
                };
                let direct = (mu / 2.0).exp() * p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum::<f64>();
                let k = mismatch_kernel(&p, &q, mu).unwrap();
                if (k - direct).abs() > 1e-12 {
                    mismatched_impl += 1;
                }
                if k > bound {
                    violations += 1;
                }
                worst_gap = worst_gap.min(bound - k);
            }
        }
    }
    outcome(
        violations == 0 && mismatched_impl == 0,
        format!("600000 pairs, {violations} violations, smallest slack {worst_gap:.2e}"),
    )
}

fn constants_ledger() -> Outcome {
    let ledger = match compute_constants() {
        Ok(l) => l,
        Err(e) => return outcome(false, e.to_string()),
    };
    let threshold = ledger.get("delta*").map(|c| c.log10).unwrap_or(f64::NAN);
    let eps: Vec<String> =
        ["eps_mast", "eps_holder"].iter().filter_map(|n| ledger.get(n)).map(|c| c.display_value()).collect();
    let ok = ledger.all_hold()
        && (threshold - (-165.72)).abs() <= 0.01
        && eps.len() == 2
        && eps.iter().all(|e| e == "10^-338");
    outcome(ok, format!("{} inequalities hold, log10 delta* = {threshold:.4}, eps = {eps:?}", ledger.entries.len()))
}

fn coupling() -> Outcome {
    let start = Instant::now();
    let s = coupling_samples(5, 1 << 14, 2000, seed(9)).unwrap();
    let ks = s.ks();
    let t = start.elapsed();
    outcome(ks < 0.03 && t < Duration::from_secs(600), format!("KS = {ks:.4} at 2000 vs 2000, {:.1}s", t.as_secs_f64()))
}

fn bounds_suite() -> Outcome {
    let tail = exchangeable_tail_experiment(20, 10_000, derive_seed(seed(10), 0)).unwrap();
    let mut tail_ok = true;
    let mut tail_control_failed = false;
    for s in 1..=20 {
        let bound = exchangeable_tail_bound(20, s).unwrap();
        tail_ok &= tail.tail(s) <= bound;
        let half = s.div_ceil(2);
        tail_control_failed |= tail.tail(half) > bound;
    }

    let inter = intersection_tail_experiment(10_000, 1000, 1000, 0.3, 10_000, 1.0, derive_seed(seed(10), 1)).unwrap();
    let inter_control =
        intersection_tail_experiment(10_000, 1000, 1000, 0.3, 10_000, 0.125, derive_seed(seed(10), 1)).unwrap();

    let refined = refined_sqrt_bound_experiment(128, 0.2, 200, 50, 1.0, derive_seed(seed(10), 2)).unwrap();
    let refined_control =
        refined_sqrt_bound_experiment(128, 0.2, 200, 50, 1.0 / 16.0, derive_seed(seed(10), 2)).unwrap();

    let ok = tail_ok
        && tail_control_failed
        && inter.frequency <= inter.bound
        && inter_control.frequency > inter_control.bound
        && refined.violation_fraction <= 0.05
        && refined_control.violation_fraction > 0.05;
    outcome(
        ok,
        format!(
            "tail ok {tail_ok} (control failed {tail_control_failed}); intersection {:.4} <= {:.2e} (control {:.4}); refined {:.3} (control {:.3})",
            inter.frequency, inter.bound, inter_control.frequency, refined.violation_fraction, refined_control.violation_fraction
        ),
    )
}

fn scaling() -> Outcome {
    let start = Instant::now();
    let fit = mast_scaling(&[64, 128, 256, 512, 1024], 200, 1000, seed(11)).unwrap();
    let t = start.elapsed();
    let means: Vec<String> = fit.points.iter().map(|p| format!("{}:{:.2}", p.n, p.mean)).collect();
    outcome(
        (0.35..=0.55).contains(&fit.exponent) && t < Duration::from_secs(1800),
        format!(
            "beta = {:.4} [{:.4}, {:.4}], means {}, {:.1}s",
            fit.exponent,
            fit.ci_low,
            fit.ci_high,
            means.join(" "),
            t.as_secs_f64()
        ),
    )
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        ("oracle_equivalence", oracle_equivalence),
        ("counting", counting),
        ("uniformity", uniformity),
        ("decomposition_laws", decomposition_laws),
        ("sqrt_product_law", sqrt_product_law),
        ("supermartingale", supermartingale),
        ("kernel_lemma", kernel_lemma),
        ("constants_ledger", constants_ledger),
        ("coupling", coupling),
        ("bounds_suite", bounds_suite),
        ("scaling", scaling),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name}: {} ({:.1}s)", i + 1, o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
