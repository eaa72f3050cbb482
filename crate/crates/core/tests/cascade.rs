use approx::assert_abs_diff_eq;
use mastlab::cascade::{good_scales, is_good_scale, zoom_trace, MassCascade, Word, ZoomRecord, ZoomTrace};
use mastlab::harness::stats::{ks_two_sample, mean_stderr};
use mastlab::randkit::{sample_symmetric_dirichlet, stream};
use mastlab::Error;
use proptest::prelude::*;

fn trace(letters: &[u8], weights: [f64; 3]) -> ZoomTrace {
    ZoomTrace { records: letters.iter().map(|&letter| ZoomRecord { weights, letter }).collect() }
}

#[test]
fn words() {
    let w = Word::parse("3121").unwrap();
    assert_eq!(w.depth(), 4);
    assert_eq!(w.to_string(), "3121");
    assert_eq!(w.prefix(2), Word::parse("31").unwrap());
    assert_eq!(w.child(2).to_string(), "31212");
    assert_eq!(Word::from_index(4, w.index()), w);
    assert_eq!(Word::root().to_string(), "");
    assert!(Word::parse("1401").is_err());
    assert!(Word::from_letters(&[0]).is_err());
}

#[test]
fn small_cascades() {
    let mut rng = stream(1);
    let c0 = MassCascade::build(0, &mut rng).unwrap();
    assert_eq!(c0.level(0), &[1.0]);
    let mut means = [0.0; 3];
    for _ in 0..100_000 {
        let c = MassCascade::build(1, &mut rng).unwrap();
        assert!((c.level(1).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (m, x) in means.iter_mut().zip(c.level(1)) {
            *m += x / 100_000.0;
        }
    }
    for m in means {
        assert_abs_diff_eq!(m, 1.0 / 3.0, epsilon = 0.005);
    }
    let c8 = MassCascade::build(8, &mut rng).unwrap();
    assert_eq!(c8.level(8).len(), 6561);
    assert!((c8.level(8).iter().sum::<f64>() - 1.0).abs() <= 1e-10);
}

#[test]
fn depth_guard() {
    assert!(matches!(MassCascade::build(15, &mut stream(0)), Err(Error::Budget(_))));
}

#[test]
fn masses_by_word() {
    let c = MassCascade::build(3, &mut stream(2)).unwrap();
    let w = Word::parse("213").unwrap();
    let split = c.split(&w.prefix(2)).unwrap();
    let parent = c.mass(&w.prefix(2)).unwrap();
    assert_abs_diff_eq!(c.mass(&w).unwrap(), parent * split[2], epsilon = 1e-15);
    assert!(c.mass(&Word::parse("2131").unwrap()).is_err());
}

#[test]
fn jsonl_dump() {
    let c = MassCascade::build(2, &mut stream(3)).unwrap();
    let mut buf = Vec::new();
    c.write_jsonl(&mut buf).unwrap();
    let rows: Vec<serde_json::Value> =
        String::from_utf8(buf).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 1 + 3 + 9);
    assert_eq!(rows[0]["word"], "");
    for r in &rows {
        let w = Word::parse(r["word"].as_str().unwrap()).unwrap();
        assert_eq!(r["mass"].as_f64().unwrap(), c.mass(&w).unwrap());
    }
}

#[test]
fn zoom_trace_laws() {
    let t = zoom_trace(100_000, &mut stream(4));
    let n = t.len() as f64;
    for a in 1..=3u8 {
        let f = t.records.iter().filter(|r| r.letter == a).count() as f64 / n;
        assert_abs_diff_eq!(f, 1.0 / 3.0, epsilon = 0.005);
    }
    let picked: Vec<f64> = t.records.iter().map(|r| r.weights[usize::from(r.letter - 1)]).collect();
    assert_abs_diff_eq!(mean_stderr(&picked).0, 0.6, epsilon = 0.01);
    let (x, y): (Vec<f64>, Vec<f64>) = picked.chunks_exact(2).map(|p| (p[0], p[1])).unzip();
    let (mx, my) = (mean_stderr(&x).0, mean_stderr(&y).0);
    let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64;
    let sd = |v: &[f64], m: f64| (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    assert!((cov / (sd(&x, mx) * sd(&y, my))).abs() < 0.01);
    assert_eq!(t.word().depth(), t.len());
}

#[test]
fn good_scale_examples() {
    let even = [0.3, 0.3, 0.4];
    assert!(good_scales(&trace(&[1; 20], even), 0.01).is_empty());
    let t = trace(&[2, 1, 3, 3, 1, 2], even);
    assert!(is_good_scale(&t, 3, 1e-9));
    assert!(!is_good_scale(&t, 2, 1e-9));
    assert_eq!(good_scales(&t, 1e-9), vec![3]);
    let thin = ZoomTrace {
        records: vec![ZoomRecord { weights: even, letter: 3 }, ZoomRecord { weights: [0.001, 0.499, 0.5], letter: 3 }],
    };
    assert!(is_good_scale(&thin, 1, 1e-4));
    assert!(!is_good_scale(&thin, 1, 0.01));
}

#[test]
fn good_scale_rate() {
    let mut rng = stream(5);
    for alpha in [1e-6, 0.05] {
        // P(min W >= alpha) through the Gamma route, independent of the traces.
        let floor = (0..200_000)
            .filter(|_| sample_symmetric_dirichlet(0.5, 3, &mut rng).unwrap().weights.iter().all(|&w| w >= alpha))
            .count() as f64
            / 200_000.0;
        let oracle = floor / 9.0;
        let k = 200;
        let odd = (1..k).filter(|j| j % 2 == 1).count() as f64;
        let rates: Vec<f64> =
            (0..10_000).map(|_| good_scales(&zoom_trace(k, &mut rng), alpha).len() as f64 / odd).collect();
        let (m, _) = mean_stderr(&rates);
        assert_abs_diff_eq!(m, oracle, epsilon = 0.005);
        if alpha == 1e-6 {
            assert!(floor >= 0.997);
            assert!(m >= 0.997 / 9.0 - 0.005);
        }
    }
}

#[test]
fn envelope() {
    let mut rng = stream(6);
    let c = MassCascade::build(6, &mut rng).unwrap();
    let env = c.brw_envelope();
    assert_eq!(env[0], (0.0, 0.0));
    for w in env.windows(2) {
        assert!(w[1].0 <= w[0].0);
        assert!(w[1].1 <= w[0].1);
    }
    let k = 8;
    let low =
        (0..100).filter(|_| MassCascade::build(k, &mut rng).unwrap().brw_envelope()[k].0 < -7.5 * k as f64).count();
    assert!(low <= 5, "{low} of 100 cascades dip below -Ck");
}

#[test]
fn path_mass_matches_cascade_descent() {
    let mut rng = stream(7);
    let k = 6;
    let from_traces: Vec<f64> = (0..20_000).map(|_| zoom_trace(k, &mut rng).log_mass(k)).collect();
    let from_cascades: Vec<f64> = (0..20_000)
        .map(|_| {
            let c = MassCascade::build(k, &mut rng).unwrap();
            let w = c.size_biased_path(k, &mut rng).unwrap();
            c.mass(&w).unwrap().ln()
        })
        .collect();
    assert!(ks_two_sample(&from_traces, &from_cascades) < 0.02);
    let (a, sa) = mean_stderr(&from_traces);
    let (b, sb) = mean_stderr(&from_cascades);
    assert!((a - b).abs() < 4.0 * (sa * sa + sb * sb).sqrt());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn splits_are_conserved(seed: u64, k in 0usize..9) {
        let c = MassCascade::build(k, &mut stream(seed)).unwrap();
        prop_assert!(c.conservation_error() <= 1e-12);
        for j in 0..=k {
            prop_assert!(c.level(j).iter().all(|&m| m > 0.0));
        }
    }
}
