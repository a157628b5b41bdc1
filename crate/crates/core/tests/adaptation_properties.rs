use beatres::adaptation::{
    adapt_c, adapt_k, masked_scores, sync_errors, CDecision, DsConfig, SyncConfig, SyncErrors,
};
use beatres::fields::{DampingField, KBounds, SpeedField};
use beatres::normalize::SoftmaxNormalizer;
use beatres::{GridSpec, Readout};
use proptest::prelude::*;

/// Counter-array form: each early (late) event at step `e` contributes
/// `δ` to every `I(t)` for `e <= t < T`, so it adds `δ (T - e)` to `ε`.
fn sync_oracle(p: &[f64], y: &[f64], d_early: f64, d_late: f64) -> (f64, f64) {
    let len = p.len();
    let mut early_at = vec![false; len];
    let mut late_at = vec![false; len];
    for t in 1..len {
        let above = y[t] > p[t] && y[t] > 0.0;
        let (dy, dp) = (y[t] - y[t - 1], p[t] - p[t - 1]);
        early_at[t] = above && dy > 0.0 && dp < 0.0;
        late_at[t] = above && dy < 0.0 && dp > 0.0;
    }
    let weight = |flags: &[bool]| -> f64 {
        (1..len)
            .filter(|&t| flags[t])
            .map(|t| (len - t) as f64)
            .sum()
    };
    (d_early * weight(&early_at), d_late * weight(&late_at))
}

fn spec(n: usize) -> GridSpec {
    GridSpec::new(n, 0.006, 300.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sync_errors_match_event_count_oracle(
        pairs in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 2..60),
        d_early in 0.0..3.0f64,
        d_late in 0.0..3.0f64,
    ) {
        let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let cfg = SyncConfig { delta_early: d_early, delta_late: d_late, ..SyncConfig::default() };
        let got = sync_errors(&p, &y, &cfg).unwrap();
        let (e, l) = sync_oracle(&p, &y, d_early, d_late);
        prop_assert!((got.early - e).abs() <= 1e-9 * e.max(1.0));
        prop_assert!((got.late - l).abs() <= 1e-9 * l.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn accumulated_scale_stays_bounded(
        diffs in prop::collection::vec(-1000.0..1000.0f64, 1..80),
        delta_c in 0.001..0.2f64,
        threshold_sum in 0.01..0.5f64,
    ) {
        let s = spec(4);
        let cfg = SyncConfig { delta_c, threshold_sum, ..SyncConfig::default() };
        let mut c = SpeedField::uniform(&s, 100.0).unwrap();
        for d in diffs {
            let u = adapt_c(&c, SyncErrors { early: d.max(0.0), late: (-d).max(0.0) }, &cfg, 1e9);
            prop_assert!(u.field.scale_accum.abs() <= threshold_sum + 1e-9);
            c = u.field;
        }
    }

    #[test]
    fn speed_rescale_preserves_ratios(
        values in prop::collection::vec(1.0..250.0f64, 16),
        early in 0.0..300.0f64,
    ) {
        let s = spec(4);
        let cfg = SyncConfig::default();
        let c = SpeedField::from_values(&s, values.clone()).unwrap();
        let u = adapt_c(&c, SyncErrors { early, late: 0.0 }, &cfg, 300.0);
        let factor = match u.decision {
            CDecision::SpeedUp => 1.0 + cfg.delta_c,
            CDecision::SlowDown => 1.0 - cfg.delta_c,
            CDecision::Hold => 1.0,
        };
        prop_assert_eq!(u.decision, if early < cfg.threshold { CDecision::SpeedUp } else { CDecision::SlowDown });
        for (a, b) in u.field.values().iter().zip(&values) {
            prop_assert!((a / b - factor).abs() <= 1e-14);
        }
        prop_assert!((u.field.values()[3] / u.field.values()[7] - values[3] / values[7]).abs() <= 1e-12 * values[3] / values[7]);
    }

    #[test]
    fn scores_are_the_mse_increase_of_removal(
        rows in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 6), 5..40),
        w in prop::collection::vec(-2.0..2.0f64, 6),
        zero in 0usize..6,
        seed_y in prop::collection::vec(-1.0..1.0f64, 40),
    ) {
        let mut w = w;
        w[zero] = 0.0;
        let r = Readout::new(w.clone(), 0.1).unwrap();
        let targets = &seed_y[..rows.len()];
        let ps: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let mse = |r: &Readout| rows.iter().zip(targets).map(|(p, y)| (r.predict(p) - y).powi(2)).sum::<f64>() / rows.len() as f64;
        let base = mse(&r);
        let scores = masked_scores(&ps, targets, &r).unwrap();
        prop_assert_eq!(scores[zero], 0.0);
        for i in 0..6 {
            let mut masked = r.clone();
            masked.w_out[i] = 0.0;
            let direct = mse(&masked) - base;
            prop_assert!((scores[i] - direct).abs() <= 1e-10 * (1.0 + base), "neuron {}: {} vs {}", i, scores[i], direct);
        }
        let top = (0..6).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        if scores[top] > 1e-9 {
            let mut masked = r.clone();
            masked.w_out[top] = 0.0;
            prop_assert!(mse(&masked) > base);
        }
    }

    #[test]
    fn damping_update_is_local_and_exact(
        scores in prop::collection::vec(-1.0..1.0f64, 64),
        n_select in 0usize..20,
    ) {
        let s = spec(8);
        let bounds = KBounds { min: -1.0, max: 0.9 };
        let kx: Vec<f64> = (0..64).map(|i| 0.01 * (i % 7) as f64).collect();
        let ky: Vec<f64> = (0..64).map(|i| 0.01 * (i % 5) as f64).collect();
        let k = DampingField::from_parts(&s, kx, ky, &bounds).unwrap();
        let cfg = DsConfig { n_select, k_bounds: bounds, ..DsConfig::default() };
        let u = adapt_k(&k, &scores, &cfg).unwrap();
        let mut changed = 0;
        for (new, old) in u.field.kx.iter().chain(&u.field.ky).zip(k.kx.iter().chain(&k.ky)) {
            if new != old {
                changed += 1;
                let d = (new - old).abs();
                // Each o-neuron is written by at most one p-neuron.
                prop_assert!((d - cfg.delta_k).abs() <= 1e-15, "moved by {}", d);
            }
        }
        prop_assert!(changed <= 4 * n_select);
    }

    #[test]
    fn normalizer_matches_direct_sums(
        xs in prop::collection::vec(-5.0..5.0f64, 1..300),
        tau in 1.0..800.0f64,
    ) {
        let mut norm = SoftmaxNormalizer::new(tau).unwrap();
        for (t, &x) in xs.iter().enumerate() {
            let out = norm.push(x);
            let w = |u: usize| (-((t - u) as f64) / tau).exp();
            let e: f64 = (0..=t).map(|u| w(u) * xs[u].exp()).sum();
            let m = (0..=t).map(|u| w(u) * xs[u]).sum::<f64>() / (0..=t).map(w).sum::<f64>();
            let s = e.ln();
            prop_assert!((norm.log_sum() - s).abs() <= 1e-9 * s.abs().max(1.0));
            prop_assert!((norm.mean() - m).abs() <= 1e-9 * m.abs().max(1.0));
            if s > 1e-3 {
                let expect = (x - m) / s;
                prop_assert!((out.unwrap() - expect).abs() <= 1e-9 * expect.abs().max(1.0));
            } else if s < -1e-3 {
                prop_assert!(out.is_none());
            }
        }
    }
}
