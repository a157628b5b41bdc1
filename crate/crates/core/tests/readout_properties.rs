use beatres::eval::xcorr_lag;
use beatres::fields::{init_damping_field, init_speed_field, KBounds};
use beatres::readout::{predict_trace, sgd_epoch, train, TrainConfig};
use beatres::reservoir::{init_reservoir, run, ReservoirParams, StateTrace, TraceFlags};
use beatres::signals::gen_beat_signal;
use beatres::{GridSpec, Readout};
use proptest::prelude::*;

fn loss(r: &Readout, p: &[f64], y: f64) -> f64 {
    (r.predict(p) - y).powi(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn gradient_matches_central_differences(
        w in prop::collection::vec(-1.0..1.0f64, 1..12),
        p_seed in prop::collection::vec(-1.0..1.0f64, 12),
        bias in -1.0..1.0f64,
        y in -1.0..1.0f64,
    ) {
        let dim = w.len();
        let p = &p_seed[..dim];
        let r = Readout::new(w, bias).unwrap();
        let (gw, gb) = r.sample_gradient(p, y);
        let h = 1e-6;
        for i in 0..dim {
            let (mut up, mut down) = (r.clone(), r.clone());
            up.w_out[i] += h;
            down.w_out[i] -= h;
            let fd = (loss(&up, p, y) - loss(&down, p, y)) / (2.0 * h);
            prop_assert!((fd - gw[i]).abs() <= 1e-6, "w[{}]: {} vs {}", i, fd, gw[i]);
        }
        let (mut up, mut down) = (r.clone(), r.clone());
        up.bias += h;
        down.bias -= h;
        let fd = (loss(&up, p, y) - loss(&down, p, y)) / (2.0 * h);
        prop_assert!((fd - gb).abs() <= 1e-6);
    }
}

#[test]
fn sgd_fits_a_realizable_linear_target() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let (dim, len) = (5, 200);
    let p: Vec<f64> = (0..dim * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let truth = Readout::new(vec![0.4, -0.7, 0.1, 0.9, -0.3], 0.25).unwrap();
    let trace = StateTrace::from_p(dim, p, vec![0.0; len]).unwrap();
    let target: Vec<f64> = (0..len).map(|t| truth.predict(trace.p_at(t))).collect();
    let mut r = Readout::zeros(dim);
    for _ in 0..500 {
        r = sgd_epoch(&r, &trace, &target, 0.01).unwrap().0;
    }
    let mse = (0..len)
        .map(|t| loss(&r, trace.p_at(t), target[t]))
        .sum::<f64>()
        / len as f64;
    assert!(mse < 1e-8, "{mse}");
}

/// A readout trained on a single tempo fires about one horizon ahead of the
/// input it anticipates.
#[test]
fn trained_prediction_leads_the_input_by_the_horizon() {
    let spec = GridSpec::new(8, 0.006, 300.0).unwrap();
    let c = init_speed_field(&spec, 300.0, -250.0 / 8.0, 0.8, 2).unwrap();
    let k = init_damping_field(&spec, 0.0, &KBounds::default()).unwrap();
    let model = init_reservoir(&spec, c, k, &ReservoirParams::default(), 3).unwrap();
    let signal = gen_beat_signal(0.5, 30.0, 0.006, 0.06, 0.1).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        early_stop_rel: 0.0,
        ..TrainConfig::default()
    };
    let h = cfg.horizon_steps as isize;
    let out = train(&model, std::slice::from_ref(&signal), &cfg).unwrap();
    let trace = run(&model, &signal.samples, TraceFlags::default(), 99).unwrap();
    let pred = predict_trace(&out.readout, &trace);
    let skip = 500;
    let lag = xcorr_lag(&pred[skip..], &signal.samples[skip..], 41).unwrap();
    assert!((lag + h).abs() <= 5, "lag {lag}, horizon {h}");
}
