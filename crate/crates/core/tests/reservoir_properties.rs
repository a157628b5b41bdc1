use beatres::fdtd::fdtd_step;
use beatres::fields::{init_damping_field, init_speed_field, KBounds};
use beatres::reservoir::{init_reservoir, run, ReservoirModel, ReservoirParams, TraceFlags};
use beatres::{GridSpec, WaveState};
use proptest::prelude::*;

fn model(n: usize, params: ReservoirParams, k0: f64) -> ReservoirModel {
    let spec = GridSpec::new(n, 0.006, 300.0).unwrap();
    let c = init_speed_field(&spec, 300.0, -250.0 / n as f64, 0.8, 5).unwrap();
    let k = init_damping_field(&spec, k0, &KBounds::default()).unwrap();
    init_reservoir(&spec, c, k, &params, 6).unwrap()
}

#[test]
fn zero_state_without_drive_stays_zero() {
    let m = model(
        8,
        ReservoirParams {
            noise_amp: 0.0,
            ..Default::default()
        },
        0.0,
    );
    let trace = run(&m, &[0.0; 1000], TraceFlags { full_state: true }, 0).unwrap();
    for t in 0..trace.len() {
        assert!(
            trace.state_at(t).unwrap().iter().all(|&v| v == 0.0),
            "step {t}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn states_stay_in_unit_band(
        inputs in prop::collection::vec(-50.0..50.0f64, 300),
        gain in 0.0..40.0f64,
        noise in 0.0..0.5f64,
        seed in any::<u64>(),
    ) {
        let m = model(4, ReservoirParams { input_gain: gain, noise_amp: noise, ..Default::default() }, 0.0);
        let trace = run(&m, &inputs, TraceFlags { full_state: true }, seed).unwrap();
        for t in 0..trace.len() {
            for &v in trace.state_at(t).unwrap() {
                prop_assert!(v.abs() <= 1.0, "|{}| > 1 at step {}", v, t);
            }
        }
    }

    #[test]
    fn same_seeds_give_the_same_trace(seed in any::<u64>()) {
        let m = model(4, ReservoirParams::default(), 0.01);
        let x: Vec<f64> = (0..200).map(|t| ((t as f64) * 0.1).sin().abs()).collect();
        let a = run(&m, &x, TraceFlags::default(), seed).unwrap();
        let b = run(&m, &x, TraceFlags::default(), seed).unwrap();
        let c = run(&m, &x, TraceFlags::default(), seed.wrapping_add(1)).unwrap();
        let same = (0..x.len()).all(|t| a.p_at(t) == b.p_at(t));
        let differs = (0..x.len()).any(|t| a.p_at(t) != c.p_at(t));
        prop_assert!(same);
        prop_assert!(differs);
    }
}

/// With pre-activations inside ±1e-4, tanh is the identity to about 3e-9
/// relative, so the trace must follow the linear FDTD system driven by
/// `α W_in s`.
#[test]
fn small_drive_follows_linear_wave_system() {
    let n = 6;
    let m = model(
        n,
        ReservoirParams {
            noise_amp: 0.0,
            ..Default::default()
        },
        0.0,
    );
    let spec = m.spec.clone();
    let (c, k) = (
        m.speed_field().unwrap().clone(),
        m.damping_field().unwrap().clone(),
    );
    let x: Vec<f64> = (0..1000)
        .map(|t| 2e-6 * ((t as f64) * 0.05).sin().abs())
        .collect();
    let trace = run(&m, &x, TraceFlags { full_state: true }, 0).unwrap();

    let mut state = vec![0.0; spec.state_dim()];
    let mut max_pre: f64 = 0.0;
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for (t, &s) in x.iter().enumerate() {
        // Pre-activation W x + W_in s, with W x = (A x - (1 - α) x) / α.
        let ax = fdtd_step(
            &WaveState::from_stacked(&spec, &state).unwrap(),
            &c,
            &k,
            &spec,
        )
        .unwrap()
        .to_stacked();
        let alpha = m.alpha();
        for i in 0..state.len() {
            let pre = (ax[i] - (1.0 - alpha) * state[i]) / alpha + m.w_in[i] * s;
            max_pre = max_pre.max(pre.abs());
            state[i] = ax[i] + alpha * m.w_in[i] * s;
        }
        for (u, v) in trace.state_at(t).unwrap().iter().zip(&state) {
            worst = worst.max((u - v).abs());
            scale = scale.max(v.abs());
        }
    }
    assert!(max_pre <= 1e-4, "pre-activation reached {max_pre}");
    assert!(scale > 0.0);
    assert!(
        worst <= 1e-6 * scale,
        "deviation {worst} against scale {scale}"
    );
}
