use beatres::coupling::{build_coupling_matrix, MAX_ROW_NNZ};
use beatres::eval::resonance_map;
use beatres::fdtd::fdtd_step;
use beatres::fields::{init_damping_field, init_speed_field, DampingField, KBounds, SpeedField};
use beatres::reservoir::{init_reservoir, Activation, ReservoirParams};
use beatres::rng::NoiseSource;
use beatres::spectral::dense_spectral_radius;
use beatres::{Boundary, GridSpec, WaveState};
use proptest::prelude::*;

fn spec(n: usize, boundary: Boundary) -> GridSpec {
    GridSpec::new(n, 0.006, 300.0)
        .unwrap()
        .with_boundary(boundary)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn arb_case() -> impl Strategy<Value = (GridSpec, SpeedField, DampingField, Vec<f64>)> {
    (prop::sample::select(vec![2usize, 4, 8]), any::<bool>()).prop_flat_map(|(n, rigid)| {
        let boundary = if rigid {
            Boundary::Rigid
        } else {
            Boundary::RigidOpen
        };
        let m = n * n;
        (
            prop::collection::vec(1.0..=300.0f64, m),
            prop::collection::vec(-0.01..=0.1f64, m),
            prop::collection::vec(-0.01..=0.1f64, m),
            prop::collection::vec(-1.0..1.0f64, 3 * m),
        )
            .prop_map(move |(c, kx, ky, x)| {
                let s = spec(n, boundary);
                let c = SpeedField::from_values(&s, c).unwrap();
                let k = DampingField::from_parts(&s, kx, ky, &KBounds::default()).unwrap();
                (s, c, k, x)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn matrix_step_equals_direct_step((s, c, k, x) in arb_case()) {
        let a = build_coupling_matrix(&c, &k, &s).unwrap();
        let via_matrix = a.apply(&x);
        let direct = fdtd_step(&WaveState::from_stacked(&s, &x).unwrap(), &c, &k, &s).unwrap().to_stacked();
        let scale = max_abs(&direct).max(1.0);
        for (u, v) in via_matrix.iter().zip(&direct) {
            prop_assert!((u - v).abs() <= 1e-12 * scale, "{} vs {}", u, v);
        }
    }

    #[test]
    fn identity_activation_reduces_to_fdtd((s, c, k, x) in arb_case()) {
        let params = ReservoirParams { noise_amp: 0.0, ..ReservoirParams::default() };
        let model = init_reservoir(&s, c.clone(), k.clone(), &params, 0).unwrap();
        let mut noise = NoiseSource::new(0);
        let stepped = model.step_with(&x, 0.0, &mut noise, Activation::Identity);
        let direct = fdtd_step(&WaveState::from_stacked(&s, &x).unwrap(), &c, &k, &s).unwrap().to_stacked();
        let scale = max_abs(&direct).max(1.0);
        for (u, v) in stepped.iter().zip(&direct) {
            prop_assert!((u - v).abs() <= 1e-12 * scale, "{} vs {}", u, v);
        }
    }

    #[test]
    fn nonzeros_couple_neighbours_only((s, c, k, _x) in arb_case()) {
        let a = build_coupling_matrix(&c, &k, &s).unwrap();
        let m = a.matrix();
        let n = s.n;
        // Staggered positions: p at (i, j), ox half a cell right, oy half a cell down.
        let pos = |idx: usize| -> (f64, f64) {
            let (block, cell) = (idx / (n * n), idx % (n * n));
            let (i, j) = ((cell / n) as f64, (cell % n) as f64);
            match block {
                0 => (i, j),
                1 => (i, j + 0.5),
                _ => (i + 0.5, j),
            }
        };
        prop_assert!(m.max_row_nnz() <= MAX_ROW_NNZ);
        for r in 0..m.nrows() {
            for (col, v) in m.row(r) {
                prop_assert!(v != 0.0);
                let (a, b) = (pos(r), pos(col));
                let dist = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                prop_assert!(dist <= 1.0 + 1e-12, "row {} col {} at distance {}", r, col, dist);
            }
        }
    }
}

#[test]
fn undamped_operator_is_marginally_stable_and_damping_shrinks_it() {
    let s = spec(8, Boundary::RigidOpen);
    let c = init_speed_field(&s, 300.0, -250.0 / 8.0, 0.0, 3).unwrap();
    assert_eq!(c.max(), 300.0);
    let bounds = KBounds::default();
    let rho = |k0: f64| {
        let k = init_damping_field(&s, k0, &bounds).unwrap();
        dense_spectral_radius(build_coupling_matrix(&c, &k, &s).unwrap().matrix()).unwrap()
    };
    let undamped = rho(0.0);
    assert!(undamped <= 1.0 + 1e-9, "{undamped}");
    let mut last = undamped;
    for k0 in [0.01, 0.05, 0.1] {
        let r = rho(k0);
        assert!(r < last, "k = {k0}: {r} !< {last}");
        last = r;
    }
}

#[test]
fn uniform_speed_field_at_courant_limit_is_stable() {
    for boundary in [Boundary::Rigid, Boundary::RigidOpen] {
        let s = spec(6, boundary);
        let c = SpeedField::uniform(&s, 300.0).unwrap();
        let k = init_damping_field(&s, 0.0, &KBounds::default()).unwrap();
        let r = dense_spectral_radius(build_coupling_matrix(&c, &k, &s).unwrap().matrix()).unwrap();
        assert!(r <= 1.0 + 1e-9, "{boundary:?}: {r}");
    }
}

#[test]
fn resonance_frequency_grows_with_speed() {
    let s = spec(16, Boundary::RigidOpen);
    let k = init_damping_field(&s, 0.0, &KBounds::default()).unwrap();
    let mut impulse = vec![0.0; 500 + 4096];
    impulse[0] = 1.0;
    let interior_median = |ratio: f64| {
        let c = SpeedField::uniform(&s, ratio * 300.0).unwrap();
        let model = init_reservoir(&s, c, k.clone(), &ReservoirParams::default(), 1).unwrap();
        let map = resonance_map(&model, &impulse, 500, false).unwrap();
        let mut v: Vec<f64> = (2..14)
            .flat_map(|i| (2..14).map(move |j| (i, j)))
            .map(|(i, j)| map.dominant(i, j))
            .collect();
        beatres::eval::median(&mut v)
    };
    let f: Vec<f64> = [0.25, 0.5, 1.0]
        .iter()
        .map(|&r| interior_median(r))
        .collect();
    assert!(f[0] < f[1] && f[1] < f[2], "{f:?}");
}
