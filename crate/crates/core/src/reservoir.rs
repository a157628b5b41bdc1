//! Leaky-tanh echo state reservoir driven by a scalar input.
//!
//! ```text
//! x(t+1) = (1 - α) x(t) + α tanh(W_in s(t) + W x(t) + b(t)),   b ~ U[-a, a]
//! ```
//!
//! The input weights are nonzero only on the first row of p-neurons (the
//! fast end). `W` comes either from the wave coupling matrix or, for the
//! baseline, from a random sparse draw; in both cases it is rebuilt from
//! the stored recipe rather than persisted.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{build_coupling_matrix, check_alpha, coupling_to_reservoir_weights};
use crate::error::{check_len, invalid, Error, Result};
use crate::fields::{DampingField, SpeedField};
use crate::grid::GridSpec;
use crate::rng::{seeded, NoiseSource};
use crate::sparse::CsrMatrix;

/// Scalar hyperparameters of the reservoir update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReservoirParams {
    /// Leak rate α.
    pub alpha: f64,
    /// Input weights are drawn from `U[0, input_gain)`.
    pub input_gain: f64,
    /// Half-width of the per-step uniform bias noise.
    pub noise_amp: f64,
}

impl Default for ReservoirParams {
    fn default() -> Self {
        Self {
            alpha: 0.03,
            input_gain: 1.0,
            noise_amp: 1e-3,
        }
    }
}

impl ReservoirParams {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.input_gain.is_finite() && self.input_gain >= 0.0) {
            return Err(invalid(format!(
                "input gain must be >= 0, got {}",
                self.input_gain
            )));
        }
        if !(self.noise_amp.is_finite() && self.noise_amp >= 0.0) {
            return Err(invalid(format!(
                "noise amplitude must be >= 0, got {}",
                self.noise_amp
            )));
        }
        Ok(())
    }
}

/// Where the recurrent weights come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSource {
    /// FDTD-derived weights from speed and damping fields.
    Wave { c: SpeedField, k: DampingField },
    /// Random sparse weights rescaled to a spectral radius.
    Random {
        density: f64,
        spectral_radius: f64,
        seed: u64,
    },
}

/// Nonlinearity applied to the pre-activation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    #[default]
    Tanh,
    /// Only for checking the linear-regime reduction to the FDTD step.
    Identity,
}

#[derive(Clone, Debug)]
pub struct ReservoirModel {
    pub spec: GridSpec,
    pub params: ReservoirParams,
    pub input_seed: u64,
    pub w_in: Vec<f64>,
    pub source: WeightSource,
    w: CsrMatrix,
}

impl ReservoirModel {
    /// Assembles a model from its parts, rebuilding `W` from `source`.
    pub fn from_parts(
        spec: GridSpec,
        params: ReservoirParams,
        input_seed: u64,
        w_in: Vec<f64>,
        source: WeightSource,
    ) -> Result<Self> {
        spec.validate()?;
        params.validate()?;
        check_len("input weights", spec.state_dim(), w_in.len())?;
        if let Some(i) = w_in
            .iter()
            .enumerate()
            .position(|(i, &v)| v != 0.0 && i >= spec.n)
        {
            return Err(invalid(format!(
                "input weight {i} lies outside the fast row"
            )));
        }
        let w = build_weights(&spec, params.alpha, &source)?;
        Ok(Self {
            spec,
            params,
            input_seed,
            w_in,
            source,
            w,
        })
    }

    pub fn w(&self) -> &CsrMatrix {
        &self.w
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn state_dim(&self) -> usize {
        self.spec.state_dim()
    }

    /// Number of p-neurons, the readout's input dimension.
    pub fn p_dim(&self) -> usize {
        self.spec.cells()
    }

    pub fn speed_field(&self) -> Option<&SpeedField> {
        match &self.source {
            WeightSource::Wave { c, .. } => Some(c),
            WeightSource::Random { .. } => None,
        }
    }

    pub fn damping_field(&self) -> Option<&DampingField> {
        match &self.source {
            WeightSource::Wave { k, .. } => Some(k),
            WeightSource::Random { .. } => None,
        }
    }

    /// Same model with new wave fields; `W` is re-derived in full.
    pub fn with_fields(&self, c: SpeedField, k: DampingField) -> Result<Self> {
        if !matches!(self.source, WeightSource::Wave { .. }) {
            return Err(invalid("field update requested on a random reservoir"));
        }
        Self::from_parts(
            self.spec.clone(),
            self.params,
            self.input_seed,
            self.w_in.clone(),
            WeightSource::Wave { c, k },
        )
    }

    pub fn with_noise(&self, noise_amp: f64) -> Result<Self> {
        let mut params = self.params;
        params.noise_amp = noise_amp;
        params.validate()?;
        Ok(Self {
            params,
            ..self.clone()
        })
    }

    /// One update from `x` with input `s`, drawing fresh bias noise.
    pub fn step(&self, x: &[f64], s: f64, noise: &mut NoiseSource) -> Vec<f64> {
        self.step_with(x, s, noise, Activation::Tanh)
    }

    pub fn step_with(
        &self,
        x: &[f64],
        s: f64,
        noise: &mut NoiseSource,
        act: Activation,
    ) -> Vec<f64> {
        assert_eq!(x.len(), self.state_dim(), "state dimension");
        let mut next = x.to_vec();
        let mut scratch = vec![0.0; x.len()];
        advance(self, &mut next, &mut scratch, s, noise, act);
        next
    }

    pub fn session(&self, noise_seed: u64) -> Session {
        Session::new(self, noise_seed)
    }
}

fn build_weights(spec: &GridSpec, alpha: f64, source: &WeightSource) -> Result<CsrMatrix> {
    match source {
        WeightSource::Wave { c, k } => {
            c.validate(spec)?;
            let a = build_coupling_matrix(c, k, spec)?;
            coupling_to_reservoir_weights(&a, alpha)
        }
        WeightSource::Random {
            density,
            spectral_radius,
            seed,
        } => crate::baseline::random_weights(spec.state_dim(), *density, *spectral_radius, *seed),
    }
}

/// Input weights: `U[0, gain)` on the first row of p-neurons, zero elsewhere.
pub fn fast_row_input_weights(spec: &GridSpec, gain: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    let mut w_in = vec![0.0; spec.state_dim()];
    for v in w_in.iter_mut().take(spec.n) {
        *v = gain * rng.gen::<f64>();
    }
    w_in
}

/// Builds the FDTD-derived reservoir.
pub fn init_reservoir(
    spec: &GridSpec,
    c: SpeedField,
    k: DampingField,
    params: &ReservoirParams,
    input_seed: u64,
) -> Result<ReservoirModel> {
    params.validate()?;
    let w_in = fast_row_input_weights(spec, params.input_gain, input_seed);
    ReservoirModel::from_parts(
        spec.clone(),
        *params,
        input_seed,
        w_in,
        WeightSource::Wave { c, k },
    )
}

/// Below this magnitude [`tanh`] uses its odd Taylor polynomial.
const TANH_SERIES_LIMIT: f64 = 0.1;

/// `tanh` with a polynomial fast path for the small arguments that dominate
/// reservoir activity. Truncation error on the fast path is below 2e-18.
#[inline]
pub fn tanh(x: f64) -> f64 {
    if x.abs() >= TANH_SERIES_LIMIT {
        return x.tanh();
    }
    const C: [f64; 7] = [
        -1.0 / 3.0,
        2.0 / 15.0,
        -17.0 / 315.0,
        62.0 / 2835.0,
        -1382.0 / 155_925.0,
        21_844.0 / 6_081_075.0,
        -929_569.0 / 638_512_875.0,
    ];
    let x2 = x * x;
    let mut poly = C[6];
    for &c in C[..6].iter().rev() {
        poly = poly * x2 + c;
    }
    x + x * x2 * poly
}

fn advance(
    model: &ReservoirModel,
    x: &mut [f64],
    pre: &mut [f64],
    s: f64,
    noise: &mut NoiseSource,
    act: Activation,
) {
    model.w.mul_vec_into(x, pre);
    let alpha = model.params.alpha;
    let keep = 1.0 - alpha;
    let amp = model.params.noise_amp;
    let noisy = amp > 0.0;
    for ((xi, &hi), &wi) in x.iter_mut().zip(pre.iter()).zip(&model.w_in) {
        let mut h = hi + wi * s;
        if noisy {
            h += noise.symmetric(amp);
        }
        let f = match act {
            Activation::Tanh => tanh(h),
            Activation::Identity => h,
        };
        *xi = keep * *xi + alpha * f;
    }
}

/// A running reservoir: owns the state, scratch space and noise stream.
/// The model is passed per step so it can be swapped between steps.
#[derive(Clone, Debug)]
pub struct Session {
    x: Vec<f64>,
    scratch: Vec<f64>,
    noise: NoiseSource,
    cells: usize,
}

impl Session {
    pub fn new(model: &ReservoirModel, noise_seed: u64) -> Self {
        Self {
            x: vec![0.0; model.state_dim()],
            scratch: vec![0.0; model.state_dim()],
            noise: NoiseSource::new(noise_seed),
            cells: model.p_dim(),
        }
    }

    /// Steps once and returns the p-neurons.
    pub fn advance(&mut self, model: &ReservoirModel, s: f64) -> &[f64] {
        debug_assert_eq!(model.state_dim(), self.x.len());
        advance(
            model,
            &mut self.x,
            &mut self.scratch,
            s,
            &mut self.noise,
            Activation::Tanh,
        );
        &self.x[..self.cells]
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn p(&self) -> &[f64] {
        &self.x[..self.cells]
    }

    pub fn set_state(&mut self, x: &[f64]) {
        self.x.copy_from_slice(x);
    }
}

/// Which snapshots a [`run`] keeps. p-neurons are always recorded.
#[derive(Clone, Copy, Debug, Default)]
pub struct TraceFlags {
    pub full_state: bool,
}

/// Recorded reservoir trajectory, one snapshot per input sample.
#[derive(Clone, Debug)]
pub struct StateTrace {
    cells: usize,
    state_dim: usize,
    p: Vec<f64>,
    full: Option<Vec<f64>>,
    pub inputs: Vec<f64>,
}

impl StateTrace {
    /// Builds a trace from flat row-per-step p snapshots.
    pub fn from_p(cells: usize, p: Vec<f64>, inputs: Vec<f64>) -> Result<Self> {
        check_len("p snapshots", cells * inputs.len(), p.len())?;
        Ok(Self {
            cells,
            state_dim: 3 * cells,
            p,
            full: None,
            inputs,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// p-neurons after consuming input `t`.
    pub fn p_at(&self, t: usize) -> &[f64] {
        &self.p[t * self.cells..(t + 1) * self.cells]
    }

    pub fn state_at(&self, t: usize) -> Option<&[f64]> {
        self.full
            .as_ref()
            .map(|f| &f[t * self.state_dim..(t + 1) * self.state_dim])
    }
}

/// Runs the reservoir from the zero state over `signal`.
pub fn run(
    model: &ReservoirModel,
    signal: &[f64],
    flags: TraceFlags,
    noise_seed: u64,
) -> Result<StateTrace> {
    if signal.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot run on an empty signal".into(),
        ));
    }
    let cells = model.p_dim();
    let dim = model.state_dim();
    let mut session = model.session(noise_seed);
    let mut p = Vec::with_capacity(cells * signal.len());
    let mut full = flags
        .full_state
        .then(|| Vec::with_capacity(dim * signal.len()));
    for &s in signal {
        p.extend_from_slice(session.advance(model, s));
        if let Some(f) = full.as_mut() {
            f.extend_from_slice(session.state());
        }
    }
    Ok(StateTrace {
        cells,
        state_dim: dim,
        p,
        full,
        inputs: signal.to_vec(),
    })
}
