//! Beat signals: Hann pulse trains, aperiodic distractors, the training
//! dataset and the fixed evaluation suite.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{derive_seed, seeded};

/// Inter-beat intervals of the evaluation suite, in milliseconds.
pub const TEST_INTERVALS_MS: [f64; 6] = [360.0, 500.0, 720.0, 1000.0, 1440.0, 2556.0];

/// Phase of the first beat in every suite signal, in seconds.
pub const TEST_PHASE_S: f64 = 0.2;

pub const DEFAULT_DT_S: f64 = 0.006;
pub const DEFAULT_DURATION_S: f64 = 30.0;
pub const DEFAULT_PULSE_WIDTH_S: f64 = 0.06;

/// Gap range between onsets of the aperiodic distractor, in seconds.
pub const NONRHYTHMIC_GAP_S: (f64, f64) = (0.2, 1.5);

/// Ground truth for a rhythmic signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeatAnnotations {
    pub interval_s: f64,
    /// Pulse centres, strictly increasing, all within the signal.
    pub beats_s: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub dt: f64,
    pub annotations: Option<BeatAnnotations>,
}

impl Signal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if let Some(i) = self.samples.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid(format!(
                "sample {i} = {} lies outside [0, 1]",
                self.samples[i]
            )));
        }
        if let Some(a) = &self.annotations {
            if !(a.interval_s.is_finite() && a.interval_s > 0.0) {
                return Err(invalid("annotated interval must be positive"));
            }
            let dur = self.duration();
            if a.beats_s.iter().any(|&b| !(0.0..dur).contains(&b)) {
                return Err(invalid("annotated beat outside the signal"));
            }
            if a.beats_s.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("annotated beats must be strictly increasing"));
            }
        }
        Ok(())
    }
}

fn sample_count(duration_s: f64, dt_s: f64) -> Result<usize> {
    if !(dt_s.is_finite() && dt_s > 0.0) {
        return Err(invalid(format!("time step must be positive, got {dt_s}")));
    }
    if !(duration_s.is_finite() && duration_s >= dt_s) {
        return Err(invalid(format!(
            "duration {duration_s} shorter than one step"
        )));
    }
    Ok((duration_s / dt_s).round() as usize)
}

/// Renders unit-height Hann pulses of full width `width` centred on `centres`.
fn render_pulses(len: usize, dt: f64, width: f64, centres: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let half = width / 2.0;
    for &c in centres {
        let lo = ((c - half) / dt).ceil().max(0.0) as usize;
        let hi = (((c + half) / dt).floor().max(-1.0) + 1.0) as usize;
        for (i, v) in out.iter_mut().enumerate().take(hi.min(len)).skip(lo) {
            let u = (i as f64 * dt - c) / width;
            if u.abs() < 0.5 {
                *v += 0.5 * (1.0 + (2.0 * std::f64::consts::PI * u).cos());
            }
        }
    }
    // Pulses never overlap, so clamping only removes rounding residue.
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    out
}

/// Periodic Hann pulse train with beats at `phase + m * interval`.
pub fn gen_beat_signal(
    interval_s: f64,
    duration_s: f64,
    dt_s: f64,
    pulse_width_s: f64,
    phase_s: f64,
) -> Result<Signal> {
    let len = sample_count(duration_s, dt_s)?;
    if !(pulse_width_s > 0.0 && pulse_width_s < interval_s) {
        return Err(invalid(format!(
            "pulse width {pulse_width_s} s must lie in (0, interval {interval_s} s)"
        )));
    }
    if !(0.0..interval_s).contains(&phase_s) {
        return Err(invalid(format!(
            "phase {phase_s} s must lie in [0, {interval_s})"
        )));
    }
    let end = len as f64 * dt_s;
    let beats: Vec<f64> = (0..)
        .map(|m| phase_s + m as f64 * interval_s)
        .take_while(|&t| t < end)
        .collect();
    Ok(Signal {
        samples: render_pulses(len, dt_s, pulse_width_s, &beats),
        dt: dt_s,
        annotations: Some(BeatAnnotations {
            interval_s,
            beats_s: beats,
        }),
    })
}

/// Pulses separated by i.i.d. gaps uniform on [`NONRHYTHMIC_GAP_S`].
pub fn gen_nonrhythmic(
    duration_s: f64,
    dt_s: f64,
    pulse_width_s: f64,
    seed: u64,
) -> Result<Signal> {
    let len = sample_count(duration_s, dt_s)?;
    let (lo, hi) = NONRHYTHMIC_GAP_S;
    if !(pulse_width_s > 0.0 && pulse_width_s < lo) {
        return Err(invalid(format!(
            "pulse width {pulse_width_s} s must lie in (0, {lo})"
        )));
    }
    let mut rng = seeded(seed);
    let end = len as f64 * dt_s;
    let mut onsets = Vec::new();
    let mut t = rng.gen_range(0.0..hi);
    while t < end {
        onsets.push(t);
        t += rng.gen_range(lo..=hi);
    }
    Ok(Signal {
        samples: render_pulses(len, dt_s, pulse_width_s, &onsets),
        dt: dt_s,
        annotations: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub n_samples: usize,
    /// Tempo range in beats per minute.
    pub bpm_range: [f64; 2],
    pub nonrhythmic_fraction: f64,
    pub duration_s: f64,
    pub dt_s: f64,
    pub pulse_width_s: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            bpm_range: [66.0, 168.0],
            nonrhythmic_fraction: 0.25,
            duration_s: DEFAULT_DURATION_S,
            dt_s: DEFAULT_DT_S,
            pulse_width_s: DEFAULT_PULSE_WIDTH_S,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.bpm_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(invalid(format!("invalid tempo range [{lo}, {hi}]")));
        }
        if !(0.0..=1.0).contains(&self.nonrhythmic_fraction) {
            return Err(invalid("non-rhythmic fraction must lie in [0, 1]"));
        }
        if self.pulse_width_s >= 60.0 / hi {
            return Err(invalid(
                "pulse width must be shorter than the fastest interval",
            ));
        }
        sample_count(self.duration_s, self.dt_s)?;
        Ok(())
    }

    pub fn rhythmic_count(&self) -> usize {
        let r = ((1.0 - self.nonrhythmic_fraction) * self.n_samples as f64 - 1e-9).ceil();
        (r.max(0.0) as usize).min(self.n_samples)
    }
}

/// How a dataset sample was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SampleKind {
    Rhythmic {
        bpm: f64,
        interval_s: f64,
        phase_s: f64,
    },
    Nonrhythmic {
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSample {
    pub kind: SampleKind,
    pub signal: Signal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub samples: Vec<DatasetSample>,
}

impl Dataset {
    pub fn signals(&self) -> impl Iterator<Item = &Signal> {
        self.samples.iter().map(|s| &s.signal)
    }
}

/// Rhythmic samples first, then distractors. Sample `i` depends only on
/// the base seed and `i`.
pub fn gen_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let n_rhythmic = cfg.rhythmic_count();
    let samples = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let sample_seed = derive_seed(cfg.seed, &[i as u64]);
            if i < n_rhythmic {
                let mut rng = seeded(sample_seed);
                let [lo, hi] = cfg.bpm_range;
                let bpm = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                let interval_s = 60.0 / bpm;
                let phase_s = rng.gen_range(0.0..interval_s);
                let signal = gen_beat_signal(
                    interval_s,
                    cfg.duration_s,
                    cfg.dt_s,
                    cfg.pulse_width_s,
                    phase_s,
                )?;
                Ok(DatasetSample {
                    kind: SampleKind::Rhythmic {
                        bpm,
                        interval_s,
                        phase_s,
                    },
                    signal,
                })
            } else {
                let signal =
                    gen_nonrhythmic(cfg.duration_s, cfg.dt_s, cfg.pulse_width_s, sample_seed)?;
                Ok(DatasetSample {
                    kind: SampleKind::Nonrhythmic { seed: sample_seed },
                    signal,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        config: cfg.clone(),
        samples,
    })
}

/// The six fixed evaluation signals, 30 s each, ordered by interval.
pub fn test_suite(dt_s: f64) -> Result<Vec<Signal>> {
    TEST_INTERVALS_MS
        .iter()
        .map(|ms| {
            gen_beat_signal(
                ms / 1000.0,
                DEFAULT_DURATION_S,
                dt_s,
                DEFAULT_PULSE_WIDTH_S,
                TEST_PHASE_S,
            )
        })
        .collect()
}
