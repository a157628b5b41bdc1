//! Beat-timing metrics and spectral analysis of the reservoir.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::reservoir::ReservoirModel;
use crate::signals::Signal;

pub use crate::baseline::random_reservoir;

/// Peak times (seconds) of local maxima above `min_height`, keeping the
/// tallest of any group closer than `min_separation_s`, refined to
/// sub-sample precision by a parabola through the three samples at the top.
pub fn detect_peaks(
    series: &[f64],
    dt: f64,
    min_height: f64,
    min_separation_s: f64,
) -> Result<Vec<f64>> {
    if !(dt > 0.0 && min_separation_s > dt) {
        return Err(invalid(format!(
            "minimum separation {min_separation_s} s must exceed the step {dt} s"
        )));
    }
    let mut candidates: Vec<usize> = (1..series.len().saturating_sub(1))
        .filter(|&i| {
            series[i] > min_height && series[i] > series[i - 1] && series[i] >= series[i + 1]
        })
        .collect();
    candidates.sort_by(|&a, &b| series[b].total_cmp(&series[a]).then(a.cmp(&b)));
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for i in candidates {
        let t = refine(series, i) * dt;
        if kept.iter().all(|&(_, u)| (u - t).abs() >= min_separation_s) {
            kept.push((i, t));
        }
    }
    let mut times: Vec<f64> = kept.into_iter().map(|(_, t)| t).collect();
    times.sort_by(f64::total_cmp);
    Ok(times)
}

/// Fractional index of the vertex of the parabola through `i - 1, i, i + 1`.
fn refine(y: &[f64], i: usize) -> f64 {
    let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
    let curv = a - 2.0 * b + c;
    if curv >= 0.0 {
        return i as f64;
    }
    i as f64 + (0.5 * (a - c) / curv).clamp(-0.5, 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetStats {
    /// `(t_target - t_pred) / interval` per matched pair, in target order.
    /// Positive means the prediction came early.
    pub ratios: Vec<f64>,
    pub mean: f64,
    /// Population variance of `ratios`.
    pub variance: f64,
    pub matched_count: usize,
    pub missed_count: usize,
    pub spurious_count: usize,
}

impl OffsetStats {
    pub fn from_ratios(ratios: Vec<f64>, missed_count: usize, spurious_count: usize) -> Self {
        let (mean, variance) = mean_var(&ratios);
        Self {
            matched_count: ratios.len(),
            ratios,
            mean,
            variance,
            missed_count,
            spurious_count,
        }
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Pairs target and prediction peaks closest-first, each at most once and
/// only within half an interval of each other.
pub fn time_offset_ratio(
    pred_peaks: &[f64],
    target_peaks: &[f64],
    target_interval_s: f64,
) -> Result<OffsetStats> {
    if !(target_interval_s > 0.0) {
        return Err(invalid("target interval must be positive"));
    }
    if target_peaks.is_empty() {
        return Err(invalid("no target peaks to match"));
    }
    let mut targets = target_peaks.to_vec();
    let mut preds = pred_peaks.to_vec();
    targets.sort_by(f64::total_cmp);
    preds.sort_by(f64::total_cmp);
    let gate = 0.5 * target_interval_s;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, &t) in targets.iter().enumerate() {
        let lo = preds.partition_point(|&p| p < t - gate);
        for (pi, &p) in preds.iter().enumerate().skip(lo) {
            if p > t + gate {
                break;
            }
            pairs.push(((t - p).abs(), ti, pi));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut t_match = vec![None; targets.len()];
    let mut p_used = vec![false; preds.len()];
    for (_, ti, pi) in pairs {
        if t_match[ti].is_none() && !p_used[pi] {
            t_match[ti] = Some(pi);
            p_used[pi] = true;
        }
    }
    let ratios: Vec<f64> = t_match
        .iter()
        .enumerate()
        .filter_map(|(ti, m)| m.map(|pi| (targets[ti] - preds[pi]) / target_interval_s))
        .collect();
    let missed = targets.len() - ratios.len();
    let spurious = preds.len() - ratios.len();
    Ok(OffsetStats::from_ratios(ratios, missed, spurious))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalErrors {
    /// Mean of `|Δt - interval|` over consecutive prediction peaks, seconds.
    pub mean_abs_error_s: f64,
    /// Variance of the signed errors `Δt - interval`, seconds squared.
    pub variance: f64,
}

pub fn interval_errors(pred_peaks: &[f64], target_interval_s: f64) -> Result<IntervalErrors> {
    if pred_peaks.len() < 2 {
        return Err(invalid(
            "interval errors need at least two prediction peaks",
        ));
    }
    let errs: Vec<f64> = pred_peaks
        .windows(2)
        .map(|w| (w[1] - w[0]) - target_interval_s)
        .collect();
    let (_, variance) = mean_var(&errs);
    Ok(IntervalErrors {
        mean_abs_error_s: errs.iter().map(|e| e.abs()).sum::<f64>() / errs.len() as f64,
        variance,
    })
}

/// Shift `L` (steps, `|L| <= max_lag`) maximizing
/// `Σ_t (a(t) - ā)(b(t - L) - b̄)`: `a` delayed by `L` best matches `b`.
/// Ties go to the smaller `|L|`, then to the positive lag.
pub fn xcorr_lag(a: &[f64], b: &[f64], max_lag: usize) -> Result<isize> {
    if a.len() != b.len() || a.is_empty() {
        return Err(invalid(
            "cross-correlation needs two equally long non-empty series",
        ));
    }
    let n = a.len();
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let max_lag = max_lag.min(n - 1) as isize;
    let score = |lag: isize| -> f64 {
        let mut acc = 0.0;
        for t in 0..n as isize {
            let u = t - lag;
            if u >= 0 && (u as usize) < n {
                acc += (a[t as usize] - ma) * (b[u as usize] - mb);
            }
        }
        acc
    };
    let mut best = (0isize, score(0));
    for mag in 1..=max_lag {
        for lag in [mag, -mag] {
            let s = score(lag);
            if s > best.1 {
                best = (lag, s);
            }
        }
    }
    Ok(best.0)
}

/// Settings for scoring one prediction against its signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub horizon_steps: usize,
    /// Leading seconds excluded from scoring.
    pub skip_s: f64,
    /// Prediction peaks must exceed this fraction of the window maximum.
    pub min_height_rel: f64,
    /// Minimum peak separation as a fraction of the target interval.
    pub min_separation_frac: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 33,
            skip_s: 3.0,
            min_height_rel: 0.3,
            min_separation_frac: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub interval_s: f64,
    pub offsets: OffsetStats,
    pub interval_errors: Option<IntervalErrors>,
    /// How far the prediction trails the target, seconds, searched within
    /// half an interval either way.
    pub lag_s: f64,
    pub pred_peaks: Vec<f64>,
    pub target_peaks: Vec<f64>,
}

/// Scores a prediction series (one value per input step) against the
/// annotated beats shifted back by the horizon.
pub fn evaluate_prediction(
    pred: &[f64],
    signal: &Signal,
    cfg: &EvalConfig,
) -> Result<SampleMetrics> {
    let ann = signal
        .annotations
        .as_ref()
        .ok_or_else(|| invalid("evaluation needs an annotated rhythmic signal"))?;
    if pred.len() != signal.len() {
        return Err(invalid("prediction and signal lengths differ"));
    }
    let dt = signal.dt;
    let h = cfg.horizon_steps;
    let start = (cfg.skip_s / dt).ceil() as usize;
    let end = signal.len().saturating_sub(h);
    if start + 2 >= end {
        return Err(invalid("evaluation window is empty"));
    }
    let window = &pred[start..end];
    let top = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let interval = ann.interval_s;
    let sep = (cfg.min_separation_frac * interval).max(2.0 * dt);
    let pred_peaks: Vec<f64> = detect_peaks(window, dt, cfg.min_height_rel * top, sep)?
        .into_iter()
        .map(|t| t + start as f64 * dt)
        .collect();
    let t_lo = start as f64 * dt;
    let t_hi = (end - 1) as f64 * dt;
    let target_peaks: Vec<f64> = ann
        .beats_s
        .iter()
        .map(|b| b - h as f64 * dt)
        .filter(|t| (t_lo..=t_hi).contains(t))
        .collect();
    let offsets = time_offset_ratio(&pred_peaks, &target_peaks, interval)?;
    let target = &signal.samples[start + h..end + h];
    let max_lag = ((0.5 * interval / dt).floor() as usize).max(1);
    let lag = xcorr_lag(window, target, max_lag)?;
    Ok(SampleMetrics {
        interval_s: interval,
        interval_errors: interval_errors(&pred_peaks, interval).ok(),
        offsets,
        lag_s: lag as f64 * dt,
        pred_peaks,
        target_peaks,
    })
}

/// Per-neuron spectra of the p-neurons under a given excitation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceMap {
    pub n: usize,
    pub dt: f64,
    pub fft_len: usize,
    /// Row-major `n × n` dominant frequency in Hz, DC excluded; 0 for a
    /// silent neuron.
    pub dominant_freq: Vec<f64>,
    /// Row-major `n × n` mean `|p|` after settling.
    pub mean_abs: Vec<f64>,
    /// Magnitude spectra, bins `0..=fft_len/2`, when requested.
    pub spectra: Option<Vec<Vec<f64>>>,
}

impl ResonanceMap {
    pub fn bin_freq(&self, bin: usize) -> f64 {
        bin as f64 / (self.fft_len as f64 * self.dt)
    }

    pub fn freq_bin(&self, hz: f64) -> usize {
        (hz * self.fft_len as f64 * self.dt).round() as usize
    }

    pub fn dominant(&self, i: usize, j: usize) -> f64 {
        self.dominant_freq[i * self.n + j]
    }

    /// Median dominant frequency over the rows in `rows`.
    pub fn median_over_rows(&self, rows: std::ops::Range<usize>) -> f64 {
        let mut v: Vec<f64> = rows
            .flat_map(|i| {
                self.dominant_freq[i * self.n..(i + 1) * self.n]
                    .iter()
                    .copied()
            })
            .collect();
        median(&mut v)
    }
}

pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Minimum number of post-settle steps accepted by [`resonance_map`].
pub const MIN_RESONANCE_STEPS: usize = 2048;

/// Drives the reservoir without bias noise, drops `settle_steps`, then
/// takes a Hann-windowed, mean-removed FFT of every p-neuron, zero-padded
/// to the next power of two.
pub fn resonance_map(
    model: &ReservoirModel,
    excitation: &[f64],
    settle_steps: usize,
    keep_spectra: bool,
) -> Result<ResonanceMap> {
    let len = excitation.len().saturating_sub(settle_steps);
    if len < MIN_RESONANCE_STEPS {
        return Err(invalid(format!(
            "excitation leaves {len} steps after settling, need {MIN_RESONANCE_STEPS}"
        )));
    }
    let quiet = model.with_noise(0.0)?;
    let cells = quiet.p_dim();
    let mut session = quiet.session(0);
    // neuron-major so each FFT input is contiguous
    let mut traces = vec![0.0; cells * len];
    for (t, &s) in excitation.iter().enumerate() {
        let p = session.advance(&quiet, s);
        if t >= settle_steps {
            let k = t - settle_steps;
            for (i, &v) in p.iter().enumerate() {
                traces[i * len + k] = v;
            }
        }
    }
    let fft_len = len.next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_len);
    let hann: Vec<f64> = (0..len)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (len - 1) as f64).cos())
        .collect();
    let dt = model.spec.dt;
    let per_neuron: Vec<(f64, f64, Vec<f64>)> = traces
        .par_chunks(len)
        .map(|x| {
            let mean = x.iter().sum::<f64>() / len as f64;
            let mean_abs = x.iter().map(|v| v.abs()).sum::<f64>() / len as f64;
            let mut buf: Vec<Complex<f64>> = x
                .iter()
                .zip(&hann)
                .map(|(v, w)| Complex::new((v - mean) * w, 0.0))
                .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
                .take(fft_len)
                .collect();
            fft.process(&mut buf);
            let mag: Vec<f64> = buf[..=fft_len / 2].iter().map(|z| z.norm()).collect();
            let (bin, peak) =
                mag.iter().enumerate().skip(1).fold(
                    (0, 0.0),
                    |acc, (b, &m)| if m > acc.1 { (b, m) } else { acc },
                );
            let dom = if peak > 0.0 {
                bin as f64 / (fft_len as f64 * dt)
            } else {
                0.0
            };
            (dom, mean_abs, if keep_spectra { mag } else { Vec::new() })
        })
        .collect();
    let n = model.spec.n;
    let mut dominant_freq = Vec::with_capacity(cells);
    let mut mean_abs = Vec::with_capacity(cells);
    let mut spectra = keep_spectra.then(|| Vec::with_capacity(cells));
    for (d, m, s) in per_neuron {
        dominant_freq.push(d);
        mean_abs.push(m);
        if let Some(sp) = spectra.as_mut() {
            sp.push(s);
        }
    }
    Ok(ResonanceMap {
        n,
        dt,
        fft_len,
        dominant_freq,
        mean_abs,
        spectra,
    })
}

/// Local maxima of `spectrum` (DC excluded) at least `min_rel` times its
/// largest non-DC value, as bins.
pub fn spectral_peaks(spectrum: &[f64], min_rel: f64) -> Vec<usize> {
    let top = spectrum.iter().skip(1).copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Vec::new();
    }
    (1..spectrum.len().saturating_sub(1))
        .filter(|&b| {
            spectrum[b] >= min_rel * top
                && spectrum[b] > spectrum[b - 1]
                && spectrum[b] >= spectrum[b + 1]
        })
        .collect()
}
