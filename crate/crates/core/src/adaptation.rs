//! Online adaptation while predicting: a global speed rescale driven by an
//! early/late synchronization count, and local damping changes driven by
//! per-neuron masking scores.

use std::collections::VecDeque;
use std::io::Write;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::fields::{DampingField, KBounds, SpeedField};
use crate::grid::GridSpec;
use crate::normalize::SoftmaxNormalizer;
use crate::readout::Readout;
use crate::reservoir::{ReservoirModel, StateTrace};
use crate::rng::NoiseSource;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncConfig {
    /// Steps between synchronization updates.
    pub update_step: usize,
    pub threshold: f64,
    pub delta_c: f64,
    /// Bound on the accumulated relative speed change.
    pub threshold_sum: f64,
    pub delta_early: f64,
    pub delta_late: f64,
    /// Normalizer time constant in steps.
    pub tau_softmax: f64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            update_step: 200,
            threshold: 100.0,
            delta_c: 0.02,
            threshold_sum: 0.10,
            delta_early: 1.0,
            delta_late: 1.0,
            tau_softmax: 500.0,
        }
    }
}

impl SyncConfig {
    pub fn validate(&self) -> Result<()> {
        if self.update_step < 2 {
            return Err(invalid("update_step must be >= 2"));
        }
        if !(self.delta_c.is_finite() && self.delta_c > 0.0 && self.delta_c < 1.0) {
            return Err(invalid(format!(
                "delta_c must lie in (0, 1), got {}",
                self.delta_c
            )));
        }
        if !(self.threshold_sum > 0.0 && self.threshold_sum < 1.0) {
            return Err(invalid(format!(
                "threshold_sum must lie in (0, 1), got {}",
                self.threshold_sum
            )));
        }
        if !(self.tau_softmax.is_finite() && self.tau_softmax > 0.0) {
            return Err(invalid("tau_softmax must be positive"));
        }
        if !(self.threshold.is_finite()
            && self.delta_early.is_finite()
            && self.delta_late.is_finite())
        {
            return Err(invalid("sync weights and threshold must be finite"));
        }
        Ok(())
    }
}

/// How masking scores are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Remove the neuron's term from the readout sum.
    #[default]
    Readout,
    /// Re-simulate the window with the neuron clamped to zero. Costs one
    /// reservoir run per neuron; meant for small grids.
    Resim,
}

/// Which way a helpful neuron moves its damping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DsSign {
    /// Helpful neurons get less damping, harmful ones more.
    #[default]
    BoostHelpful,
    DampHelpful,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DsConfig {
    pub n_select: usize,
    pub delta_k: f64,
    /// Steps between selections.
    pub window: usize,
    pub mask_mode: MaskMode,
    pub ds_sign: DsSign,
    pub k_bounds: KBounds,
}

impl Default for DsConfig {
    fn default() -> Self {
        Self {
            n_select: 40,
            delta_k: 0.002,
            window: 200,
            mask_mode: MaskMode::Readout,
            ds_sign: DsSign::BoostHelpful,
            k_bounds: KBounds::default(),
        }
    }
}

impl DsConfig {
    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        if self.n_select > spec.cells() {
            return Err(invalid(format!(
                "n_select {} exceeds the {} p-neurons",
                self.n_select,
                spec.cells()
            )));
        }
        if !(self.delta_k.is_finite() && self.delta_k > 0.0) {
            return Err(invalid("delta_k must be positive"));
        }
        if self.window < 2 {
            return Err(invalid("selection window must be >= 2"));
        }
        self.k_bounds.validate()
    }
}

/// Weighted early/late counts of one window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SyncErrors {
    pub early: f64,
    pub late: f64,
}

/// Early/late counting over normalized prediction and target. Step 0 only
/// seeds the slopes. The counters are cumulative and their running values
/// are summed into the errors at every step.
pub fn sync_errors(p_norm: &[f64], t_norm: &[f64], cfg: &SyncConfig) -> Result<SyncErrors> {
    check_len("normalized target", p_norm.len(), t_norm.len())?;
    if p_norm.len() < 2 {
        return Err(invalid("sync window needs at least two steps"));
    }
    let (mut i_early, mut i_late) = (0u64, 0u64);
    let mut out = SyncErrors::default();
    for t in 1..p_norm.len() {
        if t_norm[t] > p_norm[t].max(0.0) {
            let dt = t_norm[t] - t_norm[t - 1];
            let dp = p_norm[t] - p_norm[t - 1];
            if dt > 0.0 {
                if dp < 0.0 {
                    i_early += 1;
                }
            } else if dt < 0.0 && dp > 0.0 {
                i_late += 1;
            }
        }
        out.early += cfg.delta_early * i_early as f64;
        out.late += cfg.delta_late * i_late as f64;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CDecision {
    SpeedUp,
    SlowDown,
    /// The step would have pushed the accumulated scale past the bound.
    Hold,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CUpdate {
    pub field: SpeedField,
    pub decision: CDecision,
    /// Cells held at the Courant ceiling.
    pub clipped: usize,
}

/// Slack for the accumulated-scale bound, so that five steps of 0.02 land
/// on 0.10 whatever the rounding.
const ACCUM_SLACK: f64 = 1e-9;

/// Global speed rescale. A difference `early - late` below the threshold
/// speeds the field up by `1 + delta_c`, otherwise it slows by `1 - delta_c`.
/// A step is taken only while the accumulated scale is inside the bound and
/// stays inside it afterwards.
pub fn adapt_c(c: &SpeedField, errs: SyncErrors, cfg: &SyncConfig, c_ref: f64) -> CUpdate {
    let step = if errs.early - errs.late < cfg.threshold {
        cfg.delta_c
    } else {
        -cfg.delta_c
    };
    let accum = c.scale_accum;
    let next = accum + step;
    let inside = accum.abs() < cfg.threshold_sum - ACCUM_SLACK;
    if !inside || next.abs() > cfg.threshold_sum + ACCUM_SLACK {
        return CUpdate {
            field: c.clone(),
            decision: CDecision::Hold,
            clipped: 0,
        };
    }
    let (mut field, clipped) = c.scaled(1.0 + step, c_ref);
    field.scale_accum = next;
    if clipped > 0 {
        log::warn!("{clipped} speed cells clipped at the Courant ceiling {c_ref}");
    }
    CUpdate {
        field,
        decision: if step > 0.0 {
            CDecision::SpeedUp
        } else {
            CDecision::SlowDown
        },
        clipped,
    }
}

/// Masking scores from p snapshots and aligned targets:
/// `score[i] = mse(ŷ - w_i p_i) - mse(ŷ)`, expanded to
/// `w_i² ⟨p_i²⟩ - 2 w_i ⟨e p_i⟩` with `e = ŷ - y`. Positive means the
/// neuron helps.
pub fn masked_scores(ps: &[&[f64]], targets: &[f64], r: &Readout) -> Result<Vec<f64>> {
    check_len("window targets", ps.len(), targets.len())?;
    if ps.is_empty() {
        return Err(invalid("empty scoring window"));
    }
    let dim = r.dim();
    let mut p2 = vec![0.0; dim];
    let mut ep = vec![0.0; dim];
    for (p, &y) in ps.iter().zip(targets) {
        check_len("p snapshot", dim, p.len())?;
        let e = r.predict(p) - y;
        for i in 0..dim {
            p2[i] += p[i] * p[i];
            ep[i] += e * p[i];
        }
    }
    let len = ps.len() as f64;
    Ok((0..dim)
        .map(|i| {
            let w = r.w_out[i];
            if w == 0.0 {
                0.0
            } else {
                w * w * p2[i] / len - 2.0 * w * ep[i] / len
            }
        })
        .collect())
}

/// [`masked_scores`] over `window` of a recorded trace, with `target`
/// aligned to the trace.
pub fn contribution_scores(
    trace: &StateTrace,
    r: &Readout,
    target: &[f64],
    window: Range<usize>,
) -> Result<Vec<f64>> {
    if window.is_empty() || window.end > trace.len() || window.end > target.len() {
        return Err(invalid(format!(
            "scoring window {window:?} outside the trace"
        )));
    }
    let ps: Vec<&[f64]> = window.clone().map(|t| trace.p_at(t)).collect();
    masked_scores(&ps, &target[window], r)
}

/// Re-simulation scores: from `start_state`, replays `inputs` without noise,
/// once plainly and once per neuron with that p-neuron clamped to zero.
pub fn resim_scores(
    model: &ReservoirModel,
    r: &Readout,
    start_state: &[f64],
    inputs: &[f64],
    targets: &[f64],
) -> Result<Vec<f64>> {
    check_len("resim targets", inputs.len(), targets.len())?;
    check_len("resim state", model.state_dim(), start_state.len())?;
    if inputs.is_empty() {
        return Err(invalid("empty scoring window"));
    }
    let quiet = model.with_noise(0.0)?;
    let mse = |mask: Option<usize>| -> f64 {
        let mut x = start_state.to_vec();
        let mut noise = NoiseSource::new(0);
        let mut sse = 0.0;
        for (&s, &y) in inputs.iter().zip(targets) {
            x = quiet.step(&x, s, &mut noise);
            if let Some(i) = mask {
                x[i] = 0.0;
            }
            let e = r.predict(&x[..quiet.p_dim()]) - y;
            sse += e * e;
        }
        sse / inputs.len() as f64
    };
    let base = mse(None);
    Ok((0..model.p_dim())
        .into_par_iter()
        .map(|i| {
            if r.w_out[i] == 0.0 {
                0.0
            } else {
                mse(Some(i)) - base
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct KUpdate {
    pub field: DampingField,
    /// Flat indices of the neurons judged helpful, best first.
    pub helpful: Vec<usize>,
    /// Flat indices of the neurons judged harmful, worst last.
    pub harmful: Vec<usize>,
}

/// Ranks neurons by score (descending, ties by lower index) and moves the
/// damping of the o-neurons left of and below the `n_select` best and
/// worst. Each entry moves by exactly `delta_k` before clamping.
pub fn adapt_k(k: &DampingField, scores: &[f64], cfg: &DsConfig) -> Result<KUpdate> {
    let n = k.n();
    check_len("scores", n * n, scores.len())?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite masking score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let n_help = cfg.n_select.min(order.len());
    let n_harm = cfg.n_select.min(order.len() - n_help);
    let helpful = order[..n_help].to_vec();
    let harmful = order[order.len() - n_harm..].to_vec();

    let (help_delta, harm_delta) = match cfg.ds_sign {
        DsSign::BoostHelpful => (-cfg.delta_k, cfg.delta_k),
        DsSign::DampHelpful => (cfg.delta_k, -cfg.delta_k),
    };
    let mut field = k.clone();
    let b = cfg.k_bounds;
    let mut nudge = |idx: usize, delta: f64| {
        let (i, j) = (idx / n, idx % n);
        if j > 0 {
            let e = &mut field.kx[i * n + j - 1];
            *e = b.clamp(*e + delta);
        }
        if i > 0 {
            let e = &mut field.ky[(i - 1) * n + j];
            *e = b.clamp(*e + delta);
        }
    };
    for &idx in &helpful {
        nudge(idx, help_delta);
    }
    for &idx in &harmful {
        nudge(idx, harm_delta);
    }
    Ok(KUpdate {
        field,
        helpful,
        harmful,
    })
}

/// Which adaptation mechanisms run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptConfig {
    pub sync_enabled: bool,
    pub ds_enabled: bool,
    pub sync: SyncConfig,
    pub ds: DsConfig,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            sync_enabled: true,
            ds_enabled: true,
            sync: SyncConfig::default(),
            ds: DsConfig::default(),
        }
    }
}

impl AdaptConfig {
    pub fn disabled() -> Self {
        Self {
            sync_enabled: false,
            ds_enabled: false,
            ..Self::default()
        }
    }

    /// Checks the settings of the enabled mechanisms.
    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        if self.sync_enabled {
            self.sync.validate()?;
        }
        if self.ds_enabled {
            self.ds.validate(spec)?;
        }
        Ok(())
    }
}

/// One adaptation event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    /// Number of input steps consumed when the event fired.
    pub step: usize,
    /// Prediction times scored in this window.
    pub start: usize,
    pub end: usize,
    pub eps_early: Option<f64>,
    pub eps_late: Option<f64>,
    pub c_decision: Option<CDecision>,
    /// Accumulated relative speed change after this window.
    pub scale_accum: f64,
    pub clipped: usize,
    pub boosted: Vec<usize>,
    pub damped: Vec<usize>,
    pub window_mse: Option<f64>,
    pub degenerate_steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptationLog {
    pub windows: Vec<WindowRecord>,
}

impl AdaptationLog {
    /// One JSON object per window, newline separated.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for rec in &self.windows {
            serde_json::to_writer(&mut w, rec).map_err(|e| Error::Format(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Self> {
        let windows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::Format(e.to_string())))
            .collect::<Result<_>>()?;
        Ok(Self { windows })
    }
}

#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    /// Readout output after each input step.
    pub predictions: Vec<f64>,
    pub log: AdaptationLog,
    pub model: ReservoirModel,
}

/// Streams `signal` through the reservoir while adapting it.
///
/// The prediction made after input `t` targets input `t + horizon`, so at
/// step `T` only predictions `t < T - horizon` can be scored. Each event
/// scores the predictions made since the previous one. The normalizers run
/// continuously across windows. `W` is re-derived after every field change
/// and the reservoir state carries over.
pub fn adaptive_run(
    model: &ReservoirModel,
    readout: &Readout,
    signal: &[f64],
    horizon_steps: usize,
    noise_seed: u64,
    cfg: &AdaptConfig,
) -> Result<AdaptiveRun> {
    check_len("readout", model.p_dim(), readout.dim())?;
    cfg.validate(&model.spec)?;
    let h = horizon_steps;
    if (cfg.sync_enabled || cfg.ds_enabled) && model.speed_field().is_none() {
        return Err(invalid("adaptation needs a wave reservoir"));
    }

    let mut model = model.clone();
    let mut session = model.session(noise_seed);
    let mut predictions = Vec::with_capacity(signal.len());
    let mut log = AdaptationLog::default();

    let mut p_norm = SoftmaxNormalizer::new(cfg.sync.tau_softmax)?;
    let mut t_norm = SoftmaxNormalizer::new(cfg.sync.tau_softmax)?;
    let mut last_norm: Option<(f64, f64)> = None;
    let mut sync_from = 0usize;

    // p snapshots of not-yet-scored predictions, oldest at `ds_from`
    let mut p_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut ds_from = 0usize;
    let mut resim_start: Option<Vec<f64>> = None;
    let resim = cfg.ds_enabled && cfg.ds.mask_mode == MaskMode::Resim;

    for (t, &s) in signal.iter().enumerate() {
        if resim && t == ds_from {
            resim_start = Some(session.state().to_vec());
        }
        let p = session.advance(&model, s);
        predictions.push(readout.predict(p));
        if cfg.ds_enabled && cfg.ds.mask_mode == MaskMode::Readout {
            p_hist.push_back(p.to_vec());
        }
        let consumed = t + 1;
        let sync_due = cfg.sync_enabled && consumed % cfg.sync.update_step == 0;
        let ds_due = cfg.ds_enabled && consumed % cfg.ds.window == 0;
        if !(sync_due || ds_due) {
            continue;
        }
        let mut rec = WindowRecord {
            step: consumed,
            start: 0,
            end: consumed.saturating_sub(h),
            eps_early: None,
            eps_late: None,
            c_decision: None,
            scale_accum: model.speed_field().map_or(0.0, |c| c.scale_accum),
            clipped: 0,
            boosted: Vec::new(),
            damped: Vec::new(),
            window_mse: None,
            degenerate_steps: 0,
        };
        let mut c = model.speed_field().cloned();
        let mut k = model.damping_field().cloned();

        let mut synced = false;
        if sync_due && rec.end > sync_from {
            synced = true;
            let range = sync_from..rec.end;
            let pn = p_norm.normalize(&predictions[range.clone()]);
            let tn = t_norm.normalize(&signal[range.start + h..range.end + h]);
            rec.degenerate_steps = pn.degenerate_steps + tn.degenerate_steps;
            let mut pv = pn.values;
            let mut tv = tn.values;
            if let Some((lp, lt)) = last_norm {
                pv.insert(0, lp);
                tv.insert(0, lt);
            }
            last_norm = Some((*pv.last().unwrap(), *tv.last().unwrap()));
            if pv.len() >= 2 {
                let errs = sync_errors(&pv, &tv, &cfg.sync)?;
                let upd = adapt_c(c.as_ref().unwrap(), errs, &cfg.sync, model.spec.c_ref);
                rec.eps_early = Some(errs.early);
                rec.eps_late = Some(errs.late);
                rec.c_decision = Some(upd.decision);
                rec.clipped = upd.clipped;
                rec.scale_accum = upd.field.scale_accum;
                c = Some(upd.field);
            }
            rec.start = sync_from;
            rec.window_mse = Some(window_mse(
                &predictions[range.clone()],
                &signal[range.start + h..range.end + h],
            ));
            sync_from = rec.end;
        }

        if ds_due && rec.end > ds_from {
            let range = ds_from..rec.end;
            let targets = &signal[range.start + h..range.end + h];
            let scores = match cfg.ds.mask_mode {
                MaskMode::Readout => {
                    let ps: Vec<&[f64]> =
                        p_hist.iter().take(range.len()).map(Vec::as_slice).collect();
                    masked_scores(&ps, targets, readout)?
                }
                MaskMode::Resim => {
                    let start = resim_start.take().expect("window start state recorded");
                    resim_scores(&model, readout, &start, &signal[range.clone()], targets)?
                }
            };
            let upd = adapt_k(k.as_ref().unwrap(), &scores, &cfg.ds)?;
            rec.boosted = upd.helpful;
            rec.damped = upd.harmful;
            if cfg.ds.ds_sign == DsSign::DampHelpful {
                std::mem::swap(&mut rec.boosted, &mut rec.damped);
            }
            k = Some(upd.field);
            if !synced {
                rec.start = range.start;
                rec.window_mse = Some(window_mse(&predictions[range.clone()], targets));
            }
            p_hist.drain(..range.len());
            ds_from = rec.end;
        }

        if let (Some(c), Some(k)) = (c, k) {
            if Some(&c) != model.speed_field() || Some(&k) != model.damping_field() {
                model = model.with_fields(c, k)?;
            }
        }
        log.windows.push(rec);
    }
    Ok(AdaptiveRun {
        predictions,
        log,
        model,
    })
}

fn window_mse(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter()
        .zip(target)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / pred.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{init_damping_field, init_speed_field};
    use crate::grid::GridSpec;

    fn spec(n: usize) -> GridSpec {
        GridSpec::new(n, 0.006, 300.0).unwrap()
    }

    #[test]
    fn identical_series_have_no_errors() {
        let x: Vec<f64> = (0..300).map(|t| (t as f64 * 0.05).sin()).collect();
        let e = sync_errors(&x, &x, &SyncConfig::default()).unwrap();
        assert_eq!((e.early, e.late), (0.0, 0.0));
    }

    #[test]
    fn counters_are_cumulative() {
        // t=1: target rising above a falling prediction, early counter 1
        // t=2: no event, but the counter is summed again
        let t_norm = [0.0, 1.0, 1.0];
        let p_norm = [0.0, -0.5, -0.5];
        let e = sync_errors(&p_norm, &t_norm, &SyncConfig::default()).unwrap();
        assert_eq!(e.early, 2.0);
        assert_eq!(e.late, 0.0);
    }

    #[test]
    fn zero_errors_speed_up() {
        let s = spec(4);
        let c = SpeedField::uniform(&s, 100.0).unwrap();
        let u = adapt_c(&c, SyncErrors::default(), &SyncConfig::default(), 300.0);
        assert_eq!(u.decision, CDecision::SpeedUp);
        assert!(u.field.values().iter().all(|&v| (v - 102.0).abs() < 1e-12));
        assert!((u.field.scale_accum - 0.02).abs() < 1e-15);
    }

    #[test]
    fn strongly_early_slows_down() {
        let s = spec(4);
        let c = SpeedField::uniform(&s, 100.0).unwrap();
        let errs = SyncErrors {
            early: 500.0,
            late: 0.0,
        };
        let u = adapt_c(&c, errs, &SyncConfig::default(), 300.0);
        assert_eq!(u.decision, CDecision::SlowDown);
        assert!(u.field.values().iter().all(|&v| (v - 98.0).abs() < 1e-12));
    }

    #[test]
    fn sixth_speed_up_is_held() {
        let s = spec(4);
        let cfg = SyncConfig::default();
        let mut c = SpeedField::uniform(&s, 100.0).unwrap();
        for _ in 0..5 {
            c = adapt_c(&c, SyncErrors::default(), &cfg, 300.0).field;
        }
        assert!((c.scale_accum - 0.10).abs() < 1e-12);
        let u = adapt_c(&c, SyncErrors::default(), &cfg, 300.0);
        assert_eq!(u.decision, CDecision::Hold);
        assert_eq!(u.field, c);
    }

    #[test]
    fn speed_up_clips_at_ceiling() {
        let s = spec(2);
        let c = SpeedField::from_values(&s, vec![300.0, 200.0, 299.0, 100.0]).unwrap();
        let u = adapt_c(&c, SyncErrors::default(), &SyncConfig::default(), 300.0);
        assert_eq!(u.clipped, 2);
        assert_eq!(u.field.values()[0], 300.0);
        assert!((u.field.values()[1] - 204.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_neuron_scores_zero() {
        let trace =
            StateTrace::from_p(2, vec![0.3, 0.9, -0.2, 0.4, 0.5, 0.1], vec![0.0; 3]).unwrap();
        let r = Readout::new(vec![0.0, 1.0], 0.0).unwrap();
        let s = contribution_scores(&trace, &r, &[0.1, 0.2, 0.3], 0..3).unwrap();
        assert_eq!(s[0], 0.0);
        assert!(contribution_scores(&trace, &r, &[0.1, 0.2, 0.3], 1..1).is_err());
    }

    #[test]
    fn helpful_neuron_at_two_three() {
        let s = spec(6);
        let k = init_damping_field(&s, 0.05, &KBounds::default()).unwrap();
        let mut scores = vec![0.0; 36];
        scores[2 * 6 + 3] = 1.0;
        let cfg = DsConfig {
            n_select: 1,
            ..DsConfig::default()
        };
        let u = adapt_k(&k, &scores, &cfg).unwrap();
        assert_eq!(u.helpful, vec![15]);
        assert!((u.field.kx_at(2, 2) - 0.048).abs() < 1e-15);
        assert!((u.field.ky_at(1, 3) - 0.048).abs() < 1e-15);
    }

    #[test]
    fn corner_neuron_writes_nothing() {
        let s = spec(3);
        let k = init_damping_field(&s, 0.05, &KBounds::default()).unwrap();
        let mut scores = vec![0.0; 9];
        scores[0] = 1.0;
        scores[1] = -1.0;
        let cfg = DsConfig {
            n_select: 1,
            ..DsConfig::default()
        };
        let u = adapt_k(&k, &scores, &cfg).unwrap();
        assert_eq!((u.helpful[0], u.harmful[0]), (0, 1));
        // only (0,1)'s left neighbour moves
        let changed: Vec<usize> = (0..9).filter(|&i| u.field.kx[i] != k.kx[i]).collect();
        assert_eq!(changed, vec![0]);
        assert!(u.field.ky == k.ky);
    }

    #[test]
    fn equal_scores_select_prefix_and_suffix() {
        let s = spec(4);
        let k = init_damping_field(&s, 0.0, &KBounds::default()).unwrap();
        let cfg = DsConfig {
            n_select: 3,
            ..DsConfig::default()
        };
        let u = adapt_k(&k, &[0.5; 16], &cfg).unwrap();
        assert_eq!(u.helpful, vec![0, 1, 2]);
        assert_eq!(u.harmful, vec![13, 14, 15]);
    }

    #[test]
    fn no_adaptation_matches_plain_run() {
        let s = spec(5);
        let c = init_speed_field(&s, 300.0, -50.0, 0.8, 1).unwrap();
        let k = init_damping_field(&s, 0.0, &KBounds::default()).unwrap();
        let params = crate::reservoir::ReservoirParams::default();
        let m = crate::reservoir::init_reservoir(&s, c, k, &params, 3).unwrap();
        let r = Readout::new((0..25).map(|i| (i as f64 * 0.37).sin()).collect(), 0.1).unwrap();
        let signal: Vec<f64> = (0..600).map(|t| ((t as f64) * 0.05).sin().abs()).collect();
        let out = adaptive_run(&m, &r, &signal, 33, 9, &AdaptConfig::disabled()).unwrap();
        let trace = crate::reservoir::run(&m, &signal, Default::default(), 9).unwrap();
        assert_eq!(out.predictions, crate::readout::predict_trace(&r, &trace));
        assert!(out.log.windows.is_empty());
    }

    #[test]
    fn thirty_seconds_give_twenty_five_windows() {
        let s = spec(4);
        let c = init_speed_field(&s, 300.0, -60.0, 0.8, 1).unwrap();
        let k = init_damping_field(&s, 0.0, &KBounds::default()).unwrap();
        let params = crate::reservoir::ReservoirParams::default();
        let m = crate::reservoir::init_reservoir(&s, c, k, &params, 3).unwrap();
        let r = Readout::new(vec![0.1; 16], 0.0).unwrap();
        let sig = crate::signals::gen_beat_signal(0.5, 30.0, 0.006, 0.06, 0.1).unwrap();
        let cfg = AdaptConfig {
            ds: DsConfig {
                n_select: 4,
                ..DsConfig::default()
            },
            ..AdaptConfig::default()
        };
        let out = adaptive_run(&m, &r, &sig.samples, 33, 0, &cfg).unwrap();
        assert_eq!(out.log.windows.len(), 25);
        assert!(out
            .log
            .windows
            .iter()
            .all(|w| w.scale_accum.abs() <= cfg.sync.threshold_sum + 1e-9));
        let mut buf = Vec::new();
        out.log.write_jsonl(&mut buf).unwrap();
        let back = AdaptationLog::read_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.windows.len(), 25);
    }
}
