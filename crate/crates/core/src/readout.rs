//! Linear readout over the p-neurons, trained online by SGD against the
//! input shifted `horizon_steps` into the future.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::reservoir::{ReservoirModel, StateTrace};
use crate::rng::{derive_seed, seeded};
use crate::signals::Signal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub w_out: Vec<f64>,
    pub bias: f64,
}

impl Readout {
    pub fn zeros(dim: usize) -> Self {
        Self {
            w_out: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn new(w_out: Vec<f64>, bias: f64) -> Result<Self> {
        let r = Self { w_out, bias };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .w_out
            .iter()
            .chain([&self.bias])
            .any(|v| !v.is_finite())
        {
            return Err(Error::Numerical("readout has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.w_out.len()
    }

    /// `w_out · p + bias`.
    #[inline]
    pub fn predict(&self, p: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), self.w_out.len());
        self.w_out.iter().zip(p).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    /// Gradient of `(ŷ - y)²` with respect to `(w_out, bias)`.
    pub fn sample_gradient(&self, p: &[f64], y: f64) -> (Vec<f64>, f64) {
        let g = 2.0 * (self.predict(p) - y);
        (p.iter().map(|x| g * x).collect(), g)
    }

    /// One SGD update on a single sample; returns the pre-update squared error.
    #[inline]
    pub fn sgd_step(&mut self, p: &[f64], y: f64, lr: f64) -> f64 {
        let e = self.predict(p) - y;
        let g = lr * 2.0 * e;
        for (w, x) in self.w_out.iter_mut().zip(p) {
            *w -= g * x;
        }
        self.bias -= g;
        e * e
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Look-ahead in steps; 33 steps of 6 ms is 198 ms.
    pub horizon_steps: usize,
    /// Leading steps of each sample excluded from updates.
    pub warmup_steps: usize,
    /// Stop once an epoch improves the loss by less than this fraction.
    /// Zero disables early stopping.
    pub early_stop_rel: f64,
    pub shuffle_seed: u64,
    /// Base seed of the reservoir bias noise during training.
    pub noise_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 20,
            horizon_steps: 33,
            warmup_steps: 100,
            early_stop_rel: 1e-3,
            shuffle_seed: 0,
            noise_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.early_stop_rel.is_finite() && self.early_stop_rel >= 0.0) {
            return Err(invalid("early-stop threshold must be >= 0"));
        }
        Ok(())
    }
}

/// `target[t] = signal[t + horizon]`, for the `len - horizon` leading steps.
pub fn make_target(signal: &[f64], horizon_steps: usize) -> Result<Vec<f64>> {
    if horizon_steps >= signal.len() {
        return Err(invalid(format!(
            "horizon {horizon_steps} must be shorter than the signal ({})",
            signal.len()
        )));
    }
    Ok(signal[horizon_steps..].to_vec())
}

/// Free-function form of [`Readout::predict`].
pub fn predict(r: &Readout, p: &[f64]) -> f64 {
    r.predict(p)
}

/// One in-order pass over `trace[t]`, `t < target.len()`. Returns the
/// updated readout and the mean pre-update squared error.
pub fn sgd_epoch(
    r: &Readout,
    trace: &StateTrace,
    target: &[f64],
    lr: f64,
) -> Result<(Readout, f64)> {
    sgd_epoch_from(r, trace, target, lr, 0)
}

/// As [`sgd_epoch`], skipping the first `start` steps.
pub fn sgd_epoch_from(
    r: &Readout,
    trace: &StateTrace,
    target: &[f64],
    lr: f64,
    start: usize,
) -> Result<(Readout, f64)> {
    check_len("readout", trace.cells(), r.dim())?;
    if target.len() > trace.len() {
        return Err(invalid("target longer than trace"));
    }
    if start >= target.len() {
        return Err(invalid("no samples left after warm-up"));
    }
    let mut out = r.clone();
    let mut sse = 0.0;
    for (t, &y) in target.iter().enumerate().skip(start) {
        sse += out.sgd_step(trace.p_at(t), y, lr);
    }
    let mse = sse / (target.len() - start) as f64;
    if !mse.is_finite() {
        return Err(Error::Numerical(format!("training loss became {mse}")));
    }
    Ok((out, mse))
}

/// Runs the reservoir over one signal from rest while updating `r` in
/// place. Equivalent to `run` followed by [`sgd_epoch_from`] but without
/// storing the trace. Returns the sum of squared errors and the number of
/// updates.
pub fn train_on_signal(
    model: &ReservoirModel,
    r: &mut Readout,
    signal: &[f64],
    cfg: &TrainConfig,
    noise_seed: u64,
) -> Result<(f64, usize)> {
    check_len("readout", model.p_dim(), r.dim())?;
    let h = cfg.horizon_steps;
    if h >= signal.len() {
        return Err(invalid("horizon longer than sample"));
    }
    let mut session = model.session(noise_seed);
    let mut sse = 0.0;
    let mut count = 0;
    for t in 0..signal.len() - h {
        let p = session.advance(model, signal[t]);
        if t >= cfg.warmup_steps {
            sse += r.sgd_step(p, signal[t + h], cfg.learning_rate);
            count += 1;
        }
    }
    if !sse.is_finite() {
        return Err(Error::Numerical(format!("training loss became {sse}")));
    }
    Ok((sse, count))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub readout: Readout,
    /// Mean pre-update squared error, one entry per completed epoch.
    pub loss_curve: Vec<f64>,
    pub stopped_early: bool,
}

/// Noise seed of sample `sample` in epoch `epoch`.
pub fn training_noise_seed(cfg: &TrainConfig, epoch: usize, sample: usize) -> u64 {
    derive_seed(cfg.noise_seed, &[epoch as u64, sample as u64])
}

/// Sample visiting order of epoch `epoch`.
pub fn epoch_order(cfg: &TrainConfig, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(derive_seed(cfg.shuffle_seed, &[epoch as u64])));
    order
}

pub fn train(
    model: &ReservoirModel,
    signals: &[Signal],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_from(model, Readout::zeros(model.p_dim()), signals, cfg, 0)
}

/// Continues training from `readout`, numbering epochs from `first_epoch`
/// so a resumed run draws the same shuffles and noise as an uninterrupted one.
pub fn train_from(
    model: &ReservoirModel,
    readout: Readout,
    signals: &[Signal],
    cfg: &TrainConfig,
    first_epoch: usize,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if signals.is_empty() {
        return Err(invalid("training set is empty"));
    }
    let mut r = readout;
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut stopped_early = false;
    for epoch in first_epoch..first_epoch + cfg.epochs {
        let (mut sse, mut count) = (0.0, 0usize);
        for i in epoch_order(cfg, epoch, signals.len()) {
            let (s, c) = train_on_signal(
                model,
                &mut r,
                &signals[i].samples,
                cfg,
                training_noise_seed(cfg, epoch, i),
            )?;
            sse += s;
            count += c;
        }
        if count == 0 {
            return Err(invalid("every sample is shorter than warm-up plus horizon"));
        }
        let mse = sse / count as f64;
        log::info!("epoch {epoch}: mse {mse:.6e}");
        let prev = loss_curve.last().copied();
        loss_curve.push(mse);
        if let Some(prev) = prev {
            if cfg.early_stop_rel > 0.0 && prev > 0.0 && (prev - mse) / prev < cfg.early_stop_rel {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        readout: r,
        loss_curve,
        stopped_early,
    })
}

/// Readout output over a whole trace.
pub fn predict_trace(r: &Readout, trace: &StateTrace) -> Vec<f64> {
    (0..trace.len()).map(|t| r.predict(trace.p_at(t))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn target_shapes() {
        let s: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(make_target(&s, 0).unwrap(), s);
        let t = make_target(&s, 33).unwrap();
        assert_eq!(t.len(), 67);
        assert_eq!(t[0], 33.0);
        assert!(make_target(&s, 100).is_err());
    }

    #[test]
    fn predict_cases() {
        let p: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        assert_eq!(Readout::zeros(10).predict(&p), 0.0);
        let mut unit = Readout::zeros(10);
        unit.w_out[5] = 1.0;
        assert_eq!(unit.predict(&p), p[5]);
    }

    #[test]
    fn perfect_fit_is_fixed_point() {
        let trace = StateTrace::from_p(2, vec![1.0, 2.0, 3.0, -1.0], vec![0.0, 0.0]).unwrap();
        let r = Readout::new(vec![0.5, 0.25], 0.1).unwrap();
        let target: Vec<f64> = (0..2).map(|t| r.predict(trace.p_at(t))).collect();
        let (after, mse) = sgd_epoch(&r, &trace, &target, 0.01).unwrap();
        assert_eq!(after, r);
        assert_eq!(mse, 0.0);
    }

    #[test]
    fn single_step_by_hand() {
        // ŷ = 0.5*2 + 0.1 = 1.1, y = 0.6, e = 0.5, step = 0.1*2*0.5 = 0.1
        let trace = StateTrace::from_p(1, vec![2.0], vec![0.0]).unwrap();
        let r = Readout::new(vec![0.5], 0.1).unwrap();
        let (after, mse) = sgd_epoch(&r, &trace, &[0.6], 0.1).unwrap();
        assert!((mse - 0.25).abs() < 1e-15);
        assert!((after.w_out[0] - 0.3).abs() < 1e-15);
        assert!((after.bias - 0.0).abs() < 1e-15);
    }

    #[test]
    fn exact_linear_target_converges() {
        let mut rng = seeded(3);
        let len = 200;
        let p: Vec<f64> = (0..2 * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let trace = StateTrace::from_p(2, p, vec![0.0; len]).unwrap();
        let target: Vec<f64> = (0..len)
            .map(|t| 0.7 * trace.p_at(t)[0] - 0.3 * trace.p_at(t)[1] + 0.2)
            .collect();
        let mut r = Readout::zeros(2);
        let mut mse = f64::INFINITY;
        for _ in 0..500 {
            (r, mse) = sgd_epoch(&r, &trace, &target, 0.01).unwrap();
        }
        assert!(mse < 1e-8, "{mse}");
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let trace = StateTrace::from_p(1, vec![1e200, 1e200], vec![0.0; 2]).unwrap();
        let r = Readout::new(vec![1e200], 0.0).unwrap();
        assert!(matches!(
            sgd_epoch(&r, &trace, &[0.0, 0.0], 1.0),
            Err(Error::Numerical(_))
        ));
    }
}
