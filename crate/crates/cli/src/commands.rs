//! The subcommands, callable in-process. Each takes a resolved
//! [`ExperimentConfig`] and an output directory and writes its results
//! there next to the resolved config.

use std::collections::BTreeMap;
use std::path::Path;

use beatres::adaptation::{adaptive_run, AdaptConfig};
use beatres::eval::{
    evaluate_prediction, random_reservoir, resonance_map, spectral_peaks, SampleMetrics,
};
use beatres::persist::{ModelFile, Provenance};
use beatres::readout::{train_from, Readout};
use beatres::reservoir::ReservoirModel;
use beatres::rng::derive_seed;
use beatres::signals::{gen_beat_signal, gen_dataset, test_suite, Signal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{tool_version, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::io::{self, JsonlWriter};

pub const MODEL_FILE: &str = "model.json";
pub const LOSS_CURVE: &str = "loss_curve.csv";
pub const METRICS: &str = "metrics.jsonl";

/// Tag separating evaluation noise streams from training ones.
const EVAL_NOISE_TAG: u64 = u64::MAX;

/// Bias-noise seed for evaluating test sample `i`; shared by every variant
/// of that sample so paired runs differ only in what is being compared.
pub fn eval_noise_seed(cfg: &ExperimentConfig, i: usize) -> u64 {
    derive_seed(cfg.seeds.noise_seed, &[EVAL_NOISE_TAG, i as u64])
}

fn provenance(cfg: &ExperimentConfig, epochs_trained: usize, loss_curve: Vec<f64>) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        tool_version: tool_version(),
        seeds: seed_map(cfg),
        epochs_trained,
        loss_curve,
    }
}

/// Writes the training dataset, or the fixed test suite when `suite` is set.
pub fn cmd_gen(cfg: &ExperimentConfig, out: &Path, suite: bool) -> CliResult<io::Manifest> {
    io::write_run_info(out, if suite { "gen --suite" } else { "gen" }, cfg)?;
    if suite {
        let signals = test_suite(cfg.grid.dt)?;
        let entries: Vec<_> = signals.iter().map(|s| (None, s)).collect();
        return io::write_signal_dir(out, &entries, None, cfg);
    }
    let ds = gen_dataset(&cfg.dataset)?;
    let entries: Vec<_> = ds
        .samples
        .iter()
        .map(|s| (Some(s.kind.clone()), &s.signal))
        .collect();
    io::write_signal_dir(out, &entries, Some(&ds.config), cfg)
}

fn training_signals(cfg: &ExperimentConfig, data: Option<&Path>) -> CliResult<Vec<Signal>> {
    match data {
        Some(dir) => io::read_signal_dir(dir),
        None => Ok(gen_dataset(&cfg.dataset)?
            .samples
            .into_iter()
            .map(|s| s.signal)
            .collect()),
    }
}

fn test_signals(cfg: &ExperimentConfig, tests: Option<&Path>) -> CliResult<Vec<Signal>> {
    let signals = match tests {
        Some(dir) => io::read_signal_dir(dir)?,
        None => test_suite(cfg.grid.dt)?,
    };
    if let Some(bad) = signals.iter().position(|s| s.annotations.is_none()) {
        return Err(CliError::Config(format!(
            "test sample {bad} has no beat annotations"
        )));
    }
    Ok(signals)
}

fn write_loss_curve(path: &Path, first_epoch: usize, curve: &[f64]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(["epoch", "mse"])?;
    for (i, mse) in curve.iter().enumerate() {
        w.serialize((first_epoch + i, mse))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Trains a readout for `model`, optionally continuing from `start`.
fn train_and_save(
    cfg: &ExperimentConfig,
    model: &ReservoirModel,
    start: Option<ModelFile>,
    signals: &[Signal],
    out: &Path,
) -> CliResult<ModelFile> {
    let (readout, first_epoch, mut curve) = match start {
        Some(mf) => (
            mf.readout,
            mf.provenance.epochs_trained,
            mf.provenance.loss_curve,
        ),
        None => (Readout::zeros(model.p_dim()), 0, Vec::new()),
    };
    let outcome = train_from(model, readout, signals, &cfg.train, first_epoch)?;
    write_loss_curve(&out.join(LOSS_CURVE), first_epoch, &outcome.loss_curve)?;
    curve.extend_from_slice(&outcome.loss_curve);
    let epochs = first_epoch + outcome.loss_curve.len();
    let mf = ModelFile::new(
        model,
        &outcome.readout,
        cfg.train.horizon_steps,
        provenance(cfg, epochs, curve),
    );
    mf.save(&out.join(MODEL_FILE))?;
    Ok(mf)
}

/// Trains the wave reservoir. With `resume`, the reservoir and readout come
/// from that model file and training continues its epoch count.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    data: Option<&Path>,
    out: &Path,
    resume: Option<&Path>,
) -> CliResult<ModelFile> {
    io::write_run_info(out, "train", cfg)?;
    let signals = training_signals(cfg, data)?;
    let (model, start) = match resume {
        Some(path) => {
            let mf = ModelFile::load(path)?;
            if mf.horizon_steps != cfg.train.horizon_steps {
                return Err(CliError::Config(format!(
                    "model was trained with horizon {} steps, config says {}",
                    mf.horizon_steps, cfg.train.horizon_steps
                )));
            }
            (mf.to_model()?.0, Some(mf))
        }
        None => (cfg.build_model()?, None),
    };
    train_and_save(cfg, &model, start, &signals, out)
}

/// Which adaptation mechanisms an evaluation runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    NoAdapt,
    /// Whatever the config's `adapt` table enables.
    Adapt,
    SyncOnly,
    DsOnly,
}

impl EvalMode {
    pub fn adapt_config(self, base: &AdaptConfig) -> Option<AdaptConfig> {
        let (sync, ds) = match self {
            Self::NoAdapt => return None,
            Self::Adapt => (base.sync_enabled, base.ds_enabled),
            Self::SyncOnly => (true, false),
            Self::DsOnly => (false, true),
        };
        Some(AdaptConfig {
            sync_enabled: sync,
            ds_enabled: ds,
            ..base.clone()
        })
    }
}

/// One line of `metrics.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub config_hash: String,
    pub tool_version: String,
    pub sample: usize,
    /// `pre` (frozen reservoir) or `post` (adapting).
    pub phase: String,
    pub sync_enabled: bool,
    pub ds_enabled: bool,
    /// Adaptation windows processed; 0 for `pre`.
    pub windows: usize,
    /// Net relative change applied to `c` by synchronization.
    pub c_scale_accum: f64,
    #[serde(flatten)]
    pub metrics: SampleMetrics,
}

/// Per-sample outcome of [`evaluate_model`].
pub struct SampleEval {
    pub pre: SampleMetrics,
    pub post: Option<(SampleMetrics, beatres::adaptation::AdaptiveRun)>,
    pub pre_predictions: Vec<f64>,
}

/// Runs every test signal without adaptation and, when `adapt` is given,
/// again with it from the same noise stream. Samples run in parallel.
pub fn evaluate_model(
    cfg: &ExperimentConfig,
    model: &ReservoirModel,
    readout: &Readout,
    signals: &[Signal],
    adapt: Option<&AdaptConfig>,
) -> CliResult<Vec<SampleEval>> {
    let h = cfg.train.horizon_steps;
    signals
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let seed = eval_noise_seed(cfg, i);
            let plain = adaptive_run(
                model,
                readout,
                &s.samples,
                h,
                seed,
                &AdaptConfig::disabled(),
            )?;
            let pre = evaluate_prediction(&plain.predictions, s, &cfg.eval)?;
            let post = match adapt {
                Some(a) => {
                    let run = adaptive_run(model, readout, &s.samples, h, seed, a)?;
                    Some((evaluate_prediction(&run.predictions, s, &cfg.eval)?, run))
                }
                None => None,
            };
            Ok(SampleEval {
                pre,
                post,
                pre_predictions: plain.predictions,
            })
        })
        .collect::<beatres::Result<Vec<_>>>()
        .map_err(CliError::from)
}

fn load_model(path: &Path) -> CliResult<(ModelFile, ReservoirModel, Readout)> {
    let mf = ModelFile::load(path)?;
    let (model, readout) = mf.to_model()?;
    Ok((mf, model, readout))
}

fn check_horizon(cfg: &ExperimentConfig, mf: &ModelFile) -> CliResult<()> {
    if mf.horizon_steps != cfg.train.horizon_steps {
        return Err(CliError::Config(format!(
            "model predicts {} steps ahead, config horizon is {}",
            mf.horizon_steps, cfg.train.horizon_steps
        )));
    }
    Ok(())
}

/// Scores a model on the test signals, writing `metrics.jsonl`, prediction
/// CSVs and, for adapting runs, one adaptation log per sample.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    model_path: &Path,
    tests: Option<&Path>,
    out: &Path,
    mode: EvalMode,
) -> CliResult<Vec<EvalRecord>> {
    io::write_run_info(out, "eval", cfg)?;
    let (mf, model, readout) = load_model(model_path)?;
    check_horizon(cfg, &mf)?;
    let signals = test_signals(cfg, tests)?;
    let adapt = mode.adapt_config(&cfg.adapt);
    let results = evaluate_model(cfg, &model, &readout, &signals, adapt.as_ref())?;
    let record = |i: usize,
                  phase: &str,
                  metrics: &SampleMetrics,
                  a: Option<&AdaptConfig>,
                  windows: usize,
                  accum: f64| EvalRecord {
        config_hash: cfg.hash(),
        tool_version: tool_version(),
        sample: i,
        phase: phase.to_string(),
        sync_enabled: a.is_some_and(|a| a.sync_enabled),
        ds_enabled: a.is_some_and(|a| a.ds_enabled),
        windows,
        c_scale_accum: accum,
        metrics: metrics.clone(),
    };
    let mut records = Vec::new();
    let mut w = JsonlWriter::create(&out.join(METRICS))?;
    for (i, (r, s)) in results.iter().zip(&signals).enumerate() {
        let pre = record(i, "pre", &r.pre, None, 0, 0.0);
        w.write(&pre)?;
        records.push(pre);
        io::write_series_csv(
            &out.join(format!("pred_pre_{i:02}.csv")),
            s.dt,
            &r.pre_predictions,
        )?;
        if let Some((metrics, run)) = &r.post {
            let accum = run.model.speed_field().map_or(0.0, |c| c.scale_accum);
            let post = record(
                i,
                "post",
                metrics,
                adapt.as_ref(),
                run.log.windows.len(),
                accum,
            );
            w.write(&post)?;
            records.push(post);
            io::write_series_csv(
                &out.join(format!("pred_post_{i:02}.csv")),
                s.dt,
                &run.predictions,
            )?;
            let log_path = out.join(format!("adapt_log_{i:02}.jsonl"));
            let file = std::fs::File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?;
            run.log.write_jsonl(std::io::BufWriter::new(file))?;
        }
    }
    w.finish()?;
    Ok(records)
}

/// One line of the sweep output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub config_hash: String,
    pub tool_version: String,
    pub sample: usize,
    pub interval_s: f64,
    pub delta_c: f64,
    /// Cells held at the Courant limit after scaling.
    pub clipped_cells: usize,
    pub base_mean_offset: f64,
    pub mean_offset: f64,
    /// `mean_offset - base_mean_offset`; positive means peaks moved earlier.
    pub offset_shift: f64,
    pub shift_s: f64,
}

/// Scales the whole speed field by `1 + δ_c` for each delta and records how
/// the mean time offset moves relative to the unscaled model.
pub fn sweep_c(
    cfg: &ExperimentConfig,
    model: &ReservoirModel,
    readout: &Readout,
    signals: &[Signal],
    deltas: &[f64],
) -> CliResult<Vec<SweepRecord>> {
    let (c, k) = match (model.speed_field(), model.damping_field()) {
        (Some(c), Some(k)) => (c.clone(), k.clone()),
        _ => {
            return Err(CliError::Config(
                "the speed sweep needs a wave reservoir".into(),
            ))
        }
    };
    if let Some(d) = deltas.iter().find(|d| !(d.is_finite() && **d > -1.0)) {
        return Err(CliError::Config(format!(
            "delta_c must be finite and above -1, got {d}"
        )));
    }
    let h = cfg.train.horizon_steps;
    let base = evaluate_model(cfg, model, readout, signals, None)?;
    let jobs: Vec<(usize, f64)> = (0..signals.len())
        .flat_map(|i| deltas.iter().map(move |&d| (i, d)))
        .collect();
    jobs.par_iter()
        .map(|&(i, d)| {
            let (scaled, clipped) = c.scaled(1.0 + d, model.spec.c_ref);
            let m = model.with_fields(scaled, k.clone())?;
            let s = &signals[i];
            let run = adaptive_run(
                &m,
                readout,
                &s.samples,
                h,
                eval_noise_seed(cfg, i),
                &AdaptConfig::disabled(),
            )?;
            let metrics = evaluate_prediction(&run.predictions, s, &cfg.eval)?;
            let base_mean = base[i].pre.offsets.mean;
            let shift = metrics.offsets.mean - base_mean;
            Ok(SweepRecord {
                config_hash: cfg.hash(),
                tool_version: tool_version(),
                sample: i,
                interval_s: metrics.interval_s,
                delta_c: d,
                clipped_cells: clipped,
                base_mean_offset: base_mean,
                mean_offset: metrics.offsets.mean,
                offset_shift: shift,
                shift_s: shift * metrics.interval_s,
            })
        })
        .collect::<beatres::Result<Vec<_>>>()
        .map_err(CliError::from)
}

pub fn cmd_sweep_c(
    cfg: &ExperimentConfig,
    model_path: &Path,
    tests: Option<&Path>,
    deltas: &[f64],
    out: &Path,
) -> CliResult<Vec<SweepRecord>> {
    io::write_run_info(out, "sweep-c", cfg)?;
    let (mf, model, readout) = load_model(model_path)?;
    check_horizon(cfg, &mf)?;
    let signals = test_signals(cfg, tests)?;
    let records = sweep_c(cfg, &model, &readout, &signals, deltas)?;
    let mut w = JsonlWriter::create(&out.join(METRICS))?;
    for r in &records {
        w.write(r)?;
    }
    w.finish()?;
    Ok(records)
}

/// Input used for a spectra run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Excitation {
    /// A single unit sample at step 0.
    Impulse,
    /// Sum of Hann pulse trains, one per frequency, all with a beat at 0.
    Trains { freqs_hz: Vec<f64> },
}

/// Parses `"1:2"` style ratios into multipliers of the base frequency.
pub fn parse_ratio(ratio: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<f64> = ratio
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("ratio `{ratio}` is not of the form a:b[:c...]")))?;
    if parts.len() < 2 || parts.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(CliError::Config(format!(
            "ratio `{ratio}` needs at least two positive terms"
        )));
    }
    Ok(parts.iter().map(|p| p / parts[0]).collect())
}

pub fn excitation_series(cfg: &ExperimentConfig, excitation: &Excitation) -> CliResult<Vec<f64>> {
    let dt = cfg.grid.dt;
    let len = (cfg.spectra.duration_s / dt).round() as usize;
    match excitation {
        Excitation::Impulse => {
            let mut x = vec![0.0; len];
            if let Some(first) = x.first_mut() {
                *first = 1.0;
            }
            Ok(x)
        }
        Excitation::Trains { freqs_hz } => {
            if freqs_hz.is_empty() {
                return Err(CliError::Config("no excitation frequencies given".into()));
            }
            let mut x = vec![0.0; len];
            for &f in freqs_hz {
                if !(f.is_finite() && f > 0.0) {
                    return Err(CliError::Config(format!(
                        "frequency {f} Hz must be positive"
                    )));
                }
                let train = gen_beat_signal(
                    1.0 / f,
                    cfg.spectra.duration_s,
                    dt,
                    cfg.dataset.pulse_width_s,
                    0.0,
                )?;
                x.iter_mut().zip(&train.samples).for_each(|(a, b)| *a += b);
            }
            Ok(x)
        }
    }
}

/// Summary written to `spectra_summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectraSummary {
    pub config_hash: String,
    pub tool_version: String,
    pub excitation: Excitation,
    pub fft_len: usize,
    pub bin_hz: f64,
    /// Median dominant frequency of the first and last quarter of rows.
    pub fast_quarter_median_hz: f64,
    pub slow_quarter_median_hz: f64,
    pub slow_quarter_max_hz: f64,
    /// Row-wise median dominant frequency, fast end first.
    pub row_median_hz: Vec<f64>,
    /// For trains: fraction of fast-quarter neurons that show a spectral
    /// peak within one bin of every input frequency.
    pub fast_quarter_detection: Option<f64>,
}

/// True when some peak of `spectrum` lies within one bin of `bin`.
pub fn has_peak_near(peaks: &[usize], bin: usize) -> bool {
    peaks.iter().any(|&p| p.abs_diff(bin) <= 1)
}

pub fn spectra(
    cfg: &ExperimentConfig,
    model: &ReservoirModel,
    excitation: &Excitation,
) -> CliResult<(SpectraSummary, beatres::eval::ResonanceMap)> {
    let x = excitation_series(cfg, excitation)?;
    let map = resonance_map(model, &x, cfg.spectra.settle_steps, true)?;
    let n = map.n;
    let quarter = (n / 4).max(1);
    let slow = n - quarter..n;
    let slow_max = slow
        .clone()
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| map.dominant(i, j))
        .fold(0.0, f64::max);
    let detection = match excitation {
        Excitation::Impulse => None,
        Excitation::Trains { freqs_hz } => {
            let spectra = map.spectra.as_ref().expect("spectra were requested");
            let bins: Vec<usize> = freqs_hz.iter().map(|&f| map.freq_bin(f)).collect();
            let hits = spectra[..quarter * n]
                .iter()
                .filter(|s| {
                    let peaks = spectral_peaks(s, cfg.spectra.min_peak_rel);
                    bins.iter().all(|&b| has_peak_near(&peaks, b))
                })
                .count();
            Some(hits as f64 / (quarter * n) as f64)
        }
    };
    let summary = SpectraSummary {
        config_hash: cfg.hash(),
        tool_version: tool_version(),
        excitation: excitation.clone(),
        fft_len: map.fft_len,
        bin_hz: map.bin_freq(1),
        fast_quarter_median_hz: map.median_over_rows(0..quarter),
        slow_quarter_median_hz: map.median_over_rows(slow),
        slow_quarter_max_hz: slow_max,
        row_median_hz: (0..n).map(|i| map.median_over_rows(i..i + 1)).collect(),
        fast_quarter_detection: detection,
    };
    Ok((summary, map))
}

fn write_grid_csv(path: &Path, n: usize, values: &[f64]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    for row in values.chunks(n) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes per-neuron spectra (`spectra.csv`), dominant frequencies and the
/// mean-|p| heat map (both `n × n` CSVs) and a JSON summary.
pub fn cmd_spectra(
    cfg: &ExperimentConfig,
    model_path: &Path,
    excitation: &Excitation,
    out: &Path,
) -> CliResult<SpectraSummary> {
    io::write_run_info(out, "spectra", cfg)?;
    let (_, model, _) = load_model(model_path)?;
    let (summary, map) = spectra(cfg, &model, excitation)?;
    let n = map.n;
    let spectra = map.spectra.as_ref().expect("spectra were requested");
    let last_bin = map.freq_bin(cfg.spectra.max_freq_hz).min(map.fft_len / 2);
    let path = out.join("spectra.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
    let mut header = vec!["i".to_string(), "j".to_string()];
    header.extend((0..=last_bin).map(|b| format!("{}", map.bin_freq(b))));
    w.write_record(&header)?;
    for (cell, s) in spectra.iter().enumerate() {
        let mut row = vec![(cell / n).to_string(), (cell % n).to_string()];
        row.extend(s[..=last_bin].iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    write_grid_csv(&out.join("dominant_hz.csv"), n, &map.dominant_freq)?;
    write_grid_csv(&out.join("heatmap.csv"), n, &map.mean_abs)?;
    io::write_text(
        &out.join("spectra_summary.json"),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    Ok(summary)
}

/// Result of [`cmd_baseline`].
pub struct BaselineOutcome {
    pub model: ModelFile,
    pub records: Vec<EvalRecord>,
}

/// Trains and scores the random sparse reservoir. Its recurrent weights come
/// from `field_seed`; input weights, noise and data match the wave model.
pub fn cmd_baseline(
    cfg: &ExperimentConfig,
    data: Option<&Path>,
    tests: Option<&Path>,
    out: &Path,
) -> CliResult<BaselineOutcome> {
    io::write_run_info(out, "baseline", cfg)?;
    let b = &cfg.baseline;
    let model = random_reservoir(
        &cfg.grid,
        b.density,
        b.spectral_radius,
        cfg.seeds.field_seed,
        &cfg.reservoir,
        cfg.seeds.input_seed,
    )?;
    let signals = training_signals(cfg, data)?;
    let mf = train_and_save(cfg, &model, None, &signals, out)?;
    let tests = test_signals(cfg, tests)?;
    let results = evaluate_model(cfg, &model, &mf.readout, &tests, None)?;
    let mut records = Vec::new();
    let mut w = JsonlWriter::create(&out.join(METRICS))?;
    for (i, r) in results.iter().enumerate() {
        let rec = EvalRecord {
            config_hash: cfg.hash(),
            tool_version: tool_version(),
            sample: i,
            phase: "pre".into(),
            sync_enabled: false,
            ds_enabled: false,
            windows: 0,
            c_scale_accum: 0.0,
            metrics: r.pre.clone(),
        };
        w.write(&rec)?;
        records.push(rec);
    }
    w.finish()?;
    Ok(BaselineOutcome { model: mf, records })
}

/// Named seeds as stored in provenance records.
pub fn seed_map(cfg: &ExperimentConfig) -> BTreeMap<String, u64> {
    cfg.seeds
        .named()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}
