//! Gradient-descent calibration of a [`ParameterSet`] against EDI.
//!
//! Each epoch fixes a threshold from the current parameters' hard-mode IC
//! over the fit portion, takes SGD steps on `1 − EDI(soft counts)` of the
//! smooth-mode IC, then scores hard-mode EDI on the held-out final stretch of
//! the training period. The best validation score wins.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Diagnostics, Tape};
use crate::data::{quantile_threshold, DateRange, Dataset};
use crate::error::{Error, Result};
use crate::loss::{edi, edi_loss, hard_counts, EdiScore, DEFAULT_BETA, DEFAULT_EPSILON};
use crate::params::{LedgerEntry, LedgerRef, ParamId, ParameterSet};
use crate::nfdrs::forward;
use crate::series::{cell_series, hard_ic, seeded_gradient, smooth_run, CellSeries, SmoothDay};
use crate::smoothing::BranchMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Cell-days per SGD step; `None` pools every fit cell-day into one step.
    pub batch: Option<usize>,
    /// Bound on each adjoint and on each parameter gradient.
    pub clip_limit: f64,
    /// Quantile of fit-portion hard IC used as the fire threshold.
    pub quantile_q: f64,
    pub beta: f64,
    /// When set, β ramps linearly from `beta` to this value over the epochs.
    pub beta_final: Option<f64>,
    pub patience: usize,
    /// Trailing fraction of days held out; `None` holds out the final calendar year.
    pub validation_fraction: Option<f64>,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 50,
            batch: None,
            clip_limit: 10.0,
            quantile_q: 0.5,
            beta: DEFAULT_BETA,
            beta_final: None,
            patience: 10,
            validation_fraction: None,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("clip_limit", self.clip_limit),
            ("beta", self.beta),
            ("epsilon", self.epsilon),
        ];
        // A zero step size is allowed: it makes training a no-op.
        for (name, v) in positive {
            if !v.is_finite() || v < 0.0 || (v == 0.0 && name != "learning_rate") {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.batch == Some(0) {
            return Err(Error::Config("batch must be at least 1 cell-day".into()));
        }
        if !(0.0..=1.0).contains(&self.quantile_q) {
            return Err(Error::Config(format!("quantile_q must lie in [0, 1], got {}", self.quantile_q)));
        }
        if let Some(b) = self.beta_final {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Config(format!("beta_final must be positive, got {b}")));
            }
        }
        if let Some(f) = self.validation_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("validation_fraction must lie in (0, 1), got {f}")));
            }
        }
        if !(self.epsilon < 0.5) {
            return Err(Error::Config(format!("epsilon must be below 0.5, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Soft-count temperature for an epoch (1-based).
    pub fn beta_at(&self, epoch: usize) -> f64 {
        match self.beta_final {
            Some(end) if self.max_epochs > 1 => {
                let s = (epoch.saturating_sub(1)) as f64 / (self.max_epochs - 1) as f64;
                self.beta + (end - self.beta) * s
            }
            _ => self.beta,
        }
    }

    /// Day index where the validation portion starts.
    fn validation_start(&self, data: &Dataset) -> Result<usize> {
        let n = data.n_days();
        let start = match self.validation_fraction {
            Some(f) => n - ((n as f64 * f).round() as usize).clamp(1, n.saturating_sub(1).max(1)),
            None => {
                let range = DateRange::new(data.stack.start, data.stack.date(n.saturating_sub(1)))?;
                let (_, last) = range.split_final_year()?;
                (last.start - data.stack.start).num_days() as usize
            }
        };
        if start == 0 || start >= n {
            return Err(Error::Config(format!("cannot split {n} days into fit and validation portions")));
        }
        Ok(start)
    }
}

/// Parameters and scores at the end of an epoch (epoch 0 is the input).
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub params: ParameterSet,
    /// Mean step loss over the epoch; `None` for epoch 0.
    pub train_loss: Option<f64>,
    pub validation_edi: f64,
    /// Threshold the validation score was computed with.
    pub threshold: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    epoch: usize,
    train_loss: Option<f64>,
    validation_edi: f64,
    threshold: f64,
    clip_events: u64,
    nan_zeroed: u64,
    parameters: serde_json::Value,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let file = CheckpointFile {
            epoch: self.epoch,
            train_loss: self.train_loss,
            validation_edi: self.validation_edi,
            threshold: self.threshold,
            clip_events: self.diagnostics.clip_events,
            nan_zeroed: self.diagnostics.nan_zeroed,
            parameters: serde_json::to_value(LedgerRef(&self.params)).expect("ledger serializes"),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| Error::Ledger(format!("checkpoint: {e}")))?;
        let raw: BTreeMap<String, LedgerEntry> =
            serde_json::from_value(file.parameters).map_err(|e| Error::Ledger(format!("checkpoint: {e}")))?;
        Ok(Checkpoint {
            epoch: file.epoch,
            params: ParameterSet::from_ledger_map(raw)?,
            train_loss: file.train_loss,
            validation_edi: file.validation_edi,
            threshold: file.threshold,
            diagnostics: Diagnostics {
                clip_events: file.clip_events,
                nan_zeroed: file.nan_zeroed,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// One row of `history.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub validation_edi: f64,
    pub threshold: f64,
    pub beta: Option<f64>,
    pub steps: usize,
    pub clip_events: u64,
    pub nan_zeroed: u64,
    /// Validation EDI of the best checkpoint so far, this epoch included.
    pub best_validation_edi: f64,
    pub best: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxEpochs,
    Patience,
    Diverged,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best validation checkpoint.
    pub params: ParameterSet,
    pub best: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub stop: StopReason,
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e))?;
    for r in history {
        w.serialize(r).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_history(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::io(path, e))).collect()
}

/// Parameter update rule; `grads` is indexed like the parameter set.
pub trait Optimizer {
    fn step(&mut self, params: &mut ParameterSet, grads: &[f64]) -> Result<()>;
}

#[derive(Clone, Copy, Debug)]
pub struct Sgd {
    pub learning_rate: f64,
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut ParameterSet, grads: &[f64]) -> Result<()> {
        sgd_step(params, grads, self.learning_rate)
    }
}

/// `p ← p − lr·g` on unfrozen parameters. Sharpness entries hold `ln α`, so
/// their update happens in log space.
pub fn sgd_step(params: &mut ParameterSet, grads: &[f64], learning_rate: f64) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::Config(format!("{} gradients for {} parameters", grads.len(), params.len())));
    }
    for id in params.learnable() {
        let g = grads[id.0];
        if !g.is_finite() {
            return Err(Error::Tape(format!("non-finite gradient for `{}`", params.entry(id).name)));
        }
        if g != 0.0 {
            params.set_value(id, params.value(id) - learning_rate * g)?;
        }
    }
    Ok(())
}

/// Hard-mode EDI over every observed cell-day, no fuzzy matching.
pub fn validate(data: &Dataset, params: &ParameterSet, threshold: f64) -> Result<EdiScore> {
    let cells = cell_series(data)?;
    let ic = hard_ic(&cells, params)?;
    let (x, y) = pooled(&cells, &ic, 0..data.n_days());
    let counts = hard_counts(&x, &y, threshold)?;
    edi(&counts, DEFAULT_EPSILON)
}

/// IC values and fire flags of observed cell-days within `days`.
fn pooled(cells: &[CellSeries], ic: &[Vec<Option<f64>>], days: std::ops::Range<usize>) -> (Vec<f64>, Vec<bool>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (cell, ic) in cells.iter().zip(ic) {
        if cell.unobserved {
            continue;
        }
        for t in days.clone() {
            if let Some(v) = ic[t] {
                x.push(v);
                y.push(cell.fires[t]);
            }
        }
    }
    (x, y)
}

fn require_both_classes(y: &[bool], portion: &str) -> Result<()> {
    let fires = y.iter().filter(|&&f| f).count();
    if fires == 0 {
        return Err(Error::DegenerateData(format!("no observed fires in the {portion} portion; EDI is undefined")));
    }
    if fires == y.len() {
        return Err(Error::DegenerateData(format!("no fire-free cell-days in the {portion} portion; EDI is undefined")));
    }
    Ok(())
}

struct HardScores {
    threshold: f64,
    validation: EdiScore,
}

struct Session<'a> {
    cells: Vec<CellSeries>,
    fit_end: usize,
    n_days: usize,
    config: &'a TrainConfig,
}

impl Session<'_> {
    fn hard_scores(&self, params: &ParameterSet) -> Result<HardScores> {
        let ic = hard_ic(&self.cells, params)?;
        let (fit_x, _) = pooled(&self.cells, &ic, 0..self.fit_end);
        let threshold = quantile_threshold(&fit_x, self.config.quantile_q)?;
        let (x, y) = pooled(&self.cells, &ic, self.fit_end..self.n_days);
        let validation = edi(&hard_counts(&x, &y, threshold)?, self.config.epsilon)?;
        Ok(HardScores { threshold, validation })
    }

    /// Loss and clipped parameter gradient for one batch of cell-days.
    ///
    /// The loss tape yields d(loss)/d(IC) per cell-day; each becomes the seed
    /// of that day's backward sweep, so adjoint clipping acts on the true
    /// loss adjoints.
    #[allow(clippy::too_many_arguments)]
    fn batch_gradient(
        &self,
        run: &[Vec<SmoothDay>],
        batch: &[(usize, usize)],
        ic: &[f64],
        params: &ParameterSet,
        learn: &[ParamId],
        threshold: f64,
        beta: f64,
        diag: &mut Diagnostics,
    ) -> Result<Option<(f64, Vec<f64>)>> {
        let fires: Vec<bool> = batch.iter().map(|&(c, k)| self.cells[c].fires[run[c][k].day]).collect();
        if !fires.iter().any(|&f| f) || fires.iter().all(|&f| f) {
            return Ok(None);
        }
        let mut tape = Tape::with_capacity(6 * ic.len() + 32);
        let vars: Vec<_> = ic.iter().map(|&v| tape.variable(v)).collect();
        let loss = edi_loss(&mut tape, &vars, &fires, threshold, beta, self.config.epsilon)?;
        let g = tape.backward(loss, Some(self.config.clip_limit))?;
        diag.merge(g.diagnostics);

        let clip = Some(self.config.clip_limit);
        let rows = batch
            .par_iter()
            .zip(&vars)
            .map(|(&(c, k), v)| {
                let seed = g.wrt(*v);
                if seed == 0.0 {
                    return Ok(None);
                }
                let s = &run[c][k];
                let day = self.cells[c].days[s.day].as_ref().expect("smooth run covers present days only");
                seeded_gradient(day, &s.carry, params, learn, seed, clip).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![0.0; learn.len()];
        for (row, d) in rows.into_iter().flatten() {
            diag.merge(d);
            for (acc, x) in grad.iter_mut().zip(row) {
                *acc += x;
            }
        }
        for x in &mut grad {
            if x.abs() > self.config.clip_limit {
                *x = x.signum() * self.config.clip_limit;
                diag.clip_events += 1;
            }
        }
        Ok(Some((tape.value(loss), grad)))
    }
}

/// Applies one step; returns false when the loss or gradient is not finite.
fn apply(
    optimizer: &mut dyn Optimizer,
    params: &mut ParameterSet,
    learn: &[ParamId],
    loss: f64,
    grad: &[f64],
) -> Result<bool> {
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Ok(false);
    }
    let mut full = vec![0.0; params.len()];
    for (id, g) in learn.iter().zip(grad) {
        full[id.0] = *g;
    }
    optimizer.step(params, &full)?;
    Ok(true)
}

pub fn train(data: &Dataset, params: &ParameterSet, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(data, params, config, &mut Sgd { learning_rate: config.learning_rate }, &mut |_| {})
}

/// [`train`] with a custom optimizer and a callback after each epoch.
pub fn train_with(
    data: &Dataset,
    params: &ParameterSet,
    config: &TrainConfig,
    optimizer: &mut dyn Optimizer,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    let fit_end = config.validation_start(data)?;
    let session = Session {
        cells: cell_series(data)?,
        fit_end,
        n_days: data.n_days(),
        config,
    };

    let ic0 = hard_ic(&session.cells, params)?;
    require_both_classes(&pooled(&session.cells, &ic0, 0..fit_end).1, "fit")?;
    require_both_classes(&pooled(&session.cells, &ic0, fit_end..data.n_days()).1, "validation")?;

    let scores = session.hard_scores(params)?;
    let mut best = Checkpoint {
        epoch: 0,
        params: params.clone(),
        train_loss: None,
        validation_edi: scores.validation.value,
        threshold: scores.threshold,
        diagnostics: Diagnostics::default(),
    };
    let first = EpochRecord {
        epoch: 0,
        train_loss: None,
        validation_edi: scores.validation.value,
        threshold: scores.threshold,
        beta: None,
        steps: 0,
        clip_events: 0,
        nan_zeroed: 0,
        best_validation_edi: scores.validation.value,
        best: true,
    };
    on_epoch(&first);
    let mut history = vec![first];

    let learn = params.learnable();
    let mut current = params.clone();
    let mut threshold = scores.threshold;
    let mut stale = 0;
    let mut stop = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        let beta = config.beta_at(epoch);
        let mut diag = Diagnostics::default();
        let mut losses = Vec::new();
        let mut diverged = false;

        let run = smooth_run(&session.cells, &current, fit_end)?;
        let mut samples: Vec<(usize, usize)> = run
            .iter()
            .enumerate()
            .filter(|(c, _)| !session.cells[*c].unobserved)
            .flat_map(|(c, days)| (0..days.len()).map(move |k| (c, k)))
            .collect();
        if config.batch.is_some() {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(epoch as u64);
            samples.shuffle(&mut rng);
        }
        let size = config.batch.unwrap_or(samples.len()).max(1);
        // IC from the run is current until the first update.
        let mut fresh = true;
        for batch in samples.chunks(size) {
            let ic: Vec<f64> = if fresh {
                batch.iter().map(|&(c, k)| run[c][k].ic).collect()
            } else {
                batch
                    .par_iter()
                    .map(|&(c, k)| {
                        let s = &run[c][k];
                        let day = session.cells[c].days[s.day].as_ref().expect("present day");
                        Ok(forward(day, &s.carry, &current, BranchMode::Smooth)?.0.ic)
                    })
                    .collect::<Result<_>>()?
            };
            let step = session.batch_gradient(&run, batch, &ic, &current, &learn, threshold, beta, &mut diag)?;
            let Some((loss, grad)) = step else { continue };
            losses.push(loss);
            if !apply(optimizer, &mut current, &learn, loss, &grad)? {
                diverged = true;
                break;
            }
            fresh = false;
        }
        if diverged {
            stop = StopReason::Diverged;
            break;
        }

        let scores = session.hard_scores(&current)?;
        threshold = scores.threshold;
        let train_loss = (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);
        let improved = scores.validation.value > best.validation_edi;
        if improved {
            best = Checkpoint {
                epoch,
                params: current.clone(),
                train_loss,
                validation_edi: scores.validation.value,
                threshold: scores.threshold,
                diagnostics: diag,
            };
            stale = 0;
        } else {
            stale += 1;
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            validation_edi: scores.validation.value,
            threshold: scores.threshold,
            beta: Some(beta),
            steps: losses.len(),
            clip_events: diag.clip_events,
            nan_zeroed: diag.nan_zeroed,
            best_validation_edi: best.validation_edi,
            best: improved,
        };
        on_epoch(&record);
        history.push(record);
        if stale >= config.patience {
            stop = StopReason::Patience;
            break;
        }
    }

    Ok(TrainOutcome {
        params: best.params.clone(),
        best,
        history,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate_synthetic, square_grid, Scenario, SynthConfig};
    use chrono::NaiveDate;

    fn small(scenario: Scenario, seed: u64) -> Dataset {
        let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        let mut cfg = SynthConfig::new(square_grid(4, 4), start, 730, seed, scenario);
        cfg.fire_rate = 0.03;
        generate_synthetic(&cfg).unwrap().dataset
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            max_epochs: 2,
            learning_rate: 1e-4,
            ..Default::default()
        }
    }

    #[test]
    fn sgd_update_definition() {
        let mut p = ParameterSet::default();
        let id = p.id("qign.c6").unwrap();
        p.set_value(id, 1.0).unwrap();
        let mut g = vec![0.0; p.len()];
        g[id.0] = 0.5;
        sgd_step(&mut p, &g, 0.1).unwrap();
        assert!((p.value(id) - 0.95).abs() < 1e-15);

        let before = p.clone();
        let zeros = vec![0.0; p.len()];
        sgd_step(&mut p, &zeros, 0.1).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn sgd_skips_frozen() {
        let mut p = ParameterSet::default();
        p.freeze_all();
        let before = p.clone();
        let g = vec![3.0; p.len()];
        sgd_step(&mut p, &g, 0.5).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn sgd_rejects_non_finite() {
        let mut p = ParameterSet::default();
        let mut g = vec![0.0; p.len()];
        g[p.learnable()[0].0] = f64::NAN;
        assert!(sgd_step(&mut p, &g, 0.1).is_err());
    }

    #[test]
    fn config_checks() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { clip_limit: 0.0, ..Default::default() },
            TrainConfig { max_epochs: 0, ..Default::default() },
            TrainConfig { batch: Some(0), ..Default::default() },
            TrainConfig { quantile_q: 1.5, ..Default::default() },
            TrainConfig { validation_fraction: Some(1.0), ..Default::default() },
            TrainConfig { learning_rate: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        let c = TrainConfig { beta: 10.0, beta_final: Some(100.0), max_epochs: 10, ..Default::default() };
        assert_eq!(c.beta_at(1), 10.0);
        assert_eq!(c.beta_at(10), 100.0);
        assert_eq!(c.beta_at(4), 40.0);
    }

    #[test]
    fn zero_learning_rate_returns_input() {
        let data = small(Scenario::Seasonal, 3);
        let p = ParameterSet::default();
        let out = train(&data, &p, &TrainConfig { learning_rate: 0.0, ..quick() }).unwrap();
        assert_eq!(out.params, p);
        assert_eq!(out.best.epoch, 0);
    }

    #[test]
    fn all_frozen_is_unchanged() {
        let data = small(Scenario::Seasonal, 3);
        let mut p = ParameterSet::default();
        p.freeze_all();
        let out = train(&data, &p, &TrainConfig { learning_rate: 1.0, ..quick() }).unwrap();
        assert_eq!(out.params, p);
    }

    #[test]
    fn training_is_deterministic_and_bounded() {
        let data = small(Scenario::ParameterShift, 5);
        let mut p = ParameterSet::default();
        p.learn_only(&["qign.c6", "qign.c0"]).unwrap();
        let cfg = TrainConfig { batch: Some(500), ..quick() };

        let mut steps = Vec::new();
        struct Recorder<'a>(Sgd, &'a mut Vec<(Vec<f64>, Vec<f64>)>);
        impl Optimizer for Recorder<'_> {
            fn step(&mut self, params: &mut ParameterSet, grads: &[f64]) -> Result<()> {
                let before = params.values();
                self.0.step(params, grads)?;
                self.1.push((before, params.values()));
                Ok(())
            }
        }
        let mut opt = Recorder(Sgd { learning_rate: cfg.learning_rate }, &mut steps);
        let a = train_with(&data, &p, &cfg, &mut opt, &mut |_| {}).unwrap();
        assert!(!steps.is_empty());
        for (before, after) in &steps {
            for (x, y) in before.iter().zip(after) {
                assert!((x - y).abs() <= cfg.learning_rate * cfg.clip_limit * (1.0 + 1e-12));
            }
        }
        let b = train(&data, &p, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn best_checkpoint_dominates_later_epochs() {
        let data = small(Scenario::ParameterShift, 9);
        let mut p = ParameterSet::default();
        p.learn_only(&["qign.c6"]).unwrap();
        let cfg = TrainConfig { max_epochs: 4, learning_rate: 0.05, ..quick() };
        let out = train(&data, &p, &cfg).unwrap();
        let best = out.best.validation_edi;
        for r in &out.history {
            assert!(r.validation_edi <= best);
            if r.epoch > out.best.epoch {
                assert!(r.validation_edi <= best);
            }
        }
        let mut running = f64::NEG_INFINITY;
        for r in &out.history {
            assert!(r.best_validation_edi >= running);
            running = r.best_validation_edi;
        }
        assert_eq!(validate_on_portion(&data, &out.params, out.best.threshold), best);
    }

    fn validate_on_portion(data: &Dataset, params: &ParameterSet, threshold: f64) -> f64 {
        let start = TrainConfig::default().validation_start(data).unwrap();
        let cells = cell_series(data).unwrap();
        let ic = hard_ic(&cells, params).unwrap();
        let (x, y) = pooled(&cells, &ic, start..data.n_days());
        edi(&hard_counts(&x, &y, threshold).unwrap(), DEFAULT_EPSILON).unwrap().value
    }

    #[test]
    fn no_fires_is_an_explicit_error() {
        let mut data = small(Scenario::Seasonal, 3);
        data.fires.fire.iter_mut().for_each(|f| *f = 0);
        let err = train(&data, &ParameterSet::default(), &quick()).unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)), "{err}");
    }

    #[test]
    fn checkpoint_round_trips() {
        let mut p = ParameterSet::default();
        p.set("qign.c6", 7.123456789012345).unwrap();
        let c = Checkpoint {
            epoch: 3,
            params: p,
            train_loss: Some(0.25),
            validation_edi: 0.4,
            threshold: 12.5,
            diagnostics: Diagnostics { clip_events: 2, nan_zeroed: 1 },
        };
        assert_eq!(Checkpoint::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn validate_is_repeatable() {
        let data = small(Scenario::Seasonal, 4);
        let p = ParameterSet::default();
        let a = validate(&data, &p, 20.0).unwrap();
        assert_eq!(a, validate(&data, &p, 20.0).unwrap());
    }
}
