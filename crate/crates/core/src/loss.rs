//! Extremal Dependency Index, as a hard score and as a soft training loss.

use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Tape, Var};
use crate::error::{Error, Result};

/// Rate floor (and `1 - EPSILON` cap) applied before taking logs.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Default sigmoid temperature of the soft counts.
pub const DEFAULT_BETA: f64 = 10.0;

/// 2×2 contingency table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub hits: f64,
    pub misses: f64,
    pub false_alarms: f64,
    pub correct_negatives: f64,
    pub soft: bool,
}

impl ConfusionCounts {
    pub fn fires(&self) -> f64 {
        self.hits + self.misses
    }

    pub fn non_fires(&self) -> f64 {
        self.false_alarms + self.correct_negatives
    }

    pub fn total(&self) -> f64 {
        self.fires() + self.non_fires()
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.hits += other.hits;
        self.misses += other.misses;
        self.false_alarms += other.false_alarms;
        self.correct_negatives += other.correct_negatives;
        self.soft |= other.soft;
    }

    pub fn scaled(&self, k: f64) -> ConfusionCounts {
        ConfusionCounts {
            hits: self.hits * k,
            misses: self.misses * k,
            false_alarms: self.false_alarms * k,
            correct_negatives: self.correct_negatives * k,
            soft: self.soft,
        }
    }

    /// Hit rate H, if any fire was observed.
    pub fn hit_rate(&self) -> Option<f64> {
        (self.fires() > 0.0).then(|| self.hits / self.fires())
    }

    /// False-alarm rate F, if any non-fire was observed.
    pub fn false_alarm_rate(&self) -> Option<f64> {
        (self.non_fires() > 0.0).then(|| self.false_alarms / self.non_fires())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdiScore {
    pub value: f64,
    pub h: f64,
    pub f: f64,
    /// Set when a rate had to be floored or capped.
    pub degenerate: bool,
}

fn check_aligned(n_index: usize, n_obs: usize) -> Result<()> {
    if n_index == 0 {
        return Err(Error::input("index_values", "empty series"));
    }
    if n_index != n_obs {
        return Err(Error::input(
            "observations",
            format!("length {n_obs} does not match {n_index} index values"),
        ));
    }
    Ok(())
}

/// Contingency counts with prediction `index > threshold`.
pub fn hard_counts(index_values: &[f64], observations: &[bool], threshold: f64) -> Result<ConfusionCounts> {
    check_aligned(index_values.len(), observations.len())?;
    let mut c = ConfusionCounts::default();
    for (&x, &fire) in index_values.iter().zip(observations) {
        match (x > threshold, fire) {
            (true, true) => c.hits += 1.0,
            (false, true) => c.misses += 1.0,
            (true, false) => c.false_alarms += 1.0,
            (false, false) => c.correct_negatives += 1.0,
        }
    }
    Ok(c)
}

/// Soft counts from plain values, `p_i = σ(β (x_i − threshold))`.
pub fn soft_counts(index_values: &[f64], observations: &[bool], threshold: f64, beta: f64) -> Result<ConfusionCounts> {
    check_aligned(index_values.len(), observations.len())?;
    check_beta(beta)?;
    let mut c = ConfusionCounts {
        soft: true,
        ..Default::default()
    };
    for (&x, &fire) in index_values.iter().zip(observations) {
        let p = sigmoid(beta * (x - threshold));
        if fire {
            c.hits += p;
            c.misses += 1.0 - p;
        } else {
            c.false_alarms += p;
            c.correct_negatives += 1.0 - p;
        }
    }
    Ok(c)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Config(format!("soft-count temperature must be positive, got {beta}")));
    }
    Ok(())
}

/// EDI = (ln F − ln H) / (ln F + ln H) with both rates clamped to
/// `[epsilon, 1 − epsilon]`.
pub fn edi(counts: &ConfusionCounts, epsilon: f64) -> Result<EdiScore> {
    let h = counts
        .hit_rate()
        .ok_or_else(|| Error::UndefinedScore("no observed fires: hit rate undefined".into()))?;
    let f = counts
        .false_alarm_rate()
        .ok_or_else(|| Error::UndefinedScore("no observed non-fires: false-alarm rate undefined".into()))?;
    let clamp = |r: f64| r.max(epsilon).min(1.0 - epsilon);
    let (hc, fc) = (clamp(h), clamp(f));
    let (lh, lf) = (hc.ln(), fc.ln());
    Ok(EdiScore {
        value: (lf - lh) / (lf + lh),
        h,
        f,
        degenerate: hc != h || fc != f,
    })
}

/// Soft contingency counts recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct TapeCounts {
    pub hits: Var,
    pub misses: Var,
    pub false_alarms: Var,
    pub correct_negatives: Var,
}

impl TapeCounts {
    pub fn values(&self, tape: &Tape) -> ConfusionCounts {
        ConfusionCounts {
            hits: tape.value(self.hits),
            misses: tape.value(self.misses),
            false_alarms: tape.value(self.false_alarms),
            correct_negatives: tape.value(self.correct_negatives),
            soft: true,
        }
    }
}

/// Soft counts on a tape; differentiable in every index value.
pub fn soft_counts_taped(
    tape: &mut Tape,
    index_values: &[Var],
    observations: &[bool],
    threshold: f64,
    beta: f64,
) -> Result<TapeCounts> {
    check_aligned(index_values.len(), observations.len())?;
    check_beta(beta)?;
    let mut fire_p = Vec::new();
    let mut calm_p = Vec::new();
    for (&x, &fire) in index_values.iter().zip(observations) {
        let d = tape.add_c(x, -threshold);
        let z = tape.mul_c(d, beta);
        let p = tape.sigmoid(z);
        if fire {
            fire_p.push(p);
        } else {
            calm_p.push(p);
        }
    }
    let hits = tape.sum(&fire_p);
    let misses = tape.rsub_c(fire_p.len() as f64, hits);
    let false_alarms = tape.sum(&calm_p);
    let correct_negatives = tape.rsub_c(calm_p.len() as f64, false_alarms);
    Ok(TapeCounts {
        hits,
        misses,
        false_alarms,
        correct_negatives,
    })
}

/// EDI of tape counts; rates are clamped with hard min/max so a clamped rate
/// passes no gradient.
pub fn edi_taped(tape: &mut Tape, counts: &TapeCounts, epsilon: f64) -> Result<Var> {
    let c = counts.values(tape);
    if !(c.fires() > 0.0) {
        return Err(Error::UndefinedScore("no observed fires: hit rate undefined".into()));
    }
    if !(c.non_fires() > 0.0) {
        return Err(Error::UndefinedScore("no observed non-fires: false-alarm rate undefined".into()));
    }
    let rate = |tape: &mut Tape, num: Var, other: Var| {
        let den = tape.add(num, other);
        let r = tape.div(num, den);
        let r = tape.max_c(r, epsilon);
        tape.min_c(r, 1.0 - epsilon)
    };
    let h = rate(tape, counts.hits, counts.misses);
    let f = rate(tape, counts.false_alarms, counts.correct_negatives);
    let lh = tape.ln(h);
    let lf = tape.ln(f);
    let num = tape.sub(lf, lh);
    let den = tape.add(lf, lh);
    Ok(tape.div(num, den))
}

/// `1 − EDI(soft counts)`; minimizing it maximizes EDI.
pub fn edi_loss(
    tape: &mut Tape,
    index_values: &[Var],
    observations: &[bool],
    threshold: f64,
    beta: f64,
    epsilon: f64,
) -> Result<Var> {
    let counts = soft_counts_taped(tape, index_values, observations, threshold, beta)?;
    let score = edi_taped(tape, &counts, epsilon)?;
    let loss = tape.rsub_c(1.0, score);
    tape.status()?;
    Ok(loss)
}
