use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::raster::Dataset;
use crate::error::{Error, Result};
use crate::loss::ConfusionCounts;

/// Contingency class of one cell-day.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Hit,
    Miss,
    FalseAlarm,
    CorrectNegative,
}

impl Outcome {
    pub fn tally(self, c: &mut ConfusionCounts) {
        match self {
            Outcome::Hit => c.hits += 1.0,
            Outcome::Miss => c.misses += 1.0,
            Outcome::FalseAlarm => c.false_alarms += 1.0,
            Outcome::CorrectNegative => c.correct_negatives += 1.0,
        }
    }
}

/// Per-cell outcomes for one grid-day with fuzzy pixels.
///
/// A forecast fire without an observed fire in its own cell still counts as a
/// hit when an observed fire lies within Chebyshev distance `radius`. With
/// `radius = 0` this is plain counting. Cells with `mask[k] == false` are
/// skipped (`None`) and never lend their fires to neighbours.
pub fn fuzzy_outcomes(
    predictions: &[bool],
    observations: &[bool],
    mask: Option<&[bool]>,
    n_rows: usize,
    n_cols: usize,
    radius: usize,
) -> Result<Vec<Option<Outcome>>> {
    let n = n_rows * n_cols;
    if predictions.len() != n || observations.len() != n || mask.is_some_and(|m| m.len() != n) {
        return Err(Error::GridMismatch(format!(
            "fuzzy match expects {n} cells, got {} predictions and {} observations",
            predictions.len(),
            observations.len()
        )));
    }
    let active = |k: usize| mask.is_none_or(|m| m[k]);
    let mut out = vec![None; n];
    for r in 0..n_rows {
        for col in 0..n_cols {
            let k = r * n_cols + col;
            if !active(k) {
                continue;
            }
            out[k] = Some(match (predictions[k], observations[k]) {
                (true, true) => Outcome::Hit,
                (false, true) => Outcome::Miss,
                (false, false) => Outcome::CorrectNegative,
                (true, false) => {
                    let near = (r.saturating_sub(radius)..=(r + radius).min(n_rows - 1)).any(|i| {
                        (col.saturating_sub(radius)..=(col + radius).min(n_cols - 1))
                            .any(|j| active(i * n_cols + j) && observations[i * n_cols + j])
                    });
                    if near {
                        Outcome::Hit
                    } else {
                        Outcome::FalseAlarm
                    }
                }
            });
        }
    }
    Ok(out)
}

/// Contingency counts for one grid-day with fuzzy pixels; the sum of
/// [`fuzzy_outcomes`].
pub fn fuzzy_match(
    predictions: &[bool],
    observations: &[bool],
    mask: Option<&[bool]>,
    n_rows: usize,
    n_cols: usize,
    radius: usize,
) -> Result<ConfusionCounts> {
    let mut c = ConfusionCounts::default();
    for o in fuzzy_outcomes(predictions, observations, mask, n_rows, n_cols, radius)?.into_iter().flatten() {
        o.tally(&mut c);
    }
    Ok(c)
}

/// Empirical quantile with linear interpolation between order statistics
/// (position `(n − 1)·q`).
pub fn quantile_threshold(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::input("index_values", "quantile of an empty series"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Config(format!("quantile must lie in [0, 1], got {q}")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::input("index_values", "series contains NaN"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Inclusive calendar date range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Config(format!("date range ends ({end}) before it starts ({start})")));
        }
        Ok(DateRange { start, end })
    }

    /// Whole calendar years `first..=last`.
    pub fn years(first: i32, last: i32) -> Result<Self> {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).ok_or_else(|| Error::Config(format!("bad year {y}")));
        Self::new(d(first, 1, 1)?, d(last, 12, 31)?)
    }

    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn overlaps(&self, other: &DateRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    /// Splits off the final calendar year: `(head, last year)`. Errors when the
    /// range does not extend past one calendar year.
    pub fn split_final_year(&self) -> Result<(DateRange, DateRange)> {
        use chrono::Datelike;
        let year_start = NaiveDate::from_ymd_opt(self.end.year(), 1, 1).expect("valid date");
        if year_start <= self.start {
            return Err(Error::Config(format!(
                "range {} to {} has no full year before its final year",
                self.start, self.end
            )));
        }
        Ok((
            DateRange::new(self.start, year_start.pred_opt().expect("valid date"))?,
            DateRange::new(year_start, self.end)?,
        ))
    }

    /// Time-axis indices covered by the range, or an error if it leaves the axis.
    pub fn indices(&self, axis_start: NaiveDate, n_days: usize) -> Result<std::ops::Range<usize>> {
        let first = (self.start - axis_start).num_days();
        let last = (self.end - axis_start).num_days();
        if first < 0 || last >= n_days as i64 {
            return Err(Error::Config(format!(
                "range {} to {} is outside the data ({} + {} days)",
                self.start, self.end, axis_start, n_days
            )));
        }
        Ok(first as usize..last as usize + 1)
    }
}

impl std::fmt::Display for DateRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Date-sliced training and testing datasets.
pub fn temporal_split(data: &Dataset, train: DateRange, test: DateRange) -> Result<(Dataset, Dataset)> {
    if train.overlaps(&test) {
        return Err(Error::Config(format!("training range {train} overlaps testing range {test}")));
    }
    let a = train.indices(data.stack.start, data.n_days())?;
    let b = test.indices(data.stack.start, data.n_days())?;
    Ok((data.time_range(a), data.time_range(b)))
}
