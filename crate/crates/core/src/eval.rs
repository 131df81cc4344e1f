//! Test-period skill maps, trained-minus-untrained differences, and their
//! CSV, PNG and JSON renderings.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{fuzzy_outcomes, quantile_threshold, DateRange, Dataset, GridDefinition};
use crate::error::{Error, Result};
use crate::loss::{edi, ConfusionCounts, EdiScore, DEFAULT_EPSILON};
use crate::params::ParameterSet;
use crate::series::{cell_series, hard_ic};

/// Default fuzzy neighbourhood: the 3×3 block around a cell.
pub const DEFAULT_FUZZY_RADIUS: usize = 1;

/// Where an evaluation threshold came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdProvenance {
    pub value: f64,
    pub quantile: f64,
    /// Days whose IC the quantile was taken over.
    pub training_range: DateRange,
    /// Ledger hash of the parameters that produced that IC.
    pub ledger_hash: String,
}

/// Quantile of hard-mode IC over every observed cell-day of `train`.
pub fn training_threshold(train: &Dataset, params: &ParameterSet, quantile: f64) -> Result<ThresholdProvenance> {
    let cells = cell_series(train)?;
    let ic = hard_ic(&cells, params)?;
    let values: Vec<f64> = cells
        .iter()
        .zip(&ic)
        .filter(|(cell, _)| !cell.unobserved)
        .flat_map(|(_, ic)| ic.iter().flatten().copied())
        .collect();
    Ok(ThresholdProvenance {
        value: quantile_threshold(&values, quantile)?,
        quantile,
        training_range: date_range(train)?,
        ledger_hash: params.ledger_hash(),
    })
}

fn date_range(data: &Dataset) -> Result<DateRange> {
    if data.n_days() == 0 {
        return Err(Error::Config("empty date range".into()));
    }
    DateRange::new(data.stack.start, data.stack.date(data.n_days() - 1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSkill {
    pub row: usize,
    pub col: usize,
    pub lat: f64,
    pub lon: f64,
    pub counts: ConfusionCounts,
    pub evaluated_days: usize,
    pub fire_days: usize,
    pub h: Option<f64>,
    pub f: Option<f64>,
    /// `None` when the cell is degenerate.
    pub edi: Option<f64>,
    /// No observed fire (or no fire-free day) in the period; not scored.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub ledger_hash: String,
    pub threshold: f64,
    pub threshold_provenance: Option<ThresholdProvenance>,
    pub fuzzy_radius: usize,
    pub test_range: DateRange,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillReport {
    pub grid: GridDefinition,
    /// Row-major.
    pub cells: Vec<CellSkill>,
    /// Sum of the per-cell counts.
    pub aggregate_counts: ConfusionCounts,
    /// EDI of the summed counts; `None` when the whole region is degenerate.
    pub aggregate: Option<EdiScore>,
    pub metadata: ReportMetadata,
}

impl SkillReport {
    pub fn scored_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.degenerate).count()
    }

    pub fn aggregate_edi(&self) -> Option<f64> {
        self.aggregate.map(|a| a.value)
    }

    /// Records the training-side origin of the threshold.
    pub fn with_provenance(mut self, provenance: ThresholdProvenance) -> Result<Self> {
        if provenance.value != self.metadata.threshold {
            return Err(Error::Config("provenance does not match the threshold used".into()));
        }
        if provenance.training_range.overlaps(&self.metadata.test_range) {
            return Err(Error::Config(format!(
                "threshold came from {} which overlaps the test range {}",
                provenance.training_range, self.metadata.test_range
            )));
        }
        self.metadata.threshold_provenance = Some(provenance);
        Ok(self)
    }
}

/// Hard-mode skill of `params` over `test`, forecasting fire where IC exceeds
/// `threshold`. Each cell spins up from the first days of the test period.
pub fn evaluate_region(test: &Dataset, params: &ParameterSet, threshold: f64, fuzzy_radius: usize) -> Result<SkillReport> {
    let test_range = date_range(test)?;
    if !threshold.is_finite() {
        return Err(Error::Config(format!("threshold must be finite, got {threshold}")));
    }
    let cells = cell_series(test)?;
    let ic = hard_ic(&cells, params)?;
    let grid = test.grid().clone();
    let (n_rows, n_cols) = (grid.n_rows(), grid.n_cols());
    let n = grid.n_cells();

    let mut counts = vec![ConfusionCounts::default(); n];
    let mut evaluated = vec![0usize; n];
    let mut fire_days = vec![0usize; n];
    let mut pred = vec![false; n];
    let mut obs = vec![false; n];
    let mut mask = vec![false; n];
    for t in 0..test.n_days() {
        for k in 0..n {
            let v = ic[k][t];
            mask[k] = v.is_some() && !cells[k].unobserved;
            pred[k] = v.is_some_and(|v| v > threshold);
            obs[k] = cells[k].fires[t];
        }
        let outcomes = fuzzy_outcomes(&pred, &obs, Some(&mask), n_rows, n_cols, fuzzy_radius)?;
        for (k, o) in outcomes.into_iter().enumerate() {
            if let Some(o) = o {
                o.tally(&mut counts[k]);
                evaluated[k] += 1;
                fire_days[k] += obs[k] as usize;
            }
        }
    }

    let mut aggregate_counts = ConfusionCounts::default();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let c = counts[k];
        aggregate_counts.add(&c);
        let score = edi(&c, DEFAULT_EPSILON).ok();
        out.push(CellSkill {
            row: k / n_cols,
            col: k % n_cols,
            lat: grid.lat[k / n_cols],
            lon: grid.lon[k % n_cols],
            counts: c,
            evaluated_days: evaluated[k],
            fire_days: fire_days[k],
            h: c.hit_rate(),
            f: c.false_alarm_rate(),
            edi: score.map(|s| s.value),
            degenerate: score.is_none(),
        });
    }
    if aggregate_counts.total() == 0.0 {
        return Err(Error::DegenerateData("no cell-day in the test range has complete inputs".into()));
    }
    Ok(SkillReport {
        grid,
        cells: out,
        aggregate_counts,
        aggregate: edi(&aggregate_counts, DEFAULT_EPSILON).ok(),
        metadata: ReportMetadata {
            ledger_hash: params.ledger_hash(),
            threshold,
            threshold_provenance: None,
            fuzzy_radius,
            test_range,
            epsilon: DEFAULT_EPSILON,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffCell {
    pub row: usize,
    pub col: usize,
    pub lat: f64,
    pub lon: f64,
    pub trained: Option<f64>,
    pub untrained: Option<f64>,
    /// `trained − untrained`; `None` when flagged.
    pub delta: Option<f64>,
    /// Degenerate in either report.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffSummary {
    pub scored_cells: usize,
    pub flagged_cells: usize,
    pub improved: usize,
    pub worsened: usize,
    pub unchanged: usize,
    pub mean_delta: Option<f64>,
    pub aggregate_trained: Option<f64>,
    pub aggregate_untrained: Option<f64>,
    pub aggregate_delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffMap {
    pub grid: GridDefinition,
    pub cells: Vec<DiffCell>,
    pub summary: DiffSummary,
    pub test_range: DateRange,
    pub trained_ledger_hash: String,
    pub untrained_ledger_hash: String,
}

/// Cell-wise `trained − untrained` EDI.
pub fn diff_report(trained: &SkillReport, untrained: &SkillReport) -> Result<DiffMap> {
    trained.grid.ensure_same(&untrained.grid, "compared reports")?;
    let (a, b) = (&trained.metadata, &untrained.metadata);
    if a.test_range != b.test_range {
        return Err(Error::Config(format!("reports cover {} and {}", a.test_range, b.test_range)));
    }
    if a.fuzzy_radius != b.fuzzy_radius {
        return Err(Error::Config(format!(
            "reports use fuzzy radius {} and {}",
            a.fuzzy_radius, b.fuzzy_radius
        )));
    }
    let cells: Vec<DiffCell> = trained
        .cells
        .iter()
        .zip(&untrained.cells)
        .map(|(t, u)| {
            let flagged = t.degenerate || u.degenerate;
            DiffCell {
                row: t.row,
                col: t.col,
                lat: t.lat,
                lon: t.lon,
                trained: t.edi,
                untrained: u.edi,
                delta: if flagged { None } else { Some(t.edi.unwrap_or(0.0) - u.edi.unwrap_or(0.0)) },
                flagged,
            }
        })
        .collect();
    let deltas: Vec<f64> = cells.iter().filter_map(|c| c.delta).collect();
    let agg_delta = match (trained.aggregate_edi(), untrained.aggregate_edi()) {
        (Some(x), Some(y)) => Some(x - y),
        _ => None,
    };
    Ok(DiffMap {
        grid: trained.grid.clone(),
        summary: DiffSummary {
            scored_cells: deltas.len(),
            flagged_cells: cells.len() - deltas.len(),
            improved: deltas.iter().filter(|&&d| d > 0.0).count(),
            worsened: deltas.iter().filter(|&&d| d < 0.0).count(),
            unchanged: deltas.iter().filter(|&&d| d == 0.0).count(),
            mean_delta: (!deltas.is_empty()).then(|| deltas.iter().sum::<f64>() / deltas.len() as f64),
            aggregate_trained: trained.aggregate_edi(),
            aggregate_untrained: untrained.aggregate_edi(),
            aggregate_delta: agg_delta,
        },
        cells,
        test_range: a.test_range,
        trained_ledger_hash: a.ledger_hash.clone(),
        untrained_ledger_hash: b.ledger_hash.clone(),
    })
}

/// `report.csv` row; floats use shortest round-trip formatting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub row: usize,
    pub col: usize,
    pub lat: f64,
    pub lon: f64,
    pub hits: f64,
    pub misses: f64,
    pub false_alarms: f64,
    pub correct_negatives: f64,
    pub evaluated_days: usize,
    pub fire_days: usize,
    pub h: Option<f64>,
    pub f: Option<f64>,
    pub edi: Option<f64>,
    pub degenerate: bool,
}

/// `report.csv` row of a difference map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub row: usize,
    pub col: usize,
    pub lat: f64,
    pub lon: f64,
    pub edi_trained: Option<f64>,
    pub edi_untrained: Option<f64>,
    pub delta: Option<f64>,
    pub flagged: bool,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::io(path, e))).collect()
}

pub fn write_report_csv(report: &SkillReport, path: &Path) -> Result<()> {
    write_csv(
        path,
        report.cells.iter().map(|c| ReportRow {
            row: c.row,
            col: c.col,
            lat: c.lat,
            lon: c.lon,
            hits: c.counts.hits,
            misses: c.counts.misses,
            false_alarms: c.counts.false_alarms,
            correct_negatives: c.counts.correct_negatives,
            evaluated_days: c.evaluated_days,
            fire_days: c.fire_days,
            h: c.h,
            f: c.f,
            edi: c.edi,
            degenerate: c.degenerate,
        }),
    )
}

pub fn write_diff_csv(diff: &DiffMap, path: &Path) -> Result<()> {
    write_csv(
        path,
        diff.cells.iter().map(|c| DiffRow {
            row: c.row,
            col: c.col,
            lat: c.lat,
            lon: c.lon,
            edi_trained: c.trained,
            edi_untrained: c.untrained,
            delta: c.delta,
            flagged: c.flagged,
        }),
    )
}

/// Pixels per grid cell in rendered maps.
pub const CELL_PIXELS: u32 = 12;
const NEGATIVE: [f64; 3] = [33.0, 102.0, 172.0];
const MIDDLE: [f64; 3] = [247.0, 247.0, 247.0];
const POSITIVE: [f64; 3] = [178.0, 24.0, 43.0];
/// Colour of cells without a value.
pub const NO_DATA: [u8; 3] = [128, 128, 128];

/// Diverging blue–white–red colour for `v` on `[−limit, limit]`, linear in
/// RGB on each side of zero and saturating beyond the limit.
pub fn diverging_color(v: f64, limit: f64) -> [u8; 3] {
    let s = (v / limit).clamp(-1.0, 1.0);
    let end = if s < 0.0 { NEGATIVE } else { POSITIVE };
    let a = s.abs();
    let mut out = [0u8; 3];
    for i in 0..3 {
        out[i] = (MIDDLE[i] + (end[i] - MIDDLE[i]) * a).round() as u8;
    }
    out
}

/// Renders a row-major value grid as a PNG. North is up: when latitudes
/// ascend with the row index, the rows are flipped.
pub fn render_png(values: &[Option<f64>], grid: &GridDefinition, limit: f64, path: &Path) -> Result<()> {
    let (n_rows, n_cols) = (grid.n_rows(), grid.n_cols());
    if values.len() != n_rows * n_cols {
        return Err(Error::GridMismatch(format!("{} values for a {n_rows}x{n_cols} grid", values.len())));
    }
    let limit = if limit > 0.0 && limit.is_finite() { limit } else { 1.0 };
    let flip = n_rows > 1 && grid.lat[0] < grid.lat[n_rows - 1];
    let (w, h) = (n_cols as u32 * CELL_PIXELS, n_rows as u32 * CELL_PIXELS);
    let mut pixels = Vec::with_capacity((w * h * 3) as usize);
    for y in 0..h {
        let r = (y / CELL_PIXELS) as usize;
        let r = if flip { n_rows - 1 - r } else { r };
        for x in 0..w {
            let c = (x / CELL_PIXELS) as usize;
            let rgb = values[r * n_cols + c].map_or(NO_DATA, |v| diverging_color(v, limit));
            pixels.extend_from_slice(&rgb);
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| Error::io(path, e))?;
    writer.write_image_data(&pixels).map_err(|e| Error::io(path, e))?;
    writer.finish().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ReportSummary<'a> {
    aggregate_edi: Option<f64>,
    aggregate_h: Option<f64>,
    aggregate_f: Option<f64>,
    aggregate_counts: &'a ConfusionCounts,
    scored_cells: usize,
    degenerate_cells: usize,
    metadata: &'a ReportMetadata,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Writes `report.csv`, `map.png` (EDI on a fixed ±1 scale) and
/// `summary.json` into `dir`.
pub fn render_report(report: &SkillReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_report_csv(report, &dir.join("report.csv"))?;
    let values: Vec<Option<f64>> = report.cells.iter().map(|c| c.edi).collect();
    render_png(&values, &report.grid, 1.0, &dir.join("map.png"))?;
    write_json(
        &ReportSummary {
            aggregate_edi: report.aggregate_edi(),
            aggregate_h: report.aggregate_counts.hit_rate(),
            aggregate_f: report.aggregate_counts.false_alarm_rate(),
            aggregate_counts: &report.aggregate_counts,
            scored_cells: report.scored_cells(),
            degenerate_cells: report.cells.len() - report.scored_cells(),
            metadata: &report.metadata,
        },
        &dir.join("summary.json"),
    )
}

/// Largest |delta| on the map, used as the symmetric colour limit.
pub fn diff_limit(diff: &DiffMap) -> f64 {
    diff.cells.iter().filter_map(|c| c.delta).fold(0.0, |m, d| m.max(d.abs()))
}

#[derive(Serialize)]
struct DiffJson<'a> {
    summary: &'a DiffSummary,
    color_limit: f64,
    test_range: DateRange,
    trained_ledger_hash: &'a str,
    untrained_ledger_hash: &'a str,
}

/// Writes `report.csv`, `map.png` (zero-centred, symmetric scale) and
/// `summary.json` for a difference map.
pub fn render_diff(diff: &DiffMap, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_diff_csv(diff, &dir.join("report.csv"))?;
    let limit = diff_limit(diff);
    let values: Vec<Option<f64>> = diff.cells.iter().map(|c| c.delta).collect();
    render_png(&values, &diff.grid, limit, &dir.join("map.png"))?;
    write_json(
        &DiffJson {
            summary: &diff.summary,
            color_limit: if limit > 0.0 { limit } else { 1.0 },
            test_range: diff.test_range,
            trained_ledger_hash: &diff.trained_ledger_hash,
            untrained_ledger_hash: &diff.untrained_ledger_hash,
        },
        &dir.join("summary.json"),
    )
}
