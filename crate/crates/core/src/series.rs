//! Per-cell daily series and the passes that run the chain over them.

use rayon::prelude::*;

use crate::autodiff::Diagnostics;
use crate::data::Dataset;
use crate::error::Result;
use crate::nfdrs::{forward, forward_taped, spin_up, CellInputs, MoistureCarry};
use crate::params::{ParamId, ParameterSet};
use crate::smoothing::BranchMode;

/// Decoded inputs and observations of one grid cell.
#[derive(Clone, Debug)]
pub struct CellSeries {
    pub row: usize,
    pub col: usize,
    /// `None` on days with any missing input.
    pub days: Vec<Option<CellInputs>>,
    pub fires: Vec<bool>,
    /// Cell has no fire observations at all (for example, nothing pooled into it).
    pub unobserved: bool,
}

impl CellSeries {
    fn present(&self) -> Vec<CellInputs> {
        self.days.iter().flatten().cloned().collect()
    }
}

/// Decodes every cell of a dataset, in row-major order.
pub fn cell_series(data: &Dataset) -> Result<Vec<CellSeries>> {
    data.stack.check_inputs()?;
    let n_cols = data.grid().n_cols();
    (0..data.grid().n_cells())
        .into_par_iter()
        .map(|k| {
            let (row, col) = (k / n_cols, k % n_cols);
            Ok(CellSeries {
                row,
                col,
                days: data.stack.cell_series(row, col)?,
                fires: (0..data.n_days()).map(|t| data.fires.get(t, row, col)).collect(),
                unobserved: data.fires.missing_cells[k],
            })
        })
        .collect()
}

/// Hard-mode IC for each cell and day, spun up from the first days of each
/// series. Missing days yield `None` and leave the moisture carry untouched.
pub fn hard_ic(cells: &[CellSeries], params: &ParameterSet) -> Result<Vec<Vec<Option<f64>>>> {
    cells
        .par_iter()
        .map(|cell| {
            let present = cell.present();
            let mut out = vec![None; cell.days.len()];
            if present.is_empty() {
                return Ok(out);
            }
            let mut carry = spin_up(&present, params)?;
            for (t, day) in cell.days.iter().enumerate() {
                if let Some(day) = day {
                    let (s, next) = forward(day, &carry, params, BranchMode::Hard)?;
                    out[t] = Some(s.ic);
                    carry = next;
                }
            }
            Ok(out)
        })
        .collect()
}

/// One present day of a smooth-mode run: its index, the carry entering it,
/// and its IC.
#[derive(Clone, Debug)]
pub struct SmoothDay {
    pub day: usize,
    pub carry: MoistureCarry,
    pub ic: f64,
}

/// Smooth-mode run over present days `< until` of each cell.
///
/// Carries between days are plain values, so a gradient taken from a
/// recorded carry covers that day's computation only.
pub fn smooth_run(cells: &[CellSeries], params: &ParameterSet, until: usize) -> Result<Vec<Vec<SmoothDay>>> {
    cells
        .par_iter()
        .map(|cell| {
            let present = cell.present();
            let mut out = Vec::new();
            if present.is_empty() {
                return Ok(out);
            }
            let mut carry = spin_up(&present, params)?;
            for (t, day) in cell.days.iter().enumerate().take(until) {
                let Some(day) = day else { continue };
                let (state, next) = forward(day, &carry, params, BranchMode::Smooth)?;
                out.push(SmoothDay {
                    day: t,
                    carry: std::mem::replace(&mut carry, next),
                    ic: state.ic,
                });
            }
            Ok(out)
        })
        .collect()
}

/// Parameter adjoints (restricted to `wrt`) of one day's smooth IC for an
/// upstream seed, clipping adjoints during the sweep.
pub fn seeded_gradient(
    day: &CellInputs,
    carry: &MoistureCarry,
    params: &ParameterSet,
    wrt: &[ParamId],
    seed: f64,
    clip_limit: Option<f64>,
) -> Result<(Vec<f64>, Diagnostics)> {
    let pass = forward_taped(day, carry, params, BranchMode::Smooth)?;
    let (g, d) = pass.seeded_gradient(seed, clip_limit)?;
    Ok((wrt.iter().map(|id| g[id.0]).collect(), d))
}
