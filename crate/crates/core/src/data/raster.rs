use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use super::grid::GridDefinition;
use crate::error::{Error, Result};
use crate::nfdrs::{CellInputs, ClimateZone, FuelModel, VegetationStage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Categorical,
}

/// One variable laid out as (time, row, col). A static layer has one time step
/// that applies to every day.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub n_time: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub values: Vec<f32>,
    pub missing: Vec<bool>,
}

impl Layer {
    pub fn new(n_time: usize, n_rows: usize, n_cols: usize, values: Vec<f32>, missing: Option<Vec<bool>>) -> Result<Self> {
        let n = n_time * n_rows * n_cols;
        if values.len() != n {
            return Err(Error::Data(format!("layer has {} values, expected {n}", values.len())));
        }
        let missing = missing.unwrap_or_else(|| vec![false; n]);
        if missing.len() != n {
            return Err(Error::Data(format!("missing mask has {} entries, expected {n}", missing.len())));
        }
        Ok(Layer {
            n_time,
            n_rows,
            n_cols,
            values,
            missing,
        })
    }

    pub fn filled(n_time: usize, n_rows: usize, n_cols: usize, value: f32) -> Self {
        let n = n_time * n_rows * n_cols;
        Layer {
            n_time,
            n_rows,
            n_cols,
            values: vec![value; n],
            missing: vec![false; n],
        }
    }

    pub fn offset(&self, t: usize, r: usize, c: usize) -> usize {
        let t = if self.n_time == 1 { 0 } else { t };
        (t * self.n_rows + r) * self.n_cols + c
    }

    pub fn get(&self, t: usize, r: usize, c: usize) -> Option<f32> {
        let k = self.offset(t, r, c);
        (!self.missing[k]).then_some(self.values[k])
    }

    pub fn set(&mut self, t: usize, r: usize, c: usize, v: f32) {
        let k = self.offset(t, r, c);
        self.values[k] = v;
        self.missing[k] = false;
    }

    pub fn set_missing(&mut self, t: usize, r: usize, c: usize) {
        let k = self.offset(t, r, c);
        self.missing[k] = true;
    }

    pub fn is_static(&self) -> bool {
        self.n_time == 1
    }

    /// The (row, col) slab at time `t`.
    pub fn slice(&self, t: usize) -> (&[f32], &[bool]) {
        let n = self.n_rows * self.n_cols;
        let t = if self.n_time == 1 { 0 } else { t };
        (&self.values[t * n..(t + 1) * n], &self.missing[t * n..(t + 1) * n])
    }

    /// Time steps `range` of a time-varying layer; static layers are returned unchanged.
    pub fn time_range(&self, range: std::ops::Range<usize>) -> Layer {
        if self.is_static() {
            return self.clone();
        }
        let n = self.n_rows * self.n_cols;
        Layer {
            n_time: range.len(),
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            values: self.values[range.start * n..range.end * n].to_vec(),
            missing: self.missing[range.start * n..range.end * n].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub kind: VariableKind,
    pub units: String,
    pub layer: Layer,
}

/// Named layers sharing one grid and one daily time axis.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterStack {
    pub grid: GridDefinition,
    pub start: NaiveDate,
    pub n_days: usize,
    pub variables: BTreeMap<String, Variable>,
}

/// Variables the IC chain reads, with their kind.
pub const INPUT_VARIABLES: [(&str, VariableKind); 15] = [
    ("temp", VariableKind::Continuous),
    ("temp_max", VariableKind::Continuous),
    ("temp_min", VariableKind::Continuous),
    ("rh", VariableKind::Continuous),
    ("rh_max", VariableKind::Continuous),
    ("rh_min", VariableKind::Continuous),
    ("wind_speed", VariableKind::Continuous),
    ("cloud_cover", VariableKind::Continuous),
    ("precip_duration", VariableKind::Continuous),
    ("annual_precip_mean", VariableKind::Continuous),
    ("vegetation_stage", VariableKind::Categorical),
    ("vegetation_cover", VariableKind::Categorical),
    ("slope_class", VariableKind::Categorical),
    ("fuel_model", VariableKind::Categorical),
    ("climate_zone", VariableKind::Categorical),
];

impl RasterStack {
    pub fn new(grid: GridDefinition, start: NaiveDate, n_days: usize) -> Self {
        RasterStack {
            grid,
            start,
            n_days,
            variables: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, kind: VariableKind, units: &str, layer: Layer) -> Result<()> {
        if layer.n_rows != self.grid.n_rows() || layer.n_cols != self.grid.n_cols() {
            return Err(Error::GridMismatch(format!(
                "variable {name} is {}x{}, grid is {}x{}",
                layer.n_rows,
                layer.n_cols,
                self.grid.n_rows(),
                self.grid.n_cols()
            )));
        }
        if layer.n_time != 1 && layer.n_time != self.n_days {
            return Err(Error::Data(format!(
                "variable {name} has {} time steps, expected 1 or {}",
                layer.n_time, self.n_days
            )));
        }
        if kind == VariableKind::Categorical {
            if let Some(v) = layer
                .values
                .iter()
                .zip(&layer.missing)
                .find(|(v, m)| !**m && (v.fract() != 0.0 || **v < 0.0))
            {
                return Err(Error::Data(format!("categorical variable {name} holds non-class value {}", v.0)));
            }
        }
        self.variables.insert(
            name.to_string(),
            Variable {
                kind,
                units: units.to_string(),
                layer,
            },
        );
        Ok(())
    }

    pub fn variable(&self, name: &str) -> Result<&Variable> {
        self.variables
            .get(name)
            .ok_or_else(|| Error::Data(format!("dataset has no variable {name}")))
    }

    pub fn date(&self, t: usize) -> NaiveDate {
        self.start + Duration::days(t as i64)
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        (0..self.n_days).map(|t| self.date(t)).collect()
    }

    /// Checks every variable the IC chain needs is present with the right kind.
    pub fn check_inputs(&self) -> Result<()> {
        for (name, kind) in INPUT_VARIABLES {
            let v = self.variable(name)?;
            if v.kind != kind {
                return Err(Error::Data(format!("variable {name} should be {kind:?}")));
            }
        }
        Ok(())
    }

    /// Inputs of one cell-day, or `None` when any input is missing.
    ///
    /// Values that are present but invalid (bad class codes, inconsistent
    /// extremes) are errors.
    pub fn cell_inputs(&self, t: usize, r: usize, c: usize) -> Result<Option<CellInputs>> {
        let mut vals = [0.0f64; 15];
        for (k, (name, _)) in INPUT_VARIABLES.iter().enumerate() {
            match self.variable(name)?.layer.get(t, r, c) {
                Some(v) => vals[k] = v as f64,
                None => return Ok(None),
            }
        }
        let class = |k: usize| vals[k] as u32;
        let inputs = CellInputs {
            temp: vals[0],
            temp_max: vals[1],
            temp_min: vals[2],
            rh: vals[3],
            rh_max: vals[4],
            rh_min: vals[5],
            wind_speed: vals[6],
            cloud_cover: vals[7],
            precip_duration: vals[8],
            annual_precip_mean: vals[9],
            vegetation_stage: VegetationStage::from_code(class(10))?,
            vegetation_cover: class(11),
            slope_class: u8::try_from(class(12)).map_err(|_| Error::input("slope_class", "class code out of range"))?,
            fuel_model: FuelModel::from_class_code(class(13))?,
            climate_zone: ClimateZone::from_code(class(14))?,
        };
        inputs.validate()?;
        Ok(Some(inputs))
    }

    /// Daily inputs of one cell over the whole time axis.
    pub fn cell_series(&self, r: usize, c: usize) -> Result<Vec<Option<CellInputs>>> {
        (0..self.n_days).map(|t| self.cell_inputs(t, r, c)).collect()
    }

    /// Days `range` of the stack.
    pub fn time_range(&self, range: std::ops::Range<usize>) -> RasterStack {
        RasterStack {
            grid: self.grid.clone(),
            start: self.date(range.start),
            n_days: range.len(),
            variables: self
                .variables
                .iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        Variable {
                            kind: v.kind,
                            units: v.units.clone(),
                            layer: v.layer.time_range(range.clone()),
                        },
                    )
                })
                .collect(),
        }
    }
}

/// Binary daily fire observations on a grid, laid out as (time, row, col).
#[derive(Clone, Debug, PartialEq)]
pub struct FireObservationGrid {
    pub grid: GridDefinition,
    pub start: NaiveDate,
    pub n_days: usize,
    pub fire: Vec<u8>,
    /// Per-cell flag for cells without any observation (for example, no fine
    /// cell pooled into them).
    pub missing_cells: Vec<bool>,
}

impl FireObservationGrid {
    pub fn new(grid: GridDefinition, start: NaiveDate, n_days: usize, fire: Vec<u8>) -> Result<Self> {
        let n = grid.n_cells();
        if fire.len() != n_days * n {
            return Err(Error::Data(format!("fire grid has {} values, expected {}", fire.len(), n_days * n)));
        }
        if let Some(v) = fire.iter().find(|&&v| v > 1) {
            return Err(Error::Data(format!("fire observations must be 0 or 1, found {v}")));
        }
        Ok(FireObservationGrid {
            grid,
            start,
            n_days,
            fire,
            missing_cells: vec![false; n],
        })
    }

    pub fn empty(grid: GridDefinition, start: NaiveDate, n_days: usize) -> Self {
        let n = grid.n_cells();
        FireObservationGrid {
            grid,
            start,
            n_days,
            fire: vec![0; n_days * n],
            missing_cells: vec![false; n],
        }
    }

    fn offset(&self, t: usize, r: usize, c: usize) -> usize {
        (t * self.grid.n_rows() + r) * self.grid.n_cols() + c
    }

    pub fn get(&self, t: usize, r: usize, c: usize) -> bool {
        self.fire[self.offset(t, r, c)] == 1
    }

    pub fn set(&mut self, t: usize, r: usize, c: usize, fire: bool) {
        let k = self.offset(t, r, c);
        self.fire[k] = fire as u8;
    }

    /// The (row, col) slab of day `t`.
    pub fn day(&self, t: usize) -> &[u8] {
        let n = self.grid.n_cells();
        &self.fire[t * n..(t + 1) * n]
    }

    pub fn total_fires(&self) -> usize {
        self.fire.iter().map(|&v| v as usize).sum()
    }

    pub fn time_range(&self, range: std::ops::Range<usize>) -> FireObservationGrid {
        let n = self.grid.n_cells();
        FireObservationGrid {
            grid: self.grid.clone(),
            start: self.start + Duration::days(range.start as i64),
            n_days: range.len(),
            fire: self.fire[range.start * n..range.end * n].to_vec(),
            missing_cells: self.missing_cells.clone(),
        }
    }
}

/// Inputs and observations on a shared grid and time axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub stack: RasterStack,
    pub fires: FireObservationGrid,
}

impl Dataset {
    pub fn new(stack: RasterStack, fires: FireObservationGrid) -> Result<Self> {
        stack.grid.ensure_same(&fires.grid, "fire observations")?;
        if stack.start != fires.start || stack.n_days != fires.n_days {
            return Err(Error::Data(format!(
                "time axes differ: inputs {} + {} days, fires {} + {} days",
                stack.start, stack.n_days, fires.start, fires.n_days
            )));
        }
        Ok(Dataset { stack, fires })
    }

    pub fn grid(&self) -> &GridDefinition {
        &self.stack.grid
    }

    pub fn n_days(&self) -> usize {
        self.stack.n_days
    }

    pub fn time_range(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            stack: self.stack.time_range(range.clone()),
            fires: self.fires.time_range(range),
        }
    }
}
