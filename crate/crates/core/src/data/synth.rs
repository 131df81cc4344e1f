//! Seeded synthetic weather, site layers and fire observations.
//!
//! Every random draw comes from a ChaCha8 generator seeded once, with a
//! separate stream per component (static layers, weather, fires) so a change
//! in one component leaves the others untouched.

use std::f64::consts::PI;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::GridDefinition;
use super::raster::{Dataset, FireObservationGrid, Layer, RasterStack, VariableKind};
use crate::error::{Error, Result};
use crate::nfdrs::{forward, spin_up, ClimateZone, FuelModel, VegetationStage};
use crate::params::ParameterSet;
use crate::smoothing::BranchMode;

const STREAM_STATIC: u64 = 1;
const STREAM_WEATHER: u64 = 2;
const STREAM_FIRES: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Fires drawn from the IC of a parameter set with one perturbed coefficient.
    ParameterShift,
    /// Fires drawn from the IC of the default parameters.
    Seasonal,
    /// Fires independent of the weather.
    Random,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::ParameterShift => "parameter-shift",
            Scenario::Seasonal => "seasonal",
            Scenario::Random => "random",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parameter-shift" => Ok(Scenario::ParameterShift),
            "seasonal" => Ok(Scenario::Seasonal),
            "random" => Ok(Scenario::Random),
            other => Err(Error::Config(format!(
                "unknown scenario {other:?} (expected parameter-shift, seasonal or random)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub grid: GridDefinition,
    pub start: NaiveDate,
    pub days: usize,
    pub seed: u64,
    pub scenario: Scenario,
    /// Coefficient perturbed in the parameter-shift scenario.
    pub shifted_parameter: String,
    /// Multiplier applied to that coefficient.
    pub shift_factor: f64,
    /// Expected fraction of cell-days with a fire.
    pub fire_rate: f64,
    /// Power of IC/100 in the fire probability; larger is more selective.
    pub fire_power: f64,
}

impl SynthConfig {
    pub fn new(grid: GridDefinition, start: NaiveDate, days: usize, seed: u64, scenario: Scenario) -> Self {
        SynthConfig {
            grid,
            start,
            days,
            seed,
            scenario,
            shifted_parameter: DEFAULT_SHIFTED_PARAMETER.to_string(),
            shift_factor: DEFAULT_SHIFT_FACTOR,
            fire_rate: 0.015,
            fire_power: 4.0,
        }
    }
}

pub const DEFAULT_SHIFTED_PARAMETER: &str = "qign.c0";
pub const DEFAULT_SHIFT_FACTOR: f64 = 0.5;

/// Square grid of `n x n` quarter-degree cells over the western US.
pub fn square_grid(n_rows: usize, n_cols: usize) -> GridDefinition {
    GridDefinition::regular(42.0, -122.0, -0.25, 0.25, n_rows, n_cols).expect("valid grid")
}

pub struct SynthOutput {
    pub dataset: Dataset,
    /// Parameters that generated the fires.
    pub truth: ParameterSet,
    /// Realized fraction of cell-days with a fire.
    pub base_rate: f64,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one draw per call keeps the stream layout simple.
    let u1: f64 = r.gen_range(f64::EPSILON..1.0);
    let u2: f64 = r.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

struct Site {
    annual_precip: f64,
    temp_base: f64,
    zone: ClimateZone,
    fuel: FuelModel,
    slope: u8,
    cover: u32,
}

fn sites(cfg: &SynthConfig) -> Vec<Site> {
    let mut r = rng(cfg.seed, STREAM_STATIC);
    let (n_rows, n_cols) = (cfg.grid.n_rows(), cfg.grid.n_cols());
    // Fuel models come in 4x4 patches.
    let patch_cols = n_cols.div_ceil(4);
    let patches: Vec<FuelModel> = (0..n_rows.div_ceil(4) * patch_cols)
        .map(|_| FuelModel::ALL[r.gen_range(0..FuelModel::ALL.len())])
        .collect();
    let mut out = Vec::with_capacity(cfg.grid.n_cells());
    for i in 0..n_rows {
        for j in 0..n_cols {
            let y = i as f64 / n_rows.max(2) as f64;
            let x = j as f64 / n_cols.max(2) as f64;
            let annual_precip = (8.0 + 30.0 * y + 8.0 * x + 2.0 * normal(&mut r)).max(2.0);
            let zone = if annual_precip < 16.0 {
                ClimateZone::Arid
            } else if annual_precip < 28.0 {
                ClimateZone::Temperate
            } else {
                ClimateZone::Continental
            };
            out.push(Site {
                annual_precip,
                temp_base: 66.0 - 10.0 * y + 2.0 * normal(&mut r),
                zone,
                fuel: patches[(i / 4) * patch_cols + j / 4],
                slope: r.gen_range(1..=5),
                cover: r.gen_range(1..=16),
            });
        }
    }
    out
}

fn stage(doy: u32, arid: bool) -> VegetationStage {
    let shift = if arid { 20 } else { 0 };
    match doy + shift {
        d if d < 60 => VegetationStage::Cured,
        d if d < 90 => VegetationStage::PreGreen,
        d if d < 150 => VegetationStage::Green,
        d if d < 200 => VegetationStage::Transition,
        _ => VegetationStage::Cured,
    }
}

const WEATHER_VARS: [(&str, &str); 9] = [
    ("temp", "degF"),
    ("temp_max", "degF"),
    ("temp_min", "degF"),
    ("rh", "percent"),
    ("rh_max", "percent"),
    ("rh_min", "percent"),
    ("wind_speed", "mph"),
    ("cloud_cover", "fraction"),
    ("precip_duration", "hours"),
];

fn weather(cfg: &SynthConfig, sites: &[Site]) -> Result<RasterStack> {
    let (n_rows, n_cols) = (cfg.grid.n_rows(), cfg.grid.n_cols());
    let mut r = rng(cfg.seed, STREAM_WEATHER);
    let mut layers: Vec<Layer> = WEATHER_VARS.iter().map(|_| Layer::filled(cfg.days, n_rows, n_cols, 0.0)).collect();
    let mut stage_layer = Layer::filled(cfg.days, n_rows, n_cols, 0.0);
    let seasonal_amp = if cfg.scenario == Scenario::Seasonal { 22.0 } else { 16.0 };

    let mut regional = 0.0;
    let mut regional_wet = 0.0;
    for t in 0..cfg.days {
        let date = cfg.start + chrono::Duration::days(t as i64);
        let doy = date.ordinal();
        let season = (2.0 * PI * (doy as f64 - 105.0) / 365.25).sin();
        regional = 0.7 * regional + 4.0 * normal(&mut r);
        regional_wet = 0.6 * regional_wet + normal(&mut r);
        for (k, site) in sites.iter().enumerate() {
            let (i, j) = (k / n_cols, k % n_cols);
            let temp = site.temp_base + seasonal_amp * season + regional + 3.0 * normal(&mut r);
            let temp_max = temp + r.gen_range(4.0..12.0);
            let temp_min = temp - r.gen_range(12.0..26.0);
            let wet_chance = (site.annual_precip / 250.0) * (1.0 - 0.6 * season) * (1.0 + 0.5 * regional_wet).max(0.0);
            let raining = r.gen_bool(wet_chance.clamp(0.0, 0.9));
            let precip = if raining { r.gen_range(1.0..14.0f64).round() } else { 0.0 };
            let rh = (55.0 - 0.7 * (temp - 60.0) + 0.5 * site.annual_precip - 6.0 * regional_wet.min(0.0).abs()
                + if raining { 25.0 } else { 0.0 }
                + 6.0 * normal(&mut r))
            .clamp(4.0, 98.0);
            let rh_min = rh * r.gen_range(0.6..0.95);
            let rh_max = (rh + r.gen_range(15.0..40.0)).min(100.0);
            let wind = (8.0 + 4.0 * normal(&mut r)).abs();
            let cloud = if raining { r.gen_range(0.6..1.0) } else { r.gen_range(0.0..0.7f64).powi(2) };
            let vals = [temp, temp_max, temp_min, rh, rh_max, rh_min, wind, cloud, precip];
            for (layer, v) in layers.iter_mut().zip(vals) {
                layer.set(t, i, j, v as f32);
            }
            stage_layer.set(t, i, j, stage(doy, site.zone == ClimateZone::Arid) as u32 as f32);
        }
    }

    let mut stack = RasterStack::new(cfg.grid.clone(), cfg.start, cfg.days);
    for ((name, units), layer) in WEATHER_VARS.iter().zip(layers) {
        stack.insert(name, VariableKind::Continuous, units, layer)?;
    }
    stack.insert("vegetation_stage", VariableKind::Categorical, "class", stage_layer)?;
    let static_layer = |f: &dyn Fn(&Site) -> f64| {
        let values = sites.iter().map(|s| f(s) as f32).collect();
        Layer::new(1, n_rows, n_cols, values, None)
    };
    stack.insert("annual_precip_mean", VariableKind::Continuous, "in/yr", static_layer(&|s| s.annual_precip)?)?;
    stack.insert("vegetation_cover", VariableKind::Categorical, "class", static_layer(&|s| s.cover as f64)?)?;
    stack.insert("slope_class", VariableKind::Categorical, "class", static_layer(&|s| s.slope as f64)?)?;
    stack.insert("fuel_model", VariableKind::Categorical, "class", static_layer(&|s| s.fuel.class_code() as f64)?)?;
    stack.insert("climate_zone", VariableKind::Categorical, "class", static_layer(&|s| s.zone as u32 as f64)?)?;
    Ok(stack)
}

/// Hard-mode IC for every cell-day (time, row, col), using `params`.
pub fn hard_ic(stack: &RasterStack, params: &ParameterSet) -> Result<Vec<Option<f64>>> {
    let n = stack.grid.n_cells();
    let mut out = vec![None; stack.n_days * n];
    for k in 0..n {
        let (r, c) = (k / stack.grid.n_cols(), k % stack.grid.n_cols());
        let series = stack.cell_series(r, c)?;
        let present: Vec<_> = series.iter().flatten().cloned().collect();
        if present.is_empty() {
            continue;
        }
        let mut carry = spin_up(&present, params)?;
        for (t, day) in series.iter().enumerate() {
            if let Some(day) = day {
                let (s, next) = forward(day, &carry, params, BranchMode::Hard)?;
                out[t * n + k] = Some(s.ic);
                carry = next;
            }
        }
    }
    Ok(out)
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SynthOutput> {
    if cfg.days == 0 {
        return Err(Error::Config("synthetic dataset needs at least one day".into()));
    }
    if !(cfg.fire_rate > 0.0 && cfg.fire_rate < 1.0) {
        return Err(Error::Config(format!("fire rate must lie in (0, 1), got {}", cfg.fire_rate)));
    }
    let sites = sites(cfg);
    let stack = weather(cfg, &sites)?;

    let mut truth = ParameterSet::default();
    if cfg.scenario == Scenario::ParameterShift {
        let id = truth.id(&cfg.shifted_parameter)?;
        let v = truth.value(id) * cfg.shift_factor;
        truth.set_value(id, v)?;
    }

    let n = cfg.grid.n_cells();
    let mut r = rng(cfg.seed, STREAM_FIRES);
    let weights: Vec<f64> = match cfg.scenario {
        Scenario::Random => vec![1.0; cfg.days * n],
        _ => hard_ic(&stack, &truth)?
            .into_iter()
            .map(|ic| (ic.unwrap_or(0.0) / 100.0).powf(cfg.fire_power))
            .collect(),
    };
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    let mut fires = FireObservationGrid::empty(cfg.grid.clone(), cfg.start, cfg.days);
    for (k, w) in weights.iter().enumerate() {
        let p = if mean > 0.0 { (cfg.fire_rate * w / mean).min(1.0) } else { 0.0 };
        fires.fire[k] = r.gen_bool(p) as u8;
    }
    let base_rate = fires.total_fires() as f64 / fires.fire.len() as f64;
    Ok(SynthOutput {
        dataset: Dataset::new(stack, fires)?,
        truth,
        base_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: Scenario) -> SynthConfig {
        SynthConfig::new(square_grid(4, 4), NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(), 120, 3, scenario)
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate_synthetic(&small(Scenario::ParameterShift)).unwrap();
        let b = generate_synthetic(&small(Scenario::ParameterShift)).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let mut cfg = small(Scenario::ParameterShift);
        cfg.seed = 4;
        assert_ne!(generate_synthetic(&cfg).unwrap().dataset, a.dataset);
    }

    #[test]
    fn every_cell_day_is_valid() {
        for s in [Scenario::ParameterShift, Scenario::Seasonal, Scenario::Random] {
            let out = generate_synthetic(&small(s)).unwrap();
            let stack = &out.dataset.stack;
            stack.check_inputs().unwrap();
            for r in 0..4 {
                for day in stack.cell_series(r, r).unwrap() {
                    assert!(day.is_some());
                }
            }
        }
    }

    #[test]
    fn truth_differs_only_in_shifted_coefficient() {
        let out = generate_synthetic(&small(Scenario::ParameterShift)).unwrap();
        let base = ParameterSet::default();
        for (a, b) in out.truth.entries().iter().zip(base.entries()) {
            if a.name == DEFAULT_SHIFTED_PARAMETER {
                assert_eq!(a.value, b.value * DEFAULT_SHIFT_FACTOR);
            } else {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn unknown_scenario_rejected() {
        assert!("desert".parse::<Scenario>().is_err());
        assert_eq!("seasonal".parse::<Scenario>().unwrap(), Scenario::Seasonal);
    }
}
