//! Random valid inputs, for gradient checks and property tests.

use rand::Rng;

use super::chain::{MoistureCarry, BOUNDARY_WINDOW};
use super::inputs::{CellInputs, ClimateZone, FuelModel, VegetationStage};

/// A random cell-day satisfying [`CellInputs::validate`].
pub fn random_inputs<R: Rng + ?Sized>(rng: &mut R) -> CellInputs {
    let temp_min = rng.gen_range(-10.0..80.0);
    let temp = temp_min + rng.gen_range(0.0..25.0);
    let temp_max = temp + rng.gen_range(0.0..15.0);
    let rh_min = rng.gen_range(2.0..70.0);
    let rh = (rh_min + rng.gen_range(0.0..30.0f64)).min(100.0);
    let rh_max = (rh + rng.gen_range(0.0..40.0f64)).min(100.0);
    CellInputs {
        temp,
        temp_max,
        temp_min,
        rh,
        rh_max,
        rh_min,
        wind_speed: rng.gen_range(0.0..30.0),
        cloud_cover: rng.gen_range(0.0..=1.0),
        precip_duration: if rng.gen_bool(0.7) { 0.0 } else { rng.gen_range(0.0..24.0) },
        annual_precip_mean: rng.gen_range(2.0..80.0),
        vegetation_stage: VegetationStage::ALL[rng.gen_range(0..4)],
        vegetation_cover: rng.gen_range(0..20),
        slope_class: rng.gen_range(1..=5),
        fuel_model: FuelModel::ALL[rng.gen_range(0..5)],
        climate_zone: ClimateZone::ALL[rng.gen_range(0..5)],
    }
}

/// A random moisture carry with a partly filled boundary history.
pub fn random_carry<R: Rng + ?Sized>(rng: &mut R) -> MoistureCarry {
    let mut c = MoistureCarry::new(rng.gen_range(3.0..30.0), rng.gen_range(5.0..35.0));
    for _ in 0..rng.gen_range(0..BOUNDARY_WINDOW) {
        c.boundary_history.push(rng.gen_range(5.0..35.0));
    }
    c
}
