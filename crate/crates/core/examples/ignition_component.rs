//! Runs the IC chain for one summer afternoon in each fuel model and prints
//! the named intermediates, hard and relaxed.

use pyric::nfdrs::{forward, spin_up, CellInputs, ClimateZone, FuelModel, VegetationStage};
use pyric::params::ParameterSet;
use pyric::smoothing::BranchMode;

fn main() -> pyric::Result<()> {
    let params = ParameterSet::default();
    for model in FuelModel::ALL {
        let day = CellInputs {
            temp: 86.0,
            temp_max: 94.0,
            temp_min: 60.0,
            rh: 18.0,
            rh_max: 55.0,
            rh_min: 12.0,
            wind_speed: 12.0,
            cloud_cover: 0.05,
            precip_duration: 0.0,
            annual_precip_mean: 14.0,
            vegetation_stage: VegetationStage::Cured,
            vegetation_cover: 0,
            slope_class: 2,
            fuel_model: model,
            climate_zone: ClimateZone::Arid,
        };
        let carry = spin_up(std::slice::from_ref(&day), &params)?;
        let (hard, _) = forward(&day, &carry, &params, BranchMode::Hard)?;
        let (soft, _) = forward(&day, &carry, &params, BranchMode::Smooth)?;
        println!(
            "model {}: emc {:.2} mc1 {:.2} mc100 {:.2} mc1000 {:.2} herb {:.1} woody {:.1} tmpprm {:.1} qign {:.1} scn {:.3} ic {:.2} (relaxed {:.2})",
            model.code(),
            hard.emc,
            hard.mc1,
            hard.mc100,
            hard.mc1000,
            hard.live_herb_mc,
            hard.live_woody_mc,
            hard.tmpprm,
            hard.qign,
            hard.scn,
            hard.ic,
            soft.ic
        );
    }
    Ok(())
}
