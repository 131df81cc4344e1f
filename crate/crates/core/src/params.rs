//! Learnable constants of the ignition-component chain and their ledger file.
//!
//! Every constant used by [`crate::nfdrs`] is an entry here. The layout (entry
//! order and names) is fixed; a ledger file may change values and freeze flags
//! but must list every entry exactly once.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nfdrs::FuelModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Multiplicative or additive model coefficient; learnable by default.
    Coefficient,
    /// Structural constant (breakpoints, geometry, unit factors); frozen by default.
    Structural,
    /// Fixed exponent; permanently frozen.
    Exponent,
    /// Branch sharpness stored as `ln α`; learnable by default.
    LogSharpness,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub value: f64,
    pub frozen: bool,
    pub kind: ParamKind,
    pub description: String,
    pub source: String,
}

/// All learnable constants plus their freeze flags.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    entries: Vec<ParamEntry>,
}

/// Dead-fuel size classes followed by the two live classes.
pub const FUEL_CLASSES: [&str; 5] = ["1h", "10h", "100h", "herb", "woody"];

#[derive(Clone, Debug)]
pub struct EmcIds {
    pub low: [ParamId; 3],
    pub mid: [ParamId; 3],
    pub high: [ParamId; 4],
    pub rh_low_break: ParamId,
    pub rh_high_break: ParamId,
}

#[derive(Clone, Debug)]
pub struct DeadFuelIds {
    pub mc1_factor: ParamId,
    pub mc10_factor: ParamId,
    pub wet_mc: ParamId,
    pub wet_threshold: ParamId,
    pub daylight_hours: ParamId,
    pub bnd100_rain_slope: ParamId,
    pub bnd100_rain_intercept: ParamId,
    pub bnd1000_rain_slope: ParamId,
    pub bnd1000_rain_intercept: ParamId,
    pub k100: ParamId,
    pub k1000: ParamId,
    pub seed_intercept: ParamId,
    pub seed_slope: ParamId,
}

#[derive(Clone, Debug)]
pub struct LiveFuelIds {
    pub herb_a: [ParamId; 4],
    pub herb_b: [ParamId; 4],
    pub woody_a: [ParamId; 4],
    pub woody_b: [ParamId; 4],
    pub woody_pregreen: [ParamId; 4],
    pub herb_min: ParamId,
    pub herb_max: ParamId,
    pub woody_max: ParamId,
    pub herb_weight_pregreen: ParamId,
    pub herb_weight_transition: ParamId,
    pub woody_weight_pregreen: ParamId,
}

#[derive(Clone, Debug)]
pub struct TmpprmIds {
    /// Solar increments for clear, scattered, broken, overcast skies (°F).
    pub increment: [ParamId; 4],
    pub cloud_break: [ParamId; 3],
}

#[derive(Clone, Debug)]
pub struct IgnitionIds {
    pub qign: [ParamId; 7],
    pub tmpprm_exponent: ParamId,
    pub chi_offset: ParamId,
    pub chi_scale: ParamId,
    pub chi_exponent: ParamId,
    pub pnorm1: ParamId,
    pub pnorm2: ParamId,
    pub pnorm3: ParamId,
}

#[derive(Clone, Debug)]
pub struct FuelIds {
    /// Loadings in tons/acre, indexed like [`FUEL_CLASSES`].
    pub load: [ParamId; 5],
    /// Surface-area-to-volume ratios (1/ft).
    pub sav: [ParamId; 5],
    pub depth: ParamId,
    pub mxd: ParamId,
    pub scm: ParamId,
}

#[derive(Clone, Debug)]
pub struct SpreadIds {
    pub fuels: Vec<FuelIds>,
    pub slope_factor: [ParamId; 5],
    pub slope_beta_exponent: ParamId,
    pub load_units: ParamId,
    pub particle_density: ParamId,
    pub total_mineral: ParamId,
    pub effective_mineral: ParamId,
    pub heat_content: ParamId,
    pub mineral_damping_coeff: ParamId,
    pub mineral_damping_exponent: ParamId,
    pub bop_coeff: ParamId,
    pub bop_exponent: ParamId,
    pub gmax_exponent: ParamId,
    pub gmax_a: ParamId,
    pub gmax_b: ParamId,
    pub a_coeff: ParamId,
    pub a_exponent: ParamId,
    pub xi_a: ParamId,
    pub xi_b: ParamId,
    pub xi_exponent: ParamId,
    pub xi_c: ParamId,
    pub xi_d: ParamId,
    pub xi_beta_offset: ParamId,
    pub wind_c_coeff: ParamId,
    pub wind_c_rate: ParamId,
    pub wind_c_exponent: ParamId,
    pub wind_b_coeff: ParamId,
    pub wind_b_exponent: ParamId,
    pub wind_e_coeff: ParamId,
    pub wind_e_rate: ParamId,
    pub wind_units: ParamId,
    pub wind_floor: ParamId,
    pub damping: [ParamId; 3],
    pub ignition_heat_a: ParamId,
    pub ignition_heat_b: ParamId,
    pub dead_fineness: ParamId,
    pub live_fineness: ParamId,
    pub live_mx_a: ParamId,
    pub live_mx_b: ParamId,
}

/// Sharpness of each relaxed branch site, stored as `ln α`.
#[derive(Clone, Debug)]
pub struct BranchIds {
    pub emc_low: ParamId,
    pub emc_high: ParamId,
    pub wetting: ParamId,
    pub cloud: [ParamId; 3],
    pub extinction_dead: ParamId,
    pub extinction_live: ParamId,
    pub live_extinction_floor: ParamId,
    pub scn_cap: ParamId,
    pub chi_floor: ParamId,
    pub pi_floor: ParamId,
    pub pi_cap: ParamId,
    pub ic_zero: ParamId,
}

/// Typed indices into the fixed parameter layout.
#[derive(Clone, Debug)]
pub struct Layout {
    pub emc: EmcIds,
    pub dead: DeadFuelIds,
    pub live: LiveFuelIds,
    pub tmpprm: TmpprmIds,
    pub ignition: IgnitionIds,
    pub spread: SpreadIds,
    pub branch: BranchIds,
}

struct Builder {
    entries: Vec<ParamEntry>,
}

const NFDRS: &str = "NFDRS-78 (Cohen & Deeming 1985)";
const ROTHERMEL: &str = "Rothermel (1972) spread model";
const ARTIFACT: &str = "calibration default chosen for this implementation";

impl Builder {
    fn add(&mut self, name: impl Into<String>, value: f64, kind: ParamKind, description: &str, source: &str) -> ParamId {
        let id = ParamId(self.entries.len());
        self.entries.push(ParamEntry {
            name: name.into(),
            value,
            frozen: !matches!(kind, ParamKind::Coefficient | ParamKind::LogSharpness),
            kind,
            description: description.to_string(),
            source: source.to_string(),
        });
        id
    }

    fn coef(&mut self, name: impl Into<String>, value: f64, d: &str, s: &str) -> ParamId {
        self.add(name, value, ParamKind::Coefficient, d, s)
    }

    fn structural(&mut self, name: impl Into<String>, value: f64, d: &str, s: &str) -> ParamId {
        self.add(name, value, ParamKind::Structural, d, s)
    }

    fn exponent(&mut self, name: impl Into<String>, value: f64, d: &str, s: &str) -> ParamId {
        self.add(name, value, ParamKind::Exponent, d, s)
    }

    fn alpha(&mut self, site: &str, alpha: f64, d: &str) -> ParamId {
        self.add(format!("branch.{site}.log_alpha"), alpha.ln(), ParamKind::LogSharpness, d, ARTIFACT)
    }
}

// (herb a, herb b, woody a, woody b, woody pre-green) per NFDRS climate class 1..4.
const LIVE_CLASS_TABLE: [(f64, f64, f64, f64, f64); 4] = [
    (-70.0, 12.8, 12.5, 7.5, 50.0),
    (-100.0, 14.0, -5.0, 8.2, 60.0),
    (-137.5, 15.5, -22.5, 8.9, 70.0),
    (-185.0, 17.4, -45.0, 9.8, 80.0),
];

struct FuelRow {
    load: [f64; 5],
    sav: [f64; 5],
    depth: f64,
    mxd: f64,
    scm: f64,
}

fn fuel_row(model: FuelModel) -> FuelRow {
    match model {
        FuelModel::A => FuelRow {
            load: [0.2, 0.0, 0.0, 0.3, 0.0],
            sav: [3000.0, 109.0, 30.0, 3000.0, 1500.0],
            depth: 0.8,
            mxd: 15.0,
            scm: 301.0,
        },
        FuelModel::C => FuelRow {
            load: [0.4, 1.0, 0.0, 0.8, 0.5],
            sav: [2000.0, 109.0, 30.0, 2500.0, 1500.0],
            depth: 0.75,
            mxd: 20.0,
            scm: 32.0,
        },
        FuelModel::G => FuelRow {
            load: [2.5, 2.0, 5.0, 0.5, 0.5],
            sav: [2000.0, 109.0, 30.0, 2000.0, 1500.0],
            depth: 1.0,
            mxd: 25.0,
            scm: 30.0,
        },
        FuelModel::L => FuelRow {
            load: [0.25, 0.0, 0.0, 0.5, 0.0],
            sav: [2000.0, 109.0, 30.0, 2000.0, 1500.0],
            depth: 1.0,
            mxd: 15.0,
            scm: 136.0,
        },
        FuelModel::T => FuelRow {
            load: [1.0, 0.5, 0.0, 0.5, 2.5],
            sav: [2500.0, 109.0, 30.0, 2000.0, 1500.0],
            depth: 1.25,
            mxd: 15.0,
            scm: 96.0,
        },
    }
}

fn build() -> (Layout, Vec<ParamEntry>) {
    let mut b = Builder { entries: Vec::new() };

    let emc = EmcIds {
        low: [
            b.coef("emc.low.c0", 0.03229, "EMC intercept, RH below the low break", NFDRS),
            b.coef("emc.low.c1", 0.281073, "EMC RH slope, low regime", NFDRS),
            b.coef("emc.low.c2", 0.000578, "EMC RH*T slope, low regime", NFDRS),
        ],
        mid: [
            b.coef("emc.mid.c0", 2.22749, "EMC intercept, middle regime", NFDRS),
            b.coef("emc.mid.c1", 0.160107, "EMC RH slope, middle regime", NFDRS),
            b.coef("emc.mid.c2", 0.014784, "EMC temperature slope, middle regime", NFDRS),
        ],
        high: [
            b.coef("emc.high.c0", 21.0606, "EMC intercept, RH above the high break", NFDRS),
            b.coef("emc.high.c1", 0.005565, "EMC RH^2 slope, high regime", NFDRS),
            b.coef("emc.high.c2", 0.00035, "EMC RH*T slope, high regime", NFDRS),
            b.coef("emc.high.c3", 0.483199, "EMC RH slope, high regime", NFDRS),
        ],
        rh_low_break: b.structural("emc.rh_low_break", 10.0, "RH (%) separating low and middle EMC regimes", NFDRS),
        rh_high_break: b.structural("emc.rh_high_break", 50.0, "RH (%) separating middle and high EMC regimes", NFDRS),
    };

    let dead = DeadFuelIds {
        mc1_factor: b.coef("dead.mc1_factor", 1.03, "1-hour moisture as a multiple of EMC", NFDRS),
        mc10_factor: b.coef("dead.mc10_factor", 1.28, "10-hour moisture as a multiple of EMC", NFDRS),
        wet_mc: b.coef("dead.wet_mc", 35.0, "fine dead-fuel moisture (%) under wetting rain", NFDRS),
        wet_threshold: b.structural("dead.wet_threshold", 1.0, "precipitation duration (h) that wets fine fuels", ARTIFACT),
        daylight_hours: b.coef("dead.daylight_hours", 12.0, "hours weighted toward the afternoon EMC", ARTIFACT),
        bnd100_rain_slope: b.coef("dead.bnd100.rain_slope", 0.5, "100-hour boundary rain term slope", NFDRS),
        bnd100_rain_intercept: b.coef("dead.bnd100.rain_intercept", 41.0, "100-hour boundary rain term intercept", NFDRS),
        bnd1000_rain_slope: b.coef("dead.bnd1000.rain_slope", 2.7, "1000-hour boundary rain term slope", NFDRS),
        bnd1000_rain_intercept: b.coef("dead.bnd1000.rain_intercept", 76.0, "1000-hour boundary rain term intercept", NFDRS),
        k100: b.coef("dead.k100", 1.0 - 0.87 * (-0.24f64).exp(), "daily response fraction of 100-hour moisture", NFDRS),
        k1000: b.coef(
            "dead.k1000",
            1.0 - (0.82 * (-0.168f64).exp()).powf(1.0 / 7.0),
            "daily response fraction of 1000-hour moisture (weekly rate spread over seven days)",
            NFDRS,
        ),
        seed_intercept: b.structural("dead.seed.intercept", 10.0, "spin-up seed moisture intercept (%)", ARTIFACT),
        seed_slope: b.structural("dead.seed.slope", 0.25, "spin-up seed moisture per inch of annual precipitation", ARTIFACT),
    };

    let mut herb_a = [ParamId(0); 4];
    let mut herb_b = [ParamId(0); 4];
    let mut woody_a = [ParamId(0); 4];
    let mut woody_b = [ParamId(0); 4];
    let mut woody_pregreen = [ParamId(0); 4];
    for (k, &(ha, hb, wa, wb, wp)) in LIVE_CLASS_TABLE.iter().enumerate() {
        let c = k + 1;
        herb_a[k] = b.coef(format!("live.class{c}.herb_a"), ha, "green herbaceous moisture intercept", NFDRS);
        herb_b[k] = b.coef(format!("live.class{c}.herb_b"), hb, "green herbaceous moisture per % 1000-hour", NFDRS);
        woody_a[k] = b.coef(format!("live.class{c}.woody_a"), wa, "green woody moisture intercept", NFDRS);
        woody_b[k] = b.coef(format!("live.class{c}.woody_b"), wb, "green woody moisture per % 1000-hour", NFDRS);
        woody_pregreen[k] = b.coef(format!("live.class{c}.woody_pregreen"), wp, "pre-green woody moisture (%)", NFDRS);
    }
    let live = LiveFuelIds {
        herb_a,
        herb_b,
        woody_a,
        woody_b,
        woody_pregreen,
        herb_min: b.structural("live.herb_min", 30.0, "cured herbaceous moisture floor (%)", NFDRS),
        herb_max: b.structural("live.herb_max", 250.0, "herbaceous moisture ceiling (%)", NFDRS),
        woody_max: b.structural("live.woody_max", 200.0, "woody moisture ceiling (%)", NFDRS),
        herb_weight_pregreen: b.structural("live.herb_weight.pregreen", 0.25, "pre-green share of green herbaceous moisture", ARTIFACT),
        herb_weight_transition: b.structural("live.herb_weight.transition", 0.5, "transition share of green herbaceous moisture", ARTIFACT),
        woody_weight_pregreen: b.structural("live.woody_weight.pregreen", 0.0, "pre-green share of green woody moisture", ARTIFACT),
    };

    let tmpprm = TmpprmIds {
        increment: [
            b.coef("tmpprm.increment.clear", 25.0, "fuel-level heating under clear sky (°F)", NFDRS),
            b.coef("tmpprm.increment.scattered", 19.0, "fuel-level heating under scattered cloud (°F)", NFDRS),
            b.coef("tmpprm.increment.broken", 12.0, "fuel-level heating under broken cloud (°F)", NFDRS),
            b.coef("tmpprm.increment.overcast", 5.0, "fuel-level heating under overcast (°F)", NFDRS),
        ],
        cloud_break: [
            b.structural("tmpprm.cloud_break.scattered", 0.1, "cloud fraction where scattered sky begins", NFDRS),
            b.structural("tmpprm.cloud_break.broken", 0.5, "cloud fraction where broken sky begins", NFDRS),
            b.structural("tmpprm.cloud_break.overcast", 0.9, "cloud fraction where overcast begins", NFDRS),
        ],
    };

    let ignition = IgnitionIds {
        qign: [
            b.coef("qign.c0", 144.5, "heat of ignition intercept", NFDRS),
            b.coef("qign.c1", 0.266, "heat of ignition TMPPRM slope", NFDRS),
            b.coef("qign.c2", 0.00058, "heat of ignition TMPPRM^2 slope", NFDRS),
            b.coef("qign.c3", 0.01, "heat of ignition TMPPRM*MC1 slope", NFDRS),
            b.coef("qign.c4", 18.54, "heat of ignition saturating moisture amplitude", NFDRS),
            b.coef("qign.c5", 0.151, "heat of ignition saturating moisture rate", NFDRS),
            b.coef("qign.c6", 6.4, "heat of ignition MC1 slope", NFDRS),
        ],
        tmpprm_exponent: b.exponent("qign.tmpprm_exponent", 2.0, "power of TMPPRM; base may be negative", NFDRS),
        chi_offset: b.coef("ignition.chi_offset", 344.0, "heat-of-ignition offset in the ignition probability", NFDRS),
        chi_scale: b.coef("ignition.chi_scale", 10.0, "heat-of-ignition divisor in the ignition probability", NFDRS),
        chi_exponent: b.exponent("ignition.chi_exponent", 3.6, "power applied to the scaled heat-of-ignition margin", NFDRS),
        pnorm1: b.coef("ignition.pnorm1", 0.00232, "ignition probability offset; IC is zero at or below it", NFDRS),
        pnorm2: b.coef("ignition.pnorm2", 0.99767, "ignition probability normalizer", NFDRS),
        pnorm3: b.coef("ignition.pnorm3", 0.0000185, "ignition probability scale", NFDRS),
    };

    let mut fuels = Vec::new();
    for model in FuelModel::ALL {
        let row = fuel_row(model);
        let m = model.code();
        let mut load = [ParamId(0); 5];
        let mut sav = [ParamId(0); 5];
        for (k, class) in FUEL_CLASSES.iter().enumerate() {
            let name = format!("fuel.{m}.load.{class}");
            load[k] = if row.load[k] > 0.0 {
                b.coef(name, row.load[k], "fuel loading (tons/acre)", NFDRS)
            } else {
                b.structural(name, 0.0, "fuel class absent from this model", NFDRS)
            };
        }
        for (k, class) in FUEL_CLASSES.iter().enumerate() {
            sav[k] = b.structural(format!("fuel.{m}.sav.{class}"), row.sav[k], "surface-area-to-volume ratio (1/ft)", NFDRS);
        }
        fuels.push(FuelIds {
            load,
            sav,
            depth: b.coef(format!("fuel.{m}.depth"), row.depth, "fuel bed depth (ft)", NFDRS),
            mxd: b.coef(format!("fuel.{m}.mxd"), row.mxd, "dead-fuel moisture of extinction (%)", NFDRS),
            scm: b.coef(format!("fuel.{m}.scm"), row.scm, "spread normalizer (ft/min)", NFDRS),
        });
    }

    let slope_factor = [
        b.coef("spread.slope_factor.class1", 0.267, "slope effect multiplier, class 1", NFDRS),
        b.coef("spread.slope_factor.class2", 0.533, "slope effect multiplier, class 2", NFDRS),
        b.coef("spread.slope_factor.class3", 1.068, "slope effect multiplier, class 3", NFDRS),
        b.coef("spread.slope_factor.class4", 2.134, "slope effect multiplier, class 4", NFDRS),
        b.coef("spread.slope_factor.class5", 4.273, "slope effect multiplier, class 5", NFDRS),
    ];
    let spread = SpreadIds {
        fuels,
        slope_factor,
        slope_beta_exponent: b.exponent("spread.slope_beta_exponent", -0.3, "packing-ratio power in the slope effect", ROTHERMEL),
        load_units: b.structural("spread.load_units", 2000.0 / 43560.0, "tons/acre to lb/ft^2", ARTIFACT),
        particle_density: b.structural("spread.particle_density", 32.0, "oven-dry particle density (lb/ft^3)", ROTHERMEL),
        total_mineral: b.structural("spread.total_mineral", 0.0555, "total mineral content fraction", ROTHERMEL),
        effective_mineral: b.structural("spread.effective_mineral", 0.01, "effective mineral content fraction", ROTHERMEL),
        heat_content: b.coef("spread.heat_content", 8000.0, "low heat content (BTU/lb)", ROTHERMEL),
        mineral_damping_coeff: b.coef("spread.mineral_damping.coeff", 0.174, "mineral damping coefficient", ROTHERMEL),
        mineral_damping_exponent: b.exponent("spread.mineral_damping.exponent", -0.19, "mineral damping exponent", ROTHERMEL),
        bop_coeff: b.coef("spread.optimum_packing.coeff", 3.348, "optimum packing ratio coefficient", ROTHERMEL),
        bop_exponent: b.exponent("spread.optimum_packing.exponent", -0.8189, "optimum packing ratio SAV exponent", ROTHERMEL),
        gmax_exponent: b.exponent("spread.gamma_max.exponent", 1.5, "SAV power in maximum reaction velocity", ROTHERMEL),
        gmax_a: b.coef("spread.gamma_max.a", 495.0, "maximum reaction velocity denominator intercept", ROTHERMEL),
        gmax_b: b.coef("spread.gamma_max.b", 0.0594, "maximum reaction velocity denominator slope", ROTHERMEL),
        a_coeff: b.coef("spread.gamma_shape.coeff", 133.0, "reaction velocity shape coefficient", ROTHERMEL),
        a_exponent: b.exponent("spread.gamma_shape.exponent", -0.7913, "reaction velocity shape SAV exponent", ROTHERMEL),
        xi_a: b.coef("spread.propagating_flux.a", 0.792, "propagating flux exponent intercept", ROTHERMEL),
        xi_b: b.coef("spread.propagating_flux.b", 0.681, "propagating flux exponent SAV slope", ROTHERMEL),
        xi_exponent: b.exponent("spread.propagating_flux.sav_exponent", 0.5, "propagating flux SAV power", ROTHERMEL),
        xi_c: b.coef("spread.propagating_flux.c", 192.0, "propagating flux denominator intercept", ROTHERMEL),
        xi_d: b.coef("spread.propagating_flux.d", 0.2595, "propagating flux denominator slope", ROTHERMEL),
        xi_beta_offset: b.structural("spread.propagating_flux.beta_offset", 0.1, "packing ratio offset", ROTHERMEL),
        wind_c_coeff: b.coef("spread.wind.c_coeff", 7.47, "wind factor coefficient C", ROTHERMEL),
        wind_c_rate: b.coef("spread.wind.c_rate", 0.133, "wind factor C decay rate", ROTHERMEL),
        wind_c_exponent: b.exponent("spread.wind.c_exponent", 0.55, "wind factor C SAV power", ROTHERMEL),
        wind_b_coeff: b.structural("spread.wind.b_coeff", 0.02526, "wind exponent B coefficient; base may be zero", ROTHERMEL),
        wind_b_exponent: b.exponent("spread.wind.b_exponent", 0.54, "wind exponent B SAV power", ROTHERMEL),
        wind_e_coeff: b.coef("spread.wind.e_coeff", 0.715, "wind factor E coefficient", ROTHERMEL),
        wind_e_rate: b.coef("spread.wind.e_rate", 0.000359, "wind factor E decay rate", ROTHERMEL),
        wind_units: b.structural("spread.wind.units", 88.0, "mph to ft/min", ARTIFACT),
        wind_floor: b.structural("spread.wind.floor", 1e-3, "lower bound on midflame wind (ft/min) before the log", ARTIFACT),
        damping: [
            b.coef("spread.moisture_damping.r1", 2.59, "moisture damping linear term", ROTHERMEL),
            b.coef("spread.moisture_damping.r2", 5.11, "moisture damping quadratic term", ROTHERMEL),
            b.coef("spread.moisture_damping.r3", 3.52, "moisture damping cubic term", ROTHERMEL),
        ],
        ignition_heat_a: b.coef("spread.ignition_heat.a", 250.0, "heat of preignition intercept (BTU/lb)", ROTHERMEL),
        ignition_heat_b: b.coef("spread.ignition_heat.b", 1116.0, "heat of preignition per unit moisture fraction", ROTHERMEL),
        dead_fineness: b.structural("spread.dead_fineness", 138.0, "effective heating number scale, dead fuels", ROTHERMEL),
        live_fineness: b.structural("spread.live_fineness", 500.0, "fine live fuel scale for live extinction", ROTHERMEL),
        live_mx_a: b.coef("spread.live_extinction.a", 2.9, "live moisture of extinction slope", ROTHERMEL),
        live_mx_b: b.coef("spread.live_extinction.b", 0.226, "live moisture of extinction offset (fraction)", ROTHERMEL),
    };

    let branch = BranchIds {
        emc_low: b.alpha("emc_low", 1.0, "EMC low/middle regime switch on RH (%)"),
        emc_high: b.alpha("emc_high", 1.0, "EMC middle/high regime switch on RH (%)"),
        wetting: b.alpha("wetting", 8.0, "fine-fuel wetting switch on precipitation hours"),
        cloud: [
            b.alpha("cloud_scattered", 50.0, "clear/scattered switch on cloud fraction"),
            b.alpha("cloud_broken", 50.0, "scattered/broken switch on cloud fraction"),
            b.alpha("cloud_overcast", 50.0, "broken/overcast switch on cloud fraction"),
        ],
        extinction_dead: b.alpha("extinction_dead", 20.0, "dead moisture ratio cap at extinction"),
        extinction_live: b.alpha("extinction_live", 20.0, "live moisture ratio cap at extinction"),
        live_extinction_floor: b.alpha("live_extinction_floor", 20.0, "live extinction floored at dead extinction"),
        scn_cap: b.alpha("scn_cap", 20.0, "normalized spread capped at one"),
        chi_floor: b.alpha("chi_floor", 1.0, "heat-of-ignition margin floored at zero"),
        pi_floor: b.alpha("pi_floor", 20.0, "ignition probability floored at zero"),
        pi_cap: b.alpha("pi_cap", 20.0, "ignition probability capped at one"),
        ic_zero: b.alpha("ic_zero", 200.0, "IC suppressed when the ignition term is at or below pnorm1"),
    };

    let layout = Layout {
        emc,
        dead,
        live,
        tmpprm,
        ignition,
        spread,
        branch,
    };
    (layout, b.entries)
}

fn defaults() -> &'static (Layout, Vec<ParamEntry>) {
    static DEFAULTS: OnceLock<(Layout, Vec<ParamEntry>)> = OnceLock::new();
    DEFAULTS.get_or_init(build)
}

/// The fixed parameter layout shared by every [`ParameterSet`].
pub fn layout() -> &'static Layout {
    &defaults().0
}

impl Default for ParameterSet {
    fn default() -> Self {
        ParameterSet {
            entries: defaults().1.clone(),
        }
    }
}

impl ParameterSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn value(&self, id: ParamId) -> f64 {
        self.entries[id.0].value
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .map(ParamId)
            .ok_or_else(|| Error::Ledger(format!("unknown parameter `{name}`")))
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(self.value(self.id(name)?))
    }

    pub fn set_value(&mut self, id: ParamId, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Ledger(format!("non-finite value for `{}`", self.entries[id.0].name)));
        }
        self.entries[id.0].value = value;
        Ok(())
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let id = self.id(name)?;
        self.set_value(id, value)
    }

    /// Exponents stay frozen whatever is requested.
    pub fn set_frozen(&mut self, id: ParamId, frozen: bool) {
        let e = &mut self.entries[id.0];
        e.frozen = frozen || e.kind == ParamKind::Exponent;
    }

    pub fn freeze_all(&mut self) {
        for e in &mut self.entries {
            e.frozen = true;
        }
    }

    /// Freezes everything except the named parameters.
    pub fn learn_only(&mut self, names: &[impl AsRef<str>]) -> Result<()> {
        let ids = names.iter().map(|n| self.id(n.as_ref())).collect::<Result<Vec<_>>>()?;
        self.freeze_all();
        for id in ids {
            if self.entries[id.0].kind == ParamKind::Exponent {
                return Err(Error::Ledger(format!("`{}` is an exponent and cannot be learned", self.entries[id.0].name)));
            }
            self.entries[id.0].frozen = false;
        }
        Ok(())
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.entries[id.0].frozen
    }

    pub fn learnable(&self) -> Vec<ParamId> {
        (0..self.entries.len()).map(ParamId).filter(|&id| !self.is_frozen(id)).collect()
    }

    /// Sharpness `α` of a branch site (the entry stores `ln α`).
    pub fn alpha(&self, id: ParamId) -> f64 {
        self.value(id).exp()
    }

    /// Sets every branch sharpness to `alpha`.
    pub fn set_all_alphas(&mut self, alpha: f64) -> Result<()> {
        if !(alpha > 0.0) {
            return Err(Error::Config(format!("branch sharpness must be positive, got {alpha}")));
        }
        for e in &mut self.entries {
            if e.kind == ParamKind::LogSharpness {
                e.value = alpha.ln();
            }
        }
        Ok(())
    }

    /// Canonical ledger text.
    pub fn to_ledger_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&LedgerRef(self)).expect("ledger serializes");
        s.push('\n');
        s
    }

    pub fn from_ledger_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, LedgerEntry> =
            serde_json::from_str(text).map_err(|e| Error::Ledger(e.to_string()))?;
        Self::from_ledger_map(raw)
    }

    pub(crate) fn from_ledger_map(mut raw: BTreeMap<String, LedgerEntry>) -> Result<Self> {
        let mut set = ParameterSet::default();
        for e in &mut set.entries {
            let Some(l) = raw.remove(&e.name) else {
                return Err(Error::Ledger(format!("missing parameter `{}`", e.name)));
            };
            if !l.value.is_finite() {
                return Err(Error::Ledger(format!("non-finite value for `{}`", e.name)));
            }
            e.value = l.value;
            e.frozen = l.frozen || e.kind == ParamKind::Exponent;
            if let Some(d) = l.description {
                e.description = d;
            }
            if let Some(s) = l.source {
                e.source = s;
            }
        }
        if let Some(name) = raw.keys().next() {
            return Err(Error::Ledger(format!("unknown parameter `{name}`")));
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_ledger_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ledger_json()).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical ledger text, hex encoded.
    pub fn ledger_hash(&self) -> String {
        let digest = Sha256::digest(self.to_ledger_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct LedgerEntry {
    pub value: f64,
    pub frozen: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ParamKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

pub(crate) struct LedgerRef<'a>(pub &'a ParameterSet);

impl Serialize for LedgerRef<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.entries.len()))?;
        for e in &self.0.entries {
            map.serialize_entry(
                &e.name,
                &LedgerEntry {
                    value: e.value,
                    frozen: e.frozen,
                    kind: Some(e.kind),
                    description: Some(e.description.clone()),
                    source: Some(e.source.clone()),
                },
            )?;
        }
        map.end()
    }
}
