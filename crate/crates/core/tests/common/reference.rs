//! Plain-f64 restatement of the hard IC chain with literal if/else at every
//! branch. Shares nothing with the library but the ledger values (looked up
//! by name) and the input structs.

use pyric::nfdrs::{CellInputs, ClimateZone, MoistureCarry, VegetationStage};
use pyric::params::ParameterSet;

pub struct Reference<'a> {
    p: &'a ParameterSet,
}

#[derive(Debug, Clone, Copy)]
pub struct RefState {
    pub emc: f64,
    pub mc1: f64,
    pub mc10: f64,
    pub mc100: f64,
    pub mc1000: f64,
    pub herb: f64,
    pub woody: f64,
    pub tmpprm: f64,
    pub qign: f64,
    pub scn: f64,
    pub p_fi: f64,
    pub ic: f64,
}

impl<'a> Reference<'a> {
    pub fn new(p: &'a ParameterSet) -> Self {
        Reference { p }
    }

    fn v(&self, name: &str) -> f64 {
        self.p.get(name).unwrap_or_else(|_| panic!("ledger has no {name}"))
    }

    pub fn emc(&self, t: f64, rh: f64) -> f64 {
        let e = if rh < self.v("emc.rh_low_break") {
            self.v("emc.low.c0") + self.v("emc.low.c1") * rh - self.v("emc.low.c2") * rh * t
        } else if rh < self.v("emc.rh_high_break") {
            self.v("emc.mid.c0") + self.v("emc.mid.c1") * rh - self.v("emc.mid.c2") * t
        } else {
            self.v("emc.high.c0") + self.v("emc.high.c1") * rh * rh
                - self.v("emc.high.c2") * rh * t
                - self.v("emc.high.c3") * rh
        };
        if e < 0.0 {
            0.0
        } else {
            e
        }
    }

    /// One day; returns the state and tomorrow's carry.
    pub fn day(&self, x: &CellInputs, carry: &MoistureCarry) -> (RefState, MoistureCarry) {
        let emc = self.emc(x.temp, x.rh);
        let wet = x.precip_duration >= self.v("dead.wet_threshold");
        let (mc1, mc10) = if wet {
            (self.v("dead.wet_mc"), self.v("dead.wet_mc"))
        } else {
            (self.v("dead.mc1_factor") * emc, self.v("dead.mc10_factor") * emc)
        };

        let emc_min = self.emc(x.temp_max, x.rh_min);
        let emc_max = self.emc(x.temp_min, x.rh_max);
        let day = self.v("dead.daylight_hours");
        let emc_bar = (day * emc_min + (24.0 - day) * emc_max) / 24.0;
        let pd = x.precip_duration;
        let b100 = ((24.0 - pd) * emc_bar
            + pd * (self.v("dead.bnd100.rain_intercept") + self.v("dead.bnd100.rain_slope") * pd))
            / 24.0;
        let b1000 = ((24.0 - pd) * emc_bar
            + pd * (self.v("dead.bnd1000.rain_intercept") + self.v("dead.bnd1000.rain_slope") * pd))
            / 24.0;
        let mc100 = carry.prev_mc100 + (b100 - carry.prev_mc100) * self.v("dead.k100");
        let n = carry.boundary_history.len() + 1;
        let bdy = (carry.boundary_history.iter().sum::<f64>() + b1000) / n as f64;
        let mc1000 = carry.prev_mc1000 + (bdy - carry.prev_mc1000) * self.v("dead.k1000");
        let mut hist = carry.boundary_history.clone();
        hist.push(b1000);
        while hist.len() > 6 {
            hist.remove(0);
        }
        let next = MoistureCarry {
            prev_mc100: mc100,
            prev_mc1000: mc1000,
            boundary_history: hist,
        };

        let class = match x.climate_zone {
            ClimateZone::Arid => 1,
            ClimateZone::Temperate => 2,
            ClimateZone::Continental => 3,
            ClimateZone::Tropical | ClimateZone::Polar => 4,
        };
        let lv = |s: &str| self.v(&format!("live.class{class}.{s}"));
        let herb_min = self.v("live.herb_min");
        let green_herb = (lv("herb_a") + lv("herb_b") * mc1000).max(herb_min).min(self.v("live.herb_max"));
        let herb = match x.vegetation_stage {
            VegetationStage::Cured => herb_min,
            VegetationStage::Green => green_herb,
            VegetationStage::PreGreen => herb_min + self.v("live.herb_weight.pregreen") * (green_herb - herb_min),
            VegetationStage::Transition => herb_min + self.v("live.herb_weight.transition") * (green_herb - herb_min),
        };
        let pre = lv("woody_pregreen");
        let green_woody = (lv("woody_a") + lv("woody_b") * mc1000).max(pre).min(self.v("live.woody_max"));
        let woody = if x.vegetation_stage == VegetationStage::PreGreen {
            pre + self.v("live.woody_weight.pregreen") * (green_woody - pre)
        } else {
            green_woody
        };

        let cc = x.cloud_cover;
        let inc = if cc < self.v("tmpprm.cloud_break.scattered") {
            self.v("tmpprm.increment.clear")
        } else if cc < self.v("tmpprm.cloud_break.broken") {
            self.v("tmpprm.increment.scattered")
        } else if cc < self.v("tmpprm.cloud_break.overcast") {
            self.v("tmpprm.increment.broken")
        } else {
            self.v("tmpprm.increment.overcast")
        };
        let tmpprm = x.temp + inc;

        let q = |i: usize| self.v(&format!("qign.c{i}"));
        let qign = q(0) - q(1) * tmpprm - q(2) * tmpprm.powf(self.v("qign.tmpprm_exponent")) - q(3) * tmpprm * mc1
            + q(4) * (1.0 - (-q(5) * mc1).exp())
            + q(6) * mc1;

        let scn = self.scn(x, [mc1, mc10, mc100, herb, woody]);
        let p_fi = scn.sqrt();

        let margin = (self.v("ignition.chi_offset") - qign).max(0.0);
        let g = (margin / self.v("ignition.chi_scale")).powf(self.v("ignition.chi_exponent")) * self.v("ignition.pnorm3");
        let pnorm1 = self.v("ignition.pnorm1");
        let ic = if pnorm1 < g {
            let pi = ((g - pnorm1) / self.v("ignition.pnorm2")).clamp(0.0, 1.0);
            100.0 * pi * p_fi
        } else {
            0.0
        };
        let state = RefState {
            emc,
            mc1,
            mc10,
            mc100,
            mc1000,
            herb,
            woody,
            tmpprm,
            qign,
            scn,
            p_fi,
            ic,
        };
        (state, next)
    }

    fn scn(&self, x: &CellInputs, moisture: [f64; 5]) -> f64 {
        let m = x.fuel_model.code();
        let classes = ["1h", "10h", "100h", "herb", "woody"];
        let s = |n: &str| self.v(&format!("spread.{n}"));
        let rho_p = s("particle_density");
        let w: Vec<f64> = classes.iter().map(|c| self.v(&format!("fuel.{m}.load.{c}")) * s("load_units")).collect();
        let sv: Vec<f64> = classes.iter().map(|c| self.v(&format!("fuel.{m}.sav.{c}"))).collect();
        let mf: Vec<f64> = moisture.iter().map(|v| v / 100.0).collect();
        let a: Vec<f64> = (0..5).map(|k| w[k] * sv[k] / rho_p).collect();
        let live: Vec<usize> = (3..5).filter(|&k| w[k] > 0.0).collect();
        let dead = [0usize, 1, 2];

        let a_dead: f64 = dead.iter().map(|&k| a[k]).sum();
        let a_live: f64 = live.iter().map(|&k| a[k]).sum();
        let f = |k: usize| if k < 3 { a[k] / a_dead } else { a[k] / a_live };
        let f_dead = a_dead / (a_dead + a_live);
        let f_live = a_live / (a_dead + a_live);
        let wsum = |idx: &[usize], of: &[f64]| idx.iter().map(|&k| f(k) * of[k]).sum::<f64>();

        let sigma = f_dead * wsum(&dead, &sv) + f_live * wsum(&live, &sv);
        let rho_b = w.iter().sum::<f64>() / self.v(&format!("fuel.{m}.depth"));
        let beta = rho_b / rho_p;
        let beta_op = s("optimum_packing.coeff") * sigma.powf(s("optimum_packing.exponent"));
        let ratio = beta / beta_op;
        let s15 = sigma.powf(s("gamma_max.exponent"));
        let gamma_max = s15 / (s("gamma_max.a") + s("gamma_max.b") * s15);
        let shape = s("gamma_shape.coeff") * sigma.powf(s("gamma_shape.exponent"));
        let gamma = gamma_max * (shape * (ratio.ln() + 1.0 - ratio)).exp();

        let keep = 1.0 - s("total_mineral");
        let wn_dead = wsum(&dead, &w) * keep;
        let wn_live = wsum(&live, &w) * keep;
        let m_dead = wsum(&dead, &mf);
        let m_live = wsum(&live, &mf);
        let mxd = self.v(&format!("fuel.{m}.mxd")) / 100.0;
        let damp = |r: f64| 1.0 - s("moisture_damping.r1") * r + s("moisture_damping.r2") * r * r - s("moisture_damping.r3") * r * r * r;

        let dw: Vec<f64> = dead.iter().map(|&k| w[k] * (-s("dead_fineness") / sv[k]).exp()).collect();
        let dw_sum: f64 = dw.iter().sum();
        let fine_dead_m = dead.iter().zip(&dw).map(|(&k, d)| d * mf[k]).sum::<f64>() / dw_sum;
        let eta_dead = damp((m_dead / mxd).min(1.0));
        let mut reaction = wn_dead * eta_dead;
        if !live.is_empty() {
            let lw_sum: f64 = live.iter().map(|&k| w[k] * (-s("live_fineness") / sv[k]).exp()).sum();
            let mut mxl = s("live_extinction.a") * (dw_sum / lw_sum) * (1.0 - fine_dead_m / mxd) - s("live_extinction.b");
            if mxl < mxd {
                mxl = mxd;
            }
            reaction += wn_live * damp((m_live / mxl).min(1.0));
        }
        let eta_s = s("mineral_damping.coeff") * s("effective_mineral").powf(s("mineral_damping.exponent"));
        let ir = gamma * s("heat_content") * eta_s * reaction;

        let xi = ((s("propagating_flux.a") + s("propagating_flux.b") * sigma.powf(s("propagating_flux.sav_exponent")))
            * (beta + s("propagating_flux.beta_offset")))
        .exp()
            / (s("propagating_flux.c") + s("propagating_flux.d") * sigma);

        let c = s("wind.c_coeff") * (-s("wind.c_rate") * sigma.powf(s("wind.c_exponent"))).exp();
        let b = s("wind.b_coeff") * sigma.powf(s("wind.b_exponent"));
        let e = s("wind.e_coeff") * (-s("wind.e_rate") * sigma).exp();
        let u = (s("wind.units") * x.wind_speed).max(s("wind.floor"));
        let phi_w = c * u.powf(b) * ratio.powf(-e);
        let phi_s = s(&format!("slope_factor.class{}", x.slope_class)) * beta.powf(s("slope_beta_exponent"));

        let qig = |k: usize| (-s("dead_fineness") / sv[k]).exp() * (s("ignition_heat.a") + s("ignition_heat.b") * mf[k]);
        let mut sink = f_dead * dead.iter().map(|&k| f(k) * qig(k)).sum::<f64>();
        if !live.is_empty() {
            sink += f_live * live.iter().map(|&k| f(k) * qig(k)).sum::<f64>();
        }
        let ros = ir * xi * (1.0 + phi_w + phi_s) / (rho_b * sink);
        (ros / self.v(&format!("fuel.{m}.scm"))).clamp(0.0, 1.0)
    }
}
