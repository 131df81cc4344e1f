//! The IC chain recorded on a tape.
//!
//! Order: EMC, dead fuels, live fuels, TMPPRM, QIGN, SCN, P(F/I), IC. Every
//! step reads its constants from tape nodes indexed by [`ParamId`], so the same
//! code serves the hard pass, the relaxed pass, and gradient checks.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::params::{layout, ParamId, ParameterSet};
use crate::smoothing::BranchMode;

use super::inputs::{CellInputs, VegetationStage};

/// Days of 1000-hour boundary values averaged with today's.
pub const BOUNDARY_WINDOW: usize = 7;

/// Slow dead-fuel state carried from one day to the next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoistureCarry {
    pub prev_mc100: f64,
    pub prev_mc1000: f64,
    /// Most recent 1000-hour boundary values, oldest first, at most
    /// `BOUNDARY_WINDOW - 1` entries.
    pub boundary_history: Vec<f64>,
}

impl MoistureCarry {
    pub fn new(mc100: f64, mc1000: f64) -> Self {
        MoistureCarry {
            prev_mc100: mc100,
            prev_mc1000: mc1000,
            boundary_history: Vec::new(),
        }
    }
}

/// Named intermediates of one forward pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntermediateState {
    pub emc: f64,
    pub mc1: f64,
    pub mc10: f64,
    pub mc100: f64,
    pub mc1000: f64,
    pub live_herb_mc: f64,
    pub live_woody_mc: f64,
    pub tmpprm: f64,
    pub qign: f64,
    pub scn: f64,
    pub p_fi: f64,
    pub ic: f64,
}

/// Tape handles of the intermediates.
#[derive(Clone, Copy, Debug)]
pub struct IntermediateVars {
    pub emc: Var,
    pub mc1: Var,
    pub mc10: Var,
    pub mc100: Var,
    pub mc1000: Var,
    pub live_herb_mc: Var,
    pub live_woody_mc: Var,
    pub tmpprm: Var,
    pub qign: Var,
    pub scn: Var,
    pub p_fi: Var,
    pub ic: Var,
}

impl IntermediateVars {
    pub fn values(&self, tape: &Tape) -> IntermediateState {
        IntermediateState {
            emc: tape.value(self.emc),
            mc1: tape.value(self.mc1),
            mc10: tape.value(self.mc10),
            mc100: tape.value(self.mc100),
            mc1000: tape.value(self.mc1000),
            live_herb_mc: tape.value(self.live_herb_mc),
            live_woody_mc: tape.value(self.live_woody_mc),
            tmpprm: tape.value(self.tmpprm),
            qign: tape.value(self.qign),
            scn: tape.value(self.scn),
            p_fi: tape.value(self.p_fi),
            ic: tape.value(self.ic),
        }
    }
}

/// Dead-fuel moistures plus the carry for tomorrow.
#[derive(Clone, Debug)]
pub struct DeadFuel {
    pub mc1: Var,
    pub mc10: Var,
    pub mc100: Var,
    pub mc1000: Var,
    pub carry: MoistureCarry,
}

/// Moistures feeding the spread chain, in percent.
#[derive(Clone, Copy, Debug)]
pub struct FuelMoistures {
    pub mc1: Var,
    pub mc10: Var,
    pub mc100: Var,
    pub herb: Var,
    pub woody: Var,
}

/// Builder for one cell-day of the chain on a tape.
///
/// `p` holds one node per parameter, indexed by [`ParamId`]. Exponents are read
/// from `params` directly and never become tape nodes.
pub struct Chain<'a> {
    pub tape: &'a mut Tape,
    p: &'a [Var],
    params: &'a ParameterSet,
    mode: BranchMode,
}

impl<'a> Chain<'a> {
    pub fn new(tape: &'a mut Tape, p: &'a [Var], params: &'a ParameterSet, mode: BranchMode) -> Self {
        assert_eq!(p.len(), params.len(), "one tape node per parameter");
        Chain { tape, p, params, mode }
    }

    fn p(&self, id: ParamId) -> Var {
        self.p[id.0]
    }

    fn exponent(&self, id: ParamId) -> f64 {
        self.params.value(id)
    }

    fn c(&mut self, v: f64) -> Var {
        self.tape.constant(v)
    }

    fn alpha(&mut self, id: ParamId) -> Var {
        let la = self.p(id);
        self.tape.exp(la)
    }

    fn branch(&mut self, x: Var, a: Var, y: Var, z: Var, site: ParamId) -> Var {
        match self.mode {
            BranchMode::Hard => self.tape.smooth_branch(x, a, y, z, x, BranchMode::Hard),
            BranchMode::Smooth => {
                let alpha = self.alpha(site);
                self.tape.smooth_branch(x, a, y, z, alpha, BranchMode::Smooth)
            }
        }
    }

    fn soft_cap(&mut self, x: Var, c: f64, site: ParamId) -> Var {
        match self.mode {
            BranchMode::Hard => self.tape.min_c(x, c),
            BranchMode::Smooth => {
                let alpha = self.alpha(site);
                self.tape.soft_cap(x, c, alpha, BranchMode::Smooth)
            }
        }
    }

    fn soft_floor(&mut self, x: Var, c: f64, site: ParamId) -> Var {
        match self.mode {
            BranchMode::Hard => self.tape.max_c(x, c),
            BranchMode::Smooth => {
                let alpha = self.alpha(site);
                self.tape.soft_floor(x, c, alpha, BranchMode::Smooth)
            }
        }
    }

    /// `max(x, floor)` for a floor that is itself a node.
    fn soft_max_var(&mut self, x: Var, floor: Var, site: ParamId) -> Var {
        let d = self.tape.sub(x, floor);
        let d = self.soft_floor(d, 0.0, site);
        self.tape.add(d, floor)
    }

    fn max_var(&mut self, x: Var, floor: Var) -> Var {
        let d = self.tape.sub(x, floor);
        let d = self.tape.max_c(d, 0.0);
        self.tape.add(d, floor)
    }

    fn min_var(&mut self, x: Var, cap: Var) -> Var {
        let d = self.tape.sub(x, cap);
        let d = self.tape.min_c(d, 0.0);
        self.tape.add(d, cap)
    }

    fn lin(&mut self, a: Var, b: Var, x: Var) -> Var {
        let bx = self.tape.mul(b, x);
        self.tape.add(a, bx)
    }

    /// Three-regime equilibrium moisture content (%) at temperature `t` (°F) and
    /// relative humidity `rh` (%).
    pub fn emc_at(&mut self, t: Var, rh: Var) -> Var {
        let ids = &layout().emc;
        let t_ = &mut *self.tape;
        let p = self.p;

        let rh_t = t_.mul(rh, t);
        let low = {
            let a = t_.mul(p[ids.low[1].0], rh);
            let b = t_.mul(p[ids.low[2].0], rh_t);
            let s = t_.add(p[ids.low[0].0], a);
            t_.sub(s, b)
        };
        let mid = {
            let a = t_.mul(p[ids.mid[1].0], rh);
            let b = t_.mul(p[ids.mid[2].0], t);
            let s = t_.add(p[ids.mid[0].0], a);
            t_.sub(s, b)
        };
        let high = {
            let rh2 = t_.powc(rh, 2.0);
            let a = t_.mul(p[ids.high[1].0], rh2);
            let b = t_.mul(p[ids.high[2].0], rh_t);
            let c = t_.mul(p[ids.high[3].0], rh);
            let s = t_.add(p[ids.high[0].0], a);
            let s = t_.sub(s, b);
            t_.sub(s, c)
        };
        let inner = self.branch(rh, p[ids.rh_high_break.0], mid, high, layout().branch.emc_high);
        let emc = self.branch(rh, p[ids.rh_low_break.0], low, inner, layout().branch.emc_low);
        self.tape.max_c(emc, 0.0)
    }

    /// EMC at today's air temperature and humidity.
    pub fn compute_emc(&mut self, inputs: &CellInputs) -> Var {
        let t = self.c(inputs.temp);
        let rh = self.c(inputs.rh);
        self.emc_at(t, rh)
    }

    /// 100- and 1000-hour boundary moistures for one day, before relaxation.
    fn boundaries(&mut self, inputs: &CellInputs) -> (Var, Var) {
        let d = &layout().dead;
        let tmax = self.c(inputs.temp_max);
        let rhmin = self.c(inputs.rh_min);
        let emc_min = self.emc_at(tmax, rhmin);
        let tmin = self.c(inputs.temp_min);
        let rhmax = self.c(inputs.rh_max);
        let emc_max = self.emc_at(tmin, rhmax);

        let day = self.p(d.daylight_hours);
        let night = self.tape.rsub_c(24.0, day);
        let a = self.tape.mul(day, emc_min);
        let b = self.tape.mul(night, emc_max);
        let s = self.tape.add(a, b);
        let emc_bar = self.tape.mul_c(s, 1.0 / 24.0);

        let pdur = self.c(inputs.precip_duration);
        let dry_hours = self.c(24.0 - inputs.precip_duration);
        let dry = self.tape.mul(dry_hours, emc_bar);

        let boundary = |slope: ParamId, intercept: ParamId, chain: &mut Self| {
            let wet = chain.lin(chain.p(intercept), chain.p(slope), pdur);
            let wet = chain.tape.mul(pdur, wet);
            let s = chain.tape.add(dry, wet);
            chain.tape.mul_c(s, 1.0 / 24.0)
        };
        let b100 = boundary(d.bnd100_rain_slope, d.bnd100_rain_intercept, self);
        let b1000 = boundary(d.bnd1000_rain_slope, d.bnd1000_rain_intercept, self);
        (b100, b1000)
    }

    pub fn compute_dead_fuel_moistures(&mut self, inputs: &CellInputs, carry: &MoistureCarry, emc: Var) -> DeadFuel {
        let d = &layout().dead;
        let pdur = self.c(inputs.precip_duration);
        let wet = self.p(d.wet_mc);
        let thr = self.p(d.wet_threshold);

        let dry1 = self.tape.mul(self.p[d.mc1_factor.0], emc);
        let mc1 = self.branch(pdur, thr, dry1, wet, layout().branch.wetting);
        let dry10 = self.tape.mul(self.p[d.mc10_factor.0], emc);
        let mc10 = self.branch(pdur, thr, dry10, wet, layout().branch.wetting);

        let (b100, b1000) = self.boundaries(inputs);

        // The carry enters as data: gradients stop at the day boundary.
        let prev100 = self.c(carry.prev_mc100);
        let gap = self.tape.sub(b100, prev100);
        let step = self.tape.mul(gap, self.p[d.k100.0]);
        let mc100 = self.tape.add(prev100, step);

        let hist: f64 = carry.boundary_history.iter().sum();
        let n = carry.boundary_history.len() as f64 + 1.0;
        let h = self.c(hist);
        let total = self.tape.add(h, b1000);
        let bdybar = self.tape.mul_c(total, 1.0 / n);
        let prev1000 = self.c(carry.prev_mc1000);
        let gap = self.tape.sub(bdybar, prev1000);
        let step = self.tape.mul(gap, self.p[d.k1000.0]);
        let mc1000 = self.tape.add(prev1000, step);

        let mut boundary_history = carry.boundary_history.clone();
        boundary_history.push(self.tape.value(b1000));
        if boundary_history.len() > BOUNDARY_WINDOW - 1 {
            boundary_history.remove(0);
        }
        let carry = MoistureCarry {
            prev_mc100: self.tape.value(mc100),
            prev_mc1000: self.tape.value(mc1000),
            boundary_history,
        };
        DeadFuel {
            mc1,
            mc10,
            mc100,
            mc1000,
            carry,
        }
    }

    /// Herbaceous and woody moistures (%) from the vegetation stage, climate
    /// class and 1000-hour moisture. Stage selection is exact.
    pub fn compute_live_fuel_moistures(&mut self, inputs: &CellInputs, mc1000: Var) -> (Var, Var) {
        let l = &layout().live;
        let k = inputs.climate_zone.climate_class() as usize;

        let herb_min = self.p(l.herb_min);
        let herb_max = self.p(l.herb_max);
        let green = self.lin(self.p(l.herb_a[k]), self.p(l.herb_b[k]), mc1000);
        let green = self.max_var(green, herb_min);
        let green = self.min_var(green, herb_max);
        let herb = match inputs.vegetation_stage {
            VegetationStage::Cured => herb_min,
            VegetationStage::Green => green,
            VegetationStage::PreGreen | VegetationStage::Transition => {
                let w = if inputs.vegetation_stage == VegetationStage::PreGreen {
                    self.p(l.herb_weight_pregreen)
                } else {
                    self.p(l.herb_weight_transition)
                };
                let span = self.tape.sub(green, herb_min);
                let part = self.tape.mul(w, span);
                self.tape.add(herb_min, part)
            }
        };

        let pregreen = self.p(l.woody_pregreen[k]);
        let woody_max = self.p(l.woody_max);
        let green = self.lin(self.p(l.woody_a[k]), self.p(l.woody_b[k]), mc1000);
        let green = self.max_var(green, pregreen);
        let green = self.min_var(green, woody_max);
        let woody = if inputs.vegetation_stage == VegetationStage::PreGreen {
            let span = self.tape.sub(green, pregreen);
            let part = self.tape.mul(self.p[l.woody_weight_pregreen.0], span);
            self.tape.add(pregreen, part)
        } else {
            green
        };
        (herb, woody)
    }

    /// Air temperature plus the cloud-dependent solar increment (°F).
    pub fn compute_tmpprm(&mut self, inputs: &CellInputs) -> Var {
        let t = &layout().tmpprm;
        let br = &layout().branch;
        let cc = self.c(inputs.cloud_cover);
        let inc = self.branch(cc, self.p[t.cloud_break[2].0], self.p[t.increment[2].0], self.p[t.increment[3].0], br.cloud[2]);
        let inc = self.branch(cc, self.p[t.cloud_break[1].0], self.p[t.increment[1].0], inc, br.cloud[1]);
        let inc = self.branch(cc, self.p[t.cloud_break[0].0], self.p[t.increment[0].0], inc, br.cloud[0]);
        let air = self.c(inputs.temp);
        self.tape.add(air, inc)
    }

    /// Heat of ignition from fuel temperature (°F) and 1-hour moisture (%).
    pub fn compute_qign(&mut self, tmpprm: Var, mc1: Var) -> Var {
        let ig = &layout().ignition;
        let c = ig.qign.map(|id| self.p(id));
        let sq_exp = self.exponent(ig.tmpprm_exponent);
        let t_ = &mut *self.tape;

        let a = t_.mul(c[1], tmpprm);
        let sq = t_.powc(tmpprm, sq_exp);
        let b = t_.mul(c[2], sq);
        let tm = t_.mul(tmpprm, mc1);
        let d = t_.mul(c[3], tm);
        let decay = t_.mul(c[5], mc1);
        let decay = t_.neg(decay);
        let decay = t_.exp(decay);
        let sat = t_.rsub_c(1.0, decay);
        let e = t_.mul(c[4], sat);
        let f = t_.mul(c[6], mc1);

        let q = t_.sub(c[0], a);
        let q = t_.sub(q, b);
        let q = t_.sub(q, d);
        let q = t_.add(q, e);
        t_.add(q, f)
    }

    /// Normalized rate of spread in [0, 1] from the fuel model, wind, slope
    /// class and fuel moistures.
    pub fn compute_scn(&mut self, m: &FuelMoistures, inputs: &CellInputs) -> Var {
        let s = &layout().spread;
        let br = &layout().branch;
        let fuel = &s.fuels[inputs.fuel_model.index()];
        let moist = [m.mc1, m.mc10, m.mc100, m.herb, m.woody];

        let units = self.p(s.load_units);
        let rho_p = self.p(s.particle_density);
        let mut load = Vec::with_capacity(5);
        let mut sav = Vec::with_capacity(5);
        let mut area = Vec::with_capacity(5);
        let mut mfrac = Vec::with_capacity(5);
        for k in 0..5 {
            let w = self.tape.mul(self.p[fuel.load[k].0], units);
            let sv = self.p(fuel.sav[k]);
            let ws = self.tape.mul(w, sv);
            area.push(self.tape.div(ws, rho_p));
            load.push(w);
            sav.push(sv);
            mfrac.push(self.tape.mul_c(moist[k], 0.01));
        }
        let dead: Vec<usize> = (0..3).collect();
        let live: Vec<usize> = (3..5).filter(|&k| self.tape.value(load[k]) > 0.0).collect();

        // Within-category weights f_i and category weights.
        let dead_area = {
            let v: Vec<Var> = dead.iter().map(|&k| area[k]).collect();
            self.tape.sum(&v)
        };
        let live_area = {
            let v: Vec<Var> = live.iter().map(|&k| area[k]).collect();
            self.tape.sum(&v)
        };
        let total_area = self.tape.add(dead_area, live_area);
        let mut f = [None; 5];
        for &k in &dead {
            f[k] = Some(self.tape.div(area[k], dead_area));
        }
        for &k in &live {
            f[k] = Some(self.tape.div(area[k], live_area));
        }
        let f_dead = self.tape.div(dead_area, total_area);
        let f_live = self.tape.div(live_area, total_area);

        let weighted = |chain: &mut Self, idx: &[usize], of: &[Var]| {
            let terms: Vec<Var> = idx.iter().map(|&k| chain.tape.mul(f[k].unwrap(), of[k])).collect();
            chain.tape.sum(&terms)
        };

        let sigma_dead = weighted(self, &dead, &sav);
        let sigma_live = weighted(self, &live, &sav);
        let a = self.tape.mul(f_dead, sigma_dead);
        let b = self.tape.mul(f_live, sigma_live);
        let sigma = self.tape.add(a, b);

        let total_load = self.tape.sum(&load);
        let depth = self.p(fuel.depth);
        let rho_b = self.tape.div(total_load, depth);
        let beta = self.tape.div(rho_b, rho_p);

        let bop_e = self.exponent(s.bop_exponent);
        let sp = self.tape.powc(sigma, bop_e);
        let beta_op = self.tape.mul(self.p[s.bop_coeff.0], sp);
        let ratio = self.tape.div(beta, beta_op);

        let s15 = self.tape.powc(sigma, self.exponent(s.gmax_exponent));
        let den = self.lin(self.p(s.gmax_a), self.p(s.gmax_b), s15);
        let gamma_max = self.tape.div(s15, den);
        let sa = self.tape.powc(sigma, self.exponent(s.a_exponent));
        let shape = self.tape.mul(self.p[s.a_coeff.0], sa);
        let ln_ratio = self.tape.ln(ratio);
        let one_minus = self.tape.rsub_c(1.0, ratio);
        let arg = self.tape.add(ln_ratio, one_minus);
        let arg = self.tape.mul(shape, arg);
        let rel = self.tape.exp(arg);
        let gamma = self.tape.mul(gamma_max, rel);

        // Net loadings and category moistures.
        let st = self.p(s.total_mineral);
        let keep = self.tape.rsub_c(1.0, st);
        let wn_dead = weighted(self, &dead, &load);
        let wn_dead = self.tape.mul(wn_dead, keep);
        let wn_live = weighted(self, &live, &load);
        let wn_live = self.tape.mul(wn_live, keep);
        let m_dead = weighted(self, &dead, &mfrac);
        let m_live = weighted(self, &live, &mfrac);

        // Extinction moistures.
        let mxd = self.tape.mul_c(self.p[fuel.mxd.0], 0.01);
        let dead_fine = self.p(s.dead_fineness);
        let live_fine = self.p(s.live_fineness);
        let mut dw = Vec::new();
        let mut dwm = Vec::new();
        for &k in &dead {
            let e = self.tape.div(dead_fine, sav[k]);
            let e = self.tape.neg(e);
            let e = self.tape.exp(e);
            let w = self.tape.mul(load[k], e);
            dwm.push(self.tape.mul(w, mfrac[k]));
            dw.push(w);
        }
        let mut lw = Vec::new();
        for &k in &live {
            let e = self.tape.div(live_fine, sav[k]);
            let e = self.tape.neg(e);
            let e = self.tape.exp(e);
            lw.push(self.tape.mul(load[k], e));
        }
        let dw_sum = self.tape.sum(&dw);
        let dwm_sum = self.tape.sum(&dwm);
        let fine_dead_m = self.tape.div(dwm_sum, dw_sum);

        let r_dead = self.tape.div(m_dead, mxd);
        let r_dead = self.soft_cap(r_dead, 1.0, br.extinction_dead);
        let eta_dead = self.moisture_damping(r_dead);

        let heat = self.p(s.heat_content);
        let dead_term = self.tape.mul(wn_dead, eta_dead);
        let reaction_sum = if live.is_empty() {
            dead_term
        } else {
            let lw_sum = self.tape.sum(&lw);
            let wprime = self.tape.div(dw_sum, lw_sum);
            let frac = self.tape.div(fine_dead_m, mxd);
            let frac = self.tape.rsub_c(1.0, frac);
            let mxl = self.tape.mul(self.p[s.live_mx_a.0], wprime);
            let mxl = self.tape.mul(mxl, frac);
            let mxl = self.tape.sub(mxl, self.p[s.live_mx_b.0]);
            let mxl = self.soft_max_var(mxl, mxd, br.live_extinction_floor);
            let r_live = self.tape.div(m_live, mxl);
            let r_live = self.soft_cap(r_live, 1.0, br.extinction_live);
            let eta_live = self.moisture_damping(r_live);
            let live_term = self.tape.mul(wn_live, eta_live);
            self.tape.add(dead_term, live_term)
        };
        let se = self.p(s.effective_mineral);
        let se_pow = self.tape.powc(se, self.exponent(s.mineral_damping_exponent));
        let eta_s = self.tape.mul(self.p[s.mineral_damping_coeff.0], se_pow);
        let ir = self.tape.mul(gamma, heat);
        let ir = self.tape.mul(ir, eta_s);
        let ir = self.tape.mul(ir, reaction_sum);

        // Propagating flux ratio.
        let sroot = self.tape.powc(sigma, self.exponent(s.xi_exponent));
        let xa = self.lin(self.p(s.xi_a), self.p(s.xi_b), sroot);
        let bo = self.tape.add(beta, self.p[s.xi_beta_offset.0]);
        let xa = self.tape.mul(xa, bo);
        let xnum = self.tape.exp(xa);
        let xden = self.lin(self.p(s.xi_c), self.p(s.xi_d), sigma);
        let xi = self.tape.div(xnum, xden);

        // Wind factor: C (88 U)^B (β/βop)^-E with the wind term floored before the log.
        let sc = self.tape.powc(sigma, self.exponent(s.wind_c_exponent));
        let cexp = self.tape.mul(self.p[s.wind_c_rate.0], sc);
        let cexp = self.tape.neg(cexp);
        let cexp = self.tape.exp(cexp);
        let wc = self.tape.mul(self.p[s.wind_c_coeff.0], cexp);
        let sb = self.tape.powc(sigma, self.exponent(s.wind_b_exponent));
        let wb = self.tape.mul(self.p[s.wind_b_coeff.0], sb);
        let es = self.tape.mul(self.p[s.wind_e_rate.0], sigma);
        let es = self.tape.neg(es);
        let es = self.tape.exp(es);
        let we = self.tape.mul(self.p[s.wind_e_coeff.0], es);
        let ft = self.tape.mul_c(self.p[s.wind_units.0], inputs.wind_speed);
        let ft = self.max_var(ft, self.p[s.wind_floor.0]);
        let ln_u = self.tape.ln(ft);
        let wpow = self.tape.mul(wb, ln_u);
        let wpow = self.tape.exp(wpow);
        let rpow = self.tape.mul(we, ln_ratio);
        let rpow = self.tape.neg(rpow);
        let rpow = self.tape.exp(rpow);
        let phi_w = self.tape.mul(wc, wpow);
        let phi_w = self.tape.mul(phi_w, rpow);

        let bpow = self.tape.powc(beta, self.exponent(s.slope_beta_exponent));
        let slope = self.p(s.slope_factor[(inputs.slope_class - 1) as usize]);
        let phi_s = self.tape.mul(slope, bpow);

        // Heat sink.
        let qa = self.p(s.ignition_heat_a);
        let qb = self.p(s.ignition_heat_b);
        let sink_cat = |chain: &mut Self, idx: &[usize]| {
            let terms: Vec<Var> = idx
                .iter()
                .map(|&k| {
                    let e = chain.tape.div(dead_fine, sav[k]);
                    let e = chain.tape.neg(e);
                    let e = chain.tape.exp(e);
                    let q = chain.lin(qa, qb, mfrac[k]);
                    let t = chain.tape.mul(e, q);
                    chain.tape.mul(f[k].unwrap(), t)
                })
                .collect();
            chain.tape.sum(&terms)
        };
        let sink_dead = sink_cat(self, &dead);
        let sink_dead = self.tape.mul(f_dead, sink_dead);
        let sink = if live.is_empty() {
            sink_dead
        } else {
            let sink_live = sink_cat(self, &live);
            let sink_live = self.tape.mul(f_live, sink_live);
            self.tape.add(sink_dead, sink_live)
        };
        let sink = self.tape.mul(rho_b, sink);

        let wind_slope = self.tape.add(phi_w, phi_s);
        let wind_slope = self.tape.add_c(wind_slope, 1.0);
        let ros = self.tape.mul(ir, xi);
        let ros = self.tape.mul(ros, wind_slope);
        let ros = self.tape.div(ros, sink);

        let scn = self.tape.div(ros, self.p[fuel.scm.0]);
        let scn = self.soft_cap(scn, 1.0, br.scn_cap);
        self.tape.max_c(scn, 0.0)
    }

    fn moisture_damping(&mut self, r: Var) -> Var {
        let d = layout().spread.damping.map(|id| self.p(id));
        let r2 = self.tape.powc(r, 2.0);
        let r3 = self.tape.powc(r, 3.0);
        let a = self.tape.mul(d[0], r);
        let b = self.tape.mul(d[1], r2);
        let c = self.tape.mul(d[2], r3);
        let eta = self.tape.rsub_c(1.0, a);
        let eta = self.tape.add(eta, b);
        self.tape.sub(eta, c)
    }

    /// Probability of a reportable fire, √SCN.
    pub fn compute_pfi(&mut self, scn: Var) -> Var {
        self.tape.sqrt(scn)
    }

    /// Ignition component on the 0–100 scale.
    ///
    /// `g = ((offset − QIGN)/scale)^3.6 · pnorm3`; IC is zero when `g <= pnorm1`.
    pub fn compute_ic(&mut self, qign: Var, p_fi: Var) -> Var {
        let ig = &layout().ignition;
        let br = &layout().branch;
        let margin = self.tape.sub(self.p[ig.chi_offset.0], qign);
        let margin = self.soft_floor(margin, 0.0, br.chi_floor);
        let chi = self.tape.div(margin, self.p[ig.chi_scale.0]);
        let chi = self.tape.powc(chi, self.exponent(ig.chi_exponent));
        let g = self.tape.mul(chi, self.p[ig.pnorm3.0]);

        let pnorm1 = self.p(ig.pnorm1);
        let pi = self.tape.sub(g, pnorm1);
        let pi = self.tape.div(pi, self.p[ig.pnorm2.0]);
        let pi = self.soft_floor(pi, 0.0, br.pi_floor);
        let pi = self.soft_cap(pi, 1.0, br.pi_cap);
        let raw = self.tape.mul(pi, p_fi);
        let raw = self.tape.mul_c(raw, 100.0);

        let zero = self.c(0.0);
        self.branch(pnorm1, g, raw, zero, br.ic_zero)
    }

    /// Full chain for one cell-day.
    pub fn run(&mut self, inputs: &CellInputs, carry: &MoistureCarry) -> (IntermediateVars, MoistureCarry) {
        let emc = self.compute_emc(inputs);
        let dead = self.compute_dead_fuel_moistures(inputs, carry, emc);
        let (herb, woody) = self.compute_live_fuel_moistures(inputs, dead.mc1000);
        let tmpprm = self.compute_tmpprm(inputs);
        let qign = self.compute_qign(tmpprm, dead.mc1);
        let m = FuelMoistures {
            mc1: dead.mc1,
            mc10: dead.mc10,
            mc100: dead.mc100,
            herb,
            woody,
        };
        let scn = self.compute_scn(&m, inputs);
        let p_fi = self.compute_pfi(scn);
        let ic = self.compute_ic(qign, p_fi);
        let vars = IntermediateVars {
            emc,
            mc1: dead.mc1,
            mc10: dead.mc10,
            mc100: dead.mc100,
            mc1000: dead.mc1000,
            live_herb_mc: herb,
            live_woody_mc: woody,
            tmpprm,
            qign,
            scn,
            p_fi,
            ic,
        };
        (vars, dead.carry)
    }
}

/// Parameter leaves on a fresh tape: learnable entries become variables in
/// smooth mode, everything else constants.
pub fn parameter_leaves(tape: &mut Tape, params: &ParameterSet, mode: BranchMode) -> Vec<Var> {
    params
        .entries()
        .iter()
        .map(|e| {
            if mode == BranchMode::Smooth && !e.frozen {
                tape.variable(e.value)
            } else {
                tape.constant(e.value)
            }
        })
        .collect()
}

/// A recorded forward pass.
pub struct ForwardPass {
    pub tape: Tape,
    pub leaves: Vec<Var>,
    pub vars: IntermediateVars,
    pub state: IntermediateState,
    pub carry: MoistureCarry,
}

impl ForwardPass {
    /// d(IC)/d(parameter) for every parameter, zero for frozen ones.
    pub fn ic_gradient(&self, clip_limit: Option<f64>) -> Result<(Vec<f64>, crate::autodiff::Diagnostics)> {
        self.seeded_gradient(1.0, clip_limit)
    }

    /// Parameter adjoints for an upstream seed on IC.
    pub fn seeded_gradient(&self, seed: f64, clip_limit: Option<f64>) -> Result<(Vec<f64>, crate::autodiff::Diagnostics)> {
        let g = self.tape.backward_seeded(self.vars.ic, seed, clip_limit)?;
        Ok((self.leaves.iter().map(|&v| g.wrt(v)).collect(), g.diagnostics))
    }
}

pub fn forward_taped(
    inputs: &CellInputs,
    carry: &MoistureCarry,
    params: &ParameterSet,
    mode: BranchMode,
) -> Result<ForwardPass> {
    inputs.validate()?;
    let mut tape = Tape::with_capacity(params.len() + 900);
    let leaves = parameter_leaves(&mut tape, params, mode);
    let (vars, carry) = Chain::new(&mut tape, &leaves, params, mode).run(inputs, carry);
    tape.status()?;
    let state = vars.values(&tape);
    Ok(ForwardPass {
        tape,
        leaves,
        vars,
        state,
        carry,
    })
}

/// Runs the chain and returns the named intermediates and tomorrow's carry.
pub fn forward(
    inputs: &CellInputs,
    carry: &MoistureCarry,
    params: &ParameterSet,
    mode: BranchMode,
) -> Result<(IntermediateState, MoistureCarry)> {
    let pass = forward_taped(inputs, carry, params, mode)?;
    Ok((pass.state, pass.carry))
}
