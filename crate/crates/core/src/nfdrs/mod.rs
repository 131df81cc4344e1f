//! NFDRS Ignition Component as a differentiable chain.

mod chain;
mod inputs;
mod sampling;

pub use chain::{
    forward, forward_taped, parameter_leaves, Chain, DeadFuel, ForwardPass, FuelMoistures, IntermediateState,
    IntermediateVars, MoistureCarry, BOUNDARY_WINDOW,
};
pub use inputs::*;
pub use sampling::{random_carry, random_inputs};

use crate::autodiff::{grad_check, GradCheckReport, Tape};
use crate::error::{Error, Result};
use crate::params::{layout, ParameterSet};
use crate::smoothing::BranchMode;

/// Days of input used to spin up the slow moisture classes.
pub const SPIN_UP_DAYS: usize = 30;
/// Passes over the spin-up window.
pub const SPIN_UP_PASSES: usize = 3;

/// Seed moisture for the slow classes before spin-up, from climatology.
pub fn climatology_seed(annual_precip_mean: f64, params: &ParameterSet) -> f64 {
    let d = &layout().dead;
    params.value(d.seed_intercept) + params.value(d.seed_slope) * annual_precip_mean
}

/// Initial carry for a cell: the climatology seed relaxed over the first
/// [`SPIN_UP_DAYS`] days, repeated [`SPIN_UP_PASSES`] times.
pub fn spin_up(days: &[CellInputs], params: &ParameterSet) -> Result<MoistureCarry> {
    Ok(spin_up_trace(days, params)?.pop().expect("trace is never empty"))
}

/// Carry after every spin-up day, starting with the seed.
pub fn spin_up_trace(days: &[CellInputs], params: &ParameterSet) -> Result<Vec<MoistureCarry>> {
    let first = days
        .first()
        .ok_or_else(|| Error::input("days", "spin-up needs at least one day"))?;
    let seed = climatology_seed(first.annual_precip_mean, params);
    let window = &days[..days.len().min(SPIN_UP_DAYS)];
    let mut carry = MoistureCarry::new(seed, seed);
    let mut trace = vec![carry.clone()];
    for _ in 0..SPIN_UP_PASSES {
        for day in window {
            let (_, next) = forward(day, &carry, params, BranchMode::Hard)?;
            carry = next;
            trace.push(carry.clone());
        }
    }
    Ok(trace)
}

/// Runs a cell through consecutive days from a spun-up carry.
pub fn run_series(days: &[CellInputs], params: &ParameterSet, mode: BranchMode) -> Result<Vec<IntermediateState>> {
    if days.is_empty() {
        return Ok(Vec::new());
    }
    let mut carry = spin_up(days, params)?;
    let mut out = Vec::with_capacity(days.len());
    for day in days {
        let (state, next) = forward(day, &carry, params, mode)?;
        out.push(state);
        carry = next;
    }
    Ok(out)
}

/// Fuel moistures in percent, used to evaluate the ignition tail directly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moistures {
    pub mc1: f64,
    pub mc10: f64,
    pub mc100: f64,
    pub herb: f64,
    pub woody: f64,
}

/// TMPPRM → QIGN → SCN → P(F/I) → IC from given fuel moistures.
///
/// Returns `(qign, scn, p_fi, ic)`.
pub fn ignition_from_moistures(
    inputs: &CellInputs,
    m: &Moistures,
    params: &ParameterSet,
    mode: BranchMode,
) -> Result<(f64, f64, f64, f64)> {
    inputs.validate()?;
    let mut tape = Tape::new();
    let leaves = parameter_leaves(&mut tape, params, BranchMode::Hard);
    let fm = FuelMoistures {
        mc1: tape.constant(m.mc1),
        mc10: tape.constant(m.mc10),
        mc100: tape.constant(m.mc100),
        herb: tape.constant(m.herb),
        woody: tape.constant(m.woody),
    };
    let mut chain = Chain::new(&mut tape, &leaves, params, mode);
    let tmpprm = chain.compute_tmpprm(inputs);
    let qign = chain.compute_qign(tmpprm, fm.mc1);
    let scn = chain.compute_scn(&fm, inputs);
    let pfi = chain.compute_pfi(scn);
    let ic = chain.compute_ic(qign, pfi);
    tape.status()?;
    Ok((tape.value(qign), tape.value(scn), tape.value(pfi), tape.value(ic)))
}

/// Finite-difference check of d(IC)/d(parameter) over every learnable
/// parameter of `params` at one cell-day.
pub fn grad_check_ic(
    inputs: &CellInputs,
    carry: &MoistureCarry,
    params: &ParameterSet,
    step: f64,
    tolerance: f64,
    fault: Option<crate::autodiff::Fault>,
) -> Result<(Vec<String>, GradCheckReport)> {
    inputs.validate()?;
    let learn = params.learnable();
    let names = learn.iter().map(|&id| params.entry(id).name.clone()).collect();
    let x0: Vec<f64> = learn.iter().map(|&id| params.value(id)).collect();
    let report = grad_check(
        |tape, vars| {
            if let Some(f) = fault {
                tape.inject_fault(f);
            }
            let mut leaves: Vec<_> = params.entries().iter().map(|e| tape.constant(e.value)).collect();
            for (k, &id) in learn.iter().enumerate() {
                leaves[id.0] = vars[k];
            }
            let (vars, _) = Chain::new(tape, &leaves, params, BranchMode::Smooth).run(inputs, carry);
            Ok(vars.ic)
        },
        &x0,
        step,
        tolerance,
    )?;
    Ok((names, report))
}
