//! Finite-difference checks of the full smooth IC graph and of the EDI loss
//! at random valid points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{grad_check, Fault};
use crate::error::Result;
use crate::loss::{edi_loss, DEFAULT_BETA, DEFAULT_EPSILON};
use crate::nfdrs::{grad_check_ic, random_carry, random_inputs};
use crate::params::ParameterSet;

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub points: usize,
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    /// Index values per loss point.
    pub loss_samples: usize,
    /// Deliberately corrupts a primitive's derivative (negative control).
    pub fault: Option<Fault>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            points: 20,
            seed: 0,
            step: 1e-4,
            tolerance: 1e-4,
            loss_samples: 40,
            fault: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Graph {
    Ignition,
    EdiLoss,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointResult {
    pub graph: Graph,
    pub point: usize,
    pub max_relative_error: f64,
    pub worst_input: Option<String>,
    pub checked: usize,
    /// Inputs skipped because their perturbation crossed a branch or kink.
    pub excluded: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub tolerance: f64,
    pub step: f64,
    pub points: Vec<PointResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.points.iter().all(|p| p.passed)
    }

    pub fn max_error(&self, graph: Graph) -> f64 {
        self.points
            .iter()
            .filter(|p| p.graph == graph)
            .map(|p| p.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn excluded(&self) -> usize {
        self.points.iter().map(|p| p.excluded).sum()
    }
}

const STREAM_IGNITION: u64 = 1;
const STREAM_LOSS: u64 = 2;

pub fn run_suite(params: &ParameterSet, cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut points = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(STREAM_IGNITION);
    for point in 0..cfg.points {
        let inputs = random_inputs(&mut rng);
        let carry = random_carry(&mut rng);
        let (names, r) = grad_check_ic(&inputs, &carry, params, cfg.step, cfg.tolerance, cfg.fault)?;
        points.push(PointResult {
            graph: Graph::Ignition,
            point,
            max_relative_error: r.max_relative_error,
            worst_input: r.worst_input.map(|i| names[i].clone()),
            checked: r.checks.len() - r.excluded(),
            excluded: r.excluded(),
            passed: r.passed(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(STREAM_LOSS);
    for point in 0..cfg.points {
        let n = cfg.loss_samples.max(2);
        let threshold = rng.gen_range(20.0..60.0);
        // Index values within a few sigmoid widths of the threshold, checked
        // as offsets from it: the derivative is the same, and the relative
        // finite-difference step then matches the sigmoid's scale.
        let offsets: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect();
        let mut obs: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        obs[0] = true;
        obs[1] = false;
        let fault = cfg.fault;
        let r = grad_check(
            |tape, vars| {
                if let Some(f) = fault {
                    tape.inject_fault(f);
                }
                let x: Vec<_> = vars.iter().map(|&d| tape.add_c(d, threshold)).collect();
                edi_loss(tape, &x, &obs, threshold, DEFAULT_BETA, DEFAULT_EPSILON)
            },
            &offsets,
            cfg.step,
            cfg.tolerance,
        )?;
        points.push(PointResult {
            graph: Graph::EdiLoss,
            point,
            max_relative_error: r.max_relative_error,
            worst_input: r.worst_input.map(|i| format!("index[{i}]")),
            checked: r.checks.len() - r.excluded(),
            excluded: r.excluded(),
            passed: r.passed(),
        });
    }
    Ok(SuiteReport {
        tolerance: cfg.tolerance,
        step: cfg.step,
        points,
    })
}
