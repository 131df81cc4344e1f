//! Sigmoid relaxation of hard branches.
//!
//! `if x < a { y } else { z }` becomes `σ((x − a)·α)·(z − y) + y`. In hard mode
//! the literal branch is evaluated instead, with the tie `x == a` going to `z`.

use crate::autodiff::{sigmoid, Tape, Var};
use crate::error::{Error, Result};

/// Sharpness and mode of one branch site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothBranchParams {
    pub alpha: f64,
    pub hard_mode: bool,
}

impl SmoothBranchParams {
    pub fn smooth(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Config(format!("branch sharpness must be positive, got {alpha}")));
        }
        Ok(SmoothBranchParams {
            alpha,
            hard_mode: false,
        })
    }

    pub fn hard() -> Self {
        SmoothBranchParams {
            alpha: 1.0,
            hard_mode: true,
        }
    }
}

impl Default for SmoothBranchParams {
    fn default() -> Self {
        SmoothBranchParams {
            alpha: 1.0,
            hard_mode: false,
        }
    }
}

/// Scalar evaluation of the relaxed branch.
pub fn smooth_branch(x: f64, a: f64, y: f64, z: f64, params: &SmoothBranchParams) -> Result<f64> {
    for (field, v) in [("x", x), ("a", a), ("y", y), ("z", z)] {
        if !v.is_finite() {
            return Err(Error::input(field, format!("non-finite branch operand {v}")));
        }
    }
    if params.hard_mode {
        return Ok(if x < a { y } else { z });
    }
    if !(params.alpha > 0.0) {
        return Err(Error::Config(format!("branch sharpness must be positive, got {}", params.alpha)));
    }
    let s = sigmoid((x - a) * params.alpha);
    Ok(s * (z - y) + y)
}

/// How branch sites are evaluated on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchMode {
    Smooth,
    Hard,
}

impl Tape {
    /// Relaxed branch with sharpness taken from a tape node (usually `exp(log α)`).
    ///
    /// In [`BranchMode::Hard`] no nodes are recorded; the selected operand is
    /// returned and the side taken is appended to the tape signature.
    pub fn smooth_branch(&mut self, x: Var, a: Var, y: Var, z: Var, alpha: Var, mode: BranchMode) -> Var {
        match mode {
            BranchMode::Hard => {
                let below = self.value(x) < self.value(a);
                self.push_signature(below);
                if below {
                    y
                } else {
                    z
                }
            }
            BranchMode::Smooth => {
                let d = self.sub(x, a);
                let s = self.mul(d, alpha);
                let g = self.sigmoid(s);
                let span = self.sub(z, y);
                let m = self.mul(g, span);
                self.add(m, y)
            }
        }
    }

    /// `min(x, c)` approached through a relaxed branch from below.
    ///
    /// The blend `σ((x − c)α)(c − x) + x` lies between `x` and `c`; the final
    /// hard `min` keeps the result inside the range exactly.
    pub fn soft_cap(&mut self, x: Var, c: f64, alpha: Var, mode: BranchMode) -> Var {
        match mode {
            BranchMode::Hard => self.min_c(x, c),
            BranchMode::Smooth => {
                let cv = self.constant(c);
                let b = self.smooth_branch(x, cv, x, cv, alpha, mode);
                self.min_c(b, c)
            }
        }
    }

    /// `max(x, c)` approached through a relaxed branch from above.
    pub fn soft_floor(&mut self, x: Var, c: f64, alpha: Var, mode: BranchMode) -> Var {
        match mode {
            BranchMode::Hard => self.max_c(x, c),
            BranchMode::Smooth => {
                let cv = self.constant(c);
                let b = self.smooth_branch(x, cv, cv, x, alpha, mode);
                self.max_c(b, c)
            }
        }
    }
}
