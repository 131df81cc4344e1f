//! Scalar reverse-mode automatic differentiation.
//!
//! A [`Tape`] records one node per scalar operation. Nodes are appended in
//! evaluation order, so every parent has a smaller index than its child and a
//! single reverse sweep over the node list performs reverse accumulation.
//!
//! Local partial derivatives are cached at record time. Singular points such as
//! `sqrt` at zero produce an infinite local partial; those are bounded during
//! [`Tape::backward`] by value clipping of each node's accumulated adjoint.

use std::fmt;

use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Primitive kinds supported by the tape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Constant,
    Variable,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Sqrt,
    /// `x^p` with a fixed, non-learnable exponent `p`.
    PowConst(f64),
    Sigmoid,
    /// `min(x, c)` against a constant.
    MinConst(f64),
    /// `max(x, c)` against a constant.
    MaxConst(f64),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Variable => "variable",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Sqrt => "sqrt",
            Op::PowConst(_) => "pow_const",
            Op::Sigmoid => "sigmoid",
            Op::MinConst(_) => "min_const",
            Op::MaxConst(_) => "max_const",
        }
    }

    fn arity(&self) -> usize {
        match self {
            Op::Constant | Op::Variable => 0,
            Op::Add | Op::Sub | Op::Mul | Op::Div => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A recorded scalar operation.
#[derive(Clone, Debug)]
pub struct TapeNode {
    pub op: Op,
    pub parents: [u32; 2],
    pub value: f64,
    pub local_grads: [f64; 2],
    /// False for nodes with no variable ancestor; backward skips them.
    pub needs_grad: bool,
}

impl TapeNode {
    pub fn parent_vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.parents[..self.op.arity()].iter().map(|&p| Var(p))
    }
}

#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fault {
    /// Scales the cached sigmoid derivative; a negative control for gradient checks.
    SigmoidGradScale(f64),
}

/// Scalar reverse-mode tape.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<TapeNode>,
    error: Option<Error>,
    // Side taken at every kink or hard branch, in recording order.
    signature: Vec<bool>,
    fault: Option<Fault>,
}

/// Bookkeeping from a backward sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub clip_events: u64,
    pub nan_zeroed: u64,
}

impl Diagnostics {
    pub fn merge(&mut self, other: Diagnostics) {
        self.clip_events += other.clip_events;
        self.nan_zeroed += other.nan_zeroed;
    }
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<f64>,
    pub clip_limit: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> f64 {
        self.adjoints[v.index()]
    }

    pub fn adjoints(&self) -> &[f64] {
        &self.adjoints
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            nodes: Vec::with_capacity(n),
            ..Self::default()
        }
    }

    #[doc(hidden)]
    pub fn inject_fault(&mut self, fault: Fault) {
        self.fault = Some(fault);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: Var) -> &TapeNode {
        &self.nodes[v.index()]
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.index()].value
    }

    /// Sides taken at each `min_const`/`max_const` kink and each hard branch.
    pub fn signature(&self) -> &[bool] {
        &self.signature
    }

    /// First forward-domain error hit while recording, if any.
    pub fn status(&self) -> Result<()> {
        match &self.error {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    pub(crate) fn push_signature(&mut self, side: bool) {
        self.signature.push(side);
    }

    /// Appends a node after checking its parents and value.
    ///
    /// Local partials are derived from `op` and the parent values.
    pub fn record(&mut self, op: Op, parents: &[Var], value: f64) -> Result<Var> {
        if parents.len() != op.arity() {
            return Err(Error::Tape(format!(
                "{op} expects {} parents, got {}",
                op.arity(),
                parents.len()
            )));
        }
        let next = self.nodes.len() as u32;
        let mut p = [0u32; 2];
        for (slot, v) in p.iter_mut().zip(parents) {
            if v.0 >= next {
                return Err(Error::Tape(format!("{op}: parent {} is not on the tape", v.0)));
            }
            *slot = v.0;
        }
        if !value.is_finite() {
            return Err(Error::ForwardDomain {
                primitive: op.name(),
                value,
            });
        }
        let pv = |i: usize| self.nodes[p[i] as usize].value;
        let local_grads = match op {
            Op::Constant | Op::Variable => [0.0, 0.0],
            Op::Add => [1.0, 1.0],
            Op::Sub => [1.0, -1.0],
            Op::Mul => [pv(1), pv(0)],
            Op::Div => {
                let b = pv(1);
                [1.0 / b, -pv(0) / (b * b)]
            }
            Op::Neg => [-1.0, 0.0],
            Op::Exp => [value, 0.0],
            Op::Log => [1.0 / pv(0), 0.0],
            Op::Sqrt => {
                // +inf at zero; bounded by clipping during backward.
                if value == 0.0 {
                    [f64::INFINITY, 0.0]
                } else {
                    [0.5 / value, 0.0]
                }
            }
            Op::PowConst(e) => {
                let x = pv(0);
                let d = if e == 0.0 {
                    0.0
                } else if x == 0.0 && e < 1.0 {
                    f64::INFINITY
                } else {
                    e * x.powf(e - 1.0)
                };
                [d, 0.0]
            }
            Op::Sigmoid => {
                let mut d = value * (1.0 - value);
                if let Some(Fault::SigmoidGradScale(s)) = self.fault {
                    d *= s;
                }
                [d, 0.0]
            }
            Op::MinConst(c) => [if pv(0) < c { 1.0 } else { 0.0 }, 0.0],
            Op::MaxConst(c) => [if pv(0) > c { 1.0 } else { 0.0 }, 0.0],
        };
        let needs_grad = match op {
            Op::Variable => true,
            Op::Constant => false,
            _ => parents.iter().any(|v| self.nodes[v.index()].needs_grad),
        };
        self.nodes.push(TapeNode {
            op,
            parents: p,
            value,
            local_grads,
            needs_grad,
        });
        Ok(Var(next))
    }

    // Records without failing the caller; the first error is kept and
    // reported by `status`.
    fn rec(&mut self, op: Op, parents: &[Var], value: f64) -> Var {
        match self.record(op, parents, value) {
            Ok(v) => v,
            Err(e) => {
                if self.error.is_none() {
                    self.error = Some(e);
                }
                let next = self.nodes.len() as u32;
                let mut p = [0u32; 2];
                for (slot, v) in p.iter_mut().zip(parents) {
                    *slot = v.0.min(next.saturating_sub(1));
                }
                self.nodes.push(TapeNode {
                    op,
                    parents: p,
                    value: f64::NAN,
                    local_grads: [0.0, 0.0],
                    needs_grad: false,
                });
                Var(next)
            }
        }
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.rec(Op::Constant, &[], value)
    }

    pub fn variable(&mut self, value: f64) -> Var {
        self.rec(Op::Variable, &[], value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.rec(Op::Add, &[a, b], v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.rec(Op::Sub, &[a, b], v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.rec(Op::Mul, &[a, b], v)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) / self.value(b);
        self.rec(Op::Div, &[a, b], v)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.rec(Op::Neg, &[a], v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).exp();
        self.rec(Op::Exp, &[a], v)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).ln();
        self.rec(Op::Log, &[a], v)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).sqrt();
        self.rec(Op::Sqrt, &[a], v)
    }

    pub fn powc(&mut self, a: Var, exponent: f64) -> Var {
        let x = self.value(a);
        let v = if exponent == 2.0 { x * x } else { x.powf(exponent) };
        self.rec(Op::PowConst(exponent), &[a], v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = sigmoid(self.value(a));
        self.rec(Op::Sigmoid, &[a], v)
    }

    pub fn min_c(&mut self, a: Var, c: f64) -> Var {
        let x = self.value(a);
        self.signature.push(x < c);
        self.rec(Op::MinConst(c), &[a], x.min(c))
    }

    pub fn max_c(&mut self, a: Var, c: f64) -> Var {
        let x = self.value(a);
        self.signature.push(x > c);
        self.rec(Op::MaxConst(c), &[a], x.max(c))
    }

    pub fn add_c(&mut self, a: Var, c: f64) -> Var {
        let k = self.constant(c);
        self.add(a, k)
    }

    pub fn mul_c(&mut self, a: Var, c: f64) -> Var {
        let k = self.constant(c);
        self.mul(a, k)
    }

    /// `c - a`
    pub fn rsub_c(&mut self, c: f64, a: Var) -> Var {
        let k = self.constant(c);
        self.sub(k, a)
    }

    /// Sum in slice order; an empty slice yields a zero constant.
    pub fn sum(&mut self, terms: &[Var]) -> Var {
        match terms.split_first() {
            None => self.constant(0.0),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &t| self.add(acc, t)),
        }
    }

    /// Reverse accumulation from `output` with unit seed.
    pub fn backward(&self, output: Var, clip_limit: Option<f64>) -> Result<Gradients> {
        self.backward_seeded(output, 1.0, clip_limit)
    }

    /// Reverse accumulation from `output` seeded with `seed`.
    ///
    /// Each node's accumulated adjoint is clipped to `[-limit, limit]` before it
    /// is propagated to its parents. A NaN adjoint (from `0 * inf` products or
    /// opposing infinities) is replaced by zero and counted. Without a clip
    /// limit, infinite adjoints are zeroed and counted the same way.
    pub fn backward_seeded(&self, output: Var, seed: f64, clip_limit: Option<f64>) -> Result<Gradients> {
        self.status()?;
        let out = output.index();
        if out >= self.nodes.len() {
            return Err(Error::Tape(format!("output node {out} is not on the tape")));
        }
        if let Some(limit) = clip_limit {
            if !(limit > 0.0) {
                return Err(Error::Config(format!("clip limit must be positive, got {limit}")));
            }
        }
        let mut adj = vec![0.0; out + 1];
        let mut diag = Diagnostics::default();
        adj[out] = seed;
        for i in (0..=out).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                adj[i] = 0.0;
                continue;
            }
            let mut a = adj[i];
            if a.is_nan() {
                a = 0.0;
                diag.nan_zeroed += 1;
            }
            match clip_limit {
                Some(limit) if a.abs() > limit => {
                    a = limit.copysign(a);
                    diag.clip_events += 1;
                }
                None if a.is_infinite() => {
                    a = 0.0;
                    diag.nan_zeroed += 1;
                }
                _ => {}
            }
            adj[i] = a;
            if a == 0.0 {
                continue;
            }
            for k in 0..node.op.arity() {
                let p = node.parents[k] as usize;
                if !self.nodes[p].needs_grad {
                    continue;
                }
                let mut contrib = a * node.local_grads[k];
                if contrib.is_nan() {
                    contrib = 0.0;
                    diag.nan_zeroed += 1;
                }
                adj[p] += contrib;
            }
        }
        adj.resize(self.nodes.len(), 0.0);
        Ok(Gradients {
            adjoints: adj,
            clip_limit,
            diagnostics: diag,
        })
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-input outcome of a finite-difference comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct InputCheck {
    pub index: usize,
    pub reverse: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
    /// True when the perturbation crossed a kink or hard branch.
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub checks: Vec<InputCheck>,
    pub max_relative_error: f64,
    pub worst_input: Option<usize>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= self.tolerance
    }

    pub fn excluded(&self) -> usize {
        self.checks.iter().filter(|c| c.excluded).count()
    }
}

/// Denominator floor for relative errors, applied to the sensitivity
/// `|x_i| * df/dx_i` and scaled by `max(1, |f|)`, so gradients below the
/// rounding noise of the difference quotient compare cleanly.
pub const GRADCHECK_ABS_FLOOR: f64 = 1e-6;

/// Compares reverse-mode gradients of `f` against central finite differences.
///
/// The step for input `i` is `step * |x_i|` (or `step` when `x_i == 0`). An
/// input whose perturbation flips the side of any kink or hard branch is
/// excluded from the maximum and marked in the report. The relative error is
/// `|ad - fd| / max(|ad|, |fd|, floor * max(1, |f|) / |x_i|)` with
/// [`GRADCHECK_ABS_FLOOR`] as the floor.
pub fn grad_check<F>(f: F, inputs: &[f64], step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |x: &[f64]| -> Result<(Tape, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = x.iter().map(|&v| tape.variable(v)).collect();
        let out = f(&mut tape, &vars)?;
        tape.status()?;
        Ok((tape, vars, out))
    };
    let (tape, vars, out) = eval(inputs)?;
    let grads = tape.backward(out, None)?;
    let base_sig = tape.signature().to_vec();
    let out_scale = tape.value(out).abs().max(1.0);

    let mut checks = Vec::with_capacity(inputs.len());
    let mut worst: Option<(usize, f64)> = None;
    let mut x = inputs.to_vec();
    for i in 0..inputs.len() {
        let h = if inputs[i] == 0.0 { step } else { step * inputs[i].abs() };
        x[i] = inputs[i] + h;
        let (tp, _, op) = eval(&x)?;
        x[i] = inputs[i] - h;
        let (tm, _, om) = eval(&x)?;
        x[i] = inputs[i];
        let fd = (tp.value(op) - tm.value(om)) / (2.0 * h);
        let rev = grads.wrt(vars[i]);
        let excluded = tp.signature() != base_sig.as_slice() || tm.signature() != base_sig.as_slice();
        let scale = if inputs[i] == 0.0 { 1.0 } else { inputs[i].abs() };
        let rel = (rev - fd).abs() / rev.abs().max(fd.abs()).max(GRADCHECK_ABS_FLOOR * out_scale / scale);
        if !excluded && worst.is_none_or(|(_, w)| rel > w) {
            worst = Some((i, rel));
        }
        checks.push(InputCheck {
            index: i,
            reverse: rev,
            finite_difference: fd,
            relative_error: rel,
            excluded,
        });
    }
    Ok(GradCheckReport {
        checks,
        max_relative_error: worst.map_or(0.0, |(_, w)| w),
        worst_input: worst.map(|(i, _)| i),
        tolerance,
    })
}
