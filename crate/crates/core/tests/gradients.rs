//! Reverse-mode gradients against an independent oracle: the sum over every
//! path from output to input of the product of hand-derived local partials.

use proptest::prelude::*;
use pyric::autodiff::{Op, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Local partials from parent values alone, not from the tape's cache.
fn partials(op: Op, a: f64, b: f64) -> [f64; 2] {
    let s = 1.0 / (1.0 + (-a).exp());
    match op {
        Op::Add => [1.0, 1.0],
        Op::Sub => [1.0, -1.0],
        Op::Mul => [b, a],
        Op::Div => [1.0 / b, -a / (b * b)],
        Op::Neg => [-1.0, 0.0],
        Op::Exp => [a.exp(), 0.0],
        Op::Log => [1.0 / a, 0.0],
        Op::Sqrt => [0.5 / a.sqrt(), 0.0],
        Op::PowConst(p) => [p * a.powf(p - 1.0), 0.0],
        Op::Sigmoid => [s * (1.0 - s), 0.0],
        Op::MinConst(c) => [if a < c { 1.0 } else { 0.0 }, 0.0],
        Op::MaxConst(c) => [if a > c { 1.0 } else { 0.0 }, 0.0],
        Op::Constant | Op::Variable => [0.0, 0.0],
    }
}

fn arity(op: Op) -> usize {
    match op {
        Op::Constant | Op::Variable => 0,
        Op::Add | Op::Sub | Op::Mul | Op::Div => 2,
        _ => 1,
    }
}

/// Sum over paths from `node` down to `target` of the product of partials.
fn path_sum(tape: &Tape, handles: &[Var], node: usize, target: usize) -> f64 {
    if node == target {
        return 1.0;
    }
    let n = tape.node(handles[node]);
    let k = arity(n.op);
    if k == 0 {
        return 0.0;
    }
    let value = |i: usize| tape.value(handles[n.parents[i] as usize]);
    let d = partials(n.op, value(0), if k == 2 { value(1) } else { 0.0 });
    (0..k).map(|i| d[i] * path_sum(tape, handles, n.parents[i] as usize, target)).sum()
}

/// Random DAG of at most eight nodes with every operand inside its domain and
/// away from kinks.
fn random_graph(seed: u64) -> (Tape, Vec<Var>, Vec<Var>, Var) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tape = Tape::new();
    let mut nodes = Vec::new();
    let n_inputs = rng.gen_range(1..=3);
    let inputs: Vec<Var> = (0..n_inputs).map(|_| tape.variable(rng.gen_range(0.3..2.0))).collect();
    nodes.extend(&inputs);
    if rng.gen_bool(0.5) {
        nodes.push(tape.constant(rng.gen_range(0.5..1.5)));
    }
    while nodes.len() < 8 {
        let a = nodes[rng.gen_range(0..nodes.len())];
        let b = nodes[rng.gen_range(0..nodes.len())];
        let (va, vb) = (tape.value(a), tape.value(b));
        let v = match rng.gen_range(0..12) {
            0 => tape.add(a, b),
            1 => tape.sub(a, b),
            2 => tape.mul(a, b),
            3 if vb.abs() > 0.2 => tape.div(a, b),
            4 => tape.neg(a),
            5 if va.abs() < 4.0 => tape.exp(a),
            6 if va > 0.2 => tape.ln(a),
            7 if va > 0.2 => tape.sqrt(a),
            8 if va > 0.2 => tape.powc(a, rng.gen_range(-1.5..2.5)),
            9 => tape.sigmoid(a),
            10 => {
                let c = va + if rng.gen_bool(0.5) { 0.5 } else { -0.5 };
                tape.min_c(a, c)
            }
            11 => {
                let c = va + if rng.gen_bool(0.5) { 0.5 } else { -0.5 };
                tape.max_c(a, c)
            }
            _ => continue,
        };
        nodes.push(v);
    }
    let out = *nodes.last().unwrap();
    // Handles indexed by node position; every node was returned by a call above.
    let mut handles = nodes.clone();
    handles.sort();
    handles.dedup();
    assert_eq!(handles.len(), tape.len());
    (tape, handles, inputs, out)
}

#[test]
fn backward_equals_path_enumeration() {
    for seed in 0..500 {
        let (tape, handles, inputs, out) = random_graph(seed);
        let g = tape.backward(out, None).unwrap();
        for &x in &inputs {
            let want = path_sum(&tape, &handles, out.index(), x.index());
            let got = g.wrt(x);
            assert!(
                (got - want).abs() <= 1e-10 * (1.0 + want.abs()),
                "seed {seed}: d out/d x{} = {got}, paths give {want}",
                x.index()
            );
        }
    }
}

proptest! {
    #[test]
    fn clipped_adjoints_respect_the_limit(seed in any::<u64>(), limit in 0.01f64..5.0) {
        let (tape, _, inputs, out) = random_graph(seed);
        let g = tape.backward(out, Some(limit)).unwrap();
        prop_assert!(g.adjoints().iter().all(|a| a.abs() <= limit));
        let free = tape.backward(out, None).unwrap();
        prop_assert_eq!(g.diagnostics.clip_events == 0, free.adjoints().iter().all(|a| a.abs() <= limit));
        for &x in &inputs {
            prop_assert!(g.wrt(x).is_finite());
        }
    }

    #[test]
    fn seeded_backward_is_linear_in_the_seed(seed in any::<u64>(), s in -50.0f64..50.0) {
        let (tape, _, inputs, out) = random_graph(seed);
        let unit = tape.backward(out, None).unwrap();
        let scaled = tape.backward_seeded(out, s, None).unwrap();
        for &x in &inputs {
            let want = s * unit.wrt(x);
            prop_assert!((scaled.wrt(x) - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }
}
