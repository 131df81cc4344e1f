//! Builds a small expression on the tape, runs a backward pass with and
//! without adjoint clipping, and checks the gradient by finite differences.

use pyric::autodiff::{grad_check, Tape};

fn main() -> pyric::Result<()> {
    // f(x, y) = exp(3x) * y / (1 + y^2)
    let mut tape = Tape::new();
    let x = tape.variable(2.0);
    let y = tape.variable(0.5);
    let e = tape.mul_c(x, 3.0);
    let e = tape.exp(e);
    let y2 = tape.powc(y, 2.0);
    let den = tape.add_c(y2, 1.0);
    let q = tape.div(y, den);
    let f = tape.mul(e, q);
    println!("f = {:.4}", tape.value(f));

    let free = tape.backward(f, None)?;
    println!("unclipped: df/dx {:.3}  df/dy {:.3}", free.wrt(x), free.wrt(y));
    let clipped = tape.backward(f, Some(10.0))?;
    println!(
        "clip 10:   df/dx {:.3}  df/dy {:.3}  ({} adjoints clipped)",
        clipped.wrt(x),
        clipped.wrt(y),
        clipped.diagnostics.clip_events
    );

    let report = grad_check(
        |t, v| {
            let e = t.mul_c(v[0], 3.0);
            let e = t.exp(e);
            let y2 = t.powc(v[1], 2.0);
            let den = t.add_c(y2, 1.0);
            let q = t.div(v[1], den);
            Ok(t.mul(e, q))
        },
        &[2.0, 0.5],
        1e-5,
        1e-6,
    )?;
    println!("finite-difference check: max relative error {:.2e}", report.max_relative_error);
    Ok(())
}
