//! Sweeps a relaxed branch across its switch point for a few sharpness
//! values and compares with the hard selection.

use pyric::smoothing::{smooth_branch, SmoothBranchParams};

fn main() -> pyric::Result<()> {
    let (a, y, z) = (10.0, 1.0, 5.0);
    let hard = SmoothBranchParams::hard();
    for alpha in [0.5, 2.0, 10.0, 100.0] {
        let soft = SmoothBranchParams::smooth(alpha)?;
        let row: Vec<String> = [8.0, 9.5, 10.0, 10.5, 12.0]
            .iter()
            .map(|&x| {
                let s = smooth_branch(x, a, y, z, &soft).unwrap();
                let h = smooth_branch(x, a, y, z, &hard).unwrap();
                format!("x={x:<4} {s:.4} (hard {h})")
            })
            .collect();
        println!("alpha {alpha:>5}: {}", row.join("  "));
    }
    Ok(())
}
