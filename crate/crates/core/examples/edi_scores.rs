//! Hard and soft contingency counts and EDI for a toy index series.

use pyric::loss::{edi, hard_counts, soft_counts, DEFAULT_EPSILON};

fn main() -> pyric::Result<()> {
    let index = [3.0, 12.0, 48.0, 55.0, 21.0, 70.0, 9.0, 40.0, 66.0, 15.0];
    let fires = [false, false, true, true, false, true, false, false, true, false];
    let threshold = 45.0;

    let hard = hard_counts(&index, &fires, threshold)?;
    let score = edi(&hard, DEFAULT_EPSILON)?;
    println!(
        "hard: hits {} misses {} false alarms {} correct negatives {}  EDI {:.4}",
        hard.hits, hard.misses, hard.false_alarms, hard.correct_negatives, score.value
    );
    for beta in [0.1, 1.0, 10.0] {
        let soft = soft_counts(&index, &fires, threshold, beta)?;
        let s = edi(&soft, DEFAULT_EPSILON)?;
        println!(
            "soft beta {beta:>4}: H {:.3} F {:.3}  EDI {:.4}{}",
            s.h,
            s.f,
            s.value,
            if s.degenerate { " (rates clamped)" } else { "" }
        );
    }
    Ok(())
}
