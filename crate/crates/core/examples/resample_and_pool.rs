//! Puts a fine temperature field and fine fire detections onto a coarse
//! grid: bilinear for the field, any-fire pooling for detections.

use chrono::NaiveDate;
use pyric::data::{pool_fire, resample_continuous, FireObservationGrid, GridDefinition, Layer};

fn main() -> pyric::Result<()> {
    let fine = GridDefinition::regular(40.0, -120.0, -0.1, 0.1, 8, 8)?;
    let coarse = GridDefinition::regular(39.95, -119.95, -0.2, 0.2, 3, 3)?;

    let mut temp = Layer::filled(1, 8, 8, 0.0);
    for r in 0..8 {
        for c in 0..8 {
            temp.set(0, r, c, 60.0 + 2.0 * r as f32 + c as f32);
        }
    }
    let t = resample_continuous(&temp, &fine, &coarse)?;
    for r in 0..3 {
        let row: Vec<String> = (0..3).map(|c| format!("{:.1}", t.get(0, r, c).unwrap())).collect();
        println!("temp row {r}: {}", row.join(" "));
    }

    let start = NaiveDate::from_ymd_opt(2020, 7, 1).unwrap();
    let mut fires = FireObservationGrid::empty(fine.clone(), start, 1);
    fires.set(0, 1, 1, true);
    fires.set(0, 6, 5, true);
    let pooled = pool_fire(&fires, &coarse)?;
    for r in 0..3 {
        let row: Vec<u8> = (0..3).map(|c| pooled.get(0, r, c) as u8).collect();
        println!("fire row {r}: {row:?}");
    }
    Ok(())
}
