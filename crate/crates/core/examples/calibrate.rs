//! Recovers a shifted ignition parameter from synthetic fires.
//!
//! Small by default so it finishes quickly in release mode; pass a grid edge
//! and an epoch count to scale it up, e.g. `-- 16 15`.

use chrono::NaiveDate;
use pyric::data::synth::{generate_synthetic, square_grid, Scenario, SynthConfig};
use pyric::data::{temporal_split, DateRange};
use pyric::eval::{evaluate_region, training_threshold};
use pyric::params::ParameterSet;
use pyric::trainer::{train, TrainConfig};

fn main() -> pyric::Result<()> {
    let mut args = std::env::args().skip(1);
    let edge: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(6);

    let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    let cfg = SynthConfig::new(square_grid(edge, edge), start, 1096, 42, Scenario::ParameterShift);
    let synth = generate_synthetic(&cfg)?;
    let (train_data, test) = temporal_split(&synth.dataset, DateRange::years(2019, 2020)?, DateRange::years(2021, 2021)?)?;

    let mut params = ParameterSet::default();
    params.learn_only(std::slice::from_ref(&cfg.shifted_parameter))?;
    let tc = TrainConfig {
        learning_rate: 3000.0,
        max_epochs: epochs,
        quantile_q: 0.9,
        ..Default::default()
    };
    let outcome = train(&train_data, &params, &tc)?;
    for r in &outcome.history {
        println!("epoch {:>2}: validation EDI {:.4}", r.epoch, r.validation_edi);
    }

    let name = &cfg.shifted_parameter;
    let truth = synth.truth.get(name)?;
    let learned = outcome.params.get(name)?;
    println!(
        "{name}: default {:.3}  learned {learned:.3}  truth {truth:.3}  (error {:.1}%)",
        params.get(name)?,
        100.0 * (learned - truth).abs() / truth.abs()
    );
    for (label, p) in [("default", &params), ("trained", &outcome.params)] {
        let th = training_threshold(&train_data, p, tc.quantile_q)?;
        let report = evaluate_region(&test, p, th.value, 0)?;
        println!("{label} test EDI: {:.4}", report.aggregate_edi().unwrap_or(f64::NAN));
    }
    Ok(())
}
