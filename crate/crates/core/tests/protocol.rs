use chrono::NaiveDate;
use proptest::prelude::*;
use pyric::data::synth::{generate_synthetic, square_grid, Scenario, SynthConfig};
use pyric::data::{fuzzy_match, quantile_threshold, temporal_split, DateRange};
use pyric::eval::{evaluate_region, training_threshold};
use pyric::loss::{edi, hard_counts};
use pyric::nfdrs::{run_series, CellInputs, ClimateZone, FuelModel, VegetationStage};
use pyric::params::ParameterSet;
use pyric::smoothing::BranchMode;

fn dataset(days: usize, seed: u64) -> pyric::data::Dataset {
    let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    generate_synthetic(&SynthConfig::new(square_grid(5, 5), start, days, seed, Scenario::Seasonal))
        .unwrap()
        .dataset
}

#[test]
fn threshold_ignores_the_test_period() {
    let data = dataset(731, 3);
    let train = DateRange::years(2019, 2019).unwrap();
    let test = DateRange::years(2020, 2020).unwrap();
    let params = ParameterSet::default();
    let (tr, te) = temporal_split(&data, train, test).unwrap();
    let before = training_threshold(&tr, &params, 0.8).unwrap();

    // Scramble the test year's weather and fires; the threshold must not move.
    let mut altered = data.clone();
    let t0 = 365;
    for (var, scale, shift) in [("temp", 1.0, 12.0), ("temp_max", 1.0, 12.0), ("temp_min", 1.0, 12.0), ("wind_speed", 0.5, 0.0)] {
        let layer = &mut altered.stack.variables.get_mut(var).unwrap().layer;
        for t in t0..layer.n_time {
            for r in 0..5 {
                for c in 0..5 {
                    let v = layer.get(t, r, c).unwrap();
                    layer.set(t, r, c, v * scale + shift);
                }
            }
        }
    }
    for t in t0..altered.n_days() {
        altered.fires.set(t, 0, 0, true);
    }
    let (tr2, te2) = temporal_split(&altered, train, test).unwrap();
    let after = training_threshold(&tr2, &params, 0.8).unwrap();
    assert_eq!(before, after);
    assert_eq!(before.training_range, train);

    // The test period is scored with that threshold; only its own data changes the score.
    let a = evaluate_region(&te, &params, before.value, 0).unwrap();
    let b = evaluate_region(&te2, &params, after.value, 0).unwrap();
    assert_eq!(a.metadata.threshold, b.metadata.threshold);
    assert_ne!(a.aggregate_counts, b.aggregate_counts);
}

#[test]
fn overlapping_ranges_are_rejected() {
    let data = dataset(731, 1);
    let r = temporal_split(
        &data,
        DateRange::years(2019, 2020).unwrap(),
        DateRange::years(2020, 2020).unwrap(),
    );
    assert!(r.is_err());
}

#[test]
fn desert_drought_dries_thousand_hour_fuels() {
    let day = CellInputs {
        temp: 104.0,
        temp_max: 112.0,
        temp_min: 78.0,
        rh: 6.0,
        rh_max: 20.0,
        rh_min: 4.0,
        wind_speed: 8.0,
        cloud_cover: 0.0,
        precip_duration: 0.0,
        annual_precip_mean: 4.0,
        vegetation_stage: VegetationStage::Cured,
        vegetation_cover: 0,
        slope_class: 1,
        fuel_model: FuelModel::A,
        climate_zone: ClimateZone::Arid,
    };
    // A wet spell first so the slow classes start well above equilibrium.
    let mut days = vec![
        CellInputs {
            precip_duration: 12.0,
            rh: 90.0,
            rh_max: 100.0,
            rh_min: 70.0,
            ..day.clone()
        };
        30
    ];
    days.extend(std::iter::repeat_n(day, 120));
    let states = run_series(&days, &ParameterSet::default(), BranchMode::Hard).unwrap();
    let dry = &states[30..];
    for w in dry.windows(2) {
        assert!(w[1].mc1000 <= w[0].mc1000 + 1e-12, "{} then {}", w[0].mc1000, w[1].mc1000);
    }
    assert!(dry[0].mc1000 - dry[dry.len() - 1].mc1000 > 5.0);
    assert!(dry.iter().all(|s| s.ic > 0.0));
}

proptest! {
    #[test]
    fn quantile_lies_between_order_statistics(v in prop::collection::vec(-100.0f64..100.0, 1..60), q in 0.0f64..=1.0) {
        let t = quantile_threshold(&v, q).unwrap();
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(t >= lo && t <= hi);
    }

    #[test]
    fn fuzzy_matching_never_lowers_edi(
        seed in any::<u64>(),
        radius in 0usize..3,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (rows, cols) = (6, 6);
        let n = rows * cols;
        let pred: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let obs: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.2)).collect();
        let exact = fuzzy_match(&pred, &obs, None, rows, cols, 0).unwrap();
        let fuzzy = fuzzy_match(&pred, &obs, None, rows, cols, radius).unwrap();
        prop_assert!(fuzzy.hits >= exact.hits);
        prop_assert!(fuzzy.false_alarms <= exact.false_alarms);
        prop_assert_eq!(fuzzy.total(), exact.total());
        if exact.fires() > 0.0 && exact.non_fires() > 0.0 {
            prop_assert!(edi(&fuzzy, 1e-6).unwrap().value >= edi(&exact, 1e-6).unwrap().value - 1e-12);
        }
        // Radius zero is the plain contingency table.
        let as_index: Vec<f64> = pred.iter().map(|&p| p as u8 as f64).collect();
        prop_assert_eq!(exact, hard_counts(&as_index, &obs, 0.5).unwrap());
    }
}
