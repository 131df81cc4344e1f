mod common;

use common::reference::Reference;
use proptest::prelude::*;
use pyric::nfdrs::{forward, random_carry, random_inputs, run_series, spin_up};
use pyric::params::ParameterSet;
use pyric::smoothing::BranchMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn hard_chain_matches_reference_on_random_days() {
    let params = ParameterSet::default();
    let oracle = Reference::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut nonzero = 0;
    for i in 0..400 {
        let x = random_inputs(&mut rng);
        let carry = random_carry(&mut rng);
        let (got, next) = forward(&x, &carry, &params, BranchMode::Hard).unwrap();
        let (want, want_next) = oracle.day(&x, &carry);
        let pairs = [
            ("emc", got.emc, want.emc),
            ("mc1", got.mc1, want.mc1),
            ("mc10", got.mc10, want.mc10),
            ("mc100", got.mc100, want.mc100),
            ("mc1000", got.mc1000, want.mc1000),
            ("herb", got.live_herb_mc, want.herb),
            ("woody", got.live_woody_mc, want.woody),
            ("tmpprm", got.tmpprm, want.tmpprm),
            ("qign", got.qign, want.qign),
            ("scn", got.scn, want.scn),
            ("p_fi", got.p_fi, want.p_fi),
            ("ic", got.ic, want.ic),
        ];
        for (name, g, w) in pairs {
            assert!(close(g, w), "case {i} {name}: chain {g} reference {w}\n{x:?}");
        }
        assert!(close(next.prev_mc100, want_next.prev_mc100));
        assert!(close(next.prev_mc1000, want_next.prev_mc1000));
        assert_eq!(next.boundary_history.len(), want_next.boundary_history.len());
        nonzero += (want.ic > 0.0) as usize;
    }
    // The sample must exercise both sides of the IC zero branch.
    assert!(nonzero > 40 && nonzero < 400, "nonzero IC in {nonzero}/400 cases");
}

#[test]
fn series_matches_reference_with_carry() {
    let params = ParameterSet::default();
    let oracle = Reference::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let days: Vec<_> = (0..60).map(|_| random_inputs(&mut rng)).collect();
    let got = run_series(&days, &params, BranchMode::Hard).unwrap();
    let mut carry = spin_up(&days, &params).unwrap();
    for (day, g) in days.iter().zip(&got) {
        let (w, next) = oracle.day(day, &carry);
        assert!(close(g.ic, w.ic), "{} vs {}", g.ic, w.ic);
        assert!(close(g.mc1000, w.mc1000));
        carry = next;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smooth_chain_approaches_hard_as_sharpness_grows(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_inputs(&mut rng);
        let carry = random_carry(&mut rng);
        let mut sharp = ParameterSet::default();
        let names: Vec<String> = sharp.entries().iter().map(|e| e.name.clone()).filter(|n| n.ends_with(".log_alpha")).collect();
        for name in names {
            sharp.set(&name, 60.0_f64.ln() + sharp.get(&name).unwrap()).unwrap();
        }
        let (hard, _) = forward(&x, &carry, &sharp, BranchMode::Hard).unwrap();
        let (soft, _) = forward(&x, &carry, &sharp, BranchMode::Smooth).unwrap();
        prop_assert!(soft.ic >= 0.0 && soft.ic <= 100.0);
        prop_assert!((soft.emc - hard.emc).abs() < 0.5 || (x.rh - 10.0).abs() < 0.5 || (x.rh - 50.0).abs() < 0.5);
    }
}
