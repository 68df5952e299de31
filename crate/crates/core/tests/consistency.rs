use num_bigint::BigUint;
use towerfact::census::{census, first_run};
use towerfact::densities::{density_d, lemma1_bound};
use towerfact::runs::{verify_run, RunVerification};

#[test]
fn census_frequencies_approach_the_densities() {
    let x = 10_000_000;
    let c = census(x, 1 << 20, 2).unwrap();
    for k in 1..=3 {
        let d = density_d(k as u32, 1e-12).unwrap();
        let freq = c.count(k) as f64 / x as f64;
        assert!((d.estimate - freq).abs() < 1e-3, "k = {k}: {} vs {freq}", d.estimate);
    }
}

#[test]
fn densities_respect_the_lemma() {
    for k in 2..=4 {
        let d = density_d(k, 1e-14).unwrap();
        assert!(d.estimate - d.error_bound < lemma1_bound(k).unwrap().value);
    }
}

#[test]
fn first_runs_verify() {
    for (length, height, limit) in [(2u64, 2u32, 1_000u64), (3, 2, 10_000), (2, 3, 1_000_000), (3, 3, 1_000_000)] {
        let n0 = first_run(length, height, limit).expect("a run exists below the limit");
        match verify_run(&BigUint::from(n0), length, height).unwrap() {
            RunVerification::Verified(c) => c.check().unwrap(),
            other => panic!("({length}, {height}): {other:?}"),
        }
        if n0 > 2 {
            // the start just before is not the start of a run
            let before = verify_run(&BigUint::from(n0 - 1), length, height).unwrap();
            assert!(!before.is_verified(), "({length}, {height}) at {}", n0 - 1);
        }
    }
    assert_eq!(first_run(3, 3, 1_000_000), Some(248_750));
}
