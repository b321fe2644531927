use std::time::Instant;

use phreact_core::chemistry::{
    charge_balance, default_reservoirs, equilibrium_ph, mix, Solution, SpeciesDb, DEFAULT_PH_TOL,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force oracle: scan pH at 1e-4 and return the midpoint of the cell
/// where the charge balance changes sign.
fn grid_scan_ph(s: &Solution) -> f64 {
    let n = 140_000;
    let f = |ph: f64| charge_balance(s, -ph);
    let mut prev = f(0.0);
    for i in 1..=n {
        let ph = i as f64 * 1e-4;
        let cur = f(ph);
        if prev.signum() != cur.signum() {
            return ph - 0.5e-4;
        }
        prev = cur;
    }
    panic!("no sign change on the grid");
}

fn random_solution(db: &SpeciesDb, rng: &mut ChaCha8Rng) -> Solution {
    let names: Vec<&str> = db.names().collect();
    let k = rng.random_range(1..=3);
    let contents = (0..k)
        .map(|_| {
            let name = names[rng.random_range(0..names.len())];
            let c = 10f64.powf(rng.random_range(-5.0..-1.0));
            (db.get(name).unwrap().clone(), c)
        })
        .collect();
    Solution::new(contents, 1.0).unwrap()
}

#[test]
fn solver_matches_grid_scan_oracle() {
    let db = SpeciesDb::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    for _ in 0..100 {
        let s = random_solution(&db, &mut rng);
        let solved = equilibrium_ph(&s, DEFAULT_PH_TOL).unwrap().value();
        let scanned = grid_scan_ph(&s);
        assert!((solved - scanned).abs() <= 1e-3, "solver {solved} vs scan {scanned}");
    }
    assert!(start.elapsed().as_secs_f64() < 5.0, "{:?}", start.elapsed());
}

#[test]
fn equal_volume_strong_acid_and_base() {
    let db = SpeciesDb::builtin();
    let acid = Solution::new(vec![(db.get("hydrochloric_acid").unwrap().clone(), 1e-2)], 1.0).unwrap();
    let base = Solution::new(vec![(db.get("sodium_hydroxide").unwrap().clone(), 1e-4)], 1.0).unwrap();
    let ph = equilibrium_ph(&mix(&acid, 0.5, &base, 0.5).unwrap(), DEFAULT_PH_TOL).unwrap().value();
    // [H+] ~ (1e-2 - 1e-4) / 2
    assert!((ph - 2.31).abs() <= 0.01, "{ph}");
}

#[test]
fn reservoir_mix_is_monotone_and_between() {
    let (acid, base) = default_reservoirs(&SpeciesDb::builtin()).unwrap();
    let pa = equilibrium_ph(&acid, DEFAULT_PH_TOL).unwrap().value();
    let pb = equilibrium_ph(&base, DEFAULT_PH_TOL).unwrap().value();
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        let ph = equilibrium_ph(&Solution::blend(&acid, &base, r).unwrap(), DEFAULT_PH_TOL)
            .unwrap()
            .value();
        assert!(ph >= prev - 1e-9, "r={r}: {ph} < {prev}");
        assert!(ph >= pa - 1e-9 && ph <= pb + 1e-9);
        prev = ph;
    }
}

#[test]
fn dilution_moves_toward_neutral() {
    let db = SpeciesDb::builtin();
    let water = Solution::water(1.0).unwrap();
    for (name, c) in [
        ("citric_acid", 1e-2),
        ("hydrochloric_acid", 1e-3),
        ("sodium_hydroxide", 1e-3),
        ("sodium_bicarbonate", 1e-2),
    ] {
        let s = Solution::new(vec![(db.get(name).unwrap().clone(), c)], 1.0).unwrap();
        let p0 = equilibrium_ph(&s, DEFAULT_PH_TOL).unwrap().value();
        let p1 = equilibrium_ph(&mix(&s, 0.5, &water, 0.5).unwrap(), DEFAULT_PH_TOL).unwrap().value();
        assert!((p1 - 7.0).abs() < (p0 - 7.0).abs(), "{name}: {p0} -> {p1}");
    }
}

proptest! {
    #[test]
    fn residual_at_root_within_tolerance(seed in any::<u64>(), tol_exp in -9.0..-3.0f64) {
        let db = SpeciesDb::builtin();
        let s = random_solution(&db, &mut ChaCha8Rng::seed_from_u64(seed));
        let tol = 10f64.powf(tol_exp);
        let ph = equilibrium_ph(&s, tol).unwrap().value();
        prop_assert!(charge_balance(&s, -ph).abs() <= tol);
    }

    #[test]
    fn mixing_with_itself_is_idempotent(seed in any::<u64>(), v in 1e-3..1.0f64) {
        let db = SpeciesDb::builtin();
        let s = random_solution(&db, &mut ChaCha8Rng::seed_from_u64(seed));
        let p = equilibrium_ph(&s, 1e-10).unwrap().value();
        let m = mix(&s, v.min(0.5), &s, v.min(0.5)).unwrap();
        let pm = equilibrium_ph(&m, 1e-10).unwrap().value();
        prop_assert!((p - pm).abs() <= 1e-9, "{} vs {}", p, pm);
    }

    #[test]
    fn blend_stays_between_reservoirs(r in 0.0..=1.0f64) {
        let (acid, base) = default_reservoirs(&SpeciesDb::builtin()).unwrap();
        let pa = equilibrium_ph(&acid, DEFAULT_PH_TOL).unwrap().value();
        let pb = equilibrium_ph(&base, DEFAULT_PH_TOL).unwrap().value();
        let ph = equilibrium_ph(&Solution::blend(&acid, &base, r).unwrap(), DEFAULT_PH_TOL).unwrap().value();
        prop_assert!(ph >= pa - 1e-9 && ph <= pb + 1e-9);
    }
}
