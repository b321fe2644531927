//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p phreact --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use phreact_core::calibration::{fit_calibration, MeasurementRow, MeasurementTable, Observable};
use phreact_core::chemistry::{
    charge_balance, default_reservoirs, equilibrium_ph, mix, protonation_fraction, PhValue, Solution, SpeciesDb,
    DEFAULT_PH_TOL,
};
use phreact_core::controller::{format_trace_table, run_to_setpoint, ControllerConfig};
use phreact_core::fluidics::{gradiator_profile, ticker_arrival_times, Boundary, Channel, Side};
use phreact_core::materials::{
    color_equilibrium, local_maxima, params_of, shape_equilibrium_angle, steady_intensity, two_bump_with_grad,
    CalibrationSet, ColorState, OdorState, PrimitiveKind, ShapeState, TWO_BUMP_PARAMS,
};
use phreact_core::scene::{load_scenario, shipped_scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ph(s: &Solution) -> f64 {
    equilibrium_ph(s, DEFAULT_PH_TOL).unwrap().value()
}

fn calib() -> CalibrationSet {
    CalibrationSet::default_synthetic()
}

fn db() -> SpeciesDb {
    SpeciesDb::builtin()
}

fn sol(name: &str, c: f64) -> Solution {
    Solution::new(vec![(db().get(name).unwrap().clone(), c)], 1.0).unwrap()
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn equilibrium_oracle() -> Check {
    let db = db();
    let names: Vec<&str> = db.names().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.random_range(1..=3);
        let contents = (0..k)
            .map(|_| {
                let name = names[rng.random_range(0..names.len())];
                (db.get(name).unwrap().clone(), 10f64.powf(rng.random_range(-5.0..-1.0)))
            })
            .collect();
        let s = Solution::new(contents, 1.0).unwrap();
        let solved = ph(&s);
        let f = |p: f64| charge_balance(&s, -p);
        let mut prev = f(0.0);
        let mut scanned = None;
        for i in 1..=140_000 {
            let p = i as f64 * 1e-4;
            let cur = f(p);
            if prev.signum() != cur.signum() {
                scanned = Some(p - 0.5e-4);
                break;
            }
            prev = cur;
        }
        let scanned = scanned.ok_or("grid scan found no root")?;
        worst = worst.max((solved - scanned).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(worst <= 1e-3, "max |solver - scan| = {worst:.2e}");
    ensure!(secs < 5.0, "took {secs:.2} s");
    Ok(format!("max deviation {worst:.1e} pH, {secs:.2} s"))
}

fn mix_arithmetic() -> Check {
    let acid = sol("hydrochloric_acid", 1e-2);
    let base = sol("sodium_hydroxide", 1e-4);
    ensure!((ph(&acid) - 2.0).abs() < 1e-3 && (ph(&base) - 10.0).abs() < 1e-3, "stocks are not pH 2 / 10");
    let p = ph(&mix(&acid, 0.5, &base, 0.5).unwrap());
    ensure!((p - 2.31).abs() <= 0.01, "mixed pH {p:.4}");
    Ok(format!("mixed pH {p:.4}"))
}

fn vanillin_switch() -> Check {
    let c = calib();
    ensure!((c.odor.pka_eff - 7.38).abs() < 1e-12, "pKa_eff {}", c.odor.pka_eff);
    let th = c.odor.perception_threshold;
    for p in 2..=8 {
        let i = steady_intensity(p as f64, 1.0, &c);
        ensure!(i > th, "pH {p}: intensity {i:.4} <= threshold {th}");
    }
    for p in [9.0, 10.0] {
        let i = steady_intensity(p, 1.0, &c);
        ensure!(i < th, "pH {p}: intensity {i:.4} >= threshold {th}");
    }
    let s = OdorState::fresh(&c).deposit(10.0, &c).unwrap().advance(60.0, &c).unwrap();
    let s = s.deposit(4.0, &c).unwrap().advance(60.0, &c).unwrap();
    ensure!(s.intensity == 0.0, "reactivated intensity {}", s.intensity);
    Ok("on at pH 2-8, off at 9-10, no reactivation".into())
}

fn odor_timing() -> Check {
    let c = calib();
    let dt = 1e-3;
    let mut crossings = Vec::new();
    for p in [2.0, 4.0, 6.0, 8.0] {
        let mut s = OdorState::fresh(&c).deposit(p, &c).unwrap();
        let mut t = None;
        for i in 1..=10_000 {
            s = s.advance(dt, &c).unwrap();
            if s.perceptible(&c) {
                t = Some(i as f64 * dt);
                break;
            }
        }
        let t = t.ok_or(format!("pH {p}: never perceived"))?;
        ensure!((1.0..=5.0).contains(&t), "pH {p}: crossing at {t:.3} s");
        crossings.push(t);
    }
    let s = OdorState::fresh(&c).deposit(4.0, &c).unwrap().advance(10.0, &c).unwrap();
    let mut s = s.deposit(9.0, &c).unwrap();
    let mut done = None;
    for i in 1..=60_000 {
        s = s.advance(dt, &c).unwrap();
        if s.suppressed {
            done = Some(i as f64 * dt);
            break;
        }
    }
    let done = done.ok_or("suppression never established")?;
    ensure!((done - 30.0).abs() <= 5.0, "suppressed at {done:.2} s");
    Ok(format!(
        "crossings {:.2}..{:.2} s, suppressed at {done:.2} s",
        crossings.iter().cloned().fold(f64::INFINITY, f64::min),
        crossings.iter().cloned().fold(0.0, f64::max)
    ))
}

fn color_timing() -> Check {
    let c = calib();
    let s0 = ColorState::fresh(&c).deposit(2.0, &c).unwrap();
    let onset = s0.advance(0.011, &c).unwrap().current.delta_e(&s0.current);
    ensure!(onset >= 1.0, "dE at 11 ms = {onset:.3}");
    let mut settle = None;
    for i in 1..=2000 {
        let t = i as f64 * 0.1;
        if s0.advance(t, &c).unwrap().delta_e_to_target() < 1.0 {
            settle = Some(t);
            break;
        }
    }
    let settle = settle.ok_or("never within dE 1 of target")?;
    ensure!((50.0..=90.0).contains(&settle), "settled at {settle:.1} s");
    let (slow, fast) = (c.color_tau(5.5), c.color_tau(3.0));
    ensure!(slow > fast, "tau(5-6) {slow} <= tau(2-4) {fast}");
    Ok(format!("dE(11 ms) {onset:.2}, settled at {settle:.1} s, tau {slow} > {fast}"))
}

fn color_hysteresis() -> Check {
    let c = calib();
    let mut s = ColorState::fresh(&c);
    for _ in 0..3 {
        s = s.deposit(6.0, &c).unwrap().advance(300.0, &c).unwrap();
        s = s.deposit(8.0, &c).unwrap().advance(300.0, &c).unwrap();
    }
    s = s.deposit(6.0, &c).unwrap().advance(300.0, &c).unwrap();
    let back = s.current.delta_e(&color_equilibrium(6.0, &c).unwrap());
    ensure!(back <= 2.0, "pH 6/8 cycle ends {back:.3} from pH 6 color");
    let s = ColorState::fresh(&c)
        .deposit(2.0, &c)
        .unwrap()
        .advance(300.0, &c)
        .unwrap()
        .deposit(10.0, &c)
        .unwrap()
        .advance(300.0, &c)
        .unwrap();
    let away = s.current.delta_e(&color_equilibrium(10.0, &c).unwrap());
    ensure!(away > 5.0, "pH 2 -> 10 ends only {away:.3} from pH 10 color");
    Ok(format!("cycle dE {back:.3}, locked dE {away:.2}"))
}

fn shape_bimodality() -> Check {
    let c = calib();
    let m = local_maxima(&c.shape, 0.01);
    ensure!(
        m.len() == 2 && (m[0] - 3.0).abs() <= 0.1 && (m[1] - 8.0).abs() <= 0.1,
        "maxima {m:?}"
    );
    // the time course was measured at these five solutions
    for (p, rises) in [(2.0, true), (4.0, false), (6.0, true), (8.0, true), (10.0, false)] {
        let s4 = ShapeState::fresh().deposit(p, &c).unwrap().advance(240.0, &c).unwrap();
        let s7 = s4.advance(180.0, &c).unwrap();
        ensure!(
            (s7.angle > s4.angle) == rises,
            "pH {p}: {:.2} -> {:.2} deg between 4 and 7 min",
            s4.angle,
            s7.angle
        );
    }
    let base = ShapeState::fresh().deposit(2.0, &c).unwrap().advance(600.0, &c).unwrap();
    let mut last = 0.0;
    for p in [4.0, 6.0, 8.0, 10.0] {
        let s = base.deposit(p, &c).unwrap().advance(600.0, &c).unwrap();
        let d = (s.angle - base.angle).abs();
        ensure!(d > last, "2 -> {p}: |dangle| {d:.3} <= {last:.3}");
        last = d;
    }
    Ok(format!("maxima at {:.2} and {:.2}", m[0], m[1]))
}

fn controller() -> Check {
    let (acid, base) = default_reservoirs(&db()).unwrap();
    let start = Instant::now();
    let setpoints = grid(2.2, 9.7, 0.5);
    let mut most = 0;
    for &sp in &setpoints {
        let cfg = ControllerConfig {
            setpoint: PhValue::new(sp).unwrap(),
            sensor_noise_sigma: 0.0,
            ..ControllerConfig::default()
        };
        let t = run_to_setpoint(&cfg, &acid, &base).map_err(|e| e.to_string())?;
        ensure!(
            t.converged && t.iterations.len() <= 40 && (t.final_true_ph() - sp).abs() <= 0.1,
            "noise-free setpoint {sp}: converged={} after {}",
            t.converged,
            t.iterations.len()
        );
        most = most.max(t.iterations.len());
    }
    let mut worst = 200;
    for &sp in &setpoints {
        let ok = (0..200u64)
            .filter(|&seed| {
                let cfg = ControllerConfig {
                    setpoint: PhValue::new(sp).unwrap(),
                    sensor_noise_sigma: 0.05,
                    rng_seed: seed,
                    ..ControllerConfig::default()
                };
                run_to_setpoint(&cfg, &acid, &base).is_ok_and(|t| t.converged)
            })
            .count();
        ensure!(ok >= 190, "setpoint {sp}: {ok}/200 converged");
        worst = worst.min(ok);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.2} s");

    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/mixto_ph6_seed42.txt"))
        .map_err(|e| format!("golden trace: {e}"))?;
    let cfg = ControllerConfig {
        setpoint: PhValue::new(6.0).unwrap(),
        sensor_noise_sigma: 0.05,
        rng_seed: 42,
        ..ControllerConfig::default()
    };
    let table = format_trace_table(&run_to_setpoint(&cfg, &acid, &base).unwrap());
    ensure!(table == golden, "trace differs from golden file");
    Ok(format!("noise-free <= {most} iterations, noisy >= {worst}/200, golden match, {secs:.2} s"))
}

fn ticker_channel(length: f64, n: usize) -> Channel {
    let (acid, _) = default_reservoirs(&db()).unwrap();
    Channel::new(
        length,
        6e-4,
        n,
        &sol("sodium_bicarbonate", 1e-3),
        Boundary::Fixed(acid),
        Boundary::Closed,
    )
    .unwrap()
}

fn fluidics() -> Check {
    let mut ch = ticker_channel(0.004, 40);
    ch.advance(2000.0, ch.max_stable_dt()).unwrap();
    ch.set_boundary(Side::Left, Boundary::Closed);
    let names: Vec<String> = ch.species().iter().map(|s| s.name.clone()).collect();
    let before: Vec<f64> = names.iter().map(|n| ch.total_moles(n)).collect();
    let dt = 0.9 * ch.max_stable_dt();
    for _ in 0..10_000 {
        ch.step(dt).unwrap();
    }
    let drift = names
        .iter()
        .zip(&before)
        .map(|(n, b)| (ch.total_moles(n) - b).abs() / b)
        .fold(0.0, f64::max);
    ensure!(drift <= 1e-9, "mole drift {drift:.2e}");

    let markers = [0.25, 0.5, 0.75];
    let arrivals = |ch: &Channel| -> Result<Vec<f64>, String> {
        ticker_arrival_times(ch, &markers, (6.0, 14.0), 1e6, 1e-8)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|t| t.ok_or_else(|| "marker never reached".to_string()))
            .collect()
    };
    let short = arrivals(&ticker_channel(0.004, 64))?;
    let long = arrivals(&ticker_channel(0.008, 127))?;
    let mut ratios = Vec::new();
    for (s, l) in short.iter().zip(&long) {
        let r = l / s;
        ensure!((r - 4.0).abs() <= 0.2, "arrival ratio {r:.3}");
        ratios.push(r);
    }

    let (acid, base) = default_reservoirs(&db()).unwrap();
    let ch = Channel::new(0.01, 6e-4, 21, &Solution::water(1.0).unwrap(), Boundary::Closed, Boundary::Closed).unwrap();
    let p = gradiator_profile(&ch, &acid, &base, 1e-8).map_err(|e| e.to_string())?;
    let mid = ph(&mix(&acid, 0.5, &base, 0.5).unwrap());
    let got = p.ph_values[10].value();
    ensure!((got - mid).abs() <= 0.02, "gradiator midpoint {got:.4} vs mix {mid:.4}");
    ensure!((p.ph_values[0].value() - ph(&acid)).abs() < 1e-6, "left endpoint");
    ensure!((p.ph_values[20].value() - ph(&base)).abs() < 1e-6, "right endpoint");
    Ok(format!(
        "drift {drift:.1e}, ratios {:.3}/{:.3}/{:.3}, midpoint {got:.4} vs {mid:.4}",
        ratios[0], ratios[1], ratios[2]
    ))
}

fn generator() -> CalibrationSet {
    let mut g = calib();
    for k in &mut g.color.knots {
        k.l += 1.5;
        k.a -= 2.0;
    }
    g.color.tau_bands[0].tau_s = 12.0;
    g.color.tau_bands[1].tau_s = 27.0;
    g.shape.bumps[0].center = 3.2;
    g.shape.bumps[0].amplitude = 84.0;
    g.shape.bumps[1].width = 0.8;
    g.shape.tau_ph_s = 170.0;
    g.odor.i_max = 1.2;
    g.odor.pka_eff = 7.1;
    g.odor.onset_tau_s = 2.0;
    g
}

fn synthetic_tables(g: &CalibrationSet) -> Vec<MeasurementTable> {
    let mut color: Vec<MeasurementRow> = g
        .color
        .knots
        .iter()
        .map(|k| MeasurementRow {
            ph: k.ph,
            time: None,
            value: Observable::Lab { l: k.l, a: k.a, b: k.b },
        })
        .collect();
    for p in [2.0, 4.0, 5.0, 6.0, 8.0] {
        for t in [5.0, 20.0, 40.0] {
            let s = ColorState::fresh(g).deposit(p, g).unwrap().advance(t, g).unwrap();
            color.push(MeasurementRow {
                ph: p,
                time: Some(t),
                value: Observable::Lab {
                    l: s.current.l,
                    a: s.current.a,
                    b: s.current.b,
                },
            });
        }
    }
    let mut shape: Vec<MeasurementRow> = grid(2.0, 10.0, 0.25)
        .into_iter()
        .map(|p| MeasurementRow {
            ph: p,
            time: None,
            value: Observable::Angle {
                value: shape_equilibrium_angle(p, g).unwrap(),
            },
        })
        .collect();
    for p in [3.0, 6.0, 8.0] {
        for t in [200.0, 400.0] {
            let s = ShapeState::fresh().deposit(p, g).unwrap().advance(t, g).unwrap();
            shape.push(MeasurementRow {
                ph: p,
                time: Some(t),
                value: Observable::Angle { value: s.angle },
            });
        }
    }
    let mut odor: Vec<MeasurementRow> = grid(2.0, 10.0, 0.5)
        .into_iter()
        .map(|p| MeasurementRow {
            ph: p,
            time: None,
            value: Observable::Intensity {
                value: g.odor.i_max * protonation_fraction(p, g.odor.pka_eff),
            },
        })
        .collect();
    for t in [1.5, 2.5, 4.0, 8.0] {
        let s = OdorState::fresh(g).deposit(4.0, g).unwrap().advance(t, g).unwrap();
        odor.push(MeasurementRow {
            ph: 4.0,
            time: Some(t),
            value: Observable::Intensity { value: s.intensity },
        });
    }
    vec![
        MeasurementTable::new(PrimitiveKind::Color, color).unwrap(),
        MeasurementTable::new(PrimitiveKind::Shape, shape).unwrap(),
        MeasurementTable::new(PrimitiveKind::Odor, odor).unwrap(),
    ]
}

/// Step for parameter `k`: a thousandth of the bump width for centers and
/// widths, of the amplitude for amplitudes.
fn fd_step(p: &[f64; TWO_BUMP_PARAMS], k: usize) -> f64 {
    match k {
        1 | 4 => 1e-3 * p[k],
        0..=2 => 1e-3 * p[2],
        _ => 1e-3 * p[5],
    }
}

/// The curve is only C1 at each center; the stencil must not straddle one.
fn near_kink(p: &[f64; TWO_BUMP_PARAMS], kappa: f64, x: f64) -> bool {
    let reach = |k: usize| 4.0 * fd_step(p, k) * kappa.max(1.0);
    (x - p[0]).abs() <= reach(0) || (x - p[3]).abs() <= reach(3)
}

fn five_point(p: &[f64; TWO_BUMP_PARAMS], kappa: f64, x: f64, k: usize) -> f64 {
    let h = fd_step(p, k);
    let f = |d: f64| {
        let mut q = *p;
        q[k] += d;
        two_bump_with_grad(&q, kappa, x).0
    };
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}

fn calibration_round_trip() -> Check {
    let g = generator();
    let (fit, _) = fit_calibration(&synthetic_tables(&g), &calib()).map_err(|e| e.to_string())?;
    let mut pairs: Vec<(&str, f64, f64)> = vec![
        ("shape.tau_ph_s", fit.shape.tau_ph_s, g.shape.tau_ph_s),
        ("odor.i_max", fit.odor.i_max, g.odor.i_max),
        ("odor.pka_eff", fit.odor.pka_eff, g.odor.pka_eff),
        ("odor.onset_tau_s", fit.odor.onset_tau_s, g.odor.onset_tau_s),
    ];
    for (f, e) in fit.color.tau_bands.iter().zip(&g.color.tau_bands) {
        pairs.push(("color.tau", f.tau_s, e.tau_s));
    }
    for (f, e) in params_of(&fit.shape).into_iter().zip(params_of(&g.shape)) {
        pairs.push(("shape.curve", f, e));
    }
    for (f, e) in fit.color.knots.iter().zip(&g.color.knots) {
        pairs.extend([("color.L", f.l, e.l), ("color.a", f.a, e.a), ("color.b", f.b, e.b)]);
    }
    let (name, worst) = pairs
        .iter()
        .map(|&(n, f, e)| (n, rel(f, e)))
        .fold(("", 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    ensure!(worst <= 1e-6, "{name} off by {worst:.2e} relative");

    let kappa = calib().shape.acid_side_width_ratio;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut jac_worst = 0.0f64;
    let mut points = 0;
    while points < 200 {
        let p: [f64; TWO_BUMP_PARAMS] = [
            rng.random_range(2.0..5.0),
            rng.random_range(10.0..120.0),
            rng.random_range(0.2..1.5),
            rng.random_range(6.0..9.5),
            rng.random_range(10.0..120.0),
            rng.random_range(0.2..1.5),
        ];
        let x: f64 = rng.random_range(2.0..10.0);
        if near_kink(&p, kappa, x) {
            continue;
        }
        points += 1;
        let (_, grad) = two_bump_with_grad(&p, kappa, x);
        for k in 0..TWO_BUMP_PARAMS {
            let fd = five_point(&p, kappa, x, k);
            let scale = grad[k].abs().max(fd.abs()).max(1e-3);
            jac_worst = jac_worst.max((grad[k] - fd).abs() / scale);
        }
    }
    ensure!(jac_worst <= 1e-6, "Jacobian off by {jac_worst:.2e}");

    let c = calib();
    let truth = params_of(&c.shape);
    let noise = Normal::new(0.0, 2.0).unwrap();
    let mut center_worst = 0.0f64;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = grid(2.0, 10.0, 0.25)
            .into_iter()
            .map(|p| MeasurementRow {
                ph: p,
                time: None,
                value: Observable::Angle {
                    value: shape_equilibrium_angle(p, &c).unwrap() + noise.sample(&mut rng),
                },
            })
            .collect();
        let t = MeasurementTable::new(PrimitiveKind::Shape, rows).unwrap();
        let (fit, _) = fit_calibration(&[t], &c).map_err(|e| e.to_string())?;
        let p = params_of(&fit.shape);
        center_worst = center_worst.max((p[0] - truth[0]).abs()).max((p[3] - truth[3]).abs());
    }
    ensure!(center_worst <= 0.2, "noisy center error {center_worst:.3} pH");
    Ok(format!(
        "round trip {worst:.1e}, Jacobian {jac_worst:.1e}, noisy centers within {center_worst:.3} pH"
    ))
}

fn simulate_umbrella(out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_phreact"))
        .args(["simulate", "umbrella.scn", "--seed", "7", "--until", "120", "--dt", "0.1", "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        status.status.success(),
        "simulate failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    std::fs::read(out.join("frames.csv")).map_err(|e| e.to_string())
}

fn scenario_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = simulate_umbrella(&dir.path().join("a"))?;
    let b = simulate_umbrella(&dir.path().join("b"))?;
    ensure!(a == b, "frame series differ between runs");

    let text = shipped_scenario("umbrella").ok_or("no umbrella preset")?;
    let (mut scene, _) = load_scenario(text, &db(), &calib(), Some(7)).map_err(|e| e.to_string())?;
    let cloaked: Vec<usize> = (0..scene.height())
        .flat_map(|y| (0..scene.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| scene.cell(x, y).is_some_and(|c| c.cloaked))
        .map(|(x, y)| y * scene.width() + x)
        .collect();
    ensure!(!cloaked.is_empty(), "umbrella has no cloaked cells");
    let first = scene.render_frame();
    let mut changed = 0usize;
    for _ in 0..1200 {
        scene.step(0.1).map_err(|e| e.to_string())?;
        let f = scene.render_frame();
        for &i in &cloaked {
            let (p, q) = (&first.color_grid[i], &f.color_grid[i]);
            ensure!(
                p.l.to_bits() == q.l.to_bits() && p.a.to_bits() == q.a.to_bits() && p.b.to_bits() == q.b.to_bits(),
                "cloaked cell {i} changed at t = {:.1}",
                f.time
            );
            ensure!(first.odor_field[i].to_bits() == f.odor_field[i].to_bits(), "cloaked odor {i} changed");
        }
        changed = f.color_grid.iter().zip(&first.color_grid).filter(|(a, b)| a != b).count();
    }
    ensure!(changed > 0, "nothing changed outside the cloak");
    Ok(format!(
        "{} bytes identical, {} cloaked cells fixed, {changed} cells changed",
        a.len(),
        cloaked.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("equilibrium oracle", equilibrium_oracle),
        ("mix arithmetic", mix_arithmetic),
        ("vanillin switch", vanillin_switch),
        ("odor timing", odor_timing),
        ("color timing", color_timing),
        ("color hysteresis", color_hysteresis),
        ("shape bimodality", shape_bimodality),
        ("controller", controller),
        ("fluidics", fluidics),
        ("calibration round trip", calibration_round_trip),
        ("scenario determinism", scenario_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name:<24} {detail} [{secs:.2} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name:<24} {why} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
