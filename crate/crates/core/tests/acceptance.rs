//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line with the measured quantities. Run with
//! `cargo test -p wslab-core --test acceptance -- --nocapture`.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wslab_core::experiments::{
    nontransverse_counterexample, schrodinger_growth, transference_experiment, transverse_counterexample,
    transverse_occupancy, wave_schrodinger_probe, wave_wave_probe, CounterexampleConfig, GrowthConfig,
    OccupancyConfig, TransferenceConfig, WaveSchrodingerConfig, WaveWaveConfig,
};
use wslab_core::ranges::{
    check_conditions, classify_transversality, membership, surface_measure_mc, ExponentPair, Geometry, Region,
    STRONG_RATIO, WEAK_THRESHOLD,
};
use wslab_core::spectral::{forward_transform, propagate, Evolution, FrequencyField, GridSpec, Mode, SpatialField};
use wslab_core::u2::{khintchine_ratio, SignSampler};

fn report(id: u32, title: &str, pass: bool, detail: String, elapsed: Duration, budget: Duration) -> bool {
    let in_time = elapsed <= budget;
    let ok = pass && in_time;
    println!(
        "{} criterion {id}: {title} | {detail} | {:.1}s of {:.0}s",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    ok
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

#[test]
fn criterion_01_propagator_exactness() {
    let start = Instant::now();
    let grid = Arc::new(GridSpec::cubic(2, 40.0, 128, (0.0, 1.0), 2).unwrap());
    let volume = 1600.0f64;

    let mut plane_err = 0.0f64;
    for k in [[1i64, 0, 0], [3, -2, 0], [-7, 5, 0]] {
        let datum = FrequencyField::new(grid.clone(), vec![Mode { k, coeff: Complex64::new(1.0, 0.0) }]).unwrap();
        let xi = [k[0] as f64 * std::f64::consts::TAU / 40.0, k[1] as f64 * std::f64::consts::TAU / 40.0];
        for ev in [Evolution::HalfWave, Evolution::Schrodinger] {
            let omega = match ev {
                Evolution::HalfWave => xi[0].hypot(xi[1]),
                Evolution::Schrodinger => -(xi[0] * xi[0] + xi[1] * xi[1]),
            };
            for t in [0.1, 1.0, 10.0] {
                let u = propagate(&datum, ev, t).unwrap();
                for i in (0..grid.len()).step_by(97) {
                    let x = grid.position(i);
                    let exact = Complex64::from_polar(volume.powf(-0.5), xi[0] * x[0] + xi[1] * x[1] + t * omega);
                    plane_err = plane_err.max((u.values()[i] - exact).norm());
                }
            }
        }
    }

    let small = Arc::new(GridSpec::cubic(2, 16.0, 32, (0.0, 1.0), 2).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut l2_err = 0.0f64;
    for _ in 0..100 {
        let values: Vec<Complex64> = (0..small.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = SpatialField::new(small.clone(), values).unwrap();
        let datum = forward_transform(&f).unwrap();
        for ev in [Evolution::HalfWave, Evolution::Schrodinger] {
            for t in [0.1, 1.0, 10.0] {
                let u = propagate(&datum, ev, t).unwrap();
                l2_err = l2_err.max((u.l2_norm() / f.l2_norm() - 1.0).abs());
            }
        }
    }

    // e^{it Laplacian} exp(-|x|^2 / (2 s)) = (s / (s + 2it)) exp(-|x|^2 / (2 (s + 2it))) in the plane.
    let s = 1.5;
    let gaussian = |x: &[f64; 3], t: f64| {
        let z = Complex64::new(s, 2.0 * t);
        Complex64::new(s, 0.0) / z * (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * z)).exp()
    };
    let init = SpatialField::from_fn(grid.clone(), |x| gaussian(x, 0.0));
    let datum = forward_transform(&init).unwrap();
    let mut gauss_err = 0.0f64;
    for t in [0.1, 1.0, 2.0] {
        let u = propagate(&datum, Evolution::Schrodinger, t).unwrap();
        let peak = gaussian(&[0.0; 3], t).norm();
        for i in 0..grid.len() {
            gauss_err = gauss_err.max((u.values()[i] - gaussian(&grid.position(i), t)).norm() / peak);
        }
    }

    let pass = plane_err <= 1e-12 && l2_err <= 1e-10 && gauss_err <= 1e-6;
    assert!(report(
        1,
        "propagator exactness",
        pass,
        format!("plane wave {plane_err:.2e} (<=1e-12), L2 drift {l2_err:.2e} (<=1e-10), Gaussian {gauss_err:.2e} (<=1e-6)"),
        start.elapsed(),
        Duration::from_secs(30),
    ));
}

#[test]
fn criterion_02_anchor_points() {
    let start = Instant::now();
    // Lines in d = 3, written directly in (1/r, 1/q).
    let bilinear = |inv_r: f64, inv_q: f64| 2.0 * inv_q + 4.0 * inv_r - 4.0;
    let necessary = |inv_r: f64, inv_q: f64| 2.0 * inv_q + 2.5 * inv_r - 3.0;
    let cases = [
        ((2.0 / 3.0, 2.0 / 3.0), Region::BilinearOpen, bilinear as fn(f64, f64) -> f64),
        ((2.0 / 3.0, 2.0 / 3.0), Region::TransverseNecessary, necessary),
        ((0.5, 7.0 / 8.0), Region::TransverseNecessary, necessary),
        ((0.75, 0.5), Region::BilinearOpen, bilinear),
    ];
    let mut worst = 0.0f64;
    let mut oracle = 0.0f64;
    let mut boundary_rules = true;
    for ((inv_r, inv_q), region, line) in cases {
        let m = membership(region, &ExponentPair::new(inv_q, inv_r).unwrap(), 3);
        worst = worst.max(m.margin.abs());
        oracle = oracle.max(line(inv_r, inv_q).abs());
        // Strict region excludes its boundary, the closed one keeps it.
        boundary_rules &= m.member == (region == Region::TransverseNecessary);
    }
    let pass = worst <= 1e-12 && oracle <= 1e-12 && boundary_rules;
    assert!(report(
        2,
        "anchor points in d = 3",
        pass,
        format!("max |margin| {worst:.1e}, direct line residual {oracle:.1e}, boundary membership ok = {boundary_rules}"),
        start.elapsed(),
        Duration::from_secs(1),
    ));
}

#[test]
fn criterion_03_transversality_classifier() {
    let start = Instant::now();
    let t = classify_transversality(&[1.0, 0.0], &[-0.5, -0.5], WEAK_THRESHOLD, STRONG_RATIO).unwrap();
    // xi0/|xi0| + 2 eta0 = (0, -1): length 1 and orthogonal to xi0.
    let pass = t.weak && !t.strong && (t.geometry.alpha - 1.0).abs() < 1e-15 && t.geometry.strong_margin == 0.0;
    assert!(report(
        3,
        "transversality classifier",
        pass,
        format!(
            "alpha {}, strong margin {}, weak {}, strong {}",
            t.geometry.alpha, t.geometry.strong_margin, t.weak, t.strong
        ),
        start.elapsed(),
        Duration::from_secs(1),
    ));
}

#[test]
fn criterion_04_counterexample_occupancy() {
    let start = Instant::now();
    let rows = transverse_occupancy(&OccupancyConfig::default()).unwrap();
    let mut detail = Vec::new();
    let mut pass = rows.len() == 2;
    for r in &rows {
        let frac = |min: f64, peak: f64| min / peak;
        detail.push(format!(
            "N={}: plate {:.3}, tube {:.3}, U {:.3}, V {:.3} x peak",
            r.n,
            frac(r.plate.min, r.wave_peak),
            frac(r.tube.min, r.schrodinger_peak),
            frac(r.wave_square.min, r.wave_peak),
            frac(r.schrodinger_square.min, r.schrodinger_peak),
        ));
        pass &= r.plate.min >= 0.4 * r.wave_peak
            && r.tube.min >= 0.4 * r.schrodinger_peak
            && r.wave_square.min >= 0.4 * r.wave_peak
            && r.schrodinger_square.min >= 0.4 * r.schrodinger_peak;
    }
    assert!(report(
        4,
        "counterexample occupancy (>= 0.4 x peak)",
        pass,
        detail.join("; "),
        start.elapsed(),
        minutes(3),
    ));
}

#[test]
fn criterion_05_transverse_scaling() {
    let start = Instant::now();
    let rep = transverse_counterexample(&CounterexampleConfig::default()).unwrap();
    // d = 2, q = r = 1: [2 + 1 + 1/2] - [1/2 + 1/4 + 1 + 1/4].
    let predicted = 3.5 - 2.0;
    let main = &rep.checks[0].sweep;
    let boundary = &rep.checks[1].sweep;
    let pass = (1.0..=2.0).contains(&main.slope)
        && (main.predicted_slope - predicted).abs() < 1e-12
        && boundary.slope.abs() <= 0.3;
    assert!(report(
        5,
        "transverse counterexample scaling",
        pass,
        format!(
            "slope {:.3} in [1, 2] (predicted {predicted}), boundary slope {:.3} in [-0.3, 0.3]",
            main.slope, boundary.slope
        ),
        start.elapsed(),
        minutes(10),
    ));
}

#[test]
fn criterion_06_nontransverse_scaling() {
    let start = Instant::now();
    let rep = nontransverse_counterexample(&CounterexampleConfig::default()).unwrap();
    // N^{2/q - (d+1)/2} M^{(d-1)/r - (d-2)/2} at d = 2, q = r = 1.
    let predicted_equal = (2.0 - 1.5) + (1.0 - 0.0);
    let predicted_one = 2.0 - 1.5;
    let equal = rep.checks[0].sweep.slope;
    let one = rep.checks[1].sweep.slope;
    let pass = (equal - predicted_equal).abs() <= 0.5 && (one - predicted_one).abs() <= 0.5;
    assert!(report(
        6,
        "non-transverse counterexample scaling",
        pass,
        format!("M = N slope {equal:.3} (predicted {predicted_equal}), M = 1 slope {one:.3} (predicted {predicted_one})"),
        start.elapsed(),
        minutes(10),
    ));
}

#[test]
fn criterion_07_bilinear_boundedness_probes() {
    let start = Instant::now();
    let ww = wave_wave_probe(&WaveWaveConfig::default()).unwrap();
    let ws = wave_schrodinger_probe(&WaveSchrodingerConfig::default()).unwrap();
    let spread = |rows: &[wslab_core::experiments::ProbeRow]| {
        let max = rows.iter().map(|r| r.normalized).fold(0.0, f64::max);
        let min = rows.iter().map(|r| r.normalized).fold(f64::INFINITY, f64::min);
        max / min
    };
    let (a, b) = (spread(&ww.rows), spread(&ws.rows));
    let pass = ww.rows.len() == 3 && ws.rows.len() == 9 && a <= 4.0 && b <= 4.0;
    assert!(report(
        7,
        "bilinear boundedness probes",
        pass,
        format!("wave-wave variation {a:.3}, wave-Schrodinger variation {b:.3} over N x alpha (<= 4)"),
        start.elapsed(),
        minutes(10),
    ));
}

#[test]
fn criterion_08_khintchine_bracket() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let coeffs: Vec<f64> = (0..64)
        .map(|_| {
            let u1: f64 = 1.0 - rng.gen::<f64>();
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect();
    let sampler = SignSampler::new(8, 10_000).unwrap();
    let ratio = khintchine_ratio(&coeffs, &sampler).unwrap();
    // All four sign patterns of (1, 1): |2|, |0|, |0|, |2|.
    let enumerated = [2.0f64, 0.0, 0.0, 2.0].iter().sum::<f64>() / 4.0;
    let mean = khintchine_ratio(&[1.0, 1.0], &sampler).unwrap() * 2f64.sqrt();
    let pass = (0.68..=1.02).contains(&ratio) && (mean - enumerated).abs() <= 0.02;
    assert!(report(
        8,
        "Khintchine bracket",
        pass,
        format!("n = 64 ratio {ratio:.4} in [0.70, 1.00] +- 0.02, (1, 1) mean {mean:.4} vs {enumerated}"),
        start.elapsed(),
        Duration::from_secs(10),
    ));
}

#[test]
fn criterion_09_transference() {
    let start = Instant::now();
    let rep = transference_experiment(&TransferenceConfig::default()).unwrap();
    let pieces = 4f64;
    let mut pass = rep.rows.len() == 3;
    let mut detail = Vec::new();
    for r in &rep.rows {
        let worst = r.piece_ratios.iter().copied().fold(0.0, f64::max);
        pass &= r.multi_piece <= pieces.sqrt() * worst && r.one_piece_mismatch <= 1e-8;
        detail.push(format!(
            "N={}: multi {:.4} <= {:.4}, one-piece mismatch {:.1e}",
            r.n,
            r.multi_piece,
            pieces.sqrt() * worst,
            r.one_piece_mismatch
        ));
    }
    assert!(report(9, "transference", pass, detail.join("; "), start.elapsed(), minutes(5)));
}

#[test]
fn criterion_10_schrodinger_ball_growth() {
    let start = Instant::now();
    let rep = schrodinger_growth(&GrowthConfig::default()).unwrap();
    let pass = rep.growth.exponent <= 0.1;
    let norms: Vec<String> = rep.growth.norms.iter().map(|v| format!("{v:.4e}")).collect();
    assert!(report(
        10,
        "multilinear Schrodinger ball growth",
        pass,
        format!(
            "exponent {:.3} (<= 0.1) over R = {:?}, norms [{}]",
            rep.growth.exponent,
            rep.growth.radii,
            norms.join(", ")
        ),
        start.elapsed(),
        minutes(3),
    ));
}

#[test]
fn criterion_11_conditions_checker() {
    let start = Instant::now();
    let collinear = Geometry::new(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
    let cond = check_conditions(&collinear, 1000, 11).unwrap();
    let condition_i = cond.wave.transversality_min_ratio.min(cond.schrodinger.transversality_min_ratio);
    let exact_quadratic =
        cond.schrodinger.hessian_remainder_max_ratio == 0.0 && cond.schrodinger.derivative_max_ratio == 0.0;
    let unit = Geometry::new(&[1.0, 0.0], &[-1.0, 0.0]).unwrap();
    let mc = surface_measure_mc(&unit, 200_000, 32, 11).unwrap();
    let pass = collinear.alpha == 3.0 && condition_i >= 0.1 && exact_quadratic && mc.ratio <= 10.0 && mc.delta_stability <= 0.2;
    assert!(report(
        11,
        "conditions checker",
        pass,
        format!(
            "(i) min ratio {condition_i:.3} (>= 0.1), (iii)/(iv) quadratic exact = {exact_quadratic}, \
             (v) ratio {:.3} (<= 10), delta stability {:.3} (<= 0.2)",
            mc.ratio, mc.delta_stability
        ),
        start.elapsed(),
        minutes(2),
    ));
}
