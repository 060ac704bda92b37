//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines show up in
//! plain `cargo test` output.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use qubit_hamid::bloch::{cartesian_from_spherical, evolve_z, rotate, spherical_from_cartesian, wrap_angle};
use qubit_hamid::config::{ChannelConfig, RunConfig, TruthConfig};
use qubit_hamid::identification::{gauge_align, linear_fit};
use qubit_hamid::measurement::{measure_at, ExperimentId, SamplingConfig, TimeSeries};
use qubit_hamid::pipeline::{run_once, run_replicates};
use qubit_hamid::spectral::{
    dft, estimate_fourier, fit_cosine_segment, optimal_truncation, refine_minimum_parabola, theta_from_population,
    Stage1Method, StageOneEstimate,
};
use qubit_hamid::{HamiltonianModel, Vector3};

const CASES: u32 = 1000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn criterion_1() -> Outcome {
    let cfg = RunConfig { exact: true, stage1_method: Stage1Method::CosineFit, ..RunConfig::default() };
    let start = Instant::now();
    let report = match run_once(&cfg, 0, None) {
        Ok(r) => r,
        Err(e) => return Outcome { pass: false, detail: format!("pipeline error: {e}") },
    };
    let elapsed = start.elapsed();
    let d = report.distances.unwrap_or_default();
    let pass = d.len() == 3 && d.iter().all(|&x| x < 1e-4) && elapsed < Duration::from_secs(5);
    Outcome {
        pass,
        detail: format!(
            "distances {:?}, {:.2} s",
            d.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>(),
            secs(elapsed)
        ),
    }
}

/// Pole record of the benchmark axis `(0.2, 0, 0.2)`.
fn benchmark_record(seed: u64, cfg: &RunConfig) -> TimeSeries {
    let axis = Vector3::new(0.2, 0.0, 0.2);
    let scfg = cfg.stage1_sampling(seed).unwrap();
    let times: Vec<f64> = (0..scfg.samples()).map(|k| k as f64 * scfg.dt).collect();
    measure_at(axis, Vector3::POLE, &times, &scfg, ExperimentId::new(1, 0, 0, 0)).unwrap()
}

const BENCH_THETA: f64 = PI / 4.0;
const BENCH_OMEGA: f64 = 0.282_842_712_474_619;

fn criterion_2() -> Outcome {
    let cfg = RunConfig::default();
    let periods = cfg.sampling.tf * BENCH_OMEGA / (2.0 * PI);
    let start = Instant::now();
    let mut dth = Vec::new();
    let mut dom = Vec::new();
    for seed in 0..50 {
        let series = benchmark_record(seed, &cfg);
        match estimate_fourier(&series, &cfg.spectral_options()) {
            Ok(e) => {
                dth.push((e.theta - BENCH_THETA).abs());
                dom.push((e.omega - BENCH_OMEGA).abs());
            }
            Err(e) => return Outcome { pass: false, detail: format!("seed {seed}: {e}") },
        }
    }
    let elapsed = start.elapsed();
    let (mt, mo) = (median(dth), median(dom));
    let pass = periods >= 4.0 && mt <= 0.03 && mo <= 0.01 && elapsed < Duration::from_secs(10);
    Outcome {
        pass,
        detail: format!(
            "span {periods:.1} periods, median |dtheta| {mt:.4}, median |domega| {mo:.4}, {:.2} s",
            secs(elapsed)
        ),
    }
}

fn criterion_3() -> Outcome {
    // d0 = (0.2, 0, 0.1) is the reference; channel 1 at f = 1 gives (0.3, 0.1, 0.1)
    let cfg = RunConfig {
        truth: Some(TruthConfig { d0: [0.2, 0.0, 0.1] }),
        channels: vec![ChannelConfig { d: Some([0.1, 0.1, 0.0]), f: vec![1.0] }],
        ..RunConfig::default()
    };
    let target = 0.1f64.atan2(0.3);
    let mut err = Vec::new();
    let mut plus = 0;
    for seed in 0..50 {
        let report = match run_once(&cfg, seed, None) {
            Ok(r) => r,
            Err(e) => return Outcome { pass: false, detail: format!("seed {seed}: {e}") },
        };
        let s = report.settings.iter().find(|s| s.channel == 1).expect("channel 1 setting");
        let fit = s.stage2.as_ref().expect("stage two ran").fit;
        err.push(wrap_angle(fit.phi - target).abs());
        plus += usize::from(fit.theta_sign > 0);
    }
    let m = median(err);
    let pass = m <= 0.03 && plus * 100 >= 95 * 50;
    Outcome { pass, detail: format!("median |dphi| {m:.4}, sign +1 in {plus}/50") }
}

fn criterion_4() -> Outcome {
    let cfg = RunConfig { replicates: 50, seed: 0, ..RunConfig::default() };
    let start = Instant::now();
    let (_, summary) = match run_replicates(&cfg, None) {
        Ok(r) => r,
        Err(e) => return Outcome { pass: false, detail: format!("pipeline error: {e}") },
    };
    let elapsed = start.elapsed();
    let medians: Vec<f64> = summary.distances.iter().map(|b| b.median).collect();
    let pass = summary.failures.is_empty()
        && medians.len() == 3
        && medians.iter().all(|&m| m <= 0.08)
        && elapsed < Duration::from_secs(60);
    Outcome {
        pass,
        detail: format!("median distances {medians:.4?}, {} failures, {:.2} s", summary.failures.len(), secs(elapsed)),
    }
}

fn criterion_5() -> Outcome {
    let w = 0.2828;
    let dt = 0.25;
    let times: Vec<f64> = (0..=320).map(|k| k as f64 * dt).collect();
    let values = times.iter().map(|&t| 0.5 + 0.5 * (w * t).cos()).collect();
    let cfg = SamplingConfig::new(dt, 80.0, None, 0.0, 0).unwrap();
    let series = TimeSeries::new(times, values, cfg).unwrap();
    let period = 22.214;
    match optimal_truncation(&series) {
        Ok(t) => {
            let k = (t / period).round().max(1.0);
            let off = (t - k * period).abs();
            Outcome { pass: off <= dt, detail: format!("t_opt {t:.3} = {k} periods {off:+.3}") }
        }
        Err(e) => Outcome { pass: false, detail: format!("error: {e}") },
    }
}

fn vector(r: f64) -> impl Strategy<Value = Vector3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn axis() -> impl Strategy<Value = Vector3> {
    vector(2.0).prop_filter("non-degenerate axis", |v| v.norm() > 1e-3)
}

fn record() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 2..200)
}

fn series_of(values: Vec<f64>) -> TimeSeries {
    let times = (0..values.len()).map(|k| k as f64 * 0.25).collect();
    TimeSeries::new(times, values, SamplingConfig::new(0.25, 1.0, None, 0.0, 0).unwrap()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> std::result::Result<(), TestCaseError> {
    prop_assert!((a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())), "{a} vs {b}");
    Ok(())
}

fn criterion_6() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() });
    let mut failed = Vec::new();
    let mut check = |name: &str, r: std::result::Result<(), String>| {
        if let Err(e) = r {
            failed.push(format!("{name}: {e}"));
        }
    };

    check(
        "rotation norm",
        runner
            .run(&(vector(3.0), axis(), -10.0f64..10.0), |(v, a, t)| {
                close(rotate(v, a, t).unwrap().norm(), v.norm(), 1e-12)
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "rotation composition",
        runner
            .run(&(vector(3.0), axis(), -5.0f64..5.0, -5.0f64..5.0), |(v, a, t1, t2)| {
                let two = rotate(rotate(v, a, t1).unwrap(), a, t2).unwrap();
                let one = rotate(v, a, t1 + t2).unwrap();
                prop_assert!(two.distance(one) <= 1e-11 * (1.0 + v.norm()));
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "F(0) = mean",
        runner
            .run(&record(), |v| {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let spec = dft(&series_of(v)).unwrap();
                close(spec.coefficients[0].re, mean, 1e-12)?;
                prop_assert!(spec.coefficients[0].im.abs() <= 1e-12);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "Parseval",
        runner
            .run(&record(), |v| {
                let n = v.len() as f64;
                let energy = v.iter().map(|x| x * x).sum::<f64>() / n;
                let spec = dft(&series_of(v)).unwrap();
                let total: f64 = spec.coefficients.iter().map(|c| c.norm_sqr()).sum();
                close(total, energy, 1e-10)
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "spherical round trip",
        runner
            .run(&axis(), |d| {
                let s = spherical_from_cartesian(d).unwrap();
                s.validate().unwrap();
                prop_assert!(cartesian_from_spherical(s).distance(d) <= 1e-12 * (1.0 + d.norm()));
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "declination ambiguity",
        runner
            .run(&(axis(), 0.0f64..50.0), |(d, t)| {
                // the mirror axis through the equator has the same pole trajectory
                let mirror = Vector3::new(d.x, d.y, -d.z);
                close(evolve_z(Vector3::POLE, d, t).unwrap(), evolve_z(Vector3::POLE, mirror, t).unwrap(), 1e-12)?;
                let s = spherical_from_cartesian(d).unwrap();
                let folded = theta_from_population(s.theta.cos().powi(2));
                prop_assert!((0.0..=PI / 2.0).contains(&folded));
                close(folded, s.theta.min(PI - s.theta), 1e-6)
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "azimuth gauge covariance",
        runner
            .run(&(axis(), vector(1.0), axis(), -PI..PI), |(d0, d1, d2, angle)| {
                let model = HamiltonianModel::new(d0, vec![d1, d2]).unwrap();
                let a = gauge_align(&model, d0);
                let b = gauge_align(&model.rotated_z(angle), d0.rotate_z(angle));
                prop_assert!(a.d0.distance(b.d0) <= 1e-12 * (1.0 + d0.norm()));
                for (x, y) in a.controls.iter().zip(&b.controls) {
                    prop_assert!(x.distance(*y) <= 1e-12 * (1.0 + x.norm()));
                }
                prop_assert!(a.d0.y.abs() <= 1e-12 * (1.0 + d0.norm()));
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    check(
        "regression scaling covariance",
        runner
            .run(
                &(prop::collection::vec((-1.0f64..1.0, -2.0f64..2.0), 3..12), 0.1f64..10.0, 0.1f64..10.0),
                |(pts, cf, cv)| {
                    prop_assume!(linear_fit(&pts).is_ok());
                    let base = linear_fit(&pts).unwrap();
                    let scaled: Vec<_> = pts.iter().map(|&(f, v)| (cf * f, cv * v)).collect();
                    let s = linear_fit(&scaled).unwrap();
                    let tol = 1e-9 * (1.0 + base.slope.abs() + base.intercept.abs());
                    prop_assert!((s.slope - base.slope * cv / cf).abs() <= tol * cv / cf.min(1.0));
                    prop_assert!((s.intercept - base.intercept * cv).abs() <= tol * cv);
                    Ok(())
                },
            )
            .map_err(|e| e.to_string()),
    );

    let pass = failed.is_empty();
    let detail = if pass { format!("8 invariants x {CASES} cases") } else { failed.join("; ") };
    Outcome { pass, detail }
}

fn stage1_all(seed: u64, cfg: &RunConfig) -> qubit_hamid::Result<[StageOneEstimate; 3]> {
    let series = benchmark_record(seed, cfg);
    let opts = cfg.spectral_options();
    let fourier = estimate_fourier(&series, &opts)?;
    let cosine = fit_cosine_segment(&series, fourier.omega, &opts)?;
    let rcfg = cfg.stage1_refine_sampling(seed)?;
    let mut batch = 0u16;
    let mut acquire = |ts: &[f64]| {
        batch += 1;
        measure_at(Vector3::new(0.2, 0.0, 0.2), Vector3::POLE, ts, &rcfg, ExperimentId::new(1, 0, 0, batch))
    };
    let parabola = refine_minimum_parabola(&series, fourier.omega, &mut acquire, &opts)?;
    Ok([fourier, cosine, parabola])
}

fn criterion_7() -> Outcome {
    let cfg = RunConfig::default();
    let mut dw = Vec::new();
    let mut dth = Vec::new();
    let mut resolution = Vec::new();
    for seed in 0..20 {
        let est = match stage1_all(seed, &cfg) {
            Ok(e) => e,
            Err(e) => return Outcome { pass: false, detail: format!("seed {seed}: {e}") },
        };
        let spread = |f: fn(&StageOneEstimate) -> f64| {
            let v: Vec<f64> = est.iter().map(f).collect();
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        };
        dw.push(spread(|e| e.omega));
        dth.push(spread(|e| e.theta));
        resolution.push(2.0 * PI / est[0].t_opt);
    }
    let (mw, mt, res) = (median(dw), median(dth), median(resolution));
    let pass = mw <= 2.0 * res && mt <= 0.05;
    Outcome {
        pass,
        detail: format!("median omega spread {mw:.4} (2 dw = {:.4}), median theta spread {mt:.4}", 2.0 * res),
    }
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 7] = [
        ("noiseless recovery", criterion_1),
        ("pole trajectory benchmark", criterion_2),
        ("azimuth benchmark", criterion_3),
        ("full noisy pipeline", criterion_4),
        ("peak sharpness truncation", criterion_5),
        ("invariant suites", criterion_6),
        ("stage-one method agreement", criterion_7),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let out = run();
        println!("{} {label}: {}", if out.pass { "PASS" } else { "FAIL" }, out.detail);
        failures += usize::from(!out.pass);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
