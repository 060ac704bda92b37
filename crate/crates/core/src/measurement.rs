//! Synthetic `σz` measurement records.
//!
//! Each time point is an independent batch of `ne` initialise/evolve/measure
//! cycles. Every shot reports `+1` with probability `(1 + z)/2` and is then
//! flipped with the symmetric readout error probability. The estimate stored
//! for the point is `(n₊ − n₋)/ne`.
//!
//! Randomness comes from per-point ChaCha substreams keyed by
//! `(seed, experiment, k)`, so records do not depend on generation order.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::bloch::{effective_axis, evolve_z, HamiltonianModel, Vector3};
use crate::error::{Error, Result};

/// Sampling parameters for one mapped trajectory.
///
/// `ne = None` is exact mode: each point is the noiseless expectation
/// `(1 − 2p)·z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub dt: f64,
    pub tf: f64,
    pub ne: Option<u32>,
    pub readout_error: f64,
    pub seed: u64,
}

impl SamplingConfig {
    pub fn new(dt: f64, tf: f64, ne: Option<u32>, readout_error: f64, seed: u64) -> Result<Self> {
        let cfg = Self { dt, tf, ne, readout_error, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Validation(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.tf.is_finite() && self.tf >= self.dt) {
            return Err(Error::Validation(format!("tf must be >= dt, got tf={} dt={}", self.tf, self.dt)));
        }
        if self.ne == Some(0) {
            return Err(Error::Validation("ne must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.readout_error) {
            return Err(Error::Validation(format!("readout_error must lie in [0, 0.5), got {}", self.readout_error)));
        }
        Ok(())
    }

    pub fn is_exact(&self) -> bool {
        self.ne.is_none()
    }

    /// Number of grid points `floor(tf/dt + 1)`.
    pub fn samples(&self) -> usize {
        // guard against tf/dt landing just below an integer
        (self.tf / self.dt + 1.0 + 1e-9).floor() as usize
    }

    /// Total measurement budget `ne·floor(tf/dt + 1)`; `None` in exact mode.
    pub fn total_measurements(&self) -> Option<u64> {
        self.ne.map(|ne| ne as u64 * self.samples() as u64)
    }

    /// Factor `1/(1 − 2p)` that undoes the contraction from symmetric flips.
    pub fn readout_gain(&self) -> f64 {
        1.0 / (1.0 - 2.0 * self.readout_error)
    }
}

/// Identifies one physical experiment so its RNG substream is unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExperimentId(pub u64);

impl ExperimentId {
    /// Packs `(stage, channel, setting, batch)` into one id.
    pub fn new(stage: u16, channel: u16, setting: u16, batch: u16) -> Self {
        Self((stage as u64) << 48 | (channel as u64) << 32 | (setting as u64) << 16 | batch as u64)
    }
}

fn substream(seed: u64, experiment: ExperimentId, k: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&experiment.0.to_le_bytes());
    key[16..24].copy_from_slice(&(k as u64).to_le_bytes());
    key[24..].copy_from_slice(b"sigma-z.");
    ChaCha8Rng::from_seed(key)
}

/// Sampled `⟨σz(t_k)⟩` estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub config: SamplingConfig,
    /// Set when `dt ≥ π/‖axis‖`, i.e. sampling at or below the Nyquist rate.
    pub aliasing_risk: bool,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, config: SamplingConfig) -> Result<Self> {
        let s = Self { times, values, config, aliasing_risk: false };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.times.is_empty() {
            return Err(Error::Validation("time series is empty".into()));
        }
        if self.times.len() != self.values.len() {
            return Err(Error::Validation(format!("{} times but {} values", self.times.len(), self.values.len())));
        }
        if let Some(i) = self.times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Validation(format!("times not strictly increasing at index {}", i + 1)));
        }
        for (i, &v) in self.values.iter().enumerate() {
            if !(v.abs() <= 1.0) {
                return Err(Error::Validation(format!("value {v} at index {i} outside [-1, 1]")));
            }
            if let Some(ne) = self.config.ne {
                let k = (v + 1.0) * ne as f64 / 2.0;
                if (k - k.round()).abs() > 1e-6 {
                    return Err(Error::Validation(format!("value {v} at index {i} is not of the form 2k/{ne} - 1")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Points with `t ≤ tf`.
    pub fn truncated(&self, tf: f64) -> TimeSeries {
        let n = self.times.partition_point(|&t| t <= tf + 1e-9 * self.config.dt);
        let mut config = self.config;
        config.tf = self.times[n.max(1) - 1];
        TimeSeries {
            times: self.times[..n].to_vec(),
            values: self.values[..n].to_vec(),
            config,
            aliasing_risk: self.aliasing_risk,
        }
    }

    /// Values rescaled by `1/(1 − 2p)` when `correct` is set.
    pub fn readout_values(&self, correct: bool) -> Vec<f64> {
        if correct {
            let g = self.config.readout_gain();
            self.values.iter().map(|v| v * g).collect()
        } else {
            self.values.clone()
        }
    }

    /// Variance weight of each point: `ne` for finite shots, `1` in exact mode.
    pub fn weight(&self) -> f64 {
        self.config.ne.map_or(1.0, |ne| ne as f64)
    }
}

/// One noisy `⟨σz⟩` estimate from `ne` shots; `ne = None` returns the
/// expectation `(1 − 2p)·z` exactly.
pub fn sample_z<R: Rng + ?Sized>(z_true: f64, ne: Option<u32>, readout_error: f64, rng: &mut R) -> f64 {
    let z = z_true.clamp(-1.0, 1.0);
    let Some(ne) = ne else {
        return (1.0 - 2.0 * readout_error) * z;
    };
    // a shot reads +1 if it was +1 and not flipped, or -1 and flipped
    let p_plus = (1.0 + z) / 2.0;
    let q = p_plus * (1.0 - readout_error) + (1.0 - p_plus) * readout_error;
    let n_plus = if q >= 1.0 {
        ne as u64
    } else if q <= 0.0 {
        0
    } else {
        Binomial::new(ne as u64, q).expect("probability in (0, 1)").sample(rng)
    };
    (2.0 * n_plus as f64 - ne as f64) / ne as f64
}

/// Measures `⟨σz⟩` for `s0` precessing about `axis` at the given times.
pub fn measure_at(
    axis: Vector3,
    s0: Vector3,
    times: &[f64],
    cfg: &SamplingConfig,
    experiment: ExperimentId,
) -> Result<TimeSeries> {
    cfg.validate()?;
    let omega = axis.norm();
    if !(omega > 0.0) {
        return Err(Error::InvalidAxis);
    }
    let values = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let z = evolve_z(s0, axis, t)?;
            let mut rng = substream(cfg.seed, experiment, k);
            Ok(sample_z(z, cfg.ne, cfg.readout_error, &mut rng))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut config = *cfg;
    if times.len() >= 2 {
        config.dt = times[1] - times[0];
    }
    config.tf = *times.last().ok_or_else(|| Error::Validation("no sample times".into()))?;
    let mut series = TimeSeries::new(times.to_vec(), values, config)?;
    series.aliasing_risk = config.dt >= std::f64::consts::PI / omega;
    Ok(series)
}

/// Uniform grid `0, dt, 2dt, …` up to `tf`.
pub fn sample_grid(cfg: &SamplingConfig) -> Vec<f64> {
    (0..cfg.samples()).map(|k| k as f64 * cfg.dt).collect()
}

/// Maps `z(t)` of `s0` under the effective axis of `channel` (or free
/// evolution for `None`) at control amplitude `f`.
pub fn run_precession_experiment(
    model: &HamiltonianModel,
    channel: Option<usize>,
    f: f64,
    s0: Vector3,
    cfg: &SamplingConfig,
    experiment: ExperimentId,
) -> Result<TimeSeries> {
    let axis = match channel {
        Some(m) => effective_axis(model, m, f)?,
        None => model.d0,
    };
    cfg.validate()?;
    measure_at(axis, s0, &sample_grid(cfg), cfg, experiment)
}

fn format_ne(ne: Option<u32>) -> String {
    ne.map_or_else(|| "inf".to_string(), |n| n.to_string())
}

/// Serialises a series as CSV: a `# dt=… ne=… readout_error=… seed=…` header,
/// a `t,z` column line and one row per point.
pub fn series_to_csv(series: &TimeSeries) -> String {
    let c = &series.config;
    let mut out = format!("# dt={} ne={} readout_error={} seed={}", c.dt, format_ne(c.ne), c.readout_error, c.seed);
    if series.aliasing_risk {
        out.push_str(" aliasing=1");
    }
    out.push_str("\nt,z\n");
    for (t, z) in series.times.iter().zip(&series.values) {
        let _ = writeln!(out, "{t:.16e},{z:.16e}");
    }
    out
}

pub fn write_series<W: Write>(series: &TimeSeries, mut w: W) -> Result<()> {
    w.write_all(series_to_csv(series).as_bytes())?;
    Ok(())
}

pub fn write_series_file(series: &TimeSeries, path: &Path) -> Result<()> {
    std::fs::write(path, series_to_csv(series))?;
    Ok(())
}

pub fn read_series<R: Read>(r: R) -> Result<TimeSeries> {
    let reader = BufReader::new(r);
    let mut dt = None;
    let mut ne = None;
    let mut readout_error = None;
    let mut seed = None;
    let mut aliasing = false;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut saw_header = false;

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let perr = |message: String| Error::Parse { line: lineno, message };
        if let Some(rest) = line.strip_prefix('#') {
            if saw_header {
                return Err(perr("duplicate header line".into()));
            }
            saw_header = true;
            for tok in rest.split_whitespace() {
                let (key, val) = tok.split_once('=').ok_or_else(|| perr(format!("expected key=value, got '{tok}'")))?;
                let bad = |_| perr(format!("invalid value for {key}: '{val}'"));
                match key {
                    "dt" => dt = Some(val.parse::<f64>().map_err(bad)?),
                    "ne" => {
                        ne = Some(if val == "inf" {
                            None
                        } else {
                            Some(val.parse::<u32>().map_err(|_| perr(format!("invalid ne '{val}'")))?)
                        })
                    }
                    "readout_error" => readout_error = Some(val.parse::<f64>().map_err(bad)?),
                    "seed" => seed = Some(val.parse::<u64>().map_err(|_| perr(format!("invalid seed '{val}'")))?),
                    "aliasing" => aliasing = val == "1",
                    _ => {}
                }
            }
            continue;
        }
        if !saw_header {
            return Err(perr("missing '# dt=… ne=… readout_error=… seed=…' header".into()));
        }
        if line == "t,z" {
            continue;
        }
        let (t, z) = line.split_once(',').ok_or_else(|| perr(format!("expected 't,z', got '{line}'")))?;
        let t: f64 = t.trim().parse().map_err(|_| perr(format!("invalid time '{t}'")))?;
        let z: f64 = z.trim().parse().map_err(|_| perr(format!("invalid value '{z}'")))?;
        times.push(t);
        values.push(z);
    }

    let missing = |k: &str| Error::Parse { line: 1, message: format!("header is missing '{k}'") };
    if !saw_header {
        return Err(Error::Parse { line: 1, message: "empty file".into() });
    }
    if times.is_empty() {
        return Err(Error::Parse { line: 1, message: "no data rows".into() });
    }
    let config = SamplingConfig {
        dt: dt.ok_or_else(|| missing("dt"))?,
        tf: *times.last().unwrap(),
        ne: ne.ok_or_else(|| missing("ne"))?,
        readout_error: readout_error.ok_or_else(|| missing("readout_error"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
    };
    let mut series = TimeSeries::new(times, values, config)?;
    series.aliasing_risk = aliasing;
    Ok(series)
}

pub fn read_series_file(path: &Path) -> Result<TimeSeries> {
    read_series(std::fs::File::open(path)?)
}
