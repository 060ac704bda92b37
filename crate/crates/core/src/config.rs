//! Run configuration.
//!
//! TOML by default, JSON when the file name ends in `.json`. Every key is
//! optional; an empty file describes the three-vector test system
//! `d₀ = (0.2, 0, 0.1)`, `d₁ = (1, 1, 0)`, `d₂ = (0, 0, 1)` at `Δt = 0.25`,
//! `N_e = 10` and 3% readout error.
//!
//! ```toml
//! seed = 7
//! replicates = 1
//! stage1_method = "fourier"      # fourier | cosine-fit | minimum-parabola
//! exact = false
//! correct_readout = true
//! interpolate = true
//! refine_axes = true             # joint likelihood polish of every axis
//!
//! [truth]
//! d0 = [0.2, 0.0, 0.1]
//!
//! [sampling]                      # pole-start records
//! dt = 0.25
//! tf = 120.0
//! ne = 10
//! readout_error = 0.03
//! refine_points = 21              # minimum-parabola method only
//! refine_ne = 100
//!
//! [stage2]                        # equatorial-start records
//! dt = 0.25
//! span_periods = 1.1
//! ne = 10
//! refine_points = 21
//! refine_ne = 100
//! window_fraction = 0.075
//!
//! [[channel]]
//! d = [1.0, 1.0, 0.0]
//! f = [0.05, 0.1, 0.15, 0.2]
//!
//! [[channel]]
//! d = [0.0, 0.0, 1.0]
//! f = [0.05, 0.1, 0.15, 0.2]
//! ```
//!
//! Optional extras: `[reference] channel = 1, f = 0.1` replaces free
//! evolution as the φ = 0 reference axis, `output_dir = "run"`, and
//! `replay_dir = "dir"` reads recorded series instead of simulating them
//! (without `[truth]` every series must be present).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bloch::{HamiltonianModel, Vector3};
use crate::error::{Error, Result};
use crate::measurement::SamplingConfig;
use crate::phi::PhiOptions;
use crate::spectral::{SpectralOptions, Stage1Method};

fn yes() -> bool {
    true
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub d0: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stage1Sampling {
    pub dt: f64,
    pub tf: f64,
    pub ne: u32,
    pub readout_error: f64,
    pub refine_points: usize,
    pub refine_ne: u32,
}

impl Default for Stage1Sampling {
    fn default() -> Self {
        Self { dt: 0.25, tf: 120.0, ne: 10, readout_error: 0.03, refine_points: 21, refine_ne: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stage2Sampling {
    pub dt: f64,
    /// Coarse record length in estimated periods.
    pub span_periods: f64,
    pub ne: u32,
    pub refine_points: usize,
    pub refine_ne: u32,
    pub window_fraction: f64,
}

impl Default for Stage2Sampling {
    fn default() -> Self {
        Self { dt: 0.25, span_periods: 1.1, ne: 10, refine_points: 21, refine_ne: 100, window_fraction: 0.075 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// True interaction vector; required for simulation.
    #[serde(default)]
    pub d: Option<[f64; 3]>,
    #[serde(default = "default_grid")]
    pub f: Vec<f64>,
}

fn default_grid() -> Vec<f64> {
    vec![0.05, 0.1, 0.15, 0.2]
}

/// Setting whose axis defines `φ = 0`; channel `0` is free evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub channel: usize,
    #[serde(default)]
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: u32,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_method")]
    pub stage1_method: Stage1Method,
    #[serde(default)]
    pub exact: bool,
    #[serde(default = "yes")]
    pub correct_readout: bool,
    #[serde(default = "yes")]
    pub interpolate: bool,
    /// Polish every axis by maximum likelihood over all of its records.
    #[serde(default = "yes")]
    pub refine_axes: bool,
    #[serde(default)]
    pub truth: Option<TruthConfig>,
    #[serde(default)]
    pub sampling: Stage1Sampling,
    #[serde(default)]
    pub stage2: Stage2Sampling,
    #[serde(default, rename = "channel")]
    pub channels: Vec<ChannelConfig>,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
    #[serde(default)]
    pub replay_dir: Option<PathBuf>,
}

fn default_method() -> Stage1Method {
    Stage1Method::Fourier
}

impl Default for RunConfig {
    fn default() -> Self {
        let truth = HamiltonianModel::reference_system();
        Self {
            seed: 0,
            replicates: 1,
            output_dir: None,
            stage1_method: Stage1Method::Fourier,
            exact: false,
            correct_readout: true,
            interpolate: true,
            refine_axes: true,
            truth: Some(TruthConfig { d0: truth.d0.to_array() }),
            sampling: Stage1Sampling::default(),
            stage2: Stage2Sampling::default(),
            channels: truth
                .controls
                .iter()
                .map(|d| ChannelConfig { d: Some(d.to_array()), f: default_grid() })
                .collect(),
            reference: None,
            replay_dir: None,
        }
    }
}

/// A `(channel, f)` control setting; channel `0` is free evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub channel: usize,
    /// Position in the channel's grid.
    pub index: usize,
    pub f: f64,
}

impl RunConfig {
    /// Parses TOML text; an empty document yields [`RunConfig::default`].
    pub fn from_toml(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.with_default_system()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.with_default_system()
    }

    /// Reads TOML, or JSON by extension. Not validated, so that command-line
    /// overrides can be applied first.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    /// A file naming neither truth, channels nor replay data gets the test
    /// system.
    fn with_default_system(mut self) -> Result<Self> {
        if self.truth.is_none() && self.channels.is_empty() && self.replay_dir.is_none() {
            let d = Self::default();
            self.truth = d.truth;
            self.channels = d.channels;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.truth.is_none() && self.replay_dir.is_none() {
            return bad("no [truth] to simulate and no replay_dir to read".into());
        }
        if self.truth.is_some() {
            if let Some(i) = self.channels.iter().position(|c| c.d.is_none()) {
                return bad(format!("channel {} has no interaction vector d", i + 1));
            }
        }
        for (i, c) in self.channels.iter().enumerate() {
            if c.f.is_empty() {
                return bad(format!("channel {} has an empty control grid", i + 1));
            }
            if c.f.iter().any(|f| !f.is_finite()) {
                return bad(format!("channel {} has a non-finite control amplitude", i + 1));
            }
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if let Some(r) = self.reference {
            if r.channel > self.channels.len() {
                return bad(format!("reference channel {} does not exist", r.channel));
            }
            if r.channel > 0 && !self.channels[r.channel - 1].f.contains(&r.f) {
                return bad(format!("reference f = {} is not on channel {}'s grid", r.f, r.channel));
            }
        }
        self.stage1_sampling(0)?;
        self.stage2_sampling(0, 1.0)?;
        let s2 = &self.stage2;
        if !(s2.span_periods >= 1.0 && s2.span_periods.is_finite()) {
            return bad(format!("stage2.span_periods must be >= 1, got {}", s2.span_periods));
        }
        if !(s2.window_fraction > 0.0 && s2.window_fraction < 0.25) {
            return bad(format!("stage2.window_fraction must lie in (0, 0.25), got {}", s2.window_fraction));
        }
        if s2.refine_ne == 0 || self.sampling.refine_ne == 0 {
            return bad("refine_ne must be >= 1".into());
        }
        Ok(())
    }

    pub fn truth_model(&self) -> Result<Option<HamiltonianModel>> {
        let Some(t) = &self.truth else { return Ok(None) };
        let controls = self
            .channels
            .iter()
            .enumerate()
            .map(|(i, c)| c.d.map(Vector3::from).ok_or_else(|| Error::Config(format!("channel {} has no d", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        HamiltonianModel::new(Vector3::from(t.d0), controls).map(Some)
    }

    /// Free evolution followed by every channel's grid.
    pub fn settings(&self) -> Vec<Setting> {
        let mut out = vec![Setting { channel: 0, index: 0, f: 0.0 }];
        for (c, ch) in self.channels.iter().enumerate() {
            out.extend(ch.f.iter().enumerate().map(|(index, &f)| Setting { channel: c + 1, index, f }));
        }
        out
    }

    fn ne(&self, ne: u32) -> Option<u32> {
        (!self.exact).then_some(ne)
    }

    fn readout_error(&self) -> f64 {
        if self.exact {
            0.0
        } else {
            self.sampling.readout_error
        }
    }

    pub fn stage1_sampling(&self, seed: u64) -> Result<SamplingConfig> {
        let s = &self.sampling;
        SamplingConfig::new(s.dt, s.tf, self.ne(s.ne), self.readout_error(), seed)
            .map_err(|e| Error::Config(format!("[sampling]: {e}")))
    }

    pub fn stage1_refine_sampling(&self, seed: u64) -> Result<SamplingConfig> {
        let s = &self.sampling;
        SamplingConfig::new(s.dt, s.tf, self.ne(s.refine_ne), self.readout_error(), seed)
            .map_err(|e| Error::Config(format!("[sampling]: {e}")))
    }

    /// Coarse stage-2 sampling over `span_periods` of the estimated period.
    pub fn stage2_sampling(&self, seed: u64, period: f64) -> Result<SamplingConfig> {
        let s = &self.stage2;
        let tf = (s.span_periods * period).max(s.dt);
        SamplingConfig::new(s.dt, tf, self.ne(s.ne), self.readout_error(), seed)
            .map_err(|e| Error::Config(format!("[stage2]: {e}")))
    }

    pub fn stage2_refine_sampling(&self, seed: u64) -> Result<SamplingConfig> {
        let s = &self.stage2;
        SamplingConfig::new(s.dt, s.dt, self.ne(s.refine_ne), self.readout_error(), seed)
            .map_err(|e| Error::Config(format!("[stage2]: {e}")))
    }

    pub fn spectral_options(&self) -> SpectralOptions {
        SpectralOptions {
            interpolate: self.interpolate,
            correct_readout: self.correct_readout,
            refine_points: self.sampling.refine_points,
        }
    }

    pub fn phi_options(&self) -> PhiOptions {
        PhiOptions {
            correct_readout: self.correct_readout,
            window_fraction: self.stage2.window_fraction,
            refine_points: self.stage2.refine_points,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
