//! End-to-end protocol: pole-start records for every setting, equatorial
//! records planned from the stage-1 estimates, then the straight-line
//! regression.
//!
//! Records come from an [`ExperimentSource`]: the simulator, recorded files,
//! or files with the simulator filling gaps. [`Recorder`] writes every record
//! it passes through so a run can be replayed exactly.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use crate::bloch::{cartesian_from_spherical, effective_axis, rotate, AxisSpherical, HamiltonianModel, Vector3};
use crate::config::{RunConfig, Setting};
use crate::error::{Error, Result};
use crate::identification::{error_norms, extract_hamiltonian, gauge_align, AxisMeasurement};
use crate::measurement::{
    measure_at, read_series_file, sample_grid, write_series_file, ExperimentId, SamplingConfig, TimeSeries,
};
use crate::phi::{
    find_zero_crossing, fit_zero_crossing, locate_extrema, phi_closed_form, phi_fit, plan_equatorial_prep, PrepPlan,
};
use crate::refine::{refine_axis, Freedom, Record};
use crate::report::{
    series_file_name, ReferenceReport, ReplicateFailure, Report, SettingReport, Stage2Report, Summary,
};
use crate::spectral::{estimate_fourier, fit_cosine_segment, refine_minimum_parabola, Stage1Method, StageOneEstimate};

/// Which record is being asked for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    /// `1`: pole start. `2`: equatorial start after `prep_time` about the
    /// reference axis.
    pub stage: u16,
    pub setting: Setting,
    pub batch: u16,
    pub prep_time: f64,
}

impl Request {
    fn experiment(&self) -> ExperimentId {
        ExperimentId::new(self.stage, self.setting.channel as u16, self.setting.index as u16, self.batch)
    }

    pub fn file_name(&self) -> String {
        series_file_name(self.stage, self.setting.channel, self.setting.index, self.batch)
    }
}

pub trait ExperimentSource {
    /// `times = None` asks for the default stage-1 grid of `cfg`.
    fn acquire(&mut self, req: &Request, times: Option<&[f64]>, cfg: &SamplingConfig) -> Result<TimeSeries>;
}

impl<S: ExperimentSource + ?Sized> ExperimentSource for Box<S> {
    fn acquire(&mut self, req: &Request, times: Option<&[f64]>, cfg: &SamplingConfig) -> Result<TimeSeries> {
        (**self).acquire(req, times, cfg)
    }
}

/// Simulated qubit with known Hamiltonian.
pub struct Simulator {
    pub truth: HamiltonianModel,
    /// True axis of the reference setting, used to execute preparations.
    pub reference: Vector3,
}

impl Simulator {
    fn axis(&self, s: &Setting) -> Result<Vector3> {
        if s.channel == 0 {
            Ok(self.truth.d0)
        } else {
            effective_axis(&self.truth, s.channel, s.f)
        }
    }
}

impl ExperimentSource for Simulator {
    fn acquire(&mut self, req: &Request, times: Option<&[f64]>, cfg: &SamplingConfig) -> Result<TimeSeries> {
        let axis = self.axis(&req.setting)?;
        let s0 = if req.stage == 1 {
            Vector3::POLE
        } else {
            let r = self.reference;
            rotate(Vector3::POLE, r, r.norm() * req.prep_time)?
        };
        let grid;
        let times = match times {
            Some(t) => t,
            None => {
                grid = sample_grid(cfg);
                &grid
            }
        };
        measure_at(axis, s0, times, cfg, req.experiment())
    }
}

/// Reads records from `dir`, falling back to `fallback` for missing files.
pub struct Replay<S> {
    pub dir: PathBuf,
    pub fallback: Option<S>,
}

fn same_times(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
}

impl<S: ExperimentSource> ExperimentSource for Replay<S> {
    fn acquire(&mut self, req: &Request, times: Option<&[f64]>, cfg: &SamplingConfig) -> Result<TimeSeries> {
        let path = self.dir.join(req.file_name());
        if !path.exists() {
            return match &mut self.fallback {
                Some(s) => s.acquire(req, times, cfg),
                None => Err(Error::Config(format!("replay record {} is missing", path.display()))),
            };
        }
        let series = read_series_file(&path)?;
        if let Some(t) = times {
            if !same_times(t, &series.times) {
                return Err(Error::Config(format!(
                    "replay record {} does not match the requested times",
                    path.display()
                )));
            }
        }
        Ok(series)
    }
}

/// Passes records through, writing each one to `dir`.
pub struct Recorder<S> {
    pub inner: S,
    pub dir: Option<PathBuf>,
    pub written: Vec<PathBuf>,
}

impl<S> Recorder<S> {
    pub fn new(inner: S, dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self { inner, dir, written: Vec::new() })
    }
}

impl<S: ExperimentSource> ExperimentSource for Recorder<S> {
    fn acquire(&mut self, req: &Request, times: Option<&[f64]>, cfg: &SamplingConfig) -> Result<TimeSeries> {
        let series = self.inner.acquire(req, times, cfg)?;
        if let Some(d) = &self.dir {
            let p = d.join(req.file_name());
            write_series_file(&series, &p)?;
            self.written.push(p);
        }
        Ok(series)
    }
}

/// The source a configuration asks for: simulation, replay, or replay with
/// simulated gaps.
pub fn source_for(cfg: &RunConfig) -> Result<Box<dyn ExperimentSource>> {
    let sim = match cfg.truth_model()? {
        Some(truth) => {
            let r = reference_setting(cfg);
            let reference = if r.channel == 0 { truth.d0 } else { effective_axis(&truth, r.channel, r.f)? };
            Some(Simulator { truth, reference })
        }
        None => None,
    };
    Ok(match (&cfg.replay_dir, sim) {
        (Some(dir), fallback) => Box::new(Replay { dir: dir.join("series"), fallback }),
        (None, Some(sim)) => Box::new(sim),
        (None, None) => return Err(Error::Config("nothing to simulate or replay".into())),
    })
}

pub fn reference_setting(cfg: &RunConfig) -> Setting {
    match cfg.reference {
        Some(r) if r.channel > 0 => {
            let index = cfg.channels[r.channel - 1].f.iter().position(|&f| f == r.f).unwrap_or(0);
            Setting { channel: r.channel, index, f: r.f }
        }
        _ => Setting { channel: 0, index: 0, f: 0.0 },
    }
}

fn stage1_estimate(
    cfg: &RunConfig,
    seed: u64,
    setting: Setting,
    source: &mut dyn ExperimentSource,
    warnings: &mut Vec<String>,
) -> Result<(StageOneEstimate, Vec<TimeSeries>)> {
    let scfg = cfg.stage1_sampling(seed)?;
    let req = Request { stage: 1, setting, batch: 0, prep_time: 0.0 };
    let series = source.acquire(&req, None, &scfg)?;
    let opts = cfg.spectral_options();
    let fourier = estimate_fourier(&series, &opts)?;
    let mut extra = Vec::new();
    let est = match cfg.stage1_method {
        Stage1Method::Fourier => fourier,
        Stage1Method::CosineFit => fit_cosine_segment(&series, fourier.omega, &opts)?,
        Stage1Method::MinimumParabola => {
            let rcfg = cfg.stage1_refine_sampling(seed)?;
            let mut batch = 0u16;
            let mut acquire = |ts: &[f64]| {
                batch += 1;
                let s = source.acquire(&Request { batch, ..req }, Some(ts), &rcfg)?;
                extra.push(s.clone());
                Ok(s)
            };
            match refine_minimum_parabola(&series, fourier.omega, &mut acquire, &opts) {
                Ok(e) => e,
                Err(e) => {
                    warnings.push(format!(
                        "channel {} f = {}: minimum parabola failed, kept Fourier estimate: {e}",
                        setting.channel, setting.f
                    ));
                    fourier
                }
            }
        }
    };
    let mut records = vec![series];
    records.extend(extra);
    Ok((est, records))
}

fn stage2_estimate(
    cfg: &RunConfig,
    seed: u64,
    setting: Setting,
    est: &StageOneEstimate,
    plan: &PrepPlan,
    source: &mut dyn ExperimentSource,
    warnings: &mut Vec<String>,
) -> Result<(Stage2Report, Vec<TimeSeries>)> {
    let prep_time = plan.duration();
    let period = 2.0 * PI / est.omega;
    let coarse_cfg = cfg.stage2_sampling(seed, period)?;
    let req = Request { stage: 2, setting, batch: 0, prep_time };
    let coarse = source.acquire(&req, Some(&sample_grid(&coarse_cfg)), &coarse_cfg)?;
    let opts = cfg.phi_options();
    let tag = format!("channel {} f = {}", setting.channel, setting.f);

    let t0_raw = find_zero_crossing(&coarse).ok();
    let mut extra = Vec::new();
    let (mut t0, mut extrema, mut windows, mut candidates) = (None, None, Vec::new(), None);
    match fit_zero_crossing(&coarse, est.omega, &opts) {
        Ok(t) => {
            t0 = Some(t);
            let rcfg = cfg.stage2_refine_sampling(seed)?;
            let mut batch = 0u16;
            let mut acquire = |ts: &[f64]| {
                batch += 1;
                let s = source.acquire(&Request { batch, ..req }, Some(ts), &rcfg)?;
                extra.push(s.clone());
                Ok(s)
            };
            match locate_extrema(&coarse, est.omega, t, &mut acquire, &opts) {
                Ok(detail) => {
                    match phi_closed_form(&detail.fit, plan.beta, est.theta) {
                        Ok(c) => candidates = Some(c),
                        Err(e) => warnings.push(format!("{tag}: closed-form azimuth skipped: {e}")),
                    }
                    extrema = Some(detail.fit);
                    windows = detail.windows.to_vec();
                }
                Err(e) => warnings.push(format!("{tag}: extremum parabola skipped: {e}")),
            }
        }
        Err(e) => warnings.push(format!("{tag}: zero crossing not found: {e}")),
    }
    let mut batches = vec![coarse];
    batches.extend(extra);
    let fit = phi_fit(&batches, est.omega, est.theta, plan.beta, &opts)?;
    let report = Stage2Report { prep_time, t0, t0_raw, extrema, windows, candidates, fit, batches: batches.len() };
    Ok((report, batches))
}

/// Runs the whole protocol once with `seed`.
pub fn identify(cfg: &RunConfig, seed: u64, source: &mut dyn ExperimentSource) -> Result<Report> {
    let settings = cfg.settings();
    let mut warnings = Vec::new();

    let (stage1, stage1_records): (Vec<_>, Vec<_>) = settings
        .iter()
        .map(|&s| stage1_estimate(cfg, seed, s, source, &mut warnings))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();

    let rset = reference_setting(cfg);
    let ri = settings
        .iter()
        .position(|s| s.channel == rset.channel && s.index == rset.index)
        .expect("reference setting is on the grid");
    let reference = AxisSpherical { omega: stage1[ri].omega, theta: stage1[ri].theta, phi: 0.0 };
    let plan = plan_equatorial_prep(reference)?;
    let pole_records = |i: usize| -> Vec<Record<'_>> {
        stage1_records[i].iter().map(|series| Record { series, start: Vector3::POLE }).collect()
    };

    let staged_ref = cartesian_from_spherical(reference);
    let refined_ref = if cfg.refine_axes {
        match refine_axis(&pole_records(ri), staged_ref, Freedom::XZ, cfg.correct_readout) {
            // pole records fix only |x| and |z|; the gauge takes both non-negative
            Ok(r) => Some(Vector3::new(r.axis.x.abs(), 0.0, r.axis.z.abs())),
            Err(e) => {
                warnings.push(format!("reference refinement skipped: {e}"));
                None
            }
        }
    } else {
        None
    };
    let ref_axis = refined_ref.unwrap_or(staged_ref);
    // prepared state as executed: the planned pulse about the best reference estimate
    let prepared = rotate(Vector3::POLE, ref_axis, ref_axis.norm() * plan.duration())?;

    let mut reports = Vec::with_capacity(settings.len());
    let mut measurements = Vec::with_capacity(settings.len());
    for (i, (&s, est)) in settings.iter().zip(&stage1).enumerate() {
        let tag = format!("channel {} f = {}", s.channel, s.f);
        let (stage2, staged, staged_alternate, axis, alternate) = if i == ri {
            (None, staged_ref, None, ref_axis, None)
        } else {
            let (st2, batches) = stage2_estimate(cfg, seed, s, est, &plan, source, &mut warnings)?;
            let fit = st2.fit;
            let staged = cartesian_from_spherical(AxisSpherical {
                omega: est.omega,
                theta: fit.declination(est.theta),
                phi: fit.phi,
            });
            let staged_alternate = (!fit.sign_resolved).then(|| {
                cartesian_from_spherical(AxisSpherical {
                    omega: est.omega,
                    theta: fit.alternate_declination(est.theta),
                    phi: fit.alternate_phi,
                })
            });
            let (mut axis, mut alternate) = (staged, staged_alternate);
            if cfg.refine_axes {
                let mut records = pole_records(i);
                records.extend(batches.iter().map(|series| Record { series, start: prepared }));
                let polish = |init: Vector3| refine_axis(&records, init, Freedom::All, cfg.correct_readout);
                match polish(staged) {
                    Ok(r) => axis = r.axis,
                    Err(e) => warnings.push(format!("{tag}: refinement skipped: {e}")),
                }
                if let Some(alt) = staged_alternate {
                    match polish(alt) {
                        Ok(r) => alternate = Some(r.axis),
                        Err(e) => warnings.push(format!("{tag}: alternate refinement skipped: {e}")),
                    }
                }
            }
            (Some(st2), staged, staged_alternate, axis, alternate)
        };
        measurements.push(AxisMeasurement { channel: s.channel, f: s.f, axis, alternate });
        reports.push(SettingReport {
            channel: s.channel,
            index: s.index,
            f: s.f,
            stage1: *est,
            stage2,
            staged,
            staged_alternate,
            axis,
            alternate,
            selected: axis,
            true_axis: None,
        });
    }

    let mut identified = extract_hamiltonian(&measurements)?;
    for (r, (m, &alt)) in reports.iter_mut().zip(measurements.iter().zip(&identified.used_alternate)) {
        r.selected = if alt { m.alternate.unwrap_or(m.axis) } else { m.axis };
    }
    if identified.inconsistent_intercepts {
        warnings.push("per-channel intercepts disagree: nonlinear response or gauge error".into());
    }

    let (truth, distances) = match cfg.truth_model()? {
        Some(t) => {
            let true_ref = if rset.channel == 0 { t.d0 } else { effective_axis(&t, rset.channel, rset.f)? };
            let gauged = gauge_align(&t, true_ref);
            for r in &mut reports {
                r.true_axis = Some(if r.channel == 0 { gauged.d0 } else { effective_axis(&gauged, r.channel, r.f)? });
            }
            let d = error_norms(&identified.model, &gauged)?;
            identified.distances = Some(d.clone());
            (Some(gauged), Some(d))
        }
        None => (None, None),
    };

    Ok(Report {
        seed,
        method: cfg.stage1_method,
        exact: cfg.exact,
        reference: ReferenceReport { channel: rset.channel, f: rset.f, axis: reference, refined: refined_ref, plan },
        settings: reports,
        identified,
        truth,
        distances,
        warnings,
    })
}

/// One run, recording every record under `out/series` when `out` is given
/// and writing `out/report.json`.
pub fn run_once(cfg: &RunConfig, seed: u64, out: Option<&Path>) -> Result<Report> {
    let source = source_for(cfg)?;
    let mut rec = Recorder::new(source, out.map(|o| o.join("series")))?;
    let report = identify(cfg, seed, &mut rec)?;
    if let Some(o) = out {
        report.write(&o.join("report.json"))?;
    }
    Ok(report)
}

/// `cfg.replicates` runs with seeds `seed, seed + 1, …`. Failed replicates
/// are listed in the summary rather than aborting the batch.
pub fn run_replicates(cfg: &RunConfig, out: Option<&Path>) -> Result<(Vec<Report>, Summary)> {
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for r in 0..cfg.replicates as u64 {
        let seed = cfg.seed.wrapping_add(r);
        let dir = out.map(|o| o.join(format!("replicate_{r:03}")));
        match run_once(cfg, seed, dir.as_deref()) {
            Ok(rep) => reports.push(rep),
            Err(e) if e.is_config_error() => return Err(e),
            Err(e) => failures.push(ReplicateFailure { seed, error: e.to_string() }),
        }
    }
    let summary = Summary::from_reports(&reports, failures);
    if let Some(o) = out {
        fs::create_dir_all(o)?;
        fs::write(o.join("summary.json"), summary.to_json()?)?;
    }
    Ok((reports, summary))
}

/// Writes the stage-1 record of every setting to `out/series`.
pub fn simulate(cfg: &RunConfig, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    let truth = cfg.truth_model()?.ok_or_else(|| Error::Config("simulate needs a [truth] section".into()))?;
    let rset = reference_setting(cfg);
    let reference = if rset.channel == 0 { truth.d0 } else { effective_axis(&truth, rset.channel, rset.f)? };
    let mut rec = Recorder::new(Simulator { truth, reference }, Some(out.join("series")))?;
    let scfg = cfg.stage1_sampling(seed)?;
    for s in cfg.settings() {
        rec.acquire(&Request { stage: 1, setting: s, batch: 0, prep_time: 0.0 }, None, &scfg)?;
    }
    Ok(rec.written)
}
