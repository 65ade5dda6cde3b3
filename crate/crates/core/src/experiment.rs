//! Experiment configuration and the sweep commands behind the `mmwi` binary.
//!
//! A configuration is a flat TOML table ([`ExperimentConfig`]); every
//! command turns one into a list of [`OutputFile`]s, each a CSV document
//! that starts with a `# ` comment block holding the tool version and the
//! fully resolved configuration. Commands are deterministic for a fixed
//! configuration: Monte-Carlo trials use per-trial RNG streams and all
//! parallel results are collected in index order.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockage::{
    active_count_pmf, analyze, BlockageParams, BlockageResult, MixingConvention,
};
use crate::geometry::{
    distance_cdf, distance_pdf, sample_interferer, spectral_distance_cdf, spectral_distance_pdf,
    Band, Disk, ReceiverAnchor,
};
use crate::interference::{AggregateMgf, InterferenceScenario, LinkModel, MgfEvaluator, MgfMode};
use crate::montecarlo::{
    empirical_ber, empirical_mgf, empirical_outage, run_blockage_mc, run_scenario_mc,
    total_variation, trial_rng, FadingDraws, McConfig, ObstacleField, ScenarioSamples,
};
use crate::numerics::{integrate, QuadratureSpec};
use crate::performance::{
    average_ber, outage_no_interference, outage_probability, rayleigh_ber, DesiredLink,
    NoInterference,
};
use crate::spectral::{FilterShape, PsdShape, SpectralProfile};
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Interferer power spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsdKind {
    /// Gaussian with `σ = W/4`.
    #[default]
    Gaussian,
    /// Flat over `[−W/2, W/2]`.
    Rectangular,
}

/// Which blockage probability the analytic curves use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockageSource {
    /// Midpoint of the analytic `[pb_lower, pb_upper]`.
    #[default]
    Analytic,
    /// Blocked fraction measured by the Monte-Carlo run.
    Measured,
    /// No obstacles anywhere: `pb = 0` and an obstacle-free simulation.
    Off,
}

/// Flat experiment configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub radius_m: f64,
    pub n_interferers: u32,
    pub p_active: f64,
    /// Obstacle density (per m²).
    pub rho: f64,
    pub v0_norm_m: f64,
    pub f0_ghz: f64,
    pub fs_ghz: f64,
    pub fe_ghz: f64,
    pub w_ghz: f64,
    pub ds_m: f64,
    pub de_m: f64,
    /// Full beamwidth 2θ in degrees.
    pub beamwidth_deg: f64,
    pub alpha: f64,
    pub nakagami_m: f64,
    pub q_dbm: f64,
    pub q0_dbm: f64,
    pub l0_m: f64,
    pub c: f64,
    pub guard_m: f64,
    pub psd: PsdKind,
    pub rolloff: f64,
    pub mixing: MixingConvention,
    pub blockage: BlockageSource,
    pub mgf_mode: MgfMode,
    pub sweep_param: Option<String>,
    pub sweep_values: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub outage_snr_db: f64,
    pub eta_db: Vec<f64>,
    pub mc_trials: usize,
    pub mc_seed: u64,
    pub mc_fading_draws: usize,
    pub output: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            radius_m: 25.0,
            n_interferers: 100,
            p_active: 1.0,
            rho: 0.01,
            v0_norm_m: 10.0,
            f0_ghz: 62.0,
            fs_ghz: 58.0,
            fe_ghz: 64.0,
            w_ghz: 2.16,
            ds_m: 0.2,
            de_m: 0.8,
            beamwidth_deg: 20.0,
            alpha: 2.5,
            nakagami_m: 5.0,
            q_dbm: 30.0,
            q0_dbm: 30.0,
            l0_m: 1.0,
            c: 1.0,
            guard_m: 1.0,
            psd: PsdKind::Gaussian,
            rolloff: 0.25,
            mixing: MixingConvention::ProbabilityConsistent,
            blockage: BlockageSource::Analytic,
            mgf_mode: MgfMode::Direct,
            sweep_param: None,
            sweep_values: Vec::new(),
            snr_db: (0..=12).map(|k| 2.5 * k as f64).collect(),
            outage_snr_db: 20.0,
            eta_db: (0..20).map(|k| -10.0 + 1.5 * k as f64).collect(),
            mc_trials: 100_000,
            mc_seed: 1,
            mc_fading_draws: 10,
            output: "results".into(),
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Checks every key and builds the model objects once.
    pub fn validate(&self) -> Result<()> {
        self.network()?;
        if let Some(key) = &self.sweep_param {
            if self.sweep_values.is_empty() {
                return Err(Error::config(format!("sweep over `{key}` has no values")));
            }
            for &v in &self.sweep_values {
                self.with_value(key, v)?.network()?;
            }
        }
        if self.snr_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("snr_db values must be finite"));
        }
        if !self.eta_db.iter().all(|v| v.is_finite()) {
            return Err(Error::config("eta_db values must be finite"));
        }
        if !self.outage_snr_db.is_finite() {
            return Err(Error::config("outage_snr_db must be finite"));
        }
        if self.mc_trials == 0 || self.mc_fading_draws == 0 {
            return Err(Error::config(
                "mc_trials and mc_fading_draws must be positive",
            ));
        }
        Ok(())
    }

    /// Copy with one numeric key replaced.
    pub fn with_value(&self, key: &str, value: f64) -> Result<Self> {
        let mut table = toml::Table::try_from(self).map_err(|e| Error::config(e.to_string()))?;
        let slot = table
            .get_mut(key)
            .ok_or_else(|| Error::config(format!("unknown sweep parameter `{key}`")))?;
        *slot = match slot {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) => {
                if value.fract() != 0.0 || !(value >= 0.0) || value > u32::MAX as f64 {
                    return Err(Error::config(format!(
                        "`{key}` needs a non-negative integer, got {value}"
                    )));
                }
                toml::Value::Integer(value as i64)
            }
            _ => return Err(Error::config(format!("`{key}` is not a numeric parameter"))),
        };
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))
    }

    /// Sweep points as `(value, config)`; a single unlabelled point without a sweep.
    fn sweep_points(&self, required: bool) -> Result<Vec<(Option<f64>, Self)>> {
        match &self.sweep_param {
            Some(key) => {
                if self.sweep_values.is_empty() {
                    return Err(Error::config(format!("sweep over `{key}` has no values")));
                }
                self.sweep_values
                    .iter()
                    .map(|&v| Ok((Some(v), self.with_value(key, v)?)))
                    .collect()
            }
            None if required => Err(Error::config(
                "this command needs sweep_param and sweep_values",
            )),
            None => Ok(vec![(None, self.clone())]),
        }
    }

    /// Resolves units and builds the model objects.
    pub fn network(&self) -> Result<Network> {
        let disk = Disk::new(self.radius_m)?;
        let anchor = ReceiverAnchor::new(self.v0_norm_m, self.f0_ghz * 1e9)?;
        let w = self.w_ghz * 1e9;
        let band = Band::new(self.fs_ghz * 1e9, self.fe_ghz * 1e9, w)?;
        anchor.validate(&disk, &band)?;
        if !(self.beamwidth_deg > 0.0 && self.beamwidth_deg < 180.0) {
            return Err(Error::config(format!(
                "beamwidth_deg must lie in (0, 180), got {}",
                self.beamwidth_deg
            )));
        }
        let theta = (0.5 * self.beamwidth_deg).to_radians();
        let profile = match self.psd {
            PsdKind::Gaussian => SpectralProfile::default_for_bandwidth(w, self.rolloff)?,
            PsdKind::Rectangular => SpectralProfile::new(
                PsdShape::Rectangular { bandwidth: w },
                FilterShape::RaisedCosine {
                    rolloff: self.rolloff,
                },
                w,
            )?,
        };
        let (_, far) = band.spectral_split(&anchor);
        let profile = profile.with_table(far)?;
        let link = LinkModel::new(
            self.alpha,
            self.nakagami_m,
            dbm_to_watts(self.q_dbm),
            self.guard_m,
        )?;
        let blockage = BlockageParams::new(
            self.rho,
            theta,
            self.ds_m,
            self.de_m,
            self.radius_m,
            self.v0_norm_m,
        )?;
        if !(self.p_active >= 0.0 && self.p_active <= 1.0) {
            return Err(Error::config(format!(
                "p_active must lie in [0, 1], got {}",
                self.p_active
            )));
        }
        let desired = DesiredLink::new(
            dbm_to_watts(self.q0_dbm),
            self.l0_m,
            self.nakagami_m,
            1.0,
            self.c,
            self.alpha,
        )?;
        Ok(Network {
            disk,
            anchor,
            band,
            profile,
            link,
            blockage,
            n: self.n_interferers,
            p: self.p_active,
            desired,
            mixing: self.mixing,
            source: self.blockage,
            mode: self.mgf_mode,
        })
    }
}

/// A configuration resolved into model objects (SI units, radians).
#[derive(Debug, Clone)]
pub struct Network {
    pub disk: Disk<f64>,
    pub anchor: ReceiverAnchor<f64>,
    pub band: Band<f64>,
    pub profile: SpectralProfile<f64>,
    pub link: LinkModel<f64>,
    pub blockage: BlockageParams<f64>,
    pub n: u32,
    pub p: f64,
    /// Desired link; its noise is set per SNR point.
    pub desired: DesiredLink<f64>,
    pub mixing: MixingConvention,
    pub source: BlockageSource,
    pub mode: MgfMode,
}

impl Network {
    pub fn analytic_blockage(&self, spec: &QuadratureSpec<f64>) -> Result<BlockageResult<f64>> {
        analyze(&self.blockage, self.mixing, spec)
    }

    pub fn scenario(&self, pb: f64) -> InterferenceScenario<f64> {
        InterferenceScenario {
            disk: self.disk,
            anchor: self.anchor,
            band: self.band,
            link: self.link,
            profile: self.profile.clone(),
            n: self.n,
            p: self.p,
            pb,
        }
    }

    pub fn mc_config(&self, obstacles: bool) -> McConfig {
        McConfig {
            disk: self.disk,
            anchor: self.anchor,
            band: self.band,
            link: self.link,
            profile: self.profile.clone(),
            n: self.n,
            p: self.p,
            obstacles: obstacles.then_some(ObstacleField {
                rho: self.blockage.rho,
                ds: self.blockage.ds,
                de: self.blockage.de,
                theta: self.blockage.theta,
            }),
        }
    }

    pub fn desired_at(&self, snr_db: f64) -> DesiredLink<f64> {
        self.desired.with_snr(db_to_linear(snr_db))
    }

    /// Scenario simulation plus the blockage probability the analytic side uses.
    fn simulate(
        &self,
        trials: usize,
        seed: u64,
        spec: &QuadratureSpec<f64>,
    ) -> Result<(ScenarioSamples, f64)> {
        let samples = run_scenario_mc(
            &self.mc_config(self.source != BlockageSource::Off),
            trials,
            seed,
        )?;
        let pb = match self.source {
            BlockageSource::Off => 0.0,
            BlockageSource::Measured => samples.blockage_rate(),
            BlockageSource::Analytic => {
                let r = self.analytic_blockage(spec)?;
                0.5 * (r.pb_lower + r.pb_upper)
            }
        };
        Ok((samples, pb))
    }
}

/// One CSV document produced by a command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

impl OutputFile {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(&self.name), &self.contents)?;
        Ok(())
    }
}

fn header(command: &str, cfg: &ExperimentConfig, extra: &[String]) -> Result<String> {
    let mut out = format!("# mmwi {VERSION} {command}\n");
    for line in cfg.to_toml()?.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    for line in extra {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}

fn label(v: f64) -> String {
    format!("{v}").replace('-', "m")
}

fn file_name(command: &str, key: Option<&str>, value: Option<f64>) -> String {
    match (key, value) {
        (Some(k), Some(v)) => format!("{command}_{k}_{}.csv", label(v)),
        _ => format!("{command}.csv"),
    }
}

fn analysis_spec() -> QuadratureSpec<f64> {
    QuadratureSpec::default()
}

/// Blockage probability against the swept parameter.
///
/// Columns: swept value, `pb_lower`, `pb_upper`, `pb_mc`, `pb_mc_stderr`.
pub fn cmd_blockage(cfg: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    cfg.validate()?;
    let points = cfg.sweep_points(true)?;
    let key = cfg.sweep_param.as_deref().unwrap_or_default();
    let spec = analysis_spec();
    let mut body = format!("{key},pb_lower,pb_upper,pb_mc,pb_mc_stderr\n");
    for (value, point) in points {
        let net = point.network()?;
        let r = net.analytic_blockage(&spec)?;
        let mc = run_blockage_mc(&net.blockage, cfg.mc_trials, cfg.mc_seed)?;
        body.push_str(&format!(
            "{},{:e},{:e},{:e},{:e}\n",
            value.unwrap_or_default(),
            r.pb_lower,
            r.pb_upper,
            mc.mean,
            mc.stderr
        ));
    }
    Ok(vec![OutputFile {
        name: "blockage.csv".into(),
        contents: header("blockage", cfg, &[])? + &body,
    }])
}

/// Average BER against SNR, one file per sweep value.
///
/// Columns: `snr_db`, `ber_analytic`, `ber_mc`, `ber_mc_stderr`.
pub fn cmd_ber(cfg: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    cfg.validate()?;
    if cfg.snr_db.is_empty() {
        return Err(Error::config("snr_db is empty"));
    }
    let spec = analysis_spec();
    let mut files = Vec::new();
    for (value, point) in cfg.sweep_points(false)? {
        let net = point.network()?;
        let (samples, pb) = net.simulate(cfg.mc_trials, cfg.mc_seed, &spec)?;
        let mgf = MgfEvaluator::new(&net.scenario(pb), net.mode, &spec)?;
        let draws = FadingDraws::new(
            samples.len(),
            cfg.mc_fading_draws,
            net.desired.m,
            cfg.mc_seed,
        )?;
        let rows: Vec<String> = cfg
            .snr_db
            .par_iter()
            .map(|&snr| {
                let link = net.desired_at(snr);
                let analytic = average_ber(&link, &mgf, &spec)?;
                let mc = empirical_ber(&samples.i_agg, &draws, &link)?;
                Ok(format!(
                    "{snr},{:e},{:e},{:e}\n",
                    analytic.value, mc.mean, mc.stderr
                ))
            })
            .collect::<Result<_>>()?;
        let extra = [
            format!("blockage_probability = {pb:e}"),
            format!("blockage_rate_mc = {:e}", samples.blockage_rate()),
        ];
        let mut contents = header("ber", &point, &extra)?;
        contents.push_str("snr_db,ber_analytic,ber_mc,ber_mc_stderr\n");
        contents.extend(rows);
        files.push(OutputFile {
            name: file_name("ber", cfg.sweep_param.as_deref(), value),
            contents,
        });
    }
    Ok(files)
}

/// Outage probability against the SINR threshold, one file per sweep value.
///
/// Columns: `eta_db`, `outage_analytic`, `outage_mc`, `outage_mc_stderr`.
pub fn cmd_outage(cfg: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    cfg.validate()?;
    if cfg.eta_db.is_empty() {
        return Err(Error::config("eta_db is empty"));
    }
    if cfg.eta_db.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config("eta_db must be strictly increasing"));
    }
    let spec = analysis_spec();
    let mut files = Vec::new();
    for (value, point) in cfg.sweep_points(false)? {
        let net = point.network()?;
        let (samples, pb) = net.simulate(cfg.mc_trials, cfg.mc_seed, &spec)?;
        let mgf = MgfEvaluator::new(&net.scenario(pb), net.mode, &spec)?;
        let draws = FadingDraws::new(
            samples.len(),
            cfg.mc_fading_draws,
            net.desired.m,
            cfg.mc_seed,
        )?;
        let link = net.desired_at(cfg.outage_snr_db);
        let rows: Vec<String> = cfg
            .eta_db
            .par_iter()
            .map(|&eta_db| {
                let eta = db_to_linear(eta_db);
                let analytic = outage_probability(eta, &link, &mgf, &spec)?;
                let mc = empirical_outage(&samples.i_agg, &draws, &link, eta)?;
                Ok(format!(
                    "{eta_db},{:e},{:e},{:e}\n",
                    analytic.value, mc.mean, mc.stderr
                ))
            })
            .collect::<Result<_>>()?;
        let extra = [
            format!("blockage_probability = {pb:e}"),
            format!("blockage_rate_mc = {:e}", samples.blockage_rate()),
        ];
        let mut contents = header("outage", &point, &extra)?;
        contents.push_str("eta_db,outage_analytic,outage_mc,outage_mc_stderr\n");
        contents.extend(rows);
        files.push(OutputFile {
            name: file_name("outage", cfg.sweep_param.as_deref(), value),
            contents,
        });
    }
    Ok(files)
}

/// Outcome of one validation check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    /// Measured discrepancy (or statistic) compared against `limit`.
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl CheckRecord {
    fn below(name: &str, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= limit,
            value,
            limit,
            detail: detail.into(),
        }
    }

    fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value: if passed { 0.0 } else { 1.0 },
            limit: 0.0,
            detail: detail.into(),
        }
    }

    fn failed(name: &str, err: &Error) -> Self {
        Self::flag(name, false, format!("error: {err}"))
    }
}

/// All checks of a `validate` run.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckRecord>,
    header: String,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "[{}] {:<28} value {:<12.4e} limit {:<12.4e} {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.limit,
                c.detail
            ));
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        out.push_str(&format!("{} checks, {failed} failed\n", self.checks.len()));
        out
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.checks
            .iter()
            .map(|c| serde_json::to_string(c).expect("check records serialize") + "\n")
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.clone();
        out.push_str("check,passed,value,limit,detail\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{:e},{:e},\"{}\"\n",
                c.name,
                c.passed,
                c.value,
                c.limit,
                c.detail.replace('"', "\"\"")
            ));
        }
        out
    }

    pub fn files(&self) -> Vec<OutputFile> {
        vec![
            OutputFile {
                name: "validate.csv".into(),
                contents: self.to_csv(),
            },
            OutputFile {
                name: "validate.jsonl".into(),
                contents: self.to_json_lines(),
            },
        ]
    }
}

/// Kolmogorov–Smirnov distance of `samples` (sorted in place) from `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs())
    })
}

/// Pmf of the number of active interferers by composing, slot by slot,
/// Bernoulli(`p`) presence with Bernoulli(`1 − pb`) survival.
pub fn composed_active_pmf(n: u32, p: f64, pb: f64) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &w) in pmf.iter().enumerate() {
            next[k] += w * (1.0 - p);
            next[k] += w * p * pb;
            next[k + 1] += w * p * (1.0 - pb);
        }
        pmf = next;
    }
    pmf
}

fn record<F: FnOnce() -> Result<CheckRecord>>(name: &str, f: F) -> CheckRecord {
    f().unwrap_or_else(|e| CheckRecord::failed(name, &e))
}

fn non_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] >= w[0])
}

/// Upper-bound trend of `pb` along a one-parameter grid.
fn pb_trend(
    cfg: &ExperimentConfig,
    key: &str,
    grid: &[f64],
    increasing: bool,
    spec: &QuadratureSpec<f64>,
) -> Result<CheckRecord> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for &v in grid {
        let r = cfg.with_value(key, v)?.network()?.analytic_blockage(spec)?;
        lower.push(r.pb_lower);
        upper.push(r.pb_upper);
    }
    let signed =
        |v: &[f64]| -> Vec<f64> { v.iter().map(|x| if increasing { *x } else { -x }).collect() };
    let ok = non_decreasing(&signed(&lower)) && non_decreasing(&signed(&upper));
    let worst = lower
        .windows(2)
        .chain(upper.windows(2))
        .map(|w| if increasing { w[0] - w[1] } else { w[1] - w[0] })
        .fold(0.0f64, f64::max);
    Ok(CheckRecord {
        name: format!("blockage_trend_{key}"),
        passed: ok,
        value: worst,
        limit: 0.0,
        detail: format!(
            "{} in {key}; pb_lower {:?}",
            if increasing {
                "non-decreasing"
            } else {
                "non-increasing"
            },
            lower
                .iter()
                .map(|x| (x * 1e5).round() / 1e5)
                .collect::<Vec<_>>()
        ),
    })
}

/// Runs the invariant and cross-validation suite at the configured (usually
/// reduced) trial count.
pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let net = cfg.network()?;
    let spec = analysis_spec();
    let tight = QuadratureSpec::default().with_tolerances(1e-13, 1e-13);
    let trials = cfg.mc_trials;
    let seed = cfg.mc_seed;
    let mut checks = Vec::new();

    // densities
    checks.push(record("distance_density_mass", || {
        let split = net.disk.radius - net.anchor.v0_norm;
        let top = net.disk.radius + net.anchor.v0_norm;
        let pdf = |l: f64| distance_pdf(l, &net.disk, &net.anchor).unwrap_or(f64::NAN);
        let mass = integrate(pdf, 0.0, split, &tight)? + integrate(pdf, split, top, &tight)?;
        Ok(CheckRecord::below(
            "distance_density_mass",
            (mass - 1.0).abs(),
            1e-9,
            format!("mass {mass}"),
        ))
    }));
    checks.push(record("spectral_density_mass", || {
        let (near, far) = net.band.spectral_split(&net.anchor);
        let pdf = |w: f64| spectral_distance_pdf(w, &net.band, &net.anchor);
        let mass = integrate(pdf, 0.0, near, &tight)? + integrate(pdf, near, far, &tight)?;
        Ok(CheckRecord::below(
            "spectral_density_mass",
            (mass - 1.0).abs(),
            1e-9,
            format!("mass {mass}"),
        ))
    }));
    let ks_n = 200_000usize;
    let draws: Vec<(f64, f64)> = (0..ks_n)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed ^ 0x5eed, i as u64);
            let (pos, f) = sample_interferer(&mut rng, &net.disk, &net.band);
            let rx = net.anchor.position();
            (
                (pos[0] - rx[0]).hypot(pos[1] - rx[1]),
                (f - net.anchor.f0).abs(),
            )
        })
        .collect();
    checks.push(record("distance_ks", || {
        let mut ells: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let d = ks_distance(&mut ells, |l| {
            distance_cdf(l, &net.disk, &net.anchor).unwrap_or(f64::NAN)
        });
        Ok(CheckRecord::below(
            "distance_ks",
            d,
            0.01,
            format!("{ks_n} draws"),
        ))
    }));
    checks.push(record("spectral_ks", || {
        let mut ws: Vec<f64> = draws.iter().map(|d| d.1).collect();
        let d = ks_distance(&mut ws, |w| {
            spectral_distance_cdf(w, &net.band, &net.anchor)
        });
        Ok(CheckRecord::below(
            "spectral_ks",
            d,
            0.01,
            format!("{ks_n} draws"),
        ))
    }));

    // blockage
    checks.push(record("blockage_zero_density", || {
        let zero = cfg.with_value("rho", 0.0)?.network()?;
        let r = zero.analytic_blockage(&spec)?;
        let mc = run_blockage_mc(&zero.blockage, 1000, seed)?;
        let ok = r.pb_lower == 0.0 && r.pb_upper == 0.0 && mc.mean == 0.0;
        Ok(CheckRecord::flag(
            "blockage_zero_density",
            ok,
            "analytic and simulated pb at rho = 0",
        ))
    }));
    let rho_grid: Vec<f64> = (0..=10)
        .map(|k| 10f64.powf(-3.0 + 0.25 * k as f64))
        .collect();
    checks.push(record("blockage_bounds_ordered", || {
        let mut ok = true;
        for &rho in &rho_grid {
            let r = cfg
                .with_value("rho", rho)?
                .network()?
                .analytic_blockage(&spec)?;
            ok &= r.pb_lower <= r.pb_upper && r.n_res_lower <= r.n_res_upper;
        }
        Ok(CheckRecord::flag(
            "blockage_bounds_ordered",
            ok,
            "pb_lower <= pb_upper over the rho grid",
        ))
    }));
    checks.push(record("blockage_trend_rho", || {
        pb_trend(cfg, "rho", &rho_grid, true, &spec)
    }));
    let beam_grid: Vec<f64> = (1..=7).map(|k| 10.0 * k as f64).collect();
    checks.push(record("blockage_trend_beamwidth_deg", || {
        pb_trend(cfg, "beamwidth_deg", &beam_grid, false, &spec)
    }));
    let radius_grid: Vec<f64> = (1..=8).map(|k| cfg.v0_norm_m + 5.0 * k as f64).collect();
    checks.push(record("blockage_trend_radius_m", || {
        pb_trend(cfg, "radius_m", &radius_grid, true, &spec)
    }));

    // active-interferer law
    checks.push(record("active_count_binomial", || {
        let mut worst = 0.0f64;
        for n in 1..=10u32 {
            for (p, pb) in [(1.0, 0.3), (0.7, 0.1), (0.4, 0.6)] {
                let composed = composed_active_pmf(n, p, pb);
                for (k, &c) in composed.iter().enumerate() {
                    worst = worst.max((active_count_pmf(k as u32, n, p, pb) - c).abs());
                }
            }
        }
        Ok(CheckRecord::below(
            "active_count_binomial",
            worst,
            1e-12,
            "N <= 10",
        ))
    }));

    let samples = run_scenario_mc(&net.mc_config(true), trials, seed)?;
    let pb_mc = samples.blockage_rate();
    checks.push(record("thinning_tv", || {
        let emp = samples.k_pmf(net.n);
        let model: Vec<f64> = (0..=net.n)
            .map(|k| active_count_pmf(k, net.n, net.p, pb_mc))
            .collect();
        let tv = total_variation(&emp, &model);
        Ok(CheckRecord::below(
            "thinning_tv",
            tv,
            0.02,
            format!("pb_mc {pb_mc:.5}, {trials} trials"),
        ))
    }));

    // aggregate MGF
    let measured = MgfEvaluator::new(&net.scenario(pb_mc), MgfMode::Direct, &spec)?;
    checks.push(record("mgf_vs_mc", || {
        let mut worst = 0.0f64;
        let mut detail = String::new();
        for k in 0..10 {
            let s = -10f64.powf(-1.0 + 3.5 * k as f64 / 9.0) / net.link.q;
            let analytic = measured.aggregate_real(s)?;
            let emp = empirical_mgf(&samples.i_agg, s)?;
            let allowed = (0.01 * analytic).max(3.0 * emp.stderr);
            let ratio = (analytic - emp.mean).abs() / allowed;
            if ratio > worst {
                worst = ratio;
                detail = format!(
                    "s {s:.3e}: analytic {analytic:.6e} mc {:.6e} +- {:.1e}",
                    emp.mean, emp.stderr
                );
            }
        }
        Ok(CheckRecord::below("mgf_vs_mc", worst, 1.0, detail))
    }));
    checks.push(record("series_vs_direct", || {
        let tol = 1e-12;
        let series =
            MgfEvaluator::with_series_options(&net.scenario(0.0), MgfMode::Series, 80, tol, &spec)?;
        let direct = MgfEvaluator::new(&net.scenario(0.0), MgfMode::Direct, &spec)?;
        let mut worst = 0.0f64;
        for qs in [-1e-3, -1e-2, -0.1, -0.3, -1.0] {
            let s = qs / net.link.q;
            worst =
                worst.max((series.per_interferer_real(s)? - direct.per_interferer_real(s)?).abs());
        }
        Ok(CheckRecord::below(
            "series_vs_direct",
            worst,
            10.0 * tol,
            "q*s in [-1, -1e-3]",
        ))
    }));
    checks.push(record("series_needs_guard_zone", || {
        let bad = cfg.with_value("guard_m", 0.0)?.network()?;
        let outcome = MgfEvaluator::new(&bad.scenario(0.0), MgfMode::Series, &spec);
        Ok(match outcome {
            Err(e @ Error::Domain(_)) => {
                CheckRecord::flag("series_needs_guard_zone", true, e.to_string())
            }
            Err(e) => CheckRecord::flag(
                "series_needs_guard_zone",
                false,
                format!("unexpected error: {e}"),
            ),
            Ok(_) => CheckRecord::flag(
                "series_needs_guard_zone",
                false,
                "series accepted a zero guard radius",
            ),
        })
    }));

    // interference-free oracles
    checks.push(record("outage_gamma_cdf", || {
        let link = net.desired_at(cfg.outage_snr_db);
        let mut worst = 0.0f64;
        for k in 0..20 {
            let eta = db_to_linear(-10.0 + 1.5 * k as f64);
            let got = outage_probability(eta, &link, &NoInterference, &spec)?.value;
            worst = worst.max((got - outage_no_interference(eta, &link)?).abs());
        }
        Ok(CheckRecord::below(
            "outage_gamma_cdf",
            worst,
            1e-4,
            "20 thresholds",
        ))
    }));
    checks.push(record("ber_rayleigh", || {
        let mut worst = 0.0f64;
        for snr_db in [0.0, 5.0, 10.0, 20.0] {
            let link = DesiredLink {
                m: 1.0,
                c: 1.0,
                ..net.desired_at(snr_db)
            };
            let got = average_ber(&link, &NoInterference, &spec)?.value;
            worst = worst.max((got - rayleigh_ber(db_to_linear(snr_db), 1.0)).abs());
        }
        Ok(CheckRecord::below(
            "ber_rayleigh",
            worst,
            1e-5,
            "m = 1, c = 1",
        ))
    }));

    // end-to-end against simulation
    let fading = FadingDraws::new(samples.len(), cfg.mc_fading_draws, net.desired.m, seed)?;
    checks.push(record("ber_vs_mc", || {
        let rows: Vec<(f64, f64, f64, f64)> = [0.0, 10.0, 20.0, 30.0]
            .par_iter()
            .map(|&snr| {
                let link = net.desired_at(snr);
                let a = average_ber(&link, &measured, &spec)?.value;
                let mc = empirical_ber(&samples.i_agg, &fading, &link)?;
                Ok((snr, a, mc.mean, mc.stderr))
            })
            .collect::<Result<_>>()?;
        let mut worst = 0.0f64;
        for &(_, a, mc, se) in rows.iter().filter(|r| r.2 > 1e-3) {
            worst = worst.max((a - mc).abs() / (0.05 * mc).max(3.0 * se));
        }
        Ok(CheckRecord::below(
            "ber_vs_mc",
            worst,
            1.0,
            "relative to max(5%, 3 stderr)",
        ))
    }));
    checks.push(record("outage_vs_mc", || {
        let link = net.desired_at(cfg.outage_snr_db);
        let rows: Vec<f64> = [-5.0, 0.0, 5.0, 10.0]
            .par_iter()
            .map(|&eta_db| {
                let eta = db_to_linear(eta_db);
                let a = outage_probability(eta, &link, &measured, &spec)?.value;
                let mc = empirical_outage(&samples.i_agg, &fading, &link, eta)?;
                Ok((a - mc.mean).abs())
            })
            .collect::<Result<_>>()?;
        Ok(CheckRecord::below(
            "outage_vs_mc",
            rows.iter().cloned().fold(0.0, f64::max),
            0.02,
            "4 thresholds",
        ))
    }));

    // blockage-aware against blockage-blind
    checks.push(record("blockage_outage_gap", || {
        let r = net.analytic_blockage(&spec)?;
        let pb = 0.5 * (r.pb_lower + r.pb_upper);
        let base = MgfEvaluator::new(&net.scenario(0.0), MgfMode::Direct, &spec)?.with_slots(300);
        let aware = base.with_blockage(net.p, pb)?;
        let eta_db = median(&cfg.eta_db).unwrap_or(0.0);
        let link = net.desired_at(cfg.outage_snr_db);
        let eta = db_to_linear(eta_db);
        let gap = outage_probability(eta, &link, &base, &spec)?.value
            - outage_probability(eta, &link, &aware, &spec)?.value;
        Ok(CheckRecord {
            name: "blockage_outage_gap".into(),
            passed: gap >= 0.01,
            value: gap,
            limit: 0.01,
            detail: format!("N = 300, eta {eta_db} dB, pb {pb:.5}"),
        })
    }));

    let header = header("validate", cfg, &[])?;
    Ok(ValidationReport { checks, header })
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
