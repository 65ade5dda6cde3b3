//! Geometric Monte-Carlo simulation of the network.
//!
//! Each trial draws its own interferers, obstacles and fading from a ChaCha
//! stream keyed by `(seed, trial index)`, so results do not depend on how
//! trials are scheduled over threads. Obstacles are shared by every link of
//! a trial and blockage is decided by the exact cone-shadow test.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::blockage::BlockageParams;
use crate::geometry::{
    cone_shadow_intervals, is_link_blocked, sample_in_disk, sample_obstacles, Band, Disk,
    ObstacleCircle, ReceiverAnchor,
};
use crate::interference::LinkModel;
use crate::numerics::q_function;
use crate::performance::DesiredLink;
use crate::spectral::SpectralProfile;
use crate::{Error, Result};

/// Stream offset separating desired-link fading draws from scenario draws.
const FADING_STREAM_BASE: u64 = 1 << 62;

/// RNG for one trial.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_trials: usize,
}

impl McEstimate {
    /// Two-pass mean and `std/√n`, summed in slice order.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::domain("an estimate needs at least one trial"));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean,
            stderr,
            n_trials: n,
        })
    }
}

/// Obstacle field and beam shared by all links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleField {
    /// Obstacle density per m².
    pub rho: f64,
    pub ds: f64,
    pub de: f64,
    /// Half-beamwidth (radians).
    pub theta: f64,
}

/// Configuration of a full network draw.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub disk: Disk<f64>,
    pub anchor: ReceiverAnchor<f64>,
    pub band: Band<f64>,
    pub link: LinkModel<f64>,
    pub profile: SpectralProfile<f64>,
    pub n: u32,
    pub p: f64,
    /// `None` disables blockage altogether.
    pub obstacles: Option<ObstacleField>,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        self.anchor.validate(&self.disk, &self.band)?;
        self.link.validate()?;
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::domain(format!(
                "activity probability must lie in [0, 1], got {}",
                self.p
            )));
        }
        if !(self.link.guard < self.disk.radius + self.anchor.v0_norm) {
            return Err(Error::domain("guard zone covers the whole disk"));
        }
        if let Some(f) = &self.obstacles {
            BlockageParams::new(
                f.rho,
                f.theta,
                f.ds,
                f.de,
                self.disk.radius,
                self.anchor.v0_norm,
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McInterferer {
    pub position: [f64; 2],
    pub frequency: f64,
    pub distance: f64,
    pub fading: f64,
    pub upsilon: f64,
    pub blocked: bool,
}

/// One sampled realisation of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct McScenario {
    pub interferers: Vec<McInterferer>,
    pub obstacles: Vec<ObstacleCircle<f64>>,
    /// Interference power summed over the non-blocked links.
    pub i_agg: f64,
}

impl McScenario {
    pub fn active_count(&self) -> u32 {
        self.interferers.iter().filter(|i| !i.blocked).count() as u32
    }
}

fn blocked_link(
    ap: [f64; 2],
    rx: [f64; 2],
    distance: f64,
    theta: f64,
    obstacles: &[ObstacleCircle<f64>],
) -> Result<bool> {
    if obstacles.is_empty() {
        return Ok(false);
    }
    let shadows = cone_shadow_intervals(ap, rx, theta, obstacles)?;
    Ok(is_link_blocked(&shadows, distance * theta.tan()))
}

/// Draws one realisation: obstacles first, then each of the `N` slots.
pub fn sample_scenario<R: Rng + ?Sized>(rng: &mut R, cfg: &McConfig) -> Result<McScenario> {
    let obstacles = match &cfg.obstacles {
        Some(f) => sample_obstacles(rng, &cfg.disk, f.rho, f.ds, f.de)?,
        None => Vec::new(),
    };
    let theta = cfg.obstacles.map(|f| f.theta).unwrap_or(0.0);
    let rx = cfg.anchor.position();
    let fading = Gamma::new(cfg.link.m, 1.0 / cfg.link.m)
        .map_err(|e| Error::domain(format!("fading law: {e}")))?;
    let mut interferers = Vec::new();
    let mut i_agg = 0.0;
    for _ in 0..cfg.n {
        if rng.random::<f64>() >= cfg.p {
            continue;
        }
        let (position, distance) = loop {
            let pos = sample_in_disk(rng, cfg.disk.radius);
            let d = (pos[0] - rx[0]).hypot(pos[1] - rx[1]);
            if d >= cfg.link.guard && d > 0.0 {
                break (pos, d);
            }
        };
        let frequency = cfg.band.fs + cfg.band.width() * rng.random::<f64>();
        let h = fading.sample(rng);
        let upsilon = cfg.profile.upsilon(frequency - cfg.anchor.f0)?;
        let blocked = blocked_link(position, rx, distance, theta, &obstacles)?;
        if !blocked {
            i_agg += cfg.link.q * h * distance.powf(-cfg.link.alpha) * upsilon;
        }
        interferers.push(McInterferer {
            position,
            frequency,
            distance,
            fading: h,
            upsilon,
            blocked,
        });
    }
    Ok(McScenario {
        interferers,
        obstacles,
        i_agg,
    })
}

/// Per-trial summaries of a scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSamples {
    /// Number of non-blocked interferers per trial.
    pub k: Vec<u32>,
    /// Aggregate interference power per trial.
    pub i_agg: Vec<f64>,
    /// Interferers placed, over all trials.
    pub present: u64,
    /// Of those, how many were blocked.
    pub blocked: u64,
    pub seed: u64,
}

impl ScenarioSamples {
    /// Measured blocked fraction of the placed links.
    pub fn blockage_rate(&self) -> f64 {
        if self.present == 0 {
            0.0
        } else {
            self.blocked as f64 / self.present as f64
        }
    }

    /// Empirical pmf of K on `0..=n`.
    pub fn k_pmf(&self, n: u32) -> Vec<f64> {
        let mut counts = vec![0u64; n as usize + 1];
        for &k in &self.k {
            counts[(k as usize).min(n as usize)] += 1;
        }
        let total = self.k.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }

    pub fn len(&self) -> usize {
        self.i_agg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_agg.is_empty()
    }

    /// One row per trial: `trial,k,i_agg`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "trial,k,i_agg")?;
        for (t, (k, i)) in self.k.iter().zip(&self.i_agg).enumerate() {
            writeln!(out, "{t},{k},{i:e}")?;
        }
        Ok(())
    }
}

/// Runs `n_trials` independent scenario draws in parallel.
pub fn run_scenario_mc(cfg: &McConfig, n_trials: usize, seed: u64) -> Result<ScenarioSamples> {
    cfg.validate()?;
    if n_trials == 0 {
        return Err(Error::domain("Monte-Carlo run needs at least one trial"));
    }
    let per_trial: Vec<(u32, f64, u32, u32)> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let sc = sample_scenario(&mut rng, cfg)?;
            let blocked = sc.interferers.iter().filter(|i| i.blocked).count() as u32;
            Ok((
                sc.active_count(),
                sc.i_agg,
                sc.interferers.len() as u32,
                blocked,
            ))
        })
        .collect::<Result<_>>()?;
    let mut out = ScenarioSamples {
        k: Vec::with_capacity(n_trials),
        i_agg: Vec::with_capacity(n_trials),
        present: 0,
        blocked: 0,
        seed,
    };
    for (k, i, present, blocked) in per_trial {
        out.k.push(k);
        out.i_agg.push(i);
        out.present += present as u64;
        out.blocked += blocked as u64;
    }
    Ok(out)
}

/// Blocked fraction of single interferer links under the geometric model.
pub fn run_blockage_mc(
    params: &BlockageParams<f64>,
    n_trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    params.validate()?;
    if n_trials == 0 {
        return Err(Error::domain("Monte-Carlo run needs at least one trial"));
    }
    let disk = params.disk();
    let rx = params.anchor().position();
    let flags: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let (ap, distance) = loop {
                let pos = sample_in_disk(&mut rng, disk.radius);
                let d = (pos[0] - rx[0]).hypot(pos[1] - rx[1]);
                if d > 0.0 {
                    break (pos, d);
                }
            };
            let obstacles = sample_obstacles(&mut rng, &disk, params.rho, params.ds, params.de)?;
            let blocked = blocked_link(ap, rx, distance, params.theta, &obstacles)?;
            Ok(if blocked { 1.0 } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    McEstimate::from_values(&flags)
}

/// Desired-link fading draws, `per_sample` for each interference sample.
///
/// Drawn once and reused across thresholds and SNR points (common random
/// numbers), which keeps swept curves smooth.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraws {
    pub per_sample: usize,
    pub values: Vec<f64>,
}

impl FadingDraws {
    pub fn new(n_samples: usize, per_sample: usize, m: f64, seed: u64) -> Result<Self> {
        if per_sample == 0 {
            return Err(Error::domain("need at least one fading draw per sample"));
        }
        let law = Gamma::new(m, 1.0 / m).map_err(|e| Error::domain(format!("fading law: {e}")))?;
        let values: Vec<f64> = (0..n_samples)
            .into_par_iter()
            .flat_map_iter(|j| {
                let mut rng = trial_rng(seed, FADING_STREAM_BASE + j as u64);
                (0..per_sample)
                    .map(move |_| law.sample(&mut rng))
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Self { per_sample, values })
    }

    fn for_sample(&self, j: usize) -> &[f64] {
        &self.values[j * self.per_sample..(j + 1) * self.per_sample]
    }
}

fn per_sample_estimate<F>(i_agg: &[f64], draws: &FadingDraws, f: F) -> Result<McEstimate>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if draws.values.len() != i_agg.len() * draws.per_sample {
        return Err(Error::domain(
            "fading draws do not match the interference samples",
        ));
    }
    let means: Vec<f64> = i_agg
        .par_iter()
        .enumerate()
        .map(|(j, &i)| {
            let hs = draws.for_sample(j);
            hs.iter().map(|&h| f(i, h)).sum::<f64>() / hs.len() as f64
        })
        .collect();
    McEstimate::from_values(&means)
}

/// `𝔼[e^{s·I}]` over the samples.
pub fn empirical_mgf(i_agg: &[f64], s: f64) -> Result<McEstimate> {
    let values: Vec<f64> = i_agg.iter().map(|&i| (s * i).exp()).collect();
    McEstimate::from_values(&values)
}

/// `P(SINR <= η)` with `SINR = g0·h0/(σn² + I)`.
pub fn empirical_outage(
    i_agg: &[f64],
    draws: &FadingDraws,
    link: &DesiredLink<f64>,
    eta: f64,
) -> Result<McEstimate> {
    link.validate()?;
    let g0 = link.received_power();
    per_sample_estimate(i_agg, draws, |i, h| {
        if g0 * h / (link.noise + i) <= eta {
            1.0
        } else {
            0.0
        }
    })
}

/// `𝔼[Q(√(2c·SINR))]`.
pub fn empirical_ber(
    i_agg: &[f64],
    draws: &FadingDraws,
    link: &DesiredLink<f64>,
) -> Result<McEstimate> {
    link.validate()?;
    let g0 = link.received_power();
    per_sample_estimate(i_agg, draws, |i, h| {
        q_function((2.0 * link.c * g0 * h / (link.noise + i)).sqrt())
    })
}

/// Total-variation distance `½Σ|p − q|` over the common support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (at(p, i) - at(q, i)).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(p: f64, obstacles: Option<ObstacleField>) -> McConfig {
        let w = 2.16e9;
        McConfig {
            disk: Disk::new(25.0).unwrap(),
            anchor: ReceiverAnchor::new(10.0, 62e9).unwrap(),
            band: Band::new(58e9, 64e9, w).unwrap(),
            link: LinkModel::new(2.5, 5.0, 1.0, 1.0).unwrap(),
            profile: SpectralProfile::default_for_bandwidth(w, 0.25)
                .unwrap()
                .with_table(4e9)
                .unwrap(),
            n: 20,
            p,
            obstacles,
        }
    }

    #[test]
    fn estimate_statistics() {
        let e = McEstimate::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0_f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(McEstimate::from_values(&[]).is_err());
    }

    #[test]
    fn inactive_slots_give_silence() {
        let s = run_scenario_mc(&config(0.0, None), 200, 1).unwrap();
        assert!(s.k.iter().all(|&k| k == 0));
        assert!(s.i_agg.iter().all(|&i| i == 0.0));
    }

    #[test]
    fn no_obstacles_keeps_all_links() {
        let s = run_scenario_mc(&config(1.0, None), 200, 1).unwrap();
        assert!(s.k.iter().all(|&k| k == 20));
        assert_eq!(s.blocked, 0);
    }

    #[test]
    fn guard_zone_respected() {
        let cfg = config(1.0, None);
        let mut rng = trial_rng(3, 0);
        for _ in 0..50 {
            let sc = sample_scenario(&mut rng, &cfg).unwrap();
            assert!(sc.interferers.iter().all(|i| i.distance >= 1.0));
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let field = ObstacleField {
            rho: 0.05,
            ds: 0.2,
            de: 0.8,
            theta: 10f64.to_radians(),
        };
        let a = run_scenario_mc(&config(0.7, Some(field)), 300, 9).unwrap();
        let b = run_scenario_mc(&config(0.7, Some(field)), 300, 9).unwrap();
        assert_eq!(a, b);
        let c = run_scenario_mc(&config(0.7, Some(field)), 300, 10).unwrap();
        assert_ne!(a.i_agg, c.i_agg);
    }

    #[test]
    fn empirical_mgf_at_zero() {
        let e = empirical_mgf(&[0.1, 3.0, 7.0], 0.0).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn ber_at_vanishing_snr() {
        let link = DesiredLink::new(1.0, 1.0, 2.0, 1e12, 1.0, 2.0).unwrap();
        let draws = FadingDraws::new(100, 4, 2.0, 5).unwrap();
        let e = empirical_ber(&vec![0.0; 100], &draws, &link).unwrap();
        assert!((e.mean - 0.5).abs() < 1e-5);
    }

    #[test]
    fn blockage_free_field() {
        let p = BlockageParams::new(0.0, 0.2, 0.2, 0.8, 20.0, 10.0).unwrap();
        assert_eq!(run_blockage_mc(&p, 500, 2).unwrap().mean, 0.0);
    }

    #[test]
    fn giant_obstacles_block_everything() {
        let p =
            BlockageParams::new(0.05, std::f64::consts::FRAC_PI_4, 20.0, 20.0, 20.0, 10.0).unwrap();
        let e = run_blockage_mc(&p, 500, 2).unwrap();
        assert!(e.mean > 0.95, "{}", e.mean);
    }

    #[test]
    fn csv_dump_layout() {
        let s = run_scenario_mc(&config(1.0, None), 3, 1).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "trial,k,i_agg");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,20,"));
    }

    #[test]
    fn total_variation_basics() {
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_eq!(total_variation(&[1.0], &[0.0, 1.0]), 1.0);
    }
}
