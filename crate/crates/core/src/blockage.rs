//! Analytic blockage model for interfering links.
//!
//! A link is split by the axial obstacle distance `r`. Close to the AP
//! (`r <= d/tanθ`) a single obstacle covers the whole cone; further out the
//! obstacle shadows on the cone base are merged as the busy periods of an
//! M/G/∞ queue and the link is blocked when enough resultant shadows appear.
//! The two regimes are mixed into one blockage probability per interferer,
//! which thins the Binomial count of active interferers.

use crate::geometry::{integrate_over_distance, Disk, ReceiverAnchor};
use crate::numerics::{erf, ln_gamma, QuadratureSpec};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockageParams<T> {
    /// Obstacle density.
    pub rho: T,
    /// Half-beamwidth in radians.
    pub theta: T,
    pub ds: T,
    pub de: T,
    /// Disk radius R.
    pub radius: T,
    pub v0_norm: T,
}

impl<T: Real> BlockageParams<T> {
    pub fn new(rho: T, theta: T, ds: T, de: T, radius: T, v0_norm: T) -> Result<Self> {
        let p = Self {
            rho,
            theta,
            ds,
            de,
            radius,
            v0_norm,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= T::zero()) || !self.rho.is_finite() {
            return Err(Error::domain(format!(
                "obstacle density must be non-negative, got {}",
                self.rho
            )));
        }
        if !(self.theta > T::zero() && self.theta < T::FRAC_PI_2()) {
            return Err(Error::domain(format!(
                "half-beamwidth must lie in (0, π/2), got {}",
                self.theta
            )));
        }
        if !(self.ds > T::zero() && self.ds <= self.de) {
            return Err(Error::domain(format!(
                "obstacle radii need 0 < ds <= de, got [{}, {}]",
                self.ds, self.de
            )));
        }
        if !(self.v0_norm >= T::zero() && self.v0_norm < self.radius) {
            return Err(Error::domain(format!(
                "receiver offset {} must lie in [0, R = {})",
                self.v0_norm, self.radius
            )));
        }
        Ok(())
    }

    pub fn with_rho(mut self, rho: T) -> Self {
        self.rho = rho;
        self
    }

    pub fn disk(&self) -> Disk<T> {
        Disk {
            radius: self.radius,
        }
    }

    pub fn anchor(&self) -> ReceiverAnchor<T> {
        ReceiverAnchor {
            v0_norm: self.v0_norm,
            f0: T::zero(),
        }
    }

    /// 𝔼[d] for the uniform radius law.
    pub fn mean_radius(&self) -> T {
        T::lit(0.5) * (self.ds + self.de)
    }
}

/// How the single-obstacle and multi-obstacle regimes are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingConvention {
    /// `w1 = min(1, (𝔼[d]/tanθ)/𝔼[ℓ])`, `w2 = 1 − w1`: the probabilities of
    /// the two `r` ranges when `r` is uniform on `[0, ℓ]`.
    #[default]
    ProbabilityConsistent,
    /// The reciprocal-length weights `1/(𝔼[d]/tanθ)` and
    /// `1/(𝔼[ℓ] − 𝔼[d]/tanθ)`; the mix is clamped to [0, 1].
    ReciprocalLength,
}

/// Merged-shadow (busy period) statistics on the cone base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusyPeriodStats<T> {
    /// 𝔼[S_res] = (e^{ρ𝔼[S]} − 1)/ρ.
    pub mean_busy: T,
    pub n_res_lower: T,
    pub n_res_upper: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockageResult<T> {
    pub pb1: T,
    /// Multi-obstacle blockage evaluated at `n_res_lower`.
    pub pb2_lower: T,
    /// Multi-obstacle blockage evaluated at `n_res_upper`.
    pub pb2_upper: T,
    pub pb_lower: T,
    pub pb_upper: T,
    pub mean_shadow: T,
    pub mean_busy: T,
    pub n_res_lower: T,
    pub n_res_upper: T,
    pub mean_dist: T,
    pub mean_radius: T,
    /// Number of resultant shadows required to cover the base.
    pub shadows_needed: u32,
    pub w1: T,
    pub w2: T,
    pub convention: MixingConvention,
    /// Set when the mixed probability left [0, 1] and was clamped.
    pub clamped: bool,
}

impl<T: Real> BlockageResult<T> {
    pub fn midpoint(&self) -> T {
        T::lit(0.5) * (self.pb_lower + self.pb_upper)
    }
}

/// 𝔼[ℓ], the mean receiver–interferer distance.
pub fn mean_distance<T: Real>(params: &BlockageParams<T>, spec: &QuadratureSpec<T>) -> Result<T> {
    integrate_over_distance(|l| l, T::zero(), &params.disk(), &params.anchor(), spec)
}

/// Single-obstacle blockage probability, averaged over the uniform radius.
pub fn pb1<T: Real>(params: &BlockageParams<T>) -> T {
    let rho = params.rho;
    if rho == T::zero() {
        return T::zero();
    }
    let tan = params.theta.tan();
    if params.ds == params.de {
        let d = params.ds;
        return T::one() - (-rho * d * d / tan).exp();
    }
    let k = (rho / tan).sqrt();
    let spread = erf(params.de * k) - erf(params.ds * k);
    let v =
        T::one() - (T::PI() * tan / rho).sqrt() / (T::lit(2.0) * (params.de - params.ds)) * spread;
    v.max(T::zero()).min(T::one())
}

/// 𝔼[S], the mean obstacle shadow length on the cone base.
///
/// The axial integral `∫_{d/tanθ}^{ℓ} (2dℓ/r)(1/ℓ) dr = 2d·ln(ℓ tanθ/d)` is
/// done in closed form; the remaining (ℓ, d) integral is nested quadrature.
pub fn mean_shadow<T: Real>(params: &BlockageParams<T>, spec: &QuadratureSpec<T>) -> Result<T> {
    let tan = params.theta.tan();
    let disk = params.disk();
    let anchor = params.anchor();
    let two = T::lit(2.0);
    let inner = |d: T| -> Result<T> {
        let r_min = d / tan;
        if r_min >= disk.radius + anchor.v0_norm {
            return Ok(T::zero());
        }
        integrate_over_distance(
            |l| {
                if l <= r_min {
                    T::zero()
                } else {
                    two * d * (l / r_min).ln()
                }
            },
            r_min,
            &disk,
            &anchor,
            spec,
        )
    };
    if params.ds == params.de {
        return inner(params.ds);
    }
    let width = params.de - params.ds;
    let mut failure = None;
    let total = crate::numerics::integrate(
        |d| match inner(d) {
            Ok(v) => v / width,
            Err(e) => {
                failure.get_or_insert(e);
                T::zero()
            }
        },
        params.ds,
        params.de,
        spec,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Busy-period length and the bounds on the number of merged shadows.
pub fn busy_period_stats<T: Real>(
    rho: T,
    theta: T,
    mean_shadow: T,
    mean_dist: T,
) -> BusyPeriodStats<T> {
    let x = rho * mean_shadow;
    let mean_busy = if rho == T::zero() {
        mean_shadow
    } else {
        x.exp_m1() / rho
    };
    let n_res_upper = T::one() + T::lit(2.0) * rho * mean_dist * theta.tan();
    BusyPeriodStats {
        mean_busy,
        n_res_lower: (-x).exp() * n_res_upper,
        n_res_upper,
    }
}

/// `⌈2𝔼[ℓ]tanθ / 𝔼[S_res]⌉`, at least one.
pub fn shadows_needed<T: Real>(base_length: T, mean_busy: T) -> Result<u32> {
    if !(mean_busy > T::zero()) {
        return Err(Error::domain("mean busy-period length must be positive"));
    }
    let kappa = (base_length / mean_busy).ceil();
    let k = kappa.to_f64_lossy().max(1.0);
    if k > u32::MAX as f64 {
        return Err(Error::domain("required shadow count overflows"));
    }
    Ok(k as u32)
}

/// Poisson probability of exactly `k` resultant shadows at rate `n_res`.
pub fn poisson_pmf<T: Real>(n_res: T, k: u32) -> Result<T> {
    if !(n_res > T::zero()) {
        return Err(Error::domain(format!(
            "shadow count rate must be positive, got {n_res}"
        )));
    }
    let kf = T::lit(k as f64);
    Ok((kf * n_res.ln() - n_res - ln_gamma(kf + T::one())?).exp())
}

/// Multi-obstacle blockage probability at the merged-shadow count `n_res`.
pub fn pb2<T: Real>(params: &BlockageParams<T>, n_res: T, spec: &QuadratureSpec<T>) -> Result<T> {
    let mean_dist = mean_distance(params, spec)?;
    let es = mean_shadow(params, spec)?;
    let busy = busy_period_stats(params.rho, params.theta, es, mean_dist);
    let base = T::lit(2.0) * mean_dist * params.theta.tan();
    poisson_pmf(n_res, shadows_needed(base, busy.mean_busy)?)
}

fn mixing_weights<T: Real>(convention: MixingConvention, single_range: T, mean_dist: T) -> (T, T) {
    match convention {
        MixingConvention::ProbabilityConsistent => {
            let w1 = (single_range / mean_dist).min(T::one());
            (w1, T::one() - w1)
        }
        MixingConvention::ReciprocalLength => {
            (single_range.recip(), (mean_dist - single_range).recip())
        }
    }
}

/// Full blockage analysis: both regimes, both shadow-count bounds, mixed.
pub fn analyze<T: Real>(
    params: &BlockageParams<T>,
    convention: MixingConvention,
    spec: &QuadratureSpec<T>,
) -> Result<BlockageResult<T>> {
    params.validate()?;
    let tan = params.theta.tan();
    let mean_dist = mean_distance(params, spec)?;
    let mean_radius = params.mean_radius();
    let single_range = mean_radius / tan;
    if !(mean_dist > single_range) {
        return Err(Error::domain(format!(
            "mean link length {mean_dist} does not exceed the single-obstacle range 𝔼[d]/tanθ = {single_range}"
        )));
    }
    let es = mean_shadow(params, spec)?;
    let busy = busy_period_stats(params.rho, params.theta, es, mean_dist);
    let base = T::lit(2.0) * mean_dist * tan;
    let needed = shadows_needed(base, busy.mean_busy)?;
    let (w1, w2) = mixing_weights(convention, single_range, mean_dist);

    let p1 = pb1(params);
    let (p2_lo, p2_hi) = if params.rho == T::zero() {
        // no obstacles, no shadows
        (T::zero(), T::zero())
    } else {
        (
            poisson_pmf(busy.n_res_lower, needed)?,
            poisson_pmf(busy.n_res_upper, needed)?,
        )
    };

    let mut clamped = false;
    let mut mix = |p2: T| {
        let v = w1 * p1 + w2 * p2;
        if v < T::zero() || v > T::one() {
            clamped = true;
        }
        v.max(T::zero()).min(T::one())
    };
    let a = mix(p2_lo);
    let b = mix(p2_hi);

    Ok(BlockageResult {
        pb1: p1,
        pb2_lower: p2_lo,
        pb2_upper: p2_hi,
        pb_lower: a.min(b),
        pb_upper: a.max(b),
        mean_shadow: es,
        mean_busy: busy.mean_busy,
        n_res_lower: busy.n_res_lower,
        n_res_upper: busy.n_res_upper,
        mean_dist,
        mean_radius,
        shadows_needed: needed,
        w1,
        w2,
        convention,
        clamped,
    })
}

/// Probability generating function of the active-interferer count.
pub fn active_count_pgf<T: Real>(z: T, n: u32, p: T, pb: T) -> T {
    let q = p * (T::one() - pb);
    (T::one() - q + q * z).powi(n as i32)
}

/// Binomial(N, p(1 − pb)) probability mass at `k`.
pub fn active_count_pmf<T: Real>(k: u32, n: u32, p: T, pb: T) -> T {
    if k > n {
        return T::zero();
    }
    let q = p * (T::one() - pb);
    binomial_pmf(k, n, q)
}

pub(crate) fn binomial_pmf<T: Real>(k: u32, n: u32, q: T) -> T {
    if q == T::zero() {
        return if k == 0 { T::one() } else { T::zero() };
    }
    if q == T::one() {
        return if k == n { T::one() } else { T::zero() };
    }
    let k_small = k.min(n - k);
    let mut log_c = T::zero();
    for i in 0..k_small {
        log_c = log_c + (T::lit((n - i) as f64) / T::lit((i + 1) as f64)).ln();
    }
    (log_c + T::lit(k as f64) * q.ln() + T::lit((n - k) as f64) * (T::one() - q).ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(rho: f64) -> BlockageParams<f64> {
        BlockageParams::new(rho, 10f64.to_radians(), 0.2, 0.8, 20.0, 10.0).unwrap()
    }

    fn spec() -> QuadratureSpec<f64> {
        QuadratureSpec::default()
    }

    #[test]
    fn mean_distance_central() {
        let p = BlockageParams::new(0.01, 0.2, 0.2, 0.8, 30.0, 0.0).unwrap();
        assert!((mean_distance(&p, &spec()).unwrap() - 20.0).abs() < 1e-10);
    }

    #[test]
    fn pb1_limits() {
        assert_eq!(pb1(&reference(0.0)), 0.0);
        assert!((pb1(&reference(1e6)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pb1_degenerate_radius_matches_fixed_radius_form() {
        let theta = 10f64.to_radians();
        let d = 0.5;
        let rho = 0.1;
        let p = BlockageParams::new(rho, theta, d, d, 20.0, 10.0).unwrap();
        let fixed = 1.0 - (-rho * d * d / theta.tan()).exp();
        assert!((pb1(&p) - fixed).abs() < 1e-15);
        // and the uniform-radius formula approaches it as the range shrinks
        let narrow = BlockageParams::new(rho, theta, d - 1e-5, d + 1e-5, 20.0, 10.0).unwrap();
        assert!((pb1(&narrow) - fixed).abs() < 1e-8);
    }

    #[test]
    fn pb1_matches_radius_average() {
        // average of 1 - exp(-ρd²/tanθ) over d ~ U[ds, de] by quadrature
        let p = reference(0.3);
        let tan = p.theta.tan();
        let avg = crate::numerics::integrate(
            |d: f64| 1.0 - (-p.rho * d * d / tan).exp(),
            p.ds,
            p.de,
            &spec(),
        )
        .unwrap()
            / (p.de - p.ds);
        assert!((pb1(&p) - avg).abs() < 1e-12);
    }

    #[test]
    fn mean_shadow_fixed_radius_closed_form() {
        // ds = de = d, v0 = 0: 𝔼[S] = (2d/R²)(R² ln(R/a) − R²/2 + a²/2), a = d/tanθ
        let (d, r, theta) = (0.5, 20.0, 0.3_f64);
        let p = BlockageParams::new(0.1, theta, d, d, r, 0.0).unwrap();
        let a = d / theta.tan();
        let expected = 2.0 * d / (r * r) * (r * r * (r / a).ln() - r * r / 2.0 + a * a / 2.0);
        let got = mean_shadow(&p, &spec()).unwrap();
        assert!(
            (got - expected).abs() < 1e-10 * expected,
            "{got} {expected}"
        );
    }

    #[test]
    fn mean_shadow_independent_of_rho() {
        let a = mean_shadow(&reference(0.001), &spec()).unwrap();
        let b = mean_shadow(&reference(0.3), &spec()).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn busy_period_arithmetic() {
        let s = busy_period_stats(0.1, 10f64.to_radians(), 2.0, 15.0);
        assert!((s.mean_busy - 2.214_027_581_601_698_3).abs() < 1e-12);
        assert!((s.n_res_upper - 1.528_980_942_125_395).abs() < 1e-12);
        assert!((s.n_res_lower - (-0.2_f64).exp() * s.n_res_upper).abs() < 1e-15);

        let z = busy_period_stats(0.0, 0.3, 2.0, 15.0);
        assert_eq!(z.mean_busy, 2.0);
        assert_eq!(z.n_res_lower, 1.0);
        assert_eq!(z.n_res_upper, 1.0);
    }

    #[test]
    fn pb2_single_shadow() {
        assert!(
            (poisson_pmf(1.0_f64, shadows_needed(0.5, 1.0).unwrap()).unwrap() - (-1.0f64).exp())
                .abs()
                < 1e-15
        );
        // dense overlap: one busy period covers the base
        assert_eq!(shadows_needed(5.0_f64, 1e3).unwrap(), 1);
        // exact integer ratio is not bumped
        assert_eq!(shadows_needed(4.0_f64, 2.0).unwrap(), 2);
        assert!(shadows_needed(4.0_f64, 0.0).is_err());
    }

    #[test]
    fn reference_bounds_close_and_valid() {
        let r = analyze(
            &reference(0.1),
            MixingConvention::ProbabilityConsistent,
            &spec(),
        )
        .unwrap();
        for v in [r.pb1, r.pb2_lower, r.pb2_upper, r.pb_lower, r.pb_upper] {
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(r.pb_lower <= r.pb_upper);
        assert!(r.n_res_lower <= r.n_res_upper);
        assert!(r.pb_upper - r.pb_lower < 0.05);
        assert!(!r.clamped);
    }

    #[test]
    fn zero_density_zero_blockage() {
        for conv in [
            MixingConvention::ProbabilityConsistent,
            MixingConvention::ReciprocalLength,
        ] {
            let r = analyze(&reference(0.0), conv, &spec()).unwrap();
            assert_eq!(r.pb_lower, 0.0);
            assert_eq!(r.pb_upper, 0.0);
        }
    }

    #[test]
    fn short_cone_rejected() {
        // 𝔼[d]/tanθ larger than 𝔼[ℓ]
        let p = BlockageParams::new(0.1, 0.01, 0.5, 0.8, 5.0, 1.0).unwrap();
        assert!(matches!(
            analyze(&p, MixingConvention::ProbabilityConsistent, &spec()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn pgf_identities() {
        assert!((active_count_pgf(1.0_f64, 30, 0.7, 0.2) - 1.0).abs() < 1e-15);
        assert_eq!(active_count_pgf(0.3, 30, 0.7, 1.0), 1.0);
        // mean from the derivative at z = 1
        let h = 1e-6_f64;
        let d = (active_count_pgf(1.0 + h, 100, 1.0, 0.3)
            - active_count_pgf(1.0 - h, 100, 1.0, 0.3))
            / (2.0 * h);
        assert!((d - 70.0).abs() < 1e-5);
    }

    #[test]
    fn pmf_sums_to_one() {
        assert_eq!(active_count_pmf(0, 10, 0.5, 1.0), 1.0);
        let s: f64 = (0..=100).map(|k| active_count_pmf(k, 100, 0.8, 0.17)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
