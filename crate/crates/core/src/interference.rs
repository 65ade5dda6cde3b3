//! Moment generating function of the interference power.
//!
//! One interferer contributes `P = q·h·ℓ^{-α}·Υ(ω)` with unit-mean Gamma
//! power fading `h` of shape `m`, distance `ℓ` drawn from the disk density
//! conditioned on `ℓ >= ε` (the guard zone) and spectral distance `ω` drawn
//! from the band. Averaging over `h` in closed form,
//!
//! `M_P(s) = 𝔼[(1 − s·q·ℓ^{-α}·Υ(ω)/m)^{-m}]`,
//!
//! and the aggregate over `N` slots, each active with probability
//! `p(1 − pb)`, is `[1 − p(1 − pb) + p(1 − pb)·M_P(s)]^N`.

use std::sync::Arc;

use crate::geometry::{distance_cdf, distance_pdf, Band, Disk, ReceiverAnchor};
use crate::numerics::{gauss_legendre, integrate, integrate_estimate, ln_gamma, QuadratureSpec};
use crate::spectral::{gamma_n, SpectralProfile};
use crate::{Complex, Error, Real, Result};

/// Gauss–Legendre order of every panel of the precomputed product rule.
const RULE_ORDER: usize = 8;
/// Panels per distance segment of the product rule.
const RULE_ELL_PANELS: usize = 32;
/// Panels per spectral segment of the product rule.
const RULE_OMEGA_PANELS: usize = 16;
/// Width, in `ln a`, of the bins in which rule atoms are merged.
const RULE_MERGE_WIDTH: f64 = 1e-3;

/// Per-interferer link parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel<T> {
    /// Pathloss exponent α.
    pub alpha: T,
    /// Nakagami shape m.
    pub m: T,
    /// Interferer transmit power (W).
    pub q: T,
    /// Guard-zone radius ε (m): no interferer is closer to the receiver.
    pub guard: T,
}

impl<T: Real> LinkModel<T> {
    pub fn new(alpha: T, m: T, q: T, guard: T) -> Result<Self> {
        let link = Self { alpha, m, q, guard };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return Err(Error::domain(format!(
                "pathloss exponent must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.m >= T::lit(0.5)) || !self.m.is_finite() {
            return Err(Error::domain(format!(
                "Nakagami shape must be at least 0.5, got {}",
                self.m
            )));
        }
        if !(self.q >= T::zero()) || !self.q.is_finite() {
            return Err(Error::domain(format!(
                "interferer power must be non-negative, got {}",
                self.q
            )));
        }
        if !(self.guard >= T::zero()) || !self.guard.is_finite() {
            return Err(Error::domain(format!(
                "guard radius must be non-negative, got {}",
                self.guard
            )));
        }
        Ok(())
    }
}

/// Everything that fixes the law of the aggregate interference.
#[derive(Debug, Clone)]
pub struct InterferenceScenario<T> {
    pub disk: Disk<T>,
    pub anchor: ReceiverAnchor<T>,
    pub band: Band<T>,
    pub link: LinkModel<T>,
    pub profile: SpectralProfile<T>,
    /// Number of interferer slots N.
    pub n: u32,
    /// Probability that a slot holds a transmitting AP.
    pub p: T,
    /// Blockage probability of an interfering link.
    pub pb: T,
}

impl<T: Real> InterferenceScenario<T> {
    pub fn validate(&self) -> Result<()> {
        self.anchor.validate(&self.disk, &self.band)?;
        self.link.validate()?;
        check_probability("activity probability", self.p)?;
        check_probability("blockage probability", self.pb)?;
        if !(self.link.guard < self.disk.radius + self.anchor.v0_norm) {
            return Err(Error::domain("guard zone covers the whole disk"));
        }
        Ok(())
    }

    /// Probability that a slot contributes interference, `p(1 − pb)`.
    pub fn active_probability(&self) -> T {
        self.p * (T::one() - self.pb)
    }
}

fn check_probability<T: Real>(what: &str, v: T) -> Result<()> {
    if !(v >= T::zero() && v <= T::one()) {
        return Err(Error::domain(format!("{what} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// Something that evaluates the aggregate-interference MGF.
pub trait AggregateMgf<T: Real> {
    fn aggregate(&self, s: Complex<T>) -> Result<Complex<T>>;

    fn aggregate_real(&self, s: T) -> Result<T> {
        self.aggregate(Complex::new(s, T::zero())).map(|z| z.re)
    }
}

/// Interference-free link: the MGF is identically one.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoInterference;

impl<T: Real> AggregateMgf<T> for NoInterference {
    fn aggregate(&self, _s: Complex<T>) -> Result<Complex<T>> {
        Ok(Complex::new(T::one(), T::zero()))
    }

    fn aggregate_real(&self, _s: T) -> Result<T> {
        Ok(T::one())
    }
}

/// `[1 − p(1 − pb) + p(1 − pb)·M_P(s)]^N` with `M_P` supplied by `per`.
pub fn aggregate_mgf<T, F>(s: Complex<T>, n: u32, p: T, pb: T, per: F) -> Result<Complex<T>>
where
    T: Real,
    F: FnOnce(Complex<T>) -> Result<Complex<T>>,
{
    check_probability("activity probability", p)?;
    check_probability("blockage probability", pb)?;
    Ok(compose_active(per(s)?, n, p * (T::one() - pb)))
}

fn compose_active<T: Real>(mp: Complex<T>, n: u32, q_active: T) -> Complex<T> {
    let base = Complex::new(T::one() - q_active, T::zero()) + mp * q_active;
    powi_complex(base, n)
}

fn powi_complex<T: Real>(z: Complex<T>, n: u32) -> Complex<T> {
    let mut result = Complex::new(T::one(), T::zero());
    let mut b = z;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = result * b;
        }
        b = b * b;
        e >>= 1;
    }
    result
}

/// `𝔼_h[e^{s·a·h}] − 1 = (1 − s·a/m)^{-m} − 1` for unit-mean Gamma `h`.
fn fading_mgf_minus_one<T: Real>(s: Complex<T>, a: T, m: T) -> Complex<T> {
    let z = s * (a / m);
    let small = T::lit(1e-3);
    let one = Complex::new(T::one(), T::zero());
    let norm = z.norm();
    if norm >= small && m <= T::lit(64.0) && m == m.round() {
        // integer shape: repeated products instead of complex ln/exp
        let k = m.to_f64_lossy() as u32;
        return powi_complex((one - z).inv(), k) - one;
    }
    let log1m = if norm < small {
        let z2 = z * z;
        -(z + z2 * T::lit(0.5) + z2 * z / T::lit(3.0) + z2 * z2 * T::lit(0.25))
    } else {
        (one - z).ln()
    };
    let w = -log1m * m;
    if w.norm() < small {
        let w2 = w * w;
        w + w2 * T::lit(0.5) + w2 * w / T::lit(6.0) + w2 * w2 / T::lit(24.0)
    } else {
        w.exp() - one
    }
}

fn fading_mgf_minus_one_real<T: Real>(s: T, a: T, m: T) -> T {
    (-m * (-s * a / m).ln_1p()).exp_m1()
}

/// Rejects arguments outside the region where the Gamma MGF exists.
fn check_mgf_argument<T: Real>(s: Complex<T>, a_sup: T, m: T) -> Result<()> {
    if s.re <= T::zero() {
        return Ok(());
    }
    if s.im == T::zero() && s.re * a_sup < m {
        return Ok(());
    }
    Err(Error::domain(format!(
        "MGF argument {s} outside the region 1 − s·a/m > 0 (largest per-link power {a_sup})"
    )))
}

fn peak_power<T: Real>(link: &LinkModel<T>, upsilon0: T) -> T {
    if link.guard == T::zero() {
        T::infinity()
    } else {
        link.q * link.guard.powf(-link.alpha) * upsilon0
    }
}

/// Distance segments `[lo, hi]` carrying the conditioned density.
fn ell_segments<T: Real>(disk: &Disk<T>, anchor: &ReceiverAnchor<T>, guard: T) -> Vec<(T, T)> {
    let split = disk.radius - anchor.v0_norm;
    let top = disk.radius + anchor.v0_norm;
    let mut out = Vec::with_capacity(2);
    if guard < split {
        out.push((guard, split));
    }
    let start = guard.max(split);
    if start < top {
        out.push((start, top));
    }
    out
}

/// Spectral segments with their constant densities.
fn omega_segments<T: Real>(band: &Band<T>, anchor: &ReceiverAnchor<T>) -> Vec<(T, T, T)> {
    let (near, far) = band.spectral_split(anchor);
    let width = band.width();
    let mut out = Vec::with_capacity(2);
    if near > T::zero() {
        out.push((T::zero(), near, T::lit(2.0) / width));
    }
    if far > near {
        out.push((near, far, width.recip()));
    }
    out
}

/// `M_P(s)` by nested adaptive quadrature over distance and spectral offset.
///
/// The reference evaluation of the per-interferer MGF; [`MgfEvaluator`]
/// reproduces it with a fixed rule for bulk use.
pub fn per_interferer_mgf_direct<T: Real>(
    s: Complex<T>,
    link: &LinkModel<T>,
    disk: &Disk<T>,
    anchor: &ReceiverAnchor<T>,
    band: &Band<T>,
    profile: &SpectralProfile<T>,
    spec: &QuadratureSpec<T>,
) -> Result<Complex<T>> {
    link.validate()?;
    anchor.validate(disk, band)?;
    let one = Complex::new(T::one(), T::zero());
    if s == Complex::new(T::zero(), T::zero()) || link.q == T::zero() {
        return Ok(one);
    }
    check_mgf_argument(s, peak_power(link, profile.upsilon(T::zero())?), link.m)?;
    let mass = T::one() - distance_cdf(link.guard, disk, anchor)?;
    if !(mass > T::zero()) {
        return Err(Error::domain("guard zone leaves no interferer mass"));
    }

    let omegas = omega_segments(band, anchor);
    let inner_spec = spec.with_tolerances(spec.abs_tol * T::lit(0.1), spec.rel_tol * T::lit(0.1));
    let mut failure: Option<Error> = None;
    let mut total = Complex::new(T::zero(), T::zero());
    for (lo, hi) in ell_segments(disk, anchor, link.guard) {
        let est = integrate_estimate(
            |ell: T| {
                if failure.is_some() {
                    return Complex::new(T::zero(), T::zero());
                }
                let density = match distance_pdf(ell, disk, anchor) {
                    Ok(d) => d,
                    Err(e) => {
                        failure = Some(e);
                        return Complex::new(T::zero(), T::zero());
                    }
                };
                if density == T::zero() {
                    return Complex::new(T::zero(), T::zero());
                }
                let path = link.q * ell.powf(-link.alpha);
                let mut inner = Complex::new(T::zero(), T::zero());
                for &(wlo, whi, weight) in &omegas {
                    let r = integrate_estimate(
                        |w: T| match profile.upsilon(w) {
                            Ok(u) => fading_mgf_minus_one(s, path * u, link.m) * weight,
                            Err(e) => {
                                failure.get_or_insert(e);
                                Complex::new(T::zero(), T::zero())
                            }
                        },
                        wlo,
                        whi,
                        &inner_spec,
                    );
                    match r {
                        Ok(v) => inner = inner + v.value,
                        Err(e) => {
                            failure.get_or_insert(e);
                        }
                    }
                }
                inner * density
            },
            lo,
            hi,
            spec,
        )?;
        total = total + est.value;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(one + total / mass)
}

/// `κₙ = ∫_ε^{R−‖v0‖} ℓ^{1−nα} dℓ + ∫_{R−‖v0‖}^{R+‖v0‖} ℓ^{1−nα}·acos(·)/π dℓ`,
/// i.e. `(R²/2)·𝔼[ℓ^{−nα}; ℓ >= ε]`.
pub fn kappa_n<T: Real>(
    n: u32,
    disk: &Disk<T>,
    anchor: &ReceiverAnchor<T>,
    alpha: T,
    guard: T,
    spec: &QuadratureSpec<T>,
) -> Result<T> {
    anchor.check_inside(disk)?;
    let exponent = T::lit(n as f64) * alpha;
    let two = T::lit(2.0);
    if guard == T::zero() && exponent >= two {
        return Err(Error::domain(format!(
            "κ_{n} diverges without a guard zone (nα = {exponent} >= 2); set a positive guard radius"
        )));
    }
    if !(guard >= T::zero()) {
        return Err(Error::domain("guard radius must be non-negative"));
    }
    let split = disk.radius - anchor.v0_norm;
    let mut first = T::zero();
    if guard < split {
        let p = two - exponent;
        first = if p.abs() < T::lit(1e-12) {
            (split / guard).ln()
        } else {
            (split.powf(p)
                - if guard == T::zero() {
                    T::zero()
                } else {
                    guard.powf(p)
                })
                / p
        };
    }
    let mut second = T::zero();
    let start = guard.max(split);
    let top = disk.radius + anchor.v0_norm;
    if anchor.v0_norm > T::zero() && start < top {
        let mut failure = None;
        second = integrate(
            |l: T| match distance_pdf(l, disk, anchor) {
                Ok(d) => d * l.powf(-exponent),
                Err(e) => {
                    failure.get_or_insert(e);
                    T::zero()
                }
            },
            start,
            top,
            spec,
        )? * T::lit(0.5)
            * disk.radius
            * disk.radius;
        if let Some(e) = failure {
            return Err(e);
        }
    }
    Ok(first + second)
}

/// A truncated series with its estimated truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue<V, T> {
    pub value: V,
    pub truncation_error: T,
    /// Index of the last term included.
    pub terms: usize,
}

/// Coefficients `Γ(n+m)/(Γ(m)·mⁿ·n!) · γₙ/(fe−fs) · κₙ/κ₀` for `n <= n_max`.
fn series_coefficients<T: Real>(
    link: &LinkModel<T>,
    disk: &Disk<T>,
    anchor: &ReceiverAnchor<T>,
    band: &Band<T>,
    profile: &SpectralProfile<T>,
    n_max: usize,
    spec: &QuadratureSpec<T>,
) -> Result<Vec<T>> {
    if link.guard == T::zero() {
        return Err(Error::domain(
            "series form needs a positive guard radius: κₙ diverges at ℓ → 0 for nα >= 2",
        ));
    }
    let m = link.m;
    let lg_m = ln_gamma(m)?;
    let kappa0 = kappa_n(0, disk, anchor, link.alpha, link.guard, spec)?;
    let width = band.width();
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let nf = T::lit(n as f64);
        let ln_fading = ln_gamma(nf + m)? - lg_m - nf * m.ln() - ln_gamma(nf + T::one())?;
        let spectral = gamma_n(n as u32, band, anchor, profile)? / width;
        let spatial = kappa_n(n as u32, disk, anchor, link.alpha, link.guard, spec)? / kappa0;
        out.push(ln_fading.exp() * spectral * spatial);
    }
    Ok(out)
}

fn sum_series<T: Real>(coeffs: &[T], x: Complex<T>, tol: T) -> Result<SeriesValue<Complex<T>, T>> {
    let n_max = coeffs.len() - 1;
    let mut sum = Complex::new(coeffs[0], T::zero());
    let mut power = Complex::new(T::one(), T::zero());
    let mut prev = coeffs[0];
    let mut ratio = T::zero();
    for (n, &c) in coeffs.iter().enumerate().skip(1) {
        power = power * x;
        let term = power * c;
        sum = sum + term;
        let mag = term.norm();
        ratio = if mag == T::zero() {
            T::zero()
        } else {
            mag / prev
        };
        prev = mag;
        if ratio < T::one() && mag <= tol * sum.norm() {
            let tail = if ratio > T::zero() {
                mag * ratio / (T::one() - ratio)
            } else {
                T::zero()
            };
            return Ok(SeriesValue {
                value: sum,
                truncation_error: tail,
                terms: n,
            });
        }
    }
    Err(Error::SeriesDivergence {
        s: x.norm().to_f64_lossy(),
        term: n_max,
        ratio: ratio.to_f64_lossy(),
        n_max,
    })
}

/// `M_P(s)` from the power series in `q·s` built from `γₙ` and `κₙ`.
///
/// Summation stops at the first term below `tol` times the partial sum
/// with a term ratio under one; otherwise the series is reported divergent.
#[allow(clippy::too_many_arguments)]
pub fn per_interferer_mgf_series<T: Real>(
    s: T,
    link: &LinkModel<T>,
    disk: &Disk<T>,
    anchor: &ReceiverAnchor<T>,
    band: &Band<T>,
    profile: &SpectralProfile<T>,
    n_max: usize,
    tol: T,
    spec: &QuadratureSpec<T>,
) -> Result<SeriesValue<T, T>> {
    link.validate()?;
    if n_max < 1 || !(tol > T::zero()) {
        return Err(Error::domain("series needs n_max >= 1 and tol > 0"));
    }
    let coeffs = series_coefficients(link, disk, anchor, band, profile, n_max, spec)?;
    let r = sum_series(&coeffs, Complex::new(link.q * s, T::zero()), tol)?;
    Ok(SeriesValue {
        value: r.value.re,
        truncation_error: r.truncation_error,
        terms: r.terms,
    })
}

/// How [`MgfEvaluator`] computes the per-interferer MGF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MgfMode {
    /// Closed-form fading average integrated over distance and frequency.
    #[default]
    Direct,
    /// Truncated power series.
    Series,
}

/// Precomputed per-interferer MGF bound to a scenario.
///
/// In direct mode the joint law of `a = q·ℓ^{-α}·Υ(ω)` is replaced by a
/// discrete set of atoms: a Gauss–Legendre product rule over distance
/// (log-spaced panels below `R − ‖v0‖`, endpoint-softened panels above) and
/// spectral offset, with atoms merged in narrow bins of `ln a` (mass and
/// first moment preserved). `M_P(s) = 1 + Σ wᵢ·[(1 − s·aᵢ/m)^{-m} − 1]`.
#[derive(Debug, Clone)]
pub struct MgfEvaluator<T> {
    pub mode: MgfMode,
    pub n_max: usize,
    pub tol: T,
    n: u32,
    q_active: T,
    m: T,
    q: T,
    a_sup: T,
    atoms: Arc<[(T, T)]>,
    coeffs: Arc<[T]>,
}

impl<T: Real> MgfEvaluator<T> {
    pub const DEFAULT_N_MAX: usize = 80;

    pub fn new(
        scenario: &InterferenceScenario<T>,
        mode: MgfMode,
        spec: &QuadratureSpec<T>,
    ) -> Result<Self> {
        Self::with_series_options(scenario, mode, Self::DEFAULT_N_MAX, T::lit(1e-12), spec)
    }

    pub fn with_series_options(
        scenario: &InterferenceScenario<T>,
        mode: MgfMode,
        n_max: usize,
        tol: T,
        spec: &QuadratureSpec<T>,
    ) -> Result<Self> {
        scenario.validate()?;
        if n_max < 1 || !(tol > T::zero()) {
            return Err(Error::domain("MGF evaluator needs n_max >= 1 and tol > 0"));
        }
        let link = &scenario.link;
        let upsilon0 = scenario.profile.upsilon(T::zero())?;
        let (atoms, coeffs): (Vec<(T, T)>, Vec<T>) = match mode {
            MgfMode::Direct => (build_atoms(scenario)?, Vec::new()),
            MgfMode::Series => (
                Vec::new(),
                series_coefficients(
                    link,
                    &scenario.disk,
                    &scenario.anchor,
                    &scenario.band,
                    &scenario.profile,
                    n_max,
                    spec,
                )?,
            ),
        };
        Ok(Self {
            mode,
            n_max,
            tol,
            n: scenario.n,
            q_active: scenario.active_probability(),
            m: link.m,
            q: link.q,
            a_sup: peak_power(link, upsilon0),
            atoms: atoms.into(),
            coeffs: coeffs.into(),
        })
    }

    /// Same per-interferer law, different blockage probability.
    pub fn with_blockage(&self, p: T, pb: T) -> Result<Self> {
        check_probability("activity probability", p)?;
        check_probability("blockage probability", pb)?;
        let mut out = self.clone();
        out.q_active = p * (T::one() - pb);
        Ok(out)
    }

    /// Same per-interferer law, different number of slots.
    pub fn with_slots(&self, n: u32) -> Self {
        let mut out = self.clone();
        out.n = n;
        out
    }

    pub fn slots(&self) -> u32 {
        self.n
    }

    pub fn active_probability(&self) -> T {
        self.q_active
    }

    /// Number of atoms of the direct-mode rule.
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn per_interferer(&self, s: Complex<T>) -> Result<Complex<T>> {
        check_mgf_argument(s, self.a_sup, self.m)?;
        let one = Complex::new(T::one(), T::zero());
        match self.mode {
            MgfMode::Direct => {
                let mut acc = Complex::new(T::zero(), T::zero());
                for &(w, a) in self.atoms.iter() {
                    acc = acc + fading_mgf_minus_one(s, a, self.m) * w;
                }
                Ok(one + acc)
            }
            MgfMode::Series => sum_series(&self.coeffs, s * self.q, self.tol).map(|r| r.value),
        }
    }

    pub fn per_interferer_real(&self, s: T) -> Result<T> {
        check_mgf_argument(Complex::new(s, T::zero()), self.a_sup, self.m)?;
        match self.mode {
            MgfMode::Direct => {
                let mut acc = T::zero();
                for &(w, a) in self.atoms.iter() {
                    acc = acc + w * fading_mgf_minus_one_real(s, a, self.m);
                }
                Ok(T::one() + acc)
            }
            MgfMode::Series => self
                .per_interferer(Complex::new(s, T::zero()))
                .map(|z| z.re),
        }
    }
}

impl<T: Real> AggregateMgf<T> for MgfEvaluator<T> {
    fn aggregate(&self, s: Complex<T>) -> Result<Complex<T>> {
        Ok(compose_active(
            self.per_interferer(s)?,
            self.n,
            self.q_active,
        ))
    }

    fn aggregate_real(&self, s: T) -> Result<T> {
        let mp = self.per_interferer_real(s)?;
        Ok((T::one() - self.q_active + self.q_active * mp).powi(self.n as i32))
    }
}

fn gl_panel<T: Real>(rule: &[(T, T)], a: T, b: T, mut push: impl FnMut(T, T)) {
    let half = T::lit(0.5) * (b - a);
    let mid = T::lit(0.5) * (a + b);
    for &(x, w) in rule {
        push(mid + half * x, w * half);
    }
}

fn build_atoms<T: Real>(sc: &InterferenceScenario<T>) -> Result<Vec<(T, T)>> {
    let link = &sc.link;
    if link.q == T::zero() {
        return Ok(Vec::new());
    }
    let rule = gauss_legendre::<T>(RULE_ORDER);
    let split = sc.disk.radius - sc.anchor.v0_norm;

    // distance nodes: (ℓ, weight including the density)
    let mut ells: Vec<(T, T)> = Vec::new();
    for (lo, hi) in ell_segments(&sc.disk, &sc.anchor, link.guard) {
        let panels = RULE_ELL_PANELS;
        if hi <= split {
            // inner branch, density 2ℓ/R²; log-spaced panels resolve ℓ^{-α}
            let floor = if lo > T::zero() {
                lo
            } else {
                hi * T::lit(1e-6)
            };
            if lo < floor {
                gl_panel(&rule, lo, floor, |x, w| ells.push((x, w)));
            }
            let ratio = (hi / floor).ln();
            for k in 0..panels {
                let a = floor * (ratio * T::lit(k as f64 / panels as f64)).exp();
                let b = floor * (ratio * T::lit((k + 1) as f64 / panels as f64)).exp();
                gl_panel(&rule, a, b, |x, w| ells.push((x, w)));
            }
        } else {
            // outer branch: square-root behaviour at both ends
            let width = hi - lo;
            let three = T::lit(3.0);
            let two = T::lit(2.0);
            let six = T::lit(6.0);
            for k in 0..panels {
                let a = T::lit(k as f64 / panels as f64);
                let b = T::lit((k + 1) as f64 / panels as f64);
                gl_panel(&rule, a, b, |u, w| {
                    let x = lo + width * u * u * (three - two * u);
                    let jac = six * u * (T::one() - u) * width;
                    ells.push((x, w * jac));
                });
            }
        }
    }
    let mut ell_mass = T::zero();
    let mut ell_nodes = Vec::with_capacity(ells.len());
    for (x, w) in ells {
        let weight = w * distance_pdf(x, &sc.disk, &sc.anchor)?;
        if weight > T::zero() {
            ell_mass = ell_mass + weight;
            ell_nodes.push((link.q * x.powf(-link.alpha), weight));
        }
    }

    let mut omega_nodes = Vec::new();
    let mut omega_mass = T::zero();
    for (lo, hi, density) in omega_segments(&sc.band, &sc.anchor) {
        let step = (hi - lo) / T::lit(RULE_OMEGA_PANELS as f64);
        for k in 0..RULE_OMEGA_PANELS {
            let a = lo + step * T::lit(k as f64);
            gl_panel(&rule, a, a + step, |x, w| {
                omega_nodes.push((x, w * density))
            });
        }
    }
    let mut spectral = Vec::with_capacity(omega_nodes.len());
    for (x, w) in omega_nodes {
        omega_mass = omega_mass + w;
        spectral.push((sc.profile.upsilon(x)?, w));
    }
    if !(ell_mass > T::zero() && omega_mass > T::zero()) {
        return Err(Error::domain("product rule carries no mass"));
    }

    let mut raw: Vec<(T, T, T)> = Vec::with_capacity(ell_nodes.len() * spectral.len());
    for &(path, wl) in &ell_nodes {
        for &(u, wo) in &spectral {
            let a = path * u;
            if a > T::zero() {
                raw.push((a.ln(), a, wl * wo / (ell_mass * omega_mass)));
            }
        }
    }
    raw.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));

    let width = T::lit(RULE_MERGE_WIDTH);
    let mut atoms = Vec::new();
    let mut bin = None;
    let (mut wsum, mut wa) = (T::zero(), T::zero());
    for (ln_a, a, w) in raw {
        let key = (ln_a / width).floor();
        if bin != Some(key) {
            if wsum > T::zero() {
                atoms.push((wsum, wa / wsum));
            }
            bin = Some(key);
            wsum = T::zero();
            wa = T::zero();
        }
        wsum = wsum + w;
        wa = wa + w * a;
    }
    if wsum > T::zero() {
        atoms.push((wsum, wa / wsum));
    }
    Ok(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario() -> InterferenceScenario<f64> {
        let w = 2.16e9;
        InterferenceScenario {
            disk: Disk::new(25.0).unwrap(),
            anchor: ReceiverAnchor::new(10.0, 62e9).unwrap(),
            band: Band::new(58e9, 64e9, w).unwrap(),
            link: LinkModel::new(2.5, 5.0, 1.0, 1.0).unwrap(),
            profile: SpectralProfile::default_for_bandwidth(w, 0.25)
                .unwrap()
                .with_table(4.0e9)
                .unwrap(),
            n: 100,
            p: 1.0,
            pb: 0.0,
        }
    }

    fn spec() -> QuadratureSpec<f64> {
        QuadratureSpec::default().with_tolerances(1e-11, 1e-9)
    }

    #[test]
    fn fading_helper_matches_closed_form() {
        // m = 5: (1 + x)^{-5} − 1 with x = −s·a/5, expanded exactly for tiny x
        let x = 2e-9_f64 / 5.0;
        let tiny = -5.0 * x + 15.0 * x * x;
        let v = fading_mgf_minus_one(Complex::new(-1e-9, 0.0), 2.0, 5.0).re;
        assert!((v - tiny).abs() <= 1e-15 * tiny.abs(), "{v} {tiny}");
        assert!((fading_mgf_minus_one_real(-1e-9, 2.0, 5.0) - tiny).abs() <= 1e-15 * tiny.abs());
        for &(s, a) in &[(-0.3, 1.5), (-40.0, 0.7)] {
            let exact = (1.0 - s * a / 5.0_f64).powf(-5.0) - 1.0;
            let v = fading_mgf_minus_one(Complex::new(s, 0.0), a, 5.0);
            assert!((v.re - exact).abs() <= 1e-14 * exact.abs() && v.im == 0.0);
            assert!((fading_mgf_minus_one_real(s, a, 5.0) - exact).abs() <= 1e-14 * exact.abs());
        }
        // imaginary argument against the polar form
        let (s, a, m) = (3.0, 0.4, 2.5_f64);
        let z = Complex::new(1.0, -s * a / m);
        let exact = Complex::from_polar(z.norm().powf(-m), -m * z.arg()) - Complex::new(1.0, 0.0);
        assert!((fading_mgf_minus_one(Complex::new(0.0, s), a, m) - exact).norm() < 1e-14);
    }

    #[test]
    fn kappa_zero_normalises() {
        let disk = Disk::new(20.0).unwrap();
        let a = ReceiverAnchor::new(0.0, 0.0).unwrap();
        let k0 = kappa_n(0, &disk, &a, 2.5, 0.0, &spec()).unwrap();
        assert!((2.0 * k0 / 400.0 - 1.0).abs() < 1e-12);
        let a = ReceiverAnchor::new(10.0, 0.0).unwrap();
        let k0 = kappa_n(0, &disk, &a, 2.5, 0.0, &spec()).unwrap();
        assert!((2.0 * k0 / 400.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kappa_one_alpha_two_is_log() {
        let disk = Disk::new(20.0).unwrap();
        let a = ReceiverAnchor::new(0.0, 0.0).unwrap();
        let k1 = kappa_n(1, &disk, &a, 2.0, 2.0, &spec()).unwrap();
        assert!((k1 - 10.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kappa_guard_required() {
        let disk = Disk::new(20.0).unwrap();
        let a = ReceiverAnchor::new(5.0, 0.0).unwrap();
        assert!(matches!(
            kappa_n(1, &disk, &a, 2.5, 0.0, &spec()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn trivial_arguments() {
        let sc = scenario();
        let s0 = Complex::new(0.0, 0.0);
        let v = per_interferer_mgf_direct(
            s0,
            &sc.link,
            &sc.disk,
            &sc.anchor,
            &sc.band,
            &sc.profile,
            &spec(),
        )
        .unwrap();
        assert_eq!(v, Complex::new(1.0, 0.0));
        let mut silent = sc.link;
        silent.q = 0.0;
        let v = per_interferer_mgf_direct(
            Complex::new(-3.0, 1.0),
            &silent,
            &sc.disk,
            &sc.anchor,
            &sc.band,
            &sc.profile,
            &spec(),
        )
        .unwrap();
        assert_eq!(v, Complex::new(1.0, 0.0));
        let ev = MgfEvaluator::new(&sc, MgfMode::Direct, &spec()).unwrap();
        assert_eq!(ev.aggregate(s0).unwrap(), Complex::new(1.0, 0.0));
        let blocked = ev.with_blockage(1.0, 1.0).unwrap();
        assert_eq!(blocked.aggregate_real(-5.0).unwrap(), 1.0);
    }

    #[test]
    fn rule_matches_adaptive_reference() {
        // exact Υ: the interpolated table has kinks the nested rule would chase
        let mut sc = scenario();
        sc.profile = SpectralProfile::default_for_bandwidth(2.16e9, 0.25).unwrap();
        let ev = MgfEvaluator::new(&sc, MgfMode::Direct, &spec()).unwrap();
        let reference_spec = QuadratureSpec::default().with_tolerances(1e-10, 1e-8);
        for s in [
            Complex::new(-0.01, 0.0),
            Complex::new(-10.0, 0.0),
            Complex::new(-1e3, 0.0),
            Complex::new(0.0, 30.0),
            Complex::new(0.0, -400.0),
        ] {
            let reference = per_interferer_mgf_direct(
                s,
                &sc.link,
                &sc.disk,
                &sc.anchor,
                &sc.band,
                &sc.profile,
                &reference_spec,
            )
            .unwrap();
            let fast = ev.per_interferer(s).unwrap();
            let scale = (Complex::new(1.0, 0.0) - reference).norm();
            assert!(
                (fast - reference).norm() <= 1e-6 * scale + 1e-10,
                "s = {s}: {fast} vs {reference}"
            );
        }
    }

    #[test]
    fn series_matches_direct_small_s() {
        let sc = scenario();
        let direct = MgfEvaluator::new(&sc, MgfMode::Direct, &spec()).unwrap();
        for s in [-1e-3, -1e-2, -0.1, -1.0] {
            let series = per_interferer_mgf_series(
                s,
                &sc.link,
                &sc.disk,
                &sc.anchor,
                &sc.band,
                &sc.profile,
                80,
                1e-12,
                &spec(),
            )
            .unwrap();
            let d = direct.per_interferer_real(s).unwrap();
            assert!(
                (series.value - d).abs() < 1e-8,
                "s = {s}: {} vs {d}",
                series.value
            );
        }
    }

    #[test]
    fn series_reports_divergence() {
        let sc = scenario();
        let r = per_interferer_mgf_series(
            -1e3,
            &sc.link,
            &sc.disk,
            &sc.anchor,
            &sc.band,
            &sc.profile,
            40,
            1e-12,
            &spec(),
        );
        assert!(matches!(r, Err(Error::SeriesDivergence { .. })));
    }

    #[test]
    fn first_order_moment() {
        let sc = scenario();
        let coeffs = series_coefficients(
            &sc.link,
            &sc.disk,
            &sc.anchor,
            &sc.band,
            &sc.profile,
            1,
            &spec(),
        )
        .unwrap();
        let ev = MgfEvaluator::new(&sc, MgfMode::Direct, &spec()).unwrap();
        let s = -1e-7;
        let d = ev.per_interferer_real(s).unwrap();
        let first = 1.0 + coeffs[1] * sc.link.q * s;
        assert!((d - first).abs() < 1e-12);
    }

    #[test]
    fn positive_argument_domain() {
        let sc = scenario();
        let ev = MgfEvaluator::new(&sc, MgfMode::Direct, &spec()).unwrap();
        assert!(ev.per_interferer_real(0.5).is_ok());
        assert!(matches!(
            ev.per_interferer_real(100.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn single_slot_aggregate_is_per_interferer() {
        let mut sc = scenario();
        sc.n = 1;
        let ev = MgfEvaluator::new(&sc, MgfMode::Direct, &spec()).unwrap();
        for s in [Complex::new(-2.0, 0.0), Complex::new(0.0, 7.0)] {
            assert!((ev.aggregate(s).unwrap() - ev.per_interferer(s).unwrap()).norm() < 1e-15);
        }
    }

    #[test]
    fn f32_evaluator_runs() {
        let sc = InterferenceScenario::<f32> {
            disk: Disk::new(25.0).unwrap(),
            anchor: ReceiverAnchor::new(10.0, 62.0).unwrap(),
            band: Band::new(58.0, 64.0, 2.16).unwrap(),
            link: LinkModel::new(2.5, 5.0, 1.0, 1.0).unwrap(),
            profile: SpectralProfile::default_for_bandwidth(2.16, 0.25).unwrap(),
            n: 10,
            p: 1.0,
            pb: 0.1,
        };
        let spec = QuadratureSpec::<f32>::default().with_tolerances(1e-5, 1e-4);
        let ev = MgfEvaluator::new(&sc, MgfMode::Direct, &spec).unwrap();
        let v = ev.aggregate_real(-1.0).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }
}
