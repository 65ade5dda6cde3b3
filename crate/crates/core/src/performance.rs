//! Link metrics of the reference receiver under aggregate interference:
//! average BER and SINR outage probability.
//!
//! Both metrics take the aggregate-interference MGF through
//! [`AggregateMgf`], so the interference-free case ([`NoInterference`])
//! reduces them to their fading-only closed forms.

use crate::interference::AggregateMgf;
pub use crate::interference::NoInterference;
use crate::numerics::{
    gamma_fn, integrate_oscillatory_semiinf, integrate_semi_infinite, kummer_1f1,
    regularized_gamma_p, QuadratureSpec,
};
use crate::{Complex, Error, Real, Result};

/// The desired transmitter–receiver pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredLink<T> {
    /// Reference transmitter power (W).
    pub q0: T,
    /// Reference link length (m).
    pub l0: T,
    /// Nakagami shape of the desired link.
    pub m: T,
    /// Noise power over the signal band (W).
    pub noise: T,
    /// Modulation constant in the conditional error `Q(√(2c·SINR))`.
    pub c: T,
    pub alpha: T,
}

impl<T: Real> DesiredLink<T> {
    pub fn new(q0: T, l0: T, m: T, noise: T, c: T, alpha: T) -> Result<Self> {
        let link = Self {
            q0,
            l0,
            m,
            noise,
            c,
            alpha,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("q0", self.q0),
            ("l0", self.l0),
            ("m", self.m),
            ("noise", self.noise),
            ("c", self.c),
            ("alpha", self.alpha),
        ];
        for (name, v) in fields {
            if !(v > T::zero()) || v.is_nan() {
                return Err(Error::domain(format!(
                    "desired link needs {name} > 0, got {v}"
                )));
            }
        }
        if !self.q0.is_finite() || !self.l0.is_finite() || !self.m.is_finite() {
            return Err(Error::domain("desired link parameters must be finite"));
        }
        Ok(())
    }

    /// Mean received power `q0·ℓ0^{-α}`.
    pub fn received_power(&self) -> T {
        self.q0 * self.l0.powf(-self.alpha)
    }

    /// Mean SNR `q0·ℓ0^{-α}/σn²`.
    pub fn mean_snr(&self) -> T {
        self.received_power() / self.noise
    }

    /// Copy with the noise power set so that the mean SNR equals `snr`.
    pub fn with_snr(mut self, snr: T) -> Self {
        self.noise = self.received_power() / snr;
        self
    }
}

/// A probability evaluated numerically, with the raw value kept when it was
/// clamped back into range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric<T> {
    pub value: T,
    pub raw: T,
    pub clamped: bool,
}

impl<T: Real> Metric<T> {
    fn clamp(raw: T, lo: T, hi: T) -> Self {
        let value = raw.max(lo).min(hi);
        Self {
            value,
            raw,
            clamped: value != raw,
        }
    }
}

/// Average bit error rate.
///
/// `½ − (√c/π)·Γ(m+½)/Γ(m)·∫_0^∞ s^{-1/2}·₁F₁(m+½; 3/2; −c·s)·M_I(−m·s/g0)·e^{−m·σn²·s/g0} ds`
/// with `g0 = q0·ℓ0^{-α}`, integrated in `t = √s`. This is the average of
/// `Q(√(2c·SINR))` over Gamma fading of the desired link and the
/// interference law. The value is clamped to `[0, ½]`.
pub fn average_ber<T: Real, M: AggregateMgf<T> + ?Sized>(
    link: &DesiredLink<T>,
    mgf: &M,
    spec: &QuadratureSpec<T>,
) -> Result<Metric<T>> {
    link.validate()?;
    let m = link.m;
    let g0 = link.received_power();
    let noise_rate = m * link.noise / g0;
    let a = m + T::lit(0.5);
    let b = T::lit(1.5);
    let mut failure: Option<Error> = None;
    let est = integrate_semi_infinite(
        |t: T| {
            if failure.is_some() {
                return T::zero();
            }
            let s = t * t;
            let damping = (-noise_rate * s).exp();
            if damping == T::zero() {
                return T::zero();
            }
            let kernel = match kummer_1f1(a, b, -link.c * s) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    return T::zero();
                }
            };
            if kernel == T::zero() {
                return T::zero();
            }
            match mgf.aggregate_real(-m * s / g0) {
                Ok(v) => T::lit(2.0) * kernel * v * damping,
                Err(e) => {
                    failure = Some(e);
                    T::zero()
                }
            }
        },
        T::zero(),
        link.c.sqrt().recip(),
        spec,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let prefactor = link.c.sqrt() / T::PI() * gamma_fn(a)? / gamma_fn(m)?;
    Ok(Metric::clamp(
        T::lit(0.5) - prefactor * est.value,
        T::zero(),
        T::lit(0.5),
    ))
}

/// Range integrated panel by panel before the checked tail of the
/// Gil-Pelaez integral; chosen where the desired-link factor
/// `|1 − j·u/m|^{-m}/u` has a tail integral near `1e-6`.
fn gil_pelaez_truncation<T: Real>(m: T) -> T {
    let tail = T::lit(1e-6);
    (m * (T::one() / (m * tail)).powf(m.recip()))
        .max(T::lit(10.0))
        .min(T::lit(1e4))
}

/// Outage probability `P(SINR <= η)` by Gil-Pelaez inversion of the
/// characteristic function of `Λ = (g0·h0 − η·I)/σn²`.
///
/// In the scaled variable `u = s·g0/σn²`:
/// `½ − (1/π)∫_0^∞ Im{(1 − j·u/m)^{-m}·M_I(−j·η·u/g0)·e^{−j·u·η/γ̄}} du/u`
/// with `γ̄ = g0/σn²`. The value is clamped to `[0, 1]`.
pub fn outage_probability<T: Real, M: AggregateMgf<T> + ?Sized>(
    eta: T,
    link: &DesiredLink<T>,
    mgf: &M,
    spec: &QuadratureSpec<T>,
) -> Result<Metric<T>> {
    link.validate()?;
    if !(eta >= T::zero()) || !eta.is_finite() {
        return Err(Error::domain(format!(
            "SINR threshold must be finite and non-negative, got {eta}"
        )));
    }
    if eta == T::zero() {
        return Ok(Metric::clamp(T::zero(), T::zero(), T::one()));
    }
    let m = link.m;
    let g0 = link.received_power();
    let snr = link.mean_snr();
    let one = Complex::new(T::one(), T::zero());
    let mut failure: Option<Error> = None;
    let osc_spec = spec.with_truncation(gil_pelaez_truncation(m));
    let est = integrate_oscillatory_semiinf(
        |u: T| {
            if failure.is_some() {
                return Complex::new(T::zero(), T::zero());
            }
            let desired = (one - Complex::new(T::zero(), u / m)).powf(-m);
            let interference = match mgf.aggregate(Complex::new(T::zero(), -eta * u / g0)) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    return Complex::new(T::zero(), T::zero());
                }
            };
            let phase = Complex::new(T::zero(), -u * eta / snr).exp();
            Complex::new((desired * interference * phase).im, T::zero())
        },
        &osc_spec,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Metric::clamp(
        T::lit(0.5) - est.value.re / T::PI(),
        T::zero(),
        T::one(),
    ))
}

/// Outage without interference: `P(m, m·η/γ̄)` (regularized lower gamma).
pub fn outage_no_interference<T: Real>(eta: T, link: &DesiredLink<T>) -> Result<T> {
    link.validate()?;
    regularized_gamma_p(link.m, link.m * eta / link.mean_snr())
}

/// BER of `Q(√(2c·γ))` under Rayleigh fading with mean SNR `snr`:
/// `½(1 − √(c·γ̄/(1 + c·γ̄)))`.
pub fn rayleigh_ber<T: Real>(snr: T, c: T) -> T {
    let x = c * snr;
    T::lit(0.5) * (T::one() - (x / (T::one() + x)).sqrt())
}
