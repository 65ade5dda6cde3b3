//! Spectral overlap between an interferer's PSD and the receiver filter.
//!
//! `Υ(ω) = ∫_{-W/2}^{W/2} Φ(f − ω) |H(f)|² df` in the receiver's baseband
//! frame. Φ has unit power and `|H(0)|² = 1`, so `Υ(0) <= 1` with equality for
//! a rectangular PSD of width `W` behind an ideal filter. The same profile
//! (and the same cached table) feeds both the analytic model and the
//! Monte-Carlo simulator.

use crate::geometry::{Band, ReceiverAnchor};
use crate::numerics::{gauss_legendre, integrate, QuadratureSpec};
use crate::{Error, Real, Result};

/// Interpolation error budget of the cached table, relative to Υ(0).
pub const TABLE_REL_ERROR: f64 = 1e-6;
const TABLE_MIN_CELLS: usize = 512;
const TABLE_MAX_CELLS: usize = 1 << 18;

fn overlap_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(100.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsdShape<T> {
    /// Zero-mean Gaussian PSD with standard deviation `sigma` (Hz).
    Gaussian { sigma: T },
    /// Flat PSD of total width `bandwidth` (Hz).
    Rectangular { bandwidth: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterShape<T> {
    /// Raised-cosine `|H(f)|²` occupying exactly `[-W/2, W/2]`; rolloff 0 is
    /// the ideal brick-wall filter.
    RaisedCosine { rolloff: T },
}

#[derive(Debug, Clone)]
struct UpsilonTable<T> {
    step: T,
    values: Vec<T>,
}

impl<T: Real> UpsilonTable<T> {
    fn max_omega(&self) -> T {
        self.step * T::lit((self.values.len() - 1) as f64)
    }

    fn eval(&self, omega: T) -> Option<T> {
        let pos = omega / self.step;
        let cells = self.values.len() - 1;
        if !(pos >= T::zero()) || pos > T::lit(cells as f64) {
            return None;
        }
        let i = pos.floor().to_usize().unwrap_or(cells).min(cells - 1);
        let frac = pos - T::lit(i as f64);
        Some(self.values[i] + (self.values[i + 1] - self.values[i]) * frac)
    }
}

#[derive(Debug, Clone)]
pub struct SpectralProfile<T> {
    pub psd: PsdShape<T>,
    pub filter: FilterShape<T>,
    /// Desired-signal bandwidth W.
    pub w: T,
    spec: QuadratureSpec<T>,
    table: Option<UpsilonTable<T>>,
}

impl<T: Real> SpectralProfile<T> {
    pub fn new(psd: PsdShape<T>, filter: FilterShape<T>, w: T) -> Result<Self> {
        if !(w > T::zero()) {
            return Err(Error::domain(format!(
                "signal bandwidth must be positive, got {w}"
            )));
        }
        match psd {
            PsdShape::Gaussian { sigma } if !(sigma > T::zero()) => {
                return Err(Error::domain("gaussian PSD needs sigma > 0"));
            }
            PsdShape::Rectangular { bandwidth } if !(bandwidth > T::zero()) => {
                return Err(Error::domain("rectangular PSD needs a positive width"));
            }
            _ => {}
        }
        let FilterShape::RaisedCosine { rolloff } = filter;
        if !(rolloff >= T::zero() && rolloff <= T::one()) {
            return Err(Error::domain(format!(
                "rolloff must lie in [0, 1], got {rolloff}"
            )));
        }
        Ok(Self {
            psd,
            filter,
            w,
            spec: QuadratureSpec::default()
                .with_tolerances(overlap_tol::<T>() * T::lit(1e-3), overlap_tol::<T>()),
            table: None,
        })
    }

    /// Gaussian PSD with σ = W/4 behind a raised-cosine filter.
    pub fn default_for_bandwidth(w: T, rolloff: T) -> Result<Self> {
        Self::new(
            PsdShape::Gaussian {
                sigma: w / T::lit(4.0),
            },
            FilterShape::RaisedCosine { rolloff },
            w,
        )
    }

    /// Tabulates Υ on `[0, omega_max]` for linear interpolation, refining
    /// the grid until every cell midpoint is within `TABLE_REL_ERROR · Υ(0)`
    /// of the direct quadrature.
    pub fn with_table(mut self, omega_max: T) -> Result<Self> {
        if !(omega_max > T::zero()) {
            return Err(Error::domain("table range must be positive"));
        }
        let budget = T::lit(TABLE_REL_ERROR) * self.upsilon_exact(T::zero())?;
        let mut cells = TABLE_MIN_CELLS;
        let mut values = self.sample_grid(omega_max, cells)?;
        loop {
            let step = omega_max / T::lit(cells as f64);
            let mut refined = Vec::with_capacity(2 * cells + 1);
            let mut worst = T::zero();
            for i in 0..cells {
                let mid = self.upsilon_exact(step * (T::lit(i as f64) + T::lit(0.5)))?;
                let interp = T::lit(0.5) * (values[i] + values[i + 1]);
                worst = worst.max((mid - interp).abs());
                refined.push(values[i]);
                refined.push(mid);
            }
            refined.push(values[cells]);
            if worst <= budget {
                self.table = Some(UpsilonTable { step, values });
                return Ok(self);
            }
            if 2 * cells > TABLE_MAX_CELLS {
                return Err(Error::NonConvergence {
                    what: "upsilon table refinement",
                    estimate: worst.to_f64_lossy(),
                    error: budget.to_f64_lossy(),
                    iterations: cells,
                });
            }
            cells *= 2;
            values = refined;
        }
    }

    fn sample_grid(&self, omega_max: T, cells: usize) -> Result<Vec<T>> {
        let step = omega_max / T::lit(cells as f64);
        (0..=cells)
            .map(|i| self.upsilon_exact(step * T::lit(i as f64)))
            .collect()
    }

    pub fn is_tabulated(&self) -> bool {
        self.table.is_some()
    }

    /// Filter power response `|H(f)|²`.
    pub fn filter_power(&self, f: T) -> T {
        let FilterShape::RaisedCosine { rolloff } = self.filter;
        let af = f.abs();
        let half_w = T::lit(0.5) * self.w;
        if af > half_w {
            return T::zero();
        }
        let symbol_rate = self.w / (T::one() + rolloff);
        let flat = T::lit(0.5) * (T::one() - rolloff) * symbol_rate;
        if af <= flat || rolloff == T::zero() {
            return T::one();
        }
        T::lit(0.5) * (T::one() + (T::PI() * (af - flat) / (rolloff * symbol_rate)).cos())
    }

    /// Interferer PSD `Φ(f)` in its own baseband frame.
    pub fn psd_density(&self, f: T) -> T {
        match self.psd {
            PsdShape::Gaussian { sigma } => {
                let z = f / sigma;
                (-T::lit(0.5) * z * z).exp() / (sigma * T::TAU().sqrt())
            }
            PsdShape::Rectangular { bandwidth } => {
                if f.abs() <= T::lit(0.5) * bandwidth {
                    bandwidth.recip()
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Υ(ω), from the table when one covers ω.
    pub fn upsilon(&self, omega: T) -> Result<T> {
        let omega = omega.abs();
        if let Some(v) = self.table.as_ref().and_then(|t| t.eval(omega)) {
            return Ok(v);
        }
        self.upsilon_exact(omega)
    }

    /// Υ(ω) by adaptive quadrature over the filter band.
    pub fn upsilon_exact(&self, omega: T) -> Result<T> {
        let omega = omega.abs();
        let half_w = T::lit(0.5) * self.w;
        let FilterShape::RaisedCosine { rolloff } = self.filter;
        let flat = T::lit(0.5) * (T::one() - rolloff) * self.w / (T::one() + rolloff);

        let mut cuts = vec![-half_w, half_w, -flat, flat];
        match self.psd {
            PsdShape::Gaussian { sigma } => {
                // keep the integration where the Gaussian has mass
                let reach = T::lit(40.0) * sigma;
                if omega - reach >= half_w {
                    return Ok(T::zero());
                }
                cuts.push(omega);
                cuts.push(omega - reach);
                cuts.push(omega + reach);
            }
            PsdShape::Rectangular { bandwidth } => {
                cuts.push(omega - T::lit(0.5) * bandwidth);
                cuts.push(omega + T::lit(0.5) * bandwidth);
            }
        }
        let lo = match self.psd {
            PsdShape::Gaussian { sigma } => (omega - T::lit(40.0) * sigma).max(-half_w),
            PsdShape::Rectangular { bandwidth } => (omega - T::lit(0.5) * bandwidth).max(-half_w),
        };
        let hi = match self.psd {
            PsdShape::Gaussian { sigma } => (omega + T::lit(40.0) * sigma).min(half_w),
            PsdShape::Rectangular { bandwidth } => (omega + T::lit(0.5) * bandwidth).min(half_w),
        };
        if !(lo < hi) {
            return Ok(T::zero());
        }
        let mut pts: Vec<T> = cuts.into_iter().filter(|&c| c > lo && c < hi).collect();
        pts.push(lo);
        pts.push(hi);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        pts.dedup();

        let mut total = T::zero();
        for seg in pts.windows(2) {
            if seg[1] > seg[0] {
                total = total
                    + integrate(
                        |f| self.psd_density(f - omega) * self.filter_power(f),
                        seg[0],
                        seg[1],
                        &self.spec,
                    )?;
            }
        }
        Ok(total.max(T::zero()))
    }

    /// `∫_0^upper Υ(ω)ⁿ dω`.
    ///
    /// On a tabulated range the interpolant is piecewise linear, so an
    /// 8-point Gauss rule per cell integrates it exactly for `n <= 15`.
    pub fn integrate_power(&self, n: u32, upper: T) -> Result<T> {
        if !(upper > T::zero()) {
            return Ok(T::zero());
        }
        if n == 0 {
            return Ok(upper);
        }
        if let Some(table) = self.table.as_ref().filter(|t| upper <= t.max_omega()) {
            let rule = gauss_legendre::<T>(8);
            let full_cells = (upper / table.step).floor().to_usize().unwrap_or(0);
            let mut total = T::zero();
            let cell_integral = |a: T, b: T| {
                let half = T::lit(0.5) * (b - a);
                let mid = T::lit(0.5) * (a + b);
                let mut acc = T::zero();
                for &(x, w) in &rule {
                    let v = table.eval(mid + half * x).unwrap_or(T::zero());
                    acc = acc + w * v.powi(n as i32);
                }
                acc * half
            };
            for i in 0..full_cells.min(table.values.len() - 1) {
                let a = table.step * T::lit(i as f64);
                total = total + cell_integral(a, a + table.step);
            }
            let start = table.step * T::lit(full_cells as f64);
            if upper > start {
                total = total + cell_integral(start, upper);
            }
            return Ok(total);
        }
        let mut failure = None;
        let v = integrate(
            |w| match self.upsilon_exact(w) {
                Ok(u) => u.powi(n as i32),
                Err(e) => {
                    failure.get_or_insert(e);
                    T::zero()
                }
            },
            T::zero(),
            upper,
            &QuadratureSpec::default(),
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}

/// `γₙ = ∫_0^{min(|ωe|,|ωs|)} Υⁿ dω + ∫_0^{max(|ωe|,|ωs|)} Υⁿ dω`, so that
/// `γₙ / (fe − fs)` is `𝔼[Υ(ω)ⁿ]` under the spectral-distance density.
pub fn gamma_n<T: Real>(
    n: u32,
    band: &Band<T>,
    anchor: &ReceiverAnchor<T>,
    profile: &SpectralProfile<T>,
) -> Result<T> {
    let (near, far) = band.spectral_split(anchor);
    Ok(profile.integrate_power(n, near)? + profile.integrate_power(n, far)?)
}
