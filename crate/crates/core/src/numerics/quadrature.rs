//! Adaptive Gauss–Kronrod quadrature.
//!
//! A 7/15-point Gauss–Kronrod pair with global (largest-error-first)
//! subdivision. Finite intervals are first passed through the cubic map
//! `x = a + (b - a)(3u² - 2u³)`, whose Jacobian vanishes at both ends; an
//! endpoint singularity `x^(-γ)` with `γ < 1` becomes `u^(1 - 2γ)`, which is
//! bounded for `γ <= 1/2` and much milder otherwise. Polynomials of degree 6
//! stay within the exactness range of a single Kronrod panel after the map.

use std::ops::{Add, Mul, Sub};

use num_traits::Zero;

use crate::{Complex, Error, Real, Result};

/// Abscissae of the 15-point Kronrod rule on [-1, 1] (non-negative half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Weights of the embedded 7-point Gauss rule (odd Kronrod abscissae).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and limits for the integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_subdivisions: usize,
    /// Length of the explicitly integrated range for semi-infinite
    /// oscillatory integrals; the tail beyond it is checked, not assumed.
    pub truncation_point: T,
}

impl<T: Real> QuadratureSpec<T> {
    pub fn new(
        abs_tol: T,
        rel_tol: T,
        max_subdivisions: usize,
        truncation_point: T,
    ) -> Result<Self> {
        let spec = Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
            truncation_point,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > T::zero()) || !(self.rel_tol > T::zero()) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::domain("max_subdivisions must be at least 1"));
        }
        if !(self.truncation_point > T::zero()) {
            return Err(Error::domain("truncation_point must be positive"));
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, abs_tol: T, rel_tol: T) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_truncation(mut self, truncation_point: T) -> Self {
        self.truncation_point = truncation_point;
        self
    }

    fn target(&self, value: T) -> T {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

impl<T: Real> Default for QuadratureSpec<T> {
    /// `abs_tol = 1e-12`, `rel_tol = 1e-10` in `f64`; both are raised to a
    /// few hundred ulps for narrower types.
    fn default() -> Self {
        let floor = T::epsilon() * T::lit(500.0);
        Self {
            abs_tol: T::lit(1e-12).max(floor),
            rel_tol: T::lit(1e-10).max(floor),
            max_subdivisions: 400,
            truncation_point: T::lit(100.0),
        }
    }
}

/// Values that can be integrated: real scalars and complex numbers.
pub trait QuadValue<T: Real>:
    Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self>
{
    fn magnitude(&self) -> T;
    fn is_finite_value(&self) -> bool;
}

impl<T: Real> QuadValue<T> for T {
    fn magnitude(&self) -> T {
        self.abs()
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl<T: Real> QuadValue<T> for Complex<T> {
    fn magnitude(&self) -> T {
        self.norm()
    }
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// An integral together with its error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<V, T> {
    pub value: V,
    pub abs_err: T,
    pub evaluations: usize,
}

struct Panel<V, T> {
    a: T,
    b: T,
    value: V,
    err: T,
}

fn gk15<T: Real, V: QuadValue<T>>(f: &mut impl FnMut(T) -> V, a: T, b: T) -> (V, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);

    let f_center = f(center);
    let mut res_k = f_center * T::lit(WGK[7]);
    let mut res_g = f_center * T::lit(WG[3]);
    let mut res_abs = f_center.magnitude() * T::lit(WGK[7]);
    let mut fv1 = [V::zero(); 7];
    let mut fv2 = [V::zero(); 7];

    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k = res_k + (f1 + f2) * T::lit(WGK[j]);
        res_abs = res_abs + (f1.magnitude() + f2.magnitude()) * T::lit(WGK[j]);
        if j % 2 == 1 {
            res_g = res_g + (f1 + f2) * T::lit(WG[j / 2]);
        }
    }

    let mean = res_k * half;
    let mut res_asc = (f_center - mean).magnitude() * T::lit(WGK[7]);
    for j in 0..7 {
        res_asc =
            res_asc + ((fv1[j] - mean).magnitude() + (fv2[j] - mean).magnitude()) * T::lit(WGK[j]);
    }

    let abs_half = half_len.abs();
    let value = res_k * half_len;
    res_abs = res_abs * abs_half;
    res_asc = res_asc * abs_half;

    let mut err = ((res_k - res_g) * half_len).magnitude();
    if res_asc != T::zero() && err != T::zero() {
        let scale = (T::lit(200.0) * err / res_asc).powf(T::lit(1.5));
        err = if scale < T::one() {
            res_asc * scale
        } else {
            res_asc
        };
    }
    let eps = T::epsilon();
    if res_abs > T::min_positive_value() / (T::lit(50.0) * eps) {
        err = err.max(T::lit(50.0) * eps * res_abs);
    }
    (value, err)
}

/// Adaptive Gauss–Kronrod on `[a, b]` without any change of variables.
pub fn adaptive_gk<T, V, F>(
    mut f: F,
    a: T,
    b: T,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<V, T>>
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    spec.validate()?;
    if a == b {
        return Ok(Estimate {
            value: V::zero(),
            abs_err: T::zero(),
            evaluations: 0,
        });
    }
    if !(a < b) {
        return Err(Error::domain(format!(
            "integration bounds must satisfy a < b (a = {a}, b = {b})"
        )));
    }

    let (value, err) = gk15(&mut f, a, b);
    let mut evaluations = 15;
    let mut panels = vec![Panel { a, b, value, err }];
    let mut total = value;
    let mut total_err = err;

    loop {
        if !total.is_finite_value() {
            return Err(non_convergence(
                "adaptive quadrature (non-finite integrand)",
                total,
                total_err,
                panels.len(),
            ));
        }
        if total_err <= spec.target(total.magnitude()) {
            break;
        }
        if panels.len() >= spec.max_subdivisions {
            return Err(non_convergence(
                "adaptive quadrature",
                total,
                total_err,
                panels.len(),
            ));
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| {
                x.1.err
                    .partial_cmp(&y.1.err)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("at least one panel");
        let worst = panels.swap_remove(idx);
        let mid = T::lit(0.5) * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // panel cannot be split further at this precision
            return Err(non_convergence(
                "adaptive quadrature (roundoff)",
                total,
                total_err,
                panels.len() + 1,
            ));
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.err + e1 + e2;
        panels.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        panels.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        // keep the running error sum from drifting below the true sum
        if panels.len() % 32 == 0 {
            total = panels.iter().fold(V::zero(), |acc, p| acc + p.value);
            total_err = panels.iter().fold(T::zero(), |acc, p| acc + p.err);
        }
    }

    Ok(Estimate {
        value: total,
        abs_err: total_err,
        evaluations,
    })
}

fn non_convergence<T: Real, V: QuadValue<T>>(
    what: &'static str,
    value: V,
    err: T,
    iterations: usize,
) -> Error {
    Error::NonConvergence {
        what,
        estimate: value.magnitude().to_f64_lossy(),
        error: err.to_f64_lossy(),
        iterations,
    }
}

/// Integral over a finite interval with endpoint-softening substitution.
pub fn integrate_estimate<T, V, F>(
    mut f: F,
    a: T,
    b: T,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<V, T>>
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integrate_estimate needs finite bounds"));
    }
    if a == b {
        return adaptive_gk(f, a, b, spec);
    }
    if !(a < b) {
        return Err(Error::domain(format!(
            "integration bounds must satisfy a < b (a = {a}, b = {b})"
        )));
    }
    let width = b - a;
    let three = T::lit(3.0);
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    adaptive_gk(
        |u: T| {
            let x = a + width * u * u * (three - two * u);
            let jac = six * u * (T::one() - u) * width;
            if jac == T::zero() {
                V::zero()
            } else {
                f(x) * jac
            }
        },
        T::zero(),
        T::one(),
        spec,
    )
}

/// `∫_a^b f(x) dx`. An infinite `b` selects the map `x = a + t/(1 - t)`.
pub fn integrate<T, F>(f: F, a: T, b: T, spec: &QuadratureSpec<T>) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> T,
{
    if b == T::infinity() {
        return integrate_semi_infinite(f, a, T::one(), spec).map(|e| e.value);
    }
    integrate_estimate(f, a, b, spec).map(|e| e.value)
}

/// `∫_a^∞ f(x) dx` through `x = a + scale · t/(1 - t)`, `t ∈ [0, 1)`.
///
/// `scale` should be of the order of the integrand's decay length.
pub fn integrate_semi_infinite<T, V, F>(
    mut f: F,
    a: T,
    scale: T,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<V, T>>
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    if !(scale > T::zero()) {
        return Err(Error::domain("semi-infinite map scale must be positive"));
    }
    adaptive_gk(
        |t: T| {
            let one_minus = T::one() - t;
            if one_minus <= T::zero() {
                return V::zero();
            }
            let x = a + scale * t / one_minus;
            let jac = scale / (one_minus * one_minus);
            let v = f(x);
            if v.magnitude() == T::zero() {
                V::zero()
            } else {
                v * jac
            }
        },
        T::zero(),
        T::one(),
        spec,
    )
}

/// Number of equal panels covering `[0, truncation_point]`.
const OSC_PANELS: usize = 32;
/// Tail panels tried beyond the truncation point before giving up.
const OSC_MAX_TAIL_PANELS: usize = 512;
/// Consecutive negligible tail panels that terminate the integration.
const OSC_QUIET_PANELS: usize = 3;

/// `∫_0^∞ f(s) ds / s` for an oscillatory, decaying `f` with `f(0) = 0`.
///
/// `[0, truncation_point]` is split into equal panels, each integrated
/// adaptively. Past the truncation point panels of the same width continue
/// until three consecutive panels each contribute less than the tolerance;
/// the magnitude of those last panels is folded into the error estimate.
/// Keeping the width fixed keeps the number of oscillations per panel
/// bounded.
pub fn integrate_oscillatory_semiinf<T, F>(
    mut f: F,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<Complex<T>, T>>
where
    T: Real,
    F: FnMut(T) -> Complex<T>,
{
    spec.validate()?;
    let panel_spec = QuadratureSpec {
        abs_tol: spec.abs_tol / T::lit(4.0 * OSC_PANELS as f64),
        ..*spec
    };
    let mut g = |s: T| {
        if s == T::zero() {
            Complex::zero()
        } else {
            f(s) / s
        }
    };

    let width = spec.truncation_point / T::lit(OSC_PANELS as f64);
    let mut total = Complex::<T>::zero();
    let mut err = T::zero();
    let mut evaluations = 0;
    for k in 0..OSC_PANELS {
        let a = width * T::lit(k as f64);
        let b = width * T::lit((k + 1) as f64);
        let est = adaptive_gk(&mut g, a, b, &panel_spec)?;
        total = total + est.value;
        err = err + est.abs_err;
        evaluations += est.evaluations;
    }

    let mut a = spec.truncation_point;
    let mut quiet = 0;
    let mut tail_mag = T::zero();
    for _ in 0..OSC_MAX_TAIL_PANELS {
        let b = a + width;
        let est = adaptive_gk(&mut g, a, b, &panel_spec)?;
        total = total + est.value;
        err = err + est.abs_err;
        evaluations += est.evaluations;
        let contribution = est.value.norm();
        if contribution <= spec.target(total.norm()) {
            quiet += 1;
            tail_mag = tail_mag + contribution;
            if quiet >= OSC_QUIET_PANELS {
                return Ok(Estimate {
                    value: total,
                    abs_err: err + tail_mag,
                    evaluations,
                });
            }
        } else {
            quiet = 0;
            tail_mag = T::zero();
        }
        a = b;
    }
    Err(Error::NonConvergence {
        what: "oscillatory semi-infinite tail",
        estimate: total.norm().to_f64_lossy(),
        error: err.to_f64_lossy(),
        iterations: OSC_PANELS + OSC_MAX_TAIL_PANELS,
    })
}
