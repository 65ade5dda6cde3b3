//! Special functions: error function, gamma family, confluent
//! hypergeometric ₁F₁ and the Gaussian tail Q.

use crate::{Error, Real, Result};

/// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const MAX_SERIES_TERMS: usize = 20_000;

/// Boundary between the power series and the continued fraction for erf.
const ERF_SERIES_LIMIT: f64 = 3.0;

/// Error function, absolute error below 1e-12 for `f64`.
pub fn erf<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x < T::zero() {
        return -erf(-x);
    }
    if x <= T::lit(ERF_SERIES_LIMIT) {
        erf_series(x)
    } else {
        T::one() - erfc_continued_fraction(x)
    }
}

/// Complementary error function, accurate in relative terms for large `x`.
pub fn erfc<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x < T::zero() {
        return T::lit(2.0) - erfc(-x);
    }
    if x <= T::lit(ERF_SERIES_LIMIT) {
        T::one() - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

// erf(x) = 2/√π · e^{-x²} · Σ 2ⁿ x^{2n+1} / (1·3·…·(2n+1)); all terms positive.
fn erf_series<T: Real>(x: T) -> T {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let two = T::lit(2.0);
    for n in 1..MAX_SERIES_TERMS {
        term = term * two * x2 / T::lit((2 * n + 1) as f64);
        sum = sum + term;
        if term < sum * T::epsilon() {
            break;
        }
    }
    two / T::PI().sqrt() * (-x2).exp() * sum
}

// Lentz evaluation of erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))).
fn erfc_continued_fraction<T: Real>(x: T) -> T {
    let tiny = T::min_positive_value() / T::epsilon();
    let mut f = x;
    let mut c = x;
    let mut d = T::zero();
    let half = T::lit(0.5);
    for k in 1..MAX_SERIES_TERMS {
        let a = T::lit(k as f64) * half;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() < T::epsilon() {
            break;
        }
    }
    (-x * x).exp() / (T::PI().sqrt() * f)
}

/// Gaussian tail probability `Q(x) = ½ erfc(x/√2)`.
pub fn q_function<T: Real>(x: T) -> T {
    T::lit(0.5) * erfc(x / T::SQRT_2())
}

fn is_nonpositive_integer<T: Real>(x: T) -> bool {
    x <= T::zero() && x == x.round()
}

/// Gamma function; relative error about 1e-15 for `f64` and moderate `x`.
pub fn gamma_fn<T: Real>(x: T) -> Result<T> {
    if is_nonpositive_integer(x) {
        return Err(Error::domain(format!("gamma function has a pole at {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // reflection
        T::PI() / ((T::PI() * x).sin() * gamma_unchecked(T::one() - x))
    } else {
        let x = x - T::one();
        let t = x + T::lit(LANCZOS_G) + half;
        let series = lanczos_series(x);
        (T::TAU()).sqrt() * t.powf(x + half) * (-t).exp() * series
    }
}

fn lanczos_series<T: Real>(x: T) -> T {
    let mut sum = T::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        sum = sum + T::lit(c) / (x + T::lit(i as f64));
    }
    sum
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) {
        return Err(Error::domain(format!(
            "ln_gamma needs a positive argument, got {x}"
        )));
    }
    let half = T::lit(0.5);
    if x < half {
        // Γ(x) = Γ(x + 1) / x keeps the Lanczos argument in range
        return Ok(ln_gamma(x + T::one())? - x.ln());
    }
    let xm = x - T::one();
    let t = xm + T::lit(LANCZOS_G) + half;
    Ok(half * T::TAU().ln() + (xm + half) * t.ln() - t + lanczos_series(xm).ln())
}

/// `Γ(n + m) / Γ(m)` (rising factorial), computed in log space for large `n`.
pub fn rising_factorial<T: Real>(m: T, n: usize) -> Result<T> {
    if n <= 64 {
        let mut acc = T::one();
        for k in 0..n {
            acc = acc * (m + T::lit(k as f64));
        }
        return Ok(acc);
    }
    Ok((ln_gamma(m + T::lit(n as f64))? - ln_gamma(m)?).exp())
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn regularized_gamma_p<T: Real>(a: T, x: T) -> Result<T> {
    if !(a > T::zero()) {
        return Err(Error::domain(format!(
            "incomplete gamma needs a > 0, got {a}"
        )));
    }
    if x <= T::zero() {
        return Ok(T::zero());
    }
    if x == T::infinity() {
        return Ok(T::one());
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a)?;
    if x < a + T::one() {
        // series
        let mut ap = a;
        let mut del = a.recip();
        let mut sum = del;
        for _ in 0..MAX_SERIES_TERMS {
            ap = ap + T::one();
            del = del * x / ap;
            sum = sum + del;
            if del.abs() < sum.abs() * T::epsilon() {
                return Ok((sum * log_prefactor.exp()).min(T::one()));
            }
        }
        Err(Error::NonConvergence {
            what: "incomplete gamma series",
            estimate: sum.to_f64_lossy(),
            error: del.to_f64_lossy(),
            iterations: MAX_SERIES_TERMS,
        })
    } else {
        // continued fraction for Q(a, x), modified Lentz
        let tiny = T::min_positive_value() / T::epsilon();
        let mut b = x + T::one() - a;
        let mut c = tiny.recip();
        let mut d = b.recip();
        let mut h = d;
        for i in 1..MAX_SERIES_TERMS {
            let fi = T::lit(i as f64);
            let an = -fi * (fi - a);
            b = b + T::lit(2.0);
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = d.recip();
            let del = d * c;
            h = h * del;
            if (del - T::one()).abs() < T::epsilon() {
                let q = log_prefactor.exp() * h;
                return Ok((T::one() - q).max(T::zero()));
            }
        }
        Err(Error::NonConvergence {
            what: "incomplete gamma continued fraction",
            estimate: h.to_f64_lossy(),
            error: f64::NAN,
            iterations: MAX_SERIES_TERMS,
        })
    }
}

/// CDF of the unit-mean Gamma distribution with shape `m` (Nakagami power).
pub fn unit_mean_gamma_cdf<T: Real>(m: T, x: T) -> Result<T> {
    regularized_gamma_p(m, m * x)
}

/// Plain Maclaurin series of ₁F₁(a; b; x).
fn kummer_series<T: Real>(a: T, b: T, x: T) -> Result<T> {
    let mut term = T::one();
    let mut sum = T::one();
    for n in 0..MAX_SERIES_TERMS {
        let nf = T::lit(n as f64);
        term = term * (a + nf) / (b + nf) * x / (nf + T::one());
        sum = sum + term;
        if term == T::zero() {
            return Ok(sum);
        }
        // past the peak of the terms and below machine precision
        if nf > (x.abs() + a.abs()) && term.abs() <= sum.abs() * T::epsilon() {
            return Ok(sum);
        }
        if !sum.is_finite() {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        what: "1F1 series",
        estimate: sum.to_f64_lossy(),
        error: term.to_f64_lossy(),
        iterations: MAX_SERIES_TERMS,
    })
}

/// Large-|x| expansion of ₁F₁(a; b; -y), y → +∞, dropping the exponentially
/// small e^{-y} contribution.
fn kummer_asymptotic_negative<T: Real>(a: T, b: T, y: T) -> Result<T> {
    let lead = gamma_fn(b)? / gamma_fn(b - a)? * y.powf(-a);
    let mut term = T::one();
    let mut sum = T::one();
    let mut prev = T::infinity();
    for s in 0..200 {
        let sf = T::lit(s as f64);
        term = term * (a + sf) * (a - b + T::one() + sf) / ((sf + T::one()) * y);
        if term.abs() > prev {
            // asymptotic series started to diverge; stop at the smallest term
            break;
        }
        sum = sum + term;
        prev = term.abs();
        if term.abs() <= sum.abs() * T::epsilon() {
            break;
        }
    }
    Ok(lead * sum)
}

/// Confluent hypergeometric function ₁F₁(a; b; x) for real arguments.
///
/// Negative `x` goes through Kummer's transformation
/// `₁F₁(a; b; x) = eˣ ₁F₁(b - a; b; -x)`, which removes the alternating
/// cancellation of the direct series. Very large negative `x` switches to the
/// algebraic asymptotic expansion unless the transformed series terminates.
pub fn kummer_1f1<T: Real>(a: T, b: T, x: T) -> Result<T> {
    if is_nonpositive_integer(b) {
        return Err(Error::domain(format!(
            "1F1 undefined for non-positive integer b = {b}"
        )));
    }
    if !x.is_finite() || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain("1F1 needs finite arguments"));
    }
    if x == T::zero() || a == T::zero() {
        return Ok(T::one());
    }
    if x > T::zero() || is_nonpositive_integer(a) {
        return kummer_series(a, b, x);
    }
    let y = -x;
    let c = b - a;
    let overflow_guard = T::max_value().ln() * T::lit(0.85);
    if is_nonpositive_integer(c) || y <= overflow_guard {
        return Ok((-y).exp() * kummer_series(c, b, y)?);
    }
    kummer_asymptotic_negative(a, b, y)
}

/// Direct Maclaurin series, exposed for cross-checking the transformed path.
pub fn kummer_1f1_direct<T: Real>(a: T, b: T, x: T) -> Result<T> {
    if is_nonpositive_integer(b) {
        return Err(Error::domain(format!(
            "1F1 undefined for non-positive integer b = {b}"
        )));
    }
    kummer_series(a, b, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_basic_values() {
        assert_eq!(erf(0.0_f64), 0.0);
        assert!((erf(6.0_f64) - 1.0).abs() < 1e-12);
        assert!((erf(1.0_f64) - 0.842_700_792_949_714_9).abs() < 1e-13);
        assert!((erf(-0.5_f64) + 0.520_499_877_813_046_5).abs() < 1e-13);
    }

    #[test]
    fn erf_continuous_at_switch() {
        let below = erf(ERF_SERIES_LIMIT - 1e-12);
        let above = erf(ERF_SERIES_LIMIT + 1e-12);
        assert!((below - above).abs() < 1e-13);
        let below = erfc(ERF_SERIES_LIMIT - 1e-12);
        let above = erfc(ERF_SERIES_LIMIT + 1e-12);
        assert!((below / above - 1.0).abs() < 1e-9);
    }

    #[test]
    fn erfc_tail() {
        // erfc(5) = 1.5374597944280348e-12
        assert!((erfc(5.0_f64) / 1.537_459_794_428_034_8e-12 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gamma_values() {
        assert!((gamma_fn(5.0_f64).unwrap() - 24.0).abs() < 24.0 * 1e-12);
        assert!((gamma_fn(0.5_f64).unwrap() - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!(gamma_fn(0.0_f64).is_err());
        assert!(gamma_fn(-3.0_f64).is_err());
        assert!((gamma_fn(-0.5_f64).unwrap() + 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for &x in &[0.1_f64, 0.7, 1.0, 2.5, 7.3, 30.0] {
            let direct = gamma_fn(x).unwrap().ln();
            assert!(
                (ln_gamma(x).unwrap() - direct).abs() < 1e-12 * direct.abs().max(1.0),
                "{x}"
            );
        }
    }

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0_f64), 0.5);
        assert!((q_function(1.0_f64) - 0.158_655_253_931_457_05).abs() < 1e-14);
    }

    #[test]
    fn incomplete_gamma_exponential() {
        // P(1, x) = 1 - e^{-x}
        for &x in &[0.1, 1.0, 3.0, 20.0] {
            let p = regularized_gamma_p(1.0_f64, x).unwrap();
            assert!((p - (1.0 - (-x).exp())).abs() < 1e-14, "{x}");
        }
    }

    #[test]
    fn kummer_identities() {
        assert_eq!(kummer_1f1(2.0_f64, 3.0, 0.0).unwrap(), 1.0);
        assert!((kummer_1f1(1.0_f64, 1.0, 1.0).unwrap() - std::f64::consts::E).abs() < 1e-12);
        assert!((kummer_1f1(1.0_f64, 1.0, -3.0).unwrap() - (-3.0_f64).exp()).abs() < 1e-14);
        assert!(matches!(
            kummer_1f1(1.0_f64, -2.0, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn kummer_erf_relation() {
        // erf(z) = 2z/√π · ₁F₁(1/2; 3/2; -z²)
        for &z in &[0.3_f64, 1.0, 2.0, 4.0] {
            let v = 2.0 * z / std::f64::consts::PI.sqrt() * kummer_1f1(0.5, 1.5, -z * z).unwrap();
            assert!((v - erf(z)).abs() < 1e-12, "{z}");
        }
    }

    #[test]
    fn kummer_asymptotic_branch_is_continuous() {
        let (a, b) = (0.7_f64, 1.5);
        let y = 400.0_f64;
        let series = (-y).exp() * kummer_series(b - a, b, y).unwrap();
        let asym = kummer_asymptotic_negative(a, b, y).unwrap();
        assert!((series / asym - 1.0).abs() < 1e-10, "{series} {asym}");
    }
}
