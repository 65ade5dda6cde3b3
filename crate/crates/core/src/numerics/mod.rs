//! Numerical kernel shared by the analytic modules.

mod quadrature;
mod special;

pub use quadrature::{
    adaptive_gk, integrate, integrate_estimate, integrate_oscillatory_semiinf,
    integrate_semi_infinite, Estimate, QuadValue, QuadratureSpec,
};
pub use special::{
    erf, erfc, gamma_fn, kummer_1f1, kummer_1f1_direct, ln_gamma, q_function, regularized_gamma_p,
    rising_factorial, unit_mean_gamma_cdf,
};

use crate::Real;

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre<T: Real>(n: usize) -> Vec<(T, T)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0_f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((T::lit(x), T::lit(w)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre::<f64>(8);
        let wsum: f64 = rule.iter().map(|p| p.1).sum();
        assert!((wsum - 2.0).abs() < 1e-14);
        // exact through degree 15
        let v: f64 = rule.iter().map(|&(x, w)| w * x.powi(14)).sum();
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
    }
}
