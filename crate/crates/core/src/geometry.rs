//! Disk and band geometry: spatial and spectral distance distributions,
//! point-process samplers, and the cone-shadow blockage test.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::numerics::{integrate, QuadratureSpec};
use crate::{Error, Real, Result};

/// Violation of the `[-1, 1]` arccos domain tolerated as rounding noise.
const ACOS_SLACK: f64 = 1e-12;

/// Circular deployment area of radius `radius` (metres) centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk<T> {
    pub radius: T,
}

impl<T: Real> Disk<T> {
    pub fn new(radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::domain(format!(
                "disk radius must be positive, got {radius}"
            )));
        }
        Ok(Self { radius })
    }

    pub fn area(&self) -> T {
        T::PI() * self.radius * self.radius
    }
}

/// Reference receiver: distance from the disk centre and carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverAnchor<T> {
    pub v0_norm: T,
    pub f0: T,
}

impl<T: Real> ReceiverAnchor<T> {
    pub fn new(v0_norm: T, f0: T) -> Result<Self> {
        if !(v0_norm >= T::zero()) {
            return Err(Error::domain(format!(
                "receiver offset must be non-negative, got {v0_norm}"
            )));
        }
        Ok(Self { v0_norm, f0 })
    }

    /// Checks `v0_norm < R` and `fs <= f0 <= fe`.
    pub fn validate(&self, disk: &Disk<T>, band: &Band<T>) -> Result<()> {
        self.check_inside(disk)?;
        if !(self.f0 >= band.fs && self.f0 <= band.fe) {
            return Err(Error::domain(format!(
                "receiver frequency {} outside band [{}, {}]",
                self.f0, band.fs, band.fe
            )));
        }
        Ok(())
    }

    pub fn check_inside(&self, disk: &Disk<T>) -> Result<()> {
        if !(self.v0_norm < disk.radius) {
            return Err(Error::domain(format!(
                "receiver offset {} must be smaller than the disk radius {}",
                self.v0_norm, disk.radius
            )));
        }
        Ok(())
    }

    pub fn position(&self) -> [T; 2] {
        [self.v0_norm, T::zero()]
    }
}

/// Operating band `[fs, fe]` and desired-signal bandwidth `w` (Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band<T> {
    pub fs: T,
    pub fe: T,
    pub w: T,
}

impl<T: Real> Band<T> {
    pub fn new(fs: T, fe: T, w: T) -> Result<Self> {
        if !(fs < fe) {
            return Err(Error::domain(format!(
                "band needs fs < fe, got [{fs}, {fe}]"
            )));
        }
        if !(w > T::zero() && w <= fe - fs) {
            return Err(Error::domain(format!(
                "signal bandwidth {w} must lie in (0, fe - fs]"
            )));
        }
        Ok(Self { fs, fe, w })
    }

    pub fn width(&self) -> T {
        self.fe - self.fs
    }

    /// `(min(|ωe|, |ωs|), max(|ωe|, |ωs|))` relative to the receiver carrier.
    pub fn spectral_split(&self, anchor: &ReceiverAnchor<T>) -> (T, T) {
        let we = (self.fe - anchor.f0).abs();
        let ws = (self.fs - anchor.f0).abs();
        (we.min(ws), we.max(ws))
    }
}

/// Circular obstacle; `radius` is the `d` of the blockage model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleCircle<T> {
    pub center: [T; 2],
    pub radius: T,
}

fn clamp_acos_arg<T: Real>(x: T) -> Result<T> {
    let slack = T::lit(ACOS_SLACK);
    if x > T::one() + slack || x < -T::one() - slack || x.is_nan() {
        return Err(Error::domain(format!(
            "arccos argument {x} outside [-1, 1]"
        )));
    }
    Ok(x.max(-T::one()).min(T::one()))
}

/// Density of the distance between the receiver and a point uniform on the
/// disk.
///
/// `2ℓ/R²` while the circle of radius ℓ around the receiver stays inside the
/// disk, then `2ℓ·acos((‖v0‖² − R² + ℓ²)/(2ℓ‖v0‖))/(πR²)` up to `R + ‖v0‖`.
pub fn distance_pdf<T: Real>(ell: T, disk: &Disk<T>, anchor: &ReceiverAnchor<T>) -> Result<T> {
    anchor.check_inside(disk)?;
    let r = disk.radius;
    let v = anchor.v0_norm;
    if !(ell > T::zero()) || ell > r + v {
        return Ok(T::zero());
    }
    let two = T::lit(2.0);
    if ell <= r - v {
        return Ok(two * ell / (r * r));
    }
    let arg = clamp_acos_arg((v * v - r * r + ell * ell) / (two * ell * v))?;
    Ok(two * ell * arg.acos() / (T::PI() * r * r))
}

/// CDF of [`distance_pdf`], from the lens area of two intersecting circles.
pub fn distance_cdf<T: Real>(ell: T, disk: &Disk<T>, anchor: &ReceiverAnchor<T>) -> Result<T> {
    anchor.check_inside(disk)?;
    let r = disk.radius;
    let v = anchor.v0_norm;
    if !(ell > T::zero()) {
        return Ok(T::zero());
    }
    if ell >= r + v {
        return Ok(T::one());
    }
    if ell <= r - v {
        return Ok(ell * ell / (r * r));
    }
    let two = T::lit(2.0);
    let a1 = clamp_acos_arg((v * v + ell * ell - r * r) / (two * v * ell))?.acos();
    let a2 = clamp_acos_arg((v * v + r * r - ell * ell) / (two * v * r))?.acos();
    let k = ((-v + ell + r) * (v + ell - r) * (v - ell + r) * (v + ell + r)).max(T::zero());
    let lens = ell * ell * a1 + r * r * a2 - T::lit(0.5) * k.sqrt();
    Ok((lens / disk.area()).max(T::zero()).min(T::one()))
}

/// `∫ g(ℓ) f_L(ℓ) dℓ` over `[lower, R + ‖v0‖]`, split at the branch point
/// `R − ‖v0‖` of the density.
pub fn integrate_over_distance<T, F>(
    mut g: F,
    lower: T,
    disk: &Disk<T>,
    anchor: &ReceiverAnchor<T>,
    spec: &QuadratureSpec<T>,
) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> T,
{
    anchor.check_inside(disk)?;
    let r = disk.radius;
    let v = anchor.v0_norm;
    let lower = lower.max(T::zero());
    let top = r + v;
    let split = r - v;
    let mut total = T::zero();
    // inner branch: density 2ℓ/R²
    if lower < split {
        let two_over = T::lit(2.0) / (r * r);
        total = total + integrate(|l| g(l) * two_over * l, lower, split, spec)?;
    }
    let start = lower.max(split);
    if v > T::zero() && start < top {
        let mut failure = None;
        let part = integrate(
            |l| match distance_pdf(l, disk, anchor) {
                Ok(p) => g(l) * p,
                Err(e) => {
                    failure.get_or_insert(e);
                    T::zero()
                }
            },
            start,
            top,
            spec,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        total = total + part;
    }
    Ok(total)
}

/// Density of `|f − f0|` for `f` uniform on the band.
pub fn spectral_distance_pdf<T: Real>(omega: T, band: &Band<T>, anchor: &ReceiverAnchor<T>) -> T {
    let (near, far) = band.spectral_split(anchor);
    if !(omega > T::zero()) || omega > far {
        T::zero()
    } else if omega <= near {
        T::lit(2.0) / band.width()
    } else {
        T::one() / band.width()
    }
}

/// CDF of [`spectral_distance_pdf`]: `2ω/(fe−fs)` then `(min + ω)/(fe−fs)`.
pub fn spectral_distance_cdf<T: Real>(omega: T, band: &Band<T>, anchor: &ReceiverAnchor<T>) -> T {
    let (near, far) = band.spectral_split(anchor);
    if !(omega > T::zero()) {
        T::zero()
    } else if omega <= near {
        T::lit(2.0) * omega / band.width()
    } else if omega <= far {
        (near + omega) / band.width()
    } else {
        T::one()
    }
}

/// One uniform point on the disk and one uniform frequency on the band.
pub fn sample_interferer<R: Rng + ?Sized>(
    rng: &mut R,
    disk: &Disk<f64>,
    band: &Band<f64>,
) -> ([f64; 2], f64) {
    let position = sample_in_disk(rng, disk.radius);
    let freq = band.fs + band.width() * rng.random::<f64>();
    (position, freq)
}

pub fn sample_in_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> [f64; 2] {
    let rad = radius * rng.random::<f64>().sqrt();
    let phi = std::f64::consts::TAU * rng.random::<f64>();
    [rad * phi.cos(), rad * phi.sin()]
}

/// Poisson field of circular obstacles on the disk with density `rho` per m².
pub fn sample_obstacles<R: Rng + ?Sized>(
    rng: &mut R,
    disk: &Disk<f64>,
    rho: f64,
    ds: f64,
    de: f64,
) -> Result<Vec<ObstacleCircle<f64>>> {
    if !(rho >= 0.0) {
        return Err(Error::domain(format!(
            "obstacle density must be non-negative, got {rho}"
        )));
    }
    if !(ds > 0.0 && ds <= de) {
        return Err(Error::domain(format!(
            "obstacle radii need 0 < ds <= de, got [{ds}, {de}]"
        )));
    }
    let mean = rho * disk.area();
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean)
        .map_err(|e| Error::domain(format!("poisson mean {mean}: {e}")))?
        .sample(rng) as usize;
    Ok((0..count)
        .map(|_| ObstacleCircle {
            center: sample_in_disk(rng, disk.radius),
            radius: ds + (de - ds) * rng.random::<f64>(),
        })
        .collect())
}

/// A blocked segment `[lo, hi]` of the cone base, measured from the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowInterval<T> {
    pub lo: T,
    pub hi: T,
}

/// Shadows cast on the base of the radiation cone by the obstacles.
///
/// The cone has its apex at the interfering AP, its axis towards the
/// receiver, half-angle `theta`, and a base through the receiver of
/// half-length `ℓ tanθ`. Each obstacle at axial distance `0 < r < ℓ` is
/// centrally projected from the apex onto the base: centre `t·ℓ/r` and
/// half-length `d·ℓ/r`, clipped to the base. An obstacle whose centre lies
/// inside the cone with `r <= d/tanθ` spans the whole cross-section and
/// shadows the full base.
pub fn cone_shadow_intervals<T: Real>(
    ap: [T; 2],
    receiver: [T; 2],
    theta: T,
    obstacles: &[ObstacleCircle<T>],
) -> Result<Vec<ShadowInterval<T>>> {
    if !(theta > T::zero() && theta < T::FRAC_PI_2()) {
        return Err(Error::domain(format!(
            "half-beamwidth must lie in (0, π/2), got {theta}"
        )));
    }
    let dx = receiver[0] - ap[0];
    let dy = receiver[1] - ap[1];
    let ell = dx.hypot(dy);
    if !(ell > T::zero()) {
        return Err(Error::domain("AP and receiver coincide"));
    }
    let (ux, uy) = (dx / ell, dy / ell);
    let tan = theta.tan();
    let half_base = ell * tan;

    let mut out = Vec::new();
    for ob in obstacles {
        let cx = ob.center[0] - ap[0];
        let cy = ob.center[1] - ap[1];
        let r = cx * ux + cy * uy;
        if !(r > T::zero()) || r > ell {
            continue;
        }
        let t = -cx * uy + cy * ux;
        let d = ob.radius;
        if r <= d / tan && t.abs() <= r * tan {
            out.push(ShadowInterval {
                lo: -half_base,
                hi: half_base,
            });
            continue;
        }
        let centre = t * ell / r;
        let half = d * ell / r;
        let lo = (centre - half).max(-half_base);
        let hi = (centre + half).min(half_base);
        if lo < hi {
            out.push(ShadowInterval { lo, hi });
        }
    }
    Ok(out)
}

/// True iff the union of `intervals` covers `[-half_base, half_base]`.
pub fn is_link_blocked<T: Real>(intervals: &[ShadowInterval<T>], half_base: T) -> bool {
    if intervals.is_empty() {
        return false;
    }
    let mut sorted: Vec<_> = intervals.to_vec();
    sorted.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(std::cmp::Ordering::Equal));
    let mut reach = -half_base;
    for iv in &sorted {
        if iv.lo > reach {
            return false;
        }
        reach = reach.max(iv.hi);
        if reach >= half_base {
            return true;
        }
    }
    reach >= half_base
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, QuadratureSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn disk(r: f64) -> Disk<f64> {
        Disk::new(r).unwrap()
    }

    #[test]
    fn central_receiver_single_branch() {
        let d = disk(20.0);
        let a = ReceiverAnchor::new(0.0, 0.0).unwrap();
        assert!((distance_pdf(20.0, &d, &a).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(distance_pdf(20.0001, &d, &a).unwrap(), 0.0);
    }

    #[test]
    fn branch_continuity() {
        let d = disk(20.0);
        let a = ReceiverAnchor::new(10.0, 0.0).unwrap();
        let left = distance_pdf(10.0, &d, &a).unwrap();
        let right = distance_pdf(10.0 + 1e-10, &d, &a).unwrap();
        assert!((left - right).abs() < 1e-6, "{left} {right}");
        assert!(distance_pdf(30.0, &d, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn receiver_outside_rejected() {
        let d = disk(20.0);
        let a = ReceiverAnchor::new(20.0, 0.0).unwrap();
        assert!(matches!(distance_pdf(1.0, &d, &a), Err(Error::Domain(_))));
    }

    #[test]
    fn pdf_integrates_to_one() {
        let spec = QuadratureSpec::default();
        for &frac in &[0.0, 0.25, 0.5, 0.9] {
            let d = disk(20.0);
            let a = ReceiverAnchor::new(20.0 * frac, 0.0).unwrap();
            let split = 20.0 - a.v0_norm;
            let mut total =
                integrate(|l| distance_pdf(l, &d, &a).unwrap(), 0.0, split, &spec).unwrap();
            if a.v0_norm > 0.0 {
                total += integrate(
                    |l| distance_pdf(l, &d, &a).unwrap(),
                    split,
                    20.0 + a.v0_norm,
                    &spec,
                )
                .unwrap();
            }
            assert!((total - 1.0).abs() < 1e-9, "v0/R = {frac}: {total}");
        }
    }

    #[test]
    fn cdf_is_antiderivative_of_pdf() {
        let d = disk(25.0);
        let a = ReceiverAnchor::new(10.0, 0.0).unwrap();
        let spec = QuadratureSpec::default();
        for &l in &[5.0, 15.0, 20.0, 30.0, 34.9] {
            let direct = if l <= 15.0 {
                integrate(|x| distance_pdf(x, &d, &a).unwrap(), 0.0, l, &spec).unwrap()
            } else {
                integrate(|x| distance_pdf(x, &d, &a).unwrap(), 0.0, 15.0, &spec).unwrap()
                    + integrate(|x| distance_pdf(x, &d, &a).unwrap(), 15.0, l, &spec).unwrap()
            };
            assert!(
                (direct - distance_cdf(l, &d, &a).unwrap()).abs() < 1e-10,
                "{l}"
            );
        }
    }

    #[test]
    fn spectral_pdf_default_band() {
        let band = Band::new(58e9_f64, 64e9, 2.16e9).unwrap();
        let a = ReceiverAnchor::new(0.0, 62e9).unwrap();
        let g = 1e9;
        assert!((spectral_distance_pdf(1.0 * g, &band, &a) - 2.0 / 6e9).abs() < 1e-24);
        assert!((spectral_distance_pdf(2.0 * g, &band, &a) - 2.0 / 6e9).abs() < 1e-24);
        assert!((spectral_distance_pdf(3.0 * g, &band, &a) - 1.0 / 6e9).abs() < 1e-24);
        assert_eq!(spectral_distance_pdf(4.1 * g, &band, &a), 0.0);
        assert!((spectral_distance_cdf(2.0 * g, &band, &a) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(spectral_distance_cdf(0.0, &band, &a), 0.0);
        assert_eq!(spectral_distance_cdf(4.0 * g, &band, &a), 1.0);
    }

    #[test]
    fn spectral_pdf_centered_collapses() {
        let band = Band::new(0.0_f64, 6.0, 1.0).unwrap();
        let a = ReceiverAnchor::new(0.0, 3.0).unwrap();
        assert!((spectral_distance_pdf(3.0, &band, &a) - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(spectral_distance_pdf(3.0001, &band, &a), 0.0);
    }

    #[test]
    fn obstacle_sampling_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = disk(20.0);
        assert!(sample_obstacles(&mut rng, &d, 0.0, 0.2, 0.8)
            .unwrap()
            .is_empty());
        let obs = sample_obstacles(&mut rng, &d, 0.1, 0.2, 0.8).unwrap();
        assert!(!obs.is_empty());
        assert!(obs.iter().all(|o| o.radius >= 0.2 && o.radius <= 0.8));
        assert!(obs.iter().all(|o| o.center[0].hypot(o.center[1]) <= 20.0));
    }

    #[test]
    fn shadow_no_obstacles() {
        let iv = cone_shadow_intervals([0.0, 0.0], [10.0, 0.0], 0.2, &[]).unwrap();
        assert!(iv.is_empty());
    }

    #[test]
    fn shadow_on_axis_half_base() {
        let ell = 10.0_f64;
        let theta = 0.3_f64;
        let tan = theta.tan();
        let ob = ObstacleCircle {
            center: [ell / 2.0, 0.0],
            radius: ell * tan / 4.0,
        };
        let iv = cone_shadow_intervals([0.0, 0.0], [ell, 0.0], theta, &[ob]).unwrap();
        assert_eq!(iv.len(), 1);
        let half = ell * tan / 2.0;
        assert!((iv[0].lo + half).abs() < 1e-12 && (iv[0].hi - half).abs() < 1e-12);
        assert!(!is_link_blocked(&iv, ell * tan));
    }

    #[test]
    fn shadow_near_apex_is_full() {
        let theta = 0.2_f64;
        let d = 0.5;
        let ob = ObstacleCircle {
            center: [d / (2.0 * theta.tan()), 0.0],
            radius: d,
        };
        let iv = cone_shadow_intervals([0.0, 0.0], [10.0, 0.0], theta, &[ob]).unwrap();
        assert!(is_link_blocked(&iv, 10.0 * theta.tan()));
    }

    #[test]
    fn shadow_ignores_behind_and_beyond() {
        let behind = ObstacleCircle {
            center: [-1.0, 0.0],
            radius: 0.5,
        };
        let beyond = ObstacleCircle {
            center: [11.0, 0.0],
            radius: 0.5,
        };
        let iv = cone_shadow_intervals([0.0, 0.0], [10.0, 0.0], 0.2, &[behind, beyond]).unwrap();
        assert!(iv.is_empty());
    }

    #[test]
    fn shadow_rotation_invariant() {
        // same configuration rotated by 90 degrees
        let ob = ObstacleCircle {
            center: [4.0_f64, 0.3],
            radius: 0.4,
        };
        let a = cone_shadow_intervals([0.0, 0.0], [10.0, 0.0], 0.2, &[ob]).unwrap();
        let ob_r = ObstacleCircle {
            center: [-0.3, 4.0],
            radius: 0.4,
        };
        let b = cone_shadow_intervals([0.0, 0.0], [0.0, 10.0], 0.2, &[ob_r]).unwrap();
        assert!((a[0].lo - b[0].lo).abs() < 1e-12 && (a[0].hi - b[0].hi).abs() < 1e-12);
    }

    #[test]
    fn coverage_cases() {
        let l = 1.0_f64;
        assert!(!is_link_blocked::<f64>(&[], l));
        let halves = [
            ShadowInterval { lo: -l, hi: 0.0 },
            ShadowInterval { lo: 0.0, hi: l },
        ];
        assert!(is_link_blocked(&halves, l));
        let short = [ShadowInterval {
            lo: -l,
            hi: l - 1e-9,
        }];
        assert!(!is_link_blocked(&short, l));
    }

    #[test]
    fn bad_theta_rejected() {
        assert!(cone_shadow_intervals::<f64>([0.0, 0.0], [1.0, 0.0], 0.0, &[]).is_err());
        assert!(cone_shadow_intervals::<f64>([0.0, 0.0], [1.0, 0.0], 1.6, &[]).is_err());
        assert!(cone_shadow_intervals::<f64>([1.0, 0.0], [1.0, 0.0], 0.2, &[]).is_err());
    }
}
