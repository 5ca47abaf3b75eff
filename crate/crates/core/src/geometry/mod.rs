//! Sampling and geometric predicates on the sphere of radius `sqrt(nP)`.

mod hemisphere;

pub use hemisphere::{is_hemispherical, is_hemispherical_unit, HemisphereWitness, DEFAULT_TOL};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{invalid, Error, Result};
use crate::special::{dot, ln_gamma, norm_sq};

/// Relative tolerance on `|x| / radius`.
pub const NORM_TOL: f64 = 1e-9;
/// Tolerance on the norm of a supplied axis.
pub const AXIS_TOL: f64 = 1e-9;

const MAX_REDRAWS: usize = 8;

/// A point on the sphere of radius `radius` in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereVector {
    coords: Vec<f64>,
    radius: f64,
}

impl SphereVector {
    pub fn new(coords: Vec<f64>, radius: f64) -> Result<Self> {
        if coords.len() < 2 {
            return Err(invalid(format!("dimension {} < 2", coords.len())));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("radius {radius} must be positive")));
        }
        let norm = norm_sq(&coords).sqrt();
        if ((norm / radius) - 1.0).abs() > NORM_TOL {
            return Err(invalid(format!(
                "norm {norm} does not match radius {radius}"
            )));
        }
        Ok(Self { coords, radius })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// The point scaled onto the unit sphere.
    pub fn normalized(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c / self.radius).collect()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

fn check_dim_radius(n: usize, radius: f64) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("dimension {n} < 2")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("radius {radius} must be positive")));
    }
    Ok(())
}

pub(crate) fn check_unit_axis(axis: &[f64]) -> Result<()> {
    let norm = norm_sq(axis).sqrt();
    if (norm - 1.0).abs() > AXIS_TOL {
        return Err(invalid(format!("axis norm {norm} is not 1")));
    }
    Ok(())
}

/// Fills `out` with `radius * G / |G|`, `G` standard Gaussian.
pub(crate) fn fill_uniform_sphere<R: Rng + ?Sized>(
    out: &mut [f64],
    radius: f64,
    rng: &mut R,
) -> Result<()> {
    for _ in 0..=MAX_REDRAWS {
        for c in out.iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        let norm = norm_sq(out).sqrt();
        if norm > 0.0 && norm.is_finite() {
            let scale = radius / norm;
            out.iter_mut().for_each(|c| *c *= scale);
            return Ok(());
        }
    }
    Err(Error::Sampling(format!(
        "Gaussian draw of dimension {} had zero norm after {MAX_REDRAWS} redraws",
        out.len()
    )))
}

/// Reflects `x` into the closed hemisphere about `axis` if it lies on the
/// wrong side. Returns `false` when rounding left the reflected point with a
/// negative projection, in which case the caller redraws.
pub(crate) fn reflect_into_hemisphere(x: &mut [f64], axis: &[f64], radius: f64) -> bool {
    let proj = dot(x, axis);
    if proj >= 0.0 {
        return true;
    }
    for (c, a) in x.iter_mut().zip(axis) {
        *c -= 2.0 * proj * a;
    }
    let scale = radius / norm_sq(x).sqrt();
    x.iter_mut().for_each(|c| *c *= scale);
    dot(x, axis) >= 0.0
}

pub(crate) fn fill_hemisphere<R: Rng + ?Sized>(
    out: &mut [f64],
    radius: f64,
    axis: &[f64],
    rng: &mut R,
) -> Result<()> {
    for _ in 0..=MAX_REDRAWS {
        fill_uniform_sphere(out, radius, rng)?;
        if reflect_into_hemisphere(out, axis, radius) {
            return Ok(());
        }
    }
    Err(Error::Sampling(
        "reflection kept a negative projection after repeated redraws".into(),
    ))
}

/// Uniform draw on the sphere of radius `radius` in `R^n`.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(
    n: usize,
    radius: f64,
    rng: &mut R,
) -> Result<SphereVector> {
    check_dim_radius(n, radius)?;
    let mut coords = vec![0.0; n];
    fill_uniform_sphere(&mut coords, radius, rng)?;
    Ok(SphereVector { coords, radius })
}

/// Uniform draw on the closed hemisphere `{x : <x, axis> >= 0}`, obtained by
/// reflecting a full-sphere draw through the hyperplane orthogonal to `axis`.
pub fn sample_hemisphere<R: Rng + ?Sized>(
    n: usize,
    radius: f64,
    axis: &[f64],
    rng: &mut R,
) -> Result<SphereVector> {
    check_dim_radius(n, radius)?;
    if axis.len() != n {
        return Err(invalid(format!(
            "axis has dimension {}, expected {n}",
            axis.len()
        )));
    }
    check_unit_axis(axis)?;
    let mut coords = vec![0.0; n];
    fill_hemisphere(&mut coords, radius, axis, rng)?;
    Ok(SphereVector { coords, radius })
}

/// Hausdorff distance (radians) between the cap `{<s, u> >= tau}` and the
/// hemisphere `{<s, u> >= 0}`: `arccos(tau) - pi/2`.
pub fn cap_hausdorff_distance(tau: f64) -> Result<f64> {
    if !(-1.0..=0.0).contains(&tau) {
        return Err(Error::Domain {
            what: "tau",
            value: tau,
            domain: "[-1, 0]",
        });
    }
    Ok(tau.acos() - FRAC_PI_2)
}

/// Log-density of one coordinate of a uniform point on the unit sphere in
/// `R^n`:
///
/// ```text
/// f(t) = Gamma(n/2) / (sqrt(pi) Gamma((n-1)/2)) * (1 - t^2)^((n-3)/2),  |t| < 1
/// ```
///
/// Returns `-inf` for `|t| >= 1` (support is the open interval).
pub fn projection_log_pdf(t: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(invalid(format!("dimension {n} < 2")));
    }
    if t.is_nan() {
        return Err(invalid("t is NaN"));
    }
    if t.abs() >= 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let nf = n as f64;
    let log_norm = ln_gamma(nf / 2.0) - ln_gamma((nf - 1.0) / 2.0) - 0.5 * PI.ln();
    // ln(1 - t^2) = ln1p(-t^2)
    Ok(log_norm + 0.5 * (nf - 3.0) * (-t * t).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn uniform_draws_have_requested_radius() {
        let mut rng = stream(1);
        let p = sample_uniform_sphere(2, 1.0, &mut rng).unwrap();
        assert!((norm_sq(p.coords()).sqrt() - 1.0).abs() < 1e-9);
        let p = sample_uniform_sphere(100, 10.0, &mut rng).unwrap();
        assert!((norm_sq(p.coords()).sqrt() - 10.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_dimension_and_radius() {
        let mut rng = stream(1);
        assert!(sample_uniform_sphere(1, 1.0, &mut rng).is_err());
        assert!(sample_uniform_sphere(3, 0.0, &mut rng).is_err());
        assert!(sample_hemisphere(3, 1.0, &[1.0, 1.0, 0.0], &mut rng).is_err());
        assert!(sample_hemisphere(3, 1.0, &[1.0, 0.0], &mut rng).is_err());
    }

    #[test]
    fn hemisphere_sign_is_exact() {
        let mut rng = stream(5);
        let axis = [0.0, 0.6, 0.8, 0.0];
        for _ in 0..2000 {
            let p = sample_hemisphere(4, 2.0, &axis, &mut rng).unwrap();
            assert!(dot(p.coords(), &axis) >= 0.0);
        }
    }

    #[test]
    fn sphere_vector_validates_norm() {
        assert!(SphereVector::new(vec![3.0, 4.0], 5.0).is_ok());
        assert!(SphereVector::new(vec![3.0, 4.0], 5.1).is_err());
        let v = SphereVector::new(vec![3.0, 4.0], 5.0).unwrap();
        assert_eq!(v.normalized(), vec![0.6, 0.8]);
    }

    #[test]
    fn hausdorff_distance_values() {
        assert_eq!(cap_hausdorff_distance(0.0).unwrap(), 0.0);
        assert!((cap_hausdorff_distance(-1.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((cap_hausdorff_distance(-0.1).unwrap() - 0.100_167_421_161_56).abs() < 1e-12);
        assert!(cap_hausdorff_distance(0.1).is_err());
        assert!(cap_hausdorff_distance(-1.5).is_err());
    }

    #[test]
    fn projection_pdf_closed_forms() {
        // n = 3: uniform on (-1, 1)
        assert!((projection_log_pdf(0.3, 3).unwrap() - 0.5f64.ln()).abs() < 1e-14);
        // n = 2: arcsine law, f(0) = 1/pi
        assert!((projection_log_pdf(0.0, 2).unwrap().exp() - 1.0 / PI).abs() < 1e-14);
        assert_eq!(projection_log_pdf(1.0, 5).unwrap(), f64::NEG_INFINITY);
        assert_eq!(projection_log_pdf(-1.2, 5).unwrap(), f64::NEG_INFINITY);
        assert!(projection_log_pdf(0.0, 1).is_err());
    }
}
