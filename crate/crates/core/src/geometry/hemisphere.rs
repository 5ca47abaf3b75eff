//! Hemisphericity testing.
//!
//! A finite set of unit vectors lies in an open hemisphere iff the origin is
//! outside its convex hull. Both questions are answered by the minimum-norm
//! point `p*` of the hull: if `p* != 0` then `u = p*/|p*|` satisfies
//! `<s_i, u> >= |p*|` for every point, and no unit vector does better, so
//! `|p*|` is the maximal margin. If `p* = 0`, the convex weights reaching it
//! are a certificate that the origin lies in the hull.
//!
//! `p*` is computed with Wolfe's active-set algorithm, which terminates in
//! finitely many steps; tolerances only guard against rounding.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SphereVector;
use crate::error::{invalid, Result};
use crate::special::{dot, norm_sq};

pub const DEFAULT_TOL: f64 = 1e-9;

const MAX_MAJOR_ITERATIONS: usize = 100_000;
const OPTIMALITY_TOL: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-12;

/// Outcome of [`is_hemispherical`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HemisphereWitness {
    pub is_hemispherical: bool,
    /// Unit axis `u` with `<s_i, u> >= margin` for all points; present iff
    /// `is_hemispherical`.
    pub axis: Option<Vec<f64>>,
    /// Smallest `<s_i, u>` over the points (normalized units); 0 when not
    /// hemispherical.
    pub margin: f64,
    /// Convex weights `lambda` with `|sum lambda_i s_i| <= tol`, present when
    /// the origin was certified to lie in the hull.
    pub hull_weights: Option<Vec<f64>>,
    /// Set when neither a witness nor a certificate was obtained within the
    /// iteration cap; the set is then classified as not hemispherical.
    pub undecided: bool,
}

struct MinNormPoint {
    point: Vec<f64>,
    weights: Vec<f64>,
    converged: bool,
}

/// Minimum-norm point of `conv(points)`.
fn min_norm_point(points: &[&[f64]], stop_norm: f64) -> MinNormPoint {
    let dim = points[0].len();
    let count = points.len();
    let max_norm_sq = points.iter().map(|p| norm_sq(p)).fold(0.0, f64::max);

    let start = (0..count)
        .min_by(|&a, &b| norm_sq(points[a]).total_cmp(&norm_sq(points[b])))
        .unwrap();
    let mut corral: Vec<usize> = vec![start];
    let mut weights: Vec<f64> = vec![1.0];
    let mut x = points[start].to_vec();

    let combine = |corral: &[usize], w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&idx, &wi) in corral.iter().zip(w) {
            for (o, p) in out.iter_mut().zip(points[idx]) {
                *o += wi * p;
            }
        }
        out
    };

    let mut converged = false;
    for _ in 0..MAX_MAJOR_ITERATIONS {
        let x_sq = norm_sq(&x);
        if x_sq.sqrt() <= stop_norm {
            converged = true;
            break;
        }
        let (j, best) = (0..count)
            .map(|i| (i, dot(&x, points[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if best >= x_sq - OPTIMALITY_TOL * max_norm_sq || corral.contains(&j) {
            converged = true;
            break;
        }
        corral.push(j);
        weights.push(0.0);

        // minor cycle
        loop {
            let Some(alpha) = affine_min_weights(points, &corral) else {
                // affinely dependent corral: rounding has pushed us onto a
                // degenerate face
                return MinNormPoint {
                    point: x,
                    weights: scatter(count, &corral, &weights),
                    converged: false,
                };
            };
            if alpha.iter().all(|&a| a > WEIGHT_TOL) {
                weights = alpha;
                x = combine(&corral, &weights);
                break;
            }
            let mut theta: f64 = 1.0;
            for (&w, &a) in weights.iter().zip(&alpha) {
                if a <= WEIGHT_TOL && a < w {
                    theta = theta.min(w / (w - a));
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = (1.0 - theta) * *w + theta * a;
            }
            // drop vanished weights, always at least the blocking one
            let min_pos = weights
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            let mut keep_c = Vec::with_capacity(corral.len());
            let mut keep_w = Vec::with_capacity(corral.len());
            for (i, (&c, &w)) in corral.iter().zip(&weights).enumerate() {
                if i != min_pos && w > WEIGHT_TOL {
                    keep_c.push(c);
                    keep_w.push(w);
                }
            }
            let total: f64 = keep_w.iter().sum();
            keep_w.iter_mut().for_each(|w| *w /= total);
            corral = keep_c;
            weights = keep_w;
            x = combine(&corral, &weights);
            if corral.len() == 1 {
                break;
            }
        }
    }

    MinNormPoint {
        point: x,
        weights: scatter(count, &corral, &weights),
        converged,
    }
}

fn scatter(count: usize, corral: &[usize], weights: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; count];
    for (&c, &w) in corral.iter().zip(weights) {
        full[c] = w;
    }
    full
}

/// Weights of the minimum-norm point of the affine hull of the corral:
/// `argmin |sum a_k p_k|^2` subject to `sum a_k = 1`. Solved through the
/// positive definite system `(G + 11^T) a' = 1`, `a = a' / sum a'`, which is
/// nonsingular exactly when the corral is affinely independent.
fn affine_min_weights(points: &[&[f64]], corral: &[usize]) -> Option<Vec<f64>> {
    let k = corral.len();
    let gram = DMatrix::from_fn(k, k, |r, c| dot(points[corral[r]], points[corral[c]]) + 1.0);
    let ones = DVector::from_element(k, 1.0);
    let sol = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&ones),
        None => gram.lu().solve(&ones)?,
    };
    let total: f64 = sol.iter().sum();
    if !total.is_finite() || total.abs() < f64::EPSILON {
        return None;
    }
    Some(sol.iter().map(|v| v / total).collect())
}

/// Hemisphericity test on vectors that are already on the unit sphere.
///
/// Returns `true` iff some unit `u` satisfies `<s_i, u> > tol` for all `i`.
pub fn is_hemispherical_unit(points: &[&[f64]], tol: f64) -> Result<HemisphereWitness> {
    if points.is_empty() {
        return Err(invalid("empty point set"));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance {tol} must be positive")));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(invalid("points have different dimensions"));
    }

    let mnp = min_norm_point(points, tol);
    let norm = norm_sq(&mnp.point).sqrt();
    if norm > 0.0 {
        let axis: Vec<f64> = mnp.point.iter().map(|c| c / norm).collect();
        let margin = points
            .iter()
            .map(|p| dot(p, &axis))
            .fold(f64::INFINITY, f64::min);
        if margin > tol {
            return Ok(HemisphereWitness {
                is_hemispherical: true,
                axis: Some(axis),
                margin,
                hull_weights: None,
                undecided: false,
            });
        }
    }
    let certified = norm <= tol && mnp.converged;
    Ok(HemisphereWitness {
        is_hemispherical: false,
        axis: None,
        margin: 0.0,
        hull_weights: certified.then_some(mnp.weights),
        undecided: !certified && !mnp.converged,
    })
}

/// Hemisphericity test (open hemisphere) on points of a common sphere.
pub fn is_hemispherical(points: &[SphereVector], tol: f64) -> Result<HemisphereWitness> {
    let Some(first) = points.first() else {
        return Err(invalid("empty point set"));
    };
    let (n, radius) = (first.dim(), first.radius());
    if points
        .iter()
        .any(|p| p.dim() != n || (p.radius() - radius).abs() > 1e-12 * radius)
    {
        return Err(invalid("points do not share dimension and radius"));
    }
    let unit: Vec<Vec<f64>> = points.iter().map(SphereVector::normalized).collect();
    let refs: Vec<&[f64]> = unit.iter().map(Vec::as_slice).collect();
    is_hemispherical_unit(&refs, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_uniform_sphere;
    use crate::rng::stream;
    use std::f64::consts::PI;

    fn unit(v: &[f64]) -> SphereVector {
        SphereVector::new(v.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn single_point_is_its_own_witness() {
        let w = is_hemispherical(&[unit(&[1.0, 0.0, 0.0])], DEFAULT_TOL).unwrap();
        assert!(w.is_hemispherical);
        assert_eq!(w.axis.as_deref(), Some(&[1.0, 0.0, 0.0][..]));
        assert!((w.margin - 1.0).abs() < 1e-15);
    }

    #[test]
    fn antipodal_pair_contains_origin() {
        let mut rng = stream(2);
        for _ in 0..50 {
            let x = sample_uniform_sphere(5, 1.0, &mut rng).unwrap();
            let neg: Vec<f64> = x.coords().iter().map(|c| -c).collect();
            let w = is_hemispherical(&[x.clone(), unit(&neg)], DEFAULT_TOL).unwrap();
            assert!(!w.is_hemispherical);
            let lam = w.hull_weights.expect("certificate");
            assert!((lam[0] - 0.5).abs() < 1e-9 && (lam[1] - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_set_is_rejected() {
        assert!(is_hemispherical(&[], DEFAULT_TOL).is_err());
        assert!(is_hemispherical(&[unit(&[1.0, 0.0])], 0.0).is_err());
    }

    #[test]
    fn regular_simplex_vertices_are_not_hemispherical() {
        let pts: Vec<SphereVector> = (0..3)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 3.0;
                unit(&[a.cos(), a.sin()])
            })
            .collect();
        let w = is_hemispherical(&pts, DEFAULT_TOL).unwrap();
        assert!(!w.is_hemispherical);
        assert!(!w.undecided);
    }

    #[test]
    fn witness_satisfies_margin_on_random_sets() {
        let mut rng = stream(11);
        for _ in 0..200 {
            let pts: Vec<SphereVector> = (0..6)
                .map(|_| sample_uniform_sphere(4, 3.0, &mut rng).unwrap())
                .collect();
            let w = is_hemispherical(&pts, DEFAULT_TOL).unwrap();
            if let Some(axis) = &w.axis {
                assert!((norm_sq(axis).sqrt() - 1.0).abs() < 1e-9);
                for p in &pts {
                    assert!(dot(&p.normalized(), axis) >= w.margin - 1e-15);
                }
                assert!(w.margin > DEFAULT_TOL);
            } else {
                let lam = w.hull_weights.expect("certificate when not hemispherical");
                let mut combo = [0.0; 4];
                for (p, l) in pts.iter().zip(&lam) {
                    for (c, x) in combo.iter_mut().zip(p.normalized()) {
                        *c += l * x;
                    }
                }
                assert!(norm_sq(&combo).sqrt() <= DEFAULT_TOL);
                assert!(lam.iter().all(|&l| l >= 0.0));
            }
        }
    }
}
