use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hemicap::geometry::{
    cap_hausdorff_distance, is_hemispherical, is_hemispherical_unit, projection_log_pdf,
    sample_hemisphere, sample_uniform_sphere, DEFAULT_TOL,
};

fn e1(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    v
}

#[test]
fn first_coordinate_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // n = 3: the first coordinate is uniform on [-1, 1] (Archimedes)
    let draws = 40_000;
    let (mut sum, mut sum_sq, mut hemi) = (0.0, 0.0, 0.0);
    let axis = e1(3);
    for _ in 0..draws {
        let t = sample_uniform_sphere(3, 1.0, &mut rng).unwrap().coords()[0];
        sum += t;
        sum_sq += t * t;
        hemi += sample_hemisphere(3, 1.0, &axis, &mut rng).unwrap().coords()[0];
    }
    let d = draws as f64;
    assert!((sum / d).abs() < 0.015);
    assert!((sum_sq / d - 1.0 / 3.0).abs() < 0.01);
    assert!((hemi / d - 0.5).abs() < 0.01);
}

#[test]
fn scaled_hemisphere_projection_is_half_normal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 400;
    let axis = e1(n);
    let draws = 4000;
    let mean = (0..draws)
        .map(|_| {
            let s = sample_hemisphere(n, (n as f64).sqrt(), &axis, &mut rng).unwrap();
            s.coords()[0]
        })
        .sum::<f64>()
        / draws as f64;
    // sqrt(n) <s, u> -> |N(0,1)|, mean sqrt(2/pi)
    assert!((mean - (2.0 / PI).sqrt()).abs() < 0.03, "{mean}");
}

#[test]
fn radius_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [2, 5, 64, 1000] {
        let r = (n as f64 * 2.5).sqrt();
        let s = sample_uniform_sphere(n, r, &mut rng).unwrap();
        let norm = s.coords().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - r).abs() <= 1e-9 * r);
    }
}

#[test]
fn projection_density_integrates_to_one_with_variance_one_over_n() {
    for n in [3usize, 5, 10, 50, 200] {
        // t = sin(theta) removes the endpoint singularity of (1 - t^2)^((n-3)/2)
        let steps = 20_000;
        let h = PI / steps as f64;
        let (mut mass, mut second) = (0.0, 0.0);
        for i in 0..=steps {
            let theta = -PI / 2.0 + i as f64 * h;
            let w = if i == 0 || i == steps {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let t = theta.sin();
            let f = projection_log_pdf(t, n).unwrap().exp() * theta.cos();
            mass += w * f;
            second += w * f * t * t;
        }
        mass *= h / 3.0;
        second *= h / 3.0;
        assert!((mass - 1.0).abs() < 1e-6, "n={n} mass={mass}");
        assert!((second - 1.0 / n as f64).abs() < 1e-6, "n={n} var={second}");
    }
}

#[test]
fn hausdorff_distance_values() {
    assert_eq!(cap_hausdorff_distance(0.0).unwrap(), 0.0);
    assert!((cap_hausdorff_distance(-1.0).unwrap() - PI / 2.0).abs() < 1e-15);
    assert!((cap_hausdorff_distance(-0.1).unwrap() - 0.100_167_421_161_56).abs() < 1e-12);
    assert!(cap_hausdorff_distance(0.1).is_err());
}

/// On the circle a point set is hemispherical iff some angular gap between
/// consecutive points exceeds pi.
fn circle_gap_oracle(angles: &[f64]) -> bool {
    let mut a: Vec<f64> = angles.iter().map(|x| x.rem_euclid(2.0 * PI)).collect();
    a.sort_by(f64::total_cmp);
    let mut max_gap = a[0] + 2.0 * PI - a[a.len() - 1];
    for w in a.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    max_gap > PI
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn circle_hemisphericity_matches_gap_oracle(angles in prop::collection::vec(0.0..2.0 * PI, 1..9)) {
        let oracle = circle_gap_oracle(&angles);
        let pts: Vec<Vec<f64>> = angles.iter().map(|a| vec![a.cos(), a.sin()]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        // skip near-boundary configurations where rounding decides
        let mut a: Vec<f64> = angles.iter().map(|x| x.rem_euclid(2.0 * PI)).collect();
        a.sort_by(f64::total_cmp);
        let mut gaps: Vec<f64> = a.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.push(a[0] + 2.0 * PI - a[a.len() - 1]);
        prop_assume!(gaps.iter().all(|g| (g - PI).abs() > 1e-6));
        let w = is_hemispherical_unit(&refs, DEFAULT_TOL).unwrap();
        prop_assert_eq!(w.is_hemispherical, oracle);
    }

    #[test]
    fn at_most_n_points_are_hemispherical(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = 1 + (seed as usize % n);
        let pts: Vec<_> = (0..count)
            .map(|_| sample_uniform_sphere(n, 3.0, &mut rng).unwrap())
            .collect();
        prop_assert!(is_hemispherical(&pts, DEFAULT_TOL).unwrap().is_hemispherical);
    }

    #[test]
    fn witness_or_certificate_is_valid(seed in any::<u64>(), n in 2usize..6, count in 1usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<_> = (0..count)
            .map(|_| sample_uniform_sphere(n, 1.0, &mut rng).unwrap())
            .collect();
        let w = is_hemispherical(&pts, DEFAULT_TOL).unwrap();
        prop_assert!(!w.undecided);
        if w.is_hemispherical {
            let axis = w.axis.as_ref().unwrap();
            prop_assert!((axis.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-9);
            for p in &pts {
                let ip: f64 = p.coords().iter().zip(axis).map(|(a, b)| a * b).sum();
                prop_assert!(ip >= w.margin - 1e-9 && ip > 0.0);
            }
        } else {
            let lambda = w.hull_weights.as_ref().unwrap();
            prop_assert!((lambda.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(lambda.iter().all(|&l| l >= -1e-12));
            let mut combo = vec![0.0; n];
            for (l, p) in lambda.iter().zip(&pts) {
                for (c, x) in combo.iter_mut().zip(p.coords()) {
                    *c += l * x;
                }
            }
            prop_assert!(combo.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-7);
        }
    }

    #[test]
    fn hemisphere_samples_stay_in_hemisphere(seed in any::<u64>(), n in 2usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let axis = e1(n);
        let s = sample_hemisphere(n, 2.0, &axis, &mut rng).unwrap();
        prop_assert!(s.coords()[0] >= 0.0);
    }

    #[test]
    fn projection_density_is_symmetric(t in -0.999f64..0.999, n in 2usize..500) {
        let a = projection_log_pdf(t, n).unwrap();
        let b = projection_log_pdf(-t, n).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
