//! Line search on tangential velocity updates.
//!
//! Near the stiction disk `‖v_t‖ ≤ v_s` the regularized friction law has a
//! very narrow region of large curvature, so a full Newton update can jump
//! across it and oscillate. For each contact that is sliding, the update is
//! shortened either to the point of closest approach when that point lies in
//! the disk, or so that the tangential velocity turns by at most `θ_max`.

use nalgebra::Vector3;

/// Smallest scaling ever returned.
pub const MIN_ALPHA: f64 = 1e-3;

/// Default bound on the rotation of a sliding velocity within one update.
pub const DEFAULT_MAX_ANGLE: f64 = std::f64::consts::FRAC_PI_3;

const BISECTION_TOLERANCE: f64 = 1e-9;

/// Angle in `[0, π]` between two vectors.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Scaling for a single contact, in `(0, 1]` before clamping.
pub fn contact_alpha(v_t: &Vector3<f64>, dv_t: &Vector3<f64>, v_s: f64, max_angle: f64) -> f64 {
    let speed = v_t.norm();
    let step2 = dv_t.norm_squared();
    if speed <= v_s || step2 == 0.0 {
        return 1.0;
    }
    let closest = -v_t.dot(dv_t) / step2;
    if closest > 0.0 && closest < 1.0 && (v_t + dv_t * closest).norm() < v_s {
        return closest;
    }
    let landing = v_t + dv_t;
    if landing.norm() < v_s {
        return 1.0;
    }
    if angle_between(v_t, &landing) <= max_angle {
        return 1.0;
    }
    // The segment misses the origin, so the angle grows monotonically along it.
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if angle_between(v_t, &(v_t + dv_t * mid)) <= max_angle {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Global scaling over a set of `(v_t, Δv_t)` pairs sharing one `v_s`.
pub fn tals_alpha<I>(updates: I, v_s: f64, max_angle: f64) -> f64
where
    I: IntoIterator<Item = (Vector3<f64>, Vector3<f64>)>,
{
    clamp_alpha(
        updates
            .into_iter()
            .map(|(v, dv)| contact_alpha(&v, &dv, v_s, max_angle))
            .fold(1.0, f64::min),
    )
}

pub fn clamp_alpha(alpha: f64) -> f64 {
    alpha.clamp(MIN_ALPHA, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const VS: f64 = 1e-4;

    /// Closed form for the angle crossing, in the plane spanned by `v` and `Δ`.
    fn angle_oracle(v: &Vector3<f64>, dv: &Vector3<f64>, max_angle: f64) -> f64 {
        let speed = v.norm();
        let e1 = v / speed;
        let along = dv.dot(&e1);
        let across = (dv - e1 * along).norm();
        // tan θ(α) = α·across / (speed + α·along)
        let t = max_angle.tan();
        speed * t / (across - along * t)
    }

    fn bisection_oracle(v: &Vector3<f64>, dv: &Vector3<f64>, max_angle: f64) -> f64 {
        let angle = |a: f64| {
            let w = v + dv * a;
            (v.cross(&w).norm()).atan2(v.dot(&w))
        };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if angle(mid) <= max_angle {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn stuck_or_zero_updates_are_untouched() {
        let v = Vector3::new(5e-5, 0.0, 0.0);
        assert_eq!(contact_alpha(&v, &Vector3::new(-3.0, 1.0, 0.0), VS, PI / 3.0), 1.0);
        let v = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(contact_alpha(&v, &Vector3::zeros(), VS, PI / 3.0), 1.0);
    }

    #[test]
    fn direction_reversal_stops_at_the_disk() {
        let v = Vector3::new(1.0, 0.0, 0.0);
        let dv = Vector3::new(-2.0, 0.0, 0.0);
        let alpha = contact_alpha(&v, &dv, VS, PI / 3.0);
        assert!((alpha - 0.5).abs() < 1e-12);
        assert!((v + dv * alpha).norm() < VS);
    }

    #[test]
    fn landing_inside_the_disk_is_accepted() {
        let v = Vector3::new(1.0, 0.0, 0.0);
        let dv = Vector3::new(-1.0 + 5e-5, 0.0, 0.0);
        assert_eq!(contact_alpha(&v, &dv, VS, PI / 3.0), 1.0);
    }

    #[test]
    fn quarter_turn_is_cut_to_sixty_degrees() {
        let v = Vector3::new(1.0, 0.0, 0.0);
        let dv = Vector3::new(-1.0, 1.0, 0.0);
        let alpha = contact_alpha(&v, &dv, VS, PI / 3.0);
        let expected = angle_oracle(&v, &dv, PI / 3.0);
        assert!((alpha - expected).abs() < 1e-6, "{alpha} vs {expected}");
        assert!(angle_between(&v, &(v + dv * alpha)) <= PI / 3.0 + 1e-9);
    }

    #[test]
    fn crossing_lands_at_the_disk_centre() {
        let v = Vector3::new(2e-4, 0.0, 0.0);
        let dv = Vector3::new(-4e-4, 0.0, 0.0);
        let alpha = contact_alpha(&v, &dv, VS, PI / 3.0);
        assert_eq!(alpha, 0.5);
        assert_eq!((v + dv * alpha).dot(&dv), 0.0);
        let v = Vector3::new(5e-3, 0.0, 0.0);
        assert_eq!(contact_alpha(&v, &Vector3::new(1e-3, 0.0, 0.0), VS, PI / 3.0), 1.0);
    }

    #[test]
    fn steep_turn_matches_bisection() {
        let v = Vector3::new(1e-2, 0.0, 0.0);
        let dv = Vector3::new(-1e-2, 1e-2 * (PI / 2.5).tan(), 0.0);
        let alpha = contact_alpha(&v, &dv, VS, PI / 3.0);
        assert!(alpha < 1.0);
        assert!((alpha - bisection_oracle(&v, &dv, PI / 3.0)).abs() < 1e-6);
    }

    #[test]
    fn global_alpha_is_clamped() {
        let tiny = vec![(Vector3::new(1.0, 0.0, 0.0), Vector3::new(-1e5, 0.0, 0.0))];
        assert_eq!(tals_alpha(tiny, VS, PI / 3.0), MIN_ALPHA);
        assert_eq!(tals_alpha(Vec::new(), VS, PI / 3.0), 1.0);
    }

    fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
        (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn alpha_is_in_range_and_respects_the_angle(v in vec3(2.0), dv in vec3(5.0)) {
            let alpha = contact_alpha(&v, &dv, VS, PI / 3.0);
            prop_assert!(alpha > 0.0 && alpha <= 1.0);
            let moved = v + dv * alpha;
            if v.norm() > VS && moved.norm() >= VS {
                prop_assert!(angle_between(&v, &moved) <= PI / 3.0 + 1e-6);
            }
        }

        #[test]
        fn angle_cut_matches_both_oracles(v in vec3(2.0), dv in vec3(5.0)) {
            prop_assume!(v.norm() > 0.1);
            let alpha = contact_alpha(&v, &dv, VS, PI / 3.0);
            let closest = -v.dot(&dv) / dv.norm_squared();
            let crosses = closest > 0.0 && closest < 1.0 && (v + dv * closest).norm() < VS;
            let lands = (v + dv).norm() < VS;
            prop_assume!(!crosses && !lands);
            if angle_between(&v, &(v + dv)) > PI / 3.0 {
                prop_assert!((alpha - bisection_oracle(&v, &dv, PI / 3.0)).abs() < 1e-6);
                prop_assert!((alpha - angle_oracle(&v, &dv, PI / 3.0)).abs() < 1e-6);
            } else {
                prop_assert_eq!(alpha, 1.0);
            }
        }

        #[test]
        fn global_alpha_is_the_clamped_minimum(pairs in proptest::collection::vec((vec3(2.0), vec3(5.0)), 0..6)) {
            let each: Vec<f64> = pairs.iter().map(|(v, dv)| contact_alpha(v, dv, VS, PI / 3.0)).collect();
            let global = tals_alpha(pairs.clone(), VS, PI / 3.0);
            let expected = each.iter().copied().fold(1.0, f64::min).max(MIN_ALPHA);
            prop_assert_eq!(global, expected);
        }
    }
}
