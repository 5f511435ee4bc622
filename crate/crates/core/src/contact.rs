//! Pointwise compliant contact laws.
//!
//! The normal force follows a Hunt–Crossley law that is continuous in both
//! penetration and penetration rate,
//!
//! ```text
//! π = k · (1 + d·δ̇)₊ · (δ)₊
//! ```
//!
//! and friction is a regularized Coulomb law whose coefficient ramps linearly
//! up to `μ` over the stiction velocity `v_s`:
//!
//! ```text
//! f_t = −μ̃(‖v_t‖ / v_s) · π · v̂_t,     μ̃(s) = μ·min(s, 1)
//! ```
//!
//! Every gradient the solvers need is provided analytically here. All
//! functions are pure.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Below this slip speed (m/s) the slip direction is never formed.
pub const SLIP_DIRECTION_EPSILON: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContactError {
    #[error("contact stiffness must be positive, got {0}")]
    Stiffness(f64),
    #[error("contact damping must be non-negative, got {0}")]
    Damping(f64),
    #[error("friction coefficient must be non-negative, got {0}")]
    Friction(f64),
    #[error("stiction velocity must be positive, got {0}")]
    StictionVelocity(f64),
}

/// Material parameters of a single contact point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParameters {
    /// Stiffness `k` in N/m.
    pub stiffness: f64,
    /// Hunt–Crossley dissipation `d` in s/m.
    pub damping: f64,
    /// Coulomb friction coefficient `μ`.
    pub mu: f64,
    /// Regularization (stiction) velocity `v_s` in m/s.
    pub stiction_velocity: f64,
}

impl ContactParameters {
    pub fn new(
        stiffness: f64,
        damping: f64,
        mu: f64,
        stiction_velocity: f64,
    ) -> Result<Self, ContactError> {
        let params = Self {
            stiffness,
            damping,
            mu,
            stiction_velocity,
        };
        params.validate()?;
        Ok(params)
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ContactError> {
        // Written so that NaN fails every check.
        if !(self.stiffness > 0.0) {
            return Err(ContactError::Stiffness(self.stiffness));
        }
        if !(self.damping >= 0.0) {
            return Err(ContactError::Damping(self.damping));
        }
        if !(self.mu >= 0.0) {
            return Err(ContactError::Friction(self.mu));
        }
        if !(self.stiction_velocity > 0.0) {
            return Err(ContactError::StictionVelocity(self.stiction_velocity));
        }
        Ok(())
    }
}

/// Contact force split into the normal magnitude and the tangential vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactForce {
    /// Normal force magnitude `π` (N), never negative.
    pub normal: f64,
    /// Tangential (friction) force in the contact tangent plane (N).
    pub tangential: Vector3<f64>,
}

impl ContactForce {
    /// Full force on body A given the contact normal.
    pub fn total(&self, normal: &Vector3<f64>) -> Vector3<f64> {
        normal * self.normal + self.tangential
    }
}

/// Regularized friction coefficient `μ̃(s)` for slip ratio `s = ‖v_t‖/v_s`.
pub fn regularized_mu(s: f64, mu: f64) -> f64 {
    if s <= 1.0 {
        mu * s
    } else {
        mu
    }
}

/// Slope `dμ̃/ds`. At the kink `s = 1` the stiction-side value is returned.
pub fn regularized_mu_slope(s: f64, mu: f64) -> f64 {
    if s <= 1.0 {
        mu
    } else {
        0.0
    }
}

/// Hunt–Crossley normal force for penetration `delta` and rate `delta_dot`.
pub fn normal_force(delta: f64, delta_dot: f64, params: &ContactParameters) -> f64 {
    let dissipation = (1.0 + params.damping * delta_dot).max(0.0);
    params.stiffness * dissipation * delta.max(0.0)
}

/// Normal force as a function of the separation velocity `v_n`, using the
/// first-order penetration estimate `δ ≈ δ₀ − h·v_n` and `δ̇ = −v_n`.
///
/// Returns `(π, dπ/dv_n)`. The gradient is non-positive, and is zero unless
/// both clamped factors are strictly active.
pub fn normal_force_of_vn(
    delta0: f64,
    v_n: f64,
    h: f64,
    params: &ContactParameters,
) -> (f64, f64) {
    let dissipation = 1.0 - params.damping * v_n;
    let penetration = delta0 - h * v_n;
    if dissipation > 0.0 && penetration > 0.0 {
        let pi = params.stiffness * dissipation * penetration;
        let gradient =
            -params.stiffness * (params.damping * penetration + h * dissipation);
        (pi, gradient)
    } else {
        (0.0, 0.0)
    }
}

/// Unit slip direction, or `None` when the slip speed is numerically zero.
fn slip_direction(v_t: &Vector3<f64>) -> Option<(Vector3<f64>, f64)> {
    let speed = v_t.norm();
    if speed < SLIP_DIRECTION_EPSILON {
        None
    } else {
        Some((v_t / speed, speed))
    }
}

/// Regularized friction force `−μ̃(‖v_t‖/v_s)·π·v̂_t`.
pub fn friction_force(v_t: &Vector3<f64>, pi: f64, params: &ContactParameters) -> Vector3<f64> {
    match slip_direction(v_t) {
        None => Vector3::zeros(),
        Some((dir, speed)) => {
            let mu = regularized_mu(speed / params.stiction_velocity, params.mu);
            dir * (-mu * pi)
        }
    }
}

/// Gradient `∇_{v_t} f_t` (3×3, N·s/m) of the friction force at fixed `π`.
///
/// Inside the stiction disk this is the constant `−π·(μ/v_s)·P⊥`. Outside it
/// only the component transverse to the slip direction survives.
pub fn friction_jacobian_vt(
    v_t: &Vector3<f64>,
    pi: f64,
    n_hat: &Vector3<f64>,
    params: &ContactParameters,
) -> Matrix3<f64> {
    let tangent_projector = Matrix3::identity() - n_hat * n_hat.transpose();
    let v_s = params.stiction_velocity;
    let speed = v_t.norm();
    if speed <= v_s {
        return tangent_projector * (-pi * params.mu / v_s);
    }
    let dir = v_t / speed;
    let s = speed / v_s;
    let along = dir * dir.transpose();
    let transverse = tangent_projector - along;
    let mu = regularized_mu(s, params.mu);
    let slope = regularized_mu_slope(s, params.mu);
    (transverse * (mu / speed) + along * (slope / v_s)) * -pi
}

/// Gradient `∇_{v_n} f_t` (N·s/m) through the normal force dependence on `v_n`.
pub fn friction_jacobian_vn(
    v_t: &Vector3<f64>,
    dpi_dvn: f64,
    params: &ContactParameters,
) -> Vector3<f64> {
    match slip_direction(v_t) {
        None => Vector3::zeros(),
        Some((dir, speed)) => {
            let mu = regularized_mu(speed / params.stiction_velocity, params.mu);
            dir * (-mu * dpi_dvn)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(k: f64, d: f64, mu: f64, v_s: f64) -> ContactParameters {
        ContactParameters::new(k, d, mu, v_s).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(ContactParameters::new(0.0, 0.0, 1.0, 1e-4).is_err());
        assert!(ContactParameters::new(1.0, -1.0, 1.0, 1e-4).is_err());
        assert!(ContactParameters::new(1.0, 0.0, -0.1, 1e-4).is_err());
        assert!(ContactParameters::new(1.0, 0.0, 0.1, 0.0).is_err());
        assert!(ContactParameters::new(f64::NAN, 0.0, 0.1, 1e-4).is_err());
        assert!(ContactParameters::new(1.0, 0.0, 0.0, 1e-4).is_ok());
    }

    #[test]
    fn regularized_coefficient_branches() {
        assert_eq!(regularized_mu(0.0, 1.0), 0.0);
        assert_eq!(regularized_mu(0.5, 1.0), 0.5);
        assert_eq!(regularized_mu(2.0, 0.1), 0.1);
        assert_eq!(regularized_mu_slope(0.3, 0.1), 0.1);
        assert_eq!(regularized_mu_slope(5.0, 1.0), 0.0);
        assert_eq!(regularized_mu_slope(1.0, 0.7), 0.7);
    }

    #[test]
    fn hunt_crossley_values() {
        let p = params(1e4, 0.0, 1.0, 1e-4);
        assert_eq!(normal_force(-1e-3, 3.0, &p), 0.0);
        assert_relative_eq!(normal_force(1e-3, 0.0, &p), 10.0, max_relative = 1e-14);
        let p = params(1e4, 0.1, 1.0, 1e-4);
        assert_eq!(normal_force(1e-3, -20.0, &p), 0.0);
    }

    #[test]
    fn normal_force_of_separation_velocity() {
        let p = params(1e4, 0.0, 1.0, 1e-4);
        let (pi, grad) = normal_force_of_vn(1e-3, 0.0, 1e-3, &p);
        assert_relative_eq!(pi, 10.0, max_relative = 1e-14);
        assert_relative_eq!(grad, -10.0, max_relative = 1e-14);

        assert_eq!(normal_force_of_vn(-1e-4, 0.0, 1e-3, &p), (0.0, 0.0));

        let p = params(1e4, 0.1, 1.0, 1e-4);
        let (pi, _) = normal_force_of_vn(1e-3, 1e-3, 1e-3, &p);
        assert_relative_eq!(pi, 1e4 * (1.0 - 1e-4) * (1e-3 - 1e-6), max_relative = 1e-14);
        assert_relative_eq!(pi, 9.989, max_relative = 1e-4);
    }

    #[test]
    fn friction_force_values() {
        let p = params(1.0, 0.0, 1.0, 1e-4);
        assert_eq!(friction_force(&Vector3::zeros(), 5.0, &p), Vector3::zeros());
        let f = friction_force(&Vector3::new(2e-4, 0.0, 0.0), 3.234, &p);
        assert_relative_eq!(f, Vector3::new(-3.234, 0.0, 0.0), max_relative = 1e-14);
        let f = friction_force(&Vector3::new(5e-5, 0.0, 0.0), 2.0, &p);
        assert_relative_eq!(f, Vector3::new(-1.0, 0.0, 0.0), max_relative = 1e-12);
    }

    #[test]
    fn friction_gradient_closed_forms() {
        let p = params(1.0, 0.0, 1.0, 1e-4);
        let z = Vector3::z();
        let g = friction_jacobian_vt(&Vector3::zeros(), 2.0, &z, &p);
        let expected = Matrix3::from_diagonal(&Vector3::new(-2e4, -2e4, 0.0));
        assert_relative_eq!(g, expected, max_relative = 1e-12);

        let g = friction_jacobian_vt(&Vector3::new(3e-3, -1e-3, 0.0), 0.0, &z, &p);
        assert!(g.iter().all(|x| *x == 0.0));

        assert_eq!(friction_jacobian_vn(&Vector3::zeros(), -10.0, &p), Vector3::zeros());
        let g = friction_jacobian_vn(&Vector3::new(2e-4, 0.0, 0.0), -10.0, &p);
        assert_relative_eq!(g, Vector3::new(10.0, 0.0, 0.0), max_relative = 1e-14);
    }

    /// Central difference of `f` along each coordinate of a tangent vector.
    fn fd_jacobian_vt(v_t: &Vector3<f64>, pi: f64, p: &ContactParameters, eps: f64) -> Matrix3<f64> {
        let mut jac = Matrix3::zeros();
        for j in 0..3 {
            let mut plus = *v_t;
            let mut minus = *v_t;
            plus[j] += eps;
            minus[j] -= eps;
            let col = (friction_force(&plus, pi, p) - friction_force(&minus, pi, p)) / (2.0 * eps);
            jac.set_column(j, &col);
        }
        jac
    }

    #[test]
    fn sliding_gradient_matches_finite_differences() {
        // n̂ = ẑ so the tangent plane is the xy plane; perturbing along z is
        // outside the precondition, so only the xy block is compared.
        let p = params(1.0, 0.0, 0.8, 1e-4);
        let z = Vector3::z();
        for v_t in [
            Vector3::new(3e-4, 1e-4, 0.0),
            Vector3::new(-2e-2, 5e-3, 0.0),
            Vector3::new(1.0, -2.0, 0.0),
        ] {
            let analytic = friction_jacobian_vt(&v_t, 7.5, &z, &p);
            let fd = fd_jacobian_vt(&v_t, 7.5, &p, 1e-9 * v_t.norm());
            let a = analytic.fixed_view::<2, 2>(0, 0).into_owned();
            let b = fd.fixed_view::<2, 2>(0, 0).into_owned();
            assert!((a - b).norm() <= 1e-6 * a.norm(), "{a} vs {b}");
        }
    }

    #[test]
    fn composed_normal_gradient_matches_finite_differences() {
        let p = params(1e4, 0.1, 0.5, 1e-4);
        let (delta0, h) = (2e-3, 1e-3);
        for (v_t, v_n) in [
            (Vector3::new(4e-3, -1e-3, 0.0), 0.2),
            (Vector3::new(3e-5, 1e-5, 0.0), -0.5),
        ] {
            let (_, dpi) = normal_force_of_vn(delta0, v_n, h, &p);
            let analytic = friction_jacobian_vn(&v_t, dpi, &p);
            let eps = 1e-7;
            let f = |vn: f64| friction_force(&v_t, normal_force_of_vn(delta0, vn, h, &p).0, &p);
            let fd = (f(v_n + eps) - f(v_n - eps)) / (2.0 * eps);
            assert!((analytic - fd).norm() <= 1e-6 * analytic.norm());
        }
    }

    proptest! {
        #[test]
        fn friction_stays_in_cone_and_dissipates(
            vx in -1.0f64..1.0, vy in -1.0f64..1.0, scale in -8.0f64..0.0,
            pi in 0.0f64..100.0, mu in 0.0f64..2.0,
        ) {
            let p = params(1.0, 0.0, mu, 1e-4);
            let v_t = Vector3::new(vx, vy, 0.0) * 10f64.powf(scale);
            let f = friction_force(&v_t, pi, &p);
            prop_assert!(f.norm() <= mu * pi * (1.0 + 1e-12));
            prop_assert!(f.dot(&v_t) <= 0.0);
            prop_assert_eq!(f.z, 0.0);
        }

        #[test]
        fn normal_force_is_nonnegative_and_continuous(
            delta in -1e-2f64..1e-2, rate in -50.0f64..50.0,
        ) {
            let p = params(1e4, 0.1, 1.0, 1e-4);
            let pi = normal_force(delta, rate, &p);
            prop_assert!(pi >= 0.0);
            // Lipschitz bound across the clamp boundaries.
            let step = 1e-9;
            let pi2 = normal_force(delta + step, rate + step, &p);
            let k = p.stiffness;
            let d = p.damping;
            let bound = k * (1.0 + d * (rate.abs() + step)) * step + k * d * (delta.abs() + step) * step;
            prop_assert!((pi2 - pi).abs() <= bound * (1.0 + 1e-6) + 1e-12);
        }

        #[test]
        fn stiction_gradient_is_constant(
            vx in -1.0f64..1.0, vy in -1.0f64..1.0, pi in 0.0f64..50.0,
        ) {
            let p = params(1.0, 0.0, 0.3, 1e-4);
            let n = Vector3::z();
            let v_t = Vector3::new(vx, vy, 0.0) * 0.7e-4;
            let g = friction_jacobian_vt(&v_t, pi, &n, &p);
            let expected = (Matrix3::identity() - n * n.transpose()) * (-pi * 0.3 / 1e-4);
            prop_assert_eq!(g, expected);
        }

        #[test]
        fn gradient_is_symmetric_negative_semidefinite(
            vx in -1.0f64..1.0, vy in -1.0f64..1.0, scale in -6.0f64..0.0,
            pi in 0.0f64..50.0, wx in -1.0f64..1.0, wy in -1.0f64..1.0,
        ) {
            let p = params(1.0, 0.0, 0.9, 1e-4);
            let n = Vector3::z();
            let v_t = Vector3::new(vx, vy, 0.0) * 10f64.powf(scale);
            let g = friction_jacobian_vt(&v_t, pi, &n, &p);
            prop_assert!((g - g.transpose()).norm() <= 1e-12 * g.norm().max(1.0));
            let w = Vector3::new(wx, wy, 0.0);
            prop_assert!(w.dot(&(g * w)) <= 1e-12 * g.norm());
        }
    }
}
