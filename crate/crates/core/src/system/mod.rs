//! Multibody systems with analytic point contacts.
//!
//! A [`SystemModel`] supplies the mass matrix `M(q)`, the non-contact
//! generalized forces `τ(q, v, t)`, the kinematic map `N(q)` with `q̇ = N v`,
//! and a contact query returning penetration, normal and contact Jacobian for
//! a fixed set of candidate contacts. The continuous dynamics are
//!
//! ```text
//! q̇ = N(q) v
//! M(q) v̇ = τ(q, v, t) + J_cᵀ(q) f_c(q, v)
//! ```

mod scenarios;

pub use scenarios::{
    BoxSlide, Forcing, LinearDecay, ParticleDrop, PlanarGripper, Scenario, ScenarioError,
    SCENARIO_NAMES,
};

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX, RowDVector, Vector3};

use crate::contact::{self, ContactForce, ContactParameters};

/// Time, generalized positions and generalized velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub q: DVector<f64>,
    pub v: DVector<f64>,
}

impl SystemState {
    pub fn new(t: f64, q: DVector<f64>, v: DVector<f64>) -> Self {
        Self { t, q, v }
    }

    /// Stacked state `x = (q, v)`.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.q.len() + self.v.len());
        x.rows_mut(0, self.q.len()).copy_from(&self.q);
        x.rows_mut(self.q.len(), self.v.len()).copy_from(&self.v);
        x
    }

    pub fn from_vector(t: f64, x: &DVector<f64>, n_q: usize) -> Self {
        let n_v = x.len() - n_q;
        Self {
            t,
            q: x.rows(0, n_q).into_owned(),
            v: x.rows(n_q, n_v).into_owned(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.q.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }
}

/// How the normal force magnitude of a contact is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalLaw {
    /// Hunt–Crossley compliance from penetration and its rate.
    Compliant,
    /// A fixed normal load in N, independent of the state.
    Prescribed(f64),
}

/// Kinematics and material of one candidate contact.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPoint {
    /// Penetration `δ` in m, positive when overlapping.
    pub delta: f64,
    /// Unit normal pointing from body B into body A.
    pub normal: Vector3<f64>,
    /// `J_c`: maps generalized velocities to the velocity of A's witness point.
    pub jacobian: Matrix3xX<f64>,
    /// Velocity of B's witness point, for prescribed-motion bodies.
    pub surface_velocity: Vector3<f64>,
    pub params: ContactParameters,
    pub normal_law: NormalLaw,
}

/// Velocity of A relative to B at a contact, split along the normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactVelocity {
    pub v_c: Vector3<f64>,
    /// Separation velocity `n̂·v_c`.
    pub v_n: f64,
    /// Tangential velocity `P⊥ v_c`.
    pub v_t: Vector3<f64>,
}

impl ContactPoint {
    /// `P_n = n̂ n̂ᵀ`.
    pub fn normal_projector(&self) -> Matrix3<f64> {
        self.normal * self.normal.transpose()
    }

    /// `P⊥ = I − n̂ n̂ᵀ`.
    pub fn tangent_projector(&self) -> Matrix3<f64> {
        Matrix3::identity() - self.normal_projector()
    }

    /// `J_n = n̂ᵀ J_c`, a 1×n_v row.
    pub fn normal_jacobian(&self) -> RowDVector<f64> {
        self.normal.transpose() * &self.jacobian
    }

    /// `J_t = P⊥ J_c`.
    pub fn tangent_jacobian(&self) -> Matrix3xX<f64> {
        self.tangent_projector() * &self.jacobian
    }

    /// Relative velocity of A with respect to B at this contact.
    pub fn velocity(&self, v: &DVector<f64>) -> ContactVelocity {
        self.velocity_from_vc(&self.jacobian * v - self.surface_velocity)
    }

    /// Velocity change at this contact produced by a change `dv` of the
    /// generalized velocities (no surface-velocity bias).
    pub fn velocity_change(&self, dv: &DVector<f64>) -> ContactVelocity {
        self.velocity_from_vc(&self.jacobian * dv)
    }

    fn velocity_from_vc(&self, v_c: Vector3<f64>) -> ContactVelocity {
        let v_n = self.normal.dot(&v_c);
        // v_t = v_c − v_n n̂ so that v_n n̂ + v_t reconstructs v_c.
        let v_t = v_c - self.normal * v_n;
        ContactVelocity { v_c, v_n, v_t }
    }

    /// Contact force under the continuous model, `δ̇ = −v_n`.
    pub fn force(&self, velocity: &ContactVelocity) -> ContactForce {
        let normal = match self.normal_law {
            NormalLaw::Compliant => contact::normal_force(self.delta, -velocity.v_n, &self.params),
            NormalLaw::Prescribed(load) => load,
        };
        ContactForce {
            normal,
            tangential: contact::friction_force(&velocity.v_t, normal, &self.params),
        }
    }
}

/// The fixed-cardinality contact set reported for a configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactSet {
    pub points: Vec<ContactPoint>,
}

impl ContactSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn velocities(&self, v: &DVector<f64>) -> Vec<ContactVelocity> {
        self.points.iter().map(|p| p.velocity(v)).collect()
    }

    /// Forces at each contact for generalized velocities `v`.
    pub fn forces(&self, v: &DVector<f64>) -> Vec<ContactForce> {
        self.points.iter().map(|p| p.force(&p.velocity(v))).collect()
    }

    /// `J_cᵀ f_c`, the generalized contact force.
    pub fn generalized_force(&self, v: &DVector<f64>) -> DVector<f64> {
        let n_v = v.len();
        let mut tau = DVector::zeros(n_v);
        for point in &self.points {
            let force = point.force(&point.velocity(v));
            tau.gemv_tr(1.0, &point.jacobian, &force.total(&point.normal), 1.0);
        }
        tau
    }
}

/// A multibody system with analytic contact geometry.
pub trait SystemModel: Send + Sync {
    fn name(&self) -> &str;

    fn num_positions(&self) -> usize;

    fn num_velocities(&self) -> usize;

    /// `M(q)`, symmetric positive definite.
    fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64>;

    /// `τ(q, v, t)`: gyroscopic, gravity and externally applied forces.
    fn applied_forces(&self, q: &DVector<f64>, v: &DVector<f64>, t: f64) -> DVector<f64>;

    /// `N(q)` with `q̇ = N(q) v`.
    fn kinematic_map(&self, q: &DVector<f64>) -> DMatrix<f64>;

    fn contact_query(&self, q: &DVector<f64>, t: f64) -> ContactSet;

    fn initial_state(&self) -> SystemState;

    /// Stiction velocity shared by the scenario's contacts, if any.
    fn stiction_velocity(&self) -> Option<f64> {
        None
    }

    /// `ẋ = f(t, x)` for the stacked state. Models may override this with a
    /// cheaper equivalent.
    fn state_derivative(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        contact_dynamics(self, t, x)
    }
}

/// Evaluates `ẋ = f(t, x)` for the stacked state `x = (q, v)`.
pub fn state_derivative(model: &dyn SystemModel, t: f64, x: &DVector<f64>) -> DVector<f64> {
    model.state_derivative(t, x)
}

/// `ẋ = f(t, x)` assembled from the mass matrix, applied forces and contacts.
pub fn contact_dynamics<M: SystemModel + ?Sized>(model: &M, t: f64, x: &DVector<f64>) -> DVector<f64> {
    let n_q = model.num_positions();
    let n_v = model.num_velocities();
    let q = x.rows(0, n_q).into_owned();
    let v = x.rows(n_q, n_v).into_owned();
    let (qdot, vdot) = velocity_derivatives(model, &q, &v, t);
    let mut xdot = DVector::zeros(n_q + n_v);
    xdot.rows_mut(0, n_q).copy_from(&qdot);
    xdot.rows_mut(n_q, n_v).copy_from(&vdot);
    xdot
}

/// `(q̇, v̇)` at the given configuration and velocity.
pub fn velocity_derivatives<M: SystemModel + ?Sized>(
    model: &M,
    q: &DVector<f64>,
    v: &DVector<f64>,
    t: f64,
) -> (DVector<f64>, DVector<f64>) {
    let qdot = model.kinematic_map(q) * v;
    let contacts = model.contact_query(q, t);
    let rhs = model.applied_forces(q, v, t) + contacts.generalized_force(v);
    let mass = model.mass_matrix(q);
    let vdot = match mass.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => mass.lu().solve(&rhs).unwrap_or_else(|| DVector::from_element(rhs.len(), f64::NAN)),
    };
    (qdot, vdot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn point(normal: Vector3<f64>, jacobian: Matrix3xX<f64>) -> ContactPoint {
        ContactPoint {
            delta: 1e-3,
            normal,
            jacobian,
            surface_velocity: Vector3::zeros(),
            params: ContactParameters::new(1e4, 0.0, 0.5, 1e-4).unwrap(),
            normal_law: NormalLaw::Compliant,
        }
    }

    #[test]
    fn orthogonal_velocity_split() {
        let p = point(Vector3::z(), Matrix3xX::identity(3));
        let c = p.velocity(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert_eq!(c.v_n, 3.0);
        assert_eq!(c.v_t, Vector3::new(1.0, 2.0, 0.0));

        let p = point(Vector3::x(), Matrix3xX::identity(3));
        let c = p.velocity(&DVector::from_vec(vec![-1.0, 0.0, 0.0]));
        assert_eq!(c.v_n, -1.0);
        assert_eq!(c.v_t, Vector3::zeros());
    }

    #[test]
    fn state_vector_round_trip() {
        let s = SystemState::new(0.5, DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![3.0]));
        let x = s.to_vector();
        assert_eq!(x.as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(SystemState::from_vector(0.5, &x, 2), s);
    }

    fn unit(theta: f64, phi: f64) -> Vector3<f64> {
        Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
    }

    proptest! {
        #[test]
        fn projectors_and_reconstruction(
            theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU,
            entries in proptest::collection::vec(-2.0f64..2.0, 12),
            vel in proptest::collection::vec(-5.0f64..5.0, 4),
        ) {
            let n = unit(theta, phi);
            let jac = Matrix3xX::from_column_slice(&entries);
            let p = point(n, jac);
            let pn = p.normal_projector();
            let pt = p.tangent_projector();
            prop_assert!((pn + pt - Matrix3::identity()).norm() < 1e-14);
            prop_assert!((pn * pn - pn).norm() < 1e-14);
            prop_assert!((pt * pt - pt).norm() < 1e-14);
            let eig_n = pn.symmetric_eigenvalues();
            let eig_t = pt.symmetric_eigenvalues();
            prop_assert!(eig_n.iter().chain(eig_t.iter()).all(|e| *e > -1e-14));

            let v = DVector::from_vec(vel);
            let c = p.velocity(&v);
            prop_assert!((n * c.v_n + c.v_t - c.v_c).norm() <= 1e-14 * c.v_c.norm().max(1.0));
            prop_assert!(c.v_t.dot(&n).abs() <= 1e-12 * c.v_c.norm().max(1.0));
        }

        #[test]
        fn tangential_torque_identity(
            theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU,
            entries in proptest::collection::vec(-2.0f64..2.0, 9),
            f in proptest::collection::vec(-10.0f64..10.0, 3),
        ) {
            let n = unit(theta, phi);
            let p = point(n, Matrix3xX::from_column_slice(&entries));
            let f = p.tangent_projector() * Vector3::from_column_slice(&f);
            let by_contact = p.jacobian.transpose() * f;
            let by_tangent = p.tangent_jacobian().transpose() * f;
            prop_assert!((by_contact - &by_tangent).norm() <= 1e-12 * by_tangent.norm().max(1e-300) + 1e-14);
        }
    }

    #[test]
    fn generalized_force_collects_normal_and_friction() {
        let mut p = point(Vector3::z(), Matrix3xX::identity(3));
        p.normal_law = NormalLaw::Prescribed(2.0);
        let set = ContactSet { points: vec![p] };
        let tau = set.generalized_force(&DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert_relative_eq!(tau, DVector::from_vec(vec![-1.0, 0.0, 2.0]), max_relative = 1e-14);
    }
}
