//! Benchmark scenarios with analytic contact geometry.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3xX, Vector3};
use thiserror::Error;

use super::{ContactPoint, ContactSet, NormalLaw, SystemModel, SystemState};
use crate::contact::{ContactError, ContactParameters};

pub const SCENARIO_NAMES: [&str; 3] = ["box_slide", "planar_gripper", "particle_drop"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}` (valid: box_slide, planar_gripper, particle_drop)")]
    Unknown(String),
    #[error("scenario `{scenario}` has no parameter `{key}`")]
    UnknownParameter { scenario: String, key: String },
    #[error("invalid value {value} for `{key}`")]
    InvalidValue { key: String, value: f64 },
    #[error(transparent)]
    Contact(#[from] ContactError),
}

/// External horizontal force on the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forcing {
    /// `A·sin(2π f t)`.
    Harmonic { amplitude: f64, frequency: f64 },
    Constant(f64),
}

impl Forcing {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Forcing::Harmonic { amplitude, frequency } => amplitude * (2.0 * PI * frequency * t).sin(),
            Forcing::Constant(f) => f,
        }
    }
}

/// One-DOF box on a horizontal surface under a horizontal force.
///
/// The normal load is the weight `W = m g`, applied as a prescribed load, so
/// the dynamics reduce to `m v̇ = f(t) − μ̃(|v|/v_s) W sgn(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSlide {
    pub mass: f64,
    pub gravity: f64,
    pub mu: f64,
    pub stiction_velocity: f64,
    pub forcing: Forcing,
    pub initial_velocity: f64,
}

impl Default for BoxSlide {
    fn default() -> Self {
        Self {
            mass: 0.33,
            gravity: 9.8,
            mu: 1.0,
            stiction_velocity: 1e-4,
            forcing: Forcing::Harmonic { amplitude: 4.0, frequency: 1.0 },
            // Launched against the forcing; first comes to rest near t = 0.16 s.
            initial_velocity: -2.4,
        }
    }
}

impl BoxSlide {
    /// Box at rest pushed by a constant force.
    pub fn constant_force(force: f64) -> Self {
        Self {
            forcing: Forcing::Constant(force),
            initial_velocity: 0.0,
            ..Self::default()
        }
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    /// Steady slip speed under a constant sub-limit force `F`: `F v_s / (μ W)`.
    pub fn steady_slip_velocity(&self, force: f64) -> f64 {
        force * self.stiction_velocity / (self.mu * self.weight())
    }

    fn params(&self) -> ContactParameters {
        // Stiffness and damping are unused under a prescribed normal load.
        ContactParameters {
            stiffness: 1.0,
            damping: 0.0,
            mu: self.mu,
            stiction_velocity: self.stiction_velocity,
        }
    }
}

impl SystemModel for BoxSlide {
    fn name(&self) -> &str {
        "box_slide"
    }

    fn num_positions(&self) -> usize {
        1
    }

    fn num_velocities(&self) -> usize {
        1
    }

    fn mass_matrix(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.mass)
    }

    fn applied_forces(&self, _q: &DVector<f64>, _v: &DVector<f64>, t: f64) -> DVector<f64> {
        DVector::from_element(1, self.forcing.at(t))
    }

    fn kinematic_map(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn contact_query(&self, _q: &DVector<f64>, _t: f64) -> ContactSet {
        ContactSet {
            points: vec![ContactPoint {
                delta: 0.0,
                normal: Vector3::z(),
                jacobian: Matrix3xX::from_column_slice(&[1.0, 0.0, 0.0]),
                surface_velocity: Vector3::zeros(),
                params: self.params(),
                normal_law: NormalLaw::Prescribed(self.weight()),
            }],
        }
    }

    fn initial_state(&self) -> SystemState {
        SystemState::new(0.0, DVector::zeros(1), DVector::from_element(1, self.initial_velocity))
    }

    fn state_derivative(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let v = x[1];
        let speed = v.abs();
        let friction = if speed < crate::contact::SLIP_DIRECTION_EPSILON {
            0.0
        } else {
            let mu = crate::contact::regularized_mu(speed / self.stiction_velocity, self.mu);
            v.signum() * (-mu * self.weight())
        };
        DVector::from_vec(vec![v, (self.forcing.at(t) + friction) / self.mass])
    }

    fn stiction_velocity(&self) -> Option<f64> {
        Some(self.stiction_velocity)
    }
}

/// Point mass dropped vertically onto a compliant half-space, no friction.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleDrop {
    pub mass: f64,
    pub gravity: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub mu: f64,
    pub stiction_velocity: f64,
    pub drop_height: f64,
}

impl Default for ParticleDrop {
    fn default() -> Self {
        Self {
            mass: 1.0,
            gravity: 9.8,
            // Puts ω·h ≈ 3.2 at h = 10 ms, past the explicit stability limit of 2.
            stiffness: 1e5,
            damping: 0.1,
            mu: 0.0,
            stiction_velocity: 1e-4,
            drop_height: 0.1,
        }
    }
}

impl ParticleDrop {
    /// Kinetic + gravitational + elastic energy.
    pub fn mechanical_energy(&self, state: &SystemState) -> f64 {
        let z = state.q[0];
        let v = state.v[0];
        let penetration = (-z).max(0.0);
        0.5 * self.mass * v * v
            + self.mass * self.gravity * z
            + 0.5 * self.stiffness * penetration * penetration
    }
}

impl SystemModel for ParticleDrop {
    fn name(&self) -> &str {
        "particle_drop"
    }

    fn num_positions(&self) -> usize {
        1
    }

    fn num_velocities(&self) -> usize {
        1
    }

    fn mass_matrix(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.mass)
    }

    fn applied_forces(&self, _q: &DVector<f64>, _v: &DVector<f64>, _t: f64) -> DVector<f64> {
        DVector::from_element(1, -self.mass * self.gravity)
    }

    fn kinematic_map(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn contact_query(&self, q: &DVector<f64>, _t: f64) -> ContactSet {
        ContactSet {
            points: vec![ContactPoint {
                delta: -q[0],
                normal: Vector3::z(),
                jacobian: Matrix3xX::from_column_slice(&[0.0, 0.0, 1.0]),
                surface_velocity: Vector3::zeros(),
                params: ContactParameters {
                    stiffness: self.stiffness,
                    damping: self.damping,
                    mu: self.mu,
                    stiction_velocity: self.stiction_velocity,
                },
                normal_law: NormalLaw::Compliant,
            }],
        }
    }

    fn initial_state(&self) -> SystemState {
        SystemState::new(0.0, DVector::from_element(1, self.drop_height), DVector::zeros(1))
    }

    fn stiction_velocity(&self) -> Option<f64> {
        Some(self.stiction_velocity)
    }
}

/// Planar mug held between two vertical gripper pads that oscillate
/// vertically, `z_g(t) = A sin(2π t / T)`. No gravity.
///
/// Generalized coordinates are the mug's center of mass `(x, z)` and its tilt
/// `θ` about the horizontal axis normal to the grip plane. The mug's round
/// cross-section of radius `r` has its geometric center offset from the
/// center of mass by `com_offset` along the body x axis (the handle side),
/// which makes the two friction moment arms unequal.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarGripper {
    pub mass: f64,
    pub radius: f64,
    pub com_offset: f64,
    pub mu: f64,
    pub stiction_velocity: f64,
    pub stiffness: f64,
    pub damping: f64,
    /// Nominal pad penetration on each side (m).
    pub grip_penetration: f64,
    pub amplitude: f64,
    pub period: f64,
}

impl Default for PlanarGripper {
    fn default() -> Self {
        Self {
            mass: 0.1,
            radius: 0.04,
            com_offset: 0.01,
            mu: 0.1,
            stiction_velocity: 1e-4,
            // 10 N grip at 1 mm nominal penetration.
            stiffness: 1e4,
            damping: 0.1,
            grip_penetration: 1e-3,
            amplitude: 0.15,
            period: 0.5,
        }
    }
}

impl PlanarGripper {
    /// Solid-cylinder rotational inertia `m r² / 2`.
    pub fn inertia(&self) -> f64 {
        0.5 * self.mass * self.radius * self.radius
    }

    /// Nominal normal force per pad, `k δ₀`.
    pub fn grip_force(&self) -> f64 {
        self.stiffness * self.grip_penetration
    }

    /// Sets the pad stiffness so that the nominal penetration yields `force`.
    pub fn with_grip_force(mut self, force: f64) -> Self {
        self.stiffness = force / self.grip_penetration;
        self
    }

    /// Peak friction demand `m A (2π/T)²` to keep the mug stuck to the pads.
    pub fn peak_required_friction(&self) -> f64 {
        let omega = 2.0 * PI / self.period;
        self.mass * self.amplitude * omega * omega
    }

    pub fn pad_height(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * t / self.period).sin()
    }

    pub fn pad_velocity(&self, t: f64) -> f64 {
        let omega = 2.0 * PI / self.period;
        self.amplitude * omega * (omega * t).cos()
    }

    /// Pad plane positions `(x_left, x_right)`.
    fn pad_planes(&self) -> (f64, f64) {
        let gap = self.radius - self.grip_penetration;
        (-gap, gap)
    }

    fn params(&self) -> ContactParameters {
        ContactParameters {
            stiffness: self.stiffness,
            damping: self.damping,
            mu: self.mu,
            stiction_velocity: self.stiction_velocity,
        }
    }

    /// Contact Jacobian for a mug material point at arm `(ρx, ρz)` from the
    /// center of mass. Columns are `(ẋ, ż, ω)`, with `ω ŷ × ρ = (ρz, 0, −ρx)`.
    fn point_jacobian(arm_x: f64, arm_z: f64) -> Matrix3xX<f64> {
        Matrix3xX::from_column_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, arm_z, 0.0, -arm_x])
    }
}

impl SystemModel for PlanarGripper {
    fn name(&self) -> &str {
        "planar_gripper"
    }

    fn num_positions(&self) -> usize {
        3
    }

    fn num_velocities(&self) -> usize {
        3
    }

    fn mass_matrix(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![self.mass, self.mass, self.inertia()]))
    }

    fn applied_forces(&self, _q: &DVector<f64>, _v: &DVector<f64>, _t: f64) -> DVector<f64> {
        // Planar motion about a principal axis: no gyroscopic terms, and no gravity.
        DVector::zeros(3)
    }

    fn kinematic_map(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(3, 3)
    }

    fn contact_query(&self, q: &DVector<f64>, t: f64) -> ContactSet {
        let (x, z, theta) = (q[0], q[1], q[2]);
        // Geometric center: COM + R_y(θ)·(e, 0, 0).
        let center_x = x + self.com_offset * theta.cos();
        let center_z = z - self.com_offset * theta.sin();
        let (left_plane, right_plane) = self.pad_planes();
        let pad_velocity = Vector3::new(0.0, 0.0, self.pad_velocity(t));
        let params = self.params();

        let make = |side: f64, plane: f64| {
            // Mug witness point on the side facing the pad.
            let witness_x = center_x + side * self.radius;
            let delta = side * (witness_x - plane);
            ContactPoint {
                delta,
                // From the pad into the mug.
                normal: Vector3::new(-side, 0.0, 0.0),
                jacobian: Self::point_jacobian(witness_x - x, center_z - z),
                surface_velocity: pad_velocity,
                params,
                normal_law: NormalLaw::Compliant,
            }
        };
        ContactSet {
            points: vec![make(-1.0, left_plane), make(1.0, right_plane)],
        }
    }

    fn initial_state(&self) -> SystemState {
        // Geometric center on the grip axis, mug moving with the pads.
        SystemState::new(
            0.0,
            DVector::from_vec(vec![-self.com_offset, self.pad_height(0.0), 0.0]),
            DVector::from_vec(vec![0.0, self.pad_velocity(0.0), 0.0]),
        )
    }

    fn stiction_velocity(&self) -> Option<f64> {
        Some(self.stiction_velocity)
    }
}

/// Contact-free `v̇ = −λ v` with no positions, i.e. `ẋ = −λ x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDecay {
    pub rate: f64,
    pub initial_value: f64,
}

impl LinearDecay {
    pub fn new(rate: f64) -> Self {
        Self { rate, initial_value: 1.0 }
    }
}

impl SystemModel for LinearDecay {
    fn name(&self) -> &str {
        "linear_decay"
    }

    fn num_positions(&self) -> usize {
        0
    }

    fn num_velocities(&self) -> usize {
        1
    }

    fn mass_matrix(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn applied_forces(&self, _q: &DVector<f64>, v: &DVector<f64>, _t: f64) -> DVector<f64> {
        v * -self.rate
    }

    fn kinematic_map(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(0, 1)
    }

    fn contact_query(&self, _q: &DVector<f64>, _t: f64) -> ContactSet {
        ContactSet::default()
    }

    fn initial_state(&self) -> SystemState {
        SystemState::new(0.0, DVector::zeros(0), DVector::from_element(1, self.initial_value))
    }
}

/// A named benchmark scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    BoxSlide(BoxSlide),
    PlanarGripper(PlanarGripper),
    ParticleDrop(ParticleDrop),
}

impl Scenario {
    /// Builds a scenario by name with `key = value` parameter overrides.
    pub fn from_name(name: &str, overrides: &[(String, f64)]) -> Result<Self, ScenarioError> {
        let mut scenario = match name {
            "box_slide" => Scenario::BoxSlide(BoxSlide::default()),
            "planar_gripper" => Scenario::PlanarGripper(PlanarGripper::default()),
            "particle_drop" => Scenario::ParticleDrop(ParticleDrop::default()),
            other => return Err(ScenarioError::Unknown(other.to_string())),
        };
        for (key, value) in overrides {
            scenario.set(key, *value)?;
        }
        scenario.validate()?;
        Ok(scenario)
    }

    fn set(&mut self, key: &str, value: f64) -> Result<(), ScenarioError> {
        if !value.is_finite() {
            return Err(ScenarioError::InvalidValue { key: key.to_string(), value });
        }
        let unknown = |s: &str| ScenarioError::UnknownParameter {
            scenario: s.to_string(),
            key: key.to_string(),
        };
        match self {
            Scenario::BoxSlide(b) => match key {
                "mass" => b.mass = value,
                "mu" => b.mu = value,
                "v_s" => b.stiction_velocity = value,
                "gravity" => b.gravity = value,
                "initial_velocity" => b.initial_velocity = value,
                "force" => b.forcing = Forcing::Constant(value),
                "amplitude" | "frequency" => {
                    let (mut amplitude, mut frequency) = match b.forcing {
                        Forcing::Harmonic { amplitude, frequency } => (amplitude, frequency),
                        Forcing::Constant(_) => (4.0, 1.0),
                    };
                    if key == "amplitude" {
                        amplitude = value;
                    } else {
                        frequency = value;
                    }
                    b.forcing = Forcing::Harmonic { amplitude, frequency };
                }
                _ => return Err(unknown("box_slide")),
            },
            Scenario::PlanarGripper(g) => match key {
                "mass" => g.mass = value,
                "mu" => g.mu = value,
                "v_s" => g.stiction_velocity = value,
                "k" => g.stiffness = value,
                "d" => g.damping = value,
                "grip_force" => g.stiffness = value / g.grip_penetration,
                "amplitude" => g.amplitude = value,
                "period" => g.period = value,
                "radius" => g.radius = value,
                "com_offset" => g.com_offset = value,
                _ => return Err(unknown("planar_gripper")),
            },
            Scenario::ParticleDrop(p) => match key {
                "mass" => p.mass = value,
                "mu" => p.mu = value,
                "v_s" => p.stiction_velocity = value,
                "k" => p.stiffness = value,
                "d" => p.damping = value,
                "gravity" => p.gravity = value,
                "height" => p.drop_height = value,
                _ => return Err(unknown("particle_drop")),
            },
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let positive = |key: &str, value: f64| {
            if value > 0.0 {
                Ok(())
            } else {
                Err(ScenarioError::InvalidValue { key: key.to_string(), value })
            }
        };
        let q = DVector::zeros(self.model().num_positions());
        for point in self.model().contact_query(&q, 0.0).points {
            point.params.validate()?;
        }
        match self {
            Scenario::BoxSlide(b) => positive("mass", b.mass),
            Scenario::PlanarGripper(g) => {
                positive("mass", g.mass)?;
                positive("radius", g.radius)?;
                positive("period", g.period)
            }
            Scenario::ParticleDrop(p) => positive("mass", p.mass),
        }
    }

    pub fn model(&self) -> &dyn SystemModel {
        match self {
            Scenario::BoxSlide(b) => b,
            Scenario::PlanarGripper(g) => g,
            Scenario::ParticleDrop(p) => p,
        }
    }
}
