//! Semi-implicit schemes that freeze the configuration at the start of the
//! step and solve for the next velocities only.
//!
//! With `p* = M₀v₀ + h·τ₀` the velocity residual is
//!
//! ```text
//! r(v) = M₀v − p* − h·J_cᵀ(n̂·π(v) + f_t(v))
//! ```
//!
//! and the next configuration is `q = q₀ + h·N₀·v`. The one-way scheme keeps
//! the normal forces at their start-of-step values, so only friction is
//! implicit. The two-way scheme also makes the normal force implicit through
//! the penetration estimate `δ ≈ δ₀ − h·v_n`, and couples friction to it.

use nalgebra::{DMatrix, DVector, Matrix3xX, RowDVector, Vector3};

use super::newton::{newton_solve, JacobianCache, NewtonStatus, NewtonSystem};
use super::tals::{clamp_alpha, contact_alpha};
use super::{
    cover_with_convergence_control, Integrator, JacobianMode, SolverConfig, SolverError,
    StepResult, WorkCounters,
};
use crate::contact::{self, ContactForce};
use crate::system::{ContactSet, NormalLaw, SystemModel, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// Normal forces explicit, friction implicit.
    OneWay,
    /// Normal and friction forces implicit and coupled.
    TwoWay,
    /// Two-way normal forces with friction ignored.
    Frictionless,
}

/// Blocks of the contact contribution to the residual Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct Delassus {
    /// `−J_nᵀ·diag(dπ/dv_n)·J_n`
    pub normal: DMatrix<f64>,
    /// `−J_tᵀ·blockdiag(∇_{v_t} f_t)·J_t`
    pub tangential: DMatrix<f64>,
    /// `−J_tᵀ·blockdiag(∇_{v_n} f_t)·J_n`, not symmetric in general.
    pub coupling: DMatrix<f64>,
}

/// Everything a frozen-kinematics step needs from the start of the step.
#[derive(Debug, Clone)]
pub struct StepWorkspace {
    pub h: f64,
    pub t0: f64,
    pub q0: DVector<f64>,
    pub mass: DMatrix<f64>,
    pub kinematic_map: DMatrix<f64>,
    /// `M₀v₀ + h·τ₀`.
    pub p_star: DVector<f64>,
    pub contacts: ContactSet,
    pub normal_jacobians: Vec<RowDVector<f64>>,
    pub tangent_jacobians: Vec<Matrix3xX<f64>>,
    /// Normal force magnitudes at the start of the step.
    pub initial_normal_forces: Vec<f64>,
    pub coupling: Coupling,
}

/// Per-contact quantities at one velocity iterate.
struct ContactTerms {
    force: ContactForce,
    dpi_dvn: f64,
    v_t: Vector3<f64>,
    has_friction: bool,
}

impl StepWorkspace {
    pub fn new(model: &dyn SystemModel, state: &SystemState, h: f64, coupling: Coupling) -> Self {
        let q0 = state.q.clone();
        let mass = model.mass_matrix(&q0);
        let tau = model.applied_forces(&q0, &state.v, state.t);
        let p_star = &mass * &state.v + tau * h;
        let contacts = model.contact_query(&q0, state.t);
        let initial_normal_forces = contacts
            .points
            .iter()
            .map(|p| p.force(&p.velocity(&state.v)).normal)
            .collect();
        Self {
            h,
            t0: state.t,
            kinematic_map: model.kinematic_map(&q0),
            q0,
            mass,
            p_star,
            normal_jacobians: contacts.points.iter().map(|p| p.normal_jacobian()).collect(),
            tangent_jacobians: contacts.points.iter().map(|p| p.tangent_jacobian()).collect(),
            contacts,
            initial_normal_forces,
            coupling,
        }
    }

    fn terms(&self, v: &DVector<f64>) -> Vec<ContactTerms> {
        self.contacts
            .points
            .iter()
            .zip(&self.initial_normal_forces)
            .map(|(point, &pi0)| {
                let velocity = point.velocity(v);
                let (pi, dpi_dvn) = match (point.normal_law, self.coupling) {
                    (NormalLaw::Prescribed(load), _) => (load, 0.0),
                    (NormalLaw::Compliant, Coupling::OneWay) => (pi0, 0.0),
                    (NormalLaw::Compliant, _) => contact::normal_force_of_vn(
                        point.delta,
                        velocity.v_n,
                        self.h,
                        &point.params,
                    ),
                };
                let has_friction = self.coupling != Coupling::Frictionless && point.params.mu > 0.0;
                let tangential = if has_friction {
                    contact::friction_force(&velocity.v_t, pi, &point.params)
                } else {
                    Vector3::zeros()
                };
                ContactTerms {
                    force: ContactForce { normal: pi, tangential },
                    dpi_dvn,
                    v_t: velocity.v_t,
                    has_friction,
                }
            })
            .collect()
    }

    /// Velocity residual at `v`.
    pub fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut r = &self.mass * v - &self.p_star;
        for (point, terms) in self.contacts.points.iter().zip(self.terms(v)) {
            let total = terms.force.total(&point.normal);
            r.gemv_tr(-self.h, &point.jacobian, &total, 1.0);
        }
        r
    }

    pub fn delassus(&self, v: &DVector<f64>) -> Delassus {
        let n_v = self.mass.nrows();
        let mut blocks = Delassus {
            normal: DMatrix::zeros(n_v, n_v),
            tangential: DMatrix::zeros(n_v, n_v),
            coupling: DMatrix::zeros(n_v, n_v),
        };
        let terms = self.terms(v);
        for (((point, terms), j_n), j_t) in self
            .contacts
            .points
            .iter()
            .zip(terms)
            .zip(&self.normal_jacobians)
            .zip(&self.tangent_jacobians)
        {
            if terms.dpi_dvn != 0.0 {
                blocks.normal -= j_n.transpose() * j_n * terms.dpi_dvn;
            }
            if !terms.has_friction {
                continue;
            }
            let grad_t = contact::friction_jacobian_vt(
                &terms.v_t,
                terms.force.normal,
                &point.normal,
                &point.params,
            );
            blocks.tangential -= j_t.transpose() * (grad_t * j_t);
            if terms.dpi_dvn != 0.0 {
                let grad_n = contact::friction_jacobian_vn(&terms.v_t, terms.dpi_dvn, &point.params);
                blocks.coupling -= j_t.transpose() * (grad_n * j_n);
            }
        }
        blocks
    }

    /// Residual Jacobian `M₀ + h·(W_nn + W_tt + W_tn)` restricted to the
    /// blocks the coupling uses.
    pub fn jacobian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let blocks = self.delassus(v);
        let mut jac = self.mass.clone();
        match self.coupling {
            Coupling::OneWay => jac += blocks.tangential * self.h,
            Coupling::Frictionless => jac += blocks.normal * self.h,
            Coupling::TwoWay => {
                jac += blocks.normal * self.h;
                jac += blocks.tangential * self.h;
                jac += blocks.coupling * self.h;
            }
        }
        jac
    }

    /// `q₀ + h·N₀·v`.
    pub fn positions(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.q0 + &self.kinematic_map * v * self.h
    }

    fn limit(&self, v: &DVector<f64>, dv: &DVector<f64>, theta_max: f64) -> f64 {
        let alpha = self
            .contacts
            .points
            .iter()
            .filter(|p| self.coupling != Coupling::Frictionless && p.params.mu > 0.0)
            .map(|p| {
                let v_t = p.velocity(v).v_t;
                let dv_t = p.velocity_change(dv).v_t;
                contact_alpha(&v_t, &dv_t, p.params.stiction_velocity, theta_max)
            })
            .fold(1.0, f64::min);
        clamp_alpha(alpha)
    }
}

/// `(W_nn, W_tt, W_tn)` at the velocity iterate `v`.
pub fn assemble_delassus(workspace: &StepWorkspace, v: &DVector<f64>) -> Delassus {
    workspace.delassus(v)
}

struct VelocityProblem<'a> {
    workspace: &'a StepWorkspace,
    tals: Option<f64>,
    f_evals: u64,
    assemblies: u64,
}

impl NewtonSystem for VelocityProblem<'_> {
    fn residual(&mut self, v: &DVector<f64>) -> DVector<f64> {
        self.f_evals += 1;
        self.workspace.residual(v)
    }

    fn jacobian(&mut self, v: &DVector<f64>) -> DMatrix<f64> {
        self.assemblies += 1;
        self.workspace.jacobian(v)
    }

    fn limit_step(&mut self, v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
        match self.tals {
            Some(theta_max) => self.workspace.limit(v, dv, theta_max),
            None => 1.0,
        }
    }
}

/// One-way semi-implicit or two-way integrator with frozen kinematics.
#[derive(Debug, Clone)]
pub struct FrozenScheme {
    coupling: Coupling,
    config: SolverConfig,
    work: WorkCounters,
}

impl FrozenScheme {
    pub fn new(coupling: Coupling, config: SolverConfig) -> Self {
        Self { coupling, config, work: WorkCounters::default() }
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    /// One step of size `h` without step-size control.
    pub fn step(
        &mut self,
        model: &dyn SystemModel,
        state: &SystemState,
        h: f64,
    ) -> Result<StepResult, SolverError> {
        let mut work = WorkCounters::default();
        let outcome = self.attempt(model, state, h, &mut work);
        self.work += work;
        outcome.map(|next| {
            work.steps += 1;
            StepResult { state: next, work, converged: true }
        })
    }

    fn attempt(
        &self,
        model: &dyn SystemModel,
        state: &SystemState,
        h: f64,
        work: &mut WorkCounters,
    ) -> Result<SystemState, SolverError> {
        let workspace = StepWorkspace::new(model, state, h, self.coupling);
        let mut problem = VelocityProblem {
            workspace: &workspace,
            tals: self.config.tals_enabled.then_some(self.config.theta_max),
            f_evals: 0,
            assemblies: 0,
        };
        let settings = crate::solver::NewtonSettings {
            mode: JacobianMode::Full,
            ..self.config.newton_settings()
        };
        let report =
            newton_solve(&mut problem, state.v.clone(), &settings, &mut JacobianCache::new(), None);
        work.f_evals += problem.f_evals;
        work.jacobian_assemblies += problem.assemblies;
        work.add_newton(&report.stats);
        let (t, v) = (state.t, report.x);
        match report.status {
            NewtonStatus::Converged => {
                Ok(SystemState::new(t + h, workspace.positions(&v), v))
            }
            NewtonStatus::SingularJacobian => Err(SolverError::SingularJacobian { t, h }),
            _ => Err(SolverError::NonConvergence { t, h }),
        }
    }
}

impl Integrator for FrozenScheme {
    fn advance(
        &mut self,
        model: &dyn SystemModel,
        state: &SystemState,
        dt: f64,
    ) -> Result<StepResult, SolverError> {
        let mut work = WorkCounters::default();
        let (h, factor) = (self.config.h, self.config.h_min_factor);
        let this = &*self;
        let outcome = cover_with_convergence_control(state, dt, h, factor, &mut work, |s, step, w| {
            this.attempt(model, s, step, w)
        });
        self.work += work;
        outcome.map(|next| StepResult { state: next, work, converged: true })
    }

    fn work(&self) -> WorkCounters {
        self.work
    }
}

/// One step of the one-way semi-implicit scheme.
pub fn semi_implicit_one_way_step(
    model: &dyn SystemModel,
    state: &SystemState,
    h: f64,
    tals_enabled: bool,
) -> Result<StepResult, SolverError> {
    let config = SolverConfig { h, tals_enabled, ..Default::default() };
    FrozenScheme::new(Coupling::OneWay, config).step(model, state, h)
}

/// One step of the two-way scheme with TALS.
pub fn tamsi_step(
    model: &dyn SystemModel,
    state: &SystemState,
    h: f64,
) -> Result<StepResult, SolverError> {
    FrozenScheme::new(Coupling::TwoWay, SolverConfig::with_step(h)).step(model, state, h)
}
