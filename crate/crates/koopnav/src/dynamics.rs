//! Velocity-loop UAV model: a per-axis double integrator with first-order
//! velocity tracking, discretized exactly under zero-order hold.
//!
//! The continuous-time model per axis with velocity gain `k` is
//!
//! ```text
//! d/dt [p]   [0  1][p]   [0]
//!      [v] = [0 -k][v] + [k] u
//! ```
//!
//! where `u` is the commanded reference velocity. The same matrices serve as
//! simulation truth and as the MPC prediction model.

use nalgebra::{Matrix3, Matrix6, Matrix6x3, Vector3, Vector6};
use thiserror::Error;

/// UAV state: position and velocity, stacked as `[px py pz vx vy vz]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl UavState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self { position, velocity }
    }

    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut x = Vector6::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.position);
        x.fixed_rows_mut::<3>(3).copy_from(&self.velocity);
        x
    }

    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self {
            position: x.fixed_rows::<3>(0).into_owned(),
            velocity: x.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|c| c.is_finite())
    }
}

/// Reference-velocity command sent to the inner velocity loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityCommand(pub Vector3<f64>);

impl VelocityCommand {
    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("sampling period must be positive, got {0}")]
    NonPositiveTs(f64),
    #[error("velocity gain diagonal must be positive, got {0}")]
    NonPositiveGain(f64),
    #[error("non-finite state or command")]
    NonFinite,
}

/// Exact discrete-time form of the velocity-loop model.
///
/// Immutable after construction; `step` is a pure function of its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    pub a: Matrix6<f64>,
    pub b: Matrix6x3<f64>,
    pub ts: f64,
    pub kvel: Matrix3<f64>,
}

/// Zero-order-hold discretization of the velocity-loop model.
///
/// `kvel` is the diagonal of the 3x3 velocity gain matrix, `ts` the sampling
/// period in seconds. Per axis with gain `k` the closed forms are
/// `A = [[1, (1 - e^{-k ts})/k], [0, e^{-k ts}]]` and
/// `B = [ts - (1 - e^{-k ts})/k, 1 - e^{-k ts}]`.
pub fn discretize(kvel: Vector3<f64>, ts: f64) -> Result<LtiModel, ModelError> {
    if !(ts > 0.0) {
        return Err(ModelError::NonPositiveTs(ts));
    }
    for &k in kvel.iter() {
        if !(k > 0.0) {
            return Err(ModelError::NonPositiveGain(k));
        }
    }

    let mut a = Matrix6::identity();
    let mut b = Matrix6x3::zeros();
    for axis in 0..3 {
        let k = kvel[axis];
        let decay = (-k * ts).exp();
        let ramp = (1.0 - decay) / k;
        a[(axis, axis + 3)] = ramp;
        a[(axis + 3, axis + 3)] = decay;
        b[(axis, axis)] = ts - ramp;
        b[(axis + 3, axis)] = 1.0 - decay;
    }

    Ok(LtiModel {
        a,
        b,
        ts,
        kvel: Matrix3::from_diagonal(&kvel),
    })
}

impl LtiModel {
    /// One exact step of `x(k+1) = A x(k) + B u(k)`.
    pub fn step(&self, x: &UavState, u: &VelocityCommand) -> Result<UavState, ModelError> {
        if !x.is_finite() || !u.0.iter().all(|c| c.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let next = self.a * x.to_vector() + self.b * u.0;
        Ok(UavState::from_vector(&next))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn paper_model() -> LtiModel {
        discretize(Vector3::new(1.8, 1.8, 1.8), 0.2).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            discretize(Vector3::new(1.8, 1.8, 1.8), 0.0),
            Err(ModelError::NonPositiveTs(_))
        ));
        assert!(matches!(
            discretize(Vector3::new(1.8, -1.0, 1.8), 0.2),
            Err(ModelError::NonPositiveGain(_))
        ));
    }

    #[test]
    fn velocity_entries_match_closed_form() {
        let m = paper_model();
        let decay = (-0.36f64).exp();
        for axis in 0..3 {
            assert_abs_diff_eq!(m.a[(axis + 3, axis + 3)], decay, epsilon = 1e-15);
            assert_abs_diff_eq!(m.b[(axis + 3, axis)], 1.0 - decay, epsilon = 1e-15);
        }
    }

    #[test]
    fn short_horizon_limit() {
        let m = discretize(Vector3::new(1.8, 1.8, 1.8), 1e-9).unwrap();
        assert_abs_diff_eq!(m.a, Matrix6::identity(), epsilon = 1e-8);
        assert!(m.b.norm() < 1e-8);
    }

    #[test]
    fn zero_state_zero_input_is_equilibrium() {
        let m = paper_model();
        let next = m
            .step(&UavState::at_rest(Vector3::zeros()), &VelocityCommand::zero())
            .unwrap();
        assert_eq!(next.to_vector(), Vector6::zeros());
    }

    #[test]
    fn steady_tracking_fixed_point() {
        let m = paper_model();
        let u = Vector3::new(1.0, -0.5, 0.25);
        let x = UavState::new(Vector3::new(3.0, 2.0, 1.0), u);
        let next = m.step(&x, &VelocityCommand(u)).unwrap();
        assert_abs_diff_eq!(next.velocity, u, epsilon = 1e-12);
        assert_abs_diff_eq!(next.position, x.position + u * m.ts, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_input_rejected() {
        let m = paper_model();
        let x = UavState::new(Vector3::new(f64::NAN, 0.0, 0.0), Vector3::zeros());
        assert_eq!(m.step(&x, &VelocityCommand::zero()), Err(ModelError::NonFinite));
    }

    #[test]
    fn velocity_contracts_without_input() {
        let kvel = Vector3::new(1.8, 2.5, 0.9);
        let m = discretize(kvel, 0.2).unwrap();
        let factor = (-0.9f64 * 0.2).exp();
        let mut x = UavState::new(Vector3::zeros(), Vector3::new(1.0, -2.0, 1.5));
        for _ in 0..10 {
            let next = m.step(&x, &VelocityCommand::zero()).unwrap();
            assert!(next.velocity.norm() <= factor * x.velocity.norm() + 1e-12);
            x = next;
        }
    }

    #[test]
    fn axes_are_decoupled() {
        let m = paper_model();
        let x0 = UavState::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(0.1, 0.2, 0.3));
        let u0 = VelocityCommand(Vector3::new(0.5, 0.6, 0.7));
        let base = m.step(&x0, &u0).unwrap();

        let mut x1 = x0;
        x1.position.x += 10.0;
        x1.velocity.x -= 2.0;
        let mut u1 = u0;
        u1.0.x = -1.0;
        let bumped = m.step(&x1, &u1).unwrap();

        for axis in 1..3 {
            assert_eq!(base.position[axis], bumped.position[axis]);
            assert_eq!(base.velocity[axis], bumped.velocity[axis]);
        }
        assert_ne!(base.position.x, bumped.position.x);
    }

    // Fine-step Euler integration of the continuous model; independent of the
    // closed-form path under test.
    fn euler_oracle(kvel: Vector3<f64>, ts: f64, x: &UavState, u: Vector3<f64>, substeps: usize) -> UavState {
        let dt = ts / substeps as f64;
        let mut p = x.position;
        let mut v = x.velocity;
        for _ in 0..substeps {
            let a = kvel.component_mul(&(u - v));
            p += v * dt;
            v += a * dt;
        }
        UavState::new(p, v)
    }

    #[test]
    fn step_matches_coarse_euler_within_its_accuracy() {
        // 100 Euler substeps resolve the paper gains to about 1e-4 for
        // tracking errors of this size.
        let kvel = Vector3::new(1.8, 1.8, 1.8);
        let m = discretize(kvel, 0.2).unwrap();
        let x = UavState::new(Vector3::new(1.0, -2.0, 0.5), Vector3::new(0.1, 0.05, -0.1));
        let u = Vector3::new(0.0, 0.12, 0.02);
        let exact = m.step(&x, &VelocityCommand(u)).unwrap();
        let approx = euler_oracle(kvel, 0.2, &x, u, 100);
        assert_abs_diff_eq!(exact.position, approx.position, epsilon = 1e-4);
        assert_abs_diff_eq!(exact.velocity, approx.velocity, epsilon = 1e-4);
    }

    #[test]
    fn step_matches_fine_euler_integration() {
        let kvel = Vector3::new(1.8, 1.8, 1.8);
        let m = discretize(kvel, 0.2).unwrap();
        let x = UavState::new(Vector3::new(1.0, -2.0, 0.5), Vector3::new(0.4, 1.1, -0.7));
        let u = Vector3::new(-0.3, 0.8, 1.2);
        let exact = m.step(&x, &VelocityCommand(u)).unwrap();
        let approx = euler_oracle(kvel, 0.2, &x, u, 200_000);
        assert_abs_diff_eq!(exact.position, approx.position, epsilon = 1e-6);
        assert_abs_diff_eq!(exact.velocity, approx.velocity, epsilon = 1e-6);
    }

    proptest::proptest! {
        #[test]
        fn exactness_against_fine_integration(
            px in -10.0..10.0f64, vy in -3.0..3.0f64, vz in -3.0..3.0f64,
            ux in -3.0..3.0f64, uy in -3.0..3.0f64,
            k in 0.2..3.0f64, ts in 0.01..0.3f64,
        ) {
            let kvel = Vector3::new(k, k, k);
            let m = discretize(kvel, ts).unwrap();
            let x = UavState::new(Vector3::new(px, 0.0, 1.0), Vector3::new(0.0, vy, vz));
            let u = Vector3::new(ux, uy, 0.0);
            let exact = m.step(&x, &VelocityCommand(u)).unwrap();
            let fine = euler_oracle(kvel, ts, &x, u, 50_000);
            proptest::prop_assert!((exact.position - fine.position).norm() < 1e-4);
            proptest::prop_assert!((exact.velocity - fine.velocity).norm() < 1e-4);
        }
    }
}
