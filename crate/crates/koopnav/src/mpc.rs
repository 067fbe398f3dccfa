//! Receding-horizon controller: a condensed QP over the input sequence with
//! velocity and input-delta bounds, plus one linearized avoidance half-space
//! per obstacle per step, selected from a dodecahedral polytope around each
//! predicted obstacle position.
//!
//! Avoidance rows are softened by quadratic slack so a sudden obstacle
//! maneuver cannot render the step infeasible; the slack penalty keeps
//! violations at numerical-noise level whenever the hard problem is feasible.

use crate::dynamics::{LtiModel, UavState, VelocityCommand};
use crate::qp::{self, QpConfig, QpError, QpProblem, QpSolution, QpStatus, WarmStart};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MpcError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("track {0} carries an empty prediction list")]
    EmptyPrediction(u64),
    #[error("controller weights must be positive definite / positive")]
    BadWeights,
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// Controller weights, bounds, and safety geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    /// Horizon length in control steps.
    pub horizon: usize,
    /// Stage weight on the position tracking error.
    pub q_weight: Matrix3<f64>,
    /// Per-axis velocity bound [m/s].
    pub v_max: Vector3<f64>,
    /// Per-axis bound on `Kvel (u - v)`, an acceleration proxy [m/s^2].
    pub u_max: Vector3<f64>,
    /// UAV safety radius [m].
    pub uav_radius: f64,
    /// Extra per-obstacle margin [m].
    pub margin: f64,
    /// Quadratic penalty on avoidance slack.
    pub slack_weight: f64,
    /// Optional minimum-altitude row (kept off for pure tracking studies).
    pub ground_min_z: Option<f64>,
    /// Warm-start each solve from the previous step's shifted solution.
    pub warm_start: bool,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            q_weight: Matrix3::identity(),
            v_max: Vector3::new(2.0, 2.0, 2.0),
            u_max: Vector3::new(3.0, 3.0, 3.0),
            uav_radius: 0.4,
            margin: 0.3,
            slack_weight: 1e4,
            ground_min_z: None,
            warm_start: true,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), MpcError> {
        if self.horizon == 0 {
            return Err(MpcError::ZeroHorizon);
        }
        let pd = self.q_weight.symmetric_eigenvalues().iter().all(|&l| l > 0.0);
        if !pd
            || self.v_max.iter().any(|&v| v <= 0.0)
            || self.u_max.iter().any(|&v| v <= 0.0)
            || self.slack_weight <= 0.0
            || self.uav_radius <= 0.0
            || self.margin < 0.0
        {
            return Err(MpcError::BadWeights);
        }
        Ok(())
    }

    /// Required center distance to an obstacle with estimated radius `r`.
    pub fn required_distance(&self, r: f64) -> f64 {
        self.uav_radius + r + self.margin
    }
}

/// Face-normal set used to linearize the keep-out sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    normals: Vec<Vector3<f64>>,
}

impl Polytope {
    /// Regular dodecahedron: the twelve unit normals from (0, ±1, ±phi) and
    /// its cyclic permutations, phi the golden ratio. Faces come in opposite
    /// pairs, so the selection behaves symmetrically under direction flips.
    pub fn dodecahedron() -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut normals = Vec::with_capacity(12);
        for &(a, b) in &[(1.0, phi), (1.0, -phi), (-1.0, phi), (-1.0, -phi)] {
            normals.push(Vector3::new(0.0, a, b).normalize());
            normals.push(Vector3::new(a, b, 0.0).normalize());
            normals.push(Vector3::new(b, 0.0, a).normalize());
        }
        Self { normals }
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn num_faces(&self) -> usize {
        self.normals.len()
    }
}

/// Outcome of the supporting-plane choice for one (obstacle, step) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceSelection {
    pub index: usize,
    pub normal: Vector3<f64>,
    /// Signed distance of the current UAV position past the tangent plane.
    pub signed_distance: f64,
    /// Set when the UAV and the predicted obstacle position coincide.
    pub degenerate: bool,
}

/// Picks the face whose tangent plane the current UAV position clears by the
/// largest signed distance `eta' (uav - p) - r`; ties break to the lowest
/// face index.
pub fn select_face(
    poly: &Polytope,
    uav_now: Vector3<f64>,
    obs_pred: Vector3<f64>,
    obs_radius: f64,
) -> FaceSelection {
    let offset = uav_now - obs_pred;
    if offset.norm() == 0.0 {
        return FaceSelection {
            index: 0,
            normal: poly.normals[0],
            signed_distance: -obs_radius,
            degenerate: true,
        };
    }
    let mut best = FaceSelection {
        index: 0,
        normal: poly.normals[0],
        signed_distance: f64::NEG_INFINITY,
        degenerate: false,
    };
    for (j, normal) in poly.normals.iter().enumerate() {
        let rho = normal.dot(&offset) - obs_radius;
        if rho > best.signed_distance {
            best = FaceSelection {
                index: j,
                normal: *normal,
                signed_distance: rho,
                degenerate: false,
            };
        }
    }
    best
}

/// Free and forced response of the stacked state sequence over the horizon:
/// `x_stack = phi x0 + gamma u_stack`, block row `mu` covering steps 1..=H.
#[derive(Debug, Clone)]
pub struct PredictionMatrices {
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
}

pub fn prediction_matrices(model: &LtiModel, horizon: usize) -> PredictionMatrices {
    let h = horizon;
    let mut phi = DMatrix::<f64>::zeros(6 * h, 6);
    let mut gamma = DMatrix::<f64>::zeros(6 * h, 3 * h);
    let mut a_pow = model.a; // A^1 at block row 0
    for mu in 0..h {
        phi.view_mut((6 * mu, 0), (6, 6)).copy_from(&a_pow);
        // gamma block (mu, nu) = A^{mu - nu} B for nu <= mu (1-indexed steps).
        let mut block = model.b;
        for nu in (0..=mu).rev() {
            gamma.view_mut((6 * mu, 3 * nu), (6, 3)).copy_from(&block);
            block = model.a * block;
        }
        a_pow = model.a * a_pow;
    }
    PredictionMatrices { phi, gamma }
}

/// One obstacle's inputs to the controller: identity, radius estimate, and
/// the predicted centers for steps 1..=H (padded by holding the last entry
/// when shorter).
#[derive(Debug, Clone)]
pub struct TrackPrediction {
    pub id: u64,
    pub radius_estimate: f64,
    pub predictions: Vec<Vector3<f64>>,
}

/// Bookkeeping for one linear avoidance row.
#[derive(Debug, Clone, Copy)]
pub struct AvoidanceConstraint {
    pub step: usize,
    pub track_id: u64,
    pub face: usize,
    pub normal: Vector3<f64>,
    /// Right-hand side `eta' p + d` the UAV position response must exceed.
    pub offset: f64,
    /// Required distance `d` for this track.
    pub required: f64,
    pub degenerate: bool,
}

/// Condensed QP plus the decoding information for its solution.
pub struct QpEncoding {
    pub problem: QpProblem,
    pub horizon: usize,
    pub num_inputs: usize,
    pub num_slacks: usize,
    pub avoidance: Vec<AvoidanceConstraint>,
    pub matrices: PredictionMatrices,
    x0: UavState,
}

impl QpEncoding {
    /// First input of the optimal sequence.
    pub fn decode_command(&self, z: &DVector<f64>) -> VelocityCommand {
        VelocityCommand(Vector3::new(z[0], z[1], z[2]))
    }

    pub fn slack_view<'a>(&self, z: &'a DVector<f64>) -> nalgebra::DVectorView<'a, f64> {
        z.rows(self.num_inputs, self.num_slacks)
    }

    /// Reconstructs the predicted state sequence for a decision vector.
    pub fn decode_states(&self, z: &DVector<f64>) -> Vec<UavState> {
        let u = z.rows(0, self.num_inputs).into_owned();
        let stacked = &self.matrices.phi * self.x0.to_vector() + &self.matrices.gamma * u;
        (0..self.horizon)
            .map(|mu| {
                UavState::new(
                    stacked.fixed_rows::<3>(6 * mu).into_owned(),
                    stacked.fixed_rows::<3>(6 * mu + 3).into_owned(),
                )
            })
            .collect()
    }
}

/// Builds the condensed tracking-plus-avoidance QP for one control step.
///
/// Decision vector: `[u_0 .. u_{H-1}, s]` with one nonnegative slack per
/// avoidance row. States are eliminated through the prediction matrices;
/// velocity rows cover steps 1..=H, input rows steps 0..H-1, avoidance rows
/// steps 1..=H with the face chosen from the current position.
pub fn build_qp(
    model: &LtiModel,
    x0: &UavState,
    goal: &Vector3<f64>,
    tracks: &[TrackPrediction],
    poly: &Polytope,
    cfg: &MpcConfig,
) -> Result<QpEncoding, MpcError> {
    cfg.validate()?;
    let h = cfg.horizon;
    for t in tracks {
        if t.predictions.is_empty() {
            return Err(MpcError::EmptyPrediction(t.id));
        }
    }

    let matrices = prediction_matrices(model, h);
    let x0_vec = x0.to_vector();
    let free = &matrices.phi * x0_vec;

    // Position rows of the stacked response.
    let mut pos_gamma = DMatrix::<f64>::zeros(3 * h, 3 * h);
    let mut vel_gamma = DMatrix::<f64>::zeros(3 * h, 3 * h);
    let mut pos_free = DVector::<f64>::zeros(3 * h);
    let mut vel_free = DVector::<f64>::zeros(3 * h);
    for mu in 0..h {
        pos_gamma
            .view_mut((3 * mu, 0), (3, 3 * h))
            .copy_from(&matrices.gamma.view((6 * mu, 0), (3, 3 * h)));
        vel_gamma
            .view_mut((3 * mu, 0), (3, 3 * h))
            .copy_from(&matrices.gamma.view((6 * mu + 3, 0), (3, 3 * h)));
        pos_free.rows_mut(3 * mu, 3).copy_from(&free.rows(6 * mu, 3));
        vel_free.rows_mut(3 * mu, 3).copy_from(&free.rows(6 * mu + 3, 3));
    }

    let num_inputs = 3 * h;
    let num_slacks = tracks.len() * h;
    let n = num_inputs + num_slacks;

    // Objective: sum over steps of ||pos - goal||_Q^2 plus w_s ||s||^2.
    let mut weighted = DMatrix::<f64>::zeros(3 * h, 3 * h);
    for mu in 0..h {
        weighted
            .view_mut((3 * mu, 3 * mu), (3, 3))
            .copy_from(&cfg.q_weight);
    }
    let mut goal_stack = DVector::<f64>::zeros(3 * h);
    for mu in 0..h {
        goal_stack.rows_mut(3 * mu, 3).copy_from(goal);
    }
    let tracking_err = &pos_free - &goal_stack;
    let wpg = &weighted * &pos_gamma;
    let mut p = DMatrix::<f64>::zeros(n, n);
    p.view_mut((0, 0), (num_inputs, num_inputs))
        .copy_from(&(pos_gamma.transpose() * &wpg * 2.0));
    for k in 0..num_slacks {
        p[(num_inputs + k, num_inputs + k)] = 2.0 * cfg.slack_weight;
    }
    let mut q = DVector::<f64>::zeros(n);
    q.rows_mut(0, num_inputs)
        .copy_from(&(pos_gamma.transpose() * (&weighted * &tracking_err) * 2.0));

    let ground_rows = if cfg.ground_min_z.is_some() { h } else { 0 };
    let m = 3 * h + 3 * h + 2 * num_slacks + ground_rows;
    let mut g = DMatrix::<f64>::zeros(m, n);
    let mut lower = DVector::<f64>::from_element(m, f64::NEG_INFINITY);
    let mut upper = DVector::<f64>::from_element(m, f64::INFINITY);
    let mut row = 0;

    // Velocity bounds for steps 1..=H.
    for mu in 0..h {
        for axis in 0..3 {
            g.view_mut((row, 0), (1, num_inputs))
                .copy_from(&vel_gamma.view((3 * mu + axis, 0), (1, 3 * h)));
            lower[row] = -cfg.v_max[axis] - vel_free[3 * mu + axis];
            upper[row] = cfg.v_max[axis] - vel_free[3 * mu + axis];
            row += 1;
        }
    }

    // Input-delta bounds Kvel (u_mu - v_mu) for steps 0..H-1.
    for mu in 0..h {
        for axis in 0..3 {
            let k = model.kvel[(axis, axis)];
            if mu == 0 {
                g[(row, axis)] = k;
                lower[row] = -cfg.u_max[axis] + k * x0.velocity[axis];
                upper[row] = cfg.u_max[axis] + k * x0.velocity[axis];
            } else {
                // v_mu depends on inputs 0..mu-1 through the velocity rows.
                for col in 0..num_inputs {
                    g[(row, col)] = -k * vel_gamma[(3 * (mu - 1) + axis, col)];
                }
                g[(row, 3 * mu + axis)] += k;
                lower[row] = -cfg.u_max[axis] + k * vel_free[3 * (mu - 1) + axis];
                upper[row] = cfg.u_max[axis] + k * vel_free[3 * (mu - 1) + axis];
            }
            row += 1;
        }
    }

    // Avoidance half-spaces with slack, one per track per step.
    let mut avoidance = Vec::with_capacity(num_slacks);
    for (t_idx, track) in tracks.iter().enumerate() {
        let d = cfg.required_distance(track.radius_estimate);
        for mu in 0..h {
            let predicted = *track
                .predictions
                .get(mu)
                .unwrap_or_else(|| track.predictions.last().expect("non-empty"));
            let selection = select_face(poly, x0.position, predicted, track.radius_estimate);
            let eta = selection.normal;
            for col in 0..num_inputs {
                g[(row, col)] = eta.x * pos_gamma[(3 * mu, col)]
                    + eta.y * pos_gamma[(3 * mu + 1, col)]
                    + eta.z * pos_gamma[(3 * mu + 2, col)];
            }
            let slack_col = num_inputs + t_idx * h + mu;
            g[(row, slack_col)] = 1.0;
            let free_pos = Vector3::new(
                pos_free[3 * mu],
                pos_free[3 * mu + 1],
                pos_free[3 * mu + 2],
            );
            lower[row] = eta.dot(&predicted) + d - eta.dot(&free_pos);
            avoidance.push(AvoidanceConstraint {
                step: mu + 1,
                track_id: track.id,
                face: selection.index,
                normal: eta,
                offset: eta.dot(&predicted) + d,
                required: d,
                degenerate: selection.degenerate,
            });
            row += 1;
        }
    }

    // Slack nonnegativity.
    for k in 0..num_slacks {
        g[(row, num_inputs + k)] = 1.0;
        lower[row] = 0.0;
        row += 1;
    }

    // Optional minimum altitude.
    if let Some(z_min) = cfg.ground_min_z {
        for mu in 0..h {
            g.view_mut((row, 0), (1, num_inputs))
                .copy_from(&pos_gamma.view((3 * mu + 2, 0), (1, 3 * h)));
            lower[row] = z_min - pos_free[3 * mu + 2];
            row += 1;
        }
    }
    debug_assert_eq!(row, m);

    Ok(QpEncoding {
        problem: QpProblem {
            p,
            q,
            g,
            l: lower,
            u: upper,
        },
        horizon: h,
        num_inputs,
        num_slacks,
        avoidance,
        matrices,
        x0: *x0,
    })
}

/// Per-step solver and safety diagnostics.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub solve_time: Duration,
    pub status: QpStatus,
    pub iterations: usize,
    pub max_slack: f64,
    /// Min over obstacles and steps of predicted center distance minus `d`.
    pub min_predicted_clearance: f64,
    pub braked: bool,
}

#[derive(Debug, Clone)]
pub struct ControlOutcome {
    pub command: VelocityCommand,
    pub diagnostics: StepDiagnostics,
}

/// Receding-horizon controller with optional warm starting between steps.
pub struct MpcController {
    pub config: MpcConfig,
    pub qp_config: QpConfig,
    pub polytope: Polytope,
    model: LtiModel,
    previous: Option<QpSolution>,
    previous_dims: (usize, usize),
}

/// Residual level below which a max-iteration iterate is still applied.
const ACCEPTABLE_RESIDUAL: f64 = 1e-3;

impl MpcController {
    pub fn new(model: LtiModel, config: MpcConfig) -> Result<Self, MpcError> {
        config.validate()?;
        Ok(Self {
            config,
            qp_config: QpConfig::default(),
            polytope: Polytope::dodecahedron(),
            model,
            previous: None,
            previous_dims: (0, 0),
        })
    }

    pub fn model(&self) -> &LtiModel {
        &self.model
    }

    /// Builds and solves one step; returns the first input and diagnostics.
    ///
    /// A solve that hits the iteration cap is applied only if its residuals
    /// are acceptable; otherwise the controller commands zero velocity.
    pub fn control_step(
        &mut self,
        x0: &UavState,
        goal: &Vector3<f64>,
        tracks: &[TrackPrediction],
    ) -> Result<ControlOutcome, MpcError> {
        let start = Instant::now();
        let encoding = build_qp(&self.model, x0, goal, tracks, &self.polytope, &self.config)?;
        let dims = (
            encoding.problem.num_vars(),
            encoding.problem.num_constraints(),
        );

        let warm = if self.config.warm_start && dims == self.previous_dims {
            self.previous.as_ref().map(|prev| {
                let mut z = prev.z.clone();
                // Shift the input sequence one step; slacks restart at zero.
                let h = encoding.horizon;
                for mu in 0..h - 1 {
                    for axis in 0..3 {
                        z[3 * mu + axis] = prev.z[3 * (mu + 1) + axis];
                    }
                }
                for k in 0..encoding.num_slacks {
                    z[encoding.num_inputs + k] = 0.0;
                }
                WarmStart {
                    z,
                    duals: prev.duals.clone(),
                }
            })
        } else {
            None
        };

        let solution = qp::solve(&encoding.problem, &self.qp_config, warm.as_ref())?;
        let solve_time = start.elapsed();

        let usable = match solution.status {
            QpStatus::Optimal => true,
            _ => {
                solution.primal_residual.max(solution.dual_residual) <= ACCEPTABLE_RESIDUAL
            }
        };
        let command = if usable {
            encoding.decode_command(&solution.z)
        } else {
            VelocityCommand::zero()
        };

        let max_slack = encoding
            .slack_view(&solution.z)
            .iter()
            .fold(0.0f64, |acc, &s| acc.max(s));
        let states = encoding.decode_states(&solution.z);
        let mut min_clearance = f64::INFINITY;
        for track in tracks {
            let d = self.config.required_distance(track.radius_estimate);
            for (mu, state) in states.iter().enumerate() {
                let predicted = *track
                    .predictions
                    .get(mu)
                    .unwrap_or_else(|| track.predictions.last().expect("non-empty"));
                min_clearance = min_clearance.min((state.position - predicted).norm() - d);
            }
        }

        let diagnostics = StepDiagnostics {
            solve_time,
            status: solution.status,
            iterations: solution.iterations,
            max_slack,
            min_predicted_clearance: min_clearance,
            braked: !usable,
        };
        self.previous = Some(solution);
        self.previous_dims = dims;
        Ok(ControlOutcome {
            command,
            diagnostics,
        })
    }

    pub fn reset(&mut self) {
        self.previous = None;
        self.previous_dims = (0, 0);
    }
}

/// Serializable mirror of [`MpcConfig`] for scenario files (diagonal Q).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct MpcConfigFile {
    pub horizon: usize,
    pub q: [f64; 3],
    pub v_max: [f64; 3],
    pub u_max: [f64; 3],
    pub uav_radius: f64,
    pub margin: f64,
    pub slack_weight: f64,
    pub ground_min_z: Option<f64>,
    pub warm_start: bool,
}

impl Default for MpcConfigFile {
    fn default() -> Self {
        let cfg = MpcConfig::default();
        Self {
            horizon: cfg.horizon,
            q: [1.0, 1.0, 1.0],
            v_max: [cfg.v_max.x, cfg.v_max.y, cfg.v_max.z],
            u_max: [cfg.u_max.x, cfg.u_max.y, cfg.u_max.z],
            uav_radius: cfg.uav_radius,
            margin: cfg.margin,
            slack_weight: cfg.slack_weight,
            ground_min_z: cfg.ground_min_z,
            warm_start: cfg.warm_start,
        }
    }
}

impl From<&MpcConfigFile> for MpcConfig {
    fn from(f: &MpcConfigFile) -> Self {
        Self {
            horizon: f.horizon,
            q_weight: Matrix3::from_diagonal(&Vector3::new(f.q[0], f.q[1], f.q[2])),
            v_max: Vector3::from_row_slice(&f.v_max),
            u_max: Vector3::from_row_slice(&f.u_max),
            uav_radius: f.uav_radius,
            margin: f.margin,
            slack_weight: f.slack_weight,
            ground_min_z: f.ground_min_z,
            warm_start: f.warm_start,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::discretize;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> LtiModel {
        discretize(Vector3::new(1.8, 1.8, 1.8), 0.2).unwrap()
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() > 1e-3 {
                return v.normalize();
            }
        }
    }

    #[test]
    fn dodecahedron_normals_are_unit_and_paired() {
        let poly = Polytope::dodecahedron();
        assert_eq!(poly.num_faces(), 12);
        for n in poly.normals() {
            assert_abs_diff_eq!(n.norm(), 1.0, epsilon = 1e-12);
            assert!(
                poly.normals().iter().any(|m| (m + n).norm() < 1e-12),
                "normal {n:?} lacks an opposite face"
            );
        }
    }

    #[test]
    fn polytope_contains_obstacle_sphere() {
        let poly = Polytope::dodecahedron();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let center = Vector3::new(1.0, -2.0, 3.0);
        let radius = 0.75;
        for _ in 0..10_000 {
            let point = center + random_unit(&mut rng) * radius;
            for normal in poly.normals() {
                let slack = radius - normal.dot(&(point - center));
                assert!(slack >= -1e-9, "sphere point escapes face: slack {slack}");
            }
        }
    }

    #[test]
    fn face_selection_aligned_direction() {
        let poly = Polytope::dodecahedron();
        let target = poly.normals()[4];
        let obstacle = Vector3::new(0.5, 0.5, 0.5);
        let uav = obstacle + target * 5.0;
        let sel = select_face(&poly, uav, obstacle, 1.0);
        assert_eq!(sel.index, 4);
        assert_abs_diff_eq!(sel.signed_distance, 4.0, epsilon = 1e-12);
        assert!(!sel.degenerate);
    }

    #[test]
    fn face_selection_flips_with_direction() {
        let poly = Polytope::dodecahedron();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..100 {
            let dir = random_unit(&mut rng) * rng.random_range(1.0..10.0);
            let a = select_face(&poly, dir, Vector3::zeros(), 0.5);
            let b = select_face(&poly, -dir, Vector3::zeros(), 0.5);
            let opposite = -poly.normals()[a.index];
            assert_abs_diff_eq!(poly.normals()[b.index], opposite, epsilon = 1e-12);
            assert_abs_diff_eq!(a.signed_distance, b.signed_distance, epsilon = 1e-12);
        }
    }

    #[test]
    fn face_selection_matches_exhaustive_argmax() {
        let poly = Polytope::dodecahedron();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..1000 {
            let uav = random_unit(&mut rng) * rng.random_range(0.5..20.0);
            let obs = random_unit(&mut rng) * rng.random_range(0.0..5.0);
            let r = rng.random_range(0.1..2.0);
            let sel = select_face(&poly, uav, obs, r);
            let best = poly
                .normals()
                .iter()
                .map(|n| n.dot(&(uav - obs)) - r)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_abs_diff_eq!(sel.signed_distance, best, epsilon = 1e-12);
        }
    }

    #[test]
    fn face_selection_degenerate_geometry() {
        let poly = Polytope::dodecahedron();
        let p = Vector3::new(1.0, 1.0, 1.0);
        let sel = select_face(&poly, p, p, 0.5);
        assert!(sel.degenerate);
        assert_eq!(sel.index, 0);
    }

    #[test]
    fn current_position_feasible_when_clear_of_obstacle() {
        let poly = Polytope::dodecahedron();
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let cfg = MpcConfig::default();
        for _ in 0..200 {
            let obs = random_unit(&mut rng) * rng.random_range(0.0..3.0);
            let uav = obs + random_unit(&mut rng) * rng.random_range(2.0..15.0);
            let r_est = rng.random_range(0.2..0.8);
            let d = cfg.required_distance(r_est);
            let sel = select_face(&poly, uav, obs, r_est);
            if sel.signed_distance >= d - r_est {
                assert!(sel.normal.dot(&(uav - obs)) >= d - 1e-9);
            }
        }
    }

    #[test]
    fn condensed_matrices_match_iterated_step() {
        let model = model();
        let h = 12;
        let matrices = prediction_matrices(&model, h);
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let x0 = UavState::new(
            Vector3::new(1.0, -0.5, 2.0),
            Vector3::new(0.3, 0.1, -0.2),
        );
        let inputs: Vec<Vector3<f64>> = (0..h).map(|_| random_unit(&mut rng) * 1.5).collect();
        let mut u_stack = DVector::<f64>::zeros(3 * h);
        for (mu, u) in inputs.iter().enumerate() {
            u_stack.rows_mut(3 * mu, 3).copy_from(u);
        }
        let stacked = &matrices.phi * x0.to_vector() + &matrices.gamma * u_stack;

        let mut state = x0;
        for mu in 0..h {
            state = model.step(&state, &VelocityCommand(inputs[mu])).unwrap();
            let predicted = stacked.rows(6 * mu, 6).into_owned();
            assert!(
                (predicted - state.to_vector()).norm() < 1e-9,
                "mismatch at step {mu}"
            );
        }
    }

    #[test]
    fn at_goal_with_no_obstacles_commands_nothing() {
        let model = model();
        let goal = Vector3::new(2.0, 1.0, 1.5);
        let mut controller = MpcController::new(model, MpcConfig::default()).unwrap();
        let x0 = UavState::at_rest(goal);
        for _ in 0..3 {
            let out = controller.control_step(&x0, &goal, &[]).unwrap();
            assert!(out.command.0.norm() <= 1e-3, "command {:?}", out.command.0);
            assert_eq!(out.diagnostics.status, QpStatus::Optimal);
        }
    }

    #[test]
    fn single_step_horizon_matches_analytic_least_squares() {
        // With H = 1 and no constraints active, the optimum minimizes
        // ||S_p (A x0 + B u) - r||_Q^2; solve the normal equations directly.
        let model = model();
        let cfg = MpcConfig {
            horizon: 1,
            v_max: Vector3::new(100.0, 100.0, 100.0),
            u_max: Vector3::new(1000.0, 1000.0, 1000.0),
            ..MpcConfig::default()
        };
        let x0 = UavState::new(Vector3::new(0.2, -0.1, 1.0), Vector3::new(0.05, 0.0, -0.02));
        let goal = Vector3::new(0.25, 0.0, 1.05);
        let encoding = build_qp(&model, &x0, &goal, &[], &Polytope::dodecahedron(), &cfg).unwrap();
        let tight = QpConfig {
            eps_abs: 1e-10,
            eps_rel: 1e-10,
            max_iter: 20_000,
            ..QpConfig::default()
        };
        let sol = qp::solve(&encoding.problem, &tight, None).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);

        let b_pos = model.b.fixed_rows::<3>(0).into_owned();
        let a_pos = model.a.fixed_rows::<3>(0).into_owned();
        let target = goal - a_pos * x0.to_vector();
        let analytic = b_pos.lu().solve(&target).unwrap();
        for axis in 0..3 {
            assert_abs_diff_eq!(sol.z[axis], analytic[axis], epsilon = 1e-6);
        }
    }

    #[test]
    fn blocking_obstacle_constraint_respected_at_optimum() {
        let model = model();
        let cfg = MpcConfig::default();
        let x0 = UavState::at_rest(Vector3::new(0.0, 0.0, 1.5));
        let goal = Vector3::new(10.0, 0.0, 1.5);
        let obstacle = Vector3::new(3.0, 0.0, 1.5);
        let track = TrackPrediction {
            id: 0,
            radius_estimate: 0.3,
            predictions: vec![obstacle; cfg.horizon],
        };
        let encoding = build_qp(
            &model,
            &x0,
            &goal,
            &[track.clone()],
            &Polytope::dodecahedron(),
            &cfg,
        )
        .unwrap();
        let sol = qp::solve(&encoding.problem, &QpConfig::default(), None).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);

        let d = cfg.required_distance(track.radius_estimate);
        let states = encoding.decode_states(&sol.z);
        let slacks = encoding.slack_view(&sol.z);
        for (row, constraint) in encoding.avoidance.iter().enumerate() {
            let state = &states[constraint.step - 1];
            let lhs = constraint.normal.dot(&state.position) + slacks[row];
            assert!(
                lhs >= constraint.offset - 1e-6,
                "avoidance row {row} violated: {lhs} < {}",
                constraint.offset
            );
            assert_abs_diff_eq!(constraint.required, d, epsilon = 1e-12);
        }
        // Far from the obstacle at the start, so no slack should be needed.
        let total_slack: f64 = slacks.iter().sum();
        assert!(total_slack <= 1e-4, "unexpected slack {total_slack}");
    }

    #[test]
    fn slack_inactive_when_obstacle_far_from_path() {
        let model = model();
        let cfg = MpcConfig::default();
        let x0 = UavState::at_rest(Vector3::new(0.0, 0.0, 1.5));
        let goal = Vector3::new(5.0, 0.0, 1.5);
        let track = TrackPrediction {
            id: 0,
            radius_estimate: 0.3,
            predictions: vec![Vector3::new(2.0, 8.0, 1.5); cfg.horizon],
        };
        let encoding = build_qp(&model, &x0, &goal, &[track], &Polytope::dodecahedron(), &cfg).unwrap();
        let sol = qp::solve(&encoding.problem, &QpConfig::default(), None).unwrap();
        let slack_sq: f64 = encoding.slack_view(&sol.z).iter().map(|s| s * s).sum();
        assert!(slack_sq <= 1e-8, "slack energy {slack_sq}");
    }

    #[test]
    fn short_prediction_lists_are_padded() {
        let model = model();
        let cfg = MpcConfig::default();
        let x0 = UavState::at_rest(Vector3::zeros());
        let track = TrackPrediction {
            id: 3,
            radius_estimate: 0.3,
            predictions: vec![Vector3::new(4.0, 0.0, 0.0)],
        };
        let encoding = build_qp(
            &model,
            &x0,
            &Vector3::new(1.0, 0.0, 0.0),
            &[track],
            &Polytope::dodecahedron(),
            &cfg,
        )
        .unwrap();
        assert_eq!(encoding.avoidance.len(), cfg.horizon);
        let empty = TrackPrediction {
            id: 4,
            radius_estimate: 0.3,
            predictions: vec![],
        };
        assert!(matches!(
            build_qp(
                &model,
                &x0,
                &Vector3::zeros(),
                &[empty],
                &Polytope::dodecahedron(),
                &cfg
            ),
            Err(MpcError::EmptyPrediction(4))
        ));
    }

    #[test]
    fn cruise_saturates_velocity_bound() {
        // Closed loop against the plant: commanded speed should reach the
        // bound mid-flight on a long straight run.
        let model = model();
        let cfg = MpcConfig::default();
        let mut controller = MpcController::new(model.clone(), cfg).unwrap();
        let goal = Vector3::new(10.0, 0.0, 1.5);
        let mut state = UavState::at_rest(Vector3::new(0.0, 0.0, 1.5));
        let mut top_speed = 0.0f64;
        for _ in 0..60 {
            let out = controller.control_step(&state, &goal, &[]).unwrap();
            state = model.step(&state, &out.command).unwrap();
            top_speed = top_speed.max(state.velocity.norm());
            for axis in 0..3 {
                assert!(state.velocity[axis].abs() <= 2.0 + 1e-6);
            }
        }
        assert!(top_speed > 1.9, "expected near-saturated cruise, got {top_speed}");
        assert!((state.position - goal).norm() < 0.2, "did not reach goal");
    }

    #[test]
    fn ground_row_keeps_altitude() {
        let model = model();
        let cfg = MpcConfig {
            ground_min_z: Some(0.5),
            ..MpcConfig::default()
        };
        let mut controller = MpcController::new(model.clone(), cfg).unwrap();
        // Goal below the floor: the controller must hover at the floor.
        let goal = Vector3::new(1.0, 0.0, 0.0);
        let mut state = UavState::at_rest(Vector3::new(0.0, 0.0, 1.5));
        for _ in 0..80 {
            let out = controller.control_step(&state, &goal, &[]).unwrap();
            state = model.step(&state, &out.command).unwrap();
            assert!(state.position.z >= 0.5 - 1e-3, "altitude {}", state.position.z);
        }
        assert_abs_diff_eq!(state.position.z, 0.5, epsilon = 0.05);
    }
}
