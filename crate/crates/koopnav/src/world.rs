//! Ground-truth scenario state: obstacle motion generators and the world
//! clock. Everything here is evaluated by time value, so concurrent reads are
//! safe and runs are reproducible by construction.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Closed-form obstacle motion families.
///
/// `figure_eight` is the Gerono lemniscate, the simplest closed figure-eight.
/// Planar families keep the altitude of their center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MotionSpec {
    Circular {
        center: Vector3<f64>,
        amplitude: f64,
        rate: f64,
        #[serde(default)]
        phase: f64,
    },
    FigureEight {
        center: Vector3<f64>,
        amplitude: f64,
        rate: f64,
        #[serde(default)]
        phase: f64,
    },
    Linear {
        center: Vector3<f64>,
        velocity: Vector3<f64>,
    },
    Stationary {
        center: Vector3<f64>,
    },
}

impl MotionSpec {
    /// Truth position at time `t` (seconds).
    pub fn position(&self, t: f64) -> Vector3<f64> {
        match self {
            MotionSpec::Circular {
                center,
                amplitude,
                rate,
                phase,
            } => {
                let theta = rate * t + phase;
                center + Vector3::new(amplitude * theta.cos(), amplitude * theta.sin(), 0.0)
            }
            MotionSpec::FigureEight {
                center,
                amplitude,
                rate,
                phase,
            } => {
                let theta = rate * t + phase;
                center
                    + Vector3::new(
                        amplitude * theta.sin(),
                        amplitude * theta.sin() * theta.cos(),
                        0.0,
                    )
            }
            MotionSpec::Linear { center, velocity } => center + velocity * t,
            MotionSpec::Stationary { center } => *center,
        }
    }

    /// Peak speed of the family, used for sanity checks and gating heuristics.
    pub fn max_speed(&self) -> f64 {
        match self {
            MotionSpec::Circular { amplitude, rate, .. } => (amplitude * rate).abs(),
            // |d/dt (sin, sin cos)| = |w| a sqrt(cos^2 + cos^2(2t)) <= |w| a sqrt(2)
            MotionSpec::FigureEight { amplitude, rate, .. } => {
                (amplitude * rate).abs() * 2f64.sqrt()
            }
            MotionSpec::Linear { velocity, .. } => velocity.norm(),
            MotionSpec::Stationary { .. } => 0.0,
        }
    }
}

/// One obstacle as the world knows it: a rigid sphere on a motion law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleTruth {
    #[serde(default)]
    pub id: u64,
    pub radius: f64,
    pub motion: MotionSpec,
}

/// Truth pose of one obstacle at a queried instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstaclePose {
    pub id: u64,
    pub center: Vector3<f64>,
    pub radius: f64,
}

/// Evaluates every obstacle's truth pose at time `t`.
pub fn advance_world(obstacles: &[ObstacleTruth], t: f64) -> Vec<ObstaclePose> {
    obstacles
        .iter()
        .map(|o| ObstaclePose {
            id: o.id,
            center: o.motion.position(t),
            radius: o.radius,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn circular_phase_zero() {
        let spec = MotionSpec::Circular {
            center: Vector3::zeros(),
            amplitude: 5.0,
            rate: 0.5,
            phase: 0.0,
        };
        assert_abs_diff_eq!(spec.position(0.0), Vector3::new(5.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn linear_advances_with_time() {
        let spec = MotionSpec::Linear {
            center: Vector3::zeros(),
            velocity: Vector3::new(1.0, 0.0, 0.0),
        };
        assert_abs_diff_eq!(spec.position(2.5), Vector3::new(2.5, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn figure_eight_half_period_returns_to_center() {
        let center = Vector3::new(1.0, 2.0, 3.0);
        let spec = MotionSpec::FigureEight {
            center,
            amplitude: 5.0,
            rate: 0.5,
            phase: 0.0,
        };
        assert_abs_diff_eq!(spec.position(PI / 0.5), center, epsilon = 1e-9);
    }

    #[test]
    fn stationary_is_constant() {
        let center = Vector3::new(-1.0, 0.5, 2.0);
        let spec = MotionSpec::Stationary { center };
        for t in [0.0, 1.0, 17.3, 1e4] {
            assert_eq!(spec.position(t), center);
        }
    }

    #[test]
    fn advance_world_empty_and_multi() {
        assert!(advance_world(&[], 1.0).is_empty());
        let obstacles: Vec<ObstacleTruth> = (0..3)
            .map(|i| ObstacleTruth {
                id: i,
                radius: 0.4,
                motion: MotionSpec::Circular {
                    center: Vector3::new(i as f64, 0.0, 1.5),
                    amplitude: 3.0,
                    rate: 0.5,
                    phase: 0.0,
                },
            })
            .collect();
        let poses = advance_world(&obstacles, 2.0);
        assert_eq!(poses.len(), 3);
        let mut ids: Vec<u64> = poses.iter().map(|p| p.id).collect();
        ids.dedup();
        assert_eq!(ids.len(), 3);
    }

    #[test]
    fn circular_speed_matches_rate() {
        let spec = MotionSpec::Circular {
            center: Vector3::new(1.0, -2.0, 0.5),
            amplitude: 5.0,
            rate: 0.5,
            phase: 0.3,
        };
        let h = 1e-6;
        for t in [0.0, 1.7, 9.4] {
            let speed = (spec.position(t + h) - spec.position(t - h)).norm() / (2.0 * h);
            assert_abs_diff_eq!(speed, 2.5, epsilon = 2.5e-3);
        }
    }

    #[test]
    fn max_speed_bounds_finite_differences() {
        let specs = [
            MotionSpec::FigureEight {
                center: Vector3::zeros(),
                amplitude: 2.5,
                rate: 0.4,
                phase: 0.0,
            },
            MotionSpec::Linear {
                center: Vector3::zeros(),
                velocity: Vector3::new(0.3, -0.4, 0.0),
            },
        ];
        let h = 1e-5;
        for spec in &specs {
            let cap = spec.max_speed() + 1e-6;
            for i in 0..200 {
                let t = i as f64 * 0.1;
                let speed = (spec.position(t + h) - spec.position(t - h)).norm() / (2.0 * h);
                assert!(speed <= cap, "speed {speed} exceeds cap {cap}");
            }
        }
    }
}
