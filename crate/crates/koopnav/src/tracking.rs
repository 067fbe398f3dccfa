//! Obstacle tracker: associates cluster observations to persistent tracks,
//! keeps the raw centroid log needed for delay embedding, and maintains the
//! history buffer of embedded states (spaced one refit period apart) that the
//! operator fit consumes.
//!
//! All periods are handled as integer step counts on the control grid so the
//! embedding and history strides stay exact.

use crate::sensing::ClusterObservation;
use nalgebra::{DMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

/// Hard cap on history length; fits use at most this many embedded states.
pub const MAX_HISTORY: usize = 25;
/// Minimum history length before an operator fit is attempted.
pub const MIN_HISTORY_FOR_FIT: usize = 5;

/// Delay-embedded obstacle state: three position samples, newest first,
/// spaced `t_theta` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddedState {
    pub blocks: [Vector3<f64>; 3],
}

impl EmbeddedState {
    pub fn new(newest: Vector3<f64>, mid: Vector3<f64>, oldest: Vector3<f64>) -> Self {
        Self {
            blocks: [newest, mid, oldest],
        }
    }

    pub fn newest(&self) -> Vector3<f64> {
        self.blocks[0]
    }

    pub fn to_vector(&self) -> SVector<f64, 9> {
        let mut v = SVector::<f64, 9>::zeros();
        for (i, b) in self.blocks.iter().enumerate() {
            v.fixed_rows_mut::<3>(3 * i).copy_from(b);
        }
        v
    }

    pub fn from_vector(v: &SVector<f64, 9>) -> Self {
        Self {
            blocks: [
                v.fixed_rows::<3>(0).into_owned(),
                v.fixed_rows::<3>(3).into_owned(),
                v.fixed_rows::<3>(6).into_owned(),
            ],
        }
    }
}

/// An embedded state together with the control step it was formed at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedEmbedding {
    pub step: u64,
    pub state: EmbeddedState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Association gate on centroid distance [m].
    pub gate_dist: f64,
    /// Consecutive misses tolerated before a track is dropped.
    pub max_misses: u32,
    /// Control/sensing period [s].
    pub ts: f64,
    /// Delay-embedding lag [s]; must be an integer multiple of `ts`.
    pub t_theta: f64,
    /// History spacing and operator refit period [s]; integer multiple of `ts`.
    pub t_kappa: f64,
    /// Savitzky-Golay window (odd) applied across the history buffer.
    pub sg_window: usize,
    /// Savitzky-Golay polynomial order, below the window length.
    pub sg_order: usize,
    /// History ring-buffer capacity, at most [`MAX_HISTORY`].
    pub history_capacity: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            gate_dist: 1.5,
            max_misses: 3,
            ts: 0.2,
            t_theta: 0.6,
            t_kappa: 1.0,
            sg_window: 5,
            sg_order: 2,
            history_capacity: MAX_HISTORY,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrackerConfigError {
    #[error("ts must be positive, got {0}")]
    NonPositiveTs(f64),
    #[error("{name} = {value} is not a positive integer multiple of ts")]
    NotMultipleOfTs { name: &'static str, value: f64 },
    #[error("smoother window must be odd and exceed the polynomial order (window {window}, order {order})")]
    BadSmoother { window: usize, order: usize },
    #[error("history capacity {0} outside [{MIN_HISTORY_FOR_FIT}, {MAX_HISTORY}]")]
    BadCapacity(usize),
    #[error("gate distance must be positive, got {0}")]
    NonPositiveGate(f64),
}

fn steps_of(period: f64, ts: f64) -> Option<u64> {
    let ratio = period / ts;
    let rounded = ratio.round();
    if rounded >= 1.0 && (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        Some(rounded as u64)
    } else {
        None
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerConfigError> {
        if !(self.ts > 0.0) {
            return Err(TrackerConfigError::NonPositiveTs(self.ts));
        }
        if !(self.gate_dist > 0.0) {
            return Err(TrackerConfigError::NonPositiveGate(self.gate_dist));
        }
        if steps_of(self.t_theta, self.ts).is_none() {
            return Err(TrackerConfigError::NotMultipleOfTs {
                name: "t_theta",
                value: self.t_theta,
            });
        }
        if steps_of(self.t_kappa, self.ts).is_none() {
            return Err(TrackerConfigError::NotMultipleOfTs {
                name: "t_kappa",
                value: self.t_kappa,
            });
        }
        if self.sg_window % 2 == 0 || self.sg_window <= self.sg_order {
            return Err(TrackerConfigError::BadSmoother {
                window: self.sg_window,
                order: self.sg_order,
            });
        }
        if !(MIN_HISTORY_FOR_FIT..=MAX_HISTORY).contains(&self.history_capacity) {
            return Err(TrackerConfigError::BadCapacity(self.history_capacity));
        }
        Ok(())
    }

    /// Embedding lag in control steps.
    pub fn theta_steps(&self) -> u64 {
        steps_of(self.t_theta, self.ts).expect("validated config")
    }

    /// History spacing / refit period in control steps.
    pub fn kappa_steps(&self) -> u64 {
        steps_of(self.t_kappa, self.ts).expect("validated config")
    }
}

/// A persistent obstacle hypothesis.
#[derive(Debug, Clone)]
pub struct ObstacleTrack {
    pub id: u64,
    pub last_centroid: Vector3<f64>,
    /// Decaying max of observed cluster radii; conservative by construction.
    pub radius_estimate: f64,
    pub misses: u32,
    /// Recent raw centroids keyed by control step, for delay embedding.
    raw_log: VecDeque<(u64, Vector3<f64>)>,
    /// Embedded states spaced exactly `kappa_steps` apart, oldest first.
    pub history: VecDeque<TimedEmbedding>,
}

impl ObstacleTrack {
    fn new(id: u64, obs: &ClusterObservation, step: u64) -> Self {
        let mut track = Self {
            id,
            last_centroid: obs.centroid,
            radius_estimate: obs.radius,
            misses: 0,
            raw_log: VecDeque::new(),
            history: VecDeque::new(),
        };
        track.raw_log.push_back((step, obs.centroid));
        track
    }

    fn record(&mut self, obs: &ClusterObservation, step: u64, raw_capacity: usize) {
        self.last_centroid = obs.centroid;
        self.radius_estimate = (self.radius_estimate * 0.99).max(obs.radius);
        self.misses = 0;
        self.raw_log.push_back((step, obs.centroid));
        while self.raw_log.len() > raw_capacity {
            self.raw_log.pop_front();
        }
    }

    fn raw_at(&self, step: u64) -> Option<Vector3<f64>> {
        self.raw_log
            .iter()
            .rev()
            .find(|(s, _)| *s == step)
            .map(|(_, p)| *p)
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }
}

/// Tracker state: the live track set plus the id counter. Owned by the
/// control loop; snapshots handed to prediction and control are copies.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub config: TrackerConfig,
    pub tracks: Vec<ObstacleTrack>,
    next_id: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackerConfigError> {
        config.validate()?;
        Ok(Self {
            config,
            tracks: Vec::new(),
            next_id: 0,
        })
    }

    fn raw_capacity(&self) -> usize {
        // Enough raw samples to form an embedding plus slack for misses.
        (2 * self.config.theta_steps() + self.config.kappa_steps()) as usize + 8
    }

    /// Greedy nearest-neighbor association of observations to tracks.
    ///
    /// Candidate pairs within the gate are consumed in ascending distance
    /// order; leftovers spawn fresh tracks or age existing ones out.
    pub fn associate(&mut self, observations: &[ClusterObservation], step: u64) {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, track) in self.tracks.iter().enumerate() {
            for (oi, obs) in observations.iter().enumerate() {
                let d = (track.last_centroid - obs.centroid).norm();
                if d <= self.config.gate_dist {
                    pairs.push((d, ti, oi));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let raw_capacity = self.raw_capacity();
        let mut track_used = vec![false; self.tracks.len()];
        let mut obs_used = vec![false; observations.len()];
        for (_, ti, oi) in pairs {
            if track_used[ti] || obs_used[oi] {
                continue;
            }
            track_used[ti] = true;
            obs_used[oi] = true;
            self.tracks[ti].record(&observations[oi], step, raw_capacity);
        }

        for (ti, used) in track_used.iter().enumerate() {
            if !used {
                self.tracks[ti].misses += 1;
            }
        }
        let max_misses = self.config.max_misses;
        self.tracks.retain(|t| t.misses <= max_misses);

        for (oi, obs) in observations.iter().enumerate() {
            if !obs_used[oi] {
                let id = self.next_id;
                self.next_id += 1;
                self.tracks.push(ObstacleTrack::new(id, obs, step));
            }
        }
    }

    /// Delay-embedded state at `step`, if the raw log covers all three lags.
    pub fn embed(&self, track: &ObstacleTrack, step: u64) -> Option<EmbeddedState> {
        let theta = self.config.theta_steps();
        if step < 2 * theta {
            return None;
        }
        let newest = track.raw_at(step)?;
        let mid = track.raw_at(step - theta)?;
        let oldest = track.raw_at(step - 2 * theta)?;
        Some(EmbeddedState::new(newest, mid, oldest))
    }

    /// Appends an embedded state to the history buffer.
    ///
    /// History entries must sit exactly `kappa_steps` apart; if continuity
    /// broke (a missed push), the buffer restarts so the spacing invariant
    /// holds for whatever the fit later consumes.
    pub fn push_history(&mut self, track_index: usize, state: EmbeddedState, step: u64) {
        let kappa = self.config.kappa_steps();
        let capacity = self.config.history_capacity;
        let track = &mut self.tracks[track_index];
        if let Some(last) = track.history.back() {
            if step != last.step + kappa {
                track.history.clear();
            }
        }
        track.history.push_back(TimedEmbedding { step, state });
        while track.history.len() > capacity {
            track.history.pop_front();
        }
    }

    /// History with each scalar coordinate sequence replaced by its
    /// Savitzky-Golay fit; returned unsmoothed when shorter than the window.
    pub fn smooth_history(&self, track: &ObstacleTrack) -> Vec<EmbeddedState> {
        let states: Vec<EmbeddedState> = track.history.iter().map(|h| h.state).collect();
        smooth_states(&states, self.config.sg_window, self.config.sg_order)
    }
}

/// Savitzky-Golay smoothing of a sequence of embedded states, coordinate by
/// coordinate.
pub fn smooth_states(states: &[EmbeddedState], window: usize, order: usize) -> Vec<EmbeddedState> {
    if states.len() < window {
        return states.to_vec();
    }
    let n = states.len();
    let mut out = vec![SVector::<f64, 9>::zeros(); n];
    let mut series = vec![0.0; n];
    for coord in 0..9 {
        for (i, s) in states.iter().enumerate() {
            series[i] = s.to_vector()[coord];
        }
        let smoothed = savgol_smooth(&series, window, order);
        for (i, v) in smoothed.iter().enumerate() {
            out[i][coord] = *v;
        }
    }
    out.iter().map(EmbeddedState::from_vector).collect()
}

/// Savitzky-Golay filter: per-window least-squares polynomial fit, with the
/// edge samples taken from the fits over the first and last full windows.
/// Sequences shorter than the window pass through unchanged.
pub fn savgol_smooth(series: &[f64], window: usize, order: usize) -> Vec<f64> {
    assert!(window % 2 == 1 && window > order, "invalid smoother parameters");
    let n = series.len();
    if n < window {
        return series.to_vec();
    }
    let half = window / 2;
    let proj = savgol_projection(window, order);
    let mut out = vec![0.0; n];

    let window_dot = |row: usize, start: usize| -> f64 {
        (0..window).map(|j| proj[(row, j)] * series[start + j]).sum()
    };

    for i in 0..n {
        out[i] = if i < half {
            window_dot(i, 0)
        } else if i >= n - half {
            window_dot(window - (n - i), n - window)
        } else {
            window_dot(half, i - half)
        };
    }
    out
}

/// Projection matrix of the least-squares polynomial fit over one window:
/// row `r` gives the weights that evaluate the fit at window position `r`.
fn savgol_projection(window: usize, order: usize) -> DMatrix<f64> {
    let half = (window / 2) as f64;
    let mut vandermonde = DMatrix::<f64>::zeros(window, order + 1);
    for i in 0..window {
        let t = i as f64 - half;
        let mut power = 1.0;
        for j in 0..=order {
            vandermonde[(i, j)] = power;
            power *= t;
        }
    }
    let gram = vandermonde.transpose() * &vandermonde;
    let inv = gram.try_inverse().expect("Gram matrix of distinct nodes");
    &vandermonde * inv * vandermonde.transpose()
}
