//! Lifted-space obstacle prediction: lifting functions over delay-embedded
//! positions, least-squares estimation of the one-step operator from history
//! buffers, fractional-power rescaling from the refit period down to the
//! control period, and multi-step position rollout.

use crate::tracking::{EmbeddedState, MIN_HISTORY_FOR_FIT};
use nalgebra::{Complex, DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative singular-value cutoff for the pseudo-inverse in the operator fit.
pub const PINV_CUTOFF: f64 = 1e-10;
/// Eigenvector-basis condition limit beyond which the fractional power falls
/// back to the first-order blend.
pub const EIG_COND_LIMIT: f64 = 1e8;
/// Relative reconstruction error limit for accepting the eigendecomposition.
pub const EIG_RECON_LIMIT: f64 = 1e-6;

/// Which observables the lift produces from an embedded state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftingKind {
    /// Instantaneous position only.
    P,
    /// Position and finite-difference velocity.
    Pv,
    /// Position, velocity, and finite-difference acceleration.
    Pva,
}

impl LiftingKind {
    pub fn dim(&self) -> usize {
        match self {
            LiftingKind::P => 3,
            LiftingKind::Pv => 6,
            LiftingKind::Pva => 9,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            LiftingKind::P => "p",
            LiftingKind::Pv => "pv",
            LiftingKind::Pva => "pva",
        }
    }
}

impl std::str::FromStr for LiftingKind {
    type Err = KoopmanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "p" => Ok(LiftingKind::P),
            "pv" => Ok(LiftingKind::Pv),
            "pva" => Ok(LiftingKind::Pva),
            other => Err(KoopmanError::UnknownLifting(other.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum KoopmanError {
    #[error("unknown lifting kind `{0}` (expected p, pv, or pva)")]
    UnknownLifting(String),
    #[error("lifted vector has dimension {got}, lifting expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("history holds {0} states, at least {MIN_HISTORY_FOR_FIT} are required")]
    InsufficientData(usize),
    #[error("non-finite entries in history data")]
    NonFiniteData,
    #[error("fractional power exponent {0} outside (0, 1]")]
    BadExponent(f64),
    #[error("embedding lag must be positive, got {0}")]
    BadLag(f64),
}

/// Maps an embedded state to its observable vector.
///
/// Finite differences over the lag approximate velocity and acceleration:
/// `v = (p0 - p1)/lag`, `a = (p0 - 2 p1 + p2)/lag^2` with `p0` newest.
pub fn lift(state: &EmbeddedState, kind: LiftingKind, t_theta: f64) -> DVector<f64> {
    assert!(t_theta > 0.0, "embedding lag must be positive");
    let [p0, p1, p2] = state.blocks;
    let mut z = DVector::zeros(kind.dim());
    z.fixed_rows_mut::<3>(0).copy_from(&p0);
    if kind.dim() >= 6 {
        z.fixed_rows_mut::<3>(3).copy_from(&((p0 - p1) / t_theta));
    }
    if kind.dim() >= 9 {
        z.fixed_rows_mut::<3>(6)
            .copy_from(&((p0 - 2.0 * p1 + p2) / (t_theta * t_theta)));
    }
    z
}

/// Extracts the position block from a lifted vector.
pub fn unlift(z: &DVector<f64>, kind: LiftingKind) -> Result<Vector3<f64>, KoopmanError> {
    if z.len() != kind.dim() {
        return Err(KoopmanError::DimensionMismatch {
            got: z.len(),
            expected: kind.dim(),
        });
    }
    Ok(z.fixed_rows::<3>(0).into_owned())
}

/// Observable matrix: one lifted history entry per column, oldest first.
pub fn observable_matrix(
    history: &[EmbeddedState],
    kind: LiftingKind,
    t_theta: f64,
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(kind.dim(), history.len());
    for (j, state) in history.iter().enumerate() {
        m.set_column(j, &lift(state, kind, t_theta));
    }
    m
}

/// Thin SVD by one-sided Jacobi rotations on the tall orientation.
///
/// Chosen over the library SVD because snapshot matrices here are routinely
/// rank-deficient by construction (stationary or low-dimensional histories),
/// and Jacobi orthogonalization degrades gracefully there: dead directions
/// come out as exact zero singular values instead of a corrupted factorization.
/// Returns `(u, sigma, v)` with `m = u * diag(sigma) * v^T`, singular values
/// sorted descending; columns of `u` for zero singular values are zero.
pub fn svd_jacobi(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let transposed = m.nrows() < m.ncols();
    let mut b = if transposed { m.transpose() } else { m.clone() };
    let (rows, cols) = (b.nrows(), b.ncols());
    let mut v = DMatrix::<f64>::identity(cols, cols);

    let tol = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for r in 0..rows {
                    alpha += b[(r, i)] * b[(r, i)];
                    beta += b[(r, j)] * b[(r, j)];
                    gamma += b[(r, i)] * b[(r, j)];
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let (bi, bj) = (b[(r, i)], b[(r, j)]);
                    b[(r, i)] = c * bi - s * bj;
                    b[(r, j)] = s * bi + c * bj;
                }
                for r in 0..cols {
                    let (vi, vj) = (v[(r, i)], v[(r, j)]);
                    v[(r, i)] = c * vi - s * vj;
                    v[(r, j)] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols).map(|j| b.column(j).norm()).collect();
    order.sort_by(|&a, &c| norms[c].total_cmp(&norms[a]));

    let mut u = DMatrix::<f64>::zeros(rows, cols);
    let mut sigma = DVector::<f64>::zeros(cols);
    let mut v_sorted = DMatrix::<f64>::zeros(cols, cols);
    for (slot, &j) in order.iter().enumerate() {
        sigma[slot] = norms[j];
        if norms[j] > 0.0 {
            u.set_column(slot, &(b.column(j) / norms[j]));
        }
        v_sorted.set_column(slot, &v.column(j));
    }

    if transposed {
        (v_sorted, sigma, u)
    } else {
        (u, sigma, v_sorted)
    }
}

/// Moore-Penrose pseudo-inverse by SVD with a relative singular-value cutoff.
pub fn pinv_svd(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let (u, sigma, v) = svd_jacobi(m);
    let cutoff = rel_cutoff * sigma.max();
    let mut pinv = DMatrix::<f64>::zeros(m.ncols(), m.nrows());
    for (k, &s) in sigma.iter().enumerate() {
        if s > cutoff {
            pinv += v.column(k) * u.column(k).transpose() / s;
        }
    }
    pinv
}

/// Result of a fractional matrix power, with the diagnostics callers need to
/// trust (or distrust) the rescaled operator.
#[derive(Debug, Clone)]
pub struct FracPower {
    pub matrix: DMatrix<f64>,
    /// True when the eigendecomposition path was accepted.
    pub eig_path: bool,
    pub cond_v: f64,
    pub recon_rel_err: f64,
}

/// Principal fractional power of a real square matrix.
///
/// Eigendecomposes over the complex field, raises each eigenvalue to `alpha`
/// on the principal branch, reconstructs, and projects to the real part.
/// Falls back to the first-order blend `(1-alpha) I + alpha M` when the
/// eigenvector basis is ill-conditioned, the reconstruction misses, or an
/// eigenvalue sits on the negative real axis (where the principal branch has
/// no conjugate partner and the real projection would distort the operator).
pub fn fractional_power(m: &DMatrix<f64>, alpha: f64) -> Result<FracPower, KoopmanError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(KoopmanError::BadExponent(alpha));
    }
    if m.nrows() != m.ncols() {
        return Err(KoopmanError::DimensionMismatch {
            got: m.ncols(),
            expected: m.nrows(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(KoopmanError::NonFiniteData);
    }
    let n = m.nrows();
    if alpha == 1.0 {
        return Ok(FracPower {
            matrix: m.clone(),
            eig_path: true,
            cond_v: 1.0,
            recon_rel_err: 0.0,
        });
    }

    let fallback = |cond_v: f64, recon_rel_err: f64| FracPower {
        matrix: DMatrix::identity(n, n) * (1.0 - alpha) + m * alpha,
        eig_path: false,
        cond_v,
        recon_rel_err,
    };

    let eigenvalues = m.complex_eigenvalues();
    let scale = eigenvalues.iter().map(|l| l.norm()).fold(1.0, f64::max);
    // Eigenvalues below this are numerical zeros: clustered together and
    // powered to exactly zero rather than amplified by a tiny-norm root.
    let zero_tol = 1e-8 * scale;
    let negative_real_axis = eigenvalues
        .iter()
        .any(|l| l.norm() > zero_tol && l.re < 0.0 && l.im.abs() <= 1e-10 * scale);
    if negative_real_axis {
        return Ok(fallback(f64::INFINITY, f64::INFINITY));
    }

    // Cluster eigenvalues so repeated (diagonalizable) spectra get a full
    // eigenspace basis instead of one nullspace vector copied per copy.
    let clusters = cluster_eigenvalues(&eigenvalues, 1e-8 * scale);

    let mc = m.map(|x| Complex::new(x, 0.0));
    let mut basis = DMatrix::<Complex<f64>>::zeros(n, n);
    let mut lambda = DVector::<Complex<f64>>::zeros(n);
    let mut col = 0;
    for (center, multiplicity) in &clusters {
        // Eigenvectors for the cluster: the smallest-eigenvalue directions of
        // the Hermitian Gram matrix of the shifted operator.
        let shifted = &mc - DMatrix::<Complex<f64>>::identity(n, n) * *center;
        let gram = shifted.adjoint() * &shifted;
        let eig = nalgebra::SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        for k in 0..*multiplicity {
            basis.set_column(col, &eig.eigenvectors.column(order[k]));
            lambda[col] = *center;
            col += 1;
        }
    }
    debug_assert_eq!(col, n);

    let inv = match basis.clone().lu().try_inverse() {
        Some(inv) => inv,
        None => return Ok(fallback(f64::INFINITY, f64::INFINITY)),
    };
    let cond_v = basis.norm() * inv.norm();
    if !cond_v.is_finite() || cond_v > EIG_COND_LIMIT {
        return Ok(fallback(cond_v, f64::INFINITY));
    }

    let m_norm = m.norm().max(f64::MIN_POSITIVE);
    let recon = &basis * DMatrix::from_diagonal(&lambda) * &inv;
    let recon_rel_err = (recon.map(|c| c.re) - m).norm().hypot(recon.map(|c| c.im).norm()) / m_norm;
    if recon_rel_err > EIG_RECON_LIMIT {
        return Ok(fallback(cond_v, recon_rel_err));
    }

    let powered = lambda.map(|l| {
        if l.norm() <= zero_tol {
            Complex::new(0.0, 0.0)
        } else {
            l.powf(alpha)
        }
    });
    let result = &basis * DMatrix::from_diagonal(&powered) * &inv;
    Ok(FracPower {
        matrix: result.map(|c| c.re),
        eig_path: true,
        cond_v,
        recon_rel_err,
    })
}

fn cluster_eigenvalues(eigenvalues: &DVector<Complex<f64>>, tol: f64) -> Vec<(Complex<f64>, usize)> {
    let n = eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigenvalues[a]
            .re
            .total_cmp(&eigenvalues[b].re)
            .then(eigenvalues[a].im.total_cmp(&eigenvalues[b].im))
    });
    let mut clusters: Vec<(Complex<f64>, usize)> = Vec::new();
    let mut members: Vec<Vec<Complex<f64>>> = Vec::new();
    for &idx in &order {
        let l = eigenvalues[idx];
        match members
            .iter_mut()
            .zip(clusters.iter())
            .find(|(_, (center, _))| (l - center).norm() <= tol)
        {
            Some((bucket, _)) => bucket.push(l),
            None => {
                clusters.push((l, 0));
                members.push(vec![l]);
            }
        }
    }
    members
        .iter()
        .map(|bucket| {
            let center = bucket.iter().sum::<Complex<f64>>() / bucket.len() as f64;
            (center, bucket.len())
        })
        .collect()
}

/// Fit diagnostics kept with each model.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    pub eig_path: bool,
    pub cond_v: f64,
    pub recon_rel_err: f64,
    /// Retained rank of the snapshot matrix in the pseudo-inverse.
    pub rank: usize,
}

/// Estimated lifted-space operator for one track: the coarse (refit-period)
/// operator and its fractional-power rescaling to the control period.
#[derive(Debug, Clone)]
pub struct KoopmanModel {
    pub k_coarse: DMatrix<f64>,
    pub k_fine: DMatrix<f64>,
    pub lifting: LiftingKind,
    pub t_theta: f64,
    pub fitted_at: f64,
    pub diagnostics: FitDiagnostics,
}

/// Least-squares operator fit from a history of embedded states (oldest
/// first, spaced `t_kappa` apart): the coarse operator maps each lifted
/// column to its successor; the fine operator is its `ts/t_kappa` power.
pub fn fit_operator(
    history: &[EmbeddedState],
    kind: LiftingKind,
    t_theta: f64,
    ts: f64,
    t_kappa: f64,
    fitted_at: f64,
) -> Result<KoopmanModel, KoopmanError> {
    if t_theta <= 0.0 {
        return Err(KoopmanError::BadLag(t_theta));
    }
    let count = history.len();
    if count < MIN_HISTORY_FOR_FIT {
        return Err(KoopmanError::InsufficientData(count));
    }
    let observables = observable_matrix(history, kind, t_theta);
    if observables.iter().any(|x| !x.is_finite()) {
        return Err(KoopmanError::NonFiniteData);
    }
    let snapshots = observables.columns(0, count - 1).into_owned();
    let successors = observables.columns(1, count - 1).into_owned();

    let (u, sigma, v) = svd_jacobi(&snapshots);
    let cutoff = PINV_CUTOFF * sigma.max();
    let rank = sigma.iter().filter(|&&s| s > cutoff).count();
    let mut pinv = DMatrix::<f64>::zeros(snapshots.ncols(), snapshots.nrows());
    for (k, &s) in sigma.iter().enumerate() {
        if s > cutoff {
            pinv += v.column(k) * u.column(k).transpose() / s;
        }
    }
    let k_coarse = &successors * pinv;

    let alpha = ts / t_kappa;
    let frac = fractional_power(&k_coarse, alpha)?;
    Ok(KoopmanModel {
        k_coarse,
        k_fine: frac.matrix,
        lifting: kind,
        t_theta,
        fitted_at,
        diagnostics: FitDiagnostics {
            eig_path: frac.eig_path,
            cond_v: frac.cond_v,
            recon_rel_err: frac.recon_rel_err,
            rank,
        },
    })
}

impl KoopmanModel {
    /// Rolls the lifted state forward `steps` fine steps and returns the
    /// position block after each step. Propagation stays in lifted space.
    pub fn predict(&self, state: &EmbeddedState, steps: usize) -> Vec<Vector3<f64>> {
        let mut z = lift(state, self.lifting, self.t_theta);
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            z = &self.k_fine * z;
            out.push(z.fixed_rows::<3>(0).into_owned());
        }
        out
    }
}
