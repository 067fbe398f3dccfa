//! Dense convex quadratic-program solver for problems of the form
//!
//! ```text
//! minimize   1/2 z' P z + q' z
//! subject to l <= G z <= u
//! ```
//!
//! solved by operator splitting (ADMM) with over-relaxation: a regularized
//! KKT solve alternating with a box projection and dual updates. Problem
//! sizes here are MPC-scale (a few hundred variables), so the KKT matrix is
//! factored densely once per solve.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Regularization added to the quadratic term in the KKT system.
pub const SIGMA_REG: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("quadratic term is not symmetric")]
    NotSymmetric,
    #[error("quadratic term is not positive semidefinite")]
    NotPsd,
    #[error("bounds must satisfy l <= u with no NaN entries")]
    InvalidBounds,
    #[error("non-finite entries in problem data")]
    NonFinite,
}

/// Problem data. Bounds may be infinite on either side.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub g: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
}

impl QpProblem {
    pub fn num_vars(&self) -> usize {
        self.p.nrows()
    }

    pub fn num_constraints(&self) -> usize {
        self.g.nrows()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.p.nrows();
        let m = self.g.nrows();
        if self.p.ncols() != n {
            return Err(QpError::DimensionMismatch("P must be square".into()));
        }
        if self.q.len() != n {
            return Err(QpError::DimensionMismatch(format!(
                "q has {} entries, expected {n}",
                self.q.len()
            )));
        }
        if self.g.ncols() != n && m > 0 {
            return Err(QpError::DimensionMismatch(format!(
                "G has {} columns, expected {n}",
                self.g.ncols()
            )));
        }
        if self.l.len() != m || self.u.len() != m {
            return Err(QpError::DimensionMismatch(format!(
                "bounds have {}/{} entries, expected {m}",
                self.l.len(),
                self.u.len()
            )));
        }
        if self.p.iter().any(|x| !x.is_finite())
            || self.q.iter().any(|x| !x.is_finite())
            || self.g.iter().any(|x| !x.is_finite())
        {
            return Err(QpError::NonFinite);
        }
        let sym_err = (&self.p - self.p.transpose()).norm();
        if sym_err > 1e-10 * self.p.norm().max(1.0) {
            return Err(QpError::NotSymmetric);
        }
        for i in 0..m {
            if self.l[i].is_nan() || self.u[i].is_nan() || self.l[i] > self.u[i] {
                return Err(QpError::InvalidBounds);
            }
        }
        let regularized = &self.p + DMatrix::identity(n, n) * SIGMA_REG;
        if regularized.cholesky().is_none() {
            return Err(QpError::NotPsd);
        }
        Ok(())
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * (z.transpose() * &self.p * z)[(0, 0)] + self.q.dot(z)
    }

    /// Plain-text dump: a header line, dimensions, then `P`, `q`, `G`, `l`,
    /// `u` as whitespace-separated rows. Infinite bounds print as `inf`.
    pub fn write_dump(&self) -> String {
        let mut out = String::from("koopnav-qp 1\n");
        let (n, m) = (self.num_vars(), self.num_constraints());
        out.push_str(&format!("{n} {m}\n"));
        let push_row = |row: &[f64], out: &mut String| {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                out.push_str(&format!("{v}"));
                first = false;
            }
            out.push('\n');
        };
        for i in 0..n {
            push_row(self.p.row(i).transpose().as_slice(), &mut out);
        }
        push_row(self.q.as_slice(), &mut out);
        for i in 0..m {
            push_row(self.g.row(i).transpose().as_slice(), &mut out);
        }
        push_row(self.l.as_slice(), &mut out);
        push_row(self.u.as_slice(), &mut out);
        out
    }

    /// Parses a dump produced by [`QpProblem::write_dump`]. Input is treated
    /// as untrusted: sizes are capped and every token is checked.
    pub fn parse_dump(text: &str) -> Result<Self, QpDumpError> {
        const MAX_DIM: usize = 10_000;
        let mut tokens = text.split_whitespace();
        match (tokens.next(), tokens.next()) {
            (Some("koopnav-qp"), Some("1")) => {}
            _ => return Err(QpDumpError::BadHeader),
        }
        let n: usize = tokens
            .next()
            .ok_or(QpDumpError::Truncated)?
            .parse()
            .map_err(|_| QpDumpError::BadDimension)?;
        let m: usize = tokens
            .next()
            .ok_or(QpDumpError::Truncated)?
            .parse()
            .map_err(|_| QpDumpError::BadDimension)?;
        if n == 0 || n > MAX_DIM || m > MAX_DIM {
            return Err(QpDumpError::BadDimension);
        }
        let mut take = |count: usize| -> Result<Vec<f64>, QpDumpError> {
            let mut values = Vec::with_capacity(count);
            for _ in 0..count {
                let tok = tokens.next().ok_or(QpDumpError::Truncated)?;
                let v: f64 = tok.parse().map_err(|_| QpDumpError::BadNumber(tok.to_string()))?;
                values.push(v);
            }
            Ok(values)
        };
        let p = DMatrix::from_row_slice(n, n, &take(n * n)?);
        let q = DVector::from_vec(take(n)?);
        let g = DMatrix::from_row_slice(m, n, &take(m * n)?);
        let l = DVector::from_vec(take(m)?);
        let u = DVector::from_vec(take(m)?);
        if tokens.next().is_some() {
            return Err(QpDumpError::TrailingData);
        }
        Ok(Self { p, q, g, l, u })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum QpDumpError {
    #[error("missing or unsupported dump header")]
    BadHeader,
    #[error("dump ended before all entries were read")]
    Truncated,
    #[error("invalid dimension line")]
    BadDimension,
    #[error("invalid numeric token `{0}`")]
    BadNumber(String),
    #[error("unexpected trailing data")]
    TrailingData,
}

/// Solver tolerances and iteration limits.
#[derive(Debug, Clone, PartialEq)]
pub struct QpConfig {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    /// Penalty, scaled per row by the constraint row norms.
    pub rho: f64,
    pub over_relaxation: f64,
    /// Cadence for testing whether the guessed active set has settled; a
    /// settled guess triggers an exact reduced solve that usually finishes
    /// the job well before the splitting iterates reach tolerance.
    pub polish_interval: usize,
}

impl Default for QpConfig {
    fn default() -> Self {
        Self {
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            max_iter: 4000,
            rho: 0.1,
            over_relaxation: 1.6,
            polish_interval: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIter,
    PrimalInfeasible,
}

impl QpStatus {
    pub fn label(&self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::MaxIter => "max_iter",
            QpStatus::PrimalInfeasible => "primal_infeasible",
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub duals: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Warm-start point, typically the previous control step's shifted solution.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub z: DVector<f64>,
    pub duals: DVector<f64>,
}

fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Diagonal (Ruiz) equilibration of the problem data plus cost scaling:
/// returns `(d, e, c)` such that the scaled data `c * D P D`, `c * D q`,
/// `E G D` has rows and columns of near-unit infinity norm. Bounds scale by
/// `E`; the primal unscales as `z = D z_bar` and the duals as
/// `y = E y_bar / c`.
fn equilibrate(p: &DMatrix<f64>, q: &DVector<f64>, g: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>, f64) {
    let n = p.nrows();
    let m = g.nrows();
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(m, 1.0);

    for _ in 0..10 {
        // Column norms of the scaled symmetric KKT stack [[P, G'], [G, 0]].
        let mut delta_d = DVector::from_element(n, 1.0);
        for j in 0..n {
            let mut norm: f64 = 0.0;
            for i in 0..n {
                norm = norm.max((d[i] * p[(i, j)] * d[j]).abs());
            }
            for i in 0..m {
                norm = norm.max((e[i] * g[(i, j)] * d[j]).abs());
            }
            if norm > 1e-12 {
                delta_d[j] = 1.0 / norm.sqrt();
            }
        }
        let mut delta_e = DVector::from_element(m, 1.0);
        for i in 0..m {
            let mut norm: f64 = 0.0;
            for j in 0..n {
                norm = norm.max((e[i] * g[(i, j)] * d[j]).abs());
            }
            if norm > 1e-12 {
                delta_e[i] = 1.0 / norm.sqrt();
            }
        }
        for j in 0..n {
            d[j] *= delta_d[j];
        }
        for i in 0..m {
            e[i] *= delta_e[i];
        }
    }

    // Cost scaling keeps the quadratic term and gradient at unit size.
    let mut cost_norm: f64 = 0.0;
    for j in 0..n {
        let mut col: f64 = 0.0;
        for i in 0..n {
            col = col.max((d[i] * p[(i, j)] * d[j]).abs());
        }
        cost_norm += col;
    }
    let mut q_norm: f64 = 0.0;
    for j in 0..n {
        q_norm = q_norm.max((d[j] * q[j]).abs());
    }
    let cost_scale = (cost_norm / n as f64).max(q_norm);
    let c = if cost_scale > 1e-12 { 1.0 / cost_scale } else { 1.0 };
    (d, e, c)
}

/// Solves the QP by over-relaxed ADMM.
///
/// The iteration runs on preconditioned data: the problem is expressed in
/// the metric of `P + sigma I` (a Cholesky change of variables), which keeps
/// the splitting fast on the badly conditioned Hessians condensed MPC
/// produces, then Ruiz-equilibrated. Termination always checks residuals of
/// the original data: both the primal residual `||Gz - w||_inf` and the dual
/// residual `||Pz + q + G'y||_inf` must fall under
/// `eps_abs + eps_rel * scale`. Divergence of the dual iterates certifies
/// primal infeasibility.
pub fn solve(
    prob: &QpProblem,
    cfg: &QpConfig,
    warm: Option<&WarmStart>,
) -> Result<QpSolution, QpError> {
    prob.validate()?;
    let n = prob.num_vars();
    let m = prob.num_constraints();

    // Metric preconditioning: x = L^{-T} v with L L' = P + sigma I.
    let lmat = (&prob.p + DMatrix::identity(n, n) * SIGMA_REG)
        .cholesky()
        .ok_or(QpError::NotPsd)?
        .l();
    let lmat_t = lmat.transpose();
    let p_pre = {
        let li_p = lmat
            .solve_lower_triangular(&prob.p)
            .ok_or(QpError::NotPsd)?;
        let tilde = lmat
            .solve_lower_triangular(&li_p.transpose())
            .ok_or(QpError::NotPsd)?;
        (&tilde + tilde.transpose()) * 0.5
    };
    let q_pre = lmat.solve_lower_triangular(&prob.q).ok_or(QpError::NotPsd)?;
    let g_pre = lmat
        .solve_lower_triangular(&prob.g.transpose())
        .ok_or(QpError::NotPsd)?
        .transpose();

    let (d, e, c) = equilibrate(&p_pre, &q_pre, &g_pre);
    let p_s = DMatrix::from_fn(n, n, |i, j| c * d[i] * p_pre[(i, j)] * d[j]);
    let q_s = DVector::from_fn(n, |i, _| c * d[i] * q_pre[i]);
    let g_s = DMatrix::from_fn(m, n, |i, j| e[i] * g_pre[(i, j)] * d[j]);
    let l_s = DVector::from_fn(m, |i, _| e[i] * prob.l[i]);
    let u_s = DVector::from_fn(m, |i, _| e[i] * prob.u[i]);

    // Per-row penalty: unit-norm rows after scaling, boosted on equalities.
    let mut rho = DVector::from_element(m, cfg.rho);
    for i in 0..m {
        let row_norm_sq = g_s.row(i).norm_squared();
        rho[i] = (cfg.rho / row_norm_sq.max(1e-12)).clamp(1e-6, 1e6);
        if prob.u[i] - prob.l[i] < 1e-12 {
            rho[i] *= 1e3;
        }
    }

    // KKT matrix [[P + sigma I, G'], [G, -diag(1/rho)]], refactored only
    // when the penalty is rebalanced.
    let dim = n + m;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n))
        .copy_from(&(&p_s + DMatrix::identity(n, n) * SIGMA_REG));
    if m > 0 {
        kkt.view_mut((0, n), (n, m)).copy_from(&g_s.transpose());
        kkt.view_mut((n, 0), (m, n)).copy_from(&g_s);
        for i in 0..m {
            kkt[(n + i, n + i)] = -1.0 / rho[i];
        }
    }
    let mut factor = kkt.clone().lu();

    // Scaled iterates, seeded from the warm start when given, else from the
    // unconstrained minimum (the preconditioner makes it one back-solve).
    let mut x = match warm {
        Some(ws) => {
            let v = &lmat_t * &ws.z;
            DVector::from_fn(n, |i, _| v[i] / d[i])
        }
        None => {
            let unconstrained = -&q_pre;
            DVector::from_fn(n, |i, _| unconstrained[i] / d[i])
        }
    };
    let mut y = match warm {
        Some(ws) => DVector::from_fn(m, |i, _| c * ws.duals[i] / e[i]),
        None => DVector::zeros(m),
    };
    let mut w = {
        let gx = &g_s * &x;
        DVector::from_fn(m, |i, _| gx[i].clamp(l_s[i], u_s[i]))
    };

    let alpha = cfg.over_relaxation;
    let mut rhs = DVector::<f64>::zeros(dim);
    let mut y_at_last_check = y.clone();
    let mut last_signature: Vec<i8> = Vec::new();
    let mut tried_signature: Vec<i8> = Vec::new();
    let mut last_iter = cfg.max_iter;
    let mut status = QpStatus::MaxIter;
    let mut primal_residual = f64::INFINITY;
    let mut dual_residual = f64::INFINITY;

    for iter in 1..=cfg.max_iter {
        for i in 0..n {
            rhs[i] = SIGMA_REG * x[i] - q_s[i];
        }
        for i in 0..m {
            rhs[n + i] = w[i] - y[i] / rho[i];
        }
        let sol = factor.solve(&rhs).ok_or(QpError::NotPsd)?;
        let x_tilde = sol.rows(0, n).into_owned();
        let nu = sol.rows(n, m).into_owned();

        let mut z_tilde = DVector::<f64>::zeros(m);
        for i in 0..m {
            z_tilde[i] = w[i] + (nu[i] - y[i]) / rho[i];
        }

        let x_next = &x_tilde * alpha + &x * (1.0 - alpha);
        let mut w_next = DVector::<f64>::zeros(m);
        let mut y_next = DVector::<f64>::zeros(m);
        for i in 0..m {
            let relaxed = alpha * z_tilde[i] + (1.0 - alpha) * w[i];
            let unprojected = relaxed + y[i] / rho[i];
            w_next[i] = unprojected.clamp(l_s[i], u_s[i]);
            y_next[i] = y[i] + rho[i] * (relaxed - w_next[i]);
        }
        x = x_next;
        w = w_next;
        y = y_next;

        // Residuals of the original problem: undo the equilibration
        // component-wise and the metric transform by a triangular solve.
        let gx_s = &g_s * &x;
        let mut r_prim: f64 = 0.0;
        let mut gx_norm: f64 = 0.0;
        let mut w_norm: f64 = 0.0;
        for i in 0..m {
            r_prim = r_prim.max(((gx_s[i] - w[i]) / e[i]).abs());
            gx_norm = gx_norm.max((gx_s[i] / e[i]).abs());
            w_norm = w_norm.max((w[i] / e[i]).abs());
        }
        let scaled_back = DVector::from_fn(n, |i, _| d[i] * x[i]);
        let x_orig = lmat_t
            .solve_upper_triangular(&scaled_back)
            .ok_or(QpError::NotPsd)?;
        let y_orig = DVector::from_fn(m, |i, _| e[i] * y[i] / c);
        let px = &prob.p * &x_orig;
        let gty = prob.g.transpose() * &y_orig;
        let mut r_dual: f64 = 0.0;
        let mut px_norm: f64 = 0.0;
        let mut gty_norm: f64 = 0.0;
        let mut q_norm: f64 = 0.0;
        for i in 0..n {
            r_dual = r_dual.max((px[i] + prob.q[i] + gty[i]).abs());
            px_norm = px_norm.max(px[i].abs());
            gty_norm = gty_norm.max(gty[i].abs());
            q_norm = q_norm.max(prob.q[i].abs());
        }
        primal_residual = r_prim;
        dual_residual = r_dual;
        let eps_prim = cfg.eps_abs + cfg.eps_rel * gx_norm.max(w_norm);
        let eps_dual = cfg.eps_abs + cfg.eps_rel * px_norm.max(gty_norm).max(q_norm);
        if primal_residual <= eps_prim && dual_residual <= eps_dual {
            status = QpStatus::Optimal;
            last_iter = iter;
            break;
        }

        // Once the guessed active set holds steady between two checks, an
        // exact solve on it usually lands the solution immediately.
        if m > 0 && iter % cfg.polish_interval == 0 {
            let signature: Vec<i8> = (0..m)
                .map(|i| {
                    if y_orig[i] == 0.0 {
                        0
                    } else if prob.u[i] - prob.l[i] < 1e-12 {
                        2
                    } else if y_orig[i] < 0.0 {
                        -1
                    } else {
                        1
                    }
                })
                .collect();
            if signature == last_signature && signature != tried_signature {
                tried_signature = signature.clone();
                if let Some((z_pol, y_pol)) = polish(prob, &y_orig) {
                    let (ok, rp, rd) = check_candidate(prob, cfg, &z_pol, &y_pol);
                    if ok {
                        return Ok(QpSolution {
                            z: z_pol,
                            duals: y_pol,
                            status: QpStatus::Optimal,
                            iterations: iter,
                            primal_residual: rp,
                            dual_residual: rd,
                        });
                    }
                }
            }
            last_signature = signature;
        }

        if m > 0 && iter % 25 == 0 {
            // Primal infeasibility certificate from dual divergence.
            let dy = DVector::from_fn(m, |i, _| e[i] * (y[i] - y_at_last_check[i]) / c);
            let dy_norm = norm_inf(&dy);
            if dy_norm > 1e-10 {
                let gtdy = norm_inf(&(prob.g.transpose() * &dy));
                let mut support = 0.0;
                let mut certifiable = true;
                for i in 0..m {
                    if dy[i] > 0.0 {
                        if prob.u[i].is_finite() {
                            support += prob.u[i] * dy[i];
                        } else {
                            certifiable = false;
                        }
                    } else if dy[i] < 0.0 {
                        if prob.l[i].is_finite() {
                            support += prob.l[i] * dy[i];
                        } else {
                            certifiable = false;
                        }
                    }
                }
                if certifiable && gtdy <= 1e-8 * dy_norm && support <= -1e-8 * dy_norm {
                    status = QpStatus::PrimalInfeasible;
                    last_iter = iter;
                    break;
                }
            }
            y_at_last_check = y.clone();
        }
    }

    let scaled_back = DVector::from_fn(n, |i, _| d[i] * x[i]);
    let mut z = lmat_t
        .solve_upper_triangular(&scaled_back)
        .ok_or(QpError::NotPsd)?;
    let mut duals = DVector::from_fn(m, |i, _| e[i] * y[i] / c);

    // Final polish: adopt the active-set solve whenever it improves.
    if status != QpStatus::PrimalInfeasible && m > 0 {
        if let Some((z_pol, y_pol)) = polish(prob, &duals) {
            let (ok, rp, rd) = check_candidate(prob, cfg, &z_pol, &y_pol);
            if rp.max(rd) < primal_residual.max(dual_residual) {
                z = z_pol;
                duals = y_pol;
                primal_residual = rp;
                dual_residual = rd;
                if ok {
                    status = QpStatus::Optimal;
                }
            }
        }
    }

    Ok(QpSolution {
        z,
        duals,
        status,
        iterations: last_iter,
        primal_residual,
        dual_residual,
    })
}

/// Exact solve on the active set guessed from the dual signs: rows with
/// negative duals pin to their lower bound, positive duals to their upper.
/// Returns the polished pair when the reduced KKT system is solvable.
fn polish(prob: &QpProblem, duals: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = prob.num_vars();
    let m = prob.num_constraints();
    let mut active: Vec<(usize, f64)> = Vec::new();
    for i in 0..m {
        if duals[i] < 0.0 && prob.l[i].is_finite() {
            active.push((i, prob.l[i]));
        } else if duals[i] > 0.0 && prob.u[i].is_finite() {
            active.push((i, prob.u[i]));
        }
    }
    let a = active.len();
    let dim = n + a;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&prob.p);
    let mut rhs = DVector::<f64>::zeros(dim);
    for i in 0..n {
        kkt[(i, i)] += SIGMA_REG;
        rhs[i] = -prob.q[i];
    }
    for (k, &(row, bound)) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(j, n + k)] = prob.g[(row, j)];
            kkt[(n + k, j)] = prob.g[(row, j)];
        }
        kkt[(n + k, n + k)] = -SIGMA_REG;
        rhs[n + k] = bound;
    }
    let factor = kkt.clone().lu();
    let mut sol = factor.solve(&rhs)?;
    // Two rounds of iterative refinement against the unregularized system.
    for _ in 0..2 {
        let mut residual = rhs.clone();
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += prob.p[(i, j)] * sol[j];
            }
            for (k, &(row, _)) in active.iter().enumerate() {
                acc += prob.g[(row, i)] * sol[n + k];
            }
            residual[i] -= acc;
        }
        for (k, &(row, _)) in active.iter().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                acc += prob.g[(row, j)] * sol[j];
            }
            residual[n + k] -= acc;
        }
        let correction = factor.solve(&residual)?;
        sol += correction;
    }
    let z_pol = sol.rows(0, n).into_owned();
    let mut y_pol = DVector::<f64>::zeros(m);
    for (k, &(row, _)) in active.iter().enumerate() {
        y_pol[row] = sol[n + k];
    }
    Some((z_pol, y_pol))
}

/// Residuals and tolerance verdict for an arbitrary candidate pair.
fn check_candidate(
    prob: &QpProblem,
    cfg: &QpConfig,
    z: &DVector<f64>,
    duals: &DVector<f64>,
) -> (bool, f64, f64) {
    let gz = &prob.g * z;
    let w = DVector::from_fn(prob.num_constraints(), |i, _| gz[i].clamp(prob.l[i], prob.u[i]));
    let r_prim = norm_inf(&(&gz - &w));
    let px = &prob.p * z;
    let gty = prob.g.transpose() * duals;
    let r_dual = norm_inf(&(&px + &prob.q + &gty));
    let eps_prim = cfg.eps_abs + cfg.eps_rel * norm_inf(&gz).max(norm_inf(&w));
    let eps_dual =
        cfg.eps_abs + cfg.eps_rel * norm_inf(&px).max(norm_inf(&gty)).max(norm_inf(&prob.q));
    (r_prim <= eps_prim && r_dual <= eps_dual, r_prim, r_dual)
}

/// Residuals at an arbitrary primal/dual pair: worst bound violation and the
/// infinity norm of the stationarity defect.
pub fn kkt_residuals(prob: &QpProblem, z: &DVector<f64>, duals: &DVector<f64>) -> (f64, f64) {
    let gz = &prob.g * z;
    let mut primal: f64 = 0.0;
    for i in 0..prob.num_constraints() {
        primal = primal.max(prob.l[i] - gz[i]).max(gz[i] - prob.u[i]);
    }
    let primal = primal.max(0.0);
    let stationarity = &prob.p * z + &prob.q + prob.g.transpose() * duals;
    (primal, norm_inf(&stationarity))
}
