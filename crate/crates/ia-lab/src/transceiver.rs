//! Transmit covariance and beamformer optimization.
//!
//! The sum-rate path alternates exact weight-matrix updates with per-user
//! covariance subproblems. Each subproblem maximizes a concave lower bound
//! of the coordinate objective: the user's own utility term is kept exactly
//! and the damage it inflicts on the other users is linearized around the
//! previous iterate, which yields the penalty matrix `B_k`. The bound is
//! tight at the expansion point, so Gauss-Seidel sweeps drive the
//! equivalent weighted objective `psi1` monotonically down.
//!
//! Subproblems are solved by projected gradient ascent over the feasible
//! set `{Q PSD, tr(Q) <= p}` with Barzilai-Borwein steps and a backtracking
//! line search; the SDP reformulation of the same subproblem is kept as a
//! log-det barrier cross-check at tiny sizes
//! ([`solve_subproblem_barrier`]).
//!
//! The unselfish path fixes the stream count per user up front and picks
//! the transmit basis minimizing the interference inflicted on others
//! (`tr[V^H B_k V]` under a scaled-unitary constraint), which has a closed
//! form in the bottom eigenvectors of `B_k`. A classical alternating
//! leakage-minimization baseline is included for comparison.

use std::io::Write as IoWrite;

use crate::channel::{CovarianceSet, FilterSet, InterferenceChannel, PrecoderSet};
use crate::error::{Error, Result};
use crate::numerics::{
    complex_eigenvalues, cx, herm_eig, herm_part, identity, inv_pd, logdet_psd, project_psd_trace,
    re_trace, solve_pd, CMatrix, CVector,
};

/// Weight matrices `W_k`, one per user, sized `N_k x N_k`.
///
/// Exact weight updates produce matrices with real spectrum bounded below
/// by one; they are not Hermitian in general, but `W_k C_kk` always is.
#[derive(Debug, Clone)]
pub struct WeightSet {
    pub w: Vec<CMatrix>,
}

impl WeightSet {
    /// All-identity weights for the given channel.
    pub fn identity_for(ch: &InterferenceChannel) -> Self {
        Self {
            w: (0..ch.users()).map(|k| identity(ch.rx_antennas(k))).collect(),
        }
    }
}

/// Parameters of the iterative algorithms.
#[derive(Debug, Clone)]
pub struct AlgoConfig {
    /// Per-user weights `alpha_k` of the objective.
    pub alpha: Vec<f64>,
    /// Relaxation parameter in `(0, 1]`; 1 is the pure update.
    pub relax: f64,
    /// Convergence threshold on the per-sweep iterate change (Frobenius).
    pub tol: f64,
    /// Sweep cap.
    pub max_outer: usize,
    /// Subproblem fixed-point residual target.
    pub sub_tol: f64,
}

impl AlgoConfig {
    pub fn new(users: usize) -> Self {
        Self {
            alpha: vec![1.0; users],
            relax: 1.0,
            tol: 1e-6,
            max_outer: 500,
            sub_tol: 1e-7,
        }
    }

    fn validate(&self, ch: &InterferenceChannel) -> Result<()> {
        if self.alpha.len() != ch.users() {
            return Err(Error::DimensionMismatch("alpha length != user count".into()));
        }
        if self.alpha.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidArgument("alpha must be nonnegative".into()));
        }
        if !(self.relax > 0.0 && self.relax <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "relaxation parameter must be in (0,1], got {}",
                self.relax
            )));
        }
        if !(self.tol > 0.0) || !(self.sub_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidArgument("max_outer must be at least 1".into()));
        }
        Ok(())
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceStatus {
    Converged,
    MaxIterations,
    Aborted(String),
}

/// One outer-iteration record.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    /// Weighted equivalent objective; `None` for algorithms that do not
    /// track it.
    pub psi1: Option<f64>,
    /// Weighted sum rate in nats.
    pub wsr_nats: f64,
    /// Frobenius norm of the iterate change over the sweep.
    pub dq_fro: f64,
    /// Per-user diagnostics: subproblem residuals for the sum-rate
    /// algorithm, caused cross-interference power for the unselfish one.
    pub per_user: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub status: TraceStatus,
}

impl IterationTrace {
    pub fn converged(&self) -> bool {
        self.status == TraceStatus::Converged
    }

    /// CSV with columns `iter,psi1,wsr_nats,dq_fro,per_user_residuals`;
    /// the last column joins per-user values with `;`.
    pub fn write_csv<W: IoWrite>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,psi1,wsr_nats,dq_fro,per_user_residuals")?;
        for r in &self.records {
            let psi = r.psi1.map(|x| format!("{x:.17e}")).unwrap_or_default();
            let res = r
                .per_user
                .iter()
                .map(|x| format!("{x:.10e}"))
                .collect::<Vec<_>>()
                .join(";");
            writeln!(
                out,
                "{},{},{:.17e},{:.10e},{}",
                r.iter, psi, r.wsr_nats, r.dq_fro, res
            )?;
        }
        Ok(())
    }
}

// --- building blocks ----------------------------------------------------

fn total_cov(ch: &InterferenceChannel, q: &CovarianceSet, k: usize) -> CMatrix {
    let mut t = identity(ch.rx_antennas(k)).scale(ch.sigma2());
    for l in 0..ch.users() {
        let h = ch.h(k, l);
        t += h * &q.q[l] * h.adjoint();
    }
    t
}

fn ch_cov_excluding(ch: &InterferenceChannel, q: &CovarianceSet, j: usize, k: usize) -> CMatrix {
    let mut c = identity(ch.rx_antennas(j)).scale(ch.sigma2());
    for l in 0..ch.users() {
        if l == k {
            continue;
        }
        let h = ch.h(j, l);
        c += h * &q.q[l] * h.adjoint();
    }
    c
}

/// `g_k(Q) = I - H_kk Q_k H_kk^H (sigma^2 I + sum_l H_kl Q_l H_kl^H)^{-1}`.
///
/// Equals `C_kk (C_kk + H_kk Q_k H_kk^H)^{-1}`; its spectrum lies in
/// `(0, 1]` and `-log det g_k` is user `k`'s rate.
pub fn g_matrix(ch: &InterferenceChannel, q: &CovarianceSet, k: usize) -> Result<CMatrix> {
    let t = total_cov(ch, q, k);
    let hk = ch.h(k, k);
    let s = hk * &q.q[k] * hk.adjoint();
    // S T^{-1} = (T^{-1} S)^H for Hermitian S, T
    let x = solve_pd(&t, &s)?;
    Ok(identity(ch.rx_antennas(k)) - x.adjoint())
}

/// `C_jk`: received covariance at receiver `j` excluding user `k`'s
/// signal, `sigma^2 I + sum_{l != k} H_jl Q_l H_jl^H`. Positive definite.
pub fn interference_cov(
    ch: &InterferenceChannel,
    q: &CovarianceSet,
    j: usize,
    k: usize,
) -> Result<CMatrix> {
    if j >= ch.users() || k >= ch.users() {
        return Err(Error::InvalidArgument("user index out of range".into()));
    }
    Ok(ch_cov_excluding(ch, q, j, k))
}

/// Optimal weight for user `k` at the current covariances:
/// `W_k = I + H_kk Q_k H_kk^H C_kk^{-1}`, the inverse of `g_k(Q)`.
pub fn weight_update(ch: &InterferenceChannel, q: &CovarianceSet, k: usize) -> Result<CMatrix> {
    let c = ch_cov_excluding(ch, q, k, k);
    let hk = ch.h(k, k);
    let s = hk * &q.q[k] * hk.adjoint();
    let x = solve_pd(&c, &s)?; // C^{-1} S
    Ok(identity(ch.rx_antennas(k)) + x.adjoint())
}

/// Spectrum check for weight matrices: every eigenvalue must have a
/// positive real part and a negligible imaginary part.
fn validate_weight(w: &CMatrix) -> Result<()> {
    let eigs = complex_eigenvalues(w)?;
    for e in eigs {
        if !(e.re > 1e-12) || e.im.abs() > 1e-6 * e.re.abs().max(1.0) {
            return Err(Error::NonPdWeight);
        }
    }
    Ok(())
}

fn check_state(
    ch: &InterferenceChannel,
    q: &CovarianceSet,
    w: &WeightSet,
    alpha: &[f64],
) -> Result<()> {
    if q.q.len() != ch.users() || w.w.len() != ch.users() || alpha.len() != ch.users() {
        return Err(Error::DimensionMismatch(
            "state lists must all have one entry per user".into(),
        ));
    }
    Ok(())
}

/// Linearization penalty matrix
/// `B_k = sum_{j != k} H_jk^H T_j^{-1} (alpha_j W_j H_jj Q_j H_jj^H) T_j^{-1} H_jk`
/// with `T_j = C_jk + H_jk Q~_k H_jk^H` evaluated at the current iterates.
/// Hermitian PSD; the negative gradient of the linearized-away term.
pub fn compute_b(
    ch: &InterferenceChannel,
    q: &CovarianceSet,
    w: &WeightSet,
    alpha: &[f64],
    k: usize,
) -> Result<CMatrix> {
    check_state(ch, q, w, alpha)?;
    let mk = ch.tx_antennas(k);
    let mut b = CMatrix::zeros(mk, mk);
    for j in 0..ch.users() {
        if j == k {
            continue;
        }
        let t_j = total_cov(ch, q, j);
        let hjj = ch.h(j, j);
        let s_j = hjj * &q.q[j] * hjj.adjoint();
        // alpha_j W_j S_j is Hermitian PSD when W_j is fresh with respect
        // to Q_j; symmetrize to shed round-off
        let mid = herm_part(&(&w.w[j] * s_j)).scale(alpha[j]);
        let hjk = ch.h(j, k);
        let tinv_h = solve_pd(&t_j, hjk)?; // T_j^{-1} H_jk
        b += tinv_h.adjoint() * mid * &tinv_h;
    }
    let asym = crate::numerics::asymmetry(&b);
    debug_assert!(asym <= 1e-10 * b.norm().max(1.0), "B_k asymmetry {asym:.3e}");
    Ok(herm_part(&b))
}

/// Concave lower-bound objective for user `k` at candidate `Q_k`:
/// `alpha_k tr[W_k H_kk Q_k H_kk^H T^{-1}] - tr[B_k Q_k]`
/// where `T` includes the candidate itself and the other users' current
/// covariances.
pub fn lower_bound_obj(
    ch: &InterferenceChannel,
    w: &WeightSet,
    q: &CovarianceSet,
    b_k: &CMatrix,
    alpha: &[f64],
    k: usize,
    q_k: &CMatrix,
) -> Result<f64> {
    check_state(ch, q, w, alpha)?;
    let c = ch_cov_excluding(ch, q, k, k);
    let hk = ch.h(k, k);
    let s = hk * q_k * hk.adjoint();
    let t = &c + &s;
    let x = solve_pd(&t, &s)?; // T^{-1} S
    let own = (&w.w[k] * x.adjoint()).trace().re;
    Ok(alpha[k] * own - (b_k * q_k).trace().re)
}

/// Gradient of [`lower_bound_obj`] in `Q_k` (Hermitian):
/// `alpha_k H_kk^H T^{-1} (W_k C_kk) T^{-1} H_kk - B_k`.
pub fn lower_bound_grad(
    ch: &InterferenceChannel,
    w: &WeightSet,
    q: &CovarianceSet,
    b_k: &CMatrix,
    alpha: &[f64],
    k: usize,
    q_k: &CMatrix,
) -> Result<CMatrix> {
    check_state(ch, q, w, alpha)?;
    let c = ch_cov_excluding(ch, q, k, k);
    let hk = ch.h(k, k);
    let t = &c + hk * q_k * hk.adjoint();
    let wc = herm_part(&(&w.w[k] * &c));
    let tinv_h = solve_pd(&t, hk)?;
    let g = (tinv_h.adjoint() * wc * &tinv_h).scale(alpha[k]) - b_k;
    Ok(herm_part(&g))
}

/// Exact coordinate objective of the weighted problem as a function of
/// user `k`'s covariance with all other covariances fixed:
/// `sum_j alpha_j tr[W_j H_jj Q_j H_jj^H T_j(Q)^{-1}]` with `Q_k`
/// substituted by the candidate.
pub fn exact_coordinate_obj(
    ch: &InterferenceChannel,
    w: &WeightSet,
    q: &CovarianceSet,
    alpha: &[f64],
    k: usize,
    q_k: &CMatrix,
) -> Result<f64> {
    check_state(ch, q, w, alpha)?;
    let mut qq = q.clone();
    qq.q[k] = q_k.clone();
    let mut total = 0.0;
    for j in 0..ch.users() {
        let t = total_cov(ch, &qq, j);
        let hjj = ch.h(j, j);
        let s = hjj * &qq.q[j] * hjj.adjoint();
        let x = solve_pd(&t, &s)?;
        total += alpha[j] * (&w.w[j] * x.adjoint()).trace().re;
    }
    Ok(total)
}

/// Result of one covariance subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub q: CMatrix,
    /// Fixed-point residual `||proj(Q* + grad, p) - Q*||_F` at unit probe
    /// step.
    pub residual: f64,
    pub iterations: usize,
    /// Direct channel was rank deficient; the maximizer may be non-unique.
    pub rank_deficient_direct: bool,
}

/// Maximize the concave lower bound over `{Q PSD, tr(Q) <= p_k}` by
/// projected gradient ascent. Deterministic; terminates when the unit-step
/// projected-gradient fixed-point residual drops below `sub_tol`.
pub fn solve_subproblem(
    ch: &InterferenceChannel,
    w: &WeightSet,
    q: &CovarianceSet,
    alpha: &[f64],
    k: usize,
    sub_tol: f64,
) -> Result<SubproblemResult> {
    check_state(ch, q, w, alpha)?;
    validate_weight(&w.w[k])?;
    let p = ch.power(k);
    let b_k = compute_b(ch, q, w, alpha, k)?;
    let c = ch_cov_excluding(ch, q, k, k);
    let hk = ch.h(k, k).clone();
    let wc = herm_part(&(&w.w[k] * &c));
    let (smin, smax) = crate::numerics::singular_extremes(&hk);
    let rank_deficient = smin <= 1e-9 * smax.max(1e-300);

    let ak = alpha[k];
    let obj = |qk: &CMatrix| -> Result<f64> {
        let s = &hk * qk * hk.adjoint();
        let t = &c + &s;
        let x = solve_pd(&t, &s)?;
        Ok(ak * (&w.w[k] * x.adjoint()).trace().re - (&b_k * qk).trace().re)
    };
    let grad = |qk: &CMatrix| -> Result<CMatrix> {
        let t = &c + &hk * qk * hk.adjoint();
        let tinv_h = solve_pd(&t, &hk)?;
        Ok(herm_part(&((tinv_h.adjoint() * &wc * &tinv_h).scale(ak) - &b_k)))
    };

    let mut qk = project_psd_trace(&q.q[k], p)?;
    let mut f = obj(&qk)?;
    let mut g = grad(&qk)?;
    let mut prev: Option<(CMatrix, CMatrix)> = None;
    let mut step = re_trace(&qk).max(0.1 * p) / g.norm().max(1e-12);
    let max_iter = 20_000;
    let mut residual = f64::INFINITY;
    let mut iterations = max_iter;
    for it in 0..max_iter {
        residual = (project_psd_trace(&(&qk + &g), p)? - &qk).norm();
        if residual <= sub_tol {
            iterations = it;
            break;
        }
        // Barzilai-Borwein step from the previous pair, else keep the last
        if let Some((dq, dg)) = &prev {
            let num = dq.norm_squared();
            let den = -(dq.adjoint() * dg).trace().re;
            if den > 1e-300 && num.is_finite() {
                step = (num / den).clamp(1e-12, 1e12);
            }
        }
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = project_psd_trace(&(&qk + g.scale(t)), p)?;
            let diff = &cand - &qk;
            if diff.norm() == 0.0 {
                break;
            }
            let fc = obj(&cand)?;
            let gain = (g.adjoint() * &diff).trace().re;
            if fc >= f + 1e-4 * gain {
                let g_new = grad(&cand)?;
                prev = Some((diff, &g_new - &g));
                qk = cand;
                f = fc;
                g = g_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // line search stalled at numerical precision
            iterations = it;
            break;
        }
    }
    Ok(SubproblemResult {
        q: qk,
        residual,
        iterations,
        rank_deficient_direct: rank_deficient,
    })
}

/// Interior-point cross-check for [`solve_subproblem`]: maximize the same
/// concave bound plus a log-det barrier `mu (log det Q + ln(p - tr Q))`
/// along a decreasing barrier path. Intended for tiny sizes.
pub fn solve_subproblem_barrier(
    ch: &InterferenceChannel,
    w: &WeightSet,
    q: &CovarianceSet,
    alpha: &[f64],
    k: usize,
) -> Result<CMatrix> {
    check_state(ch, q, w, alpha)?;
    let p = ch.power(k);
    let b_k = compute_b(ch, q, w, alpha, k)?;
    let c = ch_cov_excluding(ch, q, k, k);
    let hk = ch.h(k, k).clone();
    let ak = alpha[k];
    let m = ch.tx_antennas(k);

    let obj = |qk: &CMatrix, mu: f64| -> Result<f64> {
        let s = &hk * qk * hk.adjoint();
        let t = &c + &s;
        let x = solve_pd(&t, &s)?;
        let base = ak * (&w.w[k] * x.adjoint()).trace().re - (&b_k * qk).trace().re;
        let slack = p - re_trace(qk);
        Ok(base + mu * (logdet_psd(qk)? + slack.ln()))
    };
    let grad = |qk: &CMatrix, mu: f64| -> Result<CMatrix> {
        let t = &c + &hk * qk * hk.adjoint();
        let wc = herm_part(&(&w.w[k] * &c));
        let tinv_h = solve_pd(&t, &hk)?;
        let base = herm_part(&((tinv_h.adjoint() * wc * &tinv_h).scale(ak) - &b_k));
        let slack = p - re_trace(qk);
        Ok(base + (inv_pd(qk)? - identity(m).scale(1.0 / slack)).scale(mu))
    };

    let mut qk = identity(m).scale(0.5 * p / m as f64);
    let mut mu = 1e-2 * p.max(1.0);
    while mu > 1e-10 {
        let mut f = obj(&qk, mu)?;
        for _ in 0..400 {
            let g = grad(&qk, mu)?;
            let mut t = 0.1 * p / g.norm().max(1e-12);
            let mut moved = false;
            for _ in 0..70 {
                let cand = herm_part(&(&qk + g.scale(t)));
                // keep iterates strictly interior
                if re_trace(&cand) < p && logdet_psd(&cand).is_ok() {
                    if let Ok(fc) = obj(&cand, mu) {
                        if fc > f {
                            qk = cand;
                            f = fc;
                            moved = true;
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        mu *= 0.1;
    }
    Ok(qk)
}

/// Weighted equivalent objective
/// `psi1(Q, W) = sum_k alpha_k (tr[W_k g_k(Q)] - log det W_k)`.
///
/// Rejects weight matrices whose spectrum is not strictly positive.
pub fn psi1(
    ch: &InterferenceChannel,
    q: &CovarianceSet,
    w: &WeightSet,
    alpha: &[f64],
) -> Result<f64> {
    check_state(ch, q, w, alpha)?;
    let mut total = 0.0;
    for k in 0..ch.users() {
        validate_weight(&w.w[k])?;
        let eigs = complex_eigenvalues(&w.w[k])?;
        let logdet_w: f64 = eigs.iter().map(|e| e.norm().ln()).sum();
        let g = g_matrix(ch, q, k)?;
        total += alpha[k] * ((&w.w[k] * g).trace().re - logdet_w);
    }
    Ok(total)
}

/// `psi2(Q) = sum_k alpha_k log det g_k(Q)`, the negated weighted sum rate.
pub fn psi2(ch: &InterferenceChannel, q: &CovarianceSet, alpha: &[f64]) -> Result<f64> {
    if q.q.len() != ch.users() || alpha.len() != ch.users() {
        return Err(Error::DimensionMismatch("state lists must match user count".into()));
    }
    let mut total = 0.0;
    for k in 0..ch.users() {
        let g = g_matrix(ch, q, k)?;
        let det = g.determinant();
        if !(det.re > 0.0) || det.im.abs() > 1e-8 * det.norm().max(1e-300) {
            return Err(Error::InvalidArgument(
                "g matrix determinant not real positive".into(),
            ));
        }
        total += alpha[k] * det.norm().ln();
    }
    Ok(total)
}

/// Gradient of the weighted sum rate in `Q_k` (Hermitian):
/// `alpha_k H_kk^H T_k^{-1} H_kk + sum_{j != k} alpha_j H_jk^H (T_j^{-1} - C_jj^{-1}) H_jk`.
pub fn wsr_gradient(
    ch: &InterferenceChannel,
    q: &CovarianceSet,
    alpha: &[f64],
    k: usize,
) -> Result<CMatrix> {
    let mk = ch.tx_antennas(k);
    let mut g = CMatrix::zeros(mk, mk);
    for j in 0..ch.users() {
        let t = total_cov(ch, q, j);
        let hjk = ch.h(j, k);
        if j == k {
            let x = solve_pd(&t, hjk)?;
            g += (hjk.adjoint() * x).scale(alpha[k]);
        } else {
            let c = ch_cov_excluding(ch, q, j, j);
            let xt = solve_pd(&t, hjk)?;
            let xc = solve_pd(&c, hjk)?;
            g += (hjk.adjoint() * (xt - xc)).scale(alpha[j]);
        }
    }
    Ok(herm_part(&g))
}

/// Stacked projected-gradient fixed-point residual of the weighted
/// sum-rate problem at `Q` (unit probe step).
pub fn wsr_residual(ch: &InterferenceChannel, q: &CovarianceSet, alpha: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..ch.users() {
        let g = wsr_gradient(ch, q, alpha, k)?;
        let r = (project_psd_trace(&(&q.q[k] + g), ch.power(k))? - &q.q[k]).norm();
        total += r * r;
    }
    Ok(total.sqrt())
}

/// Iterative sum-rate maximization: Gauss-Seidel sweeps of weight update,
/// covariance subproblem, weight update, starting from uniform power and
/// identity weights, with relaxed covariance steps
/// `Q_k <- relax Q_k^* + (1 - relax) Q~_k`.
///
/// A subproblem failure ends the run with `TraceStatus::Aborted` and the
/// partial trace.
pub fn run_sum_rate(
    ch: &InterferenceChannel,
    cfg: &AlgoConfig,
) -> Result<(CovarianceSet, IterationTrace)> {
    cfg.validate(ch)?;
    let mut q = CovarianceSet::uniform(ch);
    let mut w = WeightSet::identity_for(ch);
    let mut records = Vec::new();
    let mut status = TraceStatus::MaxIterations;
    let mut last_psi1 = f64::INFINITY;
    for iter in 1..=cfg.max_outer {
        let q_start = q.clone();
        let mut residuals = Vec::with_capacity(ch.users());
        let mut failure: Option<String> = None;
        for k in 0..ch.users() {
            w.w[k] = weight_update(ch, &q, k)?;
            match solve_subproblem(ch, &w, &q, &cfg.alpha, k, cfg.sub_tol) {
                Ok(sub) => {
                    residuals.push(sub.residual);
                    q.q[k] =
                        herm_part(&(sub.q.scale(cfg.relax) + q.q[k].scale(1.0 - cfg.relax)));
                }
                Err(e) => {
                    failure = Some(format!("subproblem for user {k} failed: {e}"));
                    break;
                }
            }
            w.w[k] = weight_update(ch, &q, k)?;
        }
        if let Some(msg) = failure {
            status = TraceStatus::Aborted(msg);
            break;
        }
        let dq = q
            .q
            .iter()
            .zip(&q_start.q)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt();
        let p1 = psi1(ch, &q, &w, &cfg.alpha)?;
        let wsr = crate::channel::weighted_sum_rate(ch, &q, &cfg.alpha)?;
        debug_assert!(p1 <= last_psi1 + 1e-8, "psi1 increased: {last_psi1} -> {p1}");
        last_psi1 = p1;
        records.push(IterationRecord {
            iter,
            psi1: Some(p1),
            wsr_nats: wsr,
            dq_fro: dq,
            per_user: residuals,
        });
        if dq <= cfg.tol {
            status = TraceStatus::Converged;
            break;
        }
    }
    Ok((q, IterationTrace { records, status }))
}

// --- unselfish / DoF-oriented updates ------------------------------------

/// Canonical lexicographic key for deterministic eigenvector tie-breaks.
fn canonical_key(col: &CVector) -> Vec<(f64, f64)> {
    let mut v = col.clone();
    crate::numerics::canonicalize_phase(&mut v);
    v.iter().map(|z| (z.re, z.im)).collect()
}

/// Eigenvectors of the `d` smallest eigenvalues of a Hermitian matrix,
/// ties broken toward the lexicographically largest canonical
/// representative.
fn smallest_eigvecs(b: &CMatrix, d: usize) -> Result<CMatrix> {
    let eig = herm_eig(b)?;
    let n = eig.values.len();
    let scale = eig.values.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
    let tie = 1e-12 * scale;
    let keys: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|i| canonical_key(&eig.vectors.column(i).clone_owned()))
        .collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b2| {
        let va = eig.values[a];
        let vb = eig.values[b2];
        if (va - vb).abs() <= tie {
            keys[b2].partial_cmp(&keys[a]).unwrap_or(std::cmp::Ordering::Equal)
        } else {
            va.total_cmp(&vb)
        }
    });
    let mut out = CMatrix::zeros(n, d);
    for (c, &i) in idx.iter().take(d).enumerate() {
        let mut col = eig.vectors.column(i).clone_owned();
        crate::numerics::canonicalize_phase(&mut col);
        out.set_column(c, &col);
    }
    Ok(out)
}

fn unselfish_direction(
    ch: &InterferenceChannel,
    b: &CMatrix,
    k: usize,
    d: usize,
) -> Result<CMatrix> {
    if b.norm() <= 1e-13 * (1.0 + ch.power(k)) {
        // no interference pressure yet: steer along the strongest
        // right-singular directions of the direct channel
        let svd = ch.h(k, k).clone().svd(false, true);
        let vt = svd.v_t.expect("svd with vt requested");
        let mut out = CMatrix::zeros(ch.tx_antennas(k), d);
        for c in 0..d {
            let mut col = vt.row(c).adjoint().clone_owned();
            crate::numerics::canonicalize_phase(&mut col);
            out.set_column(c, &col);
        }
        return Ok(out);
    }
    smallest_eigvecs(b, d)
}

/// Rank-one full-power covariance minimizing `tr[B_k Q_k]` subject to
/// `tr Q = p_k`: `Q_k = p_k q q^H` with `q` the eigenvector of the
/// smallest eigenvalue of `B_k`. A vanishing `B_k` falls back to the top
/// right-singular direction of the direct channel.
pub fn rank_one_unselfish(
    ch: &InterferenceChannel,
    q: &CovarianceSet,
    w: &WeightSet,
    alpha: &[f64],
    k: usize,
) -> Result<CMatrix> {
    let b = compute_b(ch, q, w, alpha, k)?;
    let dir = unselfish_direction(ch, &b, k, 1)?;
    let v = dir.column(0);
    Ok((v * v.adjoint()).scale(ch.power(k)))
}

/// Beamformer update of the unselfish algorithm:
/// minimize `tr[V_k^H B_k V_k]` subject to `V_k^H V_k = (p_k/d_k) I`.
/// Columns are the `d_k` bottom eigenvectors of `B_k` scaled by
/// `sqrt(p_k/d_k)`.
pub fn unselfish_update(
    ch: &InterferenceChannel,
    v: &PrecoderSet,
    w: &WeightSet,
    alpha: &[f64],
    k: usize,
    d_k: usize,
) -> Result<CMatrix> {
    if d_k == 0 || d_k > ch.tx_antennas(k) {
        return Err(Error::InvalidArgument(format!(
            "d_k = {d_k} must be in 1..=M_k = {}",
            ch.tx_antennas(k)
        )));
    }
    let q = v.covariances();
    let b = compute_b(ch, &q, w, alpha, k)?;
    let dirs = unselfish_direction(ch, &b, k, d_k)?;
    Ok(dirs.scale((ch.power(k) / d_k as f64).sqrt()))
}

/// The unselfish sum-DoF algorithm: from zero precoders and identity
/// weights, sweep beamformer updates followed by weight updates until the
/// precoder change drops below `cfg.tol`.
///
/// Trace records carry the sum rate and, per user, the total
/// cross-interference power the user inflicts,
/// `sum_{j != k} ||H_jk V_k||_F^2`.
pub fn run_unselfish(
    ch: &InterferenceChannel,
    d: &[usize],
    cfg: &AlgoConfig,
) -> Result<(PrecoderSet, IterationTrace)> {
    cfg.validate(ch)?;
    if d.len() != ch.users() {
        return Err(Error::DimensionMismatch("dof tuple length != user count".into()));
    }
    for (k, &dk) in d.iter().enumerate() {
        if dk == 0 || dk > ch.tx_antennas(k) {
            return Err(Error::InvalidArgument(format!(
                "d_{k} = {dk} must be in 1..=M_{k} = {}",
                ch.tx_antennas(k)
            )));
        }
    }
    let mut v = PrecoderSet {
        v: (0..ch.users())
            .map(|k| CMatrix::zeros(ch.tx_antennas(k), d[k]))
            .collect(),
    };
    let mut w = WeightSet::identity_for(ch);
    let mut records = Vec::new();
    let mut status = TraceStatus::MaxIterations;
    for iter in 1..=cfg.max_outer {
        let v_start = v.clone();
        for k in 0..ch.users() {
            v.v[k] = unselfish_update(ch, &v, &w, &cfg.alpha, k, d[k])?;
            let q = v.covariances();
            w.w[k] = weight_update(ch, &q, k)?;
        }
        let dv = v
            .v
            .iter()
            .zip(&v_start.v)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt();
        let q = v.covariances();
        let wsr = crate::channel::weighted_sum_rate(ch, &q, &cfg.alpha)?;
        let leak: Vec<f64> = (0..ch.users())
            .map(|k| {
                (0..ch.users())
                    .filter(|&j| j != k)
                    .map(|j| (ch.h(j, k) * &v.v[k]).norm_squared())
                    .sum()
            })
            .collect();
        records.push(IterationRecord {
            iter,
            psi1: None,
            wsr_nats: wsr,
            dq_fro: dv,
            per_user: leak,
        });
        if dv <= cfg.tol {
            status = TraceStatus::Converged;
            break;
        }
    }
    Ok((v, IterationTrace { records, status }))
}

// --- leakage-minimization baseline ---------------------------------------

fn orthonormal_columns(m: &CMatrix) -> CMatrix {
    let qr = m.clone().qr();
    let q = qr.q();
    q.columns(0, m.ncols()).into_owned()
}

/// Alternating interference-leakage minimization with predetermined
/// stream counts: receive filters take the bottom eigenvectors of the
/// received-interference Gram matrix, then transmit bases do the same
/// through the conjugate-transposed channels.
///
/// Returns full-power precoders (`tr V V^H = p_k`), unit-norm filters and
/// the total-leakage history, one entry per half-iteration.
pub fn leakage_min_baseline(
    ch: &InterferenceChannel,
    d: &[usize],
    iters: usize,
) -> Result<(PrecoderSet, FilterSet, Vec<f64>)> {
    if d.len() != ch.users() {
        return Err(Error::DimensionMismatch("dof tuple length != user count".into()));
    }
    for (k, &dk) in d.iter().enumerate() {
        if dk == 0 || dk > ch.tx_antennas(k).min(ch.rx_antennas(k)) {
            return Err(Error::InvalidArgument(format!(
                "d_{k} = {dk} must be in 1..=min(M_{k}, N_{k})"
            )));
        }
    }
    let k_users = ch.users();
    let mut v: Vec<CMatrix> = (0..k_users)
        .map(|k| {
            let mut m = CMatrix::zeros(ch.tx_antennas(k), d[k]);
            for c in 0..d[k] {
                m[(c, c)] = cx(1.0, 0.0);
            }
            m.scale((ch.power(k) / d[k] as f64).sqrt())
        })
        .collect();
    let mut u: Vec<CMatrix> = (0..k_users)
        .map(|k| {
            let mut m = CMatrix::zeros(ch.rx_antennas(k), d[k]);
            for c in 0..d[k] {
                m[(c, c)] = cx(1.0, 0.0);
            }
            m
        })
        .collect();

    let fwd_gram = |v: &[CMatrix], k: usize| -> CMatrix {
        let mut phi = CMatrix::zeros(ch.rx_antennas(k), ch.rx_antennas(k));
        for j in 0..k_users {
            if j == k {
                continue;
            }
            let hv = ch.h(k, j) * &v[j];
            phi += &hv * hv.adjoint();
        }
        herm_part(&phi)
    };
    let total_leakage = |v: &[CMatrix], u: &[CMatrix]| -> f64 {
        (0..k_users)
            .map(|k| {
                let phi = fwd_gram(v, k);
                (u[k].adjoint() * phi * &u[k]).trace().re
            })
            .sum()
    };

    let mut history = Vec::with_capacity(2 * iters);
    for _ in 0..iters {
        // forward: receive filters swallow the least interference
        for k in 0..k_users {
            let phi = fwd_gram(&v, k);
            u[k] = smallest_eigvecs(&phi, d[k])?;
        }
        history.push(total_leakage(&v, &u));
        // reverse: transmit bases leak the least into the filters
        for k in 0..k_users {
            let mut psi = CMatrix::zeros(ch.tx_antennas(k), ch.tx_antennas(k));
            for j in 0..k_users {
                if j == k {
                    continue;
                }
                let hu = ch.h(j, k).adjoint() * &u[j];
                psi += (&hu * hu.adjoint()).scale(ch.power(j) / d[j] as f64);
            }
            let dirs = smallest_eigvecs(&herm_part(&psi), d[k])?;
            v[k] = dirs.scale((ch.power(k) / d[k] as f64).sqrt());
        }
        history.push(total_leakage(&v, &u));
    }
    Ok((PrecoderSet { v }, FilterSet { u }, history))
}

/// Power-normalized alignment residual: total cross leakage through
/// orthonormalized precoders and the given unit filters. Zero exactly at
/// interference alignment, independent of the power budgets.
pub fn normalized_leakage(ch: &InterferenceChannel, v: &PrecoderSet, u: &FilterSet) -> f64 {
    let vo: Vec<CMatrix> = v.v.iter().map(orthonormal_columns).collect();
    let mut total = 0.0;
    for k in 0..ch.users() {
        for j in 0..ch.users() {
            if j == k {
                continue;
            }
            total += (u.u[k].adjoint() * ch.h(k, j) * &vo[j]).norm_squared();
        }
    }
    total
}
