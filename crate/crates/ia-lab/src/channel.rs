//! Interference-channel data model and receiver-side quantities.
//!
//! A `K`-user MIMO interference channel holds one channel matrix per
//! (receiver, transmitter) pair. Signals are modeled at the covariance /
//! SINR level; the random data streams never appear explicitly.


use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cx, identity, is_finite_mat, re_trace, solve_pd, CMatrix};

/// Requested degrees of freedom per user.
pub type DofTuple = Vec<usize>;

/// `K` transmitter-receiver pairs with per-user antenna counts, all `K^2`
/// channel matrices, the noise power and per-user power budgets.
///
/// `h(k, j)` is the `N_k x M_j` gain from transmitter `j` to receiver `k`.
/// Channels are immutable after construction and safe to share across
/// threads.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceChannel {
    m: Vec<usize>,
    n: Vec<usize>,
    h: Vec<Vec<CMatrix>>,
    sigma2: f64,
    p: Vec<f64>,
}

impl InterferenceChannel {
    pub fn new(
        m: Vec<usize>,
        n: Vec<usize>,
        h: Vec<Vec<CMatrix>>,
        sigma2: f64,
        p: Vec<f64>,
    ) -> Result<Self> {
        let k = m.len();
        if k == 0 {
            return Err(Error::InvalidArgument("channel needs at least one user".into()));
        }
        if n.len() != k || p.len() != k || h.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "expected {k} users in every per-user list"
            )));
        }
        if m.iter().chain(n.iter()).any(|&d| d == 0) {
            return Err(Error::InvalidArgument("antenna counts must be positive".into()));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {sigma2}")));
        }
        if p.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument("power budgets must be positive".into()));
        }
        for (rx, row) in h.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "H row {rx} has {} entries, expected {k}",
                    row.len()
                )));
            }
            for (tx, mat) in row.iter().enumerate() {
                if mat.nrows() != n[rx] || mat.ncols() != m[tx] {
                    return Err(Error::DimensionMismatch(format!(
                        "H[{rx}][{tx}] is {}x{}, expected {}x{}",
                        mat.nrows(),
                        mat.ncols(),
                        n[rx],
                        m[tx]
                    )));
                }
                if !is_finite_mat(mat) {
                    return Err(Error::NonFinite);
                }
            }
        }
        Ok(Self { m, n, h, sigma2, p })
    }

    /// Number of users `K`.
    pub fn users(&self) -> usize {
        self.m.len()
    }

    /// Transmit antennas of user `k`.
    pub fn tx_antennas(&self, k: usize) -> usize {
        self.m[k]
    }

    /// Receive antennas of user `k`.
    pub fn rx_antennas(&self, k: usize) -> usize {
        self.n[k]
    }

    /// Channel matrix from transmitter `tx` to receiver `rx`.
    pub fn h(&self, rx: usize, tx: usize) -> &CMatrix {
        &self.h[rx][tx]
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Power budget of user `k`.
    pub fn power(&self, k: usize) -> f64 {
        self.p[k]
    }

    pub fn powers(&self) -> &[f64] {
        &self.p
    }

    /// Total received covariance at receiver `k`:
    /// `sigma^2 I + sum_l H_kl Q_l H_kl^H`.
    pub fn rx_cov_total(&self, q: &CovarianceSet) -> Vec<CMatrix> {
        (0..self.users())
            .map(|k| {
                let mut t = identity(self.n[k]).scale(self.sigma2);
                for l in 0..self.users() {
                    let hk = &self.h[k][l];
                    t += hk * &q.q[l] * hk.adjoint();
                }
                t
            })
            .collect()
    }

    /// Received covariance at receiver `j` excluding user `k`'s signal:
    /// `sigma^2 I + sum_{l != k} H_jl Q_l H_jl^H`.
    pub(crate) fn rx_cov_excluding(&self, q: &CovarianceSet, j: usize, k: usize) -> CMatrix {
        let mut c = identity(self.n[j]).scale(self.sigma2);
        for l in 0..self.users() {
            if l == k {
                continue;
            }
            let hj = &self.h[j][l];
            c += hj * &q.q[l] * hj.adjoint();
        }
        c
    }
}

/// Transmit beamforming matrices, `V_k` of size `M_k x d_k`.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub v: Vec<CMatrix>,
}

impl PrecoderSet {
    /// Transmit covariances `Q_k = V_k V_k^H`.
    pub fn covariances(&self) -> CovarianceSet {
        CovarianceSet {
            q: self.v.iter().map(|v| v * v.adjoint()).collect(),
        }
    }

    pub fn stream_counts(&self) -> Vec<usize> {
        self.v.iter().map(|v| v.ncols()).collect()
    }
}

/// Receive beamforming matrices, `U_k` of size `N_k x d_k`.
#[derive(Debug, Clone)]
pub struct FilterSet {
    pub u: Vec<CMatrix>,
}

/// Transmit covariance matrices, `Q_k` Hermitian PSD of size `M_k x M_k`.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub q: Vec<CMatrix>,
}

impl CovarianceSet {
    /// All-zero covariances for the given channel.
    pub fn zeros(ch: &InterferenceChannel) -> Self {
        Self {
            q: (0..ch.users())
                .map(|k| CMatrix::zeros(ch.tx_antennas(k), ch.tx_antennas(k)))
                .collect(),
        }
    }

    /// Uniform covariances `(p_k / M_k) I`.
    pub fn uniform(ch: &InterferenceChannel) -> Self {
        Self {
            q: (0..ch.users())
                .map(|k| identity(ch.tx_antennas(k)).scale(ch.power(k) / ch.tx_antennas(k) as f64))
                .collect(),
        }
    }
}

fn check_precoders(ch: &InterferenceChannel, v: &PrecoderSet) -> Result<()> {
    if v.v.len() != ch.users() {
        return Err(Error::DimensionMismatch("precoder count != user count".into()));
    }
    for (k, vk) in v.v.iter().enumerate() {
        if vk.nrows() != ch.tx_antennas(k) {
            return Err(Error::DimensionMismatch(format!(
                "V_{k} has {} rows, expected {}",
                vk.nrows(),
                ch.tx_antennas(k)
            )));
        }
    }
    Ok(())
}

fn check_covariances(ch: &InterferenceChannel, q: &CovarianceSet) -> Result<()> {
    if q.q.len() != ch.users() {
        return Err(Error::DimensionMismatch("covariance count != user count".into()));
    }
    for (k, qk) in q.q.iter().enumerate() {
        if qk.nrows() != ch.tx_antennas(k) || qk.ncols() != ch.tx_antennas(k) {
            return Err(Error::DimensionMismatch(format!(
                "Q_{k} is {}x{}, expected {0}x{0} with {0} = {m}",
                qk.nrows(),
                qk.ncols(),
                m = ch.tx_antennas(k)
            )));
        }
    }
    Ok(())
}

/// Draw an iid Rayleigh-fading channel: every entry of every `H_kj` is
/// circularly-symmetric complex Gaussian with unit variance. Deterministic
/// for a fixed seed.
pub fn gen_rayleigh(
    k: usize,
    m: &[usize],
    n: &[usize],
    sigma2: f64,
    p: &[f64],
    seed: u64,
) -> Result<InterferenceChannel> {
    if m.len() != k || n.len() != k || p.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "expected {k} entries in m, n and p"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 0.5f64.sqrt();
    let h: Vec<Vec<CMatrix>> = (0..k)
        .map(|rx| {
            (0..k)
                .map(|tx| {
                    CMatrix::from_fn(n[rx], m[tx], |_, _| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        cx(re * scale, im * scale)
                    })
                })
                .collect()
        })
        .collect();
    InterferenceChannel::new(m.to_vec(), n.to_vec(), h, sigma2, p.to_vec())
}

/// Convenience for uniform antenna counts and power budgets.
pub fn gen_rayleigh_uniform(
    k: usize,
    m: usize,
    n: usize,
    sigma2: f64,
    p: f64,
    seed: u64,
) -> Result<InterferenceChannel> {
    gen_rayleigh(k, &vec![m; k], &vec![n; k], sigma2, &vec![p; k], seed)
}

/// Per-stream linear MMSE receive filters, normalized to unit norm:
/// `u_k^q` proportional to `T_k^{-1} H_kk v_k^q` where `T_k` is the total
/// received covariance induced by the precoders.
pub fn mmse_receivers(ch: &InterferenceChannel, v: &PrecoderSet) -> Result<FilterSet> {
    check_precoders(ch, v)?;
    let q = v.covariances();
    let t = ch.rx_cov_total(&q);
    let mut u = Vec::with_capacity(ch.users());
    for k in 0..ch.users() {
        let target = ch.h(k, k) * &v.v[k];
        let mut uk = solve_pd(&t[k], &target)?;
        for mut col in uk.column_iter_mut() {
            let nrm = col.norm();
            if nrm > 0.0 {
                col /= cx(nrm, 0.0);
            }
        }
        u.push(uk);
    }
    Ok(FilterSet { u })
}

/// SINR of each data stream for explicit receive filters:
/// `|u^H H_kk v|^2 / (sigma^2 ||u||^2 + sum of other streams' powers)`.
pub fn stream_sinr(
    ch: &InterferenceChannel,
    v: &PrecoderSet,
    u: &FilterSet,
) -> Result<Vec<Vec<f64>>> {
    check_precoders(ch, v)?;
    if u.u.len() != ch.users() {
        return Err(Error::DimensionMismatch("filter count != user count".into()));
    }
    let mut out = Vec::with_capacity(ch.users());
    for k in 0..ch.users() {
        let dk = v.v[k].ncols();
        if u.u[k].ncols() != dk || u.u[k].nrows() != ch.rx_antennas(k) {
            return Err(Error::DimensionMismatch(format!(
                "U_{k} is {}x{}, expected {}x{}",
                u.u[k].nrows(),
                u.u[k].ncols(),
                ch.rx_antennas(k),
                dk
            )));
        }
        let mut sinrs = Vec::with_capacity(dk);
        for qi in 0..dk {
            let uq = u.u[k].column(qi);
            let signal = (uq.adjoint() * ch.h(k, k) * v.v[k].column(qi))[(0, 0)].norm_sqr();
            let mut denom = ch.sigma2() * uq.norm_squared();
            for j in 0..ch.users() {
                let cross = uq.adjoint() * ch.h(k, j) * &v.v[j];
                for r in 0..v.v[j].ncols() {
                    if j == k && r == qi {
                        continue;
                    }
                    denom += cross[(0, r)].norm_sqr();
                }
            }
            sinrs.push(signal / denom);
        }
        out.push(sinrs);
    }
    Ok(out)
}

/// Per-stream SINR under MMSE receivers, evaluated in closed form:
/// `v^H H_kk^H R^{-1} H_kk v` with `R` the received covariance excluding
/// the stream itself. Equals [`stream_sinr`] composed with
/// [`mmse_receivers`].
pub fn sinr_mmse(ch: &InterferenceChannel, v: &PrecoderSet) -> Result<Vec<Vec<f64>>> {
    check_precoders(ch, v)?;
    let q = v.covariances();
    let t = ch.rx_cov_total(&q);
    let mut out = Vec::with_capacity(ch.users());
    for k in 0..ch.users() {
        let mut sinrs = Vec::with_capacity(v.v[k].ncols());
        for qi in 0..v.v[k].ncols() {
            let hv = ch.h(k, k) * v.v[k].column(qi);
            // covariance excluding this stream: T_k - hv hv^H
            let r = &t[k] - &hv * hv.adjoint();
            let x = solve_pd(&r, &CMatrix::from_column_slice(hv.len(), 1, hv.as_slice()))?;
            let g = (hv.adjoint() * x)[(0, 0)].re;
            sinrs.push(g);
        }
        out.push(sinrs);
    }
    Ok(out)
}

/// DoF-capturing utility of each user:
/// `U_k = tr[H_kk Q_k H_kk^H (sigma^2 I + sum_l H_kl Q_l H_kl^H)^{-1}]`.
///
/// Under MMSE receivers with `Q_k = V_k V_k^H` this equals the sum over
/// streams of `SINR / (1 + SINR)`, so it approaches the number of
/// interference-free streams as the noise vanishes.
pub fn dof_utility(ch: &InterferenceChannel, q: &CovarianceSet) -> Result<Vec<f64>> {
    check_covariances(ch, q)?;
    let t = ch.rx_cov_total(q);
    (0..ch.users())
        .map(|k| {
            let hk = ch.h(k, k);
            let s = hk * &q.q[k] * hk.adjoint();
            let x = solve_pd(&t[k], &s)?;
            Ok(re_trace(&x))
        })
        .collect()
}

/// Achievable rate of each user in nats:
/// `R_k = log det(I + H_kk Q_k H_kk^H C_kk^{-1})` with `C_kk` the
/// interference-plus-noise covariance at receiver `k`.
pub fn user_rate(ch: &InterferenceChannel, q: &CovarianceSet) -> Result<Vec<f64>> {
    check_covariances(ch, q)?;
    (0..ch.users())
        .map(|k| {
            let c = ch.rx_cov_excluding(q, k, k);
            let hk = ch.h(k, k);
            let t = &c + hk * &q.q[k] * hk.adjoint();
            Ok(crate::numerics::logdet_psd(&t)? - crate::numerics::logdet_psd(&c)?)
        })
        .collect()
}

/// Weighted sum rate in nats.
pub fn weighted_sum_rate(
    ch: &InterferenceChannel,
    q: &CovarianceSet,
    alpha: &[f64],
) -> Result<f64> {
    let rates = user_rate(ch, q)?;
    Ok(rates.iter().zip(alpha).map(|(r, a)| r * a).sum())
}

// --- JSON serialization -----------------------------------------------

// Channel file schema: {"K", "M", "N", "sigma2", "p", "H"} where H is a
// K x K array of matrices, each matrix an array of rows, each entry
// [re, im]. serde_json prints f64 values exactly (shortest round-trip
// form), so files round-trip bit-exactly.

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: Vec<usize>,
    #[serde(rename = "N")]
    n: Vec<usize>,
    sigma2: f64,
    p: Vec<f64>,
    #[serde(rename = "H")]
    h: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

pub(crate) fn cmatrix_to_rows(mat: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..mat.nrows())
        .map(|r| (0..mat.ncols()).map(|c| [mat[(r, c)].re, mat[(r, c)].im]).collect())
        .collect()
}

pub(crate) fn cmatrix_from_rows(rows: &[Vec<[f64; 2]>], nr: usize, nc: usize) -> Result<CMatrix> {
    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
        return Err(Error::DimensionMismatch(format!(
            "matrix rows do not form an {nr}x{nc} grid"
        )));
    }
    Ok(CMatrix::from_fn(nr, nc, |r, c| cx(rows[r][c][0], rows[r][c][1])))
}

impl InterferenceChannel {
    pub fn to_json(&self) -> Result<String> {
        let k = self.users();
        let h = (0..k)
            .map(|rx| (0..k).map(|tx| cmatrix_to_rows(&self.h[rx][tx])).collect())
            .collect();
        let doc = ChannelJson {
            k,
            m: self.m.clone(),
            n: self.n.clone(),
            sigma2: self.sigma2,
            p: self.p.clone(),
            h,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ChannelJson = serde_json::from_str(text)?;
        if doc.m.len() != doc.k || doc.n.len() != doc.k {
            return Err(Error::DimensionMismatch("K does not match M/N lists".into()));
        }
        if doc.h.len() != doc.k || doc.h.iter().any(|row| row.len() != doc.k) {
            return Err(Error::DimensionMismatch("H is not a KxK grid".into()));
        }
        let mut h = Vec::with_capacity(doc.k);
        for rx in 0..doc.k {
            let mut row = Vec::with_capacity(doc.k);
            for tx in 0..doc.k {
                row.push(cmatrix_from_rows(&doc.h[rx][tx], doc.n[rx], doc.m[tx])?);
            }
            h.push(row);
        }
        Self::new(doc.m, doc.n, h, doc.sigma2, doc.p)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
