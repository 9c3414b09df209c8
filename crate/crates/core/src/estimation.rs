//! Uplink pilot phase: contaminated reception, equivalent-channel estimate,
//! NMSE, and the fully-digital LS baseline.

use rand::Rng;

use crate::beamforming::BeamformerBank;
use crate::channel::{CMat, ChannelSet, C64};
use crate::error::{Error, Result};
use crate::rng::complex_normal;

/// Orthonormal pilot sequences: the columns of the normalized N-point DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    pub phi: CMat,
}

pub fn build_pilots(n: usize) -> PilotBook {
    let scale = 1.0 / (n as f64).sqrt();
    let phi = CMat::from_fn(n, n, |r, c| {
        let ph = -2.0 * std::f64::consts::PI * ((r * c) % n) as f64 / n as f64;
        C64::from_polar(scale, ph)
    });
    PilotBook { phi }
}

impl PilotBook {
    pub fn len(&self) -> usize {
        self.phi.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Psi = sqrt(E_P) [Phi_1 ... Phi_N].
    pub fn psi(&self, e_p: f64) -> CMat {
        &self.phi * C64::new(e_p.sqrt(), 0.0)
    }
}

/// Everything BS `bs` receives during one pilot phase, before the pilot
/// energy and noise level are applied.
#[derive(Debug, Clone)]
pub struct UplinkObservation {
    pub bs: usize,
    /// `effective[c][k] = H_{bs <- (c,k)} w_{c,k}^*`.
    pub effective: Vec<Vec<Vec<C64>>>,
    /// Column i: sum over cells of the effective channels using pilot i.
    pub signal: CMat,
    /// Unit-variance complex Gaussian noise, M x N.
    pub noise: CMat,
}

impl UplinkObservation {
    pub fn draw<R: Rng + ?Sized>(
        channels: &ChannelSet,
        bank: &BeamformerBank,
        bs: usize,
        rng: &mut R,
    ) -> Self {
        let (m, n) = (channels.m, channels.users);
        let effective: Vec<Vec<Vec<C64>>> = (0..channels.cells)
            .map(|c| {
                (0..n)
                    .map(|k| channels.link(bs, c, k).effective(&bank.cells[c].ue[k]))
                    .collect()
            })
            .collect();
        let signal = CMat::from_fn(m, n, |i, k| effective.iter().map(|cell| cell[k][i]).sum());
        let noise = CMat::from_fn(m, n, |_, _| complex_normal(rng));
        Self {
            bs,
            effective,
            signal,
            noise,
        }
    }

    /// Y = sqrt(E_P) * signal * Phi^T + sigma * Z.
    pub fn received(&self, pilots: &PilotBook, e_p: f64, sigma2: f64) -> CMat {
        &self.signal * pilots.psi(e_p).transpose() + &self.noise * C64::new(sigma2.sqrt(), 0.0)
    }

    /// True equivalent channel of the serving cell: row k is `(F^T g_k)^T`.
    pub fn true_equivalent(&self, bank: &BeamformerBank) -> CMat {
        let own = &self.effective[self.bs];
        let rows: Vec<Vec<C64>> = own.iter().map(|g| bank.project(self.bs, g)).collect();
        CMat::from_fn(rows.len(), rows.len(), |k, j| rows[k][j])
    }
}

/// Per-RF-chain received rows `S = F_RF^T Y` (row k is chain k).
pub fn uplink_receive(f_rf: &CMat, y: &CMat) -> Result<CMat> {
    if f_rf.nrows() != y.nrows() {
        return Err(Error::dims(
            format!("{} antenna rows", f_rf.nrows()),
            format!("{} rows", y.nrows()),
        ));
    }
    Ok(f_rf.transpose() * y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentChannelEstimate {
    pub h_eq_true: CMat,
    pub h_eq_hat: CMat,
    /// Satisfies `h_eq_hat = diag(b) * (h_eq_true + delta)`.
    pub delta: CMat,
    pub b: Vec<f64>,
}

/// Correlate the received rows with each pilot and compensate path loss:
/// row k of the estimate is `b_k (S Phi_k^*)^T / sqrt(E_P)`.
pub fn estimate_equivalent(
    s: &CMat,
    pilots: &PilotBook,
    e_p: f64,
    b: &[f64],
    h_eq_true: &CMat,
) -> Result<EquivalentChannelEstimate> {
    let n = pilots.len();
    if s.shape() != (n, n) || h_eq_true.shape() != (n, n) || b.len() != n {
        return Err(Error::dims(
            format!("{n} x {n} blocks and {n} compensation gains"),
            format!("{:?}, {:?}, {}", s.shape(), h_eq_true.shape(), b.len()),
        ));
    }
    if let Some(bad) = b.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::config("b", format!("compensation gains must be positive, got {bad}")));
    }
    if !(e_p > 0.0) {
        return Err(Error::config("pilot_energy", "must be positive"));
    }
    let corr = (s * pilots.phi.map(|z| z.conj())).transpose();
    let inv = 1.0 / e_p.sqrt();
    let h_eq_hat = CMat::from_fn(n, n, |k, j| corr[(k, j)] * (b[k] * inv));
    let delta = CMat::from_fn(n, n, |k, j| h_eq_hat[(k, j)] / b[k] - h_eq_true[(k, j)]);
    Ok(EquivalentChannelEstimate {
        h_eq_true: h_eq_true.clone(),
        h_eq_hat,
        delta,
        b: b.to_vec(),
    })
}

impl EquivalentChannelEstimate {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    /// Per-user error energy `||b_k delta_k||^2 / (N M P)`.
    pub fn nmse_rows(&self, m: usize, p: usize) -> Vec<f64> {
        let n = self.n();
        let norm = (n * m * p) as f64;
        (0..n)
            .map(|k| {
                let e: f64 = self.delta.row(k).iter().map(|z| z.norm_sqr()).sum();
                e * self.b[k] * self.b[k] / norm
            })
            .collect()
    }

    /// Largest entry of `h_eq_hat - diag(b)(h_eq_true + delta)`.
    pub fn reconstruction_error(&self) -> f64 {
        let n = self.n();
        (0..n)
            .flat_map(|k| (0..n).map(move |j| (k, j)))
            .map(|(k, j)| {
                (self.h_eq_hat[(k, j)] - (self.h_eq_true[(k, j)] + self.delta[(k, j)]) * self.b[k])
                    .norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Mean of the per-user NMSE over a set of estimates.
pub fn empirical_nmse(estimates: &[EquivalentChannelEstimate], m: usize, p: usize) -> Result<Vec<f64>> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::Numeric("empirical NMSE needs at least one trial".into()))?;
    let mut acc = vec![0.0; first.n()];
    for e in estimates {
        for (a, v) in acc.iter_mut().zip(e.nmse_rows(m, p)) {
            *a += v;
        }
    }
    let t = estimates.len() as f64;
    Ok(acc.into_iter().map(|a| a / t).collect())
}

/// Closed-form NMSE: `xi^2 / (MP) + sigma^2 / (pl E_P M P)`.
pub fn analytical_nmse(rho_sq_sum: f64, path_loss: f64, e_p: f64, sigma2: f64, m: usize, p: usize) -> f64 {
    let mp = (m * p) as f64;
    rho_sq_sum / mp + sigma2 / (path_loss * e_p * mp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmseReport {
    pub empirical: Vec<f64>,
    pub analytical: Vec<f64>,
    pub m: usize,
    pub p: usize,
    pub xi_sq: f64,
    /// `pl * E_P / sigma^2` in dB.
    pub snr_db: f64,
}

impl NmseReport {
    pub fn new(
        estimates: &[EquivalentChannelEstimate],
        xi_sq: f64,
        path_loss: f64,
        e_p: f64,
        sigma2: f64,
        m: usize,
        p: usize,
    ) -> Result<Self> {
        let empirical = empirical_nmse(estimates, m, p)?;
        let a = analytical_nmse(xi_sq, path_loss, e_p, sigma2, m, p);
        Ok(Self {
            analytical: vec![a; empirical.len()],
            empirical,
            m,
            p,
            xi_sq,
            snr_db: crate::units::linear_to_db(path_loss * e_p / sigma2),
        })
    }
}

/// Fully-digital LS estimate of every user's effective channel:
/// column k is `Y Phi_k^* / sqrt(E_P)`.
pub fn ls_estimate_fully_digital(y: &CMat, pilots: &PilotBook, e_p: f64) -> Result<CMat> {
    if y.ncols() != pilots.len() {
        return Err(Error::dims(
            format!("{} pilot columns", pilots.len()),
            format!("{}", y.ncols()),
        ));
    }
    Ok(y * pilots.phi.map(|z| z.conj()) * C64::new(1.0 / e_p.sqrt(), 0.0))
}

/// Per-user `||g_hat_k - g_k||^2 / (pl M P)`.
pub fn ls_nmse(g_hat: &CMat, g_true: &CMat, path_loss: f64, p: usize) -> Vec<f64> {
    let m = g_hat.nrows();
    (0..g_hat.ncols())
        .map(|k| (g_hat.column(k) - g_true.column(k)).norm_squared() / (path_loss * (m * p) as f64))
        .collect()
}
