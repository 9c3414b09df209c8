//! Clustered mmWave channels between BSs and multi-antenna users.
//!
//! A link is kept in factored form: a list of rank-1 paths
//! `gain * a_M(x_bs) a_P(x_ue)^H`. Dense matrices are built only on request;
//! the simulator mostly needs `H w^*` which costs O(paths * (M + P)).

use std::io::Write;
use std::path::Path as FsPath;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::geometry::LinkGains;
use crate::rng::{complex_normal, uniform_pm1};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Steering vector by direction cosine: entry m is `exp(-j pi m x)`.
pub fn steering(len: usize, x: f64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); len];
    steering_into(x, &mut out);
    out
}

fn steering_into(x: f64, out: &mut [C64]) {
    let phase = -std::f64::consts::PI * x;
    let step = C64::from_polar(1.0, phase);
    let mut cur = C64::new(1.0, 0.0);
    for (m, v) in out.iter_mut().enumerate() {
        if m % 32 == 0 {
            cur = C64::from_polar(1.0, phase * m as f64);
        }
        *v = cur;
        cur *= step;
    }
}

/// ULA response for a physical angle in [0, pi] with half-wavelength spacing.
pub fn ula_response(len: usize, angle: f64) -> Vec<C64> {
    steering(len, angle.cos())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair {
    /// Direction cosine at the BS array.
    pub x_bs: f64,
    /// Direction cosine at the user array.
    pub x_ue: f64,
}

/// Draw the direction cosines of a strongest path and `n_clusters` clusters,
/// each uniform on [-1, 1].
pub fn sample_angles<R: Rng + ?Sized>(n_clusters: usize, rng: &mut R) -> Vec<AnglePair> {
    (0..=n_clusters)
        .map(|_| AnglePair {
            x_bs: uniform_pm1(rng),
            x_ue: uniform_pm1(rng),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayPath {
    pub gain: C64,
    pub angles: AnglePair,
}

/// M x P link channel (uplink orientation: user antennas to BS antennas).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannel {
    pub m: usize,
    pub p: usize,
    /// Large-scale gain.
    pub path_loss: f64,
    pub varsigma: f64,
    /// `paths[0]` is the strongest path, the rest are scattering clusters.
    pub paths: Vec<RayPath>,
}

fn weights(path_loss: f64, varsigma: f64, n_clusters: usize) -> (f64, f64) {
    if varsigma.is_infinite() {
        return (path_loss.sqrt(), 0.0);
    }
    let los = (path_loss * varsigma / (varsigma + 1.0)).sqrt();
    let nlos = (path_loss / ((varsigma + 1.0) * n_clusters as f64)).sqrt();
    (los, nlos)
}

impl LinkChannel {
    pub fn synth<R: Rng + ?Sized>(
        m: usize,
        p: usize,
        path_loss: f64,
        varsigma: f64,
        n_clusters: usize,
        rng: &mut R,
    ) -> Self {
        let (los, nlos) = weights(path_loss, varsigma, n_clusters);
        let angles = sample_angles(n_clusters, rng);
        let paths = angles
            .into_iter()
            .enumerate()
            .map(|(i, angles)| RayPath {
                gain: if i == 0 {
                    C64::new(los, 0.0)
                } else {
                    complex_normal(rng) * nlos
                },
                angles,
            })
            .collect();
        Self {
            m,
            p,
            path_loss,
            varsigma,
            paths,
        }
    }

    pub fn strongest(&self) -> &RayPath {
        &self.paths[0]
    }

    /// Dense M x P matrix.
    pub fn matrix(&self) -> CMat {
        let mut h = CMat::zeros(self.m, self.p);
        for path in &self.paths {
            let a = steering(self.m, path.angles.x_bs);
            let b = steering(self.p, path.angles.x_ue);
            for j in 0..self.p {
                let bj = path.gain * b[j].conj();
                for i in 0..self.m {
                    h[(i, j)] += a[i] * bj;
                }
            }
        }
        h
    }

    /// Dense P x M matrix of the reciprocal downlink.
    pub fn downlink_matrix(&self) -> CMat {
        self.matrix().transpose()
    }

    /// Dense matrix of the strongest path alone.
    pub fn strongest_matrix(&self) -> CMat {
        let mut only = self.clone();
        only.paths.truncate(1);
        only.matrix()
    }

    /// `H w^*`: what the BS sees when the user transmits through `w`.
    pub fn effective(&self, w: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.m];
        let mut a = vec![C64::new(0.0, 0.0); self.m];
        let mut b = vec![C64::new(0.0, 0.0); self.p];
        for path in &self.paths {
            steering_into(path.angles.x_ue, &mut b);
            // a_P^H w^* = conj(a_P^T w)
            let proj: C64 = b.iter().zip(w).map(|(bi, wi)| bi * wi).sum::<C64>().conj();
            let c = path.gain * proj;
            steering_into(path.angles.x_bs, &mut a);
            for (o, ai) in out.iter_mut().zip(&a) {
                *o += c * ai;
            }
        }
        out
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.matrix().norm_squared()
    }
}

/// Intra-cell channel of a desired-cell user.
pub fn synth_intra<R: Rng + ?Sized>(cfg: &ScenarioConfig, path_loss: f64, rng: &mut R) -> LinkChannel {
    LinkChannel::synth(
        cfg.bs_antennas,
        cfg.ue_antennas,
        path_loss,
        cfg.varsigma_intra,
        cfg.n_clusters,
        rng,
    )
}

/// Uplink channel from a neighbor-cell user into the desired BS.
pub fn synth_inter_uplink<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    path_loss: f64,
    varsigma: f64,
    rng: &mut R,
) -> LinkChannel {
    LinkChannel::synth(cfg.bs_antennas, cfg.ue_antennas, path_loss, varsigma, cfg.n_clusters, rng)
}

/// Downlink channel from a neighbor BS to a desired user; use
/// [`LinkChannel::downlink_matrix`] for the P x M orientation.
pub fn synth_inter_downlink<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    path_loss: f64,
    rng: &mut R,
) -> LinkChannel {
    LinkChannel::synth(
        cfg.bs_antennas,
        cfg.ue_antennas,
        path_loss,
        cfg.varsigma_inter_dl,
        cfg.n_clusters,
        rng,
    )
}

/// Which links a trial needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Links into the desired BS plus every cell's serving links.
    DesiredCell,
    /// Every BS-user link of the network.
    Network,
}

/// All channels of one trial, `link(b, c, k)` being the channel from user
/// `k` of cell `c` to BS `b`. Cell 0 is the desired cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub m: usize,
    pub p: usize,
    pub cells: usize,
    pub users: usize,
    pub scope: Scope,
    links: Vec<Option<LinkChannel>>,
}

impl ChannelSet {
    /// Draw every link in scope. Serving links first (cell by cell), then
    /// cross links in (b, c, k) order.
    pub fn draw<R: Rng + ?Sized>(
        cfg: &ScenarioConfig,
        gains: &LinkGains,
        serving_gain: f64,
        scope: Scope,
        rng: &mut R,
    ) -> Self {
        let cells = cfg.neighbor_cells + 1;
        let users = cfg.users;
        let mut links = vec![None; cells * cells * users];
        let idx = |b: usize, c: usize, k: usize| (b * cells + c) * users + k;
        for c in 0..cells {
            for k in 0..users {
                links[idx(c, c, k)] = Some(synth_intra(cfg, serving_gain, rng));
            }
        }
        for b in 0..cells {
            if scope == Scope::DesiredCell && b != 0 {
                break;
            }
            for c in 0..cells {
                if b == c {
                    continue;
                }
                let varsigma = if c == 0 {
                    cfg.varsigma_inter_dl
                } else {
                    cfg.varsigma_inter_ul
                };
                for k in 0..users {
                    let pl = serving_gain * gains.ratio(b, c, k);
                    links[idx(b, c, k)] = Some(synth_inter_uplink(cfg, pl, varsigma, rng));
                }
            }
        }
        Self {
            m: cfg.bs_antennas,
            p: cfg.ue_antennas,
            cells,
            users,
            scope,
            links,
        }
    }

    pub fn has_link(&self, b: usize, c: usize, k: usize) -> bool {
        self.links[(b * self.cells + c) * self.users + k].is_some()
    }

    pub fn link(&self, b: usize, c: usize, k: usize) -> &LinkChannel {
        self.links[(b * self.cells + c) * self.users + k]
            .as_ref()
            .unwrap_or_else(|| panic!("link ({b}, {c}, {k}) not drawn in {:?} scope", self.scope))
    }

    pub fn link_mut(&mut self, b: usize, c: usize, k: usize) -> &mut LinkChannel {
        let scope = self.scope;
        self.links[(b * self.cells + c) * self.users + k]
            .as_mut()
            .unwrap_or_else(|| panic!("link ({b}, {c}, {k}) not drawn in {scope:?} scope"))
    }

    /// H_k: desired user k to the desired BS.
    pub fn intra(&self, k: usize) -> &LinkChannel {
        self.link(0, 0, k)
    }

    /// U_{l,i}: user i of neighbor cell l (1-based) into the desired BS.
    pub fn uplink_inter(&self, l: usize, i: usize) -> &LinkChannel {
        self.link(0, l, i)
    }

    /// Reciprocal of H_{l,k}^T: neighbor BS l (1-based) to desired user k.
    pub fn downlink_inter(&self, l: usize, k: usize) -> &LinkChannel {
        self.link(l, 0, k)
    }

    /// Write every drawn link as a debug dump: a text header line followed
    /// by little-endian complex64 (re, im as f32) in column-major order.
    pub fn dump(&self, path: impl AsRef<FsPath>, seed: u64, trial: u64) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let drawn: Vec<(usize, usize, usize)> = (0..self.cells)
            .flat_map(|b| (0..self.cells).flat_map(move |c| (0..self.users).map(move |k| (b, c, k))))
            .filter(|&(b, c, k)| self.has_link(b, c, k))
            .collect();
        writeln!(
            f,
            "{{\"m\": {}, \"p\": {}, \"cells\": {}, \"users\": {}, \"links\": {}, \"seed\": {}, \"trial\": {}, \"order\": \"b,c,k col-major\"}}",
            self.m,
            self.p,
            self.cells,
            self.users,
            drawn.len(),
            seed,
            trial
        )?;
        for (b, c, k) in drawn {
            for v in self.link(b, c, k).matrix().iter() {
                f.write_all(&(v.re as f32).to_le_bytes())?;
                f.write_all(&(v.im as f32).to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }
}
