//! One Monte-Carlo trial of the full pipeline: channels, beams, pilot
//! phase at every BS, estimates, precoders and downlink SINR.

use rand::Rng;

use crate::beamforming::BeamformerBank;
use crate::channel::{CMat, ChannelSet, Scope};
use crate::config::{ContaminationMode, ScenarioConfig};
use crate::downlink::{downlink_sinr, downlink_sinr_digital, ls_zf_precoder, zf_precoder, SinrTerms, ZfPrecoder};
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_equivalent, ls_estimate_fully_digital, uplink_receive, EquivalentChannelEstimate, PilotBook,
    UplinkObservation,
};
use crate::geometry::{drop_deployment, link_gains, Contamination, LinkGains};

/// Energy and noise levels of one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energies {
    pub e_p: f64,
    pub e_s: f64,
    pub noise_bs: f64,
    pub noise_ms: f64,
    pub cond_limit: f64,
}

impl Energies {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            e_p: cfg.pilot_energy(),
            e_s: cfg.symbol_energy(),
            noise_bs: cfg.noise_bs(),
            noise_ms: cfg.noise_ms(),
            cond_limit: cfg.cond_limit,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialRealization {
    pub channels: ChannelSet,
    pub bank: BeamformerBank,
    /// Uplink observation of every BS in scope, indexed by BS.
    pub obs: Vec<UplinkObservation>,
    pub gains: LinkGains,
    pub serving_gain: f64,
}

/// Downlink outcome of one trial. `None` marks a rejected
/// (ill-conditioned) estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub hybrid: Option<Vec<SinrTerms>>,
    pub ls: Option<Vec<SinrTerms>>,
}

fn rejectable<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::IllConditioned(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

impl TrialRealization {
    /// Draw order: deployment (geometric mode only), channels, AoA errors
    /// (only if enabled), then the noise of each BS.
    pub fn draw<R: Rng + ?Sized>(cfg: &ScenarioConfig, scope: Scope, rng: &mut R) -> Result<Self> {
        let dep = match cfg.contamination_mode {
            ContaminationMode::Geometric => Some(drop_deployment(cfg, rng)),
            ContaminationMode::ExplicitXiSq => None,
        };
        let gains = link_gains(cfg, dep.as_ref())?;
        let serving_gain = cfg.serving_gain();
        let channels = ChannelSet::draw(cfg, &gains, serving_gain, scope, rng);
        let bank = BeamformerBank::from_channels(&channels, cfg.aoa_error_std, rng);
        let bs_count = match scope {
            Scope::DesiredCell => 1,
            Scope::Network => channels.cells,
        };
        let obs = (0..bs_count)
            .map(|b| UplinkObservation::draw(&channels, &bank, b, rng))
            .collect();
        Ok(Self {
            channels,
            bank,
            obs,
            gains,
            serving_gain,
        })
    }

    pub fn contamination(&self) -> Contamination {
        Contamination::from_gains(&self.gains)
    }

    /// Path-loss compensation `1 / sqrt(pl_k)` of every served user.
    pub fn compensation(&self) -> Vec<f64> {
        vec![1.0 / self.serving_gain.sqrt(); self.channels.users]
    }

    pub fn received(&self, b: usize, pilots: &PilotBook, e_p: f64, noise_bs: f64) -> CMat {
        self.obs[b].received(pilots, e_p, noise_bs)
    }

    pub fn estimate_from(&self, b: usize, y: &CMat, pilots: &PilotBook, e_p: f64) -> Result<EquivalentChannelEstimate> {
        let s = uplink_receive(&self.bank.rf_matrix(b), y)?;
        estimate_equivalent(&s, pilots, e_p, &self.compensation(), &self.obs[b].true_equivalent(&self.bank))
    }

    pub fn estimate(&self, b: usize, pilots: &PilotBook, e_p: f64, noise_bs: f64) -> Result<EquivalentChannelEstimate> {
        self.estimate_from(b, &self.received(b, pilots, e_p, noise_bs), pilots, e_p)
    }

    /// Hybrid (and optionally fully-digital LS) downlink at the desired
    /// cell, every cell precoding from its own contaminated estimate.
    pub fn evaluate(&self, pilots: &PilotBook, en: &Energies, with_ls: bool) -> Result<TrialOutcome> {
        if self.obs.len() != self.channels.cells {
            return Err(Error::config("scope", "downlink evaluation needs the network scope"));
        }
        let mut hybrid = Vec::with_capacity(self.obs.len());
        let mut digital = Vec::with_capacity(self.obs.len());
        let (mut hybrid_ok, mut ls_ok) = (true, with_ls);
        for b in 0..self.obs.len() {
            let y = self.received(b, pilots, en.e_p, en.noise_bs);
            if hybrid_ok {
                let est = self.estimate_from(b, &y, pilots, en.e_p)?;
                match rejectable(zf_precoder(&est.h_eq_hat, en.cond_limit))? {
                    Some(p) => hybrid.push(p),
                    None => hybrid_ok = false,
                }
            }
            if ls_ok {
                let g_hat = ls_estimate_fully_digital(&y, pilots, en.e_p)?;
                match rejectable(ls_zf_precoder(&g_hat, en.cond_limit))? {
                    Some(p) => digital.push(p),
                    None => ls_ok = false,
                }
            }
        }
        Ok(TrialOutcome {
            hybrid: hybrid_ok.then(|| downlink_sinr(&self.obs, &self.bank, &hybrid, en.e_s, en.noise_ms)),
            ls: ls_ok.then(|| downlink_sinr_digital(&self.obs, &digital, en.e_s, en.noise_ms)),
        })
    }

    /// Single-cell downlink with the true equivalent channel: no
    /// contamination, no estimation noise, no neighbor BSs.
    pub fn perfect_csi_single_cell(&self, en: &Energies) -> Result<Option<Vec<SinrTerms>>> {
        let b = self.compensation();
        let h = self.obs[0].true_equivalent(&self.bank);
        let h_b = CMat::from_fn(h.nrows(), h.ncols(), |k, j| h[(k, j)] * b[k]);
        let Some(p) = rejectable(zf_precoder(&h_b, en.cond_limit))? else {
            return Ok(None);
        };
        let precoders: Vec<ZfPrecoder> = vec![p];
        Ok(Some(downlink_sinr(&self.obs[..1], &self.bank, &precoders, en.e_s, en.noise_ms)))
    }
}
