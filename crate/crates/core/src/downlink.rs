//! ZF downlink: precoders, per-user SINR terms and the closed-form rate
//! predictors.

use crate::beamforming::BeamformerBank;
use crate::channel::{CMat, C64};
use crate::error::{Error, Result};
use crate::estimation::UplinkObservation;

/// Returned by [`theorem2_rate`] when the predicted interference is zero.
pub const RATE_CAP: f64 = 1e3;

/// Linear precoder `beta * W`. For the hybrid system `W` is N x N and acts
/// after F_RF; for the fully-digital baseline it is M x N.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfPrecoder {
    pub w: CMat,
    pub beta: f64,
    pub cond: f64,
}

/// Largest entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn condition_number(a: &CMat) -> f64 {
    let sv = a.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn normalized(w: CMat, cond: f64) -> Result<ZfPrecoder> {
    let tr = w.norm_squared();
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::Numeric(format!("precoder power {tr} is not positive")));
    }
    Ok(ZfPrecoder {
        w,
        beta: 1.0 / tr.sqrt(),
        cond,
    })
}

/// `W = H_hat^{-1}`, `beta = 1 / sqrt(tr(W W^H))`.
pub fn zf_precoder(h_hat: &CMat, cond_limit: f64) -> Result<ZfPrecoder> {
    if !h_hat.is_square() {
        return Err(Error::dims("square equivalent channel", format!("{:?}", h_hat.shape())));
    }
    let cond = condition_number(h_hat);
    if !(cond <= cond_limit) {
        return Err(Error::IllConditioned(cond));
    }
    let w = h_hat
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    normalized(w, cond)
}

/// Fully-digital ZF from the M x N LS estimate:
/// `W = G^* (G^T G^*)^{-1}` so that `G^T W = I`.
pub fn ls_zf_precoder(g_hat: &CMat, cond_limit: f64) -> Result<ZfPrecoder> {
    let gc = g_hat.map(|z| z.conj());
    let gram = g_hat.transpose() * &gc;
    let cond = condition_number(&gram).sqrt();
    if !(cond <= cond_limit) {
        return Err(Error::IllConditioned(cond));
    }
    let inv = gram.try_inverse().ok_or(Error::IllConditioned(f64::INFINITY))?;
    normalized(gc * inv, cond)
}

/// Received powers at one user.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SinrTerms {
    pub desired: f64,
    pub intra: f64,
    pub inter: f64,
    pub noise: f64,
}

impl SinrTerms {
    pub fn sinr(&self) -> f64 {
        let d = self.intra + self.inter + self.noise;
        if self.desired == 0.0 {
            0.0
        } else {
            self.desired / d
        }
    }

    pub fn rate(&self) -> f64 {
        self.sinr().ln_1p() / std::f64::consts::LN_2
    }
}

fn row_times(row: &[C64], w: &CMat) -> Vec<C64> {
    (0..w.ncols())
        .map(|j| w.column(j).iter().zip(row).map(|(a, b)| a * b).sum())
        .collect()
}

/// SINR terms of user `k` given its channel row through the serving
/// precoder and its rows through every interfering precoder.
pub fn downlink_terms(
    own_row: &[C64],
    k: usize,
    own: &ZfPrecoder,
    interferers: &[(&[C64], &ZfPrecoder)],
    e_s: f64,
    noise: f64,
) -> SinrTerms {
    let t = row_times(own_row, &own.w);
    let b2 = own.beta * own.beta * e_s;
    let desired = t[k].norm_sqr() * b2;
    let intra = t
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, z)| z.norm_sqr())
        .sum::<f64>()
        * b2;
    let inter = interferers
        .iter()
        .map(|(row, p)| {
            row_times(row, &p.w).iter().map(|z| z.norm_sqr()).sum::<f64>() * p.beta * p.beta * e_s
        })
        .sum();
    SinrTerms {
        desired,
        intra,
        inter,
        noise,
    }
}

/// Hybrid downlink at every desired-cell user. `obs[b]` is BS b's uplink
/// observation; by reciprocity the channel from BS l to desired user k is
/// the transpose of the link seen in `obs[l].effective[0][k]`.
pub fn downlink_sinr(
    obs: &[UplinkObservation],
    bank: &BeamformerBank,
    precoders: &[ZfPrecoder],
    e_s: f64,
    noise: f64,
) -> Vec<SinrTerms> {
    let n = bank.users();
    (0..n)
        .map(|k| {
            let own = bank.project(0, &obs[0].effective[0][k]);
            let rows: Vec<Vec<C64>> = (1..precoders.len())
                .map(|l| bank.project(l, &obs[l].effective[0][k]))
                .collect();
            let inter: Vec<(&[C64], &ZfPrecoder)> = rows
                .iter()
                .zip(&precoders[1..])
                .map(|(r, p)| (r.as_slice(), p))
                .collect();
            downlink_terms(&own, k, &precoders[0], &inter, e_s, noise)
        })
        .collect()
}

/// Fully-digital counterpart of [`downlink_sinr`]: rows are the raw
/// effective channels.
pub fn downlink_sinr_digital(
    obs: &[UplinkObservation],
    precoders: &[ZfPrecoder],
    e_s: f64,
    noise: f64,
) -> Vec<SinrTerms> {
    let n = obs[0].effective[0].len();
    (0..n)
        .map(|k| {
            let inter: Vec<(&[C64], &ZfPrecoder)> = (1..precoders.len())
                .map(|l| (obs[l].effective[0][k].as_slice(), &precoders[l]))
                .collect();
            downlink_terms(&obs[0].effective[0][k], k, &precoders[0], &inter, e_s, noise)
        })
        .collect()
}

/// Parameters shared by the closed-form predictors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateInputs {
    pub m: usize,
    pub p: usize,
    pub n: usize,
    pub varsigma: f64,
    /// Serving-link large-scale gain.
    pub path_loss: f64,
    pub e_s: f64,
    pub noise: f64,
}

impl RateInputs {
    fn mp(&self) -> f64 {
        (self.m * self.p) as f64
    }

    /// `(varsigma + 1) / varsigma`, equal to 1 for a pure strongest path.
    fn los_inv(&self) -> f64 {
        if self.varsigma.is_infinite() {
            1.0
        } else {
            (self.varsigma + 1.0) / self.varsigma
        }
    }
}

/// Large-antenna power normalization `varsigma/(varsigma+1) * MP/N`.
pub fn beta_bar_sq(inp: &RateInputs) -> f64 {
    inp.mp() / (inp.n as f64 * inp.los_inv())
}

/// Asymptotic intra-cell interference.
pub fn lemma1_intra(rho_sq_sum: f64, inp: &RateInputs) -> f64 {
    let e = rho_sq_sum / inp.mp();
    let a = ((1.0 + e).sqrt() - 1.0).powi(2);
    let b = (1.0 + e) * (rho_sq_sum * inp.n as f64 / inp.mp()) * inp.los_inv();
    beta_bar_sq(inp) * inp.path_loss * inp.e_s * (a + b)
}

/// Asymptotic inter-cell interference from the cross-link gains.
pub fn lemma2_inter(cross_path_losses: &[f64], e_s: f64) -> f64 {
    e_s * cross_path_losses.iter().sum::<f64>()
}

/// Closed-form multi-cell ZF rate per user, capped at [`RATE_CAP`].
pub fn theorem2_rate(xi_sq: f64, zeta_sq_sum: f64, inp: &RateInputs) -> f64 {
    let mp = inp.mp();
    let k = inp.n as f64 * inp.los_inv() / mp;
    let a = ((1.0 + xi_sq / mp).sqrt() - 1.0).powi(2);
    let b = (1.0 + xi_sq / mp) * k * xi_sq;
    let c = k * zeta_sq_sum + inp.noise / (beta_bar_sq(inp) * inp.path_loss * inp.e_s);
    let total = a + b + c;
    if total <= 0.0 {
        return RATE_CAP;
    }
    (1.0 / total).ln_1p().min(RATE_CAP * std::f64::consts::LN_2) / std::f64::consts::LN_2
}

/// Single-cell interference-free bound. The received SNR is
/// `path_loss * e_s / noise`.
pub fn upper_bound_rate(inp: &RateInputs) -> f64 {
    let gain = if inp.varsigma.is_infinite() {
        inp.mp() / inp.n as f64
    } else {
        inp.mp() / inp.n as f64 * inp.varsigma / (inp.varsigma + 1.0) + 1.0 / (inp.varsigma + 1.0)
    };
    (gain * inp.path_loss * inp.e_s / inp.noise).ln_1p() / std::f64::consts::LN_2
}

/// `R / log2 M` for each point of an antenna sweep.
pub fn scaling_ratio(ms: &[usize], rates: &[f64]) -> Result<Vec<f64>> {
    if ms.len() != rates.len() {
        return Err(Error::dims(format!("{} rates", ms.len()), format!("{}", rates.len())));
    }
    if ms.len() < 3 {
        return Err(Error::Domain("scaling ratio needs at least 3 sweep points".into()));
    }
    if let Some(m) = ms.iter().find(|m| **m < 2) {
        return Err(Error::Domain(format!("log2 M undefined for M = {m}")));
    }
    Ok(ms.iter().zip(rates).map(|(m, r)| r / (*m as f64).log2()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, trial_rng};
    use proptest::prelude::*;

    fn fig4_inputs(m: usize) -> RateInputs {
        RateInputs {
            m,
            p: 10,
            n: 10,
            varsigma: 4.0,
            path_loss: 1.0,
            e_s: 1.0,
            noise: 1e-6,
        }
    }

    fn random_matrix(n: usize, seed: u64) -> CMat {
        let mut rng = trial_rng(seed, 0);
        CMat::from_fn(n, n, |_, _| complex_normal(&mut rng))
    }

    #[test]
    fn identity_precoder() {
        let p = zf_precoder(&CMat::identity(10, 10), 1e8).unwrap();
        assert!((p.w.clone() - CMat::identity(10, 10)).norm() < 1e-15);
        assert!((p.beta - 1.0 / 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zf_inverse_contract() {
        for seed in 0..20 {
            let h = random_matrix(10, seed);
            let p = zf_precoder(&h, 1e8).unwrap();
            let err = max_abs(&(&h * &p.w - CMat::identity(10, 10)));
            assert!(err < 1e-10);
            assert!((p.beta - 1.0 / p.w.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn zf_rejects_singular_and_non_square() {
        let mut h = random_matrix(4, 3);
        let c0 = h.column(0).clone_owned();
        h.set_column(1, &c0);
        assert!(matches!(zf_precoder(&h, 1e8), Err(Error::IllConditioned(_))));
        assert!(matches!(zf_precoder(&CMat::zeros(3, 4), 1e8), Err(Error::Dimension { .. })));
    }

    #[test]
    fn ls_zf_contract() {
        let mut rng = trial_rng(5, 0);
        let g = CMat::from_fn(32, 4, |_, _| complex_normal(&mut rng));
        let p = ls_zf_precoder(&g, 1e8).unwrap();
        assert!(max_abs(&(g.transpose() * &p.w - CMat::identity(4, 4))) < 1e-12);
    }

    #[test]
    fn zero_energy_gives_zero_sinr() {
        let p = zf_precoder(&CMat::identity(2, 2), 1e8).unwrap();
        let row = [C64::new(1.0, 0.0), C64::new(0.5, 0.0)];
        let t = downlink_terms(&row, 0, &p, &[], 0.0, 1e-3);
        assert_eq!(t.sinr(), 0.0);
        assert_eq!(t.rate(), 0.0);
    }

    #[test]
    fn intra_closed_form_examples() {
        let inp = fig4_inputs(200);
        assert_eq!(lemma1_intra(0.0, &inp), 0.0);
        // Independent re-derivation with explicit intermediate quantities.
        let (xi, mp, n, vs) = (0.01f64, 2000.0f64, 10.0f64, 4.0f64);
        let bb = vs / (vs + 1.0) * mp / n;
        let r = xi / mp;
        let want = bb * (((1.0 + r).sqrt() - 1.0).powi(2) + (1.0 + r) * (xi * n / mp) * (vs + 1.0) / vs);
        let got = lemma1_intra(xi, &inp);
        assert!((got - want).abs() <= 1e-15 * want);
        assert!((lemma1_intra(0.01, &fig4_inputs(1 << 24)) - 0.01).abs() < 1e-6);
    }

    #[test]
    fn inter_closed_form_examples() {
        assert_eq!(lemma2_inter(&[], 3.0), 0.0);
        assert!((lemma2_inter(&[1e-9; 6], 1.0) - 6e-9).abs() < 1e-24);
    }

    #[test]
    fn rate_closed_form_composes_interference_terms() {
        let inp = RateInputs {
            m: 200,
            p: 10,
            n: 10,
            varsigma: 4.0,
            path_loss: 1.8e-11,
            e_s: 1000.0,
            noise: 1.035e-12,
        };
        let (xi, zeta) = (0.01, 0.01);
        let upsilon = lemma1_intra(xi, &inp);
        let omega = lemma2_inter(&[inp.path_loss * zeta], inp.e_s);
        let signal = beta_bar_sq(&inp) * inp.path_loss * inp.e_s;
        let want = (1.0 + signal / (upsilon + omega + inp.noise)).log2();
        assert!((theorem2_rate(xi, zeta, &inp) - want).abs() < 1e-12);
    }

    #[test]
    fn rate_closed_form_cap_and_monotonicity() {
        let mut inp = fig4_inputs(64);
        inp.noise = 0.0;
        assert_eq!(theorem2_rate(0.0, 0.0, &inp), RATE_CAP);
        let mut prev = 0.0;
        for m in [16, 32, 64, 128, 256, 512, 1024] {
            let r = theorem2_rate(0.01, 0.01, &fig4_inputs(m));
            assert!(r > prev);
            prev = r;
        }
    }

    #[test]
    fn upper_bound_examples() {
        let inp = fig4_inputs(200);
        let snr = inp.e_s / inp.noise;
        assert!((upper_bound_rate(&inp) - (1.0 + 160.2 * snr).log2()).abs() < 1e-12);
        let mut los = inp;
        los.varsigma = f64::INFINITY;
        assert!((upper_bound_rate(&los) - (1.0 + 200.0 * snr).log2()).abs() < 1e-12);
    }

    #[test]
    fn scaling_law_at_large_m() {
        let m = 1usize << 16;
        let inp = RateInputs {
            m,
            p: 10,
            n: 10,
            varsigma: 4.0,
            path_loss: 1.0,
            e_s: 1.0,
            noise: 1e-3,
        };
        let ms = [64usize, 256, 1024, 4096, 16384, 65536];
        let th: Vec<f64> = ms
            .iter()
            .map(|&m| theorem2_rate(0.01, 0.01, &RateInputs { m, ..inp }))
            .collect();
        let ub: Vec<f64> = ms.iter().map(|&m| upper_bound_rate(&RateInputs { m, ..inp })).collect();
        let a = scaling_ratio(&ms, &th).unwrap();
        let b = scaling_ratio(&ms, &ub).unwrap();
        // R = log2 M + const, so the ratio falls towards 1 and each 4x step adds 2 bits.
        for i in 1..ms.len() {
            assert!(a[i] < a[i - 1] && a[i] > 1.0, "{a:?}");
            assert!(b[i] < b[i - 1] && b[i] > 1.0, "{b:?}");
        }
        let last = ms.len() - 1;
        assert!((th[last] - th[last - 1] - 2.0).abs() < 0.01);
        assert!((ub[last] - ub[last - 1] - 2.0).abs() < 0.01);
        assert!(scaling_ratio(&ms[..2], &th[..2]).is_err());
    }

    proptest! {
        #[test]
        fn upper_bound_dominates(
            m in 10usize..1024, p in 1usize..32, vs in 0.1f64..20.0,
            xi in 0.0f64..1.0, zeta in 0.0f64..1.0, snr_db in -10.0f64..80.0
        ) {
            let inp = RateInputs { m, p, n: 10, varsigma: vs, path_loss: 1.0, e_s: 10f64.powf(snr_db / 10.0), noise: 1.0 };
            prop_assert!(upper_bound_rate(&inp) >= theorem2_rate(xi, zeta, &inp));
        }

        #[test]
        fn zf_exact_on_random_instances(seed in any::<u64>()) {
            let h = random_matrix(10, seed);
            if let Ok(p) = zf_precoder(&h, 1e8) {
                prop_assert!(max_abs(&(&h * &p.w - CMat::identity(10, 10))) < 1e-10);
            }
        }
    }
}
