//! Sweep drivers producing CSV-ready results.
//!
//! Every trial draws from `trial_rng(seed, stream_id(point, trial))` and the
//! per-trial results are reduced in trial order, so the numbers do not
//! depend on how many worker threads run the trials.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::channel::Scope;
use crate::config::ScenarioConfig;
use crate::downlink::{
    lemma1_intra, lemma2_inter, max_abs, theorem2_rate, upper_bound_rate, zf_precoder, RateInputs, SinrTerms,
};
use crate::error::{Error, Result};
use crate::estimation::{analytical_nmse, build_pilots};
use crate::network::{Energies, TrialRealization};
use crate::rng::{complex_normal, stream_id, trial_rng};
use crate::stats::{half_width, mean, ratio_rate};

pub const FIG3_M_GRID: [usize; 5] = [16, 32, 64, 128, 256];
pub const FIG3_P_GRID: [usize; 2] = [4, 10];
pub const FIG5_M_GRID: [usize; 7] = [64, 96, 128, 192, 256, 384, 512];

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "MMCELL_WORKERS";

pub fn fig4_power_grid() -> Vec<f64> {
    (0..=13).map(|i| 20.0 + 2.0 * i as f64).collect()
}

/// Parse `start:stop:step` into an inclusive grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::config("grid", format!("expected start:stop:step, got `{text}`"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

pub fn fig3_config() -> ScenarioConfig {
    ScenarioConfig {
        varsigma_intra: 5.0,
        varsigma_inter_ul: 5.0,
        varsigma_inter_dl: 5.0,
        xi_sq: Some(0.01),
        max_tx_power_dbm: 46.0,
        trials: 2000,
        ..ScenarioConfig::default()
    }
}

pub fn fig4_config() -> ScenarioConfig {
    ScenarioConfig {
        bs_antennas: 200,
        varsigma_intra: 4.0,
        varsigma_inter_ul: 2.0,
        varsigma_inter_dl: 2.0,
        xi_sq: Some(0.01),
        trials: 500,
        ..ScenarioConfig::default()
    }
}

pub fn fig5_config() -> ScenarioConfig {
    ScenarioConfig {
        xi_sq: Some(0.2),
        max_tx_power_dbm: 46.0,
        ..fig4_config()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub series: String,
    pub sweep_value: f64,
    pub empirical: Option<f64>,
    pub analytical: Option<f64>,
    pub half_width: Option<f64>,
    pub trials: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub experiment: String,
    pub sweep_variable: String,
    pub seed: u64,
    pub fingerprint: String,
    pub rows: Vec<ResultRow>,
}

pub const CSV_HEADER: &str =
    "experiment,series,sweep_variable,sweep_value,empirical,analytical,half_width,trials,rejected,seed,fingerprint";

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

impl ExperimentResult {
    fn new(experiment: &str, sweep_variable: &str, cfg: &ScenarioConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            sweep_variable: sweep_variable.to_string(),
            seed: cfg.seed,
            fingerprint: cfg.fingerprint(),
            rows: Vec::new(),
        }
    }

    fn finish(mut self) -> Self {
        self.rows.sort_by(|a, b| a.sweep_value.total_cmp(&b.sweep_value));
        self
    }

    /// Rows of one series in sweep order.
    pub fn series(&self, name: &str) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| r.series == name).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.experiment,
                r.series,
                self.sweep_variable,
                r.sweep_value,
                cell(r.empirical),
                cell(r.analytical),
                cell(r.half_width),
                r.trials,
                r.rejected,
                self.seed,
                self.fingerprint
            );
        }
        out
    }
}

pub fn emit_csv(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, result.to_csv())?;
    Ok(())
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|n: &usize| *n > 0)
}

/// Run `f` on a dedicated pool of `workers` threads (rayon's default when
/// `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn nmse_point(m: usize, p: usize) -> u32 {
    ((m as u32) << 12) | (p as u32 & 0xfff)
}

/// Empirical vs closed-form NMSE over an (M, P) grid.
pub fn run_nmse_sweep(
    cfg: &ScenarioConfig,
    experiment: &str,
    m_grid: &[usize],
    p_grid: &[usize],
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut result = ExperimentResult::new(experiment, "M", cfg);
    for &p in p_grid {
        for &m in m_grid {
            let mut c = cfg.clone();
            c.bs_antennas = m;
            c.ue_antennas = p;
            c.validate()?;
            let pilots = build_pilots(c.users);
            let (e_p, noise) = (c.pilot_energy(), c.noise_bs());
            let point = nmse_point(m, p);
            let samples: Vec<(f64, f64)> = (0..c.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(c.seed, stream_id(point, t as u32));
                    let r = TrialRealization::draw(&c, Scope::DesiredCell, &mut rng)?;
                    let est = r.estimate(0, &pilots, e_p, noise)?;
                    let cont = r.contamination();
                    let xi = (0..c.users).map(|k| cont.xi_sq(k)).sum::<f64>() / c.users as f64;
                    Ok((mean(&est.nmse_rows(m, p)), xi))
                })
                .collect::<Result<_>>()?;
            let nmse: Vec<f64> = samples.iter().map(|s| s.0).collect();
            let xi: Vec<f64> = samples.iter().map(|s| s.1).collect();
            result.rows.push(ResultRow {
                series: format!("nmse_P{p}"),
                sweep_value: m as f64,
                empirical: Some(mean(&nmse)),
                analytical: Some(analytical_nmse(mean(&xi), c.serving_gain(), e_p, noise, m, p)),
                half_width: Some(half_width(&nmse)),
                trials: c.trials,
                rejected: 0,
            });
        }
    }
    Ok(result.finish())
}

/// Per-trial reduction of the per-user SINR terms.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TrialSummary {
    desired: f64,
    impairment: f64,
    ergodic: f64,
    intra: f64,
    inter: f64,
}

impl TrialSummary {
    fn of(terms: &[SinrTerms]) -> Self {
        let n = terms.len() as f64;
        let avg = |f: &dyn Fn(&SinrTerms) -> f64| terms.iter().map(f).sum::<f64>() / n;
        Self {
            desired: avg(&|s| s.desired),
            impairment: avg(&|s| s.intra + s.inter + s.noise),
            ergodic: avg(&|s| s.rate()),
            intra: avg(&|s| s.intra),
            inter: avg(&|s| s.inter),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PointSample {
    hybrid: Option<TrialSummary>,
    ls: Option<TrialSummary>,
    xi_sq: f64,
    zeta_sq: f64,
}

fn rate_trial(
    cfg: &ScenarioConfig,
    point: u32,
    t: usize,
    energies: &[Energies],
    with_ls: bool,
) -> Result<Vec<PointSample>> {
    let mut rng = trial_rng(cfg.seed, stream_id(point, t as u32));
    let r = TrialRealization::draw(cfg, Scope::Network, &mut rng)?;
    let pilots = build_pilots(cfg.users);
    let cont = r.contamination();
    let n = cfg.users as f64;
    let xi_sq = (0..cfg.users).map(|k| cont.xi_sq(k)).sum::<f64>() / n;
    let zeta_sq = (0..cfg.users).map(|k| cont.zeta_sq_sum(k)).sum::<f64>() / n;
    energies
        .iter()
        .map(|en| {
            let out = r.evaluate(&pilots, en, with_ls)?;
            Ok(PointSample {
                hybrid: out.hybrid.as_deref().map(TrialSummary::of),
                ls: out.ls.as_deref().map(TrialSummary::of),
                xi_sq,
                zeta_sq,
            })
        })
        .collect()
}

/// Rows for one operating point from its accepted trial summaries.
fn rate_rows(
    rows: &mut Vec<ResultRow>,
    sweep_value: f64,
    samples: &[PointSample],
    inp: &RateInputs,
    with_ls: bool,
) -> Result<()> {
    let trials = samples.len();
    let xi_sq = mean(&samples.iter().map(|s| s.xi_sq).collect::<Vec<_>>());
    let zeta_sq = mean(&samples.iter().map(|s| s.zeta_sq).collect::<Vec<_>>());
    let analytical = theorem2_rate(xi_sq, zeta_sq, inp);
    let mut push = |series: &str, emp: Option<f64>, ana: Option<f64>, hw: Option<f64>, rejected: usize| {
        rows.push(ResultRow {
            series: series.to_string(),
            sweep_value,
            empirical: emp,
            analytical: ana,
            half_width: hw,
            trials,
            rejected,
        })
    };

    let mut block = |name: &str, pick: &dyn Fn(&PointSample) -> Option<TrialSummary>, ana: Option<f64>| -> Result<()> {
        let acc: Vec<TrialSummary> = samples.iter().filter_map(pick).collect();
        let rejected = trials - acc.len();
        if acc.is_empty() {
            push(name, None, ana, None, rejected);
            return Ok(());
        }
        let num: Vec<f64> = acc.iter().map(|s| s.desired).collect();
        let den: Vec<f64> = acc.iter().map(|s| s.impairment).collect();
        let rr = ratio_rate(&num, &den)?;
        push(name, Some(rr.rate), ana, Some(rr.half_width), rejected);
        let erg: Vec<f64> = acc.iter().map(|s| s.ergodic).collect();
        push(&format!("{name}_ergodic"), Some(mean(&erg)), ana, Some(half_width(&erg)), rejected);
        if ana.is_some() {
            let intra: Vec<f64> = acc.iter().map(|s| s.intra).collect();
            let inter: Vec<f64> = acc.iter().map(|s| s.inter).collect();
            push(
                "intra_interference",
                Some(mean(&intra)),
                Some(lemma1_intra(xi_sq, inp)),
                Some(half_width(&intra)),
                rejected,
            );
            push(
                "inter_interference",
                Some(mean(&inter)),
                Some(lemma2_inter(&[inp.path_loss * zeta_sq], inp.e_s)),
                Some(half_width(&inter)),
                rejected,
            );
        }
        Ok(())
    };
    block("hybrid", &|s| s.hybrid, Some(analytical))?;
    if with_ls {
        block("ls_digital", &|s| s.ls, None)?;
    }
    push("upper_bound", None, Some(upper_bound_rate(inp)), None, 0);
    Ok(())
}

fn rate_inputs(c: &ScenarioConfig) -> RateInputs {
    RateInputs {
        m: c.bs_antennas,
        p: c.ue_antennas,
        n: c.users,
        varsigma: c.varsigma_intra,
        path_loss: c.serving_gain(),
        e_s: c.symbol_energy(),
        noise: c.noise_ms(),
    }
}

/// Rate versus maximum BS transmit power. All power points reuse the same
/// channel and noise draws of each trial.
pub fn run_power_sweep(cfg: &ScenarioConfig, experiment: &str, powers_dbm: &[f64]) -> Result<ExperimentResult> {
    cfg.validate()?;
    if powers_dbm.is_empty() {
        return Err(Error::config("power_grid", "empty power grid"));
    }
    let points: Vec<ScenarioConfig> = powers_dbm
        .iter()
        .map(|&p| ScenarioConfig {
            max_tx_power_dbm: p,
            ..cfg.clone()
        })
        .collect();
    let energies: Vec<Energies> = points.iter().map(Energies::from_config).collect();
    let point = cfg.bs_antennas as u32;
    let per_trial: Vec<Vec<PointSample>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| rate_trial(cfg, point, t, &energies, false))
        .collect::<Result<_>>()?;
    let mut result = ExperimentResult::new(experiment, "max_tx_power_dbm", cfg);
    for (i, c) in points.iter().enumerate() {
        let samples: Vec<PointSample> = per_trial.iter().map(|v| v[i]).collect();
        rate_rows(&mut result.rows, c.max_tx_power_dbm, &samples, &rate_inputs(c), false)?;
    }
    Ok(result.finish())
}

/// Rate versus the number of BS antennas, optionally with the LS baseline.
pub fn run_antenna_sweep(
    cfg: &ScenarioConfig,
    experiment: &str,
    m_grid: &[usize],
    with_ls: bool,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut result = ExperimentResult::new(experiment, "M", cfg);
    for &m in m_grid {
        let c = ScenarioConfig {
            bs_antennas: m,
            ..cfg.clone()
        };
        c.validate()?;
        let energies = [Energies::from_config(&c)];
        let samples: Vec<PointSample> = (0..c.trials)
            .into_par_iter()
            .map(|t| rate_trial(&c, m as u32, t, &energies, with_ls).map(|v| v[0]))
            .collect::<Result<_>>()?;
        rate_rows(&mut result.rows, m as f64, &samples, &rate_inputs(&c), with_ls)?;
    }
    Ok(result.finish())
}

pub fn run_fig3(cfg: &ScenarioConfig) -> Result<ExperimentResult> {
    run_nmse_sweep(cfg, "fig3", &FIG3_M_GRID, &FIG3_P_GRID)
}

pub fn run_fig4(cfg: &ScenarioConfig) -> Result<ExperimentResult> {
    run_power_sweep(cfg, "fig4", &fig4_power_grid())
}

pub fn run_fig5(cfg: &ScenarioConfig) -> Result<ExperimentResult> {
    run_antenna_sweep(cfg, "fig5", &FIG5_M_GRID, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Analytic identities that must hold on any correct build.
pub fn selftest() -> Vec<SelfCheck> {
    let mut checks = Vec::new();

    let worst = [1usize, 2, 7, 64, 333, 1024]
        .iter()
        .map(|&n| crate::beamforming::mean_array_gain(n, 4096).map(|v| (v - 1.0).abs()))
        .collect::<Result<Vec<_>>>();
    checks.push(match worst {
        Ok(v) => {
            let w = v.iter().cloned().fold(0.0, f64::max);
            SelfCheck {
                name: "fejer_mean_gain",
                passed: w < 1e-9,
                detail: format!("max |mean gain - 1| = {w:.2e}"),
            }
        }
        Err(e) => SelfCheck {
            name: "fejer_mean_gain",
            passed: false,
            detail: e.to_string(),
        },
    });

    let mut rng = trial_rng(0x5e1f, 0);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..100 {
        let h = crate::channel::CMat::from_fn(10, 10, |_, _| complex_normal(&mut rng));
        match zf_precoder(&h, 1e8) {
            Ok(p) => {
                let err = max_abs(&(&h * &p.w - crate::channel::CMat::identity(10, 10)));
                worst = worst.max(err);
            }
            Err(_) => failures += 1,
        }
    }
    checks.push(SelfCheck {
        name: "zf_exactness",
        passed: worst < 1e-10 && failures == 0,
        detail: format!("max |H W - I| = {worst:.2e}, {failures} failed inversions"),
    });

    let cfg = ScenarioConfig {
        bs_antennas: 32,
        ue_antennas: 4,
        users: 4,
        neighbor_cells: 2,
        ..ScenarioConfig::default()
    };
    let pilots = build_pilots(cfg.users);
    let recon = (0..10)
        .map(|t| {
            let r = TrialRealization::draw(&cfg, Scope::DesiredCell, &mut trial_rng(0x5e1f, t))?;
            let e = r.estimate(0, &pilots, cfg.pilot_energy(), cfg.noise_bs())?;
            Ok(e.reconstruction_error() / e.h_eq_hat.norm())
        })
        .collect::<Result<Vec<f64>>>();
    checks.push(match recon {
        Ok(v) => {
            let w = v.iter().cloned().fold(0.0, f64::max);
            SelfCheck {
                name: "reconstruction_identity",
                passed: w < 1e-12,
                detail: format!("max relative residual = {w:.2e}"),
            }
        }
        Err(e) => SelfCheck {
            name: "reconstruction_identity",
            passed: false,
            detail: e.to_string(),
        },
    });

    let base = ScenarioConfig::default();
    let pl1 = crate::geometry::path_loss(1.0, &base.path_loss_model()).unwrap_or(f64::NAN);
    let noise = base.thermal_noise();
    checks.push(SelfCheck {
        name: "link_budget_constants",
        passed: (pl1 / 7.2695e-7 - 1.0).abs() < 1e-4 && (noise / 1.035e-12 - 1.0).abs() < 1e-9,
        detail: format!("pl(1 m) = {pl1:.4e}, thermal noise = {noise:.4e} W"),
    });

    let inp = rate_inputs(&fig4_config());
    let (th, ub) = (theorem2_rate(0.01, 0.01, &inp), upper_bound_rate(&inp));
    checks.push(SelfCheck {
        name: "upper_bound_dominates",
        passed: ub >= th,
        detail: format!("multi-cell {th:.3} <= single-cell bound {ub:.3}"),
    });
    checks
}
