//! Shared fixtures for the pipeline benchmarks.

use mmcell_core::channel::Scope;
use mmcell_core::rng::trial_rng;
use mmcell_core::{build_pilots, Energies, PilotBook, ScenarioConfig, TrialRealization};

pub struct Fixture {
    pub cfg: ScenarioConfig,
    pub energies: Energies,
    pub pilots: PilotBook,
    pub realization: TrialRealization,
}

/// Default scenario with `m` antennas per RF chain and one drawn trial.
pub fn fixture(m: usize, scope: Scope) -> Fixture {
    let mut cfg = ScenarioConfig::default();
    cfg.bs_antennas = m;
    let realization = TrialRealization::draw(&cfg, scope, &mut trial_rng(cfg.seed, 0)).expect("fixture draw");
    Fixture {
        energies: Energies::from_config(&cfg),
        pilots: build_pilots(cfg.users),
        realization,
        cfg,
    }
}
