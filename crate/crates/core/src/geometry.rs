//! Deployment geometry, large-scale path loss and the inter-cell gain tables.

use rand::Rng;

use crate::config::{ContaminationMode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::units::{BOLTZMANN, SPEED_OF_LIGHT};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub alpha: f64,
    pub varrho: f64,
    pub carrier_hz: f64,
}

impl PathLossModel {
    pub fn gain(&self, d: f64) -> Result<f64> {
        path_loss(d, self)
    }
}

/// Linear large-scale gain at distance `d` meters.
pub fn path_loss(d: f64, model: &PathLossModel) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("path loss needs d > 0, got {d}")));
    }
    let fspl = 4.0 * std::f64::consts::PI * model.carrier_hz / SPEED_OF_LIGHT;
    let db = 10.0 * model.alpha * d.log10() + model.varrho * fspl.log10();
    Ok(10f64.powf(-db / 10.0))
}

/// Thermal noise power `B * k_B * T` in Watts.
pub fn noise_power(bandwidth_hz: f64, temperature_k: f64) -> f64 {
    bandwidth_hz * BOLTZMANN * temperature_k
}

/// BS and user positions of one drop. Cell 0 is the desired cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub desired_bs_position: Point,
    pub neighbor_bs_positions: Vec<Point>,
    /// `user_positions[c][k]`, cell 0 first.
    pub user_positions: Vec<Vec<Point>>,
}

impl Deployment {
    pub fn cells(&self) -> usize {
        1 + self.neighbor_bs_positions.len()
    }

    pub fn bs_position(&self, cell: usize) -> Point {
        if cell == 0 {
            self.desired_bs_position
        } else {
            self.neighbor_bs_positions[cell - 1]
        }
    }

    /// Distance from BS `bs` to user `k` of cell `cell`.
    pub fn distance(&self, bs: usize, cell: usize, k: usize) -> f64 {
        dist(self.bs_position(bs), self.user_positions[cell][k])
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Whether `p` (relative to the cell center) lies in the hexagon with the
/// given apothem whose flat sides face the angles `j * pi / 3`.
pub fn in_hexagon(p: Point, apothem: f64) -> bool {
    (0..6).all(|j| {
        let a = j as f64 * std::f64::consts::FRAC_PI_3;
        p[0] * a.cos() + p[1] * a.sin() <= apothem
    })
}

fn sample_user<R: Rng + ?Sized>(rng: &mut R, apothem: f64, d_min: f64) -> Point {
    let circumradius = apothem * 2.0 / 3f64.sqrt();
    loop {
        let p = [
            apothem * (2.0 * rng.random::<f64>() - 1.0),
            circumradius * (2.0 * rng.random::<f64>() - 1.0),
        ];
        if in_hexagon(p, apothem) && p[0].hypot(p[1]) >= d_min {
            return p;
        }
    }
}

pub fn drop_deployment<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Deployment {
    let l = cfg.neighbor_cells;
    let neighbor_bs_positions: Vec<Point> = (0..l)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / l as f64;
            [cfg.isd_m * a.cos(), cfg.isd_m * a.sin()]
        })
        .collect();
    let apothem = cfg.isd_m / 2.0;
    let user_positions = (0..=l)
        .map(|c| {
            let center = if c == 0 { [0.0, 0.0] } else { neighbor_bs_positions[c - 1] };
            (0..cfg.users)
                .map(|_| {
                    let p = sample_user(rng, apothem, cfg.d_min_m);
                    [center[0] + p[0], center[1] + p[1]]
                })
                .collect()
        })
        .collect();
    Deployment {
        desired_bs_position: [0.0, 0.0],
        neighbor_bs_positions,
        user_positions,
    }
}

/// Large-scale gain of every BS-user link relative to the power-controlled
/// serving gain. Serving links have ratio 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    cells: usize,
    users: usize,
    ratio: Vec<f64>,
}

impl LinkGains {
    pub fn explicit(cells: usize, users: usize, xi_sq: f64) -> Self {
        let cross = if cells > 1 { xi_sq / (cells - 1) as f64 } else { 0.0 };
        let mut ratio = vec![cross; cells * cells * users];
        for c in 0..cells {
            for k in 0..users {
                ratio[(c * cells + c) * users + k] = 1.0;
            }
        }
        Self { cells, users, ratio }
    }

    /// Ratios from distances, with every user power-controlled towards its
    /// own BS.
    pub fn geometric(dep: &Deployment, model: &PathLossModel) -> Result<Self> {
        let cells = dep.cells();
        let users = dep.user_positions.first().map_or(0, |u| u.len());
        let mut ratio = Vec::with_capacity(cells * cells * users);
        for b in 0..cells {
            for c in 0..cells {
                for k in 0..users {
                    let own = path_loss(dep.distance(c, c, k), model)?;
                    let cross = path_loss(dep.distance(b, c, k), model)?;
                    ratio.push(cross / own);
                }
            }
        }
        Ok(Self { cells, users, ratio })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Gain ratio of the link from user `k` of cell `cell` to BS `bs`.
    pub fn ratio(&self, bs: usize, cell: usize, k: usize) -> f64 {
        self.ratio[(bs * self.cells + cell) * self.users + k]
    }
}

/// Per desired user `k`: uplink ratios `rho_sq[l][k]` of the contaminating
/// users and downlink ratios `zeta_sq[l][k]` of the interfering BSs,
/// `l = 0..L` indexing neighbor cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Contamination {
    pub rho_sq: Vec<Vec<f64>>,
    pub zeta_sq: Vec<Vec<f64>>,
}

impl Contamination {
    pub fn from_gains(g: &LinkGains) -> Self {
        let rho_sq = (1..g.cells)
            .map(|l| (0..g.users).map(|k| g.ratio(0, l, k)).collect())
            .collect();
        let zeta_sq = (1..g.cells)
            .map(|l| (0..g.users).map(|k| g.ratio(l, 0, k)).collect())
            .collect();
        Self { rho_sq, zeta_sq }
    }

    /// Total uplink contamination seen by user `k`.
    pub fn xi_sq(&self, k: usize) -> f64 {
        self.rho_sq.iter().map(|r| r[k]).sum()
    }

    pub fn zeta_sq_sum(&self, k: usize) -> f64 {
        self.zeta_sq.iter().map(|r| r[k]).sum()
    }
}

/// Link-gain table for one drop. Explicit mode ignores the deployment.
pub fn link_gains(cfg: &ScenarioConfig, dep: Option<&Deployment>) -> Result<LinkGains> {
    match cfg.contamination_mode {
        ContaminationMode::ExplicitXiSq => Ok(LinkGains::explicit(
            cfg.neighbor_cells + 1,
            cfg.users,
            cfg.xi_sq_or_zero(),
        )),
        ContaminationMode::Geometric => {
            let dep = dep.ok_or_else(|| {
                Error::config("contamination_mode", "geometric mode needs a deployment")
            })?;
            LinkGains::geometric(dep, &cfg.path_loss_model())
        }
    }
}

pub fn contamination_coefficients(
    cfg: &ScenarioConfig,
    dep: Option<&Deployment>,
) -> Result<Contamination> {
    link_gains(cfg, dep).map(|g| Contamination::from_gains(&g))
}
