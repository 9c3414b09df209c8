//! Strongest-AoA analog beams and the array-gain kernel.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::{steering, AnglePair, CMat, ChannelSet, C64};
use crate::error::{Error, Result};

/// Analog beams of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellBeams {
    /// Columns of F_RF: `conj(a_M(x_bs)) / sqrt(M)` per user.
    pub rf: Vec<Vec<C64>>,
    /// User beams `conj(a_P(x_ue)) / sqrt(P)`.
    pub ue: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerBank {
    pub m: usize,
    pub p: usize,
    pub cells: Vec<CellBeams>,
}

fn matched(len: usize, x: f64) -> Vec<C64> {
    let scale = 1.0 / (len as f64).sqrt();
    steering(len, x).into_iter().map(|z| z.conj() * scale).collect()
}

/// Build all beams from the strongest-path angles `angles[cell][user]`.
pub fn build_bank(angles: &[Vec<AnglePair>], m: usize, p: usize) -> BeamformerBank {
    let cells = angles
        .iter()
        .map(|users| CellBeams {
            rf: users.iter().map(|a| matched(m, a.x_bs)).collect(),
            ue: users.iter().map(|a| matched(p, a.x_ue)).collect(),
        })
        .collect();
    BeamformerBank { m, p, cells }
}

/// Strongest-path angles of every serving link, optionally with a Gaussian
/// error on each direction cosine.
pub fn serving_angles<R: Rng + ?Sized>(
    channels: &ChannelSet,
    aoa_error_std: f64,
    rng: &mut R,
) -> Vec<Vec<AnglePair>> {
    let noise = (aoa_error_std > 0.0).then(|| Normal::new(0.0, aoa_error_std).expect("std > 0"));
    (0..channels.cells)
        .map(|c| {
            (0..channels.users)
                .map(|k| {
                    let mut a = channels.link(c, c, k).strongest().angles;
                    if let Some(n) = &noise {
                        a.x_bs += n.sample(rng);
                        a.x_ue += n.sample(rng);
                    }
                    a
                })
                .collect()
        })
        .collect()
}

impl BeamformerBank {
    pub fn from_channels<R: Rng + ?Sized>(channels: &ChannelSet, aoa_error_std: f64, rng: &mut R) -> Self {
        build_bank(&serving_angles(channels, aoa_error_std, rng), channels.m, channels.p)
    }

    pub fn users(&self) -> usize {
        self.cells.first().map_or(0, |c| c.rf.len())
    }

    /// F_RF of `cell` as a dense M x N matrix.
    pub fn rf_matrix(&self, cell: usize) -> CMat {
        let rf = &self.cells[cell].rf;
        CMat::from_fn(self.m, rf.len(), |i, j| rf[j][i])
    }

    /// `F_RF^T g` for an M-vector `g`.
    pub fn project(&self, cell: usize, g: &[C64]) -> Vec<C64> {
        self.cells[cell]
            .rf
            .iter()
            .map(|v| v.iter().zip(g).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Array gain `sin^2(n pi x / 2) / (n sin^2(pi x / 2))`, equal to `n` at
/// even integers.
pub fn array_gain(n: usize, x: f64) -> f64 {
    let nf = n as f64;
    let r = x.rem_euclid(2.0);
    let half = std::f64::consts::FRAC_PI_2;
    let s = (half * r).sin();
    if s.abs() < 1e-12 {
        return nf;
    }
    let t = (half * nf * r).sin();
    t * t / (nf * s * s)
}

/// `(1/2) * integral of array_gain(n, x) over [-1, 1]` by the periodic
/// trapezoid rule, which is exact for trigonometric polynomials of degree
/// below the panel count. `resolution` is raised to `n + 1` if smaller.
pub fn mean_array_gain(n: usize, resolution: usize) -> Result<f64> {
    if n == 0 || resolution == 0 {
        return Err(Error::Numeric(format!(
            "mean_array_gain needs n >= 1 and resolution >= 1 (n = {n}, resolution = {resolution})"
        )));
    }
    let panels = resolution.max(n + 1);
    let h = 2.0 / panels as f64;
    let sum: f64 = (0..panels).map(|i| array_gain(n, -1.0 + i as f64 * h)).sum();
    let mean = sum / panels as f64;
    if mean.is_finite() {
        Ok(mean)
    } else {
        Err(Error::Numeric("array-gain quadrature diverged".into()))
    }
}

/// `(1/sqrt(M)) h^T F_RF` for a length-M row `h`.
pub fn project_channel(h: &[C64], f_rf: &CMat) -> Result<Vec<C64>> {
    if h.len() != f_rf.nrows() {
        return Err(Error::dims(
            format!("row of length {}", f_rf.nrows()),
            format!("length {}", h.len()),
        ));
    }
    let scale = 1.0 / (h.len() as f64).sqrt();
    Ok((0..f_rf.ncols())
        .map(|j| f_rf.column(j).iter().zip(h).map(|(a, b)| a * b).sum::<C64>() * scale)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{trial_rng, uniform_pm1};
    use proptest::prelude::*;

    fn simpson_mean(n: usize, intervals: usize) -> f64 {
        let h = 2.0 / intervals as f64;
        let mut s = array_gain(n, -1.0) + array_gain(n, 1.0);
        for i in 1..intervals {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * array_gain(n, -1.0 + i as f64 * h);
        }
        s * h / 3.0 / 2.0
    }

    #[test]
    fn array_gain_examples() {
        assert_eq!(array_gain(64, 0.0), 64.0);
        assert_eq!(array_gain(64, 2.0), 64.0);
        assert!(array_gain(2, 1.0).abs() < 1e-30);
        // sin^2(pi/2) / (2 sin^2(pi/4)) = 1 / (2 * 0.5)
        assert!((array_gain(2, 0.5) - 1.0).abs() < 1e-15);
        assert_eq!(array_gain(1, 0.37), 1.0);
    }

    #[test]
    fn fejer_mean_against_simpson_oracle() {
        for n in [1usize, 2, 4, 64] {
            let oracle = simpson_mean(n, 400_000);
            assert!((oracle - 1.0).abs() < 1e-9, "oracle n={n}: {oracle}");
            let fast = mean_array_gain(n, 4096).unwrap();
            assert!((fast - oracle).abs() < 1e-9);
        }
    }

    #[test]
    fn fejer_mean_is_resolution_independent() {
        let a = mean_array_gain(333, 334).unwrap();
        let b = mean_array_gain(333, 10_000).unwrap();
        let c = mean_array_gain(333, 1).unwrap();
        assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12);
        assert!(mean_array_gain(0, 10).is_err());
        assert!(mean_array_gain(3, 0).is_err());
    }

    #[test]
    fn bank_properties() {
        let angles = vec![vec![
            AnglePair { x_bs: 0.3, x_ue: -0.2 },
            AnglePair { x_bs: 0.3, x_ue: 0.8 },
            AnglePair { x_bs: -0.9, x_ue: 0.1 },
        ]];
        let bank = build_bank(&angles, 32, 8);
        let f = bank.rf_matrix(0);
        assert!((((f.adjoint() * &f).trace()).re - 3.0).abs() < 1e-12);
        assert_eq!(f.column(0), f.column(1));
        for c in &bank.cells {
            for v in c.rf.iter().chain(&c.ue) {
                let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
        // Matched filter on its own steering vector.
        let a = steering(32, 0.3);
        let g = bank.project(0, &a);
        assert!((g[0] - C64::new(32f64.sqrt(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn los_projection_matches_dirichlet() {
        let (m, varsigma) = (16usize, 4.0f64);
        let (xk, xi) = (0.3, -0.2);
        let angles = vec![vec![
            AnglePair { x_bs: xk, x_ue: 0.0 },
            AnglePair { x_bs: xi, x_ue: 0.0 },
        ]];
        let f = build_bank(&angles, m, 1).rf_matrix(0);
        let amp = (varsigma / (varsigma + 1.0)).sqrt();
        let h: Vec<C64> = steering(m, xk).into_iter().map(|z| z * amp).collect();
        let eta = project_channel(&h, &f).unwrap();
        assert!((eta[0] - C64::new(amp, 0.0)).norm() < 1e-12);

        // Direct complex dot-product oracle.
        let direct: C64 = (0..m)
            .map(|q| {
                let ph = std::f64::consts::PI * q as f64 * (xi - xk);
                C64::from_polar(1.0, ph)
            })
            .sum::<C64>()
            * amp
            / m as f64;
        assert!((eta[1] - direct).norm() < 1e-12);
        let d = xk - xi;
        let half = std::f64::consts::FRAC_PI_2;
        let dirichlet = amp * (m as f64 * half * d).sin() / (m as f64 * (half * d).sin());
        assert!((eta[1].norm() - dirichlet.abs()).abs() < 1e-12);
        let via_gain = amp * (array_gain(m, d) / m as f64).sqrt();
        assert!((eta[1].norm() - via_gain).abs() < 1e-12);

        let zero = project_channel(&vec![C64::new(0.0, 0.0); m], &f).unwrap();
        assert!(zero.iter().all(|z| z.norm() == 0.0));
        assert!(project_channel(&h[..3], &f).is_err());
    }

    #[test]
    fn spatial_filter_averages_to_one_over_m() {
        let m = 16;
        let mut rng = trial_rng(21, 0);
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let f = build_bank(&[vec![AnglePair { x_bs: uniform_pm1(&mut rng), x_ue: 0.0 }]], m, 1)
                .rf_matrix(0);
            let h = steering(m, uniform_pm1(&mut rng));
            acc += project_channel(&h, &f).unwrap()[0].norm_sqr();
        }
        let mean = acc / draws as f64;
        assert!((mean * m as f64 - 1.0).abs() < 0.05, "{mean}");
    }

    proptest! {
        #[test]
        fn array_gain_bounds(n in 1usize..2048, x in -10.0f64..10.0) {
            let g = array_gain(n, x);
            prop_assert!(g >= 0.0);
            prop_assert!(g <= n as f64 * (1.0 + 1e-9));
        }

        #[test]
        fn fejer_mean_is_one(n in 1usize..=1024) {
            prop_assert!((mean_array_gain(n, 2048).unwrap() - 1.0).abs() < 1e-9);
        }
    }
}
