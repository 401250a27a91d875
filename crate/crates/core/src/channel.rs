//! Propagation: large-scale fading for ground users and UAVs, Rician/Rayleigh
//! small-scale fading and the per-link channel vectors
//! `h = sqrt(β/(K+1)) · (sqrt(K)·e^{jμ}·a(θ) + g)`.
//!
//! Ground users follow the urban log-distance model with spatially correlated
//! shadowing. UAV links use a two-branch LOS/NLOS surrogate of the UMi-AV
//! model; every constant lives in [`PropagationParams`] so it can be replaced
//! from the run configuration.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, SimRng, STREAM_SHADOWING, STREAM_SMALL_SCALE, STREAM_UAV_LINK};
use crate::scenario::{wrap_distance, Point3, Scenario, UserKind};
use crate::{CVector, C64};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Propagation constants. Defaults reproduce the reference deployment at 1.9 GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub carrier_ghz: f64,
    /// Ground-user shadowing standard deviation.
    pub gu_shadow_sigma_db: f64,
    /// Shadowing decorrelation distance between ground users.
    pub gu_shadow_decorrelation_m: f64,
    pub uav: UavModel,
}

/// LOS/NLOS surrogate for UAV links.
///
/// LOS probability is 1 at or above `los_full_height_m`. Below it, with
/// `p1 = p1_slope·log10(h) + p1_offset` and
/// `d1 = max(d1_slope·log10(h) + d1_offset, d1_min)`:
///
/// ```text
/// P_LOS = 1                                   if d2D <= d1
///       = d1/d2D + exp(-d2D/p1)·(1 - d1/d2D)  otherwise
/// ```
///
/// Path loss is free space at 1 m plus `10·n·log10(d3D)` with the branch
/// exponent `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavModel {
    pub los_full_height_m: f64,
    pub los_p1_slope: f64,
    pub los_p1_offset: f64,
    pub los_d1_slope: f64,
    pub los_d1_offset: f64,
    pub los_d1_min: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
    pub k_los_db: f64,
    pub shadow_sigma_db: f64,
    pub min_height_m: f64,
    pub max_height_m: f64,
}

impl Default for UavModel {
    fn default() -> Self {
        Self {
            los_full_height_m: 100.0,
            los_p1_slope: 233.98,
            los_p1_offset: -0.95,
            los_d1_slope: 294.05,
            los_d1_offset: -432.94,
            los_d1_min: 18.0,
            los_exponent: 2.2,
            nlos_exponent: 3.5,
            k_los_db: 10.0,
            shadow_sigma_db: 4.0,
            min_height_m: 22.5,
            max_height_m: 300.0,
        }
    }
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            carrier_ghz: 1.9,
            gu_shadow_sigma_db: 4.0,
            gu_shadow_decorrelation_m: 9.0,
            uav: UavModel::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub beta_db: f64,
    /// Linear Rician K-factor; 0 means Rayleigh.
    pub rician_k: f64,
    pub phase_offset: f64,
    pub aoa: f64,
    pub is_los: bool,
}

impl LinkParams {
    pub fn beta_linear(&self) -> f64 {
        db_to_linear(self.beta_db)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// All-pairs channel state. Pair `(u, a)` lives at index `u * n_sites + a`.
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub n_users: usize,
    pub n_sites: usize,
    pub antennas: usize,
    pub h: Vec<CVector>,
    pub link_params: Vec<LinkParams>,
    /// LMMSE estimates; empty until [`crate::estimation::estimate_channels`] runs.
    pub h_hat: Vec<CVector>,
}

impl ChannelState {
    #[inline]
    pub fn idx(&self, u: usize, a: usize) -> usize {
        u * self.n_sites + a
    }

    pub fn h(&self, u: usize, a: usize) -> &CVector {
        &self.h[self.idx(u, a)]
    }

    pub fn h_hat(&self, u: usize, a: usize) -> &CVector {
        &self.h_hat[self.idx(u, a)]
    }

    pub fn link(&self, u: usize, a: usize) -> &LinkParams {
        &self.link_params[self.idx(u, a)]
    }

    pub fn has_estimates(&self) -> bool {
        self.h_hat.len() == self.h.len()
    }

    /// Large-scale fading in dB, users by rows.
    pub fn beta_db(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_users, self.n_sites, |u, a| self.link(u, a).beta_db)
    }

    /// Write true channels as a row-major matrix of little-endian complex64
    /// values: `u32 rows`, `u32 cols`, then `rows·cols` (re: f32, im: f32)
    /// pairs. Row `u * n_sites + a` holds `h_{u,a}`.
    pub fn dump_binary(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(&(self.h.len() as u32).to_le_bytes())?;
        out.write_all(&(self.antennas as u32).to_le_bytes())?;
        for v in &self.h {
            for z in v.iter() {
                out.write_all(&(z.re as f32).to_le_bytes())?;
                out.write_all(&(z.im as f32).to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Read back a file written by [`ChannelState::dump_binary`] as rows of complex values.
pub fn read_binary_dump(path: &Path) -> Result<Vec<Vec<num_complex::Complex32>>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 8 {
        return Err(Error::invalid_arg("channel dump shorter than its header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (rows, cols) = (word(0) as usize, word(4) as usize);
    if bytes.len() != 8 + rows * cols * 8 {
        return Err(Error::invalid_arg(
            "channel dump size does not match header",
        ));
    }
    let f = |i: usize| f32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    Ok((0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| {
                    let off = 8 + (r * cols + c) * 8;
                    num_complex::Complex32::new(f(off), f(off + 4))
                })
                .collect()
        })
        .collect())
}

/// Ground-user large-scale fading in dB: `-36.7·log10(d) - 22.7·log10(f) + shadow`.
pub fn gu_large_scale(d: f64, f_ghz: f64, shadow_db: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::invalid_arg(format!(
            "distance must be positive, got {d}"
        )));
    }
    Ok(-36.7 * d.log10() - 22.7 * f_ghz.log10() + shadow_db)
}

/// Correlated log-normal shadowing for ground users, one column per site.
///
/// Within a column the covariance is `σ²·2^(-r/r0)` with `r` the distance
/// between the two users; columns are independent. Draws use the symmetric
/// square root of the covariance; negative eigenvalues from round-off are
/// clipped to zero.
pub fn correlated_shadowing(
    gu_positions: &[Point3],
    n_sites: usize,
    sigma_db: f64,
    r0: f64,
    side: f64,
    wrap: bool,
    seed: u64,
) -> DMatrix<f64> {
    let n = gu_positions.len();
    if n == 0 {
        return DMatrix::zeros(0, n_sites);
    }
    let root = shadowing_sqrt(gu_positions, sigma_db, r0, side, wrap);
    let mut rng = rng::rng_from(seed, &[STREAM_SHADOWING]);
    let z = DMatrix::from_fn(n, n_sites, |_, _| StandardNormal.sample(&mut rng));
    root * z
}

pub fn shadowing_covariance(
    gu_positions: &[Point3],
    sigma_db: f64,
    r0: f64,
    side: f64,
    wrap: bool,
) -> DMatrix<f64> {
    let n = gu_positions.len();
    DMatrix::from_fn(n, n, |g, i| {
        let (p, q) = (gu_positions[g], gu_positions[i]);
        let r = if wrap {
            wrap_distance(p, q, side)
        } else {
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
        };
        sigma_db * sigma_db * 2f64.powf(-r / r0)
    })
}

fn shadowing_sqrt(
    gu_positions: &[Point3],
    sigma_db: f64,
    r0: f64,
    side: f64,
    wrap: bool,
) -> DMatrix<f64> {
    let cov = shadowing_covariance(gu_positions, sigma_db, r0, side, wrap);
    let eig = SymmetricEigen::new(cov);
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut clipped = 0usize;
    let sqrt_vals = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| {
            if l < 0.0 {
                if l < -1e-10 * scale {
                    clipped += 1;
                }
                0.0
            } else {
                l.sqrt()
            }
        }),
    );
    if clipped > 0 {
        warn!("shadowing covariance had {clipped} negative eigenvalue(s); clipped to zero");
    }
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

impl UavModel {
    pub fn los_probability(&self, d2d: f64, height: f64) -> f64 {
        if height >= self.los_full_height_m {
            return 1.0;
        }
        let lh = height.log10();
        let p1 = self.los_p1_slope * lh + self.los_p1_offset;
        let d1 = (self.los_d1_slope * lh + self.los_d1_offset).max(self.los_d1_min);
        if d2d <= d1 {
            1.0
        } else {
            d1 / d2d + (-d2d / p1).exp() * (1.0 - d1 / d2d)
        }
    }

    /// Mean large-scale gain in dB (without shadowing) for one branch.
    pub fn mean_gain_db(&self, d3d: f64, carrier_ghz: f64, los: bool) -> f64 {
        let fspl_1m = 20.0 * (4.0 * PI * carrier_ghz * 1e9 / SPEED_OF_LIGHT).log10();
        let n = if los {
            self.los_exponent
        } else {
            self.nlos_exponent
        };
        -(fspl_1m + 10.0 * n * d3d.max(1.0).log10())
    }
}

/// Draw the link parameters of one UAV–site link.
pub fn uav_link_params(
    uav_pos: Point3,
    site_pos: Point3,
    horizontal: (f64, f64),
    params: &PropagationParams,
    seed: u64,
) -> Result<LinkParams> {
    let mut rng = rng::rng_from(seed, &[STREAM_UAV_LINK]);
    uav_link_params_with(uav_pos, site_pos, horizontal, params, &mut rng)
}

/// As [`uav_link_params`] but drawing from a caller-provided generator.
/// `horizontal` is the (possibly wrapped) site-to-UAV displacement.
pub fn uav_link_params_with<R: Rng + ?Sized>(
    uav_pos: Point3,
    site_pos: Point3,
    horizontal: (f64, f64),
    params: &PropagationParams,
    rng: &mut R,
) -> Result<LinkParams> {
    let m = &params.uav;
    let h = uav_pos[2];
    if !(m.min_height_m..=m.max_height_m).contains(&h) {
        return Err(Error::invalid_arg(format!(
            "UAV height {h} m outside model range [{}, {}]",
            m.min_height_m, m.max_height_m
        )));
    }
    let (dx, dy) = horizontal;
    let d2d = dx.hypot(dy);
    let dz = uav_pos[2] - site_pos[2];
    let d3d = (d2d * d2d + dz * dz).sqrt();

    let is_los = rng.random::<f64>() < m.los_probability(d2d, h);
    let z: f64 = StandardNormal.sample(rng);
    let shadow = m.shadow_sigma_db * z;
    let beta_db = m.mean_gain_db(d3d, params.carrier_ghz, is_los) + shadow;
    let rician_k = if is_los {
        db_to_linear(m.k_los_db)
    } else {
        0.0
    };
    let phase_offset = rng.random::<f64>() * 2.0 * PI;
    Ok(LinkParams {
        beta_db,
        rician_k,
        phase_offset,
        aoa: dy.atan2(dx),
        is_los,
    })
}

/// Half-wavelength ULA response: element `n` is `exp(j·π·n·sin θ)`.
pub fn steering_vector(theta: f64, m: usize) -> CVector {
    let s = theta.sin();
    CVector::from_fn(m, |n, _| C64::from_polar(1.0, PI * n as f64 * s))
}

fn circular_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn draw_channel(lp: &LinkParams, m: usize, seed: u64) -> CVector {
    let mut rng = rng::rng_from(seed, &[STREAM_SMALL_SCALE]);
    draw_channel_with(lp, m, &mut rng)
}

pub fn draw_channel_with<R: Rng + ?Sized>(lp: &LinkParams, m: usize, rng: &mut R) -> CVector {
    let k = lp.rician_k;
    let amp = (lp.beta_linear() / (k + 1.0)).sqrt();
    let mut h = CVector::from_fn(m, |_, _| circular_normal(rng));
    if k > 0.0 {
        let los = steering_vector(lp.aoa, m) * (C64::from_polar(k.sqrt(), lp.phase_offset));
        h += los;
    }
    h * C64::from(amp)
}

/// Draw link parameters and channel vectors for every (user, site) pair.
pub fn build_channel_state(
    scenario: &Scenario,
    params: &PropagationParams,
    seed: u64,
) -> Result<ChannelState> {
    let n_users = scenario.n_users();
    let n_sites = scenario.n_sites();
    let m = scenario.antennas;

    let gu_idx: Vec<usize> = (0..n_users)
        .filter(|&u| scenario.user_kind[u] == UserKind::Ground)
        .collect();
    let gu_pos: Vec<Point3> = gu_idx.iter().map(|&u| scenario.user_positions[u]).collect();
    let shadow = correlated_shadowing(
        &gu_pos,
        n_sites,
        params.gu_shadow_sigma_db,
        params.gu_shadow_decorrelation_m,
        scenario.side_length,
        scenario.wrap_around,
        seed,
    );
    let mut gu_row = vec![usize::MAX; n_users];
    for (row, &u) in gu_idx.iter().enumerate() {
        gu_row[u] = row;
    }

    let mut link_params = Vec::with_capacity(n_users * n_sites);
    for u in 0..n_users {
        for a in 0..n_sites {
            let (dx, dy) = scenario.horizontal_offset(u, a);
            let lp = match scenario.user_kind[u] {
                UserKind::Ground => LinkParams {
                    beta_db: gu_large_scale(
                        scenario.distance(u, a),
                        params.carrier_ghz,
                        shadow[(gu_row[u], a)],
                    )?,
                    rician_k: 0.0,
                    phase_offset: 0.0,
                    aoa: dy.atan2(dx),
                    is_los: false,
                },
                UserKind::Uav => {
                    let mut rng: SimRng =
                        rng::rng_from(seed, &[STREAM_UAV_LINK, u as u64, a as u64]);
                    uav_link_params_with(
                        scenario.user_positions[u],
                        scenario.ap_positions[a],
                        (dx, dy),
                        params,
                        &mut rng,
                    )?
                }
            };
            link_params.push(lp);
        }
    }

    let h = link_params
        .iter()
        .enumerate()
        .map(|(i, lp)| {
            let (u, a) = (i / n_sites, i % n_sites);
            let mut rng = rng::rng_from(seed, &[STREAM_SMALL_SCALE, u as u64, a as u64]);
            draw_channel_with(lp, m, &mut rng)
        })
        .collect();

    Ok(ChannelState {
        n_users,
        n_sites,
        antennas: m,
        h,
        link_params,
        h_hat: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, AreaConfig};
    use rand::SeedableRng;

    #[test]
    fn gu_large_scale_examples() {
        // -36.7·2 - 22.7·log10(1.9)
        let v = gu_large_scale(100.0, 1.9, 0.0).unwrap();
        let oracle = -73.4 - 22.7 * 1.9f64.ln() / 10f64.ln();
        assert!((v - oracle).abs() < 1e-12);
        assert!((v + 79.73).abs() < 0.01);
        assert_eq!(gu_large_scale(1.0, 1.0, 0.0).unwrap(), 0.0);
        let diff = gu_large_scale(100.0, 1.9, 4.0).unwrap() - v;
        assert!((diff - 4.0).abs() < 1e-12);
        assert!(gu_large_scale(0.0, 1.9, 0.0).is_err());
        assert!(gu_large_scale(-3.0, 1.9, 0.0).is_err());
    }

    #[test]
    fn shadowing_covariance_values() {
        let pos = [[0.0, 0.0, 1.65], [9.0, 0.0, 1.65]];
        let c = shadowing_covariance(&pos, 4.0, 9.0, 1000.0, true);
        assert!((c[(0, 0)] - 16.0).abs() < 1e-12);
        assert!((c[(0, 1)] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn colocated_users_share_shadowing() {
        let pos = [
            [100.0, 200.0, 1.65],
            [100.0, 200.0, 1.65],
            [600.0, 10.0, 1.65],
        ];
        let s = correlated_shadowing(&pos, 20, 4.0, 9.0, 1000.0, true, 3);
        for a in 0..20 {
            assert!((s[(0, a)] - s[(1, a)]).abs() < 1e-9);
        }
    }

    #[test]
    fn shadowing_empirical_correlation() {
        let pos = [[0.0, 0.0, 1.65], [9.0, 0.0, 1.65]];
        // 10^4 independent columns behave as 10^4 draws
        let s = correlated_shadowing(&pos, 10_000, 4.0, 9.0, 1000.0, true, 17);
        let n = s.ncols() as f64;
        let (m0, m1) = (s.row(0).sum() / n, s.row(1).sum() / n);
        let mut c01 = 0.0;
        let mut v0 = 0.0;
        let mut v1 = 0.0;
        for a in 0..s.ncols() {
            let (x, y) = (s[(0, a)] - m0, s[(1, a)] - m1);
            c01 += x * y;
            v0 += x * x;
            v1 += y * y;
        }
        let rho = c01 / (v0 * v1).sqrt();
        assert!((rho - 0.5).abs() < 0.05, "rho = {rho}");
        assert!((v0 / n - 16.0).abs() < 1.0);
    }

    #[test]
    fn shadowing_independent_across_sites() {
        let pos = [[0.0, 0.0, 1.65]];
        let s = correlated_shadowing(&pos, 20_000, 4.0, 9.0, 1000.0, true, 4);
        // lag-1 correlation between neighbouring site columns
        let n = s.ncols() - 1;
        let c: f64 = (0..n).map(|a| s[(0, a)] * s[(0, a + 1)]).sum::<f64>() / n as f64;
        assert!(c.abs() / 16.0 < 0.03);
    }

    #[test]
    fn uav_los_probability_shape() {
        let m = UavModel::default();
        for d in [10.0, 100.0, 900.0] {
            assert_eq!(m.los_probability(d, 100.0), 1.0);
            assert_eq!(m.los_probability(d, 250.0), 1.0);
        }
        assert_eq!(m.los_probability(10.0, 30.0), 1.0);
        let p = m.los_probability(500.0, 30.0);
        assert!(p > 0.0 && p < 1.0);
        assert!(m.los_probability(800.0, 30.0) < p);
    }

    #[test]
    fn uav_high_altitude_always_los() {
        let params = PropagationParams::default();
        for s in 0..200 {
            let lp = uav_link_params(
                [10.0, 0.0, 150.0],
                [700.0, 300.0, 10.0],
                (690.0, -300.0),
                &params,
                s,
            )
            .unwrap();
            assert!(lp.is_los);
            assert!((lp.rician_k - 10.0).abs() < 1e-12);
            assert!((0.0..2.0 * PI).contains(&lp.phase_offset));
            assert!(lp.aoa.abs() <= PI);
        }
    }

    #[test]
    fn uav_height_out_of_range() {
        let params = PropagationParams::default();
        assert!(
            uav_link_params([0.0, 0.0, 10.0], [1.0, 1.0, 10.0], (1.0, 1.0), &params, 0).is_err()
        );
        assert!(
            uav_link_params([0.0, 0.0, 301.0], [1.0, 1.0, 10.0], (1.0, 1.0), &params, 0).is_err()
        );
    }

    #[test]
    fn uav_los_gain_decreases_with_distance() {
        let m = UavModel::default();
        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let g = m.mean_gain_db(10.0 * i as f64 + 5.0, 1.9, true);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn uav_empirical_los_frequency() {
        let params = PropagationParams::default();
        let (pos, site, off) = ([400.0, 0.0, 40.0], [0.0, 0.0, 10.0], (400.0, 0.0));
        let p = params.uav.los_probability(400.0, 40.0);
        let mut rng = SimRng::seed_from_u64(77);
        let n = 10_000;
        let los = (0..n)
            .filter(|_| {
                uav_link_params_with(pos, site, off, &params, &mut rng)
                    .unwrap()
                    .is_los
            })
            .count();
        assert!((los as f64 / n as f64 - p).abs() < 0.02, "p = {p}");
    }

    #[test]
    fn steering_vector_examples() {
        let v = steering_vector(0.0, 4);
        assert!(v.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
        for theta in [-2.0, 0.3, 1.1] {
            let v = steering_vector(theta, 8);
            assert!((v.norm() - 8f64.sqrt()).abs() < 1e-12);
        }
        let v = steering_vector(PI / 2.0, 2);
        assert!((v[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((v[1] - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    fn mean_power(k: f64) -> f64 {
        let lp = LinkParams {
            beta_db: -80.0,
            rician_k: k,
            phase_offset: 0.4,
            aoa: 0.7,
            is_los: k > 0.0,
        };
        let mut rng = SimRng::seed_from_u64(k.to_bits());
        let n = 10_000;
        let total: f64 = (0..n)
            .map(|_| draw_channel_with(&lp, 8, &mut rng).norm_squared())
            .sum();
        total / n as f64 / (lp.beta_linear() * 8.0)
    }

    #[test]
    fn channel_power_normalization() {
        for k in [0.0, 1.0, 10.0, 100.0] {
            let r = mean_power(k);
            assert!((r - 1.0).abs() < 0.03, "K = {k}: ratio {r}");
        }
    }

    #[test]
    fn strong_los_aligns_with_steering_vector() {
        let lp = LinkParams {
            beta_db: -70.0,
            rician_k: 1e6,
            phase_offset: 1.3,
            aoa: -0.6,
            is_los: true,
        };
        let h = draw_channel(&lp, 8, 5);
        let a = steering_vector(lp.aoa, 8);
        let rho = h.dotc(&a).norm() / (h.norm() * a.norm());
        assert!(rho >= 0.999);
    }

    #[test]
    fn full_state_invariants() {
        let cfg = AreaConfig {
            ap_count: 10,
            gu_count: 5,
            uav_count: 3,
            serving_ap_count: 3,
            ..Default::default()
        };
        let sc = generate_scenario(&cfg, 2).unwrap();
        let st = build_channel_state(&sc, &PropagationParams::default(), 2).unwrap();
        assert_eq!(st.h.len(), 80);
        assert!(st.h.iter().all(|v| v.len() == 8));
        for u in 0..5 {
            for a in 0..10 {
                assert_eq!(st.link(u, a).rician_k, 0.0);
            }
        }
        let again = build_channel_state(&sc, &PropagationParams::default(), 2).unwrap();
        assert_eq!(st.h, again.h);
    }

    #[test]
    fn binary_dump_round_trip() {
        let cfg = AreaConfig {
            ap_count: 3,
            gu_count: 2,
            uav_count: 1,
            serving_ap_count: 2,
            antennas_per_ap: 4,
            ..Default::default()
        };
        let sc = generate_scenario(&cfg, 8).unwrap();
        let st = build_channel_state(&sc, &PropagationParams::default(), 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.bin");
        st.dump_binary(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 9 * 4 * 8);
        assert_eq!(&bytes[0..4], &9u32.to_le_bytes());
        let rows = read_binary_dump(&path).unwrap();
        for (r, v) in rows.iter().zip(&st.h) {
            for (a, b) in r.iter().zip(v.iter()) {
                assert_eq!(a.re, b.re as f32);
                assert_eq!(a.im, b.im as f32);
            }
        }
    }
}
