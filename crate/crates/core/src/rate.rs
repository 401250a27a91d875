//! SINR coefficients and the finite-blocklength (normal approximation) rate.
//!
//! Both link directions reduce to `γ_u = α_u·q_u / (Σ_{i≠u} α_i·e_{u,i} + t_u)`.
//! The URLLC rate is `R = c1·log2(1+γ) − c2·sqrt(1 − (1+γ)^-2)` with
//! `c1 = B·(τc−τp)/(2τc)` and `c2 = c1·Q⁻¹(ε)·log2(e)/sqrt(T·B)`.

use std::f64::consts::{LN_2, LOG2_E};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::beamforming::BeamformerSet;
use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Uplink,
    Downlink,
}

impl Direction {
    pub fn short_name(self) -> &'static str {
        match self {
            Direction::Uplink => "ul",
            Direction::Downlink => "dl",
        }
    }
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `Q⁻¹(eps)` by bisection on [`q_function`], to an absolute width of 1e-12.
pub fn q_inverse(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid_arg(format!(
            "eps must be in (0, 1), got {eps}"
        )));
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if q_function(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrllcParams {
    pub bandwidth: f64,
    pub coherence_len: usize,
    pub pilot_len: usize,
    pub tx_duration: f64,
    pub block_error_prob: f64,
    pub prelog_c1: f64,
    pub dispersion_c2: f64,
    pub q_inv_eps: f64,
}

impl UrllcParams {
    pub fn new(
        bandwidth: f64,
        coherence_len: usize,
        pilot_len: usize,
        tx_duration: f64,
        block_error_prob: f64,
    ) -> Result<Self> {
        if !(bandwidth > 0.0 && tx_duration > 0.0) {
            return Err(Error::invalid_config(
                "bandwidth and duration must be positive",
            ));
        }
        if pilot_len >= coherence_len {
            return Err(Error::invalid_config(format!(
                "pilot length {pilot_len} must be shorter than the coherence interval {coherence_len}"
            )));
        }
        if !(block_error_prob > 0.0 && block_error_prob < 0.5) {
            return Err(Error::invalid_config(
                "block error probability must be in (0, 0.5)",
            ));
        }
        let q_inv_eps = q_inverse(block_error_prob)?;
        let prelog_c1 =
            bandwidth * (coherence_len - pilot_len) as f64 / (2.0 * coherence_len as f64);
        let dispersion_c2 = prelog_c1 * q_inv_eps * LOG2_E / (tx_duration * bandwidth).sqrt();
        Ok(Self {
            bandwidth,
            coherence_len,
            pilot_len,
            tx_duration,
            block_error_prob,
            prelog_c1,
            dispersion_c2,
            q_inv_eps,
        })
    }

    /// 20 MHz, τc = 200, τp = 32, T = 50 µs, ε = 1e-5.
    pub fn reference() -> Self {
        Self::new(20e6, 200, 32, 5e-5, 1e-5).expect("reference parameters are valid")
    }
}

/// Shannon part `c1·log2(1+γ)`.
pub fn shannon_rate(gamma: f64, p: &UrllcParams) -> f64 {
    p.prelog_c1 * gamma.ln_1p() / LN_2
}

/// Channel dispersion penalty `c2·sqrt(1 − (1+γ)^-2)`.
pub fn dispersion(gamma: f64, p: &UrllcParams) -> f64 {
    let g = gamma.max(0.0);
    if g.is_infinite() {
        return p.dispersion_c2;
    }
    let root = if g < 1.0 {
        // 1 − (1+γ)^-2 = γ(2+γ)/(1+γ)², accurate near γ = 0
        (g * (2.0 + g)).sqrt() / (1.0 + g)
    } else {
        let inv = 1.0 / (1.0 + g);
        (1.0 - inv * inv).sqrt()
    };
    p.dispersion_c2 * root.min(1.0)
}

/// `dΔ/dγ = c2 / ((1+γ)²·sqrt(γ(2+γ)))`; infinite at γ = 0.
pub fn dispersion_derivative(gamma: f64, p: &UrllcParams) -> f64 {
    let g = gamma.max(0.0);
    let s = 1.0 + g;
    p.dispersion_c2 / (s * s * (g * (2.0 + g)).sqrt())
}

/// Finite-blocklength rate; may be negative at small γ.
pub fn urllc_rate(gamma: f64, p: &UrllcParams) -> f64 {
    shannon_rate(gamma, p) - dispersion(gamma, p)
}

/// The general-SINR triple `(q, e, t)` of one link direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCoefficients {
    pub direction: Direction,
    pub q: Vec<f64>,
    /// `e[(u, i)]`: gain of user `i`'s signal into user `u`'s; diagonal is zero.
    pub e: DMatrix<f64>,
    pub t: Vec<f64>,
}

impl LinkCoefficients {
    pub fn new(
        direction: Direction,
        q: Vec<f64>,
        mut e: DMatrix<f64>,
        t: Vec<f64>,
    ) -> Result<Self> {
        let n = q.len();
        if e.shape() != (n, n) || t.len() != n {
            return Err(Error::invalid_arg("coefficient dimensions disagree"));
        }
        if q.iter().any(|&x| !(x >= 0.0)) || e.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::invalid_arg("q and e must be non-negative"));
        }
        if t.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::invalid_arg("t must be positive"));
        }
        e.fill_diagonal(0.0);
        Ok(Self { direction, q, e, t })
    }

    pub fn n_users(&self) -> usize {
        self.q.len()
    }

    /// Interference plus noise `Σ_{i≠u} α_i e_{u,i} + t_u`.
    pub fn interference_plus_noise(&self, alpha: &[f64], u: usize) -> f64 {
        let row = self.e.row(u);
        let mut acc = self.t[u];
        for (i, &a) in alpha.iter().enumerate() {
            if i != u {
                acc += a * row[i];
            }
        }
        acc
    }

    pub fn sinr(&self, alpha: &[f64], u: usize) -> f64 {
        alpha[u] * self.q[u] / self.interference_plus_noise(alpha, u)
    }

    pub fn sinr_all(&self, alpha: &[f64]) -> Vec<f64> {
        (0..self.n_users()).map(|u| self.sinr(alpha, u)).collect()
    }

    pub fn rates(&self, alpha: &[f64], p: &UrllcParams) -> Vec<f64> {
        self.sinr_all(alpha)
            .into_iter()
            .map(|g| urllc_rate(g, p))
            .collect()
    }
}

/// `γ_u` for power vector `alpha`.
pub fn sinr(alpha: &[f64], lc: &LinkCoefficients, u: usize) -> f64 {
    lc.sinr(alpha, u)
}

/// Evaluate `(q, e, t)` from true channels and estimate-based beamformers.
pub fn link_coefficients(
    direction: Direction,
    state: &ChannelState,
    beams: &BeamformerSet,
    scenario: &Scenario,
    noise_var: f64,
) -> Result<LinkCoefficients> {
    if !(noise_var > 0.0) {
        return Err(Error::invalid_arg("noise variance must be positive"));
    }
    let n = scenario.n_users();
    let mut q = vec![0.0; n];
    let mut e = DMatrix::zeros(n, n);
    let mut t = vec![0.0; n];
    match direction {
        Direction::Downlink => {
            for u in 0..n {
                for i in 0..n {
                    // Σ_{a∈A_i} h_{u,a}* f_{a,i}
                    let s: crate::C64 = scenario.association[i]
                        .iter()
                        .zip(&beams.vectors[i])
                        .map(|(&a, f)| state.h(u, a).dotc(f))
                        .sum();
                    if i == u {
                        q[u] = s.norm_sqr();
                    } else {
                        e[(u, i)] = s.norm_sqr();
                    }
                }
                t[u] = noise_var;
            }
        }
        Direction::Uplink => {
            for u in 0..n {
                let sites = &scenario.association[u];
                let combiners = &beams.vectors[u];
                for i in 0..n {
                    // Σ_{a∈A_u} f_{u,a}* h_{i,a}
                    let s: crate::C64 = sites
                        .iter()
                        .zip(combiners)
                        .map(|(&a, f)| f.dotc(state.h(i, a)))
                        .sum();
                    if i == u {
                        q[u] = s.norm_sqr();
                    } else {
                        e[(u, i)] = s.norm_sqr();
                    }
                }
                t[u] = noise_var * combiners.iter().map(|f| f.norm_squared()).sum::<f64>();
            }
        }
    }
    LinkCoefficients::new(direction, q, e, t)
}
