//! Pilot assignment and per-AP LMMSE channel estimation.
//!
//! Every user sends a unit-norm pilot of length `tau_p`. AP `a` correlates its
//! received training block with each user's pilot and applies
//! `D = sqrt(p_u)·C_u·B_u⁻¹`, where `C_u` is the channel covariance and
//! `B_u = Σ_i p_i·|ψ_i*ψ_u|²·C_i + σ²·I` the covariance of the correlated
//! observation. Users that share a pilot contaminate each other through `B_u`.

use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::channel::{steering_vector, ChannelState, LinkParams};
use crate::error::{Error, Result};
use crate::rng::{self, STREAM_PILOTS, STREAM_PILOT_NOISE};
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Clone)]
pub struct PilotBook {
    pub tau_p: usize,
    /// Index into the orthonormal basis used by each user.
    pub pilot_index: Vec<usize>,
    pub pilots: Vec<CVector>,
    /// Pilot transmit power per user (watts).
    pub pilot_power: Vec<f64>,
}

impl PilotBook {
    pub fn n_users(&self) -> usize {
        self.pilots.len()
    }

    /// `|ψ_i* ψ_u|²`
    pub fn overlap(&self, i: usize, u: usize) -> f64 {
        self.pilots[i].dotc(&self.pilots[u]).norm_sqr()
    }
}

/// Assign orthonormal pilots round-robin: user `u` gets basis vector `u mod tau_p`
/// of a random `tau_p × tau_p` unitary.
pub fn assign_pilots(
    n_users: usize,
    tau_p: usize,
    pilot_power: f64,
    seed: u64,
) -> Result<PilotBook> {
    if tau_p == 0 {
        return Err(Error::invalid_arg("pilot length must be at least 1"));
    }
    if !(pilot_power >= 0.0) {
        return Err(Error::invalid_arg("pilot power must be non-negative"));
    }
    let mut rng = rng::rng_from(seed, &[STREAM_PILOTS]);
    let g = CMatrix::from_fn(tau_p, tau_p, |_, _| cn(&mut rng, 1.0));
    let q = g.qr().q();
    let basis: Vec<CVector> = (0..tau_p).map(|k| q.column(k).into_owned()).collect();
    let pilot_index: Vec<usize> = (0..n_users).map(|u| u % tau_p).collect();
    Ok(PilotBook {
        tau_p,
        pilots: pilot_index.iter().map(|&k| basis[k].clone()).collect(),
        pilot_index,
        pilot_power: vec![pilot_power; n_users],
    })
}

fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// Channel covariance `β/(K+1)·(K·a(θ)a(θ)* + I)`.
pub fn channel_covariance(lp: &LinkParams, m: usize) -> CMatrix {
    let scale = lp.beta_linear() / (lp.rician_k + 1.0);
    let mut c = CMatrix::identity(m, m);
    if lp.rician_k > 0.0 {
        let a = steering_vector(lp.aoa, m);
        c += (&a * a.adjoint()) * C64::from(lp.rician_k);
    }
    c * C64::from(scale)
}

/// `C·x` without forming `C`.
pub fn apply_covariance(lp: &LinkParams, x: &CVector) -> CVector {
    let scale = lp.beta_linear() / (lp.rician_k + 1.0);
    let mut y = x.clone();
    if lp.rician_k > 0.0 {
        let a = steering_vector(lp.aoa, x.len());
        let proj = a.dotc(x) * lp.rician_k;
        y.axpy(proj, &a, C64::from(1.0));
    }
    y * C64::from(scale)
}

/// The three LMMSE matrices of one (user, AP) pair.
#[derive(Debug, Clone)]
pub struct EstimatorMatrices {
    pub c: CMatrix,
    pub b: CMatrix,
    pub d: CMatrix,
}

impl EstimatorMatrices {
    pub fn build(
        state: &ChannelState,
        book: &PilotBook,
        noise_var: f64,
        u: usize,
        a: usize,
    ) -> Result<Self> {
        let m = state.antennas;
        let c = channel_covariance(state.link(u, a), m);
        let b = observation_covariance(state, book, noise_var, u, a);
        let chol = hpd_factor(&b)?;
        // D = sqrt(p)·C·B⁻¹ = (sqrt(p)·B⁻¹·C)* since both are Hermitian
        let d = chol.solve(&c).adjoint() * C64::from(book.pilot_power[u].sqrt());
        Ok(Self { c, b, d })
    }

    pub fn estimate(&self, phi_hat: &CVector) -> CVector {
        &self.d * phi_hat
    }
}

/// `B_u = Σ_i p_i·|ψ_i*ψ_u|²·C_i + σ²·I`
pub fn observation_covariance(
    state: &ChannelState,
    book: &PilotBook,
    noise_var: f64,
    u: usize,
    a: usize,
) -> CMatrix {
    let m = state.antennas;
    let mut b = CMatrix::identity(m, m) * C64::from(noise_var);
    for i in 0..state.n_users {
        let w = book.pilot_power[i] * book.overlap(i, u);
        if w > 0.0 && book.overlap(i, u) > 1e-20 {
            b += channel_covariance(state.link(i, a), m) * C64::from(w);
        }
    }
    b
}

fn hpd_factor(b: &CMatrix) -> Result<Cholesky<C64, nalgebra::Dyn>> {
    let scale = b.norm();
    let asym = (b - b.adjoint()).norm();
    if asym > 1e-10 * scale {
        return Err(Error::Numerical(format!(
            "observation covariance not Hermitian (asymmetry {asym:e})"
        )));
    }
    Cholesky::new(b.clone())
        .ok_or_else(|| Error::Numerical("observation covariance not positive definite".into()))
}

/// Correlated pilot observations `φ̂_{u,a} = Φ_a ψ_u` for every user at site `a`.
/// The noise block is drawn from a stream derived from `(seed, a)`.
pub fn pilot_observations(
    state: &ChannelState,
    book: &PilotBook,
    noise_var: f64,
    a: usize,
    seed: u64,
) -> Vec<CVector> {
    let m = state.antennas;
    let mut rng = rng::rng_from(seed, &[STREAM_PILOT_NOISE, a as u64]);
    let mut phi = CMatrix::from_fn(m, book.tau_p, |_, _| cn(&mut rng, noise_var));
    for i in 0..state.n_users {
        let amp = C64::from(book.pilot_power[i].sqrt());
        phi += (state.h(i, a) * amp) * book.pilots[i].adjoint();
    }
    book.pilots.iter().map(|psi| &phi * psi).collect()
}

/// Fill `state.h_hat` with LMMSE estimates for every (user, site) pair.
pub fn estimate_channels(
    state: &mut ChannelState,
    book: &PilotBook,
    noise_var: f64,
    seed: u64,
) -> Result<()> {
    if !(noise_var > 0.0) {
        return Err(Error::invalid_arg("noise variance must be positive"));
    }
    if book.n_users() != state.n_users {
        return Err(Error::invalid_arg("pilot book does not cover every user"));
    }
    if state.h.len() != state.n_users * state.n_sites {
        return Err(Error::invalid_arg("true channels are not populated"));
    }
    let m = state.antennas;
    let per_site: Vec<Result<Vec<CVector>>> = (0..state.n_sites)
        .into_par_iter()
        .map(|a| {
            let obs = pilot_observations(state, book, noise_var, a, seed);
            // B depends on u only through the pilot overlaps; share factors
            // between users on the same pilot.
            let mut factors: Vec<Option<Cholesky<C64, nalgebra::Dyn>>> =
                (0..book.tau_p).map(|_| None).collect();
            let mut out = Vec::with_capacity(state.n_users);
            for u in 0..state.n_users {
                let p = book.pilot_power[u];
                if p == 0.0 {
                    out.push(CVector::zeros(m));
                    continue;
                }
                let slot = &mut factors[book.pilot_index[u]];
                if slot.is_none() {
                    *slot = Some(hpd_factor(&observation_covariance(
                        state, book, noise_var, u, a,
                    ))?);
                }
                let chol = slot.as_ref().unwrap();
                let x = chol.solve(&obs[u]);
                out.push(apply_covariance(state.link(u, a), &x) * C64::from(p.sqrt()));
            }
            Ok(out)
        })
        .collect();

    let mut h_hat = vec![CVector::zeros(m); state.n_users * state.n_sites];
    for (a, site) in per_site.into_iter().enumerate() {
        for (u, v) in site?.into_iter().enumerate() {
            h_hat[u * state.n_sites + a] = v;
        }
    }
    state.h_hat = h_hat;
    Ok(())
}
