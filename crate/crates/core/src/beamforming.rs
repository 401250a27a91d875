//! Unit-norm transmit/receive beamformers built from channel estimates.
//!
//! The same vector serves as downlink precoder `f_{a,u}` and uplink combiner
//! `f_{u,a}`. Partial zero-forcing projects the user's estimate onto the null
//! space of the `N_I` strongest interferers (ranked by large-scale fading at
//! that AP); with `N_I = 0` it reduces to MRT/MRC. Interferers whose estimates
//! are collinear with the user's own, such as pilot-sharing users, cannot be
//! nulled and are passed over.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::scenario::{NetworkKind, Scenario};
use crate::{CMatrix, CVector, C64};

/// Columns whose residual norm falls below this fraction of the largest input
/// column are treated as linearly dependent.
const RANK_TOL: f64 = 1e-10;
/// PZF falls back to MRT when the projected vector is this small relative to the estimate.
const NULL_TOL: f64 = 1e-12;
/// An interferer is only nulled if the user's estimate keeps at least this
/// fraction of its norm outside the nulled span.
const SEPARATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamformerKind {
    /// Partial zero-forcing (cell-free APs).
    Pzf,
    /// Normalized estimate: MRT in the downlink, MRC in the uplink.
    MaximumRatio,
    /// Full zero-forcing across the users co-served by a colocated BS.
    ZfColocated,
}

impl BeamformerKind {
    pub fn supported_on(self, network: NetworkKind) -> bool {
        matches!(
            (self, network),
            (BeamformerKind::Pzf, NetworkKind::CellFree)
                | (BeamformerKind::MaximumRatio, _)
                | (BeamformerKind::ZfColocated, NetworkKind::Colocated)
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BeamDiagnostics {
    /// PZF vectors that collapsed into the interference span and fell back to MRT.
    pub pzf_fallbacks: usize,
    /// Interferers passed over because their estimate is (nearly) collinear
    /// with the user's own, as happens between users sharing a pilot.
    pub pzf_skipped_interferers: usize,
    /// Colocated ZF Gram matrices that needed diagonal loading.
    pub zf_regularized: usize,
}

#[derive(Debug, Clone)]
pub struct BeamformerSet {
    pub kind: BeamformerKind,
    pub n_interferers_nulled: usize,
    /// `vectors[u][j]` belongs to site `association[u][j]`.
    pub vectors: Vec<Vec<CVector>>,
    pub diagnostics: BeamDiagnostics,
}

impl BeamformerSet {
    pub fn get(&self, scenario: &Scenario, u: usize, a: usize) -> Option<&CVector> {
        scenario.association[u]
            .iter()
            .position(|&s| s == a)
            .map(|j| &self.vectors[u][j])
    }
}

/// The `n_i` strongest interferers of `u` at site `a` (large-scale fading
/// order) that can be nulled without nulling `u` itself. Returns their indices
/// and the matrix of their estimates as columns.
pub fn rank_interferers(
    u: usize,
    a: usize,
    beta_db: &DMatrix<f64>,
    state: &ChannelState,
    n_i: usize,
) -> Result<(Vec<usize>, CMatrix)> {
    let n_users = beta_db.nrows();
    if n_i >= n_users {
        return Err(Error::invalid_arg(format!(
            "cannot null {n_i} interferers with {n_users} users"
        )));
    }
    let (chosen, _) = select_interferers(u, a, &sorted_by_strength(beta_db, a), state, n_i);
    Ok((chosen.clone(), stack_columns(state, a, &chosen)))
}

fn select_interferers(
    u: usize,
    a: usize,
    order: &[usize],
    state: &ChannelState,
    n_i: usize,
) -> (Vec<usize>, usize) {
    let h = state.h_hat(u, a);
    let h_norm = h.norm();
    let mut basis: Vec<CVector> = Vec::new();
    let mut residual = h.clone();
    let mut chosen = Vec::with_capacity(n_i);
    let mut skipped = 0;
    for &i in order.iter().filter(|&&i| i != u) {
        if chosen.len() == n_i {
            break;
        }
        let mut q = state.h_hat(i, a).clone();
        let q_ref = q.norm();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&q);
                q.axpy(-proj, b, C64::from(1.0));
            }
        }
        let q_norm = q.norm();
        if q_norm <= RANK_TOL * q_ref {
            chosen.push(i);
            continue;
        }
        q /= C64::from(q_norm);
        let mut r = residual.clone();
        let proj = q.dotc(&r);
        r.axpy(-proj, &q, C64::from(1.0));
        if r.norm() < SEPARATION_TOL * h_norm {
            skipped += 1;
            continue;
        }
        basis.push(q);
        residual = r;
        chosen.push(i);
    }
    (chosen, skipped)
}

fn sorted_by_strength(beta_db: &DMatrix<f64>, a: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..beta_db.nrows()).collect();
    order.sort_by(|&i, &j| beta_db[(j, a)].total_cmp(&beta_db[(i, a)]).then(i.cmp(&j)));
    order
}

fn stack_columns(state: &ChannelState, a: usize, users: &[usize]) -> CMatrix {
    let m = state.antennas;
    let mut e = CMatrix::zeros(m, users.len());
    for (k, &i) in users.iter().enumerate() {
        e.set_column(k, state.h_hat(i, a));
    }
    e
}

/// Orthonormal basis of the column span using Gram–Schmidt with column-norm
/// pivoting and one reorthogonalization pass.
pub fn orthonormal_basis(e: &CMatrix) -> Vec<CVector> {
    let mut cols: Vec<CVector> = e.column_iter().map(|c| c.into_owned()).collect();
    let ref_norm = cols.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut basis: Vec<CVector> = Vec::new();
    while !cols.is_empty() && basis.len() < e.nrows() {
        let (k, norm) = cols
            .iter()
            .enumerate()
            .map(|(k, c)| (k, c.norm()))
            .fold((0, -1.0), |best, x| if x.1 > best.1 { x } else { best });
        if norm <= RANK_TOL * ref_norm || norm == 0.0 {
            break;
        }
        let q = cols.swap_remove(k) / C64::from(norm);
        for c in cols.iter_mut() {
            for _ in 0..2 {
                let proj = q.dotc(c);
                c.axpy(-proj, &q, C64::from(1.0));
            }
        }
        basis.push(q);
    }
    basis
}

/// Partial zero-forcing vector. Returns the vector and whether it fell back to MRT.
pub fn pzf_vector(interferers: &CMatrix, h_hat: &CVector) -> Result<(CVector, bool)> {
    let h_norm = h_hat.norm();
    if h_norm == 0.0 {
        return Err(Error::invalid_arg("zero channel estimate"));
    }
    let basis = orthonormal_basis(interferers);
    let mut p = h_hat.clone();
    for _ in 0..2 {
        for q in &basis {
            let proj = q.dotc(&p);
            p.axpy(-proj, q, C64::from(1.0));
        }
    }
    let p_norm = p.norm();
    if p_norm < NULL_TOL * h_norm {
        return Ok((mrt_vector(h_hat)?, true));
    }
    Ok((p / C64::from(p_norm), false))
}

pub fn mrt_vector(h_hat: &CVector) -> Result<CVector> {
    let n = h_hat.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::invalid_arg("zero channel estimate"));
    }
    Ok(h_hat / C64::from(n))
}

/// Colocated zero-forcing: column `u` of `Ĥ(Ĥ*Ĥ)⁻¹`, normalized, where `Ĥ`
/// stacks the estimates of every user co-served by the BS. Returns the vector
/// and whether the Gram matrix needed diagonal loading.
pub fn zf_colocated(u: usize, stack: &CMatrix) -> Result<(CVector, bool)> {
    let vectors = zf_all(stack)?;
    let regularized = vectors.1;
    vectors
        .0
        .into_iter()
        .nth(u)
        .map(|v| (v, regularized))
        .ok_or_else(|| Error::invalid_arg("user index outside the co-served set"))
}

fn zf_all(stack: &CMatrix) -> Result<(Vec<CVector>, bool)> {
    let (m, n) = stack.shape();
    if n == 0 {
        return Ok((Vec::new(), false));
    }
    if m <= n && n > 1 {
        return Err(Error::invalid_arg(format!(
            "zero-forcing needs more antennas ({m}) than co-served users ({n})"
        )));
    }
    let gram = stack.adjoint() * stack;
    let trace: f64 = gram.diagonal().iter().map(|z| z.re).sum();
    let mut regularized = false;
    let mut chol = Cholesky::new(gram.clone());
    if chol.as_ref().is_none_or(|c| !well_conditioned(c)) {
        regularized = true;
        let loaded = &gram + CMatrix::identity(n, n) * C64::from(1e-10 * trace);
        chol = Cholesky::new(loaded);
    }
    let chol = chol.ok_or_else(|| Error::Numerical("ZF Gram matrix is singular".into()))?;
    let w = stack * chol.inverse();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let col = w.column(k).into_owned();
        out.push(mrt_vector(&col)?);
    }
    Ok((out, regularized))
}

fn well_conditioned(c: &Cholesky<C64, nalgebra::Dyn>) -> bool {
    let d: Vec<f64> = c.l_dirty().diagonal().iter().map(|z| z.re).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    // squared diagonal ratio approximates the Gram condition number
    min > 0.0 && (max / min).powi(2) < 1e12
}

/// Beamformers for every serving (user, site) pair.
pub fn build_beamformers(
    scenario: &Scenario,
    state: &ChannelState,
    kind: BeamformerKind,
    n_interferers: usize,
) -> Result<BeamformerSet> {
    if !state.has_estimates() {
        return Err(Error::invalid_arg("channel estimates are missing"));
    }
    if !kind.supported_on(scenario.network_kind) {
        return Err(Error::invalid_arg(format!(
            "{kind:?} is not available on a {:?} network",
            scenario.network_kind
        )));
    }
    let n_users = scenario.n_users();
    let mut diagnostics = BeamDiagnostics::default();
    let mut vectors: Vec<Vec<CVector>> = vec![Vec::new(); n_users];

    match kind {
        BeamformerKind::MaximumRatio => {
            for (u, sites) in scenario.association.iter().enumerate() {
                for &a in sites {
                    vectors[u].push(mrt_vector(state.h_hat(u, a))?);
                }
            }
        }
        BeamformerKind::Pzf => {
            if n_interferers >= state.antennas {
                return Err(Error::invalid_arg(format!(
                    "N_I = {n_interferers} must be below the antenna count {}",
                    state.antennas
                )));
            }
            let n_i = n_interferers.min(n_users.saturating_sub(1));
            let beta = state.beta_db();
            let order: Vec<Vec<usize>> = (0..scenario.n_sites())
                .map(|a| sorted_by_strength(&beta, a))
                .collect();
            for (u, sites) in scenario.association.iter().enumerate() {
                for &a in sites {
                    let (chosen, skipped) = select_interferers(u, a, &order[a], state, n_i);
                    diagnostics.pzf_skipped_interferers += skipped;
                    let e = stack_columns(state, a, &chosen);
                    let (f, fell_back) = pzf_vector(&e, state.h_hat(u, a))?;
                    if fell_back {
                        diagnostics.pzf_fallbacks += 1;
                    }
                    vectors[u].push(f);
                }
            }
        }
        BeamformerKind::ZfColocated => {
            let mut per_site: Vec<Vec<CVector>> = Vec::with_capacity(scenario.n_sites());
            for (a, users) in scenario.served_by.iter().enumerate() {
                let stack = stack_columns(state, a, users);
                let (v, reg) = zf_all(&stack)?;
                if reg {
                    diagnostics.zf_regularized += 1;
                }
                per_site.push(v);
            }
            for (u, sites) in scenario.association.iter().enumerate() {
                for &a in sites {
                    let k = scenario.served_by[a]
                        .iter()
                        .position(|&i| i == u)
                        .ok_or_else(|| Error::invalid_arg("association lists are inconsistent"))?;
                    vectors[u].push(per_site[a][k].clone());
                }
            }
        }
    }

    Ok(BeamformerSet {
        kind,
        n_interferers_nulled: if kind == BeamformerKind::Pzf {
            n_interferers
        } else {
            0
        },
        vectors,
        diagnostics,
    })
}
