//! Monte-Carlo driver: one independent work item per scenario.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, SweepTuple};
use super::stats::{likely_rate_95, median};
use crate::beamforming::build_beamformers;
use crate::channel::{build_channel_state, ChannelState};
use crate::error::{Error, Result};
use crate::estimation::{assign_pilots, estimate_channels};
use crate::rate::{link_coefficients, Direction, UrllcParams};
use crate::rng::{self, STREAM_SCENARIO};
use crate::scenario::{associate, generate_scenario, NetworkKind, Scenario, UserKind};
use crate::sco::{run_sco, FeasibleSet, ProblemSpec, SolveReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub tuple: usize,
    pub scenario: usize,
    pub user: usize,
    pub kind: UserKind,
    pub rate_bps: f64,
    /// Uplink: `α_u`. Downlink: `α_u` summed over the serving APs.
    pub power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tuple: usize,
    pub scenario: usize,
    pub converged: bool,
    pub iterations: usize,
    pub inner_steps: usize,
    pub ascent_violations: usize,
    /// Largest per-user (UL) or per-AP (DL) power above its cap, in watts.
    pub cap_excess_w: f64,
    pub diagnostics: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub seed: u64,
    pub scenarios: usize,
    pub tuples: Vec<SweepTuple>,
    /// Ordered by (tuple, scenario, user).
    pub records: Vec<UserRecord>,
    /// Ordered by (tuple, scenario).
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleSummary {
    pub name: String,
    pub gu_rate_95_bps: Option<f64>,
    pub uav_rate_95_bps: Option<f64>,
    pub gu_median_power_w: Option<f64>,
    pub uav_median_power_w: Option<f64>,
    pub runs: usize,
    pub converged: usize,
    pub failed: usize,
    pub mean_iterations: f64,
    pub max_iterations: usize,
    pub runs_with_ascent_violations: usize,
}

impl ResultSet {
    pub fn tuple_index(&self, name: &str) -> Option<usize> {
        self.tuples.iter().position(|t| t.name() == name)
    }

    fn select(
        &self,
        tuple: usize,
        kind: Option<UserKind>,
        f: impl Fn(&UserRecord) -> f64,
    ) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.tuple == tuple && kind.is_none_or(|k| r.kind == k))
            .map(f)
            .collect()
    }

    /// Pooled per-user rates of one tuple over all scenarios.
    pub fn rates(&self, tuple: usize, kind: Option<UserKind>) -> Vec<f64> {
        self.select(tuple, kind, |r| r.rate_bps)
    }

    pub fn powers(&self, tuple: usize, kind: Option<UserKind>) -> Vec<f64> {
        self.select(tuple, kind, |r| r.power_w)
    }

    pub fn likely_rate_95(&self, tuple: usize, kind: Option<UserKind>) -> Option<f64> {
        likely_rate_95(&self.rates(tuple, kind)).ok()
    }

    pub fn summary(&self, tuple: usize) -> TupleSummary {
        let runs: Vec<&RunRecord> = self.runs.iter().filter(|r| r.tuple == tuple).collect();
        let ok: Vec<&&RunRecord> = runs.iter().filter(|r| r.error.is_none()).collect();
        let mean_iterations = if ok.is_empty() {
            0.0
        } else {
            ok.iter().map(|r| r.iterations as f64).sum::<f64>() / ok.len() as f64
        };
        TupleSummary {
            name: self.tuples[tuple].name(),
            gu_rate_95_bps: self.likely_rate_95(tuple, Some(UserKind::Ground)),
            uav_rate_95_bps: self.likely_rate_95(tuple, Some(UserKind::Uav)),
            gu_median_power_w: median(&self.powers(tuple, Some(UserKind::Ground))).ok(),
            uav_median_power_w: median(&self.powers(tuple, Some(UserKind::Uav))).ok(),
            runs: runs.len(),
            converged: ok.iter().filter(|r| r.converged).count(),
            failed: runs.len() - ok.len(),
            mean_iterations,
            max_iterations: ok.iter().map(|r| r.iterations).max().unwrap_or(0),
            runs_with_ascent_violations: ok.iter().filter(|r| r.ascent_violations > 0).count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    /// All work on one thread.
    Serial,
    /// Scenarios spread over the global rayon pool.
    Parallel,
}

/// Channels, estimates and association of one scenario on one network kind.
pub struct PreparedNetwork {
    pub scenario: Scenario,
    pub state: ChannelState,
}

/// Seed of scenario `index` under run seed `seed`.
pub fn scenario_seed(seed: u64, index: usize) -> u64 {
    rng::derive(seed, &[STREAM_SCENARIO, index as u64])
}

pub fn prepare_network(
    cfg: &RunConfig,
    network: NetworkKind,
    seed: u64,
) -> Result<PreparedNetwork> {
    let area = cfg.area.with_network(network);
    let mut scenario = generate_scenario(&area, seed)?;
    let mut state = build_channel_state(&scenario, &cfg.propagation, seed)?;
    scenario.set_association(associate(&state.beta_db(), area.serving_count())?);
    let book = assign_pilots(
        scenario.n_users(),
        cfg.urllc.pilot_len,
        cfg.powers.pilot_w,
        seed,
    )?;
    estimate_channels(&mut state, &book, cfg.noise_power_w(), seed)?;
    Ok(PreparedNetwork { scenario, state })
}

pub fn feasible_set(
    cfg: &RunConfig,
    scenario: &Scenario,
    direction: Direction,
) -> Result<FeasibleSet> {
    match direction {
        Direction::Uplink => FeasibleSet::uplink(vec![cfg.powers.user_max_w; scenario.n_users()]),
        Direction::Downlink => {
            let cap = match scenario.network_kind {
                NetworkKind::CellFree => cfg.powers.ap_max_w,
                NetworkKind::Colocated => cfg.powers.bs_max_w,
            };
            FeasibleSet::downlink(
                vec![cap; scenario.n_sites()],
                scenario.served_by.clone(),
                scenario.n_users(),
            )
        }
    }
}

/// Solve one tuple on a prepared network.
pub fn solve_tuple(
    cfg: &RunConfig,
    params: &UrllcParams,
    net: &PreparedNetwork,
    beams: &crate::beamforming::BeamformerSet,
    tuple: &SweepTuple,
) -> Result<(SolveReport, FeasibleSet)> {
    let lc = link_coefficients(
        tuple.direction,
        &net.state,
        beams,
        &net.scenario,
        cfg.noise_power_w(),
    )?;
    let feas = feasible_set(cfg, &net.scenario, tuple.direction)?;
    let spec = ProblemSpec {
        objective: tuple.objective,
        direction: tuple.direction,
        scheme: tuple.scheme,
        lc,
        params: params.clone(),
        feas: feas.clone(),
        tol_delta: cfg.sco_delta,
        max_iters: cfg.sco_max_iters,
    };
    Ok((run_sco(&spec)?, feas))
}

type ScenarioOutput = Vec<(usize, Vec<UserRecord>, RunRecord)>;

fn failed_run(
    tuple: usize,
    scenario: usize,
    kinds: &[UserKind],
    err: &Error,
) -> (usize, Vec<UserRecord>, RunRecord) {
    let records = kinds
        .iter()
        .enumerate()
        .map(|(user, &kind)| UserRecord {
            tuple,
            scenario,
            user,
            kind,
            rate_bps: 0.0,
            power_w: 0.0,
        })
        .collect();
    let run = RunRecord {
        tuple,
        scenario,
        converged: false,
        iterations: 0,
        inner_steps: 0,
        ascent_violations: 0,
        cap_excess_w: 0.0,
        diagnostics: Vec::new(),
        error: Some(err.to_string()),
    };
    (tuple, records, run)
}

fn user_kinds(cfg: &RunConfig) -> Vec<UserKind> {
    let mut k = vec![UserKind::Ground; cfg.area.gu_count];
    k.extend(std::iter::repeat_n(UserKind::Uav, cfg.area.uav_count));
    k
}

fn run_scenario(
    cfg: &RunConfig,
    params: &UrllcParams,
    tuples: &[SweepTuple],
    s: usize,
) -> ScenarioOutput {
    let seed = scenario_seed(cfg.seed, s);
    let kinds = user_kinds(cfg);
    let mut out = Vec::with_capacity(tuples.len());
    for network in [NetworkKind::CellFree, NetworkKind::Colocated] {
        let idx: Vec<usize> = (0..tuples.len())
            .filter(|&i| tuples[i].network == network)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let net = match prepare_network(cfg, network, seed) {
            Ok(n) => n,
            Err(e) => {
                log::warn!("scenario {s}, {network:?}: {e}");
                out.extend(idx.iter().map(|&i| failed_run(i, s, &kinds, &e)));
                continue;
            }
        };
        let mut beam_cache: Vec<(
            crate::beamforming::BeamformerKind,
            Result<crate::beamforming::BeamformerSet>,
        )> = Vec::new();
        for &i in &idx {
            let t = &tuples[i];
            let kind = t.beamformer.kind();
            if !beam_cache.iter().any(|(k, _)| *k == kind) {
                beam_cache.push((
                    kind,
                    build_beamformers(&net.scenario, &net.state, kind, cfg.pzf_n_interferers),
                ));
            }
            let beams = &beam_cache
                .iter()
                .find(|(k, _)| *k == kind)
                .expect("cached above")
                .1;
            let solved = match beams {
                Ok(b) => solve_tuple(cfg, params, &net, b, t),
                Err(e) => Err(Error::Numerical(e.to_string())),
            };
            match solved {
                Ok((report, feas)) => out.push(record_run(i, s, &net.scenario, &report, &feas)),
                Err(e) => {
                    log::warn!("scenario {s}, {t}: {e}");
                    out.push(failed_run(i, s, &kinds, &e));
                }
            }
        }
    }
    out
}

fn record_run(
    tuple: usize,
    scenario: usize,
    sc: &Scenario,
    report: &SolveReport,
    feas: &FeasibleSet,
) -> (usize, Vec<UserRecord>, RunRecord) {
    let downlink = feas.kind == crate::sco::FeasibleKind::DownlinkApCaps;
    let records = (0..sc.n_users())
        .map(|u| {
            let alpha = report.alpha_final[u];
            UserRecord {
                tuple,
                scenario,
                user: u,
                kind: sc.user_kind[u],
                rate_bps: report.per_user_rates[u],
                power_w: if downlink {
                    alpha * sc.association[u].len() as f64
                } else {
                    alpha
                },
            }
        })
        .collect();
    let run = RunRecord {
        tuple,
        scenario,
        converged: report.converged,
        iterations: report.iterations,
        inner_steps: report.inner_steps,
        ascent_violations: report.ascent_violations,
        cap_excess_w: feas.max_violation(&report.alpha_final),
        diagnostics: report.diagnostics.clone(),
        error: None,
    };
    (tuple, records, run)
}

pub fn run_experiment(cfg: &RunConfig) -> Result<ResultSet> {
    run_experiment_with(cfg, Execution::Parallel)
}

pub fn run_experiment_with(cfg: &RunConfig, execution: Execution) -> Result<ResultSet> {
    cfg.validate()?;
    let params = cfg.urllc.params()?;
    let tuples = cfg.tuples();
    let work = |s: usize| run_scenario(cfg, &params, &tuples, s);
    let per_scenario: Vec<ScenarioOutput> = match execution {
        Execution::Parallel => (0..cfg.scenarios).into_par_iter().map(work).collect(),
        Execution::Serial => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            pool.install(|| (0..cfg.scenarios).map(work).collect())
        }
    };

    let mut records = Vec::with_capacity(cfg.scenarios * tuples.len() * cfg.area.n_users());
    let mut runs = Vec::with_capacity(cfg.scenarios * tuples.len());
    for (_, recs, run) in per_scenario.into_iter().flatten() {
        records.extend(recs);
        runs.push(run);
    }
    records.sort_by_key(|r| (r.tuple, r.scenario, r.user));
    runs.sort_by_key(|r| (r.tuple, r.scenario));
    Ok(ResultSet {
        seed: cfg.seed,
        scenarios: cfg.scenarios,
        tuples,
        records,
        runs,
    })
}
