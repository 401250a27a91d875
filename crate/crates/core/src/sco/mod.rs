//! Successive convex optimization of the per-user power coefficients.
//!
//! Four problems are supported: sum-rate or max-min rate, uplink or downlink.
//! Each outer iteration replaces the URLLC rate by a concave surrogate tight at
//! the current iterate ([`IcbaSurrogate`] or [`IiaSurrogate`]), solves the
//! surrogate problem with [`solve_subproblem`], and stops once the relative
//! squared step `‖α⁽ᵏ⁾ − α⁽ᵏ⁻¹⁾‖² / ‖α⁽ᵏ⁾‖²` drops to `δ`.

mod solver;
mod surrogate;

pub use solver::{solve_subproblem, SolverOptions, SubproblemOutcome};
pub use surrogate::{
    log_ratio_lower_bound, square_upper_bound, IcbaSurrogate, IiaSurrogate, Surrogate,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rate::{urllc_rate, Direction, LinkCoefficients, UrllcParams};

/// Per-user power coefficients in watts.
pub type PowerVector = Vec<f64>;

/// Relative size of the strict-interior lower bound on every coefficient.
pub const INTERIOR_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    SumRate,
    MinRate,
}

impl Objective {
    pub fn short_name(self) -> &'static str {
        match self {
            Objective::SumRate => "sum",
            Objective::MinRate => "min",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Icba,
    Iia,
}

impl Scheme {
    pub fn short_name(self) -> &'static str {
        match self {
            Scheme::Icba => "icba",
            Scheme::Iia => "iia",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibleKind {
    UplinkBox,
    DownlinkApCaps,
}

/// Power constraints: a per-user box in the uplink, per-AP sum caps in the
/// downlink (a user's coefficient counts once in every serving AP's budget).
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    pub kind: FeasibleKind,
    pub ul_caps: Vec<f64>,
    pub dl_caps: Vec<f64>,
    pub serving_map: Vec<Vec<usize>>,
    user_caps: Vec<f64>,
}

impl FeasibleSet {
    pub fn uplink(caps: Vec<f64>) -> Result<Self> {
        if caps.is_empty() || caps.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid_arg(
                "uplink caps must be positive and finite",
            ));
        }
        Ok(Self {
            kind: FeasibleKind::UplinkBox,
            user_caps: caps.clone(),
            ul_caps: caps,
            dl_caps: Vec::new(),
            serving_map: Vec::new(),
        })
    }

    /// `serving_map[a]` lists the users served by AP `a`; every user must be
    /// served by at least one AP.
    pub fn downlink(caps: Vec<f64>, serving_map: Vec<Vec<usize>>, n_users: usize) -> Result<Self> {
        if caps.len() != serving_map.len() {
            return Err(Error::invalid_arg("one cap per AP is required"));
        }
        if caps.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid_arg(
                "downlink caps must be positive and finite",
            ));
        }
        let mut user_caps = vec![f64::INFINITY; n_users];
        for (a, users) in serving_map.iter().enumerate() {
            for &u in users {
                if u >= n_users {
                    return Err(Error::invalid_arg(format!(
                        "AP {a} serves unknown user {u}"
                    )));
                }
                user_caps[u] = user_caps[u].min(caps[a]);
            }
        }
        if n_users == 0 || user_caps.iter().any(|c| c.is_infinite()) {
            return Err(Error::invalid_arg(
                "every user must be served by at least one AP",
            ));
        }
        Ok(Self {
            kind: FeasibleKind::DownlinkApCaps,
            ul_caps: Vec::new(),
            dl_caps: caps,
            serving_map,
            user_caps,
        })
    }

    pub fn n_users(&self) -> usize {
        self.user_caps.len()
    }

    /// Largest value any single coefficient may take.
    pub fn user_caps(&self) -> &[f64] {
        &self.user_caps
    }

    pub(crate) fn scale(&self) -> f64 {
        self.user_caps.iter().copied().fold(0.0, f64::max)
    }

    /// `α_min = INTERIOR_GUARD · cap_u` for every user.
    pub fn lower_bounds(&self) -> Vec<f64> {
        self.user_caps.iter().map(|c| INTERIOR_GUARD * c).collect()
    }

    /// Full power: `η_u` in the uplink, `min_{a∈A_u} η_a/|U_a|` in the downlink.
    pub fn full_power(&self) -> PowerVector {
        match self.kind {
            FeasibleKind::UplinkBox => self.ul_caps.clone(),
            FeasibleKind::DownlinkApCaps => {
                let mut alpha = vec![f64::INFINITY; self.n_users()];
                for (a, users) in self.serving_map.iter().enumerate() {
                    let share = self.dl_caps[a] / users.len() as f64;
                    for &u in users {
                        alpha[u] = alpha[u].min(share);
                    }
                }
                alpha
            }
        }
    }

    /// Largest constraint violation in watts (0 when feasible).
    pub fn max_violation(&self, alpha: &[f64]) -> f64 {
        let mut v = alpha.iter().fold(0.0f64, |m, a| m.max(-a));
        match self.kind {
            FeasibleKind::UplinkBox => {
                for (a, c) in alpha.iter().zip(&self.ul_caps) {
                    v = v.max(a - c);
                }
            }
            FeasibleKind::DownlinkApCaps => {
                for (users, c) in self.serving_map.iter().zip(&self.dl_caps) {
                    let s: f64 = users.iter().map(|&u| alpha[u]).sum();
                    v = v.max(s - c);
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub objective: Objective,
    pub direction: Direction,
    pub scheme: Scheme,
    pub lc: LinkCoefficients,
    pub params: UrllcParams,
    pub feas: FeasibleSet,
    pub tol_delta: f64,
    pub max_iters: usize,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_delta > 0.0) || self.max_iters == 0 {
            return Err(Error::invalid_arg(
                "δ must be positive and max_iters at least 1",
            ));
        }
        if self.lc.n_users() != self.feas.n_users() {
            return Err(Error::invalid_arg(
                "coefficients and constraints disagree on user count",
            ));
        }
        let expected = match self.direction {
            Direction::Uplink => FeasibleKind::UplinkBox,
            Direction::Downlink => FeasibleKind::DownlinkApCaps,
        };
        if self.feas.kind != expected || self.lc.direction != self.direction {
            return Err(Error::invalid_arg(
                "direction, coefficients and constraints disagree",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub alpha_initial: PowerVector,
    pub alpha_final: PowerVector,
    /// True objective at `α⁽⁰⁾` followed by one entry per iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub per_user_rates: Vec<f64>,
    pub inner_steps: usize,
    /// Iterations whose true objective fell more than 1e-9 (relative) below the previous one.
    pub ascent_violations: usize,
    pub diagnostics: Vec<String>,
}

impl SolveReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// True objective: sum or minimum of the per-user URLLC rates.
pub fn true_objective(
    objective: Objective,
    lc: &LinkCoefficients,
    params: &UrllcParams,
    alpha: &[f64],
) -> f64 {
    let rates = lc.rates(alpha, params);
    match objective {
        Objective::SumRate => rates.iter().sum(),
        Objective::MinRate => rates.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

fn relative_step(new: &[f64], old: &[f64]) -> f64 {
    let num: f64 = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = new.iter().map(|a| a * a).sum();
    num / den
}

fn clamp_below(alpha: &mut [f64], lb: &[f64]) {
    for (a, l) in alpha.iter_mut().zip(lb) {
        *a = a.max(*l);
    }
}

/// Starting point shared by both schemes, with `δ = 1e-5` and 100 iterations.
pub fn initialize_alpha(
    lc: &LinkCoefficients,
    params: &UrllcParams,
    feas: &FeasibleSet,
) -> Result<PowerVector> {
    initialize_alpha_with(lc, params, feas, 1e-5, 100, &SolverOptions::default()).map(|(a, _)| a)
}

/// Shannon-only interference-frozen sum-rate iteration from full power.
/// Returns the point and the number of ascent steps spent.
pub fn initialize_alpha_with(
    lc: &LinkCoefficients,
    params: &UrllcParams,
    feas: &FeasibleSet,
    delta: f64,
    max_iters: usize,
    opts: &SolverOptions,
) -> Result<(PowerVector, usize)> {
    let lb = feas.lower_bounds();
    let mut alpha = feas.full_power();
    clamp_below(&mut alpha, &lb);
    let mut steps = 0;
    for _ in 0..max_iters {
        let s = IiaSurrogate::shannon_only(lc, params, &alpha)?;
        let out = solve_subproblem(&s, feas, Objective::SumRate, &alpha, &lb, opts)?;
        steps += out.steps;
        let step = relative_step(&out.alpha, &alpha);
        alpha = out.alpha;
        if step <= delta {
            break;
        }
    }
    Ok((alpha, steps))
}

pub fn run_sco(spec: &ProblemSpec) -> Result<SolveReport> {
    run_sco_with(spec, &SolverOptions::default())
}

pub fn run_sco_with(spec: &ProblemSpec, opts: &SolverOptions) -> Result<SolveReport> {
    spec.validate()?;
    let (lc, params, feas) = (&spec.lc, &spec.params, &spec.feas);
    let lb = feas.lower_bounds();
    let (alpha0, mut inner_steps) =
        initialize_alpha_with(lc, params, feas, spec.tol_delta, spec.max_iters, opts)?;
    let mut alpha = alpha0.clone();
    clamp_below(&mut alpha, &lb);
    let mut trace = vec![true_objective(spec.objective, lc, params, &alpha)];
    let mut diagnostics = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=spec.max_iters {
        let out = match spec.scheme {
            Scheme::Icba => {
                let s = IcbaSurrogate::new(lc, params, &alpha)?;
                solve_subproblem(&s, feas, spec.objective, &alpha, &lb, opts)?
            }
            Scheme::Iia => {
                let s = IiaSurrogate::new(lc, params, &alpha)?;
                solve_subproblem(&s, feas, spec.objective, &alpha, &lb, opts)?
            }
        };
        inner_steps += out.steps;
        log::debug!(
            "iteration {k}: {} inner steps, surrogate {:.6e}",
            out.steps,
            out.value
        );
        if out.budget_exhausted {
            diagnostics.push(format!("iteration {k}: inner step budget exhausted"));
        }
        let step = relative_step(&out.alpha, &alpha);
        alpha = out.alpha;
        trace.push(true_objective(spec.objective, lc, params, &alpha));
        iterations = k;
        if step <= spec.tol_delta {
            converged = true;
            break;
        }
    }

    let ascent_violations = trace
        .windows(2)
        .filter(|w| w[1] < w[0] - 1e-9 * w[0].abs().max(1.0))
        .count();
    if spec.scheme == Scheme::Icba && ascent_violations > 0 {
        log::warn!("ICBA objective decreased in {ascent_violations} iteration(s)");
    }
    let violation = feas.max_violation(&alpha);
    if violation > 1e-8 * feas.scale() {
        return Err(Error::Numerical(format!(
            "final point violates constraints by {violation}"
        )));
    }
    let alpha_final: PowerVector = alpha
        .iter()
        .zip(&lb)
        .map(|(&a, &l)| if a < 10.0 * l { 0.0 } else { a })
        .collect();
    let per_user_rates = lc
        .sinr_all(&alpha_final)
        .into_iter()
        .map(|g| urllc_rate(g, params))
        .collect();
    Ok(SolveReport {
        alpha_initial: alpha0,
        alpha_final,
        objective_trace: trace,
        converged,
        iterations,
        per_user_rates,
        inner_steps,
        ascent_violations,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(
        lc: LinkCoefficients,
        feas: FeasibleSet,
        objective: Objective,
        scheme: Scheme,
    ) -> ProblemSpec {
        ProblemSpec {
            objective,
            direction: lc.direction,
            scheme,
            lc,
            params: UrllcParams::reference(),
            feas,
            tol_delta: 1e-5,
            max_iters: 100,
        }
    }

    #[test]
    fn single_user_uplink_goes_to_full_power() {
        for scheme in [Scheme::Icba, Scheme::Iia] {
            let lc = LinkCoefficients::new(
                Direction::Uplink,
                vec![3.0],
                DMatrix::zeros(1, 1),
                vec![1.0],
            )
            .unwrap();
            let feas = FeasibleSet::uplink(vec![0.1]).unwrap();
            let r = run_sco(&spec(lc, feas, Objective::SumRate, scheme)).unwrap();
            assert!(r.converged && r.iterations <= 3);
            assert!((r.alpha_final[0] - 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_instance_gives_symmetric_start() {
        let e = DMatrix::from_row_slice(2, 2, &[0.0, 0.4, 0.4, 0.0]);
        let lc =
            LinkCoefficients::new(Direction::Downlink, vec![2.0, 2.0], e, vec![1.0, 1.0]).unwrap();
        let feas = FeasibleSet::downlink(vec![1.0], vec![vec![0, 1]], 2).unwrap();
        let a = initialize_alpha(&lc, &UrllcParams::reference(), &feas).unwrap();
        assert!((a[0] - a[1]).abs() < 1e-9 * a[0]);
    }

    #[test]
    fn dl_cap_binds() {
        let e = DMatrix::from_row_slice(3, 3, &[0.0, 0.01, 0.01, 0.01, 0.0, 0.01, 0.01, 0.01, 0.0]);
        let lc =
            LinkCoefficients::new(Direction::Downlink, vec![50.0, 80.0, 30.0], e, vec![1.0; 3])
                .unwrap();
        let feas = FeasibleSet::downlink(vec![0.2, 0.2], vec![vec![0, 1], vec![1, 2]], 3).unwrap();
        for objective in [Objective::SumRate, Objective::MinRate] {
            let r = run_sco(&spec(lc.clone(), feas.clone(), objective, Scheme::Iia)).unwrap();
            assert!(feas.max_violation(&r.alpha_final) <= 1e-12);
            let s0: f64 = r.alpha_final[0] + r.alpha_final[1];
            let s1: f64 = r.alpha_final[1] + r.alpha_final[2];
            assert!(
                (s0 - 0.2).abs() <= 1e-8 || (s1 - 0.2).abs() <= 1e-8,
                "{s0} {s1}"
            );
        }
    }

    #[test]
    fn icba_trace_is_nondecreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let n = rng.random_range(2..10);
            let q: Vec<f64> = (0..n)
                .map(|_| 10f64.powf(rng.random_range(0.0..3.0)))
                .collect();
            let e = DMatrix::from_fn(n, n, |_, _| 10f64.powf(rng.random_range(-1.0..1.5)));
            let lc = LinkCoefficients::new(Direction::Uplink, q, e, vec![1.0; n]).unwrap();
            let feas = FeasibleSet::uplink(vec![1.0; n]).unwrap();
            for objective in [Objective::SumRate, Objective::MinRate] {
                let r = run_sco(&spec(lc.clone(), feas.clone(), objective, Scheme::Icba)).unwrap();
                assert_eq!(r.ascent_violations, 0, "{:?}", r.objective_trace);
            }
        }
    }

    #[test]
    fn report_serializes() {
        let lc = LinkCoefficients::new(
            Direction::Uplink,
            vec![3.0],
            DMatrix::zeros(1, 1),
            vec![1.0],
        )
        .unwrap();
        let feas = FeasibleSet::uplink(vec![0.1]).unwrap();
        let r = run_sco(&spec(lc, feas, Objective::SumRate, Scheme::Iia)).unwrap();
        let back: SolveReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
