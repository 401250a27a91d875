//! Interior-point solver for the concave power-control subproblems.
//!
//! Both objectives are maximized with a log-barrier method whose centering
//! steps are damped Newton steps on dense analytic Hessians. Min objectives
//! are handled on the epigraph `max τ s.t. τ ≤ g_u(α)` with the rate
//! constraints inside the barrier.

use nalgebra::{DMatrix, DVector};

use super::surrogate::Surrogate;
use super::{FeasibleKind, FeasibleSet, Objective};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Budget of Newton steps per subproblem.
    pub max_inner_steps: usize,
    /// Barrier duality gap at termination, relative to `max(1, |objective|)`
    /// in normalized units.
    pub gap_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_inner_steps: 10_000,
            gap_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemOutcome {
    pub alpha: Vec<f64>,
    /// Surrogate objective (sum or min of `g_u`) at `alpha`.
    pub value: f64,
    pub steps: usize,
    pub budget_exhausted: bool,
}

const BARRIER_GROWTH: f64 = 50.0;
const NEWTON_TOL: f64 = 1e-10;
const ARMIJO: f64 = 0.01;
/// Newton decrement, relative to the barrier value, below which a rejected
/// full step ends centering.
const NOISE_DECREMENT: f64 = 1e-10;
const FRACTION_TO_BOUNDARY: f64 = 0.99;

/// Linear inequalities of a [`FeasibleSet`] in units of `1/scale` watts.
#[derive(Debug, Clone)]
struct LinearConstraints {
    lb: Vec<f64>,
    ub: Option<Vec<f64>>,
    members: Vec<Vec<usize>>,
    caps: Vec<f64>,
}

impl LinearConstraints {
    fn new(feas: &FeasibleSet, scale: f64, lb_watts: &[f64]) -> Self {
        let lb = lb_watts.iter().map(|l| l / scale).collect();
        match feas.kind {
            FeasibleKind::UplinkBox => Self {
                lb,
                ub: Some(feas.ul_caps.iter().map(|c| c / scale).collect()),
                members: Vec::new(),
                caps: Vec::new(),
            },
            FeasibleKind::DownlinkApCaps => Self {
                lb,
                ub: None,
                members: feas.serving_map.clone(),
                caps: feas.dl_caps.iter().map(|c| c / scale).collect(),
            },
        }
    }

    fn count(&self) -> usize {
        self.lb.len() + self.ub.as_ref().map_or(0, Vec::len) + self.caps.len()
    }

    /// A point strictly inside every constraint.
    fn center(&self) -> Vec<f64> {
        let mut c: Vec<f64> = match &self.ub {
            Some(ub) => self.lb.iter().zip(ub).map(|(l, u)| 0.5 * (l + u)).collect(),
            None => self.lb.iter().map(|l| l + 1.0).collect(),
        };
        for (users, cap) in self.members.iter().zip(&self.caps) {
            if users.is_empty() {
                continue;
            }
            let lb_sum: f64 = users.iter().map(|&u| self.lb[u]).sum();
            let share = 0.5 * (cap - lb_sum) / users.len() as f64;
            for &u in users {
                c[u] = c[u].min(self.lb[u] + share);
            }
        }
        c
    }

    /// Calls `f(slack, row)` for every constraint written as `slack = b − aᵀx`.
    fn for_each(&self, x: &[f64], mut f: impl FnMut(f64, Row<'_>)) {
        for (u, l) in self.lb.iter().enumerate() {
            f(x[u] - l, Row::Single(u, -1.0));
        }
        if let Some(ub) = &self.ub {
            for (u, h) in ub.iter().enumerate() {
                f(h - x[u], Row::Single(u, 1.0));
            }
        }
        for (users, cap) in self.members.iter().zip(&self.caps) {
            let total: f64 = users.iter().map(|&u| x[u]).sum();
            f(cap - total, Row::Group(users));
        }
    }

    fn strictly_feasible(&self, x: &[f64]) -> bool {
        let mut ok = true;
        self.for_each(x, |s, _| ok &= s > 0.0);
        ok
    }

    /// Adds `Σ ln s_i` and its derivatives; `None` outside the interior.
    fn barrier(&self, x: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>) -> Option<f64> {
        let mut value = 0.0;
        let mut ok = true;
        self.for_each(x, |s, row| {
            if !(s > 0.0) {
                ok = false;
                return;
            }
            value += s.ln();
            let (g, h) = (1.0 / s, 1.0 / (s * s));
            match row {
                Row::Single(u, a) => {
                    grad[u] -= a * g;
                    hess[(u, u)] -= h;
                }
                Row::Group(users) => {
                    for &u in users {
                        grad[u] -= g;
                        for &v in users {
                            hess[(u, v)] -= h;
                        }
                    }
                }
            }
        });
        ok.then_some(value)
    }

    fn barrier_value(&self, x: &[f64]) -> Option<f64> {
        let mut value = 0.0;
        let mut ok = true;
        self.for_each(x, |s, _| {
            ok &= s > 0.0;
            value += s.ln();
        });
        ok.then_some(value)
    }

    /// Largest step along `d` that keeps every slack positive.
    fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        let mut step = f64::INFINITY;
        self.for_each(x, |s, row| {
            let ds = match row {
                Row::Single(u, a) => -a * d[u],
                Row::Group(users) => -users.iter().map(|&u| d[u]).sum::<f64>(),
            };
            if ds < 0.0 {
                step = step.min(s / -ds);
            }
        });
        step
    }
}

/// Coefficient row `a` of a constraint `aᵀx ≤ b`.
enum Row<'a> {
    Single(usize, f64),
    Group(&'a [usize]),
}

/// Evaluates the scaled surrogate in solver coordinates.
struct Scaled<'a> {
    surrogate: &'a dyn Surrogate,
    scale: f64,
    vscale: f64,
    alpha: Vec<f64>,
    vals: Vec<f64>,
}

impl Scaled<'_> {
    fn set(&mut self, x: &[f64]) {
        for (a, v) in self.alpha.iter_mut().zip(x) {
            *a = v * self.scale;
        }
    }

    fn values(&mut self, x: &[f64]) -> &[f64] {
        self.set(x);
        self.surrogate.values(&self.alpha, &mut self.vals);
        for v in self.vals.iter_mut() {
            *v /= self.vscale;
        }
        &self.vals
    }

    /// Gradient and Hessian of `Σ w_u g_u` with respect to `x`.
    fn derivatives(&mut self, x: &[f64], w: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>) {
        self.set(x);
        self.surrogate.weighted_gradient(&self.alpha, w, grad);
        self.surrogate.weighted_hessian(&self.alpha, w, hess);
        let gs = self.scale / self.vscale;
        grad.iter_mut().for_each(|g| *g *= gs);
        *hess *= gs * self.scale;
    }

    fn jacobian(&mut self, x: &[f64], jac: &mut DMatrix<f64>) {
        self.set(x);
        self.surrogate.jacobian(&self.alpha, jac);
        *jac *= self.scale / self.vscale;
    }
}

/// Barrier-augmented objective `t·f + barrier` of one subproblem.
trait Centering {
    fn dim(&self) -> usize;
    /// Value, gradient and Hessian; `None` outside the interior.
    fn eval(&mut self, z: &[f64], t: f64, grad: &mut [f64], hess: &mut DMatrix<f64>)
        -> Option<f64>;
    fn value(&mut self, z: &[f64], t: f64) -> Option<f64>;
    fn max_step(&self, z: &[f64], d: &[f64]) -> f64;
    /// Objective `f` in normalized units.
    fn objective(&mut self, z: &[f64]) -> f64;
    fn constraint_count(&self) -> usize;
}

struct SumProblem<'a> {
    f: Scaled<'a>,
    cons: LinearConstraints,
    ones: Vec<f64>,
}

impl Centering for SumProblem<'_> {
    fn dim(&self) -> usize {
        self.ones.len()
    }

    fn eval(
        &mut self,
        z: &[f64],
        t: f64,
        grad: &mut [f64],
        hess: &mut DMatrix<f64>,
    ) -> Option<f64> {
        let f = self.objective(z);
        self.f.derivatives(z, &self.ones, grad, hess);
        grad.iter_mut().for_each(|g| *g *= t);
        *hess *= t;
        let b = self.cons.barrier(z, grad, hess)?;
        Some(t * f + b)
    }

    fn value(&mut self, z: &[f64], t: f64) -> Option<f64> {
        let b = self.cons.barrier_value(z)?;
        Some(t * self.objective(z) + b)
    }

    fn max_step(&self, z: &[f64], d: &[f64]) -> f64 {
        self.cons.max_step(z, d)
    }

    fn objective(&mut self, z: &[f64]) -> f64 {
        self.f.values(z).iter().sum()
    }

    fn constraint_count(&self) -> usize {
        self.cons.count()
    }
}

/// Epigraph form over `z = (x, τ)`.
struct MinProblem<'a> {
    f: Scaled<'a>,
    cons: LinearConstraints,
    n: usize,
    weights: Vec<f64>,
    grad_x: Vec<f64>,
    hess_x: DMatrix<f64>,
    jac: DMatrix<f64>,
}

impl MinProblem<'_> {
    fn slacks(&mut self, z: &[f64]) -> Option<Vec<f64>> {
        let tau = z[self.n];
        let c: Vec<f64> = self
            .f
            .values(&z[..self.n])
            .iter()
            .map(|g| g - tau)
            .collect();
        c.iter().all(|&s| s > 0.0).then_some(c)
    }
}

impl Centering for MinProblem<'_> {
    fn dim(&self) -> usize {
        self.n + 1
    }

    fn eval(
        &mut self,
        z: &[f64],
        t: f64,
        grad: &mut [f64],
        hess: &mut DMatrix<f64>,
    ) -> Option<f64> {
        let n = self.n;
        let c = self.slacks(z)?;
        let x = &z[..n];
        for (w, s) in self.weights.iter_mut().zip(&c) {
            *w = 1.0 / s;
        }
        self.f
            .derivatives(x, &self.weights, &mut self.grad_x, &mut self.hess_x);
        self.f.jacobian(x, &mut self.jac);
        // Σ_u ∇g_u ∇g_uᵀ / c_u²
        let inv_sq = DVector::from_iterator(n, c.iter().map(|s| 1.0 / (s * s)));
        let mut scaled = self.jac.clone();
        for (u, mut row) in scaled.row_iter_mut().enumerate() {
            row *= inv_sq[u];
        }
        let outer = self.jac.tr_mul(&scaled);
        let cross = self.jac.tr_mul(&inv_sq);

        hess.fill(0.0);
        grad.fill(0.0);
        {
            let mut hx = hess.view_mut((0, 0), (n, n));
            hx += &self.hess_x;
            hx -= &outer;
        }
        for i in 0..n {
            grad[i] = self.grad_x[i];
            hess[(i, n)] = cross[i];
            hess[(n, i)] = cross[i];
        }
        grad[n] = t - self.weights.iter().sum::<f64>();
        hess[(n, n)] = -inv_sq.sum();
        let b = self.cons.barrier(x, &mut grad[..n], hess)?;
        Some(t * z[n] + b + c.iter().map(|s| s.ln()).sum::<f64>())
    }

    fn value(&mut self, z: &[f64], t: f64) -> Option<f64> {
        let b = self.cons.barrier_value(&z[..self.n])?;
        let c = self.slacks(z)?;
        Some(t * z[self.n] + b + c.iter().map(|s| s.ln()).sum::<f64>())
    }

    fn max_step(&self, z: &[f64], d: &[f64]) -> f64 {
        self.cons.max_step(&z[..self.n], &d[..self.n])
    }

    fn objective(&mut self, z: &[f64]) -> f64 {
        z[self.n]
    }

    fn constraint_count(&self) -> usize {
        self.cons.count() + self.n
    }
}

/// Solves `(−H) d = g`, regularizing `−H` if it is not numerically positive definite.
fn newton_direction(hess: &DMatrix<f64>, grad: &[f64]) -> Option<DVector<f64>> {
    let neg = -hess;
    let rhs = DVector::from_column_slice(grad);
    if let Some(ch) = neg.clone().cholesky() {
        return Some(ch.solve(&rhs));
    }
    let big = neg
        .diagonal()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut shift = 1e-14 * big;
    while shift <= big {
        let mut m = neg.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        if let Some(ch) = m.cholesky() {
            return Some(ch.solve(&rhs));
        }
        shift *= 100.0;
    }
    None
}

/// Runs the barrier method from a strictly feasible `z`; returns (steps, converged).
fn barrier_method(p: &mut dyn Centering, z: &mut Vec<f64>, opts: &SolverOptions) -> (usize, bool) {
    let dim = p.dim();
    let m = p.constraint_count() as f64;
    let mut grad = vec![0.0; dim];
    let mut hess = DMatrix::zeros(dim, dim);
    let mut trial = vec![0.0; dim];
    let mut steps = 0usize;
    // first centering trades the barrier against a gap of the objective's own size
    let mut t = m / p.objective(z).abs().max(1.0);
    loop {
        let stage_start = steps;
        // centering
        loop {
            if steps >= opts.max_inner_steps {
                return (steps, false);
            }
            let Some(f) = p.eval(z, t, &mut grad, &mut hess) else {
                return (steps, false);
            };
            let Some(d) = newton_direction(&hess, &grad) else {
                break;
            };
            let decrement: f64 = grad.iter().zip(d.iter()).map(|(g, d)| g * d).sum();
            // below this the barrier value cannot resolve further progress
            if !(decrement > 2.0 * (NEWTON_TOL + 1e-14 * f.abs())) {
                break;
            }
            steps += 1;
            let mut beta = (FRACTION_TO_BOUNDARY * p.max_step(z, d.as_slice())).min(1.0);
            let mut accepted = false;
            for k in 0..60 {
                for i in 0..dim {
                    trial[i] = z[i] + beta * d[i];
                }
                if let Some(ft) = p.value(&trial, t) {
                    if ft >= f + ARMIJO * beta * decrement {
                        accepted = true;
                        break;
                    }
                }
                // a small decrement whose full step fails is rounding noise
                if k == 0 && decrement <= NOISE_DECREMENT * f.abs().max(1e4) {
                    break;
                }
                beta *= 0.5;
            }
            if !accepted {
                break;
            }
            std::mem::swap(z, &mut trial);
        }
        let obj = p.objective(z);
        log::trace!(
            "stage t={t:.1e}: {} newton steps, objective {obj:.9e}",
            steps - stage_start
        );
        if m / t <= opts.gap_tol * obj.abs().max(1.0) {
            return (steps, true);
        }
        t *= BARRIER_GROWTH;
    }
}

/// Maximizes `Σ_u g_u` or `min_u g_u` over `feas`, starting from `start`.
///
/// Iterates stay strictly above `lower_bound` and strictly inside the power
/// constraints. The returned point is never worse than `start` in surrogate
/// value.
pub fn solve_subproblem(
    surrogate: &dyn Surrogate,
    feas: &FeasibleSet,
    objective: Objective,
    start: &[f64],
    lower_bound: &[f64],
    opts: &SolverOptions,
) -> Result<SubproblemOutcome> {
    let n = surrogate.n_users();
    if feas.n_users() != n || start.len() != n || lower_bound.len() != n {
        return Err(Error::invalid_arg("subproblem dimensions disagree"));
    }
    let scale = feas.scale();
    let cons = LinearConstraints::new(feas, scale, lower_bound);
    let x_start: Vec<f64> = start.iter().map(|a| a / scale).collect();
    let mut center = cons.center();
    if !cons.strictly_feasible(&center) {
        return Err(Error::invalid_arg("feasible set has an empty interior"));
    }
    // stay within a factor of two of positive lower bounds so surrogates
    // expanded there are not evaluated far from their expansion point
    for (c, l) in center.iter_mut().zip(&cons.lb) {
        if *l > 0.0 {
            *c = c.min(2.0 * l);
        }
    }
    let mut theta = 1e-3;
    let mut x = loop {
        let x: Vec<f64> = x_start
            .iter()
            .zip(&center)
            .map(|(s, c)| s + theta * (c - s))
            .collect();
        if theta >= 1.0 || cons.strictly_feasible(&x) {
            break x;
        }
        theta = (theta * 10.0).min(1.0);
    };

    let mut f = Scaled {
        surrogate,
        scale,
        vscale: surrogate.scale(),
        alpha: vec![0.0; n],
        vals: vec![0.0; n],
    };
    let reduce = |v: &[f64]| match objective {
        Objective::SumRate => v.iter().sum::<f64>(),
        Objective::MinRate => v.iter().copied().fold(f64::INFINITY, f64::min),
    };
    let start_value = reduce(f.values(&x_start));

    let (steps, converged) = match objective {
        Objective::SumRate => {
            let mut p = SumProblem {
                f,
                cons,
                ones: vec![1.0; n],
            };
            let r = barrier_method(&mut p, &mut x, opts);
            f = p.f;
            r
        }
        Objective::MinRate => {
            let gmin = reduce(f.values(&x));
            let mut z = x.clone();
            z.push(gmin - gmin.abs().max(1.0));
            let mut p = MinProblem {
                f,
                cons,
                n,
                weights: vec![0.0; n],
                grad_x: vec![0.0; n],
                hess_x: DMatrix::zeros(n, n),
                jac: DMatrix::zeros(n, n),
            };
            let r = barrier_method(&mut p, &mut z, opts);
            z.truncate(n);
            x = z;
            f = p.f;
            r
        }
    };

    let mut value = reduce(f.values(&x));
    if !(value >= start_value) {
        x = x_start;
        value = start_value;
    }
    let alpha = x.iter().map(|v| v * scale).collect();
    Ok(SubproblemOutcome {
        alpha,
        value: value * f.vscale,
        steps,
        budget_exhausted: !converged,
    })
}
