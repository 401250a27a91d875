//! Per-iteration concave surrogates of the URLLC rate.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rate::{dispersion, dispersion_derivative, LinkCoefficients, UrllcParams};

/// A concave per-user objective `g_u(α)` with analytic gradients.
pub trait Surrogate {
    fn n_users(&self) -> usize;

    /// Magnitude used by the solver to normalize objective values.
    fn scale(&self) -> f64 {
        1.0
    }

    /// Writes `g_u(α)` for every user into `out`.
    fn values(&self, alpha: &[f64], out: &mut [f64]);

    /// Writes `∇ Σ_u w_u·g_u(α)` into `grad`.
    fn weighted_gradient(&self, alpha: &[f64], weights: &[f64], grad: &mut [f64]);

    /// Writes `∇² Σ_u w_u·g_u(α)` into `hess`.
    fn weighted_hessian(&self, alpha: &[f64], weights: &[f64], hess: &mut DMatrix<f64>);

    /// Row `u` of `jac` is `∇g_u(α)`.
    fn jacobian(&self, alpha: &[f64], jac: &mut DMatrix<f64>) {
        let n = self.n_users();
        let mut w = vec![0.0; n];
        let mut g = vec![0.0; n];
        for u in 0..n {
            w[u] = 1.0;
            self.weighted_gradient(alpha, &w, &mut g);
            w[u] = 0.0;
            for (i, v) in g.iter().enumerate() {
                jac[(u, i)] = *v;
            }
        }
    }

    fn sum_value(&self, alpha: &[f64]) -> f64 {
        let mut v = vec![0.0; self.n_users()];
        self.values(alpha, &mut v);
        v.iter().sum()
    }

    fn min_value(&self, alpha: &[f64]) -> f64 {
        let mut v = vec![0.0; self.n_users()];
        self.values(alpha, &mut v);
        v.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Right-hand side of `ln(1+x/y) ≥ ln(1+x̄/ȳ) + (x̄/ȳ)(2√(x/x̄) − (x+y)/(x̄+ȳ) − 1)`.
pub fn log_ratio_lower_bound(x: f64, y: f64, x_bar: f64, y_bar: f64) -> f64 {
    let g = x_bar / y_bar;
    g.ln_1p() + g * (2.0 * (x / x_bar).sqrt() - (x + y) / (x_bar + y_bar) - 1.0)
}

/// Right-hand side of `x ≤ (x²/x̄ + x̄)/2`.
pub fn square_upper_bound(x: f64, x_bar: f64) -> f64 {
    0.5 * (x * x / x_bar + x_bar)
}

fn check_expansion_point(lc: &LinkCoefficients, alpha_prev: &[f64]) -> Result<()> {
    if alpha_prev.len() != lc.n_users() {
        return Err(Error::invalid_arg("expansion point has the wrong length"));
    }
    if let Some((u, a)) = alpha_prev
        .iter()
        .enumerate()
        .find(|(_, &a)| !(a > 0.0 && a.is_finite()))
    {
        return Err(Error::invalid_arg(format!(
            "expansion point must be strictly positive, user {u} has {a}"
        )));
    }
    Ok(())
}

/// Concave lower bound of the Shannon part combined with the dispersion
/// linearized in γ and evaluated at a convex upper bound of γ.
#[derive(Debug, Clone)]
pub struct IcbaSurrogate<'a> {
    lc: &'a LinkCoefficients,
    c1_ln: f64,
    alpha_prev: Vec<f64>,
    gamma_bar: Vec<f64>,
    total_bar: Vec<f64>,
    delta_bar: Vec<f64>,
    delta_slope: Vec<f64>,
}

impl<'a> IcbaSurrogate<'a> {
    pub fn new(lc: &'a LinkCoefficients, params: &UrllcParams, alpha_prev: &[f64]) -> Result<Self> {
        check_expansion_point(lc, alpha_prev)?;
        let n = lc.n_users();
        let mut gamma_bar = vec![0.0; n];
        let mut total_bar = vec![0.0; n];
        let mut delta_bar = vec![0.0; n];
        let mut delta_slope = vec![0.0; n];
        for u in 0..n {
            let y = lc.interference_plus_noise(alpha_prev, u);
            let x = alpha_prev[u] * lc.q[u];
            gamma_bar[u] = x / y;
            total_bar[u] = x + y;
            if lc.q[u] > 0.0 {
                delta_bar[u] = dispersion(gamma_bar[u], params);
                delta_slope[u] = dispersion_derivative(gamma_bar[u], params);
            }
        }
        Ok(Self {
            lc,
            c1_ln: params.prelog_c1 / LN_2,
            alpha_prev: alpha_prev.to_vec(),
            gamma_bar,
            total_bar,
            delta_bar,
            delta_slope,
        })
    }

    /// Shannon lower bound `R^{sh,ICBA}` of user `u`.
    pub fn shannon_bound(&self, alpha: &[f64], u: usize) -> f64 {
        let y = self.lc.interference_plus_noise(alpha, u);
        let x = alpha[u] * self.lc.q[u];
        if self.lc.q[u] == 0.0 {
            return 0.0;
        }
        let x_bar = self.alpha_prev[u] * self.lc.q[u];
        self.c1_ln * log_ratio_lower_bound(x, y, x_bar, self.total_bar[u] - x_bar)
    }

    /// Convex upper bound `γ^{ICBA}` of user `u`'s SINR.
    pub fn sinr_bound(&self, alpha: &[f64], u: usize) -> f64 {
        let y = self.lc.interference_plus_noise(alpha, u);
        square_upper_bound(alpha[u], self.alpha_prev[u]) * self.lc.q[u] / y
    }
}

impl Surrogate for IcbaSurrogate<'_> {
    fn n_users(&self) -> usize {
        self.lc.n_users()
    }

    fn scale(&self) -> f64 {
        self.c1_ln * LN_2
    }

    fn values(&self, alpha: &[f64], out: &mut [f64]) {
        for (u, o) in out.iter_mut().enumerate() {
            if self.lc.q[u] == 0.0 {
                *o = 0.0;
                continue;
            }
            let gi = self.sinr_bound(alpha, u);
            let delta = self.delta_bar[u] + self.delta_slope[u] * (gi - self.gamma_bar[u]);
            *o = self.shannon_bound(alpha, u) - delta;
        }
    }

    fn weighted_gradient(&self, alpha: &[f64], weights: &[f64], grad: &mut [f64]) {
        let n = self.n_users();
        let mut cross = vec![0.0; n];
        grad.fill(0.0);
        for u in 0..n {
            let q = self.lc.q[u];
            if q == 0.0 || weights[u] == 0.0 {
                continue;
            }
            let w = weights[u];
            let y = self.lc.interference_plus_noise(alpha, u);
            let ap = self.alpha_prev[u];
            let gb = self.gamma_bar[u];
            let gi = square_upper_bound(alpha[u], ap) * q / y;
            let own_sh = self.c1_ln * gb * (1.0 / (alpha[u] * ap).sqrt() - q / self.total_bar[u]);
            let own_disp = self.delta_slope[u] * alpha[u] * q / (ap * y);
            grad[u] += w * (own_sh - own_disp);
            cross[u] = w * (-self.c1_ln * gb / self.total_bar[u] + self.delta_slope[u] * gi / y);
        }
        // grad_i += Σ_u cross_u·e_{u,i}
        let et = self.lc.e.tr_mul(&DVector::from_column_slice(&cross));
        for (g, c) in grad.iter_mut().zip(et.iter()) {
            *g += c;
        }
    }

    fn jacobian(&self, alpha: &[f64], jac: &mut DMatrix<f64>) {
        let n = self.n_users();
        jac.fill(0.0);
        for u in 0..n {
            let q = self.lc.q[u];
            if q == 0.0 {
                continue;
            }
            let y = self.lc.interference_plus_noise(alpha, u);
            let ap = self.alpha_prev[u];
            let gb = self.gamma_bar[u];
            let gi = square_upper_bound(alpha[u], ap) * q / y;
            let cross = -self.c1_ln * gb / self.total_bar[u] + self.delta_slope[u] * gi / y;
            for i in 0..n {
                jac[(u, i)] = cross * self.lc.e[(u, i)];
            }
            jac[(u, u)] = self.c1_ln * gb * (1.0 / (alpha[u] * ap).sqrt() - q / self.total_bar[u])
                - self.delta_slope[u] * alpha[u] * q / (ap * y);
        }
    }

    fn weighted_hessian(&self, alpha: &[f64], weights: &[f64], hess: &mut DMatrix<f64>) {
        // g_u depends on α only through a = α_u and y = Σ_i e_{u,i} α_i + t_u
        let n = self.n_users();
        let e = &self.lc.e;
        let mut d_yy = DVector::zeros(n);
        hess.fill(0.0);
        for u in 0..n {
            let q = self.lc.q[u];
            if q == 0.0 || weights[u] == 0.0 {
                continue;
            }
            let w = weights[u];
            let a = alpha[u];
            let ap = self.alpha_prev[u];
            let y = self.lc.interference_plus_noise(alpha, u);
            let slope = self.delta_slope[u];
            let p = square_upper_bound(a, ap) * q;
            let h_aa = -self.c1_ln * self.gamma_bar[u] / (2.0 * a * (a * ap).sqrt())
                - slope * q / (ap * y);
            let h_ay = slope * q * a / (ap * y * y);
            d_yy[u] = -w * 2.0 * slope * p / (y * y * y);
            hess[(u, u)] += w * h_aa;
            for i in 0..n {
                let c = w * h_ay * e[(u, i)];
                hess[(u, i)] += c;
                hess[(i, u)] += c;
            }
        }
        // Σ_u h_yy,u·r_u r_uᵀ with r_u the u-th row of e
        let scaled = DMatrix::from_fn(n, n, |u, i| d_yy[u] * e[(u, i)]);
        hess.gemm_tr(1.0, e, &scaled, 1.0);
    }
}

/// Interference frozen at the expansion point; dispersion linearized in the
/// own power. Each user's surrogate depends only on its own coefficient.
#[derive(Debug, Clone)]
pub struct IiaSurrogate<'a> {
    lc: &'a LinkCoefficients,
    c1_ln: f64,
    alpha_prev: Vec<f64>,
    frozen: Vec<f64>,
    delta_bar: Vec<f64>,
    delta_slope: Vec<f64>,
    shannon_only: bool,
}

impl<'a> IiaSurrogate<'a> {
    pub fn new(lc: &'a LinkCoefficients, params: &UrllcParams, alpha_prev: &[f64]) -> Result<Self> {
        Self::build(lc, params, alpha_prev, false)
    }

    /// The Shannon term alone, used to compute the starting point.
    pub fn shannon_only(
        lc: &'a LinkCoefficients,
        params: &UrllcParams,
        alpha_prev: &[f64],
    ) -> Result<Self> {
        Self::build(lc, params, alpha_prev, true)
    }

    fn build(
        lc: &'a LinkCoefficients,
        params: &UrllcParams,
        alpha_prev: &[f64],
        shannon_only: bool,
    ) -> Result<Self> {
        check_expansion_point(lc, alpha_prev)?;
        let n = lc.n_users();
        let mut frozen = vec![0.0; n];
        let mut delta_bar = vec![0.0; n];
        let mut delta_slope = vec![0.0; n];
        for u in 0..n {
            frozen[u] = lc.interference_plus_noise(alpha_prev, u);
            if !shannon_only && lc.q[u] > 0.0 {
                let gb = alpha_prev[u] * lc.q[u] / frozen[u];
                delta_bar[u] = dispersion(gb, params);
                delta_slope[u] = dispersion_derivative(gb, params) * lc.q[u] / frozen[u];
            }
        }
        Ok(Self {
            lc,
            c1_ln: params.prelog_c1 / LN_2,
            alpha_prev: alpha_prev.to_vec(),
            frozen,
            delta_bar,
            delta_slope,
            shannon_only,
        })
    }
}

impl Surrogate for IiaSurrogate<'_> {
    fn n_users(&self) -> usize {
        self.lc.n_users()
    }

    fn scale(&self) -> f64 {
        self.c1_ln * LN_2
    }

    fn values(&self, alpha: &[f64], out: &mut [f64]) {
        for (u, o) in out.iter_mut().enumerate() {
            let a = self.lc.q[u] / self.frozen[u];
            let mut v = self.c1_ln * (alpha[u] * a).ln_1p();
            if !self.shannon_only {
                v -= self.delta_bar[u] + self.delta_slope[u] * (alpha[u] - self.alpha_prev[u]);
            }
            *o = v;
        }
    }

    fn weighted_gradient(&self, alpha: &[f64], weights: &[f64], grad: &mut [f64]) {
        for (u, g) in grad.iter_mut().enumerate() {
            let a = self.lc.q[u] / self.frozen[u];
            *g = weights[u] * (self.c1_ln * a / (1.0 + alpha[u] * a) - self.delta_slope[u]);
        }
    }

    fn jacobian(&self, alpha: &[f64], jac: &mut DMatrix<f64>) {
        let ones = vec![1.0; self.n_users()];
        let mut g = vec![0.0; self.n_users()];
        self.weighted_gradient(alpha, &ones, &mut g);
        jac.fill(0.0);
        jac.set_diagonal(&DVector::from_vec(g));
    }

    fn weighted_hessian(&self, alpha: &[f64], weights: &[f64], hess: &mut DMatrix<f64>) {
        hess.fill(0.0);
        for u in 0..self.n_users() {
            let a = self.lc.q[u] / self.frozen[u];
            let d = 1.0 + alpha[u] * a;
            hess[(u, u)] = -weights[u] * self.c1_ln * a * a / (d * d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::{urllc_rate, Direction};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_lc(n: usize, rng: &mut ChaCha8Rng) -> LinkCoefficients {
        let q: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.random_range(-1.0..2.0)))
            .collect();
        let e = DMatrix::from_fn(n, n, |_, _| 10f64.powf(rng.random_range(-3.0..0.0)));
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        LinkCoefficients::new(Direction::Uplink, q, e, t).unwrap()
    }

    fn rand_alpha(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(1e-4..1.0)).collect()
    }

    #[test]
    fn scalar_inequalities() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10_000 {
            let mut r = || 10f64.powf(rng.random_range(-4.0..4.0));
            let (x, y, xb, yb) = (r(), r(), r(), r());
            let lhs = (x / y).ln_1p();
            assert!(log_ratio_lower_bound(x, y, xb, yb) <= lhs + 1e-12 * lhs.abs().max(1.0));
            assert!(x <= square_upper_bound(x, xb) * (1.0 + 1e-15));
        }
        assert_eq!(square_upper_bound(3.0, 3.0), 3.0);
        assert!(square_upper_bound(3.0, 3.1) > 3.0);
    }

    #[test]
    fn rejects_nonpositive_expansion_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lc = random_lc(3, &mut rng);
        let p = UrllcParams::reference();
        assert!(IcbaSurrogate::new(&lc, &p, &[1.0, 0.0, 1.0]).is_err());
        assert!(IiaSurrogate::new(&lc, &p, &[1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn tight_at_expansion_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = UrllcParams::reference();
        for _ in 0..20 {
            let n = rng.random_range(2..12);
            let lc = random_lc(n, &mut rng);
            let a = rand_alpha(n, &mut rng);
            let truth = lc.rates(&a, &p);
            let mut v = vec![0.0; n];
            IcbaSurrogate::new(&lc, &p, &a).unwrap().values(&a, &mut v);
            for u in 0..n {
                assert!((v[u] - truth[u]).abs() <= 1e-9 * truth[u].abs().max(1.0));
            }
            IiaSurrogate::new(&lc, &p, &a).unwrap().values(&a, &mut v);
            for u in 0..n {
                assert!((v[u] - truth[u]).abs() <= 1e-9 * truth[u].abs().max(1.0));
            }
        }
    }

    #[test]
    fn icba_is_a_global_minorizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = UrllcParams::reference();
        for _ in 0..20 {
            let n = rng.random_range(2..8);
            let lc = random_lc(n, &mut rng);
            let ab = rand_alpha(n, &mut rng);
            let s = IcbaSurrogate::new(&lc, &p, &ab).unwrap();
            let mut v = vec![0.0; n];
            for _ in 0..200 {
                let a = rand_alpha(n, &mut rng);
                let truth = lc.rates(&a, &p);
                s.values(&a, &mut v);
                for u in 0..n {
                    let sh = p.prelog_c1 * lc.sinr(&a, u).ln_1p() / LN_2;
                    assert!(s.shannon_bound(&a, u) <= sh + 1e-12 * sh.abs().max(1.0));
                    assert!(s.sinr_bound(&a, u) >= lc.sinr(&a, u) * (1.0 - 1e-12));
                    assert!(v[u] <= truth[u] + 1e-9 * truth[u].abs().max(1.0));
                }
            }
        }
    }

    fn check_gradient(s: &dyn Surrogate, a: &[f64], weights: &[f64]) {
        let n = a.len();
        let mut g = vec![0.0; n];
        s.weighted_gradient(a, weights, &mut g);
        let f = |x: &[f64]| {
            let mut v = vec![0.0; n];
            s.values(x, &mut v);
            v.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>()
        };
        for i in 0..n {
            let h = 1e-6 * a[i];
            let mut xp = a.to_vec();
            let mut xm = a.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            let tol = 1e-6 * g[i].abs().max(1e-3 * s.scale());
            assert!(
                (fd - g[i]).abs() <= tol,
                "coordinate {i}: fd {fd} vs {}",
                g[i]
            );
        }
    }

    fn check_hessian(s: &dyn Surrogate, a: &[f64], weights: &[f64]) {
        let n = a.len();
        let mut h = DMatrix::zeros(n, n);
        s.weighted_hessian(a, weights, &mut h);
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        for i in 0..n {
            let step = 1e-6 * a[i];
            let mut xp = a.to_vec();
            let mut xm = a.to_vec();
            xp[i] += step;
            xm[i] -= step;
            s.weighted_gradient(&xp, weights, &mut gp);
            s.weighted_gradient(&xm, weights, &mut gm);
            for j in 0..n {
                let fd = (gp[j] - gm[j]) / (2.0 * step);
                let tol = 1e-5 * h[(j, i)].abs()
                    + 1e-6 * (h[(i, i)] * h[(j, j)]).abs().sqrt()
                    + 1e-9 * s.scale();
                assert!(
                    (fd - h[(j, i)]).abs() <= tol,
                    "entry ({j},{i}): fd {fd} vs {}",
                    h[(j, i)]
                );
            }
        }
        // concavity: the Hessian is negative semidefinite
        let eig = h.symmetric_eigen().eigenvalues;
        let big = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(eig.iter().all(|&v| v <= 1e-10 * big));
    }

    #[test]
    fn hessians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = UrllcParams::reference();
        for _ in 0..20 {
            let n = rng.random_range(2..8);
            let lc = random_lc(n, &mut rng);
            let ab = rand_alpha(n, &mut rng);
            let a = rand_alpha(n, &mut rng);
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
            check_hessian(&IcbaSurrogate::new(&lc, &p, &ab).unwrap(), &a, &w);
            check_hessian(&IiaSurrogate::new(&lc, &p, &ab).unwrap(), &a, &w);
        }
    }

    #[test]
    fn jacobian_rows_are_user_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = UrllcParams::reference();
        let lc = random_lc(4, &mut rng);
        let ab = rand_alpha(4, &mut rng);
        let a = rand_alpha(4, &mut rng);
        let icba = IcbaSurrogate::new(&lc, &p, &ab).unwrap();
        let iia = IiaSurrogate::new(&lc, &p, &ab).unwrap();
        for s in [&icba as &dyn Surrogate, &iia] {
            let mut jac = DMatrix::zeros(4, 4);
            s.jacobian(&a, &mut jac);
            for u in 0..4 {
                let mut w = vec![0.0; 4];
                w[u] = 1.0;
                let mut g = vec![0.0; 4];
                s.weighted_gradient(&a, &w, &mut g);
                for i in 0..4 {
                    assert!(
                        (jac[(u, i)] - g[i]).abs() <= 1e-9 * g[i].abs().max(1.0),
                        "({u},{i})"
                    );
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = UrllcParams::reference();
        for _ in 0..20 {
            let n = rng.random_range(2..8);
            let lc = random_lc(n, &mut rng);
            let ab = rand_alpha(n, &mut rng);
            let a = rand_alpha(n, &mut rng);
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
            check_gradient(&IcbaSurrogate::new(&lc, &p, &ab).unwrap(), &a, &w);
            check_gradient(&IiaSurrogate::new(&lc, &p, &ab).unwrap(), &a, &w);
            check_gradient(&IiaSurrogate::shannon_only(&lc, &p, &ab).unwrap(), &a, &w);
        }
    }

    #[test]
    fn iia_concave_and_separable() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = UrllcParams::reference();
        let lc = random_lc(5, &mut rng);
        let ab = rand_alpha(5, &mut rng);
        let s = IiaSurrogate::new(&lc, &p, &ab).unwrap();
        let mut v0 = vec![0.0; 5];
        let mut v1 = vec![0.0; 5];
        let mut v2 = vec![0.0; 5];
        for _ in 0..500 {
            let a = rand_alpha(5, &mut rng);
            let h = rng.random_range(1e-5..1e-2);
            for u in 0..5 {
                let mut ap = a.clone();
                let mut am = a.clone();
                ap[u] += h;
                am[u] -= h.min(a[u] * 0.5);
                let hm = a[u] - am[u];
                s.values(&a, &mut v0);
                s.values(&ap, &mut v1);
                s.values(&am, &mut v2);
                // concavity: the chord lies below the function
                let interp = (v1[u] * hm + v2[u] * h) / (h + hm);
                assert!(interp <= v0[u] + 1e-9 * v0[u].abs().max(1.0));
                for o in (0..5).filter(|&o| o != u) {
                    assert_eq!(v0[o], v1[o]);
                }
            }
        }
    }

    #[test]
    fn zero_gain_user_is_constant() {
        let lc = LinkCoefficients::new(
            Direction::Downlink,
            vec![0.0, 1.0],
            DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.2, 0.0]),
            vec![1.0, 1.0],
        )
        .unwrap();
        let p = UrllcParams::reference();
        let s = IcbaSurrogate::new(&lc, &p, &[0.5, 0.5]).unwrap();
        let mut v = vec![0.0; 2];
        s.values(&[0.9, 0.1], &mut v);
        assert_eq!(v[0], 0.0);
        assert_eq!(urllc_rate(lc.sinr(&[0.9, 0.1], 0), &p), 0.0);
    }
}
