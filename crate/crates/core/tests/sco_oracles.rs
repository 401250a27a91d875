mod common;

use cellfree_urllc::rate::{shannon_rate, Direction, LinkCoefficients, UrllcParams};
use cellfree_urllc::sco::{
    initialize_alpha, run_sco, solve_subproblem, FeasibleSet, IcbaSurrogate, Objective,
    ProblemSpec, Scheme, SolverOptions, Surrogate,
};
use common::{grid_max_2d, tiny_config, tiny_instance};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn icba_subproblem_matches_grid_optimum() {
    let cfg = tiny_config(1, 1, 2, 2);
    for seed in 0..5 {
        let inst = tiny_instance(&cfg, Direction::Uplink, seed);
        let caps = inst.feas.user_caps().to_vec();
        let prev = [0.3 * caps[0], 0.7 * caps[1]];
        let s = IcbaSurrogate::new(&inst.lc, &inst.params, &prev).unwrap();
        let out = solve_subproblem(
            &s,
            &inst.feas,
            Objective::SumRate,
            &prev,
            &inst.feas.lower_bounds(),
            &SolverOptions::default(),
        )
        .unwrap();
        let (grid, at) = grid_max_2d([caps[0], caps[1]], 2000, |a| s.sum_value(a));
        let rel = (out.value - grid) / grid.abs();
        assert!(
            rel.abs() <= 1e-4,
            "seed {seed}: solver {} at {:?}, grid {grid} at {at:?}",
            out.value,
            out.alpha
        );
    }
}

/// Frozen interference ignores the harm a user's power does to others, so the
/// initialization only tracks the Shannon optimum when interference is weak.
#[test]
fn initialization_near_shannon_grid_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = UrllcParams::reference();
    let feas = FeasibleSet::downlink(vec![0.2, 0.2], vec![vec![0, 1], vec![1, 2]], 3).unwrap();
    let caps = feas.user_caps().to_vec();
    let k = 200;
    let trials = 20;
    let mut hits = 0;
    for _ in 0..trials {
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(10.0..1000.0)).collect();
        let e = DMatrix::from_fn(3, 3, |_, _| rng.random_range(0.0..1e-2));
        let lc = LinkCoefficients::new(Direction::Downlink, q, e, vec![1.0; 3]).unwrap();
        let shannon = |a: &[f64]| -> f64 {
            lc.sinr_all(a)
                .iter()
                .map(|&g| shannon_rate(g, &params))
                .sum()
        };
        let init = initialize_alpha(&lc, &params, &feas).unwrap();
        let mut best = f64::NEG_INFINITY;
        let mut a = [0.0; 3];
        for i in 0..k {
            a[0] = caps[0] * i as f64 / (k - 1) as f64;
            for j in 0..k {
                a[1] = caps[1] * j as f64 / (k - 1) as f64;
                for l in 0..k {
                    a[2] = caps[2] * l as f64 / (k - 1) as f64;
                    if feas.max_violation(&a) <= 0.0 {
                        best = best.max(shannon(&a));
                    }
                }
            }
        }
        if shannon(&init) >= 0.98 * best {
            hits += 1;
        }
    }
    assert!(
        hits * 10 >= trials * 9,
        "{hits}/{trials} within 2% of the grid optimum"
    );
}

#[test]
fn downlink_cap_binds_on_real_instance() {
    let cfg = tiny_config(2, 1, 2, 2);
    let inst = tiny_instance(&cfg, Direction::Downlink, 7);
    for scheme in [Scheme::Iia, Scheme::Icba] {
        let spec = ProblemSpec {
            objective: Objective::SumRate,
            direction: Direction::Downlink,
            scheme,
            lc: inst.lc.clone(),
            params: inst.params.clone(),
            feas: inst.feas.clone(),
            tol_delta: 1e-5,
            max_iters: 100,
        };
        let r = run_sco(&spec).unwrap();
        assert!(inst.feas.max_violation(&r.alpha_final) <= 0.0);
        let slack = inst
            .feas
            .serving_map
            .iter()
            .zip(&inst.feas.dl_caps)
            .map(|(users, cap)| cap - users.iter().map(|&u| r.alpha_final[u]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert!(
            slack.abs() <= 1e-8,
            "{scheme:?}: smallest cap slack {slack}"
        );
    }
}
