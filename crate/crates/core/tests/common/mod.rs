#![allow(dead_code)]

use cellfree_urllc::beamforming::{build_beamformers, BeamformerKind};
use cellfree_urllc::harness::{feasible_set, prepare_network, RunConfig};
use cellfree_urllc::rate::{link_coefficients, Direction, LinkCoefficients, UrllcParams};
use cellfree_urllc::scenario::NetworkKind;
use cellfree_urllc::sco::FeasibleSet;

pub struct Instance {
    pub lc: LinkCoefficients,
    pub params: UrllcParams,
    pub feas: FeasibleSet,
}

/// Cell-free network with `gu + uav` users and `aps` APs of `antennas` each,
/// every user served by every AP, maximum-ratio beamforming.
pub fn tiny_config(gu: usize, uav: usize, aps: usize, antennas: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("gu.count", gu),
        ("uav.count", uav),
        ("ap.count", aps),
        ("ap.antennas", antennas),
        ("ap.serving", aps),
    ] {
        cfg.set(k, &v.to_string()).unwrap();
    }
    cfg
}

pub fn tiny_instance(cfg: &RunConfig, direction: Direction, seed: u64) -> Instance {
    let net = prepare_network(cfg, NetworkKind::CellFree, seed).unwrap();
    let beams =
        build_beamformers(&net.scenario, &net.state, BeamformerKind::MaximumRatio, 0).unwrap();
    let lc = link_coefficients(
        direction,
        &net.state,
        &beams,
        &net.scenario,
        cfg.noise_power_w(),
    )
    .unwrap();
    let feas = feasible_set(cfg, &net.scenario, direction).unwrap();
    Instance {
        lc,
        params: cfg.urllc.params().unwrap(),
        feas,
    }
}

/// Maximum of `f` over the `k × k` grid `[0, cap0] × [0, cap1]`.
pub fn grid_max_2d(caps: [f64; 2], k: usize, mut f: impl FnMut(&[f64]) -> f64) -> (f64, [f64; 2]) {
    let mut best = (f64::NEG_INFINITY, [0.0; 2]);
    let mut a = [0.0; 2];
    for i in 0..k {
        a[0] = caps[0] * i as f64 / (k - 1) as f64;
        for j in 0..k {
            a[1] = caps[1] * j as f64 / (k - 1) as f64;
            let v = f(&a);
            if v > best.0 {
                best = (v, a);
            }
        }
    }
    best
}
