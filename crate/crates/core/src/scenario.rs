//! Service-area geometry, node placement and user-centric association.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, STREAM_PLACEMENT};

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    /// Distributed APs, each user served by its strongest subset.
    CellFree,
    /// A few large base stations on a regular grid.
    Colocated,
}

impl NetworkKind {
    pub fn short_name(self) -> &'static str {
        match self {
            NetworkKind::CellFree => "cf",
            NetworkKind::Colocated => "co",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UserKind {
    #[serde(rename = "GU")]
    Ground,
    #[serde(rename = "UAV")]
    Uav,
}

impl UserKind {
    pub fn label(self) -> &'static str {
        match self {
            UserKind::Ground => "GU",
            UserKind::Uav => "UAV",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaConfig {
    pub side_length: f64,
    pub wrap_around: bool,
    pub ap_count: usize,
    pub ap_height: f64,
    pub antennas_per_ap: usize,
    pub gu_count: usize,
    pub gu_height: f64,
    pub uav_count: usize,
    pub uav_height_min: f64,
    pub uav_height_max: f64,
    pub serving_ap_count: usize,
    pub network_kind: NetworkKind,
    pub colocated_bs_count: usize,
    pub colocated_antennas_per_bs: usize,
    /// Number of BSs serving each user in the colocated layout.
    pub colocated_serving_count: usize,
}

impl Default for AreaConfig {
    /// 1 km² wrapped area, 100 APs with 8 antennas at 10 m, 48 GUs at 1.65 m,
    /// 12 UAVs between 22.5 m and 300 m, 5 serving APs per user. The
    /// colocated alternative is 4 BSs with 200 antennas each.
    fn default() -> Self {
        Self {
            side_length: 1000.0,
            wrap_around: true,
            ap_count: 100,
            ap_height: 10.0,
            antennas_per_ap: 8,
            gu_count: 48,
            gu_height: 1.65,
            uav_count: 12,
            uav_height_min: 22.5,
            uav_height_max: 300.0,
            serving_ap_count: 5,
            network_kind: NetworkKind::CellFree,
            colocated_bs_count: 4,
            colocated_antennas_per_bs: 200,
            colocated_serving_count: 1,
        }
    }
}

impl AreaConfig {
    pub fn n_users(&self) -> usize {
        self.gu_count + self.uav_count
    }

    /// Number of transmit/receive sites (APs or BSs) for the active network kind.
    pub fn site_count(&self) -> usize {
        match self.network_kind {
            NetworkKind::CellFree => self.ap_count,
            NetworkKind::Colocated => self.colocated_bs_count,
        }
    }

    pub fn antennas(&self) -> usize {
        match self.network_kind {
            NetworkKind::CellFree => self.antennas_per_ap,
            NetworkKind::Colocated => self.colocated_antennas_per_bs,
        }
    }

    pub fn serving_count(&self) -> usize {
        match self.network_kind {
            NetworkKind::CellFree => self.serving_ap_count,
            NetworkKind::Colocated => self.colocated_serving_count,
        }
    }

    pub fn with_network(&self, kind: NetworkKind) -> Self {
        Self {
            network_kind: kind,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.side_length > 0.0 && self.side_length.is_finite()) {
            return Err(Error::invalid_config("side_length must be positive"));
        }
        if self.n_users() == 0 {
            return Err(Error::invalid_config("at least one user is required"));
        }
        if self.site_count() == 0 || self.antennas() == 0 {
            return Err(Error::invalid_config(
                "site and antenna counts must be at least 1",
            ));
        }
        if self.serving_count() == 0 || self.serving_count() > self.site_count() {
            return Err(Error::invalid_config(format!(
                "serving count {} must be in 1..={}",
                self.serving_count(),
                self.site_count()
            )));
        }
        if self.uav_height_min > self.uav_height_max {
            return Err(Error::invalid_config("uav_height_min > uav_height_max"));
        }
        if self.network_kind == NetworkKind::Colocated {
            let k = grid_side(self.colocated_bs_count);
            if k.is_none() {
                return Err(Error::invalid_config(format!(
                    "colocated_bs_count {} is not a perfect square",
                    self.colocated_bs_count
                )));
            }
        }
        Ok(())
    }
}

fn grid_side(n: usize) -> Option<usize> {
    let k = (n as f64).sqrt().round() as usize;
    (k * k == n && n > 0).then_some(k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    /// Per user: serving site indices, strongest first.
    pub association: Vec<Vec<usize>>,
    /// Per site: served user indices, ascending.
    pub served_by: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub network_kind: NetworkKind,
    pub side_length: f64,
    pub wrap_around: bool,
    pub antennas: usize,
    pub ap_positions: Vec<Point3>,
    pub user_positions: Vec<Point3>,
    pub user_kind: Vec<UserKind>,
    pub association: Vec<Vec<usize>>,
    pub served_by: Vec<Vec<usize>>,
}

impl Scenario {
    pub fn n_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn n_sites(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn distance(&self, user: usize, site: usize) -> f64 {
        let (p, q) = (self.user_positions[user], self.ap_positions[site]);
        if self.wrap_around {
            wrap_distance(p, q, self.side_length)
        } else {
            euclid(p, q)
        }
    }

    /// Horizontal displacement from `site` to `user`, wrapped to the nearest image.
    pub fn horizontal_offset(&self, user: usize, site: usize) -> (f64, f64) {
        let (p, q) = (self.user_positions[user], self.ap_positions[site]);
        let mut dx = p[0] - q[0];
        let mut dy = p[1] - q[1];
        if self.wrap_around {
            dx = wrap_signed(dx, self.side_length);
            dy = wrap_signed(dy, self.side_length);
        }
        (dx, dy)
    }

    pub fn set_association(&mut self, assoc: Association) {
        self.association = assoc.association;
        self.served_by = assoc.served_by;
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Place APs (or BSs) and users. The association lists are left empty; fill
/// them with [`associate`] once large-scale fading is known.
pub fn generate_scenario(cfg: &AreaConfig, seed: u64) -> Result<Scenario> {
    cfg.validate()?;
    let side = cfg.side_length;
    // separate streams keep user drops identical across network kinds
    let mut rng = rng::rng_from(seed, &[STREAM_PLACEMENT, 0]);

    let ap_positions: Vec<Point3> = match cfg.network_kind {
        NetworkKind::CellFree => (0..cfg.ap_count)
            .map(|_| {
                [
                    rng.random::<f64>() * side,
                    rng.random::<f64>() * side,
                    cfg.ap_height,
                ]
            })
            .collect(),
        NetworkKind::Colocated => {
            // validated above
            let k = grid_side(cfg.colocated_bs_count).unwrap_or(1);
            let cell = side / k as f64;
            (0..k)
                .flat_map(|row| {
                    (0..k).map(move |col| {
                        [
                            (col as f64 + 0.5) * cell,
                            (row as f64 + 0.5) * cell,
                            cfg.ap_height,
                        ]
                    })
                })
                .collect()
        }
    };

    let mut rng = rng::rng_from(seed, &[STREAM_PLACEMENT, 1]);
    let mut user_positions = Vec::with_capacity(cfg.n_users());
    let mut user_kind = Vec::with_capacity(cfg.n_users());
    for _ in 0..cfg.gu_count {
        user_positions.push([
            rng.random::<f64>() * side,
            rng.random::<f64>() * side,
            cfg.gu_height,
        ]);
        user_kind.push(UserKind::Ground);
    }
    for _ in 0..cfg.uav_count {
        let x = rng.random::<f64>() * side;
        let y = rng.random::<f64>() * side;
        let h =
            cfg.uav_height_min + rng.random::<f64>() * (cfg.uav_height_max - cfg.uav_height_min);
        user_positions.push([x, y, h]);
        user_kind.push(UserKind::Uav);
    }

    Ok(Scenario {
        network_kind: cfg.network_kind,
        side_length: side,
        wrap_around: cfg.wrap_around,
        antennas: cfg.antennas(),
        ap_positions,
        user_positions,
        user_kind,
        association: Vec::new(),
        served_by: Vec::new(),
    })
}

fn wrap_signed(d: f64, side: f64) -> f64 {
    let d = d.rem_euclid(side);
    if d > side / 2.0 {
        d - side
    } else {
        d
    }
}

fn euclid(p: Point3, q: Point3) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// 3-D distance on the horizontally wrapped square; heights are not wrapped.
pub fn wrap_distance(p: Point3, q: Point3, side: f64) -> f64 {
    let axis = |a: f64, b: f64| {
        let d = (a - b).abs();
        d.min(side - d)
    };
    let dx = axis(p[0], q[0]);
    let dy = axis(p[1], q[1]);
    let dz = p[2] - q[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// User-centric association: every user keeps its `k` strongest sites by
/// large-scale fading (rows are users, columns sites). Ties go to the lower
/// site index.
pub fn associate(beta_db: &DMatrix<f64>, k: usize) -> Result<Association> {
    let (n_users, n_sites) = beta_db.shape();
    if k > n_sites {
        return Err(Error::invalid_arg(format!(
            "cannot associate {k} sites out of {n_sites}"
        )));
    }
    if beta_db.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid_arg("large-scale fading must be finite"));
    }
    let mut association = Vec::with_capacity(n_users);
    let mut served_by = vec![Vec::new(); n_sites];
    for u in 0..n_users {
        let mut idx: Vec<usize> = (0..n_sites).collect();
        idx.sort_by(|&a, &b| beta_db[(u, b)].total_cmp(&beta_db[(u, a)]).then(a.cmp(&b)));
        idx.truncate(k);
        for &a in &idx {
            served_by[a].push(u);
        }
        association.push(idx);
    }
    Ok(Association {
        association,
        served_by,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn default_layout_counts() {
        let cfg = AreaConfig::default();
        let s = generate_scenario(&cfg, 1).unwrap();
        assert_eq!(s.ap_positions.len(), 100);
        assert_eq!(s.user_positions.len(), 60);
        assert_eq!(
            s.user_kind.iter().filter(|k| **k == UserKind::Uav).count(),
            12
        );
        for p in &s.ap_positions {
            assert!(p[0] >= 0.0 && p[0] <= 1000.0 && p[1] >= 0.0 && p[1] <= 1000.0);
            assert_eq!(p[2], 10.0);
        }
        for (p, k) in s.user_positions.iter().zip(&s.user_kind) {
            match k {
                UserKind::Ground => assert_eq!(p[2], 1.65),
                UserKind::Uav => assert!(p[2] >= 22.5 && p[2] <= 300.0),
            }
        }
    }

    #[test]
    fn degenerate_counts() {
        let cfg = AreaConfig {
            ap_count: 1,
            gu_count: 1,
            uav_count: 0,
            serving_ap_count: 1,
            ..Default::default()
        };
        let s = generate_scenario(&cfg, 3).unwrap();
        assert_eq!(s.n_sites(), 1);
        assert_eq!(s.n_users(), 1);
        let p = s.user_positions[0];
        assert!((0.0..=1000.0).contains(&p[0]) && (0.0..=1000.0).contains(&p[1]));
    }

    #[test]
    fn same_seed_same_scenario() {
        let cfg = AreaConfig::default();
        let a = generate_scenario(&cfg, 42).unwrap();
        let b = generate_scenario(&cfg, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario(&cfg, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn colocated_grid() {
        let cfg = AreaConfig::default().with_network(NetworkKind::Colocated);
        let s = generate_scenario(&cfg, 0).unwrap();
        assert_eq!(s.antennas, 200);
        let mut xy: Vec<(f64, f64)> = s.ap_positions.iter().map(|p| (p[0], p[1])).collect();
        xy.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            xy,
            vec![
                (250.0, 250.0),
                (250.0, 750.0),
                (750.0, 250.0),
                (750.0, 750.0)
            ]
        );

        let bad = AreaConfig {
            colocated_bs_count: 3,
            ..cfg
        };
        assert!(generate_scenario(&bad, 0).is_err());
    }

    #[test]
    fn wrap_distance_examples() {
        assert!((wrap_distance([0.0, 0.0, 0.0], [990.0, 0.0, 0.0], 1000.0) - 10.0).abs() < 1e-12);
        assert_eq!(wrap_distance([3.0, 4.0, 5.0], [3.0, 4.0, 5.0], 1000.0), 0.0);
        let d = wrap_distance([0.0, 0.0, 10.0], [990.0, 0.0, 1.65], 1000.0);
        let expect = (10.0f64.powi(2) + 8.35f64.powi(2)).sqrt();
        assert!((d - expect).abs() < 1e-12);
        assert!((d - 13.03).abs() < 0.005);
    }

    #[test]
    fn wrap_distance_metric_on_random_triples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut pt = || {
            [
                rng.random::<f64>() * 1000.0,
                rng.random::<f64>() * 1000.0,
                rng.random::<f64>() * 300.0,
            ]
        };
        for _ in 0..1000 {
            let (p, q, r) = (pt(), pt(), pt());
            let pq = wrap_distance(p, q, 1000.0);
            assert_eq!(pq, wrap_distance(q, p, 1000.0));
            assert!(pq > 0.0);
            assert!(pq <= wrap_distance(p, r, 1000.0) + wrap_distance(r, q, 1000.0) + 1e-9);
        }
    }

    #[test]
    fn associate_examples() {
        let beta = DMatrix::from_row_slice(1, 3, &[-80.0, -90.0, -70.0]);
        let a = associate(&beta, 2).unwrap();
        assert_eq!(a.association[0], vec![2, 0]);
        assert_eq!(a.served_by, vec![vec![0], vec![], vec![0]]);

        let all = associate(&beta, 3).unwrap();
        let mut p = all.association[0].clone();
        p.sort();
        assert_eq!(p, vec![0, 1, 2]);

        assert!(associate(&beta, 4).is_err());
    }

    #[test]
    fn associate_ties_prefer_lower_index() {
        let beta = DMatrix::from_row_slice(1, 4, &[-70.0, -60.0, -70.0, -60.0]);
        assert_eq!(associate(&beta, 3).unwrap().association[0], vec![1, 3, 0]);
    }

    #[test]
    fn associate_matches_sort_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let beta = DMatrix::from_fn(6, 4, |_, _| -60.0 - 60.0 * rng.random::<f64>());
        let got = associate(&beta, 3).unwrap();
        for u in 0..6 {
            // oracle: repeatedly pick the maximum among the remaining sites
            let mut remaining: Vec<usize> = (0..4).collect();
            let mut expect = Vec::new();
            for _ in 0..3 {
                let (pos, _) =
                    remaining
                        .iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |best, (i, &a)| {
                            if beta[(u, a)] > best.1 {
                                (i, beta[(u, a)])
                            } else {
                                best
                            }
                        });
                expect.push(remaining.remove(pos));
            }
            assert_eq!(got.association[u], expect);
        }
    }

    #[test]
    fn users_identical_across_network_kinds() {
        let cfg = AreaConfig::default();
        let cf = generate_scenario(&cfg, 9).unwrap();
        let co = generate_scenario(&cfg.with_network(NetworkKind::Colocated), 9).unwrap();
        assert_eq!(cf.user_positions, co.user_positions);
        assert_eq!(co.ap_positions.len(), 4);
    }

    #[test]
    fn scenario_json_round_trip() {
        let cfg = AreaConfig {
            ap_count: 5,
            gu_count: 3,
            uav_count: 2,
            serving_ap_count: 2,
            ..Default::default()
        };
        let mut s = generate_scenario(&cfg, 11).unwrap();
        let beta = DMatrix::from_fn(5, 5, |u, a| -(u as f64 * 7.0 + a as f64 * 3.0) % 13.0);
        s.set_association(associate(&beta, 2).unwrap());
        let back = Scenario::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
    }

    proptest! {
        #[test]
        fn association_is_bidirectional_and_shift_invariant(
            vals in proptest::collection::vec(-150.0f64..-40.0, 24),
            k in 1usize..=4,
            shift in -50.0f64..50.0,
        ) {
            let beta = DMatrix::from_row_slice(6, 4, &vals);
            let a = associate(&beta, k).unwrap();
            for u in 0..6 {
                prop_assert_eq!(a.association[u].len(), k);
                for s in 0..4 {
                    prop_assert_eq!(a.association[u].contains(&s), a.served_by[s].contains(&u));
                }
            }
            let shifted = beta.map(|b| b + shift);
            let b = associate(&shifted, k).unwrap();
            // adding a constant may perturb exact ties by rounding; compare sorted values
            for u in 0..6 {
                let va: Vec<f64> = a.association[u].iter().map(|&s| beta[(u, s)]).collect();
                let vb: Vec<f64> = b.association[u].iter().map(|&s| beta[(u, s)]).collect();
                prop_assert_eq!(va, vb);
            }
        }
    }
}
