//! Run configuration and the flat `section.key` settings namespace shared by
//! config files and CLI overrides.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beamforming::BeamformerKind;
use crate::channel::PropagationParams;
use crate::error::{Error, Result};
use crate::rate::{Direction, UrllcParams};
use crate::scenario::{AreaConfig, NetworkKind};
use crate::sco::{Objective, Scheme};

/// Beamformer as named on the command line; `mrt` and `mrc` are the downlink
/// and uplink names of the same maximum-ratio rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamformerChoice {
    Pzf,
    Mr,
    Zf,
}

impl BeamformerChoice {
    pub fn kind(self) -> BeamformerKind {
        match self {
            BeamformerChoice::Pzf => BeamformerKind::Pzf,
            BeamformerChoice::Mr => BeamformerKind::MaximumRatio,
            BeamformerChoice::Zf => BeamformerKind::ZfColocated,
        }
    }

    pub fn short_name(self, direction: Direction) -> &'static str {
        match (self, direction) {
            (BeamformerChoice::Pzf, _) => "pzf",
            (BeamformerChoice::Zf, _) => "zf",
            (BeamformerChoice::Mr, Direction::Downlink) => "mrt",
            (BeamformerChoice::Mr, Direction::Uplink) => "mrc",
        }
    }
}

impl FromStr for BeamformerChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pzf" => Ok(Self::Pzf),
            "mrt" | "mrc" | "mr" => Ok(Self::Mr),
            "zf" => Ok(Self::Zf),
            other => Err(Error::invalid_config(format!(
                "unknown beamformer '{other}'"
            ))),
        }
    }
}

fn parse_network(s: &str) -> Result<NetworkKind> {
    match s.trim() {
        "cf" => Ok(NetworkKind::CellFree),
        "co" => Ok(NetworkKind::Colocated),
        other => Err(Error::invalid_config(format!("unknown network '{other}'"))),
    }
}

fn parse_scheme(s: &str) -> Result<Scheme> {
    match s.trim() {
        "iia" => Ok(Scheme::Iia),
        "icba" => Ok(Scheme::Icba),
        other => Err(Error::invalid_config(format!("unknown scheme '{other}'"))),
    }
}

fn parse_objective(s: &str) -> Result<Objective> {
    match s.trim() {
        "sum" => Ok(Objective::SumRate),
        "min" => Ok(Objective::MinRate),
        other => Err(Error::invalid_config(format!(
            "unknown objective '{other}'"
        ))),
    }
}

fn parse_direction(s: &str) -> Result<Direction> {
    match s.trim() {
        "ul" => Ok(Direction::Uplink),
        "dl" => Ok(Direction::Downlink),
        other => Err(Error::invalid_config(format!(
            "unknown direction '{other}'"
        ))),
    }
}

/// One (network, beamformer, scheme, objective, direction) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SweepTuple {
    pub network: NetworkKind,
    pub beamformer: BeamformerChoice,
    pub scheme: Scheme,
    pub objective: Objective,
    pub direction: Direction,
}

impl SweepTuple {
    pub fn is_supported(&self) -> bool {
        self.beamformer.kind().supported_on(self.network)
    }

    /// e.g. `cf-pzf-iia-sum-dl`
    pub fn name(&self) -> String {
        format!(
            "{}-{}-{}-{}-{}",
            self.network.short_name(),
            self.beamformer.short_name(self.direction),
            self.scheme.short_name(),
            self.objective.short_name(),
            self.direction.short_name()
        )
    }

    pub fn parse(name: &str) -> Result<Self> {
        let parts: Vec<&str> = name.split('-').collect();
        if parts.len() != 5 {
            return Err(Error::invalid_config(format!(
                "malformed tuple name '{name}'"
            )));
        }
        let t = Self {
            network: parse_network(parts[0])?,
            beamformer: parts[1].parse()?,
            scheme: parse_scheme(parts[2])?,
            objective: parse_objective(parts[3])?,
            direction: parse_direction(parts[4])?,
        };
        if !t.is_supported() {
            return Err(Error::invalid_config(format!(
                "unsupported combination '{name}'"
            )));
        }
        Ok(t)
    }
}

impl fmt::Display for SweepTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Axes of the sweep; the sweep is their Cartesian product restricted to
/// supported network/beamformer pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub networks: Vec<NetworkKind>,
    pub beamformers: Vec<BeamformerChoice>,
    pub schemes: Vec<Scheme>,
    pub objectives: Vec<Objective>,
    pub directions: Vec<Direction>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            networks: vec![NetworkKind::CellFree, NetworkKind::Colocated],
            beamformers: vec![
                BeamformerChoice::Pzf,
                BeamformerChoice::Mr,
                BeamformerChoice::Zf,
            ],
            schemes: vec![Scheme::Iia, Scheme::Icba],
            objectives: vec![Objective::SumRate, Objective::MinRate],
            directions: vec![Direction::Uplink, Direction::Downlink],
        }
    }
}

impl SweepAxes {
    pub fn tuples(&self) -> Vec<SweepTuple> {
        let mut out = Vec::new();
        for &network in &self.networks {
            for &beamformer in &self.beamformers {
                for &scheme in &self.schemes {
                    for &objective in &self.objectives {
                        for &direction in &self.directions {
                            let t = SweepTuple {
                                network,
                                beamformer,
                                scheme,
                                objective,
                                direction,
                            };
                            if t.is_supported() && !out.contains(&t) {
                                out.push(t);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn parse_list<T>(value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(f)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::invalid_config("empty list"));
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrllcInputs {
    pub bandwidth_hz: f64,
    pub coherence_len: usize,
    pub pilot_len: usize,
    pub tx_duration_s: f64,
    pub block_error_prob: f64,
}

impl Default for UrllcInputs {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            coherence_len: 200,
            pilot_len: 32,
            tx_duration_s: 5e-5,
            block_error_prob: 1e-5,
        }
    }
}

impl UrllcInputs {
    pub fn params(&self) -> Result<UrllcParams> {
        UrllcParams::new(
            self.bandwidth_hz,
            self.coherence_len,
            self.pilot_len,
            self.tx_duration_s,
            self.block_error_prob,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub n0_dbm_per_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            n0_dbm_per_hz: -174.0,
            noise_figure_db: 9.0,
        }
    }
}

impl NoiseConfig {
    /// `N0 + NF + 10·log10(B)` dBm, in watts.
    pub fn noise_power_w(&self, bandwidth_hz: f64) -> f64 {
        let dbm = self.n0_dbm_per_hz + self.noise_figure_db + 10.0 * bandwidth_hz.log10();
        10f64.powf((dbm - 30.0) / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    /// Uplink cap per user (η_u).
    pub user_max_w: f64,
    /// Downlink cap per cell-free AP (η_a).
    pub ap_max_w: f64,
    /// Downlink cap per colocated BS.
    pub bs_max_w: f64,
    pub pilot_w: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            user_max_w: 0.1,
            ap_max_w: 0.2,
            bs_max_w: 5.0,
            pilot_w: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub area: AreaConfig,
    pub propagation: PropagationParams,
    pub urllc: UrllcInputs,
    pub noise: NoiseConfig,
    pub powers: PowerConfig,
    pub pzf_n_interferers: usize,
    pub scenarios: usize,
    pub seed: u64,
    pub sco_delta: f64,
    pub sco_max_iters: usize,
    pub sweep: SweepAxes,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            area: AreaConfig::default(),
            propagation: PropagationParams::default(),
            urllc: UrllcInputs::default(),
            noise: NoiseConfig::default(),
            powers: PowerConfig::default(),
            pzf_n_interferers: 5,
            scenarios: 250,
            seed: 1,
            sco_delta: 1e-5,
            sco_max_iters: 100,
            sweep: SweepAxes::default(),
        }
    }
}

/// Every key accepted by [`RunConfig::set`].
pub const CONFIG_KEYS: &[&str] = &[
    "area.side_m",
    "area.wrap_around",
    "ap.count",
    "ap.height_m",
    "ap.antennas",
    "ap.serving",
    "gu.count",
    "gu.height_m",
    "gu.shadow_sigma_db",
    "gu.shadow_decorrelation_m",
    "uav.count",
    "uav.height_min_m",
    "uav.height_max_m",
    "uav.k_los_db",
    "uav.shadow_sigma_db",
    "uav.los_exponent",
    "uav.nlos_exponent",
    "co.bs_count",
    "co.antennas",
    "co.serving",
    "channel.carrier_ghz",
    "urllc.B_hz",
    "urllc.tau_c",
    "urllc.tau_p",
    "urllc.T_s",
    "urllc.eps",
    "noise.n0_dbm_hz",
    "noise.figure_db",
    "power.user_w",
    "power.ap_w",
    "power.bs_w",
    "power.pilot_w",
    "pzf.n_interferers",
    "sco.delta",
    "sco.max_iters",
    "run.scenarios",
    "run.seed",
    "sweep.network",
    "sweep.beamformer",
    "sweep.scheme",
    "sweep.objective",
    "sweep.direction",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid_config(format!("{key}: cannot parse '{value}'")))
}

impl RunConfig {
    /// Reads a TOML file; nested tables and dotted keys are flattened to
    /// `section.key` and applied on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_toml(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse()?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);
        for (k, v) in flat {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let a = &mut self.area;
        let uav = &mut self.propagation.uav;
        match key {
            "area.side_m" => a.side_length = num(key, value)?,
            "area.wrap_around" => a.wrap_around = num(key, value)?,
            "ap.count" => a.ap_count = num(key, value)?,
            "ap.height_m" => a.ap_height = num(key, value)?,
            "ap.antennas" => a.antennas_per_ap = num(key, value)?,
            "ap.serving" => a.serving_ap_count = num(key, value)?,
            "gu.count" => a.gu_count = num(key, value)?,
            "gu.height_m" => a.gu_height = num(key, value)?,
            "gu.shadow_sigma_db" => self.propagation.gu_shadow_sigma_db = num(key, value)?,
            "gu.shadow_decorrelation_m" => {
                self.propagation.gu_shadow_decorrelation_m = num(key, value)?
            }
            "uav.count" => a.uav_count = num(key, value)?,
            "uav.height_min_m" => a.uav_height_min = num(key, value)?,
            "uav.height_max_m" => a.uav_height_max = num(key, value)?,
            "uav.k_los_db" => uav.k_los_db = num(key, value)?,
            "uav.shadow_sigma_db" => uav.shadow_sigma_db = num(key, value)?,
            "uav.los_exponent" => uav.los_exponent = num(key, value)?,
            "uav.nlos_exponent" => uav.nlos_exponent = num(key, value)?,
            "co.bs_count" => a.colocated_bs_count = num(key, value)?,
            "co.antennas" => a.colocated_antennas_per_bs = num(key, value)?,
            "co.serving" => a.colocated_serving_count = num(key, value)?,
            "channel.carrier_ghz" => self.propagation.carrier_ghz = num(key, value)?,
            "urllc.B_hz" => self.urllc.bandwidth_hz = num(key, value)?,
            "urllc.tau_c" => self.urllc.coherence_len = num(key, value)?,
            "urllc.tau_p" => self.urllc.pilot_len = num(key, value)?,
            "urllc.T_s" => self.urllc.tx_duration_s = num(key, value)?,
            "urllc.eps" => self.urllc.block_error_prob = num(key, value)?,
            "noise.n0_dbm_hz" => self.noise.n0_dbm_per_hz = num(key, value)?,
            "noise.figure_db" => self.noise.noise_figure_db = num(key, value)?,
            "power.user_w" => self.powers.user_max_w = num(key, value)?,
            "power.ap_w" => self.powers.ap_max_w = num(key, value)?,
            "power.bs_w" => self.powers.bs_max_w = num(key, value)?,
            "power.pilot_w" => self.powers.pilot_w = num(key, value)?,
            "pzf.n_interferers" => self.pzf_n_interferers = num(key, value)?,
            "sco.delta" => self.sco_delta = num(key, value)?,
            "sco.max_iters" => self.sco_max_iters = num(key, value)?,
            "run.scenarios" => self.scenarios = num(key, value)?,
            "run.seed" => self.seed = num(key, value)?,
            "sweep.network" => self.sweep.networks = parse_list(value, parse_network)?,
            "sweep.beamformer" => self.sweep.beamformers = parse_list(value, str::parse)?,
            "sweep.scheme" => self.sweep.schemes = parse_list(value, parse_scheme)?,
            "sweep.objective" => self.sweep.objectives = parse_list(value, parse_objective)?,
            "sweep.direction" => self.sweep.directions = parse_list(value, parse_direction)?,
            other => return Err(Error::invalid_config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn tuples(&self) -> Vec<SweepTuple> {
        self.sweep.tuples()
    }

    pub fn noise_power_w(&self) -> f64 {
        self.noise.noise_power_w(self.urllc.bandwidth_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios == 0 {
            return Err(Error::invalid_config("at least one scenario is required"));
        }
        if self.tuples().is_empty() {
            return Err(Error::invalid_config(
                "the sweep contains no supported combination",
            ));
        }
        if !(self.sco_delta > 0.0) || self.sco_max_iters == 0 {
            return Err(Error::invalid_config(
                "sco.delta must be positive and sco.max_iters ≥ 1",
            ));
        }
        let p = &self.powers;
        if [p.user_max_w, p.ap_max_w, p.bs_max_w]
            .iter()
            .any(|w| !(*w > 0.0))
            || !(p.pilot_w >= 0.0)
        {
            return Err(Error::invalid_config("power caps must be positive"));
        }
        self.urllc.params()?;
        let networks: Vec<NetworkKind> = self.tuples().iter().map(|t| t.network).collect();
        for kind in [NetworkKind::CellFree, NetworkKind::Colocated] {
            if networks.contains(&kind) {
                self.area.with_network(kind).validate()?;
            }
        }
        if self
            .tuples()
            .iter()
            .any(|t| t.beamformer == BeamformerChoice::Pzf)
            && self.pzf_n_interferers >= self.area.antennas_per_ap
        {
            return Err(Error::invalid_config(
                "pzf.n_interferers must be below ap.antennas",
            ));
        }
        Ok(())
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            toml::Value::String(s) => out.push((key, s.clone())),
            toml::Value::Array(items) => {
                let joined: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                out.push((key, joined.join(",")));
            }
            other => out.push((key, other.to_string())),
        }
    }
}
