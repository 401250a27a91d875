use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use cellfree_urllc::harness::{
    run_experiment_with, write_outputs, Execution, RunConfig, CONFIG_KEYS,
};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Ul,
    Dl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Sum,
    Min,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NetworkArg {
    Cf,
    Co,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BeamformerArg {
    Pzf,
    Mrt,
    Mrc,
    Zf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Iia,
    Icba,
}

fn arg_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

/// Monte-Carlo URLLC power-control experiments on cell-free and colocated massive MIMO.
///
/// Flags override keys read from --config; without a sweep flag every
/// supported combination is evaluated.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// TOML file with `section.key` settings (see --list-keys).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenarios: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(long, value_enum)]
    network: Option<NetworkArg>,
    #[arg(long, value_enum)]
    beamformer: Option<BeamformerArg>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Extra `KEY=VALUE` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Run scenarios on a single thread.
    #[arg(long)]
    serial: bool,
    /// Print the accepted configuration keys and exit.
    #[arg(long)]
    list_keys: bool,
}

fn build_config(cli: &Cli) -> cellfree_urllc::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| {
            cellfree_urllc::Error::InvalidConfig(format!("expected KEY=VALUE, got '{o}'"))
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(n) = cli.scenarios {
        cfg.set("run.scenarios", &n.to_string())?;
    }
    if let Some(s) = cli.seed {
        cfg.set("run.seed", &s.to_string())?;
    }
    let sweep = [
        ("sweep.direction", cli.direction.map(arg_name)),
        ("sweep.objective", cli.objective.map(arg_name)),
        ("sweep.network", cli.network.map(arg_name)),
        ("sweep.beamformer", cli.beamformer.map(arg_name)),
        ("sweep.scheme", cli.scheme.map(arg_name)),
    ];
    for (key, value) in sweep {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.list_keys {
        for k in CONFIG_KEYS {
            println!("{k}");
        }
        return ExitCode::SUCCESS;
    }
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    log::info!(
        "{} scenario(s), {} tuple(s), seed {}",
        cfg.scenarios,
        cfg.tuples().len(),
        cfg.seed
    );
    let execution = if cli.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let result = run_experiment_with(&cfg, execution).and_then(|rs| {
        write_outputs(&rs, &cli.out)?;
        Ok(rs)
    });
    match result {
        Ok(rs) => {
            println!(
                "{:<24} {:>14} {:>14} {:>9}",
                "tuple", "GU 95% [Mbps]", "UAV 95% [Mbps]", "converged"
            );
            for t in 0..rs.tuples.len() {
                let s = rs.summary(t);
                let mbps =
                    |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.3}", x / 1e6));
                println!(
                    "{:<24} {:>14} {:>14} {:>5}/{}",
                    s.name,
                    mbps(s.gu_rate_95_bps),
                    mbps(s.uav_rate_95_bps),
                    s.converged,
                    s.runs
                );
            }
            log::info!("results written to {}", cli.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
