use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mmsched_core::ddpg::{train, write_curve_csv, DdpgPolicy, TrainConfig};
use mmsched_core::env::{write_trace_csv, Controlled, JointConfig, LearnedForecasts, Policy, RewardConfig, SimEnv};
use mmsched_core::forecast::{forecast_bus, write_encodings_csv, write_flows_csv, BikeFlowForecaster, BikeForecastConfig};
use mmsched_core::harness::{evaluate, run_exhaustive_bike, Baseline};
use mmsched_core::scenario::ScenarioFile;
use mmsched_core::{Error, Result};

#[derive(Parser)]
#[command(name = "mmsched", version, about = "Bus and bike-sharing scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON; bundled names such as `fig1a.json` also work.
    #[arg(long)]
    scenario: PathBuf,
    /// Run configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Agents {
    Bike,
    Bus,
}

impl From<Agents> for Controlled {
    fn from(a: Agents) -> Self {
        match a {
            Agents::Bike => Controlled::Bike,
            Agents::Bus => Controlled::Bus,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate demand history, fit the forecasters and write forecasts.
    Forecast {
        #[command(flatten)]
        common: Common,
    },
    /// Train a DDPG scheduler.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "bike")]
        agents: Agents,
    },
    /// Run one episode of a policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// `none`, `greedy`, `headway`, or a directory written by `train`.
        #[arg(long, default_value = "none")]
        policy: String,
        #[arg(long, value_enum, default_value = "bike")]
        agents: Agents,
    },
    /// Metrics of a policy across seeds.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "none")]
        policy: String,
        #[arg(long, value_enum, default_value = "bike")]
        agents: Agents,
        #[arg(long, default_value_t = 20)]
        episodes: u64,
    },
    /// Best initial placement of the vehicles' bikes by enumeration.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    train: TrainConfig,
    forecast: BikeForecastConfig,
    /// Use forecasters fitted on generated history instead of expected demand.
    learned_forecasts: bool,
    bus_window: Option<usize>,
    reward: Option<RewardConfig>,
    joint: Option<JointConfig>,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|source| Error::File {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::validation(path.display().to_string(), e.to_string()))
    }
}

fn out_dir(common: &Common) -> Result<Option<PathBuf>> {
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir).map_err(|source| Error::File {
            path: dir.display().to_string(),
            source,
        })?;
    }
    Ok(common.out.clone())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

fn build_env(scenario: &ScenarioFile, cfg: &RunConfig, agents: Agents, seed: u64) -> Result<SimEnv> {
    let mut env = SimEnv::new(scenario, agents.into())?;
    if cfg.learned_forecasts {
        let learned = LearnedForecasts::fit(scenario, &cfg.forecast, cfg.bus_window.unwrap_or(8), seed)?;
        env = env.with_learned_forecasts(learned)?;
    }
    if let Some(r) = cfg.reward {
        env.set_reward(r)?;
    }
    if let Some(j) = cfg.joint {
        env.set_joint(j)?;
    }
    Ok(env)
}

fn load_policy(name: &str, env: &SimEnv) -> Result<Box<dyn Policy>> {
    if let Some(b) = Baseline::parse(name) {
        return Ok(Box::new(b));
    }
    let dir = Path::new(name);
    if dir.join("policy.json").is_file() {
        return Ok(Box::new(DdpgPolicy::load(dir, env.action_space())?));
    }
    Err(Error::validation(
        "policy",
        format!("{name} is neither none, greedy, headway nor a trained policy directory"),
    ))
}

fn forecast_cmd(common: &Common) -> Result<()> {
    let scenario = ScenarioFile::load(&common.scenario)?;
    let cfg = RunConfig::load(common.config.as_deref())?;
    let out = out_dir(common)?;
    let world = scenario.build_world()?;
    let log = scenario.generate_history(common.seed)?;
    let first = world.clock.episode_start();
    let stop_ids: Vec<String> = world.bus_stops.iter().map(|s| s.id.clone()).collect();
    let station_ids = scenario.station_ids();
    if log.stations > 0 {
        let coords: Vec<[f64; 2]> = world.bike_stations.iter().map(|s| s.coord).collect();
        let model = BikeFlowForecaster::fit(&log, &coords, &cfg.forecast)?;
        let recent: Vec<Vec<f64>> = (0..log.stations).map(|s| log.departure_series(s)).collect();
        let flows = model.forecast(&recent, first, scenario.horizon)?;
        let total: f64 = flows.iter().map(|f| f.total()).sum();
        println!("bike_segments={} bike_trips={total:.3}", flows.len());
        if let Some(dir) = &out {
            log.write_bike_csv(&dir.join("history_bike.csv"), &station_ids)?;
            write_flows_csv(&dir.join("flows.csv"), &flows, &station_ids)?;
            write_encodings_csv(&dir.join("encodings.csv"), &flows)?;
        }
    }
    let (fwd, bwd) = log.bus_series(&world);
    if !stop_ids.is_empty() && log.len() >= 2 {
        let bus = forecast_bus(&fwd, &bwd, scenario.horizon, cfg.bus_window.unwrap_or(8).min(log.len()))?;
        let total: f64 = bus.forward.iter().chain(&bus.backward).flatten().sum();
        println!("bus_segments={} bus_passengers={total:.3}", bus.horizon());
        if let Some(dir) = &out {
            log.write_bus_csv(&dir.join("history_bus.csv"), &stop_ids)?;
            bus.write_csv(&dir.join("bus_forecast.csv"), &stop_ids, first)?;
        }
    }
    Ok(())
}

fn train_cmd(common: &Common, agents: Agents) -> Result<()> {
    let scenario = ScenarioFile::load(&common.scenario)?;
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    cfg.train.seed = common.seed;
    let out = out_dir(common)?;
    let mut env = build_env(&scenario, &cfg, agents, common.seed)?;
    let checkpoints = out.as_ref().map(|d| d.join("checkpoints"));
    let outcome = train(&mut env, &cfg.train, checkpoints.as_deref())?;
    let last = outcome.curve.last();
    println!(
        "episodes={} last_return={:.3} best_episode={}",
        outcome.curve.len(),
        last.map_or(0.0, |r| r.episode_return),
        outcome.best_episode.map_or("final".to_string(), |e| e.to_string())
    );
    if let Some(dir) = &out {
        write_curve_csv(&dir.join("curve.csv"), &outcome.curve)?;
        outcome.policy.save(&dir.join("policy"))?;
        write_json(&dir.join("config.json"), &cfg)?;
    }
    Ok(())
}

fn simulate_cmd(common: &Common, policy: &str, agents: Agents) -> Result<()> {
    let scenario = ScenarioFile::load(&common.scenario)?;
    let cfg = RunConfig::load(common.config.as_deref())?;
    let out = out_dir(common)?;
    let mut env = build_env(&scenario, &cfg, agents, common.seed)?;
    env.set_record_trace(out.is_some());
    let mut p = load_policy(policy, &env)?;
    let summary = mmsched_core::env::run_episode(&mut env, p.as_mut(), common.seed)?;
    println!("served={}", summary.served);
    println!(
        "lost={} demand={} distance={:.3} mean_wait={:.3} return={:.3}",
        summary.lost,
        summary.demand,
        summary.distance,
        summary.mean_wait(),
        summary.episode_return
    );
    if let Some(dir) = &out {
        write_trace_csv(&dir.join("trace.csv"), env.trace())?;
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(())
}

fn eval_cmd(common: &Common, policy: &str, agents: Agents, episodes: u64) -> Result<()> {
    let scenario = ScenarioFile::load(&common.scenario)?;
    let cfg = RunConfig::load(common.config.as_deref())?;
    let out = out_dir(common)?;
    let mut env = build_env(&scenario, &cfg, agents, common.seed)?;
    let mut p = load_policy(policy, &env)?;
    let seeds: Vec<u64> = (0..episodes).map(|k| common.seed + k).collect();
    let report = evaluate(&mut env, p.as_mut(), &seeds)?;
    for a in &report.aggregates {
        println!("{} mean={:.3} median={:.3} min={:.3} max={:.3}", a.metric, a.mean, a.median, a.min, a.max);
    }
    if let Some(dir) = &out {
        report.write_reports_csv(&dir.join("reports.csv"))?;
        report.write_aggregates_csv(&dir.join("aggregates.csv"))?;
    }
    Ok(())
}

fn oracle_cmd(common: &Common) -> Result<()> {
    let scenario = ScenarioFile::load(&common.scenario)?;
    let best = run_exhaustive_bike(&scenario)?;
    println!("best_served={} placement={}", best.served, best.describe());
    if let Some(dir) = out_dir(common)? {
        write_json(&dir.join("oracle.json"), &best)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Forecast { common } => forecast_cmd(&common),
        Command::Train { common, agents } => train_cmd(&common, agents),
        Command::Simulate { common, policy, agents } => simulate_cmd(&common, &policy, agents),
        Command::Eval {
            common,
            policy,
            agents,
            episodes,
        } => eval_cmd(&common, &policy, agents, episodes),
        Command::Oracle { common } => oracle_cmd(&common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
