//! Commands behind the `smoothing-averse` binary.
//!
//! Every command writes `manifest.json` into the output directory, echoing
//! the fully resolved configuration. CSV numbers are printed with 17
//! significant digits so reruns can be diffed byte for byte.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 size
//! guard exceeded, 4 verification failure.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cloud::{evaluate_policies, CloudScenario, DEFAULT_RESOLUTION};
use crate::dp::{grid_point_count, divisions_for, PolicyArtifact, RewardKind, SimplexGrid, DEFAULT_GRID_LIMIT};
use crate::error::{Error, Result};
use crate::quadrature::DEFAULT_CELLS;
use crate::robot::{run_batch, trajectory_stats, RobotScenario};
use crate::verify::{builtin_instances, corrupted, verify_instances};

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_GUARD: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "smoothing-averse", version, about = "Smoothing-averse control: solvers, simulators and oracle checks")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "SMOOTHING_AVERSE_OUT", default_value = "out")]
    pub out: PathBuf,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "SMOOTHING_AVERSE_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a cloud scenario by backward induction on a belief grid.
    Solve(SolveArgs),
    /// Evaluate one or more solved policies by Monte Carlo.
    RunCloud(RunCloudArgs),
    /// Run the covert-navigation robot.
    RunRobot(RunRobotArgs),
    /// Run the built-in enumeration oracle suite.
    Verify(VerifyArgs),
    /// Report the size of a belief grid.
    GridInfo(GridInfoArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    /// Cloud scenario JSON; the built-in three-state scenario when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = RewardKind::SmoothingAverse)]
    pub reward: RewardKind,
    /// Grid spacing; 1/resolution must be an integer.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    pub resolution: f64,
    /// Quadrature cells for scalar Gaussian outputs.
    #[arg(long, default_value_t = DEFAULT_CELLS)]
    pub cells: usize,
    /// Overrides the scenario horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Overrides the scenario cost weight.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Largest grid the solver will build.
    #[arg(long, default_value_t = DEFAULT_GRID_LIMIT)]
    pub grid_limit: u128,
    /// Artifact path; `<out>/policy-<reward>.json` when omitted.
    #[arg(long)]
    pub artifact: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunCloudArgs {
    /// Cloud scenario JSON; the built-in three-state scenario when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Policy artifact, optionally as NAME=PATH. Repeat to compare policies.
    #[arg(long = "policy", required = true)]
    pub policies: Vec<String>,
    /// Episodes per policy; the scenario's `n_runs` when omitted.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunRobotArgs {
    /// Robot scenario JSON; the built-in map when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Overrides the scenario cost weight.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 25)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Scales one transition column of the named instance before checking.
    #[arg(long, hide = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrupt: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridInfoArgs {
    #[arg(long, default_value_t = 3)]
    pub states: usize,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    pub resolution: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_LIMIT)]
    pub grid_limit: u128,
}

/// How a command that ran to completion ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::SizeGuard { .. } => EXIT_GUARD,
        Error::Config(_) | Error::Input(_) | Error::InvalidModel(_) | Error::Consistency(_) | Error::Json(_) => {
            EXIT_CONFIG
        }
        Error::Domain(_) | Error::DegenerateMeasurement(_) | Error::Numerical(_) | Error::Io(_) | Error::Csv(_) => {
            EXIT_RUNTIME
        }
    }
}

/// Parses `args`, runs the command and maps the result to an exit code.
pub fn main_entry<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(EXIT_VERIFY),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    fs::create_dir_all(&cli.out)?;
    pool.install(|| match &cli.command {
        Command::Solve(a) => cmd_solve(a, &cli.out),
        Command::RunCloud(a) => cmd_run_cloud(a, &cli.out),
        Command::RunRobot(a) => cmd_run_robot(a, &cli.out),
        Command::Verify(a) => cmd_verify(a, &cli.out),
        Command::GridInfo(a) => cmd_grid_info(a, &cli.out),
    })
}

/// Full round-trip precision for CSV output.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn read_input(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {what} {}: {e}", path.display())))
}

fn load_cloud(path: Option<&Path>) -> Result<CloudScenario> {
    match path {
        Some(p) => CloudScenario::from_json(&read_input(p, "scenario")?),
        None => Ok(CloudScenario::standard()),
    }
}

fn load_robot(path: Option<&Path>) -> Result<RobotScenario> {
    match path {
        Some(p) => RobotScenario::from_json(&read_input(p, "scenario")?),
        None => Ok(RobotScenario::default()),
    }
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize, S: Serialize> {
    command: &'a str,
    version: &'a str,
    args: &'a C,
    /// Scenario after defaults and overrides were applied.
    resolved_scenario: &'a S,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    resolved: serde_json::Value,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_manifest<C: Serialize, S: Serialize>(
    out: &Path,
    command: &str,
    args: &C,
    scenario: &S,
    resolved: serde_json::Value,
) -> Result<()> {
    write_json(
        &out.join("manifest.json"),
        &Manifest { command, version: env!("CARGO_PKG_VERSION"), args, resolved_scenario: scenario, resolved },
    )
}

#[derive(Serialize)]
struct SolveReport {
    reward_kind: RewardKind,
    grid_points: usize,
    divisions: usize,
    horizon: usize,
    gamma: f64,
    /// `J_0` at the grid point nearest the prior.
    j0_at_prior: f64,
    wall_time_seconds: f64,
    artifact: PathBuf,
}

pub fn cmd_solve(args: &SolveArgs, out: &Path) -> Result<Outcome> {
    let mut scenario = load_cloud(args.scenario.as_deref())?;
    if let Some(h) = args.horizon {
        scenario.horizon = h;
    }
    if let Some(g) = args.gamma {
        scenario.gamma = g;
    }
    scenario.validate()?;
    let artifact_path = args.artifact.clone().unwrap_or_else(|| out.join(format!("policy-{}.json", args.reward)));
    write_manifest(
        out,
        "solve",
        args,
        &scenario,
        serde_json::json!({ "artifact": artifact_path, "divisions": divisions_for(args.resolution)? }),
    )?;

    let start = Instant::now();
    let grid = SimplexGrid::with_limit(scenario.hmm.n_states(), args.resolution, args.grid_limit)?;
    let artifact = scenario.solve(args.reward, &grid, args.cells)?;
    let elapsed = start.elapsed().as_secs_f64();
    artifact.save(&artifact_path)?;

    let j0 = artifact.values.values[0][grid.project(scenario.hmm.initial())];
    let report = SolveReport {
        reward_kind: args.reward,
        grid_points: grid.len(),
        divisions: grid.divisions(),
        horizon: scenario.horizon,
        gamma: scenario.gamma,
        j0_at_prior: j0,
        wall_time_seconds: elapsed,
        artifact: artifact_path.clone(),
    };
    write_json(&out.join("solve_report.json"), &report)?;
    println!(
        "solved {} on {} grid points (T = {}) in {:.2}s; J_0 at prior = {}",
        args.reward,
        grid.len(),
        scenario.horizon,
        elapsed,
        fmt_num(j0)
    );
    println!("artifact: {}", artifact_path.display());
    Ok(Outcome::Success)
}

fn parse_policy_spec(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            let name = path.file_stem().map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
            (name, path)
        }
    }
}

#[derive(Serialize)]
struct EpisodeLine<'a> {
    policy: &'a str,
    #[serde(flatten)]
    record: &'a crate::cloud::EpisodeRecord,
}

pub fn cmd_run_cloud(args: &RunCloudArgs, out: &Path) -> Result<Outcome> {
    let scenario = load_cloud(args.scenario.as_deref())?;
    let runs = args.runs.unwrap_or(scenario.n_runs);
    let specs: Vec<(String, PathBuf)> = args.policies.iter().map(|s| parse_policy_spec(s)).collect();
    let mut seen = std::collections::HashSet::new();
    if let Some((dup, _)) = specs.iter().find(|(n, _)| !seen.insert(n.clone())) {
        return Err(Error::Config(format!("policy name {dup:?} given twice")));
    }
    let artifacts = specs
        .iter()
        .map(|(_, p)| {
            let text = read_input(p, "policy artifact")?;
            Ok(serde_json::from_str::<PolicyArtifact>(&text)?)
        })
        .collect::<Result<Vec<_>>>()?;
    write_manifest(
        out,
        "run-cloud",
        args,
        &scenario,
        serde_json::json!({ "runs": runs, "policies": specs }),
    )?;

    let named: Vec<(String, &PolicyArtifact)> = specs.iter().map(|(n, _)| n.clone()).zip(&artifacts).collect();
    let evaluations = evaluate_policies(&scenario, &named, args.seed, runs)?;

    let mut jsonl = BufWriter::new(fs::File::create(out.join("episodes.jsonl"))?);
    for ev in &evaluations {
        for record in &ev.episodes {
            serde_json::to_writer(&mut jsonl, &EpisodeLine { policy: &ev.metrics.policy, record })?;
            jsonl.write_all(b"\n")?;
        }
    }
    jsonl.flush()?;

    let mut csv = csv::Writer::from_path(out.join("metrics.csv"))?;
    csv.write_record(["policy", "mean_entropy_nats", "map_error", "n_runs", "seed"])?;
    for ev in &evaluations {
        let m = &ev.metrics;
        csv.write_record([
            m.policy.clone(),
            fmt_num(m.mean_entropy_nats),
            fmt_num(m.map_error),
            m.n_runs.to_string(),
            args.seed.to_string(),
        ])?;
        println!("{:<24} entropy {:.4} nats  MAP error {:.4}  ({} runs)", m.policy, m.mean_entropy_nats, m.map_error, m.n_runs);
    }
    csv.flush()?;
    Ok(Outcome::Success)
}

pub fn cmd_run_robot(args: &RunRobotArgs, out: &Path) -> Result<Outcome> {
    let mut scenario = load_robot(args.scenario.as_deref())?;
    if let Some(g) = args.gamma {
        scenario.gamma = g;
    }
    scenario.validate()?;
    if args.episodes == 0 {
        return Err(Error::Config("at least one episode is required".into()));
    }
    write_manifest(out, "run-robot", args, &scenario, serde_json::Value::Null)?;

    let batch = run_batch(&scenario, args.seed, args.episodes)?;
    let stats = trajectory_stats(&batch, &scenario)?;

    let mut csv = csv::Writer::from_path(out.join("trajectories.csv"))?;
    csv.write_record([
        "episode", "t", "x", "y", "heading", "u2", "est_x", "est_y", "est_heading", "h_post", "h_pred", "h_process",
        "r_tilde", "goal_cost",
    ])?;
    for (e, record) in batch.iter().enumerate() {
        let p = record.initial_pose;
        let m = record.initial_estimate.mean;
        let mut row = vec![e.to_string(), "0".into(), fmt_num(p.x), fmt_num(p.y), fmt_num(p.heading), String::new()];
        row.extend([fmt_num(m.x), fmt_num(m.y), fmt_num(m.heading)]);
        row.extend(std::iter::repeat_n(String::new(), 5));
        csv.write_record(&row)?;
        for (t, s) in record.steps.iter().enumerate() {
            let m = s.estimate.mean;
            csv.write_record([
                e.to_string(),
                (t + 1).to_string(),
                fmt_num(s.pose.x),
                fmt_num(s.pose.y),
                fmt_num(s.pose.heading),
                fmt_num(s.turn_rate),
                fmt_num(m.x),
                fmt_num(m.y),
                fmt_num(m.heading),
                fmt_num(s.entropy.h_post),
                fmt_num(s.entropy.h_pred),
                fmt_num(s.entropy.h_process),
                fmt_num(s.entropy.r_tilde()),
                fmt_num(s.goal_cost),
            ])?;
        }
    }
    csv.flush()?;

    let mean_steps = batch.iter().map(|r| r.steps.len() as f64).sum::<f64>() / batch.len() as f64;
    let mut csv = csv::Writer::from_path(out.join("stats.csv"))?;
    csv.write_record(["statistic", "value"])?;
    for (k, v) in [
        ("gamma", scenario.gamma),
        ("episodes", batch.len() as f64),
        ("mean_min_landmark_distance", stats.mean_min_landmark_distance),
        ("mean_final_goal_distance", stats.mean_final_goal_distance),
        ("termination_rate", stats.termination_rate),
        ("mean_steps", mean_steps),
    ] {
        csv.write_record([k.to_string(), fmt_num(v)])?;
    }
    csv.flush()?;

    let mut csv = csv::Writer::from_path(out.join("mean_path.csv"))?;
    csv.write_record(["t", "mean_x", "mean_y", "std_x", "std_y"])?;
    for (t, (m, s)) in stats.mean_path.iter().zip(&stats.std_path).enumerate() {
        csv.write_record([t.to_string(), fmt_num(m[0]), fmt_num(m[1]), fmt_num(s[0]), fmt_num(s[1])])?;
    }
    csv.flush()?;

    println!(
        "gamma {}: {} episodes, mean min landmark distance {:.3} m, mean final goal distance {:.3} m, terminated {:.0}%",
        scenario.gamma,
        batch.len(),
        stats.mean_min_landmark_distance,
        stats.mean_final_goal_distance,
        100.0 * stats.termination_rate
    );
    Ok(Outcome::Success)
}

pub fn cmd_verify(args: &VerifyArgs, out: &Path) -> Result<Outcome> {
    let mut instances = builtin_instances()?;
    if let Some(name) = &args.corrupt {
        let target = instances
            .iter()
            .position(|i| &i.name == name)
            .ok_or_else(|| Error::Config(format!("no built-in instance named {name:?}")))?;
        instances[target] = corrupted(&instances[target]);
    }
    write_manifest(out, "verify", args, &serde_json::Value::Null, serde_json::Value::Null)?;
    let report = verify_instances(&instances);
    write_json(&out.join("verify_report.json"), &report)?;
    for o in &report.outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        match &o.error {
            None => println!("{status} {:<26} {:<18} T={} |diff| = {:.3e}", o.instance, o.check, o.horizon, o.discrepancy),
            Some(e) => println!("{status} {:<26} {:<18} T={} error: {e}", o.instance, o.check, o.horizon),
        }
    }
    let failed = report.failures().count();
    println!("{} checks, {} failed (tolerance {:e})", report.outcomes.len(), failed, report.tolerance);
    Ok(if report.passed() { Outcome::Success } else { Outcome::VerificationFailed })
}

#[derive(Serialize)]
struct GridInfo {
    n_states: usize,
    resolution: f64,
    divisions: usize,
    points: u128,
    limit: u128,
}

pub fn cmd_grid_info(args: &GridInfoArgs, out: &Path) -> Result<Outcome> {
    if args.states == 0 {
        return Err(Error::Config("a grid needs at least one state".into()));
    }
    let divisions = divisions_for(args.resolution)?;
    let info = GridInfo {
        n_states: args.states,
        resolution: args.resolution,
        divisions,
        points: grid_point_count(args.states, divisions),
        limit: args.grid_limit,
    };
    write_manifest(out, "grid-info", args, &serde_json::Value::Null, serde_json::Value::Null)?;
    write_json(&out.join("grid_info.json"), &info)?;
    println!("{} states at resolution {}: {} divisions, {} grid points", info.n_states, info.resolution, divisions, info.points);
    if info.points > info.limit {
        return Err(Error::SizeGuard { what: "belief grid points".into(), count: info.points, limit: info.limit });
    }
    Ok(Outcome::Success)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::SizeGuard { what: "x".into(), count: 2, limit: 1 }), EXIT_GUARD);
        assert_eq!(exit_code(&Error::Numerical("x".into())), EXIT_RUNTIME);
    }

    #[test]
    fn policy_specs() {
        assert_eq!(parse_policy_spec("sa=out/p.json"), ("sa".into(), PathBuf::from("out/p.json")));
        assert_eq!(parse_policy_spec("out/policy-zero.json"), ("policy-zero".into(), PathBuf::from("out/policy-zero.json")));
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.5e-300, -7.0, std::f64::consts::PI] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn arguments_parse() {
        let cli = Cli::try_parse_from(["smoothing-averse", "solve", "--reward", "min-info-gain", "--resolution", "0.25"]).unwrap();
        let Command::Solve(a) = cli.command else { panic!() };
        assert_eq!(a.reward, RewardKind::MinInfoGain);
        assert_eq!(a.resolution, 0.25);
        assert!(Cli::try_parse_from(["smoothing-averse", "solve", "--reward", "nope"]).is_err());
        assert!(Cli::try_parse_from(["smoothing-averse", "run-cloud"]).is_err());
    }
}
