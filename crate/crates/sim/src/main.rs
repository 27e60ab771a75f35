/*
Copyright 2026 The Inchworm Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! `inchworm`: command-line front end for checking scenarios, planning and
//! walking, batch runs, the live service and trace plotting.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use inchworm_core::locomotion::StepGoal;
use inchworm_core::End;
use inchworm_sim::check::check_scenario;
use inchworm_sim::protocol::{DEFAULT_PORT, PORT_ENV};
use inchworm_sim::run::load_commands;
use inchworm_sim::service::{serve, ServiceConfig};
use inchworm_sim::trace::mode_label;
use inchworm_sim::{
    endpoint_paths, load_scenario, run, walk, Command, RunOptions, RunOutput, Scenario, Trace,
};

#[derive(Parser)]
#[command(
    name = "inchworm",
    version,
    about = "Simulator, planner and teleoperation service for a walking manipulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(clap::Args)]
struct Outputs {
    /// Write the trace (JSON lines) here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the metrics (JSON) here as well as to stdout.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(clap::Args)]
struct StepArgs {
    /// Planner seed (defaults to the scenario's).
    #[arg(long)]
    seed: Option<u64>,
    /// Planning budget per step, s.
    #[arg(long = "budget-s")]
    budget_s: Option<f64>,
    /// Trajectory duration per step, s.
    #[arg(long = "duration-s")]
    duration_s: Option<f64>,
}

#[derive(Subcommand)]
enum Verb {
    /// Validate a scenario and report stance and gait feasibility.
    Check {
        scenario: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
        /// Exit with failure when anything is infeasible.
        #[arg(long)]
        strict: bool,
    },
    /// Move one end to an interface: undock, plan, execute, dock.
    Plan {
        scenario: PathBuf,
        #[arg(long, value_parser = parse_end)]
        end: End,
        /// Target interface id.
        #[arg(long)]
        to: String,
        #[command(flatten)]
        step: StepArgs,
        #[command(flatten)]
        out: Outputs,
    },
    /// Run the scenario's gait, or the steps in a script file.
    Walk {
        scenario: PathBuf,
        /// JSON list of steps `{"moved_end", "target", "duration"}`.
        #[arg(long)]
        script: Option<PathBuf>,
        #[command(flatten)]
        step: StepArgs,
        #[command(flatten)]
        out: Outputs,
    },
    /// Replay a timed command script.
    Run {
        scenario: PathBuf,
        /// JSON list of `{"t": seconds, "command": {...}}`.
        #[arg(long)]
        commands: PathBuf,
        /// Keep simulating at least this long, s.
        #[arg(long = "min-duration-s", default_value_t = 0.0)]
        min_duration_s: f64,
        /// Stop after this much simulated time, s.
        #[arg(long = "max-duration-s", default_value_t = 600.0)]
        max_duration_s: f64,
        #[command(flatten)]
        step: StepArgs,
        #[command(flatten)]
        out: Outputs,
    },
    /// Serve the live state/command protocol.
    Serve {
        scenario: PathBuf,
        #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// Snapshot publication rate, Hz.
        #[arg(long = "snapshot-hz", default_value_t = 20.0)]
        snapshot_hz: f64,
        /// Record the session trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Summarize a trace, or emit endpoint-path plot data with --plot.
    Trace {
        file: PathBuf,
        #[arg(long)]
        plot: bool,
        #[arg(long, value_enum, default_value_t = PlotFormat::Json)]
        format: PlotFormat,
    },
    /// Print the built-in mockup scenario.
    Mockup {
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotFormat {
    Json,
    Csv,
}

fn parse_end(s: &str) -> Result<End, String> {
    match s {
        "B" | "b" => Ok(End::B),
        "E" | "e" => Ok(End::E),
        _ => Err(format!("expected B or E, got {s}")),
    }
}

type CliResult = Result<ExitCode, String>;

/// Appends one formatted line to a `String`.
macro_rules! say {
    ($text:expr, $($arg:tt)*) => {{
        $text.push_str(&format!($($arg)*));
        $text.push('\n');
    }};
}

/// Writes `text` (plus a newline if missing) to stdout. A closed pipe on
/// the reading side is not an error.
fn emit(text: &str) -> Result<(), String> {
    let mut out = io::stdout().lock();
    let result = out.write_all(text.as_bytes()).and_then(|_| {
        if !text.ends_with('\n') {
            out.write_all(b"\n")?;
        }
        out.flush()
    });
    match result {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.to_string()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Verb::Check {
            scenario,
            json,
            strict,
        } => cmd_check(&scenario, json, strict),
        Verb::Plan {
            scenario,
            end,
            to,
            step,
            out,
        } => cmd_plan(&scenario, end, to, &step, &out),
        Verb::Walk {
            scenario,
            script,
            step,
            out,
        } => cmd_walk(&scenario, script.as_deref(), &step, &out),
        Verb::Run {
            scenario,
            commands,
            min_duration_s,
            max_duration_s,
            step,
            out,
        } => cmd_run(
            &scenario,
            &commands,
            min_duration_s,
            max_duration_s,
            &step,
            &out,
        ),
        Verb::Serve {
            scenario,
            port,
            bind,
            snapshot_hz,
            trace,
        } => cmd_serve(&scenario, SocketAddr::new(bind, port), snapshot_hz, trace),
        Verb::Trace { file, plot, format } => cmd_trace(&file, plot, format),
        Verb::Mockup { output } => cmd_mockup(output.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn scenario_at(path: &Path) -> Result<Scenario, String> {
    load_scenario(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn run_options(step: &StepArgs) -> RunOptions {
    RunOptions {
        seed: step.seed,
        budget_s: step.budget_s,
        duration_s: step.duration_s,
        ..RunOptions::default()
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
}

/// Writes the outputs. Succeeds when the run went idle, no step failed
/// and, if `require_steps`, at least one step ran.
fn finish(output: RunOutput, out: &Outputs, require_steps: bool) -> CliResult {
    if let Some(path) = &out.trace {
        let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        output
            .trace
            .write_jsonl(BufWriter::new(file))
            .map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(path) = &out.metrics {
        write_json(path, &output.metrics)?;
    }
    let m = &output.metrics;
    emit(&serde_json::to_string_pretty(m).map_err(|e| e.to_string())?)?;
    for s in &m.steps {
        eprintln!(
            "step {} {} {} -> {} ({}): {}",
            s.index,
            s.moved_end,
            s.from,
            s.target,
            mode_label(s.mode),
            if s.success {
                "ok".to_string()
            } else {
                format!("failed: {}", s.error.clone().unwrap_or_default())
            }
        );
    }
    let ok = !m.truncated && m.all_steps_succeeded() && !(require_steps && m.steps.is_empty());
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_check(path: &Path, json: bool, strict: bool) -> CliResult {
    let scenario = scenario_at(path)?;
    let report = check_scenario(&scenario).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut text = String::new();
    if json {
        say!(
            text,
            "{}",
            serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?
        );
    } else {
        let st = &report.stance;
        say!(
            text,
            "{}: valid, {} interfaces, {} blocks",
            report.scenario,
            report.interfaces,
            report.blocks
        );
        let docked: Vec<String> = st.docked.iter().map(|(e, i)| format!("{e}@{i}")).collect();
        say!(text, "stance: {:?}, docked {}", st.mode, docked.join(", "));
        let f = &st.feasibility;
        say!(
            text,
            "  torques [{}] N·m, worst joint {} margin {:.2} N·m: {}",
            f.torques
                .0
                .iter()
                .map(|t| format!("{t:.2}"))
                .collect::<Vec<_>>()
                .join(", "),
            f.worst_joint + 1,
            f.margins[f.worst_joint],
            if f.feasible { "feasible" } else { "INFEASIBLE" }
        );
        match st.min_clearance_m {
            Some(c) => say!(
                text,
                "  clearance {c:.4} m{}",
                if st.colliding { " (COLLIDING)" } else { "" }
            ),
            None => say!(text, "  clearance: nothing nearby"),
        }
        for r in &report.reach {
            let from: Vec<String> = r.within_reach_of.iter().map(|e| e.to_string()).collect();
            say!(
                text,
                "  {:<6} {:.3} m from B, {:.3} m from E, within reach of [{}]",
                r.id,
                r.distance_from_b,
                r.distance_from_e,
                from.join(", ")
            );
        }
        for g in &report.gait {
            let torque = match &g.best {
                Some(b) => format!(
                    "best worst-joint margin {:.2} N·m (joint {})",
                    b.margins[b.worst_joint],
                    b.worst_joint + 1
                ),
                None => "no goal configuration".into(),
            };
            say!(
                text,
                "gait step {}: {} to {} from {} ({:.3} m): {} goal configs, {}: {}",
                g.index,
                g.moved_end,
                g.target,
                g.support,
                g.distance_m,
                g.goal_configs,
                torque,
                if g.feasible { "feasible" } else { "INFEASIBLE" }
            );
        }
        say!(
            text,
            "overall: {}",
            if report.feasible {
                "feasible"
            } else {
                "INFEASIBLE"
            }
        );
    }
    emit(&text)?;
    Ok(if strict && !report.feasible {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_plan(path: &Path, end: End, to: String, step: &StepArgs, out: &Outputs) -> CliResult {
    let scenario = scenario_at(path)?;
    let commands = [inchworm_sim::TimedCommand {
        t: 0.0,
        command: Command::PlanTo {
            end,
            interface: to,
            seed: step.seed,
            budget_s: step.budget_s,
            duration_s: step.duration_s,
        },
    }];
    let output = run(&scenario, &commands, &run_options(step)).map_err(|e| e.to_string())?;
    report_rejections(&output.trace);
    finish(output, out, true)
}

fn cmd_walk(path: &Path, script: Option<&Path>, step: &StepArgs, out: &Outputs) -> CliResult {
    let scenario = scenario_at(path)?;
    let steps = match script {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            let steps: Vec<StepGoal> = serde_path_to_error::deserialize(de)
                .map_err(|e| format!("{}: {}: {}", p.display(), e.path(), e.inner()))?;
            Some(steps)
        }
        None => {
            if scenario.gait.is_none() {
                return Err(format!("{} has no gait; pass --script", path.display()));
            }
            None
        }
    };
    let output = walk(&scenario, steps, &run_options(step)).map_err(|e| e.to_string())?;
    report_rejections(&output.trace);
    finish(output, out, true)
}

fn cmd_run(
    path: &Path,
    commands: &Path,
    min_s: f64,
    max_s: f64,
    step: &StepArgs,
    out: &Outputs,
) -> CliResult {
    let scenario = scenario_at(path)?;
    let commands = load_commands(commands).map_err(|e| e.to_string())?;
    let options = RunOptions {
        min_duration_s: min_s,
        max_duration_s: max_s,
        ..run_options(step)
    };
    let output = run(&scenario, &commands, &options).map_err(|e| e.to_string())?;
    report_rejections(&output.trace);
    finish(output, out, false)
}

fn report_rejections(trace: &Trace) {
    for (tick, e) in trace.events() {
        if let inchworm_sim::TraceEvent::CommandRejected { error, .. } = e {
            eprintln!(
                "tick {tick}: command rejected ({:?}): {}",
                error.code, error.message
            );
        }
    }
}

fn cmd_serve(path: &Path, addr: SocketAddr, snapshot_hz: f64, trace: Option<PathBuf>) -> CliResult {
    if !(snapshot_hz.is_finite() && snapshot_hz > 0.0) {
        return Err("--snapshot-hz must be > 0".into());
    }
    let scenario = scenario_at(path)?;
    let mut config = ServiceConfig::new(addr);
    config.snapshot_hz = snapshot_hz;
    config.trace_path = trace;
    let handle = serve(&scenario, config).map_err(|e| e.to_string())?;
    eprintln!("listening on {}", handle.local_addr());
    handle.wait();
    Ok(ExitCode::SUCCESS)
}

fn cmd_trace(path: &Path, plot: bool, format: PlotFormat) -> CliResult {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let trace =
        Trace::read_jsonl(BufReader::new(file)).map_err(|e| format!("{}: {e}", path.display()))?;
    trace
        .validate()
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let mut text = String::new();
    if plot {
        let paths = endpoint_paths(&trace);
        match format {
            PlotFormat::Json => {
                let doc = serde_json::json!({ "scenario": trace.header.scenario, "paths": paths });
                say!(
                    text,
                    "{}",
                    serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?
                );
            }
            PlotFormat::Csv => {
                say!(text, "step,label,moved_end,sample,x,y,z");
                for p in &paths {
                    for (i, [x, y, z]) in p.points.iter().enumerate() {
                        say!(
                            text,
                            "{},{},{},{i},{x},{y},{z}",
                            p.step,
                            p.label,
                            p.moved_end
                        );
                    }
                }
            }
        }
    } else {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for (_, e) in trace.events() {
            let v = serde_json::to_value(e).map_err(|e| e.to_string())?;
            let kind = v["type"].as_str().unwrap_or("?").to_string();
            *counts.entry(kind).or_default() += 1;
        }
        let duration = trace.records.last().map_or(0.0, |r| r.t);
        let doc = serde_json::json!({
            "scenario": trace.header.scenario,
            "seed": trace.header.seed,
            "records": trace.records.len(),
            "duration_s": duration,
            "events": counts,
        });
        say!(
            text,
            "{}",
            serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?
        );
    }
    emit(&text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_mockup(output: Option<&Path>) -> CliResult {
    let scenario = Scenario::mockup();
    match output {
        Some(p) => scenario.save(p).map_err(|e| e.to_string())?,
        None => emit(&scenario.to_json_string())?,
    }
    Ok(ExitCode::SUCCESS)
}
