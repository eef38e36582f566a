use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tiba_core::nav::NavMode;
use tiba_core::sim::Simulation;

use tiba_cli::commands::{self, Serve};
use tiba_cli::service::{Service, DEFAULT_PORT, HEARTBEAT_TIMEOUT, PORT_ENV};

#[derive(Parser)]
#[command(name = "tiba", version, about = "Sugarcane-row tankette simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ServeArgs {
    /// Port for the WebSocket service.
    #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// Sim seconds per wall second while serving.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Drivetrain sizing report.
    Size {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Run a scenario.
    Run {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// thermal, lidar, waypoint or teleop
        #[arg(long)]
        nav: Option<NavMode>,
        #[arg(long)]
        seed: Option<u64>,
        /// s
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, default_value = "run.ndjson", conflicts_with = "no_log")]
        log: PathBuf,
        #[arg(long)]
        no_log: bool,
        /// Serve telemetry and accept commands while running.
        #[arg(long)]
        serve: bool,
        /// Hold the run until a client connects.
        #[arg(long, requires = "serve")]
        wait: bool,
        #[command(flatten)]
        net: ServeArgs,
    },
    /// Re-drive a recorded run and check it reproduces.
    Replay {
        log: PathBuf,
        /// Write the replayed run's log here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a recorded run.
    Metrics { log: PathBuf },
    /// Stream a recorded run to console clients.
    ServeReplay {
        log: PathBuf,
        #[arg(long)]
        wait: bool,
        #[command(flatten)]
        net: ServeArgs,
    },
}

fn start_service(net: &ServeArgs, wait: bool) -> anyhow::Result<Service> {
    let listener = TcpListener::bind((net.bind.as_str(), net.port)).with_context(|| format!("binding {}:{}", net.bind, net.port))?;
    let service = Service::start(listener, HEARTBEAT_TIMEOUT)?;
    eprintln!("serving on ws://{}:{}", net.bind, service.port());
    while wait && !service.has_connected() {
        thread::sleep(Duration::from_millis(20));
    }
    Ok(service)
}

fn execute(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Size { scenario } => {
            let cfg = commands::load_scenario(scenario.as_deref())?;
            let report = commands::size(&cfg)?;
            print!("{}", commands::format_size(&report));
            Ok(if report.feasible { 0 } else { 1 })
        }
        Command::Run { scenario, nav, seed, duration, log, no_log, serve, wait, net } => {
            let mut cfg = commands::load_scenario(scenario.as_deref())?;
            if let Some(m) = nav {
                cfg.nav.mode = m;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = duration {
                cfg.duration_s = d;
            }
            let sim = Simulation::new(cfg)?;
            let service = if serve { Some(start_service(&net, wait)?) } else { None };
            let log = (!no_log).then_some(log);
            let summary = commands::run_sim(sim, log.as_deref(), service.as_ref().map(|s| Serve { service: s, speed: net.speed }))?;
            println!("outcome={}", commands::outcome_name(summary.outcome));
            print!("{}", commands::format_metrics(&summary.metrics));
            let ok = summary.metrics.completion && summary.metrics.stem_collisions == 0;
            Ok(if ok { 0 } else { 1 })
        }
        Command::Replay { log, out } => {
            let check = commands::replay(&log, out.as_deref())?;
            let p = check.summary.final_pose;
            println!("final_pose={} {} {}", p.x, p.y, p.theta);
            print!("{}", commands::format_metrics(&check.summary.metrics));
            println!("identical={}", check.identical());
            Ok(if check.identical() { 0 } else { 1 })
        }
        Command::Metrics { log } => {
            let (header, records) = commands::read_log(&log)?;
            let m = tiba_core::metrics::metrics_from_records(&header, &records)?;
            print!("{}", commands::format_metrics(&m));
            Ok(0)
        }
        Command::ServeReplay { log, wait, net } => {
            let service = start_service(&net, wait)?;
            let sent = commands::serve_replay(&log, &service, net.speed)?;
            eprintln!("sent {sent} messages");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code_for(&e) as u8)
        }
    }
}
