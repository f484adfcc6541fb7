use std::fs::File;
use std::io::{self, Write};
use std::net::IpAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use telerobot::latency::{ping, TcpEchoLink};
use telerobot::server::{serve, ConfigLayer, ServerConfig};
use telerobot::simnet::{emit_table, profiles, run_scenario, run_table1, LinkProfile, ScenarioScript, SimConfig};

#[derive(Parser)]
#[command(name = "telerobot", version, about = "Multi-operator robot arm teleoperation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the robot server over TCP until Ctrl-C.
    Serve(ServeArgs),
    /// Scripted operators over simulated links in virtual time.
    #[command(subcommand)]
    Simnet(SimnetCmd),
    /// Measure application-level round trips to a running server.
    Ping {
        #[arg(long, default_value = "127.0.0.1:9600")]
        addr: String,
        #[arg(long, default_value_t = 10)]
        count: u32,
        /// Defaults to TELEROBOT_PING_TIMEOUT_MS, then 2000.
        #[arg(long)]
        timeout_ms: Option<u64>,
    },
}

#[derive(Args)]
struct ServeArgs {
    /// Server config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    listen: Option<IpAddr>,
    #[arg(long)]
    port: Option<u16>,
    /// Arm description file (TOML).
    #[arg(long)]
    arm: Option<PathBuf>,
    /// Interim feedback rate in Hz.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    queue_bound: Option<usize>,
}

#[derive(Subcommand)]
enum SimnetCmd {
    /// Run one script over one profile.
    Run {
        /// Canonical profile name (local, lan, inter-lan) or a profile TOML file.
        #[arg(long, default_value = "local")]
        profile: String,
        #[arg(long)]
        script: PathBuf,
        /// Overrides the script's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Summary CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Full event dump output.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Reference scenario over the three calibrated profiles.
    Table1 {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Cmd::Serve(args) => cmd_serve(args),
        Cmd::Simnet(cmd) => cmd_simnet(cmd),
        Cmd::Ping {
            addr,
            count,
            timeout_ms,
        } => {
            let env = ConfigLayer::from_env(|k| std::env::var(k).ok())?;
            let flags = ConfigLayer {
                ping_timeout_ms: timeout_ms,
                ..ConfigLayer::default()
            };
            let cfg = ServerConfig::resolve(None, &env, &flags)?;
            cmd_ping(&addr, count, cfg.ping_timeout)
        }
    }
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    let file = args
        .config
        .as_deref()
        .map(ConfigLayer::from_file)
        .transpose()
        .context("loading server config")?;
    let env = ConfigLayer::from_env(|k| std::env::var(k).ok())?;
    let flags = ConfigLayer {
        listen: args.listen,
        port: args.port,
        arm: args.arm,
        rate_hz: args.rate,
        queue_bound: args.queue_bound,
        ping_timeout_ms: None,
    };
    let cfg = ServerConfig::resolve(file.as_ref(), &env, &flags)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(serve(&cfg, async {
        let _ = tokio::signal::ctrl_c().await;
        log::info!("interrupt received, shutting down");
    }))?;
    Ok(())
}

fn load_profile(spec: &str) -> Result<LinkProfile> {
    if let Some(p) = profiles::by_name(spec) {
        return Ok(p);
    }
    let path = PathBuf::from(spec);
    if !path.exists() {
        bail!("unknown profile {spec:?}: not a canonical name (local, lan, inter-lan) or a file");
    }
    Ok(LinkProfile::load(&path)?)
}

fn write_table_csv(path: &PathBuf, table: &telerobot::simnet::Table) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    table.write_csv(f)?;
    Ok(())
}

fn cmd_simnet(cmd: SimnetCmd) -> Result<()> {
    let cfg = SimConfig::default();
    let reports = match &cmd {
        SimnetCmd::Run {
            profile,
            script,
            seed,
            dump,
            ..
        } => {
            let profile = load_profile(profile)?;
            let text = std::fs::read_to_string(script).with_context(|| format!("reading {}", script.display()))?;
            let mut script = ScenarioScript::parse(&text)?;
            if let Some(s) = seed {
                script.seed = *s;
            }
            let report = run_scenario(&profile, &script, &cfg)?;
            if let Some(path) = dump {
                std::fs::write(path, report.to_text()).with_context(|| format!("writing {}", path.display()))?;
            }
            vec![report]
        }
        SimnetCmd::Table1 { seed, .. } => run_table1(*seed, &cfg)?,
    };
    let table = emit_table(&reports)?;
    io::stdout().write_all(table.to_text().as_bytes())?;
    let out = match &cmd {
        SimnetCmd::Run { out, .. } | SimnetCmd::Table1 { out, .. } => out,
    };
    if let Some(path) = out {
        write_table_csv(path, &table)?;
    }
    Ok(())
}

fn cmd_ping(addr: &str, count: u32, timeout: Duration) -> Result<()> {
    let mut link = TcpEchoLink::connect(addr).with_context(|| format!("connecting to {addr}"))?;
    let mut rtts = Vec::new();
    for n in 0..count {
        match ping(&mut link, n as u64, timeout) {
            Ok(d) => {
                println!("p {n}: {:.3} ms", d.as_secs_f64() * 1e3);
                rtts.push(d.as_secs_f64());
            }
            Err(e) => println!("p {n}: {e}"),
        }
    }
    if rtts.is_empty() {
        bail!("no pongs received");
    }
    let mean = rtts.iter().sum::<f64>() / rtts.len() as f64;
    println!("{} of {count} answered, mean {:.3} ms", rtts.len(), mean * 1e3);
    Ok(())
}
