use std::fs::File;
use std::io::BufWriter;
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use protoattest::attest::{check_trace_file, TraceError, Verdict};
use protoattest::bench::{self, BenchReport, Comparison};
use protoattest::hbw::{self, Bays, HbwState};
use protoattest::schema::{gen_capnp_with_file_id, hbw_interface_spec, parse_interface_file};
use protoattest::sim::{self, client, AttackPattern, SimConfig};
use protoattest::verifier::check_safety;

#[derive(Parser)]
#[command(name = "protoattest", version, about = "Protocol verification and attestation for a simulated high-bay warehouse")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustively check the warehouse protocol over every state.
    Verify {
        /// Write violating states here, one per line.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Decide whether a trace file conforms to the protocol.
    Decide {
        trace: PathBuf,
        #[arg(long, default_value = "hbw")]
        protocol: String,
    },
    /// Print Cap'n Proto schema text.
    GenSchema {
        /// Use the built-in warehouse interface.
        #[arg(long, conflicts_with = "file")]
        hbw: bool,
        /// Interface description file.
        #[arg(required_unless_present = "hbw")]
        file: Option<PathBuf>,
        /// Prepend `@0x<hex>;`.
        #[arg(long)]
        file_id: Option<String>,
    },
    /// Run the networked simulation, or a single service with --role.
    Simulate(SimulateArgs),
    /// Closed-loop latency benchmark.
    Bench {
        /// Seconds.
        #[arg(long, default_value_t = 30.0)]
        duration: f64,
        #[arg(long, conflicts_with = "paired")]
        attested: bool,
        /// Run without and then with attestation and compare.
        #[arg(long)]
        paired: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Latency CDF as CSV.
        #[arg(long)]
        cdf: Option<PathBuf>,
        /// Report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Role {
    Driver,
    Controller,
    Proxy,
    Client,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    requests: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Route traffic through the attestation proxy.
    #[arg(long)]
    attested: bool,
    /// Attack pattern 1..5 for the controller.
    #[arg(long, value_name = "1..5")]
    compromised: Option<AttackPattern>,
    /// Run only this service in the foreground.
    #[arg(long, value_enum)]
    role: Option<Role>,
    /// Address this service listens on.
    #[arg(long)]
    listen: Option<SocketAddr>,
    #[arg(long)]
    controller: Option<SocketAddr>,
    #[arg(long)]
    driver: Option<SocketAddr>,
    /// Proxy address: driver-facing listener for the proxy role, target for the client role.
    #[arg(long)]
    proxy: Option<SocketAddr>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify { report } => verify(report.as_deref()),
        Command::Decide { trace, protocol } => decide(&trace, &protocol),
        Command::GenSchema { hbw, file, file_id } => gen_schema(hbw, file.as_deref(), file_id.as_deref()),
        Command::Simulate(args) => simulate(args),
        Command::Bench {
            duration,
            attested,
            paired,
            seed,
            cdf,
            json,
        } => run_bench(duration, attested, paired, seed, cdf, json),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}

fn verify(report: Option<&Path>) -> Result<ExitCode> {
    let result = check_safety(&hbw::protocol(), &hbw::spec());
    println!("{} ({:.2?})", result.summary(), result.elapsed);
    if let Some(path) = report {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        result.write_violations(BufWriter::new(file))?;
    }
    Ok(if result.is_safe() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn decide(trace: &Path, protocol: &str) -> Result<ExitCode> {
    let report = match check_trace_file(trace, protocol) {
        Ok(r) => r,
        Err(TraceError::Parse(e)) => {
            eprintln!("{}: {e}", trace.display());
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e.into()),
    };
    for s in &report.snapshots {
        println!("{:>4}  {}  =>  {}", s.line, s.event, s.state);
    }
    match report.verdict {
        Verdict::Conformant => {
            let note = if report.incomplete_cycle { " (ends mid-cycle)" } else { "" };
            println!("conformant{note}: final state {}", report.final_state);
            Ok(ExitCode::SUCCESS)
        }
        Verdict::FailSafe(reason) => {
            let line = report.offending_line.unwrap_or(0);
            println!("nonconformant at line {line}: {reason}");
            Ok(ExitCode::FAILURE)
        }
    }
}

fn gen_schema(hbw: bool, file: Option<&Path>, file_id: Option<&str>) -> Result<ExitCode> {
    let spec = match (hbw, file) {
        (true, _) => hbw_interface_spec(),
        (false, Some(f)) => parse_interface_file(f)?,
        (false, None) => bail!("pass --hbw or an interface file"),
    };
    print!("{}", gen_capnp_with_file_id(&spec, file_id)?);
    Ok(ExitCode::SUCCESS)
}

fn need(addr: Option<SocketAddr>, flag: &str) -> Result<SocketAddr> {
    addr.with_context(|| format!("--{flag} is required for this role"))
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let cfg = SimConfig {
        requests: args.requests,
        seed: args.seed,
        attested: args.attested,
        compromised: args.compromised,
        ..SimConfig::default()
    };
    let initial = Bays::empty();
    match args.role {
        None => {
            let out = sim::run_simulation(&cfg)?;
            println!(
                "{} requests: {} ok, {} rejected",
                out.client.sent, out.client.ok, out.client.rejected
            );
            println!("driver bays:       {}", out.driver.bays);
            println!("controller mirror: {}", out.controller_mirror);
            if let Some(n) = out.first_injection {
                println!("first malicious request: {n}");
            }
            for f in &out.failsafes {
                println!("fail-safe at request {}: `{}`: {}", f.request, f.event, f.reason);
            }
            println!("damaged: {}", out.damaged());
            Ok(if out.damaged() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Some(Role::Driver) => {
            let d = sim::run_driver(TcpListener::bind(need(args.listen, "listen")?)?, initial)?;
            println!("driver listening on {}", d.addr());
            d.wait();
            Ok(ExitCode::SUCCESS)
        }
        Some(Role::Controller) => {
            let c = sim::run_controller(
                TcpListener::bind(need(args.listen, "listen")?)?,
                need(args.driver, "driver")?,
                initial,
                args.compromised,
            )?;
            println!("controller listening on {}", c.addr());
            c.wait();
            Ok(ExitCode::SUCCESS)
        }
        Some(Role::Proxy) => {
            let p = sim::run_proxy(
                TcpListener::bind(need(args.listen, "listen")?)?,
                TcpListener::bind(need(args.proxy, "proxy")?)?,
                need(args.controller, "controller")?,
                need(args.driver, "driver")?,
                HbwState::sigma(initial, None),
            )?;
            println!("proxy listening on {} (clients) and {} (controller)", p.addr(), p.driver_addr());
            p.wait();
            Ok(ExitCode::SUCCESS)
        }
        Some(Role::Client) => {
            let target = args.proxy.or(args.controller).context("--proxy or --controller is required")?;
            let s = client::run_client(target, &cfg)?;
            println!("{} requests: {} ok, {} rejected", s.sent, s.ok, s.rejected);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}{ext}"))
}

fn write_outputs(report: &BenchReport, cdf: Option<&Path>, json: Option<&Path>) -> Result<()> {
    if let Some(p) = cdf {
        bench::emit_cdf(report, p)?;
    }
    if let Some(p) = json {
        report.write_json(p)?;
    }
    Ok(())
}

fn run_bench(
    duration: f64,
    attested: bool,
    paired: bool,
    seed: u64,
    cdf: Option<PathBuf>,
    json: Option<PathBuf>,
) -> Result<ExitCode> {
    if !(duration.is_finite() && duration >= 0.0) {
        bail!("--duration must be a non-negative number of seconds");
    }
    let duration = Duration::from_secs_f64(duration);
    if paired {
        let cmp = Comparison::run(duration, seed)?;
        println!("{cmp}");
        for (report, tag) in [(&cmp.unattested, "unattested"), (&cmp.attested, "attested")] {
            let cdf = cdf.as_deref().map(|p| with_suffix(p, tag));
            let json = json.as_deref().map(|p| with_suffix(p, tag));
            write_outputs(report, cdf.as_deref(), json.as_deref())?;
        }
    } else {
        let report = bench::run_bench(duration, attested, seed)?;
        println!("{report}");
        write_outputs(&report, cdf.as_deref(), json.as_deref())?;
    }
    Ok(ExitCode::SUCCESS)
}
