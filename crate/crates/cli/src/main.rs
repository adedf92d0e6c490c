use std::fs;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spx_core::netsim::{fit_lognormal, lognormal_quantile};
use spx_core::probe::{run_probe, ProbeConfig, ProbeError, ProbeReport, ProbeServer, ServerOptions, Stall};
use spx_core::scenarios::{
    default_detectors, find_detector, render_grid, run_jaywalk, run_red_light, run_traffic_jam, speedup_table,
    sweep_matrix, write_matrix_csv, DetectorConfig, Outcome, ScenarioKind, SimFile,
};

#[derive(Parser, Debug)]
#[command(name = "spx", version, about = "Speculative cloud offloading: probe, fit, simulate, sweep")]
struct Cli {
    /// Seed for every log-normal latency model (overrides seeds in config files).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output format; each command picks a sensible default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Grid,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Measure round-trip times over TCP.
    #[command(subcommand)]
    Probe(ProbeCommand),
    /// Fit a log-normal RTT model from a median and 90th percentile.
    Fit {
        #[arg(long)]
        median: f64,
        #[arg(long)]
        p90: f64,
    },
    /// Run driving scenarios.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Print detector runtimes and local/cloud speedups.
    Table {
        /// `default` or a JSON file with a list of detectors.
        #[arg(long, default_value = "default")]
        detectors: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum ProbeCommand {
    /// Acknowledge probe frames until interrupted.
    Serve {
        #[arg(long, default_value = "0.0.0.0:7878")]
        bind: String,
        /// Extra delay before each acknowledgment.
        #[arg(long, default_value_t = 0.0)]
        delay_ms: f64,
        /// Withhold acknowledgments for --stall-ms after this many requests.
        #[arg(long, requires = "stall_ms")]
        stall_after: Option<u64>,
        #[arg(long, requires = "stall_after")]
        stall_ms: Option<f64>,
    },
    /// Stream frames to a server and record the RTT trace.
    Run(ProbeRunArgs),
}

#[derive(Args, Debug)]
struct ProbeRunArgs {
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 30.0)]
    rate: f64,
    /// Request frame size in bytes.
    #[arg(long, default_value_t = 33_300)]
    size: usize,
    /// Session length in seconds.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Pause sending while more frames than this are unacknowledged.
    #[arg(long, default_value_t = 30)]
    backlog: usize,
    /// Trace CSV; metadata goes to `<out>.meta.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum SimCommand {
    /// Run the scenario and mode from a config file once.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the traffic-jam sweep described in a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Matrix CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Probe(ProbeCommand::Serve { bind, delay_ms, stall_after, stall_ms }) => {
            let options = ServerOptions {
                reply_delay: duration_ms(delay_ms)?,
                stall: match (stall_after, stall_ms) {
                    (Some(after_requests), Some(ms)) => Some(Stall { after_requests, duration: duration_ms(ms)? }),
                    _ => None,
                },
            };
            let server = ProbeServer::bind(&bind, options)?;
            eprintln!("listening on {}", server.local_addr()?);
            server.serve()?;
            Ok(())
        }
        Command::Probe(ProbeCommand::Run(args)) => probe_run(args, cli.format),
        Command::Fit { median, p90 } => fit(median, p90, cli.seed, cli.format),
        Command::Sim(SimCommand::Run { config, out }) => sim_run(&config, out.as_deref(), cli.seed, cli.format),
        Command::Sim(SimCommand::Sweep { config, out }) => sim_sweep(&config, out.as_deref(), cli.format),
        Command::Table { detectors, out } => table(&detectors, out.as_deref(), cli.format),
    }
}

fn duration_ms(ms: f64) -> Result<Duration> {
    if !(ms >= 0.0 && ms.is_finite()) {
        bail!("durations must be finite and >= 0, got {ms}");
    }
    Ok(Duration::from_secs_f64(ms / 1e3))
}

/// Writes to `out` if given, else stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn probe_run(args: ProbeRunArgs, format: Option<Format>) -> Result<()> {
    let config = ProbeConfig {
        target: args.target,
        rate_hz: args.rate,
        frame_bytes: args.size,
        duration: Duration::from_secs_f64(args.duration.max(0.0)),
        backlog_limit: args.backlog,
        ..ProbeConfig::new("")
    };
    let (report, failure) = match run_probe(&config) {
        Ok(report) => (report, None),
        Err(ProbeError::Disconnected(partial)) => (*partial, Some("connection lost; partial trace written")),
        Err(e) => return Err(e.into()),
    };
    write_probe_outputs(&args.out, &report)?;
    print_probe_summary(&report, format)?;
    match failure {
        Some(msg) => bail!(msg),
        None => Ok(()),
    }
}

fn write_probe_outputs(out: &Path, report: &ProbeReport) -> Result<()> {
    report.trace.save(out).with_context(|| format!("writing {}", out.display()))?;
    let meta = serde_json::json!({
        "sent": report.sent,
        "received": report.trace.len(),
        "lost": report.lost,
        "unmatched_acks": report.unmatched_acks,
        "max_in_flight_at_decision": report.max_in_flight_at_decision,
        "max_schedule_lag_ms": report.max_schedule_lag_ms,
        "pauses": report.pauses,
    });
    let mut meta_path = out.as_os_str().to_owned();
    meta_path.push(".meta.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

fn print_probe_summary(report: &ProbeReport, format: Option<Format>) -> Result<()> {
    let pct = if report.trace.is_empty() { None } else { Some(report.trace.percentiles(&[50.0, 90.0, 99.0])?) };
    match format.unwrap_or(Format::Grid) {
        Format::Json => {
            let v = serde_json::json!({
                "sent": report.sent,
                "received": report.trace.len(),
                "lost": report.lost,
                "pauses": report.pauses.len(),
                "p50_ms": pct.as_ref().map(|p| p[0]),
                "p90_ms": pct.as_ref().map(|p| p[1]),
                "p99_ms": pct.as_ref().map(|p| p[2]),
            });
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
        Format::Csv => {
            println!("sent,received,lost,pauses,p50_ms,p90_ms,p99_ms");
            let p = pct.unwrap_or_else(|| vec![f64::NAN; 3]);
            println!(
                "{},{},{},{},{:.3},{:.3},{:.3}",
                report.sent,
                report.trace.len(),
                report.lost,
                report.pauses.len(),
                p[0],
                p[1],
                p[2]
            );
        }
        Format::Grid => {
            println!(
                "sent {}  received {}  lost {}  backlog pauses {}",
                report.sent,
                report.trace.len(),
                report.lost,
                report.pauses.len()
            );
            if let Some(p) = pct {
                println!("rtt p50 {:.3} ms  p90 {:.3} ms  p99 {:.3} ms", p[0], p[1], p[2]);
            }
        }
    }
    Ok(())
}

fn fit(median: f64, p90: f64, seed: u64, format: Option<Format>) -> Result<()> {
    let f = fit_lognormal(median, p90)?;
    let p99 = lognormal_quantile(f.mu, f.sigma, 0.99);
    match format.unwrap_or(Format::Grid) {
        // loadable as a `latency` entry in sim configs
        Format::Json => println!("{}", serde_json::to_string_pretty(&f.into_model(seed))?),
        Format::Csv => {
            println!("mu,sigma,p50_ms,p90_ms,p99_ms");
            println!("{:.6},{:.6},{:.3},{:.3},{:.3}", f.mu, f.sigma, f.quantile(0.5), f.quantile(0.9), p99);
        }
        Format::Grid => {
            println!("mu={:.4} sigma={:.4}", f.mu, f.sigma);
            println!("p50={:.3} ms p90={:.3} ms p99={:.3} ms (implied by the fit)", f.quantile(0.5), f.quantile(0.9), p99);
        }
    }
    Ok(())
}

fn outcome_csv(outcome: &Outcome) -> String {
    let mut s = String::from("frame,capture_ms,detected,delivered_ms,source\n");
    for f in &outcome.frames {
        s.push_str(&format!("{},{:.3},{},{:.3},{}\n", f.frame, f.capture_ms, f.detected, f.delivered_ms, f.source));
    }
    s
}

fn opt_ms(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3} ms")).unwrap_or_else(|| "-".to_owned())
}

fn sim_run(config: &Path, out: Option<&Path>, seed: u64, format: Option<Format>) -> Result<()> {
    let file = SimFile::load(config).with_context(|| format!("loading {}", config.display()))?.with_seed(seed);
    let cfg = &file.scenario;
    let outcome = match &cfg.scenario {
        ScenarioKind::TrafficJam { .. } => run_traffic_jam(cfg, &file.resolve_mode()?.with_seed(seed))?,
        ScenarioKind::RedLight { .. } => run_red_light(cfg, &file.resolve_mode()?.with_seed(seed), &file.feed_latency())?,
        ScenarioKind::Jaywalk { .. } => run_jaywalk(cfg, file.contingency())?,
    };
    let text = match format.unwrap_or(Format::Json) {
        Format::Json => serde_json::to_string_pretty(&outcome)? + "\n",
        Format::Csv => outcome_csv(&outcome),
        Format::Grid => format!(
            "collided {}\nmin gap {:.3} m\nbrake at {}\nstopped at {}\nresults delivered {}\n",
            outcome.collided,
            outcome.min_gap_m,
            opt_ms(outcome.brake_instant_ms),
            opt_ms(outcome.stop_instant_ms),
            outcome.frames.len()
        ),
    };
    emit(out, &text)
}

fn sim_sweep(config: &Path, out: Option<&Path>, format: Option<Format>) -> Result<()> {
    let file = SimFile::load(config).with_context(|| format!("loading {}", config.display()))?;
    let Some(sweep) = &file.sweep else { bail!("{} has no `sweep` section", config.display()) };
    let detector = find_detector(&file.detectors, &sweep.detector)?;
    let matrix = sweep_matrix(&sweep.speeds_mps, &sweep.response_times_s, &sweep.modes, &file.scenario, detector)?;
    if let Some(path) = out {
        let f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_matrix_csv(&matrix, std::io::BufWriter::new(f))?;
    }
    match format.unwrap_or(Format::Grid) {
        Format::Grid => print!("{}", render_grid(&matrix, std::io::stdout().is_terminal())),
        Format::Csv => write_matrix_csv(&matrix, std::io::stdout().lock())?,
        Format::Json => println!("{}", serde_json::to_string_pretty(&matrix)?),
    }
    Ok(())
}

fn load_detectors(spec: &str) -> Result<Vec<DetectorConfig>> {
    if spec == "default" {
        return Ok(default_detectors());
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
    let detectors: Vec<DetectorConfig> = serde_json::from_str(&text).with_context(|| format!("parsing {spec}"))?;
    for d in &detectors {
        d.validate()?;
    }
    Ok(detectors)
}

fn table(spec: &str, out: Option<&Path>, format: Option<Format>) -> Result<()> {
    let detectors = load_detectors(spec)?;
    let rows = speedup_table(&detectors);
    let text = match format.unwrap_or(Format::Grid) {
        Format::Grid => {
            let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
            let mut s = format!("{:<width$}  {:>9}  {:>9}  {:>7}\n", "model", "local_ms", "cloud_ms", "speedup");
            for r in &rows {
                s.push_str(&format!(
                    "{:<width$}  {:>9.1}  {:>9.1}  {:>6.2}x\n",
                    r.name, r.local_ms, r.cloud_ms, r.speedup
                ));
            }
            s
        }
        Format::Csv => {
            let mut s = String::from("name,local_ms,cloud_ms,speedup\n");
            for r in &rows {
                s.push_str(&format!("{},{},{},{:.2}\n", r.name, r.local_ms, r.cloud_ms, r.speedup));
            }
            s
        }
        // detector entries plus their speedup; loadable again with --detectors
        Format::Json => {
            let entries: Vec<serde_json::Value> = detectors
                .iter()
                .zip(&rows)
                .map(|(d, r)| {
                    let mut v = serde_json::to_value(d).expect("detector serializes");
                    v["speedup"] = serde_json::json!(r.speedup);
                    v
                })
                .collect();
            serde_json::to_string_pretty(&entries)? + "\n"
        }
    };
    emit(out, &text)
}
