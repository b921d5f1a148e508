use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cellfree::sim::{
    assign_pilots, build_realization, convergence_trace, nmse_sweep, run_simulation, EvalMode,
    NmseSample, PilotScheme, Profile, RunOptions, Scheme, SimConfig, SimMetrics, Summary,
};
use cellfree::wsr::TransmissionMode;

type BoxError = Box<dyn std::error::Error>;

#[derive(Parser, Debug)]
#[command(name = "cellfree", version, about = "Cell-free MIMO scheduling and beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON file whose keys override the profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, global = true, value_enum)]
    transmission: Option<TransmissionArg>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = ProfileArg::Paper)]
    profile: ProfileArg,
    /// Worker threads for the realization pool.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also write per-iteration optimizer objectives.
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Proportional-fair simulation with the proposed scheduler.
    Simulate,
    /// Proposed schemes against round-robin ZF and conjugate beamforming.
    CompareBaselines,
    /// Objective per iteration on the first slot of the first realization.
    ConvergenceTrace,
    /// Channel-estimation NMSE of HAC and random pilots versus user density.
    NmseSweep {
        /// Users per km².
        #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500,600")]
        densities: Vec<f64>,
    },
    /// Pilot groups and positions of the first realization.
    PilotClusters,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    #[value(name = "PI")]
    Pi,
    #[value(name = "PEAR")]
    Pear,
    #[value(name = "PEA")]
    Pea,
    #[value(name = "PEARNF")]
    Pearnf,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Pi => EvalMode::Pi,
            ModeArg::Pear => EvalMode::Pear,
            ModeArg::Pea => EvalMode::Pea,
            ModeArg::Pearnf => EvalMode::Pearnf,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TransmissionArg {
    Coherent,
    Noncoherent,
}

impl From<TransmissionArg> for TransmissionMode {
    fn from(t: TransmissionArg) -> Self {
        match t {
            TransmissionArg::Coherent => TransmissionMode::Coherent,
            TransmissionArg::Noncoherent => TransmissionMode::NonCoherent,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        }
    }
}

/// Profile, then config file, then command-line flags.
fn load_config(c: &Common) -> Result<SimConfig, BoxError> {
    let base = SimConfig::profile(c.profile.into());
    let mut config = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            SimConfig::from_json_str(&base, &text)?
        }
        None => base,
    };
    if let Some(seed) = c.seed {
        config.seed = seed;
    }
    if let Some(mode) = c.mode {
        config.mode = mode.into();
    }
    if let Some(t) = c.transmission {
        config.transmission = t.into();
    }
    config.validate()?;
    Ok(config)
}

fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: impl IntoIterator<Item = T>) -> Result<(), BoxError> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), BoxError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct SlotRow {
    realization: usize,
    slot: usize,
    sum_se: f64,
    scheduled: usize,
    iterations: usize,
}

#[derive(Serialize)]
struct UserRow {
    realization: usize,
    user: usize,
    long_term_se: f64,
}

#[derive(Serialize)]
struct TraceRow {
    realization: usize,
    slot: usize,
    iteration: usize,
    objective: f64,
}

fn write_metrics(dir: &Path, prefix: &str, m: &SimMetrics, traces: bool) -> Result<(), BoxError> {
    let from = m.window_start();
    write_csv(
        dir,
        &format!("{prefix}slot_sum_se.csv"),
        m.realizations.iter().flat_map(|r| {
            (0..r.slot_sum_se.len()).map(move |t| SlotRow {
                realization: r.index,
                slot: t,
                sum_se: r.slot_sum_se[t],
                scheduled: r.occupancy[t].iter().sum(),
                iterations: r.iterations[t],
            })
        }),
    )?;
    write_csv(
        dir,
        &format!("{prefix}user_se.csv"),
        m.realizations.iter().flat_map(|r| {
            r.long_term_user_se(from)
                .into_iter()
                .enumerate()
                .map(move |(u, se)| UserRow {
                    realization: r.index,
                    user: u,
                    long_term_se: se,
                })
        }),
    )?;
    if traces {
        write_csv(
            dir,
            &format!("{prefix}traces.csv"),
            m.realizations.iter().flat_map(|r| {
                r.traces.iter().enumerate().flat_map(move |(t, tr)| {
                    tr.iter().enumerate().map(move |(i, &v)| TraceRow {
                        realization: r.index,
                        slot: t,
                        iteration: i,
                        objective: v,
                    })
                })
            }),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RunReport<'a, T: Serialize> {
    command: &'a str,
    config: &'a SimConfig,
    overhead_factor: f64,
    results: T,
}

fn report<'a, T: Serialize>(command: &'a str, config: &'a SimConfig, results: T) -> RunReport<'a, T> {
    RunReport {
        command,
        config,
        overhead_factor: config.overhead_factor(),
        results,
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

fn one_line(s: &Summary, elapsed: f64) -> String {
    format!(
        "{} {}: sum SE {:.3} nats/s/Hz, Jain {} (scheduled {}), runtime {:.1} s",
        s.scheme,
        s.mode,
        s.sum_se,
        fmt_opt(s.jain_all_users),
        fmt_opt(s.jain_scheduled_users),
        elapsed
    )
}

#[derive(Serialize)]
struct ComparisonRow<'a> {
    scheme: &'a str,
    sum_se: f64,
    jain_all_users: Option<f64>,
    jain_scheduled_users: Option<f64>,
}

#[derive(Serialize)]
struct IterRow {
    iteration: usize,
    objective: f64,
}

#[derive(Serialize)]
struct NmseRow {
    user_density: f64,
    nmse_hac: f64,
    nmse_random: f64,
}

#[derive(Serialize)]
struct PilotRow {
    user: usize,
    x_km: f64,
    y_km: f64,
    pilot: usize,
    group: usize,
}

#[derive(Serialize)]
struct RrhRow {
    rrh: usize,
    x_km: f64,
    y_km: f64,
}

fn run(cli: Cli) -> Result<String, BoxError> {
    let start = Instant::now();
    let config = load_config(&cli.common)?;
    let out = &cli.common.out;
    fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let options = RunOptions {
        workers: cli.common.workers,
        keep_traces: cli.common.trace,
    };
    match cli.command {
        Command::Simulate => {
            let m = run_simulation(&config, Scheme::Proposed(config.transmission), options)?;
            write_metrics(out, "", &m, options.keep_traces)?;
            let s = m.summary();
            write_json(out, "summary.json", &report("simulate", &config, &s))?;
            Ok(one_line(&s, start.elapsed().as_secs_f64()))
        }
        Command::CompareBaselines => {
            let mut summaries = Vec::new();
            for scheme in Scheme::ALL {
                let m = run_simulation(&config, scheme, options)?;
                write_metrics(out, &format!("{}_", scheme.name()), &m, options.keep_traces)?;
                summaries.push(m.summary());
            }
            write_csv(
                out,
                "comparison.csv",
                summaries.iter().map(|s| ComparisonRow {
                    scheme: &s.scheme,
                    sum_se: s.sum_se,
                    jain_all_users: s.jain_all_users,
                    jain_scheduled_users: s.jain_scheduled_users,
                }),
            )?;
            write_json(
                out,
                "summary.json",
                &report("compare-baselines", &config, &summaries),
            )?;
            let parts: Vec<String> =
                summaries.iter().map(|s| format!("{} {:.3}", s.scheme, s.sum_se)).collect();
            Ok(format!(
                "sum SE (nats/s/Hz): {}; runtime {:.1} s",
                parts.join(", "),
                start.elapsed().as_secs_f64()
            ))
        }
        Command::ConvergenceTrace => {
            let o = convergence_trace(&config, config.transmission)?;
            write_csv(
                out,
                "convergence.csv",
                o.trace.iter().enumerate().map(|(i, &v)| IterRow {
                    iteration: i,
                    objective: v,
                }),
            )?;
            #[derive(Serialize)]
            struct Trace {
                transmission: TransmissionMode,
                iterations: usize,
                converged: bool,
                final_objective: f64,
                scheduled_pairs: usize,
            }
            let t = Trace {
                transmission: config.transmission,
                iterations: o.iterations,
                converged: o.converged,
                final_objective: *o.trace.last().expect("trace holds the initial value"),
                scheduled_pairs: o.schedule.total(),
            };
            write_json(out, "summary.json", &report("convergence-trace", &config, &t))?;
            Ok(format!(
                "{} optimizer: {} iterations, objective {:.3} -> {:.3}, runtime {:.1} s",
                t.transmission,
                t.iterations,
                o.trace[0],
                t.final_objective,
                start.elapsed().as_secs_f64()
            ))
        }
        Command::NmseSweep { densities } => {
            let samples = nmse_sweep(&config, &densities, options)?;
            write_csv(out, "nmse_samples.csv", samples.iter())?;
            let rows: Vec<NmseRow> = densities
                .iter()
                .map(|&d| {
                    let at: Vec<&NmseSample> =
                        samples.iter().filter(|s| s.user_density == d).collect();
                    let n = at.len() as f64;
                    NmseRow {
                        user_density: d,
                        nmse_hac: at.iter().map(|s| s.hac).sum::<f64>() / n,
                        nmse_random: at.iter().map(|s| s.random).sum::<f64>() / n,
                    }
                })
                .collect();
            write_csv(out, "nmse.csv", rows.iter())?;
            write_json(out, "summary.json", &report("nmse-sweep", &config, &rows))?;
            let parts: Vec<String> = rows
                .iter()
                .map(|r| format!("{}: {:.4}/{:.4}", r.user_density, r.nmse_hac, r.nmse_random))
                .collect();
            Ok(format!(
                "NMSE hac/random by density: {}; runtime {:.1} s",
                parts.join(", "),
                start.elapsed().as_secs_f64()
            ))
        }
        Command::PilotClusters => {
            let real = build_realization(&config, 0)?;
            let pilots = assign_pilots(&config, &real.network, PilotScheme::Hac, 0);
            let mut group_of = vec![0; real.network.num_users()];
            for (g, members) in pilots.groups.iter().enumerate() {
                for &u in members {
                    group_of[u] = g;
                }
            }
            write_csv(
                out,
                "pilot_clusters.csv",
                real.network.user_positions.iter().enumerate().map(|(u, p)| PilotRow {
                    user: u,
                    x_km: p.x,
                    y_km: p.y,
                    pilot: pilots.pilot_of[u],
                    group: group_of[u],
                }),
            )?;
            write_csv(
                out,
                "rrhs.csv",
                real.network.rrh_positions.iter().enumerate().map(|(r, p)| RrhRow {
                    rrh: r,
                    x_km: p.x,
                    y_km: p.y,
                }),
            )?;
            Ok(format!(
                "{} users in {} pilot groups of at most {}; runtime {:.1} s",
                real.network.num_users(),
                pilots.groups.len(),
                config.pilot_length,
                start.elapsed().as_secs_f64()
            ))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
