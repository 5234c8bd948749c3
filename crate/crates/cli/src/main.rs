use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use odmts_core::formats::{
    read_trips, write_comparison, write_demand, write_plan_set, write_summary, write_trips,
    InstanceFile, SolutionFile,
};
use odmts_core::reporting::{compare, summarize, SummaryStats};
use odmts_core::simulator::{
    cost_reduction, min_fleet_fixed_routes, run_baseline, run_scenario, scenario_demand,
    sweep_fleet_sizes, RoutesFile, ScenarioConfig, SimulationOutput,
};
use odmts_core::{check_solution, solve_dispatch};

#[derive(Parser)]
#[command(
    name = "odmts",
    version,
    about = "On-demand shuttle dispatch and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file.
    config: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the fleet size.
    #[arg(long)]
    fleet_size: Option<u32>,
    /// Trips file to write.
    #[arg(long)]
    trips: Option<PathBuf>,
    /// Summary file to write.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the on-demand service.
    Simulate(RunArgs),
    /// Evaluate the fixed-route baseline on the scenario's demand.
    Baseline(RunArgs),
    /// Simulate one shared demand stream at several fleet sizes.
    Sweep {
        config: PathBuf,
        /// Fleet sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the per-size summary files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Solve a one-shot dispatch instance.
    Solve {
        instance: PathBuf,
        /// Solution file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the plan set (TOML instance, or CSV for a `.csv` path).
        #[arg(long)]
        dump_plans: Option<PathBuf>,
    },
    /// Write the scenario's demand stream as a demand file.
    GenDemand {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Demand file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Buses needed to run fixed routes at their headways.
    Fleetcalc {
        routes: PathBuf,
        /// Report the cost reduction of replacing the buses with this many shuttles.
        #[arg(long)]
        shuttles: Option<u32>,
    },
    /// Compare a baseline trips file against an on-demand trips file.
    Compare {
        base: PathBuf,
        odmts: PathBuf,
        #[arg(long, default_value_t = 900)]
        bin: i64,
        /// Comparison table; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, seed: Option<u64>, fleet: Option<u32>) -> Result<ScenarioConfig> {
    let mut config = ScenarioConfig::from_file(path)?;
    if let Some(s) = seed {
        config = config.with_seed(s);
    }
    if let Some(n) = fleet {
        config = config.with_fleet_size(n);
    }
    config.validate()?;
    Ok(config)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes to `path`, or standard output.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_summary(label: &str, s: &SummaryStats) {
    println!(
        "{label}: {} requests, {} completed, {} abandoned, {} pending, {} unserved",
        s.generated, s.completed, s.abandoned, s.pending, s.unserved
    );
    println!(
        "  waiting   mean {:.1} s  median {:.0} s  p90 {:.0} s",
        s.waiting.mean, s.waiting.median, s.waiting.p90
    );
    println!(
        "  trip time mean {:.1} s  median {:.0} s  p90 {:.0} s",
        s.trip_time.mean, s.trip_time.median, s.trip_time.p90
    );
    if let Some(u) = s.utilization {
        println!("  utilization {:.1}%", u * 100.0);
    }
}

fn write_run(out: &SimulationOutput, trips: &Path, summary: &Path) -> Result<()> {
    let mut w = create(trips)?;
    write_trips(&mut w, &out.records)?;
    w.flush()?;
    let mut w = create(summary)?;
    write_summary(&mut w, &out.summary)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let config = load(&a.config, a.seed, a.fleet_size)?;
            let out = run_scenario(&config)?;
            let trips = a.trips.unwrap_or_else(|| "trips.csv".into());
            let summary = a.summary.unwrap_or_else(|| "summary.csv".into());
            write_run(&out, &trips, &summary)?;
            print_summary("odmts", &out.summary);
        }
        Command::Baseline(a) => {
            let config = load(&a.config, a.seed, a.fleet_size)?;
            let out = run_baseline(&config)?;
            let trips = a.trips.unwrap_or_else(|| "baseline_trips.csv".into());
            let summary = a.summary.unwrap_or_else(|| "baseline_summary.csv".into());
            write_run(&out, &trips, &summary)?;
            print_summary("baseline", &out.summary);
        }
        Command::Sweep {
            config,
            sizes,
            seed,
            out_dir,
        } => {
            let config = load(&config, seed, None)?;
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            println!("fleet,completed,abandoned,mean_waiting,mean_trip_time,p90_trip_time");
            for (n, out) in sweep_fleet_sizes(&config, &sizes)? {
                let mut w = create(&out_dir.join(format!("summary_{n}.csv")))?;
                write_summary(&mut w, &out.summary)?;
                w.flush()?;
                let s = &out.summary;
                println!(
                    "{n},{},{},{:.1},{:.1},{:.0}",
                    s.completed, s.abandoned, s.waiting.mean, s.trip_time.mean, s.trip_time.p90
                );
            }
        }
        Command::Solve {
            instance,
            out,
            dump_plans,
        } => {
            let text = fs::read_to_string(&instance)
                .with_context(|| format!("reading {}", instance.display()))?;
            let problem = InstanceFile::parse(&text)?.into_problem()?;
            if let Some(p) = dump_plans {
                let mut w = create(&p)?;
                if p.extension().is_some_and(|e| e == "csv") {
                    write_plan_set(&mut w, &problem.plan_set)?;
                } else {
                    w.write_all(InstanceFile::from_problem(&problem).to_toml().as_bytes())?;
                }
                w.flush()?;
            }
            let solution = solve_dispatch(&problem)?;
            if let Err(v) = check_solution(&problem, &solution) {
                bail!("solver returned an invalid solution: {v:?}");
            }
            let mut w = output(out.as_deref())?;
            w.write_all(SolutionFile::new(&problem, &solution).to_toml().as_bytes())?;
            w.flush()?;
        }
        Command::GenDemand { config, seed, out } => {
            let config = load(&config, seed, None)?;
            let world = config.world()?;
            let demand = scenario_demand(&config, &world)?;
            let mut w = output(out.as_deref())?;
            write_demand(&mut w, &demand)?;
            w.flush()?;
        }
        Command::Fleetcalc { routes, shuttles } => {
            let text = fs::read_to_string(&routes)
                .with_context(|| format!("reading {}", routes.display()))?;
            let file: RoutesFile =
                toml::from_str(&text).with_context(|| format!("parsing {}", routes.display()))?;
            if file.routes.is_empty() {
                bail!("{} lists no routes", routes.display());
            }
            for r in &file.routes {
                r.validate().map_err(anyhow::Error::msg)?;
                println!("{:<16} {:>3} buses", r.name, r.buses());
            }
            let buses = min_fleet_fixed_routes(&file.routes);
            println!("total            {buses:>3} buses");
            if let Some(n) = shuttles {
                println!(
                    "cost reduction with {n} shuttles: {}%",
                    cost_reduction(buses, n)
                );
            }
        }
        Command::Compare {
            base,
            odmts,
            bin,
            out,
        } => {
            let read = |p: &Path| -> Result<_> {
                let f = File::open(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(read_trips(f)?)
            };
            let cmp = compare(
                &summarize(&read(&base)?, bin)?,
                &summarize(&read(&odmts)?, bin)?,
            )?;
            eprint!("{}", cmp.to_text());
            let mut w = output(out.as_deref())?;
            write_comparison(&mut w, &cmp)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
