use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pvcoat_core::coverage::{generate_plan, CoverageParams};
use pvcoat_core::ground_effect::fit_rho;
use pvcoat_core::panel::{extract_corners, ransac_plane_fit};
use pvcoat_core::CornerMethod;
use pvcoat_sim::harness::{compute_rmse, TrackingSample};
use pvcoat_sim::scenario::EvaluationWindow;
use pvcoat_sim::{bundled, io, run_scenario, Scenario, SimError};

#[derive(Parser)]
#[command(name = "pvcoat", version, about = "Quadrotor surface-coating flight simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a bundled scenario name) and print its metrics.
    Simulate {
        scenario: String,
        /// Directory for the log, metrics and plan files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the ground-effect coefficient to hover samples.
    FitRho {
        hover_csv: PathBuf,
        #[arg(long, default_value_t = 0.10)]
        radius: f64,
        #[arg(long, default_value_t = 9.81)]
        g: f64,
    },
    /// Plan sweeps over a panel given its corners.
    Plan {
        corners_json: PathBuf,
        #[arg(long, default_value_t = 0.07)]
        spacing: f64,
        #[arg(long, default_value_t = 0.5)]
        speed: f64,
        #[arg(long, default_value_t = 0.27)]
        standoff: f64,
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        #[arg(long, default_value_t = 1.0)]
        turn_time: f64,
        /// Write the plan here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Position RMSE of a flight log against a reference plan.
    Metrics {
        log_csv: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Detect panel corners in a point cloud (x,y,z CSV).
    Detect {
        cloud_csv: PathBuf,
        #[arg(long, default_value_t = 0.015)]
        epsilon: f64,
        #[arg(long, default_value_t = 300)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List the bundled scenarios.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pvcoat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, SimError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| SimError::config(format!("{}: {e}", path.display())))
}

fn load_scenario(arg: &str) -> Result<Scenario, SimError> {
    let path = Path::new(arg);
    if path.exists() {
        Scenario::from_file(path)
    } else if bundled::names().any(|n| n == arg) {
        bundled::load(arg)
    } else {
        Err(SimError::config(format!("{arg}: no such file or bundled scenario")))
    }
}

fn run(command: Command) -> Result<(), SimError> {
    match command {
        Command::Simulate { scenario, out, seed } => {
            let mut scenario = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            let output = run_scenario(&scenario)?;
            let metrics = serde_json::to_string_pretty(&output.metrics)?;
            if let Some(dir) = out.or_else(|| scenario.output.as_ref().map(PathBuf::from)) {
                std::fs::create_dir_all(&dir)?;
                let stem = if scenario.name.is_empty() { "run" } else { scenario.name.as_str() };
                io::write_log(create(&dir.join(format!("{stem}_log.csv")))?, &output.log)?;
                std::fs::write(dir.join(format!("{stem}_metrics.json")), format!("{metrics}\n"))?;
                if let Some(plan) = &output.plan {
                    io::write_plan(create(&dir.join(format!("{stem}_plan.csv")))?, plan)?;
                }
            }
            println!("{metrics}");
        }
        Command::FitRho { hover_csv, radius, g } => {
            let samples = io::read_hover_file(&hover_csv)?;
            let rho = fit_rho(&samples, radius, g)?;
            println!("{rho:.9}");
        }
        Command::Plan { corners_json, spacing, speed, standoff, margin, turn_time, out } => {
            let corners = io::read_corners_file(&corners_json)?;
            let params = CoverageParams { speed, sweep_spacing: spacing, standoff, margin, turn_time, ..CoverageParams::default() };
            let plan = generate_plan(&corners, &params)?;
            match out {
                Some(path) => io::write_plan(create(&path)?, &plan)?,
                None => io::write_plan(std::io::stdout().lock(), &plan)?,
            }
            eprintln!("{} sweeps, {:.3} s", plan.sweeps().count(), plan.duration());
        }
        Command::Metrics { log_csv, reference } => {
            let log = io::read_log_positions(File::open(&log_csv).map_err(|e| SimError::config(format!("{}: {e}", log_csv.display())))?)?;
            let plan = io::read_plan(File::open(&reference).map_err(|e| SimError::config(format!("{}: {e}", reference.display())))?)?;
            let samples: Vec<TrackingSample> = log
                .iter()
                .map(|&(t, actual)| TrackingSample {
                    t,
                    actual,
                    reference: io::interpolate(&plan, t),
                    over_surface: false,
                    valve_open: false,
                })
                .collect();
            let metrics = compute_rmse(&samples, &EvaluationWindow::Full)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
        }
        Command::Detect { cloud_csv, epsilon, iterations, seed } => {
            let cloud = io::read_cloud_file(&cloud_csv)?;
            let (plane, mask) = ransac_plane_fit(&cloud, epsilon, iterations, seed)?;
            let corners = extract_corners(&cloud.select(&mask), &plane, CornerMethod::MinAreaRect)?;
            println!("{}", io::corners_json(&corners));
        }
        Command::List => {
            for name in bundled::names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}
