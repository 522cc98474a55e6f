use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rotorlab::evaluation::pipeline::{self, spline_mode};
use rotorlab::evaluation::{
    emit_report, markdown, read_trials_csv, run_grid, run_trial, trial_seeds, write_summary_csv, ControllerKind,
    FlightLog, Models, Predictor, Scenario, ScenarioConfig, TrajectoryChoice, TrialSpec,
};
use rotorlab::learning::{Dataset, LabelMode, MlpModel, FEATURE_DIM, LABEL_DIM};

#[derive(Parser)]
#[command(name = "rotorlab", version, about = "Quadrotor residual estimation and tracking-control experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML scenario file; built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Fly with the cable-suspended payload.
    #[arg(long, global = true)]
    payload: bool,
    /// Exit with status 3 if any flight crashed.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fly one trial and write its flight log.
    Sim {
        #[arg(long, default_value = "lee")]
        controller: String,
        #[arg(long, default_value = "figure8")]
        trajectory: String,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Fly random-waypoint data-collection flights with INDI.
    Collect,
    /// Turn collected flights into a training dataset.
    Label {
        /// Directory holding the collected flights; defaults to the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Use raw INDI estimates as labels instead of the smoothed ones.
        #[arg(long)]
        raw: bool,
    },
    /// Train the residual network.
    Train {
        /// Dataset CSV; defaults to the labelled dataset in the output directory.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run the controller × trajectory grid.
    Eval {
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated controllers; defaults to the config list.
        #[arg(long, value_delimiter = ',')]
        controller: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        trajectory: Vec<String>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Rebuild the tables from a trials CSV.
    Report {
        /// Defaults to `trials.csv` in the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn load_scenario(common: &Common) -> Result<Scenario> {
    let config = match &common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    Ok(config.build()?)
}

fn mode_suffix(payload: bool) -> &'static str {
    if payload {
        "payload"
    } else {
        "free"
    }
}

fn load_model(path: &Path) -> Result<Arc<MlpModel>> {
    Ok(Arc::new(MlpModel::load_expecting(path, FEATURE_DIM, LABEL_DIM)?))
}

fn flight_file(index: usize) -> String {
    format!("flight_{index:03}.csv")
}

fn run(cli: Cli) -> Result<bool> {
    let common = &cli.common;
    let scenario = load_scenario(common)?;
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    let out = &common.out;
    let payload = common.payload;
    let mut crashed = false;

    match cli.command {
        Command::Sim { controller, trajectory, model } => {
            let controller: ControllerKind = controller.parse()?;
            let trajectory = TrajectoryChoice::parse(&trajectory, scenario.config.trajectory.duration)?;
            let predictor = match (&model, controller.needs_model()) {
                (Some(p), true) => Predictor::Model(load_model(p)?),
                (None, true) => bail!("controller {controller} needs --model"),
                _ => Predictor::None,
            };
            let spec = TrialSpec { controller, trajectory, payload };
            let log = run_trial(&scenario, &spec, &predictor, common.seed)?;
            let path = out.join(format!("sim_{}_{}_{}_{}.csv", mode_suffix(payload), controller, log.trajectory, common.seed));
            log.write_csv(&path)?;
            println!("{}: mean error {:.6} m{}", path.display(), log.tracking_error()?, if log.crashed { " (crashed)" } else { "" });
            crashed = log.crashed;
        }
        Command::Collect => {
            let logs = pipeline::collect(&scenario, payload, common.seed)?;
            let mut samples = 0;
            for (i, log) in logs.iter().enumerate() {
                log.write_csv(&out.join(flight_file(i)))?;
                samples += log.rows.len();
                crashed |= log.crashed;
            }
            println!("collected {} flights, {samples} ticks, into {}", logs.len(), out.display());
        }
        Command::Label { input, raw } => {
            let dir = input.unwrap_or_else(|| out.clone());
            let mut logs = Vec::new();
            for i in 0.. {
                let p = dir.join(flight_file(i));
                if !p.exists() {
                    break;
                }
                logs.push(FlightLog::read_csv(&p, ControllerKind::Indi, &format!("waypoints_{i:03}"), 0)?);
            }
            if logs.is_empty() {
                bail!("no {} files in {}", flight_file(0), dir.display());
            }
            let mode = if raw { LabelMode::Raw } else { spline_mode(&scenario) };
            let dataset = pipeline::label(&scenario, &logs, mode)?;
            let path = out.join(if raw { "dataset_raw.csv" } else { "dataset.csv" });
            dataset.write_csv(&path)?;
            println!("{}: {} samples from {} flights", path.display(), dataset.len(), logs.len());
        }
        Command::Train { dataset } => {
            let path = dataset.unwrap_or_else(|| out.join("dataset.csv"));
            let data = Dataset::read_csv(&path)?;
            let (model, report) = pipeline::train_model(&scenario, &data, common.seed)?;
            let model_path = out.join(format!("model_{}.bin", mode_suffix(payload)));
            model.save(&model_path)?;
            let report_path = out.join(format!("train_{}.csv", mode_suffix(payload)));
            report.write_csv(&report_path)?;
            if let Some(last) = report.epochs.last() {
                println!(
                    "{}: {} epochs, train loss {:.5}, validation loss {:.5}",
                    model_path.display(),
                    report.epochs.len(),
                    last.train_loss,
                    last.validation_loss
                );
            }
        }
        Command::Eval { trials, controller, trajectory, model } => {
            let names = if controller.is_empty() { scenario.config.eval.controllers.clone() } else { controller };
            let mut controllers = names.iter().map(|c| c.parse()).collect::<rotorlab::Result<Vec<ControllerKind>>>()?;
            if model.is_none() && controllers.iter().any(|c| c.needs_model()) {
                eprintln!("no --model given, skipping learned controllers");
                controllers.retain(|c| !c.needs_model());
            }
            let mut models = Models::default();
            if let Some(p) = &model {
                let m = Some(load_model(p)?);
                if payload {
                    models.payload = m;
                } else {
                    models.no_payload = m;
                }
            }
            let traj_names = if trajectory.is_empty() { scenario.config.eval.trajectories.clone() } else { trajectory };
            let hover_duration = scenario.config.trajectory.duration;
            let mut specs = Vec::new();
            for t in &traj_names {
                let choice = TrajectoryChoice::parse(t, hover_duration)?;
                for &c in &controllers {
                    specs.push(TrialSpec { controller: c, trajectory: choice.clone(), payload });
                }
            }
            let n = trials.unwrap_or(scenario.config.eval.trials);
            if n == 0 {
                bail!("--trials must be at least 1");
            }
            let grid = run_grid(&scenario, &specs, &models, &trial_seeds(common.seed, n))?;
            emit_report(&grid.report, &grid.logs, out)?;
            print!("{}", markdown(&grid.report));
            crashed = grid.report.any_crash();
        }
        Command::Report { input } => {
            let path = input.unwrap_or_else(|| out.join("trials.csv"));
            let report = read_trials_csv(&path)?;
            let md = markdown(&report);
            let md_path = out.join("table.md");
            fs::write(&md_path, &md).with_context(|| format!("writing {}", md_path.display()))?;
            write_summary_csv(&report, &out.join("summary.csv"))?;
            print!("{md}");
            crashed = report.any_crash();
        }
    }
    Ok(crashed && common.strict)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("crashed flights present (--strict)");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
