use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rotdoa::channel::SignalModel;
use rotdoa::crlb::crlb_closed_form;
use rotdoa::estimators::EstimatorKind;
use rotdoa::geometry::GlobalDirection;
use rotdoa::harness::{self, EstimatorSpec, ExperimentConfig, SweepAxis};
use rotdoa::Error;

const PAPER_SCALE_TRIALS: usize = 2000;

#[derive(Parser)]
#[command(name = "rotdoa", version, about = "Direction finding with a rotatable planar array")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form bounds for one direction.
    Crlb {
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one estimator once and print its estimate.
    Run {
        #[arg(long)]
        estimator: String,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// RMSE against SNR.
    SweepSnr(SweepArgs),
    /// RMSE against elevation.
    SweepTheta(SweepArgs),
    /// RMSE against the pre-rotation grid size.
    SweepQ(SweepArgs),
    /// RMSE against iteration index.
    Convergence(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; stdout when neither this nor the config names one.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "paper_scale")]
    trials: Option<usize>,
    /// Use 2000 trials per point.
    #[arg(long)]
    paper_scale: bool,
}

fn load(path: Option<&PathBuf>) -> rotdoa::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn sweep(axis: SweepAxis, args: SweepArgs) -> rotdoa::Result<()> {
    let (mut cfg, names_sweep) = match &args.config {
        Some(p) => ExperimentConfig::load_unchecked(p)?,
        None => (ExperimentConfig::default(), false),
    };
    if names_sweep && cfg.sweep != axis && !cfg.values.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "config sweeps {} but the subcommand sweeps {axis}",
            cfg.sweep
        )));
    }
    cfg.sweep = axis;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if args.paper_scale {
        cfg.trials = PAPER_SCALE_TRIALS;
    }
    cfg.validate()?;
    let result = harness::run_monte_carlo(&cfg)?;
    match args.out.or(cfg.output) {
        Some(path) => harness::write_csv(&result, &path),
        None => harness::write_csv_to(&result, std::io::stdout().lock()).map_err(|source| Error::Csv {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn model_for(cfg: &ExperimentConfig, snr_db: Option<f64>) -> rotdoa::Result<SignalModel> {
    cfg.signal_model(snr_db.unwrap_or(cfg.snr_db))
}

fn execute(cli: Cli) -> rotdoa::Result<()> {
    match cli.command {
        Command::Crlb {
            theta,
            phi,
            k,
            snr_db,
            config,
        } => {
            let cfg = load(config.as_ref())?;
            let model = model_for(&cfg, snr_db)?;
            let dir = GlobalDirection::from_degrees(theta, phi)?;
            let bound = crlb_closed_form(
                &cfg.array,
                dir.theta(),
                dir.phi(),
                k.unwrap_or(cfg.snapshots),
                model.pt,
                model.sigma2,
            )?;
            println!("crlb_theta_rad2 {}", bound.crlb_theta);
            println!("crlb_phi_rad2 {}", bound.crlb_phi);
            Ok(())
        }
        Command::Run {
            estimator,
            theta,
            phi,
            seed,
            snr_db,
            config,
        } => {
            let mut cfg = load(config.as_ref())?;
            let spec: EstimatorSpec = estimator.parse()?;
            cfg.estimators = vec![spec];
            cfg.theta_deg = theta;
            cfg.phi_deg = phi;
            cfg.snr_db = snr_db.unwrap_or(cfg.snr_db);
            cfg.validate()?;
            let truth = GlobalDirection::from_degrees(theta, phi)?;
            let model = model_for(&cfg, None)?;
            let q = spec.q.unwrap_or(cfg.q);
            let trace = match spec.kind {
                EstimatorKind::Fa => rotdoa::estimators::fa_root_music(&cfg.array, &truth, &model, cfg.snapshots, seed),
                EstimatorKind::Rr => rotdoa::estimators::rr_root_music(
                    &cfg.array,
                    &truth,
                    &model,
                    cfg.snapshots,
                    cfg.rr_iterations,
                    seed,
                ),
                EstimatorKind::Pri => {
                    rotdoa::estimators::pri_estimate(&cfg.array, &cfg.pri_config(q)?, &truth, &model, seed)
                        .map(|o| o.trace)
                }
                EstimatorKind::PriIgss => rotdoa::estimators::pri_igss(
                    &cfg.array,
                    &cfg.pri_config(q)?,
                    &cfg.igss_config()?,
                    &truth,
                    &model,
                    seed,
                ),
            }?;
            let est = trace.final_estimate;
            let err = rotdoa::geometry::direction_to_unit(&truth)
                .angle_to(&rotdoa::geometry::direction_to_unit(&est));
            println!("estimator {}", spec);
            println!("theta_deg {:.6}", est.theta().to_degrees());
            println!("phi_deg {:.6}", est.phi().to_degrees());
            println!("error_deg {:.6}", err.to_degrees());
            println!("termination {:?}", trace.termination);
            println!("iterations {}", trace.iterations());
            println!("rotations {}", trace.rotation_count);
            println!("evds {}", trace.evd_count);
            Ok(())
        }
        Command::SweepSnr(a) => sweep(SweepAxis::Snr, a),
        Command::SweepTheta(a) => sweep(SweepAxis::Theta, a),
        Command::SweepQ(a) => sweep(SweepAxis::Q, a),
        Command::Convergence(a) => sweep(SweepAxis::Iteration, a),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidInput(_) | Error::OutsideFrontHalfSpace { .. } => 1,
        Error::Io { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
