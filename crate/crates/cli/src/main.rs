use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spillfree_cli::commands::{self, Sweep};
use spillfree_cli::{io, CliError};

/// Slosh-free trajectory generation for a carried liquid container.
///
/// Exit codes: 0 success, 2 infeasible, 3 I/O or parse error, 4 numerical
/// failure, 5 joint limits exceeded with --strict.
#[derive(Debug, Parser)]
#[command(name = "spillfree", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Run a parameter sweep, e.g. `r=3,6,9`; demo commands only.
    #[arg(long, global = true)]
    sweep: Option<Sweep>,
    /// Treat joint-limit violations as failures.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize a desired mass trajectory (CSV `t,x,y,z[,vx,vy,vz]`).
    Optimize { desired: PathBuf },
    /// Replay an optimized trajectory through the nonlinear pendulum.
    Simulate { trajectory: PathBuf },
    /// Slosh metrics and motion peaks of a rollout file.
    Metrics { rollout: PathBuf },
    /// Map an optimized trajectory to joint space.
    Ik {
        trajectory: PathBuf,
        /// Robot model JSON; the bundled 7-DoF arm by default.
        #[arg(long)]
        robot: Option<PathBuf>,
        /// Initial joint configuration, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        q0: Option<Vec<f64>>,
    },
    /// 0.3 m step of a 0.1 m object held on a rod of r times its height.
    DemoStep {
        #[arg(long)]
        r: Option<f64>,
    },
    /// Closed square path mapped to joint space.
    DemoSquare {
        #[arg(long)]
        robot: Option<PathBuf>,
    },
}

fn no_sweep(cli: &Cli) -> Result<(), CliError> {
    match &cli.sweep {
        Some(_) => Err(CliError::Parse("--sweep is only supported by demo-step and demo-square".into())),
        None => Ok(()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    if let Ok(text) = serde_json::to_string_pretty(value) {
        println!("{text}");
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut config = io::load_config(cli.config.as_deref())?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Optimize { desired } => {
            no_sweep(cli)?;
            let report = commands::cmd_optimize(&config, desired, out)?;
            println!("{:?}: {} iterations, objective {:.6e}", report.status, report.iterations, report.objective);
        }
        Command::Simulate { trajectory } => {
            no_sweep(cli)?;
            commands::cmd_simulate(&config, trajectory, out)?;
        }
        Command::Metrics { rollout } => {
            no_sweep(cli)?;
            print_json(&commands::cmd_metrics(&config, rollout, out)?);
        }
        Command::Ik { trajectory, robot, q0 } => {
            no_sweep(cli)?;
            if q0.is_some() {
                config.q0 = q0.clone();
            }
            let model = commands::load_robot(&config, robot.as_deref())?;
            let report = commands::cmd_ik(&config, trajectory, &model, out, cli.strict)?;
            println!(
                "max tracking error {:.3e} m, {:.3e} rad",
                report.max_translation_error, report.max_rotation_error
            );
        }
        Command::DemoStep { r } => {
            let summaries = match &cli.sweep {
                Some(sweep) => commands::demo_step_sweep(&config, sweep, out)?,
                None => {
                    let r = r.or(config.ratio).unwrap_or(config.step.ratio);
                    vec![commands::cmd_demo_step(&config, r, out)?]
                }
            };
            for s in &summaries {
                println!(
                    "r={} l={} {:?} kinematic_error={:.3e} force_alignment_error={:.3e} max_tilt={:.3e} divergence={:.3e}",
                    s.ratio,
                    s.rod_length,
                    s.solve.status,
                    s.metrics.slosh.kinematic_error,
                    s.metrics.slosh.force_alignment_error,
                    s.metrics.slosh.max_tilt,
                    s.metrics.max_divergence
                );
            }
        }
        Command::DemoSquare { robot } => {
            let model = commands::load_robot(&config, robot.as_deref())?;
            demo_square(cli, &config, &model, out)?;
        }
    }
    Ok(())
}

fn demo_square(
    cli: &Cli,
    config: &spillfree_core::config::Config,
    model: &spillfree_core::manipulator::RobotModel,
    out: &Path,
) -> Result<(), CliError> {
    let summaries = match &cli.sweep {
        None => vec![commands::cmd_demo_square(config, model, out, cli.strict)?],
        Some(sweep) => {
            let results = commands::run_parallel(&sweep.values, |v| {
                let c = commands::apply_override(config, &sweep.key, v)?;
                commands::cmd_demo_square(&c, model, &out.join(commands::sweep_dir(&sweep.key, v)), cli.strict)
            });
            let s = results.into_iter().collect::<Result<Vec<_>, _>>()?;
            io::write_json(&out.join(commands::SUMMARY_FILE), &s)?;
            s
        }
    };
    for s in &summaries {
        println!(
            "{:?} kinematic_error={:.3e} max_velocity={:.3} max_acceleration={:.3} ik_error={:.3e} m {:.3e} rad",
            s.solve.status,
            s.metrics.slosh.kinematic_error,
            s.ik.task_max_velocity,
            s.ik.task_max_acceleration,
            s.ik.max_translation_error,
            s.ik.max_rotation_error
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPILLFREE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spillfree: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
