//! `tunasim`: runs simulated swimming experiments and writes CSV/SVG results.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tuna_sim::config::RunConfig;
use tuna_sim::control::{active_at, FishController, Timed};
use tuna_sim::experiments::{
    calibrate, default_bounds, default_targets, run_depth_step, run_speed_sweep, run_yaw_study, step_csv,
    tune_depth_gains, write_step_reports, write_sweep_csv, write_yaw_table, yaw_table_text, CalibrationOptions,
    FinState, DEFAULT_KD_GRID, DEFAULT_KP_GRID,
};
use tuna_sim::hydro::{simulate, FishState};
use tuna_sim::metrics::{fit_quadratic, run_metrics};
use tuna_sim::plot::{emit_plot, PlotStyle, Series};
use tuna_sim::telemetry::{decimate, read_telemetry, write_telemetry, HEADER};
use tuna_sim::Error;

#[derive(Parser, Debug)]
#[command(
    name = "tunasim",
    version,
    about = "Robotic tuna swimming simulator",
    arg_required_else_help = true
)]
struct Cli {
    /// JSON run configuration (defaults to the committed calibrated robot).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (defaults to `output_dir` from the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single simulation of the configured gait schedule.
    Run {
        /// Also write every telemetry row to stdout as it is produced.
        #[arg(long)]
        stream: bool,
        /// Seconds (defaults to `run_duration`).
        #[arg(long)]
        duration: Option<f64>,
        /// Telemetry file name inside the output directory.
        #[arg(long, default_value = "run_01.csv")]
        name: String,
    },
    /// Speed and COT over the frequency grid, both fin states.
    SweepSpeed {
        /// Runs per condition (defaults to the configured sweep).
        #[arg(long)]
        repeats: Option<u32>,
    },
    /// Peak-to-peak head yaw over the amplitude/frequency grid.
    YawStudy,
    /// Closed-loop depth response to the configured target schedule.
    DepthStep {
        /// Re-tune kp/kd by grid search before running.
        #[arg(long)]
        tune: bool,
    },
    /// Fits the surrogate coefficients to the anchor targets.
    Calibrate {
        /// Where to save the calibrated config (defaults to <out>/calibrated.json).
        #[arg(long)]
        write: Option<PathBuf>,
        /// Loss evaluation budget.
        #[arg(long)]
        max_evaluations: Option<usize>,
        /// Also re-tune the depth gains and store them.
        #[arg(long)]
        tune_depth: bool,
    },
    /// Recomputes steady-state metrics from a telemetry file.
    Replay {
        file: PathBuf,
        /// Gait frequency of the recorded run (defaults to the config's final gait).
        #[arg(long)]
        frequency: Option<f64>,
    },
    /// Plots telemetry columns against time (or another column).
    Plot {
        file: PathBuf,
        /// Columns to draw, by header name.
        #[arg(long = "y", default_values_t = vec!["yaw_deg".to_string()])]
        columns: Vec<String>,
        #[arg(long = "x", default_value = "time_s")]
        x_column: String,
        /// SVG file name inside the output directory.
        #[arg(long, default_value = "plot.svg")]
        name: String,
    },
    /// Prints the effective configuration as JSON.
    ShowConfig,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::calibrated(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.speed_sweep.seed = seed;
        cfg.yaw_study.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> Result<PathBuf, Error> {
    let dir = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn execute(cli: Cli) -> Result<(), Error> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::ShowConfig => {
            print!("{}", cfg.to_json());
            Ok(())
        }
        Command::Run { stream, duration, name } => cmd_run(&cfg, &out_dir(&cli, &cfg)?, *stream, *duration, name),
        Command::SweepSpeed { repeats } => cmd_sweep(&cfg, &out_dir(&cli, &cfg)?, *repeats),
        Command::YawStudy => cmd_yaw(&cfg, &out_dir(&cli, &cfg)?),
        Command::DepthStep { tune } => cmd_depth(&cfg, &out_dir(&cli, &cfg)?, *tune),
        Command::Calibrate {
            write,
            max_evaluations,
            tune_depth,
        } => {
            let dir = out_dir(&cli, &cfg)?;
            cmd_calibrate(&cfg, &dir, write.clone(), *max_evaluations, *tune_depth)
        }
        Command::Replay { file, frequency } => cmd_replay(&cfg, cli.out.as_deref(), file, *frequency),
        Command::Plot {
            file,
            columns,
            x_column,
            name,
        } => cmd_plot(&out_dir(&cli, &cfg)?, file, columns, x_column, name),
    }
}

fn final_frequency(cfg: &RunConfig) -> f64 {
    cfg.gait_schedule.last().map_or(0.0, |g| g.value.frequency)
}

fn cmd_run(cfg: &RunConfig, dir: &Path, stream: bool, duration: Option<f64>, name: &str) -> Result<(), Error> {
    let duration = duration.unwrap_or(cfg.run_duration);
    let mut gaits = cfg.gait_schedule.clone();
    for g in &mut gaits {
        // The setpoint is realized through the linkage.
        let angle = tuna_sim::linkage::drive_angle_for(&cfg.linkage, g.value.fin_erection_setpoint)?;
        g.value.fin_erection_setpoint = tuna_sim::linkage::erection_fraction(&cfg.linkage, angle)?.value;
    }
    let mut ctl = FishController::new(
        gaits,
        vec![Timed {
            start: 0.0,
            value: cfg.swim_depth,
        }],
        cfg.pid,
        cfg.depth_hold,
        cfg.buoyancy,
    )?;
    let records = simulate(
        &cfg.plant(),
        FishState::at_depth(cfg.swim_depth),
        &mut ctl,
        duration,
        cfg.dt,
        cfg.seed,
    )?;
    let telemetry = decimate(&records, cfg.dt, cfg.telemetry_rate_hz);
    if stream {
        let mut stdout = std::io::stdout().lock();
        let mut emit = || -> std::io::Result<()> {
            writeln!(stdout, "{HEADER}")?;
            for r in &telemetry {
                writeln!(stdout, "{}", r.to_csv_row())?;
            }
            stdout.flush()
        };
        emit().map_err(|e| Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        })?;
    }
    let path = dir.join(name);
    write_telemetry(&telemetry, &path)?;
    let freq = active_at(&cfg.gait_schedule, duration).frequency;
    match run_metrics(&telemetry, freq, cfg.fish.mass, cfg.fish.gravity) {
        Ok(m) => {
            let json = serde_json::to_string_pretty(&m).expect("metrics serialize") + "\n";
            write_text(&path.with_extension("metrics.json"), &json)?;
            eprintln!(
                "wrote {}: speed {:.4} m/s, power {:.3} W, COT {:.3}, p2p yaw {:.2} deg",
                path.display(),
                m.mean_speed,
                m.mean_power,
                m.cot,
                m.p2p_yaw
            );
        }
        Err(e) => eprintln!(
            "wrote {} ({} rows); no steady-state metrics: {e}",
            path.display(),
            telemetry.len()
        ),
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, dir: &Path, repeats: Option<u32>) -> Result<(), Error> {
    let mut spec = cfg.speed_sweep.clone();
    if let Some(r) = repeats {
        spec.repeats = r;
    }
    let result = run_speed_sweep(cfg, &spec)?;
    write_sweep_csv(&result, &dir.join("speed_sweep.csv"))?;
    let amp = spec.amplitudes[0];
    let mut speed = Vec::new();
    let mut cot = Vec::new();
    for fin in &spec.fin_states {
        let rows: Vec<_> = result
            .rows
            .iter()
            .filter(|r| r.condition.fin == *fin && r.condition.amplitude == amp)
            .collect();
        let f: Vec<f64> = rows.iter().map(|r| r.condition.frequency).collect();
        speed.push(Series::new(
            format!("{fin} fin"),
            f.clone(),
            rows.iter().map(|r| r.mean_speed.mean).collect(),
        ));
        cot.push(Series::new(
            format!("{fin} fin"),
            f,
            rows.iter().map(|r| r.cot.mean).collect(),
        ));
        let curve = result.speed_curve(amp, *fin);
        if let Ok(fit) = fit_quadratic(&curve) {
            eprintln!(
                "{fin}: speed = {:.5} f^2 + {:.5} f + {:.5} (R^2 = {:.4})",
                fit.c2, fit.c1, fit.c0, fit.r_squared
            );
        }
    }
    let style = |y: &str, title: &str| PlotStyle {
        title: title.into(),
        x_label: "frequency (Hz)".into(),
        y_label: y.into(),
        markers: true,
        ..PlotStyle::default()
    };
    emit_plot(
        &speed,
        &style("mean speed (m/s)", "Speed vs frequency"),
        &dir.join("speed_vs_frequency.svg"),
    )?;
    emit_plot(
        &cot,
        &style("COT", "Cost of transport vs frequency"),
        &dir.join("cot_vs_frequency.svg"),
    )?;
    eprintln!(
        "wrote {} rows to {}",
        result.rows.len(),
        dir.join("speed_sweep.csv").display()
    );
    Ok(())
}

fn cmd_yaw(cfg: &RunConfig, dir: &Path) -> Result<(), Error> {
    let (_, rows, runs) = run_yaw_study(cfg, &cfg.yaw_study)?;
    let tdir = dir.join("yaw_telemetry");
    std::fs::create_dir_all(&tdir).map_err(|e| Error::Io {
        path: tdir.clone(),
        source: e,
    })?;
    for run in &runs {
        let name = format!("{}_r{}.csv", run.condition.slug(), run.repeat);
        write_telemetry(&run.telemetry, &tdir.join(name))?;
    }
    write_yaw_table(&rows, &dir.join("yaw_summary.csv"))?;
    let mut series = Vec::new();
    for f in &cfg.yaw_study.frequencies {
        for fin in [FinState::Folded, FinState::Erect] {
            let pts: Vec<_> = rows.iter().filter(|r| r.frequency == *f).collect();
            let y = pts
                .iter()
                .map(|r| {
                    if fin == FinState::Folded {
                        r.folded_p2p
                    } else {
                        r.erect_p2p
                    }
                })
                .collect();
            series.push(Series::new(
                format!("{fin}, {f} Hz"),
                pts.iter().map(|r| r.amplitude).collect(),
                y,
            ));
        }
    }
    let style = PlotStyle {
        title: "Peak-to-peak head yaw".into(),
        x_label: "tail amplitude (deg)".into(),
        y_label: "p2p yaw (deg)".into(),
        markers: true,
        ..PlotStyle::default()
    };
    emit_plot(&series, &style, &dir.join("yaw_study.svg"))?;
    eprint!("{}", yaw_table_text(&rows));
    Ok(())
}

fn cmd_depth(cfg: &RunConfig, dir: &Path, tune: bool) -> Result<(), Error> {
    let mut gains = cfg.pid;
    if tune {
        let report = tune_depth_gains(cfg, &cfg.pid, &DEFAULT_KP_GRID, &DEFAULT_KD_GRID, 0.3, 90.0, 10.0)?;
        eprintln!(
            "tuned kp={:e} kd={:e}: settles in {:.1} s, overshoot {:.1}%",
            report.gains.kp, report.gains.kd, report.settling_time, report.overshoot_pct
        );
        gains = report.gains;
    }
    let ds = &cfg.depth_step;
    let result = run_depth_step(cfg, ds.initial_depth, &ds.schedule, ds.duration, &gains)?;
    write_telemetry(&result.telemetry, &dir.join("depth_step.csv"))?;
    write_step_reports(&result.steps, &dir.join("depth_step_report.csv"))?;
    let t: Vec<f64> = result.telemetry.iter().map(|r| r.time).collect();
    let depth = Series::new("depth", t.clone(), result.telemetry.iter().map(|r| r.depth).collect());
    let target = Series::new(
        "target",
        t.clone(),
        t.iter().map(|&x| *active_at(&ds.schedule, x)).collect(),
    );
    let style = PlotStyle {
        title: "Depth step response".into(),
        x_label: "time (s)".into(),
        y_label: "depth (m)".into(),
        ..PlotStyle::default()
    };
    emit_plot(&[depth, target], &style, &dir.join("depth_step.svg"))?;
    eprint!("{}", step_csv(&result.steps));
    Ok(())
}

fn cmd_calibrate(
    cfg: &RunConfig,
    dir: &Path,
    write: Option<PathBuf>,
    max_evaluations: Option<usize>,
    tune_depth: bool,
) -> Result<(), Error> {
    let mut options = CalibrationOptions::default();
    if let Some(n) = max_evaluations {
        options.max_evaluations = n;
    }
    let targets = default_targets();
    let result = calibrate(cfg, &targets, &default_bounds(), &options)?;
    let mut fitted = result.config.clone();
    if tune_depth {
        let report = tune_depth_gains(
            &fitted,
            &fitted.pid,
            &DEFAULT_KP_GRID,
            &DEFAULT_KD_GRID,
            0.3,
            90.0,
            10.0,
        )?;
        eprintln!(
            "depth gains kp={:e} kd={:e} ({:.1} s, {:.1}%)",
            report.gains.kp, report.gains.kd, report.settling_time, report.overshoot_pct
        );
        fitted.pid = report.gains;
    }
    let dest = write.unwrap_or_else(|| dir.join("calibrated.json"));
    fitted.save(&dest)?;
    eprintln!(
        "{} evaluations, loss {:.3e} -> {:.3e}",
        result.evaluations,
        result.loss_trace[0],
        result.final_loss()
    );
    for (p, v) in &result.params {
        eprintln!("  {:<28} {v:.6e}", p.name());
    }
    for r in &result.residuals {
        eprintln!(
            "  {:<24} target {:>8.4} sim {:>8.4} ({:+.2}%)",
            r.name,
            r.target,
            r.simulated,
            100.0 * r.relative
        );
    }
    let trace = result
        .loss_trace
        .iter()
        .map(|l| format!("{l:e}"))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    write_text(&dir.join("calibration_trace.txt"), &trace)?;
    eprintln!("wrote {}", dest.display());
    Ok(())
}

fn cmd_replay(cfg: &RunConfig, out: Option<&Path>, file: &Path, frequency: Option<f64>) -> Result<(), Error> {
    let records = read_telemetry(file)?;
    let f = frequency.unwrap_or_else(|| final_frequency(cfg));
    let m = run_metrics(&records, f, cfg.fish.mass, cfg.fish.gravity)?;
    let json = serde_json::to_string_pretty(&m).expect("metrics serialize") + "\n";
    let dest = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
            dir.join("replay_metrics.json")
        }
        None => file.with_extension("replay.json"),
    };
    write_text(&dest, &json)?;
    eprint!("{json}");
    Ok(())
}

fn cmd_plot(dir: &Path, file: &Path, columns: &[String], x_column: &str, name: &str) -> Result<(), Error> {
    let records = read_telemetry(file)?;
    let pick = |col: &str| -> Result<Vec<f64>, Error> {
        records
            .iter()
            .map(|r| {
                r.column(col)
                    .ok_or_else(|| Error::Domain(format!("unknown telemetry column `{col}`")))
            })
            .collect()
    };
    let x = pick(x_column)?;
    let series = columns
        .iter()
        .map(|c| Ok(Series::new(c.clone(), x.clone(), pick(c)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let style = PlotStyle {
        title: file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        x_label: x_column.into(),
        y_label: columns.join(", "),
        ..PlotStyle::default()
    };
    let dest = dir.join(name);
    emit_plot(&series, &style, &dest)?;
    eprintln!("wrote {}", dest.display());
    Ok(())
}
