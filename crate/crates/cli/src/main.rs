use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icestate::checks::{kernels_check, KernelCheckOptions};
use icestate::config::{Config, ModeSetting};
use icestate::kernels::GainParams;
use icestate::observer::decay_rate;
use icestate::output::{
    annual_table, comparison_table, estimation_table, snapshot_table, svg_plot, Series, Summary, SummaryLine, Table,
};
use icestate::params::{LookupMode, SECONDS_PER_DAY};
use icestate::plant::{run_annual, AssumptionMonitor};
use icestate::scenario::{compare, run_estimation, sweep, EstimationRun};

#[derive(Parser)]
#[command(name = "icestate", version, about = "Sea-ice column simulation and temperature estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Multi-year run of the snow/ice column.
    Simulate,
    /// January run of the column with the temperature observer.
    Estimate,
    /// Open-loop and backstepping observers from the same initial data.
    Compare,
    /// Backstepping runs over the configured list of λ values.
    Sweep,
    /// Numerical checks of the kernels, gains and transform.
    KernelsCheck,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    years: Option<f64>,
    #[arg(long, global = true)]
    days: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Run the observer without output injection.
    #[arg(long, global = true)]
    open_loop: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Interpolate monthly forcing between mid-month values.
    #[arg(long, global = true)]
    interp_forcing: bool,
    #[arg(long, global = true, hide = true)]
    corrupt_kernel: bool,
}

impl Common {
    fn config(&self) -> icestate::Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let r = &mut cfg.run;
        if let Some(v) = self.years {
            r.years = v;
        }
        if let Some(v) = self.days {
            r.days = v;
        }
        if let Some(v) = self.lambda {
            r.lambda = v;
        }
        if let Some(v) = self.c {
            r.c = v;
        }
        if let Some(v) = self.epsilon {
            r.epsilon = v;
        }
        if let Some(v) = self.seed {
            r.seed = v;
        }
        if self.open_loop {
            r.mode = ModeSetting::OpenLoop;
        }
        if self.interp_forcing {
            cfg.forcing.lookup_mode = LookupMode::LinearMidpoint;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            print!("{}", summary.render());
            if summary.failed() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> icestate::Result<Summary> {
    let cfg = cli.common.config()?;
    let out = &cli.common.out;
    fs::create_dir_all(out)?;
    let summary = match cli.command {
        Command::Simulate => simulate(&cfg, out)?,
        Command::Estimate => estimate(&cfg, out)?,
        Command::Compare => compare_cmd(&cfg, out)?,
        Command::Sweep => sweep_cmd(&cfg, out)?,
        Command::KernelsCheck => kernels_cmd(&cfg, out, cli.common.corrupt_kernel)?,
    };
    summary.write(&out.join("summary.txt"))?;
    Ok(summary)
}

fn write_svg(path: &Path, svg: String) -> icestate::Result<()> {
    fs::write(path, svg)?;
    Ok(())
}

fn monitor_lines(summary: &mut Summary, monitor: &AssumptionMonitor) {
    if monitor.thickness_violated() {
        eprintln!(
            "warning: thickness reached {:.3} m, above the bound {} m",
            monitor.max_thickness, monitor.thickness_bound
        );
    }
    if monitor.speed_violated() {
        eprintln!(
            "warning: bottom speed reached {:.3e} m/s, above the bound {:.1e} m/s",
            monitor.max_speed, monitor.speed_bound
        );
    }
    summary.push(SummaryLine::info(
        "assumptions",
        format!(
            "max H = {:.4} m (bound {}), max |dH/dt| = {:.3e} m/s (bound {:.1e})",
            monitor.max_thickness, monitor.thickness_bound, monitor.max_speed, monitor.speed_bound
        ),
    ));
}

fn simulate(cfg: &Config, out: &Path) -> icestate::Result<Summary> {
    let r = &cfg.run;
    let scenario = cfg.annual_scenario()?;
    let mut summary = Summary::default();
    let run = if r.years > 0.0 {
        let plant = scenario.plant()?;
        let monitor = AssumptionMonitor::new(r.thickness_bound, r.speed_bound);
        Some(run_annual(
            &plant,
            scenario.initial_plant_state()?,
            r.years,
            r.sample_every,
            &r.stations,
            monitor,
        )?)
    } else {
        None
    };
    let table = annual_table(run.as_ref(), &r.stations);
    table.write_csv(&out.join("annual.csv"))?;
    let Some(run) = run else {
        summary.push(SummaryLine::info("simulate", "zero-length run, nothing simulated".into()));
        return Ok(summary);
    };
    let pts = |col: &str| -> Vec<(f64, f64)> {
        let t = table.column("t_days").unwrap_or_default();
        t.into_iter().zip(table.column(col).unwrap_or_default()).collect()
    };
    write_svg(
        &out.join("thickness.svg"),
        svg_plot(
            "Ice thickness and snow depth",
            "time (days)",
            "m",
            &[
                Series { label: "H", points: pts("H_m") },
                Series { label: "h", points: pts("h_m") },
            ],
            false,
        ),
    )?;
    write_svg(
        &out.join("surface_temperature.svg"),
        svg_plot(
            "Surface temperature",
            "time (days)",
            "°C",
            &[Series { label: "T surface", points: pts("T_surface_C") }],
            false,
        ),
    )?;
    let f = &run.final_state;
    summary.push(SummaryLine::info(
        "final_state",
        format!(
            "t = {:.1} d, H = {:.4} m, h = {:.4} m",
            f.time / SECONDS_PER_DAY,
            f.thickness,
            f.snow_depth
        ),
    ));
    match run.periodicity_error() {
        Some(e) => summary.push(SummaryLine::check(
            "periodicity",
            e < 0.01,
            format!("max |H(t) - H(t - 1 yr)| over the last year = {e:.4e} m (tol 1e-2)"),
        )),
        None => summary.push(SummaryLine::skip("periodicity", "needs at least two years".into())),
    }
    monitor_lines(&mut summary, &run.monitor);
    Ok(summary)
}

fn phi_points(run: &EstimationRun) -> Vec<(f64, f64)> {
    run.samples.iter().map(|s| (s.days(), s.diag.phi)).collect()
}

fn estimate(cfg: &Config, out: &Path) -> icestate::Result<Summary> {
    let r = &cfg.run;
    let scenario = cfg.scenario()?;
    let obs = cfg.observer()?;
    let run = run_estimation(&scenario, &obs, r.days, r.sample_every, &r.snapshot_days)?;
    estimation_table(&run).write_csv(&out.join("estimate.csv"))?;
    for snap in &run.snapshots {
        snapshot_table(snap).write_csv(&out.join(format!("profile_day{}.csv", snap.day)))?;
    }
    write_svg(
        &out.join("phi.svg"),
        svg_plot("Error functional", "time (days)", "Phi", &[Series { label: "Phi", points: phi_points(&run) }], true),
    )?;
    let mut summary = Summary::default();
    let first = run.samples[0].diag;
    summary.push(SummaryLine::info(
        "initial_error",
        format!("Phi(0) = {:.4e}, Linf(0) = {:.4} C", first.phi, first.linf),
    ));
    if run.horizon() >= 3.0 * SECONDS_PER_DAY - 1.0 {
        let s = run.sample_at(3.0).expect("samples exist");
        let ratio = s.diag.linf / first.linf;
        summary.push(SummaryLine::check(
            "linf_day3",
            ratio < 0.1,
            format!("Linf(3 d) / Linf(0) = {ratio:.4} (tol < 0.1)"),
        ));
    } else {
        summary.push(SummaryLine::skip("linf_day3", "run shorter than 3 days".into()));
    }
    summary.push(SummaryLine::info(
        "h_tilde",
        format!("max |H_hat - H| = {:.4e} m", run.max_abs_h_tilde()),
    ));
    if run.samples.len() >= 4 {
        let rate = decay_rate(&run.phi_series(), 0.1)?;
        summary.push(SummaryLine::info("decay_rate", format!("fitted rate of Phi = {rate:.4e} 1/s")));
    }
    monitor_lines(&mut summary, &run.monitor);
    Ok(summary)
}

fn compare_cmd(cfg: &Config, out: &Path) -> icestate::Result<Summary> {
    let r = &cfg.run;
    let cmp = compare(&cfg.scenario()?, &cfg.observer()?, r.days, r.sample_every)?;
    comparison_table(&cmp.open_loop, &cmp.backstepping).write_csv(&out.join("compare.csv"))?;
    write_svg(
        &out.join("compare.svg"),
        svg_plot(
            "Open loop versus backstepping",
            "time (days)",
            "Phi",
            &[
                Series { label: "open loop", points: phi_points(&cmp.open_loop) },
                Series { label: "backstepping", points: phi_points(&cmp.backstepping) },
            ],
            true,
        ),
    )?;
    let mut summary = Summary::default();
    let bound = if cmp.open_loop_censored { " (lower bound)" } else { "" };
    summary.push(SummaryLine::info(
        "t10",
        format!(
            "open loop {:.3} d{bound}, backstepping {:.3} d",
            cmp.t10_open / SECONDS_PER_DAY,
            cmp.t10_backstepping / SECONDS_PER_DAY
        ),
    ));
    if cmp.backstepping_censored {
        summary.push(SummaryLine::check(
            "speedup",
            false,
            "backstepping never reached 10 % of Phi(0)".into(),
        ));
    } else {
        let s = cmp.speedup();
        summary.push(SummaryLine::check(
            "speedup",
            s >= 3.0,
            format!("t10 open / t10 backstepping = {s:.3}{bound} (tol >= 3)"),
        ));
    }
    Ok(summary)
}

fn sweep_cmd(cfg: &Config, out: &Path) -> icestate::Result<Summary> {
    let r = &cfg.run;
    let mut lambdas = r.sweep_lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    let results = sweep(&cfg.scenario()?, &cfg.observer()?, &lambdas, r.days, r.sample_every)?;
    let mut table = Table::new(["lambda", "max_overshoot_C", "t10_days", "final_Phi"]);
    for res in &results {
        let t10 = res.run.time_to_fraction(0.1).map_or(f64::NAN, |t| t / SECONDS_PER_DAY);
        let last = res.run.samples.last().map_or(f64::NAN, |s| s.diag.phi);
        table.push(vec![res.lambda, res.max_overshoot(), t10, last]);
    }
    table.write_csv(&out.join("sweep.csv"))?;
    let labels: Vec<String> = results.iter().map(|s| format!("lambda = {:e}", s.lambda)).collect();
    let series: Vec<Series> = results
        .iter()
        .zip(&labels)
        .map(|(s, l)| Series { label: l, points: phi_points(&s.run) })
        .collect();
    write_svg(&out.join("sweep.svg"), svg_plot("Phi by lambda", "time (days)", "Phi", &series, true))?;

    let mut summary = Summary::default();
    let overshoots: Vec<f64> = results.iter().map(|s| s.max_overshoot()).collect();
    let listing = results
        .iter()
        .map(|s| format!("{:e}: {:.4}", s.lambda, s.max_overshoot()))
        .collect::<Vec<_>>()
        .join(", ");
    let ordered = overshoots.windows(2).all(|w| w[0] <= w[1]);
    summary.push(SummaryLine::check(
        "overshoot_order",
        ordered,
        format!("max overshoot (C) by lambda: {listing}"),
    ));
    Ok(summary)
}

fn kernels_cmd(cfg: &Config, out: &Path, corrupt: bool) -> icestate::Result<Summary> {
    let r = &cfg.run;
    let gains = GainParams::from_thermal(r.lambda, r.c, r.epsilon, &cfg.thermal)?;
    let mut opts = KernelCheckOptions::new(gains, r.h0_ice);
    opts.seed = r.seed;
    opts.corrupt_q = corrupt;
    let report = kernels_check(&opts)?;
    let mut csv = String::from("# icestate-csv v1\nname,value,tolerance,status\n");
    let mut summary = Summary::default();
    for row in &report.rows {
        let status = if row.passed { "PASS" } else { "FAIL" };
        csv.push_str(&format!("{},{:e},{:e},{status}\n", row.name, row.value, row.tolerance));
        summary.push(SummaryLine::check(
            &row.name,
            row.passed,
            format!("value {:.3e}, tolerance {:.1e}", row.value, row.tolerance),
        ));
    }
    fs::write(out.join("kernels_check.csv"), csv)?;
    Ok(summary)
}
