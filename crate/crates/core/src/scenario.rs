//! Paired plant/observer runs: the January estimation experiment, the
//! open-loop comparison and the λ sweep.

use std::thread;

use crate::error::{invalid, Result};
use crate::observer::{
    error_diagnostics, init_observer, plant_on_observer_grid, step_observer, ErrorDiagnostics, ObserverConfig,
    ObserverMode, ObserverState,
};
use crate::params::{ForcingSchedule, SalinityParams, ThermalParams, SECONDS_PER_DAY};
use crate::plant::{
    balanced_interface_temperature, initial_state, AssumptionMonitor, GridConfig, Plant, PlantState,
    Sensor, SnowfallSchedule,
};

/// Everything that defines the simulated truth.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub thermal: ThermalParams,
    pub forcing: ForcingSchedule,
    pub salinity: SalinityParams,
    pub snowfall: SnowfallSchedule,
    pub grid: GridConfig,
    /// H₀ (m).
    pub initial_thickness: f64,
    /// h₀ (m).
    pub initial_snow: f64,
    /// Amplitude a of the sine perturbation of the initial ice profile (°C).
    pub perturbation: f64,
    /// Standard deviations of the measurement noise on Y₁ (m) and Y₂ (°C).
    pub noise: (f64, f64),
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            thermal: ThermalParams::default(),
            forcing: ForcingSchedule::default(),
            salinity: SalinityParams::default(),
            snowfall: SnowfallSchedule::default(),
            grid: GridConfig::default(),
            initial_thickness: 3.0,
            initial_snow: 0.15,
            perturbation: 1.0,
            noise: (0.0, 0.0),
            seed: 0,
        }
    }
}

impl Scenario {
    /// The same column without brine (S ≡ 0), i.e. the model the observer
    /// copies.
    pub fn salinity_free(mut self) -> Self {
        self.salinity = SalinityParams::fresh();
        self
    }

    pub fn plant(&self) -> Result<Plant> {
        Plant::new(
            self.thermal.clone(),
            self.forcing.clone(),
            self.salinity,
            self.snowfall,
            self.grid,
        )
    }

    /// Interface temperature balancing the surface under the forcing at t = 0.
    pub fn initial_interface_temperature(&self) -> Result<f64> {
        let flux = self.forcing.forcing_at(0.0).atmospheric_flux()?;
        balanced_interface_temperature(flux, self.initial_snow, self.initial_thickness, &self.thermal)
    }

    pub fn initial_plant_state(&self) -> Result<PlantState> {
        let t0 = self.initial_interface_temperature()?;
        initial_state(
            &self.thermal,
            &self.grid,
            self.initial_snow,
            self.initial_thickness,
            t0,
            self.perturbation,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationSample {
    pub time: f64,
    pub diag: ErrorDiagnostics,
}

impl EstimationSample {
    pub fn days(&self) -> f64 {
        self.time / SECONDS_PER_DAY
    }
}

/// True and estimated profiles on the observer grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSnapshot {
    pub day: f64,
    pub depths: Vec<f64>,
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EstimationRun {
    pub samples: Vec<EstimationSample>,
    pub snapshots: Vec<ProfileSnapshot>,
    pub monitor: AssumptionMonitor,
    pub final_plant: PlantState,
    pub final_observer: ObserverState,
}

impl EstimationRun {
    pub fn phi_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.time, s.diag.phi)).collect()
    }

    /// First sampled time with Φ ≤ `fraction`·Φ(0).
    pub fn time_to_fraction(&self, fraction: f64) -> Option<f64> {
        let phi0 = self.samples.first()?.diag.phi;
        self.samples
            .iter()
            .find(|s| s.diag.phi <= fraction * phi0)
            .map(|s| s.time)
    }

    /// Largest overestimate T̂ − T over the run.
    pub fn max_overshoot(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.diag.overshoot)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_h_tilde(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.diag.h_tilde.abs()))
    }

    /// The sample closest to `day`.
    pub fn sample_at(&self, day: f64) -> Option<&EstimationSample> {
        let t = day * SECONDS_PER_DAY;
        self.samples
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
    }

    pub fn horizon(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time)
    }
}

fn snapshot(day: f64, plant: &PlantState, obs: &ObserverState) -> ProfileSnapshot {
    ProfileSnapshot {
        day,
        depths: obs.depths(),
        truth: plant_on_observer_grid(plant, obs),
        estimate: obs.temps.clone(),
    }
}

/// Runs truth and estimator side by side for `days`, recording diagnostics
/// every `sample_every` steps and profiles at `snapshot_days`.
pub fn run_estimation(
    scenario: &Scenario,
    cfg: &ObserverConfig,
    days: f64,
    sample_every: usize,
    snapshot_days: &[f64],
) -> Result<EstimationRun> {
    if !(days >= 0.0) {
        return Err(invalid("days", ">= 0", days));
    }
    let plant = scenario.plant()?;
    let mut cfg = cfg.clone();
    cfg.dt = plant.grid.dt;
    cfg.theta = plant.grid.theta;
    let p = &plant.thermal;
    let mut sensor = Sensor::noisy(scenario.noise.0, scenario.noise.1, scenario.seed)?;

    let mut truth = scenario.initial_plant_state()?;
    let mut meas = sensor.read(&truth);
    let mut obs = init_observer(meas, &cfg, p)?;
    let mut monitor = AssumptionMonitor::new(cfg.thickness_bound, cfg.speed_bound);

    let steps = (days * SECONDS_PER_DAY / cfg.dt).round() as usize;
    let sample_every = sample_every.max(1);
    let mut samples = vec![EstimationSample {
        time: 0.0,
        diag: error_diagnostics(&obs, &truth),
    }];
    let snapshot_steps: Vec<(f64, usize)> = snapshot_days
        .iter()
        .map(|&d| (d, (d * SECONDS_PER_DAY / cfg.dt).round() as usize))
        .collect();
    let mut snapshots: Vec<ProfileSnapshot> = snapshot_steps
        .iter()
        .filter(|(_, s)| *s == 0)
        .map(|(d, _)| snapshot(*d, &truth, &obs))
        .collect();

    for i in 1..=steps {
        let next = plant.step(&truth)?;
        monitor.record(&truth, &next, cfg.dt);
        let next_meas = sensor.read(&next);
        obs = step_observer(&obs, meas, next_meas, &cfg, p)?;
        truth = next;
        meas = next_meas;
        if i % sample_every == 0 || i == steps {
            samples.push(EstimationSample {
                time: truth.time,
                diag: error_diagnostics(&obs, &truth),
            });
        }
        for (d, s) in &snapshot_steps {
            if *s == i {
                snapshots.push(snapshot(*d, &truth, &obs));
            }
        }
    }
    Ok(EstimationRun {
        samples,
        snapshots,
        monitor,
        final_plant: truth,
        final_observer: obs,
    })
}

/// Open-loop versus backstepping from identical initial data.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub open_loop: EstimationRun,
    pub backstepping: EstimationRun,
    /// Time for Φ to fall to 10 % of Φ(0), or the horizon if never reached.
    pub t10_open: f64,
    pub t10_backstepping: f64,
    /// True when the open-loop run never reached 10 % (the ratio is then a
    /// lower bound).
    pub open_loop_censored: bool,
    pub backstepping_censored: bool,
}

impl Comparison {
    pub fn speedup(&self) -> f64 {
        self.t10_open / self.t10_backstepping
    }
}

pub fn compare(scenario: &Scenario, cfg: &ObserverConfig, days: f64, sample_every: usize) -> Result<Comparison> {
    let mut open_cfg = cfg.clone();
    open_cfg.mode = ObserverMode::OpenLoop;
    let mut closed_cfg = cfg.clone();
    closed_cfg.mode = ObserverMode::Backstepping;
    let (open, closed) = thread::scope(|s| {
        let open = s.spawn(|| run_estimation(scenario, &open_cfg, days, sample_every, &[]));
        let closed = run_estimation(scenario, &closed_cfg, days, sample_every, &[]);
        (open.join().expect("open-loop run panicked"), closed)
    });
    let (open, closed) = (open?, closed?);
    let t10 = |r: &EstimationRun| match r.time_to_fraction(0.1) {
        Some(t) => (t, false),
        None => (r.horizon(), true),
    };
    let (t10_open, open_loop_censored) = t10(&open);
    let (t10_backstepping, backstepping_censored) = t10(&closed);
    Ok(Comparison {
        open_loop: open,
        backstepping: closed,
        t10_open,
        t10_backstepping,
        open_loop_censored,
        backstepping_censored,
    })
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub lambda: f64,
    pub run: EstimationRun,
}

impl SweepResult {
    pub fn max_overshoot(&self) -> f64 {
        self.run.max_overshoot()
    }
}

/// One backstepping run per λ, run concurrently.
pub fn sweep(
    scenario: &Scenario,
    cfg: &ObserverConfig,
    lambdas: &[f64],
    days: f64,
    sample_every: usize,
) -> Result<Vec<SweepResult>> {
    let configs = lambdas
        .iter()
        .map(|&lambda| {
            let mut c = cfg.clone();
            c.gains = crate::kernels::GainParams::from_thermal(lambda, cfg.gains.c, cfg.gains.epsilon, &scenario.thermal)?;
            c.mode = ObserverMode::Backstepping;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<Result<EstimationRun>> = thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| s.spawn(move || run_estimation(scenario, c, days, sample_every, &[])))
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep run panicked")).collect()
    });
    lambdas
        .iter()
        .zip(runs)
        .map(|(&lambda, run)| Ok(SweepResult { lambda, run: run? }))
        .collect()
}
