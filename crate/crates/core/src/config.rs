//! TOML configuration with every key optional.
//!
//! ```toml
//! [thermal]
//! F_w = 2.0
//!
//! [forcing]
//! lookup_mode = "linear-midpoint"
//!
//! [forcing.apr]
//! alpha = 0.8
//!
//! [salinity]
//! A = 1.6
//!
//! [run]
//! years = 10
//! lambda = 5e-6
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::observer::{ObserverConfig, ObserverMode};
use crate::params::{ForcingSchedule, LookupMode, MonthlyForcing, SalinityParams, ThermalParams};
use crate::plant::{GridConfig, SnowfallSchedule};
use crate::scenario::Scenario;

/// Partial month record; absent keys keep the built-in value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonthPatch {
    #[serde(rename = "F_r")]
    pub shortwave: Option<f64>,
    #[serde(rename = "F_L")]
    pub longwave: Option<f64>,
    #[serde(rename = "F_s")]
    pub sensible: Option<f64>,
    #[serde(rename = "F_l")]
    pub latent: Option<f64>,
    pub alpha: Option<f64>,
}

impl MonthPatch {
    fn apply(&self, base: MonthlyForcing) -> MonthlyForcing {
        MonthlyForcing {
            shortwave: self.shortwave.unwrap_or(base.shortwave),
            longwave: self.longwave.unwrap_or(base.longwave),
            sensible: self.sensible.unwrap_or(base.sensible),
            latent: self.latent.unwrap_or(base.latent),
            alpha: self.alpha.or(base.alpha),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingSection {
    pub lookup_mode: LookupMode,
    pub jan: MonthPatch,
    pub feb: MonthPatch,
    pub mar: MonthPatch,
    pub apr: MonthPatch,
    pub may: MonthPatch,
    pub jun: MonthPatch,
    pub jul: MonthPatch,
    pub aug: MonthPatch,
    pub sep: MonthPatch,
    pub oct: MonthPatch,
    pub nov: MonthPatch,
    pub dec: MonthPatch,
}

impl ForcingSection {
    fn patches(&self) -> [&MonthPatch; 12] {
        [
            &self.jan, &self.feb, &self.mar, &self.apr, &self.may, &self.jun, &self.jul, &self.aug, &self.sep,
            &self.oct, &self.nov, &self.dec,
        ]
    }

    pub fn schedule(&self) -> ForcingSchedule {
        let base = ForcingSchedule::default();
        let mut months = base.months;
        for (m, patch) in months.iter_mut().zip(self.patches()) {
            *m = patch.apply(*m);
        }
        ForcingSchedule {
            months,
            lookup: self.lookup_mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSetting {
    #[default]
    Backstepping,
    OpenLoop,
}

/// Everything that is not a physical constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    /// Length of annual simulations (years).
    pub years: f64,
    /// Length of estimation runs (days).
    pub days: f64,
    /// Initial ice thickness for estimation runs (m).
    #[serde(rename = "H0")]
    pub h0_ice: f64,
    /// Initial ice thickness for annual runs (m).
    #[serde(rename = "H0_annual")]
    pub h0_ice_annual: f64,
    /// Initial snow depth (m).
    pub h0: f64,
    /// Sine perturbation amplitude of the initial ice profile (°C).
    pub a: f64,
    /// Minimum location of the initial estimate, as a fraction of H₀.
    pub d: f64,
    pub lambda: f64,
    pub c: f64,
    pub epsilon: f64,
    pub mode: ModeSetting,
    /// Source amplitude of the observer; defaults to I0/(ρ c0).
    #[serde(rename = "Ibar0")]
    pub ibar0: Option<f64>,
    #[serde(rename = "M_bound")]
    pub speed_bound: f64,
    #[serde(rename = "H_bar")]
    pub thickness_bound: f64,
    #[serde(rename = "N_s")]
    pub snow_nodes: usize,
    #[serde(rename = "N_i")]
    pub ice_nodes: usize,
    /// Observer grid size; defaults to N_i.
    #[serde(rename = "N_obs")]
    pub observer_nodes: Option<usize>,
    pub dt: f64,
    pub theta: f64,
    /// Annual snowfall depth deposited Sep–May (m).
    pub snowfall_depth: f64,
    /// Per-month accumulation rates (m/s), overriding `snowfall_depth`.
    pub snowfall_rates: Option<Vec<f64>>,
    /// Measurement noise standard deviations.
    pub noise_thickness: f64,
    pub noise_temperature: f64,
    pub seed: u64,
    /// Output cadence in time steps.
    pub sample_every: usize,
    pub snapshot_days: Vec<f64>,
    pub sweep_lambdas: Vec<f64>,
    /// Ice-profile sampling stations (η) for annual output.
    pub stations: Vec<f64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            years: 10.0,
            days: 30.0,
            h0_ice: 3.0,
            h0_ice_annual: 3.5,
            h0: 0.15,
            a: 1.0,
            d: 0.25,
            lambda: 5e-6,
            c: 3e-5,
            epsilon: 1.0,
            mode: ModeSetting::Backstepping,
            ibar0: None,
            speed_bound: 1e-6,
            thickness_bound: 10.0,
            snow_nodes: 24,
            ice_nodes: 120,
            observer_nodes: None,
            dt: 600.0,
            theta: 1.0,
            snowfall_depth: 0.3,
            snowfall_rates: None,
            noise_thickness: 0.0,
            noise_temperature: 0.0,
            seed: 0,
            sample_every: 36,
            snapshot_days: vec![1.0, 2.0, 3.0],
            sweep_lambdas: vec![5e-7, 5e-6, 1e-5],
            stations: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("days", self.days),
            ("H0", self.h0_ice),
            ("H0_annual", self.h0_ice_annual),
            ("lambda", self.lambda),
            ("c", self.c),
            ("epsilon", self.epsilon),
            ("M_bound", self.speed_bound),
            ("H_bar", self.thickness_bound),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, "> 0", v));
            }
        }
        let nonnegative = [
            ("years", self.years),
            ("h0", self.h0),
            ("noise_thickness", self.noise_thickness),
            ("noise_temperature", self.noise_temperature),
        ];
        for (name, v) in nonnegative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, ">= 0", v));
            }
        }
        if !(0.0..0.5).contains(&self.d) {
            return Err(invalid("d", "0 <= d < 1/2", self.d));
        }
        if self.sample_every == 0 {
            return Err(invalid("sample_every", ">= 1", 0.0));
        }
        if let Some(rates) = &self.snowfall_rates {
            if rates.len() != 12 {
                return Err(invalid("snowfall_rates", "exactly 12 entries", rates.len() as f64));
            }
        }
        for &l in &self.sweep_lambdas {
            if !(l > 0.0) {
                return Err(invalid("sweep_lambdas", "all > 0", l));
            }
        }
        for &s in &self.stations {
            if !(0.0..=1.0).contains(&s) {
                return Err(invalid("stations", "η ∈ [0, 1]", s));
            }
        }
        self.snowfall()?;
        self.grid().validate()
    }

    pub fn grid(&self) -> GridConfig {
        GridConfig {
            snow_nodes: self.snow_nodes,
            ice_nodes: self.ice_nodes,
            dt: self.dt,
            theta: self.theta,
        }
    }

    pub fn snowfall(&self) -> Result<SnowfallSchedule> {
        match &self.snowfall_rates {
            Some(rates) => {
                let mut r = [0.0; 12];
                r.copy_from_slice(rates);
                SnowfallSchedule::custom(r)
            }
            None => SnowfallSchedule::seasonal(self.snowfall_depth),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub thermal: ThermalParams,
    pub forcing: ForcingSection,
    pub salinity: SalinityParams,
    pub run: RunSettings,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Parse(describe_toml_error(text, &e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.thermal.validate()?;
        self.forcing_schedule().validate()?;
        self.salinity.validate()?;
        self.run.validate()
    }

    pub fn forcing_schedule(&self) -> ForcingSchedule {
        self.forcing.schedule()
    }

    /// The estimation scenario (starts from `H0`).
    pub fn scenario(&self) -> Result<Scenario> {
        let r = &self.run;
        Ok(Scenario {
            thermal: self.thermal.clone(),
            forcing: self.forcing_schedule(),
            salinity: self.salinity,
            snowfall: r.snowfall()?,
            grid: r.grid(),
            initial_thickness: r.h0_ice,
            initial_snow: r.h0,
            perturbation: r.a,
            noise: (r.noise_thickness, r.noise_temperature),
            seed: r.seed,
        })
    }

    /// The annual-cycle scenario (starts from `H0_annual`).
    pub fn annual_scenario(&self) -> Result<Scenario> {
        let mut s = self.scenario()?;
        s.initial_thickness = self.run.h0_ice_annual;
        Ok(s)
    }

    pub fn observer(&self) -> Result<ObserverConfig> {
        let r = &self.run;
        let mut cfg = ObserverConfig::new(r.lambda, r.c, r.epsilon, &self.thermal)?;
        cfg.mode = match r.mode {
            ModeSetting::Backstepping => ObserverMode::Backstepping,
            ModeSetting::OpenLoop => ObserverMode::OpenLoop,
        };
        cfg.d = r.d;
        if let Some(v) = r.ibar0 {
            cfg.ibar0 = v;
        }
        cfg.nodes = r.observer_nodes.unwrap_or(r.ice_nodes);
        cfg.dt = r.dt;
        cfg.theta = r.theta;
        cfg.speed_bound = r.speed_bound;
        cfg.thickness_bound = r.thickness_bound;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message().trim();
    match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            format!("line {line}, column {col}: {msg}")
        }
        None => msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::DEFAULT_MONTHS;

    #[test]
    fn empty_config_is_all_defaults() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c.thermal, ThermalParams::default());
        assert_eq!(c.forcing_schedule(), ForcingSchedule::default());
        assert_eq!(c.salinity, SalinityParams::default());
        assert_eq!(c.run, RunSettings::default());
    }

    #[test]
    fn month_patch_merges() {
        let c = Config::from_toml_str("[forcing]\nlookup_mode = \"interpolate\"\n[forcing.apr]\nalpha = 0.5\n").unwrap();
        let s = c.forcing_schedule();
        assert_eq!(s.lookup, LookupMode::LinearMidpoint);
        assert_eq!(s.months[3].alpha, Some(0.5));
        assert_eq!(s.months[3].shortwave, DEFAULT_MONTHS[3].shortwave);
        assert_eq!(s.months[4], DEFAULT_MONTHS[4]);
    }

    #[test]
    fn albedo_out_of_range_is_rejected() {
        let err = Config::from_toml_str("[forcing.jun]\nalpha = 1.2\n").unwrap_err();
        assert!(err.to_string().contains("alpha ∈ [0,1]"), "{err}");
    }

    #[test]
    fn latent_heat_override() {
        let c = Config::from_toml_str("[thermal]\nq_latent = 3.057e8\n").unwrap();
        assert_eq!(c.thermal.q_latent, 3.057e8);
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = Config::from_toml_str("[run]\nyears = 2\ndt = \"fast\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        let err = Config::from_toml_str("[thermal]\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn invariant_violations_are_named() {
        let err = Config::from_toml_str("[thermal]\nTm2 = 0.5\n").unwrap_err();
        assert!(matches!(err, Error::Invalid { .. }), "{err}");
        let err = Config::from_toml_str("[run]\nd = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("d < 1/2"), "{err}");
        assert!(Config::from_toml_str("[run]\nsnowfall_depth = -0.1\n").is_err());
    }
}
