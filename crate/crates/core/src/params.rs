//! Physical constants, monthly atmospheric forcing and the salinity-dependent
//! material coefficients of sea ice.
//!
//! Defaults reproduce the MU71 Arctic column: the pure-ice and snow constants,
//! the twelve monthly flux records and the brine salinity profile. Everything
//! is plain data; the functions here are pure.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_YEAR: f64 = 365.0 * SECONDS_PER_DAY;
/// Months are equal twelfths of the year.
pub const SECONDS_PER_MONTH: f64 = SECONDS_PER_YEAR / 12.0;

/// Latent heat of fusion of fresh ice (J/kg).
pub const LATENT_HEAT_FUSION: f64 = 333_400.0;

/// Offset used in the surface radiation term, kept exactly as in the
/// MU71 balance (not 273.15).
pub const KELVIN_OFFSET: f64 = 273.0;

pub const MONTH_NAMES: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

/// Snow and ice constants in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalParams {
    /// Stefan–Boltzmann constant (W/m²/K⁴).
    pub sigma: f64,
    /// Snow conductivity (W/m/°C).
    pub k_s: f64,
    /// Snow density (kg/m³).
    pub rho_s: f64,
    /// Pure-ice heat capacity (J/kg/°C).
    pub c0: f64,
    /// Pure-ice conductivity (W/m/°C).
    pub k0: f64,
    /// Pure-ice density (kg/m³).
    pub rho: f64,
    /// Brine weight on heat capacity (J·°C/kg).
    pub gamma1: f64,
    /// Brine weight on conductivity (W/m).
    pub gamma2: f64,
    /// Penetrating shortwave radiation (W/m²).
    #[serde(rename = "I0")]
    pub i0: f64,
    /// Bulk extinction coefficient of ice (1/m).
    pub kappa_i: f64,
    /// Melting point at the top surface (°C).
    #[serde(rename = "Tm1")]
    pub tm1: f64,
    /// Melting point at the ice bottom (°C).
    #[serde(rename = "Tm2")]
    pub tm2: f64,
    /// Volumetric latent heat (J/m³).
    pub q_latent: f64,
    /// Ocean heat flux into the ice bottom (W/m²).
    #[serde(rename = "F_w")]
    pub f_w: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        Self {
            sigma: 5.670e-8,
            k_s: 0.31,
            rho_s: 330.0,
            c0: 2110.0,
            k0: 2.034,
            rho: 917.0,
            gamma1: 18_000.0,
            gamma2: 0.117,
            i0: 1.59,
            kappa_i: 1.5,
            tm1: -0.1,
            tm2: -1.8,
            q_latent: 917.0 * LATENT_HEAT_FUSION,
            f_w: 2.0,
        }
    }
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k_s", self.k_s),
            ("rho_s", self.rho_s),
            ("c0", self.c0),
            ("k0", self.k0),
            ("rho", self.rho),
            ("q_latent", self.q_latent),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(invalid(name, "> 0", value));
            }
        }
        let nonneg = [
            ("sigma", self.sigma),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("I0", self.i0),
            ("kappa_i", self.kappa_i),
        ];
        for (name, value) in nonneg {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(invalid(name, ">= 0", value));
            }
        }
        if !self.f_w.is_finite() {
            return Err(invalid("F_w", "finite", self.f_w));
        }
        if !(self.tm1 <= 0.0) {
            return Err(invalid("Tm1", "Tm2 < Tm1 <= 0", self.tm1));
        }
        if !(self.tm2 < self.tm1) {
            return Err(invalid("Tm2", "Tm2 < Tm1 <= 0", self.tm2));
        }
        Ok(())
    }

    /// Pure-ice thermal diffusivity k0/(ρ c0) (m²/s).
    pub fn diffusivity(&self) -> f64 {
        self.k0 / (self.rho * self.c0)
    }

    /// Conductivity-to-latent-heat ratio k0/q.
    pub fn beta(&self) -> f64 {
        self.k0 / self.q_latent
    }

    /// Source amplitude of the salinity-free ice equation, I0/(ρ c0) (°C·m/s).
    pub fn reduced_source(&self) -> f64 {
        self.i0 / (self.rho * self.c0)
    }
}

/// One row of the monthly flux table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonthlyForcing {
    #[serde(rename = "F_r")]
    pub shortwave: f64,
    #[serde(rename = "F_L")]
    pub longwave: f64,
    #[serde(rename = "F_s")]
    pub sensible: f64,
    #[serde(rename = "F_l")]
    pub latent: f64,
    /// Surface albedo; absent for the polar-night months.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl MonthlyForcing {
    pub const fn new(shortwave: f64, longwave: f64, sensible: f64, latent: f64, alpha: Option<f64>) -> Self {
        Self {
            shortwave,
            longwave,
            sensible,
            latent,
            alpha,
        }
    }

    pub fn validate(&self, month: &str) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(invalid(format!("forcing.{month}.alpha"), "alpha ∈ [0,1]", a));
            }
        }
        if self.shortwave > 0.0 && self.alpha.is_none() {
            return Err(invalid(
                format!("forcing.{month}.alpha"),
                "alpha present whenever F_r > 0",
                self.shortwave,
            ));
        }
        for (name, v) in [
            ("F_r", self.shortwave),
            ("F_L", self.longwave),
            ("F_s", self.sensible),
            ("F_l", self.latent),
        ] {
            if !v.is_finite() {
                return Err(invalid(format!("forcing.{month}.{name}"), "finite", v));
            }
        }
        Ok(())
    }

    /// Total atmospheric heat flux (1 − α)F_r + F_L + F_s + F_l (W/m²).
    pub fn atmospheric_flux(&self) -> Result<f64> {
        let absorbed = match self.alpha {
            Some(a) => (1.0 - a) * self.shortwave,
            None if self.shortwave == 0.0 => 0.0,
            None => return Err(Error::MissingAlbedo(self.shortwave)),
        };
        Ok(absorbed + self.longwave + self.sensible + self.latent)
    }
}

/// Monthly mean fluxes for the central Arctic.
pub const DEFAULT_MONTHS: [MonthlyForcing; 12] = [
    MonthlyForcing::new(0.0, 168.0, 19.0, 0.0, None),
    MonthlyForcing::new(0.0, 166.0, 12.3, -0.323, None),
    MonthlyForcing::new(30.7, 166.0, 11.6, -0.484, Some(0.83)),
    MonthlyForcing::new(160.0, 187.0, 4.68, -1.45, Some(0.81)),
    MonthlyForcing::new(286.0, 244.0, -7.26, -7.43, Some(0.82)),
    MonthlyForcing::new(310.0, 291.0, -6.30, -11.3, Some(0.78)),
    MonthlyForcing::new(220.0, 308.0, -4.84, -10.3, Some(0.64)),
    MonthlyForcing::new(145.0, 302.0, -6.46, -10.7, Some(0.69)),
    MonthlyForcing::new(59.7, 266.0, -2.74, -6.30, Some(0.84)),
    MonthlyForcing::new(6.46, 224.0, 1.61, -3.07, Some(0.85)),
    MonthlyForcing::new(0.0, 181.0, 9.04, -0.161, None),
    MonthlyForcing::new(0.0, 176.0, 12.8, -0.161, None),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LookupMode {
    /// The record of the month containing t.
    #[default]
    #[serde(alias = "piecewise")]
    PiecewiseConstant,
    /// Linear blend between adjacent month midpoints.
    #[serde(alias = "interpolate")]
    LinearMidpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSchedule {
    pub months: [MonthlyForcing; 12],
    pub lookup: LookupMode,
}

impl Default for ForcingSchedule {
    fn default() -> Self {
        Self {
            months: DEFAULT_MONTHS,
            lookup: LookupMode::PiecewiseConstant,
        }
    }
}

/// Month index (0 = January) containing `t` seconds after Jan 1, wrapping yearly.
pub fn month_index(t: f64) -> usize {
    let phase = t.rem_euclid(SECONDS_PER_YEAR);
    ((phase / SECONDS_PER_MONTH) as usize).min(11)
}

impl ForcingSchedule {
    pub fn validate(&self) -> Result<()> {
        for (m, name) in self.months.iter().zip(MONTH_NAMES) {
            m.validate(name)?;
        }
        Ok(())
    }

    /// Forcing record in effect at `t` seconds after Jan 1.
    pub fn forcing_at(&self, t: f64) -> MonthlyForcing {
        match self.lookup {
            LookupMode::PiecewiseConstant => self.months[month_index(t)],
            LookupMode::LinearMidpoint => {
                let phase = t.rem_euclid(SECONDS_PER_YEAR) / SECONDS_PER_MONTH - 0.5;
                let base = phase.floor();
                let frac = phase - base;
                let lo = (base as i64).rem_euclid(12) as usize;
                let hi = (lo + 1) % 12;
                if frac == 0.0 {
                    return self.months[lo];
                }
                blend(&self.months[lo], &self.months[hi], frac)
            }
        }
    }
}

fn blend(a: &MonthlyForcing, b: &MonthlyForcing, w: f64) -> MonthlyForcing {
    let mix = |x: f64, y: f64| (1.0 - w) * x + w * y;
    // an absent albedo only ever pairs with F_r = 0, so borrowing the
    // neighbour's value keeps the absorbed shortwave linear in w
    let alpha = match (a.alpha, b.alpha) {
        (Some(x), Some(y)) => Some(mix(x, y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    };
    MonthlyForcing {
        shortwave: mix(a.shortwave, b.shortwave),
        longwave: mix(a.longwave, b.longwave),
        sensible: mix(a.sensible, b.sensible),
        latent: mix(a.latent, b.latent),
        alpha,
    }
}

/// Brine salinity profile parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SalinityParams {
    /// Amplitude (ppt); bottom salinity is twice this.
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub n: f64,
    pub m: f64,
}

impl Default for SalinityParams {
    fn default() -> Self {
        Self {
            amplitude: 1.6,
            n: 0.407,
            m: 0.573,
        }
    }
}

impl SalinityParams {
    /// Salinity-free ice.
    pub fn fresh() -> Self {
        Self {
            amplitude: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) {
            return Err(invalid("salinity.A", "A >= 0", self.amplitude));
        }
        if !(self.n > 0.0) {
            return Err(invalid("salinity.n", "n > 0", self.n));
        }
        if !(self.m > 0.0) {
            return Err(invalid("salinity.m", "m > 0", self.m));
        }
        Ok(())
    }

    /// Salinity at relative depth `eta` = x/H ∈ [0, 1].
    pub fn at_relative_depth(&self, eta: f64) -> f64 {
        if eta <= 0.0 {
            return 0.0;
        }
        let exponent = self.n / (self.m + eta);
        self.amplitude * (1.0 - (PI * eta.powf(exponent)).cos())
    }
}

/// Salinity (ppt) at depth `x` in ice of thickness `thickness`.
pub fn salinity(x: f64, thickness: f64, p: &SalinityParams) -> Result<f64> {
    if !(thickness > 0.0) {
        return Err(Error::Domain {
            what: "H",
            value: thickness,
            domain: "H > 0",
        });
    }
    if !(0.0..=thickness).contains(&x) {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "[0, H]",
        });
    }
    Ok(p.at_relative_depth(x / thickness))
}

/// Effective brine-pocket heat capacity c0 + γ1 S/T² (J/kg/°C).
pub fn heat_capacity(temp: f64, sal: f64, p: &ThermalParams) -> Result<f64> {
    if !(temp < 0.0) {
        return Err(Error::Singular(temp));
    }
    Ok(p.c0 + p.gamma1 * sal / (temp * temp))
}

/// Effective conductivity k0 + γ2 S/T (W/m/°C).
pub fn thermal_conductivity(temp: f64, sal: f64, p: &ThermalParams) -> Result<f64> {
    if !(temp < 0.0) {
        return Err(Error::Singular(temp));
    }
    Ok(p.k0 + p.gamma2 * sal / temp)
}

/// Capacity and conductivity for the solver, with the temperature clamped to
/// at most Tm2/2 so the brine terms stay finite during transients.
pub(crate) fn solver_coefficients(temp: f64, sal: f64, p: &ThermalParams) -> (f64, f64) {
    let t = temp.min(0.5 * p.tm2);
    (
        p.c0 + p.gamma1 * sal / (t * t),
        p.k0 + p.gamma2 * sal / t,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_fluxes() {
        let jan = DEFAULT_MONTHS[0].atmospheric_flux().unwrap();
        assert!((jan - 187.0).abs() < 1e-12);
        let apr = DEFAULT_MONTHS[3].atmospheric_flux().unwrap();
        assert!((apr - 220.63).abs() < 1e-10, "{apr}");
        let zero = MonthlyForcing::new(0.0, 0.0, 0.0, 0.0, None);
        assert_eq!(zero.atmospheric_flux().unwrap(), 0.0);
    }

    #[test]
    fn shortwave_without_albedo_is_rejected() {
        let f = MonthlyForcing::new(10.0, 0.0, 0.0, 0.0, None);
        assert!(matches!(f.atmospheric_flux(), Err(Error::MissingAlbedo(_))));
        assert!(f.validate("mar").is_err());
    }

    #[test]
    fn albedo_bound() {
        let f = MonthlyForcing::new(10.0, 0.0, 0.0, 0.0, Some(1.2));
        let err = f.validate("apr").unwrap_err().to_string();
        assert!(err.contains("alpha ∈ [0,1]"), "{err}");
    }

    #[test]
    fn forcing_lookup() {
        let s = ForcingSchedule::default();
        assert_eq!(s.forcing_at(0.0), DEFAULT_MONTHS[0]);
        assert_eq!(s.forcing_at(SECONDS_PER_YEAR + 1.0), DEFAULT_MONTHS[0]);
        assert_eq!(s.forcing_at(6.5 * SECONDS_PER_MONTH), DEFAULT_MONTHS[6]);
        assert_eq!(s.forcing_at(SECONDS_PER_YEAR - 1.0), DEFAULT_MONTHS[11]);

        let interp = ForcingSchedule {
            lookup: LookupMode::LinearMidpoint,
            ..ForcingSchedule::default()
        };
        assert_eq!(interp.forcing_at(1.5 * SECONDS_PER_MONTH), DEFAULT_MONTHS[1]);
        // halfway between the December and January midpoints
        let f = interp.forcing_at(0.0);
        assert!((f.longwave - 0.5 * (168.0 + 176.0)).abs() < 1e-12);
        // halfway Oct -> Nov: absorbed shortwave is half of October's
        let f = interp.forcing_at(10.0 * SECONDS_PER_MONTH);
        let absorbed = (1.0 - f.alpha.unwrap()) * f.shortwave;
        assert!((absorbed - 0.5 * 0.15 * 6.46).abs() < 1e-12);
    }

    #[test]
    fn salinity_profile() {
        let p = SalinityParams::default();
        assert_eq!(salinity(0.0, 3.0, &p).unwrap(), 0.0);
        assert!((salinity(3.0, 3.0, &p).unwrap() - 3.2).abs() < 1e-12);
        // independent 40-digit evaluation
        assert!((salinity(1.5, 3.0, &p).unwrap() - 2.796_196_999_970_740_4).abs() < 1e-12);
        assert!(salinity(3.1, 3.0, &p).is_err());
        assert!(salinity(-0.1, 3.0, &p).is_err());
    }

    #[test]
    fn brine_coefficients() {
        let p = ThermalParams::default();
        assert_eq!(heat_capacity(-5.0, 0.0, &p).unwrap(), 2110.0);
        assert!((heat_capacity(-1.8, 3.2, &p).unwrap() - 19_887.777_777_777_78).abs() < 1e-8);
        assert!((heat_capacity(-20.0, 3.2, &p).unwrap() - 2254.0).abs() < 1e-9);
        assert!(heat_capacity(0.0, 3.2, &p).is_err());

        assert_eq!(thermal_conductivity(-5.0, 0.0, &p).unwrap(), 2.034);
        assert!((thermal_conductivity(-1.8, 3.2, &p).unwrap() - 1.826).abs() < 1e-12);
        assert!((thermal_conductivity(-10.0, 1.6, &p).unwrap() - 2.015_28).abs() < 1e-12);
        assert!(thermal_conductivity(0.5, 1.0, &p).is_err());
    }

    #[test]
    fn default_params_are_valid() {
        let p = ThermalParams::default();
        p.validate().unwrap();
        assert!((p.q_latent - 3.057_278e8).abs() < 1.0);
        assert!((p.diffusivity() - 1.051_233_416_198_504e-6).abs() < 1e-18);
        ForcingSchedule::default().validate().unwrap();
        SalinityParams::default().validate().unwrap();

        let bad = ThermalParams {
            tm2: 0.5,
            ..ThermalParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
