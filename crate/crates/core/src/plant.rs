//! Snow-covered sea-ice column with two moving boundaries.
//!
//! The snow layer sits on [−h, 0], the ice on [0, H], with x pointing down.
//! Each layer is solved on its own front-fixed grid; the two grids share the
//! interface node. One step:
//!
//! 1. boundary velocities from the previous state (Stefan condition at the
//!    bottom, last surface melt rate and snowfall at the top),
//! 2. new thicknesses,
//! 3. one theta-scheme solve of the whole column, with the surface energy
//!    balance linearised and iterated by Newton, and flux continuity at the
//!    snow/ice interface,
//! 4. the melt rate at the surface for the next step.
//!
//! Brine-dependent capacity and conductivity are frozen at the old level.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::layer::{gradient_at_end, gradient_at_start, LayerStep};
use crate::params::{
    month_index, solver_coefficients, ForcingSchedule, SalinityParams, ThermalParams, KELVIN_OFFSET,
    SECONDS_PER_DAY, SECONDS_PER_MONTH, SECONDS_PER_YEAR,
};
use crate::tridiag::Tridiagonal;

/// Snow thinner than this is removed, and fresh snow on bare ice becomes a
/// layer once it reaches this depth (m).
pub const MIN_SNOW_DEPTH: f64 = 1e-3;

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-10;
/// Newton steps larger than this (°C) are halved.
const NEWTON_MAX_STEP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub snow_nodes: usize,
    pub ice_nodes: usize,
    /// Time step (s).
    pub dt: f64,
    /// 1 = backward Euler, 0.5 = Crank–Nicolson.
    pub theta: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            snow_nodes: 24,
            ice_nodes: 120,
            dt: 600.0,
            theta: 1.0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snow_nodes < 16 {
            return Err(invalid("N_s", ">= 16", self.snow_nodes as f64));
        }
        if self.ice_nodes < 16 {
            return Err(invalid("N_i", ">= 16", self.ice_nodes as f64));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("dt", "> 0", self.dt));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(invalid("theta", "theta ∈ [0.5, 1]", self.theta));
        }
        Ok(())
    }

    pub fn ice_eta(&self) -> Vec<f64> {
        unit_grid(self.ice_nodes)
    }
}

pub(crate) fn unit_grid(n: usize) -> Vec<f64> {
    let d = 1.0 / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { 1.0 } else { i as f64 * d }).collect()
}

/// Seasonal snowfall as a constant accumulation rate per month (m/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnowfallSchedule {
    pub monthly_rate: [f64; 12],
}

impl SnowfallSchedule {
    /// Uniform accumulation from September through May, none in summer,
    /// adding up to `annual_depth` metres per year.
    pub fn seasonal(annual_depth: f64) -> Result<Self> {
        if !(annual_depth >= 0.0) || !annual_depth.is_finite() {
            return Err(invalid("snowfall_depth", ">= 0", annual_depth));
        }
        let rate = annual_depth / (9.0 * SECONDS_PER_MONTH);
        let mut monthly_rate = [rate; 12];
        for m in [5, 6, 7] {
            monthly_rate[m] = 0.0;
        }
        Ok(Self { monthly_rate })
    }

    pub fn custom(monthly_rate: [f64; 12]) -> Result<Self> {
        for r in monthly_rate {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(invalid("snowfall_rates", ">= 0", r));
            }
        }
        Ok(Self { monthly_rate })
    }

    pub fn none() -> Self {
        Self {
            monthly_rate: [0.0; 12],
        }
    }

    /// Accumulation rate (m/s) at `t` seconds after Jan 1.
    pub fn rate_at(&self, t: f64) -> f64 {
        self.monthly_rate[month_index(t)]
    }

    pub fn annual_depth(&self) -> f64 {
        self.monthly_rate.iter().sum::<f64>() * SECONDS_PER_MONTH
    }
}

impl Default for SnowfallSchedule {
    fn default() -> Self {
        Self::seasonal(0.3).expect("default snowfall is valid")
    }
}

/// Temperatures and geometry of the column.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    /// Snow temperatures at η_s = j/(N_s − 1) = −x/h; index 0 is the
    /// interface, the last entry the snow surface. Empty when snow-free.
    pub snow: Vec<f64>,
    /// Ice temperatures at η = i/(N_i − 1) = x/H; index 0 is the top of the ice.
    pub ice: Vec<f64>,
    /// Snow depth h (m). Below [`MIN_SNOW_DEPTH`] without a snow layer it
    /// holds fresh accumulation not yet turned into a layer.
    pub snow_depth: f64,
    /// Ice thickness H (m).
    pub thickness: f64,
    /// Seconds since Jan 1 of the first simulated year.
    pub time: f64,
    /// Melt rate at the top surface (m/s, ≥ 0) found in the last step.
    pub surface_melt: f64,
}

impl PlantState {
    pub fn has_snow(&self) -> bool {
        !self.snow.is_empty()
    }

    /// Temperature at the top of the column.
    pub fn surface_temperature(&self) -> f64 {
        match self.snow.last() {
            Some(t) => *t,
            None => self.ice[0],
        }
    }

    /// Ice temperature at relative depth `eta` by linear interpolation.
    pub fn ice_at(&self, eta: f64) -> f64 {
        sample_linear(&self.ice, eta)
    }

    fn is_finite(&self) -> bool {
        self.snow.iter().chain(&self.ice).all(|v| v.is_finite())
            && self.thickness.is_finite()
            && self.snow_depth.is_finite()
    }
}

pub(crate) fn sample_linear(u: &[f64], eta: f64) -> f64 {
    let n = u.len();
    let pos = eta.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (pos.floor() as usize).min(n - 2);
    let w = pos - i as f64;
    (1.0 - w) * u[i] + w * u[i + 1]
}

/// Initial column: linear snow profile carrying the ice-top conductive flux,
/// and a linear ice profile plus a sine perturbation of amplitude `a`. Both
/// are anchored at the surface melting point at depth H₀; the bottom node is
/// then pinned to the bottom melting point.
pub fn initial_state(
    p: &ThermalParams,
    grid: &GridConfig,
    snow_depth: f64,
    thickness: f64,
    interface_temp: f64,
    a: f64,
) -> Result<PlantState> {
    grid.validate()?;
    if !(thickness > 0.0) {
        return Err(invalid("H0", "> 0", thickness));
    }
    if !(snow_depth >= 0.0) {
        return Err(invalid("h0", ">= 0", snow_depth));
    }
    let t0 = interface_temp;
    let ice = unit_grid(grid.ice_nodes)
        .into_iter()
        .map(|eta| initial_ice_profile(eta * thickness, thickness, t0, a, p))
        .collect::<Vec<_>>();
    let mut state = PlantState {
        snow: Vec::new(),
        ice,
        snow_depth,
        thickness,
        time: 0.0,
        surface_melt: 0.0,
    };
    *state.ice.last_mut().unwrap() = p.tm2;
    if snow_depth >= MIN_SNOW_DEPTH {
        state.snow = unit_grid(grid.snow_nodes)
            .into_iter()
            .map(|eta_s| initial_snow_profile(-eta_s * snow_depth, thickness, t0, p))
            .collect();
    }
    Ok(state)
}

/// T_i(x, 0) = (Tm1 − T₀)/H₀ · x + T₀ + a·sin(4πx/H₀)
pub fn initial_ice_profile(x: f64, thickness: f64, t0: f64, a: f64, p: &ThermalParams) -> f64 {
    (p.tm1 - t0) / thickness * x + t0 + a * (4.0 * std::f64::consts::PI * x / thickness).sin()
}

/// T_s(x, 0) = k0 (Tm1 − T₀)/(k_s H₀) · x + T₀ for x ∈ [−h, 0].
pub fn initial_snow_profile(x: f64, thickness: f64, t0: f64, p: &ThermalParams) -> f64 {
    p.k0 * (p.tm1 - t0) / (p.k_s * thickness) * x + t0
}

/// Interface temperature T₀ for which the linear initial profiles put the
/// surface in radiative balance: the quartic
/// F_a − I0 − σ(T_surf + 273)⁴ + k0 (Tm1 − T₀)/H₀ = 0 with
/// T_surf = T₀ − h k0 (Tm1 − T₀)/(k_s H₀).
pub fn balanced_interface_temperature(
    flux: f64,
    snow_depth: f64,
    thickness: f64,
    p: &ThermalParams,
) -> Result<f64> {
    let lift = snow_depth * p.k0 / (p.k_s * thickness);
    let residual = |t0: f64| {
        let ts = t0 - lift * (p.tm1 - t0) + KELVIN_OFFSET;
        let f = flux - p.i0 - p.sigma * ts.powi(4) + p.k0 * (p.tm1 - t0) / thickness;
        let df = -4.0 * p.sigma * ts.powi(3) * (1.0 + lift) - p.k0 / thickness;
        (f, df)
    };
    let mut t = -20.0;
    for _ in 0..NEWTON_MAX_ITER {
        let (f, df) = residual(t);
        let mut step = -f / df;
        if step.abs() > NEWTON_MAX_STEP {
            step = step.signum() * NEWTON_MAX_STEP;
        }
        t += step;
        if step.abs() < NEWTON_TOL {
            return Ok(t.min(p.tm1));
        }
    }
    Err(Error::Solver(format!(
        "initial surface balance did not converge (last T0 = {t})"
    )))
}

/// Outcome of the surface energy balance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceBalance {
    /// Surface temperature (°C), at most the melting point.
    pub temperature: f64,
    /// Rate of change of the layer thickness from melting (m/s, ≤ 0).
    pub dh_dt: f64,
    /// Newton iterations used.
    pub iterations: usize,
}

/// Solves F_a − I0 − σ(T+273)⁴ + k ∂T/∂x = 0 for the surface temperature T.
///
/// `profile[0]` is the surface node (its value seeds Newton); `profile[1]`
/// and `profile[2]` lie `spacing` and 2·`spacing` below it and close the
/// second-order one-sided gradient. A root at or above Tm1 switches to the
/// melting branch: T = Tm1 and the surplus melts the surface at
/// ḣ = −surplus/q.
pub fn surface_balance(
    profile: &[f64],
    spacing: f64,
    conductivity: f64,
    flux: f64,
    p: &ThermalParams,
) -> Result<SurfaceBalance> {
    if profile.len() < 3 {
        return Err(invalid("profile length", ">= 3", profile.len() as f64));
    }
    let g0 = conductivity * (4.0 * profile[1] - profile[2]) / (2.0 * spacing);
    let g1 = -3.0 * conductivity / (2.0 * spacing);
    let balance = |t: f64| flux - p.i0 - p.sigma * (t + KELVIN_OFFSET).powi(4) + g0 + g1 * t;
    let slope = |t: f64| -4.0 * p.sigma * (t + KELVIN_OFFSET).powi(3) + g1;

    let mut t = profile[0].min(p.tm1);
    for iter in 1..=NEWTON_MAX_ITER {
        let mut step = -balance(t) / slope(t);
        if step.abs() > NEWTON_MAX_STEP {
            step *= 0.5;
        }
        t += step;
        if step.abs() < NEWTON_TOL {
            if t >= p.tm1 {
                let surplus = balance(p.tm1);
                return Ok(SurfaceBalance {
                    temperature: p.tm1,
                    dh_dt: -surplus.max(0.0) / p.q_latent,
                    iterations: iter,
                });
            }
            return Ok(SurfaceBalance {
                temperature: t,
                dh_dt: 0.0,
                iterations: iter,
            });
        }
    }
    Err(Error::Solver(format!(
        "surface balance: Newton did not converge in {NEWTON_MAX_ITER} iterations (T = {t}, F_a = {flux})"
    )))
}

/// Bottom growth rate Ḣ = (k ∂T/∂x − F_w)/q.
pub fn stefan_velocity(conductivity: f64, gradient: f64, p: &ThermalParams) -> f64 {
    (conductivity * gradient - p.f_w) / p.q_latent
}

/// Thickness and surface-temperature observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    /// Ice thickness (m).
    pub y1: f64,
    /// Temperature at the top of the ice (°C).
    pub y2: f64,
}

/// Exact measurement Y₁ = H, Y₂ = T_i(0).
pub fn measure(state: &PlantState) -> Measurements {
    Measurements {
        y1: state.thickness,
        y2: state.ice[0],
    }
}

/// Measurement source with optional additive Gaussian noise.
#[derive(Debug, Clone)]
pub struct Sensor {
    noise: Option<(Normal<f64>, Normal<f64>, ChaCha8Rng)>,
}

impl Sensor {
    pub fn exact() -> Self {
        Self { noise: None }
    }

    /// Noise with standard deviations `thickness_sd` (m) and
    /// `temperature_sd` (°C); zero deviations give an exact sensor.
    pub fn noisy(thickness_sd: f64, temperature_sd: f64, seed: u64) -> Result<Self> {
        if thickness_sd == 0.0 && temperature_sd == 0.0 {
            return Ok(Self::exact());
        }
        let h = Normal::new(0.0, thickness_sd).map_err(|_| invalid("noise_H", ">= 0", thickness_sd))?;
        let t = Normal::new(0.0, temperature_sd).map_err(|_| invalid("noise_T", ">= 0", temperature_sd))?;
        Ok(Self {
            noise: Some((h, t, ChaCha8Rng::seed_from_u64(seed))),
        })
    }

    pub fn read(&mut self, state: &PlantState) -> Measurements {
        let mut m = measure(state);
        if let Some((h, t, rng)) = &mut self.noise {
            m.y1 = (m.y1 + h.sample(rng)).max(MIN_SNOW_DEPTH);
            m.y2 += t.sample(rng);
        }
        m
    }
}

/// The full column model: constants, forcing and discretisation.
#[derive(Debug, Clone)]
pub struct Plant {
    pub thermal: ThermalParams,
    pub forcing: ForcingSchedule,
    pub salinity: SalinityParams,
    pub snowfall: SnowfallSchedule,
    pub grid: GridConfig,
    /// Salinity at the ice nodes (depends on η only).
    ice_salinity: Vec<f64>,
}

struct Geometry {
    snow_old: f64,
    snow_new: f64,
    ice_old: f64,
    ice_new: f64,
    /// Downward velocity of the ice top (surface melt on bare ice).
    ice_top_velocity: f64,
}

impl Plant {
    pub fn new(
        thermal: ThermalParams,
        forcing: ForcingSchedule,
        salinity: SalinityParams,
        snowfall: SnowfallSchedule,
        grid: GridConfig,
    ) -> Result<Self> {
        thermal.validate()?;
        forcing.validate()?;
        salinity.validate()?;
        grid.validate()?;
        let ice_salinity = unit_grid(grid.ice_nodes)
            .into_iter()
            .map(|eta| salinity.at_relative_depth(eta))
            .collect();
        Ok(Self {
            thermal,
            forcing,
            salinity,
            snowfall,
            grid,
            ice_salinity,
        })
    }

    pub fn ice_salinity(&self) -> &[f64] {
        &self.ice_salinity
    }

    /// Conductivity used in the Stefan condition: bottom salinity at Tm2.
    pub fn bottom_conductivity(&self) -> f64 {
        let s = *self.ice_salinity.last().unwrap();
        solver_coefficients(self.thermal.tm2, s, &self.thermal).1
    }

    /// Current bottom growth rate Ḣ (m/s).
    pub fn bottom_velocity(&self, state: &PlantState) -> f64 {
        let dx = state.thickness / (state.ice.len() - 1) as f64;
        stefan_velocity(self.bottom_conductivity(), gradient_at_end(&state.ice, dx), &self.thermal)
    }

    /// Residual k_s ∂T_s/∂x(0⁻) − k0 ∂T_i/∂x(0⁺) of interface flux continuity
    /// (zero when there is no snow).
    pub fn interface_flux_residual(&self, state: &PlantState) -> f64 {
        if !state.has_snow() {
            return 0.0;
        }
        let ns = state.snow.len();
        let ds = state.snow_depth / (ns - 1) as f64;
        let di = state.thickness / (state.ice.len() - 1) as f64;
        // snow is stored interface-first, so its η_s-gradient is −∂/∂x
        let snow_grad = -gradient_at_start(&state.snow, ds);
        let ice_grad = gradient_at_start(&state.ice, di);
        self.thermal.k_s * snow_grad - self.thermal.k0 * ice_grad
    }

    /// Advances the column by one time step.
    pub fn step(&self, state: &PlantState) -> Result<PlantState> {
        let p = &self.thermal;
        let dt = self.grid.dt;
        let forcing = self.forcing.forcing_at(state.time);
        let flux = forcing.atmospheric_flux()?;
        let snowfall = self.snowfall.rate_at(state.time);
        let bottom = self.bottom_velocity(state);

        let mut next = state.clone();
        let mut geo = Geometry {
            snow_old: state.snow_depth,
            snow_new: state.snow_depth,
            ice_old: state.thickness,
            ice_new: state.thickness,
            ice_top_velocity: 0.0,
        };

        if state.has_snow() {
            geo.snow_new = state.snow_depth + dt * (snowfall - state.surface_melt);
            geo.ice_new = state.thickness + dt * bottom;
            if geo.snow_new < MIN_SNOW_DEPTH {
                next.snow.clear();
                geo.snow_new = 0.0;
            }
        } else {
            geo.ice_top_velocity = state.surface_melt;
            geo.ice_new = state.thickness + dt * (bottom - state.surface_melt);
            if state.surface_melt == 0.0 {
                geo.snow_new = state.snow_depth + dt * snowfall;
            }
            if geo.snow_new >= MIN_SNOW_DEPTH {
                // seed a uniform layer at the current ice-top temperature
                let seed = state.ice[0].min(p.tm1);
                next.snow = vec![seed; self.grid.snow_nodes];
                geo.snow_old = geo.snow_new;
            }
        }
        if !(geo.ice_new > 0.0) {
            return Err(Error::IceVanished {
                t: state.time + dt,
                thickness: geo.ice_new,
            });
        }

        let (snow, ice, melt) = self.solve_column(&next.snow, &state.ice, &geo, flux)?;
        next.snow = snow;
        next.ice = ice;
        next.snow_depth = if next.has_snow() { geo.snow_new } else { geo.snow_new.max(0.0) };
        next.thickness = geo.ice_new;
        next.time = state.time + dt;
        next.surface_melt = melt;
        if !next.is_finite() {
            return Err(Error::Solver(format!("non-finite state at t = {} s", next.time)));
        }
        Ok(next)
    }

    fn ice_layer_inputs(&self, ice: &[f64], geo: &Geometry) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let p = &self.thermal;
        let n = ice.len();
        let d_eta = 1.0 / (n - 1) as f64;
        let mut kappa = Vec::with_capacity(n);
        let mut src_new = Vec::with_capacity(n);
        let mut src_old = Vec::with_capacity(n);
        for (k, (&t, &s)) in ice.iter().zip(&self.ice_salinity).enumerate() {
            let (c, cond) = solver_coefficients(t, s, p);
            kappa.push(cond / (p.rho * c));
            let amplitude = p.i0 / (p.rho * c);
            let eta = k as f64 * d_eta;
            src_new.push(amplitude * p.kappa_i * (-p.kappa_i * eta * geo.ice_new).exp());
            src_old.push(amplitude * p.kappa_i * (-p.kappa_i * eta * geo.ice_old).exp());
        }
        (kappa, src_new, src_old)
    }

    /// Builds and solves the column system. `snow` is in storage order
    /// (interface first) and already reflects layer creation/removal.
    fn solve_column(
        &self,
        snow: &[f64],
        ice: &[f64],
        geo: &Geometry,
        flux: f64,
    ) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let p = &self.thermal;
        let (dt, theta) = (self.grid.dt, self.grid.theta);
        let ni = ice.len();
        let ns = snow.len();
        let offset = if ns > 0 { ns - 1 } else { 0 };
        let n = offset + ni;
        let mut sys = Tridiagonal::with_size(n);

        let (kappa_i, src_new, src_old) = self.ice_layer_inputs(ice, geo);
        let ice_step = LayerStep {
            old: ice,
            diffusivity: &kappa_i,
            source_new: &src_new,
            source_old: &src_old,
            thickness_old: geo.ice_old,
            thickness_new: geo.ice_new,
            top_velocity: geo.ice_top_velocity,
            bottom_velocity: geo.ice_top_velocity + (geo.ice_new - geo.ice_old) / dt,
            dt,
            theta,
        };
        for (k, (l, d, u, r)) in ice_step.interior_rows().into_iter().enumerate() {
            sys.set_row(offset + k + 1, l, d, u, r);
        }
        sys.set_dirichlet(n - 1, p.tm2);

        // depth-ordered snow (surface first)
        let snow_column: Vec<f64> = snow.iter().rev().copied().collect();
        let (surface_conductivity, surface_spacing) = if ns > 0 {
            let kappa_s = vec![p.k_s / (p.rho_s * p.c0); ns];
            let zero = vec![0.0; ns];
            let snow_step = LayerStep {
                old: &snow_column,
                diffusivity: &kappa_s,
                source_new: &zero,
                source_old: &zero,
                thickness_old: geo.snow_old,
                thickness_new: geo.snow_new,
                // the surface rises as the snow deepens
                top_velocity: -(geo.snow_new - geo.snow_old) / dt,
                bottom_velocity: 0.0,
                dt,
                theta,
            };
            for (k, (l, d, u, r)) in snow_step.interior_rows().into_iter().enumerate() {
                sys.set_row(k + 1, l, d, u, r);
            }
            self.interface_row(&mut sys, offset, geo);
            (p.k_s, geo.snow_new / (ns - 1) as f64)
        } else {
            let (_, k_top) = solver_coefficients(ice[0], self.ice_salinity[0], p);
            (k_top, geo.ice_new / (ni - 1) as f64)
        };

        let mut guess = if ns > 0 { snow_column[0] } else { ice[0] }.min(p.tm1);
        let mut solution = None;
        for _ in 0..NEWTON_MAX_ITER {
            self.surface_row(&mut sys, guess, flux, surface_conductivity, surface_spacing);
            let u = sys.solve()?;
            let mut step = u[0] - guess;
            if step.abs() > NEWTON_MAX_STEP {
                step *= 0.5;
            }
            guess += step;
            if step.abs() < NEWTON_TOL {
                solution = Some(u);
                break;
            }
        }
        let mut u = solution.ok_or_else(|| {
            Error::Solver(format!(
                "surface Newton did not converge in {NEWTON_MAX_ITER} iterations (T = {guess})"
            ))
        })?;

        let mut melt = 0.0;
        if u[0] >= p.tm1 {
            sys.set_dirichlet(0, p.tm1);
            u = sys.solve()?;
            let gradient = gradient_at_start(&u, surface_spacing);
            let surplus = flux - p.i0 - p.sigma * (p.tm1 + KELVIN_OFFSET).powi(4) + surface_conductivity * gradient;
            melt = surplus.max(0.0) / p.q_latent;
        }

        let ice_new = u[offset..].to_vec();
        let snow_new = if ns > 0 { u[..ns].iter().rev().copied().collect() } else { Vec::new() };
        Ok((snow_new, ice_new, melt))
    }

    /// Linearised surface balance about `guess`, with the second-order
    /// gradient's third node eliminated through row 1.
    fn surface_row(&self, sys: &mut Tridiagonal, guess: f64, flux: f64, k: f64, dx: f64) {
        let p = &self.thermal;
        let tk = guess + KELVIN_OFFSET;
        let emit = p.sigma * tk.powi(4);
        let demit = 4.0 * p.sigma * tk.powi(3);
        let c0 = -demit - 3.0 * k / (2.0 * dx);
        let c1 = 4.0 * k / (2.0 * dx);
        let c2 = -k / (2.0 * dx);
        let rhs = -(flux - p.i0 - emit + demit * guess);
        let m = c2 / sys.upper[1];
        sys.set_row(0, 0.0, c0 - m * sys.lower[1], c1 - m * sys.diag[1], rhs - m * sys.rhs[1]);
    }

    /// k_s ∂T_s/∂x(0⁻) = k0 ∂T_i/∂x(0⁺) with second-order one-sided
    /// differences, reduced to tridiagonal form through the neighbouring rows.
    fn interface_row(&self, sys: &mut Tridiagonal, i: usize, geo: &Geometry) {
        let p = &self.thermal;
        let ns = i + 1;
        let ni = sys.len() - i;
        let ds = geo.snow_new / (ns - 1) as f64;
        let di = geo.ice_new / (ni - 1) as f64;
        let a = p.k_s / (2.0 * ds);
        let b = p.k0 / (2.0 * di);
        // coefficients on U[i-2], U[i-1], U[i], U[i+1], U[i+2]
        let (em2, mut em1, mut e0, mut ep1, ep2) = (a, -4.0 * a, 3.0 * a + 3.0 * b, -4.0 * b, b);
        let mut rhs = 0.0;
        let m = em2 / sys.lower[i - 1];
        em1 -= m * sys.diag[i - 1];
        e0 -= m * sys.upper[i - 1];
        rhs -= m * sys.rhs[i - 1];
        let m = ep2 / sys.upper[i + 1];
        e0 -= m * sys.lower[i + 1];
        ep1 -= m * sys.diag[i + 1];
        rhs -= m * sys.rhs[i + 1];
        sys.set_row(i, em1, e0, ep1, rhs);
    }
}

/// Largest thickness and growth speed seen during a run, checked against
/// the bounds the observer analysis assumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionMonitor {
    pub max_thickness: f64,
    pub max_speed: f64,
    pub thickness_bound: f64,
    pub speed_bound: f64,
}

impl AssumptionMonitor {
    pub fn new(thickness_bound: f64, speed_bound: f64) -> Self {
        Self {
            max_thickness: 0.0,
            max_speed: 0.0,
            thickness_bound,
            speed_bound,
        }
    }

    pub fn record(&mut self, before: &PlantState, after: &PlantState, dt: f64) {
        self.max_thickness = self.max_thickness.max(after.thickness);
        self.max_speed = self.max_speed.max(((after.thickness - before.thickness) / dt).abs());
    }

    pub fn thickness_violated(&self) -> bool {
        self.max_thickness >= self.thickness_bound
    }

    pub fn speed_violated(&self) -> bool {
        self.max_speed >= self.speed_bound
    }
}

/// One sampled point of an annual run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnualRecord {
    pub time: f64,
    pub snow_depth: f64,
    pub thickness: f64,
    pub surface_temperature: f64,
    /// Ice temperatures at the requested η stations.
    pub profile: Vec<f64>,
}

impl AnnualRecord {
    pub fn days(&self) -> f64 {
        self.time / SECONDS_PER_DAY
    }
}

#[derive(Debug, Clone)]
pub struct AnnualRun {
    pub records: Vec<AnnualRecord>,
    pub final_state: PlantState,
    pub monitor: AssumptionMonitor,
}

impl AnnualRun {
    /// Largest |H(t) − H(t − 1 yr)| over the final simulated year, pairing
    /// records one year apart. `None` if less than two years were sampled.
    pub fn periodicity_error(&self) -> Option<f64> {
        let last = self.records.last()?.time;
        let start = last - SECONDS_PER_YEAR;
        let first = self.records.first()?.time;
        if start - SECONDS_PER_YEAR < first - 1e-6 {
            return None;
        }
        let index_of = |t: f64| {
            self.records
                .iter()
                .position(|r| (r.time - t).abs() < 1e-6)
        };
        let mut worst = 0.0_f64;
        for r in self.records.iter().filter(|r| r.time >= start - 1e-6) {
            let j = index_of(r.time - SECONDS_PER_YEAR)?;
            worst = worst.max((r.thickness - self.records[j].thickness).abs());
        }
        Some(worst)
    }
}

/// Steps `initial` through `years` annual cycles, sampling every
/// `sample_every` steps (always including the first and last state).
pub fn run_annual(
    plant: &Plant,
    initial: PlantState,
    years: f64,
    sample_every: usize,
    stations: &[f64],
    monitor: AssumptionMonitor,
) -> Result<AnnualRun> {
    if !(years >= 0.0) {
        return Err(invalid("years", ">= 0", years));
    }
    let steps = (years * SECONDS_PER_YEAR / plant.grid.dt).round() as usize;
    let sample_every = sample_every.max(1);
    let record = |s: &PlantState| AnnualRecord {
        time: s.time,
        snow_depth: s.snow_depth,
        thickness: s.thickness,
        surface_temperature: s.surface_temperature(),
        profile: stations.iter().map(|&eta| s.ice_at(eta)).collect(),
    };
    let mut monitor = monitor;
    let mut state = initial;
    let mut records = vec![record(&state)];
    for i in 1..=steps {
        let next = plant.step(&state)?;
        monitor.record(&state, &next, plant.grid.dt);
        state = next;
        if i % sample_every == 0 || i == steps {
            records.push(record(&state));
        }
    }
    Ok(AnnualRun {
        records,
        final_state: state,
        monitor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{MonthlyForcing, DEFAULT_MONTHS};

    fn default_plant() -> Plant {
        Plant::new(
            ThermalParams::default(),
            ForcingSchedule::default(),
            SalinityParams::default(),
            SnowfallSchedule::default(),
            GridConfig::default(),
        )
        .unwrap()
    }

    fn january_state(plant: &Plant) -> PlantState {
        let flux = DEFAULT_MONTHS[0].atmospheric_flux().unwrap();
        let t0 = balanced_interface_temperature(flux, 0.15, 3.0, &plant.thermal).unwrap();
        initial_state(&plant.thermal, &plant.grid, 0.15, 3.0, t0, 1.0).unwrap()
    }

    #[test]
    fn snowfall_schedule() {
        let s = SnowfallSchedule::default();
        assert_eq!(s.rate_at(6.5 * SECONDS_PER_MONTH), 0.0);
        assert!((s.annual_depth() - 0.3).abs() < 1e-12);
        assert!(SnowfallSchedule::seasonal(-0.1).is_err());
        let custom = SnowfallSchedule::custom([1e-8; 12]).unwrap();
        assert_eq!(custom.rate_at(0.0), 1e-8);
    }

    #[test]
    fn initial_interface_temperature_balances_surface() {
        let p = ThermalParams::default();
        let t0 = balanced_interface_temperature(187.0, 0.15, 3.0, &p).unwrap();
        let grad = p.k0 * (p.tm1 - t0) / (p.k_s * 3.0);
        let ts = t0 - 0.15 * grad;
        let r = 187.0 - p.i0 - p.sigma * (ts + 273.0).powi(4) + p.k_s * grad;
        assert!(r.abs() < 1e-9, "{r}");
        assert!(t0 < -15.0 && t0 > -30.0, "{t0}");
    }

    #[test]
    fn surface_balance_cold_branch() {
        let p = ThermalParams::default();
        // linear snow profile, 1 cm spacing, warmer below
        let profile = [-30.0, -29.8, -29.6];
        let sb = surface_balance(&profile, 0.01, p.k_s, 187.0, &p).unwrap();
        assert!(sb.temperature < p.tm1);
        assert_eq!(sb.dh_dt, 0.0);
        // independent check of the root: bisection on the same balance
        let g = |t: f64| {
            187.0 - p.i0 - p.sigma * (t + 273.0).powi(4)
                + p.k_s * (-3.0 * t + 4.0 * profile[1] - profile[2]) / 0.02
        };
        let (mut lo, mut hi) = (-80.0, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 { lo = mid } else { hi = mid }
        }
        assert!((sb.temperature - lo).abs() < 1e-9);
    }

    #[test]
    fn surface_balance_switch_is_continuous() {
        let p = ThermalParams::default();
        let profile = [p.tm1, p.tm1, p.tm1];
        // flux placing the cold-branch root exactly at Tm1
        let flux = p.i0 + p.sigma * (p.tm1 + 273.0).powi(4);
        let sb = surface_balance(&profile, 0.01, p.k_s, flux, &p).unwrap();
        assert!((sb.temperature - p.tm1).abs() < 1e-9);
        assert!(sb.dh_dt.abs() < 1e-15);

        let sb = surface_balance(&profile, 0.01, p.k_s, flux + 100.0, &p).unwrap();
        assert_eq!(sb.temperature, p.tm1);
        assert!((sb.dh_dt + 100.0 / p.q_latent).abs() < 1e-15);
    }

    #[test]
    fn stefan_condition_is_linear() {
        let p = ThermalParams::default();
        let k = 1.826;
        let grad = (p.f_w + p.q_latent * 1e-9) / k;
        assert!((stefan_velocity(k, grad, &p) - 1e-9).abs() < 1e-20);
    }

    #[test]
    fn measure_passthrough() {
        let plant = default_plant();
        let mut s = january_state(&plant);
        s.ice[0] = -20.0;
        let m = measure(&s);
        assert_eq!(m.y1, 3.0);
        assert_eq!(m.y2, -20.0);
        let mut sensor = Sensor::noisy(0.0, 0.0, 1).unwrap();
        assert_eq!(sensor.read(&s), m);
        let mut noisy = Sensor::noisy(0.01, 0.1, 7).unwrap();
        assert_ne!(noisy.read(&s), m);
    }

    #[test]
    fn uniform_melting_column_is_a_fixed_point() {
        let thermal = ThermalParams {
            sigma: 0.0,
            i0: 0.0,
            f_w: 0.0,
            ..ThermalParams::default()
        };
        let calm = ForcingSchedule {
            months: [MonthlyForcing::new(0.0, 0.0, 0.0, 0.0, None); 12],
            ..ForcingSchedule::default()
        };
        let plant = Plant::new(
            thermal.clone(),
            calm,
            SalinityParams::fresh(),
            SnowfallSchedule::none(),
            GridConfig::default(),
        )
        .unwrap();
        let grid = plant.grid;
        let state = PlantState {
            snow: vec![thermal.tm2; grid.snow_nodes],
            ice: vec![thermal.tm2; grid.ice_nodes],
            snow_depth: 0.2,
            thickness: 2.0,
            time: 0.0,
            surface_melt: 0.0,
        };
        let mut s = state.clone();
        for _ in 0..10 {
            s = plant.step(&s).unwrap();
        }
        assert_eq!(s.thickness, state.thickness);
        assert_eq!(s.snow_depth, state.snow_depth);
        for (a, b) in s.ice.iter().chain(&s.snow).zip(state.ice.iter().chain(&state.snow)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn january_step_invariants() {
        let plant = default_plant();
        let mut s = january_state(&plant);
        for _ in 0..144 {
            s = plant.step(&s).unwrap();
            assert_eq!(*s.ice.last().unwrap(), plant.thermal.tm2);
            assert_eq!(s.snow[0], s.ice[0]);
            let residual = plant.interface_flux_residual(&s);
            assert!(residual.abs() < 1e-8, "interface residual {residual}");
            assert!(s.surface_temperature() < plant.thermal.tm1);
        }
        // the final surface node satisfies the stand-alone balance
        let flux = DEFAULT_MONTHS[0].atmospheric_flux().unwrap();
        let column: Vec<f64> = s.snow.iter().rev().copied().collect();
        let ds = s.snow_depth / (s.snow.len() - 1) as f64;
        let sb = surface_balance(&column, ds, plant.thermal.k_s, flux, &plant.thermal).unwrap();
        assert!((sb.temperature - column[0]).abs() < 1e-8);
        assert_eq!(sb.dh_dt, 0.0);
    }

    #[test]
    fn vanishing_ice_is_reported() {
        let thermal = ThermalParams {
            f_w: 1e6,
            ..ThermalParams::default()
        };
        let plant = Plant::new(
            thermal.clone(),
            ForcingSchedule::default(),
            SalinityParams::default(),
            SnowfallSchedule::default(),
            GridConfig::default(),
        )
        .unwrap();
        let mut s = initial_state(&thermal, &plant.grid, 0.1, 0.05, -10.0, 0.0).unwrap();
        let mut result = Ok(());
        for _ in 0..100 {
            match plant.step(&s) {
                Ok(n) => s = n,
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        assert!(matches!(result, Err(Error::IceVanished { .. })));
    }

    #[test]
    fn zero_steps_echo_initial_state() {
        let plant = default_plant();
        let s = january_state(&plant);
        let run = run_annual(&plant, s.clone(), 0.0, 1, &[0.0, 1.0], AssumptionMonitor::new(10.0, 1.0)).unwrap();
        assert_eq!(run.records.len(), 1);
        assert_eq!(run.final_state, s);
    }
}
