//! Backstepping estimator of the ice temperature profile.
//!
//! The estimate lives on [0, Y₁] with Y₁ the measured thickness and is
//! driven by the measured top temperature Y₂ and by the thickness error
//! H̃ = Y₁ − Ĥ through the gains p₁…p₄. With the gains switched off it is a
//! copy of the salinity-free ice model.

use crate::error::{invalid, Error, Result};
use crate::kernels::{BacksteppingTransform, GainEvaluation, GainParams};
use crate::layer::{gradient_at_end, LayerStep};
use crate::params::ThermalParams;
use crate::plant::{unit_grid, Measurements, PlantState};
use crate::quadrature::trapezoid;
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserverMode {
    Backstepping,
    /// All gains zero.
    OpenLoop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverConfig {
    pub gains: GainParams,
    pub mode: ObserverMode,
    /// Position dH₀ of the minimum of the initial estimate, as a fraction of H₀.
    pub d: f64,
    /// Amplitude of the penetrating-radiation source (°C·m/s).
    pub ibar0: f64,
    pub nodes: usize,
    pub dt: f64,
    pub theta: f64,
    /// Bound on |Ḣ| assumed by the analysis (m/s).
    pub speed_bound: f64,
    /// Bound on H assumed by the analysis (m).
    pub thickness_bound: f64,
}

impl ObserverConfig {
    /// Gains λ, c, ε with everything else taken from `p` and defaults.
    pub fn new(lambda: f64, c: f64, epsilon: f64, p: &ThermalParams) -> Result<Self> {
        Ok(Self {
            gains: GainParams::from_thermal(lambda, c, epsilon, p)?,
            mode: ObserverMode::Backstepping,
            d: 0.25,
            ibar0: p.reduced_source(),
            nodes: 120,
            dt: 600.0,
            theta: 1.0,
            speed_bound: 1e-6,
            thickness_bound: 10.0,
        })
    }

    pub fn open_loop(mut self) -> Self {
        self.mode = ObserverMode::OpenLoop;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.d) {
            return Err(invalid("d", "0 <= d < 1/2", self.d));
        }
        if self.nodes < 16 {
            return Err(invalid("observer nodes", ">= 16", self.nodes as f64));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("dt", "> 0", self.dt));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(invalid("theta", "theta ∈ [0.5, 1]", self.theta));
        }
        if !self.ibar0.is_finite() {
            return Err(invalid("Ibar0", "finite", self.ibar0));
        }
        Ok(())
    }

    /// Gains at thickness `thickness` on the observer nodes (zero in open loop).
    pub fn gains_at(&self, thickness: f64) -> Result<GainEvaluation> {
        match self.mode {
            ObserverMode::OpenLoop => Ok(GainEvaluation::zero(self.nodes, thickness)),
            ObserverMode::Backstepping => {
                let depths: Vec<f64> = unit_grid(self.nodes).iter().map(|e| e * thickness).collect();
                self.gains.gains(thickness, &depths)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    /// Estimated temperatures at η = i/(N − 1) on [0, `domain`].
    pub temps: Vec<f64>,
    /// Estimated thickness Ĥ (m).
    pub h_hat: f64,
    /// Measured thickness Y₁ spanning the grid (m).
    pub domain: f64,
    pub time: f64,
}

impl ObserverState {
    pub fn depths(&self) -> Vec<f64> {
        unit_grid(self.temps.len()).iter().map(|e| e * self.domain).collect()
    }
}

/// T̂(x, 0) = (Tm1 − T₀)/(H₀²(1 − 2d)) · [(x − dH₀)² − (dH₀)²] + T₀
pub fn initial_estimate(x: f64, thickness: f64, t0: f64, d: f64, tm1: f64) -> f64 {
    let dh = d * thickness;
    (tm1 - t0) / (thickness * thickness * (1.0 - 2.0 * d)) * ((x - dh).powi(2) - dh * dh) + t0
}

/// Quadratic initial estimate through Y₂ at the top and the surface melting
/// point at depth Y₁, with Ĥ = Y₁.
pub fn init_observer(meas: Measurements, cfg: &ObserverConfig, p: &ThermalParams) -> Result<ObserverState> {
    cfg.validate()?;
    if !(meas.y1 > 0.0) {
        return Err(invalid("Y1", "> 0", meas.y1));
    }
    let temps = unit_grid(cfg.nodes)
        .into_iter()
        .map(|eta| initial_estimate(eta * meas.y1, meas.y1, meas.y2, cfg.d, p.tm1))
        .collect();
    Ok(ObserverState {
        temps,
        h_hat: meas.y1,
        domain: meas.y1,
        time: 0.0,
    })
}

/// Advances the estimate from measurements `now` (at the state's time) to
/// `next` (one step later).
pub fn step_observer(
    obs: &ObserverState,
    now: Measurements,
    next: Measurements,
    cfg: &ObserverConfig,
    p: &ThermalParams,
) -> Result<ObserverState> {
    if !(next.y1 > 0.0) || !(now.y1 > 0.0) {
        return Err(invalid("Y1", "> 0", now.y1.min(next.y1)));
    }
    let n = obs.temps.len();
    let dt = cfg.dt;
    let beta = cfg.gains.beta;

    let gains_now = cfg.gains_at(now.y1)?;
    let h_tilde = now.y1 - obs.h_hat;
    let dx = now.y1 / (n - 1) as f64;
    let h_hat = obs.h_hat
        + dt * (gains_now.p4 * h_tilde + beta * gradient_at_end(&obs.temps, dx) - p.f_w / p.q_latent);
    let h_tilde_next = next.y1 - h_hat;
    let gains_next = cfg.gains_at(next.y1)?;

    let d_eta = 1.0 / (n - 1) as f64;
    let source = |thickness: f64, g: &GainEvaluation, err: f64| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let eta = k as f64 * d_eta;
                cfg.ibar0 * p.kappa_i * (-p.kappa_i * eta * thickness).exp() - g.p1[k] * err
            })
            .collect()
    };
    let source_new = source(next.y1, &gains_next, h_tilde_next);
    let source_old = if cfg.theta < 1.0 {
        source(now.y1, &gains_now, h_tilde)
    } else {
        source_new.clone()
    };
    let diffusivity = vec![p.diffusivity(); n];
    let step = LayerStep {
        old: &obs.temps,
        diffusivity: &diffusivity,
        source_new: &source_new,
        source_old: &source_old,
        thickness_old: now.y1,
        thickness_new: next.y1,
        top_velocity: 0.0,
        bottom_velocity: (next.y1 - now.y1) / dt,
        dt,
        theta: cfg.theta,
    };
    let mut sys = Tridiagonal::with_size(n);
    sys.set_dirichlet(0, next.y2 - gains_next.p2 * h_tilde_next);
    for (k, (l, d, u, r)) in step.interior_rows().into_iter().enumerate() {
        sys.set_row(k + 1, l, d, u, r);
    }
    sys.set_dirichlet(n - 1, p.tm2 - gains_next.p3 * h_tilde_next);
    let temps = sys.solve()?;
    if !h_hat.is_finite() || temps.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver(format!("non-finite estimate at t = {} s", obs.time + dt)));
    }
    Ok(ObserverState {
        temps,
        h_hat,
        domain: next.y1,
        time: obs.time + dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDiagnostics {
    /// ∫ T̃² dx + H̃².
    pub phi: f64,
    /// max |T̃| (°C).
    pub linf: f64,
    /// H − Ĥ (m).
    pub h_tilde: f64,
    /// max (T̂ − T) (°C), the largest overestimate.
    pub overshoot: f64,
}

/// Plant ice temperatures at the observer nodes. Nodes that coincide with
/// plant nodes are copied, the rest use four-point Lagrange interpolation.
pub fn plant_on_observer_grid(plant: &PlantState, obs: &ObserverState) -> Vec<f64> {
    obs.depths()
        .into_iter()
        .map(|x| cubic_sample(&plant.ice, (x / plant.thickness).min(1.0)))
        .collect()
}

fn cubic_sample(u: &[f64], eta: f64) -> f64 {
    let n = u.len();
    let pos = eta * (n - 1) as f64;
    let nearest = pos.round();
    if (pos - nearest).abs() < 1e-12 {
        return u[nearest as usize];
    }
    let base = (pos.floor() as usize).saturating_sub(1).min(n - 4);
    let s = pos - base as f64;
    let mut value = 0.0;
    for j in 0..4 {
        let mut w = 1.0;
        for m in 0..4 {
            if m != j {
                w *= (s - m as f64) / (j as f64 - m as f64);
            }
        }
        value += w * u[base + j];
    }
    value
}

/// Error fields T̃ = T̂ − T on the observer grid, restricted to the common
/// domain, with the node spacing.
pub fn error_profile(obs: &ObserverState, plant: &PlantState) -> (Vec<f64>, f64) {
    let truth = plant_on_observer_grid(plant, obs);
    let spacing = obs.domain / (obs.temps.len() - 1) as f64;
    let common = obs.depths().iter().take_while(|&&x| x <= plant.thickness + 1e-12).count();
    let err = obs.temps.iter().zip(&truth).take(common).map(|(a, b)| a - b).collect();
    (err, spacing)
}

pub fn error_diagnostics(obs: &ObserverState, plant: &PlantState) -> ErrorDiagnostics {
    let (err, spacing) = error_profile(obs, plant);
    let h_tilde = plant.thickness - obs.h_hat;
    let squares: Vec<f64> = err.iter().map(|e| e * e).collect();
    ErrorDiagnostics {
        phi: trapezoid(&squares, spacing) + h_tilde * h_tilde,
        linf: err.iter().fold(0.0, |m, e| m.max(e.abs())),
        h_tilde,
        overshoot: err.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Least-squares slope of −ln Φ against t, ignoring the first
/// `skip_fraction` of the samples.
pub fn decay_rate(series: &[(f64, f64)], skip_fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&skip_fraction) {
        return Err(invalid("skip_fraction", "0 <= fraction < 1", skip_fraction));
    }
    let skip = (series.len() as f64 * skip_fraction).floor() as usize;
    let window = &series[skip..];
    if window.len() < 2 {
        return Err(invalid("fit window", ">= 2 samples", window.len() as f64));
    }
    if let Some(&(_, bad)) = window.iter().find(|(_, phi)| !(*phi > 0.0)) {
        return Err(Error::Domain {
            what: "Phi in fit window".into(),
            value: bad,
            domain: "> 0".into(),
        });
    }
    let m = window.len() as f64;
    let t_mean = window.iter().map(|(t, _)| t).sum::<f64>() / m;
    let y_mean = window.iter().map(|(_, phi)| phi.ln()).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, phi) in window {
        let dt = t - t_mean;
        sxy += dt * (phi.ln() - y_mean);
        sxx += dt * dt;
    }
    Ok(-sxy / sxx)
}

/// Target-system state w = T̃ − ∫ r T̃ dy − φ H̃ on the observer grid. Needs
/// the true profile, so it is a verification aid only.
pub fn target_state(obs: &ObserverState, plant: &PlantState, g: &GainParams) -> Result<Vec<f64>> {
    let truth = plant_on_observer_grid(plant, obs);
    let err: Vec<f64> = obs.temps.iter().zip(&truth).map(|(a, b)| a - b).collect();
    let transform = BacksteppingTransform::new(g, obs.domain, err.len())?;
    Ok(transform.to_target(&err, plant.thickness - obs.h_hat))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ObserverConfig {
        ObserverConfig::new(5e-6, 3e-5, 1.0, &ThermalParams::default()).unwrap()
    }

    #[test]
    fn initial_estimate_shape() {
        let tm1 = -0.1;
        // d = 0: quadratic through (0, T0) and (H0, Tm1)
        assert_eq!(initial_estimate(0.0, 3.0, -20.0, 0.0, tm1), -20.0);
        assert!((initial_estimate(3.0, 3.0, -20.0, 0.0, tm1) - tm1).abs() < 1e-12);
        // vertex at dH0
        let d: f64 = 0.25;
        let vertex = -20.0 - (tm1 + 20.0) * d * d / (1.0 - 2.0 * d);
        assert!((initial_estimate(0.75, 3.0, -20.0, d, tm1) - vertex).abs() < 1e-12);
        // independent arithmetic at x = 2: 19.9/4.5 · (1.5625 − 0.5625) − 20
        let want = 19.9 / 4.5 * 1.0 - 20.0;
        assert!((initial_estimate(2.0, 3.0, -20.0, d, tm1) - want).abs() < 1e-12);
    }

    #[test]
    fn rejects_d_of_one_half() {
        let mut c = cfg();
        c.d = 0.5;
        let m = Measurements { y1: 3.0, y2: -20.0 };
        assert!(init_observer(m, &c, &ThermalParams::default()).is_err());
    }

    #[test]
    fn open_loop_gains_vanish() {
        let g = cfg().open_loop().gains_at(3.0).unwrap();
        assert!(g.p1.iter().all(|v| *v == 0.0));
        assert_eq!((g.p2, g.p3, g.p4), (0.0, 0.0, 0.0));
    }

    #[test]
    fn top_boundary_is_measured_value() {
        let p = ThermalParams::default();
        let c = cfg();
        let m0 = Measurements { y1: 3.0, y2: -20.0 };
        let m1 = Measurements { y1: 3.001, y2: -19.5 };
        let obs = init_observer(m0, &c, &p).unwrap();
        let next = step_observer(&obs, m0, m1, &c, &p).unwrap();
        assert_eq!(next.temps[0], -19.5);
        assert_eq!(next.domain, 3.001);
    }

    #[test]
    fn zero_thickness_error_removes_injection() {
        let p = ThermalParams::default();
        let c = cfg();
        let m = Measurements { y1: 3.0, y2: -20.0 };
        let mut obs = init_observer(m, &c, &p).unwrap();
        // choose Ĥ so that Ĥ after the explicit update equals Y₁
        let dx = 3.0 / (c.nodes - 1) as f64;
        let drift = c.gains.beta * gradient_at_end(&obs.temps, dx) - p.f_w / p.q_latent;
        // Ĥ + dt(p4 (Y₁ − Ĥ) + drift) = Y₁
        let p4 = c.gains.p4(3.0);
        obs.h_hat = 3.0 - c.dt * drift / (1.0 - c.dt * p4);
        let a = step_observer(&obs, m, m, &c, &p).unwrap();
        let b = step_observer(&obs, m, m, &c.clone().open_loop(), &p).unwrap();
        assert!((a.h_hat - 3.0).abs() < 1e-14);
        for (x, y) in a.temps.iter().zip(&b.temps) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn constant_offset_norm() {
        let n = 31;
        let plant = PlantState {
            snow: Vec::new(),
            ice: vec![-5.0; n],
            snow_depth: 0.0,
            thickness: 3.0,
            time: 0.0,
            surface_melt: 0.0,
        };
        let obs = ObserverState {
            temps: vec![-4.0; n],
            h_hat: 3.0,
            domain: 3.0,
            time: 0.0,
        };
        let d = error_diagnostics(&obs, &plant);
        assert!((d.phi - 3.0).abs() < 1e-12);
        assert_eq!(d.linf, 1.0);
        assert_eq!(d.overshoot, 1.0);

        let same = ObserverState { temps: vec![-5.0; n], ..obs };
        let d = error_diagnostics(&same, &plant);
        assert_eq!((d.phi, d.linf, d.h_tilde), (0.0, 0.0, 0.0));
    }

    #[test]
    fn cubic_interpolation_exact_for_cubics() {
        let n = 20;
        let f = |e: f64| 2.0 * e * e * e - e + 0.3;
        let u: Vec<f64> = unit_grid(n).iter().map(|&e| f(e)).collect();
        for eta in [0.0, 0.013, 0.5, 0.77, 0.999, 1.0] {
            assert!((cubic_sample(&u, eta) - f(eta)).abs() < 1e-13);
        }
    }

    #[test]
    fn decay_rate_of_exponential() {
        let k = 2.5e-6;
        let series: Vec<(f64, f64)> = (0..200).map(|i| {
            let t = i as f64 * 3600.0;
            (t, 4.0 * (-k * t).exp())
        }).collect();
        assert!((decay_rate(&series, 0.1).unwrap() - k).abs() < 1e-10);
        let flat: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, 2.0)).collect();
        assert_eq!(decay_rate(&flat, 0.1).unwrap(), 0.0);
        let bad = vec![(0.0, 1.0), (1.0, 0.0), (2.0, 1.0)];
        assert!(decay_rate(&bad, 0.0).is_err());
    }
}
