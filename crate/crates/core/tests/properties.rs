use icestate::bessel::{bessel_i, bessel_j, ratio_at_origin, ratio_i_sq};
use icestate::config::Config;
use icestate::kernels::{BacksteppingTransform, GainParams};
use icestate::observer::{error_diagnostics, ObserverState};
use icestate::params::{
    heat_capacity, salinity, thermal_conductivity, ForcingSchedule, LookupMode, SalinityParams, ThermalParams,
    SECONDS_PER_YEAR,
};
use icestate::plant::{initial_state, GridConfig};
use icestate::tridiag::Tridiagonal;
use proptest::prelude::*;

fn thermal() -> ThermalParams {
    ThermalParams::default()
}

proptest! {
    #[test]
    fn brine_terms_raise_capacity_and_lower_conductivity(t in -40.0f64..-0.05, s in 0.0f64..10.0) {
        let p = thermal();
        let c = heat_capacity(t, s, &p).unwrap();
        let k = thermal_conductivity(t, s, &p).unwrap();
        prop_assert!(c >= p.c0);
        prop_assert!(k <= p.k0);
        prop_assert_eq!(heat_capacity(t, 0.0, &p).unwrap(), p.c0);
    }

    #[test]
    fn salinity_depends_only_on_relative_depth(eta in 0.0f64..=1.0, h in 0.2f64..8.0, scale in 0.1f64..5.0) {
        let sp = SalinityParams::default();
        let a = salinity(eta * h, h, &sp).unwrap();
        let b = salinity(eta * h * scale, h * scale, &sp).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((0.0..=2.0 * sp.amplitude + 1e-12).contains(&a));
    }

    #[test]
    fn forcing_is_annually_periodic(t in 0.0f64..SECONDS_PER_YEAR, interp in any::<bool>()) {
        let mut f = ForcingSchedule::default();
        if interp {
            f.lookup = LookupMode::LinearMidpoint;
        }
        let a = f.forcing_at(t);
        let b = f.forcing_at(t + SECONDS_PER_YEAR);
        for (x, y) in [(a.shortwave, b.shortwave), (a.longwave, b.longwave), (a.sensible, b.sensible), (a.latent, b.latent)] {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn interpolated_forcing_stays_between_neighbouring_months(t in 0.0f64..SECONDS_PER_YEAR) {
        let f = ForcingSchedule { lookup: LookupMode::LinearMidpoint, ..Default::default() };
        let v = f.forcing_at(t).shortwave;
        let lo = f.months.iter().map(|m| m.shortwave).fold(f64::INFINITY, f64::min);
        let hi = f.months.iter().map(|m| m.shortwave).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
    }

    #[test]
    fn bessel_recurrences(z in 0.05f64..30.0, j in 1u32..5) {
        let (a, b, c) = (bessel_i(j - 1, z), bessel_i(j, z), bessel_i(j + 1, z));
        prop_assert!((a - c - 2.0 * j as f64 / z * b).abs() <= 1e-10 * a.abs());
        let (a, b, c) = (bessel_j(j - 1, z), bessel_j(j, z), bessel_j(j + 1, z));
        prop_assert!((a + c - 2.0 * j as f64 / z * b).abs() <= 1e-10 * (a.abs() + b.abs() + c.abs()));
    }

    #[test]
    fn modified_ratio_tends_to_origin_value(j in 0u32..6) {
        let r = ratio_i_sq(j, 1e-12);
        prop_assert!((r - ratio_at_origin(j)).abs() <= 1e-12 * ratio_at_origin(j));
    }

    #[test]
    fn thomas_solves_dominant_systems(
        rows in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -5.0f64..5.0), 2..60),
    ) {
        let n = rows.len();
        let mut sys = Tridiagonal::with_size(n);
        for (i, &(l, u, r)) in rows.iter().enumerate() {
            let (l, u) = (if i == 0 { 0.0 } else { l }, if i + 1 == n { 0.0 } else { u });
            sys.set_row(i, l, 2.5 + l.abs() + u.abs(), u, r);
        }
        let x = sys.solve().unwrap();
        for i in 0..n {
            let mut ax = sys.diag[i] * x[i];
            if i > 0 {
                ax += sys.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                ax += sys.upper[i] * x[i + 1];
            }
            prop_assert!((ax - sys.rhs[i]).abs() <= 1e-12 * (1.0 + sys.rhs[i].abs()));
        }
    }

    #[test]
    fn transform_maps_observer_boundaries_to_target_boundaries(
        lambda in 1e-7f64..1e-5,
        h in 1.0f64..4.0,
        h_tilde in -0.05f64..0.05,
        amp in -5.0f64..5.0,
    ) {
        let g = GainParams::from_thermal(lambda, 3e-5, 1.0, &thermal()).unwrap();
        // Quadrature error grows like the kernels, roughly e^z with
        // z = H (λ/D)^½; the default setting sits near z = 6.5.
        prop_assume!(h * (lambda / g.diffusivity).sqrt() <= 8.0);
        let n = 401;
        let t = BacksteppingTransform::new(&g, h, n).unwrap();
        // T̃ = T̂ − T, so the observer boundary gives T̃(H) = −p₃ H̃.
        let p3 = g.p3(h);
        let err: Vec<f64> = (0..n)
            .map(|i| {
                let eta = i as f64 / (n - 1) as f64;
                amp * (std::f64::consts::PI * eta).sin() - eta * p3 * h_tilde
            })
            .collect();
        let w = t.to_target(&err, h_tilde);
        prop_assert!(w[0].abs() <= 1e-12);
        prop_assert!((w[n - 1] - g.epsilon * h_tilde).abs() <= 1e-9 * (1.0 + h_tilde.abs()));
        let back = t.from_target(&w, h_tilde);
        let scale = err.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in back.iter().zip(&err) {
            prop_assert!((a - b).abs() <= 2e-5 * scale, "{} vs {} scale {}", a, b, scale);
        }
    }

    #[test]
    fn error_functional_is_sign_invariant(offset in -5.0f64..5.0, dh in -0.1f64..0.1, a in -2.0f64..2.0) {
        let p = thermal();
        let grid = GridConfig::default();
        let plant = initial_state(&p, &grid, 0.15, 3.0, -20.0, a, ).unwrap();
        let make = |sign: f64| ObserverState {
            temps: plant
                .ice
                .iter()
                .enumerate()
                .map(|(i, t)| t + sign * offset * (i as f64 / 10.0).cos())
                .collect(),
            h_hat: plant.thickness - sign * dh,
            domain: plant.thickness,
            time: 0.0,
        };
        let up = error_diagnostics(&make(1.0), &plant);
        let down = error_diagnostics(&make(-1.0), &plant);
        prop_assert!((up.phi - down.phi).abs() <= 1e-12 * (1.0 + up.phi));
        prop_assert!((up.linf - down.linf).abs() <= 1e-12 * (1.0 + up.linf));
        prop_assert!(up.phi >= 0.0);
        prop_assert!((up.h_tilde + down.h_tilde).abs() <= 1e-15);
    }
}

#[test]
fn config_survives_a_toml_round_trip() {
    let mut cfg = Config::default();
    cfg.run.lambda = 1e-5;
    cfg.run.snowfall_rates = Some(vec![1e-9; 12]);
    cfg.forcing.lookup_mode = LookupMode::LinearMidpoint;
    let text = toml::to_string(&cfg).unwrap();
    let back = Config::from_toml_str(&text).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn config_errors_name_the_line() {
    let err = Config::from_toml_str("[run]\nyears = 2\nlambda = \"x\"\n").unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    let err = Config::from_toml_str("[run]\ndt = -1\n").unwrap_err();
    assert!(err.to_string().contains("dt"), "{err}");
}
