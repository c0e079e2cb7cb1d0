//! Numerical verification of the gain kernels: PDE residuals by finite
//! differences, diagonal and boundary conditions, the transform round trip,
//! the condition on f, and the Bessel ratios against an independent oracle.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bessel::{bessel_i, bessel_j, ratio_at_origin, ratio_i, ratio_i_sq, ratio_j};
use crate::error::Result;
use crate::kernels::{BacksteppingTransform, GainParams};
use crate::quadrature::tail_weights;

/// One verified quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    /// Measured error (or value, for the order checks).
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRow {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value.is_finite() && value <= tolerance,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value.is_finite() && value >= tolerance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelCheckOptions {
    pub gains: GainParams,
    pub thickness: f64,
    /// Interior points per direction for the PDE residuals.
    pub grid: usize,
    /// Finite-difference step for the residual bound (m).
    pub fd_step: f64,
    /// Coarse step of the order check; the fine step is half of it.
    pub order_step: f64,
    /// Nodes of the transform round trip.
    pub transform_nodes: usize,
    /// Random profiles in the round trip.
    pub profiles: usize,
    pub seed: u64,
    /// Test hook: evaluate q with the sign of λ flipped.
    pub corrupt_q: bool,
}

impl KernelCheckOptions {
    pub fn new(gains: GainParams, thickness: f64) -> Self {
        Self {
            gains,
            thickness,
            grid: 200,
            fd_step: 2e-4,
            order_step: 0.2,
            transform_nodes: 400,
            profiles: 20,
            seed: 0,
            corrupt_q: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct KernelCheckReport {
    pub rows: Vec<CheckRow>,
}

impl KernelCheckReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn row(&self, name: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// A kernel K(x, y) together with the sign s of its equation
/// K_xx − K_yy = s (λ/D) K.
struct KernelFn<'a> {
    eval: Box<dyn Fn(f64, f64) -> f64 + 'a>,
    sign: f64,
}

fn direct_kernel(g: &GainParams, corrupt: bool) -> KernelFn<'_> {
    let rate = g.lambda / g.diffusivity;
    let eval: Box<dyn Fn(f64, f64) -> f64> = if corrupt {
        Box::new(move |x: f64, y: f64| rate * x * ratio_i_sq(1, -rate * (y * y - x * x)))
    } else {
        Box::new(move |x: f64, y: f64| g.q_analytic(x, y))
    };
    KernelFn { eval, sign: -1.0 }
}

fn inverse_kernel(g: &GainParams) -> KernelFn<'_> {
    KernelFn {
        eval: Box::new(move |x: f64, y: f64| g.r_analytic(x, y)),
        sign: 1.0,
    }
}

/// Interior points (x, y) with 0 < x < y < H, kept at least one cell away
/// from the diagonal and the edges.
fn interior_points(thickness: f64, grid: usize) -> Vec<(f64, f64)> {
    let cell = thickness / (grid + 1) as f64;
    let mut pts = Vec::new();
    for i in 1..=grid {
        for j in 1..=grid {
            let (x, y) = (i as f64 * cell, j as f64 * cell);
            if y - x >= cell {
                pts.push((x, y));
            }
        }
    }
    pts
}

/// Largest |K_xx − K_yy − s(λ/D)K| with central differences of step h, and
/// the largest |K| on the same points.
fn pde_residual(k: &KernelFn, rate: f64, pts: &[(f64, f64)], h: f64) -> (f64, f64) {
    let f = &k.eval;
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for &(x, y) in pts {
        let c = f(x, y);
        let kxx = (f(x + h, y) - 2.0 * c + f(x - h, y)) / (h * h);
        let kyy = (f(x, y + h) - 2.0 * c + f(x, y - h)) / (h * h);
        worst = worst.max((kxx - kyy - k.sign * rate * c).abs());
        scale = scale.max(c.abs());
    }
    (worst, scale)
}

/// Observed order log₂(e(h)/e(h/2)) of the residual on a coarse subset.
fn pde_order(k: &KernelFn, rate: f64, thickness: f64, h: f64) -> f64 {
    // the residual's h² term needs room: keep 2h clear of every boundary
    let pts: Vec<(f64, f64)> = interior_points(thickness, 24)
        .into_iter()
        .filter(|&(x, y)| x > 2.0 * h && y - x > 2.0 * h && y < thickness - 2.0 * h)
        .collect();
    let (coarse, _) = pde_residual(k, rate, &pts, h);
    let (fine, _) = pde_residual(k, rate, &pts, 0.5 * h);
    (coarse / fine).log2()
}

/// I_n(z) = (1/π)∫₀^π e^{z cos θ} cos nθ dθ and
/// J_n(z) = (1/π)∫₀^π cos(nθ − z sin θ) dθ by the trapezoid rule, which
/// converges geometrically for these periodic integrands.
pub fn bessel_by_integral(order: u32, z: f64, modified: bool) -> f64 {
    let m = 400;
    let h = PI / m as f64;
    let n = order as f64;
    let f = |t: f64| {
        if modified {
            (z * t.cos()).exp() * (n * t).cos()
        } else {
            (n * t - z * t.sin()).cos()
        }
    };
    let inner: f64 = (1..m).map(|k| f(k as f64 * h)).sum();
    (inner + 0.5 * (f(0.0) + f(PI))) * h / PI
}

/// Runs every check.
pub fn kernels_check(opts: &KernelCheckOptions) -> Result<KernelCheckReport> {
    let g = &opts.gains;
    let hh = opts.thickness;
    let rate = g.lambda / g.diffusivity;
    let mut rows = Vec::new();

    let pts = interior_points(hh, opts.grid);
    let q = direct_kernel(g, opts.corrupt_q);
    let r = inverse_kernel(g);
    for (name, k) in [("q", &q), ("r", &r)] {
        let (res, scale) = pde_residual(k, rate, &pts, opts.fd_step);
        rows.push(CheckRow::at_most(format!("pde_residual_{name}"), res / scale, 1e-6));
        let order = pde_order(k, rate, hh, opts.order_step);
        rows.push(CheckRow::at_least(format!("pde_order_{name}"), order, 1.8));
    }

    // d/dx K(x,x) = ∓λ/(2D) and K(0,y) = 0
    let h = 1e-4;
    let mut diag_q = 0.0_f64;
    let mut diag_r = 0.0_f64;
    let mut edge = 0.0_f64;
    for i in 1..50 {
        let x = hh * i as f64 / 50.0;
        let dq = ((q.eval)(x + h, x + h) - (q.eval)(x - h, x - h)) / (2.0 * h);
        let dr = ((r.eval)(x + h, x + h) - (r.eval)(x - h, x - h)) / (2.0 * h);
        diag_q = diag_q.max((dq + 0.5 * rate).abs() / (0.5 * rate));
        diag_r = diag_r.max((dr - 0.5 * rate).abs() / (0.5 * rate));
        edge = edge.max((q.eval)(0.0, x).abs()).max((r.eval)(0.0, x).abs());
    }
    rows.push(CheckRow::at_most("diagonal_q", diag_q, 1e-8));
    rows.push(CheckRow::at_most("diagonal_r", diag_r, 1e-8));
    rows.push(CheckRow::at_most("edge_zero", edge, 0.0));

    // ψ = (D/β) q(·,H), φ = (D/β) r(·,H), and the boundary gains
    let mut boundary = 0.0_f64;
    for i in 0..=50 {
        let x = hh * i as f64 / 50.0;
        let psi = g.kernel_psi(x, hh)?;
        let phi = g.kernel_phi(x, hh)?;
        let want_psi = g.diffusivity / g.beta * (q.eval)(x, hh);
        let want_phi = g.diffusivity / g.beta * (r.eval)(x, hh);
        boundary = boundary
            .max((psi - want_psi).abs() / psi.abs().max(1.0))
            .max((phi - want_phi).abs() / phi.abs().max(1.0));
    }
    let p3_err = (g.p3(hh) - (g.kernel_psi(hh, hh)? - g.epsilon)).abs() / g.p3(hh).abs();
    rows.push(CheckRow::at_most("boundary_kernels", boundary, 1e-12));
    rows.push(CheckRow::at_most("boundary_p3", p3_err, 1e-12));

    rows.push(CheckRow::at_most("round_trip", round_trip_error(opts)?, 1e-6));
    rows.push(CheckRow::at_most("f_condition", f_condition_residual(g, hh, opts.transform_nodes)?, 1e-6));

    for (name, got, want) in [
        ("bessel_I1(1)", bessel_i(1, 1.0), bessel_by_integral(1, 1.0, true)),
        ("bessel_I2(2)", bessel_i(2, 2.0), bessel_by_integral(2, 2.0, true)),
        ("bessel_J1(1)", bessel_j(1, 1.0), bessel_by_integral(1, 1.0, false)),
    ] {
        rows.push(CheckRow::at_most(name, (got - want).abs(), 1e-12));
    }
    let origin_exact = (1..=3).all(|j| ratio_i(j, 0.0) == ratio_at_origin(j) && ratio_j(j, 0.0) == ratio_at_origin(j));
    rows.push(CheckRow::at_most("bessel_origin", if origin_exact { 0.0 } else { 1.0 }, 0.0));

    let finite = (0..=200).all(|i| {
        let z = 50.0 * i as f64 / 200.0;
        (1..=3).all(|j| ratio_i(j, z).is_finite() && ratio_j(j, z).is_finite())
    });
    rows.push(CheckRow::at_most("z_stress_50", if finite { 0.0 } else { 1.0 }, 0.0));

    Ok(KernelCheckReport { rows })
}

/// Worst relative L∞ error of T̃ → w → T̃ over random smooth profiles.
pub fn round_trip_error(opts: &KernelCheckOptions) -> Result<f64> {
    let n = opts.transform_nodes;
    let hh = opts.thickness;
    let t = BacksteppingTransform::new(&opts.gains, hh, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0_f64;
    for _ in 0..opts.profiles {
        let coeffs: Vec<(f64, f64)> = (1..=4)
            .map(|k| (rng.random_range(-1.0..1.0) / k as f64, rng.random_range(0.0..PI)))
            .collect();
        let offset: f64 = rng.random_range(-10.0..10.0);
        let h_tilde: f64 = rng.random_range(-1e-3..1e-3);
        let profile: Vec<f64> = (0..n)
            .map(|i| {
                let x = hh * i as f64 / (n - 1) as f64;
                offset
                    + coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, (a, ph))| a * ((k + 1) as f64 * PI * x / hh + ph).sin())
                        .sum::<f64>()
            })
            .collect();
        let back = t.from_target(&t.to_target(&profile, h_tilde), h_tilde);
        let scale = profile.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let err = profile.iter().zip(&back).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err / scale);
    }
    Ok(worst)
}

/// Relative residual of f(x) − ∫ₓᴴ q(x,y) f(y) dy = −ε q(x,H) − ψ_H(x,H).
pub fn f_condition_residual(g: &GainParams, thickness: f64, nodes: usize) -> Result<f64> {
    let dx = thickness / (nodes - 1) as f64;
    let x = |i: usize| if i == nodes - 1 { thickness } else { i as f64 * dx };
    let f = (0..nodes).map(|i| g.kernel_f(x(i), thickness)).collect::<Result<Vec<_>>>()?;
    let scale = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0_f64;
    for i in 0..nodes {
        let w = tail_weights(i, nodes - 1, dx);
        // the one-interval panel reaches back past x, where q continues analytically
        let integral: f64 = (0..nodes)
            .filter(|&j| w[j] != 0.0)
            .map(|j| w[j] * g.q_analytic(x(i), x(j)) * f[j])
            .sum();
        let lhs = f[i] - integral;
        let rhs = -g.epsilon * g.q_analytic(x(i), thickness) - g.psi_h(x(i), thickness)?;
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ThermalParams;

    fn default_gains() -> GainParams {
        GainParams::from_thermal(5e-6, 3e-5, 1.0, &ThermalParams::default()).unwrap()
    }

    #[test]
    fn integral_oracle_matches_references() {
        assert!((bessel_by_integral(1, 1.0, true) - 0.565_159_103_992_485_027_2).abs() < 1e-15);
        assert!((bessel_by_integral(1, 1.0, false) - 0.440_050_585_744_933_515_9).abs() < 1e-15);
    }

    #[test]
    fn default_check_passes() {
        let mut opts = KernelCheckOptions::new(default_gains(), 3.0);
        opts.grid = 60;
        let report = kernels_check(&opts).unwrap();
        for r in &report.rows {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn corrupted_kernel_fails_residual() {
        let mut opts = KernelCheckOptions::new(default_gains(), 3.0);
        opts.grid = 40;
        opts.corrupt_q = true;
        let report = kernels_check(&opts).unwrap();
        assert!(!report.row("pde_residual_q").unwrap().passed);
        assert!(report.row("pde_residual_r").unwrap().passed);
        assert!(!report.all_passed());
    }
}
