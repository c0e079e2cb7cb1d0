//! Backstepping kernels and observer gains.
//!
//! The direct kernel q and the boundary kernel ψ map the target coordinates
//! back to the estimation error; r and φ go the other way. All of them are
//! closed-form Bessel ratios of
//!
//! ```text
//! z(x, y) = sqrt(λ/D · (y² − x²))
//! ```
//!
//! and are evaluated here through the series in z², which also extends them
//! smoothly past the diagonal x = y (needed by quadrature stencils that reach
//! one node beyond it).

use crate::bessel::{ratio_i, ratio_i_sq, ratio_j};
use crate::error::{invalid, Error, Result};
use crate::params::ThermalParams;
use crate::quadrature::tail_weights;

/// Design parameters of the observer together with the plant constants
/// the gains depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainParams {
    /// Target-system decay rate λ (1/s).
    pub lambda: f64,
    /// Thickness-error decay rate c (1/s).
    pub c: f64,
    /// Boundary gain ε.
    pub epsilon: f64,
    /// Ice diffusivity D (m²/s).
    pub diffusivity: f64,
    /// k/q (m²/(s·°C)).
    pub beta: f64,
}

impl GainParams {
    pub fn new(lambda: f64, c: f64, epsilon: f64, diffusivity: f64, beta: f64) -> Result<Self> {
        for (name, v) in [
            ("lambda", lambda),
            ("c", c),
            ("epsilon", epsilon),
            ("D_i", diffusivity),
            ("beta", beta),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, "> 0", v));
            }
        }
        Ok(Self {
            lambda,
            c,
            epsilon,
            diffusivity,
            beta,
        })
    }

    pub fn from_thermal(lambda: f64, c: f64, epsilon: f64, p: &ThermalParams) -> Result<Self> {
        Self::new(lambda, c, epsilon, p.diffusivity(), p.beta())
    }

    /// λ/D (1/m²).
    fn rate(&self) -> f64 {
        self.lambda / self.diffusivity
    }

    fn check_order(lower: f64, upper: f64, what: &'static str) -> Result<()> {
        if !(lower >= 0.0) {
            return Err(Error::Domain {
                what,
                value: lower,
                domain: ">= 0",
            });
        }
        if lower > upper {
            return Err(Error::Domain {
                what,
                value: lower,
                domain: "<= upper argument",
            });
        }
        Ok(())
    }

    pub fn z_of(&self, x: f64, thickness: f64) -> Result<f64> {
        Self::check_order(x, thickness, "x")?;
        Ok(self.z_unchecked(x, thickness))
    }

    fn z_unchecked(&self, x: f64, y: f64) -> f64 {
        (self.rate() * (y * y - x * x)).max(0.0).sqrt()
    }

    /// Direct kernel q(x, y) = −(λ/D) x I₁(z)/z for 0 ≤ x ≤ y.
    pub fn kernel_q(&self, x: f64, y: f64) -> Result<f64> {
        Self::check_order(x, y, "x")?;
        Ok(self.q_analytic(x, y))
    }

    /// Inverse kernel r(x, y) = (λ/D) x J₁(z)/z for 0 ≤ x ≤ y.
    pub fn kernel_r(&self, x: f64, y: f64) -> Result<f64> {
        Self::check_order(x, y, "x")?;
        Ok(self.r_analytic(x, y))
    }

    pub(crate) fn q_analytic(&self, x: f64, y: f64) -> f64 {
        let rate = self.rate();
        -rate * x * ratio_i_sq(1, rate * (y * y - x * x))
    }

    pub(crate) fn r_analytic(&self, x: f64, y: f64) -> f64 {
        let rate = self.rate();
        rate * x * ratio_i_sq(1, -rate * (y * y - x * x))
    }

    /// ψ(x, H) = (D/β) q(x, H).
    pub fn kernel_psi(&self, x: f64, thickness: f64) -> Result<f64> {
        let z = self.z_of(x, thickness)?;
        Ok(-self.lambda / self.beta * x * ratio_i(1, z))
    }

    /// φ(x, H) = (D/β) r(x, H).
    pub fn kernel_phi(&self, x: f64, thickness: f64) -> Result<f64> {
        let z = self.z_of(x, thickness)?;
        Ok(self.lambda / self.beta * x * ratio_j(1, z))
    }

    /// ∂ψ/∂H, from d/dz[I₁(z)/z] = I₂(z)/z.
    pub fn psi_h(&self, x: f64, thickness: f64) -> Result<f64> {
        let z = self.z_of(x, thickness)?;
        Ok(-self.lambda * self.lambda / (self.beta * self.diffusivity) * x * thickness * ratio_i(2, z))
    }

    /// ∂φ/∂H, from d/dz[J₁(z)/z] = −J₂(z)/z.
    pub fn phi_h(&self, x: f64, thickness: f64) -> Result<f64> {
        let z = self.z_of(x, thickness)?;
        Ok(-self.lambda * self.lambda / (self.beta * self.diffusivity) * x * thickness * ratio_j(2, z))
    }

    /// Coefficient f(x, H) of the Ḣ·H̃ term in the target system, built from
    /// the inverse transformation: f = φ_H − r(x, H)·p₃(H).
    pub fn kernel_f(&self, x: f64, thickness: f64) -> Result<f64> {
        let r = self.kernel_r(x, thickness)?;
        Ok(self.phi_h(x, thickness)? - r * self.p3(thickness))
    }

    /// Distributed gain p₁(x) at thickness H.
    pub fn p1(&self, x: f64, thickness: f64) -> Result<f64> {
        let z = self.z_of(x, thickness)?;
        Ok(self.p1_at(x, thickness, z))
    }

    fn p1_at(&self, x: f64, thickness: f64, z: f64) -> f64 {
        let GainParams {
            lambda: l,
            c,
            epsilon: eps,
            diffusivity: d,
            beta: b,
        } = *self;
        c * l / b * x * ratio_i(1, z)
            + (eps * thickness / d - 3.0 / b) * l * l * x * ratio_i(2, z)
            + l * l * l / (d * b) * x * x * x * ratio_i(3, z)
    }

    /// p₂ vanishes identically.
    pub fn p2(&self) -> f64 {
        0.0
    }

    pub fn p3(&self, thickness: f64) -> f64 {
        -self.lambda * thickness / (2.0 * self.beta) - self.epsilon
    }

    /// c − β(ε q(H,H) − ψ_x(H,H)) in closed form. The H² term carries
    /// 1/(4D): ψ_x(H,H) = −(λ/2β)(1 − λH²/(4D)).
    pub fn p4(&self, thickness: f64) -> f64 {
        let GainParams {
            lambda: l,
            c,
            epsilon: eps,
            diffusivity: d,
            beta: b,
        } = *self;
        c - 0.5 * l * (1.0 - l * thickness * thickness / (4.0 * d)) + b * l * eps * thickness / (2.0 * d)
    }

    /// All gains at thickness `thickness` on the given depths.
    pub fn gains(&self, thickness: f64, depths: &[f64]) -> Result<GainEvaluation> {
        if !(thickness > 0.0) {
            return Err(Error::Domain {
                what: "H",
                value: thickness,
                domain: "H > 0",
            });
        }
        let p1 = depths
            .iter()
            .map(|&x| self.p1(x.min(thickness), thickness))
            .collect::<Result<Vec<_>>>()?;
        Ok(GainEvaluation {
            p1,
            p2: self.p2(),
            p3: self.p3(thickness),
            p4: self.p4(thickness),
            thickness,
        })
    }

    /// Every kernel at one point, for diagnostics.
    pub fn kernel_point(&self, x: f64, y: f64, thickness: f64) -> Result<KernelPoint> {
        Ok(KernelPoint {
            q: self.kernel_q(x, y)?,
            r: self.kernel_r(x, y)?,
            psi: self.kernel_psi(x, thickness)?,
            phi: self.kernel_phi(x, thickness)?,
            f: self.kernel_f(x, thickness)?,
            z: self.z_of(x, y)?,
        })
    }
}

/// Observer gains evaluated at one thickness.
#[derive(Debug, Clone, PartialEq)]
pub struct GainEvaluation {
    pub p1: Vec<f64>,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub thickness: f64,
}

impl GainEvaluation {
    /// The open-loop estimator: every gain zero.
    pub fn zero(nodes: usize, thickness: f64) -> Self {
        Self {
            p1: vec![0.0; nodes],
            p2: 0.0,
            p3: 0.0,
            p4: 0.0,
            thickness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub q: f64,
    pub r: f64,
    pub psi: f64,
    pub phi: f64,
    pub f: f64,
    pub z: f64,
}

/// The pair of Volterra transformations between the estimation error
/// (T̃, H̃) and the target state (w, H̃), discretised on a uniform grid of
/// `nodes` points over [0, H] with fourth-order tail quadrature.
#[derive(Debug, Clone)]
pub struct BacksteppingTransform {
    thickness: f64,
    /// Row i holds quadrature weight × r(x_i, y_j).
    inverse_rows: Vec<Vec<f64>>,
    /// Row i holds quadrature weight × q(x_i, y_j).
    direct_rows: Vec<Vec<f64>>,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

impl BacksteppingTransform {
    pub fn new(g: &GainParams, thickness: f64, nodes: usize) -> Result<Self> {
        if nodes < 4 {
            return Err(invalid("nodes", ">= 4", nodes as f64));
        }
        if !(thickness > 0.0) {
            return Err(invalid("H", "> 0", thickness));
        }
        let dx = thickness / (nodes - 1) as f64;
        let x = |i: usize| if i == nodes - 1 { thickness } else { i as f64 * dx };
        let mut inverse_rows = Vec::with_capacity(nodes);
        let mut direct_rows = Vec::with_capacity(nodes);
        for i in 0..nodes {
            let w = tail_weights(i, nodes - 1, dx);
            let xi = x(i);
            inverse_rows.push(
                w.iter()
                    .enumerate()
                    .map(|(j, wj)| if *wj == 0.0 { 0.0 } else { wj * g.r_analytic(xi, x(j)) })
                    .collect(),
            );
            direct_rows.push(
                w.iter()
                    .enumerate()
                    .map(|(j, wj)| if *wj == 0.0 { 0.0 } else { wj * g.q_analytic(xi, x(j)) })
                    .collect(),
            );
        }
        let phi = (0..nodes)
            .map(|i| g.kernel_phi(x(i), thickness))
            .collect::<Result<Vec<_>>>()?;
        let psi = (0..nodes)
            .map(|i| g.kernel_psi(x(i), thickness))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            thickness,
            inverse_rows,
            direct_rows,
            phi,
            psi,
        })
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn nodes(&self) -> usize {
        self.phi.len()
    }

    /// w = T̃ − ∫ₓᴴ r(x,y) T̃(y) dy − φ(x,H) H̃
    pub fn to_target(&self, error: &[f64], h_tilde: f64) -> Vec<f64> {
        Self::apply(&self.inverse_rows, &self.phi, error, h_tilde)
    }

    /// T̃ = w − ∫ₓᴴ q(x,y) w(y) dy − ψ(x,H) H̃
    pub fn from_target(&self, target: &[f64], h_tilde: f64) -> Vec<f64> {
        Self::apply(&self.direct_rows, &self.psi, target, h_tilde)
    }

    fn apply(rows: &[Vec<f64>], boundary: &[f64], u: &[f64], h_tilde: f64) -> Vec<f64> {
        assert_eq!(u.len(), rows.len(), "profile length must match the transform grid");
        rows.iter()
            .zip(boundary)
            .zip(u)
            .map(|((row, b), ui)| {
                let integral: f64 = row.iter().zip(u).map(|(k, v)| k * v).sum();
                ui - integral - b * h_tilde
            })
            .collect()
    }
}
