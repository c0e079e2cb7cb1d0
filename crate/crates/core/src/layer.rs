//! Front-fixed discretisation of one moving layer.
//!
//! A layer occupying [x_top(t), x_top(t) + L(t)] is mapped onto η ∈ [0, 1].
//! With U(η, t) = T(x, t) and node velocity v(η) = ẋ_top + η L̇ the heat
//! equation becomes
//!
//! ```text
//! U_t = κ/L² U_ηη + (v/L) U_η + s
//! ```
//!
//! The diffusion term is central, the grid-motion term upwind, and both are
//! theta-weighted between the old and new geometry.

/// Inputs for one step of one layer. Nodes are ordered by increasing depth.
pub(crate) struct LayerStep<'a> {
    pub old: &'a [f64],
    /// κ = k/(ρc) per node, frozen at the previous time level.
    pub diffusivity: &'a [f64],
    /// Heating rate (°C/s) per node on the new geometry.
    pub source_new: &'a [f64],
    /// Heating rate per node on the old geometry.
    pub source_old: &'a [f64],
    pub thickness_old: f64,
    pub thickness_new: f64,
    /// Velocity of the upper boundary (m/s, positive downward).
    pub top_velocity: f64,
    /// Velocity of the lower boundary.
    pub bottom_velocity: f64,
    pub dt: f64,
    pub theta: f64,
}

/// (lower, diag, upper, rhs) of one interior row.
pub(crate) type Row = (f64, f64, f64, f64);

fn stencil(kappa: f64, velocity: f64, thickness: f64, d_eta: f64) -> [f64; 3] {
    let a = kappa / (thickness * thickness * d_eta * d_eta);
    let b = velocity / (thickness * d_eta);
    if velocity >= 0.0 {
        [a, -2.0 * a - b, a + b]
    } else {
        [a - b, -2.0 * a + b, a]
    }
}

impl LayerStep<'_> {
    pub fn nodes(&self) -> usize {
        self.old.len()
    }

    pub fn d_eta(&self) -> f64 {
        1.0 / (self.nodes() - 1) as f64
    }

    /// Rows for nodes 1..n−1 (the boundary rows belong to the caller).
    pub fn interior_rows(&self) -> Vec<Row> {
        let n = self.nodes();
        let d_eta = self.d_eta();
        let (dt, theta) = (self.dt, self.theta);
        let u = self.old;
        (1..n - 1)
            .map(|k| {
                let eta = k as f64 * d_eta;
                let v = self.top_velocity + eta * (self.bottom_velocity - self.top_velocity);
                let new = stencil(self.diffusivity[k], v, self.thickness_new, d_eta);
                let mut rhs = u[k] + dt * (theta * self.source_new[k] + (1.0 - theta) * self.source_old[k]);
                if theta < 1.0 {
                    let old = stencil(self.diffusivity[k], v, self.thickness_old, d_eta);
                    rhs += dt * (1.0 - theta) * (old[0] * u[k - 1] + old[1] * u[k] + old[2] * u[k + 1]);
                }
                (
                    -dt * theta * new[0],
                    1.0 - dt * theta * new[1],
                    -dt * theta * new[2],
                    rhs,
                )
            })
            .collect()
    }
}

/// Second-order one-sided derivative dU/dx at the last node of `u`
/// (node spacing `dx`).
pub(crate) fn gradient_at_end(u: &[f64], dx: f64) -> f64 {
    let n = u.len();
    (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * dx)
}

/// Second-order one-sided derivative dU/dx at the first node of `u`.
pub(crate) fn gradient_at_start(u: &[f64], dx: f64) -> f64 {
    (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx)
}
