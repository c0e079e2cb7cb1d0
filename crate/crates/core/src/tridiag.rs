use crate::error::{Error, Result};

/// Row i reads `lower[i]·u[i−1] + diag[i]·u[i] + upper[i]·u[i+1] = rhs[i]`;
/// `lower[0]` and `upper[n−1]` are ignored.
#[derive(Debug, Clone, Default)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl Tridiagonal {
    pub fn with_size(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn set_row(&mut self, i: usize, lower: f64, diag: f64, upper: f64, rhs: f64) {
        self.lower[i] = lower;
        self.diag[i] = diag;
        self.upper[i] = upper;
        self.rhs[i] = rhs;
    }

    pub fn set_dirichlet(&mut self, i: usize, value: f64) {
        self.set_row(i, 0.0, 1.0, 0.0, value);
    }

    /// Thomas algorithm without pivoting; the systems assembled here are
    /// diagonally dominant.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let n = self.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Solver("zero pivot in tridiagonal row 0".into()));
        }
        c[0] = self.upper[0] / denom;
        d[0] = self.rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i] * c[i - 1];
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::Solver(format!("zero pivot in tridiagonal row {i}")));
            }
            c[i] = if i + 1 < n { self.upper[i] / denom } else { 0.0 };
            d[i] = (self.rhs[i] - self.lower[i] * d[i - 1]) / denom;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Ok(x)
    }
}
