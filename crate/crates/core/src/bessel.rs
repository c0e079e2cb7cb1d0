//! Bessel-function ratios I_j(z)/z^j and J_j(z)/z^j.
//!
//! The kernels only ever need these ratios, which are entire functions of z²
//! with the finite value 1/(2^j j!) at the origin. The modified ratio is a
//! sum of positive terms and is evaluated by its power series for every z.
//! The ordinary ratio uses the alternating series while the cancellation is
//! mild (z ≤ 12) and Miller's backward recurrence beyond that.

/// Relative size below which a series term no longer changes the sum.
const SERIES_TOL: f64 = 1e-17;
const MAX_TERMS: usize = 500;
const J_SERIES_LIMIT: f64 = 12.0;

/// Neumaier-compensated running sum.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// 1/(2^j j!), the value of both ratios at z = 0.
pub fn ratio_at_origin(order: u32) -> f64 {
    let mut v = 1.0;
    for k in 1..=order {
        v /= 2.0 * k as f64;
    }
    v
}

/// Σ_k (s/4)^k / (k! (k+j)!) · 1/2^j, i.e. I_j(z)/z^j with s = z².
/// Negative `s` continues analytically to J_j(√−s)/(√−s)^j.
fn power_series_sq(order: u32, s: f64) -> f64 {
    let quarter_sq = 0.25 * s;
    let mut term = ratio_at_origin(order);
    let mut acc = CompensatedSum::default();
    acc.add(term);
    let j = order as f64;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= quarter_sq / (kf * (kf + j));
        acc.add(term);
        // terms only shrink monotonically once k² exceeds |s|/4
        if kf * kf > quarter_sq.abs() && term.abs() <= SERIES_TOL * acc.value().abs() {
            break;
        }
    }
    acc.value()
}

fn power_series(order: u32, z: f64, alternating: bool) -> f64 {
    let s = z * z;
    power_series_sq(order, if alternating { -s } else { s })
}

/// I_j(z)/z^j as a function of s = z², valid for either sign of s.
pub fn ratio_i_sq(order: u32, s: f64) -> f64 {
    if s < -J_SERIES_LIMIT * J_SERIES_LIMIT {
        ratio_j(order, (-s).sqrt())
    } else {
        power_series_sq(order, s)
    }
}

/// I_j(z)/z^j for z ≥ 0.
pub fn ratio_i(order: u32, z: f64) -> f64 {
    debug_assert!(z >= 0.0, "ratio_i needs z >= 0, got {z}");
    power_series(order, z, false)
}

/// J_j(z)/z^j for z ≥ 0.
pub fn ratio_j(order: u32, z: f64) -> f64 {
    debug_assert!(z >= 0.0, "ratio_j needs z >= 0, got {z}");
    if z <= J_SERIES_LIMIT {
        power_series(order, z, true)
    } else {
        bessel_j_miller(order, z) / z.powi(order as i32)
    }
}

/// Modified Bessel function of the first kind I_j(z).
pub fn bessel_i(order: u32, z: f64) -> f64 {
    z.powi(order as i32) * ratio_i(order, z)
}

/// Bessel function of the first kind J_j(z).
pub fn bessel_j(order: u32, z: f64) -> f64 {
    z.powi(order as i32) * ratio_j(order, z)
}

/// Miller's downward recurrence normalised by J0 + 2ΣJ_{2k} = 1.
fn bessel_j_miller(order: u32, x: f64) -> f64 {
    let n = order as usize;
    let span = x.max(n as f64);
    let mut start = (span + 30.0 + (50.0 * span).sqrt()) as usize;
    start += start % 2;

    let mut next = 0.0_f64; // J_{k+1}
    let mut cur = 1e-300_f64; // J_k
    let mut wanted = 0.0;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            wanted *= 1e-250;
            norm *= 1e-250;
        }
        let idx = k - 1;
        if idx == n {
            wanted = cur;
        }
        if idx > 0 && idx % 2 == 0 {
            norm += 2.0 * cur;
        }
    }
    norm += cur;
    wanted / norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_values() {
        assert_eq!(ratio_i(1, 0.0), 0.5);
        assert_eq!(ratio_i(2, 0.0), 0.125);
        assert_eq!(ratio_i(3, 0.0), 1.0 / 48.0);
        assert_eq!(ratio_j(1, 0.0), 0.5);
        assert_eq!(ratio_j(2, 0.0), 0.125);
    }

    // Reference values from a 40-digit evaluation.
    #[test]
    fn against_high_precision() {
        let cases = [
            (bessel_i(1, 1.0), 0.565_159_103_992_485_027_2),
            (bessel_i(2, 2.0), 0.688_948_447_698_738_204_1),
            (bessel_j(1, 1.0), 0.440_050_585_744_933_515_9),
            (bessel_i(3, 2.5), 0.474_370_408_778_035_589_6),
            (ratio_j(1, 10.0), 0.004_347_274_616_886_143_667),
            (ratio_j(2, 20.0), -0.000_400_853_379_807_495_375_4),
            (ratio_j(1, 50.0), -0.001_950_236_562_503_502_753),
        ];
        for (i, (got, want)) in cases.iter().enumerate() {
            assert!((got - want).abs() < 1e-13, "case {i}: {got} vs {want}");
        }
        let big = ratio_i(1, 50.0);
        assert!((big / 5.806_157_180_207_113_593e18 - 1.0).abs() < 1e-13);
        let big3 = ratio_i(3, 50.0);
        assert!((big3 / 2.142_211_311_107_153_018e15 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn first_zero_of_j1() {
        assert!(ratio_j(1, 3.831_705_970_207_512).abs() < 1e-14);
        assert!(ratio_j(1, 3.8317).abs() < 1e-4);
    }

    #[test]
    fn series_and_recurrence_agree_at_switch() {
        for order in 1..=3 {
            let a = power_series(order, J_SERIES_LIMIT, true);
            let b = bessel_j_miller(order, J_SERIES_LIMIT) / J_SERIES_LIMIT.powi(order as i32);
            assert!((a - b).abs() < 1e-14, "order {order}: {a} vs {b}");
        }
    }

    #[test]
    fn finite_up_to_fifty() {
        let mut z = 0.0;
        while z <= 50.0 {
            for order in 1..=3 {
                assert!(ratio_i(order, z).is_finite());
                assert!(ratio_j(order, z).is_finite());
            }
            z += 0.25;
        }
    }
}
