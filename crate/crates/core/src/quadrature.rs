//! Fixed-grid quadrature on uniformly spaced nodes.

/// Composite trapezoid rule.
pub fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            spacing * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Weights for ∫ from node `start` to node `last` of a uniform grid, fourth
/// order for every interval count: composite Simpson, a closing 3/8 panel
/// when the count is odd, and a four-point Adams–Moulton panel for a single
/// interval. Entries outside the stencil are zero.
pub fn tail_weights(start: usize, last: usize, spacing: f64) -> Vec<f64> {
    let mut w = vec![0.0; last + 1];
    if start >= last {
        return w;
    }
    let intervals = last - start;
    let h = spacing;
    if intervals == 1 {
        if last >= 3 {
            for (offset, c) in [1.0, -5.0, 19.0, 9.0].into_iter().enumerate() {
                w[last - 3 + offset] += h * c / 24.0;
            }
        } else {
            w[start] += 0.5 * h;
            w[last] += 0.5 * h;
        }
        return w;
    }
    let simpson_end = if intervals % 2 == 0 { last } else { last - 3 };
    let mut i = start;
    while i < simpson_end {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
        i += 2;
    }
    if simpson_end != last {
        let b = simpson_end;
        for (offset, c) in [1.0, 3.0, 3.0, 1.0].into_iter().enumerate() {
            w[b + offset] += 3.0 * h * c / 8.0;
        }
    }
    w
}

/// ∫ from node `start` to the last node using [`tail_weights`].
pub fn integrate_tail(values: &[f64], start: usize, spacing: f64) -> f64 {
    let last = values.len().saturating_sub(1);
    tail_weights(start, last, spacing)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_constant() {
        assert!((trapezoid(&[1.0; 31], 0.1) - 3.0).abs() < 1e-14);
        assert_eq!(trapezoid(&[5.0], 1.0), 0.0);
    }

    #[test]
    fn tail_rule_exact_for_cubics() {
        let n = 12;
        let h = 0.3;
        let f: Vec<f64> = (0..n).map(|i| {
            let x = i as f64 * h;
            2.0 * x * x * x - x * x + 0.5 * x - 1.0
        }).collect();
        let anti = |x: f64| 0.5 * x.powi(4) - x.powi(3) / 3.0 + 0.25 * x * x - x;
        let xl = (n - 1) as f64 * h;
        for start in 0..n {
            let exact = anti(xl) - anti(start as f64 * h);
            let got = integrate_tail(&f, start, h);
            assert!((got - exact).abs() < 1e-11, "start {start}: {got} vs {exact}");
        }
    }

    #[test]
    fn tail_rule_fourth_order() {
        let err = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let f: Vec<f64> = (0..n).map(|i| (3.0 * i as f64 * h).sin()).collect();
            let exact = (1.0 - 3.0_f64.cos()) / 3.0;
            (integrate_tail(&f, 0, h) - exact).abs()
        };
        // odd interval count exercises the 3/8 panel
        let ratio = err(42) / err(84);
        assert!(ratio > 12.0, "observed ratio {ratio}");
    }
}
