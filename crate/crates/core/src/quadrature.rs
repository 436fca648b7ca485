//! Composite quadrature on uniform grids.

/// Integrates samples `f` taken on a uniform grid with spacing `h`.
///
/// Composite Simpson when the number of intervals is even, composite
/// trapezoid otherwise.
pub fn integrate_uniform(f: &[f64], h: f64) -> f64 {
    let intervals = f.len().saturating_sub(1);
    match intervals {
        0 => 0.0,
        k if k % 2 == 0 => simpson(f, h),
        _ => trapezoid(f, h),
    }
}

pub fn trapezoid(f: &[f64], h: f64) -> f64 {
    if f.len() < 2 {
        return 0.0;
    }
    let inner: f64 = f[1..f.len() - 1].iter().sum();
    h * (0.5 * (f[0] + f[f.len() - 1]) + inner)
}

/// Composite Simpson; requires an even number of intervals.
pub fn simpson(f: &[f64], h: f64) -> f64 {
    assert!(f.len() >= 3 && (f.len() - 1) % 2 == 0, "simpson needs an even interval count");
    let last = f.len() - 1;
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in f.iter().enumerate().take(last).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (f[0] + f[last] + 4.0 * odd + 2.0 * even)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_cubics() {
        let h = 0.1;
        let f: Vec<f64> = (0..=10).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((integrate_uniform(&f, h) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn odd_count_falls_back_to_trapezoid() {
        let f = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(integrate_uniform(&f, 1.0), 4.5);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(integrate_uniform(&[], 1.0), 0.0);
        assert_eq!(integrate_uniform(&[3.0], 1.0), 0.0);
    }
}
