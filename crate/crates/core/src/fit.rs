//! Least-squares fits used for decay diagnostics.

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b)`.
pub fn linear_regression(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

/// Fits `|v| ≈ C e^{-r x}` by regression on `ln |v|`, skipping exact zeros.
///
/// Returns `(C, r)`.
pub fn exponential_decay(xs: &[f64], magnitudes: &[f64]) -> Option<(f64, f64)> {
    let (px, py): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(magnitudes)
        .filter(|(_, m)| **m > 0.0 && m.is_finite())
        .map(|(x, m)| (*x, m.ln()))
        .unzip();
    let (a, b) = linear_regression(&px, &py)?;
    Some((a.exp(), -b))
}

/// Slope of `ln y` against `ln x`.
pub fn power_law_exponent(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_regression(&lx, &ly).map(|(_, b)| b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * (-0.7 * x).exp()).collect();
        let (c, r) = exponential_decay(&xs, &ys).unwrap();
        assert!((c - 2.5).abs() < 1e-12);
        assert!((r - 0.7).abs() < 1e-12);
    }

    #[test]
    fn power_law() {
        let xs = [1.0, 0.5, 0.25];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(3)).collect();
        assert!((power_law_exponent(&xs, &ys).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_regression(&[1.0], &[1.0]).is_none());
        assert!(exponential_decay(&[0.0, 1.0], &[0.0, 0.0]).is_none());
    }
}
