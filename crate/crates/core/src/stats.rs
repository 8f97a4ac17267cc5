//! Small statistical helpers shared by the null-model and regression code.

/// Add-one Monte Carlo p-value: `(1 + #{null ≥ observed}) / (1 + n)`.
pub fn add_one_p(observed: f64, null: &[f64]) -> f64 {
    let exceed = null.iter().filter(|&&x| x >= observed).count();
    (1 + exceed) as f64 / (1 + null.len()) as f64
}

/// Linear-interpolated empirical quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function (Numerical Recipes `erfcc`, |rel err| < 1.2e-7).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t * (-z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
        .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// One-sided lower/upper quantile levels of the ±1σ and ±2σ normal bands.
pub const SIGMA1: (f64, f64) = (0.158_655_253_931_457_05, 0.841_344_746_068_542_9);
pub const SIGMA2: (f64, f64) = (0.022_750_131_948_179_2, 0.977_249_868_051_820_8);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_one_p_fixtures() {
        let null: Vec<f64> = (0..999).map(|k| k as f64).collect();
        assert!((add_one_p(1e9, &null) - 0.001).abs() < 1e-15);
        assert_eq!(add_one_p(0.5, &[1.0]), 1.0);
    }

    #[test]
    fn normal_cdf_matches_sigma_levels() {
        assert!((normal_cdf(-1.0) - SIGMA1.0).abs() < 1e-6);
        assert!((normal_cdf(2.0) - SIGMA2.1).abs() < 1e-6);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert_eq!(quantile_sorted(&xs, 0.5), 2.5);
    }
}
