use libm::erfc;

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper bound on the standard normal density, `(2 pi)^(-1/2)`.
pub const STD_NORMAL_DENSITY_BOUND: f64 = 0.398_942_280_401_432_7;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-16);
        let v = std_normal_cdf(1.0);
        assert!((v - 0.841_344_746_068_542_9).abs() < 1e-14, "{v:e}");
        assert!((std_normal_cdf(-1.96) - 0.024_997_895_148_220_43).abs() < 1e-14);
        assert_eq!(std_normal_cdf(10.0), 1.0);
        assert!((std_normal_cdf(-10.0) / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
        assert!((STD_NORMAL_DENSITY_BOUND - (2.0 * std::f64::consts::PI).sqrt().recip()).abs() < 1e-16);
    }
}
