use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal::std_normal_cdf;

/// Confidence level of the reported DKW band.
pub const DKW_ALPHA: f64 = 0.05;

/// `sup_x |G_T(x) - G(x)|` between the empirical distribution of sorted
/// `samples` and a continuous reference `cdf`.
pub fn kolmogorov_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    Ok(kolmogorov_argmax(samples, cdf)?.0)
}

fn kolmogorov_argmax(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let t = samples.len() as f64;
    let mut best = (-1.0, 0.0);
    for (k, &x) in samples.iter().enumerate() {
        let g = cdf(x);
        let d = ((k + 1) as f64 / t - g).max(g - k as f64 / t);
        if d > best.0 {
            best = (d, g);
        }
    }
    Ok(best)
}

/// `sup_x |G_T(x) - G(x)|` against a discrete law of `(value, probability)`
/// atoms; both distribution functions are compared on each side of every jump.
pub fn kolmogorov_distance_to_law(samples: &[f64], law: &[(f64, f64)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut atoms: Vec<(f64, f64)> = law.iter().copied().filter(|a| a.1 > 0.0).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut points: Vec<f64> = samples.iter().copied().chain(atoms.iter().map(|a| a.0)).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let t = samples.len() as f64;
    let (mut i, mut j) = (0, 0);
    let mut g: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for &x in &points {
        // left limits at x
        worst = worst.max((e - g).abs());
        while i < samples.len() && samples[i] <= x {
            i += 1;
        }
        while j < atoms.len() && atoms[j].0 <= x {
            g += atoms[j].1;
            j += 1;
        }
        e = i as f64 / t;
        worst = worst.max((e - g.min(1.0)).abs());
    }
    Ok(worst)
}

/// Empirical `d_K` to the standard normal with its Monte Carlo error scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DkEstimate {
    pub d_k: f64,
    /// `sqrt(p (1 - p) / T)` with `p = Phi` at the maximizing sample.
    pub mc_stderr: f64,
    /// `sqrt(ln(2 / alpha) / (2 T))`.
    pub dkw: f64,
}

/// `d_K` of sorted `samples` against `Phi`.
pub fn kolmogorov_to_normal(samples: &[f64]) -> Result<DkEstimate> {
    let (d_k, p) = kolmogorov_argmax(samples, std_normal_cdf)?;
    let t = samples.len() as f64;
    Ok(DkEstimate {
        d_k,
        mc_stderr: (p * (1.0 - p) / t).sqrt(),
        dkw: dkw_term(samples.len()),
    })
}

pub fn dkw_term(t: usize) -> f64 {
    ((2.0 / DKW_ALPHA).ln() / (2.0 * t as f64)).sqrt()
}

/// Exact `d_K` between the law of `N^{-1/2} sum_{i <= N} eps_i` for
/// independent Rademacher `eps_i` and the standard normal.
pub fn exact_dk_binomial(n: u64) -> f64 {
    assert!(n >= 1, "N must be positive");
    let nf = n as f64;
    let root = nf.sqrt();
    let log_norm = libm::lgamma(nf + 1.0) - nf * std::f64::consts::LN_2;
    let mut below = 0.0;
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        let kf = k as f64;
        let mass = (log_norm - libm::lgamma(kf + 1.0) - libm::lgamma(nf - kf + 1.0)).exp();
        let x = (2.0 * kf - nf) / root;
        let phi = std_normal_cdf(x);
        let above = (below + mass).min(1.0);
        worst = worst.max((below - phi).abs()).max((above - phi).abs());
        below = above;
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn point_mass_at_zero() {
        let d = kolmogorov_distance(&[0.0; 5], std_normal_cdf).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quantile_samples_give_half_step() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let t = 1000;
        let samples: Vec<f64> = (1..=t)
            .map(|i| normal.inverse_cdf((i as f64 - 0.5) / t as f64))
            .collect();
        let d = kolmogorov_distance(&samples, std_normal_cdf).unwrap();
        assert!((d - 0.5 / t as f64).abs() < 1e-9, "{d}");
    }

    #[test]
    fn far_tail_sample() {
        let d = kolmogorov_distance(&[10.0], std_normal_cdf).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        assert!(matches!(
            kolmogorov_distance(&[], std_normal_cdf),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn discrete_reference_matches_brute_force() {
        let samples = [-1.0, -1.0, 0.0, 0.5, 2.0, 2.0, 2.0];
        let law = [(-1.0, 0.2), (0.5, 0.3), (1.0, 0.1), (2.0, 0.4)];
        let ecdf = |x: f64| samples.iter().filter(|&&s| s <= x).count() as f64 / samples.len() as f64;
        let gcdf = |x: f64| law.iter().filter(|a| a.0 <= x).map(|a| a.1).sum::<f64>();
        let brute = (-300..=300)
            .map(|k| k as f64 / 100.0)
            .flat_map(|x| [x, x - 1e-9])
            .map(|x| (ecdf(x) - gcdf(x)).abs())
            .fold(0.0, f64::max);
        let d = kolmogorov_distance_to_law(&samples, &law).unwrap();
        assert!((d - brute).abs() < 1e-15, "{d} {brute}");
    }

    #[test]
    fn binomial_examples() {
        assert!((exact_dk_binomial(1) - (std_normal_cdf(1.0) - 0.5)).abs() < 1e-15);
        // N = 4: atoms -2, -1, 0, 1, 2 with masses 1, 4, 6, 4, 1 over 16.
        let cum = [0.0, 1.0, 5.0, 11.0, 15.0, 16.0];
        let atoms = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let mut hand: f64 = 0.0;
        for (k, &x) in atoms.iter().enumerate() {
            let phi = std_normal_cdf(x);
            hand = hand
                .max((cum[k] / 16.0 - phi).abs())
                .max((cum[k + 1] / 16.0 - phi).abs());
        }
        assert!((exact_dk_binomial(4) - hand).abs() < 1e-14);
        for n in [1000u64, 4000] {
            let ratio = exact_dk_binomial(4 * n) / exact_dk_binomial(n);
            assert!((ratio - 0.5).abs() < 0.025, "{ratio}");
        }
    }
}
