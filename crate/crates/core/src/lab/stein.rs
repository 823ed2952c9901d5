use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_and_stderr, sample_sums, variance_from_sums, Summand, MIN_CALIBRATION};
use crate::error::{Error, Result};
use crate::index_family::IndexFamily;
use crate::neighborhoods::NeighborhoodIndex;
use crate::observables::Observable;
use crate::processes::ProcessSpec;
use crate::rng::{rng_from_seed, split, stream};

pub const MIN_STEIN_REPLICATIONS: usize = 1000;

/// Per-replication statistics of a scaled summand array `X_1..X_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteinStatistics {
    /// `sum_n X_n sum_{m in A_n} X_m`.
    pub q: f64,
    /// `sum_n X_n (sum_{m in A_n} X_m)^2`.
    pub v: f64,
    /// `W = sum_n X_n`.
    pub w: f64,
    pub max_abs: f64,
}

pub fn stein_statistics(x: &[f64], index: &NeighborhoodIndex, prefix: &mut Vec<f64>) -> SteinStatistics {
    debug_assert_eq!(x.len() as u64, index.horizon());
    prefix.clear();
    prefix.push(0.0);
    let mut acc = 0.0;
    let mut max_abs: f64 = 0.0;
    for &v in x {
        acc += v;
        prefix.push(acc);
        max_abs = max_abs.max(v.abs());
    }
    let (mut q, mut v) = (0.0, 0.0);
    for (k, &xn) in x.iter().enumerate() {
        let local = index.sum_over(k as u64 + 1, prefix);
        q += xn * local;
        v += xn * local * local;
    }
    SteinStatistics { q, v, w: acc, max_abs }
}

/// Inputs of the theoretical bound `R_2 <= C_0' N^{1/2} D^{-1} d^{1/2} c^{l/4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct R2Bound {
    pub c0_prime: f64,
    pub phi_d: f64,
    pub phi_c: f64,
    pub d: f64,
}

impl R2Bound {
    pub fn value(&self, horizon: u64, l: u64) -> f64 {
        self.c0_prime * (horizon as f64).sqrt() / self.d * self.phi_d.sqrt() * self.phi_c.powf(l as f64 / 4.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteinTerms {
    pub n: u64,
    pub t: usize,
    pub l: u64,
    /// `4 || sum_n sum_{m in A_n} (X_n X_m - E X_n X_m) ||_2`.
    pub r1: f64,
    pub r1_stderr: f64,
    /// `2 || sum_n X_n (sum_{m in A_n} X_m)^2 ||_2 (||W||_2 + 5)`.
    pub r3: f64,
    pub r3_stderr: f64,
    /// `K_1 l R + 2 K_1^2 l^2 N R^3` with `R = max |X_n|`.
    pub small_terms: f64,
    pub r_max: f64,
    pub w_l2: f64,
    /// Theoretical bound on `R_2`, when its constant was supplied.
    pub r2_bound: Option<f64>,
}

impl SteinTerms {
    /// `R_1 + R_3 + small terms (+ R_2 bound)`.
    pub fn total(&self) -> f64 {
        self.r1 + self.r3 + self.small_terms + self.r2_bound.unwrap_or(0.0)
    }
}

/// Root of a mean of non-negative samples with a delta-method standard error.
fn root_mean(values: &[f64]) -> (f64, f64) {
    let (m, se) = mean_and_stderr(values);
    let r = m.max(0.0).sqrt();
    let se = if r > 0.0 { se / (2.0 * r) } else { 0.0 };
    (r, se)
}

fn assemble(
    stats: &[SteinStatistics],
    moments: Option<&[SteinStatistics]>,
    index: &NeighborhoodIndex,
    r2: Option<R2Bound>,
) -> SteinTerms {
    let t = stats.len();
    let q: Vec<f64> = stats.iter().map(|s| s.q).collect();
    let eq = match moments {
        Some(m) => m.iter().map(|s| s.q).sum::<f64>() / m.len() as f64,
        None => q.iter().sum::<f64>() / t as f64,
    };
    let correction = if moments.is_none() {
        t as f64 / (t as f64 - 1.0)
    } else {
        1.0
    };
    let dev: Vec<f64> = q.iter().map(|v| (v - eq).powi(2) * correction).collect();
    let (sd_q, sd_q_se) = root_mean(&dev);
    let v2: Vec<f64> = stats.iter().map(|s| s.v * s.v).collect();
    let (v_l2, v_l2_se) = root_mean(&v2);
    let w2: Vec<f64> = stats.iter().map(|s| s.w * s.w).collect();
    let (w_l2, _) = root_mean(&w2);
    let r_max = stats.iter().map(|s| s.max_abs).fold(0.0, f64::max);
    let k1 = index.k1() as f64;
    let l = index.block_length();
    let lf = l as f64;
    let n = index.horizon();
    SteinTerms {
        n,
        t,
        l,
        r1: 4.0 * sd_q,
        r1_stderr: 4.0 * sd_q_se,
        r3: 2.0 * v_l2 * (w_l2 + 5.0),
        r3_stderr: 2.0 * v_l2_se * (w_l2 + 5.0),
        small_terms: k1 * lf * r_max + 2.0 * k1 * k1 * lf * lf * n as f64 * r_max.powi(3),
        r_max,
        w_l2,
        r2_bound: r2.map(|b| b.value(n, l)),
    }
}

/// Stein terms from explicit per-replication arrays of scaled summands.
pub fn stein_terms(arrays: &[Vec<f64>], index: &NeighborhoodIndex, r2: Option<R2Bound>) -> Result<SteinTerms> {
    if arrays.len() < MIN_STEIN_REPLICATIONS {
        return Err(Error::InsufficientReplications {
            required: MIN_STEIN_REPLICATIONS,
            got: arrays.len(),
        });
    }
    if let Some(bad) = arrays.iter().position(|a| a.len() as u64 != index.horizon()) {
        return Err(Error::invalid(format!(
            "replication {bad} has {} summands, expected {}",
            arrays[bad].len(),
            index.horizon()
        )));
    }
    let stats: Vec<SteinStatistics> = arrays
        .par_iter()
        .map_init(Vec::new, |prefix, x| stein_statistics(x, index, prefix))
        .collect();
    Ok(assemble(&stats, None, index, r2))
}

/// `l = ceil(4 A ln(N + 1))` with `A = max(1, 2 / |ln c|)` nudged up so that
/// `A |ln c| > 2` holds strictly.
pub fn block_length(horizon: u64, phi_c: f64) -> u64 {
    let rate = phi_c.ln().abs();
    let a = if rate.is_finite() && rate > 0.0 {
        (2.0 / rate * (1.0 + 1e-6)).max(1.0)
    } else {
        1.0
    };
    (4.0 * a * (horizon as f64 + 1.0).ln()).ceil() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteinOptions {
    pub t: usize,
    pub t_cal: usize,
    /// Block length; `None` uses [`block_length`] with the process's phi rate.
    pub l: Option<u64>,
    /// Estimate `E X_n X_m` on a second, independent batch.
    pub independent_moments: bool,
    /// Constant `C_0'` of the `R_2` bound.
    pub c0_prime: Option<f64>,
}

/// Stein terms at one horizon. The summands are scaled by `s_N_hat` from a
/// calibration batch; replications use their own seed stream.
pub fn estimate_stein_terms(
    spec: &ProcessSpec,
    f: &Observable,
    family: &IndexFamily,
    horizon: u64,
    options: SteinOptions,
    master_seed: u64,
) -> Result<SteinTerms> {
    if options.t < MIN_STEIN_REPLICATIONS {
        return Err(Error::InsufficientReplications {
            required: MIN_STEIN_REPLICATIONS,
            got: options.t,
        });
    }
    if options.t_cal < MIN_CALIBRATION {
        return Err(Error::InsufficientReplications {
            required: MIN_CALIBRATION,
            got: options.t_cal,
        });
    }
    let summand = Summand::new(spec, f, family)?;
    let phi = spec.phi_bound()?;
    let l = options.l.unwrap_or_else(|| block_length(horizon, phi.c));
    let index = NeighborhoodIndex::build(horizon, l, family)?;
    let cal = sample_sums(spec, &summand, horizon, options.t_cal, master_seed, stream::CALIBRATION);
    let s_n = variance_from_sums(horizon, &cal)?.s_n();
    let len = summand.path_length(horizon);
    let run = |tag: u64| -> Vec<SteinStatistics> {
        (0..options.t)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new(), Vec::new()),
                |(path, x, prefix), i| {
                    let mut rng = rng_from_seed(split(master_seed, &[tag, horizon, i as u64]));
                    spec.fill_path(&mut rng, len, path);
                    summand.fill_summands(path, horizon, x);
                    for v in x.iter_mut() {
                        *v /= s_n;
                    }
                    stein_statistics(x, &index, prefix)
                },
            )
            .collect()
    };
    let stats = run(stream::STEIN);
    let moments = options.independent_moments.then(|| run(stream::MOMENTS));
    let r2 = options.c0_prime.map(|c0_prime| R2Bound {
        c0_prime,
        phi_d: phi.d,
        phi_c: phi.c,
        d: s_n / (horizon as f64).sqrt(),
    });
    Ok(assemble(&stats, moments.as_deref(), &index, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn zero_arrays_give_zero_terms() {
        let fam = IndexFamily::linear(1).unwrap();
        let index = NeighborhoodIndex::build(20, 2, &fam).unwrap();
        let arrays = vec![vec![0.0; 20]; 1000];
        let s = stein_terms(&arrays, &index, None).unwrap();
        assert_eq!((s.r1, s.r3, s.small_terms), (0.0, 0.0, 0.0));
    }

    #[test]
    fn too_few_replications() {
        let fam = IndexFamily::linear(1).unwrap();
        let index = NeighborhoodIndex::build(5, 1, &fam).unwrap();
        assert!(matches!(
            stein_terms(&vec![vec![0.0; 5]; 10], &index, None),
            Err(Error::InsufficientReplications {
                required: 1000,
                got: 10
            })
        ));
    }

    #[test]
    fn statistics_match_explicit_double_sums() {
        let fam = IndexFamily::linear(2).unwrap();
        let index = NeighborhoodIndex::build(30, 2, &fam).unwrap();
        let mut rng = rng_from_seed(3);
        let x: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = stein_statistics(&x, &index, &mut Vec::new());
        let (mut q, mut v) = (0.0, 0.0);
        for n in 1..=30u64 {
            let local: f64 = (1..=30u64)
                .filter(|&m| index.contains(n, m))
                .map(|m| x[m as usize - 1])
                .sum();
            q += x[n as usize - 1] * local;
            v += x[n as usize - 1] * local * local;
        }
        assert!((s.q - q).abs() < 1e-12 && (s.v - v).abs() < 1e-12);
    }

    #[test]
    fn iid_r1_matches_fourth_moment_formula() {
        // With A_n = {n}: Q = sum X_n^2. For X_n = eps_n u_n / sqrt(N) with
        // eps Rademacher and u uniform on [0, 2]: Var Q = N Var(u^2) / N^2.
        let n = 400usize;
        let fam = IndexFamily::linear(1).unwrap();
        let index = NeighborhoodIndex::build(n as u64, 0, &fam).unwrap();
        let mut rng = rng_from_seed(17);
        let scale = (n as f64).sqrt();
        let arrays: Vec<Vec<f64>> = (0..4000)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        let u: f64 = rng.gen_range(0.0..2.0);
                        if rng.gen_bool(0.5) {
                            u / scale
                        } else {
                            -u / scale
                        }
                    })
                    .collect()
            })
            .collect();
        let s = stein_terms(&arrays, &index, None).unwrap();
        // E u^4 = 16/5, (E u^2)^2 = 16/9.
        let expected = 4.0 * ((16.0 / 5.0 - 16.0 / 9.0) / n as f64).sqrt();
        assert!(
            (s.r1 - expected).abs() < 4.0 * s.r1_stderr,
            "{} vs {expected} ({})",
            s.r1,
            s.r1_stderr
        );
    }

    #[test]
    fn block_length_formula() {
        // c = 1/2: A = 2 / ln 2 (+), l = ceil(4 A ln(N + 1)).
        let l = block_length(1000, 0.5);
        assert_eq!(l, (8.0 / 2f64.ln() * 1001f64.ln() * (1.0 + 1e-6)).ceil() as u64);
        assert_eq!(block_length(1000, 0.01), (4.0 * 1001f64.ln()).ceil() as u64);
    }
}
