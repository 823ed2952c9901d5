//! Monte Carlo experiment engine.
//!
//! Replication `i` of an experiment at horizon `N` draws its path from the
//! stream `split(master_seed, [tag, N, i])`. Per-replication scalars are
//! collected in index order and reduced sequentially, so every estimate is a
//! function of the seed alone.

mod kolmogorov;
mod rate;
mod stein;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index_family::IndexFamily;
use crate::observables::{Observable, StateTable, TABLE_LIMIT};
use crate::processes::{PathSample, ProcessSpec};
use crate::rng::{rng_from_seed, split, stream};

pub use kolmogorov::{
    dkw_term, exact_dk_binomial, kolmogorov_distance, kolmogorov_distance_to_law, kolmogorov_to_normal, DkEstimate,
    DKW_ALPHA,
};
pub use rate::{fit_rate, implied_constant, rate_report, theoretical_bound, RateFit, RateReport, RateRow};
pub use stein::{
    block_length, estimate_stein_terms, stein_statistics, stein_terms, R2Bound, SteinOptions, SteinStatistics,
    SteinTerms, MIN_STEIN_REPLICATIONS,
};

/// Minimum calibration batch for variance estimates.
pub const MIN_CALIBRATION: usize = 100;

/// Fast evaluation of `F(xi_{q_1(n)}, ..., xi_{q_l(n)})` along paths.
#[derive(Debug, Clone)]
pub struct Summand {
    f: Observable,
    table: Option<StateTable>,
    embedding: Vec<Vec<f64>>,
    family: IndexFamily,
}

impl Summand {
    pub fn new(spec: &ProcessSpec, f: &Observable, family: &IndexFamily) -> Result<Self> {
        if f.arity() != family.ell() {
            return Err(Error::invalid(format!(
                "observable has {} arguments but the index family has {} maps",
                f.arity(),
                family.ell()
            )));
        }
        let tuples = (spec.alphabet_size() as f64).powi(f.arity() as i32);
        let table = if tuples <= TABLE_LIMIT as f64 {
            Some(f.tabulate(spec)?)
        } else {
            None
        };
        Ok(Self {
            f: f.clone(),
            table,
            embedding: spec.embedding().to_vec(),
            family: family.clone(),
        })
    }

    pub fn family(&self) -> &IndexFamily {
        &self.family
    }

    pub fn observable(&self) -> &Observable {
        &self.f
    }

    /// Path length needed for horizon `n`.
    pub fn path_length(&self, n: u64) -> usize {
        self.family.max_index(n) as usize
    }

    /// The `n`-th summand; `values[t]` holds `xi_{t+1}`.
    #[inline]
    pub fn value(&self, values: &[u32], n: u64, tuple: &mut [u32]) -> f64 {
        for (i, slot) in tuple.iter_mut().enumerate() {
            *slot = values[(self.family.apply(i, n) - 1) as usize];
        }
        match &self.table {
            Some(t) => t.eval(tuple),
            None => self.f.eval_states(tuple, &self.embedding),
        }
    }

    /// `S_N` on raw path values.
    pub fn sum(&self, values: &[u32], horizon: u64) -> f64 {
        let mut tuple = vec![0u32; self.family.ell()];
        (1..=horizon).map(|n| self.value(values, n, &mut tuple)).sum()
    }

    /// Summands `X_1, ..., X_N` into `out`.
    pub fn fill_summands(&self, values: &[u32], horizon: u64, out: &mut Vec<f64>) {
        let mut tuple = vec![0u32; self.family.ell()];
        out.clear();
        out.extend((1..=horizon).map(|n| self.value(values, n, &mut tuple)));
    }
}

fn check_cover(path: &PathSample, family: &IndexFamily, horizon: u64) -> Result<()> {
    let needed = family.max_index(horizon);
    if (path.len() as u64) < needed {
        return Err(Error::PathTooShort {
            len: path.len(),
            needed,
        });
    }
    Ok(())
}

/// `S_N = sum_{n <= N} F(xi_{q_1(n)}, ..., xi_{q_l(n)})` on one path.
pub fn nonconventional_sum(
    path: &PathSample,
    spec: &ProcessSpec,
    f: &Observable,
    family: &IndexFamily,
    horizon: u64,
) -> Result<f64> {
    check_cover(path, family, horizon)?;
    Ok(Summand::new(spec, f, family)?.sum(&path.values, horizon))
}

/// `N(n) = #{m <= n : xi_{q_j(m)} in A_j for all j}`.
pub fn count_return_tuples(path: &PathSample, sets: &[Vec<u32>], family: &IndexFamily, n: u64) -> Result<u64> {
    if sets.len() != family.ell() {
        return Err(Error::invalid(format!(
            "{} return sets for an index family with {} maps",
            sets.len(),
            family.ell()
        )));
    }
    check_cover(path, family, n)?;
    let max_state = path.values.iter().copied().max().unwrap_or(0) as usize;
    let width = sets
        .iter()
        .flat_map(|s| s.iter().map(|&x| x as usize + 1))
        .max()
        .unwrap_or(0)
        .max(max_state + 1);
    let member: Vec<Vec<bool>> = sets
        .iter()
        .map(|s| {
            let mut m = vec![false; width];
            for &x in s {
                m[x as usize] = true;
            }
            m
        })
        .collect();
    Ok((1..=n)
        .filter(|&m| {
            member
                .iter()
                .enumerate()
                .all(|(j, mem)| mem[path.at(family.apply(j, m)) as usize])
        })
        .count() as u64)
}

/// Per-replication `S_N` for `t` paths from stream `tag`.
pub fn sample_sums(
    spec: &ProcessSpec,
    summand: &Summand,
    horizon: u64,
    t: usize,
    master_seed: u64,
    tag: u64,
) -> Vec<f64> {
    let len = summand.path_length(horizon);
    (0..t)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let mut rng = rng_from_seed(split(master_seed, &[tag, horizon, i as u64]));
            spec.fill_path(&mut rng, len, buf);
            summand.sum(buf, horizon)
        })
        .collect()
}

/// Sample mean and its standard error, accumulated in index order.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub n: u64,
    /// Raw second moment `mean S_N^2`.
    pub s2: f64,
    pub stderr: f64,
}

impl VarianceEstimate {
    pub fn s_n(&self) -> f64 {
        self.s2.sqrt()
    }
}

fn variance_from_sums(horizon: u64, sums: &[f64]) -> Result<VarianceEstimate> {
    let squares: Vec<f64> = sums.iter().map(|s| s * s).collect();
    let (s2, stderr) = mean_and_stderr(&squares);
    if !(s2 > 3.0 * stderr) {
        return Err(Error::DegenerateVariance {
            n: horizon,
            estimate: s2,
            stderr,
        });
    }
    Ok(VarianceEstimate { n: horizon, s2, stderr })
}

/// `s_N^2 = E S_N^2` from `t_cal` paths on the calibration stream.
pub fn estimate_variance(
    spec: &ProcessSpec,
    f: &Observable,
    family: &IndexFamily,
    horizon: u64,
    t_cal: usize,
    seed: u64,
) -> Result<VarianceEstimate> {
    if t_cal < MIN_CALIBRATION {
        return Err(Error::InsufficientReplications {
            required: MIN_CALIBRATION,
            got: t_cal,
        });
    }
    let summand = Summand::new(spec, f, family)?;
    let sums = sample_sums(spec, &summand, horizon, t_cal, seed, stream::CALIBRATION);
    variance_from_sums(horizon, &sums)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceRow {
    pub n: u64,
    pub t_cal: usize,
    /// `N^{-1} s_N^2`.
    pub scaled: f64,
    pub scaled_stderr: f64,
    /// `|N^{-1} s_N^2 - D^2_hat|`.
    pub deviation: f64,
    pub deviation_stderr: f64,
    /// `c_hat N^{-1/2} + 3 stderr`.
    pub envelope: f64,
}

/// `D^2_hat` with the per-`N` deviations and the fitted `c N^{-1/2}` envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct D2Estimate {
    pub d2: f64,
    pub d2_stderr: f64,
    pub envelope_c: f64,
    pub rows: Vec<VarianceRow>,
}

impl D2Estimate {
    /// Every deviation lies below `c_hat N^{-1/2} + 3 stderr`.
    pub fn envelope_holds(&self) -> bool {
        self.rows.iter().all(|r| r.deviation <= r.envelope)
    }
}

/// Estimate `D^2 = lim N^{-1} E S_N^2` on an increasing grid.
///
/// `D^2_hat` is the scaled second moment at the largest `N`. The envelope
/// constant is the weighted least-squares slope, through the origin, of the
/// deviations against `N^{-1/2}` (the top point, whose deviation is zero by
/// construction, is excluded).
pub fn estimate_d2(
    spec: &ProcessSpec,
    f: &Observable,
    family: &IndexFamily,
    grid: &[u64],
    t_cal: usize,
    seed: u64,
) -> Result<D2Estimate> {
    if grid.len() < 3 {
        return Err(Error::invalid("the N grid needs at least 3 points"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("the N grid must be strictly increasing"));
    }
    let estimates = grid
        .iter()
        .map(|&n| estimate_variance(spec, f, family, n, t_cal, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(d2_from_estimates(&estimates, t_cal))
}

pub(crate) fn d2_from_estimates(estimates: &[VarianceEstimate], t_cal: usize) -> D2Estimate {
    let top = estimates.last().unwrap();
    let d2 = top.s2 / top.n as f64;
    let d2_stderr = top.stderr / top.n as f64;
    let mut rows: Vec<VarianceRow> = estimates
        .iter()
        .map(|e| {
            let n = e.n as f64;
            let scaled = e.s2 / n;
            let scaled_stderr = e.stderr / n;
            let deviation_stderr = if e.n == top.n {
                0.0
            } else {
                (scaled_stderr.powi(2) + d2_stderr.powi(2)).sqrt()
            };
            VarianceRow {
                n: e.n,
                t_cal,
                scaled,
                scaled_stderr,
                deviation: (scaled - d2).abs(),
                deviation_stderr,
                envelope: 0.0,
            }
        })
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for r in rows.iter().filter(|r| r.deviation_stderr > 0.0) {
        let x = (r.n as f64).powf(-0.5);
        let w = r.deviation_stderr.powi(-2);
        num += w * x * r.deviation;
        den += w * x * x;
    }
    let envelope_c = if den > 0.0 { num / den } else { 0.0 };
    for r in rows.iter_mut() {
        r.envelope = envelope_c * (r.n as f64).powf(-0.5) + 3.0 * r.deviation_stderr;
    }
    D2Estimate {
        d2,
        d2_stderr,
        envelope_c,
        rows,
    }
}

/// How `S_N` is scaled into `Z_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by `s_N_hat` from an independent calibration batch.
    #[default]
    SelfNormalized,
    /// Divide by `sqrt(N) D` for a given `D`.
    Fixed { d: f64 },
}

/// Replicated normalized sums at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialBatch {
    pub n: u64,
    pub t: usize,
    pub values_sn: Vec<f64>,
    /// Scale applied to every `S_N`.
    pub s_n_hat: f64,
    pub z_samples: Vec<f64>,
    pub master_seed: u64,
}

/// `T` replications of `Z_N = S_N / s_N_hat`; the calibration batch uses a
/// disjoint seed stream.
#[allow(clippy::too_many_arguments)]
pub fn replicate_z(
    spec: &ProcessSpec,
    f: &Observable,
    family: &IndexFamily,
    horizon: u64,
    t: usize,
    t_cal: usize,
    normalization: Normalization,
    master_seed: u64,
) -> Result<TrialBatch> {
    if t == 0 {
        return Err(Error::EmptySample);
    }
    let summand = Summand::new(spec, f, family)?;
    let s_n_hat = match normalization {
        Normalization::SelfNormalized => {
            if t_cal < MIN_CALIBRATION {
                return Err(Error::InsufficientReplications {
                    required: MIN_CALIBRATION,
                    got: t_cal,
                });
            }
            let cal = sample_sums(spec, &summand, horizon, t_cal, master_seed, stream::CALIBRATION);
            variance_from_sums(horizon, &cal)?.s_n()
        }
        Normalization::Fixed { d } => {
            if !(d > 0.0) {
                return Err(Error::DegenerateVariance {
                    n: horizon,
                    estimate: d * d,
                    stderr: 0.0,
                });
            }
            d * (horizon as f64).sqrt()
        }
    };
    let values_sn = sample_sums(spec, &summand, horizon, t, master_seed, stream::EVALUATION);
    let z_samples = values_sn.iter().map(|s| s / s_n_hat).collect();
    Ok(TrialBatch {
        n: horizon,
        t,
        values_sn,
        s_n_hat,
        z_samples,
        master_seed,
    })
}

/// Asymptotic variance `Var f + 2 sum_k Cov(f(X_0), f(X_k))` of an ergodic
/// finite chain, from the fundamental matrix `(I - P + 1 pi)^{-1}`.
pub fn markov_clt_variance(spec: &ProcessSpec, f: &[f64]) -> Result<f64> {
    let a = spec.alphabet_size();
    if f.len() != a {
        return Err(Error::invalid("one value per state is required"));
    }
    let pi = spec.marginal();
    let p = spec.transition();
    let mean: f64 = pi.iter().zip(f).map(|(p, v)| p * v).sum();
    let centered: Vec<f64> = f.iter().map(|v| v - mean).collect();
    let m = DMatrix::from_fn(a, a, |i, j| f64::from(i == j) - p[(i, j)] + pi[j]);
    let z = m
        .lu()
        .solve(&nalgebra::DVector::from_column_slice(&centered))
        .ok_or_else(|| Error::invalid("fundamental matrix is singular"))?;
    let inner = |u: &[f64]| -> f64 { (0..a).map(|i| pi[i] * centered[i] * u[i]).sum() };
    Ok(2.0 * inner(z.as_slice()) - inner(&centered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::center;

    fn rademacher() -> ProcessSpec {
        ProcessSpec::iid(vec![0.5, 0.5], vec![vec![-1.0], vec![1.0]]).unwrap()
    }

    fn identity(bound: f64) -> Observable {
        Observable::from_fn(1, 1, bound, 1.0, |x| x[0]).unwrap()
    }

    #[test]
    fn zero_observable_sums_to_zero() {
        let spec = rademacher();
        let zero = Observable::table(2, 1, vec![0.0, 0.0]).unwrap();
        let fam = IndexFamily::linear(1).unwrap();
        let path = spec.sample_path(10, 1).unwrap();
        assert_eq!(nonconventional_sum(&path, &spec, &zero, &fam, 10).unwrap(), 0.0);
        assert!(matches!(
            estimate_variance(&spec, &zero, &fam, 10, 200, 1),
            Err(Error::DegenerateVariance { .. })
        ));
    }

    #[test]
    fn constant_path_of_ones_sums_to_n() {
        let spec = ProcessSpec::iid(vec![0.0, 1.0], vec![vec![-1.0], vec![1.0]]).unwrap();
        let fam = IndexFamily::linear(1).unwrap();
        let path = spec.sample_path(25, 3).unwrap();
        assert_eq!(
            nonconventional_sum(&path, &spec, &identity(1.0), &fam, 25).unwrap(),
            25.0
        );
    }

    #[test]
    fn explicit_two_map_sum() {
        // F(a, b) = table[2a + b] on path xi_1..xi_6 = 0 1 1 0 1 1:
        // F(xi_1, xi_2) + F(xi_2, xi_4) + F(xi_3, xi_6) = F(0,1) + F(1,0) + F(1,1).
        let spec = rademacher();
        let f = Observable::table(2, 2, vec![0.5, 2.0, -1.0, 3.0]).unwrap();
        let fam = IndexFamily::linear(2).unwrap();
        let path = PathSample {
            values: vec![0, 1, 1, 0, 1, 1],
            seed_tag: 0,
        };
        assert_eq!(nonconventional_sum(&path, &spec, &f, &fam, 3).unwrap(), 2.0 - 1.0 + 3.0);
        assert!(matches!(
            nonconventional_sum(&path, &spec, &f, &fam, 4),
            Err(Error::PathTooShort { len: 6, needed: 8 })
        ));
    }

    #[test]
    fn return_counts_match_indicator_sum() {
        let path = PathSample {
            values: vec![1, 0, 1, 0, 1, 1, 0, 0, 1, 0, 1, 0],
            seed_tag: 0,
        };
        let fam = IndexFamily::linear(2).unwrap();
        // m = 1..6: (xi_m, xi_2m) in {1} x {0}: m=1 (1,0), m=3 (1,1) no, m=5 (1,0), m=6 (1,0)
        assert_eq!(count_return_tuples(&path, &[vec![1], vec![0]], &fam, 6).unwrap(), 3);
        assert_eq!(
            count_return_tuples(&path, &[vec![0, 1], vec![0, 1]], &fam, 6).unwrap(),
            6
        );
        assert_eq!(count_return_tuples(&path, &[vec![], vec![0]], &fam, 6).unwrap(), 0);
        let spec = rademacher();
        let f = crate::observables::make_return_time_observable(2, &[vec![1], vec![0]]).unwrap();
        assert_eq!(nonconventional_sum(&path, &spec, &f, &fam, 6).unwrap(), 3.0);
    }

    #[test]
    fn rademacher_variance_is_n() {
        let spec = rademacher();
        let fam = IndexFamily::linear(1).unwrap();
        let v = estimate_variance(&spec, &identity(1.0), &fam, 50, 20_000, 9).unwrap();
        assert!((v.s2 - 50.0).abs() < 3.0 * v.stderr, "{v:?}");
    }

    #[test]
    fn replication_is_deterministic() {
        let spec = rademacher();
        let fam = IndexFamily::linear(1).unwrap();
        let a = replicate_z(
            &spec,
            &identity(1.0),
            &fam,
            30,
            1,
            200,
            Normalization::SelfNormalized,
            5,
        )
        .unwrap();
        let b = replicate_z(
            &spec,
            &identity(1.0),
            &fam,
            30,
            1,
            200,
            Normalization::SelfNormalized,
            5,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normalized_batch_has_unit_variance() {
        let spec =
            ProcessSpec::doeblin_chain(&[vec![0.75, 0.25], vec![0.25, 0.75]], vec![vec![0.0], vec![1.0]]).unwrap();
        let f = center(&Observable::table(2, 2, vec![0.0, 0.0, 0.0, 1.0]).unwrap(), &spec).unwrap();
        let fam = IndexFamily::linear(2).unwrap();
        let t = 4000;
        let batch = replicate_z(&spec, &f, &fam, 64, t, t, Normalization::SelfNormalized, 11).unwrap();
        let (mean, _) = mean_and_stderr(&batch.z_samples);
        assert!(mean.abs() < 3.0 / (t as f64).sqrt() * 1.5);
        let sq: Vec<f64> = batch.z_samples.iter().map(|z| z * z).collect();
        let (m2, se) = mean_and_stderr(&sq);
        assert!((m2 - 1.0).abs() < 5.0 * se * 2f64.sqrt(), "{m2} {se}");
        for (z, s) in batch.z_samples.iter().zip(&batch.values_sn) {
            assert_eq!(*z, s / batch.s_n_hat);
        }
    }

    #[test]
    fn markov_variance_closed_form() {
        // p = q = 1/4, f = +-1: lambda = 1/2, sigma^2 = (1 + lambda) / (1 - lambda).
        let spec =
            ProcessSpec::doeblin_chain(&[vec![0.75, 0.25], vec![0.25, 0.75]], vec![vec![-1.0], vec![1.0]]).unwrap();
        let v = markov_clt_variance(&spec, &[-1.0, 1.0]).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        let iid = rademacher();
        assert!((markov_clt_variance(&iid, &[-1.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_fit_on_synthetic_estimates() {
        let est: Vec<VarianceEstimate> = [64u64, 128, 256, 512]
            .iter()
            .map(|&n| {
                let nf = n as f64;
                VarianceEstimate {
                    n,
                    s2: nf * (2.0 + 1.0 / nf.sqrt()),
                    stderr: 0.01 * nf,
                }
            })
            .collect();
        let d = d2_from_estimates(&est, 1000);
        assert!((d.d2 - (2.0 + 1.0 / 512f64.sqrt())).abs() < 1e-12);
        assert!(d.envelope_c > 0.0);
        assert!(d.envelope_holds());
    }
}
