use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// `C max(1, (M / D)^3) N^{-1/2} ln^2(N + 1)`.
pub fn theoretical_bound(n: u64, m: f64, d_hat: f64, c_free: f64) -> Result<f64> {
    if !(d_hat > 0.0) {
        return Err(Error::DegenerateVariance {
            n,
            estimate: d_hat * d_hat,
            stderr: 0.0,
        });
    }
    let rho = m / d_hat;
    let nf = n as f64;
    Ok(c_free * rho.powi(3).max(1.0) * nf.powf(-0.5) * (nf + 1.0).ln().powi(2))
}

/// `d_K N^{1/2} / ln^2(N + 1)`.
pub fn implied_constant(n: u64, d_k: f64) -> f64 {
    let nf = n as f64;
    d_k * nf.sqrt() / (nf + 1.0).ln().powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% interval for the slope.
    pub slope_ci: (f64, f64),
    pub implied_c: Vec<f64>,
}

/// Weighted least squares of `ln d` on `ln N` over `(N, d, stderr)` rows.
///
/// Weights are `(d / stderr)^2`, the inverse delta-method variance of
/// `ln d`; rows with zero stderr make the fit unweighted.
pub fn fit_rate(rows: &[(u64, f64, f64)]) -> Result<RateFit> {
    if rows.len() < 4 {
        return Err(Error::invalid(format!(
            "a rate fit needs at least 4 grid points, got {}",
            rows.len()
        )));
    }
    for &(n, d, se) in rows {
        if below_noise_floor(d, se) {
            return Err(Error::NoiseFloor {
                n,
                estimate: d,
                stderr: se,
            });
        }
    }
    fit_log_log(rows)
}

fn below_noise_floor(d: f64, se: f64) -> bool {
    !(d > 0.0) || d < 3.0 * se
}

fn fit_log_log(rows: &[(u64, f64, f64)]) -> Result<RateFit> {
    if rows.iter().any(|r| !(r.1 > 0.0)) {
        return Err(Error::invalid("log-log fit needs positive values"));
    }
    let exact = rows.iter().any(|r| r.2 == 0.0);
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|&(n, d, se)| {
            let w = if exact { 1.0 } else { (d / se).powi(2) };
            ((n as f64).ln(), d.ln(), w)
        })
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (pts.len() - 2) as f64;
    let rss: f64 = pts.iter().map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2)).sum();
    let se_slope = (rss / dof / sxx).sqrt();
    let tq = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::invalid(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(RateFit {
        slope,
        intercept,
        slope_ci: (slope - tq * se_slope, slope + tq * se_slope),
        implied_c: rows.iter().map(|&(n, d, _)| implied_constant(n, d)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "dK_hat")]
    pub dk_hat: f64,
    pub stderr: f64,
    #[serde(rename = "implied_C")]
    pub implied_c: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
    /// `rho = M / D_hat`.
    pub rho: f64,
    pub d2_hat: f64,
    pub bound_constant: f64,
    /// Grid points whose estimate is below `3 x stderr`; the slope is then
    /// only indicative and more replications are needed.
    pub noise_floor: Vec<u64>,
}

impl RateReport {
    /// `max / min` of the implied constants over the last `k` rows.
    pub fn implied_c_spread(&self, k: usize) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(k)..];
        let max = tail.iter().map(|r| r.implied_c).fold(f64::MIN, f64::max);
        let min = tail.iter().map(|r| r.implied_c).fold(f64::MAX, f64::min);
        max / min
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "N,T,dK_hat,stderr,implied_C,bound")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.n, r.t, r.dk_hat, r.stderr, r.implied_c, r.bound
            )?;
        }
        Ok(())
    }
}

/// Assemble a report from `(N, T, d_K, stderr)` rows. Unlike [`fit_rate`],
/// rows below the noise floor are fitted anyway and listed in the report.
pub fn rate_report(rows: &[(u64, usize, f64, f64)], m: f64, d2_hat: f64, bound_constant: f64) -> Result<RateReport> {
    if rows.len() < 4 {
        return Err(Error::invalid(format!(
            "a rate fit needs at least 4 grid points, got {}",
            rows.len()
        )));
    }
    let d_hat = d2_hat.max(0.0).sqrt();
    let fit = fit_log_log(&rows.iter().map(|r| (r.0, r.2, r.3)).collect::<Vec<_>>())?;
    let noise_floor = rows
        .iter()
        .filter(|r| below_noise_floor(r.2, r.3))
        .map(|r| r.0)
        .collect();
    let rows = rows
        .iter()
        .zip(&fit.implied_c)
        .map(|(&(n, t, d, se), &c)| {
            Ok(RateRow {
                n,
                t,
                dk_hat: d,
                stderr: se,
                implied_c: c,
                bound: theoretical_bound(n, m, d_hat, bound_constant)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport {
        rows,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_ci: fit.slope_ci,
        rho: m / d_hat,
        d2_hat,
        bound_constant,
        noise_floor,
    })
}
