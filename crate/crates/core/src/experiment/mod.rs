//! Config-driven experiments with CSV and JSON reports.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{
    ExperimentConfig, IndexFamilyDecl, Mode, ObservableDecl, Options, ProcessDecl, Replications, Resolved,
};

use crate::decoupling::{run_inequality_checks, InequalityReport};
use crate::error::{Error, Result};
use crate::lab::{
    block_length, d2_from_estimates, estimate_stein_terms, estimate_variance, fit_rate, kolmogorov_to_normal,
    mean_and_stderr, rate_report, replicate_z, D2Estimate, DkEstimate, Normalization, RateFit, RateReport,
    SteinOptions, SteinTerms, TrialBatch,
};
use crate::neighborhoods::NeighborhoodIndex;
use crate::observables::centering_constant;

pub const FORMAT_VERSION: &str = "nclab-report/1";

/// Outcome of a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// A checked property failed (exit code 2).
    PropertyViolation,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Process exit code: 0 on success, 2 on a property violation, 1 on any error.
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(RunOutcome {
            status: Status::Success,
            ..
        }) => 0,
        Ok(_) => 2,
        Err(_) => 1,
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    format_version: &'static str,
    mode: &'static str,
    config: &'a ExperimentConfig,
    results: T,
}

fn write_report<T: Serialize>(dir: &Path, name: &str, config: &ExperimentConfig, results: T) -> Result<PathBuf> {
    let path = dir.join(name);
    let report = Report {
        format_version: FORMAT_VERSION,
        mode: config.mode.name(),
        config,
        results,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn write_csv(dir: &Path, name: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut buf = Vec::new();
    body(&mut buf)?;
    fs::write(&path, buf)?;
    Ok(path)
}

fn at_n<T>(n: u64, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::at(format!("N = {n}"), e))
}

/// Run the experiment described by `config`, writing reports under
/// `config.output`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let dir = PathBuf::from(&config.output);
    fs::create_dir_all(&dir)?;
    match config.mode {
        Mode::Inequalities => run_inequalities(config, &dir),
        Mode::Rate => run_rate(config, &dir),
        Mode::Variance => run_variance(config, &dir),
        Mode::Stein => run_stein(config, &dir),
        Mode::ReturnTimes => run_return_times(config, &dir),
    }
}

/// Run on a dedicated pool of `workers` threads; the reports do not depend
/// on the worker count.
pub fn run_with_workers(config: &ExperimentConfig, workers: usize) -> Result<RunOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    pool.install(|| run(config))
}

fn run_inequalities(config: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let report: InequalityReport = run_inequality_checks(
        config.master_seed,
        config.options.block_instances,
        config.options.smoothing_instances,
    )?;
    let path = write_report(dir, "inequalities.json", config, &report)?;
    let status = if report.passed() {
        Status::Success
    } else {
        Status::PropertyViolation
    };
    Ok(RunOutcome {
        status,
        files: vec![path],
        summary: format!("{} instances, {} failures", report.instances, report.failures.len()),
    })
}

struct RateData {
    rows: Vec<(u64, usize, f64, f64)>,
    estimates: Vec<DkEstimate>,
    batches: Vec<TrialBatch>,
    d2_hat: f64,
}

fn rate_data(config: &ExperimentConfig, resolved: &Resolved) -> Result<RateData> {
    let mut rows = Vec::new();
    let mut estimates = Vec::new();
    let mut batches = Vec::new();
    for &n in &config.grid {
        let batch = at_n(
            n,
            replicate_z(
                &resolved.spec,
                &resolved.observable,
                &resolved.family,
                n,
                config.replications.t,
                config.replications.t_cal,
                config.options.normalization,
                config.master_seed,
            ),
        )?;
        let mut z = batch.z_samples.clone();
        z.sort_by(f64::total_cmp);
        let est = at_n(n, kolmogorov_to_normal(&z))?;
        eprintln!(
            "[{}] N = {n}: dK_hat = {:.6} (stderr {:.6})",
            config.mode.name(),
            est.d_k,
            est.mc_stderr
        );
        rows.push((n, config.replications.t, est.d_k, est.mc_stderr));
        estimates.push(est);
        batches.push(batch);
    }
    let top = batches.last().unwrap();
    let d2_hat = match config.options.normalization {
        Normalization::SelfNormalized => top.s_n_hat.powi(2) / top.n as f64,
        Normalization::Fixed { d } => d * d,
    };
    Ok(RateData {
        rows,
        estimates,
        batches,
        d2_hat,
    })
}

#[derive(Serialize)]
struct RateResults<'a> {
    report: &'a RateReport,
    dkw: Vec<f64>,
    s_n_hat: Vec<f64>,
}

fn run_rate(config: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let resolved = config.resolve()?;
    let data = rate_data(config, &resolved)?;
    let report = rate_report(
        &data.rows,
        resolved.observable.bound_m(),
        data.d2_hat,
        config.options.bound_constant,
    )?;
    if !report.noise_floor.is_empty() {
        eprintln!(
            "[rate] warning: estimates at N = {:?} are below 3 x stderr; increase T",
            report.noise_floor
        );
    }
    let csv = write_csv(dir, "rate.csv", |buf| report.write_csv(buf))?;
    let json = write_report(
        dir,
        "rate.json",
        config,
        RateResults {
            report: &report,
            dkw: data.estimates.iter().map(|e| e.dkw).collect(),
            s_n_hat: data.batches.iter().map(|b| b.s_n_hat).collect(),
        },
    )?;
    Ok(RunOutcome {
        status: Status::Success,
        files: vec![csv, json],
        summary: format!(
            "slope {:.4} (95% CI {:.4} .. {:.4})",
            report.slope, report.slope_ci.0, report.slope_ci.1
        ),
    })
}

#[derive(Serialize)]
struct VarianceResults<'a> {
    estimate: &'a D2Estimate,
    envelope_holds: bool,
}

fn run_variance(config: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let resolved = config.resolve()?;
    let mut estimates = Vec::new();
    for &n in &config.grid {
        let e = at_n(
            n,
            estimate_variance(
                &resolved.spec,
                &resolved.observable,
                &resolved.family,
                n,
                config.replications.t_cal,
                config.master_seed,
            ),
        )?;
        eprintln!("[variance] N = {n}: s_N^2 / N = {:.6}", e.s2 / n as f64);
        estimates.push(e);
    }
    let d2 = d2_from_estimates(&estimates, config.replications.t_cal);
    let csv = write_csv(dir, "variance.csv", |buf| {
        writeln!(buf, "N,T_cal,scaled,scaled_stderr,deviation,deviation_stderr,envelope")?;
        for r in &d2.rows {
            writeln!(
                buf,
                "{},{},{},{},{},{},{}",
                r.n, r.t_cal, r.scaled, r.scaled_stderr, r.deviation, r.deviation_stderr, r.envelope
            )?;
        }
        Ok(())
    })?;
    let holds = d2.envelope_holds();
    let json = write_report(
        dir,
        "variance.json",
        config,
        VarianceResults {
            estimate: &d2,
            envelope_holds: holds,
        },
    )?;
    Ok(RunOutcome {
        status: if holds {
            Status::Success
        } else {
            Status::PropertyViolation
        },
        files: vec![csv, json],
        summary: format!(
            "D2_hat = {:.6} (stderr {:.6}), c_hat = {:.4}",
            d2.d2, d2.d2_stderr, d2.envelope_c
        ),
    })
}

#[derive(Serialize)]
struct SteinResults<'a> {
    terms: &'a [SteinTerms],
    r1_fit: Option<RateFit>,
    r3_fit: Option<RateFit>,
}

fn run_stein(config: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let resolved = config.resolve()?;
    let options = SteinOptions {
        t: config.replications.t,
        t_cal: config.replications.t_cal,
        l: config.options.block_length,
        independent_moments: config.options.independent_moments,
        c0_prime: config.options.c0_prime,
    };
    let mut terms = Vec::new();
    for &n in &config.grid {
        let s = at_n(
            n,
            estimate_stein_terms(
                &resolved.spec,
                &resolved.observable,
                &resolved.family,
                n,
                options,
                config.master_seed,
            ),
        )?;
        eprintln!("[stein] N = {n}: l = {}, R1 = {:.5}, R3 = {:.5}", s.l, s.r1, s.r3);
        terms.push(s);
    }
    let fit = |pick: fn(&SteinTerms) -> (f64, f64)| -> Option<RateFit> {
        let rows: Vec<(u64, f64, f64)> = terms.iter().map(|s| (s.n, pick(s).0, pick(s).1)).collect();
        fit_rate(&rows).ok()
    };
    let r1_fit = fit(|s| (s.r1, s.r1_stderr));
    let r3_fit = fit(|s| (s.r3, s.r3_stderr));
    let csv = write_csv(dir, "stein.csv", |buf| {
        writeln!(buf, "N,T,l,R1,R1_stderr,R3,R3_stderr,small_terms,R2_bound")?;
        for s in &terms {
            let r2 = s.r2_bound.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                buf,
                "{},{},{},{},{},{},{},{},{}",
                s.n, s.t, s.l, s.r1, s.r1_stderr, s.r3, s.r3_stderr, s.small_terms, r2
            )?;
        }
        Ok(())
    })?;
    let summary = format!(
        "R1 slope {}, R3 slope {}",
        r1_fit.as_ref().map_or("n/a".into(), |f| format!("{:.4}", f.slope)),
        r3_fit.as_ref().map_or("n/a".into(), |f| format!("{:.4}", f.slope)),
    );
    let json = write_report(
        dir,
        "stein.json",
        config,
        SteinResults {
            terms: &terms,
            r1_fit,
            r3_fit,
        },
    )?;
    Ok(RunOutcome {
        status: Status::Success,
        files: vec![csv, json],
        summary,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
struct ReturnRow {
    n: u64,
    mean_count: f64,
    mean_stderr: f64,
    product_mean: f64,
    dk_hat: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct ReturnResults<'a> {
    rows: &'a [ReturnRow],
    rate: Option<RateReport>,
}

fn run_return_times(config: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    if !matches!(config.observable, ObservableDecl::ReturnTime { .. }) {
        return Err(Error::config(
            "observable",
            "return-times mode needs a return_time observable",
        ));
    }
    let resolved = config.resolve()?;
    let fbar = centering_constant(&resolved.raw, &resolved.spec)?.value;
    let data = rate_data(config, &resolved)?;
    let rows: Vec<ReturnRow> = data
        .batches
        .iter()
        .zip(&data.estimates)
        .map(|(b, e)| {
            let counts: Vec<f64> = b.values_sn.iter().map(|s| s + b.n as f64 * fbar).collect();
            let (mean_count, mean_stderr) = mean_and_stderr(&counts);
            ReturnRow {
                n: b.n,
                mean_count,
                mean_stderr,
                product_mean: b.n as f64 * fbar,
                dk_hat: e.d_k,
                stderr: e.mc_stderr,
            }
        })
        .collect();
    let rate = rate_report(
        &data.rows,
        resolved.observable.bound_m(),
        data.d2_hat,
        config.options.bound_constant,
    )
    .ok();
    let csv = write_csv(dir, "return_times.csv", |buf| {
        writeln!(buf, "N,T,mean_count,mean_stderr,product_mean,dK_hat,stderr")?;
        for r in &rows {
            writeln!(
                buf,
                "{},{},{},{},{},{},{}",
                r.n, config.replications.t, r.mean_count, r.mean_stderr, r.product_mean, r.dk_hat, r.stderr
            )?;
        }
        Ok(())
    })?;
    let json = write_report(dir, "return_times.json", config, ReturnResults { rows: &rows, rate })?;
    Ok(RunOutcome {
        status: Status::Success,
        files: vec![csv, json],
        summary: format!("{} grid points", rows.len()),
    })
}

/// Write `neighborhoods.csv` (`n,interval_start,interval_end`) for the
/// config's index family at `options.neighborhood_horizon` (default: the
/// largest grid point) and block length (default: `ceil(4 A ln(N + 1))`).
pub fn dump_neighborhoods(config: &ExperimentConfig) -> Result<PathBuf> {
    let family = config.index_family.build()?;
    let horizon = config
        .options
        .neighborhood_horizon
        .or_else(|| config.grid.last().copied())
        .ok_or_else(|| Error::config("options.neighborhood_horizon", "no horizon given and the grid is empty"))?;
    let l = match config.options.block_length {
        Some(l) => l,
        None => {
            let spec = config.process.build()?;
            block_length(horizon, spec.phi_bound()?.c)
        }
    };
    let index = NeighborhoodIndex::build(horizon, l, &family)?;
    let dir = PathBuf::from(&config.output);
    fs::create_dir_all(&dir)?;
    write_csv(&dir, "neighborhoods.csv", |buf| index.write_csv(buf))
}

/// Built-in inequality-check config used when none is supplied.
pub fn default_inequality_config(master_seed: u64, output: &str) -> ExperimentConfig {
    ExperimentConfig {
        mode: Mode::Inequalities,
        process: ProcessDecl::DoeblinChain {
            transition: vec![vec![0.75, 0.25], vec![0.25, 0.75]],
            embedding: None,
        },
        observable: ObservableDecl::Identity,
        index_family: IndexFamilyDecl::Linear { ell: 1 },
        grid: Vec::new(),
        replications: Replications { t: 0, t_cal: 0 },
        master_seed,
        output: output.into(),
        options: Options::default(),
    }
}
