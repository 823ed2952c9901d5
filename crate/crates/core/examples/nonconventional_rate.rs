//! Rate of normal approximation for F(xi_n, xi_2n) on a two-state chain.

use nclab::lab::{kolmogorov_to_normal, rate_report, replicate_z, Normalization};
use nclab::observables::center;
use nclab::{IndexFamily, Observable, ProcessSpec};

fn main() -> nclab::Result<()> {
    let spec = ProcessSpec::doeblin_chain(&[vec![0.75, 0.25], vec![0.25, 0.75]], vec![vec![0.0], vec![1.0]])?;
    let f = center(&Observable::table(2, 2, vec![0.0, 0.0, 0.0, 1.0])?, &spec)?;
    let family = IndexFamily::linear(2)?;
    let t = 20_000;
    let mut rows = Vec::new();
    let mut d2 = 0.0;
    for k in 6..=10 {
        let n = 1u64 << k;
        let batch = replicate_z(&spec, &f, &family, n, t, t, Normalization::SelfNormalized, 42)?;
        d2 = batch.s_n_hat.powi(2) / n as f64;
        let mut z = batch.z_samples;
        z.sort_by(f64::total_cmp);
        let est = kolmogorov_to_normal(&z)?;
        rows.push((n, t, est.d_k, est.mc_stderr));
    }
    let report = rate_report(&rows, f.bound_m(), d2, 1.0)?;
    let mut out = Vec::new();
    report.write_csv(&mut out)?;
    print!("{}", String::from_utf8_lossy(&out));
    println!(
        "slope {:.3} (95% CI {:.3} .. {:.3}), D2_hat {:.4}",
        report.slope, report.slope_ci.0, report.slope_ci.1, d2
    );
    if !report.noise_floor.is_empty() {
        println!("below the noise floor at N = {:?}", report.noise_floor);
    }
    Ok(())
}
