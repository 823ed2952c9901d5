//! Self-normalized Rademacher sums against the exact binomial distance.

use nclab::lab::{dkw_term, exact_dk_binomial, kolmogorov_to_normal, replicate_z, Normalization};
use nclab::{IndexFamily, Observable, ProcessSpec};

fn main() -> nclab::Result<()> {
    let spec = ProcessSpec::iid(vec![0.5, 0.5], vec![vec![-1.0], vec![1.0]])?;
    let f = Observable::table(2, 1, vec![-1.0, 1.0])?;
    let family = IndexFamily::linear(1)?;
    let t = 20_000;
    println!("{:>6} {:>10} {:>10} {:>10}", "N", "dK_hat", "exact", "tol");
    for k in 6..=10 {
        let n = 1u64 << k;
        let batch = replicate_z(&spec, &f, &family, n, t, t, Normalization::SelfNormalized, 3)?;
        let mut z = batch.z_samples;
        z.sort_by(f64::total_cmp);
        let est = kolmogorov_to_normal(&z)?;
        let tol = 3.0 * (est.mc_stderr + dkw_term(t));
        println!("{n:>6} {:>10.5} {:>10.5} {:>10.5}", est.d_k, exact_dk_binomial(n), tol);
    }
    Ok(())
}
