//! Growth of E S_N^2 / N towards D^2.

use nclab::lab::{estimate_d2, markov_clt_variance};
use nclab::observables::center;
use nclab::{IndexFamily, Observable, ProcessSpec};

fn main() -> nclab::Result<()> {
    let spec = ProcessSpec::doeblin_chain(&[vec![0.75, 0.25], vec![0.25, 0.75]], vec![vec![-1.0], vec![1.0]])?;
    let grid: Vec<u64> = (6..=11).map(|k| 1 << k).collect();

    let f1 = Observable::table(2, 1, vec![-1.0, 1.0])?;
    let est = estimate_d2(&spec, &f1, &IndexFamily::linear(1)?, &grid, 5000, 1)?;
    println!(
        "ell = 1: D2_hat {:.4} +- {:.4}, closed form {:.4}",
        est.d2,
        est.d2_stderr,
        markov_clt_variance(&spec, &[-1.0, 1.0])?
    );

    let f2 = center(&Observable::table(2, 2, vec![1.0, -1.0, -1.0, 1.0])?, &spec)?;
    let est = estimate_d2(&spec, &f2, &IndexFamily::linear(2)?, &grid, 5000, 1)?;
    println!(
        "ell = 2: D2_hat {:.4}, c_hat {:.4}, envelope holds: {}",
        est.d2,
        est.envelope_c,
        est.envelope_holds()
    );
    for r in &est.rows {
        println!(
            "  N = {:>5}: s_N^2/N = {:.4}, deviation {:.4} <= {:.4}",
            r.n, r.scaled, r.deviation, r.envelope
        );
    }
    Ok(())
}
