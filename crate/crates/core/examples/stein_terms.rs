//! Monte Carlo Stein terms R1 and R3 with the mixing-adapted block length.

use nclab::lab::{estimate_stein_terms, fit_rate, SteinOptions};
use nclab::observables::center;
use nclab::{IndexFamily, Observable, ProcessSpec};

fn main() -> nclab::Result<()> {
    let spec = ProcessSpec::doeblin_chain(&[vec![0.75, 0.25], vec![0.25, 0.75]], vec![vec![0.0], vec![1.0]])?;
    let f = center(&Observable::table(2, 2, vec![0.0, 0.0, 0.0, 1.0])?, &spec)?;
    let family = IndexFamily::linear(2)?;
    let options = SteinOptions {
        t: 1000,
        t_cal: 2000,
        l: None,
        independent_moments: false,
        c0_prime: Some(1.0),
    };
    let mut terms = Vec::new();
    println!("{:>6} {:>4} {:>10} {:>10} {:>10}", "N", "l", "R1", "R3", "R2 bound");
    for k in 8..=11 {
        let s = estimate_stein_terms(&spec, &f, &family, 1 << k, options, 42)?;
        println!(
            "{:>6} {:>4} {:>10.4} {:>10.4} {:>10.3e}",
            s.n,
            s.l,
            s.r1,
            s.r3,
            s.r2_bound.unwrap_or(0.0)
        );
        terms.push(s);
    }
    let r1 = fit_rate(&terms.iter().map(|s| (s.n, s.r1, s.r1_stderr)).collect::<Vec<_>>())?;
    let r3 = fit_rate(&terms.iter().map(|s| (s.n, s.r3, s.r3_stderr)).collect::<Vec<_>>())?;
    println!("R1 slope {:.3}, R3 slope {:.3}", r1.slope, r3.slope);
    Ok(())
}
