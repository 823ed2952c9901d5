//! Exact phi-mixing coefficients of a few processes.

use nclab::ProcessSpec;

fn main() -> nclab::Result<()> {
    let (p, q) = (0.3, 0.1);
    let chain = ProcessSpec::doeblin_chain(&[vec![1.0 - p, p], vec![q, 1.0 - q]], vec![vec![0.0], vec![1.0]])?;
    let pi_max = (q / (p + q)).max(p / (p + q));
    println!("two-state chain p = {p}, q = {q}");
    println!("{:>3} {:>14} {:>14}", "n", "phi(n)", "closed form");
    for (i, phi) in chain.phi_sequence(10)?.iter().enumerate() {
        let n = i as i32 + 1;
        println!("{n:>3} {phi:>14.6e} {:>14.6e}", (1.0 - p - q).abs().powi(n) * pi_max);
    }
    let b = chain.phi_bound()?;
    println!("phi(n) <= {:.4} * {:.4}^n", b.d, b.c);

    let iid = ProcessSpec::iid(vec![0.2, 0.8], vec![vec![0.0], vec![1.0]])?;
    println!("iid phi(1) = {}", iid.phi_coefficient(1)?);

    let lazy = ProcessSpec::doeblin_chain(
        &[vec![0.8, 0.2, 0.0], vec![0.0, 0.8, 0.2], vec![0.2, 0.0, 0.8]],
        vec![vec![0.0], vec![1.0], vec![2.0]],
    )?;
    let seq = lazy.phi_sequence(30)?;
    println!(
        "3-cycle chain: phi(1) = {:.4}, phi(10) = {:.4e}, phi(30) = {:.4e}",
        seq[0], seq[9], seq[29]
    );
    Ok(())
}
