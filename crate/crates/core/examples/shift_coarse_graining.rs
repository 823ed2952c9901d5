//! Finitely coded shift observables and their coarse-grained approximations.

use nclab::ProcessSpec;

fn main() -> nclab::Result<()> {
    let shift = ProcessSpec::shift_system(&[vec![0.7, 0.3], vec![0.4, 0.6]], vec![vec![-1.0], vec![1.0]], 3, 0.5)?;
    println!(
        "{} window codes, embedding dim {}",
        shift.alphabet_size(),
        shift.embedding_dim()
    );
    for r in 0..=3 {
        println!("beta_inf({r}) = {:.6}", shift.approximation_rate(r));
    }
    let path = shift.sample_path(8, 4)?;
    let fine = shift.coarse_grain(&path, 3);
    let coarse = shift.coarse_grain(&path, 1);
    for t in 1..=path.len() as u64 {
        println!(
            "t = {t}: x = {:+.4}, E[x | radius 1] = {:+.4}",
            fine.at(t)[0],
            coarse.at(t)[0]
        );
    }
    let b = shift.phi_bound()?;
    println!("phi(n) <= {} * {}^n", b.d, b.c);
    Ok(())
}
