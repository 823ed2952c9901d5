//! Dependency neighborhoods of the linear family q_i(n) = i n.

use nclab::{IndexFamily, NeighborhoodIndex, ProfileScratch};

fn main() -> nclab::Result<()> {
    let family = IndexFamily::linear(2)?;
    let index = NeighborhoodIndex::build(40, 1, &family)?;
    for n in [1u64, 4, 10, 25] {
        println!("A_{n} = {:?}", index.neighborhood(n).intervals());
    }
    println!("K1 = {}, K2 = {}", index.k1(), index.k2());

    let big = NeighborhoodIndex::build(5000, 16, &IndexFamily::linear(3)?)?;
    let mut scratch = ProfileScratch::default();
    let n = 1234;
    let sizes = big.annulus_sizes(n, &mut scratch);
    let largest = sizes.values().max().copied().unwrap_or(0);
    println!(
        "l = 16, ell = 3, n = {n}: |A_n| = {} (cap {}), {} annuli, largest {} (cap {})",
        big.neighborhood(n).len(),
        9 * 33,
        sizes.len(),
        largest,
        big.k2() * 16
    );
    Ok(())
}
