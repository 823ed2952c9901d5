//! Counting simultaneous returns xi_n in A_1, xi_{2n} in A_2 along one path.

use nclab::lab::{count_return_tuples, nonconventional_sum};
use nclab::observables::make_return_time_observable;
use nclab::{IndexFamily, ProcessSpec};

fn main() -> nclab::Result<()> {
    let spec = ProcessSpec::doeblin_chain(
        &[vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3], vec![0.3, 0.3, 0.4]],
        vec![vec![0.0], vec![1.0], vec![2.0]],
    )?;
    let family = IndexFamily::linear(2)?;
    let sets = vec![vec![0], vec![1, 2]];
    let n = 10_000;
    let path = spec.sample_path(family.max_index(n) as usize, 9)?;
    let count = count_return_tuples(&path, &sets, &family, n)?;
    let indicator = make_return_time_observable(3, &sets)?;
    let as_sum = nonconventional_sum(&path, &spec, &indicator, &family, n)?;
    let pi = spec.marginal();
    let expected = n as f64 * pi[0] * (pi[1] + pi[2]);
    println!("N({n}) = {count} (as a sum: {as_sum}), product-measure mean {expected:.1}");
    Ok(())
}
