//! Exact joint versus decoupled block expectations on a small chain.

use std::sync::Arc;

use nclab::decoupling::{
    check_conditional_bound, check_decoupling_bound, decoupled_expectation, exact_joint_expectation,
    run_inequality_checks, BlockExpectationProblem,
};
use nclab::ProcessSpec;

fn main() -> nclab::Result<()> {
    let chain = ProcessSpec::doeblin_chain(&[vec![0.9, 0.1], vec![0.2, 0.8]], vec![vec![0.0], vec![1.0]])?;
    // Blocks [1,2], [4,4], [7,8]; the first and last form one group.
    let h = Arc::new(|u: &[u32]| if u.iter().sum::<u32>() >= 3 { 1.0 } else { 0.0 });
    let problem = BlockExpectationProblem::new(chain, vec![(1, 2), (4, 4), (7, 8)], vec![0, 1, 0], h, 1.0)?;
    let joint = exact_joint_expectation(&problem)?;
    let split = decoupled_expectation(&problem)?;
    let check = check_decoupling_bound(&problem)?;
    println!(
        "joint {joint:.6}, decoupled {split:.6}, gap {:.3e} <= bound {:.3e}: {}",
        check.gap, check.bound, check.pass
    );

    let two = BlockExpectationProblem::new(
        problem.chain().clone(),
        vec![(1, 2), (5, 6)],
        vec![0, 1],
        Arc::new(|u: &[u32]| f64::from(u[0] == u[3])),
        1.0,
    )?;
    let c = check_conditional_bound(&two)?;
    println!("conditional: gap {:.3e} <= bound {:.3e}: {}", c.gap, c.bound, c.pass);

    let report = run_inequality_checks(1, 50, 100)?;
    println!(
        "{} random instances, {} failures",
        report.instances,
        report.failures.len()
    );
    Ok(())
}
