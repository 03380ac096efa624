//! Greedy selection of 4 out of 10 sensors for the 10-step average MSE of a
//! random Kalman filter, compared with the best 4-subset.

use kfselect::covariance::Kind;
use kfselect::model::{random_system, RandomSystemSpec};
use kfselect::objective::{Scalarization, SelectionConfig, Weights};
use kfselect::selection::{exhaustive_select, greedy_select, relative_suboptimality};

fn main() -> kfselect::error::Result<()> {
    let sys = random_system(&RandomSystemSpec::default(), 7)?;
    let cfg = SelectionConfig::new(Scalarization::Trace, Kind::Filtering, 0, 10, &Weights::Average, 4);

    let greedy = greedy_select(&sys, &cfg)?;
    println!("greedy picks   {:?}", greedy.chosen);
    for (i, v) in greedy.objective_trajectory.iter().enumerate() {
        println!("  after {i} sensors: f = {v:.6e}");
    }
    let (best, f_opt) = exhaustive_select(&sys, &cfg)?;
    println!("optimal set    {:?}  f = {f_opt:.6e}", best.as_slice());
    println!("nu* = {:.3e}", relative_suboptimality(greedy.final_value(), f_opt)?);
    Ok(())
}
