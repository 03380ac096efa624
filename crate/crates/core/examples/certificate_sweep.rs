//! How the certificates move with the measurement-to-process noise ratio.

use kfselect::covariance::Kind;
use kfselect::experiments::{run_sweep, summarize_sweep, sweep_trends, SweepConfig};

fn main() -> kfselect::error::Result<()> {
    let cfg = SweepConfig {
        n: 10,
        p: 10,
        trials: 5,
        ..SweepConfig::desk(Kind::Filtering)
    };
    let summary = summarize_sweep(&run_sweep(&cfg)?);
    println!("{:>6} {:>8} {:>10} {:>12}", "|F|", "ratio", "alpha", "epsilon");
    for s in &summary {
        println!("{:>6} {:>8.0e} {:>10.4} {:>12.4e}", s.f_norm, s.ratio, s.mean_alpha, s.mean_epsilon);
    }
    println!("trends (alpha up, epsilon down): {:?}", sweep_trends(&summary));
    Ok(())
}
