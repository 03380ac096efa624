//! Relative suboptimality of greedy selection over a batch of random systems.

use kfselect::covariance::Kind;
use kfselect::experiments::{run_bruteforce, summarize_bruteforce, BruteforceConfig};

fn main() -> kfselect::error::Result<()> {
    for kind in [Kind::Filtering, Kind::Smoothing] {
        let cfg = BruteforceConfig {
            trials: 50,
            ..BruteforceConfig::trace_family(kind)
        };
        let s = summarize_bruteforce(&run_bruteforce(&cfg)?);
        println!(
            "{kind:>9} trace: optimal in {:.0}% of {} trials, max nu* {:.2e}, mean nu* {:.2e}",
            100.0 * s.optimal_fraction,
            s.trials,
            s.max_nu_star,
            s.mean_nu_star
        );
    }
    Ok(())
}
