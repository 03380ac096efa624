//! Spectral certificates (α for the MSE, ε for the worst-case error) and the
//! greedy guarantees they imply, for filtering and smoothing, checked against
//! the exact constants obtained by enumeration.

use kfselect::certificates::{certify, exhaustive_constants, PriorSchedule};
use kfselect::covariance::Kind;
use kfselect::model::{random_system, RandomSystemSpec};
use kfselect::objective::{Objective, Scalarization, SelectionConfig, Weights};

fn main() -> kfselect::error::Result<()> {
    let spec = RandomSystemSpec {
        n: 4,
        p: 6,
        ..Default::default()
    };
    let sys = random_system(&spec, 11)?;
    for kind in [Kind::Filtering, Kind::Smoothing] {
        for h in [Scalarization::Trace, Scalarization::Specnorm] {
            let cfg = SelectionConfig::new(h, kind, 0, 3, &Weights::Final, 3);
            let rep = certify(&sys, &cfg, &PriorSchedule::Empty)?;
            let exact = exhaustive_constants(&Objective::new(&sys, &cfg)?)?;
            match h {
                Scalarization::Specnorm => println!(
                    "{kind:>9} {h:>8}: eps bound {:.3e} >= exact {:.3e}; f(G) <= {:.4} f(X*) + {:.3e}",
                    rep.epsilon_bound, exact.epsilon, rep.guarantee_additive_factor, rep.guarantee_additive_slack
                ),
                _ => println!(
                    "{kind:>9} {h:>8}: alpha bound {:.4} <= exact {:.4}; f(G) <= {:.4} f(X*)",
                    rep.alpha_bound, exact.alpha, rep.guarantee_multiplicative
                ),
            }
        }
    }
    Ok(())
}
