//! Greedy sensor selection, exhaustive and random baselines, and the relative
//! suboptimality `ν* = (f(X*) − f(G))/f(X*)`.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{factored_trace_gain, factored_update};
use crate::error::{Error, Result};
use crate::model::{seeded_rng, LinearSystem, SensorSet};
use crate::numerics::Matrix;
use crate::objective::{Objective, Scalarization, SelectionConfig, SetFunction};

/// Default cap on the number of subsets exhaustive search may visit.
pub const EXHAUSTIVE_CAP: u128 = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Insertion order.
    pub chosen: Vec<usize>,
    /// `f` after 0, 1, …, r insertions.
    pub objective_trajectory: Vec<f64>,
    pub gains: Vec<f64>,
}

impl SelectionResult {
    pub fn set(&self) -> SensorSet {
        SensorSet::from_indices(&self.chosen).expect("selections are duplicate-free")
    }

    pub fn final_value(&self) -> f64 {
        *self.objective_trajectory.last().expect("trajectory starts at 0")
    }
}

/// Evaluates `f` along the insertion order `chosen`.
pub fn trajectory<F: SetFunction + ?Sized>(f: &F, chosen: &[usize]) -> Result<SelectionResult> {
    let mut set = SensorSet::empty();
    let mut objective_trajectory = vec![f.value(&set)?];
    for &u in chosen {
        if set.contains(u) {
            return Err(Error::Precondition(format!("sensor {u} chosen twice")));
        }
        set = set.with(u);
        objective_trajectory.push(f.value(&set)?);
    }
    let gains = objective_trajectory.windows(2).map(|w| w[0] - w[1]).collect();
    Ok(SelectionResult {
        chosen: chosen.to_vec(),
        objective_trajectory,
        gains,
    })
}

/// Which evaluation the greedy rounds use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreedyMode {
    /// Incremental trace gains when the objective allows it, otherwise direct.
    #[default]
    Auto,
    /// Full objective evaluation for every candidate.
    Direct,
}

/// `r` rounds of `u ← argmin_{w ∉ G} f(G ∪ {w})`, ties to the lowest index.
pub fn greedy<F: SetFunction + ?Sized>(f: &F, r: usize) -> Result<SelectionResult> {
    let p = f.ground_size();
    check_steps(r, p)?;
    let mut set = SensorSet::empty();
    let mut chosen = Vec::with_capacity(r);
    for _ in 0..r {
        let candidates: Vec<usize> = (0..p).filter(|&w| !set.contains(w)).collect();
        let values = candidates
            .par_iter()
            .map(|&w| f.value(&set.with(w)))
            .collect::<Result<Vec<_>>>()?;
        let best = argmin_first(&values);
        chosen.push(candidates[best]);
        set = set.with(candidates[best]);
    }
    trajectory(f, &chosen)
}

fn check_steps(r: usize, p: usize) -> Result<()> {
    if r == 0 || r > p {
        return Err(Error::Config(format!(
            "greedy steps r = {r} must lie in [1, |O| = {p}]"
        )));
    }
    Ok(())
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy on the trace objective through the rank-update identity: each
/// round keeps `Y_k(G)` per weighted step and scores candidates by their
/// incremental gains.
fn greedy_incremental(obj: &Objective, r: usize) -> Result<Option<SelectionResult>> {
    let Some(steps) = obj.fixed_steps() else {
        return Ok(None);
    };
    if obj.scalarization() != Scalarization::Trace || steps.iter().any(|(_, m)| m.factor(0).is_none()) {
        return Ok(None);
    }
    let p = obj.ground_size();
    check_steps(r, p)?;
    let mut set = SensorSet::empty();
    let mut ys: Vec<Matrix> = steps
        .iter()
        .map(|(_, m)| m.evaluate_y(&set))
        .collect::<Result<_>>()?;
    let mut chosen = Vec::with_capacity(r);
    for _ in 0..r {
        let candidates: Vec<usize> = (0..p).filter(|&w| !set.contains(w)).collect();
        let gains = candidates
            .par_iter()
            .map(|&w| {
                let mut total = 0.0;
                for ((theta, model), y) in steps.iter().zip(&ys) {
                    let g = model.factor(w).expect("checked above");
                    total += theta * factored_trace_gain(g, y)?.0;
                }
                Ok(total)
            })
            .collect::<Result<Vec<_>>>()?;
        let u = candidates[argmax_first(&gains)];
        for ((_, model), y) in steps.iter().zip(ys.iter_mut()) {
            let (_, s_inv, w) = factored_trace_gain(model.factor(u).expect("checked"), y)?;
            *y = factored_update(y, &s_inv, &w)?;
        }
        chosen.push(u);
        set = set.with(u);
    }
    trajectory(obj, &chosen).map(Some)
}

pub fn greedy_objective(obj: &Objective, r: usize, mode: GreedyMode) -> Result<SelectionResult> {
    if mode == GreedyMode::Auto {
        if let Some(res) = greedy_incremental(obj, r)? {
            return Ok(res);
        }
    }
    greedy(obj, r)
}

/// Greedy selection of `cfg.steps` sensors.
pub fn greedy_select(sys: &LinearSystem, cfg: &SelectionConfig) -> Result<SelectionResult> {
    greedy_select_with(sys, cfg, GreedyMode::Auto)
}

pub fn greedy_select_with(sys: &LinearSystem, cfg: &SelectionConfig, mode: GreedyMode) -> Result<SelectionResult> {
    cfg.validate_weights()?;
    check_steps(cfg.steps, sys.num_sensors())?;
    let obj = Objective::new(sys, cfg)?;
    greedy_objective(&obj, cfg.steps, mode)
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Advances `combo` to the next `k`-combination of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Minimizer of `f` over all subsets of size `s` (lexicographically first on ties).
pub fn exhaustive<F: SetFunction + ?Sized>(f: &F, s: usize, cap: u128) -> Result<(SensorSet, f64)> {
    let p = f.ground_size();
    if s > p {
        return Err(Error::Config(format!("budget s = {s} exceeds |O| = {p}")));
    }
    let count = binomial(p, s);
    if count > cap {
        return Err(Error::Size {
            what: "exhaustive subsets C(|O|, s)",
            value: count,
            cap,
            hint: "; use greedy selection only",
        });
    }
    let mut combos = Vec::with_capacity(count as usize);
    let mut combo: Vec<usize> = (0..s).collect();
    loop {
        combos.push(combo.clone());
        if !next_combination(&mut combo, p) {
            break;
        }
    }
    let values = combos
        .par_iter()
        .map(|c| f.value(&SensorSet::from_indices(c).expect("combinations are distinct")))
        .collect::<Result<Vec<_>>>()?;
    let best = argmin_first(&values);
    Ok((SensorSet::from_indices(&combos[best])?, values[best]))
}

pub fn exhaustive_select(sys: &LinearSystem, cfg: &SelectionConfig) -> Result<(SensorSet, f64)> {
    cfg.validate_for(sys.num_sensors())?;
    let obj = Objective::new(sys, cfg)?;
    exhaustive(&obj, cfg.budget, EXHAUSTIVE_CAP)
}

/// `(f(X*) − f(G))/f(X*)`
pub fn relative_suboptimality(f_greedy: f64, f_opt: f64) -> Result<f64> {
    if !(f_opt < -1e-15) {
        return Err(Error::Domain(format!(
            "relative suboptimality undefined for f(X*) = {f_opt:e} (no informative sensor)"
        )));
    }
    // `+ 0.0` turns the −0 of an exact tie into +0
    Ok((f_opt - f_greedy) / f_opt + 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Baseline {
    /// `s` distinct sensors uniformly at random.
    Uniform,
    /// One uniform pick from each stratum.
    Stratified(Vec<Vec<usize>>),
}

pub fn random_set(p: usize, s: usize, baseline: &Baseline, seed: u64) -> Result<Vec<usize>> {
    let mut rng = seeded_rng(seed);
    match baseline {
        Baseline::Uniform => {
            if s > p {
                return Err(Error::Config(format!("budget s = {s} exceeds |O| = {p}")));
            }
            Ok(sample(&mut rng, p, s).into_vec())
        }
        Baseline::Stratified(strata) => {
            let mut picks = Vec::with_capacity(strata.len());
            for (i, stratum) in strata.iter().enumerate() {
                if stratum.is_empty() {
                    return Err(Error::Config(format!("stratum {i} is empty")));
                }
                let u = stratum[rng.random_range(0..stratum.len())];
                if u >= p || picks.contains(&u) {
                    return Err(Error::Config(format!("stratum {i} yields invalid or repeated sensor {u}")));
                }
                picks.push(u);
            }
            Ok(picks)
        }
    }
}

/// A random sensing set of size `cfg.budget` (or one per stratum), evaluated
/// along its draw order.
pub fn random_baseline(sys: &LinearSystem, cfg: &SelectionConfig, baseline: &Baseline, seed: u64) -> Result<SelectionResult> {
    let chosen = random_set(sys.num_sensors(), cfg.budget, baseline, seed)?;
    let obj = Objective::new(sys, cfg)?;
    trajectory(&obj, &chosen)
}
