//! Experiment drivers behind the command-line subcommands: certificate sweeps
//! over random ensembles, brute-force ν* studies, and the river-basin
//! monitoring demo with a forward Kalman simulation.
//!
//! Trials run on a rayon pool; trial `t` always uses seed `base_seed + t`, and
//! rows are collected in trial order, so outputs do not depend on scheduling.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{certify, exhaustive_constants, guarantees, CertificateReport, PriorSchedule};
use crate::covariance::Kind;
use crate::error::{Error, Result};
use crate::model::{
    basin_system, random_system, seeded_rng, synth_river_tree, BasinParams, LinearSystem, OutputMode, RandomSystemSpec,
    RiverTree, SensorSet,
};
use crate::numerics::{Cholesky, Matrix};
use crate::objective::{Objective, Scalarization, SelectionConfig, SetFunction, Weights};
use crate::selection::{
    exhaustive, greedy_objective, random_set, relative_suboptimality, trajectory, Baseline, GreedyMode, SelectionResult,
    EXHAUSTIVE_CAP,
};

pub const SCHEMA_VERSION: &str = "1";

/// Writes rows as RFC-4180 CSV with a header and LF line endings.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

// ---------------------------------------------------------------- selection

/// Greedy selection together with its certificates, as written by `select`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectReport {
    pub schema: String,
    pub config: SelectionConfig,
    pub chosen: Vec<usize>,
    pub value: f64,
    pub c_empty: f64,
    pub selection: SelectionResult,
    pub certificates: CertificateReport,
    pub system: LinearSystem,
}

pub fn run_select(sys: &LinearSystem, cfg: &SelectionConfig, schedule: &PriorSchedule) -> Result<SelectReport> {
    cfg.validate_for(sys.num_sensors())?;
    let obj = Objective::new(sys, cfg)?;
    let selection = greedy_objective(&obj, cfg.steps, GreedyMode::Auto)?;
    let certificates = certify(sys, cfg, schedule)?;
    Ok(SelectReport {
        schema: SCHEMA_VERSION.into(),
        config: cfg.clone(),
        chosen: selection.chosen.clone(),
        value: selection.final_value(),
        c_empty: obj.c_empty(),
        selection,
        certificates,
        system: sys.clone(),
    })
}

// -------------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kind: Kind,
    pub scalarization: Scalarization,
    pub n: usize,
    pub p: usize,
    /// Grid of `σ_v²/σ_w²`.
    pub ratios: Vec<f64>,
    /// Grid of `‖F‖`.
    pub f_norms: Vec<f64>,
    pub sigma_w2: f64,
    pub pi0_scale: f64,
    pub horizon: usize,
    pub weights: Weights,
    pub trials: usize,
    pub seed: u64,
}

impl SweepConfig {
    /// Desk-scale defaults: `n = p = 30`, 20 trials, canonical outputs,
    /// `Π₀ = R_w = 10⁻² I`, `N = 10`; filtering averages all steps, smoothing
    /// weighs the final one.
    pub fn desk(kind: Kind) -> Self {
        SweepConfig {
            kind,
            scalarization: Scalarization::Trace,
            n: 30,
            p: 30,
            ratios: vec![1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4],
            f_norms: vec![0.1, 0.5, 0.9],
            sigma_w2: 1e-2,
            pi0_scale: 1e-2,
            horizon: 10,
            weights: match kind {
                Kind::Filtering => Weights::Average,
                Kind::Smoothing => Weights::Final,
            },
            trials: 20,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() || self.f_norms.is_empty() {
            return Err(Error::Config("sweep grids must be non-empty".into()));
        }
        if self.ratios.iter().chain(&self.f_norms).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("sweep grid values must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: Kind,
    pub scalarization: Scalarization,
    pub sigma_w2: f64,
    pub sigma_v2: f64,
    #[serde(rename = "F_norm")]
    pub f_norm: f64,
    pub trial: usize,
    pub alpha_bound: f64,
    pub epsilon_bound: f64,
    pub runtime_ms: f64,
}

/// Certificates on a grid of `(‖F‖, σ_v²/σ_w²)`. Within a trial every grid
/// point shares the same Gaussian draw of `F`, rescaled to each norm, and
/// `σ_v²` varies with `σ_w²` held fixed.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let sel = SelectionConfig::new(cfg.scalarization, cfg.kind, 0, cfg.horizon, &cfg.weights, 1);
    sel.validate_weights()?;
    let per_trial = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rows = Vec::new();
            for &f_norm in &cfg.f_norms {
                for &ratio in &cfg.ratios {
                    let clock = Instant::now();
                    let sigma_v2 = ratio * cfg.sigma_w2;
                    let spec = RandomSystemSpec {
                        n: cfg.n,
                        p: cfg.p,
                        target_norm: f_norm,
                        sigma_w2: cfg.sigma_w2,
                        sigma_v2_range: (sigma_v2, sigma_v2),
                        output_mode: OutputMode::Canonical,
                        pi0_scale: cfg.pi0_scale,
                    };
                    let sys = random_system(&spec, cfg.seed.wrapping_add(trial as u64))?;
                    let rep = certify(&sys, &sel, &PriorSchedule::Empty)?;
                    rows.push(SweepRow {
                        kind: cfg.kind,
                        scalarization: cfg.scalarization,
                        sigma_w2: cfg.sigma_w2,
                        sigma_v2,
                        f_norm,
                        trial,
                        alpha_bound: rep.alpha_bound,
                        epsilon_bound: rep.epsilon_bound,
                        runtime_ms: clock.elapsed().as_secs_f64() * 1e3,
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<SweepRow> = per_trial.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.f_norm
            .total_cmp(&b.f_norm)
            .then(a.sigma_v2.total_cmp(&b.sigma_v2))
            .then(a.trial.cmp(&b.trial))
    });
    Ok(rows)
}

/// Trial means at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    #[serde(rename = "F_norm")]
    pub f_norm: f64,
    pub ratio: f64,
    pub mean_alpha: f64,
    pub mean_epsilon: f64,
}

pub fn summarize_sweep(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut out: Vec<SweepSummary> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for r in rows {
        let ratio = r.sigma_v2 / r.sigma_w2;
        match out.iter().position(|s| s.f_norm == r.f_norm && s.ratio == ratio) {
            Some(i) => {
                out[i].mean_alpha += r.alpha_bound;
                out[i].mean_epsilon += r.epsilon_bound;
                counts[i] += 1;
            }
            None => {
                out.push(SweepSummary {
                    f_norm: r.f_norm,
                    ratio,
                    mean_alpha: r.alpha_bound,
                    mean_epsilon: r.epsilon_bound,
                });
                counts.push(1);
            }
        }
    }
    for (s, c) in out.iter_mut().zip(counts) {
        s.mean_alpha /= c as f64;
        s.mean_epsilon /= c as f64;
    }
    out.sort_by(|a, b| a.f_norm.total_cmp(&b.f_norm).then(a.ratio.total_cmp(&b.ratio)));
    out
}

/// `(α non-decreasing, ε non-increasing)` in the ratio at every fixed `‖F‖`.
pub fn sweep_trends(summary: &[SweepSummary]) -> (bool, bool) {
    let mut alpha_ok = true;
    let mut eps_ok = true;
    for w in summary.windows(2) {
        if w[0].f_norm != w[1].f_norm {
            continue;
        }
        alpha_ok &= w[1].mean_alpha >= w[0].mean_alpha;
        eps_ok &= w[1].mean_epsilon <= w[0].mean_epsilon;
    }
    (alpha_ok, eps_ok)
}

// --------------------------------------------------------------- bruteforce

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteforceConfig {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub trials: usize,
    pub scalarization: Scalarization,
    pub kind: Kind,
    pub seed: u64,
    pub target_norm: f64,
    pub sigma_w2: f64,
    pub sigma_v2_range: (f64, f64),
    pub pi0_scale: f64,
    pub horizon: usize,
    pub weights: Weights,
    /// Also compute the exhaustive α (or ε) of every instance; needs `p ≤ 10`.
    pub with_certificate: bool,
}

impl BruteforceConfig {
    /// The `n = p = 10`, `s = 4` trace family.
    pub fn trace_family(kind: Kind) -> Self {
        BruteforceConfig {
            n: 10,
            p: 10,
            s: 4,
            trials: 200,
            scalarization: Scalarization::Trace,
            kind,
            seed: 0,
            target_norm: 0.9,
            sigma_w2: 1e-2,
            sigma_v2_range: (1e-2, 1.0),
            pi0_scale: 1e-2,
            horizon: 10,
            weights: match kind {
                Kind::Filtering => Weights::Average,
                Kind::Smoothing => Weights::Final,
            },
            with_certificate: false,
        }
    }

    /// The `n = 5`, `p = 10`, `s = 5` spectral-norm family with `σ_w² = 10⁻³`.
    pub fn specnorm_family(kind: Kind) -> Self {
        BruteforceConfig {
            n: 5,
            s: 5,
            scalarization: Scalarization::Specnorm,
            sigma_w2: 1e-3,
            ..Self::trace_family(kind)
        }
    }

    fn selection(&self) -> SelectionConfig {
        SelectionConfig::new(self.scalarization, self.kind, 0, self.horizon, &self.weights, self.s)
    }

    fn system(&self, trial: usize) -> Result<LinearSystem> {
        random_system(
            &RandomSystemSpec {
                n: self.n,
                p: self.p,
                target_norm: self.target_norm,
                sigma_w2: self.sigma_w2,
                sigma_v2_range: self.sigma_v2_range,
                output_mode: OutputMode::Gaussian,
                pi0_scale: self.pi0_scale,
            },
            self.seed.wrapping_add(trial as u64),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteforceRow {
    pub trial: usize,
    pub nu_star: f64,
    pub f_greedy: f64,
    pub f_opt: f64,
    /// Exhaustive α (trace, logdet) or ε (specnorm), when requested.
    pub alpha_or_epsilon_exhaustive: Option<f64>,
    /// Greedy guarantee evaluated at `f(X*)` with the exhaustive constant if
    /// available, otherwise with the spectral certificate.
    pub bound_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteforceSummary {
    pub trials: usize,
    pub optimal_fraction: f64,
    pub max_nu_star: f64,
    pub mean_nu_star: f64,
}

/// ν* of greedy against exhaustive search over random Gaussian-output systems.
pub fn run_bruteforce(cfg: &BruteforceConfig) -> Result<Vec<BruteforceRow>> {
    if cfg.trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let sel = cfg.selection();
    sel.validate_for(cfg.p)?;
    let count = crate::selection::binomial(cfg.p, cfg.s);
    if count > EXHAUSTIVE_CAP {
        return Err(Error::Size {
            what: "exhaustive subsets C(p, s)",
            value: count,
            cap: EXHAUSTIVE_CAP,
            hint: "; lower p or s",
        });
    }
    (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let sys = cfg.system(trial)?;
            let obj = Objective::new(&sys, &sel)?;
            let greedy = greedy_objective(&obj, cfg.s, GreedyMode::Auto)?;
            let (_, f_opt) = exhaustive(&obj, cfg.s, EXHAUSTIVE_CAP)?;
            let f_greedy = greedy.final_value();
            let nu_star = relative_suboptimality(f_greedy, f_opt)?.max(0.0);

            let constant = if cfg.with_certificate {
                let c = exhaustive_constants(&obj)?;
                Some(match cfg.scalarization {
                    Scalarization::Specnorm => c.epsilon,
                    _ => c.alpha,
                })
            } else {
                None
            };
            let (alpha, eps) = match constant {
                Some(v) if cfg.scalarization == Scalarization::Specnorm => (1.0, v),
                Some(v) => (v, 0.0),
                None => {
                    let rep = certify(&sys, &sel, &PriorSchedule::Empty)?;
                    (rep.alpha_bound, rep.epsilon_bound)
                }
            };
            let g = guarantees(alpha, eps, f_opt, cfg.s, cfg.s);
            let bound_value = match cfg.scalarization {
                Scalarization::Specnorm => g.additive_value,
                _ => g.multiplicative * f_opt,
            };
            Ok(BruteforceRow {
                trial,
                nu_star,
                f_greedy,
                f_opt,
                alpha_or_epsilon_exhaustive: constant,
                bound_value,
            })
        })
        .collect()
}

pub fn summarize_bruteforce(rows: &[BruteforceRow]) -> BruteforceSummary {
    let trials = rows.len();
    let optimal = rows.iter().filter(|r| r.nu_star <= 1e-9).count();
    BruteforceSummary {
        trials,
        optimal_fraction: optimal as f64 / trials.max(1) as f64,
        max_nu_star: rows.iter().map(|r| r.nu_star).fold(0.0, f64::max),
        mean_nu_star: rows.iter().map(|r| r.nu_star).sum::<f64>() / trials.max(1) as f64,
    }
}

/// CSV rows plus a trailing `optimal_fraction` summary row in the `trial` column.
pub fn write_bruteforce_csv(path: &Path, rows: &[BruteforceRow]) -> Result<()> {
    let summary = summarize_bruteforce(rows);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(["trial", "nu_star", "f_greedy", "f_opt", "alpha_or_epsilon_exhaustive", "bound_value"])?;
    for r in rows {
        w.serialize((
            r.trial,
            r.nu_star,
            r.f_greedy,
            r.f_opt,
            r.alpha_or_epsilon_exhaustive,
            r.bound_value,
        ))?;
    }
    w.write_record(["optimal_fraction", &summary.optimal_fraction.to_string(), "", "", "", ""])?;
    w.flush()?;
    Ok(())
}

// --------------------------------------------------------- Kalman simulation

/// Process and measurement noise realizations shared by every sensing set
/// (common random numbers): `w[k]` has `n` entries, `v[k]` one entry per
/// output row of every sensor.
#[derive(Debug, Clone)]
pub struct NoiseDraws {
    pub w: Vec<Vec<f64>>,
    pub v: Vec<Vec<Vec<f64>>>,
}

impl NoiseDraws {
    pub fn draw(sys: &LinearSystem, steps: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed);
        let lw = Cholesky::new(sys.r_w())?.factor().clone();
        let lv: Vec<Matrix> = sys
            .sensors()
            .iter()
            .map(|s| Ok(Cholesky::new(&s.r_v)?.factor().clone()))
            .collect::<Result<_>>()?;
        let mut w = Vec::with_capacity(steps);
        let mut v = Vec::with_capacity(steps);
        for _ in 0..steps {
            let z: Vec<f64> = (0..sys.n()).map(|_| rng.sample(StandardNormal)).collect();
            w.push(lw.mat_vec(&z)?);
            let mut vk = Vec::with_capacity(lv.len());
            for l in &lv {
                let z: Vec<f64> = (0..l.rows()).map(|_| rng.sample(StandardNormal)).collect();
                vk.push(l.mat_vec(&z)?);
            }
            v.push(vk);
        }
        Ok(NoiseDraws { w, v })
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub truth: Vec<Vec<f64>>,
    pub estimates: Vec<Vec<f64>>,
    /// `‖x_k − x̂_k‖²`
    pub squared_error: Vec<f64>,
    /// `trace P_k`
    pub expected_error: Vec<f64>,
}

impl Simulation {
    pub fn mean_squared_error(&self) -> f64 {
        self.squared_error.iter().sum::<f64>() / self.squared_error.len() as f64
    }
    pub fn mean_expected_error(&self) -> f64 {
        self.expected_error.iter().sum::<f64>() / self.expected_error.len() as f64
    }
}

/// Runs the system from `x0` and a Kalman filter (prior mean 0, covariance
/// `Π₀`) that measures the fixed set `x` at every step `0 … steps−1`.
pub fn simulate_kalman(sys: &LinearSystem, x: &SensorSet, x0: &[f64], noise: &NoiseDraws) -> Result<Simulation> {
    x.check_ground_set(sys.num_sensors())?;
    let n = sys.n();
    if x0.len() != n {
        return Err(Error::Dimension(format!("initial state has {} entries, expected {n}", x0.len())));
    }
    let steps = noise.w.len();
    let sensors: Vec<usize> = x.iter().collect();
    let h = if sensors.is_empty() {
        None
    } else {
        let rows: Vec<Vec<f64>> = sensors
            .iter()
            .flat_map(|&u| sys.sensors()[u].h.to_rows())
            .collect();
        Some(Matrix::from_rows(&rows)?)
    };
    let r = Matrix::block_diag(&sensors.iter().map(|&u| &sys.sensors()[u].r_v).collect::<Vec<_>>());

    let mut truth_k = x0.to_vec();
    let mut mean = vec![0.0; n];
    let mut cov = sys.pi0().clone();
    let mut sim = Simulation {
        truth: Vec::with_capacity(steps),
        estimates: Vec::with_capacity(steps),
        squared_error: Vec::with_capacity(steps),
        expected_error: Vec::with_capacity(steps),
    };
    for k in 0..steps {
        if let Some(h) = &h {
            let y: Vec<f64> = {
                let hx = h.mat_vec(&truth_k)?;
                let noise_k: Vec<f64> = sensors.iter().flat_map(|&u| noise.v[k][u].iter().copied()).collect();
                hx.iter().zip(noise_k).map(|(a, b)| a + b).collect()
            };
            let hp = h.matmul(&cov)?;
            let mut s = hp.matmul(&h.transpose())?;
            s.add_assign(&r)?;
            s.symmetrize_in_place();
            let chol = Cholesky::new(&s)?;
            // Kᵀ = S⁻¹ H P
            let k_t = chol.solve(&hp)?;
            let innovation: Vec<f64> = y.iter().zip(h.mat_vec(&mean)?).map(|(a, b)| a - b).collect();
            let innov = Matrix::new(innovation.len(), 1, innovation)?;
            let correction = k_t.tr_matmul(&innov)?;
            for i in 0..n {
                mean[i] += correction[(i, 0)];
            }
            cov.add_scaled(-1.0, &hp.tr_matmul(&k_t)?)?;
            cov.symmetrize_in_place();
        }
        let err: f64 = truth_k.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum();
        sim.truth.push(truth_k.clone());
        sim.estimates.push(mean.clone());
        sim.squared_error.push(err);
        sim.expected_error.push(cov.trace());

        // time update
        let mut next = sys.f().mat_vec(&truth_k)?;
        for (a, b) in next.iter_mut().zip(&noise.w[k]) {
            *a += b;
        }
        truth_k = next;
        mean = sys.f().mat_vec(&mean)?;
        cov = sys.f().congruence(&cov)?;
        cov.add_assign(sys.r_w())?;
    }
    Ok(sim)
}

// -------------------------------------------------------------------- basin

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinConfig {
    pub levels: usize,
    pub branching: usize,
    /// Greedy budget; defaults to one sensor per tree level.
    pub budget: Option<usize>,
    pub horizon: usize,
    pub params: BasinParams,
    pub spike: f64,
    pub probes: usize,
    pub seed: u64,
}

impl Default for BasinConfig {
    fn default() -> Self {
        BasinConfig {
            levels: 5,
            branching: 2,
            budget: None,
            horizon: 200,
            params: BasinParams::default(),
            spike: 10.0,
            probes: 7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetOutcome {
    /// Sensor indices (positions in the site list).
    pub sensors: Vec<usize>,
    pub nodes: Vec<usize>,
    /// Average MSE over the horizon, `(1/T) Σ_k trace P_k`; this is the
    /// quantity greedy minimizes.
    pub mse: f64,
    /// Realized `(1/T) Σ_k ‖x_k − x̂_k‖²` along the simulated spike trajectory.
    pub simulated_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinReport {
    pub schema: String,
    pub config: BasinConfig,
    pub nodes: usize,
    pub sites: Vec<usize>,
    pub spike_node: usize,
    pub probe_nodes: Vec<usize>,
    #[serde(rename = "F_norm")]
    pub f_norm: f64,
    pub greedy: SetOutcome,
    pub random: SetOutcome,
    pub full: SetOutcome,
    pub greedy_trajectory: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub set: String,
    pub probe_node: usize,
    pub truth: f64,
    pub estimate: f64,
}

/// Source of the longest river: the deepest leaf (lowest index on ties).
fn river_source(tree: &RiverTree) -> usize {
    tree.leaves()
        .into_iter()
        .max_by(|&a, &b| tree.depth(a).cmp(&tree.depth(b)).then(b.cmp(&a)))
        .expect("trees have a leaf")
}

/// Non-site nodes along the main stem from `source` to the ocean, thinned
/// to at most `count` evenly spaced probes.
fn probe_nodes(tree: &RiverTree, source: usize, count: usize) -> Vec<usize> {
    let mut stem = Vec::new();
    let mut node = Some(source);
    while let Some(i) = node {
        if !tree.sites().contains(&i) {
            stem.push(i);
        }
        node = tree.parent(i);
    }
    if stem.len() <= count || count == 0 {
        return stem;
    }
    (0..count).map(|j| stem[j * (stem.len() - 1) / (count - 1).max(1)]).collect()
}

/// Builds the basin, selects sensors greedily for the average MSE over the
/// horizon, and simulates greedy, stratified-random and full sensing with
/// common noise.
pub fn run_basin(cfg: &BasinConfig) -> Result<(BasinReport, Vec<TrajectoryRow>)> {
    if cfg.horizon == 0 {
        return Err(Error::Config("basin horizon must be >= 1".into()));
    }
    let tree = synth_river_tree(cfg.levels, cfg.branching, cfg.seed)?;
    let (sys, sites) = basin_system(&tree, &cfg.params)?;
    let strata = tree.site_strata();
    let budget = cfg.budget.unwrap_or(strata.len());
    let sel = SelectionConfig::new(Scalarization::Trace, Kind::Filtering, 0, cfg.horizon, &Weights::Average, budget);
    sel.validate_for(sys.num_sensors())?;
    let obj = Objective::new(&sys, &sel)?;
    let greedy = greedy_objective(&obj, budget, GreedyMode::Auto)?;
    let random = random_set(sys.num_sensors(), budget, &Baseline::Stratified(strata), cfg.seed)?;

    let source = river_source(&tree);
    let mut x0 = vec![0.0; sys.n()];
    x0[source] = cfg.spike;
    let noise = NoiseDraws::draw(&sys, cfg.horizon, cfg.seed ^ 0x5eed_ba51)?;
    let probes = probe_nodes(&tree, source, cfg.probes);

    let mut rows = Vec::new();
    let mut outcome = |label: &str, set: Vec<usize>| -> Result<SetOutcome> {
        let x = SensorSet::from_indices(&set)?;
        let sim = simulate_kalman(&sys, &x, &x0, &noise)?;
        for k in 0..cfg.horizon {
            for &node in &probes {
                rows.push(TrajectoryRow {
                    step: k,
                    set: label.into(),
                    probe_node: node,
                    truth: sim.truth[k][node],
                    estimate: sim.estimates[k][node],
                });
            }
        }
        Ok(SetOutcome {
            nodes: set.iter().map(|&u| sites[u]).collect(),
            sensors: set,
            mse: sim.mean_expected_error(),
            simulated_mse: sim.mean_squared_error(),
        })
    };
    let greedy_out = outcome("greedy", greedy.chosen.clone())?;
    let random_out = outcome("random", random)?;
    let full_out = outcome("full", (0..sys.num_sensors()).collect())?;

    let report = BasinReport {
        schema: SCHEMA_VERSION.into(),
        config: cfg.clone(),
        nodes: tree.len(),
        sites,
        spike_node: source,
        probe_nodes: probes,
        f_norm: crate::numerics::spectral_norm(sys.f())?,
        greedy: greedy_out,
        random: random_out,
        full: full_out,
        greedy_trajectory: greedy.objective_trajectory,
    };
    Ok((report, rows))
}

/// Objective values of explicit sets, for callers comparing selections.
pub fn evaluate_sets(sys: &LinearSystem, cfg: &SelectionConfig, sets: &[Vec<usize>]) -> Result<Vec<SelectionResult>> {
    let obj = Objective::new(sys, cfg)?;
    sets.iter().map(|s| trajectory(&obj, s)).collect()
}

pub fn objective_of(sys: &LinearSystem, cfg: &SelectionConfig, set: &[usize]) -> Result<f64> {
    Objective::new(sys, cfg)?.value(&SensorSet::from_indices(set)?)
}
