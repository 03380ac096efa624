//! Normalized scalar objectives
//!
//! ```text
//! f(X) = Σ_k θ_k h[Y_{m+k}(X)] − C_∅,    C_∅ = Σ_k θ_k h[Y_{m+k}(∅)]
//! ```
//!
//! with `h` the trace (MSE), the spectral norm (worst-case error) or the
//! log-determinant (confidence-ellipsoid volume). `f(∅) = 0` and `f ≤ 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::covariance::{
    check_smoothing_size, smoothing_step, whitened_outputs, HorizonModel, InformationModel, Kind,
    SMOOTHING_DIM_CAP,
};
use crate::error::{Error, Result};
use crate::model::{LinearSystem, SensorSet};
use crate::numerics::{lambda_max, lambda_min, Cholesky, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scalarization {
    Trace,
    Specnorm,
    Logdet,
}

impl FromStr for Scalarization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace" => Ok(Scalarization::Trace),
            "specnorm" => Ok(Scalarization::Specnorm),
            "logdet" => Ok(Scalarization::Logdet),
            other => Err(Error::Config(format!(
                "unknown scalarization {other:?} (expected trace|specnorm|logdet)"
            ))),
        }
    }
}

impl fmt::Display for Scalarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Scalarization::Trace => "trace",
            Scalarization::Specnorm => "specnorm",
            Scalarization::Logdet => "logdet",
        })
    }
}

/// `h(Y)` for a symmetric positive-definite `Y`.
pub fn scalarize(h: Scalarization, y: &Matrix) -> Result<f64> {
    match h {
        Scalarization::Trace => Ok(y.trace()),
        Scalarization::Specnorm => lambda_max(y),
        Scalarization::Logdet => Cholesky::new(y)
            .map(|c| c.log_det())
            .map_err(|e| Error::Domain(format!("logdet of a non-positive-definite matrix: {e}"))),
    }
}

/// `h(R⁻¹)` evaluated from the information matrix `R` without forming the inverse.
fn scalarize_information(h: Scalarization, info: &Matrix) -> Result<f64> {
    match h {
        Scalarization::Trace => Ok(Cholesky::new(info)?.trace_of_inverse()),
        Scalarization::Specnorm => {
            let low = lambda_min(info)?;
            if !(low > 0.0) {
                return Err(Error::Domain(format!("information matrix is singular (lambda_min = {low:e})")));
            }
            Ok(1.0 / low)
        }
        Scalarization::Logdet => Ok(-Cholesky::new(info)?.log_det()),
    }
}

/// Presets for the step weights `θ_0 … θ_{N−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    /// `θ_{N−1} = 1`, all others 0.
    Final,
    /// `θ_k = 1`.
    Average,
    /// `θ_k = ρ^{N−1−k}`.
    Geometric(f64),
    Custom(Vec<f64>),
}

impl Weights {
    pub fn theta(&self, horizon: usize) -> Vec<f64> {
        match self {
            Weights::Final => (0..horizon).map(|k| if k + 1 == horizon { 1.0 } else { 0.0 }).collect(),
            Weights::Average => vec![1.0; horizon],
            Weights::Geometric(rho) => (0..horizon).map(|k| rho.powi((horizon - 1 - k) as i32)).collect(),
            Weights::Custom(v) => v.clone(),
        }
    }
}

impl FromStr for Weights {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(Weights::Final),
            "average" => Ok(Weights::Average),
            _ => {
                let rho = s
                    .strip_prefix("geometric:")
                    .and_then(|r| r.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::Config(format!("unknown weights {s:?} (expected final|average|geometric:<rho>)"))
                    })?;
                if !(rho > 0.0) || !rho.is_finite() {
                    return Err(Error::Config(format!("geometric discount must be positive, got {rho}")));
                }
                Ok(Weights::Geometric(rho))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub scalarization: Scalarization,
    pub kind: Kind,
    /// First step `m`.
    pub start: usize,
    /// Horizon `N`.
    pub horizon: usize,
    pub theta: Vec<f64>,
    /// Budget `s`.
    pub budget: usize,
    /// Greedy steps `r`.
    pub steps: usize,
    pub smoothing_cap: usize,
}

impl SelectionConfig {
    /// Config with `r = s`.
    pub fn new(
        scalarization: Scalarization,
        kind: Kind,
        start: usize,
        horizon: usize,
        weights: &Weights,
        budget: usize,
    ) -> Self {
        SelectionConfig {
            scalarization,
            kind,
            start,
            horizon,
            theta: weights.theta(horizon),
            budget,
            steps: budget,
            smoothing_cap: SMOOTHING_DIM_CAP,
        }
    }

    /// Single-step (`m = 0`, `N = 1`) configuration.
    pub fn single_step(scalarization: Scalarization, kind: Kind, budget: usize) -> Self {
        Self::new(scalarization, kind, 0, 1, &Weights::Average, budget)
    }

    pub fn with_steps(mut self, r: usize) -> Self {
        self.steps = r;
        self
    }

    /// Weight checks only; the budget is checked against a ground set in
    /// [`SelectionConfig::validate_for`].
    pub fn validate_weights(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon N must be >= 1".into()));
        }
        if self.theta.len() != self.horizon {
            return Err(Error::Config(format!(
                "{} weights given for a horizon of {}",
                self.theta.len(),
                self.horizon
            )));
        }
        if self.theta.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::Config("weights must be finite and nonnegative".into()));
        }
        if !self.theta.iter().any(|&t| t > 0.0) {
            return Err(Error::Config("at least one weight must be positive".into()));
        }
        Ok(())
    }

    pub fn validate_for(&self, ground_size: usize) -> Result<()> {
        self.validate_weights()?;
        if self.budget == 0 || self.budget > ground_size {
            return Err(Error::Config(format!(
                "budget s = {} must lie in [1, {ground_size}]",
                self.budget
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("greedy steps r must be >= 1".into()));
        }
        Ok(())
    }

    /// `(k, θ_k)` for the steps with positive weight, `k` absolute.
    pub fn weighted_steps(&self) -> Vec<(usize, f64)> {
        self.theta
            .iter()
            .enumerate()
            .filter(|(_, &t)| t > 0.0)
            .map(|(k, &t)| (self.start + k, t))
            .collect()
    }
}

/// A set function over the ground set `0..ground_size()`.
pub trait SetFunction: Sync {
    fn ground_size(&self) -> usize;

    fn value(&self, x: &SensorSet) -> Result<f64>;

    /// `Δ_u f(X) = f(X) − f(X ∪ {u})`.
    fn gain(&self, x: &SensorSet, u: usize) -> Result<f64> {
        Ok(self.value(x)? - self.value(&x.with(u))?)
    }

    /// Every marginal gain, indexed `[mask · p + u]` for `u ∉ mask`
    /// (entries with `u ∈ mask` are NaN).
    fn gain_table(&self) -> Result<Vec<f64>> {
        let p = self.ground_size();
        let values = (0..1u64 << p)
            .map(|mask| self.value(&SensorSet::from_mask(mask)))
            .collect::<Result<Vec<_>>>()?;
        let mut table = vec![f64::NAN; values.len() * p];
        for (mask, &v) in values.iter().enumerate() {
            for u in 0..p {
                if mask >> u & 1 == 0 {
                    table[mask * p + u] = v - values[mask | 1 << u];
                }
            }
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub c_empty: f64,
}

#[derive(Debug, Clone)]
enum Backend {
    /// Set-independent `M_∅,k`: smoothing, filtering at step 0, or an
    /// explicit horizon.
    Fixed(Vec<(f64, InformationModel)>),
    /// Filtering with the Riccati recursion driven by `X` at every step.
    Riccati {
        f: Matrix,
        r_w: Matrix,
        pi0: Matrix,
        whitened: Vec<Matrix>,
        weights: Vec<(usize, f64)>,
    },
}

/// Evaluator for `f(X)` with `C_∅` cached.
#[derive(Debug, Clone)]
pub struct Objective {
    scalarization: Scalarization,
    ground_size: usize,
    backend: Backend,
    c_empty: f64,
}

impl Objective {
    pub fn new(sys: &LinearSystem, cfg: &SelectionConfig) -> Result<Self> {
        cfg.validate_weights()?;
        let weights = cfg.weighted_steps();
        let last = weights.last().map(|w| w.0).expect("validated");
        let backend = match cfg.kind {
            Kind::Smoothing => {
                check_smoothing_size(sys.n(), cfg.start, cfg.horizon, cfg.smoothing_cap)?;
                Backend::Fixed(
                    weights
                        .iter()
                        .map(|&(k, t)| Ok((t, smoothing_step(sys, k)?)))
                        .collect::<Result<_>>()?,
                )
            }
            Kind::Filtering if last == 0 => {
                let h = crate::covariance::filtering_horizon(sys, &SensorSet::empty(), 0, 1)?;
                Backend::Fixed(vec![(weights[0].1, h.steps()[0].clone())])
            }
            Kind::Filtering => Backend::Riccati {
                f: sys.f().clone(),
                r_w: sys.r_w().clone(),
                pi0: sys.pi0().clone(),
                whitened: whitened_outputs(sys)?,
                weights,
            },
        };
        Self::finish(cfg.scalarization, sys.num_sensors(), backend)
    }

    /// Objective over an explicit horizon whose `M_∅,k` do not depend on `X`.
    pub fn from_horizon(horizon: &HorizonModel, theta: &[f64], scalarization: Scalarization) -> Result<Self> {
        if theta.len() != horizon.len() {
            return Err(Error::Config(format!(
                "{} weights for a horizon of {}",
                theta.len(),
                horizon.len()
            )));
        }
        if theta.iter().any(|t| !(*t >= 0.0)) || !theta.iter().any(|&t| t > 0.0) {
            return Err(Error::Config("weights must be nonnegative with one positive".into()));
        }
        let steps = theta
            .iter()
            .zip(horizon.steps())
            .filter(|(t, _)| **t > 0.0)
            .map(|(&t, s)| (t, s.clone()))
            .collect();
        Self::finish(scalarization, horizon.num_sensors(), Backend::Fixed(steps))
    }

    fn finish(scalarization: Scalarization, ground_size: usize, backend: Backend) -> Result<Self> {
        let mut obj = Objective {
            scalarization,
            ground_size,
            backend,
            c_empty: 0.0,
        };
        obj.c_empty = obj.raw(&SensorSet::empty())?;
        Ok(obj)
    }

    pub fn scalarization(&self) -> Scalarization {
        self.scalarization
    }

    pub fn c_empty(&self) -> f64 {
        self.c_empty
    }

    pub fn evaluate(&self, x: &SensorSet) -> Result<ObjectiveValue> {
        Ok(ObjectiveValue {
            value: self.raw(x)? - self.c_empty,
            c_empty: self.c_empty,
        })
    }

    /// Weighted steps when `M_∅,k` is set-independent.
    pub(crate) fn fixed_steps(&self) -> Option<&[(f64, InformationModel)]> {
        match &self.backend {
            Backend::Fixed(s) => Some(s),
            Backend::Riccati { .. } => None,
        }
    }

    /// `Σ θ_k h[Y_{m+k}(X)]`
    fn raw(&self, x: &SensorSet) -> Result<f64> {
        x.check_ground_set(self.ground_size)?;
        let h = self.scalarization;
        let total = match &self.backend {
            Backend::Fixed(steps) => {
                let mut total = 0.0;
                for (theta, model) in steps {
                    total += theta * scalarize_information(h, &model.information(x)?)?;
                }
                total
            }
            Backend::Riccati {
                f,
                r_w,
                pi0,
                whitened,
                weights,
            } => {
                let stacked = stack_rows(whitened, x);
                let last = weights.last().map(|w| w.0).unwrap_or(0);
                let mut prior = pi0.clone();
                let mut next_weight = 0;
                let mut total = 0.0;
                for k in 0..=last {
                    let posterior = match &stacked {
                        Some(g) => measurement_update(&prior, g)?,
                        None => prior.clone(),
                    };
                    if weights[next_weight].0 == k {
                        total += weights[next_weight].1 * scalarize(h, &posterior)?;
                        next_weight += 1;
                    }
                    if k < last {
                        prior = f.congruence(&posterior)?;
                        prior.add_assign(r_w)?;
                    }
                }
                total
            }
        };
        if !total.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        Ok(total)
    }
}

fn stack_rows(whitened: &[Matrix], x: &SensorSet) -> Option<Matrix> {
    if x.is_empty() {
        return None;
    }
    let n = whitened[0].cols();
    let rows: Vec<f64> = x.iter().flat_map(|u| whitened[u].as_slice().iter().copied()).collect();
    Some(Matrix::new(rows.len() / n, n, rows).expect("consistent widths"))
}

/// Posterior covariance `P − P Gᵀ (I + G P Gᵀ)⁻¹ G P` for whitened outputs `G`.
pub(crate) fn measurement_update(prior: &Matrix, g: &Matrix) -> Result<Matrix> {
    let gp = g.matmul(prior)?;
    let mut s = gp.matmul(&g.transpose())?;
    s.symmetrize_in_place();
    for i in 0..s.rows() {
        s[(i, i)] += 1.0;
    }
    let k_t = Cholesky::new(&s)?.solve(&gp)?;
    let mut post = prior.clone();
    post.add_scaled(-1.0, &gp.tr_matmul(&k_t)?)?;
    post.symmetrize_in_place();
    Ok(post)
}

impl SetFunction for Objective {
    fn ground_size(&self) -> usize {
        self.ground_size
    }
    fn value(&self, x: &SensorSet) -> Result<f64> {
        Ok(self.evaluate(x)?.value)
    }
}

/// The modular control `−Σ_k θ_k trace(M_∅,k + Σ_{u∈X} M_u,k) + Σ_k θ_k trace(M_∅,k)`,
/// which reduces to `−Σ_{u∈X} c_u` with `c_u = Σ_k θ_k trace(M_u,k)`. Filtering uses
/// `M_u,k = V_u`, smoothing the lifted `Φ_kᵀ(I ⊗ V_u)Φ_k`.
#[derive(Debug, Clone)]
pub struct ModularObjective {
    contributions: Vec<f64>,
}

impl ModularObjective {
    pub fn new(sys: &LinearSystem, cfg: &SelectionConfig) -> Result<Self> {
        cfg.validate_weights()?;
        let p = sys.num_sensors();
        let mut contributions = vec![0.0; p];
        for (k, theta) in cfg.weighted_steps() {
            let traces: Vec<f64> = match cfg.kind {
                Kind::Filtering => crate::covariance::sensor_information(sys)?
                    .iter()
                    .map(Matrix::trace)
                    .collect(),
                Kind::Smoothing => {
                    check_smoothing_size(sys.n(), cfg.start, cfg.horizon, cfg.smoothing_cap)?;
                    smoothing_step(sys, k)?.m_sensors().iter().map(Matrix::trace).collect()
                }
            };
            for (c, t) in contributions.iter_mut().zip(traces) {
                *c += theta * t;
            }
        }
        Ok(ModularObjective { contributions })
    }

    pub fn from_contributions(contributions: Vec<f64>) -> Self {
        ModularObjective { contributions }
    }

    pub fn contributions(&self) -> &[f64] {
        &self.contributions
    }
}

impl SetFunction for ModularObjective {
    fn ground_size(&self) -> usize {
        self.contributions.len()
    }
    fn value(&self, x: &SensorSet) -> Result<f64> {
        x.check_ground_set(self.ground_size())?;
        Ok(-x.iter().map(|u| self.contributions[u]).sum::<f64>())
    }
    fn gain(&self, x: &SensorSet, u: usize) -> Result<f64> {
        x.check_ground_set(self.ground_size())?;
        Ok(self.contributions[u])
    }
    fn gain_table(&self) -> Result<Vec<f64>> {
        let p = self.ground_size();
        let mut table = vec![f64::NAN; (1usize << p) * p];
        for mask in 0..1usize << p {
            for u in (0..p).filter(|u| mask >> u & 1 == 0) {
                table[mask * p + u] = self.contributions[u];
            }
        }
        Ok(table)
    }
}

/// `f(X)` for one configuration, built from scratch.
pub fn objective(sys: &LinearSystem, cfg: &SelectionConfig, x: &SensorSet) -> Result<ObjectiveValue> {
    Objective::new(sys, cfg)?.evaluate(x)
}

pub fn modular_reference_objective(sys: &LinearSystem, cfg: &SelectionConfig, x: &SensorSet) -> Result<f64> {
    ModularObjective::new(sys, cfg)?.value(x)
}

/// `Y_{m+k}(X)` for every step of a configuration, by direct inversion of
/// the information form (reference path for tests and reports).
pub fn covariance_trajectory(sys: &LinearSystem, cfg: &SelectionConfig, x: &SensorSet) -> Result<Vec<Matrix>> {
    match cfg.kind {
        Kind::Filtering => {
            let h = crate::covariance::filtering_horizon(sys, x, cfg.start, cfg.horizon)?;
            h.steps().iter().map(|s| s.evaluate_y(x)).collect()
        }
        Kind::Smoothing => {
            let h = crate::covariance::smoothing_horizon_capped(sys, cfg.start, cfg.horizon, cfg.smoothing_cap)?;
            h.steps().iter().map(|s| s.evaluate_y(x)).collect()
        }
    }
}
