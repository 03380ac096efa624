//! Approximate-supermodularity certificates.
//!
//! A set function `f` is α-supermodular if `Δ_u f(A) ≥ α Δ_u f(B)` and
//! ε-supermodular if `Δ_u f(A) ≥ Δ_u f(B) − ε`, for all `A ⊆ B` and
//! `u ∉ B`. Greedy then guarantees
//!
//! ```text
//! f(G_r) ≤ (1 − e^{−αr/s}) f(X*)               (trace-type objectives)
//! f(G_r) ≤ (1 − e^{−r/s}) [f(X*) + s·ε]        (spectral norm)
//! ```
//!
//! The spectral bounds below are cheap certificates for α and ε; the
//! exhaustive oracles compute their exact values on small ground sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{filtering_horizon, powers, whitened_outputs, HorizonModel, InformationModel, Kind};
use crate::error::{Error, Result};
use crate::model::{LinearSystem, SensorSet};
use crate::numerics::{extreme_eigenvalues, lambda_max, Matrix};
use crate::objective::{Scalarization, SelectionConfig, SetFunction};

/// Largest ground set the exhaustive oracles enumerate.
pub const EXHAUSTIVE_GROUND_CAP: usize = 10;
/// Gains this small count as zero in the α ratio.
pub const ZERO_GAIN: f64 = 1e-12;

/// Spectral bounds from `λ_min(M_∅)` and `λ_max` of the information sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSpectra {
    pub step: usize,
    /// `λ_min(M_∅,k)`
    pub lambda_min_empty: f64,
    /// `λ_max(M_∅,k + Σ_{u∈O} M_u,k)`
    pub lambda_max_total: f64,
    /// `λ_max(Σ_{u∈O} M_u,k)`
    pub lambda_max_sensors: f64,
}

impl StepSpectra {
    pub fn alpha(&self) -> f64 {
        self.lambda_min_empty / self.lambda_max_total
    }
    pub fn epsilon(&self) -> f64 {
        self.lambda_max_sensors / (self.lambda_min_empty * self.lambda_min_empty)
    }
}

fn step_spectra(m_empty: &Matrix, sensor_sum: &Matrix, step: usize) -> Result<StepSpectra> {
    let (lambda_min_empty, _) = extreme_eigenvalues(m_empty)?;
    let lambda_max_total = lambda_max(&m_empty.add(sensor_sum)?)?;
    let lambda_max_sensors = lambda_max(sensor_sum)?.max(0.0);
    Ok(StepSpectra {
        step,
        lambda_min_empty,
        lambda_max_total,
        lambda_max_sensors,
    })
}

fn horizon_spectra(horizon: &HorizonModel) -> Result<Vec<StepSpectra>> {
    horizon
        .steps()
        .iter()
        .map(|s| step_spectra(s.m_empty(), &s.total_sensor_information(), s.step()))
        .collect()
}

fn check_theta(horizon: &HorizonModel, theta: &[f64]) -> Result<()> {
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
    Ok(())
}

fn min_over_weighted(values: &[f64], theta: &[f64]) -> f64 {
    values
        .iter()
        .zip(theta)
        .filter(|(_, &t)| t > 0.0)
        .fold(f64::INFINITY, |m, (&v, _)| m.min(v))
}

/// Per-step `λ_min(M_∅,k) / λ_max(M_∅,k + Σ_u M_u,k)` for every step, and
/// their minimum over the steps with `θ_k > 0`.
pub fn alpha_bound_trace(horizon: &HorizonModel, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_theta(horizon, theta)?;
    let per_step: Vec<f64> = horizon_spectra(horizon)?.iter().map(StepSpectra::alpha).collect();
    Ok((min_over_weighted(&per_step, theta), per_step))
}

/// `Δ = (λ_max[Y(∅)] − λ_min[Y(O)]) / λ_max[Y(∅)]` at one step.
pub fn numerical_range_delta(step: &InformationModel) -> Result<f64> {
    let (_, y_empty_max) = extreme_eigenvalues(&step.evaluate_y(&SensorSet::empty())?)?;
    let (y_full_min, _) = extreme_eigenvalues(&step.evaluate_y(&SensorSet::full(step.num_sensors()))?)?;
    Ok((y_empty_max - y_full_min) / y_empty_max)
}

/// `min_k (1 − Δ_k)` and `max_k Δ_k` over the steps with `θ_k > 0`.
pub fn alpha_bound_numrange(horizon: &HorizonModel, theta: &[f64]) -> Result<(f64, f64)> {
    check_theta(horizon, theta)?;
    let mut alpha = f64::INFINITY;
    let mut delta = f64::NEG_INFINITY;
    for (step, &t) in horizon.steps().iter().zip(theta) {
        if t > 0.0 {
            let d = numerical_range_delta(step)?;
            alpha = alpha.min(1.0 - d);
            delta = delta.max(d);
        }
    }
    Ok((alpha, delta))
}

/// Per-step `λ_max(Σ_u M_u,k) / λ_min(M_∅,k)²` and `Σ_k θ_k ε_k`.
pub fn epsilon_bound_specnorm(horizon: &HorizonModel, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_theta(horizon, theta)?;
    let per_step: Vec<f64> = horizon_spectra(horizon)?.iter().map(StepSpectra::epsilon).collect();
    let eps = per_step.iter().zip(theta).map(|(e, t)| e * t).sum();
    Ok((eps, per_step))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guarantees {
    /// `1 − e^{−αr/s}`
    pub multiplicative: f64,
    /// `(1 − e^{−r/s})(f(X*) + s·ε)`
    pub additive_value: f64,
}

pub fn guarantees(alpha: f64, epsilon: f64, f_opt: f64, r: usize, s: usize) -> Guarantees {
    let ratio = r as f64 / s as f64;
    Guarantees {
        multiplicative: 1.0 - (-alpha * ratio).exp(),
        additive_value: (1.0 - (-ratio).exp()) * (f_opt + s as f64 * epsilon),
    }
}

/// Exact constants of a set function on a small ground set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveConstants {
    /// Largest α with `Δ_u f(A) ≥ α Δ_u f(B)`; 0 if `f` is not monotone.
    pub alpha: f64,
    /// `max(0, ε_raw)`
    pub epsilon: f64,
    /// `max Δ_u f(B) − Δ_u f(A)` over strict `A ⊂ B` (0 when there are none).
    pub epsilon_raw: f64,
    pub monotone: bool,
}

#[derive(Clone, Copy)]
struct Partial {
    alpha: f64,
    eps: f64,
    violation: bool,
}

impl Partial {
    fn merge(self, o: Partial) -> Partial {
        Partial {
            alpha: self.alpha.min(o.alpha),
            eps: self.eps.max(o.eps),
            violation: self.violation || o.violation,
        }
    }
}

/// Enumerates every `(A ⊆ B, u ∉ B)` triple over all `2^|O|` sets `B`.
pub fn exhaustive_constants<F: SetFunction + ?Sized>(f: &F) -> Result<ExhaustiveConstants> {
    let p = f.ground_size();
    if p > EXHAUSTIVE_GROUND_CAP {
        return Err(Error::Size {
            what: "exhaustive certificate ground set |O|",
            value: p as u128,
            cap: EXHAUSTIVE_GROUND_CAP as u128,
            hint: "; use the spectral bounds instead",
        });
    }
    let table = f.gain_table()?;
    let gain = |mask: usize, u: usize| table[mask * p + u];
    let full = (1usize << p) - 1;

    let start = Partial {
        alpha: 1.0,
        eps: f64::NEG_INFINITY,
        violation: false,
    };
    let total = (0..=full)
        .into_par_iter()
        .map(|b| {
            let mut acc = start;
            for u in (0..p).filter(|u| b >> u & 1 == 0) {
                let gb = gain(b, u);
                if gb < -ZERO_GAIN {
                    acc.violation = true;
                }
                // all submasks A of B, including A = B and A = ∅
                let mut a = b;
                loop {
                    let ga = gain(a, u);
                    if ga < -ZERO_GAIN {
                        acc.violation = true;
                    }
                    if gb.abs() > ZERO_GAIN {
                        acc.alpha = acc.alpha.min(ga / gb);
                    }
                    if a != b {
                        acc.eps = acc.eps.max(gb - ga);
                    }
                    if a == 0 {
                        break;
                    }
                    a = (a - 1) & b;
                }
            }
            acc
        })
        .reduce(|| start, Partial::merge);

    let epsilon_raw = if total.eps.is_finite() { total.eps } else { 0.0 };
    Ok(ExhaustiveConstants {
        alpha: if total.violation { 0.0 } else { total.alpha.max(0.0) },
        epsilon: epsilon_raw.max(0.0),
        epsilon_raw,
        monotone: !total.violation,
    })
}

pub fn alpha_exhaustive<F: SetFunction + ?Sized>(f: &F) -> Result<f64> {
    Ok(exhaustive_constants(f)?.alpha)
}

pub fn epsilon_exhaustive<F: SetFunction + ?Sized>(f: &F) -> Result<f64> {
    Ok(exhaustive_constants(f)?.epsilon)
}

/// Sensing schedule driving the a priori covariances in filtering certificates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorSchedule {
    /// No sensors: the largest priors, hence the most conservative bounds.
    #[default]
    Empty,
    /// All sensors.
    Full,
    /// A given set, e.g. the greedy selection.
    Fixed(SensorSet),
}

impl PriorSchedule {
    fn set(&self, p: usize) -> SensorSet {
        match self {
            PriorSchedule::Empty => SensorSet::empty(),
            PriorSchedule::Full => SensorSet::full(p),
            PriorSchedule::Fixed(x) => x.clone(),
        }
    }

    fn label(&self) -> String {
        match self {
            PriorSchedule::Empty => "empty".into(),
            PriorSchedule::Full => "full".into(),
            PriorSchedule::Fixed(x) => format!("fixed:{:?}", x.as_slice()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub kind: Kind,
    pub scalarization: Scalarization,
    /// Steps with `θ_k > 0`, absolute indices.
    pub steps: Vec<usize>,
    pub theta: Vec<f64>,
    pub alpha_bound: f64,
    pub epsilon_bound: f64,
    pub per_step_alpha: Vec<f64>,
    pub per_step_epsilon: Vec<f64>,
    pub numerical_range_alpha: f64,
    pub numerical_range_delta: f64,
    pub r: usize,
    pub s: usize,
    /// `1 − e^{−α·r/s}`
    pub guarantee_multiplicative: f64,
    /// `1 − e^{−r/s}`
    pub guarantee_additive_factor: f64,
    /// `s·ε`
    pub guarantee_additive_slack: f64,
    pub spectral_details: Vec<StepSpectra>,
    /// `max(λ_max Π₀, λ_max R_w)` for smoothing.
    pub ell_max: Option<f64>,
    pub prior_schedule: Option<String>,
    pub note: Option<String>,
}

impl CertificateReport {
    fn assemble(
        kind: Kind,
        cfg: &SelectionConfig,
        spectra: Vec<StepSpectra>,
        theta: Vec<f64>,
        numrange: (f64, f64),
    ) -> Self {
        let (mut per_step_alpha, mut per_step_epsilon): (Vec<f64>, Vec<f64>) =
            spectra.iter().map(|s| (s.alpha(), s.epsilon())).unzip();
        let mut note = None;
        if cfg.scalarization == Scalarization::Logdet {
            per_step_alpha.iter_mut().for_each(|a| *a = 1.0);
            per_step_epsilon.iter_mut().for_each(|e| *e = 0.0);
            note = Some("logdet is supermodular: alpha = 1, epsilon = 0 by convention".into());
        }
        let alpha_bound = per_step_alpha.iter().copied().fold(f64::INFINITY, f64::min);
        let epsilon_bound: f64 = per_step_epsilon.iter().zip(&theta).map(|(e, t)| e * t).sum();
        let (r, s) = (cfg.steps, cfg.budget.max(1));
        let g = guarantees(alpha_bound, epsilon_bound, 0.0, r, s);
        CertificateReport {
            kind,
            scalarization: cfg.scalarization,
            steps: spectra.iter().map(|s| s.step).collect(),
            theta,
            alpha_bound,
            epsilon_bound,
            per_step_alpha,
            per_step_epsilon,
            numerical_range_alpha: numrange.0,
            numerical_range_delta: numrange.1,
            r,
            s,
            guarantee_multiplicative: g.multiplicative,
            guarantee_additive_factor: 1.0 - (-(r as f64) / s as f64).exp(),
            guarantee_additive_slack: s as f64 * epsilon_bound,
            spectral_details: spectra,
            ell_max: None,
            prior_schedule: None,
            note,
        }
    }
}

fn weighted(cfg: &SelectionConfig) -> Result<(Vec<usize>, Vec<f64>)> {
    cfg.validate_weights()?;
    Ok(cfg.weighted_steps().into_iter().unzip())
}

/// Certificates for filtering, `M_∅,k = P_{k|k−1}⁻¹` and `M_u = V_u`, with
/// the priors computed under `schedule`.
pub fn filtering_certificates(sys: &LinearSystem, cfg: &SelectionConfig, schedule: &PriorSchedule) -> Result<CertificateReport> {
    let (steps, theta) = weighted(cfg)?;
    let set = schedule.set(sys.num_sensors());
    set.check_ground_set(sys.num_sensors())?;
    let horizon = filtering_horizon(sys, &set, cfg.start, cfg.horizon)?;
    let mut spectra = Vec::with_capacity(steps.len());
    let mut numrange = (f64::INFINITY, f64::NEG_INFINITY);
    for &k in &steps {
        let model = &horizon.steps()[k - cfg.start];
        spectra.push(step_spectra(model.m_empty(), &model.total_sensor_information(), k)?);
        let d = numerical_range_delta(model)?;
        numrange = (numrange.0.min(1.0 - d), numrange.1.max(d));
    }
    let mut report = CertificateReport::assemble(Kind::Filtering, cfg, spectra, theta, numrange);
    report.prior_schedule = Some(schedule.label());
    Ok(report)
}

/// `Σ_u M_u,k = Φ_kᵀ (I ⊗ Σ_u V_u) Φ_k`, built from the stacked whitened outputs.
pub fn smoothing_sensor_sum(sys: &LinearSystem, k: usize) -> Result<Matrix> {
    let n = sys.n();
    let whitened = whitened_outputs(sys)?;
    let rows: Vec<f64> = whitened.iter().flat_map(|g| g.as_slice().iter().copied()).collect();
    let h = Matrix::new(rows.len() / n, n, rows)?;
    let q = h.rows();
    let pw = powers(sys.f(), k)?;
    let hf: Vec<Matrix> = pw.iter().map(|p| h.matmul(p)).collect::<Result<_>>()?;
    let d = (k + 1) * n;
    let mut g = Matrix::zeros((k + 1) * q, d);
    for i in 0..=k {
        for j in 0..=i {
            g.set_block(i * q, j * n, &hf[i - j]);
        }
    }
    let mut sum = g.tr_matmul(&g)?;
    sum.symmetrize_in_place();
    Ok(sum)
}

/// Certificates for smoothing with `ℓ_max = max(λ_max Π₀, λ_max R_w)`:
/// `α̃_k = ℓ_max⁻¹ / λ_max(C⁻¹ + Σ_u M_u,k)` and `ε̃_k = λ_max(Σ_u M_u,k) ℓ_max²`.
pub fn smoothing_certificates(sys: &LinearSystem, cfg: &SelectionConfig) -> Result<CertificateReport> {
    let (steps, theta) = weighted(cfg)?;
    crate::covariance::check_smoothing_size(sys.n(), cfg.start, cfg.horizon, cfg.smoothing_cap)?;
    let ell_max = lambda_max(sys.pi0())?.max(lambda_max(sys.r_w())?);
    let n = sys.n();
    let pi0_inv = crate::numerics::psd_inverse(sys.pi0())?;
    let rw_inv = crate::numerics::psd_inverse(sys.r_w())?;

    let mut spectra = Vec::with_capacity(steps.len());
    let mut alpha_nr = f64::INFINITY;
    let mut delta_nr = f64::NEG_INFINITY;
    for &k in &steps {
        let sum = smoothing_sensor_sum(sys, k)?;
        let mut info = sum.clone();
        for i in 0..n {
            for j in 0..n {
                info[(i, j)] += pi0_inv[(i, j)];
            }
        }
        for b in 1..=k {
            for i in 0..n {
                for j in 0..n {
                    info[(b * n + i, b * n + j)] += rw_inv[(i, j)];
                }
            }
        }
        let info_max = lambda_max(&info)?;
        let sensors_max = lambda_max(&sum)?.max(0.0);
        spectra.push(StepSpectra {
            step: k,
            lambda_min_empty: 1.0 / ell_max,
            lambda_max_total: info_max,
            lambda_max_sensors: sensors_max,
        });
        // numerical range: λ_max Y(∅) = ℓ_max, λ_min Y(O) = 1/λ_max(info)
        let y_full_min = 1.0 / info_max;
        let d = (ell_max - y_full_min) / ell_max;
        alpha_nr = alpha_nr.min(1.0 - d);
        delta_nr = delta_nr.max(d);
    }
    let mut report = CertificateReport::assemble(Kind::Smoothing, cfg, spectra, theta, (alpha_nr, delta_nr));
    report.ell_max = Some(ell_max);
    Ok(report)
}

/// Certificates for the configuration's kind (filtering uses `schedule`).
pub fn certify(sys: &LinearSystem, cfg: &SelectionConfig, schedule: &PriorSchedule) -> Result<CertificateReport> {
    match cfg.kind {
        Kind::Filtering => filtering_certificates(sys, cfg, schedule),
        Kind::Smoothing => smoothing_certificates(sys, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_system, OutputMode, RandomSystemSpec, Sensor};
    use crate::objective::{ModularObjective, Objective, Weights};
    use crate::numerics::sym_eigvals;

    fn one_step(m_empty: Matrix, sensors: Vec<Matrix>) -> HorizonModel {
        HorizonModel::new(vec![InformationModel::new(m_empty, sensors, 0, Kind::Filtering).unwrap()], 0).unwrap()
    }

    #[test]
    fn alpha_trace_examples() {
        let h = one_step(
            Matrix::identity(2),
            vec![Matrix::from_diag(&[4.0, 0.0]), Matrix::from_diag(&[0.0, 4.0])],
        );
        let (a, per) = alpha_bound_trace(&h, &[1.0]).unwrap();
        assert!((a - 0.2).abs() < 1e-15);
        assert_eq!(per.len(), 1);

        let m0 = Matrix::from_diag(&[2.0, 8.0]);
        let h = one_step(m0, vec![Matrix::zeros(2, 2)]);
        assert!((alpha_bound_trace(&h, &[1.0]).unwrap().0 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn numrange_examples() {
        let h = one_step(Matrix::scaled_identity(3, 2.0), vec![Matrix::zeros(3, 3); 2]);
        let (a, d) = alpha_bound_numrange(&h, &[1.0]).unwrap();
        assert!(d.abs() < 1e-15 && (a - 1.0).abs() < 1e-15);

        let h = one_step(Matrix::identity(1), vec![Matrix::from_diag(&[3.0])]);
        let (a, d) = alpha_bound_numrange(&h, &[1.0]).unwrap();
        assert!((d - 0.75).abs() < 1e-15 && (a - 0.25).abs() < 1e-15);
    }

    #[test]
    fn epsilon_examples() {
        let h = one_step(
            Matrix::scaled_identity(2, 2.0),
            vec![Matrix::from_diag(&[8.0, 1.0]), Matrix::zeros(2, 2)],
        );
        assert!((epsilon_bound_specnorm(&h, &[1.0]).unwrap().0 - 2.0).abs() < 1e-15);
        let h = one_step(Matrix::identity(2), vec![Matrix::zeros(2, 2)]);
        assert_eq!(epsilon_bound_specnorm(&h, &[1.0]).unwrap().0, 0.0);
    }

    #[test]
    fn guarantee_constants() {
        let target = 1.0 - (-1.0f64).exp();
        assert!((guarantees(1.0, 0.0, 0.0, 4, 4).multiplicative - 0.632_120_558_828_557_7).abs() < 1e-12);
        assert!((guarantees(1.0 / 3.0, 0.0, 0.0, 12, 4).multiplicative - target).abs() < 1e-12);
        assert_eq!(guarantees(0.0, 0.0, 0.0, 3, 3).multiplicative, 0.0);
        let g = guarantees(1.0, 0.5, -2.0, 2, 2);
        assert!((g.additive_value - target * (-2.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn modular_constants_are_exact() {
        let m = ModularObjective::from_contributions(vec![0.1, 0.7, 3.0, 0.0, 1.5]);
        let c = exhaustive_constants(&m).unwrap();
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.epsilon, 0.0);
        assert_eq!(c.epsilon_raw, 0.0);
    }

    #[test]
    fn exhaustive_cap() {
        let m = ModularObjective::from_contributions(vec![1.0; 11]);
        assert!(matches!(exhaustive_constants(&m), Err(Error::Size { .. })));
    }

    #[test]
    fn bounds_are_valid_on_random_models() {
        for seed in 0..10 {
            let sys = random_system(&RandomSystemSpec { n: 4, p: 6, ..Default::default() }, seed).unwrap();
            let h = filtering_horizon(&sys, &SensorSet::empty(), 0, 1).unwrap();
            let (a, _) = alpha_bound_trace(&h, &[1.0]).unwrap();
            let (a_nr, _) = alpha_bound_numrange(&h, &[1.0]).unwrap();
            assert!((a - a_nr).abs() < 1e-10);
            let (e, _) = epsilon_bound_specnorm(&h, &[1.0]).unwrap();
            let tr = Objective::from_horizon(&h, &[1.0], Scalarization::Trace).unwrap();
            let sp = Objective::from_horizon(&h, &[1.0], Scalarization::Specnorm).unwrap();
            assert!(alpha_exhaustive(&tr).unwrap() >= a - 1e-9);
            assert!(epsilon_exhaustive(&sp).unwrap() <= e + 1e-9);
            let ld = Objective::from_horizon(&h, &[1.0], Scalarization::Logdet).unwrap();
            let c = exhaustive_constants(&ld).unwrap();
            assert!(c.alpha >= 1.0 - 1e-9 && c.epsilon <= 1e-9);
        }
    }

    #[test]
    fn filtering_scalar_and_simplified_regime() {
        let sys = LinearSystem::new(
            Matrix::from_diag(&[0.5]),
            Matrix::identity(1),
            Matrix::identity(1),
            vec![Sensor::scalar(&[1.0], 1.0 / 3.0)],
        )
        .unwrap();
        let cfg = SelectionConfig::single_step(Scalarization::Trace, Kind::Filtering, 1);
        let rep = filtering_certificates(&sys, &cfg, &PriorSchedule::Empty).unwrap();
        assert!((rep.alpha_bound - 0.25).abs() < 1e-15);

        let (sw, sv) = (0.3, 0.05);
        let n = 5;
        let spec = RandomSystemSpec {
            n,
            p: n,
            sigma_w2: sw,
            sigma_v2_range: (sv, sv),
            output_mode: OutputMode::Canonical,
            pi0_scale: sw,
            ..Default::default()
        };
        let sys = random_system(&spec, 4).unwrap();
        let rep = filtering_certificates(&sys, &cfg, &PriorSchedule::Empty).unwrap();
        assert!((rep.alpha_bound - 1.0 / (1.0 + sw / sv)).abs() < 1e-12);
        assert!((rep.guarantee_multiplicative - (1.0 - (-rep.alpha_bound).exp())).abs() < 1e-15);
    }

    #[test]
    fn smoothing_simplified_regime() {
        let (sw, sv) = (0.2, 0.7);
        let n = 3;
        let spec = RandomSystemSpec {
            n,
            p: n,
            target_norm: 0.8,
            sigma_w2: sw,
            sigma_v2_range: (sv, sv),
            output_mode: OutputMode::Canonical,
            pi0_scale: sw,
        };
        let sys = random_system(&spec, 9).unwrap();
        let cfg = SelectionConfig::new(Scalarization::Specnorm, Kind::Smoothing, 0, 4, &Weights::Average, 2);
        let rep = smoothing_certificates(&sys, &cfg).unwrap();
        for (i, k) in rep.steps.iter().enumerate() {
            let phi = crate::covariance::smoothing_phi(sys.f(), *k).unwrap();
            let lam = *sym_eigvals(&phi.tr_matmul(&phi).unwrap()).unwrap().last().unwrap();
            let alpha = 1.0 / (1.0 + sw / sv * lam);
            let eps = sw * sw / sv * lam;
            assert!((rep.per_step_alpha[i] - alpha).abs() < 1e-12, "{} vs {alpha}", rep.per_step_alpha[i]);
            assert!((rep.per_step_epsilon[i] - eps).abs() < 1e-12 * eps.max(1.0));
        }
        assert_eq!(rep.ell_max, Some(sw));
    }

    #[test]
    fn smoothing_single_block() {
        let sys = LinearSystem::new(
            Matrix::identity(2),
            Matrix::identity(2),
            Matrix::identity(2),
            vec![Sensor {
                h: Matrix::identity(2),
                r_v: Matrix::identity(2),
            }],
        )
        .unwrap();
        let cfg = SelectionConfig::single_step(Scalarization::Trace, Kind::Smoothing, 1);
        let rep = smoothing_certificates(&sys, &cfg).unwrap();
        assert!((rep.alpha_bound - 0.5).abs() < 1e-15);
    }

    #[test]
    fn smoothing_report_matches_generic_bounds() {
        let sys = random_system(&RandomSystemSpec { n: 3, p: 4, ..Default::default() }, 1).unwrap();
        let cfg = SelectionConfig::new(Scalarization::Trace, Kind::Smoothing, 1, 3, &Weights::Average, 2);
        let rep = smoothing_certificates(&sys, &cfg).unwrap();
        let h = crate::covariance::smoothing_horizon(&sys, 1, 3).unwrap();
        let (a, per_a) = alpha_bound_trace(&h, &cfg.theta).unwrap();
        let (e, per_e) = epsilon_bound_specnorm(&h, &cfg.theta).unwrap();
        assert!((rep.alpha_bound - a).abs() < 1e-9 * a);
        assert!((rep.epsilon_bound - e).abs() < 1e-9 * e);
        for i in 0..3 {
            assert!((rep.per_step_alpha[i] - per_a[i]).abs() < 1e-9 * per_a[i]);
            assert!((rep.per_step_epsilon[i] - per_e[i]).abs() < 1e-9 * per_e[i]);
        }
        assert!((rep.numerical_range_alpha - a).abs() < 1e-10);
    }

    #[test]
    fn report_aggregation_rules() {
        let sys = random_system(&RandomSystemSpec { n: 4, p: 5, ..Default::default() }, 2).unwrap();
        let cfg = SelectionConfig::new(Scalarization::Specnorm, Kind::Filtering, 1, 4, &Weights::Geometric(0.5), 2);
        let rep = filtering_certificates(&sys, &cfg, &PriorSchedule::Empty).unwrap();
        let min = rep.per_step_alpha.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(rep.alpha_bound, min);
        let sum: f64 = rep.per_step_epsilon.iter().zip(&rep.theta).map(|(e, t)| e * t).sum();
        assert_eq!(rep.epsilon_bound, sum);
        assert!((rep.numerical_range_alpha - rep.alpha_bound).abs() < 1e-10);
        assert!(rep.alpha_bound >= 0.0 && rep.alpha_bound <= 1.0 + 1e-12);
    }
}
