//! Information-form covariance set functions
//!
//! ```text
//! Y_k(X) = (M_∅,k + Σ_{u∈X} M_u,k)⁻¹
//! ```
//!
//! for the filtering error covariance (`M_∅,k = P_{k|k−1}⁻¹`, `M_u,k = V_u`)
//! and for the batch smoothing error covariance of the whole trajectory
//! `x_0 … x_k` (`M_∅,k = blkdiag(Π₀, R_w, …, R_w)⁻¹`, `M_u,k = Φ_kᵀ(I ⊗ V_u)Φ_k`).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LinearSystem, SensorSet};
use crate::numerics::{lambda_max, lambda_min, psd_inverse, Cholesky, Matrix};

/// Largest smoothing lift `(m + N)·n` built by default.
pub const SMOOTHING_DIM_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Filtering,
    Smoothing,
}

impl FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "filtering" => Ok(Kind::Filtering),
            "smoothing" => Ok(Kind::Smoothing),
            other => Err(Error::Config(format!("unknown kind {other:?} (expected filtering|smoothing)"))),
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Kind::Filtering => "filtering",
            Kind::Smoothing => "smoothing",
        })
    }
}

/// The pair `(M_∅,k, {M_u,k})` at one time step.
///
/// Optionally carries factors `G_u` with `M_u = G_uᵀ G_u`; when present,
/// incremental gains only invert `rank(M_u)`-sized matrices.
#[derive(Debug, Clone)]
pub struct InformationModel {
    m_empty: Matrix,
    m_sensors: Arc<Vec<Matrix>>,
    factors: Option<Arc<Vec<Matrix>>>,
    step: usize,
    kind: Kind,
}

impl InformationModel {
    pub fn new(m_empty: Matrix, m_sensors: Vec<Matrix>, step: usize, kind: Kind) -> Result<Self> {
        let model = InformationModel {
            m_empty,
            m_sensors: Arc::new(m_sensors),
            factors: None,
            step,
            kind,
        };
        model.validate()?;
        Ok(model)
    }

    fn with_factors(
        m_empty: Matrix,
        m_sensors: Arc<Vec<Matrix>>,
        factors: Arc<Vec<Matrix>>,
        step: usize,
        kind: Kind,
    ) -> Self {
        InformationModel {
            m_empty,
            m_sensors,
            factors: Some(factors),
            step,
            kind,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.m_empty.rows();
        if !self.m_empty.is_square() {
            return Err(Error::Dimension("M_empty must be square".into()));
        }
        Cholesky::new(&self.m_empty)?;
        for (u, m) in self.m_sensors.iter().enumerate() {
            if m.rows() != d || m.cols() != d {
                return Err(Error::Dimension(format!(
                    "M_{u} is {}x{}, expected {d}x{d}",
                    m.rows(),
                    m.cols()
                )));
            }
            let top = lambda_max(m)?.abs();
            let low = lambda_min(m)?;
            if low < -1e-10 * top.max(f64::MIN_POSITIVE) {
                return Err(Error::Precondition(format!("M_{u} is not PSD (lambda_min = {low:e})")));
            }
        }
        Ok(())
    }

    pub fn m_empty(&self) -> &Matrix {
        &self.m_empty
    }
    pub fn m_sensors(&self) -> &[Matrix] {
        &self.m_sensors
    }
    /// Factor `G_u` with `M_u = G_uᵀ G_u`, if known.
    pub fn factor(&self, u: usize) -> Option<&Matrix> {
        self.factors.as_ref().map(|f| &f[u])
    }
    pub fn step(&self) -> usize {
        self.step
    }
    pub fn kind(&self) -> Kind {
        self.kind
    }
    pub fn dim(&self) -> usize {
        self.m_empty.rows()
    }
    pub fn num_sensors(&self) -> usize {
        self.m_sensors.len()
    }

    /// `M_∅ + Σ_{u∈X} M_u`
    pub fn information(&self, x: &SensorSet) -> Result<Matrix> {
        x.check_ground_set(self.num_sensors())?;
        let mut info = self.m_empty.clone();
        for u in x.iter() {
            info.add_assign(&self.m_sensors[u])?;
        }
        Ok(info)
    }

    /// `Σ_{u∈O} M_u`
    pub fn total_sensor_information(&self) -> Matrix {
        let d = self.dim();
        let mut sum = Matrix::zeros(d, d);
        for m in self.m_sensors.iter() {
            sum.add_assign(m).expect("validated dimensions");
        }
        sum
    }

    /// `Y(X)`
    pub fn evaluate_y(&self, x: &SensorSet) -> Result<Matrix> {
        psd_inverse(&self.information(x)?)
    }
}

/// `Y(X) − Y(X ∪ {u}) = trace[Y(X) M_u Y(X ∪ {u})]` computed from `Y(X)` alone,
/// using `Y(X ∪ {u}) = (I + Y(X) M_u)⁻¹ Y(X)`.
pub fn incremental_trace_gain(model: &InformationModel, x: &SensorSet, u: usize, y_x: &Matrix) -> Result<f64> {
    if u >= model.num_sensors() {
        return Err(Error::Precondition(format!(
            "sensor {u} outside ground set of size {}",
            model.num_sensors()
        )));
    }
    if x.contains(u) {
        return Err(Error::Precondition(format!("sensor {u} is already in the set")));
    }
    if let Some(g) = model.factor(u) {
        return Ok(factored_trace_gain(g, y_x)?.0);
    }
    let m_u = &model.m_sensors()[u];
    let mut lhs = y_x.matmul(m_u)?;
    for i in 0..lhs.rows() {
        lhs[(i, i)] += 1.0;
    }
    let y_next = crate::numerics::solve(&lhs, y_x)?;
    let gain = y_x.matmul(m_u)?.matmul(&y_next)?.trace();
    if !gain.is_finite() {
        return Err(Error::NonFinite("incremental_trace_gain"));
    }
    Ok(gain)
}

/// With `M_u = GᵀG`: `W = G·Y`, `S = I + W·Gᵀ`, gain `= trace(S⁻¹ W Wᵀ)`.
/// Also returns `(S⁻¹, W)` so callers can form `Y − Wᵀ S⁻¹ W`.
pub(crate) fn factored_trace_gain(g: &Matrix, y: &Matrix) -> Result<(f64, Matrix, Matrix)> {
    let w = g.matmul(y)?;
    let mut s = w.matmul(&g.transpose())?;
    s.symmetrize_in_place();
    for i in 0..s.rows() {
        s[(i, i)] += 1.0;
    }
    let s_inv = psd_inverse(&s)?;
    let wwt = w.matmul(&w.transpose())?;
    let gain: f64 = (0..s.rows())
        .map(|i| (0..s.rows()).map(|j| s_inv[(i, j)] * wwt[(j, i)]).sum::<f64>())
        .sum();
    if !gain.is_finite() {
        return Err(Error::NonFinite("incremental_trace_gain"));
    }
    Ok((gain, s_inv, w))
}

/// `Y − Wᵀ S⁻¹ W`: the covariance after adding a factored sensor.
pub(crate) fn factored_update(y: &Matrix, s_inv: &Matrix, w: &Matrix) -> Result<Matrix> {
    let correction = s_inv.matmul(w)?;
    let mut next = y.clone();
    next.add_scaled(-1.0, &w.tr_matmul(&correction)?)?;
    next.symmetrize_in_place();
    Ok(next)
}

/// Information models for consecutive steps `m … m+N−1`.
#[derive(Debug, Clone)]
pub struct HorizonModel {
    steps: Vec<InformationModel>,
    start: usize,
}

impl HorizonModel {
    pub fn new(steps: Vec<InformationModel>, start: usize) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Config("horizon must contain at least one step".into()));
        }
        let kind = steps[0].kind();
        for (k, s) in steps.iter().enumerate() {
            if s.kind() != kind || s.step() != start + k {
                return Err(Error::Precondition(
                    "horizon steps must be consecutive and of one kind".into(),
                ));
            }
            if s.num_sensors() != steps[0].num_sensors() {
                return Err(Error::Dimension("horizon steps disagree on |O|".into()));
            }
        }
        Ok(HorizonModel { steps, start })
    }

    pub fn steps(&self) -> &[InformationModel] {
        &self.steps
    }
    pub fn start(&self) -> usize {
        self.start
    }
    pub fn len(&self) -> usize {
        self.steps.len()
    }
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
    pub fn kind(&self) -> Kind {
        self.steps[0].kind()
    }
    pub fn num_sensors(&self) -> usize {
        self.steps[0].num_sensors()
    }
}

/// Whitened output matrices `R_{v,u}^{−1/2} H_u` (Cholesky whitening), so that
/// `V_u = H_uᵀ R_{v,u}⁻¹ H_u = H̃_uᵀ H̃_u`.
pub fn whitened_outputs(sys: &LinearSystem) -> Result<Vec<Matrix>> {
    sys.sensors()
        .iter()
        .map(|s| {
            let l_inv = Cholesky::new(&s.r_v)?.inverse_factor();
            l_inv.matmul(&s.h)
        })
        .collect()
}

/// `V_u = H_uᵀ R_{v,u}⁻¹ H_u` for every sensor.
pub fn sensor_information(sys: &LinearSystem) -> Result<Vec<Matrix>> {
    whitened_outputs(sys)?
        .iter()
        .map(|g| {
            let mut v = g.tr_matmul(g)?;
            v.symmetrize_in_place();
            Ok(v)
        })
        .collect()
}

fn check_horizon(n_steps: usize) -> Result<()> {
    if n_steps == 0 {
        return Err(Error::Config("horizon N must be >= 1".into()));
    }
    Ok(())
}

/// Runs the Riccati recursion from `P_{0|−1} = Π₀` with the sensing set
/// `schedule` applied at every step, returning the a priori covariances
/// `P_{k|k−1}` for `k = 0 … last`.
pub fn prior_covariances(sys: &LinearSystem, schedule: &SensorSet, last: usize) -> Result<Vec<Matrix>> {
    schedule.check_ground_set(sys.num_sensors())?;
    let v = sensor_information(sys)?;
    let n = sys.n();
    let mut sum_v = Matrix::zeros(n, n);
    for u in schedule.iter() {
        sum_v.add_assign(&v[u])?;
    }
    let mut priors = Vec::with_capacity(last + 1);
    let mut prior = sys.pi0().clone();
    for k in 0..=last {
        priors.push(prior.clone());
        if k == last {
            break;
        }
        let mut info = psd_inverse(&prior)?;
        info.add_assign(&sum_v)?;
        let posterior = psd_inverse(&info)?;
        prior = sys.f().congruence(&posterior)?;
        prior.add_assign(sys.r_w())?;
    }
    Ok(priors)
}

/// Filtering models for steps `m … m+N−1`: `M_∅,k = P_{k|k−1}⁻¹` with the
/// recursion driven by `schedule`, and `M_u,k = V_u`.
pub fn filtering_horizon(sys: &LinearSystem, schedule: &SensorSet, m: usize, n_steps: usize) -> Result<HorizonModel> {
    check_horizon(n_steps)?;
    let priors = prior_covariances(sys, schedule, m + n_steps - 1)?;
    let factors = Arc::new(whitened_outputs(sys)?);
    let v = Arc::new(sensor_information(sys)?);
    let steps = (m..m + n_steps)
        .map(|k| {
            Ok(InformationModel::with_factors(
                psd_inverse(&priors[k])?,
                Arc::clone(&v),
                Arc::clone(&factors),
                k,
                Kind::Filtering,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    HorizonModel::new(steps, m)
}

/// `[F^d for d in 0..=k]`
pub fn powers(f: &Matrix, k: usize) -> Result<Vec<Matrix>> {
    let mut out = vec![Matrix::identity(f.rows())];
    for d in 1..=k {
        let next = out[d - 1].matmul(f)?;
        out.push(next);
    }
    Ok(out)
}

/// Block lower-triangular `Φ_k` with block `(i, j) = F^{i−j}` for `i ≥ j`,
/// mapping `(x_0, w_0, …, w_{k−1})` to `(x_0, …, x_k)`.
pub fn smoothing_phi(f: &Matrix, k: usize) -> Result<Matrix> {
    let n = f.rows();
    let pw = powers(f, k)?;
    let mut phi = Matrix::zeros((k + 1) * n, (k + 1) * n);
    for i in 0..=k {
        for j in 0..=i {
            phi.set_block(i * n, j * n, &pw[i - j]);
        }
    }
    Ok(phi)
}

/// Checks the smoothing size guard `(m + N)·n ≤ cap`.
pub fn check_smoothing_size(n: usize, m: usize, n_steps: usize, cap: usize) -> Result<()> {
    let dim = (m + n_steps) as u128 * n as u128;
    if dim > cap as u128 {
        return Err(Error::Size {
            what: "smoothing dimension (m+N)·n",
            value: dim,
            cap: cap as u128,
            hint: "; reduce the horizon or use filtering",
        });
    }
    Ok(())
}

/// Smoothing model at one step `k` (dimension `(k+1)·n`).
pub fn smoothing_step(sys: &LinearSystem, k: usize) -> Result<InformationModel> {
    let n = sys.n();
    let d = (k + 1) * n;
    let pi0_inv = psd_inverse(sys.pi0())?;
    let rw_inv = psd_inverse(sys.r_w())?;
    let mut m_empty = Matrix::zeros(d, d);
    m_empty.set_block(0, 0, &pi0_inv);
    for i in 1..=k {
        m_empty.set_block(i * n, i * n, &rw_inv);
    }

    // G_u = (I ⊗ H̃_u) Φ_k has block (i, j) = H̃_u F^{i−j}.
    let pw = powers(sys.f(), k)?;
    let whitened = whitened_outputs(sys)?;
    let mut factors = Vec::with_capacity(whitened.len());
    let mut infos = Vec::with_capacity(whitened.len());
    for h in &whitened {
        let q = h.rows();
        let hf: Vec<Matrix> = pw.iter().map(|p| h.matmul(p)).collect::<Result<_>>()?;
        let mut g = Matrix::zeros((k + 1) * q, d);
        for i in 0..=k {
            for j in 0..=i {
                g.set_block(i * q, j * n, &hf[i - j]);
            }
        }
        let mut m_u = g.tr_matmul(&g)?;
        m_u.symmetrize_in_place();
        infos.push(m_u);
        factors.push(g);
    }
    Ok(InformationModel::with_factors(
        m_empty,
        Arc::new(infos),
        Arc::new(factors),
        k,
        Kind::Smoothing,
    ))
}

/// Smoothing models for steps `m … m+N−1`, guarded by `cap` on `(m+N)·n`.
pub fn smoothing_horizon_capped(sys: &LinearSystem, m: usize, n_steps: usize, cap: usize) -> Result<HorizonModel> {
    check_horizon(n_steps)?;
    check_smoothing_size(sys.n(), m, n_steps, cap)?;
    let steps = (m..m + n_steps)
        .map(|k| smoothing_step(sys, k))
        .collect::<Result<Vec<_>>>()?;
    HorizonModel::new(steps, m)
}

pub fn smoothing_horizon(sys: &LinearSystem, m: usize, n_steps: usize) -> Result<HorizonModel> {
    smoothing_horizon_capped(sys, m, n_steps, SMOOTHING_DIM_CAP)
}
