//! Linear dynamical systems with per-sensor outputs,
//!
//! ```text
//! x_{k+1} = F x_k + w_k,        w_k ~ N(0, R_w),   x_0 ~ N(0, Π₀)
//! y_{u,k} = H_u x_k + v_{u,k},  v_{u,k} ~ N(0, R_{v,u})
//! ```
//!
//! plus generators for the experiment families: Gaussian random systems and
//! advection-diffusion dynamics on synthetic river trees.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{matrix_exp, spectral_norm, Cholesky, Matrix};

/// Seeded generator used everywhere randomness is needed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    #[serde(rename = "H")]
    pub h: Matrix,
    #[serde(rename = "R_v")]
    pub r_v: Matrix,
}

impl Sensor {
    /// Scalar sensor `y = hᵀx + v` with noise variance `sigma_v2`.
    pub fn scalar(h: &[f64], sigma_v2: f64) -> Self {
        Sensor {
            h: Matrix::new(1, h.len(), h.to_vec()).expect("row vector"),
            r_v: Matrix::from_diag(&[sigma_v2]),
        }
    }

    pub fn outputs(&self) -> usize {
        self.h.rows()
    }
}

#[derive(Serialize, Deserialize)]
struct SystemDoc {
    n: usize,
    #[serde(rename = "F")]
    f: Matrix,
    #[serde(rename = "R_w")]
    r_w: Matrix,
    #[serde(rename = "Pi0")]
    pi0: Matrix,
    sensors: Vec<Sensor>,
}

/// A validated system. The ground set of candidate sensors is `0..sensors().len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemDoc", into = "SystemDoc")]
pub struct LinearSystem {
    n: usize,
    f: Matrix,
    r_w: Matrix,
    pi0: Matrix,
    sensors: Vec<Sensor>,
}

impl From<LinearSystem> for SystemDoc {
    fn from(s: LinearSystem) -> Self {
        SystemDoc {
            n: s.n,
            f: s.f,
            r_w: s.r_w,
            pi0: s.pi0,
            sensors: s.sensors,
        }
    }
}

impl TryFrom<SystemDoc> for LinearSystem {
    type Error = Error;
    fn try_from(doc: SystemDoc) -> Result<Self> {
        let sys = LinearSystem::new(doc.f, doc.r_w, doc.pi0, doc.sensors)?;
        if sys.n != doc.n {
            return Err(invalid("n", format!("declared {} but F is {}x{}", doc.n, sys.n, sys.n)));
        }
        Ok(sys)
    }
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidSystem {
        field: field.into(),
        reason: reason.into(),
    }
}

fn check_spd(field: &str, m: &Matrix, n: usize) -> Result<()> {
    if m.rows() != n || m.cols() != n {
        return Err(invalid(field, format!("expected {n}x{n}, got {}x{}", m.rows(), m.cols())));
    }
    if !m.is_finite() {
        return Err(invalid(field, "non-finite entry"));
    }
    let asym = m.max_abs_diff(&m.transpose());
    if asym > 1e-10 * m.max_abs().max(1.0) {
        return Err(invalid(field, format!("not symmetric (max |A - Aᵀ| = {asym:e})")));
    }
    Cholesky::new(m).map_err(|e| invalid(field, format!("not positive definite: {e}")))?;
    Ok(())
}

impl LinearSystem {
    pub fn new(f: Matrix, r_w: Matrix, pi0: Matrix, sensors: Vec<Sensor>) -> Result<Self> {
        let n = f.rows();
        if n == 0 || !f.is_square() {
            return Err(invalid("F", format!("expected a non-empty square matrix, got {}x{}", f.rows(), f.cols())));
        }
        if !f.is_finite() {
            return Err(invalid("F", "non-finite entry"));
        }
        check_spd("R_w", &r_w, n)?;
        check_spd("Pi0", &pi0, n)?;
        for (u, s) in sensors.iter().enumerate() {
            if s.h.cols() != n || s.h.rows() == 0 {
                return Err(invalid(
                    format!("sensors[{u}].H"),
                    format!("expected p_u x {n} with p_u >= 1, got {}x{}", s.h.rows(), s.h.cols()),
                ));
            }
            if !s.h.is_finite() {
                return Err(invalid(format!("sensors[{u}].H"), "non-finite entry"));
            }
            check_spd(&format!("sensors[{u}].R_v"), &s.r_v, s.h.rows())?;
        }
        Ok(LinearSystem {
            n,
            f,
            r_w,
            pi0,
            sensors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn f(&self) -> &Matrix {
        &self.f
    }
    pub fn r_w(&self) -> &Matrix {
        &self.r_w
    }
    pub fn pi0(&self) -> &Matrix {
        &self.pi0
    }
    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }
    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    /// Parses and validates a system document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SystemDoc = serde_json::from_str(text)?;
        LinearSystem::try_from(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system serializes")
    }

    /// Same system with every measurement-noise covariance multiplied by
    /// `factor`, i.e. every sensor information matrix divided by it.
    pub fn with_sensor_noise_scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::Config(format!("noise scale must be positive, got {factor}")));
        }
        let sensors = self
            .sensors
            .iter()
            .map(|s| Sensor {
                h: s.h.clone(),
                r_v: s.r_v.scale(factor),
            })
            .collect();
        LinearSystem::new(self.f.clone(), self.r_w.clone(), self.pi0.clone(), sensors)
    }

    /// Keeps only the listed sensors (in the given order).
    pub fn restrict_sensors(&self, keep: &[usize]) -> Result<Self> {
        let mut sensors = Vec::with_capacity(keep.len());
        for &u in keep {
            let s = self.sensors.get(u).ok_or_else(|| {
                Error::Config(format!("sensor {u} out of range (|O| = {})", self.sensors.len()))
            })?;
            sensors.push(s.clone());
        }
        LinearSystem::new(self.f.clone(), self.r_w.clone(), self.pi0.clone(), sensors)
    }

    /// One-state system with three scalar sensors of information 3, 1 and 0.5
    /// and unit prior information. Handy for hand-checkable demos.
    pub fn scalar_demo() -> Self {
        let sensors = [3.0, 1.0, 0.5]
            .iter()
            .map(|info| Sensor::scalar(&[1.0], 1.0 / info))
            .collect();
        LinearSystem::new(
            Matrix::from_diag(&[0.5]),
            Matrix::identity(1),
            Matrix::identity(1),
            sensors,
        )
        .expect("demo system is valid")
    }
}

/// Sorted, duplicate-free set of sensor indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensorSet(Vec<usize>);

impl SensorSet {
    pub fn empty() -> Self {
        SensorSet(Vec::new())
    }

    pub fn full(p: usize) -> Self {
        SensorSet((0..p).collect())
    }

    /// Sorts the indices; duplicates are rejected.
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut v = indices.to_vec();
        v.sort_unstable();
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Precondition(format!("duplicate sensor index in {indices:?}")));
        }
        Ok(SensorSet(v))
    }

    /// Members of the bit mask `mask` (bit `u` set means `u` is in the set).
    pub fn from_mask(mask: u64) -> Self {
        SensorSet((0..64).filter(|u| mask >> u & 1 == 1).collect())
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &u| m | 1 << u)
    }

    pub fn check_ground_set(&self, p: usize) -> Result<()> {
        match self.0.last() {
            Some(&u) if u >= p => Err(Error::Precondition(format!(
                "sensor index {u} outside ground set of size {p}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, u: usize) -> bool {
        self.0.binary_search(&u).is_ok()
    }

    pub fn with(&self, u: usize) -> Self {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&u) {
            v.insert(pos, u);
        }
        SensorSet(v)
    }

    pub fn union(&self, other: &SensorSet) -> Self {
        let mut v: Vec<usize> = self.0.iter().chain(&other.0).copied().collect();
        v.sort_unstable();
        v.dedup();
        SensorSet(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    /// `H_u = e_uᵀ`: sensor `u` observes state `u` directly.
    Canonical,
    /// `H_u` is a 1×n standard Gaussian row.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSystemSpec {
    pub n: usize,
    pub p: usize,
    pub target_norm: f64,
    pub sigma_w2: f64,
    pub sigma_v2_range: (f64, f64),
    pub output_mode: OutputMode,
    /// `Π₀ = pi0_scale · I`
    pub pi0_scale: f64,
}

impl Default for RandomSystemSpec {
    fn default() -> Self {
        RandomSystemSpec {
            n: 10,
            p: 10,
            target_norm: 0.9,
            sigma_w2: 1e-2,
            sigma_v2_range: (1e-2, 1.0),
            output_mode: OutputMode::Gaussian,
            pi0_scale: 1e-2,
        }
    }
}

/// Draws a random system. The entries of `F` are standard Gaussian, drawn in
/// row-major order, and `F` is rescaled to spectral norm `target_norm`. Then
/// come the Gaussian output rows (if any) and finally one uniform noise
/// variance per sensor.
pub fn random_system(spec: &RandomSystemSpec, seed: u64) -> Result<LinearSystem> {
    let RandomSystemSpec {
        n,
        p,
        target_norm,
        sigma_w2,
        sigma_v2_range: (lo, hi),
        output_mode,
        pi0_scale,
    } = *spec;
    if n == 0 || p == 0 {
        return Err(Error::Config(format!("need n, p >= 1 (got n = {n}, p = {p})")));
    }
    if !(target_norm > 0.0) || !target_norm.is_finite() {
        return Err(Error::Config(format!("target_norm must be positive, got {target_norm}")));
    }
    if !(sigma_w2 > 0.0) || !(pi0_scale > 0.0) {
        return Err(Error::Config("sigma_w2 and pi0_scale must be positive".into()));
    }
    if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(Error::Config(format!("invalid sigma_v2 range [{lo}, {hi}]")));
    }
    if output_mode == OutputMode::Canonical && p > n {
        return Err(Error::Config(format!("canonical outputs need p <= n (got p = {p}, n = {n})")));
    }

    let mut rng = seeded_rng(seed);
    let raw = Matrix::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let norm = spectral_norm(&raw)?;
    if !(norm > 0.0) {
        return Err(Error::Domain("drawn state matrix has zero norm".into()));
    }
    let f = raw.scale(target_norm / norm);

    let rows: Vec<Vec<f64>> = (0..p)
        .map(|u| match output_mode {
            OutputMode::Canonical => (0..n).map(|j| if j == u { 1.0 } else { 0.0 }).collect(),
            OutputMode::Gaussian => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        })
        .collect();
    let sensors = rows
        .iter()
        .map(|h| {
            let sigma_v2 = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            Sensor::scalar(h, sigma_v2)
        })
        .collect();

    LinearSystem::new(
        f,
        Matrix::scaled_identity(n, sigma_w2),
        Matrix::scaled_identity(n, pi0_scale),
        sensors,
    )
}

/// A directed tree draining into a single root (the ocean). Every non-root
/// node has exactly one outgoing edge, to its parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiverTree {
    positions: Vec<[f64; 2]>,
    parent: Vec<Option<usize>>,
    sites: Vec<usize>,
    depth: Vec<usize>,
}

impl RiverTree {
    /// Validates that `parent` describes one connected tree.
    pub fn new(positions: Vec<[f64; 2]>, parent: Vec<Option<usize>>, sites: Vec<usize>) -> Result<Self> {
        let n = positions.len();
        if n == 0 || parent.len() != n {
            return Err(Error::Config(format!(
                "tree needs one parent entry per node ({} positions, {} parents)",
                n,
                parent.len()
            )));
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::Config(format!(
                "river tree must have exactly one root, found {}",
                roots.len()
            )));
        }
        let mut children = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n || p == i {
                    return Err(Error::Config(format!("node {i} has invalid parent {p}")));
                }
                children[p].push(i);
            }
        }
        let mut depth = vec![usize::MAX; n];
        let mut queue = VecDeque::from([roots[0]]);
        depth[roots[0]] = 0;
        while let Some(i) = queue.pop_front() {
            for &c in &children[i] {
                depth[c] = depth[i] + 1;
                queue.push_back(c);
            }
        }
        if let Some(i) = depth.iter().position(|&d| d == usize::MAX) {
            return Err(Error::Config(format!("river tree is disconnected: node {i} never reaches the root")));
        }
        if let Some(&s) = sites.iter().find(|&&s| s >= n) {
            return Err(Error::Config(format!("sensor site {s} is not a node")));
        }
        Ok(RiverTree {
            positions,
            parent,
            sites,
            depth,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }
    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }
    pub fn root(&self) -> usize {
        self.parent.iter().position(Option::is_none).expect("validated")
    }
    /// Candidate sensor nodes.
    pub fn sites(&self) -> &[usize] {
        &self.sites
    }
    /// Edge distance to the root.
    pub fn depth(&self, i: usize) -> usize {
        self.depth[i]
    }

    /// Directed edges `(upstream, downstream)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (i, p)))
            .collect()
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut has_child = vec![false; self.len()];
        for p in self.parent.iter().flatten() {
            has_child[*p] = true;
        }
        (0..self.len()).filter(|&i| !has_child[i]).collect()
    }

    /// Groups the sensor sites by depth, nearest the ocean first. Indices
    /// refer to positions in `sites()`, i.e. to sensor indices of the basin
    /// system.
    pub fn site_strata(&self) -> Vec<Vec<usize>> {
        let mut depths: Vec<usize> = self.sites.iter().map(|&s| self.depth[s]).collect();
        depths.sort_unstable();
        depths.dedup();
        depths
            .iter()
            .map(|&d| (0..self.sites.len()).filter(|&k| self.depth[self.sites[k]] == d).collect())
            .collect()
    }
}

/// Synthetic river network with `n_sites` sensor sites filled breadth-first
/// into a `branching`-ary tree, plus a midpoint node halfway along every
/// site-to-site reach. `n_sites` sites give `2·n_sites − 1` nodes.
pub fn synth_river_tree_with_sites(n_sites: usize, branching: usize, seed: u64) -> Result<RiverTree> {
    if n_sites == 0 || branching == 0 {
        return Err(Error::Config("need at least one site and branching >= 1".into()));
    }
    const SPREAD: f64 = std::f64::consts::FRAC_PI_3;
    const JITTER: f64 = 0.25;
    let mut rng = seeded_rng(seed);

    let mut positions = vec![[0.0, 0.0]];
    let mut parent = vec![None];
    let mut heading = vec![std::f64::consts::PI];
    let mut sites = vec![0];

    let mut frontier = VecDeque::from([0usize]);
    while sites.len() < n_sites {
        let up = frontier.pop_front().expect("frontier never empties before the site count is met");
        for c in 0..branching {
            if sites.len() == n_sites {
                break;
            }
            let offset = if branching == 1 {
                0.0
            } else {
                SPREAD * (2.0 * c as f64 / (branching - 1) as f64 - 1.0)
            };
            let angle = heading[up] + offset + rng.random_range(-JITTER..=JITTER);
            let (dx, dy) = (angle.cos(), angle.sin());
            let [x, y] = positions[up];

            let mid = positions.len();
            positions.push([x + dx, y + dy]);
            parent.push(Some(up));
            heading.push(angle);

            let site = positions.len();
            positions.push([x + 2.0 * dx, y + 2.0 * dy]);
            parent.push(Some(mid));
            heading.push(angle);
            sites.push(site);
            frontier.push_back(site);
        }
    }
    RiverTree::new(positions, parent, sites)
}

/// Complete `branching`-ary river tree with `levels` levels of sensor sites.
pub fn synth_river_tree(levels: usize, branching: usize, seed: u64) -> Result<RiverTree> {
    if levels == 0 {
        return Err(Error::Config("levels must be >= 1".into()));
    }
    let n_sites: usize = (0..levels).map(|l| branching.pow(l as u32)).sum();
    synth_river_tree_with_sites(n_sites, branching, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinParams {
    /// Kernel width σ² of the edge weights `exp(−‖z_i − z_j‖²/σ²)`.
    pub sigma2: f64,
    pub dt: f64,
    pub advect_coeff: f64,
    pub diffuse_coeff: f64,
    pub sigma_w2: f64,
    pub sigma_v2: f64,
    pub pi0_scale: f64,
}

impl Default for BasinParams {
    fn default() -> Self {
        BasinParams {
            sigma2: 10.0,
            dt: 0.1,
            advect_coeff: 0.9,
            diffuse_coeff: 0.099,
            sigma_w2: 1e-4,
            sigma_v2: 1e-1,
            pi0_scale: 1.0,
        }
    }
}

/// Weighted adjacency with `A[i][j] = exp(−d²/σ²)` when water flows from `i` to `j`.
pub fn basin_adjacency(tree: &RiverTree, sigma2: f64) -> Matrix {
    let n = tree.len();
    let mut a = Matrix::zeros(n, n);
    for (up, down) in tree.edges() {
        let [x0, y0] = tree.positions()[up];
        let [x1, y1] = tree.positions()[down];
        let d2 = (x0 - x1).powi(2) + (y0 - y1).powi(2);
        a[(up, down)] = (-d2 / sigma2).exp();
    }
    a
}

/// `D − W` with `D` the diagonal of column sums of `W`.
pub fn column_laplacian(w: &Matrix) -> Matrix {
    let n = w.rows();
    let mut l = w.scale(-1.0);
    for j in 0..n {
        let col: f64 = (0..n).map(|i| w[(i, j)]).sum();
        l[(j, j)] += col;
    }
    l
}

/// Advection-diffusion dynamics on a river tree,
/// `F = a·exp(−L·dt) + d·exp(−L′·dt)` with `L = D − A` (directed, flowing to
/// the root) and `L′ = D′ − (A + Aᵀ)`. Every site gets a direct-reading sensor.
pub fn basin_system(tree: &RiverTree, params: &BasinParams) -> Result<(LinearSystem, Vec<usize>)> {
    let BasinParams {
        sigma2,
        dt,
        advect_coeff,
        diffuse_coeff,
        sigma_w2,
        sigma_v2,
        pi0_scale,
    } = *params;
    for (name, v) in [
        ("sigma2", sigma2),
        ("dt", dt),
        ("advect_coeff", advect_coeff),
        ("diffuse_coeff", diffuse_coeff),
        ("sigma_w2", sigma_w2),
        ("sigma_v2", sigma_v2),
        ("pi0_scale", pi0_scale),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Config(format!("basin parameter {name} must be positive, got {v}")));
        }
    }
    let n = tree.len();
    let a = basin_adjacency(tree, sigma2);
    let l = column_laplacian(&a);
    let l_sym = column_laplacian(&a.add(&a.transpose())?);
    let mut f = matrix_exp(&l.scale(-dt))?.scale(advect_coeff);
    f.add_scaled(diffuse_coeff, &matrix_exp(&l_sym.scale(-dt))?)?;

    let sensors = tree
        .sites()
        .iter()
        .map(|&node| {
            let h: Vec<f64> = (0..n).map(|j| if j == node { 1.0 } else { 0.0 }).collect();
            Sensor::scalar(&h, sigma_v2)
        })
        .collect();
    let sys = LinearSystem::new(
        f,
        Matrix::scaled_identity(n, sigma_w2),
        Matrix::scaled_identity(n, pi0_scale),
        sensors,
    )?;
    Ok((sys, tree.sites().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_system_sweep_family() {
        let spec = RandomSystemSpec {
            n: 100,
            p: 100,
            target_norm: 0.9,
            sigma_w2: 0.01,
            sigma_v2_range: (1.0, 1.0),
            output_mode: OutputMode::Canonical,
            pi0_scale: 1e-2,
        };
        let sys = random_system(&spec, 42).unwrap();
        assert!((spectral_norm(sys.f()).unwrap() - 0.9).abs() < 1e-9);
        assert_eq!(sys.pi0(), &Matrix::scaled_identity(100, 1e-2));
        for (u, s) in sys.sensors().iter().enumerate() {
            assert_eq!(s.h.row(0).iter().position(|&x| x == 1.0), Some(u));
            assert_eq!(s.h.row(0).iter().filter(|&&x| x != 0.0).count(), 1);
            assert_eq!(s.r_v[(0, 0)], 1.0);
        }
    }

    #[test]
    fn random_system_gaussian_family() {
        let sys = random_system(&RandomSystemSpec::default(), 3).unwrap();
        assert_eq!((sys.n(), sys.num_sensors()), (10, 10));
        assert!((spectral_norm(sys.f()).unwrap() - 0.9).abs() < 1e-9);
        for s in sys.sensors() {
            let v = s.r_v[(0, 0)];
            assert!((1e-2..=1.0).contains(&v));
        }
        assert_eq!(sys.r_w(), &Matrix::scaled_identity(10, 1e-2));
    }

    #[test]
    fn random_system_rejections() {
        let zero = RandomSystemSpec {
            target_norm: 0.0,
            ..Default::default()
        };
        assert!(matches!(random_system(&zero, 1), Err(Error::Config(_))));
        let canon = RandomSystemSpec {
            n: 3,
            p: 4,
            output_mode: OutputMode::Canonical,
            ..Default::default()
        };
        assert!(matches!(random_system(&canon, 1), Err(Error::Config(_))));
    }

    #[test]
    fn random_system_is_reproducible() {
        let spec = RandomSystemSpec::default();
        let a = random_system(&spec, 9).unwrap();
        let b = random_system(&spec, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_system(&spec, 10).unwrap());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let sys = random_system(&RandomSystemSpec::default(), 5).unwrap();
        let text = sys.to_json();
        assert_eq!(LinearSystem::from_json(&text).unwrap(), sys);
    }

    #[test]
    fn json_rejects_bad_systems() {
        let bad_dim = r#"{"n":2,"F":[[1.0]],"R_w":[[1.0]],"Pi0":[[1.0]],"sensors":[]}"#;
        assert!(matches!(
            LinearSystem::from_json(bad_dim),
            Err(Error::InvalidSystem { .. })
        ));
        let not_pd = r#"{"n":1,"F":[[1.0]],"R_w":[[0.0]],"Pi0":[[1.0]],"sensors":[]}"#;
        match LinearSystem::from_json(not_pd) {
            Err(Error::InvalidSystem { field, .. }) => assert_eq!(field, "R_w"),
            other => panic!("{other:?}"),
        }
        let bad_h = r#"{"n":1,"F":[[1.0]],"R_w":[[1.0]],"Pi0":[[1.0]],"sensors":[{"H":[[1.0,2.0]],"R_v":[[1.0]]}]}"#;
        match LinearSystem::from_json(bad_h) {
            Err(Error::InvalidSystem { field, .. }) => assert_eq!(field, "sensors[0].H"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(LinearSystem::from_json("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn sensor_set_basics() {
        let s = SensorSet::from_indices(&[3, 1]).unwrap();
        assert_eq!(s.as_slice(), &[1, 3]);
        assert!(SensorSet::from_indices(&[1, 1]).is_err());
        assert_eq!(SensorSet::from_mask(s.mask()), s);
        assert_eq!(s.with(2).as_slice(), &[1, 2, 3]);
        assert!(s.check_ground_set(3).is_err());
        assert!(s.check_ground_set(4).is_ok());
    }

    #[test]
    fn tree_counts() {
        let t = synth_river_tree(1, 1, 0).unwrap();
        assert_eq!((t.len(), t.edges().len()), (1, 0));

        let t = synth_river_tree(3, 2, 0).unwrap();
        assert_eq!(t.sites().len(), 7);
        assert_eq!(t.len() - t.sites().len(), 6);
        assert_eq!(t.edges().len(), 12);

        let t = synth_river_tree(4, 2, 17).unwrap();
        let edges = t.edges();
        for i in 0..t.len() {
            let out = edges.iter().filter(|(u, _)| *u == i).count();
            assert_eq!(out, usize::from(i != t.root()));
        }
        assert_eq!(t.site_strata().len(), 4);
        assert_eq!(t.site_strata()[3].len(), 8);
    }

    #[test]
    fn tree_rejects_disconnected() {
        let pos = vec![[0.0, 0.0]; 3];
        assert!(RiverTree::new(pos.clone(), vec![None, Some(0), None], vec![]).is_err());
        // 1 and 2 point at each other: a cycle never reaching the root
        assert!(RiverTree::new(pos, vec![None, Some(2), Some(1)], vec![]).is_err());
    }

    #[test]
    fn basin_single_node() {
        let t = synth_river_tree(1, 1, 0).unwrap();
        let (sys, sites) = basin_system(&t, &BasinParams::default()).unwrap();
        assert_eq!(sites, vec![0]);
        assert!((sys.f()[(0, 0)] - 0.999).abs() < 1e-15);
    }

    #[test]
    fn basin_path_adjacency_matches_kernel() {
        let t = RiverTree::new(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![None, Some(0), Some(1)],
            vec![0, 1, 2],
        )
        .unwrap();
        let a = basin_adjacency(&t, 10.0);
        let w = (-1.0f64 / 10.0).exp();
        assert_eq!(a[(1, 0)], w);
        assert_eq!(a[(2, 1)], w);
        assert_eq!(a[(0, 1)], 0.0);
        assert_eq!(a.as_slice().iter().filter(|&&x| x != 0.0).count(), 2);

        let l = column_laplacian(&a);
        // mass conservation: columns of L sum to zero
        for j in 0..3 {
            assert!((0..3).map(|i| l[(i, j)]).sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn basin_full_scale_is_marginally_stable() {
        let t = synth_river_tree_with_sites(64, 2, 1).unwrap();
        assert_eq!(t.len(), 127);
        let (sys, sites) = basin_system(&t, &BasinParams::default()).unwrap();
        assert_eq!(sites.len(), 64);
        let norm = spectral_norm(sys.f()).unwrap();
        assert!(norm < 1.02, "‖F‖ = {norm}");
        assert!(sys.f().as_slice().iter().all(|&x| x >= -1e-12));
    }
}
