//! Structural VAR models: stability, simulation, population autocovariances
//! and the inverse map from autocovariances back to coefficients.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freqdom::FreqValue;
use crate::graph::{ContempGraph, GraphError, ProcessGraph};
use crate::linalg::discrete_lyapunov;

/// Spectral radius threshold: stable iff radius < 1 - STABILITY_MARGIN.
pub const STABILITY_MARGIN: f64 = 1e-8;
/// Default number of discarded warm-up steps in [`simulate`].
pub const DEFAULT_BURN_IN: usize = 1000;
/// Pole tolerance on `|det(I - A(z))|`.
pub const SPECTRAL_POLE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SvarError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("coefficient {driver} -> {target} at lag {lag} is not allowed by the graph structure")]
    Structure { driver: String, target: String, lag: usize },
    #[error("noise variance of `{0}` must be positive and finite")]
    NoiseVariance(String),
    #[error("contemporaneous system not invertible")]
    ContemporaneousSingular,
    #[error("model is not stable (companion spectral radius {0:.6})")]
    Unstable(f64),
    #[error("ACS outside ℰ_q(m): {0}")]
    AcsOutside(String),
    #[error("pole of the transfer matrix at angle {angle} (|det| = {det:e})")]
    Pole { angle: f64, det: f64 },
    #[error("series too short: {len} time steps, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("csv: {0}")]
    Csv(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Coefficients `φ_{u,v}(k)` and noise variances `ω_v` of a structural VAR on
/// a known process graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SvarModel {
    graph: ProcessGraph,
    contemp: ContempGraph,
    /// Per target: `(driver, lag) -> coefficient`, zero entries omitted.
    coeffs: Vec<BTreeMap<(usize, usize), f64>>,
    noise_vars: Vec<f64>,
}

impl SvarModel {
    /// A model without coefficients.
    pub fn new(graph: ProcessGraph, contemp: ContempGraph, noise_vars: Vec<f64>) -> Result<Self, SvarError> {
        assert_eq!(graph.len(), contemp.len(), "graph and contemporaneous graph disagree");
        if noise_vars.len() != graph.len() {
            return Err(SvarError::NoiseVariance(format!(
                "expected {} variances, got {}",
                graph.len(),
                noise_vars.len()
            )));
        }
        for (v, &w) in noise_vars.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(SvarError::NoiseVariance(graph.name(v).to_string()));
            }
        }
        Ok(SvarModel {
            coeffs: vec![BTreeMap::new(); graph.len()],
            graph,
            contemp,
            noise_vars,
        })
    }

    /// Sets `φ_{driver,target}(lag)`; a zero removes the entry.
    pub fn set_coeff(&mut self, driver: usize, target: usize, lag: usize, value: f64) -> Result<(), SvarError> {
        let allowed = if lag == 0 {
            self.contemp.has_edge(driver, target)
        } else {
            driver == target || self.graph.has_edge(driver, target)
        };
        if !allowed {
            return Err(SvarError::Structure {
                driver: self.graph.name(driver).to_string(),
                target: self.graph.name(target).to_string(),
                lag,
            });
        }
        if value == 0.0 {
            self.coeffs[target].remove(&(driver, lag));
        } else {
            self.coeffs[target].insert((driver, lag), value);
        }
        Ok(())
    }

    pub fn with_coeff(mut self, driver: &str, target: &str, lag: usize, value: f64) -> Result<Self, SvarError> {
        let (u, v) = (self.graph.resolve(driver)?, self.graph.resolve(target)?);
        self.set_coeff(u, v, lag, value)?;
        Ok(self)
    }

    pub fn graph(&self) -> &ProcessGraph {
        &self.graph
    }

    pub fn contemp(&self) -> &ContempGraph {
        &self.contemp
    }

    pub fn dim(&self) -> usize {
        self.graph.len()
    }

    pub fn noise_vars(&self) -> &[f64] {
        &self.noise_vars
    }

    pub fn noise_var(&self, v: usize) -> f64 {
        self.noise_vars[v]
    }

    pub fn coeff(&self, driver: usize, target: usize, lag: usize) -> f64 {
        self.coeffs[target].get(&(driver, lag)).copied().unwrap_or(0.0)
    }

    /// Non-zero coefficients of `target` keyed by `(driver, lag)`.
    pub fn target_coeffs(&self, target: usize) -> &BTreeMap<(usize, usize), f64> {
        &self.coeffs[target]
    }

    /// Non-zero `(lag, φ_{driver,target}(lag))` pairs, ascending in lag.
    pub fn lag_coeffs(&self, driver: usize, target: usize) -> Vec<(usize, f64)> {
        self.coeffs[target]
            .iter()
            .filter(|((u, _), _)| *u == driver)
            .map(|(&(_, k), &c)| (k, c))
            .collect()
    }

    /// Largest lag carrying a non-zero coefficient.
    pub fn order(&self) -> usize {
        self.coeffs
            .iter()
            .flat_map(|m| m.keys().map(|&(_, k)| k))
            .max()
            .unwrap_or(0)
    }

    /// `Φ(0), …, Φ(q)` with rows indexed by target and columns by driver.
    pub fn lag_matrices(&self, q: usize) -> Vec<DMatrix<f64>> {
        let m = self.dim();
        let mut out = vec![DMatrix::zeros(m, m); q + 1];
        for (v, map) in self.coeffs.iter().enumerate() {
            for (&(u, k), &c) in map {
                if k <= q {
                    out[k][(v, u)] = c;
                }
            }
        }
        out
    }

    /// `(I - Φ(0))^{-1}`.
    fn contemporaneous_inverse(&self) -> Result<DMatrix<f64>, SvarError> {
        let m = self.dim();
        let phi0 = self.lag_matrices(0).swap_remove(0);
        let lhs = DMatrix::identity(m, m) - phi0;
        if lhs.determinant().abs() < 1e-12 {
            return Err(SvarError::ContemporaneousSingular);
        }
        lhs.try_inverse().ok_or(SvarError::ContemporaneousSingular)
    }

    /// Reduced-form lag matrices `Φ̃(k) = (I - Φ(0))^{-1} Φ(k)` for `k = 1..=p`
    /// together with the reduced noise covariance.
    pub fn reduced_form(&self, p: usize) -> Result<(Vec<DMatrix<f64>>, DMatrix<f64>), SvarError> {
        let b = self.contemporaneous_inverse()?;
        let mats = self.lag_matrices(p);
        let reduced = mats[1..].iter().map(|phi| &b * phi).collect();
        let omega = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.noise_vars));
        let omega_tilde = &b * omega * b.transpose();
        Ok((reduced, omega_tilde))
    }

    fn companion(reduced: &[DMatrix<f64>], m: usize) -> DMatrix<f64> {
        let p = reduced.len();
        let n = m * p;
        let mut f = DMatrix::zeros(n, n);
        for (k, phi) in reduced.iter().enumerate() {
            f.view_mut((0, k * m), (m, m)).copy_from(phi);
        }
        for i in 1..p {
            f.view_mut((i * m, (i - 1) * m), (m, m))
                .copy_from(&DMatrix::identity(m, m));
        }
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub spectral_radius: f64,
    /// Whether every target's absolute coefficients sum to less than one.
    /// This is sufficient for stability but not necessary.
    pub sum_condition: bool,
}

pub fn check_stability(model: &SvarModel) -> Result<StabilityReport, SvarError> {
    let p = model.order().max(1);
    let (reduced, _) = model.reduced_form(p)?;
    let f = SvarModel::companion(&reduced, model.dim());
    let spectral_radius = spectral_radius(&f);
    let sum_condition = model
        .coeffs
        .iter()
        .all(|m| m.values().map(|c| c.abs()).sum::<f64>() < 1.0);
    Ok(StabilityReport {
        stable: spectral_radius < 1.0 - STABILITY_MARGIN,
        spectral_radius,
        sum_condition,
    })
}

fn spectral_radius(f: &DMatrix<f64>) -> f64 {
    if let Some(schur) = nalgebra::linalg::Schur::try_new(f.clone(), 1e-15, 10_000) {
        return schur.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max);
    }
    // Gelfand's formula by repeated squaring, tracking the scale in logs
    let mut m = f.clone();
    let mut log_scale = 0.0;
    let mut steps = 0;
    for _ in 0..60 {
        let norm = m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        m /= norm;
        log_scale = 2.0 * (log_scale + norm.ln());
        m = &m * &m;
        steps += 1;
    }
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    ((log_scale + norm.ln()) / 2f64.powi(steps)).exp()
}

fn require_stable(model: &SvarModel) -> Result<(), SvarError> {
    let r = check_stability(model)?;
    if r.stable {
        Ok(())
    } else {
        Err(SvarError::Unstable(r.spectral_radius))
    }
}

/// Multivariate sample with one series per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSample {
    names: Vec<String>,
    /// `series[v][t]`.
    series: Vec<Vec<f64>>,
    seed: Option<u64>,
}

impl SeriesSample {
    pub fn new(names: Vec<String>, series: Vec<Vec<f64>>) -> Result<Self, SvarError> {
        if names.len() != series.len() {
            return Err(SvarError::Csv("names and series differ in count".into()));
        }
        let len = series.first().map_or(0, |s| s.len());
        if series.iter().any(|s| s.len() != len) {
            return Err(SvarError::Csv("series differ in length".into()));
        }
        Ok(SeriesSample {
            names,
            series,
            seed: None,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.series.first().map_or(0, |s| s.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn series(&self, v: usize) -> &[f64] {
        &self.series[v]
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Sample autocovariance `(1/n) Σ_t x(t) x(t-k)ᵀ` (uncentred).
    pub fn autocovariance(&self, k: usize) -> DMatrix<f64> {
        let m = self.n_series();
        let n = self.len();
        DMatrix::from_fn(m, m, |i, j| {
            let (a, b) = (&self.series[i], &self.series[j]);
            (k..n).map(|t| a[t] * b[t - k]).sum::<f64>() / n as f64
        })
    }

    /// Reorders the columns to match `graph`, failing on missing names.
    pub fn aligned_to(&self, graph: &ProcessGraph) -> Result<SeriesSample, SvarError> {
        let mut series = Vec::with_capacity(graph.len());
        for name in graph.names() {
            let idx = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| SvarError::Csv(format!("column `{name}` missing")))?;
            series.push(self.series[idx].clone());
        }
        Ok(SeriesSample {
            names: graph.names().to_vec(),
            series,
            seed: self.seed,
        })
    }

    /// Header of names, then one row per time step.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SvarError> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| SvarError::Csv(e.to_string());
        wr.write_record(&self.names).map_err(err)?;
        for t in 0..self.len() {
            wr.write_record(self.series.iter().map(|s| s[t].to_string()))
                .map_err(err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, SvarError> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let err = |e: csv::Error| SvarError::Csv(e.to_string());
        let names: Vec<String> = rd.headers().map_err(err)?.iter().map(str::to_string).collect();
        let mut series = vec![Vec::new(); names.len()];
        for (row, rec) in rd.records().enumerate() {
            let rec = rec.map_err(err)?;
            for (i, field) in rec.iter().enumerate() {
                let x: f64 = field.parse().map_err(|_| {
                    SvarError::Csv(format!("row {}: `{field}` is not a number", row + 2))
                })?;
                series[i].push(x);
            }
        }
        SeriesSample::new(names, series)
    }
}

/// Draws a sample of `t_len + q` time steps after discarding `burn_in`
/// warm-up steps. Identical seeds give identical samples.
pub fn simulate(model: &SvarModel, t_len: usize, q: usize, burn_in: usize, seed: u64) -> Result<SeriesSample, SvarError> {
    require_stable(model)?;
    let m = model.dim();
    let total = burn_in + t_len + q;
    let order = model.contemp.topological_order().to_vec();
    let sd: Vec<f64> = model.noise_vars.iter().map(|w| w.sqrt()).collect();
    let terms: Vec<Vec<(usize, usize, f64)>> = model
        .coeffs
        .iter()
        .map(|map| map.iter().map(|(&(u, k), &c)| (u, k, c)).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![vec![0.0; total]; m];
    for t in 0..total {
        for &v in &order {
            let eta: f64 = StandardNormal.sample(&mut rng);
            let mut val = sd[v] * eta;
            for &(u, k, c) in &terms[v] {
                if k <= t {
                    val += c * x[u][t - k];
                }
            }
            x[v][t] = val;
        }
    }
    let series = x.into_iter().map(|s| s[burn_in..].to_vec()).collect();
    Ok(SeriesSample {
        names: model.graph.names().to_vec(),
        series,
        seed: Some(seed),
    })
}

/// Autocovariance sequence `Σ(k) = E[X(t) X(t-k)ᵀ]` for `0 <= k <= max_lag`;
/// negative lags are transposes.
#[derive(Debug, Clone, PartialEq)]
pub struct Acs {
    lags: Vec<DMatrix<f64>>,
}

impl Acs {
    pub fn new(lags: Vec<DMatrix<f64>>) -> Self {
        assert!(!lags.is_empty(), "need at least Σ(0)");
        Acs { lags }
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.lags[0].nrows()
    }

    pub fn at(&self, k: i64) -> DMatrix<f64> {
        let idx = k.unsigned_abs() as usize;
        assert!(idx <= self.max_lag(), "lag {k} beyond stored range");
        if k >= 0 {
            self.lags[idx].clone()
        } else {
            self.lags[idx].transpose()
        }
    }

    /// Entry `Σ(k)[i, j]`.
    pub fn entry(&self, k: i64, i: usize, j: usize) -> f64 {
        let idx = k.unsigned_abs() as usize;
        if k >= 0 {
            self.lags[idx][(i, j)]
        } else {
            self.lags[idx][(j, i)]
        }
    }

    /// `Σ([1,q],[1,q])`, block `(i, j)` equal to `Σ(j - i)`.
    pub fn block_toeplitz(&self, q: usize) -> DMatrix<f64> {
        let m = self.dim();
        let mut out = DMatrix::zeros(m * q, m * q);
        for i in 0..q {
            for j in 0..q {
                out.view_mut((i * m, j * m), (m, m))
                    .copy_from(&self.at(j as i64 - i as i64));
            }
        }
        out
    }

    pub fn from_sample(sample: &SeriesSample, max_lag: usize) -> Self {
        Acs::new((0..=max_lag).map(|k| sample.autocovariance(k)).collect())
    }
}

/// Exact autocovariances of a stable model up to `max_lag`.
pub fn acs_from_params(model: &SvarModel, max_lag: usize) -> Result<Acs, SvarError> {
    require_stable(model)?;
    let m = model.dim();
    let p = model.order().max(1);
    let (reduced, omega_tilde) = model.reduced_form(p)?;
    let f = SvarModel::companion(&reduced, m);
    let mut q = DMatrix::zeros(m * p, m * p);
    q.view_mut((0, 0), (m, m)).copy_from(&omega_tilde);
    let gamma = discrete_lyapunov(&f, &q).ok_or(SvarError::Unstable(1.0))?;
    let mut lags: Vec<DMatrix<f64>> = (0..p.min(max_lag + 1))
        .map(|k| gamma.view((0, k * m), (m, m)).into_owned())
        .collect();
    for k in p..=max_lag {
        let mut s = DMatrix::zeros(m, m);
        for (j, phi) in reduced.iter().enumerate() {
            let lag = k as i64 - (j as i64 + 1);
            let prev = if lag >= 0 {
                lags[lag as usize].clone()
            } else {
                lags[(-lag) as usize].transpose()
            };
            s += phi * prev;
        }
        lags.push(s);
    }
    Ok(Acs::new(lags))
}

/// Recovers coefficients and noise variances from autocovariances up to lag
/// `q`: block least squares for the reduced form, then per-vertex regression
/// of the reduced innovations on their contemporaneous parents.
pub fn params_from_acs(
    acs: &Acs,
    graph: &ProcessGraph,
    contemp: &ContempGraph,
    q: usize,
) -> Result<SvarModel, SvarError> {
    let m = acs.dim();
    if m != graph.len() {
        return Err(SvarError::AcsOutside("dimension does not match the graph".into()));
    }
    if acs.max_lag() < q {
        return Err(SvarError::AcsOutside(format!("need lags up to {q}")));
    }
    let q = q.max(1);
    let toeplitz = acs.block_toeplitz(q);
    let chol = toeplitz
        .clone()
        .cholesky()
        .ok_or_else(|| SvarError::AcsOutside("Σ([1,q],[1,q]) is not positive definite".into()))?;
    let mut rhs = DMatrix::zeros(m, m * q);
    for k in 0..q {
        rhs.view_mut((0, k * m), (m, m)).copy_from(&acs.at(k as i64 + 1));
    }
    // Φ̃ G = rhs  <=>  G Φ̃ᵀ = rhsᵀ  (G symmetric)
    let reduced_all = chol.solve(&rhs.transpose()).transpose();
    let reduced: Vec<DMatrix<f64>> = (0..q)
        .map(|k| reduced_all.view((0, k * m), (m, m)).into_owned())
        .collect();
    let mut omega_tilde = acs.at(0);
    for (j, phi) in reduced.iter().enumerate() {
        omega_tilde -= phi * acs.at(j as i64 + 1).transpose();
    }
    let omega_tilde = (&omega_tilde + omega_tilde.transpose()) * 0.5;

    let mut phi0 = DMatrix::zeros(m, m);
    let mut noise = vec![0.0; m];
    for v in 0..m {
        let pa: Vec<usize> = contemp.parents(v).collect();
        let mut resid = omega_tilde[(v, v)];
        if !pa.is_empty() {
            let s_pp = DMatrix::from_fn(pa.len(), pa.len(), |i, j| omega_tilde[(pa[i], pa[j])]);
            let s_pv = nalgebra::DVector::from_fn(pa.len(), |i, _| omega_tilde[(pa[i], v)]);
            let coef = s_pp
                .cholesky()
                .ok_or_else(|| SvarError::AcsOutside("innovation covariance is singular".into()))?
                .solve(&s_pv);
            resid -= s_pv.dot(&coef);
            for (i, &u) in pa.iter().enumerate() {
                phi0[(v, u)] = coef[i];
            }
        }
        if !(resid > 0.0) {
            return Err(SvarError::AcsOutside(format!(
                "non-positive innovation variance for `{}`",
                graph.name(v)
            )));
        }
        noise[v] = resid;
    }

    let mut model = SvarModel::new(graph.clone(), contemp.clone(), noise)?;
    let lhs = DMatrix::identity(m, m) - &phi0;
    let mut mats = vec![phi0.clone()];
    mats.extend(reduced.iter().map(|r| &lhs * r));
    let scale = mats.iter().map(|x| x.abs().max()).fold(1.0, f64::max);
    for (k, mat) in mats.iter().enumerate() {
        for v in 0..m {
            for u in 0..m {
                let c = mat[(v, u)];
                let allowed = if k == 0 {
                    contemp.has_edge(u, v)
                } else {
                    u == v || graph.has_edge(u, v)
                };
                if allowed {
                    model.set_coeff(u, v, k, c)?;
                } else if c.abs() > 1e-8 * scale {
                    return Err(SvarError::AcsOutside(format!(
                        "implied coefficient {} -> {} at lag {k} is {c:e} but the graph has no such effect",
                        graph.name(u),
                        graph.name(v)
                    )));
                }
            }
        }
    }
    Ok(model)
}

/// Hermitian spectral matrix stored as a `2m × 2m` real matrix of operator
/// blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrix {
    blocks: DMatrix<f64>,
}

impl SpectralMatrix {
    pub fn dim(&self) -> usize {
        self.blocks.nrows() / 2
    }

    pub fn entry(&self, i: usize, j: usize) -> FreqValue {
        FreqValue::new(self.blocks[(2 * i, 2 * j)], self.blocks[(2 * i + 1, 2 * j)])
    }

    /// Real part of a diagonal entry.
    pub fn diag(&self, i: usize) -> f64 {
        self.blocks[(2 * i, 2 * i)]
    }

    pub fn real_representation(&self) -> &DMatrix<f64> {
        &self.blocks
    }
}

fn embed(m: &DMatrix<FreqValue>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            out.view_mut((2 * i, 2 * j), (2, 2))
                .copy_from(&m[(i, j)].operator());
        }
    }
    out
}

/// `S(z) = (I - A(z))^{-1} Ω (I - A(z))^{-*}` with `A(z) = Σ_k Φ(k) z^k`.
pub fn spectral_density(model: &SvarModel, z: FreqValue) -> Result<SpectralMatrix, SvarError> {
    require_stable(model)?;
    let m = model.dim();
    let mut a = DMatrix::from_element(m, m, FreqValue::ZERO);
    for (v, map) in model.coeffs.iter().enumerate() {
        for (&(u, k), &c) in map {
            a[(v, u)] += z.powi(k).scale(c);
        }
    }
    let mut lhs = DMatrix::from_element(m, m, FreqValue::ZERO);
    for i in 0..m {
        for j in 0..m {
            lhs[(i, j)] = if i == j { FreqValue::ONE } else { FreqValue::ZERO } - a[(i, j)];
        }
    }
    let real = embed(&lhs);
    // det of the real embedding is |det|^2 of the complex matrix
    let det = real.determinant().abs().sqrt();
    if det < SPECTRAL_POLE_TOL {
        return Err(SvarError::Pole { angle: z.angle(), det });
    }
    let inv = real.try_inverse().ok_or(SvarError::Pole { angle: z.angle(), det })?;
    let mut omega = DMatrix::zeros(2 * m, 2 * m);
    for v in 0..m {
        omega[(2 * v, 2 * v)] = model.noise_vars[v];
        omega[(2 * v + 1, 2 * v + 1)] = model.noise_vars[v];
    }
    let s = &inv * omega * inv.transpose();
    Ok(SpectralMatrix { blocks: s })
}
