//! Lagged least-squares estimation of the per-vertex coefficient vectors,
//! residual variances and precision matrices.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::graph::{validate_lag_map, ContempGraph, GraphError, LagEntry, LagMap, ProcessGraph};
use crate::svar::{acs_from_params, check_stability, Acs, SeriesSample, StabilityReport, SvarError, SvarModel};

/// Largest accepted condition number of the regressor second moments.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("series too short: {len} time steps, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("lag {lag} exceeds the order bound {q}")]
    LagBeyondOrder { lag: usize, q: usize },
    #[error("ill-conditioned design (condition number {condition:e}, smallest singular value {smallest:e})")]
    IllConditioned { condition: f64, smallest: f64 },
    #[error("vertex `{vertex}`: {source}")]
    Vertex {
        vertex: String,
        #[source]
        source: Box<EstimateError>,
    },
    #[error("vertex `{0}` is fitted without residual, its noise variance is zero")]
    ZeroResidual(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Svar(#[from] SvarError),
}

/// Target vector and regressor matrix of one vertex regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDesign {
    pub target_vertex: usize,
    /// Regressor column labels, sorted by driver and then lag.
    pub columns: Vec<LagEntry>,
    pub target: DVector<f64>,
    pub regressors: DMatrix<f64>,
}

impl LaggedDesign {
    pub fn n_rows(&self) -> usize {
        self.target.len()
    }
}

/// Stacks `X_u(t - k)` for `(u, k)` in `lags` at `t = q .. len - 1`.
pub fn build_design(sample: &SeriesSample, target: usize, lags: &[LagEntry], q: usize) -> Result<LaggedDesign, EstimateError> {
    let len = sample.len();
    if len < q + 1 {
        return Err(EstimateError::TooShort { len, needed: q + 1 });
    }
    if let Some(&(_, lag)) = lags.iter().find(|(_, k)| *k > q) {
        return Err(EstimateError::LagBeyondOrder { lag, q });
    }
    let mut columns = lags.to_vec();
    columns.sort_unstable();
    columns.dedup();
    let rows = len - q;
    let y = sample.series(target);
    let target_vec = DVector::from_fn(rows, |i, _| y[q + i]);
    let regressors = DMatrix::from_fn(rows, columns.len(), |i, j| {
        let (u, k) = columns[j];
        sample.series(u)[q + i - k]
    });
    Ok(LaggedDesign {
        target_vertex: target,
        columns,
        target: target_vec,
        regressors,
    })
}

/// Least-squares fit of one vertex on its lag set.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexFit {
    pub vertex: usize,
    pub columns: Vec<LagEntry>,
    pub phi_hat: DVector<f64>,
    pub omega_hat: f64,
    /// Second moments of the regressors.
    pub sigma_hat: DMatrix<f64>,
    /// `omega_hat * sigma_hat^{-1}`.
    pub precision: DMatrix<f64>,
    pub condition: f64,
    /// Effective sample size; zero for fits from population moments.
    pub t_len: usize,
}

impl VertexFit {
    /// Solves the normal equations from second moments: `sigma` of the
    /// regressors, `cross` between regressors and target, `target_sq` of the
    /// target.
    pub fn from_moments(
        vertex: usize,
        columns: Vec<LagEntry>,
        sigma: DMatrix<f64>,
        cross: DVector<f64>,
        target_sq: f64,
        t_len: usize,
    ) -> Result<Self, EstimateError> {
        let n = columns.len();
        if n == 0 {
            return Ok(VertexFit {
                vertex,
                columns,
                phi_hat: DVector::zeros(0),
                omega_hat: target_sq,
                sigma_hat: DMatrix::zeros(0, 0),
                precision: DMatrix::zeros(0, 0),
                condition: 1.0,
                t_len,
            });
        }
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let svd = sigma.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition < MAX_CONDITION) {
            return Err(EstimateError::IllConditioned { condition, smallest: smin });
        }
        let u = svd.u.as_ref().unwrap();
        let vt = svd.v_t.as_ref().unwrap();
        let inv_s = svd.singular_values.map(|s| 1.0 / s);
        let inverse = vt.transpose() * DMatrix::from_diagonal(&inv_s) * u.transpose();
        let inverse = (&inverse + inverse.transpose()) * 0.5;
        let phi_hat = &inverse * &cross;
        let omega_hat = (target_sq - 2.0 * phi_hat.dot(&cross) + (phi_hat.transpose() * &sigma * &phi_hat)[(0, 0)]).max(0.0);
        let precision = &inverse * omega_hat;
        Ok(VertexFit {
            vertex,
            columns,
            phi_hat,
            omega_hat,
            sigma_hat: sigma,
            precision,
            condition,
            t_len,
        })
    }

    /// Position of `(driver, lag)` among the regressors.
    pub fn column_of(&self, driver: usize, lag: usize) -> Option<usize> {
        self.columns.binary_search(&(driver, lag)).ok()
    }

    /// Column indices and lags of `driver`, ascending in lag.
    pub fn driver_columns(&self, driver: usize) -> Vec<(usize, usize)> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, (u, _))| *u == driver)
            .map(|(i, &(_, k))| (i, k))
            .collect()
    }

    /// Estimated `φ_{driver,v}(lag)`, zero outside the lag set.
    pub fn coeff(&self, driver: usize, lag: usize) -> f64 {
        self.column_of(driver, lag).map_or(0.0, |i| self.phi_hat[i])
    }

    /// Block of the precision matrix between the lags of `u1` and `u2`.
    pub fn precision_block(&self, u1: usize, u2: usize) -> DMatrix<f64> {
        let r = self.driver_columns(u1);
        let c = self.driver_columns(u2);
        DMatrix::from_fn(r.len(), c.len(), |i, j| self.precision[(r[i].0, c[j].0)])
    }
}

/// Ordinary least squares on a design: `Σ̂ = XᵀX / T`, `ω̂ = mean residual²`.
pub fn ols_fit(design: &LaggedDesign) -> Result<VertexFit, EstimateError> {
    let t = design.n_rows();
    if t == 0 {
        return Err(EstimateError::TooShort { len: 0, needed: 1 });
    }
    let x = &design.regressors;
    let y = &design.target;
    let tf = t as f64;
    let sigma = x.transpose() * x / tf;
    let cross = x.transpose() * y / tf;
    let mut fit = VertexFit::from_moments(design.target_vertex, design.columns.clone(), sigma, cross, y.dot(y) / tf, t)?;
    // residual variance from the residuals themselves rather than the moment
    // identity, which loses precision for near-perfect fits
    let resid = y - x * &fit.phi_hat;
    let omega = resid.dot(&resid) / tf;
    if fit.omega_hat > 0.0 {
        fit.precision *= omega / fit.omega_hat;
    } else if omega > 0.0 {
        let inv = fit.sigma_hat.clone().try_inverse().unwrap_or_else(|| DMatrix::zeros(0, 0));
        fit.precision = inv * omega;
    }
    fit.omega_hat = omega;
    Ok(fit)
}

/// Fit of a lag map onto a process structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    /// Indexed by vertex.
    pub fits: Vec<VertexFit>,
    /// Estimated model, zero outside the lag map.
    pub model: SvarModel,
    pub lags: LagMap,
    /// Vertices in contemporaneous topological order.
    pub order: Vec<usize>,
    pub stability: StabilityReport,
    pub warnings: Vec<String>,
    pub t_len: usize,
}

impl ModelFit {
    pub fn graph(&self) -> &ProcessGraph {
        self.model.graph()
    }

    pub fn fit(&self, v: usize) -> &VertexFit {
        &self.fits[v]
    }

    fn assemble(fits: Vec<VertexFit>, graph: &ProcessGraph, g0: &ContempGraph, lags: &LagMap, t_len: usize) -> Result<Self, EstimateError> {
        let mut noise = Vec::with_capacity(fits.len());
        for f in &fits {
            if !(f.omega_hat > 0.0) {
                return Err(EstimateError::ZeroResidual(graph.name(f.vertex).to_string()));
            }
            noise.push(f.omega_hat);
        }
        let mut model = SvarModel::new(graph.clone(), g0.clone(), noise)?;
        for f in &fits {
            for (i, &(u, k)) in f.columns.iter().enumerate() {
                model.set_coeff(u, f.vertex, k, f.phi_hat[i])?;
            }
        }
        let mut warnings = Vec::new();
        let stability = check_stability(&model)?;
        if !stability.stable {
            warnings.push(format!(
                "estimated model is not stable (spectral radius {:.6})",
                stability.spectral_radius
            ));
        }
        Ok(ModelFit {
            fits,
            model,
            lags: lags.clone(),
            order: g0.topological_order().to_vec(),
            stability,
            warnings,
            t_len,
        })
    }

    /// Per-vertex coefficient tables, variances and diagnostics.
    pub fn to_json(&self) -> serde_json::Value {
        let g = self.graph();
        let vertices: Vec<VertexSummary> = self
            .order
            .iter()
            .map(|&v| {
                let f = &self.fits[v];
                let coefficients = f
                    .columns
                    .iter()
                    .enumerate()
                    .map(|(i, &(u, k))| CoefficientRow {
                        driver: g.name(u).to_string(),
                        lag: k,
                        estimate: f.phi_hat[i],
                        std_error: if f.t_len > 0 {
                            (f.precision[(i, i)] / f.t_len as f64).sqrt()
                        } else {
                            0.0
                        },
                    })
                    .collect();
                VertexSummary {
                    vertex: g.name(v).to_string(),
                    omega_hat: f.omega_hat,
                    condition_number: f.condition,
                    coefficients,
                }
            })
            .collect();
        serde_json::json!({
            "T": self.t_len,
            "vertices": vertices,
            "stability": self.stability,
            "warnings": self.warnings,
        })
    }
}

#[derive(Serialize)]
struct CoefficientRow {
    driver: String,
    lag: usize,
    estimate: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct VertexSummary {
    vertex: String,
    omega_hat: f64,
    condition_number: f64,
    coefficients: Vec<CoefficientRow>,
}

/// Fits every vertex of `lags` by least squares on `sample`.
pub fn fit_all(sample: &SeriesSample, lags: &LagMap, graph: &ProcessGraph, g0: &ContempGraph) -> Result<ModelFit, EstimateError> {
    validate_lag_map(graph, g0, lags).into_result()?;
    let sample = sample.aligned_to(graph)?;
    let q = lags.q();
    let mut fits = Vec::with_capacity(graph.len());
    for v in 0..graph.len() {
        let wrap = |e: EstimateError| EstimateError::Vertex {
            vertex: graph.name(v).to_string(),
            source: Box::new(e),
        };
        let design = build_design(&sample, v, lags.lags(v), q).map_err(wrap)?;
        fits.push(ols_fit(&design).map_err(wrap)?);
    }
    let t_len = sample.len() - q;
    ModelFit::assemble(fits, graph, g0, lags, t_len)
}

/// Second moments of the regressors of `lags` for target `v` computed from
/// population autocovariances.
pub fn population_vertex_fit(acs: &Acs, v: usize, lags: &[LagEntry]) -> Result<VertexFit, EstimateError> {
    let mut columns = lags.to_vec();
    columns.sort_unstable();
    columns.dedup();
    let n = columns.len();
    // E[X_a(t-i) X_b(t-j)] = Σ(j - i)[a, b]
    let sigma = DMatrix::from_fn(n, n, |r, c| {
        let (a, i) = columns[r];
        let (b, j) = columns[c];
        acs.entry(j as i64 - i as i64, a, b)
    });
    let cross = DVector::from_fn(n, |r, _| {
        let (a, i) = columns[r];
        acs.entry(i as i64, v, a)
    });
    VertexFit::from_moments(v, columns, sigma, cross, acs.entry(0, v, v), 0)
}

/// The fit a sample of infinite length would produce: coefficients, noise
/// variances and precision matrices of `lags` under `model`.
pub fn population_fit(model: &SvarModel, lags: &LagMap) -> Result<ModelFit, EstimateError> {
    validate_lag_map(model.graph(), model.contemp(), lags).into_result()?;
    let acs = acs_from_params(model, lags.q().max(1))?;
    let fits = (0..model.dim())
        .map(|v| population_vertex_fit(&acs, v, lags.lags(v)))
        .collect::<Result<Vec<_>, _>>()?;
    ModelFit::assemble(fits, model.graph(), model.contemp(), lags, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{five_process_lags, five_process_model, white_noise};
    use crate::svar::simulate;

    fn sample_from(values: &[f64]) -> SeriesSample {
        SeriesSample::new(vec!["x".into()], vec![values.to_vec()]).unwrap()
    }

    #[test]
    fn design_counts_and_shifts() {
        let s = sample_from(&(0..12).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(build_design(&s, 0, &[(0, 1)], 2).unwrap().n_rows(), 10);
        let s = sample_from(&[1.0, 2.0, 3.0, 4.0]);
        let d = build_design(&s, 0, &[(0, 1)], 1).unwrap();
        assert_eq!(d.target.as_slice(), &[2.0, 3.0, 4.0]);
        assert_eq!(d.regressors.column(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
        assert!(matches!(build_design(&s, 0, &[(0, 1)], 4), Err(EstimateError::TooShort { .. })));
        assert!(matches!(build_design(&s, 0, &[(0, 3)], 1), Err(EstimateError::LagBeyondOrder { .. })));
    }

    #[test]
    fn canonical_column_order() {
        let g = ProcessGraph::new(&["u1", "u2", "v"], &[("u1", "v"), ("u2", "v")]).unwrap();
        let lags = LagMap::from_named(
            &g,
            2,
            &[(
                "v",
                vec![("v", 2), ("u2", 2), ("u1", 1), ("v", 1), ("u2", 0), ("u1", 0), ("u2", 1)],
            )],
        )
        .unwrap();
        let s = SeriesSample::new(
            g.names().to_vec(),
            (0..3).map(|i| (0..20).map(|t| (t * (i + 1)) as f64).collect()).collect(),
        )
        .unwrap();
        let d = build_design(&s, 2, lags.lags(2), 2).unwrap();
        assert_eq!(d.columns, vec![(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)]);
    }

    #[test]
    fn perfect_fit() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let y: Vec<f64> = std::iter::once(0.0).chain(x.iter().copied()).take(50).collect();
        let s = SeriesSample::new(vec!["x".into(), "y".into()], vec![x, y]).unwrap();
        let d = build_design(&s, 1, &[(0, 1)], 1).unwrap();
        let f = ols_fit(&d).unwrap();
        assert!((f.phi_hat[0] - 1.0).abs() < 1e-12);
        assert!(f.omega_hat < 1e-20);
    }

    #[test]
    fn collinear_design_is_rejected() {
        let s = sample_from(&[1.0; 10]);
        let err = ols_fit(&build_design(&s, 0, &[(0, 1), (0, 2)], 2).unwrap()).unwrap_err();
        match err {
            EstimateError::IllConditioned { smallest, .. } => assert!(smallest < 1e-10),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn population_moments_reproduce_coefficients() {
        let model = five_process_model();
        let lags = five_process_lags();
        let fit = population_fit(&model, &lags).unwrap();
        for v in 0..model.dim() {
            for &(u, k) in lags.lags(v) {
                assert!((fit.fits[v].coeff(u, k) - model.coeff(u, v, k)).abs() < 1e-10);
            }
            assert!((fit.fits[v].omega_hat - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pure_noise_has_small_coefficients() {
        let model = white_noise(&[1.0, 1.0]);
        let g = ProcessGraph::new(&["x0", "x1"], &[("x0", "x1")]).unwrap();
        let s = simulate(&model, 100_000, 2, 100, 5).unwrap();
        let s = SeriesSample::new(g.names().to_vec(), (0..2).map(|v| s.series(v).to_vec()).collect()).unwrap();
        let d = build_design(&s, 1, &[(0, 1), (0, 2), (1, 1), (1, 2)], 2).unwrap();
        let f = ols_fit(&d).unwrap();
        assert!(f.phi_hat.iter().all(|c| c.abs() < 0.02));
    }

    #[test]
    fn fit_all_recovers_the_example() {
        let model = five_process_model();
        let lags = five_process_lags();
        let s = simulate(&model, 2000, 3, 1000, 11).unwrap();
        let fit = fit_all(&s, &lags, model.graph(), model.contemp()).unwrap();
        assert_eq!(fit.t_len, 2000);
        for v in 0..model.dim() {
            let f = &fit.fits[v];
            for (i, &(u, k)) in f.columns.iter().enumerate() {
                let se = (f.precision[(i, i)] / 2000.0).sqrt();
                assert!((f.phi_hat[i] - model.coeff(u, v, k)).abs() < 5.0 * se);
            }
            let p = &f.precision;
            assert!((p - p.transpose()).abs().max() < 1e-12);
            assert!(p.clone().cholesky().is_some());
        }
        let json = fit.to_json();
        assert_eq!(json["vertices"].as_array().unwrap().len(), 5);
        assert_eq!(json["T"], 2000);
    }

    #[test]
    fn invalid_lag_map_is_rejected() {
        let model = five_process_model();
        let mut lags = LagMap::new(5, 3);
        lags.insert(0, 4, 1);
        let s = simulate(&model, 50, 3, 10, 1).unwrap();
        assert!(matches!(
            fit_all(&s, &lags, model.graph(), model.contemp()),
            Err(EstimateError::Graph(GraphError::LagMap(_)))
        ));
    }
}
