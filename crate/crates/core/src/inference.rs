//! Wald tests, confidence ellipsoids and norm intervals.
//!
//! Levels are confidence levels throughout: a test at `alpha = 0.95` rejects
//! when the statistic reaches the 0.95-quantile of its chi-square law.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::asymptotics::{
    acov_lag_polys, acov_path_set, acov_paths, acov_spectral_contribution, acov_total_effect, AsymError, BlockCov,
};
use crate::estimate::ModelFit;
use crate::freqdom::{model_lag_poly, path_function, spectral_contribution, total_effect, FreqError, FreqValue};
use crate::graph::{GraphError, Path};
use crate::linalg::{floored_sym_inverse, sym_eigen};

/// Relative eigenvalue floor used when inverting covariance estimates.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("confidence level {0} is not in (0, 1)")]
    Level(f64),
    #[error("covariance is singular (smallest eigenvalue {min_eigenvalue:e})")]
    Singular { min_eigenvalue: f64 },
    #[error("dimension mismatch: estimate has {estimate} entries, covariance is {cov}x{cov}")]
    Dimension { estimate: usize, cov: usize },
    #[error("sample size must be positive")]
    SampleSize,
    #[error("empty path set: nothing to test")]
    EmptyQuery,
    #[error("path `{0}` does not match the query endpoints")]
    PathMismatch(String),
    #[error(transparent)]
    Asym(#[from] AsymError),
    #[error(transparent)]
    Freq(#[from] FreqError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// `P(X > x)` for `X ~ χ²(m)`.
pub fn chi2_sf(x: f64, m: usize) -> f64 {
    assert!(m > 0, "chi-square needs at least one degree of freedom");
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_ur(m as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// The `alpha`-quantile of `χ²(m)`, found by bisection on the survival
/// function.
pub fn chi2_quantile(alpha: f64, m: usize) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "level must lie in (0, 1)");
    let target = 1.0 - alpha;
    let mut lo = 0.0;
    let mut hi = (m as f64).max(1.0);
    while chi2_sf(hi, m) > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_sf(mid, m) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn check_level(alpha: f64) -> Result<(), InferenceError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(InferenceError::Level(alpha))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaldReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub alpha: f64,
    /// `x_{α;m}`.
    pub critical_value: f64,
    pub reject: bool,
    #[serde(rename = "T")]
    pub t_len: usize,
}

/// `W = T θ̂ᵀ acov⁻¹ θ̂` against `χ²(dim θ̂)`.
pub fn wald_test(theta: &DVector<f64>, acov: &DMatrix<f64>, t_len: usize, alpha: f64) -> Result<WaldReport, InferenceError> {
    check_level(alpha)?;
    if t_len == 0 {
        return Err(InferenceError::SampleSize);
    }
    if acov.nrows() != theta.len() || acov.ncols() != theta.len() || theta.is_empty() {
        return Err(InferenceError::Dimension {
            estimate: theta.len(),
            cov: acov.nrows(),
        });
    }
    let (inv, min_eigenvalue, floored) =
        floored_sym_inverse(acov, EIGEN_FLOOR).ok_or(InferenceError::Singular { min_eigenvalue: 0.0 })?;
    if floored {
        return Err(InferenceError::Singular { min_eigenvalue });
    }
    let statistic = (t_len as f64 * theta.dot(&(&inv * theta))).max(0.0);
    let dof = theta.len();
    let critical_value = chi2_quantile(alpha, dof);
    Ok(WaldReport {
        statistic,
        dof,
        p_value: chi2_sf(statistic, dof),
        alpha,
        critical_value,
        reject: statistic >= critical_value,
        t_len,
    })
}

fn stack(values: &[FreqValue]) -> DVector<f64> {
    DVector::from_iterator(2 * values.len(), values.iter().flat_map(|v| [v.re, v.im]))
}

fn check_paths(paths: &[Path], fit: &ModelFit) -> Result<(), InferenceError> {
    let Some(first) = paths.first() else {
        return Err(InferenceError::EmptyQuery);
    };
    for p in paths {
        if p.source() != first.source() || p.target() != first.target() {
            return Err(InferenceError::PathMismatch(p.display(fit.graph())));
        }
    }
    Ok(())
}

fn block2(cov: nalgebra::Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(2, 2, cov.iter().copied())
}

/// Tests `h^{(π)}(z) = 0`.
pub fn test_path_effect(fit: &ModelFit, path: &Path, z: FreqValue, alpha: f64) -> Result<WaldReport, InferenceError> {
    if path.is_empty() {
        return Err(InferenceError::EmptyQuery);
    }
    let theta = stack(&[path_function(&fit.model, path, z)?]);
    let acov = block2(acov_paths(fit, path, path, z)?);
    wald_test(&theta, &acov, fit.t_len, alpha)
}

/// Tests `h^{(π)}(z) = 0` jointly for every `π ∈ Π`.
pub fn test_any_path(fit: &ModelFit, paths: &[Path], z: FreqValue, alpha: f64) -> Result<WaldReport, InferenceError> {
    check_paths(paths, fit)?;
    let values = paths
        .iter()
        .map(|p| path_function(&fit.model, p, z))
        .collect::<Result<Vec<_>, _>>()?;
    let cov = acov_path_set(fit, paths, z)?;
    wald_test(&stack(&values), &cov.matrix, fit.t_len, alpha)
}

/// Tests `h^Π(z) = 0`.
pub fn test_total_effect(fit: &ModelFit, paths: &[Path], z: FreqValue, alpha: f64) -> Result<WaldReport, InferenceError> {
    check_paths(paths, fit)?;
    let theta = stack(&[total_effect(&fit.model, paths, z)?]);
    let acov = block2(acov_total_effect(fit, paths, paths, z)?);
    wald_test(&theta, &acov, fit.t_len, alpha)
}

/// Tests `g^{Π_u}(z) = 0` jointly over `u ∈ anc(v)`, which is equivalent to a
/// vanishing spectral contribution of `v` to the target along `Π`.
pub fn test_spectral_contribution(
    fit: &ModelFit,
    paths: &[Path],
    z: FreqValue,
    alpha: f64,
) -> Result<WaldReport, InferenceError> {
    check_paths(paths, fit)?;
    let v = paths[0].source();
    let w = paths[0].target();
    let sc = spectral_contribution(&fit.model, v, w, paths, z)?;
    let values: Vec<FreqValue> = sc.per_ancestor.iter().map(|(_, g)| *g).collect();
    let cov = acov_spectral_contribution(fit, v, paths, z)?;
    wald_test(&stack(&values), &cov.matrix, fit.t_len, alpha)
}

/// Tests `φ_{u,w}(z) = 0`, which is linear in the coefficients and needs no
/// genericity assumption.
pub fn test_robust(fit: &ModelFit, u: usize, w: usize, z: FreqValue, alpha: f64) -> Result<WaldReport, InferenceError> {
    let cov = acov_lag_polys(fit, w, z)?;
    let i = fit
        .graph()
        .parents(w)
        .position(|p| p == u)
        .ok_or_else(|| GraphError::NotInProcessGraph(fit.graph().name(u).to_string(), fit.graph().name(w).to_string()))?;
    let theta = stack(&[model_lag_poly(&fit.model, u, w, z)]);
    wald_test(&theta, &block2(cov.block(i, i)), fit.t_len, alpha)
}

/// `{x : T (x - θ̂)ᵀ acov⁻¹ (x - θ̂) ≤ x_{α;m}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceRegion {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub shape_inv: DMatrix<f64>,
    pub radius_sq: f64,
    pub alpha: f64,
    pub t_len: usize,
    pub warnings: Vec<String>,
}

impl ConfidenceRegion {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        let d = x - &self.center;
        d.dot(&(&self.shape_inv * &d)) <= self.radius_sq
    }
}

pub fn confidence_region(
    theta: &DVector<f64>,
    acov: &DMatrix<f64>,
    t_len: usize,
    alpha: f64,
) -> Result<ConfidenceRegion, InferenceError> {
    check_level(alpha)?;
    if t_len == 0 {
        return Err(InferenceError::SampleSize);
    }
    if acov.nrows() != theta.len() || acov.ncols() != theta.len() || theta.is_empty() {
        return Err(InferenceError::Dimension {
            estimate: theta.len(),
            cov: acov.nrows(),
        });
    }
    let (shape_inv, min_eigenvalue, floored) =
        floored_sym_inverse(acov, EIGEN_FLOOR).ok_or(InferenceError::Singular { min_eigenvalue: 0.0 })?;
    let mut warnings = Vec::new();
    if floored {
        warnings.push(format!(
            "degenerate covariance (smallest eigenvalue {min_eigenvalue:e}), eigenvalues floored"
        ));
    }
    Ok(ConfidenceRegion {
        center: theta.clone(),
        shape: (acov + acov.transpose()) * 0.5,
        shape_inv,
        radius_sq: chi2_quantile(alpha, theta.len()) / t_len as f64,
        alpha,
        t_len,
        warnings,
    })
}

/// Range `[lo, hi]` of a norm over a confidence region, or of its square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormInterval {
    pub lo: f64,
    pub hi: f64,
    pub squared: bool,
}

impl NormInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Interval of `s·x²` for `x` in a norm interval.
    pub fn squared_scaled(&self, s: f64) -> NormInterval {
        assert!(!self.squared, "interval is already squared");
        NormInterval {
            lo: s * self.lo * self.lo,
            hi: s * self.hi * self.hi,
            squared: true,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisection for the root of a decreasing function on `[lo, hi]`.
fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest and largest Euclidean norm over the region, from the secular
/// equation `Σ λ_i c_i² / (μ ∓ λ_i)² = r²` in the eigenbasis of the shape.
pub fn norm_interval(region: &ConfidenceRegion) -> NormInterval {
    let eig = sym_eigen(&region.shape);
    let floor = EIGEN_FLOOR * eig.eigenvalues.iter().sum::<f64>().abs();
    let lambda: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(floor)).collect();
    let c: Vec<f64> = (eig.eigenvectors.transpose() * &region.center).iter().copied().collect();
    let r2 = region.radius_sq;
    let n = lambda.len();

    let inside: f64 = (0..n).map(|i| c[i] * c[i] / lambda[i]).sum();
    let lo = if inside <= r2 {
        0.0
    } else {
        // x_i = μ c_i / (λ_i + μ), μ > 0
        let psi = |mu: f64| (0..n).map(|i| lambda[i] * c[i] * c[i] / (lambda[i] + mu).powi(2)).sum::<f64>() - r2;
        let mut hi = lambda.iter().copied().fold(0.0, f64::max).max(1e-300);
        while psi(hi) > 0.0 {
            hi *= 2.0;
        }
        let mu = bisect_decreasing(psi, 0.0, hi);
        (0..n).map(|i| (mu * c[i] / (lambda[i] + mu)).powi(2)).sum::<f64>().sqrt()
    };

    // x_i = μ c_i / (μ - λ_i), μ > λ_max
    let lmax = lambda.iter().copied().fold(0.0, f64::max);
    let top: Vec<bool> = lambda.iter().map(|&l| l >= lmax * (1.0 - 1e-12)).collect();
    let c_norm2: f64 = c.iter().map(|x| x * x).sum();
    let top_c2: f64 = (0..n).filter(|&i| top[i]).map(|i| c[i] * c[i]).sum();
    let rest = |mu: f64| {
        (0..n)
            .filter(|&i| !top[i])
            .map(|i| lambda[i] * c[i] * c[i] / (mu - lambda[i]).powi(2))
            .sum::<f64>()
    };
    let hi = if top_c2 <= 1e-28 * c_norm2.max(1e-300) && rest(lmax) <= r2 {
        // hard case: the extra length goes along the top eigenspace
        let mut sq = 0.0;
        for i in (0..n).filter(|&i| !top[i]) {
            sq += (lmax * c[i] / (lmax - lambda[i])).powi(2);
        }
        sq += lmax * (r2 - rest(lmax));
        sq.sqrt()
    } else {
        let psi = |s: f64| {
            let mu = lmax + s;
            (0..n).map(|i| lambda[i] * c[i] * c[i] / (mu - lambda[i]).powi(2)).sum::<f64>() - r2
        };
        let mut hi = lmax.max(1e-300);
        while psi(hi) > 0.0 {
            hi *= 2.0;
        }
        let s = bisect_decreasing(psi, 0.0, hi);
        let mu = lmax + s;
        (0..n).map(|i| (mu * c[i] / (mu - lambda[i])).powi(2)).sum::<f64>().sqrt()
    };
    NormInterval { lo, hi, squared: false }
}

/// Estimate, Wald test and norm interval of a quantity with one 2×2
/// covariance block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectInference {
    pub estimate: FreqValue,
    pub interval: NormInterval,
    pub test: WaldReport,
    pub warnings: Vec<String>,
}

fn infer_block(
    estimate: FreqValue,
    acov: &DMatrix<f64>,
    t_len: usize,
    alpha: f64,
) -> Result<EffectInference, InferenceError> {
    let theta = stack(&[estimate]);
    let region = confidence_region(&theta, acov, t_len, alpha)?;
    let interval = norm_interval(&region);
    let test = wald_test(&theta, acov, t_len, alpha)?;
    Ok(EffectInference {
        estimate,
        interval,
        test,
        warnings: region.warnings,
    })
}

/// Inference for the total effect `h^Π(z)`.
pub fn infer_total_effect(fit: &ModelFit, paths: &[Path], z: FreqValue, alpha: f64) -> Result<EffectInference, InferenceError> {
    check_paths(paths, fit)?;
    let est = total_effect(&fit.model, paths, z)?;
    let acov = block2(acov_total_effect(fit, paths, paths, z)?);
    infer_block(est, &acov, fit.t_len, alpha)
}

/// Inference for the lag polynomial `φ_{u,w}(z)`.
pub fn infer_robust(fit: &ModelFit, u: usize, w: usize, z: FreqValue, alpha: f64) -> Result<EffectInference, InferenceError> {
    let cov: BlockCov = acov_lag_polys(fit, w, z)?;
    let i = fit
        .graph()
        .parents(w)
        .position(|p| p == u)
        .ok_or_else(|| GraphError::NotInProcessGraph(fit.graph().name(u).to_string(), fit.graph().name(w).to_string()))?;
    let est = model_lag_poly(&fit.model, u, w, z);
    infer_block(est, &block2(cov.block(i, i)), fit.t_len, alpha)
}

/// Per-ancestor contribution `ω_u |g^{Π_u}(z)|²` with its squared interval,
/// taking the noise variance as known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContributionInference {
    pub ancestor: usize,
    pub contribution: f64,
    pub interval: NormInterval,
    pub warnings: Vec<String>,
}

pub fn infer_spectral_contribution(
    fit: &ModelFit,
    paths: &[Path],
    z: FreqValue,
    alpha: f64,
) -> Result<(WaldReport, Vec<ContributionInference>), InferenceError> {
    check_paths(paths, fit)?;
    let v = paths[0].source();
    let w = paths[0].target();
    let sc = spectral_contribution(&fit.model, v, w, paths, z)?;
    let cov = acov_spectral_contribution(fit, v, paths, z)?;
    let values: Vec<FreqValue> = sc.per_ancestor.iter().map(|(_, g)| *g).collect();
    let test = wald_test(&stack(&values), &cov.matrix, fit.t_len, alpha)?;
    let mut out = Vec::new();
    for (i, &(u, g)) in sc.per_ancestor.iter().enumerate() {
        let omega = fit.model.noise_var(u);
        let region = confidence_region(&stack(&[g]), &block2(cov.block(i, i)), fit.t_len, alpha)?;
        out.push(ContributionInference {
            ancestor: u,
            contribution: omega * g.norm_sqr(),
            interval: norm_interval(&region).squared_scaled(omega),
            warnings: region.warnings,
        });
    }
    Ok((test, out))
}
