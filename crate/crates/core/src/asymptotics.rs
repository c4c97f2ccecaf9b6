//! Delta-method asymptotic covariances of link, path, weighted path, total
//! effect and spectral contribution estimators.
//!
//! Every quantity handled here is a product of factors that live at distinct
//! vertices: a link function `h_{u,x}` or lag polynomial `φ_{u,x}` at its
//! target `x`, or the internal function `f_x`. The OLS estimators of different
//! vertices are asymptotically independent, so the covariance of two such
//! products is a sum over the vertices both touch:
//!
//! ```text
//! acov(Q, R) = Σ_x M(Q / q_x) · acov_x(q_x, r_x) · M(R / r_x)ᵀ
//! ```
//!
//! where `q_x`, `r_x` are the factors at `x` and `acov_x` is the per-vertex
//! block built from the link Jacobians and the precision matrix of `x`.

use nalgebra::{DMatrix, Matrix2};
use serde::Serialize;
use thiserror::Error;

use crate::estimate::{ModelFit, VertexFit};
use crate::freqdom::{
    internal_function, link_function, model_lag_poly, total_effect, weighted_total, FreqError, FreqValue,
};
use crate::graph::{ancestors, enumerate_paths, GraphError, Path};
use crate::svar::SvarModel;

/// Singular values of the lag-power matrix below this flag near-degenerate
/// frequencies.
pub const GENERICITY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymError {
    #[error(transparent)]
    Freq(#[from] FreqError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("lag set of `{vertex}` violates AL2 for driver `{driver}` ({n_lags} lag)")]
    Al2 { vertex: String, driver: String, n_lags: usize },
    #[error("lag-power matrix of `{vertex}` is rank deficient at angle {angle:.6} (smallest singular value {min_singular:e})")]
    RankDeficient { vertex: String, angle: f64, min_singular: f64 },
    #[error("matrix is singular: {0}")]
    Singular(String),
}

/// Columns `(Re z^k, Im z^k)` for the lags `k` of one driver.
#[derive(Debug, Clone, PartialEq)]
pub struct ZPowerMatrix(pub DMatrix<f64>);

impl ZPowerMatrix {
    pub fn new(z: FreqValue, lags: &[usize]) -> Self {
        let mut m = DMatrix::zeros(2, lags.len());
        for (j, &k) in lags.iter().enumerate() {
            let p = z.powi(k);
            m[(0, j)] = p.re;
            m[(1, j)] = p.im;
        }
        ZPowerMatrix(m)
    }

    pub fn n_lags(&self) -> usize {
        self.0.ncols()
    }
}

/// Jacobian factors of the link and internal functions of one vertex `v`:
/// `∇^{l_u} h_{u,v} = a·A·z^{l_u}`, `∇^{l_v} h_{u,v} = a·A_u·z^{l_v}` and
/// `∇^{l_v} f_v = a·A_v·z^{l_v}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkJacobian {
    pub vertex: usize,
    /// `|1 - φ_{v,v}(z)|^{-2}`.
    pub a_v: f64,
    /// `M(conj(1 - φ_{v,v}(z)))`.
    pub a: Matrix2<f64>,
    /// `M(h_{u,v}(z) · conj(1 - φ_{v,v}(z)))` per process-graph parent `u`.
    pub a_parents: Vec<(usize, Matrix2<f64>)>,
    /// `M(f_v(z) · conj(1 - φ_{v,v}(z)))`.
    pub a_self: Matrix2<f64>,
}

impl LinkJacobian {
    pub fn a_parent(&self, u: usize) -> Matrix2<f64> {
        self.a_parents
            .iter()
            .find(|(p, _)| *p == u)
            .map_or_else(Matrix2::zeros, |(_, m)| *m)
    }
}

pub fn link_jacobians(model: &SvarModel, v: usize, z: FreqValue) -> Result<LinkJacobian, AsymError> {
    let f = internal_function(model, v, z)?;
    let d = FreqValue::ONE - model_lag_poly(model, v, v, z);
    let dc = d.conj();
    let a_parents = model
        .graph()
        .parents(v)
        .map(|u| Ok((u, (link_function(model, u, v, z)? * dc).operator())))
        .collect::<Result<Vec<_>, AsymError>>()?;
    Ok(LinkJacobian {
        vertex: v,
        a_v: 1.0 / d.norm_sqr(),
        a: dc.operator(),
        a_parents,
        a_self: (f * dc).operator(),
    })
}

/// A factor of a product at some vertex `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    /// `h_{u,x}`.
    Link(usize),
    /// `f_x`.
    Internal,
    /// `φ_{u,x}`.
    LagPoly(usize),
}

fn factor_value(model: &SvarModel, x: usize, factor: Factor, z: FreqValue) -> Result<FreqValue, AsymError> {
    Ok(match factor {
        Factor::Link(u) => link_function(model, u, x, z)?,
        Factor::Internal => internal_function(model, x, z)?,
        Factor::LagPoly(u) => model_lag_poly(model, u, x, z),
    })
}

/// `(driver, C)` pairs with `∇^{l_driver} factor = C · z^{l_driver}`.
fn coefficient_blocks(jac: &LinkJacobian, factor: Factor) -> Vec<(usize, Matrix2<f64>)> {
    let x = jac.vertex;
    match factor {
        Factor::Link(u) => vec![(u, jac.a * jac.a_v), (x, jac.a_parent(u) * jac.a_v)],
        Factor::Internal => vec![(x, jac.a_self * jac.a_v)],
        Factor::LagPoly(u) => vec![(u, Matrix2::identity())],
    }
}

fn to_matrix2(m: &DMatrix<f64>) -> Matrix2<f64> {
    m.fixed_view::<2, 2>(0, 0).into_owned()
}

/// `P_{u1,u2}(z) = z^{l_{u1}} P_{u1,u2} (z^{l_{u2}})ᵀ`.
pub fn frequency_precision(fit: &VertexFit, u1: usize, u2: usize, z: FreqValue) -> Matrix2<f64> {
    let l1: Vec<usize> = fit.driver_columns(u1).into_iter().map(|(_, k)| k).collect();
    let l2: Vec<usize> = fit.driver_columns(u2).into_iter().map(|(_, k)| k).collect();
    if l1.is_empty() || l2.is_empty() {
        return Matrix2::zeros();
    }
    let z1 = ZPowerMatrix::new(z, &l1);
    let z2 = ZPowerMatrix::new(z, &l2);
    to_matrix2(&(&z1.0 * fit.precision_block(u1, u2) * z2.0.transpose()))
}

/// Per-vertex covariance between two factors at `x`.
fn vertex_acov(fit: &ModelFit, jac: &LinkJacobian, f1: Factor, f2: Factor, z: FreqValue) -> Matrix2<f64> {
    let vf = fit.fit(jac.vertex);
    let mut acc = Matrix2::zeros();
    for (b, c1) in coefficient_blocks(jac, f1) {
        for (c, c2) in coefficient_blocks(jac, f2) {
            acc += c1 * frequency_precision(vf, b, c, z) * c2.transpose();
        }
    }
    acc
}

/// A product of factors at distinct vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial(pub Vec<(usize, Factor)>);

impl Monomial {
    /// `h^{(π)}`: the link into every non-source vertex.
    pub fn path(path: &Path) -> Self {
        Monomial(path.edges().map(|(u, x)| (x, Factor::Link(u))).collect())
    }

    /// `g^{(π)}`: the path function times the source's internal function.
    pub fn weighted_path(path: &Path) -> Self {
        let mut m = vec![(path.source(), Factor::Internal)];
        m.extend(Monomial::path(path).0);
        Monomial(m)
    }

    /// `φ^{(π)}`: the product of lag polynomials along the path.
    pub fn lag_poly_path(path: &Path) -> Self {
        Monomial(path.edges().map(|(u, x)| (x, Factor::LagPoly(u))).collect())
    }

    pub fn value(&self, model: &SvarModel, z: FreqValue) -> Result<FreqValue, AsymError> {
        let mut acc = FreqValue::ONE;
        for &(x, f) in &self.0 {
            acc = acc * factor_value(model, x, f, z)?;
        }
        Ok(acc)
    }
}

/// Evaluates the per-vertex factors of several monomials at one frequency and
/// caches the Jacobians of the vertices they touch.
struct Evaluator<'a> {
    fit: &'a ModelFit,
    z: FreqValue,
    jacobians: Vec<Option<LinkJacobian>>,
}

impl<'a> Evaluator<'a> {
    fn new(fit: &'a ModelFit, z: FreqValue) -> Self {
        Evaluator {
            fit,
            z,
            jacobians: vec![None; fit.model.dim()],
        }
    }

    fn jacobian(&mut self, x: usize) -> Result<&LinkJacobian, AsymError> {
        if self.jacobians[x].is_none() {
            self.jacobians[x] = Some(link_jacobians(&self.fit.model, x, self.z)?);
        }
        Ok(self.jacobians[x].as_ref().unwrap())
    }

    fn values(&self, m: &Monomial) -> Result<Vec<FreqValue>, AsymError> {
        m.0.iter()
            .map(|&(x, f)| factor_value(&self.fit.model, x, f, self.z))
            .collect()
    }

    fn acov(&mut self, m1: &Monomial, m2: &Monomial) -> Result<Matrix2<f64>, AsymError> {
        let v1 = self.values(m1)?;
        let v2 = self.values(m2)?;
        let cofactor = |vals: &[FreqValue], skip: usize| -> FreqValue {
            vals.iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, v)| *v)
                .product()
        };
        let mut acc = Matrix2::zeros();
        for (i, &(x, f1)) in m1.0.iter().enumerate() {
            let Some(j) = m2.0.iter().position(|&(y, _)| y == x) else {
                continue;
            };
            let f2 = m2.0[j].1;
            let c1 = cofactor(&v1, i).operator();
            let c2 = cofactor(&v2, j).operator();
            let fit = self.fit;
            let z = self.z;
            let jac = self.jacobian(x)?;
            acc += c1 * vertex_acov(fit, jac, f1, f2, z) * c2.transpose();
        }
        Ok(acc)
    }

    fn acov_sums(&mut self, s1: &[Monomial], s2: &[Monomial]) -> Result<Matrix2<f64>, AsymError> {
        let mut acc = Matrix2::zeros();
        for a in s1 {
            for b in s2 {
                acc += self.acov(a, b)?;
            }
        }
        Ok(acc)
    }
}

/// Covariance between two products of factors.
pub fn acov_monomials(fit: &ModelFit, m1: &Monomial, m2: &Monomial, z: FreqValue) -> Result<Matrix2<f64>, AsymError> {
    Evaluator::new(fit, z).acov(m1, m2)
}

/// Symmetric matrix of 2×2 blocks with labelled block rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCov {
    pub labels: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub t_len: usize,
    pub warnings: Vec<String>,
}

impl BlockCov {
    pub fn from_blocks(labels: Vec<String>, blocks: &[Vec<Matrix2<f64>>], t_len: usize) -> Self {
        let n = labels.len();
        let mut matrix = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                matrix.fixed_view_mut::<2, 2>(2 * i, 2 * j).copy_from(&blocks[i][j]);
            }
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        BlockCov {
            labels,
            matrix,
            t_len,
            warnings: Vec::new(),
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.labels.len()
    }

    pub fn block(&self, i: usize, j: usize) -> Matrix2<f64> {
        self.matrix.fixed_view::<2, 2>(2 * i, 2 * j).into_owned()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        crate::linalg::sym_eigen(&self.matrix)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Eigenvalues no smaller than `-tol · trace`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol * self.trace().abs()
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Out<'a> {
            labels: &'a [String],
            block_size: usize,
            rows: Vec<Vec<f64>>,
            #[serde(rename = "T")]
            t_len: usize,
            warnings: &'a [String],
        }
        let rows = (0..self.matrix.nrows())
            .map(|i| self.matrix.row(i).iter().copied().collect())
            .collect();
        serde_json::to_value(Out {
            labels: &self.labels,
            block_size: 2,
            rows,
            t_len: self.t_len,
            warnings: &self.warnings,
        })
        .expect("block covariance serialises")
    }
}

/// Rank diagnostics for the link Jacobians of one vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenericityReport {
    pub z_full_rank: bool,
    pub det_a_v: f64,
    pub det_a_v_nonzero: bool,
    pub min_singular: f64,
}

impl GenericityReport {
    pub fn is_degenerate(&self) -> bool {
        !self.z_full_rank || !self.det_a_v_nonzero
    }
}

/// Checks that the block-diagonal lag-power matrix of `v` (one block per
/// parent with lags, and one for `v`) has full row rank, and that `A_v` is
/// invertible.
pub fn genericity_check(fit: &ModelFit, v: usize, z: FreqValue) -> Result<GenericityReport, AsymError> {
    let vf = fit.fit(v);
    let mut drivers: Vec<usize> = fit
        .graph()
        .parents(v)
        .filter(|&u| !vf.driver_columns(u).is_empty())
        .collect();
    drivers.push(v);
    let mut min_singular = f64::INFINITY;
    for u in drivers {
        let lags: Vec<usize> = vf.driver_columns(u).into_iter().map(|(_, k)| k).collect();
        let s = if lags.len() < 2 {
            0.0
        } else {
            ZPowerMatrix::new(z, &lags).0.singular_values().min()
        };
        min_singular = min_singular.min(s);
    }
    let jac = link_jacobians(&fit.model, v, z)?;
    let det_a_v = jac.a_self.determinant();
    Ok(GenericityReport {
        z_full_rank: min_singular >= GENERICITY_TOL,
        det_a_v,
        det_a_v_nonzero: det_a_v.abs() >= GENERICITY_TOL,
        min_singular,
    })
}

/// Joint covariance of the link functions into `v` and its internal
/// function, indexed by `pa(v)` followed by `v`.
pub fn acov_links(fit: &ModelFit, v: usize, z: FreqValue) -> Result<BlockCov, AsymError> {
    let g = fit.graph();
    let vf = fit.fit(v);
    let mut drivers: Vec<usize> = g.parents(v).collect();
    drivers.push(v);
    for &u in &drivers {
        let n = vf.driver_columns(u).len();
        if n == 1 {
            return Err(AsymError::Al2 {
                vertex: g.name(v).to_string(),
                driver: g.name(u).to_string(),
                n_lags: n,
            });
        }
    }
    let report = genericity_check(fit, v, z)?;
    if report.min_singular < 1e-14 {
        return Err(AsymError::RankDeficient {
            vertex: g.name(v).to_string(),
            angle: z.angle(),
            min_singular: report.min_singular,
        });
    }
    let jac = link_jacobians(&fit.model, v, z)?;
    let factor = |u: usize| if u == v { Factor::Internal } else { Factor::Link(u) };
    let blocks: Vec<Vec<Matrix2<f64>>> = drivers
        .iter()
        .map(|&a| {
            drivers
                .iter()
                .map(|&b| vertex_acov(fit, &jac, factor(a), factor(b), z))
                .collect()
        })
        .collect();
    let labels = drivers.iter().map(|&u| g.name(u).to_string()).collect();
    let mut cov = BlockCov::from_blocks(labels, &blocks, fit.t_len);
    if report.is_degenerate() {
        cov.warnings.push(format!(
            "near-degenerate frequency for `{}` (smallest singular value {:e})",
            g.name(v),
            report.min_singular
        ));
    }
    Ok(cov)
}

/// Joint covariance of the lag polynomials `φ_{u,w}(z)`, `u ∈ pa(w)`.
pub fn acov_lag_polys(fit: &ModelFit, w: usize, z: FreqValue) -> Result<BlockCov, AsymError> {
    let g = fit.graph();
    let vf = fit.fit(w);
    let parents: Vec<usize> = g.parents(w).collect();
    let blocks: Vec<Vec<Matrix2<f64>>> = parents
        .iter()
        .map(|&a| parents.iter().map(|&b| frequency_precision(vf, a, b, z)).collect())
        .collect();
    let labels = parents.iter().map(|&u| g.name(u).to_string()).collect();
    Ok(BlockCov::from_blocks(labels, &blocks, fit.t_len))
}

/// Covariance between the path function estimators of `π` and `ρ`.
pub fn acov_paths(fit: &ModelFit, pi: &Path, rho: &Path, z: FreqValue) -> Result<Matrix2<f64>, AsymError> {
    acov_monomials(fit, &Monomial::path(pi), &Monomial::path(rho), z)
}

/// Covariance between the weighted path function estimators of `π` and `ρ`.
pub fn acov_weighted_paths(fit: &ModelFit, pi: &Path, rho: &Path, z: FreqValue) -> Result<Matrix2<f64>, AsymError> {
    acov_monomials(fit, &Monomial::weighted_path(pi), &Monomial::weighted_path(rho), z)
}

/// Covariance between the lag-polynomial path products of `π` and `ρ`.
pub fn acov_lag_poly_paths(fit: &ModelFit, pi: &Path, rho: &Path, z: FreqValue) -> Result<Matrix2<f64>, AsymError> {
    acov_monomials(fit, &Monomial::lag_poly_path(pi), &Monomial::lag_poly_path(rho), z)
}

/// Covariance between the total effect estimators over two path sets.
pub fn acov_total_effect(fit: &ModelFit, set1: &[Path], set2: &[Path], z: FreqValue) -> Result<Matrix2<f64>, AsymError> {
    let m1: Vec<Monomial> = set1.iter().map(Monomial::path).collect();
    let m2: Vec<Monomial> = set2.iter().map(Monomial::path).collect();
    Evaluator::new(fit, z).acov_sums(&m1, &m2)
}

/// Joint covariance of the path function estimators of `paths`.
pub fn acov_path_set(fit: &ModelFit, paths: &[Path], z: FreqValue) -> Result<BlockCov, AsymError> {
    let monomials: Vec<Monomial> = paths.iter().map(Monomial::path).collect();
    let mut ev = Evaluator::new(fit, z);
    let blocks = monomials
        .iter()
        .map(|a| monomials.iter().map(|b| ev.acov(a, b)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let labels = paths.iter().map(|p| p.display(fit.graph())).collect();
    Ok(BlockCov::from_blocks(labels, &blocks, fit.t_len))
}

/// Joint covariance of `g^{Π_u}` over `u ∈ anc(v)`, for `Π ⊂ P(v, w)`.
pub fn acov_spectral_contribution(
    fit: &ModelFit,
    v: usize,
    paths: &[Path],
    z: FreqValue,
) -> Result<BlockCov, AsymError> {
    let g = fit.graph();
    let model = &fit.model;
    let anc = ancestors(g, v);
    let h_pi = total_effect(model, paths, z)?;
    let to_v: Vec<Vec<Path>> = anc
        .iter()
        .map(|&u| enumerate_paths(g, u, v))
        .collect::<Result<_, _>>()?;
    let g_to_v: Vec<FreqValue> = to_v
        .iter()
        .map(|ps| weighted_total(model, ps, z))
        .collect::<Result<_, _>>()?;
    let weighted: Vec<Vec<Monomial>> = to_v
        .iter()
        .map(|ps| ps.iter().map(Monomial::weighted_path).collect())
        .collect();
    let pi_monomials: Vec<Monomial> = paths.iter().map(Monomial::path).collect();
    let mut ev = Evaluator::new(fit, z);
    let acov_h = ev.acov_sums(&pi_monomials, &pi_monomials)?;
    let mh = h_pi.operator();
    let mut blocks = vec![vec![Matrix2::zeros(); anc.len()]; anc.len()];
    for i in 0..anc.len() {
        for j in 0..anc.len() {
            let acov_g = ev.acov_sums(&weighted[i], &weighted[j])?;
            blocks[i][j] = mh * acov_g * mh.transpose()
                + g_to_v[i].operator() * acov_h * g_to_v[j].operator().transpose();
        }
    }
    let labels = anc.iter().map(|&u| g.name(u).to_string()).collect();
    Ok(BlockCov::from_blocks(labels, &blocks, fit.t_len))
}

/// `M_{J·I} = D - C A^{-1} B` for the split of `m` into the indices `i` and
/// their complement `J`.
pub fn schur_complement(m: &DMatrix<f64>, i: &[usize]) -> Result<DMatrix<f64>, AsymError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    let j: Vec<usize> = (0..n).filter(|x| !i.contains(x)).collect();
    let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |a, b| m[(r[a], c[b])]);
    let a = sub(i, i);
    let b = sub(i, &j);
    let c = sub(&j, i);
    let d = sub(&j, &j);
    if i.is_empty() {
        return Ok(d);
    }
    let a_inv = a
        .try_inverse()
        .ok_or_else(|| AsymError::Singular("leading block of the Schur complement".into()))?;
    Ok(d - c * a_inv * b)
}
