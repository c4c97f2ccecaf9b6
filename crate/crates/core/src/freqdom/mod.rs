//! Frequency-domain causal quantities of an SVAR model: lag polynomials,
//! link and internal functions, path and total effects, weighted path
//! functions and spectral contributions.

mod value;

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ancestors, enumerate_paths, GraphError, Path};
use crate::svar::SvarModel;

pub use value::FreqValue;

/// Minimum admissible `|1 - φ_{v,v}(z)|`.
pub const POLE_TOL: f64 = 1e-12;
/// Number of angles in the default grid.
pub const DEFAULT_GRID_SIZE: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FreqError {
    #[error("pole of the internal function of `{vertex}` at angle {angle:.6}")]
    Pole { vertex: String, angle: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid frequency grid: {0}")]
    Grid(String),
}

/// `Σ_k c_k z^k` by Horner's scheme over the dense coefficient vector.
pub fn lag_poly(coeffs: &[(usize, f64)], z: FreqValue) -> FreqValue {
    debug_assert!((z.abs() - 1.0).abs() < 1e-9, "z must lie on the unit circle");
    let Some(deg) = coeffs.iter().map(|&(k, _)| k).max() else {
        return FreqValue::ZERO;
    };
    let mut dense = vec![0.0; deg + 1];
    for &(k, c) in coeffs {
        dense[k] += c;
    }
    let mut acc = FreqValue::ZERO;
    for &c in dense.iter().rev() {
        acc = z * acc + FreqValue::real(c);
    }
    acc
}

/// `φ_{u,v}(z)` for the model's coefficients.
pub fn model_lag_poly(model: &SvarModel, u: usize, v: usize, z: FreqValue) -> FreqValue {
    lag_poly(&model.lag_coeffs(u, v), z)
}

fn denominator(model: &SvarModel, v: usize, z: FreqValue) -> Result<FreqValue, FreqError> {
    let d = FreqValue::ONE - model_lag_poly(model, v, v, z);
    if d.abs() < POLE_TOL {
        return Err(FreqError::Pole {
            vertex: model.graph().name(v).to_string(),
            angle: z.angle(),
        });
    }
    Ok(d)
}

/// `h_{u,v}(z) = φ_{u,v}(z) / (1 - φ_{v,v}(z))`.
pub fn link_function(model: &SvarModel, u: usize, v: usize, z: FreqValue) -> Result<FreqValue, FreqError> {
    let d = denominator(model, v, z)?;
    Ok(model_lag_poly(model, u, v, z) / d)
}

/// `f_v(z) = 1 / (1 - φ_{v,v}(z))`.
pub fn internal_function(model: &SvarModel, v: usize, z: FreqValue) -> Result<FreqValue, FreqError> {
    Ok(denominator(model, v, z)?.inv())
}

/// Product of the link functions along `path`; one for an empty path.
pub fn path_function(model: &SvarModel, path: &Path, z: FreqValue) -> Result<FreqValue, FreqError> {
    let mut acc = FreqValue::ONE;
    for (u, v) in path.edges() {
        acc = acc * link_function(model, u, v, z)?;
    }
    Ok(acc)
}

/// Sum of path functions over `paths`; zero for an empty set.
pub fn total_effect(model: &SvarModel, paths: &[Path], z: FreqValue) -> Result<FreqValue, FreqError> {
    paths.iter().map(|p| path_function(model, p, z)).sum()
}

/// `g^{(π)} = f_s · h^{(π)}` with `s` the source of `π`.
pub fn weighted_path_function(model: &SvarModel, path: &Path, z: FreqValue) -> Result<FreqValue, FreqError> {
    Ok(internal_function(model, path.source(), z)? * path_function(model, path, z)?)
}

/// Sum of weighted path functions over `paths`.
pub fn weighted_total(model: &SvarModel, paths: &[Path], z: FreqValue) -> Result<FreqValue, FreqError> {
    paths.iter().map(|p| weighted_path_function(model, p, z)).sum()
}

/// Spectral contribution of `v` to `w` along `Π ⊂ P(v, w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralContribution {
    pub total: f64,
    /// `(u, g^{Π_u}(z))` for each ancestor `u` of `v`, ascending.
    pub per_ancestor: Vec<(usize, FreqValue)>,
}

/// `S^Π(z) = Σ_{u ∈ anc(v)} ω_u |g^{P(u,v)}(z) h^Π(z)|²`.
pub fn spectral_contribution(
    model: &SvarModel,
    v: usize,
    w: usize,
    paths: &[Path],
    z: FreqValue,
) -> Result<SpectralContribution, FreqError> {
    for p in paths {
        if p.source() != v || p.target() != w {
            return Err(GraphError::InvalidPath(p.display(model.graph())).into());
        }
    }
    let h_pi = total_effect(model, paths, z)?;
    let mut total = 0.0;
    let mut per_ancestor = Vec::new();
    for u in ancestors(model.graph(), v) {
        let to_v = enumerate_paths(model.graph(), u, v)?;
        let g = weighted_total(model, &to_v, z)? * h_pi;
        total += model.noise_var(u) * g.norm_sqr();
        per_ancestor.push((u, g));
    }
    Ok(SpectralContribution { total, per_ancestor })
}

/// Spectral density of `v` as the sum of its ancestors' contributions.
pub fn trek_rule_diagonal(model: &SvarModel, v: usize, z: FreqValue) -> Result<f64, FreqError> {
    Ok(spectral_contribution(model, v, v, &[Path::empty(v)], z)?.total)
}

/// Angles in `[0, π]` at which curves are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    angles: Vec<f64>,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        FrequencyGrid::uniform(DEFAULT_GRID_SIZE)
    }
}

impl FrequencyGrid {
    /// `n` evenly spaced interior angles `π (i + 1) / (n + 1)`.
    pub fn uniform(n: usize) -> Self {
        let angles = (0..n).map(|i| PI * (i + 1) as f64 / (n + 1) as f64).collect();
        FrequencyGrid { angles }
    }

    /// Explicit angles, sorted ascending.
    pub fn from_angles(mut angles: Vec<f64>) -> Result<Self, FreqError> {
        if angles.is_empty() {
            return Err(FreqError::Grid("no angles".into()));
        }
        if let Some(a) = angles.iter().find(|a| !(0.0..=PI).contains(*a)) {
            return Err(FreqError::Grid(format!("angle {a} outside [0, π]")));
        }
        angles.sort_by(f64::total_cmp);
        angles.dedup();
        Ok(FrequencyGrid { angles })
    }

    /// `n` angles `2π / period` for periods evenly spaced in `[lo, hi]`.
    pub fn from_periods(lo: f64, hi: f64, n: usize) -> Result<Self, FreqError> {
        if !(lo >= 2.0 && hi >= lo && n > 0) {
            return Err(FreqError::Grid(format!(
                "period range [{lo}, {hi}] must satisfy 2 <= lo <= hi"
            )));
        }
        let periods: Vec<f64> = if n == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        FrequencyGrid::from_angles(periods.into_iter().map(|p| 2.0 * PI / p).collect())
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = FreqValue> + '_ {
        self.angles.iter().map(|&a| FreqValue::from_angle(a))
    }
}

/// A sampled frequency response; `None` marks a pole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCurve {
    pub angles: Vec<f64>,
    pub values: Vec<Option<FreqValue>>,
}

impl EffectCurve {
    /// Evaluates `f` on the grid. Poles become gaps; other errors abort.
    pub fn evaluate<F>(grid: &FrequencyGrid, f: F) -> Result<Self, FreqError>
    where
        F: Fn(FreqValue) -> Result<FreqValue, FreqError>,
    {
        let mut values = Vec::with_capacity(grid.len());
        for z in grid.points() {
            match f(z) {
                Ok(x) => values.push(Some(x)),
                Err(FreqError::Pole { .. }) => values.push(None),
                Err(e) => return Err(e),
            }
        }
        Ok(EffectCurve {
            angles: grid.angles().to_vec(),
            values,
        })
    }

    pub fn magnitudes(&self) -> Vec<Option<f64>> {
        self.values.iter().map(|v| v.map(FreqValue::abs)).collect()
    }

    pub fn gaps(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Columns `angle,re,im,magnitude`; gaps leave the last three empty.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["angle", "re", "im", "magnitude"])?;
        for (a, v) in self.angles.iter().zip(&self.values) {
            match v {
                Some(x) => wr.write_record([
                    a.to_string(),
                    x.re.to_string(),
                    x.im.to_string(),
                    x.abs().to_string(),
                ])?,
                None => wr.write_record([a.to_string(), String::new(), String::new(), String::new()])?,
            }
        }
        wr.flush()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .angles
            .iter()
            .zip(&self.values)
            .map(|(a, v)| match v {
                Some(x) => serde_json::json!({"angle": a, "re": x.re, "im": x.im, "magnitude": x.abs()}),
                None => serde_json::json!({"angle": a, "re": null, "im": null, "magnitude": null}),
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}
