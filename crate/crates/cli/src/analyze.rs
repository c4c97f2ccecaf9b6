//! Per-query, per-frequency estimates, intervals and tests.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use specaus_core::asymptotics::genericity_check;
use specaus_core::estimate::ModelFit;
use specaus_core::inference::{infer_robust, infer_spectral_contribution, infer_total_effect, NormInterval, WaldReport};
use specaus_core::FreqValue;

use crate::config::{kind_name, Query, QueryKind, Resolved};
use crate::error::CliError;

pub const RESULT_SCHEMA: &str = "specaus-result/1";

#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
}

impl From<FreqValue> for Estimate {
    fn from(x: FreqValue) -> Self {
        Estimate {
            re: x.re,
            im: x.im,
            magnitude: x.abs(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub squared: bool,
}

impl From<NormInterval> for Interval {
    fn from(iv: NormInterval) -> Self {
        Interval {
            lo: iv.lo,
            hi: iv.hi,
            squared: iv.squared,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Test {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub critical_value: f64,
    pub reject: bool,
}

impl From<&WaldReport> for Test {
    fn from(w: &WaldReport) -> Self {
        Test {
            statistic: w.statistic,
            dof: w.dof,
            p_value: w.p_value,
            critical_value: w.critical_value,
            reject: w.reject,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexDiagnostics {
    pub vertex: String,
    pub condition: f64,
    pub det_a_v: Option<f64>,
    pub min_singular: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub vertices: Vec<VertexDiagnostics>,
    pub max_condition: f64,
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Contribution {
    pub ancestor: String,
    pub value: f64,
    pub interval: Interval,
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub angle: f64,
    /// For contribution queries the real part holds the total contribution.
    pub estimate: Option<Estimate>,
    pub interval: Option<Interval>,
    pub test: Option<Test>,
    pub contributions: Vec<Contribution>,
    pub diagnostics: Diagnostics,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub id: String,
    pub kind: &'static str,
    pub source: String,
    pub target: String,
    pub paths: Vec<Vec<String>>,
    pub status: &'static str,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisOutput {
    pub schema: &'static str,
    pub confidence: f64,
    #[serde(rename = "T")]
    pub t_len: usize,
    pub vertices: Vec<String>,
    pub fit_warnings: Vec<String>,
    pub records: Vec<ResultRecord>,
}

fn diagnostics(fit: &ModelFit, vertices: &[usize], z: FreqValue) -> Diagnostics {
    let g = fit.graph();
    let mut out = Vec::with_capacity(vertices.len());
    let mut warnings = Vec::new();
    for &v in vertices {
        let condition = fit.fits[v].condition;
        let (det, sing, degenerate) = match genericity_check(fit, v, z) {
            Ok(r) => (Some(r.det_a_v), Some(r.min_singular), r.is_degenerate()),
            Err(e) => {
                warnings.push(format!("{}: {e}", g.name(v)));
                (None, None, true)
            }
        };
        out.push(VertexDiagnostics {
            vertex: g.name(v).to_string(),
            condition,
            det_a_v: det,
            min_singular: sing,
            degenerate,
        });
    }
    Diagnostics {
        max_condition: out.iter().map(|d| d.condition).fold(0.0, f64::max),
        degenerate: out.iter().any(|d| d.degenerate),
        vertices: out,
        warnings,
    }
}

fn row(fit: &ModelFit, q: &Query, vertices: &[usize], angle: f64, alpha: f64) -> Row {
    let z = FreqValue::from_angle(angle);
    let mut row = Row {
        angle,
        estimate: None,
        interval: None,
        test: None,
        contributions: Vec::new(),
        diagnostics: diagnostics(fit, vertices, z),
        error: None,
    };
    let result = match q.kind {
        QueryKind::Direct | QueryKind::Path | QueryKind::Total => infer_total_effect(fit, &q.paths, z, alpha).map(|e| {
            row.estimate = Some(e.estimate.into());
            row.interval = Some(e.interval.into());
            row.test = Some((&e.test).into());
            e.warnings
        }),
        QueryKind::Robust => infer_robust(fit, q.source, q.target, z, alpha).map(|e| {
            row.estimate = Some(e.estimate.into());
            row.interval = Some(e.interval.into());
            row.test = Some((&e.test).into());
            e.warnings
        }),
        QueryKind::Contribution => infer_spectral_contribution(fit, &q.paths, z, alpha).map(|(test, per)| {
            let total: f64 = per.iter().map(|c| c.contribution).sum();
            row.estimate = Some(Estimate {
                re: total,
                im: 0.0,
                magnitude: total,
            });
            row.test = Some((&test).into());
            let mut warnings = Vec::new();
            for c in per {
                warnings.extend(c.warnings);
                row.contributions.push(Contribution {
                    ancestor: fit.graph().name(c.ancestor).to_string(),
                    value: c.contribution,
                    interval: c.interval.into(),
                });
            }
            warnings
        }),
    };
    match result {
        Ok(w) => row.diagnostics.warnings.extend(w),
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

pub fn run(fit: &ModelFit, resolved: &Resolved, alpha: f64, angles: &[f64]) -> AnalysisOutput {
    let g = fit.graph();
    let records = resolved
        .queries
        .iter()
        .map(|q| {
            let vertices = involved_in(fit, q);
            let rows: Vec<Row> = angles.par_iter().map(|&a| row(fit, q, &vertices, a, alpha)).collect();
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            let status = match failed {
                0 => "ok",
                n if n == rows.len() => "failed",
                _ => "partial",
            };
            if failed > 0 {
                log::warn!("query `{}`: {failed} of {} frequencies failed", q.id, rows.len());
            }
            ResultRecord {
                id: q.id.clone(),
                kind: kind_name(q.kind),
                source: g.name(q.source).to_string(),
                target: g.name(q.target).to_string(),
                paths: q
                    .paths
                    .iter()
                    .map(|p| p.vertices().iter().map(|&v| g.name(v).to_string()).collect())
                    .collect(),
                status,
                rows,
            }
        })
        .collect();
    AnalysisOutput {
        schema: RESULT_SCHEMA,
        confidence: alpha,
        t_len: fit.t_len,
        vertices: g.names().to_vec(),
        fit_warnings: fit.warnings.clone(),
        records,
    }
}

/// Vertices whose link functions enter the query.
fn involved_in(fit: &ModelFit, q: &Query) -> Vec<usize> {
    let mut vs: Vec<usize> = match q.kind {
        QueryKind::Robust => vec![q.target],
        _ => q.paths.iter().flat_map(|p| p.vertices()[1..].to_vec()).collect(),
    };
    if q.kind == QueryKind::Contribution {
        vs.push(q.source);
        vs.extend(specaus_core::graph::ancestors(fit.graph(), q.source));
    }
    vs.sort_unstable();
    vs.dedup();
    vs
}

/// Formats `x` with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding may carry into a new digit, e.g. 9.999996 -> 10.00000
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        let digits = s.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
        if digits.trim_start_matches('0').len() > 6 {
            return sig6(s.parse().unwrap_or(x));
        }
        s
    } else {
        format!("{x:.5e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

/// One line per query, frequency and component. Effects use the component
/// `effect`; contribution queries add one line per ancestor plus `total`.
pub fn write_csv<W: Write>(out: &AnalysisOutput, w: W) -> Result<(), CliError> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| CliError::Io(e.to_string());
    wr.write_record([
        "query", "kind", "component", "angle", "re", "im", "magnitude", "lo", "hi", "squared", "p_value", "reject",
        "degenerate", "error",
    ])
    .map_err(err)?;
    for rec in &out.records {
        for r in &rec.rows {
            let test = r.test.as_ref();
            let p = opt(test.map(|t| t.p_value));
            let reject = test.map(|t| t.reject.to_string()).unwrap_or_default();
            let degenerate = r.diagnostics.degenerate.to_string();
            let error = r.error.clone().unwrap_or_default();
            let main = if rec.kind == "contribution" { "total" } else { "effect" };
            let est = r.estimate.as_ref();
            let iv = r.interval.as_ref();
            wr.write_record([
                rec.id.as_str(),
                rec.kind,
                main,
                &sig6(r.angle),
                &opt(est.map(|e| e.re)),
                &opt(est.map(|e| e.im)),
                &opt(est.map(|e| e.magnitude)),
                &opt(iv.map(|i| i.lo)),
                &opt(iv.map(|i| i.hi)),
                &iv.map(|i| i.squared.to_string()).unwrap_or_default(),
                &p,
                &reject,
                &degenerate,
                &error,
            ])
            .map_err(err)?;
            for c in &r.contributions {
                wr.write_record([
                    rec.id.as_str(),
                    rec.kind,
                    &c.ancestor,
                    &sig6(r.angle),
                    &sig6(c.value),
                    "0",
                    &sig6(c.value),
                    &sig6(c.interval.lo),
                    &sig6(c.interval.hi),
                    &c.interval.squared.to_string(),
                    "",
                    "",
                    &degenerate,
                    "",
                ])
                .map_err(err)?;
            }
        }
    }
    wr.flush().map_err(CliError::from)
}
