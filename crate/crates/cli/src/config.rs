//! Analysis configuration: a TOML document carrying the graph, lag map,
//! frequency grid, queries, preprocessing flags and optionally a model.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use serde::Deserialize;
use specaus_core::graph::{enumerate_paths, validate_lag_map, ContempGraph, LagMap, Path, ProcessGraph};
use specaus_core::{FrequencyGrid, SvarModel};

use crate::error::{io_at, CliError};

pub const SCHEMA: &str = "specaus-config/1";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub schema: String,
    pub graph: GraphSpec,
    pub lags: LagSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub queries: Vec<QuerySpec>,
    #[serde(default)]
    pub preprocess: BTreeMap<String, ColumnPrep>,
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub simulation: SimulationSpec,
    pub seed: Option<u64>,
}

fn default_confidence() -> f64 {
    0.95
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub contemporaneous: Vec<(String, String)>,
}

/// Lags per target and driver. Targets without an entry get every lag the
/// structure allows up to `order`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagSpec {
    pub order: usize,
    #[serde(default)]
    pub sets: BTreeMap<String, BTreeMap<String, Vec<usize>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub count: Option<usize>,
    pub angles: Option<Vec<f64>>,
    /// `[shortest, longest]` oscillation period in time steps.
    pub periods: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Direct,
    Path,
    Total,
    Contribution,
    Robust,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub id: Option<String>,
    pub kind: QueryKind,
    pub source: String,
    pub target: String,
    pub paths: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnPrep {
    #[serde(default)]
    pub demean: bool,
    /// Scale to unit variance; implies `demean`.
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub difference: bool,
    pub seasonal_average: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub noise: BTreeMap<String, f64>,
    #[serde(default)]
    pub coefficients: Vec<CoefficientSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub driver: String,
    pub target: String,
    pub lag: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub length: Option<usize>,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            burn_in: default_burn_in(),
            length: None,
        }
    }
}

fn default_burn_in() -> usize {
    specaus_core::svar::DEFAULT_BURN_IN
}

/// A query resolved against the graph.
#[derive(Debug, Clone)]
pub struct Query {
    pub id: String,
    pub kind: QueryKind,
    pub source: usize,
    pub target: usize,
    pub paths: Vec<Path>,
}

/// Configuration with every name resolved and checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: AnalysisConfig,
    pub graph: ProcessGraph,
    pub contemp: ContempGraph,
    pub lags: LagMap,
    pub grid: FrequencyGrid,
    pub queries: Vec<Query>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl AnalysisConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: AnalysisConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        if cfg.schema != SCHEMA {
            return Err(invalid(format!("schema `{}` is not supported, expected `{SCHEMA}`", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(io_at(path))?;
        Self::from_toml(&text)
    }

    pub fn resolve(self) -> Result<Resolved, CliError> {
        let graph = ProcessGraph::new(&self.graph.vertices, &self.graph.edges)?;
        let contemp = ContempGraph::new(&graph, &self.graph.contemporaneous)?;
        let mut lags = LagMap::full(&graph, &contemp, self.lags.order);
        for (target, drivers) in &self.lags.sets {
            let v = graph.resolve(target)?;
            let mut fresh = LagMap::new(graph.len(), self.lags.order);
            for (driver, ks) in drivers {
                let u = graph.resolve(driver)?;
                fresh.insert_range(v, u, ks.iter().copied());
            }
            lags = replace_target(&lags, &fresh, v);
        }
        validate_lag_map(&graph, &contemp, &lags).into_result()?;
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(invalid(format!("confidence {} is not in (0, 1)", self.confidence)));
        }
        let grid = self.grid.build()?;
        for name in self.preprocess.keys() {
            graph.resolve(name)?;
        }
        let mut queries = Vec::with_capacity(self.queries.len());
        for (i, q) in self.queries.iter().enumerate() {
            queries.push(resolve_query(&graph, q, i)?);
        }
        Ok(Resolved {
            config: self,
            graph,
            contemp,
            lags,
            grid,
            queries,
        })
    }
}

fn replace_target(base: &LagMap, fresh: &LagMap, v: usize) -> LagMap {
    let mut out = LagMap::new(base.n_vertices(), base.q());
    for x in 0..base.n_vertices() {
        let src = if x == v { fresh } else { base };
        for &(u, k) in src.lags(x) {
            out.insert(x, u, k);
        }
    }
    out
}

impl GridSpec {
    pub fn build(&self) -> Result<FrequencyGrid, CliError> {
        let given = [self.angles.is_some(), self.periods.is_some()].iter().filter(|&&b| b).count();
        if given > 1 {
            return Err(invalid("grid: give either angles or periods, not both"));
        }
        let grid_err = |e: specaus_core::freqdom::FreqError| invalid(format!("grid: {e}"));
        if let Some(angles) = &self.angles {
            return FrequencyGrid::from_angles(angles.clone()).map_err(grid_err);
        }
        let n = self.count.unwrap_or(specaus_core::freqdom::DEFAULT_GRID_SIZE);
        if n == 0 {
            return Err(invalid("grid: count must be positive"));
        }
        if let Some((lo, hi)) = self.periods {
            return FrequencyGrid::from_periods(lo, hi, n).map_err(grid_err);
        }
        Ok(FrequencyGrid::uniform(n))
    }
}

fn resolve_query(graph: &ProcessGraph, q: &QuerySpec, i: usize) -> Result<Query, CliError> {
    let source = graph.resolve(&q.source)?;
    let target = graph.resolve(&q.target)?;
    let id = q
        .id
        .clone()
        .unwrap_or_else(|| format!("{}-{}-{}-{i}", kind_name(q.kind), q.source, q.target));
    let explicit = match &q.paths {
        Some(ps) => Some(
            ps.iter()
                .map(|p| Path::from_names(graph, p))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    if let Some(ps) = &explicit {
        for p in ps {
            if p.source() != source || p.target() != target {
                return Err(invalid(format!(
                    "query `{id}`: path {} does not run from {} to {}",
                    p.display(graph),
                    q.source,
                    q.target
                )));
            }
        }
    }
    let paths = match q.kind {
        QueryKind::Direct | QueryKind::Robust => {
            if !graph.has_edge(source, target) {
                return Err(invalid(format!("query `{id}`: no edge {} -> {}", q.source, q.target)));
            }
            vec![Path::new(graph, vec![source, target])?]
        }
        QueryKind::Path => {
            let ps = match explicit {
                Some(ps) => ps,
                None => enumerate_paths(graph, source, target)?,
            };
            if ps.len() != 1 {
                return Err(invalid(format!(
                    "query `{id}`: a path query needs exactly one path, found {}",
                    ps.len()
                )));
            }
            ps
        }
        QueryKind::Total | QueryKind::Contribution => {
            let ps = match explicit {
                Some(ps) => ps,
                None => enumerate_paths(graph, source, target)?,
            };
            if ps.is_empty() {
                return Err(invalid(format!("query `{id}`: no path from {} to {}", q.source, q.target)));
            }
            ps
        }
    };
    if source == target {
        return Err(invalid(format!("query `{id}`: source and target coincide")));
    }
    Ok(Query {
        id,
        kind: q.kind,
        source,
        target,
        paths,
    })
}

pub fn kind_name(kind: QueryKind) -> &'static str {
    match kind {
        QueryKind::Direct => "direct",
        QueryKind::Path => "path",
        QueryKind::Total => "total",
        QueryKind::Contribution => "contribution",
        QueryKind::Robust => "robust",
    }
}

impl ModelSpec {
    pub fn build(&self, graph: &ProcessGraph, contemp: &ContempGraph) -> Result<SvarModel, CliError> {
        for name in self.noise.keys() {
            graph.resolve(name)?;
        }
        let noise = graph
            .names()
            .iter()
            .map(|n| self.noise.get(n).copied().unwrap_or(1.0))
            .collect();
        let mut model = SvarModel::new(graph.clone(), contemp.clone(), noise)?;
        for c in &self.coefficients {
            model = model.with_coeff(&c.driver, &c.target, c.lag, c.value)?;
        }
        Ok(model)
    }
}

/// Model section of a standalone model file: `[model]` as in the analysis
/// configuration.
#[derive(Debug, Clone, Deserialize)]
pub struct ModelFile {
    pub model: ModelSpec,
}

pub fn load_model_file(path: &FsPath) -> Result<ModelSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_at(path))?;
    let file: ModelFile = toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema = "specaus-config/1"
[graph]
vertices = ["a", "b", "c"]
edges = [["a", "b"], ["b", "c"]]
contemporaneous = [["a", "b"]]
[lags]
order = 2
"#;

    #[test]
    fn default_lags_are_full() {
        let r = AnalysisConfig::from_toml(BASE).unwrap().resolve().unwrap();
        assert_eq!(r.lags.driver_lags(1, 0), vec![0, 1, 2]);
        assert_eq!(r.lags.driver_lags(2, 1), vec![1, 2]);
        assert_eq!(r.grid.len(), 256);
    }

    #[test]
    fn explicit_sets_replace_a_target() {
        let text = format!("{BASE}[lags.sets.c]\nc = [1, 2]\nb = [1, 2]\n");
        let r = AnalysisConfig::from_toml(&text).unwrap().resolve().unwrap();
        assert_eq!(r.lags.lags(2).len(), 4);
        assert_eq!(r.lags.driver_lags(1, 0), vec![0, 1, 2]);
    }

    #[test]
    fn unknown_vertex_in_query_is_rejected() {
        let text = format!("{BASE}[[queries]]\nkind = \"total\"\nsource = \"a\"\ntarget = \"zz\"\n");
        let err = AnalysisConfig::from_toml(&text).unwrap().resolve().unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let err = AnalysisConfig::from_toml(&BASE.replace("config/1", "config/9")).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)));
    }

    #[test]
    fn period_grid_maps_to_angles() {
        let text = format!("{BASE}[grid]\nperiods = [8.0, 13.0]\ncount = 6\n");
        let r = AnalysisConfig::from_toml(&text).unwrap().resolve().unwrap();
        let a = r.grid.angles();
        assert_eq!(a.len(), 6);
        let pi = std::f64::consts::PI;
        assert!((a[0] - 2.0 * pi / 13.0).abs() < 1e-12);
        assert!((a[5] - 2.0 * pi / 8.0).abs() < 1e-12);
    }

    #[test]
    fn path_queries_need_one_path() {
        let text = format!(
            "{BASE}[[queries]]\nkind = \"path\"\nsource = \"a\"\ntarget = \"c\"\n[[queries]]\nkind = \"direct\"\nsource = \"a\"\ntarget = \"c\"\n"
        );
        let err = AnalysisConfig::from_toml(&text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("no edge a -> c"));
    }
}
