//! Process graphs, contemporaneous DAGs, lag maps and path enumeration.
//!
//! Vertices are identified by name; internally every structure works with the
//! vertex index, i.e. the position of the name in the list the graph was built
//! from. That input order is also the canonical tie-break wherever an ordering
//! has to be chosen (topological sorts, regressor columns, block indices).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("duplicate vertex name `{0}`")]
    DuplicateVertex(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("self-loop on vertex `{0}`")]
    SelfLoop(String),
    #[error("contemporaneous edge {0} -> {1} is not an edge of the process graph")]
    NotInProcessGraph(String, String),
    #[error("contemporaneous graph contains a cycle through `{0}`")]
    Cycle(String),
    #[error("infinite path family from `{from}` to `{to}`: a cycle lies on a connecting route")]
    InfinitePathFamily { from: String, to: String },
    #[error("lag map violates the lag condition: {}", format_violations(.0))]
    LagMap(Vec<LagViolation>),
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

fn format_violations(v: &[LagViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Finite directed graph over the modelled processes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
}

impl ProcessGraph {
    pub fn new<S: AsRef<str>>(vertices: &[S], edges: &[(S, S)]) -> Result<Self, GraphError> {
        let names: Vec<String> = vertices.iter().map(|s| s.as_ref().to_string()).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(GraphError::DuplicateVertex(n.clone()));
            }
        }
        let mut g = ProcessGraph {
            parents: vec![BTreeSet::new(); names.len()],
            children: vec![BTreeSet::new(); names.len()],
            names,
            index,
        };
        for (u, v) in edges {
            let (u, v) = (g.resolve(u.as_ref())?, g.resolve(v.as_ref())?);
            if u == v {
                return Err(GraphError::SelfLoop(g.names[u].clone()));
            }
            g.parents[v].insert(u);
            g.children[u].insert(v);
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn resolve(&self, name: &str) -> Result<usize, GraphError> {
        self.index_of(name)
            .ok_or_else(|| GraphError::UnknownVertex(name.to_string()))
    }

    /// Parents of `v` in canonical vertex order.
    pub fn parents(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents[v].iter().copied()
    }

    pub fn children(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.children[v].iter().copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.parents[v].contains(&u)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (v, ps) in self.parents.iter().enumerate() {
            out.extend(ps.iter().map(|&u| (u, v)));
        }
        out.sort_unstable();
        out
    }

    fn reachable_from(&self, v: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(x) = stack.pop() {
            for y in self.children(x) {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    }

    fn reaching(&self, w: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![w];
        seen[w] = true;
        while let Some(x) = stack.pop() {
            for y in self.parents(x) {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    }
}

/// Acyclic graph of lag-zero effects; its edges are a subset of the process
/// graph's edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContempGraph {
    n: usize,
    parents: Vec<BTreeSet<usize>>,
    order: Vec<usize>,
}

impl ContempGraph {
    pub fn new<S: AsRef<str>>(graph: &ProcessGraph, edges: &[(S, S)]) -> Result<Self, GraphError> {
        let mut parents = vec![BTreeSet::new(); graph.len()];
        for (u, v) in edges {
            let (ui, vi) = (graph.resolve(u.as_ref())?, graph.resolve(v.as_ref())?);
            if !graph.has_edge(ui, vi) {
                return Err(GraphError::NotInProcessGraph(
                    u.as_ref().to_string(),
                    v.as_ref().to_string(),
                ));
            }
            parents[vi].insert(ui);
        }
        let order = kahn_order(&parents).map_err(|v| GraphError::Cycle(graph.name(v).to_string()))?;
        Ok(ContempGraph {
            n: graph.len(),
            parents,
            order,
        })
    }

    /// The contemporaneous graph without any edges.
    pub fn empty(graph: &ProcessGraph) -> Self {
        ContempGraph {
            n: graph.len(),
            parents: vec![BTreeSet::new(); graph.len()],
            order: (0..graph.len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn parents(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents[v].iter().copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.parents[v].contains(&u)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (v, ps) in self.parents.iter().enumerate() {
            out.extend(ps.iter().map(|&u| (u, v)));
        }
        out.sort_unstable();
        out
    }

    /// Deterministic topological order, ties broken by input vertex order.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }
}

/// Topological order of a contemporaneous graph as vertex indices.
pub fn topological_order(g0: &ContempGraph) -> Vec<usize> {
    g0.order.clone()
}

/// Kahn's algorithm always picking the smallest ready index. On a cycle the
/// error carries one vertex that could not be scheduled.
fn kahn_order(parents: &[BTreeSet<usize>]) -> Result<Vec<usize>, usize> {
    let n = parents.len();
    let mut indeg: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let mut children = vec![Vec::new(); n];
    for (v, ps) in parents.iter().enumerate() {
        for &u in ps {
            children[u].push(v);
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).find(|&v| indeg[v] > 0).unwrap_or(0))
    }
}

/// One (driver, lag) entry of a lag set.
pub type LagEntry = (usize, usize);

/// Per-vertex sets of `(driver, lag)` pairs plus the order bound `q`.
///
/// Each set is stored sorted by driver (canonical vertex order) and then by
/// lag, which is also the regressor column order used by the estimator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagMap {
    q: usize,
    sets: Vec<Vec<LagEntry>>,
}

impl LagMap {
    pub fn new(n_vertices: usize, q: usize) -> Self {
        LagMap {
            q,
            sets: vec![Vec::new(); n_vertices],
        }
    }

    /// Builds a lag map from named entries: `target -> [(driver, lag)]`.
    pub fn from_named<S: AsRef<str>>(
        graph: &ProcessGraph,
        q: usize,
        entries: &[(S, Vec<(S, usize)>)],
    ) -> Result<Self, GraphError> {
        let mut map = LagMap::new(graph.len(), q);
        for (target, lags) in entries {
            let v = graph.resolve(target.as_ref())?;
            for (driver, k) in lags {
                map.insert(v, graph.resolve(driver.as_ref())?, *k);
            }
        }
        Ok(map)
    }

    pub fn insert(&mut self, target: usize, driver: usize, lag: usize) {
        let set = &mut self.sets[target];
        if let Err(pos) = set.binary_search(&(driver, lag)) {
            set.insert(pos, (driver, lag));
        }
    }

    /// Inserts `driver` at every lag in `lags`.
    pub fn insert_range(&mut self, target: usize, driver: usize, lags: impl IntoIterator<Item = usize>) {
        for k in lags {
            self.insert(target, driver, k);
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_vertices(&self) -> usize {
        self.sets.len()
    }

    pub fn lags(&self, target: usize) -> &[LagEntry] {
        &self.sets[target]
    }

    /// Lags with which `driver` enters the regression of `target`, ascending.
    pub fn driver_lags(&self, target: usize, driver: usize) -> Vec<usize> {
        self.sets[target]
            .iter()
            .filter(|(u, _)| *u == driver)
            .map(|&(_, k)| k)
            .collect()
    }

    pub fn contains(&self, target: usize, driver: usize, lag: usize) -> bool {
        self.sets[target].binary_search(&(driver, lag)).is_ok()
    }

    pub fn is_subset_of(&self, other: &LagMap) -> bool {
        self.sets.len() == other.sets.len()
            && self
                .sets
                .iter()
                .enumerate()
                .all(|(v, s)| s.iter().all(|&(u, k)| other.contains(v, u, k)))
    }

    /// The largest lag bound the structure admits: every parent at lags
    /// `0..=q` (lag 0 only for contemporaneous parents) and the vertex itself
    /// at lags `1..=q`.
    pub fn full(graph: &ProcessGraph, g0: &ContempGraph, q: usize) -> Self {
        let mut map = LagMap::new(graph.len(), q);
        for v in 0..graph.len() {
            for u in graph.parents(v).collect::<Vec<_>>() {
                let start = if g0.has_edge(u, v) { 0 } else { 1 };
                map.insert_range(v, u, start..=q);
            }
            map.insert_range(v, v, 1..=q);
        }
        map
    }

    pub fn to_named(&self, graph: &ProcessGraph) -> BTreeMap<String, BTreeMap<String, Vec<usize>>> {
        let mut out = BTreeMap::new();
        for (v, set) in self.sets.iter().enumerate() {
            let mut per: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            for &(u, k) in set {
                per.entry(graph.name(u).to_string()).or_default().push(k);
            }
            out.insert(graph.name(v).to_string(), per);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Lag-zero entry whose driver is not a contemporaneous parent.
    NotContemporaneousParent,
    /// Positive-lag entry whose driver is neither the target nor a parent.
    NotParent,
    /// Lag larger than the order bound.
    ExceedsOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagViolation {
    pub target: String,
    pub driver: String,
    pub lag: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for LagViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let why = match self.kind {
            ViolationKind::NotContemporaneousParent => "lag 0 from a non-contemporaneous parent",
            ViolationKind::NotParent => "driver is neither the target nor a parent",
            ViolationKind::ExceedsOrder => "lag exceeds the order bound",
        };
        write!(f, "({}, {}, {}): {}", self.target, self.driver, self.lag, why)
    }
}

/// Whether the lags of one driver satisfy AL2 (none, or at least two).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Al2Status {
    pub target: String,
    pub driver: String,
    pub n_lags: usize,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagMapReport {
    pub violations: Vec<LagViolation>,
    pub al2: Vec<Al2Status>,
}

impl LagMapReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn al2_holds(&self) -> bool {
        self.al2.iter().all(|s| s.satisfied)
    }

    pub fn al2_holds_for(&self, target: &str) -> bool {
        self.al2.iter().filter(|s| s.target == target).all(|s| s.satisfied)
    }

    pub fn into_result(self) -> Result<Self, GraphError> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(GraphError::LagMap(self.violations))
        }
    }
}

/// Checks the lag condition for every vertex and reports AL2 per
/// (target, driver) pair, listing drivers in `pa(v) ∪ {v}`.
pub fn validate_lag_map(g: &ProcessGraph, g0: &ContempGraph, lags: &LagMap) -> LagMapReport {
    let mut violations = Vec::new();
    let mut al2 = Vec::new();
    for v in 0..g.len() {
        for &(u, k) in lags.lags(v) {
            let kind = if k > lags.q() {
                Some(ViolationKind::ExceedsOrder)
            } else if k == 0 && !g0.has_edge(u, v) {
                Some(ViolationKind::NotContemporaneousParent)
            } else if k > 0 && u != v && !g.has_edge(u, v) {
                Some(ViolationKind::NotParent)
            } else {
                None
            };
            if let Some(kind) = kind {
                violations.push(LagViolation {
                    target: g.name(v).to_string(),
                    driver: g.name(u).to_string(),
                    lag: k,
                    kind,
                });
            }
        }
        let mut drivers: BTreeSet<usize> = g.parents(v).collect();
        drivers.insert(v);
        drivers.extend(lags.lags(v).iter().map(|&(u, _)| u));
        for u in drivers {
            let n = lags.driver_lags(v, u).len();
            al2.push(Al2Status {
                target: g.name(v).to_string(),
                driver: g.name(u).to_string(),
                n_lags: n,
                satisfied: n != 1,
            });
        }
    }
    LagMapReport { violations, al2 }
}

/// Directed path given as its vertex sequence. A single vertex is the empty
/// path at that vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(Vec<usize>);

impl Path {
    pub fn empty(v: usize) -> Self {
        Path(vec![v])
    }

    /// Validates that consecutive vertices are edges and no vertex repeats.
    pub fn new(graph: &ProcessGraph, vertices: Vec<usize>) -> Result<Self, GraphError> {
        if vertices.is_empty() {
            return Err(GraphError::InvalidPath("a path needs at least one vertex".into()));
        }
        for w in vertices.windows(2) {
            if !graph.has_edge(w[0], w[1]) {
                return Err(GraphError::InvalidPath(format!(
                    "{} -> {} is not an edge",
                    graph.name(w[0]),
                    graph.name(w[1])
                )));
            }
        }
        let distinct: BTreeSet<_> = vertices.iter().collect();
        if distinct.len() != vertices.len() {
            return Err(GraphError::InvalidPath("vertices repeat".into()));
        }
        Ok(Path(vertices))
    }

    pub fn from_names<S: AsRef<str>>(graph: &ProcessGraph, names: &[S]) -> Result<Self, GraphError> {
        let vs = names
            .iter()
            .map(|n| graph.resolve(n.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Path::new(graph, vs)
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn source(&self) -> usize {
        self.0[0]
    }

    pub fn target(&self) -> usize {
        *self.0.last().expect("paths are never empty")
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 1
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.0.len() - 1
    }

    /// Edges `(x, y)` in order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    /// `self` followed by `other`; the target of `self` must be the source of
    /// `other`.
    pub fn concat(&self, other: &Path) -> Path {
        assert_eq!(self.target(), other.source(), "paths do not meet");
        let mut vs = self.0.clone();
        vs.extend_from_slice(&other.0[1..]);
        Path(vs)
    }

    pub fn display(&self, graph: &ProcessGraph) -> String {
        self.0
            .iter()
            .map(|&v| graph.name(v))
            .collect::<Vec<_>>()
            .join("->")
    }
}

/// All simple directed paths from `v` to `w`, sorted. Fails when a directed
/// cycle lies on some route from `v` to `w`, since the path family is then
/// infinite.
pub fn enumerate_paths(g: &ProcessGraph, v: usize, w: usize) -> Result<Vec<Path>, GraphError> {
    let from_v = g.reachable_from(v);
    let to_w = g.reaching(w);
    if !from_v[w] {
        return Ok(Vec::new());
    }
    let relevant: Vec<bool> = (0..g.len()).map(|x| from_v[x] && to_w[x]).collect();
    let sub: Vec<BTreeSet<usize>> = (0..g.len())
        .map(|x| {
            if relevant[x] {
                g.parents(x).filter(|&u| relevant[u]).collect()
            } else {
                BTreeSet::new()
            }
        })
        .collect();
    if kahn_order(&sub).is_err() {
        return Err(GraphError::InfinitePathFamily {
            from: g.name(v).to_string(),
            to: g.name(w).to_string(),
        });
    }
    let mut out = Vec::new();
    let mut stack = vec![v];
    dfs_paths(g, w, &relevant, &mut stack, &mut out);
    out.sort();
    Ok(out)
}

fn dfs_paths(g: &ProcessGraph, w: usize, relevant: &[bool], stack: &mut Vec<usize>, out: &mut Vec<Path>) {
    let x = *stack.last().unwrap();
    if x == w {
        out.push(Path(stack.clone()));
        return;
    }
    for y in g.children(x) {
        if relevant[y] && !stack.contains(&y) {
            stack.push(y);
            dfs_paths(g, w, relevant, stack, out);
            stack.pop();
        }
    }
}

/// Vertices with a directed path to `v`, including `v` itself, ascending.
pub fn ancestors(g: &ProcessGraph, v: usize) -> Vec<usize> {
    g.reaching(v)
        .iter()
        .enumerate()
        .filter_map(|(i, &r)| r.then_some(i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Process graph of the five-vertex mediation example.
    fn mediation() -> ProcessGraph {
        ProcessGraph::new(
            &["u1", "u2", "v", "m", "w"],
            &[("u1", "v"), ("u2", "v"), ("v", "m"), ("v", "w"), ("m", "w")],
        )
        .unwrap()
    }

    fn names(g: &ProcessGraph, p: &Path) -> String {
        p.display(g)
    }

    #[test]
    fn lag_map_of_the_introductory_example_is_valid() {
        let g = ProcessGraph::new(&["u1", "u2", "v"], &[("u1", "v"), ("u2", "v")]).unwrap();
        let g0 = ContempGraph::new(&g, &[("u1", "v"), ("u2", "v")]).unwrap();
        let lags = LagMap::from_named(
            &g,
            2,
            &[(
                "v",
                vec![("u1", 0), ("u1", 1), ("u2", 0), ("u2", 1), ("u2", 2), ("v", 1), ("v", 2)],
            )],
        )
        .unwrap();
        let report = validate_lag_map(&g, &g0, &lags);
        assert!(report.is_valid(), "{:?}", report.violations);
        assert!(report.al2_holds_for("v"));
        let cols: Vec<_> = lags.lags(2).iter().map(|&(u, k)| (g.name(u), k)).collect();
        assert_eq!(
            cols,
            vec![("u1", 0), ("u1", 1), ("u2", 0), ("u2", 1), ("u2", 2), ("v", 1), ("v", 2)]
        );
    }

    #[test]
    fn lag_zero_from_non_contemporaneous_parent_is_reported() {
        let g = mediation();
        let g0 = ContempGraph::new(&g, &[("u1", "v")]).unwrap();
        let lags = LagMap::from_named(&g, 2, &[("v", vec![("u2", 0), ("u2", 1)])]).unwrap();
        let report = validate_lag_map(&g, &g0, &lags);
        assert_eq!(report.violations.len(), 1);
        let viol = &report.violations[0];
        assert_eq!((viol.target.as_str(), viol.driver.as_str(), viol.lag), ("v", "u2", 0));
        assert_eq!(viol.kind, ViolationKind::NotContemporaneousParent);
        assert!(matches!(report.into_result(), Err(GraphError::LagMap(_))));
    }

    #[test]
    fn non_parent_and_excess_lags_are_reported() {
        let g = mediation();
        let g0 = ContempGraph::empty(&g);
        let lags = LagMap::from_named(&g, 2, &[("v", vec![("w", 1), ("v", 3)])]).unwrap();
        let kinds: Vec<_> = validate_lag_map(&g, &g0, &lags)
            .violations
            .into_iter()
            .map(|v| v.kind)
            .collect();
        assert!(kinds.contains(&ViolationKind::NotParent));
        assert!(kinds.contains(&ViolationKind::ExceedsOrder));
    }

    #[test]
    fn single_lag_driver_violates_al2() {
        let g = mediation();
        let g0 = ContempGraph::empty(&g);
        let lags = LagMap::from_named(&g, 3, &[("v", vec![("u1", 3)])]).unwrap();
        let report = validate_lag_map(&g, &g0, &lags);
        assert!(report.is_valid());
        let st = report
            .al2
            .iter()
            .find(|s| s.target == "v" && s.driver == "u1")
            .unwrap();
        assert!(!st.satisfied);
        assert_eq!(st.n_lags, 1);
        // drivers without lags are fine
        assert!(report.al2.iter().find(|s| s.target == "v" && s.driver == "u2").unwrap().satisfied);
    }

    #[test]
    fn paths_in_the_mediation_graph() {
        let g = mediation();
        let v = g.resolve("v").unwrap();
        let w = g.resolve("w").unwrap();
        let paths = enumerate_paths(&g, v, w).unwrap();
        let got: Vec<_> = paths.iter().map(|p| names(&g, p)).collect();
        assert_eq!(got, vec!["v->m->w", "v->w"]);
        let eps = enumerate_paths(&g, v, v).unwrap();
        assert_eq!(eps, vec![Path::empty(v)]);
        assert!(enumerate_paths(&g, w, v).unwrap().is_empty());
    }

    #[test]
    fn chain_has_one_path() {
        let g = ProcessGraph::new(&["1", "2", "3"], &[("1", "2"), ("2", "3")]).unwrap();
        let p = enumerate_paths(&g, 0, 2).unwrap();
        assert_eq!(p, vec![Path(vec![0, 1, 2])]);
    }

    #[test]
    fn cycle_on_route_is_an_error_but_elsewhere_is_not() {
        let g = ProcessGraph::new(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "a"), ("b", "c"), ("d", "c"), ("c", "d")],
        )
        .unwrap();
        assert!(matches!(
            enumerate_paths(&g, 0, 2),
            Err(GraphError::InfinitePathFamily { .. })
        ));
        // a -> b with the a<->b cycle on the route
        assert!(enumerate_paths(&g, 0, 1).is_err());
        let h = ProcessGraph::new(&["a", "b", "c", "d"], &[("a", "b"), ("c", "d"), ("d", "c")]).unwrap();
        assert_eq!(enumerate_paths(&h, 0, 1).unwrap().len(), 1);
    }

    #[test]
    fn ancestors_examples() {
        let g = mediation();
        let v = g.resolve("v").unwrap();
        let w = g.resolve("w").unwrap();
        assert_eq!(ancestors(&g, v), vec![0, 1, 2]);
        assert_eq!(ancestors(&g, w), vec![0, 1, 2, 3, 4]);
        let iso = ProcessGraph::new(&["x", "y"], &[] as &[(&str, &str)]).unwrap();
        assert_eq!(ancestors(&iso, 0), vec![0]);
    }

    #[test]
    fn topological_orders() {
        let g = ProcessGraph::new(&["a", "b"], &[("a", "b")]).unwrap();
        assert_eq!(topological_order(&ContempGraph::new(&g, &[("a", "b")]).unwrap()), vec![0, 1]);

        let g = ProcessGraph::new(&["c", "a", "b"], &[] as &[(&str, &str)]).unwrap();
        assert_eq!(topological_order(&ContempGraph::empty(&g)), vec![0, 1, 2]);

        let g = ProcessGraph::new(&["a", "b", "c"], &[("a", "c"), ("b", "c")]).unwrap();
        let g0 = ContempGraph::new(&g, &[("a", "c"), ("b", "c")]).unwrap();
        assert_eq!(topological_order(&g0), vec![0, 1, 2]);

        let g = ProcessGraph::new(&["c", "a"], &[("a", "c")]).unwrap();
        let g0 = ContempGraph::new(&g, &[("a", "c")]).unwrap();
        assert_eq!(topological_order(&g0), vec![1, 0]);
    }

    #[test]
    fn contemporaneous_cycles_and_foreign_edges_are_rejected() {
        let g = ProcessGraph::new(&["a", "b"], &[("a", "b"), ("b", "a")]).unwrap();
        assert!(matches!(
            ContempGraph::new(&g, &[("a", "b"), ("b", "a")]),
            Err(GraphError::Cycle(_))
        ));
        let g = ProcessGraph::new(&["a", "b"], &[("a", "b")]).unwrap();
        assert!(matches!(
            ContempGraph::new(&g, &[("b", "a")]),
            Err(GraphError::NotInProcessGraph(..))
        ));
        assert!(matches!(
            ProcessGraph::new(&["a"], &[("a", "a")]),
            Err(GraphError::SelfLoop(_))
        ));
    }
}
