//! Reference models used by tests, benchmarks and the command-line demos.

use rand::Rng;

use crate::graph::{ContempGraph, LagMap, ProcessGraph};
use crate::svar::{check_stability, SvarModel};

/// Univariate AR(1) `x(t) = φ x(t-1) + η(t)`.
pub fn ar1(phi: f64, omega: f64) -> SvarModel {
    let g = ProcessGraph::new(&["x"], &[]).unwrap();
    let g0 = ContempGraph::empty(&g);
    SvarModel::new(g, g0, vec![omega])
        .unwrap()
        .with_coeff("x", "x", 1, phi)
        .unwrap()
}

/// Independent white noise with the given variances.
pub fn white_noise(vars: &[f64]) -> SvarModel {
    let names: Vec<String> = (0..vars.len()).map(|i| format!("x{i}")).collect();
    let g = ProcessGraph::new(&names, &[]).unwrap();
    let g0 = ContempGraph::empty(&g);
    SvarModel::new(g, g0, vars.to_vec()).unwrap()
}

pub const FIVE_PROCESS_VERTICES: [&str; 5] = ["u1", "u2", "v", "m", "w"];
pub const FIVE_PROCESS_EDGES: [(&str, &str); 5] = [("u1", "v"), ("u2", "v"), ("v", "m"), ("v", "w"), ("m", "w")];

/// Process graph with two sources feeding `v`, which reaches `w` directly and
/// through the mediator `m`.
pub fn five_process_graph() -> ProcessGraph {
    ProcessGraph::new(&FIVE_PROCESS_VERTICES, &FIVE_PROCESS_EDGES).unwrap()
}

/// Contemporaneous graph admitting a lag-0 effect along every edge.
pub fn five_process_contemp(g: &ProcessGraph) -> ContempGraph {
    ContempGraph::new(g, &FIVE_PROCESS_EDGES).unwrap()
}

/// The synthetic five-process example with unit noise variances.
pub fn five_process_model() -> SvarModel {
    let g = five_process_graph();
    let g0 = five_process_contemp(&g);
    let coeffs = [
        ("u1", "u1", 1, 0.5),
        ("u2", "u2", 1, 0.5),
        ("v", "v", 1, 0.3),
        ("v", "v", 3, -0.5),
        ("u1", "v", 2, -0.25),
        ("u2", "v", 1, 0.5),
        ("m", "m", 1, 0.5),
        ("v", "m", 1, 0.5),
        ("v", "m", 2, 0.6),
        ("w", "w", 2, 0.5),
        ("v", "w", 2, 0.4),
        ("m", "w", 3, -0.3),
    ];
    let mut model = SvarModel::new(g, g0, vec![1.0; 5]).unwrap();
    for (u, v, k, c) in coeffs {
        model = model.with_coeff(u, v, k, c).unwrap();
    }
    model
}

/// Coarse lag knowledge for the example: every driver allowed by the graph
/// at every lag up to 3 (lag 0 along contemporaneous edges).
pub fn five_process_lags() -> LagMap {
    let g = five_process_graph();
    LagMap::from_named(
        &g,
        3,
        &[
            ("u1", vec![("u1", 1), ("u1", 2), ("u1", 3)]),
            ("u2", vec![("u2", 1), ("u2", 2), ("u2", 3)]),
            (
                "v",
                vec![
                    ("v", 1),
                    ("v", 2),
                    ("v", 3),
                    ("u1", 0),
                    ("u1", 1),
                    ("u1", 2),
                    ("u2", 0),
                    ("u2", 1),
                    ("u2", 2),
                    ("u2", 3),
                ],
            ),
            ("m", vec![("m", 1), ("m", 2), ("m", 3), ("v", 0), ("v", 1), ("v", 2), ("v", 3)]),
            (
                "w",
                vec![
                    ("w", 1),
                    ("w", 2),
                    ("w", 3),
                    ("v", 0),
                    ("v", 1),
                    ("v", 2),
                    ("v", 3),
                    ("m", 0),
                    ("m", 1),
                    ("m", 2),
                    ("m", 3),
                ],
            ),
        ],
    )
    .unwrap()
}

/// The true lagged parent sets of the example.
pub fn five_process_true_lags() -> LagMap {
    let g = five_process_graph();
    LagMap::from_named(
        &g,
        3,
        &[
            ("u1", vec![("u1", 1)]),
            ("u2", vec![("u2", 1)]),
            ("v", vec![("v", 1), ("v", 3), ("u1", 2), ("u2", 1)]),
            ("m", vec![("m", 1), ("v", 1), ("v", 2), ("v", 3)]),
            ("w", vec![("w", 2), ("v", 2), ("v", 3), ("m", 3)]),
        ],
    )
    .unwrap()
}

/// Random stable model on a random DAG, together with the full lag map of
/// order `q` over its structure.
///
/// Vertices are `x0..x{m-1}`; each forward pair is an edge with probability
/// one half, and each edge is contemporaneous with probability `p_contemp`.
/// Coefficients are drawn uniformly and rescaled until the companion spectral
/// radius is below 0.9.
pub fn random_model<R: Rng>(rng: &mut R, m: usize, q: usize, p_contemp: f64) -> (SvarModel, LagMap) {
    let names: Vec<String> = (0..m).map(|i| format!("x{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            if rng.random_bool(0.5) {
                edges.push((names[i].clone(), names[j].clone()));
            }
        }
    }
    let g = ProcessGraph::new(&names, &edges).unwrap();
    let contemp: Vec<(String, String)> = edges
        .iter()
        .filter(|_| rng.random_bool(p_contemp))
        .cloned()
        .collect();
    let g0 = ContempGraph::new(&g, &contemp).unwrap();
    let vars: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut draws = Vec::new();
    for v in 0..m {
        for k in 1..=q {
            draws.push((v, v, k, rng.random_range(-0.6..0.6)));
        }
        for u in g.parents(v).collect::<Vec<_>>() {
            let first = if g0.has_edge(u, v) { 0 } else { 1 };
            for k in first..=q {
                draws.push((u, v, k, rng.random_range(-0.6..0.6)));
            }
        }
    }
    let lags = LagMap::full(&g, &g0, q);
    let mut scale = 1.0;
    loop {
        let mut model = SvarModel::new(g.clone(), g0.clone(), vars.clone()).unwrap();
        for &(u, v, k, c) in &draws {
            // lag-0 effects are left unscaled so the structure stays generic
            let c = if k == 0 { c } else { c * scale };
            model.set_coeff(u, v, k, c).unwrap();
        }
        let r = check_stability(&model).unwrap();
        if r.spectral_radius < 0.9 {
            return (model, lags);
        }
        scale *= 0.8;
    }
}
