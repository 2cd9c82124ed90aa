//! Seeded random instances for tests, sweeps and the `generate` subcommand.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{build_transshipment, validate, Edge, LpInstance, NetworkSpec};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An instance with a known strictly positive feasible point.
#[derive(Debug, Clone)]
pub struct RandomLp {
    pub instance: LpInstance,
    pub feasible_point: DVector<f64>,
}

pub fn random_positive_point<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(lo..hi))
}

/// Dense `rows × cols` instance: entries of `A` uniform in `[-1, 1]`, costs
/// in `[0.5, 5]`, and `b = A x₀` for a random `x₀ ∈ [0.2, 2]^cols`. Draws
/// are repeated until `A` is comfortably full rank (condition number below
/// 1e3).
pub fn random_lp<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> RandomLp {
    assert!(rows >= 1 && rows <= cols, "need 1 <= rows <= cols");
    loop {
        let a = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
        let sv = a.clone().svd(false, false).singular_values;
        let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(*s), hi.max(*s)));
        if lo < 1e-3 * hi {
            continue;
        }
        let x0 = random_positive_point(rng, cols, 0.2, 2.0);
        let costs = DVector::from_fn(cols, |_, _| rng.gen_range(0.5..5.0));
        let instance = LpInstance { rhs: &a * &x0, constraint_matrix: a, costs, name: None };
        if validate(instance.clone()).is_ok() {
            return RandomLp { instance, feasible_point: x0 };
        }
    }
}

/// A connected network with `2..=max_nodes` nodes and up to `max_edges`
/// edges: a random spanning tree plus extra random edges. Supplies are the
/// divergence of a random positive flow, which is returned as the feasible
/// point.
pub fn random_network<R: Rng>(rng: &mut R, max_nodes: usize, max_edges: usize) -> (NetworkSpec, RandomLp) {
    assert!(max_nodes >= 2 && max_edges >= max_nodes - 1, "too few edges for a spanning tree");
    loop {
        let nodes = rng.gen_range(2..=max_nodes);
        let edge_count = rng.gen_range(nodes - 1..=max_edges);
        let mut edges = Vec::with_capacity(edge_count);
        for v in 1..nodes {
            let u = rng.gen_range(0..v);
            let (tail, head) = if rng.gen_bool(0.5) { (u, v) } else { (v, u) };
            edges.push(Edge { tail, head, cost: rng.gen_range(0.5..5.0) });
        }
        while edges.len() < edge_count {
            let tail = rng.gen_range(0..nodes);
            let head = (tail + rng.gen_range(1..nodes)) % nodes;
            edges.push(Edge { tail, head, cost: rng.gen_range(0.5..5.0) });
        }
        let flow = random_positive_point(rng, edge_count, 0.2, 2.0);
        let mut supplies = vec![0.0; nodes];
        for (e, f) in edges.iter().zip(flow.iter()) {
            supplies[e.tail] += f;
            supplies[e.head] -= f;
        }
        let spec = NetworkSpec { node_count: nodes, edges, supplies };
        let Ok(instance) = build_transshipment(&spec, None) else { continue };
        if validate(instance.clone()).is_ok() {
            return (spec, RandomLp { instance, feasible_point: flow });
        }
    }
}

/// Unit simplex over `cols` variables with costs uniform in `[0.5, 5]`.
pub fn random_simplex<R: Rng>(rng: &mut R, cols: usize) -> LpInstance {
    let costs: Vec<f64> = (0..cols).map(|_| rng.gen_range(0.5..5.0)).collect();
    LpInstance::simplex(&costs)
}

/// A random strictly positive point on the unit simplex.
pub fn random_simplex_point<R: Rng>(rng: &mut R, cols: usize) -> DVector<f64> {
    let raw = random_positive_point(rng, cols, 0.05, 1.0);
    let s = raw.sum();
    raw / s
}
