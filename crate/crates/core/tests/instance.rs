mod common;

use nalgebra::{DMatrix, DVector};
use physarum::instance::{build_transshipment, load, save, validate, Edge, NetworkSpec};
use physarum::LpInstance;
use proptest::prelude::*;

fn arb_instance() -> impl Strategy<Value = LpInstance> {
    (1usize..4, 0usize..4).prop_flat_map(|(m, extra)| {
        let n = m + extra;
        (
            prop::collection::vec(-1e6f64..1e6, m * n),
            prop::collection::vec(-1e3f64..1e3, m),
            prop::collection::vec(1e-9f64..1e9, n),
            prop::option::of("[a-z]{1,8}"),
        )
            .prop_map(move |(a, b, c, name)| LpInstance {
                constraint_matrix: DMatrix::from_row_slice(m, n, &a),
                rhs: DVector::from_vec(b),
                costs: DVector::from_vec(c),
                name,
            })
    })
}

/// A random spanning tree on `nodes` plus extra edges, random orientation.
fn arb_network() -> impl Strategy<Value = (NetworkSpec, usize)> {
    (2usize..7).prop_flat_map(|nodes| {
        (
            prop::collection::vec((any::<prop::sample::Index>(), any::<bool>(), 0.1f64..10.0), nodes - 1),
            prop::collection::vec((0..nodes, 0..nodes, 0.1f64..10.0), 0..5),
            prop::collection::vec(-5.0f64..5.0, nodes - 1),
            0..nodes,
        )
            .prop_map(move |(tree, extra, partial, ground)| {
                let mut edges = Vec::new();
                for (v, (parent, flip, cost)) in tree.into_iter().enumerate() {
                    let child = v + 1;
                    let p = parent.index(child);
                    let (tail, head) = if flip { (child, p) } else { (p, child) };
                    edges.push(Edge { tail, head, cost });
                }
                edges.extend(extra.into_iter().filter(|(a, b, _)| a != b).map(|(tail, head, cost)| Edge {
                    tail,
                    head,
                    cost,
                }));
                let mut supplies = partial;
                supplies.push(-supplies.iter().sum::<f64>());
                (NetworkSpec { node_count: nodes, edges, supplies }, ground)
            })
    })
}

proptest! {
    #[test]
    fn save_load_is_identity(instance in arb_instance()) {
        let back = load(&save(&instance)).unwrap();
        prop_assert_eq!(back, instance);
    }

    #[test]
    fn connected_networks_validate((spec, ground) in arb_network()) {
        let lp = build_transshipment(&spec, Some(ground)).unwrap();
        prop_assert_eq!(lp.num_constraints(), spec.node_count - 1);
        for col in lp.constraint_matrix.column_iter() {
            let plus = col.iter().filter(|v| **v == 1.0).count();
            let minus = col.iter().filter(|v| **v == -1.0).count();
            let zero = col.iter().filter(|v| **v == 0.0).count();
            prop_assert!(plus <= 1 && minus <= 1);
            prop_assert_eq!(plus + minus + zero, col.len());
        }
        // a network with zero supplies on all remaining nodes has b = 0
        if lp.rhs.iter().any(|b| *b != 0.0) {
            prop_assert!(validate(lp).is_ok());
        }
    }
}
