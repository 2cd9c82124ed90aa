//! Linear programs in standard equality form `min cᵀx, A x = b, x ≥ 0`.
//!
//! Also home to the transshipment builder for network instances and the
//! JSON file formats.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Relative singular-value cutoff for the numerical rank test.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    pub constraint_matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub costs: DVector<f64>,
    pub name: Option<String>,
}

/// An instance that passed [`validate`], together with its numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedInstance {
    instance: LpInstance,
    rank: usize,
}

impl ValidatedInstance {
    pub fn instance(&self) -> &LpInstance {
        &self.instance
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn into_inner(self) -> LpInstance {
        self.instance
    }
}

impl std::ops::Deref for ValidatedInstance {
    type Target = LpInstance;

    fn deref(&self) -> &LpInstance {
        &self.instance
    }
}

impl LpInstance {
    /// Builds an instance from row-major data. Only shapes are checked here.
    pub fn from_rows(rows: &[Vec<f64>], rhs: &[f64], costs: &[f64]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Parse {
                location: format!("A[{i}]"),
                message: format!("row has {} entries, expected {n}", row.len()),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let instance = LpInstance {
            constraint_matrix: DMatrix::from_row_slice(m, n, &flat),
            rhs: DVector::from_column_slice(rhs),
            costs: DVector::from_column_slice(costs),
            name: None,
        };
        instance.check_shapes()?;
        Ok(instance)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Unit simplex `1ᵀx = 1` with the given costs.
    pub fn simplex(costs: &[f64]) -> Self {
        let n = costs.len();
        LpInstance {
            constraint_matrix: DMatrix::from_element(1, n, 1.0),
            rhs: DVector::from_element(1, 1.0),
            costs: DVector::from_column_slice(costs),
            name: None,
        }
    }

    /// |N|
    pub fn num_constraints(&self) -> usize {
        self.constraint_matrix.nrows()
    }

    /// |E|
    pub fn num_variables(&self) -> usize {
        self.constraint_matrix.ncols()
    }

    /// `A = 1ᵀ` and `b = 1`, exactly.
    pub fn is_unit_simplex(&self) -> bool {
        self.num_constraints() == 1 && self.rhs[0] == 1.0 && self.constraint_matrix.iter().all(|&v| v == 1.0)
    }

    /// `‖A x − b‖₂`.
    pub fn infeasibility(&self, x: &DVector<f64>) -> f64 {
        (&self.constraint_matrix * x - &self.rhs).norm()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.constraint_matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    fn check_shapes(&self) -> Result<()> {
        let (m, n) = self.constraint_matrix.shape();
        if self.rhs.len() != m {
            return Err(Error::DimensionMismatch {
                context: "rhs length vs rows of A",
                expected: m,
                found: self.rhs.len(),
            });
        }
        if self.costs.len() != n {
            return Err(Error::DimensionMismatch {
                context: "costs length vs columns of A",
                expected: n,
                found: self.costs.len(),
            });
        }
        Ok(())
    }
}

/// Numerical rank of `a` by SVD, cutting singular values below
/// `RANK_TOLERANCE × σ_max`.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let largest = sv.iter().copied().fold(0.0f64, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * largest).count()
}

/// Checks the standing assumptions: nonempty, consistent shapes, finite
/// entries, positive costs, nonzero `b` and full row rank.
pub fn validate(instance: LpInstance) -> Result<ValidatedInstance> {
    let (m, n) = instance.constraint_matrix.shape();
    if m == 0 || n == 0 {
        return Err(Error::EmptyInstance);
    }
    instance.check_shapes()?;
    if instance.constraint_matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("A"));
    }
    if instance.rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("b"));
    }
    if let Some((index, &value)) = instance.costs.iter().enumerate().find(|(_, c)| !(c.is_finite() && **c > 0.0)) {
        return Err(Error::NonPositiveCost { index, value });
    }
    if instance.rhs.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroRhs);
    }
    let rank = numerical_rank(&instance.constraint_matrix);
    if rank < m {
        return Err(Error::RankDeficient { rank, rows: m });
    }
    Ok(ValidatedInstance { instance, rank })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub node_count: usize,
    pub edges: Vec<Edge>,
    /// Net supply per node; positive means current injected.
    pub supplies: Vec<f64>,
}

/// Signed incidence matrix (`+1` at tail, `−1` at head) with the grounded
/// node's row removed. `grounded_node` defaults to the last node.
pub fn build_transshipment(spec: &NetworkSpec, grounded_node: Option<usize>) -> Result<LpInstance> {
    let nodes = spec.node_count;
    if nodes < 2 || spec.edges.is_empty() {
        return Err(Error::EmptyInstance);
    }
    if spec.supplies.len() != nodes {
        return Err(Error::DimensionMismatch {
            context: "supplies length vs node count",
            expected: nodes,
            found: spec.supplies.len(),
        });
    }
    let ground = grounded_node.unwrap_or(nodes - 1);
    if ground >= nodes {
        return Err(Error::InvalidNode { node: ground, node_count: nodes });
    }
    for (index, e) in spec.edges.iter().enumerate() {
        for node in [e.tail, e.head] {
            if node >= nodes {
                return Err(Error::InvalidNode { node, node_count: nodes });
            }
        }
        if !(e.cost.is_finite() && e.cost > 0.0) {
            return Err(Error::NonPositiveCost { index, value: e.cost });
        }
    }
    let sum: f64 = spec.supplies.iter().sum();
    let scale: f64 = spec.supplies.iter().map(|s| s.abs()).sum::<f64>().max(1.0);
    if sum.abs() > 1e-9 * scale {
        return Err(Error::UnbalancedSupplies { sum });
    }

    let row_of = |v: usize| {
        if v < ground {
            Some(v)
        } else if v > ground {
            Some(v - 1)
        } else {
            None
        }
    };
    let mut a = DMatrix::<f64>::zeros(nodes - 1, spec.edges.len());
    for (j, e) in spec.edges.iter().enumerate() {
        if let Some(r) = row_of(e.tail) {
            a[(r, j)] += 1.0;
        }
        if let Some(r) = row_of(e.head) {
            a[(r, j)] -= 1.0;
        }
    }
    let rhs: Vec<f64> = (0..nodes).filter(|&v| v != ground).map(|v| spec.supplies[v]).collect();

    let rank = numerical_rank(&a);
    if rank < nodes - 1 {
        return Err(Error::DisconnectedGraph { rank, rows: nodes - 1 });
    }
    Ok(LpInstance {
        constraint_matrix: a,
        rhs: DVector::from_vec(rhs),
        costs: DVector::from_iterator(spec.edges.len(), spec.edges.iter().map(|e| e.cost)),
        name: None,
    })
}

// ---------------------------------------------------------------------------
// JSON formats
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct InstanceFile<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<&'a str>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

/// Serializes to the `{"name", "A", "b", "c"}` JSON object.
pub fn save(instance: &LpInstance) -> Vec<u8> {
    let file = InstanceFile {
        name: instance.name.as_deref(),
        a: instance.rows(),
        b: instance.rhs.iter().copied().collect(),
        c: instance.costs.iter().copied().collect(),
    };
    serde_json::to_vec_pretty(&file).expect("instance serialization cannot fail")
}

fn parse_value(bytes: &[u8]) -> Result<serde_json::Map<String, Value>> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(Error::Parse { location: "top level".into(), message: "expected a JSON object".into() }),
    }
}

fn field<'a>(map: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a Value> {
    map.get(key).ok_or_else(|| Error::Schema(key.to_string()))
}

fn number_array(value: &Value, location: &str) -> Result<Vec<f64>> {
    let items = value.as_array().ok_or_else(|| Error::Parse {
        location: location.to_string(),
        message: "expected an array of numbers".into(),
    })?;
    items
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_f64().ok_or_else(|| Error::Parse {
                location: format!("{location}[{i}]"),
                message: format!("expected a number, found {v}"),
            })
        })
        .collect()
}

/// Parses the `{"name", "A", "b", "c"}` instance format.
pub fn load(bytes: &[u8]) -> Result<LpInstance> {
    let map = parse_value(bytes)?;
    let a_value = field(&map, "A")?;
    let b = number_array(field(&map, "b")?, "b")?;
    let c = number_array(field(&map, "c")?, "c")?;
    let rows = a_value
        .as_array()
        .ok_or_else(|| Error::Parse { location: "A".into(), message: "expected an array of rows".into() })?;
    let rows: Vec<Vec<f64>> =
        rows.iter().enumerate().map(|(i, r)| number_array(r, &format!("A[{i}]"))).collect::<Result<_>>()?;
    let name = match map.get("name") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => {
            return Err(Error::Parse { location: "name".into(), message: format!("expected a string, found {other}") })
        }
    };
    let mut instance = LpInstance::from_rows(&rows, &b, &c).map_err(|e| match e {
        Error::DimensionMismatch { context, expected, found } => Error::Parse {
            location: if context.starts_with("rhs") { "b".into() } else { "c".into() },
            message: format!("length {found}, expected {expected}"),
        },
        other => other,
    })?;
    instance.name = name;
    Ok(instance)
}

/// A parsed network file: the spec plus the optional grounded node.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFile {
    pub spec: NetworkSpec,
    pub ground: Option<usize>,
    pub name: Option<String>,
}

/// Parses the `{"nodes", "edges", "supplies", "ground"}` network format.
pub fn load_network(bytes: &[u8]) -> Result<NetworkFile> {
    let map = parse_value(bytes)?;
    let node_count = field(&map, "nodes")?
        .as_u64()
        .ok_or_else(|| Error::Parse { location: "nodes".into(), message: "expected a nonnegative integer".into() })?
        as usize;
    let edges_value = field(&map, "edges")?.as_array().ok_or_else(|| Error::Parse {
        location: "edges".into(),
        message: "expected an array of [tail, head, cost]".into(),
    })?;
    let supplies = number_array(field(&map, "supplies")?, "supplies")?;
    let mut edges = Vec::with_capacity(edges_value.len());
    for (i, e) in edges_value.iter().enumerate() {
        let location = format!("edges[{i}]");
        let triple = e.as_array().filter(|t| t.len() == 3).ok_or_else(|| Error::Parse {
            location: location.clone(),
            message: "expected [tail, head, cost]".into(),
        })?;
        let node = |v: &Value| {
            v.as_u64().map(|u| u as usize).ok_or_else(|| Error::Parse {
                location: location.clone(),
                message: format!("expected a node index, found {v}"),
            })
        };
        let cost = triple[2].as_f64().ok_or_else(|| Error::Parse {
            location: location.clone(),
            message: format!("expected a cost, found {}", triple[2]),
        })?;
        edges.push(Edge { tail: node(&triple[0])?, head: node(&triple[1])?, cost });
    }
    let ground = match map.get("ground") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| Error::Parse { location: "ground".into(), message: "expected a node index".into() })?
                as usize,
        ),
    };
    let name = map.get("name").and_then(Value::as_str).map(str::to_string);
    Ok(NetworkFile { spec: NetworkSpec { node_count, edges, supplies }, ground, name })
}

/// Loads either file format, building the transshipment LP for networks.
pub fn load_any(bytes: &[u8]) -> Result<LpInstance> {
    let map = parse_value(bytes)?;
    if map.contains_key("nodes") {
        let net = load_network(bytes)?;
        let mut instance = build_transshipment(&net.spec, net.ground)?;
        instance.name = net.name;
        Ok(instance)
    } else {
        load(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(rows: &[Vec<f64>], b: &[f64], c: &[f64]) -> LpInstance {
        LpInstance::from_rows(rows, b, c).unwrap()
    }

    #[test]
    fn single_row_is_valid() {
        let v = validate(inst(&[vec![1.0, 1.0]], &[1.0], &[1.0, 2.0])).unwrap();
        assert_eq!(v.rank(), 1);
    }

    #[test]
    fn duplicated_row_is_rank_deficient() {
        let err = validate(inst(&[vec![1.0, 1.0], vec![2.0, 2.0]], &[1.0, 2.0], &[1.0, 1.0])).unwrap_err();
        assert_eq!(err, Error::RankDeficient { rank: 1, rows: 2 });
    }

    #[test]
    fn negative_cost_is_reported_by_index() {
        let err = validate(inst(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0], &[1.0, -1.0])).unwrap_err();
        assert_eq!(err, Error::NonPositiveCost { index: 1, value: -1.0 });
    }

    #[test]
    fn empty_and_zero_rhs() {
        let empty = LpInstance {
            constraint_matrix: DMatrix::zeros(0, 0),
            rhs: DVector::zeros(0),
            costs: DVector::zeros(0),
            name: None,
        };
        assert_eq!(validate(empty).unwrap_err(), Error::EmptyInstance);
        assert_eq!(validate(inst(&[vec![1.0, 1.0]], &[0.0], &[1.0, 1.0])).unwrap_err(), Error::ZeroRhs);
    }

    #[test]
    fn more_rows_than_columns_is_rank_deficient() {
        let err = validate(inst(&[vec![1.0], vec![2.0]], &[1.0, 1.0], &[1.0])).unwrap_err();
        assert_eq!(err, Error::RankDeficient { rank: 1, rows: 2 });
    }

    #[test]
    fn parallel_edges_network() {
        let spec = NetworkSpec {
            node_count: 2,
            edges: vec![Edge { tail: 0, head: 1, cost: 1.0 }, Edge { tail: 0, head: 1, cost: 2.0 }],
            supplies: vec![1.0, -1.0],
        };
        let lp = build_transshipment(&spec, Some(1)).unwrap();
        assert_eq!(lp.constraint_matrix, DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
        assert_eq!(lp.rhs.as_slice(), &[1.0]);
        assert_eq!(lp.costs.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn single_edge_network() {
        let spec =
            NetworkSpec { node_count: 2, edges: vec![Edge { tail: 0, head: 1, cost: 5.0 }], supplies: vec![1.0, -1.0] };
        let lp = build_transshipment(&spec, None).unwrap();
        assert_eq!(lp.constraint_matrix, DMatrix::from_row_slice(1, 1, &[1.0]));
        assert_eq!(lp.rhs.as_slice(), &[1.0]);
        assert_eq!(lp.costs.as_slice(), &[5.0]);
    }

    #[test]
    fn triangle_network() {
        let spec = NetworkSpec {
            node_count: 3,
            edges: vec![
                Edge { tail: 0, head: 1, cost: 1.0 },
                Edge { tail: 1, head: 2, cost: 1.0 },
                Edge { tail: 0, head: 2, cost: 3.0 },
            ],
            supplies: vec![1.0, 0.0, -1.0],
        };
        let lp = build_transshipment(&spec, Some(2)).unwrap();
        assert_eq!(lp.constraint_matrix, DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, -1.0, 1.0, 0.0]));
        assert_eq!(lp.rhs.as_slice(), &[1.0, 0.0]);
        assert!(validate(lp).is_ok());
    }

    #[test]
    fn network_errors() {
        let disconnected = NetworkSpec {
            node_count: 4,
            edges: vec![Edge { tail: 0, head: 1, cost: 1.0 }, Edge { tail: 2, head: 3, cost: 1.0 }],
            supplies: vec![1.0, -1.0, 0.0, 0.0],
        };
        assert!(matches!(build_transshipment(&disconnected, None), Err(Error::DisconnectedGraph { rank: 2, rows: 3 })));
        let unbalanced =
            NetworkSpec { node_count: 2, edges: vec![Edge { tail: 0, head: 1, cost: 1.0 }], supplies: vec![1.0, 0.0] };
        assert!(matches!(build_transshipment(&unbalanced, None), Err(Error::UnbalancedSupplies { .. })));
        let bad_ground = NetworkSpec { supplies: vec![1.0, -1.0], ..unbalanced };
        assert!(matches!(build_transshipment(&bad_ground, Some(5)), Err(Error::InvalidNode { node: 5, .. })));
    }

    #[test]
    fn missing_costs_is_schema_error() {
        let err = load(br#"{"A": [[1, 1]], "b": [1]}"#).unwrap_err();
        assert_eq!(err, Error::Schema("c".into()));
    }

    #[test]
    fn ragged_rows_is_parse_error() {
        let err = load(br#"{"A": [[1, 1], [1]], "b": [1, 1], "c": [1, 1]}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location == "A[1]"), "{err:?}");
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = load(b"{\"A\": [[1, 1]],\n \"b\": [1,, }").unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location.starts_with("line 2")), "{err:?}");
    }

    #[test]
    fn rhs_length_mismatch_is_parse_error() {
        let err = load(br#"{"A": [[1, 1]], "b": [1, 2], "c": [1, 1]}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location == "b"), "{err:?}");
    }

    #[test]
    fn save_load_keeps_name_and_digits() {
        let lp = inst(&[vec![0.1, 1.0 / 3.0]], &[std::f64::consts::PI], &[1e-7, 2.5]).with_name("thirds");
        let back = load(&save(&lp)).unwrap();
        assert_eq!(back, lp);
    }

    #[test]
    fn network_file_roundtrip_through_load_any() {
        let json = br#"{"nodes": 3, "edges": [[0,1,1.0],[1,2,1.0],[0,2,3.0]], "supplies": [1,0,-1], "ground": 2}"#;
        let lp = load_any(json).unwrap();
        assert_eq!(lp.num_constraints(), 2);
        assert_eq!(lp.num_variables(), 3);
        let err = load_network(br#"{"nodes": 2, "edges": [[0,1]], "supplies": [1,-1]}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location == "edges[0]"));
    }

    #[test]
    fn simplex_detection() {
        assert!(LpInstance::simplex(&[1.0, 2.0]).is_unit_simplex());
        let lp = inst(&[vec![1.0, 0.0, 1.0], vec![-1.0, 1.0, 0.0]], &[1.0, 0.0], &[1.0, 1.0, 1.0]);
        assert!(!lp.is_unit_simplex());
    }
}
