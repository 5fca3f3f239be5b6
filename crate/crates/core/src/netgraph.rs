//! Pipe network topology: vertices, directed edges, incidence signs and
//! time-dependent boundary pressure ramps.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, NetworkError, Result};

/// Boundary pressure `base + amplitude * max(1 - t / ramp_time, 0)`.
///
/// A zero `ramp_time` denotes time-invariant data equal to `base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRamp {
    pub base: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub ramp_time: f64,
}

impl BoundaryRamp {
    pub fn constant(value: f64) -> Self {
        Self { base: value, amplitude: 0.0, ramp_time: 0.0 }
    }

    pub fn new(base: f64, amplitude: f64, ramp_time: f64) -> Self {
        Self { base, amplitude, ramp_time }
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.ramp_time > 0.0 {
            self.base + self.amplitude * (1.0 - t / self.ramp_time).max(0.0)
        } else {
            self.base
        }
    }

    /// Value for `t >= ramp_time`.
    pub fn final_value(&self) -> f64 {
        self.base
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !self.base.is_finite() || !self.amplitude.is_finite() {
            return Err("base and amplitude must be finite".into());
        }
        if !(self.ramp_time >= 0.0) || !self.ramp_time.is_finite() {
            return Err(format!("ramp_time must be finite and nonnegative, got {}", self.ramp_time));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: String,
    pub boundary: Option<BoundaryRamp>,
}

impl Vertex {
    pub fn interior(id: impl Into<String>) -> Self {
        Self { id: id.into(), boundary: None }
    }

    pub fn boundary(id: impl Into<String>, ramp: BoundaryRamp) -> Self {
        Self { id: id.into(), boundary: Some(ramp) }
    }

    pub fn kind(&self) -> VertexKind {
        if self.boundary.is_some() {
            VertexKind::Boundary
        } else {
            VertexKind::Interior
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
}

impl Edge {
    pub fn new(id: impl Into<String>, from: impl Into<String>, to: impl Into<String>, length: f64) -> Self {
        Self { id: id.into(), from: from.into(), to: to.into(), length }
    }
}

/// One endpoint of an edge seen from a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub edge: usize,
    /// `-1` at the edge's tail (`from`, local coordinate 0), `+1` at its head.
    pub sign: i8,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NetworkOptions {
    pub allow_dead_ends: bool,
}

/// Validated, immutable pipe network.
#[derive(Debug, Clone)]
pub struct Network {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    endpoints: Vec<(usize, usize)>,
    incidences: Vec<Vec<Incidence>>,
    boundary: Vec<usize>,
}

impl Network {
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `(from, to)` vertex indices of edge `e`.
    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        self.endpoints[e]
    }

    /// Edges adjacent to vertex `v` with their incidence signs.
    pub fn incident(&self, v: usize) -> &[Incidence] {
        &self.incidences[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incidences[v].len()
    }

    /// Incidence sign `n^e(v)`, zero if `e` is not adjacent to `v`.
    pub fn sign(&self, e: usize, v: usize) -> i8 {
        let (a, b) = self.endpoints[e];
        if v == a {
            -1
        } else if v == b {
            1
        } else {
            0
        }
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    /// Boundary vertex indices in declaration order; this order defines the
    /// columns of the boundary operator.
    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.vertices[v].boundary.is_none()).collect()
    }

    pub fn ramps(&self) -> Vec<BoundaryRamp> {
        self.boundary.iter().map(|&v| self.vertices[v].boundary.unwrap()).collect()
    }

    pub fn boundary_values(&self, t: f64) -> Vec<f64> {
        self.ramps().iter().map(|r| r.value(t)).collect()
    }

    pub fn final_boundary_values(&self) -> Vec<f64> {
        self.ramps().iter().map(|r| r.final_value()).collect()
    }

    /// Copy of the network with replaced boundary ramps (same order as
    /// [`Network::boundary_vertices`]).
    pub fn with_ramps(&self, ramps: &[BoundaryRamp]) -> Result<Network> {
        if ramps.len() != self.boundary.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} ramps for {} boundary vertices",
                ramps.len(),
                self.boundary.len()
            )));
        }
        let mut net = self.clone();
        for (&v, r) in self.boundary.iter().zip(ramps) {
            net.vertices[v].boundary = Some(*r);
        }
        Ok(net)
    }

    pub fn from_json_str(text: &str, options: NetworkOptions) -> Result<Network> {
        let file: NetworkFile = serde_json::from_str(text)?;
        file.build(options)
    }

    pub fn from_json_file(path: impl AsRef<Path>, options: NetworkOptions) -> Result<Network> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_json_str(&text, options)
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexSpec { id: v.id.clone(), boundary: v.boundary })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec { id: e.id.clone(), from: e.from.clone(), to: e.to.clone(), length: e.length })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }
}

/// Validates ids, endpoints, degrees and connectivity.
pub fn build_network(vertices: Vec<Vertex>, edges: Vec<Edge>, options: NetworkOptions) -> Result<Network, NetworkError> {
    let mut vindex = HashMap::new();
    for (i, v) in vertices.iter().enumerate() {
        if vindex.insert(v.id.clone(), i).is_some() {
            return Err(NetworkError::DuplicateVertex(v.id.clone()));
        }
        if let Some(r) = &v.boundary {
            r.validate().map_err(|reason| NetworkError::InvalidRamp { vertex: v.id.clone(), reason })?;
        }
    }
    let mut eids = HashMap::new();
    let mut endpoints = Vec::with_capacity(edges.len());
    let mut incidences = vec![Vec::new(); vertices.len()];
    for (k, e) in edges.iter().enumerate() {
        if eids.insert(e.id.clone(), k).is_some() {
            return Err(NetworkError::DuplicateEdge(e.id.clone()));
        }
        let lookup = |id: &String| {
            vindex
                .get(id)
                .copied()
                .ok_or_else(|| NetworkError::DanglingEndpoint { edge: e.id.clone(), vertex: id.clone() })
        };
        let a = lookup(&e.from)?;
        let b = lookup(&e.to)?;
        if a == b {
            return Err(NetworkError::SelfLoop(e.id.clone()));
        }
        if !(e.length > 0.0) || !e.length.is_finite() {
            return Err(NetworkError::NonPositiveLength { edge: e.id.clone(), length: e.length });
        }
        endpoints.push((a, b));
        incidences[a].push(Incidence { edge: k, sign: -1 });
        incidences[b].push(Incidence { edge: k, sign: 1 });
    }
    for (v, vert) in vertices.iter().enumerate() {
        let degree = incidences[v].len();
        if degree == 0 {
            return Err(NetworkError::IsolatedVertex(vert.id.clone()));
        }
        match vert.kind() {
            VertexKind::Boundary if degree != 1 => {
                return Err(NetworkError::BoundaryDegree { vertex: vert.id.clone(), degree });
            }
            VertexKind::Interior if degree == 1 && !options.allow_dead_ends => {
                return Err(NetworkError::DeadEnd(vert.id.clone()));
            }
            _ => {}
        }
    }
    let boundary: Vec<usize> = (0..vertices.len()).filter(|&v| vertices[v].boundary.is_some()).collect();
    if boundary.is_empty() {
        return Err(NetworkError::NoBoundary);
    }
    // breadth-first connectivity check
    let mut seen = vec![false; vertices.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for inc in &incidences[v] {
            let (a, b) = endpoints[inc.edge];
            let w = if a == v { b } else { a };
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(NetworkError::Disconnected);
    }
    Ok(Network { vertices, edges, endpoints, incidences, boundary })
}

/// The seven-pipe test network: `v1 -> v2`, a diamond through `v3`, `v4`
/// and an outlet `v5 -> v6`, unit pipe lengths, inlet pressure ramping from
/// 100 to 90 over `t in [0, 1]` and constant outlet pressure 70.
pub fn paper_network() -> Network {
    let vertices = vec![
        Vertex::boundary("v1", BoundaryRamp::new(90.0, 10.0, 1.0)),
        Vertex::interior("v2"),
        Vertex::interior("v3"),
        Vertex::interior("v4"),
        Vertex::interior("v5"),
        Vertex::boundary("v6", BoundaryRamp::new(70.0, 0.0, 0.0)),
    ];
    let edges = vec![
        Edge::new("e1", "v1", "v2", 1.0),
        Edge::new("e2", "v2", "v3", 1.0),
        Edge::new("e3", "v2", "v4", 1.0),
        Edge::new("e4", "v3", "v4", 1.0),
        Edge::new("e5", "v3", "v5", 1.0),
        Edge::new("e6", "v4", "v5", 1.0),
        Edge::new("e7", "v5", "v6", 1.0),
    ];
    build_network(vertices, edges, NetworkOptions::default()).expect("test network is valid")
}

/// Single pipe `v1 -> v2` of the given length with constant boundary pressures.
pub fn single_pipe(length: f64, left: f64, right: f64) -> Network {
    build_network(
        vec![
            Vertex::boundary("v1", BoundaryRamp::constant(left)),
            Vertex::boundary("v2", BoundaryRamp::constant(right)),
        ],
        vec![Edge::new("e1", "v1", "v2", length)],
        NetworkOptions::default(),
    )
    .expect("single pipe is valid")
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    vertices: Vec<VertexSpec>,
    edges: Vec<EdgeSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VertexSpec {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boundary: Option<BoundaryRamp>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeSpec {
    id: String,
    from: String,
    to: String,
    #[serde(default = "unit_length")]
    length: f64,
}

fn unit_length() -> f64 {
    1.0
}

impl NetworkFile {
    fn build(self, options: NetworkOptions) -> Result<Network> {
        let vertices = self.vertices.into_iter().map(|v| Vertex { id: v.id, boundary: v.boundary }).collect();
        let edges = self.edges.into_iter().map(|e| Edge::new(e.id, e.from, e.to, e.length)).collect();
        Ok(build_network(vertices, edges, options)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_incidence() {
        let net = single_pipe(1.0, 1.0, 0.0);
        assert_eq!(net.sign(0, 0), -1);
        assert_eq!(net.sign(0, 1), 1);
        assert_eq!(net.boundary_vertices(), &[0, 1]);
    }

    #[test]
    fn paper_network_topology() {
        let net = paper_network();
        assert_eq!(net.vertices().len(), 6);
        assert_eq!(net.edges().len(), 7);
        assert_eq!(net.degree(net.vertex_index("v3").unwrap()), 3);
        let total: usize = (0..6).map(|v| net.degree(v)).sum();
        assert_eq!(total, 14);
        let interior: Vec<&str> = net.interior_vertices().iter().map(|&v| net.vertices()[v].id.as_str()).collect();
        assert_eq!(interior, ["v2", "v3", "v4", "v5"]);
        let boundary: Vec<&str> = net.boundary_vertices().iter().map(|&v| net.vertices()[v].id.as_str()).collect();
        assert_eq!(boundary, ["v1", "v6"]);
        for e in 0..7 {
            let (a, b) = net.endpoints(e);
            assert_eq!(net.sign(e, a) + net.sign(e, b), 0);
        }
    }

    #[test]
    fn seven_pipe_ramps() {
        let net = paper_network();
        let r = net.ramps();
        assert_eq!(r[0].value(0.0), 100.0);
        assert_eq!(r[0].value(0.5), 95.0);
        assert_eq!(r[0].value(1.0), 90.0);
        assert_eq!(r[0].value(50.0), 90.0);
        assert_eq!(r[1].value(0.0), 70.0);
        assert_eq!(r[1].value(100.0), 70.0);
    }

    #[test]
    fn ramp_is_nonincreasing_and_eventually_constant() {
        let r = BoundaryRamp::new(3.0, 2.0, 1.5);
        let mut prev = f64::INFINITY;
        for i in 0..400 {
            let t = i as f64 * 0.01;
            let v = r.value(t);
            assert!(v <= prev);
            if t >= 1.5 {
                assert_eq!(v, 3.0);
            }
            prev = v;
        }
    }

    #[test]
    fn validation_errors_are_distinct() {
        let b = |id: &str| Vertex::boundary(id, BoundaryRamp::constant(0.0));
        let err = build_network(vec![b("v1"), b("v2")], vec![Edge::new("e", "v1", "v1", 1.0)], Default::default());
        assert_eq!(err.unwrap_err(), NetworkError::SelfLoop("e".into()));

        let err = build_network(vec![b("v1"), b("v1")], vec![], Default::default());
        assert!(matches!(err, Err(NetworkError::DuplicateVertex(_))));

        let err = build_network(vec![b("v1"), b("v2")], vec![Edge::new("e", "v1", "v9", 1.0)], Default::default());
        assert!(matches!(err, Err(NetworkError::DanglingEndpoint { .. })));

        let err = build_network(
            vec![b("v1"), Vertex::interior("v2"), b("v3")],
            vec![Edge::new("a", "v1", "v2", 1.0), Edge::new("b", "v2", "v3", 1.0), Edge::new("c", "v1", "v2", 1.0)],
            Default::default(),
        );
        assert!(matches!(err, Err(NetworkError::BoundaryDegree { degree: 2, .. })));

        let err = build_network(
            vec![b("v1"), b("v2"), b("v3"), b("v4")],
            vec![Edge::new("a", "v1", "v2", 1.0), Edge::new("b", "v3", "v4", 1.0)],
            Default::default(),
        );
        assert_eq!(err.unwrap_err(), NetworkError::Disconnected);

        let err = build_network(vec![b("v1"), b("v2")], vec![Edge::new("e", "v1", "v2", 0.0)], Default::default());
        assert!(matches!(err, Err(NetworkError::NonPositiveLength { .. })));
    }

    #[test]
    fn dead_end_needs_opt_in() {
        let vertices = vec![
            Vertex::boundary("v1", BoundaryRamp::constant(1.0)),
            Vertex::interior("v2"),
            Vertex::interior("v3"),
        ];
        let edges = vec![Edge::new("a", "v1", "v2", 1.0), Edge::new("b", "v2", "v3", 1.0)];
        let err = build_network(vertices.clone(), edges.clone(), Default::default());
        assert_eq!(err.unwrap_err(), NetworkError::DeadEnd("v3".into()));
        assert!(build_network(vertices, edges, NetworkOptions { allow_dead_ends: true }).is_ok());
    }

    #[test]
    fn json_roundtrip() {
        let net = paper_network();
        let back = Network::from_json_str(&net.to_json(), Default::default()).unwrap();
        assert_eq!(back.edges(), net.edges());
        assert_eq!(back.vertices(), net.vertices());
    }

    #[test]
    fn json_missing_boundary_key_marks_interior() {
        let text = r#"{"vertices":[{"id":"a","boundary":{"base":1}},{"id":"b"},{"id":"c","boundary":{"base":0}}],
                      "edges":[{"id":"e1","from":"a","to":"b"},{"id":"e2","from":"b","to":"c","length":2.0}]}"#;
        let net = Network::from_json_str(text, Default::default()).unwrap();
        assert_eq!(net.vertices()[1].kind(), VertexKind::Interior);
        assert_eq!(net.edges()[0].length, 1.0);
        assert_eq!(net.edges()[1].length, 2.0);
    }
}
