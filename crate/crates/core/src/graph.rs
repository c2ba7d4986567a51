//! Metric graphs: vertices, bounded edges with lengths, and half-lines.
//!
//! Finite edges are intervals `[0, len]` oriented from `u` to `v`; a loop has
//! `u == v`. A half-line is `[0, +inf)` with its origin glued to its attachment
//! vertex. Vertices listed as Dirichlet carry a homogeneous Dirichlet condition
//! instead of the Kirchhoff one (used for capped truncations of periodic graphs).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};

pub type VertexId = usize;

/// A bounded edge of length `len` between `u` and `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge<T> {
    pub u: VertexId,
    pub v: VertexId,
    pub len: T,
}

impl<T> Edge<T> {
    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }
}

/// A connected metric graph with finitely many edges.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricGraph<T> {
    name: String,
    vertices: Vec<String>,
    edges: Vec<Edge<T>>,
    halflines: Vec<VertexId>,
    dirichlet: Vec<VertexId>,
}

/// The stem of a signpost: either a bounded edge or a half-line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stem {
    Edge(usize),
    HalfLine(usize),
}

/// A loop and another edge-end sharing a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signpost {
    pub vertex: VertexId,
    pub loop_edge: usize,
    pub stem: Stem,
}

/// Topological features the existence theorems depend on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub has_pendant: bool,
    pub has_signpost: bool,
    pub n_halflines: usize,
    pub every_vertex_even_halflines: bool,
    pub satisfies_h: bool,
    pub compact_core_length: f64,
}

/// How the rails of a truncated ladder are capped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderCaps {
    /// One half-line at each of the four rail ends.
    HalfLines,
    /// Homogeneous Dirichlet condition at each of the four rail ends.
    Dirichlet,
}

/// Catalogue of the graphs used throughout the crate.
#[derive(Clone, Debug, PartialEq)]
pub enum GraphKind<T> {
    Line,
    HalfLine,
    Star(usize),
    Tadpole {
        loop_len: T,
    },
    TGraph {
        pendant_len: T,
    },
    Signpost {
        loop_len: T,
        stem_len: T,
        extra_halflines: usize,
    },
    Ladder {
        cell_len: T,
        rung_len: T,
        n_cells: usize,
        caps: LadderCaps,
    },
    /// Compact interval with Kirchhoff (Neumann) ends.
    Interval(T),
    /// Compact loop on a single vertex.
    Loop(T),
}

fn positive<T: Real>(what: &str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} must be positive and finite, got {}",
            to_f64(x)
        )))
    }
}

/// Builds one of the standard graphs.
pub fn build_standard<T: Real>(kind: &GraphKind<T>) -> Result<MetricGraph<T>> {
    let names = |n: &[&str]| n.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match *kind {
        GraphKind::Line => MetricGraph::new("line", names(&["o"]), vec![], vec![0, 0]),
        GraphKind::HalfLine => MetricGraph::new("halfline", names(&["o"]), vec![], vec![0]),
        GraphKind::Star(k) => {
            if k < 2 {
                return Err(Error::InvalidParameter(format!(
                    "star needs at least 2 half-lines, got {k}"
                )));
            }
            MetricGraph::new(format!("star{k}"), names(&["o"]), vec![], vec![0; k])
        }
        GraphKind::Tadpole { loop_len } => {
            positive("loop length", loop_len)?;
            MetricGraph::new(
                "tadpole",
                names(&["v"]),
                vec![Edge { u: 0, v: 0, len: loop_len }],
                vec![0],
            )
        }
        GraphKind::TGraph { pendant_len } => {
            positive("pendant length", pendant_len)?;
            MetricGraph::new(
                "tgraph",
                names(&["o", "tip"]),
                vec![Edge { u: 0, v: 1, len: pendant_len }],
                vec![0, 0],
            )
        }
        GraphKind::Signpost {
            loop_len,
            stem_len,
            extra_halflines,
        } => {
            positive("loop length", loop_len)?;
            positive("stem length", stem_len)?;
            MetricGraph::new(
                "signpost",
                names(&["a", "b"]),
                vec![
                    Edge { u: 0, v: 0, len: loop_len },
                    Edge { u: 0, v: 1, len: stem_len },
                ],
                vec![1; extra_halflines],
            )
        }
        GraphKind::Ladder {
            cell_len,
            rung_len,
            n_cells,
            caps,
        } => {
            positive("cell length", cell_len)?;
            positive("rung length", rung_len)?;
            if n_cells < 1 {
                return Err(Error::InvalidParameter("ladder needs n_cells >= 1".into()));
            }
            let n = n_cells + 1;
            let mut vertices = Vec::with_capacity(2 * n);
            for rail in 0..2 {
                for i in 0..n {
                    vertices.push(format!("r{rail}_{i}"));
                }
            }
            let id = |rail: usize, i: usize| rail * n + i;
            let mut edges = Vec::new();
            for rail in 0..2 {
                for i in 0..n_cells {
                    edges.push(Edge {
                        u: id(rail, i),
                        v: id(rail, i + 1),
                        len: cell_len,
                    });
                }
            }
            for i in 0..n {
                edges.push(Edge {
                    u: id(0, i),
                    v: id(1, i),
                    len: rung_len,
                });
            }
            let ends = vec![id(0, 0), id(0, n_cells), id(1, 0), id(1, n_cells)];
            let g = match caps {
                LadderCaps::HalfLines => {
                    MetricGraph::new(format!("ladder{n_cells}"), vertices, edges, ends)?
                }
                LadderCaps::Dirichlet => {
                    MetricGraph::new(format!("ladder{n_cells}-dirichlet"), vertices, edges, vec![])?
                        .with_dirichlet(ends)?
                }
            };
            Ok(g)
        }
        GraphKind::Interval(len) => {
            positive("interval length", len)?;
            MetricGraph::new(
                "interval",
                names(&["a", "b"]),
                vec![Edge { u: 0, v: 1, len }],
                vec![],
            )
        }
        GraphKind::Loop(len) => {
            positive("loop length", len)?;
            MetricGraph::new("loop", names(&["v"]), vec![Edge { u: 0, v: 0, len }], vec![])
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    u: String,
    v: String,
    len: f64,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    vertices: Vec<String>,
    edges: Vec<EdgeRecord>,
    #[serde(default)]
    halflines: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    dirichlet: Vec<String>,
}

impl<T: Real> MetricGraph<T> {
    /// Validates and builds a graph. Reports the first violated invariant.
    pub fn new(
        name: impl Into<String>,
        vertices: Vec<String>,
        edges: Vec<Edge<T>>,
        halflines: Vec<VertexId>,
    ) -> Result<Self> {
        let g = MetricGraph {
            name: name.into(),
            vertices,
            edges,
            halflines,
            dirichlet: vec![],
        };
        g.validate()?;
        Ok(g)
    }

    /// Marks vertices as carrying a homogeneous Dirichlet condition.
    pub fn with_dirichlet(mut self, mut vertices: Vec<VertexId>) -> Result<Self> {
        vertices.sort_unstable();
        vertices.dedup();
        self.dirichlet = vertices;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if nv == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut seen = HashMap::new();
        for (i, name) in self.vertices.iter().enumerate() {
            if let Some(j) = seen.insert(name.as_str(), i) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate vertex id {name:?} (positions {j} and {i})"
                )));
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.u >= nv || e.v >= nv {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} references a missing vertex"
                )));
            }
            if !(e.len > T::zero() && e.len.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} has nonpositive or non-finite length {}",
                    to_f64(e.len)
                )));
            }
        }
        for (i, &h) in self.halflines.iter().enumerate() {
            if h >= nv {
                return Err(Error::InvalidGraph(format!(
                    "half-line {i} attached to a missing vertex"
                )));
            }
        }
        for &d in &self.dirichlet {
            if d >= nv {
                return Err(Error::InvalidGraph("dirichlet vertex does not exist".into()));
            }
        }
        for v in 0..nv {
            if self.degree(v) == 0 {
                return Err(Error::InvalidGraph(format!(
                    "vertex {:?} has degree 0",
                    self.vertices[v]
                )));
            }
        }
        // union-find over finite edges
        let mut parent: Vec<usize> = (0..nv).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        for v in 1..nv {
            if find(&mut parent, v) != root {
                return Err(Error::InvalidGraph(format!(
                    "graph is disconnected: vertex {:?} unreachable",
                    self.vertices[v]
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vertex_names(&self) -> &[String] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn halflines(&self) -> &[VertexId] {
        &self.halflines
    }

    pub fn dirichlet_vertices(&self) -> &[VertexId] {
        &self.dirichlet
    }

    pub fn is_dirichlet(&self, v: VertexId) -> bool {
        self.dirichlet.binary_search(&v).is_ok()
    }

    /// Number of incident edge-ends; a loop counts twice.
    pub fn degree(&self, v: VertexId) -> usize {
        let ends: usize = self
            .edges
            .iter()
            .map(|e| usize::from(e.u == v) + usize::from(e.v == v))
            .sum();
        ends + self.halflines_at(v)
    }

    pub fn halflines_at(&self, v: VertexId) -> usize {
        self.halflines.iter().filter(|&&h| h == v).count()
    }

    pub fn is_compact(&self) -> bool {
        self.halflines.is_empty()
    }

    /// Total length of the bounded edges.
    pub fn compact_core_length(&self) -> T {
        self.edges.iter().fold(T::zero(), |acc, e| acc + e.len)
    }

    /// Shortest bounded edge, or `+inf` when there is none.
    pub fn min_edge_length(&self) -> T {
        self.edges
            .iter()
            .fold(T::infinity(), |acc, e| if e.len < acc { e.len } else { acc })
    }

    /// Bounded non-loop edges with a Kirchhoff endpoint of degree one, as
    /// `(edge, tip vertex)`.
    pub fn pendants(&self) -> Vec<(usize, VertexId)> {
        let mut out = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.is_loop() {
                continue;
            }
            for tip in [e.v, e.u] {
                if self.degree(tip) == 1 && !self.is_dirichlet(tip) {
                    out.push((i, tip));
                    break;
                }
            }
        }
        out
    }

    /// Vertices carrying a loop together with a bounded edge or a half-line.
    pub fn signposts(&self) -> Vec<Signpost> {
        let mut out = Vec::new();
        for (li, l) in self.edges.iter().enumerate() {
            if !l.is_loop() {
                continue;
            }
            let w = l.u;
            let stem = self
                .edges
                .iter()
                .position(|e| !e.is_loop() && (e.u == w || e.v == w))
                .map(Stem::Edge)
                .or_else(|| self.halflines.iter().position(|&h| h == w).map(Stem::HalfLine));
            if let Some(stem) = stem {
                out.push(Signpost {
                    vertex: w,
                    loop_edge: li,
                    stem,
                });
            }
        }
        out
    }

    /// Computes every topological classifier.
    pub fn classify(&self) -> Result<TopologyReport> {
        let every_vertex_even_halflines =
            (0..self.n_vertices()).all(|v| self.halflines_at(v).is_multiple_of(2));
        Ok(TopologyReport {
            has_pendant: !self.pendants().is_empty(),
            has_signpost: !self.signposts().is_empty(),
            n_halflines: self.halflines.len(),
            every_vertex_even_halflines,
            satisfies_h: self.satisfies_h()?,
            compact_core_length: to_f64(self.compact_core_length()),
        })
    }

    /// Whether every point lies on a trail that starts and ends on two
    /// distinct half-lines. Exhaustive search over edge-disjoint trails.
    pub fn satisfies_h(&self) -> Result<bool> {
        if self.halflines.len() < 2 || !self.dirichlet.is_empty() {
            return Ok(false);
        }
        let nv = self.n_vertices();
        let mut adj: Vec<Vec<(usize, VertexId)>> = vec![Vec::new(); nv];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.u].push((i, e.v));
            if !e.is_loop() {
                adj[e.v].push((i, e.u));
            }
        }
        let hl: Vec<usize> = (0..nv).map(|v| self.halflines_at(v)).collect();
        let mut covered = vec![false; self.edges.len()];
        let mut budget: usize = 20_000_000;
        for e in 0..self.edges.len() {
            if covered[e] {
                continue;
            }
            let mut used = vec![false; self.edges.len()];
            used[e] = true;
            let mut trail = vec![e];
            let (a, b) = (self.edges[e].u, self.edges[e].v);
            let mut search = TrailSearch {
                adj: &adj,
                halflines: &hl,
                budget: &mut budget,
            };
            let found = search.forward(b, a, &mut used, &mut trail)?;
            match found {
                Some(t) => {
                    for i in t {
                        covered[i] = true;
                    }
                }
                None => return Ok(false),
            }
        }
        Ok(true)
    }

    /// Parses the JSON graph format and validates it.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(s)?;
        let mut index = BTreeMap::new();
        for (i, v) in file.vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate vertex id {v:?}")));
            }
        }
        let lookup = |name: &str, what: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::InvalidGraph(format!("{what} references unknown vertex {name:?}")))
        };
        let mut edges = Vec::with_capacity(file.edges.len());
        for (i, e) in file.edges.iter().enumerate() {
            let what = format!("edge {i}");
            edges.push(Edge {
                u: lookup(&e.u, &what)?,
                v: lookup(&e.v, &what)?,
                len: T::from_f64(e.len).unwrap_or_else(T::nan),
            });
        }
        let halflines = file
            .halflines
            .iter()
            .map(|h| lookup(h, "half-line"))
            .collect::<Result<Vec<_>>>()?;
        let dirichlet = file
            .dirichlet
            .iter()
            .map(|d| lookup(d, "dirichlet list"))
            .collect::<Result<Vec<_>>>()?;
        let g = MetricGraph::new(
            file.name.unwrap_or_else(|| "graph".to_string()),
            file.vertices,
            edges,
            halflines,
        )?;
        if dirichlet.is_empty() {
            Ok(g)
        } else {
            g.with_dirichlet(dirichlet)
        }
    }

    pub fn to_json_string(&self) -> String {
        let file = GraphFile {
            name: Some(self.name.clone()),
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    u: self.vertices[e.u].clone(),
                    v: self.vertices[e.v].clone(),
                    len: to_f64(e.len),
                })
                .collect(),
            halflines: self.halflines.iter().map(|&h| self.vertices[h].clone()).collect(),
            dirichlet: self.dirichlet.iter().map(|&d| self.vertices[d].clone()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("graph serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Same graph with vertices, edges and half-lines reordered.
    /// `vertex_perm[i]` is the new position of vertex `i`; likewise for the others.
    pub fn permuted(
        &self,
        vertex_perm: &[usize],
        edge_perm: &[usize],
        halfline_perm: &[usize],
        flip_edges: bool,
    ) -> Result<Self> {
        let nv = self.n_vertices();
        let mut vertices = vec![String::new(); nv];
        for (i, name) in self.vertices.iter().enumerate() {
            vertices[vertex_perm[i]] = name.clone();
        }
        let mut edges = vec![
            Edge {
                u: 0,
                v: 0,
                len: T::zero()
            };
            self.edges.len()
        ];
        for (i, e) in self.edges.iter().enumerate() {
            let (u, v) = if flip_edges { (e.v, e.u) } else { (e.u, e.v) };
            edges[edge_perm[i]] = Edge {
                u: vertex_perm[u],
                v: vertex_perm[v],
                len: e.len,
            };
        }
        let mut halflines = vec![0; self.halflines.len()];
        for (i, &h) in self.halflines.iter().enumerate() {
            halflines[halfline_perm[i]] = vertex_perm[h];
        }
        let g = MetricGraph::new(self.name.clone(), vertices, edges, halflines)?;
        if self.dirichlet.is_empty() {
            Ok(g)
        } else {
            g.with_dirichlet(self.dirichlet.iter().map(|&d| vertex_perm[d]).collect())
        }
    }

    /// Uniformly rescales every bounded edge.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        positive("scale factor", factor)?;
        let mut g = self.clone();
        for e in &mut g.edges {
            e.len = e.len * factor;
        }
        Ok(g)
    }
}

struct TrailSearch<'a> {
    adj: &'a [Vec<(usize, VertexId)>],
    halflines: &'a [usize],
    budget: &'a mut usize,
}

impl TrailSearch<'_> {
    fn tick(&mut self) -> Result<()> {
        if *self.budget == 0 {
            return Err(Error::UnsupportedTopology(
                "graph too large for exhaustive trail search".into(),
            ));
        }
        *self.budget -= 1;
        Ok(())
    }

    /// Extends the trail from `v` until it can exit on a half-line, then asks
    /// `backward` to close the other end starting from `start`.
    fn forward(
        &mut self,
        v: VertexId,
        start: VertexId,
        used: &mut [bool],
        trail: &mut Vec<usize>,
    ) -> Result<Option<Vec<usize>>> {
        self.tick()?;
        if self.halflines[v] > 0 {
            let mut used2 = used.to_vec();
            let mut trail2 = trail.clone();
            if let Some(t) = self.backward(start, v, &mut used2, &mut trail2)? {
                return Ok(Some(t));
            }
        }
        for k in 0..self.adj[v].len() {
            let (e, w) = self.adj[v][k];
            if used[e] {
                continue;
            }
            used[e] = true;
            trail.push(e);
            if let Some(t) = self.forward(w, start, used, trail)? {
                return Ok(Some(t));
            }
            trail.pop();
            used[e] = false;
        }
        Ok(None)
    }

    fn backward(
        &mut self,
        v: VertexId,
        exit_vertex: VertexId,
        used: &mut [bool],
        trail: &mut Vec<usize>,
    ) -> Result<Option<Vec<usize>>> {
        self.tick()?;
        let available = self.halflines[v] - usize::from(v == exit_vertex);
        if available > 0 {
            return Ok(Some(trail.clone()));
        }
        for k in 0..self.adj[v].len() {
            let (e, w) = self.adj[v][k];
            if used[e] {
                continue;
            }
            used[e] = true;
            trail.push(e);
            if let Some(t) = self.backward(w, exit_vertex, used, trail)? {
                return Ok(Some(t));
            }
            trail.pop();
            used[e] = false;
        }
        Ok(None)
    }
}

/// Shortest-path distances from `source` to every vertex along bounded edges.
pub fn vertex_distances<T: Real>(g: &MetricGraph<T>, source: VertexId) -> Vec<T> {
    distances_from(g, &[(source, T::zero())])
}

/// Multi-source shortest-path distances; each source vertex starts at its offset.
pub fn distances_from<T: Real>(g: &MetricGraph<T>, sources: &[(VertexId, T)]) -> Vec<T> {
    let nv = g.n_vertices();
    let mut dist = vec![T::infinity(); nv];
    let mut done = vec![false; nv];
    for &(v, d) in sources {
        if d < dist[v] {
            dist[v] = d;
        }
    }
    for _ in 0..nv {
        let mut best = None;
        for v in 0..nv {
            if !done[v] && dist[v].is_finite() && best.is_none_or(|b: usize| dist[v] < dist[b]) {
                best = Some(v);
            }
        }
        let Some(v) = best else { break };
        done[v] = true;
        for e in g.edges() {
            let other = if e.u == v {
                e.v
            } else if e.v == v {
                e.u
            } else {
                continue;
            };
            let cand = dist[v] + e.len;
            if cand < dist[other] {
                dist[other] = cand;
            }
        }
    }
    dist
}
