//! Walkable graph over a fused map, terrain-weighted shortest paths and
//! nearest-landmark queries.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layers::{AnnotationKind, FusedMap, SafetyClass};
use crate::raster::{Point, Polygon};

pub const DEFAULT_GRID_STEP: u32 = 4;
/// Samples per edge when checking that a segment stays on walkable ground.
const SEGMENT_SAMPLES: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("grid_step must be at least 1")]
    InvalidGridStep,
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("node {0} does not exist")]
    UnknownNode(usize),
    #[error("no route from node {src} to node {dst}")]
    NoRoute { src: usize, dst: usize },
    #[error("unknown store {0}")]
    UnknownStore(String),
    #[error("store {0} has no walkway anchor")]
    UnreachableStore(u32),
    #[error("k must be at least 1")]
    InvalidK,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terrain {
    Walkway,
    Crossing,
    Parking,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub position: Point,
    pub terrain: Terrain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
    pub terrain: Terrain,
    /// Crossing edge over a street classed unsafe.
    #[serde(default)]
    pub unsafe_street: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub store_anchors: BTreeMap<u32, usize>,
    /// Stores with no walkway node near enough to anchor them.
    pub unreachable_stores: Vec<u32>,
}

impl WalkGraph {
    /// Checks the structural invariants and builds a graph from explicit
    /// parts. Edge lengths must equal the endpoint distance.
    pub fn from_parts(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, RouteError> {
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(RouteError::InvalidGraph(format!("node at index {i} has id {}", n.id)));
            }
        }
        for e in &edges {
            if e.a >= nodes.len() || e.b >= nodes.len() {
                return Err(RouteError::InvalidGraph(format!("edge {}-{} references a missing node", e.a, e.b)));
            }
            if e.a == e.b {
                return Err(RouteError::InvalidGraph(format!("self-loop at {}", e.a)));
            }
            let d = nodes[e.a].position.distance(nodes[e.b].position);
            if (d - e.length).abs() > 1e-9 || d <= 0.0 {
                return Err(RouteError::InvalidGraph(format!("edge {}-{} length {} != {d}", e.a, e.b, e.length)));
            }
        }
        Ok(Self { nodes, edges, store_anchors: BTreeMap::new(), unreachable_stores: Vec::new() })
    }

    /// Adjacency lists of `(neighbor, edge index)`, neighbors ascending.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.a].push((e.b, i));
            adj[e.b].push((e.a, i));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Number of connected components, counting isolated nodes.
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        (0..self.nodes.len()).filter(|&i| find(&mut parent, i) == i).count()
    }

    /// Closest node to `p`, lowest id on ties.
    pub fn nearest_node(&self, p: Point, filter: impl Fn(&Node) -> bool) -> Option<usize> {
        self.nodes
            .iter()
            .filter(|n| filter(n))
            .min_by(|a, b| a.position.distance(p).total_cmp(&b.position.distance(p)).then(a.id.cmp(&b.id)))
            .map(|n| n.id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub walkway: f64,
    pub crossing: f64,
    pub parking: f64,
    /// Applied on top of `crossing` when the crossed street is unsafe.
    pub unsafe_street_crossing: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { walkway: 1.0, crossing: 2.0, parking: 10.0, unsafe_street_crossing: 5.0 }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), RouteError> {
        for (name, v) in [
            ("walkway", self.walkway),
            ("crossing", self.crossing),
            ("parking", self.parking),
            ("unsafe_street_crossing", self.unsafe_street_crossing),
        ] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(RouteError::InvalidWeights(format!("{name} multiplier must be >= 1, got {v}")));
            }
        }
        Ok(())
    }

    pub fn multiplier(&self, e: &Edge) -> f64 {
        match e.terrain {
            Terrain::Walkway => self.walkway,
            Terrain::Parking => self.parking,
            Terrain::Crossing if e.unsafe_street => self.crossing * self.unsafe_street_crossing,
            Terrain::Crossing => self.crossing,
        }
    }

    pub fn cost(&self, e: &Edge) -> f64 {
        e.length * self.multiplier(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub nodes: Vec<usize>,
    /// Index into the graph's edge list for each step.
    pub edges: Vec<usize>,
    pub terrains: Vec<Terrain>,
    pub total_length: f64,
    pub total_cost: f64,
    pub contains_parking: bool,
}

impl Route {
    /// Share of the route length on walkway edges; 1 for a zero-length route.
    pub fn walkway_fraction(&self, g: &WalkGraph) -> f64 {
        if self.total_length == 0.0 {
            return 1.0;
        }
        let walk: f64 = self
            .edges
            .iter()
            .map(|&i| &g.edges[i])
            .filter(|e| e.terrain == Terrain::Walkway)
            .map(|e| e.length)
            .sum();
        walk / self.total_length
    }

    pub fn positions(&self, g: &WalkGraph) -> Vec<Point> {
        self.nodes.iter().map(|&n| g.nodes[n].position).collect()
    }
}

/// Position plus heading in degrees clockwise from North (image up).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point,
    pub heading: f64,
}

impl Pose {
    pub fn new(position: Point, heading: f64) -> Self {
        Self { position, heading: normalize_360(heading) }
    }
}

pub fn normalize_360(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Maps any angle into (-180, 180].
pub fn normalize_180(deg: f64) -> f64 {
    let d = normalize_360(deg);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Compass bearing of `to` seen from `from`: 0 is image up, 90 is image right.
pub fn bearing(from: Point, to: Point) -> f64 {
    let d = to.sub(from);
    if d.norm() == 0.0 {
        return 0.0;
    }
    normalize_360(d.x.atan2(-d.y).to_degrees())
}

struct Walkable<'a> {
    parts: Vec<(Terrain, &'a Polygon, (Point, Point))>,
    unsafe_streets: Vec<(&'a Polygon, (Point, Point))>,
}

fn in_box((lo, hi): (Point, Point), p: Point) -> bool {
    const EPS: f64 = 1e-9;
    p.x >= lo.x - EPS && p.x <= hi.x + EPS && p.y >= lo.y - EPS && p.y <= hi.y + EPS
}

impl<'a> Walkable<'a> {
    fn new(map: &'a FusedMap) -> Self {
        let mut parts = Vec::new();
        for a in &map.annotations {
            let terrain = match a.kind {
                AnnotationKind::Walkway => Terrain::Walkway,
                AnnotationKind::Parking => Terrain::Parking,
                AnnotationKind::Crossing => Terrain::Crossing,
                _ => continue,
            };
            if let Some(poly) = a.geometry.as_polygon() {
                parts.push((terrain, poly, poly.bbox()));
            }
        }
        // Precedence: crossing over walkway over parking.
        parts.sort_by_key(|(t, _, _)| match t {
            Terrain::Crossing => 0,
            Terrain::Walkway => 1,
            Terrain::Parking => 2,
        });
        let unsafe_streets = map
            .annotations_of(AnnotationKind::Street)
            .filter(|a| a.safety() == SafetyClass::Unsafe)
            .filter_map(|a| a.geometry.as_polygon())
            .map(|p| (p, p.bbox()))
            .collect();
        Self { parts, unsafe_streets }
    }

    fn terrain_at(&self, p: Point) -> Option<Terrain> {
        self.parts.iter().find(|(_, poly, bb)| in_box(*bb, p) && poly.contains(p)).map(|(t, _, _)| *t)
    }

    fn segment_walkable(&self, a: Point, b: Point) -> bool {
        (0..=SEGMENT_SAMPLES).all(|k| {
            let t = k as f64 / SEGMENT_SAMPLES as f64;
            self.terrain_at(a.add(b.sub(a).scale(t))).is_some()
        })
    }

    fn on_unsafe_street(&self, p: Point) -> bool {
        self.unsafe_streets.iter().any(|(poly, bb)| in_box(*bb, p) && poly.contains(p))
    }
}

/// Grid graph over walkway, parking and crossing polygons. Nodes sit every
/// `grid_step` pixels, numbered in grid raster order. Edges join
/// 8-neighbors whose connecting segment stays on walkable ground, with the
/// terrain taken at the midpoint.
pub fn build_walk_graph(map: &FusedMap, grid_step: u32) -> Result<WalkGraph, RouteError> {
    if grid_step < 1 {
        return Err(RouteError::InvalidGridStep);
    }
    let walk = Walkable::new(map);
    let step = grid_step as f64;
    let cols = (map.base.width - 1) / grid_step + 1;
    let rows = (map.base.height - 1) / grid_step + 1;
    let mut grid: Vec<Option<usize>> = vec![None; (cols * rows) as usize];
    let mut nodes = Vec::new();
    for gy in 0..rows {
        for gx in 0..cols {
            let p = Point::new(gx as f64 * step, gy as f64 * step);
            if let Some(terrain) = walk.terrain_at(p) {
                grid[(gy * cols + gx) as usize] = Some(nodes.len());
                nodes.push(Node { id: nodes.len(), position: p, terrain });
            }
        }
    }

    let mut edges = Vec::new();
    let try_edge = |nodes: &[Node], a: usize, b: usize, edges: &mut Vec<Edge>| {
        let (pa, pb) = (nodes[a].position, nodes[b].position);
        if !walk.segment_walkable(pa, pb) {
            return;
        }
        let mid = pa.add(pb).scale(0.5);
        let terrain = walk.terrain_at(mid).expect("segment checked");
        let unsafe_street = terrain == Terrain::Crossing && walk.on_unsafe_street(mid);
        edges.push(Edge { a: a.min(b), b: a.max(b), length: pa.distance(pb), terrain, unsafe_street });
    };
    for gy in 0..rows as i64 {
        for gx in 0..cols as i64 {
            let Some(a) = grid[(gy * cols as i64 + gx) as usize] else { continue };
            for (dx, dy) in [(1, 0), (-1, 1), (0, 1), (1, 1)] {
                let (nx, ny) = (gx + dx, gy + dy);
                if nx < 0 || ny < 0 || nx >= cols as i64 || ny >= rows as i64 {
                    continue;
                }
                if let Some(b) = grid[(ny * cols as i64 + nx) as usize] {
                    try_edge(&nodes, a, b, &mut edges);
                }
            }
        }
    }

    // Crossings too thin to hold a grid node get a row of nodes along their
    // long axis, linked to each other and to nearby grid nodes.
    for (terrain, poly, (lo, hi)) in &walk.parts {
        if *terrain != Terrain::Crossing || nodes.iter().any(|n| poly.contains(n.position)) {
            continue;
        }
        let c = poly.centroid();
        let (len, along): (f64, Box<dyn Fn(f64) -> Point>) = if hi.x - lo.x >= hi.y - lo.y {
            (hi.x - lo.x, Box::new(|t| Point::new(lo.x + t, c.y)))
        } else {
            (hi.y - lo.y, Box::new(|t| Point::new(c.x, lo.y + t)))
        };
        let count = (len / step).ceil().max(1.0) as usize;
        let first = nodes.len();
        for k in 0..=count {
            let p = along(len * k as f64 / count as f64);
            if poly.contains(p) && !nodes[first..].iter().any(|n| n.position == p) {
                nodes.push(Node { id: nodes.len(), position: p, terrain: Terrain::Crossing });
            }
        }
        for a in first..nodes.len() {
            if a + 1 < nodes.len() {
                try_edge(&nodes, a, a + 1, &mut edges);
            }
            let pa = nodes[a].position;
            let near: Vec<usize> =
                nodes[..first].iter().filter(|n| n.position.distance(pa) <= 1.5 * step).map(|n| n.id).collect();
            for b in near {
                try_edge(&nodes, a, b, &mut edges);
            }
        }
    }

    let mut g = WalkGraph::from_parts(nodes, edges)?;
    let limit = 10.0 * step;
    for s in &map.directory {
        match g.nearest_node(s.centroid, |n| n.terrain == Terrain::Walkway) {
            Some(n) if g.nodes[n].position.distance(s.centroid) <= limit => {
                g.store_anchors.insert(s.id, n);
            }
            _ => g.unreachable_stores.push(s.id),
        }
    }
    Ok(g)
}

#[derive(Clone, Copy, PartialEq)]
struct State {
    cost: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(g: &WalkGraph, adj: &[Vec<(usize, usize)>], from: usize, w: &CostWeights) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.nodes.len()];
    let mut heap = BinaryHeap::new();
    dist[from] = 0.0;
    heap.push(State { cost: 0.0, node: from });
    while let Some(State { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for &(next, e) in &adj[node] {
            let c = cost + w.cost(&g.edges[e]);
            if c < dist[next] {
                dist[next] = c;
                heap.push(State { cost: c, node: next });
            }
        }
    }
    dist
}

/// Minimum-cost path under `length x multiplier(terrain)`. Among equal-cost
/// paths the lexicographically smallest node sequence wins.
pub fn shortest_walkable_path(g: &WalkGraph, src: usize, dst: usize, w: &CostWeights) -> Result<Route, RouteError> {
    w.validate()?;
    for n in [src, dst] {
        if n >= g.nodes.len() {
            return Err(RouteError::UnknownNode(n));
        }
    }
    let adj = g.adjacency();
    let to_dst = dijkstra(g, &adj, dst, w);
    if !to_dst[src].is_finite() {
        return Err(RouteError::NoRoute { src, dst });
    }
    let mut nodes = vec![src];
    let mut edges = Vec::new();
    let mut cur = src;
    while cur != dst {
        let slack = 1e-9 * to_dst[cur].max(1.0);
        let (next, e) = adj[cur]
            .iter()
            .copied()
            .find(|&(v, e)| w.cost(&g.edges[e]) + to_dst[v] <= to_dst[cur] + slack && to_dst[v] < to_dst[cur])
            .expect("an optimal successor exists");
        nodes.push(next);
        edges.push(e);
        cur = next;
    }
    Ok(route_from_edges(g, nodes, edges, w))
}

fn route_from_edges(g: &WalkGraph, nodes: Vec<usize>, edges: Vec<usize>, w: &CostWeights) -> Route {
    let terrains: Vec<Terrain> = edges.iter().map(|&e| g.edges[e].terrain).collect();
    Route {
        total_length: edges.iter().map(|&e| g.edges[e].length).sum(),
        total_cost: edges.iter().map(|&e| w.cost(&g.edges[e])).sum(),
        contains_parking: terrains.contains(&Terrain::Parking),
        nodes,
        edges,
        terrains,
    }
}

/// Route between two stores' anchors.
pub fn route_between_stores(g: &WalkGraph, from: u32, to: u32, w: &CostWeights) -> Result<Route, RouteError> {
    let anchor = |id: u32| g.store_anchors.get(&id).copied().ok_or(RouteError::UnreachableStore(id));
    shortest_walkable_path(g, anchor(from)?, anchor(to)?, w)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LandmarkRef {
    Store { id: u32 },
    BusStop { index: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub landmark: LandmarkRef,
    pub name: String,
    pub position: Point,
    pub distance: f64,
    /// Bearing relative to the pose heading, in (-180, 180].
    pub relative_bearing: f64,
}

/// Every store and bus stop with distance and relative bearing, nearest first.
pub fn all_landmarks(map: &FusedMap, pose: Pose) -> Vec<Landmark> {
    let stores = map.directory.iter().map(|s| (LandmarkRef::Store { id: s.id }, s.name.clone(), s.centroid));
    let stops = map
        .annotations_of(AnnotationKind::BusStop)
        .enumerate()
        .map(|(i, a)| {
            let name = a.name.clone().unwrap_or_else(|| "bus stop".into());
            (LandmarkRef::BusStop { index: i }, name, a.geometry.anchor_point())
        });
    let mut out: Vec<Landmark> = stores
        .chain(stops)
        .map(|(landmark, name, position)| Landmark {
            landmark,
            name,
            position,
            distance: pose.position.distance(position),
            relative_bearing: normalize_180(bearing(pose.position, position) - pose.heading),
        })
        .collect();
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.landmark.cmp(&b.landmark)));
    out
}

/// The `k` nearest stores and bus stops.
pub fn nearest_landmarks(map: &FusedMap, pose: Pose, k: usize) -> Result<Vec<Landmark>, RouteError> {
    if k == 0 {
        return Err(RouteError::InvalidK);
    }
    let mut all = all_landmarks(map, pose);
    all.truncate(k);
    Ok(all)
}
