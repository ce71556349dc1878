//! Planar subdivisions as doubly connected edge lists whose edges are chains
//! of bisector pieces (possibly unbounded) and whose faces carry order-k labels.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bisector::{piece_intersections, Curve, CurvePiece};
use crate::kernel::{distance, ElementarySite, Metric, Point2, SiteId, SiteSet};

pub type VertexId = usize;
pub type HalfEdgeId = usize;
pub type EdgeId = usize;
pub type FaceId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubdivisionError {
    #[error("inconsistent topology: {0}")]
    InconsistentTopology(String),
    #[error("faces across half-edge {0} carry different labels")]
    LabelMismatch(HalfEdgeId),
    #[error("half-edge {0} is not part of a Voronoi edge")]
    NotAnEdge(HalfEdgeId),
    #[error("non-transversal contact with the face boundary near {0}")]
    Degenerate(Point2),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKind {
    Type1,
    Type2,
}

/// The set of sites owning a face. Type-2 labels carry the shared endpoint
/// (as the elementary site of its lowest-numbered owner) that the order-k
/// disk touches.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderKLabel {
    pub sites: Vec<SiteId>,
    pub kind: LabelKind,
    pub representative: Option<ElementarySite>,
}

impl OrderKLabel {
    pub fn type1(mut sites: Vec<SiteId>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        OrderKLabel { sites, kind: LabelKind::Type1, representative: None }
    }

    pub fn type2(mut sites: Vec<SiteId>, rep: ElementarySite) -> Self {
        sites.sort_unstable();
        sites.dedup();
        OrderKLabel { sites, kind: LabelKind::Type2, representative: Some(rep) }
    }

    pub fn contains(&self, s: SiteId) -> bool {
        self.sites.binary_search(&s).is_ok()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// FNV-1a over the site ids and representative; stable across runs.
    pub fn stable_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for &s in &self.sites {
            feed(s as u64);
        }
        if let Some(r) = self.representative {
            feed(u64::MAX);
            feed(r.owner as u64);
            feed(r.kind as u64);
        }
        h
    }

    pub fn symmetric_difference(&self, o: &OrderKLabel) -> Vec<SiteId> {
        let a: BTreeSet<_> = self.sites.iter().copied().collect();
        let b: BTreeSet<_> = o.sites.iter().copied().collect();
        a.symmetric_difference(&b).copied().collect()
    }
}

impl fmt::Display for OrderKLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.sites.iter().map(|s| s.to_string()).collect();
        write!(f, "{{{}}}", ids.join(","))?;
        if let Some(r) = self.representative {
            write!(f, "@{}:{:?}", r.owner, r.kind)?;
        }
        Ok(())
    }
}

/// What an edge separates: two sites on their bisector, or the boundary of
/// the endpoint zone of `site` at the shared endpoint `apex` (PSLG only).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "support", rename_all = "kebab-case")]
pub enum EdgeSupport {
    Bisector { a: SiteId, b: SiteId },
    Wedge { site: SiteId, apex: Point2 },
}

/// One curve piece of an edge. `forward` tells whether the piece parameter
/// increases along the edge direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSeg {
    pub piece: CurvePiece,
    pub forward: bool,
    pub support: EdgeSupport,
}

impl EdgeSeg {
    /// Parameters at the start and end in edge direction.
    fn ends(&self) -> (Option<f64>, Option<f64>) {
        if self.forward {
            (self.piece.t0, self.piece.t1)
        } else {
            (self.piece.t1, self.piece.t0)
        }
    }

    pub fn start_point(&self) -> Option<Point2> {
        self.ends().0.map(|t| self.piece.curve.point(t))
    }

    pub fn end_point(&self) -> Option<Point2> {
        self.ends().1.map(|t| self.piece.curve.point(t))
    }

    /// Tangent in edge direction at parameter `t`.
    pub fn tangent(&self, t: f64) -> Point2 {
        let d = self.piece.curve.tangent(t);
        if self.forward {
            d
        } else {
            -d
        }
    }

    fn step(&self) -> f64 {
        if self.forward {
            1.0
        } else {
            -1.0
        }
    }

    /// Outgoing direction at the start, plus a point slightly inside.
    fn leave_start(&self, delta: f64) -> (Point2, Point2) {
        let t = self.ends().0.expect("bounded start");
        let d = self.tangent(t);
        let dt = (delta / d.norm()).min(0.25 * self.piece.length() / d.norm());
        (d, self.piece.curve.point(t + self.step() * dt))
    }

    /// Outgoing direction at the end (pointing back along the edge).
    fn leave_end(&self, delta: f64) -> (Point2, Point2) {
        let t = self.ends().1.expect("bounded end");
        let d = -self.tangent(t);
        let dt = (delta / d.norm()).min(0.25 * self.piece.length() / d.norm());
        (d, self.piece.curve.point(t - self.step() * dt))
    }

    pub fn samples(&self, count: usize, reach: f64) -> Vec<Point2> {
        self.piece.samples(count, reach)
    }

    pub fn midpoint(&self, reach: f64) -> Point2 {
        self.piece.curve.point(self.piece.mid_param(reach))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexKind {
    Regular,
    Crossing,
    Pslg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "node", content = "id", rename_all = "kebab-case")]
pub enum Node {
    Vertex(VertexId),
    Infinity(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub pos: Point2,
    pub half_edge: HalfEdgeId,
    pub kind: VertexKind,
}

/// Half-edges without `edge` are arcs at infinity joining consecutive
/// unbounded ends; they are never counted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfEdge {
    pub origin: Node,
    pub twin: HalfEdgeId,
    pub next: HalfEdgeId,
    pub prev: HalfEdgeId,
    pub face: FaceId,
    pub edge: Option<EdgeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub segs: Vec<EdgeSeg>,
    /// Half-edge running in edge direction; its twin runs backwards.
    pub half_edge: HalfEdgeId,
    pub left: Option<OrderKLabel>,
    pub right: Option<OrderKLabel>,
}

/// An unbounded end of an edge: asymptotic direction and a point on its line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfiniteEnd {
    pub dir: Point2,
    pub anchor: Point2,
    /// Edge half-edge leaving this end toward the finite plane.
    pub half_edge: HalfEdgeId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub label: Option<OrderKLabel>,
    /// One half-edge per boundary component.
    pub boundary: Vec<HalfEdgeId>,
    pub unbounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarSubdivision {
    pub k: usize,
    pub metric: Metric,
    /// Instance diameter; tolerances are relative to it.
    pub scale: f64,
    pub vertices: Vec<Vertex>,
    pub half_edges: Vec<HalfEdge>,
    pub edges: Vec<Edge>,
    pub faces: Vec<Face>,
    /// Unbounded ends in counter-clockwise order around infinity.
    pub infinite: Vec<InfiniteEnd>,
    /// The excluded face beyond infinity, when there are unbounded edges.
    pub outer: Option<FaceId>,
    /// Problems noticed while assembling (inconsistent labels, dangling ends).
    pub issues: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub f: usize,
    pub e: usize,
    pub v: usize,
    pub u: usize,
    pub v_new: usize,
    pub v_old: usize,
    /// Vertices of degree other than three (crossings, PSLG vertices).
    pub v_other: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexAge {
    New,
    Old,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexClass {
    pub vertex: VertexId,
    pub class: VertexAge,
    pub triple: [SiteId; 3],
    pub base: Vec<SiteId>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub twin_involution: bool,
    pub cycles: bool,
    pub labels: bool,
    pub on_bisector: bool,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.twin_involution && self.cycles && self.labels && self.on_bisector
    }
}

/// A kept bisector portion with the labels on its two sides.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcSpec {
    pub piece: CurvePiece,
    pub left: OrderKLabel,
    pub right: OrderKLabel,
    pub support: EdgeSupport,
}

/// An edge between explicit vertices; `None` ends are at infinity.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSpec {
    pub segs: Vec<EdgeSeg>,
    pub start: Option<VertexId>,
    pub end: Option<VertexId>,
    pub left: Option<OrderKLabel>,
    pub right: Option<OrderKLabel>,
}

/// Graph form of a subdivision, before faces are traced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GraphSpec {
    pub vertices: Vec<(Point2, VertexKind)>,
    pub edges: Vec<EdgeSpec>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let nx = self.0[y];
            self.0[y] = r;
            y = nx;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Clusters points closer than `tol`; returns the cluster index of each point
/// and the cluster centroids.
fn cluster_points(pts: &[Point2], tol: f64) -> (Vec<usize>, Vec<Point2>) {
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let cell = |p: Point2| ((p.x / tol).floor() as i64, (p.y / tol).floor() as i64);
    let mut uf = UnionFind::new(pts.len());
    for (i, &p) in pts.iter().enumerate() {
        let (cx, cy) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = grid.get(&(cx + dx, cy + dy)) {
                    for &j in list {
                        if pts[j].dist(p) <= tol {
                            uf.union(i, j);
                        }
                    }
                }
            }
        }
        grid.entry((cx, cy)).or_default().push(i);
    }
    let mut ids = HashMap::new();
    let mut of = vec![0; pts.len()];
    let mut sums: Vec<(Point2, usize)> = Vec::new();
    for i in 0..pts.len() {
        let r = uf.find(i);
        let id = *ids.entry(r).or_insert_with(|| {
            sums.push((Point2::default(), 0));
            sums.len() - 1
        });
        of[i] = id;
        sums[id].0 = sums[id].0 + pts[i];
        sums[id].1 += 1;
    }
    (of, sums.into_iter().map(|(s, c)| s * (1.0 / c as f64)).collect())
}

/// Joins arcs into a graph: endpoints are clustered, and nodes where exactly
/// two arcs meet are dissolved into multi-piece edges.
pub fn arcs_to_graph(arcs: Vec<ArcSpec>, scale: f64, specials: &[(Point2, VertexKind)]) -> (GraphSpec, Vec<String>) {
    let tol = 1e-7 * scale;
    let mut issues = Vec::new();
    let mut pts = Vec::new();
    let mut slot = Vec::new();
    for a in &arcs {
        let s = a.piece.start().map(|p| {
            pts.push(p);
            pts.len() - 1
        });
        let e = a.piece.end().map(|p| {
            pts.push(p);
            pts.len() - 1
        });
        slot.push((s, e));
    }
    let (mut of, mut centers) = cluster_points(&pts, tol);
    // Far from the sites, vertices come from nearly parallel bisectors and
    // their computed positions spread with the distance; lone ends are
    // matched with a tolerance that grows accordingly.
    let mut count = vec![0usize; centers.len()];
    for &c in &of {
        count[c] += 1;
    }
    let mid = {
        let mut xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        let mut ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        xs.get(xs.len() / 2).map_or(Point2::default(), |&x| Point2::new(x, ys[ys.len() / 2]))
    };
    let lone: Vec<usize> = (0..centers.len()).filter(|&c| count[c] == 1).collect();
    let mut uf = UnionFind::new(centers.len());
    let mut merged = false;
    for (i, &a) in lone.iter().enumerate() {
        for &b in &lone[i + 1..] {
            let far = 1e-7 * scale.max(centers[a].dist(mid)).max(centers[b].dist(mid));
            if centers[a].dist(centers[b]) <= far {
                merged |= uf.union(a, b);
            }
        }
    }
    if merged {
        let mut remap = HashMap::new();
        let mut sums: Vec<(Point2, usize)> = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            let r = uf.find(c);
            let id = *remap.entry(r).or_insert_with(|| {
                sums.push((Point2::default(), 0));
                sums.len() - 1
            });
            sums[id].0 = sums[id].0 + *center * count[c] as f64;
            sums[id].1 += count[c];
        }
        for c in of.iter_mut() {
            *c = remap[&uf.find(*c)];
        }
        centers = sums.into_iter().map(|(s, c)| s * (1.0 / c.max(1) as f64)).collect();
    }
    let mut ends: Vec<(Option<usize>, Option<usize>)> = slot.iter().map(|&(s, e)| (s.map(|i| of[i]), e.map(|i| of[i]))).collect();
    let mut alive: Vec<bool> = vec![true; arcs.len()];
    for (i, a) in arcs.iter().enumerate() {
        if let (Some(s), Some(e)) = ends[i] {
            if s == e && a.piece.length() <= 100.0 * tol {
                alive[i] = false;
            }
        }
    }
    let mut incident: Vec<Vec<(usize, bool)>> = vec![Vec::new(); centers.len()];
    for i in 0..arcs.len() {
        if !alive[i] {
            continue;
        }
        if let Some(s) = ends[i].0 {
            incident[s].push((i, true));
        }
        if let Some(e) = ends[i].1 {
            incident[e].push((i, false));
        }
    }
    let special_kind = |p: Point2| specials.iter().find(|(q, _)| q.dist(p) <= 1e3 * tol).map(|(_, k)| *k);
    let mut keep: Vec<bool> = (0..centers.len())
        .map(|v| incident[v].len() != 2 || special_kind(centers[v]).is_some())
        .collect();
    for (v, inc) in incident.iter().enumerate() {
        if inc.len() == 1 {
            issues.push(format!("dangling arc end at {}", centers[v]));
        }
    }
    let mut vid: Vec<Option<usize>> = vec![None; centers.len()];
    let mut g = GraphSpec::default();
    let mut used = vec![false; arcs.len()];
    let vertex_of = |v: usize, g: &mut GraphSpec, vid: &mut Vec<Option<usize>>| -> usize {
        *vid[v].get_or_insert_with(|| {
            let kind = special_kind(centers[v]).unwrap_or(VertexKind::Regular);
            g.vertices.push((centers[v], kind));
            g.vertices.len() - 1
        })
    };
    // Walks from node `from` along arc `first` leaving through the given end.
    let walk = |from: Option<usize>, first: (usize, bool), g: &mut GraphSpec, vid: &mut Vec<Option<usize>>, keep: &Vec<bool>, used: &mut Vec<bool>, issues: &mut Vec<String>| {
        let mut segs = Vec::new();
        let (mut arc, mut fwd) = first;
        let mut labels: Option<(OrderKLabel, OrderKLabel)> = None;
        let end_node;
        loop {
            used[arc] = true;
            let a = &arcs[arc];
            let (l, r) = if fwd { (a.left.clone(), a.right.clone()) } else { (a.right.clone(), a.left.clone()) };
            match &labels {
                None => labels = Some((l, r)),
                Some((l0, r0)) => {
                    if *l0 != l || *r0 != r {
                        issues.push(format!("labels change along an edge near {}", a.piece.curve.point(a.piece.mid_param(scale))));
                    }
                }
            }
            segs.push(EdgeSeg { piece: a.piece, forward: fwd, support: a.support });
            let far = if fwd { ends[arc].1 } else { ends[arc].0 };
            match far {
                Some(v) if !keep[v] => {
                    let arrive = (arc, !fwd);
                    match incident[v].iter().find(|&&e| e != arrive) {
                        Some(&(nxt, nstart)) if !used[nxt] => {
                            arc = nxt;
                            fwd = nstart;
                        }
                        _ => {
                            end_node = Some(v);
                            break;
                        }
                    }
                }
                other => {
                    end_node = other;
                    break;
                }
            }
        }
        let start = from.map(|v| vertex_of(v, g, vid));
        let end = end_node.map(|v| vertex_of(v, g, vid));
        let (left, right) = labels.unwrap();
        g.edges.push(EdgeSpec { segs, start, end, left: Some(left), right: Some(right) });
    };
    for v in 0..centers.len() {
        if !keep[v] {
            continue;
        }
        for &(arc, isstart) in &incident[v].clone() {
            if !used[arc] {
                walk(Some(v), (arc, isstart), &mut g, &mut vid, &keep, &mut used, &mut issues);
            }
        }
    }
    for i in 0..arcs.len() {
        if alive[i] && !used[i] && ends[i].0.is_none() {
            walk(None, (i, true), &mut g, &mut vid, &keep, &mut used, &mut issues);
        }
        if alive[i] && !used[i] && ends[i].1.is_none() {
            walk(None, (i, false), &mut g, &mut vid, &keep, &mut used, &mut issues);
        }
    }
    // Remaining arcs form closed chains through degree-two nodes only.
    for i in 0..arcs.len() {
        if alive[i] && !used[i] {
            let v = ends[i].0.expect("closed chain");
            keep[v] = true;
            walk(Some(v), (i, true), &mut g, &mut vid, &keep, &mut used, &mut issues);
        }
    }
    ends.clear();
    (g, issues)
}

fn angle_cmp(a: &(f64, f64), b: &(f64, f64)) -> Ordering {
    if (a.0 - b.0).abs() > 1e-9 {
        a.0.total_cmp(&b.0)
    } else {
        a.1.total_cmp(&b.1)
    }
}

/// Builds a subdivision from explicit arcs. With no arcs the plane is one
/// face labeled `default_label`.
pub fn assemble(
    k: usize,
    metric: Metric,
    scale: f64,
    arcs: Vec<ArcSpec>,
    specials: &[(Point2, VertexKind)],
    default_label: Option<OrderKLabel>,
) -> PlanarSubdivision {
    let (g, issues) = arcs_to_graph(arcs, scale, specials);
    let mut d = build(k, metric, scale, &g, default_label);
    d.issues.extend(issues);
    d
}

/// Traces faces of a graph.
pub fn build(k: usize, metric: Metric, scale: f64, g: &GraphSpec, default_label: Option<OrderKLabel>) -> PlanarSubdivision {
    let mut d = PlanarSubdivision {
        k,
        metric,
        scale,
        vertices: g.vertices.iter().map(|&(pos, kind)| Vertex { pos, half_edge: usize::MAX, kind }).collect(),
        half_edges: Vec::new(),
        edges: Vec::new(),
        faces: Vec::new(),
        infinite: Vec::new(),
        outer: None,
        issues: Vec::new(),
    };
    if g.edges.is_empty() {
        d.faces.push(Face { label: default_label, boundary: Vec::new(), unbounded: true });
        return d;
    }
    let delta = 1e-6 * scale;
    let mut outgoing: Vec<Vec<(HalfEdgeId, (f64, f64))>> = vec![Vec::new(); g.vertices.len()];
    for (ei, es) in g.edges.iter().enumerate() {
        let (h0, h1) = (2 * ei, 2 * ei + 1);
        let blank = |origin| HalfEdge { origin, twin: 0, next: usize::MAX, prev: usize::MAX, face: usize::MAX, edge: Some(ei) };
        let first = es.segs[0];
        let last = *es.segs.last().unwrap();
        let o0 = match es.start {
            Some(v) => {
                let (dir, p) = first.leave_start(delta);
                outgoing[v].push((h0, (dir.angle(), (p - g.vertices[v].0).angle())));
                Node::Vertex(v)
            }
            None => {
                let t = first.piece.mid_param(1.0);
                d.infinite.push(InfiniteEnd { dir: -first.tangent(t).unit(), anchor: anchor_of(&first.piece.curve), half_edge: h0 });
                Node::Infinity(d.infinite.len() - 1)
            }
        };
        let o1 = match es.end {
            Some(v) => {
                let (dir, p) = last.leave_end(delta);
                outgoing[v].push((h1, (dir.angle(), (p - g.vertices[v].0).angle())));
                Node::Vertex(v)
            }
            None => {
                let t = last.piece.mid_param(1.0);
                d.infinite.push(InfiniteEnd { dir: last.tangent(t).unit(), anchor: anchor_of(&last.piece.curve), half_edge: h1 });
                Node::Infinity(d.infinite.len() - 1)
            }
        };
        let mut a = blank(o0);
        a.twin = h1;
        let mut b = blank(o1);
        b.twin = h0;
        d.half_edges.push(a);
        d.half_edges.push(b);
        d.edges.push(Edge { segs: es.segs.clone(), half_edge: h0, left: es.left.clone(), right: es.right.clone() });
    }
    for (v, out) in outgoing.iter_mut().enumerate() {
        out.sort_by(|a, b| angle_cmp(&a.1, &b.1));
        let n = out.len();
        for i in 0..n {
            let o = out[i].0;
            let tw = d.half_edges[o].twin;
            d.half_edges[tw].next = out[(i + n - 1) % n].0;
        }
        if let Some(&(h, _)) = out.first() {
            d.vertices[v].half_edge = h;
        }
    }
    // Order unbounded ends around infinity and add the arcs between them.
    let mut order: Vec<usize> = (0..d.infinite.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&d.infinite[i], &d.infinite[j]);
        let key = |e: &InfiniteEnd| (e.dir.angle(), e.dir.cross(e.anchor));
        let (ka, kb) = (key(a), key(b));
        if (ka.0 - kb.0).abs() > 1e-12 {
            ka.0.total_cmp(&kb.0)
        } else {
            ka.1.total_cmp(&kb.1)
        }
    });
    let old = std::mem::take(&mut d.infinite);
    d.infinite = order.iter().map(|&i| old[i].clone()).collect();
    for (i, e) in d.infinite.iter().enumerate() {
        d.half_edges[e.half_edge].origin = Node::Infinity(i);
    }
    let m = d.infinite.len();
    if m > 0 {
        let base = d.half_edges.len();
        for i in 0..m {
            let j = (i + 1) % m;
            let (inner, outer) = (base + 2 * i, base + 2 * i + 1);
            d.half_edges.push(HalfEdge { origin: Node::Infinity(i), twin: outer, next: d.infinite[j].half_edge, prev: usize::MAX, face: usize::MAX, edge: None });
            let prev_outer = base + 2 * ((i + m - 1) % m) + 1;
            d.half_edges.push(HalfEdge { origin: Node::Infinity(j), twin: inner, next: prev_outer, prev: usize::MAX, face: usize::MAX, edge: None });
            let incoming = d.half_edges[d.infinite[i].half_edge].twin;
            d.half_edges[incoming].next = inner;
        }
    }
    for h in 0..d.half_edges.len() {
        let n = d.half_edges[h].next;
        if n < d.half_edges.len() {
            d.half_edges[n].prev = h;
        }
    }
    d.trace_faces(default_label);
    d
}

fn anchor_of(c: &Curve) -> Point2 {
    match *c {
        Curve::Line { p, d } => p - d * (p.dot(d) / d.norm2()),
        Curve::Parabola { foot, .. } => foot,
    }
}

/// Result of casting a ray against the edges of a subdivision.
#[derive(Clone, Copy, Debug)]
pub struct RayHit {
    pub s: f64,
    pub point: Point2,
    /// Half-edge whose left side faces the ray origin.
    pub facing: HalfEdgeId,
    pub clean: bool,
}

impl PlanarSubdivision {
    /// Half-edges of the boundary cycle starting at `start`.
    pub fn cycle(&self, start: HalfEdgeId) -> Vec<HalfEdgeId> {
        let mut out = vec![start];
        let mut h = self.half_edges[start].next;
        while h != start && out.len() <= self.half_edges.len() {
            out.push(h);
            h = self.half_edges[h].next;
        }
        out
    }

    fn half_edge_polyline(&self, h: HalfEdgeId) -> Vec<Point2> {
        let Some(e) = self.half_edges[h].edge else { return Vec::new() };
        let edge = &self.edges[e];
        let mut pts = Vec::new();
        for seg in &edge.segs {
            let (a, b) = (seg.piece.lo(), seg.piece.hi());
            if !a.is_finite() || !b.is_finite() {
                continue;
            }
            let steps = if matches!(seg.piece.curve, Curve::Parabola { .. }) { 16 } else { 1 };
            let mut run: Vec<Point2> = (0..=steps).map(|i| seg.piece.curve.point(a + (b - a) * i as f64 / steps as f64)).collect();
            if !seg.forward {
                run.reverse();
            }
            pts.extend(run);
        }
        if edge.half_edge != h {
            pts.reverse();
        }
        pts
    }

    fn trace_faces(&mut self, default_label: Option<OrderKLabel>) {
        let nh = self.half_edges.len();
        let mut cycle_of = vec![usize::MAX; nh];
        let mut cycles: Vec<Vec<HalfEdgeId>> = Vec::new();
        for h in 0..nh {
            if cycle_of[h] != usize::MAX {
                continue;
            }
            let c = self.cycle(h);
            for &x in &c {
                cycle_of[x] = cycles.len();
            }
            cycles.push(c);
        }
        // Cycle roles: outer boundary at infinity, faces, holes.
        let mut face_of_cycle: Vec<Option<FaceId>> = vec![None; cycles.len()];
        let mut holes = Vec::new();
        for (ci, c) in cycles.iter().enumerate() {
            let arcs: Vec<_> = c.iter().filter(|&&h| self.half_edges[h].edge.is_none()).collect();
            if !arcs.is_empty() && arcs.len() == c.len() {
                self.faces.push(Face { label: None, boundary: vec![c[0]], unbounded: true });
                self.outer = Some(self.faces.len() - 1);
                face_of_cycle[ci] = self.outer;
            } else if !arcs.is_empty() {
                self.faces.push(Face { label: None, boundary: vec![c[0]], unbounded: true });
                face_of_cycle[ci] = Some(self.faces.len() - 1);
            } else {
                let poly: Vec<Point2> = c.iter().flat_map(|&h| self.half_edge_polyline(h)).collect();
                let area: f64 = (0..poly.len()).map(|i| poly[i].cross(poly[(i + 1) % poly.len()])).sum();
                if area > 0.0 {
                    self.faces.push(Face { label: None, boundary: vec![c[0]], unbounded: false });
                    face_of_cycle[ci] = Some(self.faces.len() - 1);
                } else {
                    holes.push(ci);
                }
            }
        }
        for &h in &holes {
            let f = self.resolve_hole(h, &cycles, &cycle_of, &mut face_of_cycle, 0);
            let f = match f {
                Some(f) => f,
                None => {
                    // Unbounded face without any unbounded edge.
                    self.faces.push(Face { label: None, boundary: Vec::new(), unbounded: true });
                    let f = self.faces.len() - 1;
                    face_of_cycle[h] = Some(f);
                    f
                }
            };
            if !self.faces[f].boundary.contains(&cycles[h][0]) {
                self.faces[f].boundary.push(cycles[h][0]);
            }
            face_of_cycle[h] = Some(f);
        }
        let free_face = self.faces.iter().position(|f| f.unbounded && f.boundary.is_empty());
        for (ci, c) in cycles.iter().enumerate() {
            let f = face_of_cycle[ci].or(free_face).expect("every cycle has a face");
            for &h in c {
                self.half_edges[h].face = f;
            }
        }
        for f in 0..self.faces.len() {
            if Some(f) == self.outer {
                continue;
            }
            let mut label: Option<OrderKLabel> = None;
            for &b in &self.faces[f].boundary.clone() {
                for h in self.cycle(b) {
                    let Some(l) = self.side_label(h) else { continue };
                    match &label {
                        None => label = Some(l.clone()),
                        Some(x) if x != l => {
                            self.issues.push(format!("face {f} sees labels {x} and {l}"));
                        }
                        _ => {}
                    }
                }
            }
            self.faces[f].label = label.or_else(|| default_label.clone());
        }
    }

    fn resolve_hole(
        &self,
        ci: usize,
        cycles: &[Vec<HalfEdgeId>],
        cycle_of: &[usize],
        face_of_cycle: &mut Vec<Option<FaceId>>,
        depth: usize,
    ) -> Option<FaceId> {
        if let Some(f) = face_of_cycle[ci] {
            return Some(f);
        }
        if depth > cycles.len() {
            return None;
        }
        let comp = self.components();
        let h0 = cycles[ci][0];
        let e = self.half_edges[h0].edge?;
        let origin_comp = comp[e];
        let start = self.edges[e].segs[0].midpoint(self.scale);
        let dir = Point2::new(0.8191520442889918, 0.573576436351046);
        match self.ray_cast(start, dir, |x| comp[x] == origin_comp) {
            Some(hit) => {
                let cc = cycle_of[hit.facing];
                let f = self.resolve_hole(cc, cycles, cycle_of, face_of_cycle, depth + 1);
                face_of_cycle[ci] = f;
                f
            }
            None => {
                if self.infinite.is_empty() {
                    None
                } else {
                    let arc = self.arc_toward(dir);
                    let f = face_of_cycle[cycle_of[arc]];
                    face_of_cycle[ci] = f;
                    f
                }
            }
        }
    }

    /// Connected component of each edge (all unbounded edges meet at infinity).
    fn components(&self) -> Vec<usize> {
        let nv = self.vertices.len();
        let mut uf = UnionFind::new(nv + 1);
        for e in &self.edges {
            let a = self.node_index(self.half_edges[e.half_edge].origin, nv);
            let b = self.node_index(self.half_edges[self.half_edges[e.half_edge].twin].origin, nv);
            uf.union(a, b);
        }
        self.edges
            .iter()
            .map(|e| {
                let a = self.node_index(self.half_edges[e.half_edge].origin, nv);
                uf.find(a)
            })
            .collect()
    }

    fn node_index(&self, n: Node, nv: usize) -> usize {
        match n {
            Node::Vertex(v) => v,
            Node::Infinity(_) => nv,
        }
    }

    /// Label of the face on the left of an edge half-edge, as recorded on the edge.
    pub fn side_label(&self, h: HalfEdgeId) -> Option<&OrderKLabel> {
        let e = &self.edges[self.half_edges[h].edge?];
        if e.half_edge == h {
            e.left.as_ref()
        } else {
            e.right.as_ref()
        }
    }

    /// The inner arc at infinity in direction `dir`. Ends are in cyclic
    /// order, not necessarily starting at angle -pi.
    fn arc_toward(&self, dir: Point2) -> HalfEdgeId {
        let ang = dir.angle();
        let m = self.infinite.len();
        let tau = 2.0 * std::f64::consts::PI;
        let behind: Vec<f64> = self.infinite.iter().map(|e| (ang - e.dir.angle()).rem_euclid(tau)).collect();
        let least = behind.iter().copied().fold(f64::INFINITY, f64::min);
        let close = |i: usize| behind[i] - least <= 1e-12;
        // Among parallel ends the ray passes after the last one.
        let pick = (0..m).find(|&i| close(i) && !close((i + 1) % m)).unwrap_or(m - 1);
        let h = self.half_edges[self.infinite[pick].half_edge].twin;
        self.half_edges[h].next
    }

    /// Nearest transversal hit of the ray `x + s dir`, `s > 0`, against edges
    /// not excluded by `skip`.
    pub fn ray_cast(&self, x: Point2, dir: Point2, skip: impl Fn(EdgeId) -> bool) -> Option<RayHit> {
        let ray = Curve::Line { p: x, d: dir };
        let tiny = 1e-12 * self.scale;
        let mut best: Option<RayHit> = None;
        for (ei, e) in self.edges.iter().enumerate() {
            if skip(ei) {
                continue;
            }
            for seg in &e.segs {
                let g = seg.piece.curve.implicit_along(&ray);
                let sc = g.max_abs();
                if sc == 0.0 || g.is_negligible(sc.max(1e-300)) && g.0.len() <= 1 {
                    continue;
                }
                for s in crate::poly::real_roots(&g, tiny, f64::INFINITY) {
                    if best.is_some_and(|b| b.s <= s) {
                        continue;
                    }
                    let y = x + dir * s;
                    let t = seg.piece.curve.param_of(y);
                    let speed = seg.piece.curve.tangent(t).norm();
                    if !seg.piece.contains_param(t, 1e-12 * self.scale / speed) {
                        continue;
                    }
                    let tan = seg.piece.curve.tangent(t);
                    let along = if seg.forward { e.half_edge } else { self.half_edges[e.half_edge].twin };
                    let facing = if tan.cross(dir) < 0.0 { along } else { self.half_edges[along].twin };
                    let near_end = [seg.piece.start(), seg.piece.end()].iter().flatten().any(|p| p.dist(y) <= 1e-7 * self.scale);
                    let grazing = (tan.unit().cross(dir)).abs() < 1e-6;
                    best = Some(RayHit { s, point: y, facing, clean: !near_end && !grazing });
                }
            }
        }
        best
    }

    /// Face containing `x` (faces are open; points on edges get an adjacent face).
    pub fn locate(&self, x: Point2) -> Option<FaceId> {
        if self.edges.is_empty() {
            return (!self.faces.is_empty()).then_some(0);
        }
        let mut fallback = None;
        for j in 0..8 {
            let th = 0.6180339887 + 1.2345678901 * j as f64;
            let dir = Point2::new(th.cos(), th.sin());
            match self.ray_cast(x, dir, |_| false) {
                Some(hit) => {
                    let f = self.half_edges[hit.facing].face;
                    if hit.clean {
                        return Some(f);
                    }
                    fallback.get_or_insert(f);
                }
                None => {
                    if self.infinite.is_empty() {
                        let f = self.faces.iter().position(|f| f.unbounded && f.boundary.is_empty());
                        if f.is_some() {
                            return f;
                        }
                        continue;
                    }
                    return Some(self.half_edges[self.arc_toward(dir)].face);
                }
            }
        }
        fallback
    }

    pub fn label_at(&self, x: Point2) -> Option<&OrderKLabel> {
        self.locate(x).and_then(|f| self.faces[f].label.as_ref())
    }

    /// Faces other than the excluded outer face.
    pub fn face_ids(&self) -> impl Iterator<Item = FaceId> + '_ {
        (0..self.faces.len()).filter(move |&f| Some(f) != self.outer)
    }

    pub fn faces_with_label(&self, label: &OrderKLabel) -> Vec<FaceId> {
        self.face_ids().filter(|&f| self.faces[f].label.as_ref() == Some(label)).collect()
    }

    /// Edge half-edges on the boundary of `f`.
    pub fn face_half_edges(&self, f: FaceId) -> Vec<HalfEdgeId> {
        self.faces[f]
            .boundary
            .iter()
            .flat_map(|&b| self.cycle(b))
            .filter(|&h| self.half_edges[h].edge.is_some())
            .collect()
    }

    /// Sites across the boundary of `f`: for each boundary half-edge, the
    /// label of the face on its other side minus the label of `f`.
    pub fn boundary_sites(&self, f: FaceId) -> BTreeSet<SiteId> {
        let mut out = BTreeSet::new();
        let Some(own) = self.faces[f].label.as_ref() else { return out };
        for h in self.face_half_edges(f) {
            if let Some(l) = self.side_label(self.half_edges[h].twin) {
                out.extend(l.sites.iter().filter(|s| !own.contains(**s)));
            }
        }
        out
    }

    /// A point strictly inside face `f`.
    pub fn face_sample_point(&self, f: FaceId) -> Option<Point2> {
        let hs = self.face_half_edges(f);
        for &h in &hs {
            let e = &self.edges[self.half_edges[h].edge.unwrap()];
            for seg in &e.segs {
                let t = seg.piece.mid_param(self.scale);
                let y = seg.piece.curve.point(t);
                let mut tan = seg.tangent(t).unit();
                if e.half_edge != h {
                    tan = -tan;
                }
                for delta in [1e-3, 1e-4, 1e-5, 1e-2] {
                    let p = y + tan.perp() * (delta * self.scale);
                    if self.locate(p) == Some(f) {
                        return Some(p);
                    }
                }
            }
        }
        if hs.is_empty() && self.edges.is_empty() {
            return Some(Point2::default());
        }
        None
    }

    /// Outgoing half-edges around a vertex in clockwise order.
    pub fn vertex_out(&self, v: VertexId) -> Vec<HalfEdgeId> {
        let start = self.vertices[v].half_edge;
        let mut out = vec![start];
        let mut h = self.half_edges[self.half_edges[start].twin].next;
        while h != start && out.len() <= self.half_edges.len() {
            out.push(h);
            h = self.half_edges[self.half_edges[h].twin].next;
        }
        out
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.vertex_out(v).len()
    }

    pub fn classify_vertex(&self, v: VertexId) -> Option<VertexClass> {
        let out = self.vertex_out(v);
        if out.len() != 3 {
            return None;
        }
        let labels: Vec<&OrderKLabel> = out.iter().map(|&h| self.faces[self.half_edges[h].face].label.as_ref()).collect::<Option<_>>()?;
        if labels.iter().any(|l| l.kind != LabelKind::Type1) {
            return None;
        }
        let sets: Vec<BTreeSet<SiteId>> = labels.iter().map(|l| l.sites.iter().copied().collect()).collect();
        let base: BTreeSet<SiteId> = sets[0].intersection(&sets[1]).copied().collect::<BTreeSet<_>>().intersection(&sets[2]).copied().collect();
        let union: BTreeSet<SiteId> = sets.iter().flatten().copied().collect();
        let extra: Vec<SiteId> = union.difference(&base).copied().collect();
        if extra.len() != 3 {
            return None;
        }
        let class = if base.len() + 1 == self.k {
            VertexAge::New
        } else if base.len() + 2 == self.k {
            VertexAge::Old
        } else {
            return None;
        };
        Some(VertexClass { vertex: v, class, triple: [extra[0], extra[1], extra[2]], base: base.into_iter().collect() })
    }

    pub fn census(&self) -> Result<Census, SubdivisionError> {
        let rep = self.topology_report();
        if !(rep.twin_involution && rep.cycles) {
            return Err(SubdivisionError::InconsistentTopology(rep.failures.join("; ")));
        }
        let mut c = Census {
            f: self.face_ids().count(),
            e: self.edges.len(),
            v: self.vertices.len(),
            u: self.infinite.len(),
            ..Census::default()
        };
        for v in 0..self.vertices.len() {
            match self.classify_vertex(v).map(|x| x.class) {
                Some(VertexAge::New) => c.v_new += 1,
                Some(VertexAge::Old) => c.v_old += 1,
                None => c.v_other += 1,
            }
        }
        Ok(c)
    }

    fn topology_report(&self) -> ValidationReport {
        let mut r = ValidationReport { twin_involution: true, cycles: true, labels: true, on_bisector: true, failures: Vec::new() };
        let n = self.half_edges.len();
        for (i, h) in self.half_edges.iter().enumerate() {
            if h.twin >= n || self.half_edges[h.twin].twin != i || h.twin == i {
                r.twin_involution = false;
                r.failures.push(format!("twin of half-edge {i} is not an involution"));
            }
            if h.next >= n || h.prev >= n || self.half_edges[h.next].prev != i || self.half_edges[h.prev].next != i {
                r.cycles = false;
                r.failures.push(format!("next/prev broken at half-edge {i}"));
            } else if h.next < n && self.half_edges[h.next].face != h.face {
                r.cycles = false;
                r.failures.push(format!("cycle through half-edge {i} changes face"));
            }
        }
        if r.twin_involution && r.cycles {
            for (i, h) in self.half_edges.iter().enumerate() {
                let nxt = &self.half_edges[h.next];
                let end = self.half_edges[h.twin].origin;
                if nxt.origin != end {
                    r.cycles = false;
                    r.failures.push(format!("half-edge {i} does not end where its successor starts"));
                }
            }
        }
        r
    }

    /// Checks twin involution, next/prev cycles, label adjacency and that
    /// edges are equidistant from the sites they separate.
    pub fn validate(&self, sites: &SiteSet) -> ValidationReport {
        let mut r = self.topology_report();
        for issue in &self.issues {
            r.labels = false;
            r.failures.push(issue.clone());
        }
        for (ei, e) in self.edges.iter().enumerate() {
            let (Some(l), Some(rt)) = (&e.left, &e.right) else { continue };
            if l == rt {
                r.labels = false;
                r.failures.push(format!("edge {ei} separates equal labels {l}"));
                continue;
            }
            if l.kind == LabelKind::Type1 && rt.kind == LabelKind::Type1 {
                let diff = l.symmetric_difference(rt);
                let ok = match e.segs[0].support {
                    EdgeSupport::Bisector { a, b } => {
                        let mut want = vec![a, b];
                        want.sort_unstable();
                        diff == want
                    }
                    EdgeSupport::Wedge { .. } => diff.len() == 2,
                };
                if !ok {
                    r.labels = false;
                    r.failures.push(format!("edge {ei} between {l} and {rt} has support {:?}", e.segs[0].support));
                }
            }
        }
        let tol = 1e-6 * self.scale;
        for (ei, e) in self.edges.iter().enumerate() {
            for seg in &e.segs {
                for x in seg.samples(10, self.scale) {
                    let err = match seg.support {
                        EdgeSupport::Bisector { a, b } => (distance(x, sites.site(a), self.metric) - distance(x, sites.site(b), self.metric)).abs(),
                        EdgeSupport::Wedge { site, apex } => {
                            let s = sites.site(site);
                            let u = (s.b - s.a).unit();
                            (distance(x, s, self.metric) - x.dist(apex)).abs().max((x - apex).dot(u).abs())
                        }
                    };
                    if err > tol * (1.0 + x.norm() / self.scale) {
                        r.on_bisector = false;
                        r.failures.push(format!("edge {ei} off its bisector by {err:e} at {x}"));
                        break;
                    }
                }
            }
        }
        r
    }

    /// Explicit graph of this subdivision.
    pub fn to_graph(&self) -> GraphSpec {
        let vertices = self.vertices.iter().map(|v| (v.pos, v.kind)).collect();
        let node = |n: Node| match n {
            Node::Vertex(v) => Some(v),
            Node::Infinity(_) => None,
        };
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeSpec {
                segs: e.segs.clone(),
                start: node(self.half_edges[e.half_edge].origin),
                end: node(self.half_edges[self.half_edges[e.half_edge].twin].origin),
                left: e.left.clone(),
                right: e.right.clone(),
            })
            .collect();
        GraphSpec { vertices, edges }
    }

    /// Removes the edge of `h`, joining the two equally labeled faces across it.
    pub fn merge_adjacent(&self, h: HalfEdgeId) -> Result<PlanarSubdivision, SubdivisionError> {
        let e = self.half_edges.get(h).and_then(|x| x.edge).ok_or(SubdivisionError::NotAnEdge(h))?;
        let f1 = self.half_edges[h].face;
        let f2 = self.half_edges[self.half_edges[h].twin].face;
        if self.faces[f1].label != self.faces[f2].label {
            return Err(SubdivisionError::LabelMismatch(h));
        }
        let mut g = self.to_graph();
        g.edges.remove(e);
        // Drop vertices left without edges.
        let mut used = vec![false; g.vertices.len()];
        for es in &g.edges {
            for v in [es.start, es.end].into_iter().flatten() {
                used[v] = true;
            }
        }
        let mut remap = vec![usize::MAX; g.vertices.len()];
        let mut verts = Vec::new();
        for (i, v) in g.vertices.iter().enumerate() {
            if used[i] {
                remap[i] = verts.len();
                verts.push(*v);
            }
        }
        for es in &mut g.edges {
            es.start = es.start.map(|v| remap[v]);
            es.end = es.end.map(|v| remap[v]);
        }
        g.vertices = verts;
        Ok(build(self.k, self.metric, self.scale, &g, self.faces[f1].label.clone()))
    }

    /// Euclidean distance from `x` to the nearest edge, approximated through
    /// the curve parametrization (exact for lines).
    pub fn distance_to_edges(&self, x: Point2) -> f64 {
        self.edges.iter().flat_map(|e| e.segs.iter()).map(|s| piece_distance(&s.piece, x)).fold(f64::INFINITY, f64::min)
    }

    /// The part of this subdivision inside face `face` of `other`.
    pub fn clip_to_face(&self, other: &PlanarSubdivision, face: FaceId) -> Result<Fragment, SubdivisionError> {
        let boundary: Vec<CurvePiece> = other
            .face_half_edges(face)
            .into_iter()
            .flat_map(|h| other.edges[other.half_edges[h].edge.unwrap()].segs.iter().map(|s| s.piece))
            .collect();
        let eps = 1e-9 * self.scale;
        let tol = 1e-6 * self.scale;
        let snap = 1e-7 * self.scale;
        let on_boundary = |x: Point2| boundary.iter().any(|p| piece_distance(p, x) <= tol);
        let interior: Vec<VertexId> = (0..self.vertices.len())
            .filter(|&v| {
                let p = self.vertices[v].pos;
                !on_boundary(p) && other.locate(p) == Some(face)
            })
            .collect();
        let mut out = Fragment { face, edges: Vec::new(), interior_vertices: interior.clone(), boundary_points: Vec::new() };
        for (ei, e) in self.edges.iter().enumerate() {
            // Runs of the edge inside the face, with their end nodes.
            let mut run: Vec<CurvePiece> = Vec::new();
            let start_node = self.half_edges[e.half_edge].origin;
            let mut run_start: FragmentEnd = match start_node {
                Node::Vertex(v) if interior.contains(&v) => FragmentEnd::Vertex(v),
                Node::Vertex(_) => FragmentEnd::Boundary(self.vertices[match start_node { Node::Vertex(v) => v, _ => 0 }].pos),
                Node::Infinity(_) => FragmentEnd::Infinity,
            };
            for seg in &e.segs {
                let mut cuts: Vec<f64> = Vec::new();
                for b in &boundary {
                    let xs = piece_intersections(&seg.piece, b, eps).map_err(|err| match err {
                        crate::bisector::BisectorError::DegenerateContact(p) => SubdivisionError::Degenerate(p),
                        _ => SubdivisionError::Degenerate(seg.midpoint(self.scale)),
                    })?;
                    cuts.extend(xs.into_iter().map(|x| seg.piece.curve.param_of(x)));
                }
                cuts.retain(|&t| t > seg.piece.lo() && t < seg.piece.hi());
                cuts.sort_by(f64::total_cmp);
                // Crossings at a shared vertex come out as clusters of nearby
                // cuts; keep one per location and none at the piece ends.
                let mut kept: Vec<Point2> = [seg.piece.start(), seg.piece.end()].into_iter().flatten().collect();
                cuts.retain(|&t| {
                    let x = seg.piece.curve.point(t);
                    if kept.iter().any(|k| k.dist(x) <= snap) {
                        return false;
                    }
                    kept.push(x);
                    true
                });
                if !seg.forward {
                    cuts.reverse();
                }
                let (ta, tb) = seg.ends();
                let mut bounds: Vec<Option<f64>> = vec![ta];
                bounds.extend(cuts.iter().map(|&t| Some(t)));
                bounds.push(tb);
                for w in bounds.windows(2) {
                    let (a, b) = if seg.forward { (w[0], w[1]) } else { (w[1], w[0]) };
                    let sub = seg.piece.sub(a, b);
                    let mid = sub.curve.point(sub.mid_param(self.scale));
                    let inside = other.locate(mid) == Some(face);
                    let cut_here = w[1].is_some() && w[1] != tb;
                    if inside {
                        run.push(sub);
                    } else if !run.is_empty() {
                        let p = sub.curve.point(if seg.forward { sub.lo() } else { sub.hi() });
                        out.edges.push(FragmentEdge { edge: ei, pieces: std::mem::take(&mut run), ends: [run_start, FragmentEnd::Boundary(p)] });
                    }
                    if cut_here {
                        let p = seg.piece.curve.point(w[1].unwrap());
                        out.boundary_points.push(p);
                        if !run.is_empty() {
                            out.edges.push(FragmentEdge { edge: ei, pieces: std::mem::take(&mut run), ends: [run_start, FragmentEnd::Boundary(p)] });
                        }
                        run_start = FragmentEnd::Boundary(p);
                    }
                }
            }
            if !run.is_empty() {
                let end_node = self.half_edges[self.half_edges[e.half_edge].twin].origin;
                let end = match end_node {
                    Node::Vertex(v) if interior.contains(&v) => FragmentEnd::Vertex(v),
                    Node::Vertex(v) => FragmentEnd::Boundary(self.vertices[v].pos),
                    Node::Infinity(_) => FragmentEnd::Infinity,
                };
                out.edges.push(FragmentEdge { edge: ei, pieces: run, ends: [run_start, end] });
            }
        }
        Ok(out)
    }
}

/// Approximate Euclidean distance from `x` to a piece.
pub fn piece_distance(p: &CurvePiece, x: Point2) -> f64 {
    let t = p.curve.param_of(x).clamp(p.lo(), p.hi());
    let mut best = p.curve.point(t).dist(x);
    if let Curve::Parabola { .. } = p.curve {
        // Refine by golden-section search around the projection.
        let span = (best + 1.0) * 4.0;
        let (mut lo, mut hi) = ((t - span).max(p.lo()), (t + span).min(p.hi()));
        for _ in 0..80 {
            let m1 = lo + (hi - lo) * 0.382;
            let m2 = lo + (hi - lo) * 0.618;
            if p.curve.point(m1).dist(x) < p.curve.point(m2).dist(x) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best = best.min(p.curve.point(0.5 * (lo + hi)).dist(x));
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "end", rename_all = "kebab-case")]
pub enum FragmentEnd {
    Vertex(VertexId),
    Boundary(Point2),
    Infinity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FragmentEdge {
    pub edge: EdgeId,
    pub pieces: Vec<CurvePiece>,
    pub ends: [FragmentEnd; 2],
}

/// The portion of a subdivision strictly inside one face of another.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub face: FaceId,
    pub edges: Vec<FragmentEdge>,
    pub interior_vertices: Vec<VertexId>,
    pub boundary_points: Vec<Point2>,
}

impl Fragment {
    /// Whether the edges form a tree whose leaves are the boundary or
    /// infinite ends.
    pub fn is_tree(&self) -> bool {
        if self.edges.is_empty() {
            return false;
        }
        let mut ids: HashMap<VertexId, usize> = HashMap::new();
        for (i, &v) in self.interior_vertices.iter().enumerate() {
            ids.insert(v, i);
        }
        let mut next = self.interior_vertices.len();
        let mut pairs = Vec::new();
        for e in &self.edges {
            let mut node = |end: FragmentEnd| match end {
                FragmentEnd::Vertex(v) => ids[&v],
                _ => {
                    next += 1;
                    next - 1
                }
            };
            let a = node(e.ends[0]);
            let b = node(e.ends[1]);
            pairs.push((a, b));
        }
        let mut uf = UnionFind::new(next);
        for (a, b) in pairs {
            if !uf.union(a, b) {
                return false;
            }
        }
        let root = uf.find(0);
        (0..next).all(|i| uf.find(i) == root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisector::bisector_pieces;
    use crate::kernel::{SegmentSite, SharingMode};

    fn two_sites() -> SiteSet {
        SiteSet::new(SharingMode::Disjoint, vec![(Point2::new(0.0, 1.0), Point2::new(2.0, 1.2)), (Point2::new(0.3, -1.0), Point2::new(2.0, -1.5))]).unwrap()
    }

    fn single_bisector(set: &SiteSet) -> PlanarSubdivision {
        let (a, b) = (set.site(0), set.site(1));
        let arcs = bisector_pieces(a, b, Metric::Euclidean, set.eps())
            .unwrap()
            .into_iter()
            .map(|p| ArcSpec { piece: p, left: OrderKLabel::type1(vec![0]), right: OrderKLabel::type1(vec![1]), support: EdgeSupport::Bisector { a: 0, b: 1 } })
            .collect();
        assemble(1, Metric::Euclidean, set.diameter(), arcs, &[], None)
    }

    #[test]
    fn single_bisector_census() {
        let set = two_sites();
        let d = single_bisector(&set);
        let c = d.census().unwrap();
        assert_eq!((c.f, c.e, c.v, c.u), (2, 1, 0, 2));
        assert!(d.validate(&set).ok(), "{:?}", d.validate(&set).failures);
        assert_eq!(d.label_at(Point2::new(1.0, 5.0)).unwrap().sites, vec![0]);
        assert_eq!(d.label_at(Point2::new(1.0, -5.0)).unwrap().sites, vec![1]);
    }

    #[test]
    fn broken_twin_is_reported() {
        let set = two_sites();
        let mut d = single_bisector(&set);
        d.half_edges[0].twin = 0;
        let r = d.validate(&set);
        assert!(!r.twin_involution);
        assert!(d.census().is_err());
    }

    #[test]
    fn merge_same_labels() {
        let set = two_sites();
        let (a, b) = (set.site(0), set.site(1));
        let arcs = bisector_pieces(a, b, Metric::Euclidean, set.eps())
            .unwrap()
            .into_iter()
            .map(|p| ArcSpec { piece: p, left: OrderKLabel::type1(vec![0, 1]), right: OrderKLabel::type1(vec![0, 1]), support: EdgeSupport::Bisector { a: 0, b: 1 } })
            .collect();
        let d = assemble(2, Metric::Euclidean, set.diameter(), arcs, &[], None);
        let m = d.merge_adjacent(d.edges[0].half_edge).unwrap();
        let (c0, c1) = (d.census().unwrap(), m.census().unwrap());
        assert_eq!(c1.f + 1, c0.f);
        assert_eq!(c1.e + 1, c0.e);
        assert_eq!(m.faces[0].label.as_ref().unwrap().sites, vec![0, 1]);
    }

    #[test]
    fn merge_rejects_different_labels() {
        let d = single_bisector(&two_sites());
        assert!(matches!(d.merge_adjacent(d.edges[0].half_edge), Err(SubdivisionError::LabelMismatch(_))));
    }

    #[test]
    fn three_points_have_one_vertex() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(4.0, 0.0), Point2::new(1.0, 3.0)];
        let sites: Vec<SegmentSite> = pts.iter().enumerate().map(|(i, &p)| SegmentSite::new(i, p, p)).collect();
        let center = Point2::new(2.0, 1.0);
        let mut arcs = Vec::new();
        for (i, j, o) in [(0, 1, 2), (1, 2, 0), (0, 2, 1)] {
            for p in bisector_pieces(&sites[i], &sites[j], Metric::Euclidean, 1e-9).unwrap() {
                // Keep the ray away from the third point.
                let t = p.curve.param_of(center);
                for (a, b) in [(None, Some(t)), (Some(t), None)] {
                    let sub = p.sub(a, b);
                    let m = sub.curve.point(sub.mid_param(1.0));
                    if m.dist(pts[i]) < m.dist(pts[o]) {
                        arcs.push(ArcSpec { piece: sub, left: OrderKLabel::type1(vec![i]), right: OrderKLabel::type1(vec![j]), support: EdgeSupport::Bisector { a: i, b: j } });
                    }
                }
            }
        }
        let d = assemble(1, Metric::Euclidean, 5.0, arcs, &[], None);
        let c = d.census().unwrap();
        assert_eq!((c.f, c.e, c.v, c.u, c.v_new), (3, 3, 1, 3, 1));
        assert_eq!(d.degree(0), 3);
        assert_eq!(d.label_at(Point2::new(-3.0, -1.0)).unwrap().sites, vec![0]);
        assert_eq!(d.label_at(Point2::new(8.0, -1.0)).unwrap().sites, vec![1]);
        assert_eq!(d.label_at(Point2::new(1.0, 9.0)).unwrap().sites, vec![2]);
        for f in d.face_ids() {
            let p = d.face_sample_point(f).unwrap();
            assert_eq!(d.locate(p), Some(f));
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let d = single_bisector(&two_sites());
        let s = serde_json::to_string(&d).unwrap();
        let back: PlanarSubdivision = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }
}
