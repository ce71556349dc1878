//! Order-k diagrams. Every edge of V_k lies on a bisector b(a,b) at points
//! where exactly k-1 sites are strictly closer than a and b, so each
//! candidate pair's bisector is cut into spans by the sites that come
//! closer, and level k keeps the spans whose two sides get different labels.
//! The iterative step V_k -> V_{k+1} restricts the candidate pairs to the
//! sites bounding each face of V_k.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bisector::{clip_to_cell, distance_cells, mid_of, piece_from_linf, raw_pieces_with_forms, Cell, Curve, CurvePiece, Form};
use crate::kernel::{
    classify_pair, distance, l1_to_linf, linf_to_l1, ElementaryKind, ElementarySite, KernelError, Metric, PairClass, Point2, SegmentSite, SharingMode,
    SiteId, SiteSet,
};
use crate::poly::{real_roots, Poly};
use crate::subdivision::{assemble, ArcSpec, EdgeSupport, FaceId, OrderKLabel, PlanarSubdivision, VertexClass, VertexId, VertexKind};
use crate::verify::{canonical_endpoint, k_nearest};

#[derive(Debug, Error, Clone)]
pub enum OrderKError {
    #[error("metric {0} supports point queries only")]
    UnsupportedMetric(Metric),
    #[error("PSLG diagrams are built for the Euclidean metric only")]
    PslgMetric,
    #[error("order {k} is outside 1..={max} for {n} sites")]
    InfeasibleK { k: usize, n: usize, max: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("topology failure at order {level}: {message}")]
    Topology { level: usize, message: String, partial: Box<DiagramTower> },
    #[error("{0} lies on the diagram boundary")]
    Boundary(Point2),
}

/// A maximal piece of a bisector (or wedge line) along which the set of
/// strictly closer sites and the tie groups stay fixed.
#[derive(Clone, Debug)]
struct Span {
    piece: CurvePiece,
    closer: Vec<SiteId>,
    /// Sites at the same distance sharing the nearest point with the left
    /// (resp. right) site.
    ties_a: Vec<SiteId>,
    ties_b: Vec<SiteId>,
}

/// Line through a shared endpoint perpendicular to one incident segment; on
/// its left the segment's nearest point is the endpoint.
#[derive(Clone, Debug)]
struct Wedge {
    site: SiteId,
    apex: Point2,
    spans: Vec<Span>,
}

pub struct Engine {
    sites: SiteSet,
    metric: Metric,
    work_metric: Metric,
    /// Sites in the working frame (rotated for L1).
    work: Vec<SegmentSite>,
    cells: Vec<Vec<Cell>>,
    eps: f64,
    scale: f64,
    cap: usize,
    pairs: HashMap<(SiteId, SiteId), Arc<Vec<Span>>>,
    wedges: Option<Vec<Wedge>>,
    specials: Vec<(Point2, VertexKind)>,
}

fn forms_equal(f: &Form, g: &Form, eps: f64) -> bool {
    match (f, g) {
        (Form::Point { p }, Form::Point { p: q }) => p.dist(*q) <= 10.0 * eps,
        (Form::Linear { n, c }, Form::Linear { n: m, c: d }) => (*n - *m).norm() <= 1e-12 * (1.0 + n.norm()) && (c - d).abs() <= 10.0 * eps,
        _ => false,
    }
}

fn form_poly(curve: &Curve, f: &Form) -> (Poly, bool) {
    let (px, py) = curve.xy_polys();
    match *f {
        Form::Linear { n, c } => (px.scale(n.x).add(&py.scale(n.y)).add(&Poly::constant(c)), true),
        Form::Point { p } => {
            let dx = px.add(&Poly::constant(-p.x));
            let dy = py.add(&Poly::constant(-p.y));
            (dx.mul(&dx).add(&dy.mul(&dy)), false)
        }
    }
}

/// Polynomial with the sign of `f - g` along the curve, valid where both
/// forms are non-negative.
fn diff_poly(curve: &Curve, f: &Form, g: &Form) -> Poly {
    let (pf, lf) = form_poly(curve, f);
    let (pg, lg) = form_poly(curve, g);
    match (lf, lg) {
        (true, true) | (false, false) => pf.sub(&pg),
        (false, true) => pf.sub(&pg.mul(&pg)),
        (true, false) => pf.mul(&pf).sub(&pg),
    }
}

type Interval = (f64, f64);

fn merge_intervals(mut v: Vec<Interval>, gap: f64) -> Vec<Interval> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Interval> = Vec::new();
    for iv in v {
        match out.last_mut() {
            Some(last) if iv.0 <= last.1 + gap => last.1 = last.1.max(iv.1),
            _ => out.push(iv),
        }
    }
    out
}

/// Label from strictly closer sites followed by tie groups in distance
/// order; `None` when the first k sites are not determined here.
fn label_from(closer: &[SiteId], groups: &[(&[SiteId], Option<ElementarySite>)], k: usize) -> Option<OrderKLabel> {
    if closer.len() >= k {
        return None;
    }
    let mut acc = closer.to_vec();
    for (g, rep) in groups {
        if g.is_empty() {
            continue;
        }
        acc.extend_from_slice(g);
        if acc.len() == k {
            return Some(OrderKLabel::type1(acc));
        }
        if acc.len() > k {
            return rep.map(|r| OrderKLabel::type2(acc, r));
        }
    }
    None
}

impl Engine {
    /// Prepares an engine able to produce levels up to `cap`.
    pub fn new(sites: &SiteSet, metric: Metric, cap: usize) -> Result<Engine, OrderKError> {
        let metric = metric.validate()?;
        if !metric.supports_diagrams() {
            return Err(OrderKError::UnsupportedMetric(metric));
        }
        if sites.mode == SharingMode::Pslg && metric != Metric::Euclidean {
            return Err(OrderKError::PslgMetric);
        }
        sites.validate()?;
        let (work_metric, work): (Metric, Vec<SegmentSite>) = match metric {
            Metric::L1 => (Metric::Linf, sites.sites.iter().map(|s| SegmentSite::new(s.id, l1_to_linf(s.a), l1_to_linf(s.b))).collect()),
            m => (m, sites.sites.clone()),
        };
        let cells = work.iter().map(|s| distance_cells(s, work_metric)).collect();
        let scale = sites.diameter().max(1e-300);
        let eps = if metric == Metric::L1 { 2.0 * sites.eps() } else { sites.eps() };
        let mut specials = Vec::new();
        let to_work = |p: Point2| if metric == Metric::L1 { l1_to_linf(p) } else { p };
        for (p, _) in sites.shared_endpoints() {
            specials.push((to_work(p), VertexKind::Pslg));
        }
        if sites.mode == SharingMode::Crossing {
            for i in 0..sites.len() {
                for j in i + 1..sites.len() {
                    if let PairClass::ProperCrossing(q) = classify_pair(sites.site(i), sites.site(j)) {
                        specials.push((to_work(q), VertexKind::Crossing));
                    }
                }
            }
        }
        Ok(Engine {
            sites: sites.clone(),
            metric,
            work_metric,
            work,
            cells,
            eps,
            scale,
            cap: cap.max(1),
            pairs: HashMap::new(),
            wedges: None,
            specials,
        })
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn all_pairs(&self) -> Vec<(SiteId, SiteId)> {
        let n = self.sites.len();
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
    }

    /// Intervals along the piece where site `c` is strictly closer than the
    /// reference distance, or tied with the left or right form.
    fn relation(&self, piece: &CurvePiece, fa: &Form, fb: Option<&Form>, c: SiteId) -> [Vec<Interval>; 3] {
        let curve = piece.curve;
        let mut closer = Vec::new();
        let mut tie_a = Vec::new();
        let mut tie_b = Vec::new();
        let range = [(piece.lo(), piece.hi())];
        for cell in &self.cells[c] {
            for (lo, hi) in clip_to_cell(&curve, cell, &range) {
                if forms_equal(&cell.form, fa, self.eps) {
                    tie_a.push((lo, hi));
                    continue;
                }
                if fb.is_some_and(|g| forms_equal(&cell.form, g, self.eps)) {
                    tie_b.push((lo, hi));
                    continue;
                }
                let g = diff_poly(&curve, &cell.form, fa);
                let mut cuts = vec![lo];
                cuts.extend(real_roots(&g, lo, hi).into_iter().filter(|t| *t > lo && *t < hi));
                cuts.push(hi);
                for w in cuts.windows(2) {
                    let (u, v) = (w[0], w[1]);
                    if u >= v {
                        continue;
                    }
                    let t = mid_of(u.is_finite().then_some(u), v.is_finite().then_some(v), 1.0 + u.abs().min(v.abs()).min(1e12));
                    let x = curve.point(t);
                    if cell.form.eval(x) - fa.eval(x) < 0.0 {
                        closer.push((u, v));
                    }
                }
            }
        }
        [closer, tie_a, tie_b]
    }

    /// Splits a piece into spans, keeping those with fewer than `cap` closer sites.
    fn piece_spans(&self, piece: &CurvePiece, fa: &Form, fb: Option<&Form>, exclude: &[SiteId]) -> Vec<Span> {
        let (lo, hi) = (piece.lo(), piece.hi());
        let speed = piece.curve.tangent(piece.mid_param(1.0)).norm().max(1e-300);
        let gap = 1e-10 * self.scale / speed;
        // Sites that cannot get closer anywhere on a bounded piece are skipped.
        let bound = if lo.is_finite() && hi.is_finite() {
            let m = piece.curve.point(0.5 * (lo + hi));
            let r = (0..=8).map(|i| piece.curve.point(lo + (hi - lo) * i as f64 / 8.0).dist(m)).fold(0.0, f64::max) * 1.1;
            Some((m, fa.eval(m) + 2.0 * r + self.eps))
        } else {
            None
        };
        let mut events: Vec<(f64, u8, SiteId)> = Vec::new();
        for c in 0..self.work.len() {
            if exclude.contains(&c) {
                continue;
            }
            if let Some((m, limit)) = bound {
                if distance(m, &self.work[c], self.work_metric) > limit {
                    continue;
                }
            }
            let rel = self.relation(piece, fa, fb, c);
            for (kind, ivs) in rel.into_iter().enumerate() {
                for (u, v) in merge_intervals(ivs, gap) {
                    events.push((u, 2 * kind as u8, c));
                    events.push((v, 2 * kind as u8 + 1, c));
                }
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut sets: [BTreeSet<SiteId>; 3] = Default::default();
        let mut out: Vec<Span> = Vec::new();
        let mut prev = lo;
        let mut i = 0;
        let emit = |a: f64, b: f64, sets: &[BTreeSet<SiteId>; 3], out: &mut Vec<Span>| {
            if b <= a || sets[0].len() >= self.cap {
                return;
            }
            let closer: Vec<SiteId> = sets[0].iter().copied().collect();
            let ties_a: Vec<SiteId> = sets[1].iter().copied().collect();
            let ties_b: Vec<SiteId> = sets[2].iter().copied().collect();
            if let Some(last) = out.last_mut() {
                if last.piece.hi() == a && last.closer == closer && last.ties_a == ties_a && last.ties_b == ties_b {
                    last.piece.t1 = b.is_finite().then_some(b);
                    return;
                }
            }
            let piece = piece.sub(a.is_finite().then_some(a), b.is_finite().then_some(b));
            out.push(Span { piece, closer, ties_a, ties_b });
        };
        while i < events.len() {
            let t = events[i].0;
            if t > prev {
                emit(prev, t.min(hi), &sets, &mut out);
                prev = t.min(hi);
            }
            while i < events.len() && events[i].0 == t {
                let (_, code, c) = events[i];
                let set = &mut sets[(code / 2) as usize];
                if code % 2 == 0 {
                    set.insert(c);
                } else {
                    set.remove(&c);
                }
                i += 1;
            }
        }
        emit(prev, hi, &sets, &mut out);
        out
    }

    fn pair_spans(&self, a: SiteId, b: SiteId) -> Vec<Span> {
        let mut out = Vec::new();
        for (piece, fb) in raw_pieces_with_forms(&self.work[a], &self.work[b], self.work_metric, self.eps) {
            out.extend(self.piece_spans(&piece, &piece.form.clone(), Some(&fb), &[a, b]));
        }
        out
    }

    fn ensure_pairs(&mut self, pairs: &[(SiteId, SiteId)]) {
        let missing: Vec<(SiteId, SiteId)> = pairs.iter().copied().filter(|p| !self.pairs.contains_key(p)).collect();
        let computed: Vec<((SiteId, SiteId), Vec<Span>)> = missing.par_iter().map(|&(a, b)| ((a, b), self.pair_spans(a, b))).collect();
        for (key, spans) in computed {
            self.pairs.insert(key, Arc::new(spans));
        }
        if self.sites.mode == SharingMode::Pslg && self.wedges.is_none() {
            let mut wedges = Vec::new();
            for (p, ids) in self.sites.shared_endpoints() {
                for &s in &ids {
                    let site = self.site_ref(s);
                    let other = if site.a.dist(p) <= site.b.dist(p) { site.b } else { site.a };
                    let u = (other - p).unit();
                    let piece = CurvePiece { curve: Curve::Line { p, d: u.perp() }, t0: None, t1: None, left: s, right: s, form: Form::Point { p } };
                    let mut spans = Vec::new();
                    for half in [piece.sub(None, Some(0.0)), piece.sub(Some(0.0), None)] {
                        spans.extend(self.piece_spans(&half, &Form::Point { p }, None, &[s]));
                    }
                    wedges.push(Wedge { site: s, apex: p, spans });
                }
            }
            self.wedges = Some(wedges);
        }
    }

    fn site_ref(&self, s: SiteId) -> &SegmentSite {
        &self.work[s]
    }

    /// Elementary site standing for the shared endpoint `p` of group `g`.
    fn representative(&self, g: &[SiteId], p: Point2) -> Option<ElementarySite> {
        g.first()?;
        canonical_endpoint(&self.sites, p, 10.0 * self.eps)
    }

    /// Moves a level assembled in the working frame back to the input frame.
    /// The L1 map is linear and orientation preserving, so the topology built
    /// in the L-infinity frame carries over unchanged.
    fn out_of_work_frame(&self, mut d: PlanarSubdivision) -> PlanarSubdivision {
        if self.metric != Metric::L1 {
            return d;
        }
        d.metric = Metric::L1;
        for v in &mut d.vertices {
            v.pos = linf_to_l1(v.pos);
        }
        for e in &mut d.edges {
            for seg in &mut e.segs {
                seg.piece = piece_from_linf(&seg.piece);
            }
        }
        for end in &mut d.infinite {
            end.dir = linf_to_l1(end.dir).unit();
            end.anchor = linf_to_l1(end.anchor);
        }
        d
    }

    /// Labeled arcs of level `k` from the given candidate pairs.
    fn level_arcs(&self, pairs: &[(SiteId, SiteId)], k: usize) -> Vec<ArcSpec> {
        let mut arcs = Vec::new();
        for &(a, b) in pairs {
            let Some(spans) = self.pairs.get(&(a, b)) else { continue };
            for sp in spans.iter() {
                if sp.closer.len() >= k {
                    continue;
                }
                let mut ga = vec![a];
                ga.extend_from_slice(&sp.ties_a);
                let mut gb = vec![b];
                gb.extend_from_slice(&sp.ties_b);
                if ga.iter().any(|&x| x < a) || gb.iter().any(|&x| x < b) {
                    // The same curve is reported by the lowest pair of the tie groups.
                    continue;
                }
                let pa = match sp.piece.form {
                    Form::Point { p } if ga.len() > 1 => self.representative(&ga, p),
                    _ => None,
                };
                let pb = if gb.len() > 1 {
                    let x = sp.piece.curve.point(sp.piece.mid_param(self.scale));
                    let q = crate::kernel::nearest_point(x, &self.work[b], self.work_metric);
                    self.representative(&gb, q)
                } else {
                    None
                };
                let left = label_from(&sp.closer, &[(&ga, pa), (&gb, pb)], k);
                let right = label_from(&sp.closer, &[(&gb, pb), (&ga, pa)], k);
                if let (Some(l), Some(r)) = (left, right) {
                    if l != r {
                        arcs.push(ArcSpec { piece: sp.piece, left: l, right: r, support: EdgeSupport::Bisector { a, b } });
                    }
                }
            }
        }
        if let Some(wedges) = &self.wedges {
            for w in wedges {
                for sp in &w.spans {
                    if sp.closer.len() >= k || sp.ties_a.is_empty() {
                        continue;
                    }
                    let mut g = vec![w.site];
                    g.extend_from_slice(&sp.ties_a);
                    let rep_all = self.representative(&g, w.apex);
                    let rep_rest = self.representative(&sp.ties_a, w.apex).filter(|_| sp.ties_a.len() > 1);
                    let left = label_from(&sp.closer, &[(&g, rep_all)], k);
                    let right = label_from(&sp.closer, &[(&[w.site], None), (&sp.ties_a, rep_rest)], k);
                    if let (Some(l), Some(r)) = (left, right) {
                        if l != r {
                            arcs.push(ArcSpec { piece: sp.piece, left: l, right: r, support: EdgeSupport::Wedge { site: w.site, apex: w.apex } });
                        }
                    }
                }
            }
        }
        arcs
    }

    fn default_label(&self, k: usize) -> Option<OrderKLabel> {
        let x = self.sites.centroid() + Point2::new(0.37, 0.91) * (3.0 * self.scale);
        pslg_label(x, &self.sites, k, self.metric).ok()
    }

    /// The labeled arcs level `k` is assembled from.
    pub fn arcs(&mut self, k: usize, pairs: &[(SiteId, SiteId)]) -> Vec<ArcSpec> {
        self.ensure_pairs(pairs);
        let mut arcs = self.level_arcs(pairs, k);
        if self.metric == Metric::L1 {
            for a in &mut arcs {
                a.piece = piece_from_linf(&a.piece);
            }
        }
        arcs
    }

    /// Level `k` from the spans of the given candidate pairs.
    pub fn level(&mut self, k: usize, pairs: &[(SiteId, SiteId)]) -> Result<PlanarSubdivision, OrderKError> {
        let n = self.sites.len();
        if k == 0 || k > self.cap || (n > 1 && k >= n) {
            return Err(OrderKError::InfeasibleK { k, n, max: self.cap.min(n.saturating_sub(1)) });
        }
        self.ensure_pairs(pairs);
        let arcs = self.level_arcs(pairs, k);
        let d = assemble(k, self.work_metric, self.scale, arcs, &self.specials, self.default_label(k));
        Ok(self.out_of_work_frame(d))
    }

    /// Level `k` using every pair of sites.
    pub fn level_direct(&mut self, k: usize) -> Result<PlanarSubdivision, OrderKError> {
        let pairs = self.all_pairs();
        self.level(k, &pairs)
    }

    /// Candidate pairs for the level after `d`: pairs of sites bounding each
    /// Type-1 face (the sites of V_1 within that face) together with the
    /// pairs of the edges of `d`, whose spans are dropped once both sides
    /// agree at the next order.
    pub fn candidate_pairs(&self, d: &PlanarSubdivision) -> Vec<(SiteId, SiteId)> {
        if self.sites.mode == SharingMode::Pslg {
            return self.all_pairs();
        }
        let mut set = BTreeSet::new();
        for f in d.face_ids() {
            let Some(label) = &d.faces[f].label else { continue };
            if label.kind != crate::subdivision::LabelKind::Type1 {
                continue;
            }
            let sf: Vec<SiteId> = d.boundary_sites(f).into_iter().collect();
            for i in 0..sf.len() {
                for j in i + 1..sf.len() {
                    set.insert((sf[i], sf[j]));
                }
            }
        }
        for e in &d.edges {
            for seg in &e.segs {
                if let EdgeSupport::Bisector { a, b } = seg.support {
                    set.insert((a.min(b), a.max(b)));
                }
            }
        }
        set.into_iter().collect()
    }

    /// The order-(i+1) diagram from the order-i diagram `d`.
    pub fn iterate(&mut self, d: &PlanarSubdivision) -> Result<PlanarSubdivision, OrderKError> {
        let pairs = self.candidate_pairs(d);
        self.level(d.k + 1, &pairs)
    }
}

/// Levels 1..=K of the order-k diagrams of a site set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramTower {
    pub sites: SiteSet,
    pub metric: Metric,
    pub levels: Vec<PlanarSubdivision>,
}

impl DiagramTower {
    /// The diagram of order `k` (1-based).
    pub fn level(&self, k: usize) -> Option<&PlanarSubdivision> {
        k.checked_sub(1).and_then(|i| self.levels.get(i))
    }

    pub fn max_k(&self) -> usize {
        self.levels.len()
    }
}

fn check_k(n: usize, k: usize) -> Result<(), OrderKError> {
    if k == 0 || k >= n.max(2) {
        return Err(OrderKError::InfeasibleK { k, n, max: n.saturating_sub(1) });
    }
    Ok(())
}

fn topology_ok(d: &PlanarSubdivision) -> Result<(), String> {
    d.census().map(|_| ()).map_err(|e| e.to_string())
}

/// Builds levels 1..=K bottom-up with the iterative step.
pub fn build_tower(sites: &SiteSet, k_max: usize, metric: Metric) -> Result<DiagramTower, OrderKError> {
    check_k(sites.len(), k_max)?;
    let mut engine = Engine::new(sites, metric, k_max)?;
    let mut tower = DiagramTower { sites: sites.clone(), metric: engine.metric(), levels: Vec::new() };
    let mut level = engine.level_direct(1)?;
    loop {
        if let Err(message) = topology_ok(&level) {
            return Err(OrderKError::Topology { level: level.k, message, partial: Box::new(tower) });
        }
        let next = (level.k < k_max).then(|| engine.iterate(&level));
        tower.levels.push(level);
        match next {
            Some(r) => level = r?,
            None => return Ok(tower),
        }
    }
}

/// Level `k` computed from all pairs, without the iterative restriction.
pub fn build_level_direct(sites: &SiteSet, k: usize, metric: Metric) -> Result<PlanarSubdivision, OrderKError> {
    check_k(sites.len(), k)?;
    Engine::new(sites, metric, k)?.level_direct(k)
}

/// Yields levels one at a time, keeping only the current one.
pub struct TowerStream {
    engine: Engine,
    current: Option<PlanarSubdivision>,
    k_max: usize,
    failed: bool,
}

impl TowerStream {
    pub fn new(sites: &SiteSet, k_max: usize, metric: Metric) -> Result<TowerStream, OrderKError> {
        check_k(sites.len(), k_max)?;
        Ok(TowerStream { engine: Engine::new(sites, metric, k_max)?, current: None, k_max, failed: false })
    }
}

impl Iterator for TowerStream {
    type Item = Result<PlanarSubdivision, OrderKError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let next = match &self.current {
            None => self.engine.level_direct(1),
            Some(d) if d.k < self.k_max => self.engine.iterate(d),
            Some(_) => return None,
        };
        match next {
            Ok(d) => {
                self.current = Some(d.clone());
                Some(Ok(d))
            }
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

pub fn classify_vertex(v: VertexId, level: &PlanarSubdivision) -> Option<VertexClass> {
    level.classify_vertex(v)
}

pub fn region_faces(level: &PlanarSubdivision, h: &OrderKLabel) -> Vec<FaceId> {
    level.faces_with_label(h)
}

/// Faces whose label contains `s`: the faces of V_k(s,S).
pub fn site_union_region(level: &PlanarSubdivision, s: SiteId) -> Vec<FaceId> {
    level.face_ids().filter(|&f| level.faces[f].label.as_ref().is_some_and(|l| l.contains(s))).collect()
}

/// Order-k label of the point `x` from its order-k disk.
pub fn pslg_label(x: Point2, sites: &SiteSet, k: usize, metric: Metric) -> Result<OrderKLabel, OrderKError> {
    let r = k_nearest(x, sites, k, metric);
    if r.sites.len() == k {
        return Ok(OrderKLabel::type1(r.sites));
    }
    match r.touching {
        Some(e) if r.proper && e.kind != ElementaryKind::Interior && r.touching_count >= 2 => Ok(OrderKLabel::type2(r.sites, e)),
        _ => Err(OrderKError::Boundary(x)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(mode: SharingMode, segs: &[[f64; 4]]) -> SiteSet {
        SiteSet::new(mode, segs.iter().map(|s| (Point2::new(s[0], s[1]), Point2::new(s[2], s[3]))).collect()).unwrap()
    }

    #[test]
    fn three_segments_give_three_faces() {
        let s = set(SharingMode::Disjoint, &[[0.0, 0.0, 1.0, 0.2], [3.0, 1.0, 3.5, 2.5], [0.5, 3.0, -1.0, 2.2]]);
        let t = build_tower(&s, 2, Metric::Euclidean).unwrap();
        let c1 = t.levels[0].census().unwrap();
        assert_eq!(c1.f, 3);
        assert_eq!(c1.e, 3 * (c1.f - 1) - c1.u);
        let c2 = t.levels[1].census().unwrap();
        assert_eq!(c2.f, 3 * (3 - 1) - c1.u);
    }

    #[test]
    fn circumcenter_is_new_then_old() {
        let s = set(SharingMode::Disjoint, &[[0.0, 0.0, 0.0, 0.0], [4.0, 0.0, 4.0, 0.0], [1.0, 3.0, 1.0, 3.0]]);
        let t = build_tower(&s, 2, Metric::Euclidean).unwrap();
        for (k, want) in [(1, crate::subdivision::VertexAge::New), (2, crate::subdivision::VertexAge::Old)] {
            let d = t.level(k).unwrap();
            assert_eq!(d.vertices.len(), 1);
            assert!(d.vertices[0].pos.dist(Point2::new(2.0, 1.0)) < 1e-6);
            assert_eq!(classify_vertex(0, d).unwrap().class, want);
        }
    }

    #[test]
    fn star_label_near_center_is_type2() {
        let s = set(SharingMode::Pslg, &[[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.3, 1.0], [0.0, 0.0, -1.0, 0.2]]);
        let l = pslg_label(Point2::new(-0.01, -0.1), &s, 1, Metric::Euclidean).unwrap();
        assert_eq!(l.kind, crate::subdivision::LabelKind::Type2);
        assert_eq!(l.sites, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_bad_orders_and_metrics() {
        let s = set(SharingMode::Disjoint, &[[0.0, 0.0, 1.0, 0.0], [0.0, 2.0, 1.0, 2.0]]);
        assert!(matches!(build_tower(&s, 2, Metric::Euclidean), Err(OrderKError::InfeasibleK { .. })));
        assert!(matches!(build_tower(&s, 1, Metric::Lp { p: 3.0 }), Err(OrderKError::UnsupportedMetric(_))));
        let t = build_tower(&s, 1, Metric::Euclidean).unwrap();
        assert_eq!(t.levels.len(), 1);
        assert_eq!(t.levels[0].edges.len(), 1);
    }
}
