//! Independent checks: a brute-force k-nearest oracle, a grid census,
//! supporting halfplane/quadrant enumeration, the face-count identities and
//! structural property tests.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{
    count_intersections, distance, l1_to_linf, nearest_point, ElementaryKind, ElementarySite, Metric, Point2, SegmentSite, SharingMode,
    SiteId, SiteSet,
};
use crate::instances::InstanceError;
use crate::nearest::farthest_voronoi;
use crate::orderk::{DiagramTower, OrderKError};
use crate::bisector::{piece_intersections, Curve, CurvePiece, Form};
use crate::subdivision::{assemble, ArcSpec, EdgeSeg, EdgeSupport, FaceId, LabelKind, OrderKLabel, PlanarSubdivision};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    OrderK(#[from] OrderKError),
    #[error("overlay failure: {0}")]
    Overlay(String),
}

/// Relative width of the band around label changes excluded from sampling.
pub const TUBE_REL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub point: Point2,
    /// Radius of the order-k disk.
    pub radius: f64,
    /// Sites meeting the closed order-k disk.
    pub sites: Vec<SiteId>,
    /// Whether the disk boundary touches exactly one elementary site, with
    /// shared endpoints counted once.
    pub proper: bool,
    pub touching: Option<ElementarySite>,
    /// Number of sites touching the boundary.
    pub touching_count: usize,
}

/// The elementary site naming endpoint `p`: the endpoint of the lowest-id
/// site that has an endpoint there.
pub fn canonical_endpoint(sites: &SiteSet, p: Point2, tol: f64) -> Option<ElementarySite> {
    sites.sites.iter().find_map(|s| {
        if s.a.dist(p) <= tol {
            Some(ElementarySite::new(s.id, ElementaryKind::EndpointA))
        } else if s.b.dist(p) <= tol {
            Some(ElementarySite::new(s.id, ElementaryKind::EndpointB))
        } else {
            None
        }
    })
}

fn sorted_distances(x: Point2, sites: &SiteSet, m: Metric) -> Vec<(f64, SiteId)> {
    let mut d: Vec<(f64, SiteId)> = sites.sites.iter().map(|s| (distance(x, s, m), s.id)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d
}

/// Order-k disk at `x` by sorting all site distances.
pub fn k_nearest(x: Point2, sites: &SiteSet, k: usize, m: Metric) -> OracleResult {
    let eps = sites.eps();
    let d = sorted_distances(x, sites, m);
    let k = k.clamp(1, d.len());
    let radius = d[k - 1].0;
    let mut members: Vec<SiteId> = d.iter().filter(|(v, _)| *v <= radius + eps).map(|&(_, s)| s).collect();
    members.sort_unstable();
    // Elementary locations touched by the boundary; endpoints merged by position.
    let mut locations: Vec<(Option<Point2>, ElementarySite)> = Vec::new();
    let mut touching_count = 0;
    for &(v, s) in &d {
        if (v - radius).abs() > eps {
            continue;
        }
        touching_count += 1;
        let site = sites.site(s);
        let q = nearest_point(x, site, m);
        let loc = if q.dist(site.a) <= 10.0 * eps {
            Some(site.a)
        } else if q.dist(site.b) <= 10.0 * eps {
            Some(site.b)
        } else {
            None
        };
        match loc {
            Some(p) => {
                if !locations.iter().any(|(l, _)| l.is_some_and(|l| l.dist(p) <= 10.0 * eps)) {
                    let e = canonical_endpoint(sites, p, 10.0 * eps).unwrap_or(ElementarySite::new(s, ElementaryKind::EndpointA));
                    locations.push((Some(p), e));
                }
            }
            None => locations.push((None, ElementarySite::new(s, ElementaryKind::Interior))),
        }
    }
    let proper = locations.len() == 1;
    OracleResult { point: x, radius, sites: members, proper, touching: proper.then(|| locations[0].1), touching_count }
}

/// Order-k label at `x`, or `None` when `x` is within `tube` of a label
/// change (another site distance close to the disk radius without touching).
pub fn oracle_label(x: Point2, sites: &SiteSet, k: usize, m: Metric, tube: f64) -> Option<OrderKLabel> {
    let eps = sites.eps();
    let r = k_nearest(x, sites, k, m);
    let near = sites.sites.iter().any(|s| {
        let gap = (distance(x, s, m) - r.radius).abs();
        gap > eps && gap < tube
    });
    if near {
        return None;
    }
    if r.sites.len() == k {
        return Some(OrderKLabel::type1(r.sites));
    }
    match r.touching {
        Some(e) if r.proper && e.kind != ElementaryKind::Interior && r.touching_count >= 2 => Some(OrderKLabel::type2(r.sites, e)),
        _ => None,
    }
}

/// Sampling window: the bounding box grown by the diameter on every side.
pub fn window(sites: &SiteSet) -> (Point2, Point2) {
    let (lo, hi) = sites.bbox();
    let d = sites.diameter().max(1e-9);
    (lo - Point2::new(d, d), hi + Point2::new(d, d))
}

fn random_point(rng: &mut ChaCha8Rng, w: (Point2, Point2)) -> Point2 {
    Point2::new(rng.gen_range(w.0.x..w.1.x), rng.gen_range(w.0.y..w.1.y))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub point: Point2,
    pub expected: Option<OrderKLabel>,
    pub found: Option<OrderKLabel>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub k: usize,
    pub checked: usize,
    pub skipped: usize,
    pub mismatches: Vec<Mismatch>,
}

impl AgreementReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares point location in `level` with the oracle at `samples` random
/// points of the sampling window, skipping points in the tube.
pub fn oracle_agreement(level: &PlanarSubdivision, sites: &SiteSet, samples: usize, seed: u64) -> AgreementReport {
    let w = window(sites);
    let tube = TUBE_REL * sites.diameter();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Point2> = (0..samples).map(|_| random_point(&mut rng, w)).collect();
    let results: Vec<Option<Mismatch>> = pts
        .par_iter()
        .map(|&x| {
            let expected = oracle_label(x, sites, level.k, level.metric, tube)?;
            let found = level.label_at(x).cloned();
            if found.as_ref() == Some(&expected) {
                Some(Mismatch::default())
            } else {
                Some(Mismatch { point: x, expected: Some(expected), found })
            }
        })
        .collect();
    let mut rep = AgreementReport { k: level.k, ..Default::default() };
    for r in results {
        match r {
            None => rep.skipped += 1,
            Some(m) if m.expected.is_none() => rep.checked += 1,
            Some(m) => {
                rep.checked += 1;
                rep.mismatches.push(m);
            }
        }
    }
    rep
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRegion {
    pub label: OrderKLabel,
    pub components: usize,
    pub unbounded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCensus {
    pub resolution: usize,
    pub regions: Vec<GridRegion>,
    /// Fraction of labeled cells with a differently labeled neighbor.
    pub boundary_fraction: f64,
    pub coarse_warning: bool,
}

impl GridCensus {
    pub fn components_of(&self, label: &OrderKLabel) -> usize {
        self.regions.iter().find(|r| &r.label == label).map_or(0, |r| r.components)
    }
}

/// Labels a `resolution`² grid over `win` (default: the sampling window)
/// with the oracle and counts connected components per label. Components
/// reaching the window border are reported as unbounded.
pub fn grid_census(sites: &SiteSet, k: usize, m: Metric, resolution: usize, win: Option<(Point2, Point2)>) -> GridCensus {
    let (lo, hi) = win.unwrap_or_else(|| window(sites));
    let res = resolution.max(2);
    let tube = TUBE_REL * sites.diameter();
    let cell = |i: usize, j: usize| Point2::new(lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / res as f64, lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / res as f64);
    let labels: Vec<Option<OrderKLabel>> = (0..res * res).into_par_iter().map(|c| oracle_label(cell(c % res, c / res), sites, k, m, tube)).collect();
    let mut comp = vec![usize::MAX; res * res];
    let mut regions: BTreeMap<OrderKLabel, (usize, usize)> = BTreeMap::new();
    let mut boundary_cells = 0;
    let mut labeled = 0;
    for start in 0..res * res {
        let Some(l) = &labels[start] else { continue };
        labeled += 1;
        let (i, j) = (start % res, start / res);
        let nbrs = [(i > 0).then(|| start - 1), (i + 1 < res).then(|| start + 1), (j > 0).then(|| start - res), (j + 1 < res).then(|| start + res)];
        if nbrs.iter().flatten().any(|&n| labels[n].as_ref().is_some_and(|o| o != l)) {
            boundary_cells += 1;
        }
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = start;
        let mut stack = vec![start];
        let mut border = false;
        while let Some(c) = stack.pop() {
            let (i, j) = (c % res, c / res);
            border |= i == 0 || j == 0 || i + 1 == res || j + 1 == res;
            let nbrs = [(i > 0).then(|| c - 1), (i + 1 < res).then(|| c + 1), (j > 0).then(|| c - res), (j + 1 < res).then(|| c + res)];
            for n in nbrs.into_iter().flatten() {
                if comp[n] == usize::MAX && labels[n].as_ref() == Some(l) {
                    comp[n] = start;
                    stack.push(n);
                }
            }
        }
        let e = regions.entry(l.clone()).or_default();
        e.0 += 1;
        if border {
            e.1 += 1;
        }
    }
    let boundary_fraction = if labeled == 0 { 0.0 } else { boundary_cells as f64 / labeled as f64 };
    GridCensus {
        resolution: res,
        regions: regions.into_iter().map(|(label, (components, unbounded))| GridRegion { label, components, unbounded }).collect(),
        boundary_fraction,
        coarse_warning: boundary_fraction > 0.05,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    Halfplane,
    Quadrant,
}

/// An open halfplane or quadrant touching `s1` and `s2` on its boundary and
/// meeting exactly the sites of `h`. For halfplanes `dir` is the boundary
/// direction with the open side on its left; for quadrants `anchor` is the
/// apex and `dir` holds the signs of the quadrant (in the L-infinity frame
/// for L1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportingWitness {
    pub kind: WitnessKind,
    pub anchor: Point2,
    pub dir: Point2,
    pub s1: SiteId,
    pub s2: SiteId,
    pub h: Vec<SiteId>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SupportingReport {
    pub witnesses: Vec<SupportingWitness>,
    /// Candidate boundaries through a third endpoint.
    pub degenerate: usize,
}

/// Parameter range of t in [0,1] where `f0 + (f1-f0) t > thr`.
fn above(f0: f64, f1: f64, thr: f64) -> Option<(f64, f64)> {
    let (a, b) = (f0 - thr, f1 - thr);
    match (a > 0.0, b > 0.0) {
        (true, true) => Some((0.0, 1.0)),
        (false, false) => None,
        (true, false) => Some((0.0, a / (a - b))),
        (false, true) => Some((a / (a - b), 1.0)),
    }
}

fn meets_open_quadrant(s: &SegmentSite, c: Point2, sg: Point2, tol: f64) -> bool {
    let u = |p: Point2| sg.x * (p.x - c.x);
    let v = |p: Point2| sg.y * (p.y - c.y);
    match (above(u(s.a), u(s.b), tol), above(v(s.a), v(s.b), tol)) {
        (Some(a), Some(b)) => a.0.max(b.0) < a.1.min(b.1) || (s.is_point() && a.0 <= b.1),
        _ => false,
    }
}

fn meets_closed_quadrant(s: &SegmentSite, c: Point2, sg: Point2, tol: f64) -> bool {
    meets_open_quadrant(s, c, sg, -tol)
}

/// Supporting halfplanes (Euclidean) or axis-aligned quadrants (L1, L∞).
pub fn enumerate_supporting(sites: &SiteSet, m: Metric) -> SupportingReport {
    match m {
        Metric::Linf => quadrants(&sites.sites, sites.eps()),
        Metric::L1 => {
            let work: Vec<SegmentSite> = sites.sites.iter().map(|s| SegmentSite::new(s.id, l1_to_linf(s.a), l1_to_linf(s.b))).collect();
            quadrants(&work, 2.0 * sites.eps())
        }
        _ => halfplanes(sites),
    }
}

fn halfplanes(sites: &SiteSet) -> SupportingReport {
    let eps = sites.eps();
    let mut rep = SupportingReport::default();
    let n = sites.len();
    for i in 0..n {
        for j in i + 1..n {
            for p in sites.site(i).endpoints() {
                for q in sites.site(j).endpoints() {
                    if p.dist(q) <= eps {
                        continue;
                    }
                    let d = (q - p).unit();
                    for side in [1.0, -1.0] {
                        // Signed offset of a point into the open halfplane.
                        let off = |x: Point2| side * d.cross(x - p);
                        let reach = |s: &SegmentSite| s.endpoints().into_iter().map(off).fold(f64::NEG_INFINITY, f64::max);
                        if reach(sites.site(i)) > eps || reach(sites.site(j)) > eps {
                            continue;
                        }
                        let mut h = Vec::new();
                        let mut degenerate = false;
                        for s in &sites.sites {
                            if s.id == i || s.id == j {
                                continue;
                            }
                            let r = reach(s);
                            if r > eps {
                                h.push(s.id);
                            } else if r >= -eps {
                                degenerate = true;
                            }
                        }
                        if degenerate {
                            rep.degenerate += 1;
                            continue;
                        }
                        rep.witnesses.push(SupportingWitness { kind: WitnessKind::Halfplane, anchor: p, dir: d * side, s1: i, s2: j, h });
                    }
                }
            }
        }
    }
    rep
}

fn quadrants(sites: &[SegmentSite], eps: f64) -> SupportingReport {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in sites {
        for p in s.endpoints() {
            xs.push(p.x);
            ys.push(p.y);
        }
    }
    let mut apexes: Vec<Point2> = Vec::new();
    for &x in &xs {
        for &y in &ys {
            apexes.push(Point2::new(x, y));
        }
    }
    // Apexes on a segment interior, level with another endpoint.
    for s in sites {
        let d = s.b - s.a;
        for (&x, &y) in xs.iter().zip(&ys) {
            if d.x.abs() > 0.0 {
                let t = (x - s.a.x) / d.x;
                if (0.0..=1.0).contains(&t) {
                    apexes.push(s.point_at(t));
                }
            }
            if d.y.abs() > 0.0 {
                let t = (y - s.a.y) / d.y;
                if (0.0..=1.0).contains(&t) {
                    apexes.push(s.point_at(t));
                }
            }
        }
    }
    let mut rep = SupportingReport::default();
    let mut seen: BTreeSet<(i8, i8, SiteId, SiteId, Vec<SiteId>)> = BTreeSet::new();
    for c in apexes {
        for sg in [Point2::new(1.0, 1.0), Point2::new(-1.0, 1.0), Point2::new(-1.0, -1.0), Point2::new(1.0, -1.0)] {
            let mut h = Vec::new();
            let mut touched = Vec::new();
            for s in sites {
                if meets_open_quadrant(s, c, sg, eps) {
                    h.push(s.id);
                } else if meets_closed_quadrant(s, c, sg, eps) {
                    touched.push(s.id);
                }
            }
            match touched.len() {
                2 => {}
                0 | 1 => continue,
                _ => {
                    rep.degenerate += 1;
                    continue;
                }
            }
            let key = (sg.x as i8, sg.y as i8, touched[0], touched[1], h.clone());
            if seen.insert(key) {
                rep.witnesses.push(SupportingWitness { kind: WitnessKind::Quadrant, anchor: c, dir: sg, s1: touched[0], s2: touched[1], h });
            }
        }
    }
    rep
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub level: Option<usize>,
    pub expected: i64,
    pub actual: i64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Point2>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    pub fn eq(name: &str, level: Option<usize>, expected: i64, actual: i64) -> Check {
        Check { name: name.into(), level, expected, actual, pass: expected == actual, witness: None, detail: String::new() }
    }

    pub fn at_most(name: &str, level: Option<usize>, bound: i64, actual: i64) -> Check {
        Check { name: name.into(), level, expected: bound, actual, pass: actual <= bound, witness: None, detail: String::new() }
    }

    fn with_witness(mut self, p: Option<Point2>, detail: String) -> Check {
        self.witness = p;
        self.detail = detail;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }
}

/// Face-count identities on every level of the tower.
pub fn check_identities(tower: &DiagramTower) -> Report {
    let mut rep = Report::default();
    let n = tower.sites.len() as i64;
    let i_count = if tower.sites.mode == SharingMode::Crossing { count_intersections(&tower.sites).unwrap_or(0) as i64 } else { 0 };
    let pslg = tower.sites.mode == SharingMode::Pslg;
    let mut census = Vec::new();
    for d in &tower.levels {
        match d.census() {
            Ok(c) => census.push(c),
            Err(e) => {
                rep.checks.push(Check::eq("topology", Some(d.k), 0, 1).with_witness(None, e.to_string()));
                return rep;
            }
        }
    }
    let u: Vec<i64> = census.iter().map(|c| c.u as i64).collect();
    for (idx, (d, c)) in tower.levels.iter().zip(&census).enumerate() {
        let k = d.k as i64;
        let (f, e, v) = (c.f as i64, c.e as i64, c.v as i64);
        if e > 0 {
            rep.checks.push(Check::eq("euler V-E+F=1", Some(d.k), 1, v - e + f));
        }
        let deg_sum: i64 = (0..d.vertices.len()).map(|x| d.degree(x) as i64).sum();
        rep.checks.push(Check::eq("degree sum 2E=sum(deg)+U", Some(d.k), 2 * e, deg_sum + c.u as i64));
        let excess: i64 = (0..d.vertices.len()).map(|x| d.degree(x) as i64 - 3).sum();
        if e > 0 {
            rep.checks.push(Check::eq("E=3(F-1)-U-excess", Some(d.k), 3 * (f - 1) - c.u as i64 - excess, e));
        }
        if !pslg && c.v_other == 0 && e > 0 {
            rep.checks.push(Check::eq("E_k=3(F_k-1)-U_k", Some(d.k), 3 * (f - 1) - c.u as i64, e));
            rep.checks.push(Check::eq("V_k=2(F_k-1)-U_k", Some(d.k), 2 * (f - 1) - c.u as i64, v));
        }
        if !pslg && idx > 0 && c.v_other == 0 {
            rep.checks.push(Check::eq("V_k=V'_k+V'_{k-1}", Some(d.k), c.v_new as i64 + census[idx - 1].v_new as i64, v));
        }
        if !pslg {
            let prior: i64 = u[..idx].iter().sum();
            rep.checks.push(Check::eq("F_k=2kn-k^2-n+1-sum U_i(+2I)", Some(d.k), 2 * k * n - k * k - n + 1 - prior + 2 * i_count, f));
            if k == 1 && i_count > 0 {
                rep.checks.push(Check::eq("E_1=3(F_1-1)-U_1-I", Some(1), 3 * (f - 1) - u[0] - i_count, e));
            }
            if k == 3 && i_count > 0 {
                rep.checks.push(Check::eq("F_3=5n-8-U_1-U_2+2I", Some(3), 5 * n - 8 - u[0] - u[1] + 2 * i_count, f));
            }
        }
    }
    if !pslg && tower.levels.len() as i64 == n - 1 {
        let total: i64 = u.iter().sum();
        rep.checks.push(Check::eq("sum U_i=n(n-1)+2I", None, n * (n - 1) + 2 * i_count, total));
        for (idx, d) in tower.levels.iter().enumerate() {
            let k = d.k as i64;
            let rest: i64 = u[idx..].iter().sum();
            rep.checks.push(Check::eq("F_k=1-(n-k)^2+sum_{i>=k} U_i", Some(d.k), 1 - (n - k) * (n - k) + rest, census[idx].f as i64));
        }
    }
    rep
}

/// Soft bound F_k <= 2k(n-k); reported, never part of `check_identities`.
pub fn complexity_bound(tower: &DiagramTower) -> Vec<Check> {
    let n = tower.sites.len() as i64;
    tower.levels.iter().map(|d| Check::at_most("F_k<=2k(n-k)", Some(d.k), 2 * d.k as i64 * (n - d.k as i64), d.face_ids().count() as i64)).collect()
}

/// Matches supporting witnesses with |H| = k-1 against the unbounded ends
/// of level k, by the pair of labels on either side.
pub fn check_supporting(tower: &DiagramTower) -> Report {
    let mut rep = Report::default();
    let sup = enumerate_supporting(&tower.sites, tower.metric);
    let n = tower.sites.len() as i64;
    if tower.sites.mode == SharingMode::Disjoint {
        rep.checks.push(Check::eq("supporting total=n(n-1)", None, n * (n - 1), sup.witnesses.len() as i64));
    }
    rep.checks.push(Check::eq("supporting degenerate candidates", None, 0, sup.degenerate as i64));
    for d in &tower.levels {
        let mut want: BTreeMap<(Vec<SiteId>, Vec<SiteId>), i64> = BTreeMap::new();
        for w in sup.witnesses.iter().filter(|w| w.h.len() + 1 == d.k) {
            let mut a = w.h.clone();
            a.push(w.s1);
            a.sort_unstable();
            let mut b = w.h.clone();
            b.push(w.s2);
            b.sort_unstable();
            *want.entry((a.clone().min(b.clone()), a.max(b))).or_default() += 1;
        }
        let mut got: BTreeMap<(Vec<SiteId>, Vec<SiteId>), i64> = BTreeMap::new();
        for end in &d.infinite {
            let Some(e) = d.half_edges[end.half_edge].edge else { continue };
            let (Some(l), Some(r)) = (&d.edges[e].left, &d.edges[e].right) else { continue };
            let (a, b) = (l.sites.clone(), r.sites.clone());
            *got.entry((a.clone().min(b.clone()), a.max(b))).or_default() += 1;
        }
        let matched: i64 = want.iter().map(|(k, c)| (*c).min(got.get(k).copied().unwrap_or(0))).sum();
        let total_want: i64 = want.values().sum();
        let total_got: i64 = got.values().sum();
        rep.checks.push(Check::eq("witnesses |H|=k-1 = U_k", Some(d.k), total_want, total_got));
        rep.checks.push(Check::eq("witness/unbounded-edge bijection", Some(d.k), total_want.max(total_got), matched));
    }
    rep
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureOptions {
    pub star_points: usize,
    pub star_samples: usize,
    pub farthest: bool,
    pub seed: u64,
}

impl Default for StructureOptions {
    fn default() -> Self {
        StructureOptions { star_points: 100, star_samples: 100, farthest: true, seed: 7 }
    }
}

fn piece_samples(pieces: &[crate::bisector::CurvePiece], scale: f64) -> Vec<Point2> {
    pieces.iter().flat_map(|p| p.samples(5, scale)).collect()
}

fn near_pieces(x: Point2, pieces: &[crate::bisector::CurvePiece]) -> f64 {
    pieces.iter().map(|p| crate::subdivision::piece_distance(p, x)).fold(f64::INFINITY, f64::min)
}

/// Face trees between consecutive levels and their match with the
/// farthest diagram of the face label.
fn check_face_trees(tower: &DiagramTower, opts: &StructureOptions, rep: &mut Report) {
    let scale = tower.sites.diameter();
    let tol = 1e-6 * scale;
    for pair in tower.levels.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        if lo.vertices.iter().any(|v| v.kind != crate::subdivision::VertexKind::Regular) {
            // Crossing and PSLG vertices have degree four or more.
            continue;
        }
        let mut bad_count = 0;
        let mut bad_tree = 0;
        let mut bad_far = 0;
        let mut faces = 0;
        let mut witness = None;
        let mut detail = String::new();
        for f in hi.face_ids() {
            let Some(label) = &hi.faces[f].label else { continue };
            if label.kind != LabelKind::Type1 {
                continue;
            }
            faces += 1;
            let frag = match lo.clip_to_face(hi, f) {
                Ok(fr) => fr,
                Err(e) => {
                    bad_tree += 1;
                    detail = e.to_string();
                    continue;
                }
            };
            let m = frag.interior_vertices.len();
            if frag.edges.len() != 2 * m + 1 {
                bad_count += 1;
                witness = hi.face_sample_point(f);
                detail = format!("face {f} of order {}: {} edges, {m} interior vertices", hi.k, frag.edges.len());
            }
            if !frag.is_tree() {
                bad_tree += 1;
                witness = hi.face_sample_point(f);
            }
            if opts.farthest && label.len() >= 2 {
                let far = match farthest_voronoi(&tower.sites, &label.sites, tower.metric) {
                    Ok(d) => d,
                    Err(e) => {
                        bad_far += 1;
                        detail = e.to_string();
                        continue;
                    }
                };
                let Ok(ff) = far.clip_to_face(hi, f) else {
                    bad_far += 1;
                    continue;
                };
                let a: Vec<_> = frag.edges.iter().flat_map(|e| e.pieces.iter().copied()).collect();
                let b: Vec<_> = ff.edges.iter().flat_map(|e| e.pieces.iter().copied()).collect();
                let off_a = piece_samples(&a, scale).into_iter().find(|&x| near_pieces(x, &b) > tol);
                let off_b = piece_samples(&b, scale).into_iter().find(|&x| near_pieces(x, &a) > tol);
                if ff.edges.len() != frag.edges.len() || off_a.is_some() || off_b.is_some() {
                    bad_far += 1;
                    witness = off_a.or(off_b).or(witness);
                    detail = format!("face {f} of order {}: farthest diagram differs", hi.k);
                }
            }
        }
        rep.checks.push(Check::eq("face tree has 2m+1 edges", Some(lo.k), 0, bad_count).with_witness(witness, detail.clone()));
        rep.checks.push(Check::eq("face fragment is a tree", Some(lo.k), 0, bad_tree));
        if opts.farthest {
            rep.checks.push(Check::eq("fragment equals clipped farthest diagram", Some(lo.k), 0, bad_far).with_witness(witness, detail));
        }
        rep.checks.push(Check::at_most("Type-1 faces examined", Some(hi.k), i64::MAX, faces));
    }
}

/// Random points where the oracle label contains `s`.
fn points_in_union(sites: &SiteSet, k: usize, m: Metric, s: SiteId, count: usize, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let w = window(sites);
    let tube = TUBE_REL * sites.diameter();
    let mut out = Vec::new();
    for _ in 0..count * 400 {
        if out.len() == count {
            break;
        }
        let x = random_point(rng, w);
        if oracle_label(x, sites, k, m, tube).is_some_and(|l| l.contains(s)) {
            out.push(x);
        }
    }
    out
}

/// Weak star-shapedness of V_k(s,S): the segment from each sampled point to
/// its nearest point on s stays in the union.
fn check_star(tower: &DiagramTower, opts: &StructureOptions, rep: &mut Report) {
    let sites = &tower.sites;
    let m = tower.metric;
    let eps = sites.eps();
    for d in &tower.levels {
        let k = d.k;
        let per_site: Vec<(usize, usize, Option<Point2>)> = (0..sites.len())
            .into_par_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((k as u64) << 32) ^ s as u64);
                let pts = points_in_union(sites, k, m, s, opts.star_points, &mut rng);
                let mut fails = 0;
                let mut witness = None;
                for &x in &pts {
                    let q = nearest_point(x, sites.site(s), m);
                    for i in 1..=opts.star_samples {
                        let y = x.lerp(q, i as f64 / (opts.star_samples + 1) as f64);
                        let r = k_nearest(y, sites, k, m).radius;
                        if distance(y, sites.site(s), m) > r + 10.0 * eps {
                            fails += 1;
                            witness.get_or_insert(y);
                            break;
                        }
                    }
                }
                (pts.len(), fails, witness)
            })
            .collect();
        let tested: usize = per_site.iter().map(|p| p.0).sum();
        let fails: usize = per_site.iter().map(|p| p.1).sum();
        let witness = per_site.iter().find_map(|p| p.2);
        rep.checks.push(Check::eq("V_k(s,S) weakly star-shaped", Some(k), 0, fails as i64).with_witness(witness, format!("{tested} points tested")));
    }
}

fn face_adjacency_components(d: &PlanarSubdivision, faces: &[FaceId]) -> usize {
    let idx: HashMap<FaceId, usize> = faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let mut parent: Vec<usize> = (0..faces.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    let join = |a: FaceId, b: FaceId, parent: &mut Vec<usize>| {
        if let (Some(&i), Some(&j)) = (idx.get(&a), idx.get(&b)) {
            let (ri, rj) = (find(parent, i), find(parent, j));
            parent[ri] = rj;
        }
    };
    for h in &d.half_edges {
        if h.edge.is_some() {
            join(h.face, d.half_edges[h.twin].face, &mut parent);
        }
    }
    // Faces meeting at a vertex are connected through its closure.
    for v in 0..d.vertices.len() {
        let around: Vec<FaceId> = d.vertex_out(v).iter().map(|&h| d.half_edges[h].face).filter(|f| idx.contains_key(f)).collect();
        for w in around.windows(2) {
            join(w[0], w[1], &mut parent);
        }
    }
    (0..faces.len()).filter(|&i| find(&mut parent, i) == i).count()
}

/// Connectivity of V_k(s,S), unbounded faces per region, and at most two
/// unbounded edges per region and endpoint.
fn check_regions(tower: &DiagramTower, rep: &mut Report) {
    for d in &tower.levels {
        let mut disconnected = 0;
        for s in 0..tower.sites.len() {
            let faces = crate::orderk::site_union_region(d, s);
            if !faces.is_empty() && face_adjacency_components(d, &faces) != 1 {
                disconnected += 1;
            }
        }
        rep.checks.push(Check::eq("V_k(s,S) connected", Some(d.k), 0, disconnected));
        let mut unbounded: BTreeMap<&OrderKLabel, i64> = BTreeMap::new();
        for f in d.face_ids() {
            if let (Some(l), true) = (&d.faces[f].label, d.faces[f].unbounded) {
                *unbounded.entry(l).or_default() += 1;
            }
        }
        let worst = unbounded.values().copied().max().unwrap_or(0);
        rep.checks.push(Check::at_most("unbounded faces per region <= 2k", Some(d.k), 2 * d.k as i64, worst));
        // The per-endpoint bound comes from supporting halfplanes; with
        // quadrants (L1, L-infinity) an endpoint can anchor more of them.
        if tower.metric != Metric::Euclidean {
            continue;
        }
        let mut per_endpoint: BTreeMap<(OrderKLabel, SiteId, bool), i64> = BTreeMap::new();
        for end in &d.infinite {
            let Some(e) = d.half_edges[end.half_edge].edge else { continue };
            let edge = &d.edges[e];
            let Some(seg) = edge.segs.iter().find(|s| matches!(s.support, EdgeSupport::Bisector { .. })) else { continue };
            let EdgeSupport::Bisector { a, b } = seg.support else { continue };
            for l in [&edge.left, &edge.right].into_iter().flatten() {
                let own = if l.contains(a) && !l.contains(b) {
                    a
                } else if l.contains(b) && !l.contains(a) {
                    b
                } else {
                    continue;
                };
                let s = tower.sites.site(own);
                let at_a = s.a.dot(end.dir) >= s.b.dot(end.dir);
                *per_endpoint.entry((l.clone(), own, at_a)).or_default() += 1;
            }
        }
        let worst = per_endpoint.values().copied().max().unwrap_or(0);
        rep.checks.push(Check::at_most("unbounded edges per region endpoint <= 2", Some(d.k), 2, worst));
    }
}

/// Vertices and edge midpoints of `other` strictly inside Type-2 faces of `d`,
/// with the number of Type-2 faces and a witness.
fn type2_intrusions(d: &PlanarSubdivision, other: &PlanarSubdivision, tol: f64) -> (usize, i64, Option<Point2>) {
    let mut hits = 0;
    let mut witness = None;
    let mut faces = 0;
    let mut pts: Vec<Point2> = other.vertices.iter().map(|v| v.pos).collect();
    pts.extend(other.edges.iter().map(|e| e.segs[e.segs.len() / 2].midpoint(other.scale)));
    for f in d.face_ids() {
        if d.faces[f].label.as_ref().is_none_or(|l| l.kind != LabelKind::Type2) {
            continue;
        }
        faces += 1;
        for &x in &pts {
            if d.locate(x) == Some(f) && d.distance_to_edges(x) > tol {
                hits += 1;
                witness.get_or_insert(x);
            }
        }
    }
    (faces, hits, witness)
}

/// Type-2 faces of a PSLG tower contain no vertices or edges of the next order.
fn check_type2_isolation(tower: &DiagramTower, rep: &mut Report) {
    let tol = 1e-6 * tower.sites.diameter();
    for pair in tower.levels.windows(2) {
        let (faces, hits, witness) = type2_intrusions(&pair[0], &pair[1], tol);
        rep.checks.push(Check::eq("Type-2 faces free of order k+1 elements", Some(pair[0].k), 0, hits).with_witness(witness, format!("{faces} Type-2 faces")));
    }
}

/// Vertices and edges of order k-1 inside Type-2 faces of order k, per level.
/// Nonzero counts occur when a segment incident to the representative
/// switches between touching it and being strictly closer inside one face:
/// the order-(k-1) label changes there while the order-k label does not.
pub fn type2_lower_intrusions(tower: &DiagramTower) -> Vec<(usize, i64, Option<Point2>)> {
    let tol = 1e-6 * tower.sites.diameter();
    tower.levels.windows(2).map(|pair| {
        let (_, hits, witness) = type2_intrusions(&pair[1], &pair[0], tol);
        (pair[1].k, hits, witness)
    }).collect()
}

/// S_k(x) = S_{k+1}(x) at sampled points of Type-2 faces.
pub fn check_type2_stability(tower: &DiagramTower, samples: usize, seed: u64) -> Report {
    let mut rep = Report::default();
    let sites = &tower.sites;
    let tube = TUBE_REL * sites.diameter();
    let w = window(sites);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for d in &tower.levels {
        let mut tested = 0;
        let mut fails = 0;
        let mut witness = None;
        for _ in 0..samples {
            let x = random_point(&mut rng, w);
            let Some(l) = d.label_at(x) else { continue };
            if l.kind != LabelKind::Type2 || oracle_label(x, sites, d.k, tower.metric, tube).is_none() {
                continue;
            }
            tested += 1;
            let a = k_nearest(x, sites, d.k, tower.metric).sites;
            let b = k_nearest(x, sites, d.k + 1, tower.metric).sites;
            if a != b {
                fails += 1;
                witness.get_or_insert(x);
            }
        }
        rep.checks.push(Check::eq("Type-2 S_k(x)=S_{k+1}(x)", Some(d.k), 0, fails).with_witness(witness, format!("{tested} points in Type-2 faces")));
    }
    rep
}

/// Structural properties of a tower with at least two levels.
pub fn check_structure(tower: &DiagramTower, opts: &StructureOptions) -> Report {
    let mut rep = Report::default();
    match tower.sites.mode {
        // Crossing points put degree-4 vertices of V_1 inside faces, so the
        // tree edge count only applies to disjoint sites.
        SharingMode::Disjoint => check_face_trees(tower, opts, &mut rep),
        SharingMode::Crossing => {}
        SharingMode::Pslg => check_type2_isolation(tower, &mut rep),
    }
    if opts.star_points > 0 {
        check_star(tower, opts, &mut rep);
    }
    check_regions(tower, &mut rep);
    rep
}

/// Fine-face counts of V_k(S) and of V_k(S(eps)) for a perturbed copy.
pub fn compare_perturbed(sites: &SiteSet, eps: f64, k: usize, metric: Metric) -> Result<Check, VerifyError> {
    let perturbed = crate::instances::perturb(sites, eps)?;
    let fa = fine_face_count(sites, k, metric, false)? as i64;
    let fb = fine_face_count(&perturbed, k, metric, true)? as i64;
    Ok(Check::at_most("fine faces F_k(S) <= F_k(S(eps))", Some(k), fb, fa))
}

/// Label of a fine face: the order-k and order-(k-1) labels at `x` and,
/// when `elementary` is set, the elementary site the order-k disk touches.
type FineLabel = (OrderKLabel, Option<OrderKLabel>, Option<ElementarySite>);

fn fine_label(x: Point2, sites: &SiteSet, k: usize, metric: Metric, elementary: bool) -> Result<FineLabel, VerifyError> {
    let here = crate::orderk::pslg_label(x, sites, k, metric)?;
    let below = if k > 1 { Some(crate::orderk::pslg_label(x, sites, k - 1, metric)?) } else { None };
    let touch = if elementary { k_nearest(x, sites, k, metric).touching } else { None };
    Ok((here, below, touch))
}

/// Number of faces of level `k` refined by level `k - 1` and, when
/// `elementary` is set, by the elementary site touched by the order-k disk.
/// The refinement lines are the perpendiculars at every segment endpoint;
/// faces of the overlay carrying equal fine labels across an edge are joined.
pub fn fine_face_count(sites: &SiteSet, k: usize, metric: Metric, elementary: bool) -> Result<usize, VerifyError> {
    let mut pieces: Vec<EdgeSeg> = Vec::new();
    for level in (k.saturating_sub(1).max(1)..=k).rev() {
        let d = crate::orderk::build_level_direct(sites, level, metric)?;
        pieces.extend(d.edges.iter().flat_map(|e| e.segs.iter().copied()));
    }
    if elementary {
        for s in sites.sites.iter().filter(|s| !s.is_point()) {
            let normal = (s.b - s.a).perp();
            for p in [s.a, s.b] {
                let piece = CurvePiece { curve: Curve::Line { p, d: normal }, t0: None, t1: None, left: s.id, right: s.id, form: Form::Point { p } };
                pieces.push(EdgeSeg { piece, forward: true, support: EdgeSupport::Wedge { site: s.id, apex: p } });
            }
        }
    }
    let eps = sites.eps();
    let mut arcs = Vec::new();
    for (i, seg) in pieces.iter().enumerate() {
        let p = &seg.piece;
        let mut cuts: Vec<f64> = Vec::new();
        for (j, other) in pieces.iter().enumerate() {
            if i == j {
                continue;
            }
            let hits = piece_intersections(p, &other.piece, eps).map_err(|e| VerifyError::Overlay(e.to_string()))?;
            cuts.extend(hits.into_iter().map(|x| p.curve.param_of(x)));
        }
        let tol = 1e-9;
        cuts.retain(|&t| t > p.lo() + tol && t < p.hi() - tol);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= tol);
        let mut bounds: Vec<Option<f64>> = vec![p.t0];
        bounds.extend(cuts.into_iter().map(Some));
        bounds.push(p.t1);
        for w in bounds.windows(2) {
            let label = OrderKLabel::type1(Vec::new());
            arcs.push(ArcSpec { piece: p.sub(w[0], w[1]), left: label.clone(), right: label, support: seg.support });
        }
    }
    let overlay = assemble(k, metric, 2.0 * sites.diameter().max(1.0), arcs, &[], None);
    let mut groups: BTreeMap<String, Vec<FaceId>> = BTreeMap::new();
    for f in overlay.face_ids() {
        let x = overlay.face_sample_point(f).ok_or_else(|| VerifyError::Overlay(format!("no sample point in overlay face {f}")))?;
        let (here, below, touch) = fine_label(x, sites, k, metric, elementary)?;
        let key = format!("{here}|{}|{touch:?}", below.map(|b| b.to_string()).unwrap_or_default());
        groups.entry(key).or_default().push(f);
    }
    Ok(groups.values().map(|fs| face_adjacency_components(&overlay, fs)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(mode: SharingMode, segs: &[[f64; 4]]) -> SiteSet {
        SiteSet::new(mode, segs.iter().map(|s| (Point2::new(s[0], s[1]), Point2::new(s[2], s[3]))).collect()).unwrap()
    }

    #[test]
    fn far_left_nearest_is_leftmost() {
        let s = set(SharingMode::Disjoint, &[[0.0, 0.0, 1.0, 0.0], [5.0, 1.0, 6.0, 3.0], [2.0, 4.0, 2.5, 6.0]]);
        let r = k_nearest(Point2::new(-1000.0, 0.0), &s, 1, Metric::Euclidean);
        assert_eq!(r.sites, vec![0]);
        let r = k_nearest(Point2::new(0.5, -1.0), &s, 3, Metric::Euclidean);
        assert_eq!(r.sites, vec![0, 1, 2]);
        let far = s.sites.iter().map(|q| distance(Point2::new(0.5, -1.0), q, Metric::Euclidean)).fold(0.0, f64::max);
        assert_eq!(r.radius, far);
    }

    #[test]
    fn star_disk_touches_the_center() {
        let s = set(SharingMode::Pslg, &[[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.3, 1.0], [0.0, 0.0, -1.0, 0.2]]);
        let r = k_nearest(Point2::new(-0.01, -0.1), &s, 1, Metric::Euclidean);
        assert_eq!(r.sites, vec![0, 1, 2]);
        assert!(r.proper);
        assert_eq!(r.touching, Some(ElementarySite::new(0, ElementaryKind::EndpointA)));
    }

    #[test]
    fn two_segments_two_grid_components() {
        let s = set(SharingMode::Disjoint, &[[0.0, 0.0, 1.0, 0.0], [0.0, 3.0, 2.0, 4.0]]);
        let g = grid_census(&s, 1, Metric::Euclidean, 60, None);
        assert_eq!(g.regions.len(), 2);
        assert!(g.regions.iter().all(|r| r.components == 1 && r.unbounded == 1));
    }

    #[test]
    fn supporting_counts() {
        let s = set(SharingMode::Disjoint, &[[0.0, 0.0, 1.0, 0.0], [0.0, 3.0, 2.0, 4.0]]);
        assert_eq!(enumerate_supporting(&s, Metric::Euclidean).witnesses.len(), 2);
        let c = set(SharingMode::Crossing, &[[0.0, 0.0, 2.0, 2.1], [0.1, 2.0, 2.0, -0.3]]);
        assert_eq!(enumerate_supporting(&c, Metric::Euclidean).witnesses.len(), 4);
        assert_eq!(enumerate_supporting(&c, Metric::Linf).witnesses.len(), 4);
        let s3 = set(SharingMode::Disjoint, &[[0.0, 0.0, 1.0, 0.3], [0.2, 3.0, 2.0, 4.1], [4.0, 1.0, 5.2, -1.3]]);
        assert_eq!(enumerate_supporting(&s3, Metric::Euclidean).witnesses.len(), 6);
        assert_eq!(enumerate_supporting(&s3, Metric::Linf).witnesses.len(), 6);
    }

    #[test]
    fn fine_faces_of_disjoint_segments() {
        let s = set(SharingMode::Disjoint, &[[0.0, 0.0, 1.0, 0.3], [0.2, 3.0, 2.0, 4.1], [4.0, 1.0, 5.2, -1.3]]);
        assert_eq!(fine_face_count(&s, 1, Metric::Euclidean, false).unwrap(), 3);
        // Every elementary site of a disjoint segment owns one nearest face.
        assert_eq!(fine_face_count(&s, 1, Metric::Euclidean, true).unwrap(), 9);
    }

    #[test]
    fn radius_monotone_and_nested() {
        let s = set(SharingMode::Disjoint, &[[0.0, 0.0, 1.0, 0.3], [0.2, 3.0, 2.0, 4.1], [4.0, 1.0, 5.2, -1.3], [3.0, 3.0, 3.5, 5.0]]);
        let x = Point2::new(1.7, 1.1);
        for k in 1..4 {
            let a = k_nearest(x, &s, k, Metric::Euclidean);
            let b = k_nearest(x, &s, k + 1, Metric::Euclidean);
            assert!(a.radius <= b.radius);
            assert!(a.sites.iter().all(|id| b.sites.contains(id)));
        }
    }
}
