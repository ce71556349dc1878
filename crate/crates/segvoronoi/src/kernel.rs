//! Planar primitives: points, segment sites, metrics, distances and
//! general-position validation.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used to derive the absolute snapping tolerance of an
/// instance from its diameter.
pub const EPS_REL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn unit(self) -> Point2 {
        let n = self.norm();
        Point2::new(self.x / n, self.y / n)
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Point2, t: f64) -> Point2 {
        self + (o - self) * t
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

pub type SiteId = usize;

/// A closed line segment. `a == b` denotes a point-site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSite {
    pub id: SiteId,
    pub a: Point2,
    pub b: Point2,
}

impl SegmentSite {
    pub fn new(id: SiteId, a: Point2, b: Point2) -> Self {
        SegmentSite { id, a, b }
    }

    pub fn is_point(&self) -> bool {
        self.a == self.b
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn point_at(&self, t: f64) -> Point2 {
        self.a.lerp(self.b, t)
    }

    pub fn endpoints(&self) -> Vec<Point2> {
        if self.is_point() {
            vec![self.a]
        } else {
            vec![self.a, self.b]
        }
    }

    pub fn elementary_sites(&self) -> Vec<ElementarySite> {
        if self.is_point() {
            return vec![ElementarySite::new(self.id, ElementaryKind::EndpointA)];
        }
        [ElementaryKind::EndpointA, ElementaryKind::EndpointB, ElementaryKind::Interior]
            .into_iter()
            .map(|kind| ElementarySite::new(self.id, kind))
            .collect()
    }

    pub fn endpoint(&self, kind: ElementaryKind) -> Option<Point2> {
        match kind {
            ElementaryKind::EndpointA => Some(self.a),
            ElementaryKind::EndpointB => Some(self.b),
            ElementaryKind::Interior => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementaryKind {
    EndpointA,
    EndpointB,
    Interior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElementarySite {
    pub owner: SiteId,
    pub kind: ElementaryKind,
}

impl ElementarySite {
    pub fn new(owner: SiteId, kind: ElementaryKind) -> Self {
        ElementarySite { owner, kind }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "kebab-case")]
pub enum Metric {
    Euclidean,
    L1,
    Linf,
    Lp { p: f64 },
}

impl Metric {
    pub fn validate(self) -> Result<Self, KernelError> {
        match self {
            Metric::Lp { p } if !(p.is_finite() && p > 1.0) => Err(KernelError::InvalidMetric(p)),
            Metric::Lp { p: 2.0 } => Ok(Metric::Euclidean),
            m => Ok(m),
        }
    }

    /// Whether full diagrams (not just point queries) can be built.
    pub fn supports_diagrams(self) -> bool {
        matches!(self, Metric::Euclidean | Metric::L1 | Metric::Linf)
    }

    pub fn point_distance(self, p: Point2, q: Point2) -> f64 {
        let d = p - q;
        match self {
            Metric::Euclidean => d.norm(),
            Metric::L1 => d.x.abs() + d.y.abs(),
            Metric::Linf => d.x.abs().max(d.y.abs()),
            Metric::Lp { p: 2.0 } => d.norm(),
            Metric::Lp { p } => (d.x.abs().powf(p) + d.y.abs().powf(p)).powf(1.0 / p),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Euclidean => write!(f, "euclidean"),
            Metric::L1 => write!(f, "l1"),
            Metric::Linf => write!(f, "linf"),
            Metric::Lp { p } => write!(f, "lp:{p}"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "l1" | "manhattan" => Ok(Metric::L1),
            "linf" | "l-inf" | "chebyshev" => Ok(Metric::Linf),
            other => {
                let p = other
                    .strip_prefix("lp:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| KernelError::UnknownMetric(s.to_string()))?;
                Metric::Lp { p }.validate()
            }
        }
    }
}

/// Map under which the L1 distance becomes the L-infinity distance. It has
/// positive determinant, so orientation is preserved.
pub fn l1_to_linf(p: Point2) -> Point2 {
    Point2::new(p.x + p.y, p.y - p.x)
}

pub fn linf_to_l1(p: Point2) -> Point2 {
    Point2::new((p.x - p.y) * 0.5, (p.x + p.y) * 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SharingMode {
    Disjoint,
    Pslg,
    Crossing,
}

impl fmt::Display for SharingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SharingMode::Disjoint => "disjoint",
            SharingMode::Pslg => "pslg",
            SharingMode::Crossing => "crossing",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("coordinate of site {0} is not finite")]
    NonFinite(SiteId),
    #[error("site ids must be dense and ordered; found {found} at position {index}")]
    BadId { index: usize, found: SiteId },
    #[error("sites {0} and {1} overlap along a segment of positive length")]
    Overlap(SiteId, SiteId),
    #[error("sites {0} and {1} touch at {2} in a way the {3} mode forbids")]
    ForbiddenContact(SiteId, SiteId, Point2, SharingMode),
    #[error("invalid Lp exponent {0}")]
    InvalidMetric(f64),
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
    #[error("sites {a}, {b} and {c} cross at a common point")]
    TripleCrossing { a: SiteId, b: SiteId, c: SiteId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteSet {
    pub sites: Vec<SegmentSite>,
    pub mode: SharingMode,
}

impl SiteSet {
    /// Builds and validates a site set; ids are assigned by position.
    pub fn new(mode: SharingMode, segments: Vec<(Point2, Point2)>) -> Result<Self, KernelError> {
        let sites = segments
            .into_iter()
            .enumerate()
            .map(|(i, (a, b))| SegmentSite::new(i, a, b))
            .collect();
        let set = SiteSet { sites, mode };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, id: SiteId) -> &SegmentSite {
        &self.sites[id]
    }

    pub fn endpoints(&self) -> Vec<Point2> {
        self.sites.iter().flat_map(|s| s.endpoints()).collect()
    }

    /// Largest distance between two endpoints; 1 for a single point.
    pub fn diameter(&self) -> f64 {
        let pts = self.endpoints();
        let mut d: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d = d.max(pts[i].dist(pts[j]));
            }
        }
        if d > 0.0 {
            d
        } else {
            1.0
        }
    }

    pub fn eps(&self) -> f64 {
        EPS_REL * self.diameter()
    }

    pub fn bbox(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in self.endpoints() {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    pub fn centroid(&self) -> Point2 {
        let (lo, hi) = self.bbox();
        lo.lerp(hi, 0.5)
    }

    /// Checks ids, finiteness and the pairwise contact rules of the mode.
    pub fn validate(&self) -> Result<(), KernelError> {
        for (i, s) in self.sites.iter().enumerate() {
            if s.id != i {
                return Err(KernelError::BadId { index: i, found: s.id });
            }
            if !(s.a.is_finite() && s.b.is_finite()) {
                return Err(KernelError::NonFinite(s.id));
            }
        }
        let eps = self.eps();
        let mut crossings: Vec<(SiteId, SiteId, Point2)> = Vec::new();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let (si, sj) = (&self.sites[i], &self.sites[j]);
                match classify_pair_eps(si, sj, eps) {
                    PairClass::Disjoint => {}
                    PairClass::Overlap => return Err(KernelError::Overlap(i, j)),
                    PairClass::SharedEndpoint(p) => {
                        if self.mode != SharingMode::Pslg {
                            return Err(KernelError::ForbiddenContact(i, j, p, self.mode));
                        }
                    }
                    PairClass::ProperCrossing(q) => {
                        if self.mode != SharingMode::Crossing {
                            return Err(KernelError::ForbiddenContact(i, j, q, self.mode));
                        }
                        crossings.push((i, j, q));
                    }
                    PairClass::Touching(q) => {
                        return Err(KernelError::ForbiddenContact(i, j, q, self.mode));
                    }
                }
            }
        }
        for x in 0..crossings.len() {
            for y in x + 1..crossings.len() {
                let (a, b, p) = crossings[x];
                let (c, d, q) = crossings[y];
                if p.dist(q) <= eps {
                    let third = [c, d].into_iter().find(|s| *s != a && *s != b).unwrap_or(c);
                    return Err(KernelError::TripleCrossing { a, b, c: third });
                }
            }
        }
        Ok(())
    }

    /// Shared endpoints with the ids of all incident sites (PSLG vertices of
    /// degree at least two), in a deterministic order.
    pub fn shared_endpoints(&self) -> Vec<(Point2, Vec<SiteId>)> {
        let eps = self.eps();
        let mut out: Vec<(Point2, Vec<SiteId>)> = Vec::new();
        for s in &self.sites {
            for p in s.endpoints() {
                match out.iter_mut().find(|(q, _)| q.dist(p) <= eps) {
                    Some((_, ids)) => {
                        if !ids.contains(&s.id) {
                            ids.push(s.id)
                        }
                    }
                    None => out.push((p, vec![s.id])),
                }
            }
        }
        out.retain(|(_, ids)| ids.len() >= 2);
        out
    }
}

/// Distance from `x` to the closed segment `s` under metric `m`.
pub fn distance(x: Point2, s: &SegmentSite, m: Metric) -> f64 {
    let (_, d) = nearest_with_distance(x, s, m);
    d
}

/// A point of `s` realizing `distance(x, s, m)`. When the minimizers form a
/// sub-segment (L1, L-infinity), its midpoint is returned.
pub fn nearest_point(x: Point2, s: &SegmentSite, m: Metric) -> Point2 {
    nearest_with_distance(x, s, m).0
}

fn nearest_with_distance(x: Point2, s: &SegmentSite, m: Metric) -> (Point2, f64) {
    if s.is_point() {
        return (s.a, m.point_distance(x, s.a));
    }
    match m {
        Metric::Euclidean => {
            let t = euclid_param(x, s);
            let q = s.point_at(t);
            (q, x.dist(q))
        }
        Metric::Lp { p: 2.0 } => nearest_with_distance(x, s, Metric::Euclidean),
        Metric::Linf => linf_nearest(x, s.a, s.b),
        Metric::L1 => {
            let (q, d) = linf_nearest(l1_to_linf(x), l1_to_linf(s.a), l1_to_linf(s.b));
            (linf_to_l1(q), d)
        }
        Metric::Lp { .. } => lp_nearest(x, s, m),
    }
}

/// Parameter in [0,1] of the Euclidean projection of `x` onto `s`.
pub fn euclid_param(x: Point2, s: &SegmentSite) -> f64 {
    let d = s.b - s.a;
    let l2 = d.norm2();
    if l2 == 0.0 {
        return 0.0;
    }
    ((x - s.a).dot(d) / l2).clamp(0.0, 1.0)
}

fn linf_nearest(x: Point2, a: Point2, b: Point2) -> (Point2, f64) {
    let e = x - a;
    let d = b - a;
    let f = |t: f64| (e.x - t * d.x).abs().max((e.y - t * d.y).abs());
    let mut cands = vec![0.0, 1.0];
    let mut push = |num: f64, den: f64| {
        if den != 0.0 {
            let t = num / den;
            if (0.0..=1.0).contains(&t) {
                cands.push(t);
            }
        }
    };
    push(e.x, d.x);
    push(e.y, d.y);
    push(e.x - e.y, d.x - d.y);
    push(e.x + e.y, d.x + d.y);
    let best = cands.iter().map(|&t| f(t)).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (best + e.norm() + d.norm());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &t in &cands {
        if f(t) <= best + tol {
            lo = lo.min(t);
            hi = hi.max(t);
        }
    }
    let t = 0.5 * (lo + hi);
    (a.lerp(b, t), best)
}

fn lp_nearest(x: Point2, s: &SegmentSite, m: Metric) -> (Point2, f64) {
    let f = |t: f64| m.point_distance(x, s.point_at(t));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    let mut best_t = 0.5 * (lo + hi);
    let mut best = f(best_t);
    for t in [0.0, 1.0] {
        if f(t) < best {
            best = f(t);
            best_t = t;
        }
    }
    (s.point_at(best_t), best)
}

/// Result of `classify_pair`. `Touching` covers an endpoint lying on the
/// relative interior of the other segment, which no sharing mode admits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "point", rename_all = "kebab-case")]
pub enum PairClass {
    Disjoint,
    SharedEndpoint(Point2),
    ProperCrossing(Point2),
    Touching(Point2),
    Overlap,
}

pub fn classify_pair(s1: &SegmentSite, s2: &SegmentSite) -> PairClass {
    let scale = [s1.a, s1.b, s2.a, s2.b]
        .iter()
        .map(|p| p.x.abs().max(p.y.abs()))
        .fold(1.0f64, f64::max);
    classify_pair_eps(s1, s2, EPS_REL * scale)
}

pub fn classify_pair_eps(s1: &SegmentSite, s2: &SegmentSite, eps: f64) -> PairClass {
    for p in s1.endpoints() {
        for q in s2.endpoints() {
            if p.dist(q) <= eps {
                if !s1.is_point() && !s2.is_point() && collinear_overlap(s1, s2, eps) {
                    return PairClass::Overlap;
                }
                return PairClass::SharedEndpoint(p);
            }
        }
    }
    if s1.is_point() || s2.is_point() {
        let (pt, seg) = if s1.is_point() { (s1.a, s2) } else { (s2.a, s1) };
        return if distance(pt, seg, Metric::Euclidean) <= eps {
            PairClass::Touching(pt)
        } else {
            PairClass::Disjoint
        };
    }
    let d1 = s1.b - s1.a;
    let d2 = s2.b - s2.a;
    let side = |o: Point2, d: Point2, p: Point2| -> f64 {
        let v = d.cross(p - o) / d.norm();
        if v.abs() <= eps {
            0.0
        } else {
            v
        }
    };
    let o1 = side(s1.a, d1, s2.a);
    let o2 = side(s1.a, d1, s2.b);
    let o3 = side(s2.a, d2, s1.a);
    let o4 = side(s2.a, d2, s1.b);
    if o1 == 0.0 && o2 == 0.0 {
        return if collinear_overlap(s1, s2, eps) {
            PairClass::Overlap
        } else {
            PairClass::Disjoint
        };
    }
    let opposite = |u: f64, v: f64| u * v < 0.0;
    if opposite(o1, o2) && opposite(o3, o4) {
        let t = (s2.a - s1.a).cross(d2) / d1.cross(d2);
        return PairClass::ProperCrossing(s1.point_at(t));
    }
    for (p, other) in [(s1.a, s2), (s1.b, s2), (s2.a, s1), (s2.b, s1)] {
        if distance(p, other, Metric::Euclidean) <= eps {
            return PairClass::Touching(p);
        }
    }
    PairClass::Disjoint
}

fn collinear_overlap(s1: &SegmentSite, s2: &SegmentSite, eps: f64) -> bool {
    let d = s1.b - s1.a;
    let len = d.norm();
    let u = d * (1.0 / len);
    let off = |p: Point2| u.cross(p - s1.a).abs();
    if off(s2.a) > eps || off(s2.b) > eps {
        return false;
    }
    let (t1, t2) = ((s2.a - s1.a).dot(u), (s2.b - s1.a).dot(u));
    let (lo, hi) = (t1.min(t2), t1.max(t2));
    hi.min(len) - lo.max(0.0) > eps
}

/// Number of properly crossing pairs.
pub fn count_intersections(set: &SiteSet) -> Result<usize, KernelError> {
    let eps = set.eps();
    let mut count = 0;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            match classify_pair_eps(&set.sites[i], &set.sites[j], eps) {
                PairClass::Disjoint => {}
                PairClass::ProperCrossing(_) => count += 1,
                PairClass::Overlap => return Err(KernelError::Overlap(i, j)),
                PairClass::SharedEndpoint(p) | PairClass::Touching(p) => {
                    if set.mode != SharingMode::Pslg {
                        return Err(KernelError::ForbiddenContact(i, j, p, set.mode));
                    }
                }
            }
        }
    }
    Ok(count)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GpMode {
    /// Sites counted per segment; coincident endpoints count separately.
    Strict,
    /// Sites counted per elementary site with shared endpoints merged.
    Weak,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "kebab-case")]
pub enum GpViolation {
    CollinearEndpoints { points: Vec<Point2> },
    Cocircular { center: Point2, radius: f64, sites: Vec<SiteId> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GpReport {
    pub violations: Vec<GpViolation>,
    /// False when the circle test was skipped for size reasons.
    pub circles_checked: bool,
}

impl GpReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Above this size the O(n^4) circle test is skipped.
pub const GP_CIRCLE_LIMIT: usize = 40;

/// Reports collinear endpoint triples and circles touching four or more
/// sites (strict) or elementary sites (weak).
pub fn check_general_position(set: &SiteSet, mode: GpMode) -> GpReport {
    let eps = set.eps();
    let mut report = GpReport::default();
    let mut pts: Vec<Point2> = Vec::new();
    for p in set.endpoints() {
        if mode == GpMode::Weak && pts.iter().any(|q| q.dist(p) <= eps) {
            continue;
        }
        pts.push(p);
    }
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                let longest = a.dist(b).max(a.dist(c)).max(b.dist(c));
                let area2 = (b - a).cross(c - a).abs();
                if longest <= eps || area2 <= eps * longest {
                    report.violations.push(GpViolation::CollinearEndpoints { points: vec![a, b, c] });
                }
            }
        }
    }
    if set.len() <= GP_CIRCLE_LIMIT {
        report.circles_checked = true;
        report.violations.extend(cocircular_violations(set, mode, eps));
    }
    report
}

fn cocircular_violations(set: &SiteSet, mode: GpMode, eps: f64) -> Vec<GpViolation> {
    use crate::bisector::{bisector_pieces, piece_intersections};
    let n = set.len();
    let metric = Metric::Euclidean;
    let mut cache = std::collections::HashMap::new();
    let mut pieces = |i: usize, j: usize| -> Vec<crate::bisector::CurvePiece> {
        cache
            .entry((i, j))
            .or_insert_with(|| {
                bisector_pieces(&set.sites[i], &set.sites[j], metric, eps).unwrap_or_default()
            })
            .clone()
    };
    let mut found: Vec<GpViolation> = Vec::new();
    let mut centers: Vec<Point2> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let pij = pieces(i, j);
            for k in j + 1..n {
                let pik = pieces(i, k);
                for p in &pij {
                    for q in &pik {
                        let Ok(xs) = piece_intersections(p, q, eps) else { continue };
                        for x in xs {
                            if centers.iter().any(|c| c.dist(x) <= 1e3 * eps) {
                                continue;
                            }
                            let r = distance(x, &set.sites[i], metric);
                            let touching = touching_count(set, x, r, mode, eps);
                            if touching.len() >= 4 {
                                centers.push(x);
                                found.push(GpViolation::Cocircular { center: x, radius: r, sites: touching });
                            }
                        }
                    }
                }
            }
        }
    }
    found
}

fn touching_count(set: &SiteSet, x: Point2, r: f64, mode: GpMode, eps: f64) -> Vec<SiteId> {
    let tol = 1e3 * eps;
    let mut ids = Vec::new();
    let mut elems: Vec<(Option<Point2>, SiteId)> = Vec::new();
    for s in &set.sites {
        if (distance(x, s, Metric::Euclidean) - r).abs() > tol {
            continue;
        }
        ids.push(s.id);
        let q = nearest_point(x, s, Metric::Euclidean);
        let at_end = s.endpoints().into_iter().find(|e| e.dist(q) <= tol);
        match at_end {
            Some(e) if elems.iter().any(|(p, _)| p.is_some_and(|p| p.dist(e) <= tol)) => {}
            Some(e) => elems.push((Some(e), s.id)),
            None => elems.push((None, s.id)),
        }
    }
    match mode {
        GpMode::Strict => ids,
        GpMode::Weak => {
            if elems.len() >= 4 {
                ids
            } else {
                Vec::new()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(id: usize, ax: f64, ay: f64, bx: f64, by: f64) -> SegmentSite {
        SegmentSite::new(id, Point2::new(ax, ay), Point2::new(bx, by))
    }

    #[test]
    fn euclidean_distance_examples() {
        let o = Point2::new(0.0, 0.0);
        assert_eq!(distance(o, &seg(0, 2.0, 0.0, 3.0, 0.0), Metric::Euclidean), 2.0);
        let x = Point2::new(1.0, 1.0);
        assert_eq!(distance(x, &seg(0, 0.0, 0.0, 2.0, 0.0), Metric::Euclidean), 1.0);
        assert_eq!(nearest_point(x, &seg(0, 0.0, 0.0, 2.0, 0.0), Metric::Euclidean), Point2::new(1.0, 0.0));
        let far = Point2::new(5.0, 0.0);
        assert_eq!(nearest_point(far, &seg(0, 0.0, 0.0, 2.0, 0.0), Metric::Euclidean), Point2::new(2.0, 0.0));
    }

    #[test]
    fn linf_distance_matches_dense_sampling() {
        // Frozen from sampling max(|1+t|, |2-t|) over t in [0,1]: minimum 1.5 at t = 0.5.
        let s = seg(0, 1.0, 2.0, 2.0, 1.0);
        let d = distance(Point2::new(0.0, 0.0), &s, Metric::Linf);
        assert!((d - 1.5).abs() < 1e-12);
        assert_eq!(nearest_point(Point2::new(0.0, 0.0), &s, Metric::Linf), Point2::new(1.5, 1.5));
    }

    #[test]
    fn linf_tie_rule_takes_midpoint() {
        // Above a horizontal segment every point within the dy-wide window is nearest.
        let s = seg(0, 0.0, 0.0, 10.0, 0.0);
        let q = nearest_point(Point2::new(5.0, 2.0), &s, Metric::Linf);
        assert!((q.x - 5.0).abs() < 1e-12 && q.y == 0.0);
        let q = nearest_point(Point2::new(1.0, 2.0), &s, Metric::Linf);
        assert!((q.x - 1.5).abs() < 1e-12);
    }

    #[test]
    fn l1_via_rotation_agrees_with_direct_sum() {
        let s = seg(0, 1.0, 2.0, 3.0, -1.0);
        let x = Point2::new(-0.5, 0.25);
        let mut best = f64::INFINITY;
        for i in 0..=100_000 {
            let q = s.point_at(i as f64 / 100_000.0);
            best = best.min(Metric::L1.point_distance(x, q));
        }
        let d = distance(x, &s, Metric::L1);
        assert!(d <= best + 1e-12 && best - d < 1e-4, "{d} {best}");
    }

    #[test]
    fn lp_distance_is_between_linf_and_l1() {
        let s = seg(0, 1.0, 2.0, 3.0, -1.0);
        let x = Point2::new(-0.5, 0.25);
        let d3 = distance(x, &s, Metric::Lp { p: 3.0 });
        assert!(distance(x, &s, Metric::Linf) <= d3 + 1e-12);
        assert!(d3 <= distance(x, &s, Metric::L1) + 1e-12);
    }

    #[test]
    fn classify_pair_examples() {
        assert_eq!(classify_pair(&seg(0, 0.0, 0.0, 1.0, 0.0), &seg(1, 0.0, 1.0, 1.0, 1.0)), PairClass::Disjoint);
        assert_eq!(
            classify_pair(&seg(0, 0.0, 0.0, 1.0, 1.0), &seg(1, 0.0, 1.0, 1.0, 0.0)),
            PairClass::ProperCrossing(Point2::new(0.5, 0.5))
        );
        assert_eq!(
            classify_pair(&seg(0, 0.0, 0.0, 1.0, 0.0), &seg(1, 0.0, 0.0, 0.0, 1.0)),
            PairClass::SharedEndpoint(Point2::new(0.0, 0.0))
        );
        assert_eq!(classify_pair(&seg(0, 0.0, 0.0, 2.0, 0.0), &seg(1, 1.0, 0.0, 3.0, 0.0)), PairClass::Overlap);
        assert_eq!(
            classify_pair(&seg(0, 0.0, 0.0, 2.0, 0.0), &seg(1, 1.0, 0.0, 1.0, 3.0)),
            PairClass::Touching(Point2::new(1.0, 0.0))
        );
    }

    #[test]
    fn count_grid_crossings() {
        let mut segs = Vec::new();
        for i in 0..3 {
            let y = i as f64 + 0.1 * i as f64;
            segs.push((Point2::new(-1.0, y), Point2::new(10.0, y + 0.05)));
        }
        for j in 0..4 {
            let x = 2.0 * j as f64 + 0.3;
            segs.push((Point2::new(x, -2.0), Point2::new(x + 0.07, 6.0)));
        }
        let set = SiteSet::new(SharingMode::Crossing, segs).unwrap();
        assert_eq!(count_intersections(&set).unwrap(), 12);
        let parallel: Vec<_> = (0..5)
            .map(|i| (Point2::new(0.0, i as f64), Point2::new(3.0, i as f64)))
            .collect();
        let set = SiteSet::new(SharingMode::Disjoint, parallel).unwrap();
        assert_eq!(count_intersections(&set).unwrap(), 0);
    }

    #[test]
    fn modes_reject_forbidden_contacts() {
        let star = vec![
            (Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)),
            (Point2::new(0.0, 0.0), Point2::new(0.0, 1.0)),
        ];
        assert!(SiteSet::new(SharingMode::Disjoint, star.clone()).is_err());
        assert!(SiteSet::new(SharingMode::Pslg, star).is_ok());
        let cross = vec![
            (Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)),
            (Point2::new(0.0, 1.0), Point2::new(1.0, 0.0)),
        ];
        assert!(SiteSet::new(SharingMode::Disjoint, cross.clone()).is_err());
        assert!(SiteSet::new(SharingMode::Crossing, cross).is_ok());
    }

    #[test]
    fn square_sides_are_cocircular() {
        let segs = vec![
            (Point2::new(0.5, 0.0), Point2::new(1.5, 0.0)),
            (Point2::new(2.0, 0.5), Point2::new(2.0, 1.5)),
            (Point2::new(1.5, 2.0), Point2::new(0.5, 2.0)),
            (Point2::new(0.0, 1.5), Point2::new(0.0, 0.5)),
        ];
        let set = SiteSet::new(SharingMode::Disjoint, segs).unwrap();
        let report = check_general_position(&set, GpMode::Strict);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, GpViolation::Cocircular { sites, .. } if sites.len() == 4)));
    }

    #[test]
    fn star_violates_strict_but_not_weak() {
        let p = Point2::new(0.0, 0.0);
        let segs = vec![
            (p, Point2::new(2.0, 0.3)),
            (p, Point2::new(-0.4, 1.7)),
            (p, Point2::new(-1.1, -1.6)),
        ];
        let set = SiteSet::new(SharingMode::Pslg, segs).unwrap();
        assert!(!check_general_position(&set, GpMode::Strict).ok());
        let weak = check_general_position(&set, GpMode::Weak);
        assert!(weak.ok(), "{:?}", weak.violations);
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("linf".parse::<Metric>().unwrap(), Metric::Linf);
        assert_eq!("lp:2".parse::<Metric>().unwrap(), Metric::Euclidean);
        assert_eq!("lp:3".parse::<Metric>().unwrap(), Metric::Lp { p: 3.0 });
        assert!("lp:0.5".parse::<Metric>().is_err());
        assert!("cosine".parse::<Metric>().is_err());
    }
}
