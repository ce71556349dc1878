//! Bisectors of two sites as ordered pieces (lines, rays, parabolic arcs),
//! built from the piecewise-simple distance functions of the sites.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{distance, l1_to_linf, linf_to_l1, Metric, Point2, SegmentSite, SiteId, ElementaryKind};
use crate::poly::{quadratic, Poly};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BisectorError {
    #[error("metric {0} supports point queries only")]
    UnsupportedMetric(Metric),
    #[error("sites {0} and {1} overlap")]
    Overlap(SiteId, SiteId),
    #[error("curves overlap along a common arc near {0}")]
    DegenerateContact(Point2),
}

/// Closed halfplane `n . x + c >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub n: Point2,
    pub c: f64,
}

impl HalfPlane {
    pub fn eval(&self, x: Point2) -> f64 {
        self.n.dot(x) + self.c
    }
}

/// A distance expression valid on one cell: `|x - p|` or `n . x + c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum Form {
    Point { p: Point2 },
    Linear { n: Point2, c: f64 },
}

impl Form {
    pub fn eval(&self, x: Point2) -> f64 {
        match *self {
            Form::Point { p } => x.dist(p),
            Form::Linear { n, c } => n.dot(x) + c,
        }
    }
}

/// Convex region on which a site's distance equals `form`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub bounds: Vec<HalfPlane>,
    pub form: Form,
    pub elem: ElementaryKind,
}

impl Cell {
    pub fn contains(&self, x: Point2, tol: f64) -> bool {
        self.bounds.iter().all(|h| h.eval(x) >= -tol)
    }
}

fn hp(n: Point2, c: f64) -> HalfPlane {
    HalfPlane { n, c }
}

/// Cells of the distance function of `s`; `m` must be Euclidean or L-infinity
/// (L1 is handled in the rotated frame).
pub fn distance_cells(s: &SegmentSite, m: Metric) -> Vec<Cell> {
    match m {
        Metric::Linf => linf_cells(s),
        _ => euclid_cells(s),
    }
}

fn euclid_cells(s: &SegmentSite) -> Vec<Cell> {
    if s.is_point() {
        return vec![Cell { bounds: vec![], form: Form::Point { p: s.a }, elem: ElementaryKind::EndpointA }];
    }
    let u = (s.b - s.a).unit();
    let n = u.perp();
    let past_a = hp(-u, u.dot(s.a));
    let before_b = hp(-u, u.dot(s.b));
    let after_a = hp(u, -u.dot(s.a));
    let past_b = hp(u, -u.dot(s.b));
    vec![
        Cell { bounds: vec![past_a], form: Form::Point { p: s.a }, elem: ElementaryKind::EndpointA },
        Cell { bounds: vec![past_b], form: Form::Point { p: s.b }, elem: ElementaryKind::EndpointB },
        Cell {
            bounds: vec![after_a, before_b, hp(n, -n.dot(s.a))],
            form: Form::Linear { n, c: -n.dot(s.a) },
            elem: ElementaryKind::Interior,
        },
        Cell {
            bounds: vec![after_a, before_b, hp(-n, n.dot(s.a))],
            form: Form::Linear { n: -n, c: n.dot(s.a) },
            elem: ElementaryKind::Interior,
        },
    ]
}

/// The four cones around `p` on which the L-infinity distance to `p` is linear.
fn linf_point_cones(p: Point2, extra: &[HalfPlane], elem: ElementaryKind) -> Vec<Cell> {
    let dirs = [Point2::new(1.0, 0.0), Point2::new(0.0, 1.0), Point2::new(-1.0, 0.0), Point2::new(0.0, -1.0)];
    dirs.iter()
        .map(|&e| {
            // Cone {e.(x-p) >= |e_perp.(x-p)|}.
            let f = e.perp();
            let mut bounds = vec![hp(e - f, -(e - f).dot(p)), hp(e + f, -(e + f).dot(p))];
            bounds.extend_from_slice(extra);
            Cell { bounds, form: Form::Linear { n: e, c: -e.dot(p) }, elem }
        })
        .collect()
}

fn linf_cells(s: &SegmentSite) -> Vec<Cell> {
    if s.is_point() {
        return linf_point_cones(s.a, &[], ElementaryKind::EndpointA);
    }
    let d = s.b - s.a;
    if d.x == 0.0 || d.y == 0.0 {
        return linf_axis_cells(s);
    }
    // Supporting line a x + b y + c = 0 with normal (a, b); L-infinity
    // projection onto it moves along w = (sgn a, sgn b).
    let nrm = d.perp();
    let c0 = -nrm.dot(s.a);
    let scale = nrm.x.abs() + nrm.y.abs();
    let w = Point2::new(nrm.x.signum(), nrm.y.signum());
    let dw = d.dot(w);
    // g(x) = (x - a - lambda(x) w) . d, lambda = (nrm.x + c0) / scale.
    let gm = d - nrm * (dw / scale);
    let g_a = -s.a.dot(d) - dw * c0 / scale;
    let g_b = g_a - d.norm2();
    let in_a = hp(-gm, -g_a);
    let in_b = hp(gm, g_b);
    let mut cells = linf_point_cones(s.a, &[in_a], ElementaryKind::EndpointA);
    cells.extend(linf_point_cones(s.b, &[in_b], ElementaryKind::EndpointB));
    let slab = [hp(gm, g_a), hp(-gm, -g_b)];
    let ln = nrm * (1.0 / scale);
    let lc = c0 / scale;
    for sign in [1.0, -1.0] {
        let mut bounds = slab.to_vec();
        bounds.push(hp(ln * sign, lc * sign));
        cells.push(Cell { bounds, form: Form::Linear { n: ln * sign, c: lc * sign }, elem: ElementaryKind::Interior });
    }
    cells
}

fn linf_axis_cells(s: &SegmentSite) -> Vec<Cell> {
    // Work in a frame where the segment is horizontal with a.x < b.x.
    let horizontal = s.a.y == s.b.y;
    let sw = |p: Point2| if horizontal { p } else { Point2::new(p.y, p.x) };
    let (mut a, mut b) = (sw(s.a), sw(s.b));
    let (mut ea, mut eb) = (ElementaryKind::EndpointA, ElementaryKind::EndpointB);
    if a.x > b.x {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut ea, &mut eb);
    }
    let (x0, x1, y0) = (a.x, b.x, a.y);
    let v = |x: f64, y: f64| sw(Point2::new(x, y));
    let mk = |raw: &[(f64, f64, f64)]| -> Vec<HalfPlane> {
        raw.iter().map(|&(nx, ny, c)| hp(v(nx, ny), c)).collect()
    };
    vec![
        // Above: y - y0 >= x0 - x, y - y0 >= x - x1, y >= y0.
        Cell {
            bounds: mk(&[(1.0, 1.0, -x0 - y0), (-1.0, 1.0, x1 - y0), (0.0, 1.0, -y0)]),
            form: Form::Linear { n: v(0.0, 1.0), c: -y0 },
            elem: ElementaryKind::Interior,
        },
        Cell {
            bounds: mk(&[(1.0, -1.0, -x0 + y0), (-1.0, -1.0, x1 + y0), (0.0, -1.0, y0)]),
            form: Form::Linear { n: v(0.0, -1.0), c: y0 },
            elem: ElementaryKind::Interior,
        },
        // Left of a: x0 - x >= |y - y0|.
        Cell {
            bounds: mk(&[(-1.0, -1.0, x0 + y0), (-1.0, 1.0, x0 - y0)]),
            form: Form::Linear { n: v(-1.0, 0.0), c: x0 },
            elem: ea,
        },
        Cell {
            bounds: mk(&[(1.0, -1.0, -x1 + y0), (1.0, 1.0, -x1 - y0)]),
            form: Form::Linear { n: v(1.0, 0.0), c: -x1 },
            elem: eb,
        },
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "curve", rename_all = "kebab-case")]
pub enum Curve {
    /// `p + t d`.
    Line { p: Point2, d: Point2 },
    /// Points equidistant from `focus` and the directrix through `foot` with
    /// unit direction `u`; `n` is the unit normal toward the focus and `h`
    /// the focus height. `x(t) = foot + t u + (t^2 + h^2) / (2h) n`.
    Parabola { focus: Point2, foot: Point2, u: Point2, n: Point2, h: f64 },
}

impl Curve {
    /// Coefficient vectors of `x(t) = c0 + c1 t + c2 t^2`.
    pub fn coeffs(&self) -> [Point2; 3] {
        match *self {
            Curve::Line { p, d } => [p, d, Point2::default()],
            Curve::Parabola { foot, u, n, h, .. } => [foot + n * (0.5 * h), u, n * (0.5 / h)],
        }
    }

    pub fn point(&self, t: f64) -> Point2 {
        let [c0, c1, c2] = self.coeffs();
        c0 + c1 * t + c2 * (t * t)
    }

    pub fn tangent(&self, t: f64) -> Point2 {
        let [_, c1, c2] = self.coeffs();
        c1 + c2 * (2.0 * t)
    }

    pub fn xy_polys(&self) -> (Poly, Poly) {
        let [c0, c1, c2] = self.coeffs();
        (Poly(vec![c0.x, c1.x, c2.x]), Poly(vec![c0.y, c1.y, c2.y]))
    }

    /// Parameter of the point of the curve nearest to `x` (exact for points
    /// on the curve).
    pub fn param_of(&self, x: Point2) -> f64 {
        match *self {
            Curve::Line { p, d } => (x - p).dot(d) / d.norm2(),
            Curve::Parabola { foot, u, .. } => (x - foot).dot(u),
        }
    }

    /// Implicit polynomial whose zero set contains the curve, evaluated along
    /// another curve.
    pub fn implicit_along(&self, other: &Curve) -> Poly {
        let (px, py) = other.xy_polys();
        match *self {
            Curve::Line { p, d } => {
                let nn = d.perp();
                px.scale(nn.x).add(&py.scale(nn.y)).add(&Poly::constant(-nn.dot(p)))
            }
            Curve::Parabola { focus, foot, n, .. } => {
                let dx = px.add(&Poly::constant(-focus.x));
                let dy = py.add(&Poly::constant(-focus.y));
                let lin = px.scale(n.x).add(&py.scale(n.y)).add(&Poly::constant(-n.dot(foot)));
                dx.mul(&dx).add(&dy.mul(&dy)).sub(&lin.mul(&lin))
            }
        }
    }

    pub fn map_linear(&self, f: impl Fn(Point2) -> Point2) -> Curve {
        match *self {
            Curve::Line { p, d } => Curve::Line { p: f(p), d: f(d) },
            Curve::Parabola { .. } => panic!("parabolic curves are not mapped between frames"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PieceKind {
    LineSegment,
    Ray,
    FullLine,
    ParabolicArc,
}

/// A piece of a bisector over the parameter range `[t0, t1]`; a `None` bound
/// is infinite. Walking with increasing `t`, site `left` is closer on the
/// left side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePiece {
    pub curve: Curve,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub left: SiteId,
    pub right: SiteId,
    /// Distance expression of `left` (equivalently `right`) along the piece.
    pub form: Form,
}

impl CurvePiece {
    pub fn kind(&self) -> PieceKind {
        match (self.curve, self.t0, self.t1) {
            (Curve::Parabola { .. }, _, _) => PieceKind::ParabolicArc,
            (_, Some(_), Some(_)) => PieceKind::LineSegment,
            (_, None, None) => PieceKind::FullLine,
            _ => PieceKind::Ray,
        }
    }

    pub fn lo(&self) -> f64 {
        self.t0.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn hi(&self) -> f64 {
        self.t1.unwrap_or(f64::INFINITY)
    }

    pub fn start(&self) -> Option<Point2> {
        self.t0.map(|t| self.curve.point(t))
    }

    pub fn end(&self) -> Option<Point2> {
        self.t1.map(|t| self.curve.point(t))
    }

    /// A representative interior parameter.
    pub fn mid_param(&self, scale: f64) -> f64 {
        mid_of(self.t0, self.t1, scale)
    }

    pub fn contains_param(&self, t: f64, tol: f64) -> bool {
        t >= self.lo() - tol && t <= self.hi() + tol
    }

    /// Sub-piece over `[a, b]` within the current range.
    pub fn sub(&self, a: Option<f64>, b: Option<f64>) -> CurvePiece {
        CurvePiece { t0: a, t1: b, ..*self }
    }

    /// Sample points spread over the range; unbounded ends are sampled out to
    /// `reach` parameter units.
    pub fn samples(&self, count: usize, reach: f64) -> Vec<Point2> {
        let lo = self.t0.unwrap_or_else(|| self.t1.map_or(-reach, |b| b - reach));
        let hi = self.t1.unwrap_or_else(|| self.t0.map_or(reach, |a| a + reach));
        (0..count)
            .map(|i| {
                let s = (i as f64 + 0.5) / count as f64;
                self.curve.point(lo + (hi - lo) * s)
            })
            .collect()
    }

    /// Euclidean length of the bounded part, infinite for rays.
    pub fn length(&self) -> f64 {
        match (self.t0, self.t1) {
            (Some(a), Some(b)) => match self.curve {
                Curve::Line { d, .. } => (b - a).abs() * d.norm(),
                Curve::Parabola { .. } => {
                    let k = 16;
                    (0..k)
                        .map(|i| {
                            let s = a + (b - a) * i as f64 / k as f64;
                            let e = a + (b - a) * (i + 1) as f64 / k as f64;
                            self.curve.point(s).dist(self.curve.point(e))
                        })
                        .sum()
                }
            },
            _ => f64::INFINITY,
        }
    }
}

pub fn mid_of(t0: Option<f64>, t1: Option<f64>, scale: f64) -> f64 {
    match (t0, t1) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) => a + scale,
        (None, Some(b)) => b - scale,
        (None, None) => 0.0,
    }
}

type Interval = (f64, f64);

fn intersect_intervals(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    for &(a0, a1) in a {
        for &(b0, b1) in b {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo <= hi {
                out.push((lo, hi));
            }
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

/// Parameter set on which `curve` satisfies `h`.
fn halfplane_params(curve: &Curve, h: &HalfPlane) -> Vec<Interval> {
    let [c0, c1, c2] = curve.coeffs();
    let (qa, qb, qc) = (h.n.dot(c2), h.n.dot(c1), h.eval(c0));
    let all = vec![(f64::NEG_INFINITY, f64::INFINITY)];
    // Directions nearly parallel to the boundary count as parallel; rounding
    // otherwise produces spurious roots far along the curve.
    let hn = h.n.norm();
    if qa.abs() <= 1e-12 * hn * c2.norm() {
        if qb.abs() <= 1e-12 * hn * c1.norm() {
            return if qc >= 0.0 { all } else { Vec::new() };
        }
        let r = -qc / qb;
        return if qb > 0.0 { vec![(r, f64::INFINITY)] } else { vec![(f64::NEG_INFINITY, r)] };
    }
    let roots = quadratic(qa, qb, qc);
    match (roots.len(), qa > 0.0) {
        (2, true) => vec![(f64::NEG_INFINITY, roots[0]), (roots[1], f64::INFINITY)],
        (2, false) => vec![(roots[0], roots[1])],
        (_, true) => all,
        (_, false) => Vec::new(),
    }
}

/// Parameter intervals on which `curve` lies in the cell.
pub fn clip_to_cell(curve: &Curve, cell: &Cell, within: &[Interval]) -> Vec<Interval> {
    let mut cur = within.to_vec();
    for h in &cell.bounds {
        cur = intersect_intervals(&cur, &halfplane_params(curve, h));
        if cur.is_empty() {
            break;
        }
    }
    cur
}

fn to_opt(lo: f64, hi: f64) -> (Option<f64>, Option<f64>) {
    (lo.is_finite().then_some(lo), hi.is_finite().then_some(hi))
}

/// Solves `f1 = f2` for one pair of forms. The returned curve is oriented so
/// that the first form is smaller on its left.
fn solve_forms(f1: &Form, f2: &Form, eps: f64) -> Option<Curve> {
    let line_from_gradient = |g: Point2, g0: f64| -> Option<Curve> {
        // Zero set of g . x + g0 with positive side on the left.
        let gn = g.norm();
        if gn <= 1e-12 {
            return None;
        }
        let p = g * (-g0 / (gn * gn));
        let d = Point2::new(g.y, -g.x) * (1.0 / gn);
        Some(Curve::Line { p, d })
    };
    match (*f1, *f2) {
        (Form::Linear { n: n1, c: c1 }, Form::Linear { n: n2, c: c2 }) => {
            line_from_gradient(n2 - n1, c2 - c1)
        }
        (Form::Point { p }, Form::Point { p: q }) => {
            if p.dist(q) <= eps {
                return None;
            }
            line_from_gradient((p - q) * 2.0, q.norm2() - p.norm2())
        }
        (Form::Point { p }, Form::Linear { n, c }) => parabola(p, n, c, true, eps),
        (Form::Linear { n, c }, Form::Point { p }) => parabola(p, n, c, false, eps),
    }
}

fn parabola(focus: Point2, n: Point2, c: f64, focus_left: bool, eps: f64) -> Option<Curve> {
    let h = n.dot(focus) + c;
    if h <= eps {
        return None;
    }
    let foot = focus - n * h;
    let u = if focus_left { Point2::new(n.y, -n.x) } else { Point2::new(-n.y, n.x) };
    Some(Curve::Parabola { focus, foot, u, n, h })
}

/// Bisector pieces of two sites for Euclidean, L1 and L-infinity metrics.
/// Pieces are oriented with `s1` closer on the left. Portions where the two
/// distance functions coincide on an open set are not materialized.
pub fn bisector_pieces(s1: &SegmentSite, s2: &SegmentSite, m: Metric, eps: f64) -> Result<Vec<CurvePiece>, BisectorError> {
    match m {
        Metric::Euclidean | Metric::Linf => Ok(raw_pieces(s1, s2, m, eps)),
        Metric::Lp { p: 2.0 } => Ok(raw_pieces(s1, s2, Metric::Euclidean, eps)),
        Metric::L1 => {
            let t1 = SegmentSite::new(s1.id, l1_to_linf(s1.a), l1_to_linf(s1.b));
            let t2 = SegmentSite::new(s2.id, l1_to_linf(s2.a), l1_to_linf(s2.b));
            Ok(raw_pieces(&t1, &t2, Metric::Linf, 2.0 * eps).into_iter().map(|pc| piece_from_linf(&pc)).collect())
        }
        Metric::Lp { .. } => Err(BisectorError::UnsupportedMetric(m)),
    }
}

/// Maps a piece computed in the rotated L-infinity frame back to the L1 frame.
pub fn piece_from_linf(pc: &CurvePiece) -> CurvePiece {
    let form = match pc.form {
        Form::Linear { n, c } => Form::Linear { n: Point2::new(n.x - n.y, n.x + n.y), c },
        f => f,
    };
    CurvePiece { curve: pc.curve.map_linear(linf_to_l1), form, ..*pc }
}

pub(crate) fn raw_pieces(s1: &SegmentSite, s2: &SegmentSite, m: Metric, eps: f64) -> Vec<CurvePiece> {
    raw_pieces_with_forms(s1, s2, m, eps).into_iter().map(|(p, _)| p).collect()
}

/// Like `raw_pieces`, also returning the distance form of `s2` on each piece.
pub(crate) fn raw_pieces_with_forms(s1: &SegmentSite, s2: &SegmentSite, m: Metric, eps: f64) -> Vec<(CurvePiece, Form)> {
    let c1 = distance_cells(s1, m);
    let c2 = distance_cells(s2, m);
    let all = [(f64::NEG_INFINITY, f64::INFINITY)];
    let mut out = Vec::new();
    for a in &c1 {
        for b in &c2 {
            let Some(curve) = solve_forms(&a.form, &b.form, eps) else { continue };
            let ivs = clip_to_cell(&curve, a, &all);
            let ivs = ivs.iter().flat_map(|iv| clip_to_cell(&curve, b, &[*iv])).collect::<Vec<_>>();
            for (lo, hi) in ivs {
                let (t0, t1) = to_opt(lo, hi);
                let piece = CurvePiece { curve, t0, t1, left: s1.id, right: s2.id, form: a.form };
                if piece.length() > 10.0 * eps {
                    out.push((piece, b.form));
                }
            }
        }
    }
    out
}

/// The bisector as pieces grouped into chains joined end to end. Disjoint
/// sites give one chain; a crossing pair gives two chains through the
/// crossing point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectorCurve {
    pub s1: SiteId,
    pub s2: SiteId,
    pub chains: Vec<Vec<CurvePiece>>,
}

impl BisectorCurve {
    pub fn pieces(&self) -> impl Iterator<Item = &CurvePiece> {
        self.chains.iter().flatten()
    }
}

pub fn bisector(s1: &SegmentSite, s2: &SegmentSite, m: Metric) -> Result<BisectorCurve, BisectorError> {
    let scale = [s1.a, s1.b, s2.a, s2.b]
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs()])
        .fold(1.0f64, f64::max);
    let eps = crate::kernel::EPS_REL * scale;
    if let crate::kernel::PairClass::Overlap = crate::kernel::classify_pair(s1, s2) {
        return Err(BisectorError::Overlap(s1.id, s2.id));
    }
    let pieces = bisector_pieces(s1, s2, m, eps)?;
    Ok(BisectorCurve { s1: s1.id, s2: s2.id, chains: chain_pieces(pieces, 1e3 * eps) })
}

fn chain_pieces(mut pieces: Vec<CurvePiece>, tol: f64) -> Vec<Vec<CurvePiece>> {
    let mut chains: Vec<Vec<CurvePiece>> = Vec::new();
    let near = |a: Option<Point2>, b: Option<Point2>| match (a, b) {
        (Some(a), Some(b)) => a.dist(b) <= tol,
        _ => false,
    };
    while let Some(first) = pieces.pop() {
        let mut chain = vec![first];
        loop {
            let tail = chain.last().and_then(|p| p.end());
            match pieces.iter().position(|p| near(p.start(), tail)) {
                Some(i) => chain.push(pieces.swap_remove(i)),
                None => break,
            }
        }
        loop {
            let head = chain[0].start();
            match pieces.iter().position(|p| near(p.end(), head)) {
                Some(i) => chain.insert(0, pieces.swap_remove(i)),
                None => break,
            }
        }
        chains.push(chain);
    }
    chains.sort_by(|a, b| a[0].lo().total_cmp(&b[0].lo()));
    chains
}

/// Sign of `d(x,s2) - d(x,s1)` snapped to zero within `eps`: +1 means `x` is
/// strictly closer to `s1`.
pub fn side_of_eps(x: Point2, s1: &SegmentSite, s2: &SegmentSite, m: Metric, eps: f64) -> i8 {
    let diff = distance(x, s2, m) - distance(x, s1, m);
    if diff > eps {
        1
    } else if diff < -eps {
        -1
    } else {
        0
    }
}

pub fn side_of(x: Point2, s1: &SegmentSite, s2: &SegmentSite, m: Metric) -> i8 {
    let pts = [s1.a, s1.b, s2.a, s2.b];
    let mut diam: f64 = 0.0;
    for p in pts {
        for q in pts {
            diam = diam.max(p.dist(q));
        }
    }
    side_of_eps(x, s1, s2, m, crate::kernel::EPS_REL * diam.max(1.0))
}

/// Transversal intersection points of two pieces.
pub fn piece_intersections(p: &CurvePiece, q: &CurvePiece, eps: f64) -> Result<Vec<Point2>, BisectorError> {
    let g = q.curve.implicit_along(&p.curve);
    let scale = g.max_abs().max(1e-300);
    if g.is_negligible(scale.max(1.0)) {
        let probe = p.curve.point(p.mid_param(1.0));
        let tq = q.curve.param_of(probe);
        if q.contains_param(tq, 0.0) && p.contains_param(p.curve.param_of(q.curve.point(tq)), 0.0) {
            return Err(BisectorError::DegenerateContact(probe));
        }
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for t in crate::poly::real_roots(&g, p.lo(), p.hi()) {
        let x = p.curve.point(t);
        let tq = q.curve.param_of(x);
        let tol = param_tol(&q.curve, tq, eps);
        if q.contains_param(tq, tol) && q.curve.point(tq).dist(x) <= 1e3 * eps.max(1e-12 * x.norm()) {
            out.push(x);
        }
    }
    Ok(out)
}

fn param_tol(c: &Curve, t: f64, eps: f64) -> f64 {
    let speed = c.tangent(t).norm();
    if speed > 0.0 {
        10.0 * eps / speed
    } else {
        10.0 * eps
    }
}

/// Intersection points of two bisector curves, deduplicated.
pub fn curve_intersections(c1: &BisectorCurve, c2: &BisectorCurve, eps: f64) -> Result<Vec<Point2>, BisectorError> {
    let mut out: Vec<Point2> = Vec::new();
    for p in c1.pieces() {
        for q in c2.pieces() {
            for x in piece_intersections(p, q, eps)? {
                if !out.iter().any(|y| y.dist(x) <= 1e3 * eps) {
                    out.push(x);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(id: usize, ax: f64, ay: f64, bx: f64, by: f64) -> SegmentSite {
        SegmentSite::new(id, Point2::new(ax, ay), Point2::new(bx, by))
    }

    fn max_residual(c: &BisectorCurve, s1: &SegmentSite, s2: &SegmentSite, m: Metric) -> f64 {
        c.pieces()
            .flat_map(|p| p.samples(50, 20.0))
            .map(|x| (distance(x, s1, m) - distance(x, s2, m)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn two_points_give_the_perpendicular_line() {
        let (a, b) = (seg(0, -1.0, 0.0, -1.0, 0.0), seg(1, 1.0, 0.0, 1.0, 0.0));
        let c = bisector(&a, &b, Metric::Euclidean).unwrap();
        assert_eq!(c.chains.len(), 1);
        assert_eq!(c.chains[0].len(), 1);
        let p = c.chains[0][0];
        assert_eq!(p.kind(), PieceKind::FullLine);
        for x in p.samples(10, 5.0) {
            assert!(x.x.abs() < 1e-12);
        }
        // Site 0 lies on the left.
        let probe = p.curve.point(0.0) + p.curve.tangent(0.0).perp();
        assert!(probe.x < 0.0);
    }

    #[test]
    fn mirror_segments_bisector_is_axis() {
        let (a, b) = (seg(0, 0.0, 1.0, 2.0, 1.0), seg(1, 0.0, -1.0, 2.0, -1.0));
        let c = bisector(&a, &b, Metric::Euclidean).unwrap();
        assert_eq!(c.chains.len(), 1);
        for x in c.pieces().flat_map(|p| p.samples(20, 50.0)) {
            assert!(x.y.abs() < 1e-9, "{x}");
        }
    }

    #[test]
    fn segment_and_point_contain_the_expected_parabola() {
        // Frozen from sampling d(x,s1) = d(x,s2): y = (x^2 + 4) / 4 over x in [0, 2].
        let (a, b) = (seg(0, 0.0, 0.0, 2.0, 0.0), seg(1, 0.0, 2.0, 0.0, 2.0));
        let c = bisector(&a, &b, Metric::Euclidean).unwrap();
        let arc = c.pieces().find(|p| p.kind() == PieceKind::ParabolicArc).expect("parabolic arc");
        for x in arc.samples(20, 1.0) {
            assert!((x.y - (x.x * x.x + 4.0) / 4.0).abs() < 1e-12);
            assert!(x.x >= -1e-12 && x.x <= 2.0 + 1e-12);
        }
        let (lo, hi) = (arc.start().unwrap(), arc.end().unwrap());
        assert!((lo.x.min(hi.x)).abs() < 1e-12 && (lo.x.max(hi.x) - 2.0).abs() < 1e-12);
        assert!(c.pieces().count() <= 7);
        assert!(max_residual(&c, &a, &b, Metric::Euclidean) < 1e-9);
    }

    #[test]
    fn linf_bisector_is_piecewise_linear_and_equidistant() {
        let (a, b) = (seg(0, 0.0, 0.0, 2.0, 1.3), seg(1, 3.1, 4.2, 5.0, 2.9));
        for m in [Metric::Linf, Metric::L1] {
            let c = bisector(&a, &b, m).unwrap();
            assert!(c.pieces().all(|p| matches!(p.curve, Curve::Line { .. })));
            assert!(max_residual(&c, &a, &b, m) < 1e-9, "{m}");
        }
    }

    #[test]
    fn crossing_pair_gives_two_chains() {
        let (a, b) = (seg(0, 0.0, 0.0, 2.0, 2.1), seg(1, 0.1, 2.0, 2.2, -0.1));
        let c = bisector(&a, &b, Metric::Euclidean).unwrap();
        assert_eq!(c.chains.len(), 2);
        assert!(max_residual(&c, &a, &b, Metric::Euclidean) < 1e-9);
    }

    #[test]
    fn general_lp_is_query_only() {
        let (a, b) = (seg(0, 0.0, 0.0, 1.0, 0.0), seg(1, 0.0, 2.0, 1.0, 2.0));
        assert!(matches!(bisector(&a, &b, Metric::Lp { p: 3.0 }), Err(BisectorError::UnsupportedMetric(_))));
        assert_eq!(side_of(Point2::new(0.5, 0.5), &a, &b, Metric::Lp { p: 3.0 }), 1);
    }

    #[test]
    fn side_of_examples() {
        let p = seg(0, 0.0, 2.0, 0.0, 2.0);
        let s = seg(1, 0.0, 0.0, 2.0, 0.0);
        assert_eq!(side_of(Point2::new(0.0, 3.0), &p, &s, Metric::Euclidean), 1);
        assert_eq!(side_of(Point2::new(0.0, 3.0), &s, &p, Metric::Euclidean), -1);
        let (a, b) = (seg(0, 0.0, 1.0, 2.0, 1.0), seg(1, 0.0, -1.0, 2.0, -1.0));
        assert_eq!(side_of(Point2::new(7.0, 0.0), &a, &b, Metric::Euclidean), 0);
    }

    #[test]
    fn circumcenter_from_three_point_bisectors() {
        let pts = [seg(0, 0.0, 0.0, 0.0, 0.0), seg(1, 4.0, 0.0, 4.0, 0.0), seg(2, 1.0, 3.0, 1.0, 3.0)];
        let b01 = bisector(&pts[0], &pts[1], Metric::Euclidean).unwrap();
        let b02 = bisector(&pts[0], &pts[2], Metric::Euclidean).unwrap();
        let b12 = bisector(&pts[1], &pts[2], Metric::Euclidean).unwrap();
        let x = curve_intersections(&b01, &b02, 1e-9).unwrap();
        let y = curve_intersections(&b01, &b12, 1e-9).unwrap();
        assert_eq!(x.len(), 1);
        assert!(x[0].dist(y[0]) < 1e-9);
        // Circumcenter of (0,0), (4,0), (1,3) is (2,1).
        assert!(x[0].dist(Point2::new(2.0, 1.0)) < 1e-9);
    }

    #[test]
    fn parallel_bisectors_do_not_meet() {
        let s: Vec<_> = (0..3).map(|i| seg(i, 0.0, 2.0 * i as f64, 0.0, 2.0 * i as f64)).collect();
        let b01 = bisector(&s[0], &s[1], Metric::Euclidean).unwrap();
        let b12 = bisector(&s[1], &s[2], Metric::Euclidean).unwrap();
        assert!(curve_intersections(&b01, &b12, 1e-9).unwrap().is_empty());
    }
}
