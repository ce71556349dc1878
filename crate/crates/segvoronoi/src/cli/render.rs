//! SVG drawing of a single level.

use std::f64::consts::PI;
use std::fmt::Write;

use crate::bisector::{Curve, CurvePiece};
use crate::kernel::{Point2, SiteSet};
use crate::subdivision::{HalfEdgeId, LabelKind, PlanarSubdivision};

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOptions {
    /// Width of the image in pixels; the height follows the aspect ratio.
    pub width: u32,
    pub draw_vertices: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { width: 800, draw_vertices: true }
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Line(Point2),
    Quad(Point2, Point2),
}

struct Frame {
    lo: Point2,
    hi: Point2,
    px: f64,
    center: Point2,
    far: f64,
}

impl Frame {
    fn new(lo: Point2, hi: Point2, width: u32) -> Frame {
        let span = (hi - lo).norm().max(1e-12);
        Frame { lo, hi, px: width as f64 / (hi.x - lo.x).max(1e-12), center: (lo + hi) * 0.5, far: 50.0 * span }
    }

    fn height(&self) -> f64 {
        (self.hi.y - self.lo.y) * self.px
    }

    fn map(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.lo.x) * self.px, (self.hi.y - p.y) * self.px)
    }

    fn pt(&self, p: Point2) -> String {
        let (x, y) = self.map(p);
        format!("{x:.3},{y:.3}")
    }

    /// Parameter past which the curve leaves the disk of radius `far`.
    fn far_param(&self, c: &Curve, from: f64, sign: f64) -> f64 {
        let mut s = 1.0;
        for _ in 0..200 {
            if c.point(from + sign * s).dist(self.center) >= self.far {
                break;
            }
            s *= 2.0;
        }
        from + sign * s
    }

    fn bounds(&self, p: &CurvePiece) -> (f64, f64) {
        let mid = p.mid_param(1.0);
        let lo = p.t0.unwrap_or_else(|| self.far_param(&p.curve, p.t1.unwrap_or(mid), -1.0));
        let hi = p.t1.unwrap_or_else(|| self.far_param(&p.curve, p.t0.unwrap_or(mid), 1.0));
        (lo, hi)
    }
}

fn curve_ops(c: &Curve, a: f64, b: f64) -> Op {
    match c {
        Curve::Line { .. } => Op::Line(c.point(b)),
        // A parabola arc is exactly a quadratic Bezier curve.
        Curve::Parabola { .. } => Op::Quad(c.point(a) + c.tangent(a) * (0.5 * (b - a)), c.point(b)),
    }
}

/// Start point and drawing ops along half-edge `h` of an edge.
fn half_edge_ops(d: &PlanarSubdivision, h: HalfEdgeId, fr: &Frame) -> (Point2, Vec<Op>) {
    let e = d.half_edges[h].edge.expect("edge half-edge");
    let edge = &d.edges[e];
    let along = edge.half_edge == h;
    let mut runs: Vec<(Curve, f64, f64)> = edge
        .segs
        .iter()
        .map(|s| {
            let (lo, hi) = fr.bounds(&s.piece);
            if s.forward == along {
                (s.piece.curve, lo, hi)
            } else {
                (s.piece.curve, hi, lo)
            }
        })
        .collect();
    if !along {
        runs.reverse();
    }
    let start = runs[0].0.point(runs[0].1);
    (start, runs.iter().map(|(c, a, b)| curve_ops(c, *a, *b)).collect())
}

fn push_ops(out: &mut String, fr: &Frame, ops: &[Op]) {
    for op in ops {
        match *op {
            Op::Line(p) => write!(out, " L{}", fr.pt(p)).unwrap(),
            Op::Quad(c, p) => write!(out, " Q{} {}", fr.pt(c), fr.pt(p)).unwrap(),
        }
    }
}

/// Counter-clockwise points on the far circle from `a` to `b`, ending at `b`.
fn arc_points(fr: &Frame, a: Point2, b: Point2) -> Vec<Point2> {
    let (ta, tb) = ((a - fr.center).angle(), (b - fr.center).angle());
    let sweep = (tb - ta).rem_euclid(2.0 * PI);
    let r = (a - fr.center).norm().max((b - fr.center).norm());
    let steps = (sweep / (PI / 18.0)).ceil() as usize;
    let mut pts: Vec<Point2> = (1..steps)
        .map(|i| {
            let t = ta + sweep * i as f64 / steps as f64;
            fr.center + Point2::new(t.cos(), t.sin()) * r
        })
        .collect();
    pts.push(b);
    pts
}

fn face_path(d: &PlanarSubdivision, f: usize, fr: &Frame) -> String {
    let mut path = String::new();
    for &start in &d.faces[f].boundary {
        let mut cycle = d.cycle(start);
        // Start on an edge so every arc at infinity has a known start point.
        let Some(k) = cycle.iter().position(|&h| d.half_edges[h].edge.is_some()) else { continue };
        cycle.rotate_left(k);
        let mut first = true;
        let mut current = Point2::default();
        for (i, &h) in cycle.iter().enumerate() {
            if d.half_edges[h].edge.is_some() {
                let (p, ops) = half_edge_ops(d, h, fr);
                if first {
                    write!(path, "M{}", fr.pt(p)).unwrap();
                    first = false;
                }
                push_ops(&mut path, fr, &ops);
                current = match ops.last() {
                    Some(Op::Line(q)) | Some(Op::Quad(_, q)) => *q,
                    None => p,
                };
            } else if !first {
                let next = cycle[(i + 1) % cycle.len()];
                let target = if d.half_edges[next].edge.is_some() { half_edge_ops(d, next, fr).0 } else { current };
                let pts: Vec<Op> = arc_points(fr, current, target).into_iter().map(Op::Line).collect();
                push_ops(&mut path, fr, &pts);
            }
        }
        path.push_str(" Z ");
    }
    path
}

/// Pastel fill color for a label hash.
fn fill_color(hash: u64) -> String {
    let h = (hash % 360) as f64 / 60.0;
    let (s, l) = (0.55, 0.78);
    let c = (1.0 - (2.0 * l - 1.0_f64).abs()) * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let byte = |v: f64| ((v + m) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b))
}

/// Renders `d` as SVG. The viewport is the sampling window of `sites` when
/// given, else a padded box around the vertices.
pub fn render_svg(d: &PlanarSubdivision, sites: Option<&SiteSet>, opts: &RenderOptions) -> String {
    let (lo, hi) = match sites {
        Some(s) => crate::verify::window(s),
        None => {
            let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
            let mut hi = -lo;
            for v in &d.vertices {
                lo = Point2::new(lo.x.min(v.pos.x), lo.y.min(v.pos.y));
                hi = Point2::new(hi.x.max(v.pos.x), hi.y.max(v.pos.y));
            }
            if !lo.x.is_finite() {
                (Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0))
            } else {
                let pad = 0.2 * (hi - lo).norm().max(d.scale);
                (lo - Point2::new(pad, pad), hi + Point2::new(pad, pad))
            }
        }
    };
    let fr = Frame::new(lo, hi, opts.width);
    let (w, h) = (opts.width as f64, fr.height());
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#).unwrap();
    writeln!(s, r#"<defs><clipPath id="view"><rect x="0" y="0" width="{w:.3}" height="{h:.3}"/></clipPath>"#).unwrap();
    writeln!(
        s,
        r#"<pattern id="hatch" width="8" height="8" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="8" stroke="black" stroke-opacity="0.45" stroke-width="2"/></pattern></defs>"#
    )
    .unwrap();
    writeln!(s, r#"<g clip-path="url(#view)">"#).unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{w:.3}" height="{h:.3}" fill="white"/>"#).unwrap();
    let whole = format!("M0,0 L{w:.3},0 L{w:.3},{h:.3} L0,{h:.3} Z");
    for f in d.face_ids() {
        let Some(label) = &d.faces[f].label else { continue };
        let path = if d.edges.is_empty() { whole.clone() } else { face_path(d, f, &fr) };
        writeln!(
            s,
            r#"<path d="{path}" fill="{}" fill-rule="evenodd" stroke="none"><title>{label}</title></path>"#,
            fill_color(label.stable_hash())
        )
        .unwrap();
        if label.kind == LabelKind::Type2 {
            writeln!(s, r#"<path d="{path}" fill="url(#hatch)" fill-rule="evenodd" stroke="none"/>"#).unwrap();
        }
    }
    for e in &d.edges {
        let (p, ops) = half_edge_ops(d, e.half_edge, &fr);
        let mut path = format!("M{}", fr.pt(p));
        push_ops(&mut path, &fr, &ops);
        writeln!(s, r##"<path d="{path}" fill="none" stroke="#333" stroke-width="1.2"/>"##).unwrap();
    }
    if let Some(sites) = sites {
        for site in &sites.sites {
            if site.is_point() {
                let (x, y) = fr.map(site.a);
                writeln!(s, r#"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="black"/>"#).unwrap();
            } else {
                let ((x1, y1), (x2, y2)) = (fr.map(site.a), fr.map(site.b));
                writeln!(s, r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="black" stroke-width="2.5" stroke-linecap="round"/>"#).unwrap();
            }
        }
    }
    if opts.draw_vertices {
        for v in &d.vertices {
            let (x, y) = fr.map(v.pos);
            writeln!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="2" fill="#c00"/>"##).unwrap();
        }
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Metric, SharingMode};
    use crate::nearest::nearest_voronoi;

    fn two() -> SiteSet {
        SiteSet::new(SharingMode::Disjoint, vec![(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)), (Point2::new(0.0, 3.0), Point2::new(2.0, 4.0))]).unwrap()
    }

    #[test]
    fn draws_faces_and_curved_edges() {
        let s = two();
        let d = nearest_voronoi(&s, Metric::Euclidean).unwrap();
        let svg = render_svg(&d, Some(&s), &RenderOptions::default());
        assert_eq!(svg.matches("<title>").count(), 2);
        assert!(svg.contains(" Q"), "the bisector has parabolic pieces");
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn deterministic() {
        let s = two();
        let d = nearest_voronoi(&s, Metric::Euclidean).unwrap();
        let o = RenderOptions::default();
        assert_eq!(render_svg(&d, Some(&s), &o), render_svg(&d, Some(&s), &o));
    }
}
