//! Nearest-site and farthest-site diagrams, and the nearest diagram of a
//! face's boundary sites clipped to that face.

use crate::kernel::{Metric, SiteId, SiteSet};
use crate::orderk::{Engine, OrderKError};
use crate::subdivision::{assemble, EdgeSupport, FaceId, Fragment, LabelKind, OrderKLabel, PlanarSubdivision};

/// The sites `ids` as a new set with ids 0..len, in the given order.
pub fn subset(sites: &SiteSet, ids: &[SiteId]) -> SiteSet {
    let mut sub = sites.clone();
    sub.sites = ids.iter().enumerate().map(|(i, &s)| crate::kernel::SegmentSite::new(i, sites.site(s).a, sites.site(s).b)).collect();
    sub
}

fn map_label(l: &OrderKLabel, f: &impl Fn(SiteId) -> SiteId) -> OrderKLabel {
    let sites = l.sites.iter().map(|&s| f(s)).collect();
    match (l.kind, l.representative) {
        (LabelKind::Type2, Some(mut r)) => {
            r.owner = f(r.owner);
            OrderKLabel::type2(sites, r)
        }
        _ => OrderKLabel::type1(sites),
    }
}

/// Rewrites every site id of `d` through `f`, labels and edge supports alike.
pub fn relabel(d: &mut PlanarSubdivision, f: impl Fn(SiteId) -> SiteId) {
    for face in &mut d.faces {
        if let Some(l) = &face.label {
            face.label = Some(map_label(l, &f));
        }
    }
    for e in &mut d.edges {
        e.left = e.left.as_ref().map(|l| map_label(l, &f));
        e.right = e.right.as_ref().map(|l| map_label(l, &f));
        for seg in &mut e.segs {
            seg.support = match seg.support {
                EdgeSupport::Bisector { a, b } => EdgeSupport::Bisector { a: f(a), b: f(b) },
                EdgeSupport::Wedge { site, apex } => EdgeSupport::Wedge { site: f(site), apex },
            };
        }
    }
}

/// Order-1 diagram. A single site gives one face with no edges.
pub fn nearest_voronoi(sites: &SiteSet, m: Metric) -> Result<PlanarSubdivision, OrderKError> {
    if sites.len() == 1 {
        let m = m.validate()?;
        if !m.supports_diagrams() {
            return Err(OrderKError::UnsupportedMetric(m));
        }
        return Ok(assemble(1, m, sites.diameter().max(1.0), Vec::new(), &[], Some(OrderKLabel::type1(vec![0]))));
    }
    Engine::new(sites, m, 1)?.level_direct(1)
}

/// Farthest-site diagram of `ids`: the order-(|H|-1) diagram of H with each
/// label replaced by the one site it misses.
pub fn farthest_voronoi(sites: &SiteSet, ids: &[SiteId], m: Metric) -> Result<PlanarSubdivision, OrderKError> {
    if ids.len() < 2 {
        return Err(OrderKError::InfeasibleK { k: 1, n: ids.len(), max: 0 });
    }
    let sub = subset(sites, ids);
    let h = ids.len();
    let mut d = Engine::new(&sub, m, h - 1)?.level_direct(h - 1)?;
    let complement = |l: &OrderKLabel| OrderKLabel::type1((0..h).filter(|s| !l.contains(*s)).collect());
    for face in &mut d.faces {
        face.label = face.label.as_ref().map(complement);
    }
    for e in &mut d.edges {
        e.left = e.left.as_ref().map(complement);
        e.right = e.right.as_ref().map(complement);
    }
    relabel(&mut d, |s| ids[s]);
    Ok(d)
}

/// V_1 of the sites bounding face `f` of `level`, clipped to that face.
pub fn v1_within_face(level: &PlanarSubdivision, f: FaceId, sites: &SiteSet) -> Result<Fragment, OrderKError> {
    let sf: Vec<SiteId> = level.boundary_sites(f).into_iter().collect();
    if sf.is_empty() {
        return Err(OrderKError::InfeasibleK { k: level.k + 1, n: sites.len(), max: level.k });
    }
    let mut v1 = nearest_voronoi(&subset(sites, &sf), level.metric)?;
    relabel(&mut v1, |s| sf[s]);
    v1.clip_to_face(level, f).map_err(|e| OrderKError::Topology {
        level: level.k,
        message: e.to_string(),
        partial: Box::new(crate::orderk::DiagramTower { sites: sites.clone(), metric: level.metric, levels: Vec::new() }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Point2, SharingMode};

    fn set(segs: &[[f64; 4]]) -> SiteSet {
        SiteSet::new(SharingMode::Disjoint, segs.iter().map(|s| (Point2::new(s[0], s[1]), Point2::new(s[2], s[3]))).collect()).unwrap()
    }

    #[test]
    fn single_site_has_one_face() {
        let d = nearest_voronoi(&set(&[[0.0, 0.0, 1.0, 1.0]]), Metric::Euclidean).unwrap();
        assert_eq!(d.face_ids().count(), 1);
        assert!(d.edges.is_empty());
    }

    #[test]
    fn two_segments_split_by_bisector() {
        let d = nearest_voronoi(&set(&[[0.0, 0.0, 1.0, 0.0], [0.0, 3.0, 2.0, 4.0]]), Metric::Euclidean).unwrap();
        let c = d.census().unwrap();
        assert_eq!((c.f, c.e, c.v, c.u), (2, 1, 0, 2));
    }

    #[test]
    fn farthest_of_triangle_is_a_tripod() {
        let s = set(&[[0.0, 0.0, 0.0, 0.0], [4.0, 0.0, 4.0, 0.0], [1.0, 3.0, 1.0, 3.0]]);
        let d = farthest_voronoi(&s, &[0, 1, 2], Metric::Euclidean).unwrap();
        assert_eq!(d.vertices.len(), 1);
        assert!(d.vertices[0].pos.dist(Point2::new(2.0, 1.0)) < 1e-6);
        assert_eq!(d.edges.len(), 3);
        // Far to the left the farthest site is the right-most point.
        let l = d.label_at(Point2::new(-100.0, 1.0)).unwrap();
        assert_eq!(l.sites, vec![1]);
    }
}
