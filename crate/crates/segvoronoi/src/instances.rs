//! Seeded instance generators: random families, the obstacle and cyclic
//! constructions, PSLGs, crossing grids, and the endpoint perturbation of a
//! PSLG into disjoint segments.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{
    check_general_position, classify_pair, count_intersections, GpMode, KernelError, PairClass, Point2, SegmentSite, SharingMode, SiteSet,
    GP_CIRCLE_LIMIT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("invalid parameters: {0}")]
    InvalidParameter(String),
    #[error("no valid instance found: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    RandomDisjoint,
    RandomCrossing,
    Obstacle,
    Cyclic,
    CyclicUntangled,
    PslgPolygon,
    PslgStar,
    CrossingGrid,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::RandomDisjoint,
        Family::RandomCrossing,
        Family::Obstacle,
        Family::Cyclic,
        Family::CyclicUntangled,
        Family::PslgPolygon,
        Family::PslgStar,
        Family::CrossingGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::RandomDisjoint => "random-disjoint",
            Family::RandomCrossing => "random-crossing",
            Family::Obstacle => "obstacle",
            Family::Cyclic => "cyclic",
            Family::CyclicUntangled => "cyclic-untangled",
            Family::PslgPolygon => "pslg-polygon",
            Family::PslgStar => "pslg-star",
            Family::CrossingGrid => "crossing-grid",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| InstanceError::InvalidParameter(format!("unknown family '{s}'")))
    }
}

/// Parameters of a generated instance. `k` is the order the construction
/// targets (obstacle, cyclic), the arm count of a star is `n`, and a
/// crossing grid has `k` horizontal and `n - k` vertical segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub family: Family,
    pub n: usize,
    #[serde(default)]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

impl InstanceSpec {
    pub fn new(family: Family, n: usize, k: usize, seed: u64) -> Self {
        InstanceSpec { family, n, k, seed, scale: 1.0 }
    }
}

fn seg(a: Point2, b: Point2) -> (Point2, Point2) {
    (a, b)
}

fn polar(r: f64, t: f64) -> Point2 {
    Point2::new(r * t.cos(), r * t.sin())
}

/// Builds the set and checks the general position its mode requires.
fn emit(mode: SharingMode, segs: Vec<(Point2, Point2)>) -> Result<SiteSet, InstanceError> {
    let set = SiteSet::new(mode, segs)?;
    let gp = if mode == SharingMode::Pslg { GpMode::Weak } else { GpMode::Strict };
    let rep = check_general_position(&set, gp);
    if !rep.ok() {
        return Err(InstanceError::Infeasible(format!("{} general-position violations", rep.violations.len())));
    }
    Ok(set)
}

pub fn generate(spec: &InstanceSpec) -> Result<SiteSet, InstanceError> {
    if !(spec.scale > 0.0 && spec.scale.is_finite()) {
        return Err(InstanceError::InvalidParameter(format!("scale {}", spec.scale)));
    }
    match spec.family {
        Family::RandomDisjoint => random_disjoint(spec.n, spec.seed, spec.scale),
        Family::RandomCrossing => random_crossing(spec.n, spec.k.max(1), spec.seed, spec.scale),
        Family::Obstacle => obstacle(spec.n, spec.k, spec.seed, spec.scale),
        Family::Cyclic => cyclic(spec.n, spec.k, spec.seed, spec.scale, false),
        Family::CyclicUntangled => cyclic(spec.n, spec.k, spec.seed, spec.scale, true),
        Family::PslgPolygon => pslg_polygon(spec.n, spec.seed, spec.scale),
        Family::PslgStar => pslg_star(spec.n, spec.seed, spec.scale),
        Family::CrossingGrid => crossing_grid(spec.k, spec.n.saturating_sub(spec.k), spec.seed, spec.scale),
    }
}

/// Retries a randomized construction with derived seeds.
fn retry(seed: u64, what: &str, mut f: impl FnMut(&mut ChaCha8Rng) -> Option<Result<SiteSet, InstanceError>>) -> Result<SiteSet, InstanceError> {
    for attempt in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(attempt));
        if let Some(Ok(set)) = f(&mut rng) {
            return Ok(set);
        }
    }
    Err(InstanceError::Infeasible(what.to_string()))
}

/// Random disjoint segments with lengths in [0.2, 1]·scale in a square that
/// grows with sqrt(n).
pub fn random_disjoint(n: usize, seed: u64, scale: f64) -> Result<SiteSet, InstanceError> {
    if n == 0 {
        return Err(InstanceError::InvalidParameter("n must be positive".into()));
    }
    let side = scale * 2.0 * (n as f64).sqrt();
    retry(seed, "random-disjoint", |rng| {
        let mut segs: Vec<SegmentSite> = Vec::new();
        let mut tries = 0;
        while segs.len() < n {
            tries += 1;
            if tries > 100 * n {
                return None;
            }
            let a = Point2::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side));
            let b = a + polar(scale * rng.gen_range(0.2..1.0), rng.gen_range(0.0..PI));
            let s = SegmentSite::new(segs.len(), a, b);
            let clear = segs.iter().all(|t| classify_pair(&s, t) == PairClass::Disjoint && gap(&s, t) > 1e-3 * scale);
            if clear {
                segs.push(s);
            }
        }
        Some(emit(SharingMode::Disjoint, segs.iter().map(|s| (s.a, s.b)).collect()))
    })
}

fn gap(s: &SegmentSite, t: &SegmentSite) -> f64 {
    let m = crate::kernel::Metric::Euclidean;
    let d1 = s.endpoints().into_iter().map(|p| crate::kernel::distance(p, t, m)).fold(f64::INFINITY, f64::min);
    let d2 = t.endpoints().into_iter().map(|p| crate::kernel::distance(p, s, m)).fold(f64::INFINITY, f64::min);
    d1.min(d2)
}

/// Random segments that may cross, with at most `max_crossings` crossings.
pub fn random_crossing(n: usize, max_crossings: usize, seed: u64, scale: f64) -> Result<SiteSet, InstanceError> {
    if n < 2 {
        return Err(InstanceError::InvalidParameter("n must be at least 2".into()));
    }
    let side = scale * 2.0 * (n as f64).sqrt();
    retry(seed, "random-crossing", |rng| {
        let segs: Vec<(Point2, Point2)> = (0..n)
            .map(|_| {
                let a = Point2::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side));
                seg(a, a + polar(scale * rng.gen_range(0.5..2.0), rng.gen_range(0.0..PI)))
            })
            .collect();
        let set = emit(SharingMode::Crossing, segs).ok()?;
        let i = count_intersections(&set).ok()?;
        (1..=max_crossings).contains(&i).then_some(Ok(set))
    })
}

/// k long near-parallel segments of length 100·scale, spaced 2·scale apart,
/// and n-k short obstacles next to the middle line of the bundle, spread at
/// intervals L/(n-k+1). The region of the long segments has n-k+1 faces.
pub fn obstacle(n: usize, k: usize, seed: u64, scale: f64) -> Result<SiteSet, InstanceError> {
    if k < 2 || n <= k {
        return Err(InstanceError::InvalidParameter(format!("obstacle needs 2 <= k < n (n={n}, k={k})")));
    }
    let len = 100.0 * scale;
    let spacing = 2.0 * scale;
    let mid = spacing * (k - 1) as f64 / 2.0;
    retry(seed, "obstacle", |rng| {
        let mut segs = Vec::new();
        for j in 0..k {
            let y = spacing * j as f64;
            let dx = rng.gen_range(-0.05..0.05) * scale;
            let tilt = rng.gen_range(-1e-3..1e-3) * scale;
            segs.push(seg(Point2::new(dx, y - tilt), Point2::new(len + dx, y + tilt)));
        }
        let m = n - k;
        for j in 1..=m {
            let x = len * j as f64 / (m + 1) as f64 + rng.gen_range(-0.05..0.05) * scale;
            // Staggered above and below the middle, clear of a long segment on it.
            let side = if j % 2 == 0 { 1.0 } else { -1.0 };
            let y = mid + side * (0.25 + rng.gen_range(0.0..0.1)) * scale;
            let h = 0.05 * scale;
            let lean = rng.gen_range(-0.01..0.01) * scale;
            segs.push(seg(Point2::new(x - lean, y - h), Point2::new(x + lean, y + h)));
        }
        Some(emit(SharingMode::Disjoint, segs))
    })
}

/// n-k point-sites in a cluster of radius scale/100 around the origin and k
/// segments around it, each spanning an angle of pi - pi/k as seen from the
/// origin. Rotating a line about the cluster, the halfplane on its left meets
/// all k segments in k separate angular ranges, giving k unbounded faces of
/// the region of the segments. Plain chords cross; the untangled variant
/// uses a pinwheel with endpoints at different radii.
pub fn cyclic(n: usize, k: usize, seed: u64, scale: f64, untangled: bool) -> Result<SiteSet, InstanceError> {
    if k < 3 || n <= k {
        return Err(InstanceError::InvalidParameter(format!("cyclic needs 3 <= k < n (n={n}, k={k})")));
    }
    let alpha = PI - PI / k as f64;
    let ratios: &[f64] = if untangled { &[0.35, 0.45, 0.55, 0.25, 0.65, 0.2] } else { &[1.0] };
    for &ratio in ratios {
        let mode = if untangled { SharingMode::Disjoint } else { SharingMode::Crossing };
        let found = retry(seed, "cyclic", |rng| {
            let mut segs = Vec::new();
            for j in 0..k {
                let t = 2.0 * PI * j as f64 / k as f64 + rng.gen_range(-0.02..0.02);
                let r0 = scale * ratio * rng.gen_range(0.98..1.02);
                let r1 = scale * rng.gen_range(0.98..1.02);
                segs.push(seg(polar(r0, t), polar(r1, t + alpha)));
            }
            for _ in 0..n - k {
                let p = polar(scale / 100.0 * rng.gen_range(0.1..1.0), rng.gen_range(0.0..2.0 * PI));
                segs.push(seg(p, p));
            }
            Some(emit(mode, segs))
        });
        if found.is_ok() {
            return found;
        }
    }
    Err(InstanceError::Infeasible(format!("no untangled cyclic layout for k={k}")))
}

/// A simple polygon with n edges around a jittered circle.
pub fn pslg_polygon(n: usize, seed: u64, scale: f64) -> Result<SiteSet, InstanceError> {
    if n < 3 {
        return Err(InstanceError::InvalidParameter("a polygon needs at least 3 edges".into()));
    }
    retry(seed, "pslg-polygon", |rng| {
        let pts: Vec<Point2> = (0..n)
            .map(|i| polar(scale * rng.gen_range(0.7..1.3), 2.0 * PI * (i as f64 + rng.gen_range(-0.2..0.2)) / n as f64))
            .collect();
        Some(emit(SharingMode::Pslg, (0..n).map(|i| seg(pts[i], pts[(i + 1) % n])).collect()))
    })
}

/// n segments sharing the endpoint at the origin.
pub fn pslg_star(n: usize, seed: u64, scale: f64) -> Result<SiteSet, InstanceError> {
    if n < 2 {
        return Err(InstanceError::InvalidParameter("a star needs at least 2 arms".into()));
    }
    retry(seed, "pslg-star", |rng| {
        let segs = (0..n)
            .map(|i| {
                let t = 2.0 * PI * (i as f64 + rng.gen_range(-0.2..0.2)) / n as f64;
                seg(Point2::new(0.0, 0.0), polar(scale * rng.gen_range(0.5..1.0), t))
            })
            .collect();
        Some(emit(SharingMode::Pslg, segs))
    })
}

/// `h` near-horizontal segments crossing `v` near-vertical ones (h·v crossings).
pub fn crossing_grid(h: usize, v: usize, seed: u64, scale: f64) -> Result<SiteSet, InstanceError> {
    if h == 0 || v == 0 {
        return Err(InstanceError::InvalidParameter("crossing grid needs h, v >= 1".into()));
    }
    let w = scale * (h.max(v) + 1) as f64;
    retry(seed, "crossing-grid", |rng| {
        let mut segs = Vec::new();
        let mut j = || rng.gen_range(-0.1..0.1) * scale;
        for i in 0..h {
            let y = scale * (i + 1) as f64;
            segs.push(seg(Point2::new(j(), y + j()), Point2::new(w + j(), y + j())));
        }
        for i in 0..v {
            let x = scale * (i + 1) as f64;
            segs.push(seg(Point2::new(x + j(), j()), Point2::new(x + j(), w + j())));
        }
        Some(emit(SharingMode::Crossing, segs))
    })
}

/// Moves every endpoint at a shared vertex along its own segment by
/// eps·(j+1)/(deg+1), where j ranks the incident sites, so all moves are
/// distinct and below `eps`. Disjoint input is returned unchanged.
pub fn perturb(sites: &SiteSet, eps: f64) -> Result<SiteSet, InstanceError> {
    if sites.mode != SharingMode::Pslg {
        return Ok(sites.clone());
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(InstanceError::InvalidParameter(format!("perturbation {eps}")));
    }
    let mut segs: Vec<(Point2, Point2)> = sites.sites.iter().map(|s| (s.a, s.b)).collect();
    let tol = 10.0 * sites.eps();
    for (p, ids) in sites.shared_endpoints() {
        let deg = ids.len();
        for (j, &id) in ids.iter().enumerate() {
            let s = sites.site(id);
            let delta = eps * (j + 1) as f64 / (deg + 1) as f64;
            if delta >= s.length() {
                return Err(InstanceError::Infeasible(format!("perturbation {eps} exceeds the length of site {id}")));
            }
            let (at_a, other) = if s.a.dist(p) <= tol { (true, s.b) } else { (false, s.a) };
            let moved = p + (other - p).unit() * delta;
            if at_a {
                segs[id].0 = moved;
            } else {
                segs[id].1 = moved;
            }
        }
    }
    let set = SiteSet::new(SharingMode::Disjoint, segs).map_err(|e| InstanceError::Infeasible(format!("perturbed segments still meet: {e}")))?;
    if set.len() <= GP_CIRCLE_LIMIT {
        let gp = check_general_position(&set, GpMode::Strict);
        if !gp.ok() {
            return Err(InstanceError::Infeasible(format!("perturbed set violates general position ({} cases)", gp.violations.len())));
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_disjoint_is_deterministic_and_disjoint() {
        let a = random_disjoint(6, 3, 1.0).unwrap();
        let b = random_disjoint(6, 3, 1.0).unwrap();
        assert_eq!(a, b);
        for i in 0..6 {
            for j in i + 1..6 {
                assert_eq!(classify_pair(a.site(i), a.site(j)), PairClass::Disjoint);
            }
        }
        assert!(check_general_position(&a, GpMode::Strict).ok());
    }

    #[test]
    fn star_perturbs_to_disjoint() {
        let s = pslg_star(3, 1, 1.0).unwrap();
        let p = perturb(&s, 0.01).unwrap();
        assert_eq!(p.mode, SharingMode::Disjoint);
        assert_eq!(p.len(), 3);
        for (x, y) in s.sites.iter().zip(&p.sites) {
            assert!(x.a.dist(y.a) + x.b.dist(y.b) < 0.01);
        }
    }

    #[test]
    fn disjoint_perturb_is_identity() {
        let s = random_disjoint(4, 1, 1.0).unwrap();
        assert_eq!(perturb(&s, 0.01).unwrap(), s);
    }

    #[test]
    fn constructions_have_expected_shape() {
        let o = obstacle(8, 3, 0, 1.0).unwrap();
        assert_eq!(o.len(), 8);
        let c = cyclic(6, 4, 0, 1.0, false).unwrap();
        assert!(count_intersections(&c).unwrap() > 0);
        let g = crossing_grid(2, 3, 0, 1.0).unwrap();
        assert_eq!(count_intersections(&g).unwrap(), 6);
        assert!("pslg-star".parse::<Family>().is_ok());
    }
}
