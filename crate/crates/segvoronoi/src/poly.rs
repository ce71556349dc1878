//! Small dense polynomials (coefficients low to high) and real-root isolation.

#[derive(Clone, Debug, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Poly {
        Poly(vec![c])
    }

    pub fn linear(c0: f64, c1: f64) -> Poly {
        Poly(vec![c0, c1])
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly((0..n)
            .map(|i| self.0.get(i).copied().unwrap_or(0.0) + o.0.get(i).copied().unwrap_or(0.0))
            .collect())
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.0.is_empty() || o.0.is_empty() {
            return Poly(Vec::new());
        }
        let mut out = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Drops leading coefficients that are negligible against `scale`.
    pub fn trimmed(&self, scale: f64) -> Poly {
        let mut c = self.0.clone();
        while c.len() > 1 && c.last().is_some_and(|x| x.abs() <= 1e-13 * scale) {
            c.pop();
        }
        Poly(c)
    }

    pub fn is_negligible(&self, scale: f64) -> bool {
        self.0.iter().all(|c| c.abs() <= 1e-12 * scale)
    }
}

/// Real roots in `[lo, hi]` (either bound may be infinite), sorted. Double
/// roots are reported once; near-tangencies may be reported, which callers
/// treat as harmless extra breakpoints.
pub fn real_roots(p: &Poly, lo: f64, hi: f64) -> Vec<f64> {
    let scale = p.max_abs();
    if scale == 0.0 {
        return Vec::new();
    }
    let p = p.trimmed(scale);
    let n = p.0.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = p.0[n];
    let bound = 1.0 + p.0[..n].iter().fold(0.0f64, |m, c| m.max((c / lead).abs()));
    let lo = lo.max(-bound);
    let hi = hi.min(bound);
    if lo > hi {
        return Vec::new();
    }
    let mut roots = roots_in(&p, lo, hi);
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));
    roots
}

fn roots_in(p: &Poly, lo: f64, hi: f64) -> Vec<f64> {
    let n = p.0.len() - 1;
    match n {
        0 => Vec::new(),
        1 => {
            let t = -p.0[0] / p.0[1];
            if t >= lo && t <= hi {
                vec![t]
            } else {
                Vec::new()
            }
        }
        2 => quadratic(p.0[2], p.0[1], p.0[0]).into_iter().filter(|t| *t >= lo && *t <= hi).collect(),
        _ => {
            let d = p.derivative();
            let crit = roots_in(&d.trimmed(d.max_abs()), lo, hi);
            let mut knots = vec![lo];
            knots.extend(crit.iter().copied());
            knots.push(hi);
            let mut out = Vec::new();
            for w in knots.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (fa, fb) = (p.eval(a), p.eval(b));
                if fa == 0.0 {
                    out.push(a);
                }
                if fa * fb < 0.0 {
                    out.push(bisect(p, a, b, fa));
                }
            }
            if p.eval(hi) == 0.0 {
                out.push(hi);
            }
            for c in crit {
                let v = p.eval(c);
                let mag = p.0.iter().enumerate().map(|(i, k)| k.abs() * c.abs().powi(i as i32)).sum::<f64>();
                if v.abs() <= 1e-12 * mag {
                    out.push(c);
                }
            }
            out
        }
    }
}

fn bisect(p: &Poly, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = p.eval(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Real roots of a t^2 + b t + c, including a tangent root when the
/// discriminant is negative only by rounding.
pub fn quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b != 0.0 { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    let mag = b * b + (4.0 * a * c).abs();
    if disc < 0.0 {
        if disc >= -1e-12 * mag {
            return vec![-b / (2.0 * a)];
        }
        return Vec::new();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0];
    }
    let mut r = vec![q / a, c / q];
    r.sort_by(f64::total_cmp);
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_roots(rs: &[f64]) -> Poly {
        rs.iter().fold(Poly::constant(1.0), |acc, r| acc.mul(&Poly::linear(-r, 1.0)))
    }

    #[test]
    fn quartic_roots_recovered() {
        let p = from_roots(&[-3.0, -0.5, 0.25, 7.0]);
        let r = real_roots(&p, f64::NEG_INFINITY, f64::INFINITY);
        assert_eq!(r.len(), 4);
        for (got, want) in r.iter().zip([-3.0, -0.5, 0.25, 7.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn window_restricts_roots() {
        let p = from_roots(&[-3.0, -0.5, 0.25, 7.0]);
        let r = real_roots(&p, 0.0, 5.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn double_root_found() {
        let p = from_roots(&[1.0, 1.0, 4.0]);
        let r = real_roots(&p, -10.0, 10.0);
        assert!(r.iter().any(|t| (t - 1.0).abs() < 1e-6));
        assert!(r.iter().any(|t| (t - 4.0).abs() < 1e-9));
    }

    #[test]
    fn no_real_roots() {
        let p = Poly(vec![1.0, 0.0, 1.0]);
        assert!(real_roots(&p, f64::NEG_INFINITY, f64::INFINITY).is_empty());
        let p = Poly(vec![1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(real_roots(&p, f64::NEG_INFINITY, f64::INFINITY).is_empty());
    }
}
