//! Exact v-strips: parallelograms with long sides perpendicular to `v` and
//! short sides perpendicular to `u⊥`.
//!
//! A strip is stored by two pairs of bounds, `c_lo ≤ ⟨P, v⟩ ≤ c_hi` and
//! `mu_lo ≤ ⟨P, u⊥⟩ ≤ mu_hi`, with rational entries. Membership of a lattice
//! point is therefore two pairs of exact comparisons.

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::geometry::Direction;

pub type Q = Ratio<i128>;

pub fn q(n: i64) -> Q {
    Q::from_integer(n as i128)
}

pub fn qf(num: i64, den: i64) -> Q {
    Q::new(num as i128, den as i128)
}

pub(crate) fn dot_q(p: (Q, Q), d: Direction) -> Q {
    p.0 * d.x() as i128 + p.1 * d.y() as i128
}

pub(crate) fn dot_i(p: (i64, i64), d: Direction) -> i128 {
    p.0 as i128 * d.x() as i128 + p.1 as i128 * d.y() as i128
}

/// The point with `⟨P, a⟩ = ca` and `⟨P, b⟩ = cb` (`a`, `b` not parallel).
pub(crate) fn solve(a: Direction, ca: Q, b: Direction, cb: Q) -> (Q, Q) {
    let det = (a.x() * b.y() - a.y() * b.x()) as i128;
    assert!(det != 0, "parallel directions");
    let x = (ca * b.y() as i128 - cb * a.y() as i128) / det;
    let y = (cb * a.x() as i128 - ca * b.x() as i128) / det;
    (x, y)
}

fn dist2_point_segment(p: (Q, Q), a: (Q, Q), b: (Q, Q)) -> Q {
    let d = (b.0 - a.0, b.1 - a.1);
    let ap = (p.0 - a.0, p.1 - a.1);
    let dd = d.0 * d.0 + d.1 * d.1;
    let t = if dd.is_zero() { Q::zero() } else { (ap.0 * d.0 + ap.1 * d.1) / dd };
    let t = t.max(Q::zero()).min(Q::from_integer(1));
    let c = (a.0 + d.0 * t - p.0, a.1 + d.1 * t - p.1);
    c.0 * c.0 + c.1 * c.1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VStrip {
    pub v: Direction,
    /// Midpoint of the ambient semicircle; short sides are parallel to it.
    pub u: Direction,
    pub c_lo: Q,
    pub c_hi: Q,
    pub mu_lo: Q,
    pub mu_hi: Q,
}

impl VStrip {
    pub fn new(u: Direction, v: Direction, c_lo: Q, c_hi: Q, mu_lo: Q, mu_hi: Q) -> Self {
        assert!(u.dot(v) > 0, "v must lie in the open semicircle centred at u");
        assert!(c_lo < c_hi && mu_lo < mu_hi, "degenerate strip");
        VStrip { v, u, c_lo, c_hi, mu_lo, mu_hi }
    }

    pub fn f(&self) -> Direction {
        self.u.rot_ccw()
    }

    fn uv(&self) -> i128 {
        self.u.dot(self.v) as i128
    }

    /// Extent along `u`, in multiples of the vector `u`.
    pub fn width(&self) -> Q {
        (self.c_hi - self.c_lo) / self.uv()
    }

    /// Extent along `u⊥`, in multiples of the vector `u⊥`.
    pub fn length(&self) -> Q {
        (self.mu_hi - self.mu_lo) / self.u.norm2() as i128
    }

    pub fn contains_q(&self, p: (Q, Q)) -> bool {
        let c = dot_q(p, self.v);
        let m = dot_q(p, self.f());
        self.c_lo <= c && c <= self.c_hi && self.mu_lo <= m && m <= self.mu_hi
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        let c = Q::from_integer(dot_i((x, y), self.v));
        let m = Q::from_integer(dot_i((x, y), self.f()));
        self.c_lo <= c && c <= self.c_hi && self.mu_lo <= m && m <= self.mu_hi
    }

    /// Back-bottom, front-bottom, front-top, back-top ("top" = large `⟨P, u⊥⟩`).
    pub fn corners(&self) -> [(Q, Q); 4] {
        let f = self.f();
        [
            solve(self.v, self.c_lo, f, self.mu_lo),
            solve(self.v, self.c_hi, f, self.mu_lo),
            solve(self.v, self.c_hi, f, self.mu_hi),
            solve(self.v, self.c_lo, f, self.mu_hi),
        ]
    }

    /// The back-top corner.
    pub fn anchor(&self) -> (Q, Q) {
        self.corners()[3]
    }

    pub fn area(&self) -> Q {
        let c = self.corners();
        let mut s = Q::zero();
        for i in 0..4 {
            let (a, b) = (c[i], c[(i + 1) % 4]);
            s += a.0 * b.1 - a.1 * b.0;
        }
        s.abs() / 2
    }

    /// Translate by `t·u`.
    pub fn translated(&self, t: Q) -> VStrip {
        let d = t * self.uv();
        VStrip { c_lo: self.c_lo + d, c_hi: self.c_hi + d, ..self.clone() }
    }

    /// The `+`-boundary, bottom endpoint first.
    pub fn plus_boundary(&self) -> ((Q, Q), (Q, Q)) {
        let c = self.corners();
        (c[1], c[2])
    }

    /// Squared Euclidean distance to the (closed) strip.
    pub fn dist2(&self, p: (Q, Q)) -> Q {
        if self.contains_q(p) {
            return Q::zero();
        }
        let c = self.corners();
        (0..4).map(|i| dist2_point_segment(p, c[i], c[(i + 1) % 4])).min().expect("four edges")
    }

    /// Integer bounding box `(x0, y0, x1, y1)` of the corners.
    pub fn bbox(&self) -> (i64, i64, i64, i64) {
        let c = self.corners();
        let xs = c.iter().map(|p| p.0);
        let ys = c.iter().map(|p| p.1);
        let fl = |it: &mut dyn Iterator<Item = Q>| it.min().expect("corners").floor().to_integer() as i64;
        let ce = |it: &mut dyn Iterator<Item = Q>| it.max().expect("corners").ceil().to_integer() as i64;
        (fl(&mut xs.clone()), fl(&mut ys.clone()), ce(&mut xs.clone()), ce(&mut ys.clone()))
    }

    /// Lattice points of the strip.
    pub fn lattice_points(&self) -> Vec<(i64, i64)> {
        let (x0, y0, x1, y1) = self.bbox();
        let mut out = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                if self.contains(x, y) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// Lattice points on the line `⟨P, v⟩ = g`, parametrised as `g·w_v + k·t_v`.
    fn line_point(&self, g: i128, k: i128) -> (i64, i64) {
        let (wx, wy) = self.v.unit_level_vector();
        let (tx, ty) = self.v.line_step();
        ((g * wx as i128 + k * tx as i128) as i64, (g * wy as i128 + k * ty as i128) as i64)
    }

    /// Line parameter `k` of a point on `⟨P, v⟩ = g`.
    fn line_param(&self, g: i128, p: (Q, Q)) -> Q {
        let (wx, wy) = self.v.unit_level_vector();
        let (tx, ty) = self.v.line_step();
        let r = (p.0 - g * wx as i128, p.1 - g * wy as i128);
        (r.0 * tx as i128 + r.1 * ty as i128) / self.v.norm2() as i128
    }

    /// The external boundary: the translate of `∂₊` along `v` onto the first
    /// lattice line beyond the strip that contains a lattice point of the
    /// translated segment. Returns the line level and the endpoint parameters.
    pub fn external_boundary(&self) -> ExternalBoundary {
        let (a, b) = self.plus_boundary();
        let n2 = self.v.norm2() as i128;
        let mut g = self.c_hi.floor().to_integer() + 1;
        loop {
            let delta = (Q::from_integer(g) - self.c_hi) / n2;
            let shift = |p: (Q, Q)| (p.0 + delta * self.v.x() as i128, p.1 + delta * self.v.y() as i128);
            let (ea, eb) = (shift(a), shift(b));
            let (ka, kb) = (self.line_param(g, ea), self.line_param(g, eb));
            let (lo, hi) = if ka <= kb { (ka, kb) } else { (kb, ka) };
            if lo.ceil() <= hi.floor() {
                return ExternalBoundary { level: g, k_lo: lo, k_hi: hi, ends: (ea, eb) };
            }
            g += 1;
        }
    }

    /// Lattice points of `∂^ext_λ`: on the external boundary, at Euclidean
    /// distance at least `lambda` from both endpoints. Ordered along `ℓ_v⁺`.
    pub fn external_points(&self, lambda: Q) -> Vec<(i64, i64)> {
        let eb = self.external_boundary();
        let n2 = self.v.norm2() as i128;
        let lam2 = lambda * lambda;
        let lo = eb.k_lo.ceil().to_integer();
        let hi = eb.k_hi.floor().to_integer();
        (lo..=hi)
            .filter(|&k| {
                let k = Q::from_integer(k);
                let (da, db) = (k - eb.k_lo, eb.k_hi - k);
                da * da * n2 >= lam2 && db * db * n2 >= lam2
            })
            .map(|k| self.line_point(eb.level, k))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalBoundary {
    /// Value of `⟨P, v⟩` on the boundary line.
    pub level: i128,
    pub k_lo: Q,
    pub k_hi: Q,
    pub ends: ((Q, Q), (Q, Q)),
}

/// Squared distance from a point to a union of strips, with a cut-off: returns
/// true iff the point lies within `lambda` of some strip.
pub fn within(strips: &[&VStrip], p: (i64, i64), lambda: Q) -> bool {
    let pq = (q(p.0), q(p.1));
    let lam2 = lambda * lambda;
    strips.iter().any(|s| s.dist2(pq) <= lam2)
}
