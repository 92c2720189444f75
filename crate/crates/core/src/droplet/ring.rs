//! Quasi-stable half-rings: one v-strip per quasi-stable direction of a
//! semicircle, stacked along `u⊥` so that consecutive strips share a short side.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::strip::{dot_q, q, solve, within, VStrip, Q};
use super::DropletError;
use crate::family::UpdateFamily;
use crate::geometry::{quasi_stable_directions, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RingKind {
    Plain,
    /// The first strip is longer than the others by `extra_length`.
    Elongated,
    /// Each strip trades its back top corner piece for a congruent piece in
    /// front of its top corner.
    Generalized,
}

impl std::str::FromStr for RingKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plain" => Ok(RingKind::Plain),
            "elongated" => Ok(RingKind::Elongated),
            "generalized" => Ok(RingKind::Generalized),
            _ => Err(format!("unknown ring kind `{s}` (plain, elongated, generalized)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingSpec {
    /// Midpoint of the semicircle.
    pub u: Direction,
    pub kind: RingKind,
    /// In multiples of the vector `u`.
    pub width: Q,
    /// In multiples of the vector `u⊥`.
    pub length: Q,
    /// Only used by [`RingKind::Elongated`].
    pub extra_length: Q,
    /// Back corner of the top of the first strip.
    pub anchor: (Q, Q),
}

impl RingSpec {
    pub fn new(u: Direction, kind: RingKind, width: Q, length: Q) -> Self {
        RingSpec { u, kind, width, length, extra_length: Q::zero(), anchor: (Q::zero(), Q::zero()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfRing {
    pub spec: RingSpec,
    /// Top to bottom, i.e. clockwise in the direction of their normals.
    pub strips: Vec<VStrip>,
    /// Generalized rings: the removed back pieces `Ŝ^r`, one per strip.
    pub removed: Vec<VStrip>,
    /// Generalized rings: the added front pieces `Ŝ^l`, one per strip.
    pub added: Vec<VStrip>,
}

pub fn build_half_ring(family: &UpdateFamily, spec: &RingSpec) -> Result<HalfRing, DropletError> {
    if spec.width <= Q::zero() || spec.length <= Q::zero() || spec.extra_length < Q::zero() {
        return Err(DropletError::Sizes(format!("width {} and length {} must be positive", spec.width, spec.length)));
    }
    let dirs = quasi_stable_directions(family, spec.u)?;
    Ok(ring_from_directions(spec, &dirs))
}

pub(crate) fn ring_from_directions(spec: &RingSpec, dirs: &[Direction]) -> HalfRing {
    let u = spec.u;
    let f = u.rot_ccw();
    let n = u.norm2() as i128;
    let mut strips: Vec<VStrip> = Vec::with_capacity(dirs.len());
    let mut top = dot_q(spec.anchor, f);
    let mut back_point = spec.anchor;
    for (i, &v) in dirs.iter().enumerate() {
        let len = if i == 0 && spec.kind == RingKind::Elongated { spec.length + spec.extra_length } else { spec.length };
        let c_lo = dot_q(back_point, v);
        let c_hi = c_lo + spec.width * u.dot(v) as i128;
        let bottom = top - len * n;
        let s = VStrip::new(u, v, c_lo, c_hi, bottom, top);
        back_point = solve(v, c_lo, f, bottom);
        top = bottom;
        strips.push(s);
    }
    let (mut removed, mut added) = (vec![], vec![]);
    if spec.kind == RingKind::Generalized {
        let dmu = spec.length * n / 3;
        for s in &strips {
            let dc = (s.c_hi - s.c_lo) / 3;
            removed.push(VStrip::new(u, s.v, s.c_lo, s.c_lo + dc, s.mu_hi - dmu, s.mu_hi));
            added.push(VStrip::new(u, s.v, s.c_hi, s.c_hi + dc, s.mu_hi - dmu, s.mu_hi));
        }
    }
    HalfRing { spec: spec.clone(), strips, removed, added }
}

impl HalfRing {
    pub fn u(&self) -> Direction {
        self.spec.u
    }

    pub fn is_generalized(&self) -> bool {
        self.spec.kind == RingKind::Generalized
    }

    /// Lattice point of the plain ring `R`.
    pub fn contains(&self, x: i64, y: i64) -> bool {
        self.strips.iter().any(|s| s.contains(x, y))
    }

    /// `core(R^g) = R^g ∩ R`, i.e. `R` minus the removed pieces. Equals `R`
    /// for non-generalized rings.
    pub fn core_contains(&self, x: i64, y: i64) -> bool {
        self.contains(x, y) && !self.removed.iter().any(|s| s.contains(x, y))
    }

    /// The generalized ring `R^g` (equal to `R` for other kinds).
    pub fn generalized_contains(&self, x: i64, y: i64) -> bool {
        self.core_contains(x, y) || self.added.iter().any(|s| s.contains(x, y))
    }

    /// Translate by `t·u`.
    pub fn translated(&self, t: Q) -> HalfRing {
        let shift = |v: &Vec<VStrip>| v.iter().map(|s| s.translated(t)).collect();
        let u = self.spec.u;
        let mut spec = self.spec.clone();
        spec.anchor = (spec.anchor.0 + t * u.x() as i128, spec.anchor.1 + t * u.y() as i128);
        HalfRing { spec, strips: shift(&self.strips), removed: shift(&self.removed), added: shift(&self.added) }
    }

    /// All pieces, for bounding boxes and neighbourhoods.
    pub fn pieces(&self) -> Vec<&VStrip> {
        self.strips.iter().chain(&self.added).collect()
    }

    pub fn bbox(&self) -> (i64, i64, i64, i64) {
        bbox_union(self.pieces())
    }

    pub fn lattice_points(&self) -> Vec<(i64, i64)> {
        filter_box(self.bbox(), |x, y| self.contains(x, y))
    }

    pub fn core_points(&self) -> Vec<(i64, i64)> {
        filter_box(self.bbox(), |x, y| self.core_contains(x, y))
    }

    /// Index of the strip containing a site, if any.
    pub fn strip_of(&self, x: i64, y: i64) -> Option<usize> {
        self.strips.iter().position(|s| s.contains(x, y))
    }

    /// Smallest `t > 0` such that `R + t·u` contains a lattice point beyond
    /// the front of some strip (the translate `R*`).
    pub fn step_to_new_point(&self) -> Q {
        self.strips.iter().map(strip_step).min().expect("ring has at least one strip")
    }

    /// Exact description: one line per piece with its vertices.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let fmt = |p: (Q, Q)| format!("({},{})", p.0, p.1);
        let mut line = |tag: &str, i: usize, s: &VStrip| {
            let c = s.corners();
            out.push_str(&format!(
                "{tag} {i} v={} {} {} {} {}\n",
                s.v,
                fmt(c[0]),
                fmt(c[1]),
                fmt(c[2]),
                fmt(c[3])
            ));
        };
        for (i, s) in self.strips.iter().enumerate() {
            line("strip", i + 1, s);
        }
        for (i, s) in self.removed.iter().enumerate() {
            line("removed", i + 1, s);
        }
        for (i, s) in self.added.iter().enumerate() {
            line("added", i + 1, s);
        }
        out
    }
}

fn strip_step(s: &VStrip) -> Q {
    let f = s.f();
    let (wx, wy) = s.v.unit_level_vector();
    let (tx, ty) = s.v.line_step();
    let a = (wx * f.x() + wy * f.y()) as i128;
    let b = (tx * f.x() + ty * f.y()) as i128;
    debug_assert!(b != 0);
    let mut g = s.c_hi.floor().to_integer() + 1;
    loop {
        let k1 = (s.mu_lo - g * a) / b;
        let k2 = (s.mu_hi - g * a) / b;
        let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        if lo.ceil() <= hi.floor() {
            return (Q::from_integer(g) - s.c_hi) / s.u.dot(s.v) as i128;
        }
        g += 1;
    }
}

pub(crate) fn bbox_union<'a>(pieces: impl IntoIterator<Item = &'a VStrip>) -> (i64, i64, i64, i64) {
    pieces.into_iter().map(|s| s.bbox()).fold((i64::MAX, i64::MAX, i64::MIN, i64::MIN), |a, b| {
        (a.0.min(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3))
    })
}

pub(crate) fn filter_box(b: (i64, i64, i64, i64), keep: impl Fn(i64, i64) -> bool) -> Vec<(i64, i64)> {
    (b.1..=b.3).flat_map(|y| (b.0..=b.2).map(move |x| (x, y))).filter(|&(x, y)| keep(x, y)).collect()
}

/// Lattice points within Euclidean distance `lambda` of the pieces, scanning
/// the bounding box widened by `lambda`.
/// Inclusive lattice box `(x0, y0, x1, y1)`.
pub(crate) type BBox = (i64, i64, i64, i64);

pub(crate) fn neighbourhood(pieces: &[&VStrip], lambda: i64) -> (BBox, Vec<(i64, i64)>) {
    let b = bbox_union(pieces.iter().copied());
    let b = (b.0 - lambda, b.1 - lambda, b.2 + lambda, b.3 + lambda);
    let boxes: Vec<_> = pieces.iter().map(|s| s.bbox()).collect();
    let pts = filter_box(b, |x, y| {
        pieces.iter().zip(&boxes).any(|(s, bb)| {
            x >= bb.0 - lambda && x <= bb.2 + lambda && y >= bb.1 - lambda && y <= bb.3 + lambda && within(&[s], (x, y), q(lambda))
        })
    });
    (b, pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::droplet::strip::qf;
    use crate::family::builtin;

    #[test]
    fn duarte_ring_is_one_strip() {
        let duarte = builtin("duarte").unwrap();
        let r = build_half_ring(&duarte, &RingSpec::new(Direction::of(1, 0), RingKind::Plain, q(6), q(40))).unwrap();
        assert_eq!(r.strips.len(), 1);
        assert_eq!(r.lattice_points().len(), 7 * 41);
        assert_eq!(r.step_to_new_point(), q(1));
    }

    #[test]
    fn fa2f_ring_stacks_five_strips() {
        let fa2f = builtin("fa2f").unwrap();
        let u = Direction::of(2, 1);
        let r = build_half_ring(&fa2f, &RingSpec::new(u, RingKind::Plain, q(6), q(12))).unwrap();
        assert_eq!(r.strips.len(), 5);
        for w in r.strips.windows(2) {
            assert_eq!(w[0].mu_lo, w[1].mu_hi);
            // Shared short side: both back and front corners coincide.
            let (a, b) = (w[0].corners(), w[1].corners());
            assert_eq!(a[0], b[3]);
            assert_eq!(a[1], b[2]);
        }
        for (i, s) in r.strips.iter().enumerate() {
            assert_eq!(s.width(), q(6));
            assert_eq!(s.length(), q(12));
            for t in r.strips.iter().skip(i + 2) {
                assert!(t.mu_hi < s.mu_lo);
            }
        }
        assert!(r.step_to_new_point() > Q::zero());
        assert!(r.step_to_new_point() <= q(1));
    }

    #[test]
    fn generalized_exchange_preserves_area() {
        let fa2f = builtin("fa2f").unwrap();
        let u = Direction::of(2, 1);
        let r = build_half_ring(&fa2f, &RingSpec::new(u, RingKind::Generalized, q(6), q(12))).unwrap();
        assert_eq!(r.removed.len(), 5);
        for ((s, a), b) in r.strips.iter().zip(&r.added).zip(&r.removed) {
            assert_eq!(a.area(), b.area());
            assert_eq!(a.width(), s.width() / 3);
            assert_eq!(a.length(), s.length() / 3);
        }
        for (x, y) in filter_box(r.bbox(), |x, y| r.core_contains(x, y)) {
            assert!(r.contains(x, y));
            assert!(r.generalized_contains(x, y));
        }
    }

    #[test]
    fn elongated_first_strip_only() {
        let duarte = builtin("duarte").unwrap();
        let mut spec = RingSpec::new(Direction::of(1, 0), RingKind::Elongated, q(6), q(40));
        spec.extra_length = qf(21, 2);
        let r = build_half_ring(&duarte, &spec).unwrap();
        assert_eq!(r.strips[0].length(), q(40) + qf(21, 2));
    }

    #[test]
    fn rejects_bad_sizes() {
        let duarte = builtin("duarte").unwrap();
        let spec = RingSpec::new(Direction::of(1, 0), RingKind::Plain, q(0), q(40));
        assert!(matches!(build_half_ring(&duarte, &spec), Err(DropletError::Sizes(_))));
    }
}
