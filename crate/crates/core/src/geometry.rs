//! Exact arithmetic on rational directions of the circle.
//!
//! A rational direction is stored as its primitive integer representative.
//! Every comparison goes through integer dot and cross products, so there is
//! no floating point anywhere in this module.
//!
//! The stable set of a family is computed from the finite set of
//! "breakpoints" `±x⊥` over all rule offsets `x`: between two consecutive
//! breakpoints the sign of every `⟨x,u⟩` is constant, so stability only has
//! to be decided at each breakpoint and at one interior direction per gap.

use std::cmp::Ordering;
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{Offset, Rule, UpdateFamily};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("zero vector is not a direction")]
    ZeroDirection,
    #[error("semicircle not admissible: it meets a non-degenerate arc of stable directions centered at {0}")]
    SemicircleNotAdmissible(Direction),
}

/// A rational point of the unit circle, stored as a primitive integer vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Direction {
    x: i64,
    y: i64,
}

impl Direction {
    /// Normalizes `(x, y)` to its primitive representative.
    pub fn new(x: i64, y: i64) -> Result<Self, GeometryError> {
        if x == 0 && y == 0 {
            return Err(GeometryError::ZeroDirection);
        }
        let g = x.gcd(&y);
        Ok(Direction { x: x / g, y: y / g })
    }

    /// Panicking variant of [`Direction::new`] for literals.
    pub fn of(x: i64, y: i64) -> Self {
        Self::new(x, y).expect("non-zero direction")
    }

    pub fn x(self) -> i64 {
        self.x
    }

    pub fn y(self) -> i64 {
        self.y
    }

    pub fn dot(self, other: Direction) -> i64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Direction) -> i64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dot_offset(self, o: Offset) -> i64 {
        self.x * o.dx as i64 + self.y * o.dy as i64
    }

    pub fn norm2(self) -> i64 {
        self.x * self.x + self.y * self.y
    }

    /// Rotation by +90 degrees.
    pub fn rot_ccw(self) -> Direction {
        Direction { x: -self.y, y: self.x }
    }

    /// Rotation by -90 degrees.
    pub fn rot_cw(self) -> Direction {
        Direction { x: self.y, y: -self.x }
    }

    /// Step along `ℓ_u⁺`: the lattice direction to the right when looking along `u`.
    pub fn line_step(self) -> (i64, i64) {
        (self.y, -self.x)
    }

    /// A lattice vector `w` with `⟨w, u⟩ = 1`; exists because `u` is primitive.
    pub fn unit_level_vector(self) -> (i64, i64) {
        let e = self.x.extended_gcd(&self.y);
        // e.x * x + e.y * y = gcd = ±1
        (e.x * e.gcd, e.y * e.gcd)
    }

    /// Half-plane index used for the angular order: 0 for angles in [0, π), 1 otherwise.
    fn half(self) -> u8 {
        if self.y > 0 || (self.y == 0 && self.x > 0) {
            0
        } else {
            1
        }
    }

    /// Counterclockwise angle comparison, measured from (1, 0).
    pub fn angle_cmp(self, other: Direction) -> Ordering {
        self.half().cmp(&other.half()).then_with(|| 0.cmp(&self.cross(other)))
    }

    /// Angle of `self` measured counterclockwise from `from`, expressed as a
    /// direction (the rotation that maps `from` to `(1,0)` applied to `self`).
    fn relative_to(self, from: Direction) -> Direction {
        Direction { x: from.dot(self), y: from.cross(self) }
    }

    /// Mirror image of `self` in the line spanned by `axis`.
    pub fn reflect_about(self, axis: Direction) -> Direction {
        let d = self.dot(axis);
        let n = axis.norm2();
        Direction::of(2 * d * axis.x - n * self.x, 2 * d * axis.y - n * self.y)
    }

    /// A direction strictly inside the open counterclockwise arc from `a` to `b` (`a ≠ b`).
    pub fn interior_between(a: Direction, b: Direction) -> Direction {
        let c = a.cross(b);
        if c > 0 {
            Direction::of(a.x + b.x, a.y + b.y)
        } else if c < 0 {
            Direction::of(-(a.x + b.x), -(a.y + b.y))
        } else {
            // opposite (a == b is excluded by the caller)
            a.rot_ccw()
        }
    }
}

impl std::ops::Neg for Direction {
    type Output = Direction;
    fn neg(self) -> Direction {
        Direction { x: -self.x, y: -self.y }
    }
}

impl Ord for Direction {
    fn cmp(&self, other: &Self) -> Ordering {
        self.angle_cmp(*other)
    }
}

impl PartialOrd for Direction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// `d` lies strictly inside the counterclockwise arc from `a` to `b` (`a ≠ b`).
pub fn strictly_between_ccw(a: Direction, b: Direction, d: Direction) -> bool {
    if d == a || d == b {
        return false;
    }
    d.relative_to(a).angle_cmp(b.relative_to(a)) == Ordering::Less
}

/// A connected subset of the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arc {
    Full,
    /// Counterclockwise from `start` to `end`. `start == end` with both ends
    /// closed is a single point.
    Span { start: Direction, end: Direction, closed_start: bool, closed_end: bool },
}

impl Arc {
    pub fn closed(start: Direction, end: Direction) -> Arc {
        Arc::Span { start, end, closed_start: true, closed_end: true }
    }

    pub fn open(start: Direction, end: Direction) -> Arc {
        Arc::Span { start, end, closed_start: false, closed_end: false }
    }

    pub fn point(d: Direction) -> Arc {
        Arc::closed(d, d)
    }

    /// The open semicircle with the given midpoint.
    pub fn open_semicircle(mid: Direction) -> Arc {
        Arc::open(mid.rot_cw(), mid.rot_ccw())
    }

    pub fn is_point(&self) -> bool {
        matches!(self, Arc::Span { start, end, .. } if start == end)
    }

    pub fn contains(&self, d: Direction) -> bool {
        match *self {
            Arc::Full => true,
            Arc::Span { start, end, closed_start, closed_end } => {
                if start == end {
                    return d == start && closed_start && closed_end;
                }
                if d == start {
                    return closed_start;
                }
                if d == end {
                    return closed_end;
                }
                strictly_between_ccw(start, end, d)
            }
        }
    }
}

impl fmt::Display for Arc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arc::Full => write!(f, "full"),
            Arc::Span { start, end, closed_start, closed_end } => write!(
                f,
                "{}{},{}{}",
                if *closed_start { '[' } else { '(' },
                start,
                end,
                if *closed_end { ']' } else { ')' }
            ),
        }
    }
}

/// An open semicircle `(start, -start)` traversed counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Semicircle {
    pub start: Direction,
}

impl Semicircle {
    pub fn centered(mid: Direction) -> Self {
        Semicircle { start: mid.rot_cw() }
    }

    pub fn midpoint(&self) -> Direction {
        self.start.rot_ccw()
    }

    pub fn end(&self) -> Direction {
        -self.start
    }

    pub fn contains_open(&self, d: Direction) -> bool {
        strictly_between_ccw(self.start, -self.start, d)
    }

    pub fn contains_closed(&self, d: Direction) -> bool {
        d == self.start || d == -self.start || self.contains_open(d)
    }

    pub fn opposite(&self) -> Semicircle {
        Semicircle { start: -self.start }
    }

    /// Whether the open (or closed) semicircle meets a closed non-degenerate arc.
    fn meets_arc(&self, arc: &Arc, closed: bool) -> bool {
        match *arc {
            Arc::Full => true,
            Arc::Span { start, end, .. } => {
                let inside = |d| if closed { self.contains_closed(d) } else { self.contains_open(d) };
                inside(start) || inside(end) || arc.contains(self.midpoint())
            }
        }
    }
}

/// The set of stable directions as disjoint closed arcs plus isolated points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableSet {
    /// Closed, non-degenerate arcs (or a single `Full`), sorted counterclockwise.
    pub arcs: Vec<Arc>,
    /// Isolated stable directions, sorted counterclockwise.
    pub isolated: Vec<Direction>,
}

impl StableSet {
    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty() && self.isolated.is_empty()
    }

    pub fn contains(&self, d: Direction) -> bool {
        self.isolated.contains(&d) || self.arcs.iter().any(|a| a.contains(d))
    }

    pub fn is_isolated(&self, d: Direction) -> bool {
        self.isolated.contains(&d)
    }

    /// Arc endpoints and isolated points: the places where the set changes.
    pub fn event_points(&self) -> Vec<Direction> {
        let mut ev = self.isolated.clone();
        for a in &self.arcs {
            if let Arc::Span { start, end, .. } = *a {
                ev.push(start);
                ev.push(end);
            }
        }
        ev
    }

    /// Whether an open semicircle meets the set in infinitely many directions.
    pub fn meets_infinitely(&self, c: &Semicircle) -> bool {
        self.arcs.iter().any(|a| c.meets_arc(a, false))
    }

    /// Same test for the closed semicircle.
    pub fn meets_infinitely_closed(&self, c: &Semicircle) -> bool {
        self.arcs.iter().any(|a| c.meets_arc(a, true))
    }

    /// Isolated stable points inside the open semicircle.
    pub fn isolated_in(&self, c: &Semicircle) -> Vec<Direction> {
        self.isolated.iter().copied().filter(|d| c.contains_open(*d)).collect()
    }

    pub fn is_disjoint_from(&self, c: &Semicircle) -> bool {
        !self.meets_infinitely(c) && self.isolated_in(c).is_empty()
    }

    /// Text form: one line per component, `arc [a,b]` or `point p`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for a in &self.arcs {
            match a {
                Arc::Full => out.push_str("arc full\n"),
                Arc::Span { start, end, .. } => out.push_str(&format!("arc [{start},{end}]\n")),
            }
        }
        for p in &self.isolated {
            out.push_str(&format!("point {p}\n"));
        }
        out
    }
}

/// `⊥` directions of every offset in the given rules, sorted and deduplicated.
fn breakpoints<'a>(rules: impl IntoIterator<Item = &'a Rule>) -> Vec<Direction> {
    let mut pts: Vec<Direction> = rules
        .into_iter()
        .flat_map(|r| r.sites().iter())
        .flat_map(|o| {
            let p = Direction::of(-(o.dy as i64), o.dx as i64);
            [p, -p]
        })
        .collect();
    pts.sort();
    pts.dedup();
    pts
}

fn rule_fits(rule: &Rule, u: Direction) -> bool {
    rule.sites().iter().all(|&o| u.dot_offset(o) < 0)
}

/// True iff some rule lies strictly inside the half-plane `H_u`.
pub fn is_unstable(family: &UpdateFamily, u: Direction) -> bool {
    family.rules().iter().any(|r| rule_fits(r, u))
}

/// The open arc of directions `u` with `X ⊂ H_u`, or `None` if it is empty.
pub fn unstable_arc(rule: &Rule) -> Option<Arc> {
    let pts = breakpoints(std::iter::once(rule));
    let k = pts.len();
    (0..k).find_map(|i| {
        let (a, b) = (pts[i], pts[(i + 1) % k]);
        rule_fits(rule, Direction::interior_between(a, b)).then(|| Arc::open(a, b))
    })
}

/// Exact stable set of the family.
pub fn stable_set(family: &UpdateFamily) -> StableSet {
    let pts = breakpoints(family.rules());
    let k = pts.len();
    // Cyclic sequence point_0, gap_0, point_1, gap_1, ...; gap_i lies between point_i and point_{i+1}.
    let stable: Vec<bool> = (0..2 * k)
        .map(|j| {
            let i = j / 2;
            let d = if j % 2 == 0 { pts[i] } else { Direction::interior_between(pts[i], pts[(i + 1) % k]) };
            !is_unstable(family, d)
        })
        .collect();
    if stable.iter().all(|&s| s) {
        return StableSet { arcs: vec![Arc::Full], isolated: vec![] };
    }
    // Rotate so that the scan starts right after an unstable element.
    let first_unstable = stable.iter().position(|&s| !s).expect("some element is unstable");
    let mut arcs = Vec::new();
    let mut isolated = Vec::new();
    let mut run: Vec<usize> = Vec::new();
    let n = 2 * k;
    for step in 1..=n {
        let j = (first_unstable + step) % n;
        if stable[j] {
            run.push(j);
        } else if !run.is_empty() {
            flush_run(&run, &pts, &mut arcs, &mut isolated);
            run.clear();
        }
    }
    if !run.is_empty() {
        flush_run(&run, &pts, &mut arcs, &mut isolated);
    }
    arcs.sort_by(|a, b| match (a, b) {
        (Arc::Span { start: s1, .. }, Arc::Span { start: s2, .. }) => s1.cmp(s2),
        _ => Ordering::Equal,
    });
    isolated.sort();
    StableSet { arcs, isolated }
}

fn flush_run(run: &[usize], pts: &[Direction], arcs: &mut Vec<Arc>, isolated: &mut Vec<Direction>) {
    // The stable set is closed, so a run always starts and ends on a breakpoint.
    debug_assert!(run[0].is_multiple_of(2) && run[run.len() - 1].is_multiple_of(2), "stable run must be closed");
    let start = pts[run[0] / 2];
    if run.len() == 1 {
        isolated.push(start);
    } else {
        arcs.push(Arc::closed(start, pts[run[run.len() - 1] / 2]));
    }
}

/// Every combinatorially distinct open semicircle relative to the given event
/// points: starts at each event (and its antipode) and at one direction strictly
/// inside every gap between consecutive events.
pub fn candidate_semicircles(events: &[Direction]) -> Vec<Semicircle> {
    let mut e: Vec<Direction> = events.iter().flat_map(|&d| [d, -d]).collect();
    e.sort();
    e.dedup();
    if e.is_empty() {
        e = vec![Direction::of(1, 0), Direction::of(0, 1), Direction::of(-1, 0), Direction::of(0, -1)];
    }
    let k = e.len();
    let mids = (0..k).map(|i| Direction::interior_between(e[i], e[(i + 1) % k]));
    // Gap midpoints first: they are preferred as witnesses.
    mids.chain(e.iter().copied()).map(|start| Semicircle { start }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TriClass {
    Supercritical,
    Critical,
    Subcritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rootedness {
    Rooted,
    Unrooted,
}

/// Universality class; `rooted` is present exactly for supercritical families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassLabel {
    pub tri: TriClass,
    pub rooted: Option<Rootedness>,
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tri = match self.tri {
            TriClass::Supercritical => "supercritical",
            TriClass::Critical => "critical",
            TriClass::Subcritical => "subcritical",
        };
        match self.rooted {
            Some(Rootedness::Rooted) => write!(f, "{tri} rooted"),
            Some(Rootedness::Unrooted) => write!(f, "{tri} unrooted"),
            None => write!(f, "{tri}"),
        }
    }
}

/// Classification together with the semicircle that witnesses it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: ClassLabel,
    pub stable: StableSet,
    /// Supercritical: an open semicircle free of stable directions, chosen so
    /// that its opposite is free too when the family is unrooted.
    /// Critical: an open semicircle meeting the stable set finitely.
    pub witness: Option<Semicircle>,
}

pub fn classify_tri(family: &UpdateFamily) -> ClassLabel {
    classify(family).label
}

pub fn classify(family: &UpdateFamily) -> Classification {
    let stable = stable_set(family);
    let candidates = candidate_semicircles(&stable.event_points());
    let free = |c: &Semicircle| stable.is_disjoint_from(c);
    if candidates.iter().any(free) {
        let rooted = if has_non_opposite_pair(&stable) { Rootedness::Rooted } else { Rootedness::Unrooted };
        let witness = match rooted {
            Rootedness::Rooted => candidates.iter().find(|c| free(c)),
            Rootedness::Unrooted => candidates.iter().find(|c| free(c) && free(&c.opposite())),
        };
        return Classification {
            label: ClassLabel { tri: TriClass::Supercritical, rooted: Some(rooted) },
            witness: witness.copied(),
            stable,
        };
    }
    let witness = candidates.iter().find(|c| !stable.meets_infinitely(c)).copied();
    let tri = if witness.is_some() { TriClass::Critical } else { TriClass::Subcritical };
    Classification { label: ClassLabel { tri, rooted: None }, stable, witness }
}

fn has_non_opposite_pair(s: &StableSet) -> bool {
    if !s.arcs.is_empty() {
        return true;
    }
    let pts = &s.isolated;
    pts.iter().enumerate().any(|(i, a)| pts[i + 1..].iter().any(|b| a.cross(*b) != 0 || a == b))
}

/// Quasi-stable directions of the open semicircle centered at `u`, in
/// clockwise order (starting next to `u⊥`). The list is closed under
/// reflection about `u`.
pub fn quasi_stable_directions(family: &UpdateFamily, u: Direction) -> Result<Vec<Direction>, GeometryError> {
    let c = Semicircle::centered(u);
    let stable = stable_set(family);
    if stable.meets_infinitely(&c) {
        return Err(GeometryError::SemicircleNotAdmissible(u));
    }
    let mut base: Vec<Direction> = vec![u];
    base.extend(stable.isolated_in(&c));
    for o in family.offsets() {
        let p = Direction::of(-(o.dy as i64), o.dx as i64);
        base.extend([p, -p].into_iter().filter(|d| c.contains_open(*d)));
    }
    let mut all: Vec<Direction> = base.iter().flat_map(|&v| [v, v.reflect_about(u)]).collect();
    // Reflection about u maps the open semicircle onto itself.
    debug_assert!(all.iter().all(|d| c.contains_open(*d)));
    let end = c.end();
    all.sort_by(|a, b| b.relative_to(c.start).angle_cmp(a.relative_to(c.start)));
    all.dedup();
    debug_assert!(all.first().is_none_or(|d| strictly_between_ccw(c.start, end, *d)));
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin;

    fn d(x: i64, y: i64) -> Direction {
        Direction::of(x, y)
    }

    #[test]
    fn normalization_and_order() {
        assert_eq!(d(4, -6), d(2, -3));
        assert_eq!(Direction::new(0, 0), Err(GeometryError::ZeroDirection));
        let mut v = vec![d(0, -1), d(-1, 0), d(1, 1), d(1, 0), d(0, 1), d(1, -1)];
        v.sort();
        assert_eq!(v, vec![d(1, 0), d(1, 1), d(0, 1), d(-1, 0), d(0, -1), d(1, -1)]);
    }

    #[test]
    fn unit_level_vector_has_unit_level() {
        for &(x, y) in &[(1, 0), (0, 1), (2, 1), (-3, 5), (7, -4), (-1, -1)] {
            let u = d(x, y);
            let (wx, wy) = u.unit_level_vector();
            assert_eq!(wx * u.x() + wy * u.y(), 1, "{u}");
        }
    }

    #[test]
    fn is_unstable_examples() {
        let fa1f = builtin("fa1f").unwrap();
        assert!(is_unstable(&fa1f, d(1, 0)));
        let duarte = builtin("duarte").unwrap();
        assert!(!is_unstable(&duarte, d(1, 0)));
        let east = builtin("east2d").unwrap();
        assert!(!is_unstable(&east, d(-1, -1)));
    }

    #[test]
    fn unstable_arc_examples() {
        let r = |s: &[(i32, i32)]| Rule::new(s.iter().map(|&(x, y)| Offset::new(x, y))).unwrap();
        assert_eq!(unstable_arc(&r(&[(-1, 0)])), Some(Arc::open(d(0, -1), d(0, 1))));
        assert_eq!(unstable_arc(&r(&[(0, 1), (0, -1)])), None);
        assert_eq!(unstable_arc(&r(&[(-1, 0), (0, 1)])), Some(Arc::open(d(0, -1), d(1, 0))));
    }

    #[test]
    fn stable_set_examples() {
        assert!(stable_set(&builtin("fa1f").unwrap()).is_empty());
        let duarte = stable_set(&builtin("duarte").unwrap());
        assert_eq!(duarte.arcs, vec![Arc::closed(d(0, 1), d(0, -1))]);
        assert_eq!(duarte.isolated, vec![d(1, 0)]);
        let east = stable_set(&builtin("east2d").unwrap());
        assert_eq!(east.arcs, vec![Arc::closed(d(-1, 0), d(0, -1))]);
        assert!(east.isolated.is_empty());
        let fa2f = stable_set(&builtin("fa2f").unwrap());
        assert!(fa2f.arcs.is_empty());
        assert_eq!(fa2f.isolated, vec![d(1, 0), d(0, 1), d(-1, 0), d(0, -1)]);
        assert_eq!(duarte.to_text(), "arc [(0,1),(0,-1)]\npoint (1,0)\n");
    }

    #[test]
    fn full_stable_set() {
        let f = UpdateFamily::from_offsets("vertical-pair", &[&[(0, 1), (0, -1)]]);
        let s = stable_set(&f);
        assert_eq!(s.arcs, vec![Arc::Full]);
        assert_eq!(classify_tri(&f).tri, TriClass::Subcritical);
    }

    #[test]
    fn classification_regressions() {
        let cls = |n| classify_tri(&builtin(n).unwrap());
        assert_eq!(cls("fa1f"), ClassLabel { tri: TriClass::Supercritical, rooted: Some(Rootedness::Unrooted) });
        assert_eq!(cls("east2d"), ClassLabel { tri: TriClass::Supercritical, rooted: Some(Rootedness::Rooted) });
        assert_eq!(cls("east1d-embedded").rooted, Some(Rootedness::Rooted));
        assert_eq!(cls("fa2f"), ClassLabel { tri: TriClass::Critical, rooted: None });
        assert_eq!(cls("duarte"), ClassLabel { tri: TriClass::Critical, rooted: None });
        assert_eq!(cls("anisotropic"), ClassLabel { tri: TriClass::Critical, rooted: None });
    }

    #[test]
    fn subcritical_three_neighbour() {
        let nb = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        let mut rules = Vec::new();
        for skip in 0..4 {
            let sites: Vec<(i32, i32)> = (0..4).filter(|&i| i != skip).map(|i| nb[i]).collect();
            rules.push(sites);
        }
        let refs: Vec<&[(i32, i32)]> = rules.iter().map(|r| r.as_slice()).collect();
        let f = UpdateFamily::from_offsets("3nb", &refs);
        assert_eq!(classify_tri(&f).tri, TriClass::Subcritical);
    }

    #[test]
    fn supercritical_witnesses() {
        let c = classify(&builtin("east2d").unwrap());
        let w = c.witness.unwrap();
        assert!(c.stable.is_disjoint_from(&w));
        assert_eq!(w.midpoint(), d(1, 1));
        let c = classify(&builtin("fa1f").unwrap());
        let w = c.witness.unwrap();
        assert!(c.stable.is_disjoint_from(&w.opposite()));
    }

    #[test]
    fn quasi_stable_examples() {
        let duarte = builtin("duarte").unwrap();
        let q = quasi_stable_directions(&duarte, d(1, 0)).unwrap();
        assert_eq!(q, vec![d(1, 0)]);
        let single = UpdateFamily::from_offsets("west", &[&[(-1, 0)]]);
        assert_eq!(quasi_stable_directions(&single, d(1, 0)).unwrap(), vec![d(1, 0)]);
        let fa2f = builtin("fa2f").unwrap();
        let q = quasi_stable_directions(&fa2f, d(2, 1)).unwrap();
        assert_eq!(q, vec![d(0, 1), d(3, 4), d(2, 1), d(1, 0), d(4, -3)]);
        assert!(matches!(
            quasi_stable_directions(&duarte, d(0, 1)),
            Err(GeometryError::SemicircleNotAdmissible(_))
        ));
    }

    #[test]
    fn quasi_stable_reflection_invariant() {
        let fams = ["fa2f", "anisotropic", "duarte", "fa1f", "east2d"];
        let mids = [d(1, 0), d(2, 1), d(1, 3), d(-2, 5), d(3, -1)];
        for name in fams {
            let f = builtin(name).unwrap();
            for u in mids {
                let Ok(q) = quasi_stable_directions(&f, u) else { continue };
                assert!(q.contains(&u));
                let mut refl: Vec<_> = q.iter().map(|v| v.reflect_about(u)).collect();
                refl.sort();
                let mut sorted = q.clone();
                sorted.sort();
                assert_eq!(refl, sorted, "{name} {u}");
            }
        }
    }
}
