//! Bounded search for the difficulty of stable directions.
//!
//! The difficulty of an isolated stable direction `u` is the least number of
//! extra infected sites that lets the half-plane `H_u` grow infinitely far
//! along the line `ℓ_u`, on both sides separately. The search here works in
//! line coordinates `(s, h)` (see [`LineFrame`]): every set `Z` of at most
//! `bound` sites of the window `|s| ≤ R, 0 ≤ h ≤ R` is tried, and "infinitely
//! far" is certified by `line_span` consecutive infected line sites beyond the
//! window. A bounded failure is reported as [`DifficultyValue::Exceeds`].

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bootstrap::{probe_in_frame, LineFrame};
use crate::family::UpdateFamily;
use crate::geometry::{candidate_semicircles, classify, is_unstable, stable_set, Direction, StableSet, TriClass};

/// Default cap on the number of candidate sets tried per direction.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Environment variable overriding [`DEFAULT_BUDGET`].
pub const BUDGET_ENV: &str = "KCMLAB_BUDGET";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DifficultyValue {
    Finite(u32),
    /// No set of size at most `bound` works inside the search window.
    Exceeds(u32),
}

impl DifficultyValue {
    fn key(self) -> u64 {
        match self {
            DifficultyValue::Finite(k) => 2 * k as u64,
            DifficultyValue::Exceeds(b) => 2 * b as u64 + 1,
        }
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            DifficultyValue::Finite(k) => Some(k),
            DifficultyValue::Exceeds(_) => None,
        }
    }
}

impl Ord for DifficultyValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for DifficultyValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DifficultyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DifficultyValue::Finite(k) => write!(f, "{k}"),
            DifficultyValue::Exceeds(b) => write!(f, ">{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleParams {
    pub bound: u32,
    pub window_radius: i64,
    pub line_span: i64,
    /// Maximum number of candidate sets closed per direction.
    pub budget: u64,
}

impl OracleParams {
    /// `bound = 4`, `window_radius = 8·radius`, `line_span = max(64, 2·window_radius)`,
    /// budget from `KCMLAB_BUDGET` when set.
    pub fn for_family(family: &UpdateFamily) -> Self {
        let window_radius = 8 * family.radius() as i64;
        OracleParams { bound: 4, window_radius, line_span: 64.max(2 * window_radius), budget: budget_from_env() }
    }
}

pub fn budget_from_env() -> u64 {
    std::env::var(BUDGET_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DifficultyError {
    #[error(
        "oracle budget exhausted for direction {direction} after {enumerated} sets \
         (sizes completed: {completed_size}, right side: {plus:?}, left side: {minus:?})"
    )]
    BudgetExhausted { direction: Direction, enumerated: u64, completed_size: u32, plus: Option<u32>, minus: Option<u32> },
    #[error("certificate for direction {0} failed independent re-validation")]
    Revalidation(Direction),
}

/// A set `Z` whose addition to `H_u` infects `line_span` line sites on one side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    /// Sites in ordinary lattice coordinates.
    pub sites: Vec<(i64, i64)>,
    /// The same sites in line coordinates `(s, h)`.
    pub frame_sites: Vec<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionDifficulty {
    pub direction: Direction,
    pub value: DifficultyValue,
    pub plus: DifficultyValue,
    pub minus: DifficultyValue,
    pub plus_certificate: Option<Certificate>,
    pub minus_certificate: Option<Certificate>,
    pub sets_enumerated: u64,
}

/// Window sites sorted by `(h, s)`, so sets on the line come first.
fn window_sites(r: i64) -> Vec<(i64, i64)> {
    let mut v: Vec<(i64, i64)> = (0..=r).flat_map(|h| (-r..=r).map(move |s| (s, h))).collect();
    v.sort_by_key(|&(s, h)| (h, s));
    v
}

/// Sets of size `k` containing a site with `s = -r`, enumerated by their
/// first such site (in window order) and then lexicographically; each class of
/// translates along the line is hit once.
struct AnchoredSets<'a> {
    sites: &'a [(i64, i64)],
    r: i64,
    k: usize,
    anchor: usize,
    pool: Vec<usize>,
    idx: Option<Vec<usize>>,
}

impl<'a> AnchoredSets<'a> {
    fn new(sites: &'a [(i64, i64)], r: i64, k: usize) -> Self {
        let mut it = AnchoredSets { sites, r, k, anchor: 0, pool: vec![], idx: None };
        it.seek_anchor(0);
        it
    }

    fn seek_anchor(&mut self, from: usize) {
        self.idx = None;
        for a in from..self.sites.len() {
            if self.sites[a].0 != -self.r {
                continue;
            }
            let r = self.r;
            let sites = self.sites;
            self.pool = (0..sites.len()).filter(|&j| j != a && (sites[j].0 != -r || j > a)).collect();
            if self.k - 1 <= self.pool.len() {
                self.anchor = a;
                self.idx = Some((0..self.k - 1).collect());
                return;
            }
        }
    }
}

impl Iterator for AnchoredSets<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let idx = self.idx.as_mut()?;
        let mut set: Vec<usize> = idx.iter().map(|&i| self.pool[i]).collect();
        set.push(self.anchor);
        set.sort_unstable();
        let (n, m) = (self.pool.len(), idx.len());
        match (0..m).rev().find(|&i| idx[i] != i + n - m) {
            Some(i) => {
                idx[i] += 1;
                for j in i + 1..m {
                    idx[j] = idx[j - 1] + 1;
                }
            }
            None => self.seek_anchor(self.anchor + 1),
        }
        Some(set)
    }
}

const CHUNK: usize = 4096;

/// Difficulty of `u`: `Finite(0)` when unstable, the smaller one-sided value
/// when both sides are certified within `bound`, `Exceeds(bound)` otherwise.
pub fn alpha_of_direction(
    family: &UpdateFamily,
    u: Direction,
    params: &OracleParams,
) -> Result<DirectionDifficulty, DifficultyError> {
    alpha_with_stable(family, u, params, &stable_set(family))
}

fn alpha_with_stable(
    family: &UpdateFamily,
    u: Direction,
    params: &OracleParams,
    stable: &StableSet,
) -> Result<DirectionDifficulty, DifficultyError> {
    let zero = DifficultyValue::Finite(0);
    if is_unstable(family, u) {
        return Ok(DirectionDifficulty {
            direction: u,
            value: zero,
            plus: zero,
            minus: zero,
            plus_certificate: Some(Certificate { sites: vec![], frame_sites: vec![] }),
            minus_certificate: Some(Certificate { sites: vec![], frame_sites: vec![] }),
            sets_enumerated: 0,
        });
    }
    let exceeds = DifficultyValue::Exceeds(params.bound);
    if !stable.is_isolated(u) {
        return Ok(DirectionDifficulty {
            direction: u,
            value: exceeds,
            plus: exceeds,
            minus: exceeds,
            plus_certificate: None,
            minus_certificate: None,
            sets_enumerated: 0,
        });
    }
    let frame = LineFrame::new(u);
    let ff = frame.transform_family(family);
    let r = params.window_radius;
    let sites = window_sites(r);
    let mut plus: Option<(u32, Vec<usize>)> = None;
    let mut minus: Option<(u32, Vec<usize>)> = None;
    let mut enumerated = 0u64;
    'sizes: for k in 1..=params.bound {
        let mut sets = AnchoredSets::new(&sites, r, k as usize);
        loop {
            let want_plus = plus.is_none();
            let want_minus = minus.is_none();
            let remaining = params.budget.saturating_sub(enumerated);
            let chunk: Vec<Vec<usize>> = sets.by_ref().take(CHUNK.min(remaining as usize)).collect();
            if chunk.is_empty() {
                if remaining == 0 {
                    return Err(DifficultyError::BudgetExhausted {
                        direction: u,
                        enumerated,
                        completed_size: k - 1,
                        plus: plus.as_ref().map(|p| p.0),
                        minus: minus.as_ref().map(|m| m.0),
                    });
                }
                break;
            }
            let hits: Vec<(bool, bool)> = chunk
                .par_iter()
                .map(|set| {
                    let z: Vec<(i64, i64)> = set.iter().map(|&i| sites[i]).collect();
                    let p = probe_in_frame(&ff, &z, r, params.line_span, false);
                    (want_plus && p.right, want_minus && p.left)
                })
                .collect();
            let first_plus = hits.iter().position(|h| h.0);
            let first_minus = hits.iter().position(|h| h.1);
            if let Some(i) = first_plus {
                plus = Some((k, chunk[i].clone()));
            }
            if let Some(i) = first_minus {
                minus = Some((k, chunk[i].clone()));
            }
            // Sets count up to the point where every missing side was found.
            let done = match (want_plus, want_minus) {
                (true, true) => first_plus.zip(first_minus).map(|(a, b)| a.max(b)),
                (true, false) => first_plus,
                _ => first_minus,
            };
            enumerated += done.map_or(chunk.len() as u64, |i| i as u64 + 1);
            if plus.is_some() && minus.is_some() {
                break 'sizes;
            }
        }
    }
    let certify = |found: &Option<(u32, Vec<usize>)>, right: bool| -> Result<Option<Certificate>, DifficultyError> {
        let Some((_, set)) = found else { return Ok(None) };
        let z: Vec<(i64, i64)> = set.iter().map(|&i| sites[i]).collect();
        let p = probe_in_frame(&ff, &z, r, params.line_span, true);
        if (right && !p.right) || (!right && !p.left) {
            return Err(DifficultyError::Revalidation(u));
        }
        let orig = z.iter().map(|&(s, h)| frame.from_frame(s, h)).collect();
        Ok(Some(Certificate { sites: orig, frame_sites: z }))
    };
    let plus_certificate = certify(&plus, true)?;
    let minus_certificate = certify(&minus, false)?;
    let side = |f: &Option<(u32, Vec<usize>)>| f.as_ref().map_or(exceeds, |(k, _)| DifficultyValue::Finite(*k));
    let (pv, mv) = (side(&plus), side(&minus));
    let value = match (pv, mv) {
        (DifficultyValue::Finite(a), DifficultyValue::Finite(b)) => DifficultyValue::Finite(a.min(b)),
        _ => exceeds,
    };
    Ok(DirectionDifficulty {
        direction: u,
        value,
        plus: pv,
        minus: mv,
        plus_certificate,
        minus_certificate,
        sets_enumerated: enumerated,
    })
}

/// Smallest set (up to `params.bound` sites) that makes the half-plane `H_u`
/// grow along both half-lines at once. `None` if no such set was found; an
/// unstable `u` yields the empty set.
pub fn bidirectional_set(
    family: &UpdateFamily,
    u: Direction,
    params: &OracleParams,
) -> Result<Option<Certificate>, DifficultyError> {
    if is_unstable(family, u) {
        return Ok(Some(Certificate { sites: vec![], frame_sites: vec![] }));
    }
    let frame = LineFrame::new(u);
    let ff = frame.transform_family(family);
    let r = params.window_radius;
    let sites = window_sites(r);
    let mut enumerated = 0u64;
    for k in 1..=params.bound {
        let mut sets = AnchoredSets::new(&sites, r, k as usize);
        loop {
            let remaining = params.budget.saturating_sub(enumerated);
            let chunk: Vec<Vec<usize>> = sets.by_ref().take(CHUNK.min(remaining as usize)).collect();
            if chunk.is_empty() {
                if remaining == 0 {
                    return Err(DifficultyError::BudgetExhausted {
                        direction: u,
                        enumerated,
                        completed_size: k - 1,
                        plus: None,
                        minus: None,
                    });
                }
                break;
            }
            let hit = chunk.par_iter().position_first(|set| {
                let z: Vec<(i64, i64)> = set.iter().map(|&i| sites[i]).collect();
                let p = probe_in_frame(&ff, &z, r, params.line_span, false);
                p.right && p.left
            });
            enumerated += chunk.len() as u64;
            if let Some(i) = hit {
                let z: Vec<(i64, i64)> = chunk[i].iter().map(|&j| sites[j]).collect();
                let p = probe_in_frame(&ff, &z, r, params.line_span, true);
                if !(p.right && p.left) {
                    return Err(DifficultyError::Revalidation(u));
                }
                let orig = z.iter().map(|&(s, h)| frame.from_frame(s, h)).collect();
                return Ok(Some(Certificate { sites: orig, frame_sites: z }));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalLabel {
    AlphaRooted,
    BetaUnrooted,
    /// The search bound is too small to compare `β` with `2α`.
    UndecidedAtBound(u32),
}

impl fmt::Display for CriticalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriticalLabel::AlphaRooted => write!(f, "alpha-rooted"),
            CriticalLabel::BetaUnrooted => write!(f, "beta-unrooted"),
            CriticalLabel::UndecidedAtBound(b) => write!(f, "undecided at bound {b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyReport {
    /// One entry per isolated stable direction, counterclockwise.
    pub per_direction: Vec<DirectionDifficulty>,
    pub alpha: DifficultyValue,
    pub beta: DifficultyValue,
    /// Present for critical families only.
    pub critical_label: Option<CriticalLabel>,
    /// Present for critical families with a finite `α`.
    pub balanced: Option<bool>,
    pub params: OracleParams,
}

impl DifficultyReport {
    pub fn difficulty(&self, u: Direction) -> Option<DifficultyValue> {
        self.per_direction.iter().find(|d| d.direction == u).map(|d| d.value)
    }

    /// CSV rows: direction, one-sided values, value, and both certificates.
    pub fn to_csv(&self) -> String {
        let cert = |c: &Option<Certificate>| {
            c.as_ref().map_or(String::from("-"), |c| {
                c.sites.iter().map(|(x, y)| format!("{x}:{y}")).collect::<Vec<_>>().join(" ")
            })
        };
        let mut out = String::from("direction,alpha_plus,alpha_minus,alpha,certificate_plus,certificate_minus\n");
        for d in &self.per_direction {
            out.push_str(&format!(
                "\"{}\",{},{},{},{},{}\n",
                d.direction,
                d.plus,
                d.minus,
                d.value,
                cert(&d.plus_certificate),
                cert(&d.minus_certificate)
            ));
        }
        out
    }
}

/// Family-level `α`, `β`, balance and the critical label.
pub fn family_difficulties(family: &UpdateFamily, params: &OracleParams) -> Result<DifficultyReport, DifficultyError> {
    let cls = classify(family);
    let stable = &cls.stable;
    let per_direction = stable
        .isolated
        .iter()
        .map(|&u| alpha_with_stable(family, u, params, stable))
        .collect::<Result<Vec<_>, _>>()?;
    let exceeds = DifficultyValue::Exceeds(params.bound);
    let zero = DifficultyValue::Finite(0);
    let value_of = |u: Direction| per_direction.iter().find(|d| d.direction == u).map_or(zero, |d| d.value);

    let candidates = candidate_semicircles(&stable.event_points());
    let open_value = |c: &crate::geometry::Semicircle| {
        if stable.meets_infinitely(c) {
            exceeds
        } else {
            stable.isolated_in(c).into_iter().map(value_of).max().unwrap_or(zero)
        }
    };
    let alpha = candidates.iter().map(open_value).min().unwrap_or(zero);
    let beta = candidates.iter().map(|c| open_value(c).max(open_value(&c.opposite()))).min().unwrap_or(zero);

    let (critical_label, balanced) = if cls.label.tri == TriClass::Critical {
        let label = match (alpha, beta) {
            (DifficultyValue::Finite(a), DifficultyValue::Finite(b)) => {
                Some(if b >= 2 * a { CriticalLabel::AlphaRooted } else { CriticalLabel::BetaUnrooted })
            }
            (DifficultyValue::Finite(a), DifficultyValue::Exceeds(b)) => {
                Some(if b + 1 >= 2 * a { CriticalLabel::AlphaRooted } else { CriticalLabel::UndecidedAtBound(b) })
            }
            (DifficultyValue::Exceeds(b), _) => Some(CriticalLabel::UndecidedAtBound(b)),
        };
        let balanced = alpha.finite().map(|_| {
            candidates.iter().any(|c| {
                !stable.meets_infinitely_closed(c)
                    && stable.isolated.iter().filter(|d| c.contains_closed(**d)).all(|&d| value_of(d) <= alpha)
            })
        });
        (label, balanced)
    } else {
        (None, None)
    };
    Ok(DifficultyReport { per_direction, alpha, beta, critical_label, balanced, params: *params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin;

    fn params(f: &UpdateFamily) -> OracleParams {
        OracleParams { budget: DEFAULT_BUDGET, ..OracleParams::for_family(f) }
    }

    #[test]
    fn singleton_sets_are_the_left_column() {
        let sites = window_sites(3);
        let sets: Vec<_> = AnchoredSets::new(&sites, 3, 1).collect();
        assert_eq!(sets.len(), 4);
        assert!(sets.iter().all(|s| sites[s[0]].0 == -3));
    }

    #[test]
    fn anchored_sets_are_translation_classes() {
        let r = 2;
        let sites = window_sites(r);
        let sets: Vec<_> = AnchoredSets::new(&sites, r, 2).collect();
        let mut seen = std::collections::HashSet::new();
        for s in &sets {
            let pts: Vec<_> = s.iter().map(|&i| sites[i]).collect();
            assert_eq!(pts.iter().map(|p| p.0).min(), Some(-r));
            assert!(seen.insert(s.clone()));
        }
        // Pairs in a 5x3 window whose minimum column is the left edge.
        let all = 15 * 14 / 2;
        let without_left = 12 * 11 / 2;
        assert_eq!(sets.len(), all - without_left);
    }

    #[test]
    fn value_order() {
        use DifficultyValue::*;
        assert!(Finite(1) < Finite(2));
        assert!(Finite(4) < Exceeds(4));
        assert!(Exceeds(4) < Finite(5));
        assert_eq!(Finite(2).max(Exceeds(4)), Exceeds(4));
    }

    #[test]
    fn unstable_direction_is_zero() {
        let f = builtin("fa1f").unwrap();
        let d = alpha_of_direction(&f, Direction::of(1, 0), &params(&f)).unwrap();
        assert_eq!(d.value, DifficultyValue::Finite(0));
    }

    #[test]
    fn duarte_east_direction() {
        let f = builtin("duarte").unwrap();
        let d = alpha_of_direction(&f, Direction::of(1, 0), &params(&f)).unwrap();
        assert_eq!(d.value, DifficultyValue::Finite(1));
        assert_eq!(d.plus_certificate.unwrap().sites.len(), 1);
    }

    #[test]
    fn arc_direction_exceeds() {
        let f = builtin("duarte").unwrap();
        let d = alpha_of_direction(&f, Direction::of(0, 1), &params(&f)).unwrap();
        assert_eq!(d.value, DifficultyValue::Exceeds(4));
    }

    #[test]
    fn fa2f_axis_direction() {
        let f = builtin("fa2f").unwrap();
        let d = alpha_of_direction(&f, Direction::of(1, 0), &params(&f)).unwrap();
        assert_eq!(d.value, DifficultyValue::Finite(1));
        assert_eq!(d.plus_certificate.unwrap().frame_sites[0].1, 0);
    }

    #[test]
    fn reflection_consistency() {
        for name in ["duarte", "fa2f", "anisotropic"] {
            let f = builtin(name).unwrap();
            let g = f.negated();
            let p = params(&f);
            for &u in &stable_set(&f).isolated {
                let a = alpha_of_direction(&f, u, &p).unwrap();
                let b = alpha_of_direction(&g, -u, &p).unwrap();
                assert_eq!(a.value, b.value, "{name} {u}");
            }
        }
    }

    #[test]
    fn budget_exhaustion_reports_progress() {
        let f = builtin("anisotropic").unwrap();
        let p = OracleParams { budget: 5, ..params(&f) };
        let err = alpha_of_direction(&f, Direction::of(0, 1), &p).unwrap_err();
        assert!(matches!(err, DifficultyError::BudgetExhausted { enumerated: 5, completed_size: 0, .. }), "{err}");
    }

    #[test]
    fn family_values() {
        let fa1f = builtin("fa1f").unwrap();
        let r = family_difficulties(&fa1f, &params(&fa1f)).unwrap();
        assert_eq!((r.alpha, r.beta), (DifficultyValue::Finite(0), DifficultyValue::Finite(0)));
        assert_eq!(r.critical_label, None);

        let duarte = builtin("duarte").unwrap();
        let r = family_difficulties(&duarte, &params(&duarte)).unwrap();
        assert_eq!(r.alpha, DifficultyValue::Finite(1));
        assert_eq!(r.beta, DifficultyValue::Exceeds(4));
        assert_eq!(r.critical_label, Some(CriticalLabel::AlphaRooted));
        assert_eq!(r.balanced, Some(false));

        let fa2f = builtin("fa2f").unwrap();
        let r = family_difficulties(&fa2f, &params(&fa2f)).unwrap();
        assert_eq!((r.alpha, r.beta), (DifficultyValue::Finite(1), DifficultyValue::Finite(1)));
        assert_eq!(r.critical_label, Some(CriticalLabel::BetaUnrooted));
        assert_eq!(r.balanced, Some(true));
    }

    #[test]
    fn anisotropic_values() {
        let f = builtin("anisotropic").unwrap();
        let r = family_difficulties(&f, &params(&f)).unwrap();
        assert_eq!(r.difficulty(Direction::of(1, 0)), Some(DifficultyValue::Finite(1)));
        assert_eq!(r.difficulty(Direction::of(0, 1)), Some(DifficultyValue::Finite(2)));
        assert_eq!(r.alpha, DifficultyValue::Finite(1));
        assert!(r.alpha <= r.beta);
    }
}
