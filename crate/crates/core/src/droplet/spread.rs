//! Voracious sets, helping sets and restricted-closure checks of droplet growth.

use bitvec::prelude::*;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ring::{neighbourhood, HalfRing};
use super::strip::{q, VStrip, Q};
use super::DropletError;
use crate::bootstrap::{closure, closure_naive, Configuration, LineFrame, Region};
use crate::difficulty::{bidirectional_set, OracleParams};
use crate::family::UpdateFamily;
use crate::geometry::Direction;

/// A set that, placed on the external boundary of a large enough v-strip away
/// from its ends, infects that whole stretch of the boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Voracious {
    pub v: Direction,
    /// Sites in line coordinates `(s, h)` of `v`.
    pub frame_sites: Vec<(i64, i64)>,
    /// Sites relative to the anchor, in lattice coordinates.
    pub sites: Vec<(i64, i64)>,
    /// Translates `a_i` (lattice coordinates) used by helping sets.
    pub translates: Vec<(i64, i64)>,
    /// Primitive step along `ℓ_v⁺`.
    pub period: (i64, i64),
    /// Distance from the boundary ends beyond which anchors are reliable.
    pub lambda: i64,
}

/// Test strip for `v`: width 4, long enough for anchors at distance `cap`.
fn test_strip(u: Direction, v: Direction, cap: i64) -> VStrip {
    let n = u.norm2() as i128;
    let uv = u.dot(v) as i128;
    let half = q(2 * cap + 8) * n;
    VStrip::new(u, v, q(-4) * uv, Q::zero(), -half, half)
}

/// Checks that every anchor of `∂^ext_λ` of the test strip, seeded with `z`,
/// infects all of `∂^ext_λ` inside the `λ`-neighbourhood of the strip.
fn anchors_work(family: &UpdateFamily, s: &VStrip, z: &[(i64, i64)], lambda: i64) -> bool {
    let targets = s.external_points(q(lambda));
    if targets.is_empty() {
        return false;
    }
    let mut grown = s.clone();
    grown.c_hi = Q::from_integer(s.external_boundary().level);
    let (b, pts) = neighbourhood(&[&grown], lambda);
    let base: Vec<(i64, i64)> = s.lattice_points();
    let anchors: Vec<(i64, i64)> = if z.is_empty() { vec![targets[0]] } else { targets.clone() };
    anchors.par_iter().all(|&p| {
        let seeds = base.iter().copied().chain(z.iter().map(|&(dx, dy)| (p.0 + dx, p.1 + dy)));
        let res = closure(family, &restricted(b, &pts, seeds));
        targets.iter().all(|&(x, y)| res.final_config.get(x, y))
    })
}

fn restricted(b: (i64, i64, i64, i64), allowed: &[(i64, i64)], seeds: impl IntoIterator<Item = (i64, i64)>) -> Configuration {
    let region = Region::boxed(b.0, b.1, b.2, b.3);
    let mut mask = bitvec![0; region.len()];
    for &(x, y) in allowed {
        if let Some(i) = region.index(x, y) {
            mask.set(i, true);
        }
    }
    Configuration::with_sites(region.with_restriction(mask), seeds)
}

/// Finds a voracious set for `v`: the smallest set that grows `H_v` along both
/// half-lines, placed at a single translate with period one line step, and the
/// smallest `λ ∈ {1, 2, 4, …, lambda_cap}` for which it works on a test strip.
pub fn find_voracious(
    family: &UpdateFamily,
    u: Direction,
    v: Direction,
    params: &OracleParams,
    lambda_cap: i64,
) -> Result<Voracious, DropletError> {
    let cert = bidirectional_set(family, v, params)?.ok_or(DropletError::NoVoraciousSet(v, params.bound))?;
    let frame = LineFrame::new(v);
    // Centre the set along the line so that the anchor sits in its middle.
    let n = cert.frame_sites.len().max(1) as i64;
    let mid = cert.frame_sites.iter().map(|p| p.0).sum::<i64>().div_euclid(n);
    let frame_sites: Vec<(i64, i64)> = cert.frame_sites.iter().map(|&(s, h)| (s - mid, h)).collect();
    let sites: Vec<(i64, i64)> = frame_sites.iter().map(|&(s, h)| frame.from_frame(s, h)).collect();
    let strip = test_strip(u, v, lambda_cap);
    let mut lambda = 1;
    while lambda <= lambda_cap {
        if anchors_work(family, &strip, &sites, lambda) {
            return Ok(Voracious {
                v,
                frame_sites,
                sites,
                translates: vec![(0, 0)],
                period: v.line_step(),
                lambda,
            });
        }
        lambda *= 2;
    }
    Err(DropletError::UndeterminedAtCap { direction: v, cap: lambda_cap })
}

/// `Z_v + a_i + k_i·b + x` for each translate `a_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelpingSet {
    /// Index of the strip (0-based, top first).
    pub strip: usize,
    /// Index of the ring translate the set helps.
    pub translate: usize,
    /// Base point `x` on `∂^ext_λ`.
    pub anchor: (i64, i64),
    /// The `k_i`, one per translate of the voracious set.
    pub offsets: Vec<i64>,
    pub sites: Vec<(i64, i64)>,
}

impl HelpingSet {
    /// Places the voracious set on `∂^ext_λ` of `strip`, at the usable anchor
    /// closest to the middle. `accept` can veto anchors whose sites fall
    /// outside an allowed area.
    pub fn place(
        strip: &VStrip,
        vor: &Voracious,
        strip_index: usize,
        translate: usize,
        accept: impl Fn(&[(i64, i64)]) -> bool,
    ) -> Option<HelpingSet> {
        let anchors = strip.external_points(q(vor.lambda));
        let mid = anchors.len() as i64 / 2;
        let mut order: Vec<usize> = (0..anchors.len()).collect();
        order.sort_by_key(|&i| ((i as i64 - mid).abs(), i));
        order.into_iter().find_map(|i| {
            let p = anchors[i];
            let sites: Vec<(i64, i64)> = vor
                .translates
                .iter()
                .flat_map(|a| vor.sites.iter().map(move |z| (p.0 + a.0 + z.0, p.1 + a.1 + z.1)))
                .collect();
            accept(&sites).then(|| HelpingSet {
                strip: strip_index,
                translate,
                anchor: p,
                offsets: vec![0; vor.translates.len()],
                sites,
            })
        })
    }

    /// Whether the sites have the translate structure for `vor` at `anchor`.
    pub fn matches_shape(&self, vor: &Voracious) -> bool {
        let mut want: Vec<(i64, i64)> = Vec::new();
        for (a, k) in vor.translates.iter().zip(&self.offsets) {
            let base = (self.anchor.0 + a.0 + k * vor.period.0, self.anchor.1 + a.1 + k * vor.period.1);
            want.extend(vor.sites.iter().map(|z| (base.0 + z.0, base.1 + z.1)));
        }
        want.sort_unstable();
        let mut have = self.sites.clone();
        have.sort_unstable();
        want == have
    }
}

/// Voracious sets for every strip direction of a ring (one search per distinct direction).
pub fn voracious_for_ring(
    family: &UpdateFamily,
    ring: &HalfRing,
    params: &OracleParams,
    lambda_cap: i64,
) -> Result<Vec<Voracious>, DropletError> {
    ring.strips.iter().map(|s| find_voracious(family, ring.u(), s.v, params, lambda_cap)).collect()
}

/// Shifts `0 = t_0 < t_1 < …` of successive translates `R, R*, R**, …`,
/// stopping at the first one that reaches `total`.
pub fn translate_shifts(ring: &HalfRing, total: Q) -> Vec<Q> {
    let mut out = vec![Q::zero()];
    let mut t = Q::zero();
    while t < total {
        t += ring.translated(t).step_to_new_point();
        out.push(t);
    }
    out
}

/// Helping sets for every strip of each translate `R + t_k·u` with `t_k < total`.
pub fn helping_sets_upto(
    ring: &HalfRing,
    vors: &[Voracious],
    total: Q,
    accept: impl Fn(&[(i64, i64)]) -> bool + Copy,
) -> Vec<HelpingSet> {
    let shifts = translate_shifts(ring, total);
    let mut out = Vec::new();
    for (k, &t) in shifts.iter().enumerate().filter(|(_, t)| **t < total) {
        let r = ring.translated(t);
        for (i, (s, vor)) in r.strips.iter().zip(vors).enumerate() {
            if let Some(h) = HelpingSet::place(s, vor, i, k, accept) {
                out.push(h);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpreadMode {
    /// Target: the first translate `R*` with a new lattice point.
    AdvanceOne,
    /// Target: `R + w·u`, with the helping sets supplied by the caller.
    AdvanceWidth,
    /// Target: `R + w·u`, with helping sets generated for every intermediate translate.
    Corollary,
}

impl std::str::FromStr for SpreadMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "advance-one" => Ok(SpreadMode::AdvanceOne),
            "advance-width" => Ok(SpreadMode::AdvanceWidth),
            "corollary" => Ok(SpreadMode::Corollary),
            _ => Err(format!("unknown mode `{s}` (advance-one, advance-width, corollary)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// No neighbourhood up to the cap made the check pass.
    UndeterminedAtCap,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::UndeterminedAtCap => "UNDETERMINED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub mode: SpreadMode,
    pub verdict: Verdict,
    /// Neighbourhood radius of the last run.
    pub lambda: i64,
    pub shift: Q,
    pub target_sites: usize,
    pub infected_targets: usize,
    /// Uninfected target sites (at most [`MAX_WITNESSES`]).
    pub witnesses: Vec<(i64, i64)>,
    /// Strip of the unshifted ring facing each witness, when one exists.
    pub witness_strips: Vec<Option<usize>>,
    pub helping_sites: usize,
    pub naive_agrees: bool,
}

pub const MAX_WITNESSES: usize = 64;

/// Inputs of one restricted-closure check.
struct Check<'a> {
    family: &'a UpdateFamily,
    area: Vec<&'a VStrip>,
    seeds: Vec<(i64, i64)>,
    targets: Vec<(i64, i64)>,
}

struct Outcome {
    missing: Vec<(i64, i64)>,
    naive_agrees: bool,
}

impl Check<'_> {
    fn run(&self, lambda: i64) -> Outcome {
        let (b, pts) = neighbourhood(&self.area, lambda);
        let c = restricted(b, &pts, self.seeds.iter().copied());
        let fast = closure(self.family, &c);
        let missing: Vec<(i64, i64)> =
            self.targets.iter().copied().filter(|&(x, y)| !fast.final_config.get(x, y)).collect();
        let naive = closure_naive(self.family, &c);
        Outcome { missing, naive_agrees: naive.final_config == fast.final_config }
    }

    /// Escalates `λ` through `start, 2·start, …` until the check passes or
    /// `cap` is exceeded. A start above the cap is clamped to it.
    fn escalate(&self, start: i64, cap: i64) -> (i64, Outcome) {
        let mut lambda = start.max(1).min(cap.max(1));
        loop {
            let out = self.run(lambda);
            if out.missing.is_empty() || lambda * 2 > cap {
                return (lambda, out);
            }
            lambda *= 2;
        }
    }
}

fn facing_strip(ring: &HalfRing, shift: Q, p: (i64, i64)) -> Option<usize> {
    // The strip whose translate by some shift in [0, total] contains p.
    let u = ring.u();
    ring.strips.iter().position(|s| {
        let m = super::strip::dot_q((q(p.0), q(p.1)), s.f());
        let c = Q::from_integer(super::strip::dot_i(p, s.v));
        s.mu_lo <= m && m <= s.mu_hi && c >= s.c_lo && c <= s.c_hi + shift * u.dot(s.v) as i128
    })
}

/// Seeds `R ∩ Z²` plus the helping sites, closes inside the `λ`-neighbourhood
/// of `R` and its target translate, and checks the target is infected.
///
/// `AdvanceOne` and `AdvanceWidth` use the supplied helping sets;
/// `Corollary` generates them (and needs `vors`).
pub fn verify_spread(
    family: &UpdateFamily,
    ring: &HalfRing,
    helping: &[HelpingSet],
    vors: &[Voracious],
    mode: SpreadMode,
    lambda_cap: i64,
) -> SpreadReport {
    let shift = match mode {
        SpreadMode::AdvanceOne => ring.step_to_new_point(),
        SpreadMode::AdvanceWidth | SpreadMode::Corollary => ring.spec.width,
    };
    let generated;
    let helping = match mode {
        SpreadMode::Corollary => {
            generated = helping_sets_upto(ring, vors, shift, |_| true);
            &generated[..]
        }
        _ => helping,
    };
    let target = ring.translated(shift);
    let area: Vec<&VStrip> = ring.strips.iter().chain(&target.strips).collect();
    let seeds: Vec<(i64, i64)> =
        ring.lattice_points().into_iter().chain(helping.iter().flat_map(|h| h.sites.iter().copied())).collect();
    let check = Check { family, area, seeds, targets: target.lattice_points() };
    let start = vors.iter().map(|v| v.lambda).max().unwrap_or(1).max(2);
    let (lambda, out) = check.escalate(start, lambda_cap);
    report(mode, ring, shift, lambda, &check, out, helping)
}

fn report(
    mode: SpreadMode,
    ring: &HalfRing,
    shift: Q,
    lambda: i64,
    check: &Check,
    out: Outcome,
    helping: &[HelpingSet],
) -> SpreadReport {
    let verdict = if out.missing.is_empty() { Verdict::Pass } else { Verdict::Fail };
    let witnesses: Vec<(i64, i64)> = out.missing.iter().copied().take(MAX_WITNESSES).collect();
    SpreadReport {
        mode,
        verdict,
        lambda,
        shift,
        target_sites: check.targets.len(),
        infected_targets: check.targets.len() - out.missing.len(),
        witness_strips: witnesses.iter().map(|&p| facing_strip(ring, shift, p)).collect(),
        witnesses,
        helping_sites: helping.iter().map(|h| h.sites.len()).sum(),
        naive_agrees: out.naive_agrees,
    }
}

/// The generalized-ring advance: seeds `core(R^g)` and helping sets for the
/// translates of `R` up to `κ·u` (placed inside `R^g ∪ (R^g + κu)`), closes in
/// the `λ`-neighbourhood of `R^g ∪ (R^g + κu)`, and checks `core(R^g + κu)`.
pub fn verify_generalized_advance(
    family: &UpdateFamily,
    ring: &HalfRing,
    vors: &[Voracious],
    kappa: Q,
    lambda_cap: i64,
) -> SpreadReport {
    assert!(ring.is_generalized(), "generalized ring required");
    let target = ring.translated(kappa);
    let inside = |sites: &[(i64, i64)]| {
        sites.iter().all(|&(x, y)| ring.generalized_contains(x, y) || target.generalized_contains(x, y))
    };
    let helping = helping_sets_upto(ring, vors, kappa, inside);
    let area: Vec<&VStrip> = ring.pieces().into_iter().chain(target.pieces()).collect();
    let seeds: Vec<(i64, i64)> =
        ring.core_points().into_iter().chain(helping.iter().flat_map(|h| h.sites.iter().copied())).collect();
    let check = Check { family, area, seeds, targets: target.core_points() };
    let start = vors.iter().map(|v| v.lambda).max().unwrap_or(1).max(2);
    let (lambda, out) = check.escalate(start, lambda_cap);
    report(SpreadMode::AdvanceWidth, ring, kappa, lambda, &check, out, &helping)
}

impl SpreadReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} mode={:?} shift={} lambda={} targets={} infected={} helping_sites={} naive_agrees={}\n",
            self.verdict,
            self.mode,
            self.shift,
            self.lambda,
            self.target_sites,
            self.infected_targets,
            self.helping_sites,
            self.naive_agrees
        );
        for (p, st) in self.witnesses.iter().zip(&self.witness_strips) {
            match st {
                Some(i) => s.push_str(&format!("witness {},{} strip {}\n", p.0, p.1, i + 1)),
                None => s.push_str(&format!("witness {},{}\n", p.0, p.1)),
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::droplet::ring::{build_half_ring, RingKind, RingSpec};
    use crate::family::builtin;

    fn d(x: i64, y: i64) -> Direction {
        Direction::of(x, y)
    }

    #[test]
    fn duarte_voracious_is_one_site() {
        let duarte = builtin("duarte").unwrap();
        let params = OracleParams::for_family(&duarte);
        let v = find_voracious(&duarte, d(1, 0), d(1, 0), &params, 32).unwrap();
        assert_eq!(v.sites.len(), 1);
        assert_eq!(v.frame_sites[0].1, 0, "on the line");
        assert!(v.lambda <= 4, "{v:?}");
    }

    #[test]
    fn unstable_direction_needs_nothing() {
        let fa1f = builtin("fa1f").unwrap();
        let params = OracleParams::for_family(&fa1f);
        let v = find_voracious(&fa1f, d(1, 0), d(1, 0), &params, 32).unwrap();
        assert!(v.sites.is_empty());
    }

    fn duarte_setup(w: i64, l: i64) -> (UpdateFamily, HalfRing, Vec<Voracious>) {
        let duarte = builtin("duarte").unwrap();
        let ring = build_half_ring(&duarte, &RingSpec::new(d(1, 0), RingKind::Plain, q(w), q(l))).unwrap();
        let vors = voracious_for_ring(&duarte, &ring, &OracleParams::for_family(&duarte), 32).unwrap();
        (duarte, ring, vors)
    }

    #[test]
    fn duarte_advance_one_and_width() {
        let (duarte, ring, vors) = duarte_setup(6, 40);
        let one = helping_sets_upto(&ring, &vors, ring.step_to_new_point(), |_| true);
        assert_eq!(one.len(), 1);
        assert!(one[0].matches_shape(&vors[0]));
        let r = verify_spread(&duarte, &ring, &one, &vors, SpreadMode::AdvanceOne, 32);
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.to_text());
        assert!(r.naive_agrees);
        let all = helping_sets_upto(&ring, &vors, q(6), |_| true);
        assert_eq!(all.len(), 6);
        let r = verify_spread(&duarte, &ring, &all, &vors, SpreadMode::AdvanceWidth, 32);
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.to_text());
        let c = verify_spread(&duarte, &ring, &[], &vors, SpreadMode::Corollary, 32);
        assert_eq!(c.verdict, Verdict::Pass);
    }

    #[test]
    fn missing_helping_set_fails_on_that_strip() {
        let (duarte, ring, vors) = duarte_setup(6, 40);
        let mut all = helping_sets_upto(&ring, &vors, q(6), |_| true);
        all.remove(2);
        let r = verify_spread(&duarte, &ring, &all, &vors, SpreadMode::AdvanceWidth, 32);
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(!r.witnesses.is_empty());
        assert!(r.witness_strips.iter().all(|s| *s == Some(0)));
        assert!(r.naive_agrees);
    }

    #[test]
    fn duarte_generalized_core_advances() {
        let duarte = builtin("duarte").unwrap();
        let ring = build_half_ring(&duarte, &RingSpec::new(d(1, 0), RingKind::Generalized, q(6), q(42))).unwrap();
        let vors = voracious_for_ring(&duarte, &ring, &OracleParams::for_family(&duarte), 32).unwrap();
        let r = verify_generalized_advance(&duarte, &ring, &vors, q(6), 32);
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.to_text());
    }

    #[test]
    fn fa2f_multi_strip_ring_spreads() {
        let fa2f = builtin("fa2f").unwrap();
        let ring = build_half_ring(&fa2f, &RingSpec::new(d(2, 1), RingKind::Plain, q(6), q(12))).unwrap();
        let vors = voracious_for_ring(&fa2f, &ring, &OracleParams::for_family(&fa2f), 32).unwrap();
        let r = verify_spread(&fa2f, &ring, &[], &vors, SpreadMode::Corollary, 32);
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.to_text());
        assert!(r.naive_agrees);
    }
}
