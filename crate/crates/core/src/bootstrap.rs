//! Finite-region bootstrap closures and Monte Carlo infection times.
//!
//! A [`Configuration`] is a bitset over the sites of a [`Region`] (bit set =
//! infected, i.e. an empty site). Sites outside a box are governed by the
//! region's [`Exterior`] policy: permanently healthy, or permanently infected
//! below a horizontal line (used to pin a half-plane seed).

use bitvec::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::family::UpdateFamily;
use crate::geometry::Direction;

/// Round tag of a site that never becomes infected.
pub const NEVER: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    /// All sites `(x, y)` with `x0 ≤ x ≤ x1`, `y0 ≤ y ≤ y1`.
    Box { x0: i64, y0: i64, x1: i64, y1: i64 },
    /// Sites `0..width × 0..height` with periodic wrap.
    Torus { width: i64, height: i64 },
}

/// What the rules see outside a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exterior {
    Healthy,
    /// Exterior sites with `y < row` are infected, the rest healthy.
    InfectedBelow(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub shape: Shape,
    /// When present, only these sites take part in the dynamics: sites outside
    /// it are treated as healthy and are never infected.
    pub restriction: Option<BitVec>,
    pub exterior: Exterior,
}

impl Region {
    pub fn boxed(x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        assert!(x0 <= x1 && y0 <= y1, "empty box");
        Region { shape: Shape::Box { x0, y0, x1, y1 }, restriction: None, exterior: Exterior::Healthy }
    }

    pub fn torus(width: i64, height: i64) -> Self {
        assert!(width >= 1 && height >= 1, "empty torus");
        Region { shape: Shape::Torus { width, height }, restriction: None, exterior: Exterior::Healthy }
    }

    pub fn with_exterior(mut self, exterior: Exterior) -> Self {
        self.exterior = exterior;
        self
    }

    pub fn with_restriction(mut self, allowed: BitVec) -> Self {
        assert_eq!(allowed.len(), self.len(), "restriction length");
        self.restriction = Some(allowed);
        self
    }

    pub fn width(&self) -> i64 {
        match self.shape {
            Shape::Box { x0, x1, .. } => x1 - x0 + 1,
            Shape::Torus { width, .. } => width,
        }
    }

    pub fn height(&self) -> i64 {
        match self.shape {
            Shape::Box { y0, y1, .. } => y1 - y0 + 1,
            Shape::Torus { height, .. } => height,
        }
    }

    pub fn len(&self) -> usize {
        (self.width() * self.height()) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of `(x, y)`, or `None` for a site outside a box.
    pub fn index(&self, x: i64, y: i64) -> Option<usize> {
        match self.shape {
            Shape::Box { x0, y0, x1, y1 } => {
                (x0 <= x && x <= x1 && y0 <= y && y <= y1).then(|| ((y - y0) * (x1 - x0 + 1) + (x - x0)) as usize)
            }
            Shape::Torus { width, height } => Some((y.rem_euclid(height) * width + x.rem_euclid(width)) as usize),
        }
    }

    pub fn coords(&self, i: usize) -> (i64, i64) {
        let i = i as i64;
        let w = self.width();
        let (ox, oy) = match self.shape {
            Shape::Box { x0, y0, .. } => (x0, y0),
            Shape::Torus { .. } => (0, 0),
        };
        (ox + i % w, oy + i / w)
    }

    pub fn allows(&self, i: usize) -> bool {
        self.restriction.as_ref().is_none_or(|r| r[i])
    }

    fn exterior_infected(&self, y: i64) -> bool {
        match self.exterior {
            Exterior::Healthy => false,
            Exterior::InfectedBelow(row) => y < row,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub region: Region,
    pub infected: BitVec,
}

impl Configuration {
    pub fn empty(region: Region) -> Self {
        let n = region.len();
        Configuration { region, infected: bitvec![0; n] }
    }

    pub fn with_sites(region: Region, sites: impl IntoIterator<Item = (i64, i64)>) -> Self {
        let mut c = Self::empty(region);
        for (x, y) in sites {
            c.set(x, y);
        }
        c
    }

    /// Marks `(x, y)` infected; sites outside a box are ignored.
    pub fn set(&mut self, x: i64, y: i64) {
        if let Some(i) = self.region.index(x, y) {
            self.infected.set(i, true);
        }
    }

    /// Whether the rules see `(x, y)` as infected (exterior policy included).
    pub fn get(&self, x: i64, y: i64) -> bool {
        match self.region.index(x, y) {
            Some(i) => self.infected[i] && self.region.allows(i),
            None => self.region.exterior_infected(y),
        }
    }

    pub fn count(&self) -> usize {
        self.infected.count_ones()
    }

    pub fn is_subset_of(&self, other: &Configuration) -> bool {
        self.infected.iter_ones().all(|i| other.infected[i])
    }

    pub fn infected_sites(&self) -> Vec<(i64, i64)> {
        self.infected.iter_ones().map(|i| self.region.coords(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureResult {
    pub final_config: Configuration,
    /// Number of rounds in which at least one site was infected.
    pub rounds: u32,
    /// Round of first infection per site: 0 for initial, [`NEVER`] if never.
    pub times: Vec<u32>,
}

impl ClosureResult {
    pub fn first_infection_time(&self, x: i64, y: i64) -> Option<u32> {
        let i = self.final_config.region.index(x, y)?;
        (self.times[i] != NEVER).then_some(self.times[i])
    }
}

/// Rules flattened to coordinate pairs.
struct Kernel {
    rules: Vec<Vec<(i64, i64)>>,
    offsets: Vec<(i64, i64)>,
}

impl Kernel {
    fn new(family: &UpdateFamily) -> Self {
        let rules = family
            .rules()
            .iter()
            .map(|r| r.sites().iter().map(|o| (o.dx as i64, o.dy as i64)).collect())
            .collect();
        let offsets = family.offsets().iter().map(|o| (o.dx as i64, o.dy as i64)).collect();
        Kernel { rules, offsets }
    }

    fn fires(&self, c: &Configuration, x: i64, y: i64) -> bool {
        self.rules.iter().any(|r| r.iter().all(|&(dx, dy)| c.get(x + dx, y + dy)))
    }
}

fn initial(c: &Configuration) -> (Configuration, Vec<u32>) {
    let mut start = c.clone();
    if let Some(r) = &c.region.restriction {
        start.infected &= r.as_bitslice();
    }
    let times = start.infected.iter().map(|b| if *b { 0 } else { NEVER }).collect();
    (start, times)
}

/// Closure with synchronous-round times.
///
/// Each round only re-examines sites that can see a site infected in the
/// previous round; the newly infectable sites are committed together at the
/// end of the round.
pub fn closure(family: &UpdateFamily, c: &Configuration) -> ClosureResult {
    run_closure(family, c, u32::MAX, None, None)
}

/// Closure of `c`, given that `c` without the sites `seeds` is already closed.
/// Only sites that can see a seed are examined in the first round.
pub fn closure_from_seeds(family: &UpdateFamily, c: &Configuration, seeds: &[(i64, i64)]) -> ClosureResult {
    run_closure(family, c, u32::MAX, None, Some(seeds))
}

/// Runs at most `max_rounds` rounds, stopping early once `stop_at` is infected.
pub fn closure_until(family: &UpdateFamily, c: &Configuration, max_rounds: u32, stop_at: Option<usize>) -> ClosureResult {
    run_closure(family, c, max_rounds, stop_at, None)
}

fn run_closure(
    family: &UpdateFamily,
    c: &Configuration,
    max_rounds: u32,
    stop_at: Option<usize>,
    seeds: Option<&[(i64, i64)]>,
) -> ClosureResult {
    let kernel = Kernel::new(family);
    let (mut cur, mut times) = initial(c);
    let n = cur.region.len();
    let region = cur.region.clone();
    let mut queued = vec![u32::MAX; n];
    let mut candidates: Vec<usize> = match seeds {
        None => (0..n).filter(|&i| !cur.infected[i] && region.allows(i)).collect(),
        Some(seeds) => {
            let mut v = Vec::new();
            for &(x, y) in seeds {
                for &(dx, dy) in &kernel.offsets {
                    if let Some(j) = region.index(x - dx, y - dy) {
                        if queued[j] != 0 && !cur.infected[j] && region.allows(j) {
                            queued[j] = 0;
                            v.push(j);
                        }
                    }
                }
            }
            v
        }
    };
    let mut rounds = 0;
    let mut fresh = Vec::new();
    while !candidates.is_empty() && rounds < max_rounds {
        if stop_at.is_some_and(|s| cur.infected[s]) {
            break;
        }
        fresh.clear();
        for &i in &candidates {
            let (x, y) = region.coords(i);
            if !cur.infected[i] && kernel.fires(&cur, x, y) {
                fresh.push(i);
            }
        }
        if fresh.is_empty() {
            break;
        }
        rounds += 1;
        for &i in &fresh {
            cur.infected.set(i, true);
            times[i] = rounds;
        }
        candidates.clear();
        for &i in &fresh {
            let (x, y) = region.coords(i);
            for &(dx, dy) in &kernel.offsets {
                if let Some(j) = region.index(x - dx, y - dy) {
                    if queued[j] != rounds && !cur.infected[j] && region.allows(j) {
                        queued[j] = rounds;
                        candidates.push(j);
                    }
                }
            }
        }
    }
    ClosureResult { final_config: cur, rounds, times }
}

/// Reference closure: sweep every site each round until nothing changes.
pub fn closure_naive(family: &UpdateFamily, c: &Configuration) -> ClosureResult {
    let kernel = Kernel::new(family);
    let (mut cur, mut times) = initial(c);
    let mut rounds = 0;
    loop {
        let mut fresh = Vec::new();
        for i in 0..cur.region.len() {
            let (x, y) = cur.region.coords(i);
            if !cur.infected[i] && cur.region.allows(i) && kernel.fires(&cur, x, y) {
                fresh.push(i);
            }
        }
        if fresh.is_empty() {
            break;
        }
        rounds += 1;
        for i in fresh {
            cur.infected.set(i, true);
            times[i] = rounds;
        }
    }
    ClosureResult { final_config: cur, rounds, times }
}

/// Change of lattice basis adapted to a direction `u`: a site `x` gets
/// coordinates `(s, h)` with `h = ⟨x, u⟩` and `s` its position along `ℓ_u⁺`.
/// The map is unimodular, so it is a bijection of `Z²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineFrame {
    pub u: Direction,
    /// Lattice vector with `⟨w, u⟩ = 1`.
    pub w: (i64, i64),
    /// Primitive step along `ℓ_u⁺`.
    pub t: (i64, i64),
}

impl LineFrame {
    pub fn new(u: Direction) -> Self {
        LineFrame { u, w: u.unit_level_vector(), t: u.line_step() }
    }

    pub fn to_frame(&self, x: i64, y: i64) -> (i64, i64) {
        let h = x * self.u.x() + y * self.u.y();
        let (rx, ry) = (x - h * self.w.0, y - h * self.w.1);
        let tt = self.t.0 * self.t.0 + self.t.1 * self.t.1;
        let s = (rx * self.t.0 + ry * self.t.1) / tt;
        debug_assert_eq!((s * self.t.0, s * self.t.1), (rx, ry));
        (s, h)
    }

    pub fn from_frame(&self, s: i64, h: i64) -> (i64, i64) {
        (h * self.w.0 + s * self.t.0, h * self.w.1 + s * self.t.1)
    }

    /// The family expressed in `(s, h)` coordinates.
    pub fn transform_family(&self, family: &UpdateFamily) -> UpdateFamily {
        let rules: Vec<Vec<(i32, i32)>> = family
            .rules()
            .iter()
            .map(|r| {
                r.sites()
                    .iter()
                    .map(|o| {
                        let (s, h) = self.to_frame(o.dx as i64, o.dy as i64);
                        (s as i32, h as i32)
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[(i32, i32)]> = rules.iter().map(|r| r.as_slice()).collect();
        UpdateFamily::from_offsets(family.name(), &refs)
    }
}

/// Result of seeding a half-plane plus extra sites and closing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfPlaneProbe {
    /// `line_span` consecutive sites of `ℓ_u⁺` beyond the window are infected.
    pub right: bool,
    /// Same for `ℓ_u⁻`.
    pub left: bool,
    /// Longest run of infected line sites starting just beyond the window on each side.
    pub right_advance: i64,
    pub left_advance: i64,
}

/// Box in line coordinates used by half-plane probes: `|s| ≤ R + span + pad`,
/// `0 ≤ h ≤ R + pad`, with `h < 0` pinned infected.
pub fn probe_region(window_radius: i64, line_span: i64, pad: i64) -> Region {
    let sx = window_radius + line_span + pad;
    Region::boxed(-sx, 0, sx, window_radius + pad).with_exterior(Exterior::InfectedBelow(0))
}

/// Seeds a probe in line coordinates and reads off both advance certificates.
pub fn probe_in_frame(
    frame_family: &UpdateFamily,
    extra: &[(i64, i64)],
    window_radius: i64,
    line_span: i64,
    naive: bool,
) -> HalfPlaneProbe {
    let pad = frame_family.radius() as i64;
    let region = probe_region(window_radius, line_span, pad);
    let c = Configuration::with_sites(region, extra.iter().copied().filter(|&(_, h)| h >= 0));
    // With a stable direction the pinned half-plane is closed by itself.
    let base_closed = !frame_family.rules().iter().any(|r| r.sites().iter().all(|o| o.dy < 0));
    let res = if naive {
        closure_naive(frame_family, &c)
    } else if base_closed {
        closure_from_seeds(frame_family, &c, extra)
    } else {
        closure(frame_family, &c)
    };
    let f = &res.final_config;
    let run = |dir: i64| (1..=line_span).take_while(|&k| f.get(dir * (window_radius + k), 0)).count() as i64;
    let (right_advance, left_advance) = (run(1), run(-1));
    HalfPlaneProbe { right: right_advance == line_span, left: left_advance == line_span, right_advance, left_advance }
}

/// Seeds `H_u` (restricted to a box around the window) plus `extra`, closes,
/// and reports whether `line_span` consecutive new sites of `ℓ_u` beyond the
/// window became infected on each side. `extra` is in ordinary coordinates.
pub fn half_plane_fills(
    family: &UpdateFamily,
    u: Direction,
    extra: &[(i64, i64)],
    window_radius: i64,
    line_span: i64,
) -> HalfPlaneProbe {
    let frame = LineFrame::new(u);
    let ff = frame.transform_family(family);
    let pts: Vec<(i64, i64)> = extra.iter().map(|&(x, y)| frame.to_frame(x, y)).collect();
    probe_in_frame(&ff, &pts, window_radius, line_span, false)
}

/// Median of the round at which the origin of a torus gets infected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfectionTimeEstimate {
    pub q: f64,
    pub trials: usize,
    /// `f64::INFINITY` when more than half the trials were censored.
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub censored: usize,
    pub seed: u64,
    pub width: i64,
    pub height: i64,
}

impl InfectionTimeEstimate {
    pub fn median_exceeds_t_max(&self) -> bool {
        self.median.is_infinite()
    }
}

/// Lower-upper median average; infinite if either middle value is censored.
fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Bernoulli(`q`) initial infection on a `width × height` torus; each trial
/// runs synchronous rounds until the origin is infected or `t_max` rounds
/// have elapsed. Trial `k` uses ChaCha8 stream `k` of `seed`.
pub fn estimate_t_u(
    family: &UpdateFamily,
    q: f64,
    width: i64,
    height: i64,
    trials: usize,
    t_max: u32,
    seed: u64,
) -> InfectionTimeEstimate {
    assert!((0.0..=1.0).contains(&q), "q must be a probability");
    assert!(trials >= 1, "need at least one trial");
    let times: Vec<Option<u32>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let region = Region::torus(width, height);
            let mut c = Configuration::empty(region);
            for i in 0..c.infected.len() {
                if rng.random_bool(q) {
                    c.infected.set(i, true);
                }
            }
            let origin = c.region.index(0, 0).expect("torus contains origin");
            let res = closure_until(family, &c, t_max, Some(origin));
            res.final_config.infected[origin].then_some(res.times[origin])
        })
        .collect();
    let values: Vec<f64> = times.iter().map(|t| t.map_or(f64::INFINITY, |t| t as f64)).collect();
    let censored = times.iter().filter(|t| t.is_none()).count();
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let median = median_of_sorted(&sorted);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut meds: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let mut s: Vec<f64> = (0..trials).map(|_| values[rng.random_range(0..trials)]).collect();
            s.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
            median_of_sorted(&s)
        })
        .collect();
    meds.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let pct = |p: f64| meds[((p * (BOOTSTRAP_RESAMPLES - 1) as f64).round()) as usize];
    InfectionTimeEstimate {
        q,
        trials,
        median,
        ci_low: pct(0.025),
        ci_high: pct(0.975),
        censored,
        seed,
        width,
        height,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin;

    #[test]
    fn empty_start_stays_empty() {
        let f = builtin("duarte").unwrap();
        let c = Configuration::empty(Region::boxed(0, 0, 9, 9));
        let r = closure(&f, &c);
        assert_eq!(r.rounds, 0);
        assert_eq!(r.final_config.count(), 0);
    }

    #[test]
    fn fa2f_square_is_closed() {
        let f = builtin("fa2f").unwrap();
        let sq = (3..6).flat_map(|x| (3..6).map(move |y| (x, y)));
        let c = Configuration::with_sites(Region::boxed(0, 0, 9, 9), sq);
        let r = closure(&f, &c);
        assert_eq!(r.final_config, c);
        assert_eq!(closure_naive(&f, &c), r);
    }

    #[test]
    fn duarte_column_fills() {
        let f = builtin("duarte").unwrap();
        let region = Region::boxed(-8, -8, 8, 8);
        let mut sites: Vec<(i64, i64)> = (-8..0).flat_map(|x| (-8..=8).map(move |y| (x, y))).collect();
        sites.push((0, 5));
        let c = Configuration::with_sites(region, sites);
        let r = closure(&f, &c);
        for j in -8..=8 {
            assert!(r.final_config.get(0, j), "(0,{j})");
        }
        assert!(!r.final_config.get(1, 0));
        assert_eq!(r.first_infection_time(0, 4), Some(1));
        assert_eq!(r.first_infection_time(0, 6), Some(1));
        assert_eq!(r.first_infection_time(0, -8), Some(13));
        assert_eq!(r.first_infection_time(1, 0), None);
        assert_eq!(closure_naive(&f, &c), r);
    }

    #[test]
    fn torus_wraps() {
        let f = builtin("east1d-embedded").unwrap();
        let c = Configuration::with_sites(Region::torus(5, 1), [(4, 0)]);
        let r = closure(&f, &c);
        assert_eq!(r.final_config.count(), 5);
        assert_eq!(r.first_infection_time(0, 0), Some(1));
        assert_eq!(r.first_infection_time(3, 0), Some(4));
    }

    #[test]
    fn restriction_blocks_growth() {
        let f = builtin("east1d-embedded").unwrap();
        let mut allowed = bitvec![1; 10];
        allowed.set(5, false);
        let region = Region::boxed(0, 0, 9, 0).with_restriction(allowed);
        let r = closure(&f, &Configuration::with_sites(region, [(0, 0)]));
        assert_eq!(r.final_config.infected_sites(), (0..5).map(|x| (x, 0)).collect::<Vec<_>>());
    }

    #[test]
    fn line_frame_round_trip() {
        for &(a, b) in &[(1, 0), (0, 1), (2, 1), (-3, 5), (1, -1)] {
            let fr = LineFrame::new(Direction::of(a, b));
            for x in -4..=4 {
                for y in -4..=4 {
                    let (s, h) = fr.to_frame(x, y);
                    assert_eq!(h, a * x + b * y);
                    assert_eq!(fr.from_frame(s, h), (x, y));
                }
            }
        }
    }

    #[test]
    fn half_plane_examples() {
        let duarte = builtin("duarte").unwrap();
        let p = half_plane_fills(&duarte, Direction::of(1, 0), &[(0, 0)], 8, 64);
        assert!(p.right && p.left);
        let p = half_plane_fills(&duarte, Direction::of(1, 0), &[], 8, 64);
        assert!(!p.right && !p.left);
        let fa1f = builtin("fa1f").unwrap();
        let p = half_plane_fills(&fa1f, Direction::of(2, 1), &[], 8, 64);
        assert!(p.right && p.left);
        // Rightward growth along the row is easy; leftward growth never starts,
        // so the one-sided difficulties are 1 and infinite.
        let p = half_plane_fills(&duarte, Direction::of(0, 1), &[(0, 0), (1, 0), (-1, 0)], 8, 64);
        assert!(p.right && !p.left);
        assert_eq!(p.left_advance, 0);
    }

    #[test]
    fn t_u_examples() {
        let fa1f = builtin("fa1f").unwrap();
        let e = estimate_t_u(&fa1f, 1.0, 16, 16, 5, 100, 1);
        assert_eq!(e.median, 0.0);
        let e = estimate_t_u(&fa1f, 0.1, 64, 64, 101, 1000, 1);
        assert!(e.median > 0.0 && e.median <= 6.0, "{e:?}");
        assert_eq!(e.censored, 0);
        assert!(e.ci_low <= e.median && e.median <= e.ci_high);
        let again = estimate_t_u(&fa1f, 0.1, 64, 64, 101, 1000, 1);
        assert_eq!(e, again);
    }

    #[test]
    fn all_censored_is_a_result() {
        let duarte = builtin("duarte").unwrap();
        let e = estimate_t_u(&duarte, 0.01, 16, 16, 9, 2, 3);
        assert!(e.median_exceeds_t_max());
        assert!(e.censored > 4);
    }
}
