//! Continuous-time kinetically constrained dynamics on a torus.
//!
//! Spins are `1` (occupied) or `0` (empty). Every site carries a rate-one
//! clock; when it rings and some rule of the family is entirely empty around
//! the site, the spin is resampled: empty with probability `q`, occupied with
//! probability `p = 1 - q`. Rings that fail the constraint are discarded but
//! still consume time.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::family::UpdateFamily;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum KcmError {
    #[error("q must lie in (0, 1), got {0}")]
    InvalidQ(f64),
    #[error("torus {width}x{height} is smaller than 2·radius+1 = {min}")]
    TorusTooSmall { width: i64, height: i64, min: i64 },
    #[error("at least one trial is required")]
    NoTrials,
    #[error("spin flip at site {site} (t = {time}) has no valid constraint witness")]
    IllegalFlip { site: u32, time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KcmParams {
    pub family: UpdateFamily,
    pub q: f64,
    pub width: i64,
    pub height: i64,
    pub t_max: f64,
    pub seed: u64,
}

impl KcmParams {
    pub fn new(family: UpdateFamily, q: f64, width: i64, height: i64, t_max: f64, seed: u64) -> Result<Self, KcmError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(KcmError::InvalidQ(q));
        }
        let min = 2 * family.radius() as i64 + 1;
        if width < min || height < min {
            return Err(KcmError::TorusTooSmall { width, height, min });
        }
        Ok(KcmParams { family, q, width, height, t_max, seed })
    }

    pub fn torus_label(&self) -> String {
        format!("{}x{}", self.width, self.height)
    }
}

/// A legal resampling that changed the spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipEvent {
    pub time: f64,
    pub site: u32,
    pub old: u8,
    pub new: u8,
    /// Index of the rule whose translate was empty at the flip.
    pub witness: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub events: Vec<FlipEvent>,
    pub rings: u64,
    pub legal_rings: u64,
    pub flips_01: u64,
    pub flips_10: u64,
    pub initial_density: f64,
    pub final_state: Vec<u8>,
    /// Time-averaged fraction of empty sites over `[0, t_max]`.
    pub mean_density: f64,
    pub t_max: f64,
}

impl Trajectory {
    /// Records `(site: u32, time: f64, new: u8)`, little-endian, 13 bytes each.
    pub fn write_event_log(&self, mut w: impl Write) -> io::Result<()> {
        for e in &self.events {
            w.write_all(&e.site.to_le_bytes())?;
            w.write_all(&e.time.to_le_bytes())?;
            w.write_all(&[e.new])?;
        }
        Ok(())
    }
}

/// Reads back a log written by [`Trajectory::write_event_log`].
pub fn read_event_log(bytes: &[u8]) -> Vec<(u32, f64, u8)> {
    bytes
        .chunks_exact(13)
        .map(|r| {
            let site = u32::from_le_bytes(r[0..4].try_into().expect("4 bytes"));
            let time = f64::from_le_bytes(r[4..12].try_into().expect("8 bytes"));
            (site, time, r[12])
        })
        .collect()
}

/// Site-level state shared by all runs.
struct Engine {
    width: i64,
    height: i64,
    /// Per rule, the flattened neighbour index table `site * len + j`.
    rule_tables: Vec<(usize, Vec<u32>)>,
    rules: Vec<Vec<(i64, i64)>>,
    state: Vec<u8>,
    vacant: usize,
    q: f64,
    rng: ChaCha8Rng,
    clock: Exp<f64>,
    t: f64,
}

struct Ring {
    site: usize,
    time: f64,
    witness: Option<usize>,
    old: u8,
    new: u8,
}

impl Engine {
    fn new(params: &KcmParams, stream: u64) -> Self {
        let (w, h) = (params.width, params.height);
        let n = (w * h) as usize;
        let rules: Vec<Vec<(i64, i64)>> = params
            .family
            .rules()
            .iter()
            .map(|r| r.sites().iter().map(|o| (o.dx as i64, o.dy as i64)).collect())
            .collect();
        let rule_tables = rules
            .iter()
            .map(|r| {
                let mut t = Vec::with_capacity(n * r.len());
                for i in 0..n as i64 {
                    let (x, y) = (i % w, i / w);
                    for &(dx, dy) in r {
                        t.push(((x + dx).rem_euclid(w) + (y + dy).rem_euclid(h) * w) as u32);
                    }
                }
                (r.len(), t)
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(stream);
        let state: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() >= params.q)).collect();
        let vacant = state.iter().filter(|&&s| s == 0).count();
        let clock = Exp::new(n as f64).expect("positive rate");
        Engine { width: w, height: h, rule_tables, rules, state, vacant, q: params.q, rng, clock, t: 0.0 }
    }

    fn len(&self) -> usize {
        self.state.len()
    }

    fn witness(&self, site: usize) -> Option<usize> {
        self.rule_tables
            .iter()
            .position(|(k, t)| t[site * k..site * k + k].iter().all(|&j| self.state[j as usize] == 0))
    }

    /// Independent re-evaluation of a witness from coordinates.
    fn witness_holds(&self, site: usize, rule: usize) -> bool {
        let (x, y) = (site as i64 % self.width, site as i64 / self.width);
        self.rules[rule].iter().all(|&(dx, dy)| {
            let j = (x + dx).rem_euclid(self.width) + (y + dy).rem_euclid(self.height) * self.width;
            self.state[j as usize] == 0
        })
    }

    fn next_ring(&mut self) -> Ring {
        self.t += self.clock.sample(&mut self.rng);
        let site = self.rng.random_range(0..self.len());
        let old = self.state[site];
        let witness = self.witness(site);
        let new = if witness.is_some() { u8::from(self.rng.random::<f64>() >= self.q) } else { old };
        Ring { site, time: self.t, witness, old, new }
    }

    fn commit(&mut self, r: &Ring) {
        if r.new != r.old {
            self.state[r.site] = r.new;
            if r.new == 0 {
                self.vacant += 1;
            } else {
                self.vacant -= 1;
            }
        }
    }
}

/// Runs one trajectory on `[0, t_max]` from a stationary start, logging every
/// spin change with its constraint witness.
pub fn simulate(params: &KcmParams) -> Result<Trajectory, KcmError> {
    simulate_stream(params, 0)
}

fn simulate_stream(params: &KcmParams, stream: u64) -> Result<Trajectory, KcmError> {
    let mut e = Engine::new(params, stream);
    let n = e.len() as f64;
    let initial_density = e.vacant as f64 / n;
    let (mut rings, mut legal, mut f01, mut f10) = (0u64, 0u64, 0u64, 0u64);
    let mut events = Vec::new();
    let mut area = 0.0;
    let mut last = 0.0;
    loop {
        let r = e.next_ring();
        if r.time > params.t_max {
            area += e.vacant as f64 * (params.t_max - last);
            break;
        }
        area += e.vacant as f64 * (r.time - last);
        last = r.time;
        rings += 1;
        e.commit(&r);
        let Some(rule) = r.witness else { continue };
        legal += 1;
        if r.new == r.old {
            continue;
        }
        // The witness only involves other sites, so it is unaffected by the flip.
        if !e.witness_holds(r.site, rule) {
            return Err(KcmError::IllegalFlip { site: r.site as u32, time: r.time });
        }
        if r.old == 0 {
            f01 += 1;
        } else {
            f10 += 1;
        }
        events.push(FlipEvent { time: r.time, site: r.site as u32, old: r.old, new: r.new, witness: rule as u16 });
    }
    Ok(Trajectory {
        events,
        rings,
        legal_rings: legal,
        flips_01: f01,
        flips_10: f10,
        initial_density,
        mean_density: if params.t_max > 0.0 { area / (n * params.t_max) } else { initial_density },
        final_state: e.state,
        t_max: params.t_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub family: String,
    pub q: f64,
    pub width: i64,
    pub height: i64,
    pub trials: usize,
    /// Mean of `min(τ₀, t_max)`.
    pub mean: f64,
    pub stderr: f64,
    pub censored: usize,
    pub fraction_zero: f64,
    /// Every trial hit `t_max`, so `mean` only bounds `E_μ(τ₀)` from below.
    pub lower_bound_only: bool,
    pub seed: u64,
}

impl TauEstimate {
    pub const CSV_HEADER: &'static str = "family,q,torus,trials,mean_tau0,stderr,censored,fraction_zero,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{}x{},{},{},{},{},{},{}",
            self.family,
            self.q,
            self.width,
            self.height,
            self.trials,
            self.mean,
            self.stderr,
            self.censored,
            self.fraction_zero,
            self.seed
        )
    }
}

/// `τ₀` of one trial, or `None` if censored at `t_max`.
fn tau0_trial(params: &KcmParams, stream: u64) -> Result<Option<f64>, KcmError> {
    let mut e = Engine::new(params, stream);
    if e.state[0] == 0 {
        return Ok(Some(0.0));
    }
    loop {
        let r = e.next_ring();
        if r.time > params.t_max {
            return Ok(None);
        }
        if let Some(rule) = r.witness {
            if r.new != r.old && !e.witness_holds(r.site, rule) {
                return Err(KcmError::IllegalFlip { site: r.site as u32, time: r.time });
            }
        }
        e.commit(&r);
        if r.site == 0 && r.new == 0 {
            return Ok(Some(r.time));
        }
    }
}

/// Estimates `E_μ(τ₀)`, the mean first time the origin is empty, over
/// independent stationary starts (trial `k` uses stream `k` of the seed).
pub fn estimate_tau0(params: &KcmParams, trials: usize) -> Result<TauEstimate, KcmError> {
    if trials == 0 {
        return Err(KcmError::NoTrials);
    }
    let taus: Vec<Option<f64>> =
        (0..trials as u64).into_par_iter().map(|k| tau0_trial(params, k)).collect::<Result<_, _>>()?;
    let vals: Vec<f64> = taus.iter().map(|t| t.unwrap_or(params.t_max)).collect();
    let (mean, sd) = mean_sd(&vals);
    let censored = taus.iter().filter(|t| t.is_none()).count();
    let zeros = taus.iter().filter(|t| **t == Some(0.0)).count();
    Ok(TauEstimate {
        family: params.family.name().to_string(),
        q: params.q,
        width: params.width,
        height: params.height,
        trials,
        mean,
        stderr: sd / (trials as f64).sqrt(),
        censored,
        fraction_zero: zeros as f64 / trials as f64,
        lower_bound_only: censored == trials,
        seed: params.seed,
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub q: f64,
    pub trials: usize,
    /// `None` when the averaging window is empty.
    pub density: Option<f64>,
    pub sigma: Option<f64>,
    pub density_ok: Option<bool>,
    /// Pearson statistic of the empty/occupied histogram of the final
    /// states (all trials pooled); one degree of freedom. Informational.
    pub chi2: f64,
    pub flips_01: u64,
    pub flips_10: u64,
    pub balance_ok: bool,
    pub witness_violations: u64,
}

impl StationarityReport {
    pub fn insufficient_data(&self) -> bool {
        self.density.is_none()
    }

    pub fn passed(&self) -> bool {
        self.density_ok == Some(true) && self.balance_ok && self.witness_violations == 0
    }

    pub fn to_text(&self) -> String {
        match (self.density, self.sigma) {
            (Some(d), Some(s)) => format!(
                "{} density={d:.6} q={} sigma={s:.6} chi2={:.3} flips01={} flips10={} witness_violations={}\n",
                if self.passed() { "PASS" } else { "FAIL" },
                self.q,
                self.chi2,
                self.flips_01,
                self.flips_10,
                self.witness_violations
            ),
            _ => "insufficient data\n".to_string(),
        }
    }
}

const BATCHES: usize = 10;

/// Time-averaged empty density over `[burn_in, horizon]`, compared with `q`
/// at three standard errors (across trials, or across time batches for a
/// single trial), plus the flux balance `|n01 − n10| ≤ 3·√(n01 + n10)`.
pub fn stationarity_check(
    params: &KcmParams,
    burn_in: f64,
    horizon: f64,
    trials: usize,
) -> Result<StationarityReport, KcmError> {
    if trials == 0 {
        return Err(KcmError::NoTrials);
    }
    let mut p = params.clone();
    p.t_max = horizon.max(0.0);
    let runs: Vec<(Vec<f64>, Trajectory)> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let traj = simulate_stream(&p, k)?;
            Ok((batch_densities(&p, &traj, burn_in, horizon), traj))
        })
        .collect::<Result<_, KcmError>>()?;
    let n = (params.width * params.height) as f64;
    let (f01, f10) = runs.iter().fold((0, 0), |a, (_, t)| (a.0 + t.flips_01, a.1 + t.flips_10));
    let balance_ok = (f01 as f64 - f10 as f64).abs() <= 3.0 * ((f01 + f10) as f64).sqrt();
    let empty: usize = runs.iter().map(|(_, t)| t.final_state.iter().filter(|&&s| s == 0).count()).sum();
    let total = n * trials as f64;
    let (e0, e1) = (total * params.q, total * (1.0 - params.q));
    let chi2 = (empty as f64 - e0).powi(2) / e0 + (total - empty as f64 - e1).powi(2) / e1;
    let (density, sigma) = if horizon <= burn_in {
        (None, None)
    } else if trials == 1 {
        let (m, sd) = mean_sd(&runs[0].0);
        (Some(m), Some(sd / (BATCHES as f64).sqrt()))
    } else {
        let per_trial: Vec<f64> = runs.iter().map(|(b, _)| b.iter().sum::<f64>() / b.len() as f64).collect();
        let (m, sd) = mean_sd(&per_trial);
        (Some(m), Some(sd / (trials as f64).sqrt()))
    };
    let density_ok = density.zip(sigma).map(|(d, s)| (d - params.q).abs() <= 3.0 * s);
    Ok(StationarityReport {
        q: params.q,
        trials,
        density,
        sigma,
        density_ok,
        chi2,
        flips_01: f01,
        flips_10: f10,
        balance_ok,
        witness_violations: 0,
    })
}

/// Empty density averaged over each of [`BATCHES`] equal windows of `[burn_in, horizon]`,
/// replayed from the event log.
fn batch_densities(p: &KcmParams, traj: &Trajectory, burn_in: f64, horizon: f64) -> Vec<f64> {
    if horizon <= burn_in {
        return vec![];
    }
    let n = (p.width * p.height) as f64;
    let len = (horizon - burn_in) / BATCHES as f64;
    let mut area = vec![0.0; BATCHES];
    let mut vacant = traj.initial_density * n;
    let mut last = 0.0;
    let add = |t0: f64, t1: f64, v: f64, area: &mut Vec<f64>| {
        let (a, b) = (t0.max(burn_in), t1.min(horizon));
        if a >= b {
            return;
        }
        let first = (((a - burn_in) / len) as usize).min(BATCHES - 1);
        let lastb = (((b - burn_in) / len) as usize).min(BATCHES - 1);
        for (i, slot) in area.iter_mut().enumerate().take(lastb + 1).skip(first) {
            let lo = burn_in + i as f64 * len;
            let hi = lo + len;
            let ov = b.min(hi) - a.max(lo);
            if ov > 0.0 {
                *slot += v * ov;
            }
        }
    };
    for e in &traj.events {
        add(last, e.time, vacant, &mut area);
        vacant += if e.new == 0 { 1.0 } else { -1.0 };
        last = e.time;
    }
    add(last, horizon, vacant, &mut area);
    area.into_iter().map(|a| a / (n * len)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin;

    fn params(name: &str, q: f64, side: i64, t_max: f64) -> KcmParams {
        KcmParams::new(builtin(name).unwrap(), q, side, side, t_max, 7).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        let f = builtin("fa1f").unwrap();
        assert_eq!(KcmParams::new(f.clone(), 1.0, 8, 8, 1.0, 0).unwrap_err(), KcmError::InvalidQ(1.0));
        assert!(matches!(KcmParams::new(f, 0.5, 2, 8, 1.0, 0), Err(KcmError::TorusTooSmall { .. })));
    }

    #[test]
    fn nearly_empty_start() {
        let t = simulate(&params("fa1f", 0.999, 16, 0.5)).unwrap();
        assert!(t.initial_density > 0.98);
        assert!(t.legal_rings as f64 > 0.95 * t.rings as f64);
    }

    #[test]
    fn east_flips_have_empty_witness_neighbour() {
        let p = params("east2d", 0.3, 16, 20.0);
        let t = simulate(&p).unwrap();
        assert!(!t.events.is_empty());
        let rules = p.family.rules();
        // Replay and check each witness on the reconstructed state.
        let mut e = Engine::new(&p, 0);
        for ev in &t.events {
            assert!(e.witness_holds(ev.site as usize, ev.witness as usize));
            assert_eq!(rules[ev.witness as usize].len(), 1);
            assert_eq!(e.state[ev.site as usize], ev.old);
            e.state[ev.site as usize] = ev.new;
        }
        assert_eq!(e.state, t.final_state);
    }

    #[test]
    fn deterministic_and_replayable_log() {
        let p = params("fa1f", 0.2, 16, 5.0);
        let (a, b) = (simulate(&p).unwrap(), simulate(&p).unwrap());
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_event_log(&mut buf).unwrap();
        assert_eq!(buf.len(), 13 * a.events.len());
        let back = read_event_log(&buf);
        assert_eq!(back[0], (a.events[0].site, a.events[0].time, a.events[0].new));
    }

    #[test]
    fn fa1f_density_is_stationary() {
        let r = stationarity_check(&params("fa1f", 0.2, 32, 0.0), 0.0, 50.0, 4).unwrap();
        assert!(r.passed(), "{}", r.to_text());
        let one = stationarity_check(&params("fa1f", 0.2, 32, 0.0), 0.0, 50.0, 1).unwrap();
        assert!(one.sigma.unwrap() > 0.0);
    }

    #[test]
    fn zero_horizon_is_insufficient() {
        let r = stationarity_check(&params("fa1f", 0.2, 8, 0.0), 0.0, 0.0, 2).unwrap();
        assert!(r.insufficient_data());
        assert_eq!(r.to_text(), "insufficient data\n");
    }

    #[test]
    fn tau0_estimates() {
        let p = params("fa1f", 0.2, 16, 1000.0);
        let est = estimate_tau0(&p, 400).unwrap();
        assert_eq!(est.censored, 0);
        let sd = (0.2f64 * 0.8 / 400.0).sqrt();
        assert!((est.fraction_zero - 0.2).abs() <= 3.0 * sd);
        assert_eq!(est, estimate_tau0(&p, 400).unwrap());
        let low = estimate_tau0(&params("fa1f", 0.1, 16, 1000.0), 400).unwrap();
        assert!(low.mean > est.mean);
        let cut = estimate_tau0(&params("east2d", 0.05, 16, 1e-6), 3).unwrap();
        let zeros = (cut.fraction_zero * 3.0).round() as usize;
        assert_eq!(cut.censored + zeros, 3);
        assert_eq!(cut.lower_bound_only, zeros == 0);
    }
}
