//! One-dimensional East and FA-1f chains over arbitrary finite per-site
//! spaces: exact generators, spectral gaps and Poincaré checks.
//!
//! Site `x` (0-based here) holds a state in `0..k_x` with law `ν_x`; the
//! subset `S^g_x` of "good" states facilitates its neighbours. The standard
//! chains are the binary case with `S^g_x = {0}` and `ν_x(0) = q_x`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_STATE_CAP: usize = 1 << 16;
pub const DENSE_LIMIT: usize = 4096;
pub const EIGEN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ChainError {
    #[error("{states} states exceed the cap of {cap}")]
    TooLarge { states: usize, cap: usize },
    #[error("site {0}: {1}")]
    InvalidSite(usize, String),
    #[error("iterative eigensolver did not converge (residual {residual:e} after {iterations} steps)")]
    NotConverged { residual: f64, iterations: usize },
    #[error("hitting-time system is singular")]
    Singular,
    #[error("site {0}: every state is good, so its projected spin is frozen and the comparison is undefined")]
    AlwaysGood(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainKind {
    East,
    Fa1f,
}

impl std::fmt::Display for ChainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChainKind::East => "east",
            ChainKind::Fa1f => "fa1f",
        })
    }
}

impl std::str::FromStr for ChainKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "east" => Ok(ChainKind::East),
            "fa1f" => Ok(ChainKind::Fa1f),
            _ => Err(format!("unknown chain kind `{s}` (east, fa1f)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSpace {
    /// Probabilities of the states, all positive, summing to one.
    pub weights: Vec<f64>,
    pub good: Vec<bool>,
}

impl SiteSpace {
    pub fn binary(q: f64) -> Self {
        SiteSpace { weights: vec![q, 1.0 - q], good: vec![true, false] }
    }

    /// `q_x = ν_x(S^g_x)`.
    pub fn q(&self) -> f64 {
        self.weights.iter().zip(&self.good).filter(|(_, g)| **g).map(|(w, _)| w).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub kind: ChainKind,
    pub sites: Vec<SiteSpace>,
}

impl ChainSpec {
    pub fn new(kind: ChainKind, sites: Vec<SiteSpace>) -> Result<Self, ChainError> {
        for (i, s) in sites.iter().enumerate() {
            if s.weights.is_empty() || s.weights.len() != s.good.len() {
                return Err(ChainError::InvalidSite(i, "weights and good flags must be nonempty and aligned".into()));
            }
            if s.weights.iter().any(|&w| w <= 0.0 || !w.is_finite()) {
                return Err(ChainError::InvalidSite(i, "weights must be positive".into()));
            }
            if (s.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(ChainError::InvalidSite(i, "weights must sum to one".into()));
            }
            if s.q() <= 0.0 {
                return Err(ChainError::InvalidSite(i, "the good event must have positive mass".into()));
            }
        }
        Ok(ChainSpec { kind, sites })
    }

    /// Standard chain with `ν_x = Ber(1 - q)` on `{0, 1}` (0 = facilitating).
    pub fn homogeneous(kind: ChainKind, n: usize, q: f64) -> Self {
        ChainSpec { kind, sites: vec![SiteSpace::binary(q); n] }
    }

    /// Random spec: `n` sites, each with 2 to `max_states` states, random
    /// positive weights and a random nonempty proper good set.
    pub fn random(kind: ChainKind, n: usize, max_states: usize, rng: &mut impl Rng) -> Self {
        assert!(max_states >= 2, "a proper good set needs two states");
        let sites = (0..n)
            .map(|_| {
                let k = rng.random_range(2..=max_states);
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
                let drift: f64 = 1.0 - weights.iter().sum::<f64>();
                weights[0] += drift;
                let mut good: Vec<bool> = (0..k).map(|_| rng.random_bool(0.5)).collect();
                let i = rng.random_range(0..k);
                if !good.iter().any(|&g| g) {
                    good[i] = true;
                } else if good.iter().all(|&g| g) {
                    good[i] = false;
                }
                SiteSpace { weights, good }
            })
            .collect();
        ChainSpec { kind, sites }
    }

    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn q(&self) -> f64 {
        self.sites.iter().map(SiteSpace::q).fold(f64::INFINITY, f64::min)
    }

    pub fn state_count(&self) -> usize {
        self.sites.iter().map(|s| s.weights.len()).product()
    }

    /// The chain of the indicators `1{ω_x ∉ S^g_x}`: the standard chain with
    /// `ν_x(0) = q_x`.
    /// A site whose states are all good projects to a single good state.
    pub fn projected(&self) -> ChainSpec {
        let project = |s: &SiteSpace| {
            if s.good.iter().all(|&g| g) {
                SiteSpace { weights: vec![1.0], good: vec![true] }
            } else {
                SiteSpace::binary(s.q())
            }
        };
        ChainSpec { kind: self.kind, sites: self.sites.iter().map(project).collect() }
    }

    fn decode(&self, mut i: usize, out: &mut [usize]) {
        for (x, s) in self.sites.iter().enumerate() {
            let k = s.weights.len();
            out[x] = i % k;
            i /= k;
        }
    }

    fn good(&self, x: usize, w: &[usize]) -> bool {
        self.sites[x].good[w[x]]
    }

    /// The constraint `c_x(ω)`.
    pub fn constraint(&self, x: usize, w: &[usize]) -> bool {
        let n = self.n();
        if x + 1 == n {
            return true;
        }
        match self.kind {
            ChainKind::East => self.good(x + 1, w),
            ChainKind::Fa1f => self.good(x + 1, w) || (x > 0 && self.good(x - 1, w)),
        }
    }

    /// Stationary product measure.
    pub fn stationary(&self) -> Vec<f64> {
        let mut w = vec![0; self.n()];
        (0..self.state_count())
            .map(|i| {
                self.decode(i, &mut w);
                w.iter().enumerate().map(|(x, &s)| self.sites[x].weights[s]).product()
            })
            .collect()
    }
}

/// Generator in coordinate form: off-diagonal entries `(i, j, rate)` and the
/// diagonal, with `L f(ω) = Σ_x c_x(ω) (ν_x f − f)(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub states: usize,
    pub off_diagonal: Vec<(usize, usize, f64)>,
    pub diagonal: Vec<f64>,
}

pub fn build_generator(spec: &ChainSpec, cap: usize) -> Result<Generator, ChainError> {
    let states = spec.state_count();
    if states > cap {
        return Err(ChainError::TooLarge { states, cap });
    }
    let mut w = vec![0; spec.n()];
    let mut strides = vec![1usize; spec.n()];
    for x in 1..spec.n() {
        strides[x] = strides[x - 1] * spec.sites[x - 1].weights.len();
    }
    let mut off = Vec::new();
    let mut diag = vec![0.0; states];
    for (i, d) in diag.iter_mut().enumerate() {
        spec.decode(i, &mut w);
        for x in 0..spec.n() {
            if !spec.constraint(x, &w) {
                continue;
            }
            for (s, &p) in spec.sites[x].weights.iter().enumerate() {
                if s == w[x] {
                    continue;
                }
                let j = i - w[x] * strides[x] + s * strides[x];
                off.push((i, j, p));
                *d -= p;
            }
        }
    }
    Ok(Generator { states, off_diagonal: off, diagonal: diag })
}

impl Generator {
    pub fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::from_diagonal(&DVector::from_vec(self.diagonal.clone()));
        for &(i, j, r) in &self.off_diagonal {
            m[(i, j)] += r;
        }
        m
    }

    /// `-D^{1/2} L D^{-1/2}` with `D = diag(π)`: symmetric positive semidefinite.
    fn symmetrized(&self, pi: &[f64]) -> Vec<(usize, usize, f64)> {
        let mut out: Vec<(usize, usize, f64)> = self.diagonal.iter().enumerate().map(|(i, &d)| (i, i, -d)).collect();
        out.extend(self.off_diagonal.iter().map(|&(i, j, r)| (i, j, -r * (pi[i] / pi[j]).sqrt())));
        out
    }

    /// Largest `|π_i L_ij − π_j L_ji|` over off-diagonal pairs.
    pub fn detailed_balance_residual(&self, pi: &[f64]) -> f64 {
        let mut map = std::collections::HashMap::with_capacity(self.off_diagonal.len());
        for &(i, j, r) in &self.off_diagonal {
            map.insert((i, j), r);
        }
        self.off_diagonal
            .iter()
            .map(|&(i, j, r)| (pi[i] * r - pi[j] * map.get(&(j, i)).copied().unwrap_or(0.0)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_row_sum(&self) -> f64 {
        let mut sums = self.diagonal.clone();
        for &(i, _, r) in &self.off_diagonal {
            sums[i] += r;
        }
        sums.into_iter().map(f64::abs).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub kind: ChainKind,
    pub n: usize,
    pub q: f64,
    pub gap: f64,
    pub relaxation_time: f64,
    pub state_count: usize,
    /// `"dense"` or `"lanczos"`.
    pub method: String,
    pub tolerance: f64,
}

impl SpectralReport {
    pub const CSV_HEADER: &'static str = "kind,n,q,gap,relaxation_time,method,tolerance";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.12e},{:.12e},{},{:e}",
            self.kind, self.n, self.q, self.gap, self.relaxation_time, self.method, self.tolerance
        )
    }
}

pub fn relaxation_time(spec: &ChainSpec) -> Result<SpectralReport, ChainError> {
    relaxation_time_with(spec, Method::Auto, DEFAULT_STATE_CAP)
}

pub fn relaxation_time_with(spec: &ChainSpec, method: Method, cap: usize) -> Result<SpectralReport, ChainError> {
    let gen = build_generator(spec, cap)?;
    let pi = spec.stationary();
    let sym = gen.symmetrized(&pi);
    let n = gen.states;
    let use_dense = match method {
        Method::Auto => n <= DENSE_LIMIT,
        Method::Dense => true,
        Method::Lanczos => false,
    };
    let gap = if n == 1 {
        f64::INFINITY
    } else if use_dense {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for &(i, j, v) in &sym {
            m[(i, j)] += v;
        }
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev[1]
    } else {
        let phi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
        lanczos_smallest(n, &sym, &phi)?
    };
    Ok(SpectralReport {
        kind: spec.kind,
        n: spec.n(),
        q: spec.q(),
        gap,
        relaxation_time: 1.0 / gap,
        state_count: n,
        method: if use_dense { "dense" } else { "lanczos" }.to_string(),
        tolerance: EIGEN_TOLERANCE,
    })
}

fn csr(n: usize, entries: &[(usize, usize, f64)]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut sorted = entries.to_vec();
    sorted.sort_by_key(|e| (e.0, e.1));
    let mut ptr = vec![0; n + 1];
    for e in &sorted {
        ptr[e.0 + 1] += 1;
    }
    for i in 0..n {
        ptr[i + 1] += ptr[i];
    }
    (ptr, sorted.iter().map(|e| e.1).collect(), sorted.iter().map(|e| e.2).collect())
}

/// Smallest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `a` and off-diagonal `b`, by Sturm-sequence bisection, together with the
/// last component of its unit eigenvector (by inverse iteration).
fn tridiagonal_smallest(a: &[f64], b: &[f64]) -> (f64, f64) {
    let k = a.len();
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..k {
            let off = if i == 0 { 0.0 } else { b[i - 1] * b[i - 1] / d };
            d = a[i] - x - off;
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let radius = |i: usize| (if i > 0 { b[i - 1].abs() } else { 0.0 }) + (if i + 1 < k { b[i].abs() } else { 0.0 });
    let mut lo = (0..k).map(|i| a[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..k).map(|i| a[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    // Inverse iteration with a slightly perturbed shift.
    let shift = theta - 1e-10 * theta.abs().max(1e-12);
    let mut y = vec![1.0; k];
    for _ in 0..3 {
        let mut c = vec![0.0; k];
        let mut d = vec![0.0; k];
        let mut piv = a[0] - shift;
        for i in 0..k {
            if i > 0 {
                piv = a[i] - shift - b[i - 1] * c[i - 1];
            }
            if piv.abs() < 1e-300 {
                piv = 1e-300;
            }
            c[i] = if i + 1 < k { b[i] / piv } else { 0.0 };
            d[i] = (y[i] - if i > 0 { b[i - 1] * d[i - 1] } else { 0.0 }) / piv;
        }
        for i in (0..k).rev() {
            y[i] = d[i] - if i + 1 < k { c[i] * y[i + 1] } else { 0.0 };
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
    }
    (theta, y[k - 1])
}

/// Smallest eigenvalue of a symmetric PSD operator on the orthogonal
/// complement of its known null vector `phi`, by Lanczos with full
/// reorthogonalisation.
fn lanczos_smallest(n: usize, entries: &[(usize, usize, f64)], phi: &[f64]) -> Result<f64, ChainError> {
    let (ptr, col, val) = csr(n, entries);
    let matvec = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = (ptr[i]..ptr[i + 1]).map(|k| val[k] * v[col[k]]).sum();
        }
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let pn = dot(phi, phi).sqrt();
    let phi: Vec<f64> = phi.iter().map(|p| p / pn).collect();
    let orth = |v: &mut Vec<f64>, basis: &[Vec<f64>]| {
        for b in std::iter::once(&phi).chain(basis) {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    orth(&mut v, &[]);
    let nv = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    // Keep the Krylov basis under about 400 MB.
    let max_iter = (n - 1).min(2000).min(50_000_000 / n).max(2);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let (mut alpha, mut beta): (Vec<f64>, Vec<f64>) = (vec![], vec![]);
    let mut w = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for j in 0..max_iter {
        matvec(&basis[j], &mut w);
        alpha.push(dot(&w, &basis[j]));
        let mut r = w.clone();
        for _ in 0..2 {
            orth(&mut r, &basis);
        }
        let b = dot(&r, &r).sqrt();
        let last = j + 1 == max_iter || b < 1e-14;
        if j % 10 == 9 || last {
            let (theta, tail) = tridiagonal_smallest(&alpha, &beta);
            residual = (b * tail).abs();
            if residual <= EIGEN_TOLERANCE.sqrt() * theta.abs().max(1e-6) || b < 1e-14 {
                return Ok(theta);
            }
        }
        if last {
            break;
        }
        beta.push(b);
        basis.push(r.iter().map(|x| x / b).collect());
    }
    Err(ChainError::NotConverged { residual, iterations: max_iter })
}

/// `Var_ν(f)` and the Dirichlet form `Σ_x ν(c_x Var_x f)`.
pub fn variance_and_dirichlet(spec: &ChainSpec, f: &[f64]) -> (f64, f64) {
    let pi = spec.stationary();
    let mean: f64 = pi.iter().zip(f).map(|(p, v)| p * v).sum();
    let var: f64 = pi.iter().zip(f).map(|(p, v)| p * (v - mean).powi(2)).sum();
    let n = spec.n();
    let mut strides = vec![1usize; n];
    for x in 1..n {
        strides[x] = strides[x - 1] * spec.sites[x - 1].weights.len();
    }
    let mut w = vec![0; n];
    let mut dir = 0.0;
    for (i, &p) in pi.iter().enumerate() {
        spec.decode(i, &mut w);
        for x in 0..n {
            if !spec.constraint(x, &w) {
                continue;
            }
            let site = &spec.sites[x];
            let base = i - w[x] * strides[x];
            let vals = site.weights.iter().enumerate().map(|(s, &q)| (q, f[base + s * strides[x]]));
            let m: f64 = vals.clone().map(|(q, v)| q * v).sum();
            let vx: f64 = vals.map(|(q, v)| q * (v - m).powi(2)).sum();
            dir += p * vx;
        }
    }
    (var, dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    pub q: f64,
    pub t_std: f64,
    pub t_gen: f64,
    pub trials: usize,
    /// Random `f` with `Var(f) > T_std/q · D(f)` beyond the slack.
    pub violations: usize,
    pub worst_ratio: f64,
    /// Violations of the same inequality without the factor `1/q`
    /// (recorded, not a failure).
    pub sharp_violations: usize,
    pub gap_bound_holds: bool,
    /// First violating function, if any.
    pub witness: Option<Vec<f64>>,
}

impl PoincareReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.gap_bound_holds
    }
}

pub const POINCARE_SLACK: f64 = 1e-9;

/// Checks `Var(f) ≤ (1/q)·T_std·Σ_x ν(c_x Var_x f)` on `trials` random
/// functions with i.i.d. uniform values, and `T_gen ≤ T_std / q`. The
/// projected chain must be a genuine two-state chain at every site.
pub fn verify_poincare(spec: &ChainSpec, trials: usize, seed: u64) -> Result<PoincareReport, ChainError> {
    if let Some(x) = spec.sites.iter().position(|s| s.good.iter().all(|&g| g)) {
        return Err(ChainError::AlwaysGood(x));
    }
    let q = spec.q();
    let t_std = relaxation_time(&spec.projected())?.relaxation_time;
    let t_gen = relaxation_time(spec)?.relaxation_time;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = spec.state_count();
    let (mut violations, mut sharp, mut worst) = (0, 0, 0.0f64);
    let mut witness = None;
    for _ in 0..trials {
        let f: Vec<f64> = (0..states).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (var, dir) = variance_and_dirichlet(spec, &f);
        let bound = t_std / q * dir;
        if var > bound + POINCARE_SLACK * var.max(1.0) {
            violations += 1;
            witness.get_or_insert(f);
        }
        if var > t_std * dir + POINCARE_SLACK * var.max(1.0) {
            sharp += 1;
        }
        if bound > 0.0 {
            worst = worst.max(var / bound);
        }
    }
    Ok(PoincareReport {
        q,
        t_std,
        t_gen,
        trials,
        violations,
        worst_ratio: worst,
        sharp_violations: sharp,
        gap_bound_holds: t_gen <= t_std / q * (1.0 + POINCARE_SLACK),
        witness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub n: usize,
    pub q: f64,
    /// The projected chain's generator equals the homogeneous standard one.
    pub projection_exact: bool,
    pub t_std: f64,
    pub t_gen: f64,
    /// `T_std / q − T_gen`.
    pub margin: f64,
}

/// Homogeneous reduction on a three-state discretisation of each site
/// (good cell of mass `q`, two bad cells of mass `(1 − q)/2`).
pub fn verify_scaling_reduction(kind: ChainKind, n: usize, q: f64) -> Result<ScalingReport, ChainError> {
    let site = SiteSpace { weights: vec![q, (1.0 - q) / 2.0, (1.0 - q) / 2.0], good: vec![true, false, false] };
    let gen = ChainSpec::new(kind, vec![site; n])?;
    let std = ChainSpec::homogeneous(kind, n, q);
    let a = build_generator(&gen.projected(), DEFAULT_STATE_CAP)?;
    let b = build_generator(&std, DEFAULT_STATE_CAP)?;
    let projection_exact = a.dense() == b.dense();
    let t_std = relaxation_time(&std)?.relaxation_time;
    let t_gen = relaxation_time(&gen)?.relaxation_time;
    Ok(ScalingReport { n, q, projection_exact, t_std, t_gen, margin: t_std / q - t_gen })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub n: usize,
    pub q: f64,
    /// `E_μ(τ)` for the first time site 1 (the one farthest from the free end) is in state 0.
    pub mean_hitting_time: f64,
    pub relaxation_time: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Exact `E_μ(τ)` for the homogeneous standard East chain against `T_rel / q`.
pub fn verify_hitting_bound(n: usize, q: f64) -> Result<HittingReport, ChainError> {
    let spec = ChainSpec::homogeneous(ChainKind::East, n, q);
    let gen = build_generator(&spec, DEFAULT_STATE_CAP)?;
    let pi = spec.stationary();
    let l = gen.dense();
    // Site 0 is in state 0 exactly for even indices.
    let outside: Vec<usize> = (0..gen.states).filter(|i| i % 2 == 1).collect();
    let k = outside.len();
    let a = DMatrix::from_fn(k, k, |r, c| l[(outside[r], outside[c])]);
    let rhs = DVector::from_element(k, -1.0);
    let h = a.lu().solve(&rhs).ok_or(ChainError::Singular)?;
    let mean: f64 = outside.iter().zip(h.iter()).map(|(&i, hv)| pi[i] * hv).sum();
    let t = relaxation_time(&spec)?.relaxation_time;
    let bound = t / q;
    Ok(HittingReport { n, q, mean_hitting_time: mean, relaxation_time: t, bound, holds: mean <= bound })
}
