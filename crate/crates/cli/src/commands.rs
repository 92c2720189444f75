use anyhow::{bail, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use kcmlab::bootstrap::{estimate_t_u, InfectionTimeEstimate};
use kcmlab::chain::{
    relaxation_time, verify_hitting_bound, verify_poincare, verify_scaling_reduction, ChainKind, ChainSpec,
    SpectralReport,
};
use kcmlab::difficulty::{family_difficulties, CriticalLabel, DifficultyValue, OracleParams};
use kcmlab::droplet::{
    build_half_ring, helping_sets_upto, verify_generalized_advance, verify_spread, verify_supercritical_rectangle,
    voracious_for_ring, DropletError, RingKind, RingSpec, SpreadMode, Q,
};
use kcmlab::geometry::{self, Rootedness, TriClass};
use kcmlab::kcm::{estimate_tau0, stationarity_check, KcmParams, TauEstimate};

use crate::meta::{emit, header};
use crate::{BootstrapArgs, ChainArgs, Check, ClassifyArgs, DropletArgs, KcmArgs};

fn oracle_line(p: &OracleParams) -> String {
    format!(
        "oracle: bound={} window_radius={} line_span={} budget={}",
        p.bound, p.window_radius, p.line_span, p.budget
    )
}

fn value_text(greek: &str, v: DifficultyValue) -> String {
    match v {
        DifficultyValue::Finite(k) => format!("{greek}={k}"),
        DifficultyValue::Exceeds(b) => format!("{greek}>{b} (bound)"),
    }
}

#[derive(Serialize)]
struct ClassifyConfig<'a> {
    family: String,
    oracle: &'a OracleParams,
}

pub fn classify(args: &ClassifyArgs) -> Result<()> {
    let family = args.family.load()?;
    let params = args.oracle.params(&family);
    let cls = geometry::classify(&family);
    let report = family_difficulties(&family, &params)?;
    let summary = match cls.label.tri {
        TriClass::Supercritical => match cls.label.rooted {
            Some(Rootedness::Rooted) => "supercritical, rooted".to_string(),
            _ => "supercritical, unrooted".to_string(),
        },
        TriClass::Subcritical => "subcritical".to_string(),
        TriClass::Critical => {
            let mut parts = vec!["critical".to_string(), value_text("α", report.alpha), value_text("β", report.beta)];
            parts.push(match report.critical_label {
                Some(CriticalLabel::AlphaRooted) => "α-rooted".to_string(),
                Some(CriticalLabel::BetaUnrooted) => "β-unrooted".to_string(),
                Some(CriticalLabel::UndecidedAtBound(b)) => format!("rootedness undecided at bound {b}"),
                None => "unlabelled".to_string(),
            });
            match report.balanced {
                Some(true) => parts.push("balanced".to_string()),
                Some(false) => parts.push("unbalanced".to_string()),
                None => {}
            }
            parts.join(", ")
        }
    };
    let config = ClassifyConfig { family: family.to_text(), oracle: &params };
    let mut out = header("classify", &config, None, &[oracle_line(&params)])?;
    out.push_str(&format!("class: {summary}\n"));
    out.push_str(&format!("alpha: {}\nbeta: {}\n", report.alpha, report.beta));
    out.push_str("stable set:\n");
    let stable = cls.stable.to_text();
    if stable.is_empty() {
        out.push_str("  (empty)\n");
    }
    for line in stable.lines() {
        out.push_str(&format!("  {line}\n"));
    }
    if let Some(w) = cls.witness {
        out.push_str(&format!("witness semicircle midpoint: {}\n", w.midpoint()));
    }
    out.push_str("per-direction difficulties:\n");
    out.push_str(&report.to_csv());
    emit(args.out.as_deref(), &out)
}

#[derive(Serialize)]
struct BootstrapConfig<'a> {
    family: String,
    q: &'a [f64],
    width: i64,
    height: i64,
    trials: usize,
    t_max: u32,
    seed: u64,
}

fn rounds_cell(v: f64, t_max: u32) -> String {
    if v.is_infinite() {
        format!("≥{t_max}")
    } else {
        format!("{v}")
    }
}

fn bootstrap_row(e: &InfectionTimeEstimate, t_max: u32) -> String {
    format!(
        "{},{},{},{},{},{},{}\n",
        e.q,
        e.trials,
        rounds_cell(e.median, t_max),
        rounds_cell(e.ci_low, t_max),
        rounds_cell(e.ci_high, t_max),
        e.censored,
        e.seed
    )
}

pub fn bootstrap(args: &BootstrapArgs) -> Result<()> {
    let family = args.family.load()?;
    if let Some(bad) = args.q.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        bail!("q must lie in [0, 1], got {bad}");
    }
    if args.trials == 0 {
        bail!("at least one trial is required");
    }
    if args.width < 1 || args.height < 1 {
        bail!("torus sides must be positive");
    }
    let config = BootstrapConfig {
        family: family.to_text(),
        q: &args.q,
        width: args.width,
        height: args.height,
        trials: args.trials,
        t_max: args.t_max,
        seed: args.seed,
    };
    let window = format!("torus: {}x{} trials={} t_max={}", args.width, args.height, args.trials, args.t_max);
    let mut out = header("bootstrap", &config, Some(args.seed), &[window])?;
    out.push_str("q,trials,median_rounds,ci_low,ci_high,censored,seed\n");
    for &q in &args.q {
        let e = estimate_t_u(&family, q, args.width, args.height, args.trials, args.t_max, args.seed);
        out.push_str(&bootstrap_row(&e, args.t_max));
    }
    emit(args.out.as_deref(), &out)
}

#[derive(Serialize)]
struct KcmConfig<'a> {
    family: String,
    q: &'a [f64],
    width: i64,
    height: i64,
    trials: usize,
    t_max: f64,
    horizon: Option<f64>,
    force: bool,
    seed: u64,
}

pub fn kcm(args: &KcmArgs) -> Result<()> {
    let family = args.family.load()?;
    let config = KcmConfig {
        family: family.to_text(),
        q: &args.q,
        width: args.width,
        height: args.height,
        trials: args.trials,
        t_max: args.t_max,
        horizon: args.horizon,
        force: args.force,
        seed: args.seed,
    };
    let window = format!("torus: {}x{} trials={} t_max={}", args.width, args.height, args.trials, args.t_max);
    let mut out = header("kcm", &config, Some(args.seed), &[window])?;
    out.push_str(TauEstimate::CSV_HEADER);
    out.push_str(",density,density_sigma,stationarity\n");
    let subcritical = geometry::classify(&family).label.tri == TriClass::Subcritical;
    if subcritical && !args.force {
        eprintln!(
            "warning: {} is subcritical, so the dynamics is not ergodic at small q; skipping every q (use --force to run)",
            family.name()
        );
        out.push_str("# skipped: subcritical family, rerun with --force\n");
        return emit(args.out.as_deref(), &out);
    }
    for &q in &args.q {
        let params = KcmParams::new(family.clone(), q, args.width, args.height, args.t_max, args.seed)?;
        let tau = estimate_tau0(&params, args.trials)?;
        let stat = match args.horizon {
            Some(h) => {
                let r = stationarity_check(&params, h / 2.0, h, args.trials)?;
                match (r.density, r.sigma) {
                    (Some(d), Some(s)) => format!("{d},{s},{}", if r.passed() { "PASS" } else { "FAIL" }),
                    _ => "-,-,insufficient".to_string(),
                }
            }
            None => "-,-,-".to_string(),
        };
        out.push_str(&format!("{},{stat}\n", tau.csv_row()));
    }
    emit(args.out.as_deref(), &out)
}

#[derive(Serialize)]
struct DropletConfig<'a> {
    family: String,
    oracle: &'a OracleParams,
    u: Option<(i64, i64)>,
    kind: RingKind,
    w: Q,
    l: Q,
    extra: Q,
    mode: SpreadMode,
    lambda_cap: i64,
    n1: i64,
    n2: i64,
}

pub fn droplet(args: &DropletArgs) -> Result<()> {
    let family = args.family.load()?;
    let params = args.oracle.params(&family);
    let config = DropletConfig {
        family: family.to_text(),
        oracle: &params,
        u: args.u.map(|d| (d.0.x(), d.0.y())),
        kind: args.kind,
        w: args.w,
        l: args.l,
        extra: args.extra,
        mode: args.mode,
        lambda_cap: args.lambda_cap,
        n1: args.n1,
        n2: args.n2,
    };
    let cls = geometry::classify(&family);
    let text = match cls.label.tri {
        TriClass::Subcritical => bail!("{} is subcritical; droplets do not grow", family.name()),
        TriClass::Supercritical => {
            let r = verify_supercritical_rectangle(&family, args.n1, args.n2)?;
            let extra = [format!("rectangle: n1={} n2={}", args.n1, args.n2)];
            let mut out = header("droplet", &config, None, &extra)?;
            out.push_str("supercritical family: checking rectangle growth\n");
            out.push_str(&r.to_text());
            out
        }
        TriClass::Critical => {
            let u = match args.u {
                Some(d) => d.0,
                None => easiest_semicircle(&cls.stable, &family, &params)?,
            };
            let extra = [
                oracle_line(&params),
                format!(
                    "ring: u={u} kind={:?} w={} l={} extra={} mode={:?} lambda_cap={}",
                    args.kind, args.w, args.l, args.extra, args.mode, args.lambda_cap
                ),
            ];
            let mut out = header("droplet", &config, None, &extra)?;
            out.push_str(&critical_droplet(&family, &params, u, args)?);
            out
        }
    };
    emit(args.out.as_deref(), &text)
}

/// Midpoint of an open semicircle meeting the stable set finitely whose
/// hardest isolated direction is as easy as possible.
fn easiest_semicircle(
    stable: &geometry::StableSet,
    family: &kcmlab::family::UpdateFamily,
    params: &OracleParams,
) -> Result<geometry::Direction> {
    let report = family_difficulties(family, params)?;
    let zero = DifficultyValue::Finite(0);
    let cost = |c: &geometry::Semicircle| {
        stable.isolated_in(c).into_iter().map(|d| report.difficulty(d).unwrap_or(zero)).max().unwrap_or(zero)
    };
    geometry::candidate_semicircles(&stable.event_points())
        .into_iter()
        .filter(|c| !stable.meets_infinitely(c))
        .min_by_key(cost)
        .map(|c| c.midpoint())
        .ok_or_else(|| anyhow::anyhow!("no semicircle meets the stable set finitely"))
}

fn critical_droplet(
    family: &kcmlab::family::UpdateFamily,
    params: &OracleParams,
    u: kcmlab::geometry::Direction,
    args: &DropletArgs,
) -> Result<String> {
    let mut spec = RingSpec::new(u, args.kind, args.w, args.l);
    spec.extra_length = args.extra;
    let ring = build_half_ring(family, &spec)?;
    let mut out = ring.to_text();
    let vors = match voracious_for_ring(family, &ring, params, args.lambda_cap) {
        Ok(v) => v,
        Err(e @ (DropletError::UndeterminedAtCap { .. } | DropletError::NoVoraciousSet(..))) => {
            out.push_str(&format!("UNDETERMINED {e}\n"));
            return Ok(out);
        }
        Err(e) => return Err(e.into()),
    };
    for (i, v) in vors.iter().enumerate() {
        out.push_str(&format!("voracious strip {} v={} sites={} lambda={}\n", i + 1, v.v, v.sites.len(), v.lambda));
    }
    let report = if ring.is_generalized() {
        verify_generalized_advance(family, &ring, &vors, args.w, args.lambda_cap)
    } else {
        let total = match args.mode {
            SpreadMode::AdvanceOne => ring.step_to_new_point(),
            SpreadMode::AdvanceWidth | SpreadMode::Corollary => args.w,
        };
        let helping = match args.mode {
            SpreadMode::Corollary => Vec::new(),
            _ => helping_sets_upto(&ring, &vors, total, |_| true),
        };
        verify_spread(family, &ring, &helping, &vors, args.mode, args.lambda_cap)
    };
    out.push_str(&report.to_text());
    Ok(out)
}

#[derive(Serialize)]
struct ChainConfig<'a> {
    kind: ChainKind,
    n: Vec<usize>,
    q: &'a [f64],
    checks: &'a [Check],
    specs: usize,
    functions: usize,
    seed: u64,
}

pub fn chain(args: &ChainArgs) -> Result<()> {
    let ns: Vec<usize> = args.n.iter().flat_map(|s| s.0.iter().copied()).collect();
    if ns.contains(&0) {
        bail!("chain length must be at least 1");
    }
    if let Some(bad) = args.q.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        bail!("q must lie in (0, 1), got {bad}");
    }
    let config = ChainConfig {
        kind: args.kind,
        n: ns.clone(),
        q: &args.q,
        checks: &args.checks,
        specs: args.specs,
        functions: args.functions,
        seed: args.seed,
    };
    let mut out = header("chain", &config, Some(args.seed), &[])?;
    let grid: Vec<(usize, f64)> = ns.iter().flat_map(|&n| args.q.iter().map(move |&q| (n, q))).collect();
    for (i, check) in args.checks.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match check {
            Check::Relax => {
                out.push_str("# table: relax\n");
                out.push_str(SpectralReport::CSV_HEADER);
                out.push('\n');
                let rows = grid
                    .par_iter()
                    .map(|&(n, q)| relaxation_time(&ChainSpec::homogeneous(args.kind, n, q)))
                    .collect::<Result<Vec<_>, _>>()?;
                for r in rows {
                    out.push_str(&format!("{}\n", r.csv_row()));
                }
            }
            Check::Poincare => out.push_str(&poincare_table(args, &ns)?),
            Check::Scaling => {
                out.push_str("# table: scaling\nkind,n,q,projection_exact,t_std,t_gen,margin\n");
                let rows = grid
                    .par_iter()
                    .map(|&(n, q)| verify_scaling_reduction(args.kind, n, q))
                    .collect::<Result<Vec<_>, _>>()?;
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{},{:.12e},{:.12e},{:.12e}\n",
                        args.kind, r.n, r.q, r.projection_exact, r.t_std, r.t_gen, r.margin
                    ));
                }
            }
            Check::Hitting => out.push_str(&hitting_table(args, &grid)?),
        }
    }
    emit(args.out.as_deref(), &out)
}

fn poincare_table(args: &ChainArgs, ns: &[usize]) -> Result<String> {
    let mut out = String::from("# table: poincare\nkind,n,spec,states,q,t_std,t_gen,violations,worst_ratio,gap_bound_holds\n");
    let mut total = 0;
    let mut specs_run = 0;
    for &n in ns {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        rng.set_stream(n as u64);
        let specs: Vec<ChainSpec> = (0..args.specs).map(|_| ChainSpec::random(args.kind, n, 3, &mut rng)).collect();
        let reports = specs
            .par_iter()
            .enumerate()
            .map(|(i, s)| verify_poincare(s, args.functions, args.seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        for (i, (s, r)) in specs.iter().zip(&reports).enumerate() {
            total += r.violations + usize::from(!r.gap_bound_holds);
            specs_run += 1;
            out.push_str(&format!(
                "{},{n},{i},{},{},{:.12e},{:.12e},{},{:.6},{}\n",
                args.kind,
                s.state_count(),
                r.q,
                r.t_std,
                r.t_gen,
                r.violations,
                r.worst_ratio,
                r.gap_bound_holds
            ));
        }
    }
    let summary = format!("poincare: {specs_run} specs, violations: {total}");
    eprintln!("{summary}");
    out.push_str(&format!("# {summary}\n"));
    Ok(out)
}

fn hitting_table(args: &ChainArgs, grid: &[(usize, f64)]) -> Result<String> {
    let mut out = String::from("# table: hitting\nkind,n,q,mean_hitting_time,relaxation_time,bound,holds,margin\n");
    if args.kind != ChainKind::East {
        eprintln!("warning: the hitting check is defined for the East chain only; skipped");
        out.push_str("# skipped: east only\n");
        return Ok(out);
    }
    let rows = grid.par_iter().map(|&(n, q)| verify_hitting_bound(n, q)).collect::<Result<Vec<_>, _>>()?;
    for r in rows {
        let margin = r.bound - r.mean_hitting_time;
        let verdict = if r.holds { "bound holds" } else { "bound fails" };
        eprintln!("hitting n={} q={}: {verdict}, margin {margin:.6}", r.n, r.q);
        out.push_str(&format!(
            "east,{},{},{:.12e},{:.12e},{:.12e},{},{:.12e}\n",
            r.n, r.q, r.mean_hitting_time, r.relaxation_time, r.bound, r.holds, margin
        ));
    }
    Ok(out)
}
