//! One function per subcommand. Each returns the items it failed on;
//! hard errors abort the run.

use std::fs;

use anyhow::{anyhow, bail, Context as _, Result};
use mvchain::chains::{ft_step, functional_trajectory, mean_trajectory, density_trajectory, GRID_DEFICIT_WARNING};
use mvchain::ergodicity::{
    base_abs_moment, drift_grid, drift_verify, empirical_tv_curve, epsilon_lower_bound, small_set_radius, stationary_mean_sample, DriftSpec,
};
use mvchain::kernel::linspace;
use mvchain::moments::{brute_force_moment, monte_carlo_moments, polya_mixed_moment, BruteForceMode, Compositions};
use mvchain::newton::{newton_run, newton_run_recording, WeightSchedule};
use mvchain::polya::PolyaUrn;
use mvchain::{par_replicas, DensityGridState, FtChainState, FtKernel, MomentQuery, NewtonState, QnState, StreamRng, WeightedDiscreteMeasure};
use serde::Serialize;

use crate::args::{
    ChainKind, DiagnoseArgs, Example1Args, Example2Args, Example3Args, MomentsArgs, NewtonArgs, SimulateArgs, SourceKind,
};
use crate::experiments::{self, BurnInRow, Example1Config, Example2Config, Example3Config, KsRow, Reference};
use crate::output::{num, opt, Failure, OutDir};
use crate::spec::{self, Functional};
use crate::usage;

// top-level stream indices per subcommand
const SIMULATE: u64 = 10;
const MOMENTS: u64 = 11;
const DIAGNOSE: u64 = 12;

pub struct Context<'a> {
    pub seed: Option<u64>,
    pub timing: bool,
    pub out: &'a mut OutDir,
}

impl Context<'_> {
    fn require_seed(&self, command: &str) -> Result<u64> {
        self.seed.ok_or_else(|| anyhow!("{command} needs --seed"))
    }
}

fn label(x: f64) -> String {
    num(x)
}

fn scalar_rows(values: &[f64]) -> impl Iterator<Item = String> + '_ {
    values.iter().enumerate().map(|(m, v)| format!("{m},{}", num(*v)))
}

/// Rows of `mu` at step `m`; exactly repeated atoms (urn repeats, discrete
/// bases) are merged in order of first appearance.
fn measure_rows(m: usize, mu: &WeightedDiscreteMeasure, rows: &mut Vec<String>) {
    let mut index: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(mu.len());
    for (atom, w) in mu.iter() {
        match index.entry(atom.to_bits()) {
            std::collections::hash_map::Entry::Occupied(e) => merged[*e.get()].1 += w,
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(merged.len());
                merged.push((atom, w));
            }
        }
    }
    rows.extend(merged.into_iter().map(|(atom, w)| format!("{m},{},{}", num(atom), num(w))));
}

pub fn simulate(args: &SimulateArgs, ctx: &mut Context) -> Result<Vec<Failure>> {
    let seed = ctx.require_seed("simulate-chain")?;
    if args.replicas == 0 {
        usage!("--replicas must be at least 1");
    }
    let base = spec::base(&args.base, args.a)?;
    let kernel = FtKernel::new(args.n, base.clone())?.with_prune_threshold(args.prune_threshold)?;
    let root = StreamRng::new(seed).split(SIMULATE);
    let suffix = |r: usize| if args.replicas > 1 { format!("_r{r}") } else { String::new() };
    let mut failures = Vec::new();
    match args.kind {
        ChainKind::Mean => {
            let trajs = par_replicas(&root, args.replicas, |_, r| mean_trajectory(&kernel, args.m0, args.steps, r));
            for (r, t) in trajs.iter().enumerate() {
                ctx.out.csv(&format!("trajectory{}.csv", suffix(r)), "m,value", scalar_rows(t))?;
            }
        }
        ChainKind::Functional => {
            let g = Functional::parse(&args.g)?;
            let g0 = g.eval(args.m0);
            let trajs = par_replicas(&root, args.replicas, |_, r| functional_trajectory(&kernel, |x| g.eval(x), g0, args.steps, r));
            for (r, t) in trajs.into_iter().enumerate() {
                match t {
                    Ok(t) => {
                        ctx.out.csv(&format!("trajectory{}.csv", suffix(r)), "m,value", scalar_rows(&t))?;
                    }
                    Err(e) => failures.push(Failure::new(format!("replica {r}"), e)),
                }
            }
        }
        ChainKind::Measure => {
            let every = args.record_every.max(1);
            let tables = par_replicas(&root, args.replicas, |_, r| {
                let mut state = FtChainState::new(args.n, WeightedDiscreteMeasure::point_mass(args.m0));
                let mut rows = Vec::new();
                measure_rows(0, &state.measure(), &mut rows);
                for m in 1..=args.steps {
                    state = ft_step(state, &kernel, r);
                    if m % every == 0 || m == args.steps {
                        measure_rows(m, &state.measure(), &mut rows);
                    }
                }
                rows
            });
            for (r, rows) in tables.into_iter().enumerate() {
                ctx.out.csv(&format!("measure{}.csv", suffix(r)), "m,atom,weight", rows)?;
            }
        }
        ChainKind::Density => {
            let k = spec::kernel(&args.kernel)?;
            let (lo, hi, points) = spec::grid(&args.grid, 801)?;
            let grid = linspace(lo, hi, points)?;
            let f0 = DensityGridState::new(grid.clone(), |x| k.density(x, args.f0_theta))?;
            let all = par_replicas(&root, args.replicas, |_, r| density_trajectory(&kernel, &*k, f0.clone(), &args.snapshots, r));
            for (r, states) in all.into_iter().enumerate() {
                for s in states {
                    if s.mass_deficit() > GRID_DEFICIT_WARNING {
                        eprintln!("warning: grid misses {:.3} of the density mass at m = {}", s.mass_deficit(), s.step());
                    }
                    let rows = grid.iter().zip(s.values()).map(|(x, f)| format!("{},{}", num(*x), num(*f)));
                    ctx.out.csv(&format!("density{}_m{}.csv", suffix(r), s.step()), "x,f", rows)?;
                }
            }
        }
        ChainKind::Qn => {
            let tables = par_replicas(&root, args.replicas, |_, r| -> mvchain::Result<Vec<String>> {
                let mut q = QnState::new();
                let mut urn = PolyaUrn::new(&base);
                let mut rows = Vec::new();
                for m in 1..=args.steps {
                    let z = match args.source {
                        SourceKind::Polya => urn.next(r),
                        SourceKind::Iid => base.sample(r),
                    };
                    q.advance(z, r)?;
                    if m % args.record_every.max(1) == 0 || m == args.steps {
                        measure_rows(m, q.measure().expect("advanced"), &mut rows);
                    }
                }
                Ok(rows)
            });
            for (r, t) in tables.into_iter().enumerate() {
                match t {
                    Ok(rows) => {
                        ctx.out.csv(&format!("qn{}.csv", suffix(r)), "m,atom,weight", rows)?;
                    }
                    Err(e) => failures.push(Failure::new(format!("replica {r}"), e)),
                }
            }
        }
    }
    Ok(failures)
}

pub const MOMENTS_HEADER: &str = "n,k,orders,closed_form,exact_sum,mc,mc_se";

/// Exact-sum budget.
const EXACT_MAX_N: usize = 12;
const EXACT_MAX_K: usize = 3;

pub fn moments(args: &MomentsArgs, ctx: &mut Context) -> Result<Vec<Failure>> {
    let k = args.masses.len();
    let total = args.a.unwrap_or_else(|| args.masses.iter().sum());
    let orders: Vec<Vec<usize>> = match (&args.orders, args.max_order) {
        (Some(s), _) => spec::order_vectors(s)?,
        (None, Some(r)) => (0..=r * k)
            .flat_map(|t| Compositions::new(k, t))
            .filter(|o| o.iter().all(|&x| x <= r))
            .collect(),
        (None, None) => usage!("moments needs --orders or --max-order"),
    };
    if orders.is_empty() {
        usage!("no order vectors given");
    }
    for o in &orders {
        if o.len() != k {
            usage!("order vector {o:?} has {} entries but there are {k} masses", o.len());
        }
    }
    let root = ctx.seed.map(|s| StreamRng::new(s).split(MOMENTS));
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for &n in &args.n {
        // validates n, k, positivity and Σ masses = a
        MomentQuery::with_total(n, total, args.masses.clone(), orders[0].clone())?;
        let mc = match &root {
            Some(r) if args.mc_samples > 0 => match monte_carlo_moments(n, &args.masses, &orders, args.mc_samples, &r.split(n as u64)) {
                Ok(v) => v.into_iter().map(Some).collect(),
                Err(e) => {
                    failures.push(Failure::new(format!("mc n={n}"), e));
                    vec![None; orders.len()]
                }
            },
            _ => vec![None; orders.len()],
        };
        for (o, est) in orders.iter().zip(mc) {
            let q = MomentQuery::with_total(n, total, args.masses.clone(), o.clone())?;
            let name = format!("n={n} orders={o:?}");
            let closed = match polya_mixed_moment(&q) {
                Ok(v) => Some(v),
                Err(e) => {
                    failures.push(Failure::new(format!("closed_form {name}"), e));
                    None
                }
            };
            let exact = if n <= EXACT_MAX_N && k <= EXACT_MAX_K {
                match brute_force_moment(&q, BruteForceMode::ExactSum, &StreamRng::new(0)) {
                    Ok(v) => Some(v.value),
                    Err(e) => {
                        failures.push(Failure::new(format!("exact_sum {name}"), e));
                        None
                    }
                }
            } else {
                None
            };
            let o_text: Vec<String> = o.iter().map(usize::to_string).collect();
            rows.push(format!(
                "{n},{k},{},{},{},{},{}",
                o_text.join(";"),
                opt(closed),
                opt(exact),
                opt(est.map(|e| e.value)),
                opt(est.map(|e| e.std_error))
            ));
        }
    }
    let text = ctx.out.csv("moments.csv", MOMENTS_HEADER, rows)?;
    print!("{text}");
    Ok(failures)
}

#[derive(Debug, Serialize)]
pub struct TvRow {
    pub m: usize,
    pub tv: f64,
}

#[derive(Debug, Serialize)]
pub struct DiagnoseReport {
    pub radius: f64,
    pub drift_pass: Option<bool>,
    pub epsilon_bound: Option<f64>,
    pub tv_curve: Vec<TvRow>,
}

pub fn diagnose(args: &DiagnoseArgs, ctx: &mut Context) -> Result<Vec<Failure>> {
    let base = args.base.as_deref().map(|b| spec::base(b, args.a)).transpose()?;
    let abs_moment = match (args.mean_abs_y, &base) {
        (Some(v), _) => v,
        (None, Some(b)) => base_abs_moment(b, args.s)?,
        (None, None) => usage!("diagnose needs --mean-abs-y or --base"),
    };
    let lambda = args.lambda.unwrap_or_else(|| DriftSpec::midway_lambda(args.n, args.a, args.s));
    let drift = DriftSpec::with_exponent(args.n, args.a, abs_moment, lambda, args.s)?;
    let radius = small_set_radius(&drift);
    let mut failures = Vec::new();
    let root = ctx.seed.map(|s| StreamRng::new(s).split(DIAGNOSE));

    let mut drift_pass = None;
    let mut tv_curve = Vec::new();
    if let (Some(root), Some(base)) = (&root, &base) {
        match drift_grid(&drift, args.drift_points).and_then(|g| drift_verify(&drift, base, &g, args.mc_samples, &root.split(0))) {
            Ok(report) => drift_pass = Some(report.pass),
            Err(e) => failures.push(Failure::new("drift_pass", e)),
        }
        let kernel = FtKernel::new(args.n, base.clone())?;
        let reference = stationary_mean_sample(base, args.tv_replicas, &root.split(1));
        match empirical_tv_curve(&kernel, args.m0, &args.tv_checkpoints, args.tv_replicas, &reference, args.tv_bins, &root.split(2)) {
            Ok(curve) => tv_curve = curve.into_iter().map(|p| TvRow { m: p.m, tv: p.tv }).collect(),
            Err(e) => failures.push(Failure::new("tv_curve", e)),
        }
    }
    let epsilon_bound = match args.k_deriv {
        Some(kd) => match epsilon_lower_bound(args.n, args.a, kd, lambda, abs_moment, args.n0) {
            Ok(v) => Some(v),
            Err(e) => {
                failures.push(Failure::new("epsilon_bound", e));
                None
            }
        },
        None => None,
    };
    let report = DiagnoseReport {
        radius,
        drift_pass,
        epsilon_bound,
        tv_curve,
    };
    let text = ctx.out.json("diagnose.json", &report)?;
    print!("{text}");
    Ok(failures)
}

fn read_observations(path: &std::path::Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        match field.parse::<f64>() {
            Ok(x) if x.is_finite() => data.push(x),
            // a header row is tolerated
            Err(_) if data.is_empty() && i == 0 => {}
            _ => bail!("{}:{}: `{field}` is not a finite number", path.display(), i + 1),
        }
    }
    Ok(data)
}

pub fn newton(args: &NewtonArgs, ctx: &mut Context) -> Result<Vec<Failure>> {
    let data = read_observations(&args.data)?;
    let kernel = spec::kernel(&args.kernel)?;
    let (lo, hi, points) = match &args.grid {
        Some(g) => spec::grid(g, mvchain::newton::DEFAULT_GRID_POINTS)?,
        None => {
            if data.is_empty() {
                usage!("no observations and no --grid");
            }
            let pad = 3.0 * kernel.spread();
            let lo = data.iter().copied().fold(f64::INFINITY, f64::min) - pad;
            let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad;
            (lo, hi, mvchain::newton::DEFAULT_GRID_POINTS)
        }
    };
    let schedule = match args.schedule.split_once(':') {
        None if args.schedule == "one-over-i" => WeightSchedule::OneOverI,
        Some(("custom", ws)) => {
            let ws: Vec<f64> = ws
                .split(',')
                .map(|w| w.trim().parse::<f64>().with_context(|| format!("weight `{w}`")))
                .collect::<Result<_>>()?;
            if ws.len() < data.len() {
                usage!("custom schedule has {} weights for {} observations", ws.len(), data.len());
            }
            WeightSchedule::custom(ws)?
        }
        _ => usage!("unknown schedule `{}`", args.schedule),
    };
    let prior = NewtonState::uniform(lo, hi, points)?.with_schedule(schedule);
    let fit = match &args.predictive_grid {
        Some(g) => {
            let (xl, xh, xp) = spec::grid(g, 401)?;
            let xs = linspace(xl, xh, xp)?;
            let (fit, trace) = newton_run_recording(&data, &*kernel, prior, &xs)?;
            let rows = trace.iter().enumerate().flat_map(|(i, f)| {
                let xs = &xs;
                f.iter().zip(xs).map(move |(f, x)| format!("{},{},{}", i + 1, num(*x), num(*f)))
            });
            ctx.out.csv("predictive.csv", "i,x,f", rows)?;
            fit
        }
        None => newton_run(&data, &*kernel, prior)?,
    };
    let rows = fit.grid().iter().zip(fit.values()).map(|(t, q)| format!("{},{}", num(*t), num(*q)));
    ctx.out.csv("newton.csv", "theta,q", rows)?;
    Ok(Vec::new())
}

#[derive(Serialize)]
struct BurnInReport<'a> {
    references: &'a [Reference],
    burn_in: &'a [BurnInRow],
}

fn burn_in_csv(rows: &[BurnInRow]) -> Vec<String> {
    rows.iter()
        .map(|b| {
            format!(
                "{},{},{},{},{},{}",
                label(b.a),
                b.n,
                label(b.start),
                b.per_replica.len(),
                b.unsettled,
                opt(b.mean)
            )
        })
        .collect()
}

const BURN_IN_HEADER: &str = "a,n,start,replicas,unsettled,mean_burn_in";

pub fn example1(args: &Example1Args, ctx: &mut Context) -> Result<Vec<Failure>> {
    let seed = ctx.require_seed("example1")?;
    let cfg = Example1Config {
        a: args.a.clone(),
        n: args.n.clone(),
        m_max: args.m_max,
        replicas: args.replicas.max(1),
        reference_steps: args.reference_steps,
    };
    let out = experiments::example1(&cfg, seed)?;
    for t in &out.trajectories {
        ctx.out.csv(&format!("example1_a{}_n{}.csv", label(t.a), t.n), "m,value", scalar_rows(&t.values))?;
    }
    ctx.out.csv("burn_in.csv", BURN_IN_HEADER, burn_in_csv(&out.burn_in))?;
    ctx.out.json(
        "example1.json",
        &BurnInReport {
            references: &out.references,
            burn_in: &out.burn_in,
        },
    )?;
    let a = cfg.a.first().copied().unwrap_or(10.0);
    let timing = experiments::timing(a, &args.timing_n, args.timing_iterations, 10, seed)?;
    for e in &timing.entries {
        eprintln!("timing: n = {:>4}, {} iterations: {:.6} s", e.n, e.iterations, e.seconds);
    }
    if ctx.timing {
        ctx.out.json("timing.json", &timing)?;
    }
    Ok(Vec::new())
}

#[derive(Serialize)]
struct EstimateJson {
    value: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct Example2Report<'a> {
    reference: &'a Reference,
    stationary_mean: EstimateJson,
    burn_in: &'a [BurnInRow],
    ks: &'a [KsRow],
}

pub fn example2(args: &Example2Args, ctx: &mut Context) -> Result<Vec<Failure>> {
    let seed = ctx.require_seed("example2")?;
    let cfg = Example2Config {
        a: args.a,
        n: args.n.clone(),
        starts: args.starts.clone(),
        m_max: args.m_max,
        replicas: args.replicas.max(2),
        reference_steps: args.reference_steps,
    };
    let out = experiments::example2(&cfg, seed)?;
    for t in &out.trajectories {
        ctx.out.csv(&format!("example2_n{}_start{}.csv", t.n, label(t.start)), "m,value", scalar_rows(&t.values))?;
    }
    ctx.out.csv("burn_in.csv", BURN_IN_HEADER, burn_in_csv(&out.burn_in))?;
    ctx.out.json(
        "example2.json",
        &Example2Report {
            reference: &out.reference,
            stationary_mean: EstimateJson {
                value: out.stationary_mean.value,
                std_error: out.stationary_mean.std_error,
            },
            burn_in: &out.burn_in,
            ks: &out.ks,
        },
    )?;
    Ok(Vec::new())
}

#[derive(Serialize)]
struct SnapshotSummary {
    a: f64,
    n: usize,
    draw: usize,
    m: usize,
    integral: f64,
    l1_to_mean_density: f64,
}

#[derive(Serialize)]
struct Example3Report {
    snapshots: Vec<SnapshotSummary>,
}

pub fn example3(args: &Example3Args, ctx: &mut Context) -> Result<Vec<Failure>> {
    let seed = ctx.require_seed("example3")?;
    let cfg = Example3Config {
        a: args.a.clone(),
        n: args.n.clone(),
        snapshots: args.snapshots.clone(),
        draws: args.draws.max(1),
        grid: spec::grid(&args.grid, 801)?,
    };
    let out = experiments::example3(&cfg, seed)?;
    let mut summary = Vec::with_capacity(out.snapshots.len());
    for s in &out.snapshots {
        let name = format!("example3_a{}_n{}_d{}_m{}.csv", label(s.a), s.n, s.draw, s.m);
        let rows = out.grid.iter().zip(&s.values).map(|(x, f)| format!("{},{}", num(*x), num(*f)));
        ctx.out.csv(&name, "x,f", rows)?;
        summary.push(SnapshotSummary {
            a: s.a,
            n: s.n,
            draw: s.draw,
            m: s.m,
            integral: s.integral,
            l1_to_mean_density: s.l1_to_mean_density,
        });
    }
    ctx.out.json("example3.json", &Example3Report { snapshots: summary })?;
    Ok(Vec::new())
}
