//! The three worked examples and the timing table, computed as plain data.
//!
//! Every random quantity comes from `StreamRng::new(seed).split_path(..)`
//! with a path naming the experiment and the cell, so outputs depend only
//! on the seed and the configuration.

use std::time::Instant;

use anyhow::Result;
use mvchain::chains::{burn_in, density_trajectory, mean_trajectory, stationary_summary, BurnInRule};
use mvchain::kernel::{linspace, GaussianKernel, Kernel};
use mvchain::measure::BaseMeasure;
use mvchain::stats::{ks_two_sample, trapezoid, Estimate, Summary};
use mvchain::{par_replicas, DensityGridState, FtKernel, StreamRng};
use rayon::prelude::*;
use serde::Serialize;

const EXAMPLE1: u64 = 1;
const EXAMPLE2: u64 = 2;
const EXAMPLE3: u64 = 3;
const TIMING: u64 = 4;

// path components under each example
const REFERENCE: u64 = 0;
const CHAINS: u64 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct Reference {
    pub a: f64,
    pub n: usize,
    pub steps: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Stationary mean and sd from the final third of a run of the mean chain.
fn reference(base: &BaseMeasure<f64>, n: usize, steps: usize, rng: &StreamRng) -> Result<Reference> {
    let kernel = FtKernel::new(n, base.clone())?;
    let traj = mean_trajectory(&kernel, 0.0, steps, &mut rng.clone());
    let s = stationary_summary(&traj);
    Ok(Reference {
        a: base.total_mass(),
        n,
        steps,
        mean: s.mean,
        sd: s.sd(),
    })
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub a: f64,
    pub n: usize,
    pub start: f64,
    pub replica: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BurnInRow {
    pub a: f64,
    pub n: usize,
    pub start: f64,
    /// Burn-in of each replica; `None` when the trajectory never settles.
    pub per_replica: Vec<Option<usize>>,
    /// Mean over the replicas that settled.
    pub mean: Option<f64>,
    pub unsettled: usize,
}

impl BurnInRow {
    fn new(a: f64, n: usize, start: f64, per_replica: Vec<Option<usize>>) -> Self {
        let settled: Vec<f64> = per_replica.iter().flatten().map(|&b| b as f64).collect();
        let mean = (!settled.is_empty()).then(|| settled.iter().sum::<f64>() / settled.len() as f64);
        Self {
            a,
            n,
            start,
            unsettled: per_replica.len() - settled.len(),
            per_replica,
            mean,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Example1Config {
    pub a: Vec<f64>,
    pub n: Vec<usize>,
    pub m_max: usize,
    pub replicas: usize,
    pub reference_steps: usize,
}

impl Default for Example1Config {
    fn default() -> Self {
        Self {
            a: vec![10.0, 50.0, 100.0],
            n: vec![1, 2, 10, 20],
            m_max: 500,
            replicas: 1,
            reference_steps: 30_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Example1 {
    pub references: Vec<Reference>,
    /// Replica 0 of every `(a, n)` cell.
    pub trajectories: Vec<Trajectory>,
    pub burn_in: Vec<BurnInRow>,
}

/// Mean chains from `M_0 = 0` under a uniform(0,1) base. The stationary
/// moments of each `a` come from a reference run of the largest block size.
pub fn example1(cfg: &Example1Config, seed: u64) -> Result<Example1> {
    let root = StreamRng::new(seed).split(EXAMPLE1);
    let n_ref = cfg.n.iter().copied().max().unwrap_or(1);
    let mut out = Example1 {
        references: Vec::new(),
        trajectories: Vec::new(),
        burn_in: Vec::new(),
    };
    for (i, &a) in cfg.a.iter().enumerate() {
        let base = BaseMeasure::uniform(0.0, 1.0, a)?;
        let stat = reference(&base, n_ref, cfg.reference_steps, &root.split_path(&[REFERENCE, i as u64]))?;
        for &n in &cfg.n {
            let kernel = FtKernel::new(n, base.clone())?;
            let rng = root.split_path(&[CHAINS, i as u64, n as u64]);
            let trajs = par_replicas(&rng, cfg.replicas, |_, r| mean_trajectory(&kernel, 0.0, cfg.m_max, r));
            let per = trajs.iter().map(|t| burn_in(t, stat.mean, stat.sd, BurnInRule::default())).collect();
            out.burn_in.push(BurnInRow::new(a, n, 0.0, per));
            if let Some(values) = trajs.into_iter().next() {
                out.trajectories.push(Trajectory {
                    a,
                    n,
                    start: 0.0,
                    replica: 0,
                    values,
                });
            }
        }
        out.references.push(stat);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct TimingEntry {
    pub n: usize,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TimingReport {
    pub hardware_note: String,
    pub a: f64,
    pub repeats: usize,
    pub entries: Vec<TimingEntry>,
}

/// Wall-clock time of `iterations` mean-chain steps for each block size,
/// the minimum over `repeats` runs on one thread.
pub fn timing(a: f64, ns: &[usize], iterations: usize, repeats: usize, seed: u64) -> Result<TimingReport> {
    let base = BaseMeasure::uniform(0.0, 1.0, a)?;
    let root = StreamRng::new(seed).split(TIMING);
    let mut entries = Vec::with_capacity(ns.len());
    for &n in ns {
        let kernel = FtKernel::new(n, base.clone())?;
        let mut best = f64::INFINITY;
        for rep in 0..repeats.max(1) {
            let mut rng = root.split_path(&[n as u64, rep as u64]);
            let t0 = Instant::now();
            let traj = mean_trajectory(&kernel, 0.0, iterations, &mut rng);
            let dt = t0.elapsed().as_secs_f64();
            std::hint::black_box(traj);
            best = best.min(dt);
        }
        entries.push(TimingEntry {
            n,
            iterations,
            seconds: best.max(f64::MIN_POSITIVE),
        });
    }
    let cores = std::thread::available_parallelism().map(|c| c.get()).unwrap_or(1);
    Ok(TimingReport {
        hardware_note: format!("{} {}, {cores} hardware threads; single-threaded timing", std::env::consts::ARCH, std::env::consts::OS),
        a,
        repeats: repeats.max(1),
        entries,
    })
}

#[derive(Clone, Debug)]
pub struct Example2Config {
    pub a: f64,
    pub n: Vec<usize>,
    pub starts: Vec<f64>,
    pub m_max: usize,
    pub replicas: usize,
    pub reference_steps: usize,
}

impl Default for Example2Config {
    fn default() -> Self {
        Self {
            a: 10.0,
            n: vec![1, 10, 20],
            starts: vec![-3.0, 0.0, 3.0],
            m_max: 500,
            replicas: 500,
            reference_steps: 30_000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KsRow {
    pub n: usize,
    pub start_a: f64,
    pub start_b: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct Example2 {
    pub reference: Reference,
    pub trajectories: Vec<Trajectory>,
    pub burn_in: Vec<BurnInRow>,
    /// Two-sample KS between the time-`m_max` states of different starts.
    pub ks: Vec<KsRow>,
    /// Mean of all time-`m_max` states.
    pub stationary_mean: Estimate,
}

/// Mean chains under a N(0,1) base from several starting points, with
/// `replicas` independent chains per `(n, start)`.
pub fn example2(cfg: &Example2Config, seed: u64) -> Result<Example2> {
    let root = StreamRng::new(seed).split(EXAMPLE2);
    let base = BaseMeasure::gaussian(0.0, 1.0, cfg.a)?;
    let n_ref = cfg.n.iter().copied().max().unwrap_or(1);
    let stat = reference(&base, n_ref, cfg.reference_steps, &root.split(REFERENCE))?;
    let mut trajectories = Vec::new();
    let mut burn = Vec::new();
    let mut ks = Vec::new();
    let mut pooled = Vec::new();
    for &n in &cfg.n {
        let kernel = FtKernel::new(n, base.clone())?;
        let mut finals: Vec<Vec<f64>> = Vec::with_capacity(cfg.starts.len());
        for (k, &start) in cfg.starts.iter().enumerate() {
            let rng = root.split_path(&[CHAINS, n as u64, k as u64]);
            let trajs = par_replicas(&rng, cfg.replicas, |_, r| mean_trajectory(&kernel, start, cfg.m_max, r));
            let per = trajs.iter().map(|t| burn_in(t, stat.mean, stat.sd, BurnInRule::default())).collect();
            burn.push(BurnInRow::new(cfg.a, n, start, per));
            finals.push(trajs.iter().map(|t| *t.last().expect("nonempty")).collect());
            if let Some(values) = trajs.into_iter().next() {
                trajectories.push(Trajectory {
                    a: cfg.a,
                    n,
                    start,
                    replica: 0,
                    values,
                });
            }
        }
        for i in 0..finals.len() {
            for j in i + 1..finals.len() {
                let out = ks_two_sample(&finals[i], &finals[j])?;
                ks.push(KsRow {
                    n,
                    start_a: cfg.starts[i],
                    start_b: cfg.starts[j],
                    statistic: out.statistic,
                    p_value: out.p_value,
                    pass: out.passes(0.01),
                });
            }
        }
        pooled.extend(finals.into_iter().flatten());
    }
    let s = Summary::of(&pooled);
    Ok(Example2 {
        reference: stat,
        trajectories,
        burn_in: burn,
        ks,
        stationary_mean: Estimate {
            value: s.mean,
            std_error: s.std_error(),
        },
    })
}

#[derive(Clone, Debug)]
pub struct Example3Config {
    pub a: Vec<f64>,
    pub n: Vec<usize>,
    pub snapshots: Vec<usize>,
    pub draws: usize,
    pub grid: (f64, f64, usize),
}

impl Default for Example3Config {
    fn default() -> Self {
        Self {
            a: vec![1.0, 100.0],
            n: vec![1, 2, 10, 20],
            snapshots: vec![1, 100, 1000],
            draws: 1,
            grid: (-10.0, 10.0, 801),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DensitySnapshot {
    pub a: f64,
    pub n: usize,
    pub draw: usize,
    pub m: usize,
    pub values: Vec<f64>,
    pub integral: f64,
    /// L¹ distance to the mean density N(0, 2).
    pub l1_to_mean_density: f64,
}

#[derive(Clone, Debug)]
pub struct Example3 {
    pub grid: Vec<f64>,
    pub snapshots: Vec<DensitySnapshot>,
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-0.5 * (x - mean) * (x - mean) / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Density chains `f_m = ∫ N(·; ϑ, 1) P_m(dϑ)` under a N(0,1) base, from
/// `f_0 = N(·; −3, 1)`.
pub fn example3(cfg: &Example3Config, seed: u64) -> Result<Example3> {
    let root = StreamRng::new(seed).split(EXAMPLE3);
    let (lo, hi, points) = cfg.grid;
    let grid = linspace(lo, hi, points)?;
    let kernel = GaussianKernel::new(1.0)?;
    let target: Vec<f64> = grid.iter().map(|&x| normal_pdf(x, 0.0, 2.0)).collect();
    let mut snaps: Vec<usize> = cfg.snapshots.clone();
    snaps.sort_unstable();
    snaps.dedup();
    let mut jobs = Vec::new();
    for (i, &a) in cfg.a.iter().enumerate() {
        for &n in &cfg.n {
            for d in 0..cfg.draws {
                jobs.push((i, a, n, d));
            }
        }
    }
    let results: Vec<Result<Vec<DensitySnapshot>>> = jobs
        .par_iter()
        .map(|&(i, a, n, d)| {
            let chain = FtKernel::new(n, BaseMeasure::gaussian(0.0, 1.0, a)?)?;
            let f0 = DensityGridState::new(grid.clone(), |x| kernel.density(x, -3.0))?;
            let mut rng = root.split_path(&[CHAINS, i as u64, n as u64, d as u64]);
            let states = density_trajectory(&chain, &kernel, f0, &snaps, &mut rng);
            Ok(states
                .into_iter()
                .map(|s| {
                    let values = s.values().to_vec();
                    let diff: Vec<f64> = values.iter().zip(&target).map(|(f, g)| (f - g).abs()).collect();
                    DensitySnapshot {
                        a,
                        n,
                        draw: d,
                        m: s.step(),
                        integral: s.integral(),
                        l1_to_mean_density: trapezoid(&grid, &diff),
                        values,
                    }
                })
                .collect())
        })
        .collect();
    let mut snapshots = Vec::new();
    for r in results {
        snapshots.extend(r?);
    }
    Ok(Example3 { grid, snapshots })
}
