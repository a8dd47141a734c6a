//! Recursive chain constructions.
//!
//! * `Q_n = W_n δ_{Z_n} + (1 − W_n) Q_{n−1}` with `W_n ~ Beta(1, n − 1)`,
//!   driven by an exchangeable sequence `Z_1, Z_2, …`.
//! * The block chain `P_m = θ_m Σ_i q_{m,i} δ_{Y_{m,i}} + (1 − θ_m) P_{m−1}`
//!   with `θ_m ~ Beta(n, a)`, `q_m ~ Dirichlet(1, …, 1)` and `Y_m` a fresh
//!   Pólya block of size `n`. For `n = 1` this is the classical
//!   Feigin–Tweedie chain.
//! * Its scalar images: the mean chain `M_m = θ_m T_m + (1 − θ_m) M_{m−1}`
//!   with `T_m = Σ q_{m,i} Y_{m,i}`, the functional chain `G_m` (same
//!   recursion with `g(Y)`), and kernel-mixture densities on a grid.
//!
//! Every step can be fed a pre-drawn [`Innovation`], so coupled runs share
//! randomness exactly.

use rand::Rng;

use crate::error::{param, Error, Result};
use crate::kernel::{trapezoid, Kernel};
use crate::measure::{fill_dirichlet_uniform, BaseMeasure, BetaSampler, WeightedDiscreteMeasure};
use crate::polya::{fill_polya_block, PolyaUrn};
use crate::scalar::Real;
use crate::stats::Summary;

pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-15;

/// State of the `Q_n` recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct QnState<T> {
    step: usize,
    measure: Option<WeightedDiscreteMeasure<T>>,
}

impl<T: Real> Default for QnState<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> QnState<T> {
    pub fn new() -> Self {
        Self { step: 0, measure: None }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// `None` before the first step.
    pub fn measure(&self) -> Option<&WeightedDiscreteMeasure<T>> {
        self.measure.as_ref()
    }

    /// `Q_n ← W_n δ_z + (1 − W_n) Q_{n−1}`.
    pub fn advance<R: Rng + ?Sized>(&mut self, z: T, rng: &mut R) -> Result<()> {
        if !z.is_finite() {
            return Err(Error::Evaluation {
                at: self.step as f64 + 1.0,
                value: z.as_f64(),
            });
        }
        self.step += 1;
        match self.measure.as_mut() {
            None => self.measure = Some(WeightedDiscreteMeasure::point_mass(z)),
            Some(mu) => {
                let w = BetaSampler::new(T::one(), T::from_usize_lossy(self.step - 1))?.sample(rng);
                mu.mix_point(z, w);
            }
        }
        Ok(())
    }
}

/// One step of the `Q_n` recursion.
pub fn qn_step<T: Real, R: Rng + ?Sized>(mut state: QnState<T>, z: T, rng: &mut R) -> Result<QnState<T>> {
    state.advance(z, rng)?;
    Ok(state)
}

/// Where the `Z_i` come from.
#[derive(Clone, Debug)]
pub enum ExchangeableSource<T> {
    /// A Pólya sequence with parameter measure `α`.
    Polya(BaseMeasure<T>),
    /// i.i.d. draws from the normalized base.
    Iid(BaseMeasure<T>),
}

/// `Q_n` after `n` steps fed by `source`. For each step the `Z` draw comes
/// before the `W` draw.
pub fn qn_run<T: Real, R: Rng + ?Sized>(n: usize, source: &ExchangeableSource<T>, rng: &mut R) -> Result<QnState<T>> {
    if n == 0 {
        return param("qn_run needs n >= 1");
    }
    let mut state = QnState::new();
    match source {
        ExchangeableSource::Polya(base) => {
            let mut urn = PolyaUrn::new(base);
            for _ in 0..n {
                let z = urn.next(rng);
                state.advance(z, rng)?;
            }
        }
        ExchangeableSource::Iid(base) => {
            for _ in 0..n {
                let z = base.sample(rng);
                state.advance(z, rng)?;
            }
        }
    }
    Ok(state)
}

/// Law of one step of the block chain: block size `n` and parameter
/// measure `α`.
#[derive(Clone, Debug)]
pub struct FtKernel<T: Real> {
    n: usize,
    base: BaseMeasure<T>,
    theta: BetaSampler<T>,
    prune_threshold: T,
}

impl<T: Real> FtKernel<T> {
    pub fn new(n: usize, base: BaseMeasure<T>) -> Result<Self> {
        if n == 0 {
            return param("block size n must be at least 1");
        }
        let theta = BetaSampler::new(T::from_usize_lossy(n), base.total_mass())?;
        Ok(Self {
            n,
            base,
            theta,
            prune_threshold: T::lit(DEFAULT_PRUNE_THRESHOLD),
        })
    }

    /// Atoms lighter than `threshold` are dropped after each measure step.
    pub fn with_prune_threshold(mut self, threshold: T) -> Result<Self> {
        if !(threshold >= T::zero()) || threshold >= T::one() {
            return param("prune threshold must lie in [0, 1)");
        }
        self.prune_threshold = threshold;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> &BaseMeasure<T> {
        &self.base
    }

    pub fn prune_threshold(&self) -> T {
        self.prune_threshold
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Innovation<T> {
        let mut out = Innovation::empty();
        out.draw_into(self, rng);
        out
    }
}

/// The randomness of one block-chain step: `(θ, q, Y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Innovation<T> {
    pub theta: T,
    pub weights: Vec<T>,
    pub atoms: Vec<T>,
}

impl<T: Real> Innovation<T> {
    fn empty() -> Self {
        Self {
            theta: T::zero(),
            weights: Vec::new(),
            atoms: Vec::new(),
        }
    }

    /// Builds an innovation from given parts; `weights` must be a simplex
    /// vector and `theta ∈ [0, 1]`.
    pub fn new(theta: T, weights: Vec<T>, atoms: Vec<T>) -> Result<Self> {
        if !(theta >= T::zero() && theta <= T::one()) {
            return param(format!("theta must lie in [0, 1], got {theta}"));
        }
        WeightedDiscreteMeasure::new(atoms.clone(), weights.clone())?;
        Ok(Self { theta, weights, atoms })
    }

    /// Redraws in place in the order θ, q, Y. For `n = 1` the weight draw
    /// consumes nothing, so the stream is θ then one base draw.
    pub fn draw_into<R: Rng + ?Sized>(&mut self, kernel: &FtKernel<T>, rng: &mut R) {
        self.theta = kernel.theta.sample(rng);
        self.weights.resize(kernel.n, T::zero());
        fill_dirichlet_uniform(&mut self.weights, rng);
        fill_polya_block(&kernel.base, kernel.n, &mut self.atoms, rng);
    }

    /// `T = Σ q_i Y_i`.
    pub fn mean(&self) -> T {
        let mut acc = T::zero();
        for (&q, &y) in self.weights.iter().zip(&self.atoms) {
            acc += q * y;
        }
        acc
    }

    /// `Σ q_i g(Y_i)`.
    pub fn functional(&self, g: impl Fn(T) -> T) -> Result<T> {
        let mut acc = T::zero();
        for (&q, &y) in self.weights.iter().zip(&self.atoms) {
            let v = g(y);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    at: y.as_f64(),
                    value: v.as_f64(),
                });
            }
            acc += q * v;
        }
        Ok(acc)
    }
}

/// State of the measure-valued block chain.
///
/// `P_m = residual · P_0 + Σ_j w_j δ_{x_j}` with the innovation atoms kept
/// unnormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct FtChainState<T> {
    n: usize,
    m: usize,
    residual: T,
    p0: WeightedDiscreteMeasure<T>,
    atoms: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> FtChainState<T> {
    pub fn new(n: usize, p0: WeightedDiscreteMeasure<T>) -> Self {
        Self {
            n,
            m: 0,
            residual: T::one(),
            p0,
            atoms: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Mass still carried by `P_0`.
    pub fn residual_weight(&self) -> T {
        self.residual
    }

    pub fn p0(&self) -> &WeightedDiscreteMeasure<T> {
        &self.p0
    }

    pub fn innovation_atoms(&self) -> &[T] {
        &self.atoms
    }

    pub fn innovation_weights(&self) -> &[T] {
        &self.weights
    }

    pub fn innovation_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Mixes in a pre-drawn innovation, then prunes atoms below `threshold`
    /// and renormalizes.
    pub fn apply(&mut self, innov: &Innovation<T>, threshold: T) {
        let keep = T::one() - innov.theta;
        self.residual *= keep;
        for w in self.weights.iter_mut() {
            *w *= keep;
        }
        for (&q, &y) in innov.weights.iter().zip(&innov.atoms) {
            self.weights.push(innov.theta * q);
            self.atoms.push(y);
        }
        self.m += 1;
        if self.weights.iter().any(|&w| w < threshold) {
            let mut kept = 0;
            for i in 0..self.weights.len() {
                if self.weights[i] >= threshold {
                    self.weights[kept] = self.weights[i];
                    self.atoms[kept] = self.atoms[i];
                    kept += 1;
                }
            }
            self.weights.truncate(kept);
            self.atoms.truncate(kept);
            let total = self.residual + self.innovation_weight();
            self.residual /= total;
            for w in self.weights.iter_mut() {
                *w /= total;
            }
        }
    }

    /// `P_m` as a single weighted measure.
    pub fn measure(&self) -> WeightedDiscreteMeasure<T> {
        let mut atoms = Vec::with_capacity(self.p0.len() + self.atoms.len());
        let mut weights = Vec::with_capacity(atoms.capacity());
        for (x, w) in self.p0.iter() {
            atoms.push(x);
            weights.push(w * self.residual);
        }
        atoms.extend_from_slice(&self.atoms);
        weights.extend_from_slice(&self.weights);
        WeightedDiscreteMeasure::from_unnormalized(atoms, weights).expect("chain weights stay on the simplex")
    }
}

/// One block-chain step.
pub fn ft_step<T: Real, R: Rng + ?Sized>(mut state: FtChainState<T>, kernel: &FtKernel<T>, rng: &mut R) -> FtChainState<T> {
    let innov = kernel.draw(rng);
    state.apply(&innov, kernel.prune_threshold);
    state
}

/// A scalar functional chain `M_m` or `G_m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarChainState<T> {
    pub n: usize,
    pub m: usize,
    pub value: T,
}

impl<T: Real> ScalarChainState<T> {
    pub fn new(n: usize, value: T) -> Self {
        Self { n, m: 0, value }
    }

    #[inline]
    fn mix(&mut self, theta: T, target: T) {
        self.value = theta * target + (T::one() - theta) * self.value;
        self.m += 1;
    }

    /// `M ← θ T + (1 − θ) M`.
    pub fn apply(&mut self, innov: &Innovation<T>) {
        self.mix(innov.theta, innov.mean());
    }

    /// `G ← θ Σ q_i g(Y_i) + (1 − θ) G`.
    pub fn apply_functional(&mut self, innov: &Innovation<T>, g: impl Fn(T) -> T) -> Result<()> {
        let t = innov.functional(g)?;
        self.mix(innov.theta, t);
        Ok(())
    }
}

pub fn mean_chain_step<T: Real, R: Rng + ?Sized>(mut state: ScalarChainState<T>, kernel: &FtKernel<T>, rng: &mut R) -> ScalarChainState<T> {
    state.apply(&kernel.draw(rng));
    state
}

pub fn functional_chain_step<T: Real, R: Rng + ?Sized>(
    mut state: ScalarChainState<T>,
    kernel: &FtKernel<T>,
    g: impl Fn(T) -> T,
    rng: &mut R,
) -> Result<ScalarChainState<T>> {
    state.apply_functional(&kernel.draw(rng), g)?;
    Ok(state)
}

/// `M_0, M_1, …, M_steps`.
pub fn mean_trajectory<T: Real, R: Rng + ?Sized>(kernel: &FtKernel<T>, m0: T, steps: usize, rng: &mut R) -> Vec<T> {
    let mut state = ScalarChainState::new(kernel.n, m0);
    let mut innov = Innovation::empty();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(m0);
    for _ in 0..steps {
        innov.draw_into(kernel, rng);
        state.apply(&innov);
        out.push(state.value);
    }
    out
}

/// `G_0, G_1, …, G_steps`.
pub fn functional_trajectory<T: Real, R: Rng + ?Sized>(
    kernel: &FtKernel<T>,
    g: impl Fn(T) -> T,
    g0: T,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    let mut state = ScalarChainState::new(kernel.n, g0);
    let mut innov = Innovation::empty();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(g0);
    for _ in 0..steps {
        innov.draw_into(kernel, rng);
        state.apply_functional(&innov, &g)?;
        out.push(state.value);
    }
    Ok(out)
}

/// Mass missing from a density grid beyond which a warning is raised.
pub const GRID_DEFICIT_WARNING: f64 = 0.05;

/// A mixture density `f_m(x) = ∫ k(x, ϑ) P_m(dϑ)` tabulated on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGridState<T> {
    grid: Vec<T>,
    values: Vec<T>,
    step: usize,
    warned: bool,
}

impl<T: Real> DensityGridState<T> {
    pub fn new(grid: Vec<T>, f0: impl Fn(T) -> T) -> Result<Self> {
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return param("density grid must be strictly increasing with at least two points");
        }
        let values: Vec<T> = grid.iter().map(|&x| f0(x)).collect();
        if values.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return param("initial density must be finite and nonnegative on the grid");
        }
        Ok(Self {
            grid,
            values,
            step: 0,
            warned: false,
        })
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn integral(&self) -> T {
        trapezoid(&self.grid, &self.values)
    }

    /// `1 − ∫ f_m` over the grid.
    pub fn mass_deficit(&self) -> T {
        T::one() - self.integral()
    }

    fn check_deficit(&mut self) {
        let deficit = self.mass_deficit();
        if !self.warned && deficit > T::lit(GRID_DEFICIT_WARNING) {
            self.warned = true;
            log::warn!(
                "density grid [{}, {}] misses {deficit} of the mass at step {}; widen it",
                self.grid[0],
                self.grid[self.grid.len() - 1],
                self.step
            );
        }
    }

    /// Block-chain step: `f ← θ Σ q_i k(·, Y_i) + (1 − θ) f`.
    pub fn apply<K: Kernel<T> + ?Sized>(&mut self, kernel: &K, innov: &Innovation<T>) {
        let keep = T::one() - innov.theta;
        for (v, &x) in self.values.iter_mut().zip(&self.grid) {
            let mut mix = T::zero();
            for (&q, &y) in innov.weights.iter().zip(&innov.atoms) {
                mix += q * kernel.density(x, y);
            }
            *v = innov.theta * mix + keep * *v;
        }
        self.step += 1;
        self.check_deficit();
    }

    /// Exchangeable step `f ← W k(·, ϑ) + (1 − W) f` with
    /// `W ~ Beta(1, step − 1)`.
    pub fn step_exchangeable<K: Kernel<T> + ?Sized, R: Rng + ?Sized>(
        &mut self,
        kernel: &K,
        theta_draw: T,
        rng: &mut R,
    ) -> Result<()> {
        if !theta_draw.is_finite() {
            return Err(Error::Evaluation {
                at: self.step as f64 + 1.0,
                value: theta_draw.as_f64(),
            });
        }
        self.step += 1;
        let w = BetaSampler::new(T::one(), T::from_usize_lossy(self.step - 1))?.sample(rng);
        for (v, &x) in self.values.iter_mut().zip(&self.grid) {
            *v = w * kernel.density(x, theta_draw) + (T::one() - w) * *v;
        }
        self.check_deficit();
        Ok(())
    }
}

/// One exchangeable density step.
pub fn density_chain_step<T: Real, K: Kernel<T> + ?Sized, R: Rng + ?Sized>(
    mut state: DensityGridState<T>,
    kernel: &K,
    theta_draw: T,
    rng: &mut R,
) -> Result<DensityGridState<T>> {
    state.step_exchangeable(kernel, theta_draw, rng)?;
    Ok(state)
}

/// Runs the block-chain density recursion for `steps` steps, returning the
/// states at the requested snapshot steps (in increasing order).
pub fn density_trajectory<T: Real, K: Kernel<T> + ?Sized, R: Rng + ?Sized>(
    chain: &FtKernel<T>,
    kernel: &K,
    mut state: DensityGridState<T>,
    snapshots: &[usize],
    rng: &mut R,
) -> Vec<DensityGridState<T>> {
    let last = snapshots.iter().copied().max().unwrap_or(0);
    let mut innov = Innovation::empty();
    let mut out = Vec::with_capacity(snapshots.len());
    for m in 0..=last {
        if m > 0 {
            innov.draw_into(chain, rng);
            state.apply(kernel, &innov);
        }
        if snapshots.contains(&m) {
            out.push(state.clone());
        }
    }
    out
}

/// Rule for reading a burn-in time off a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BurnInRule {
    /// Half-width of the band, in stationary standard deviations.
    pub band: f64,
    /// Consecutive steps that must stay inside the band.
    pub window: usize,
}

impl Default for BurnInRule {
    fn default() -> Self {
        Self { band: 2.0, window: 50 }
    }
}

/// Mean and sd from the final third of a long reference run.
pub fn stationary_summary(reference: &[f64]) -> Summary {
    Summary::of(&reference[reference.len() * 2 / 3..])
}

/// First `m` such that `x_m, …, x_{m+window−1}` all lie within
/// `band · sd` of `mean`.
pub fn burn_in(trajectory: &[f64], mean: f64, sd: f64, rule: BurnInRule) -> Option<usize> {
    let half = rule.band * sd;
    let mut run = 0;
    for (i, &x) in trajectory.iter().enumerate() {
        if (x - mean).abs() <= half {
            run += 1;
            if run == rule.window {
                return Some(i + 1 - rule.window);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Every `every`-th state from `start` on.
pub fn thin<T: Copy>(trajectory: &[T], start: usize, every: usize) -> Vec<T> {
    trajectory.iter().skip(start).step_by(every.max(1)).copied().collect()
}

/// One draw of `∫ g dP` for `P ~ DP(α)` by stick-breaking, truncated once
/// the unallocated stick falls below `tol`.
pub fn dp_functional_sample<T: Real, R: Rng + ?Sized>(
    base: &BaseMeasure<T>,
    g: impl Fn(T) -> T,
    tol: T,
    rng: &mut R,
) -> T {
    let stick = BetaSampler::new(T::one(), base.total_mass()).expect("positive mass");
    let mut remaining = T::one();
    let mut acc = T::zero();
    while remaining > tol {
        let v = stick.sample(rng);
        acc += remaining * v * g(base.sample(rng));
        remaining *= T::one() - v;
    }
    // leftover stick goes to one more base draw
    acc + remaining * g(base.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{linspace, FlatKernel, GaussianKernel};
    use crate::rng::StreamRng;
    use proptest::prelude::*;
    use rand::Rng;

    fn unit_base(a: f64) -> BaseMeasure<f64> {
        BaseMeasure::uniform(0.0, 1.0, a).unwrap()
    }

    #[test]
    fn qn_first_step_is_point_mass() {
        let mut rng = StreamRng::new(1);
        let s = qn_step(QnState::new(), 2.5, &mut rng).unwrap();
        let mu = s.measure().unwrap();
        assert_eq!(mu.atoms(), &[2.5]);
        assert_eq!(mu.weights(), &[1.0]);
        assert!(qn_step(s, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn qn_weights_sum_to_one() {
        let mut rng = StreamRng::new(2);
        let source = ExchangeableSource::Iid(unit_base(1.0));
        for n in [1, 2, 10, 500] {
            let s = qn_run(n, &source, &mut rng).unwrap();
            assert_eq!(s.step(), n);
            assert_eq!(s.measure().unwrap().len(), n);
            assert!((s.measure().unwrap().total_weight() - 1.0).abs() < 1e-12);
        }
        assert!(qn_run(0, &source, &mut rng).is_err());
    }

    #[test]
    fn qn_weights_are_symmetric_dirichlet() {
        let rng = StreamRng::new(3);
        let source = ExchangeableSource::Iid(unit_base(1.0));
        let reps = 100_000;
        let sums = crate::rng::par_replicas(&rng, 100, |_, r| {
            let mut acc = [0.0; 4];
            for _ in 0..reps / 100 {
                let s = qn_run(4, &source, r).unwrap();
                for (a, w) in acc.iter_mut().zip(s.measure().unwrap().weights()) {
                    *a += w;
                }
            }
            acc
        });
        for i in 0..4 {
            let mean = sums.iter().map(|s| s[i]).sum::<f64>() / reps as f64;
            assert!((mean - 0.25).abs() < 0.003, "coordinate {i}: {mean}");
        }
    }

    #[test]
    fn qn_polya_mean_is_base_mean() {
        let rng = StreamRng::new(4);
        let source = ExchangeableSource::Polya(unit_base(2.0));
        let reps = 100_000;
        let total: f64 = crate::rng::par_replicas(&rng, 100, |_, r| {
            (0..reps / 100)
                .map(|_| qn_run(7, &source, r).unwrap().measure().unwrap().mean())
                .sum::<f64>()
        })
        .iter()
        .sum();
        assert!((total / reps as f64 - 0.5).abs() < 0.003);
    }

    #[test]
    fn n_one_gives_single_atom() {
        let mut rng = StreamRng::new(5);
        let s = qn_run(1, &ExchangeableSource::Polya(unit_base(1.0)), &mut rng).unwrap();
        assert_eq!(s.measure().unwrap().len(), 1);
    }

    #[test]
    fn ft_step_from_point_mass() {
        let mut rng = StreamRng::new(6);
        let kernel = FtKernel::new(2, unit_base(1.0)).unwrap();
        let s = ft_step(FtChainState::new(2, WeightedDiscreteMeasure::point_mass(0.0)), &kernel, &mut rng);
        let mu = s.measure();
        assert_eq!(mu.len(), 3);
        assert!((mu.total_weight() - 1.0).abs() < 1e-12);
        assert_eq!(s.m(), 1);
    }

    #[test]
    fn residual_weight_mean() {
        // E[1 - θ] = a/(n+a) = 1/2, independently at each step
        let rng = StreamRng::new(7);
        let kernel = FtKernel::new(1, unit_base(1.0)).unwrap();
        let reps = 200_000;
        let vals: Vec<f64> = crate::rng::par_replicas(&rng, reps, |_, r| {
            let mut s = FtChainState::new(1, WeightedDiscreteMeasure::point_mass(0.0));
            for _ in 0..3 {
                s = ft_step(s, &kernel, r);
            }
            s.residual_weight()
        });
        let sum = Summary::of(&vals);
        assert!((sum.mean - 0.125).abs() < 3.0 * sum.std_error(), "{sum:?}");
    }

    #[test]
    fn residual_tracks_product_of_keeps() {
        let mut rng = StreamRng::new(8);
        let kernel = FtKernel::new(5, unit_base(3.0)).unwrap();
        let mut s = FtChainState::new(5, WeightedDiscreteMeasure::point_mass(0.5));
        let mut prod = 1.0;
        for _ in 0..400 {
            let innov = kernel.draw(&mut rng);
            prod *= 1.0 - innov.theta;
            s.apply(&innov, kernel.prune_threshold());
            assert!((s.residual_weight() - prod).abs() < 1e-10);
            assert!((s.residual_weight() + s.innovation_weight() - 1.0).abs() < 1e-10);
            assert!((s.measure().total_weight() - 1.0).abs() < 1e-12);
        }
        // geometric decay means pruning keeps the atom list bounded
        assert!(s.innovation_atoms().len() < 5 * 400);
    }

    /// Direct Feigin–Tweedie update kept as a fixture: θ ~ Beta(1, a) then
    /// `P ← θ δ_Y + (1 − θ) P` with `Y ~ α₀`.
    fn feigin_tweedie_fixture(base: &BaseMeasure<f64>, steps: usize, rng: &mut StreamRng) -> Vec<(f64, f64)> {
        let mut atoms: Vec<(f64, f64)> = vec![(0.0, 1.0)];
        for _ in 0..steps {
            let theta = crate::measure::beta_sample(1.0, base.total_mass(), rng).unwrap();
            let y = base.sample(rng);
            for a in atoms.iter_mut() {
                a.1 *= 1.0 - theta;
            }
            atoms.push((y, theta));
        }
        atoms
    }

    #[test]
    fn n_one_reduces_to_feigin_tweedie() {
        let base = BaseMeasure::gaussian(0.0, 1.0, 2.0).unwrap();
        let kernel = FtKernel::new(1, base.clone()).unwrap().with_prune_threshold(0.0).unwrap();
        let mut r1 = StreamRng::new(9);
        let mut r2 = StreamRng::new(9);
        let mut s = FtChainState::new(1, WeightedDiscreteMeasure::point_mass(0.0));
        for _ in 0..50 {
            s = ft_step(s, &kernel, &mut r1);
        }
        let fixture = feigin_tweedie_fixture(&base, 50, &mut r2);
        let mu = s.measure();
        assert_eq!(mu.len(), fixture.len());
        for ((x, w), (fx, fw)) in mu.iter().zip(&fixture) {
            assert_eq!(x, *fx);
            assert!((w - fw).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_chain_fixed_point() {
        let base = BaseMeasure::<f64>::discrete(vec![1.5], vec![1.0], 3.0).unwrap();
        let kernel = FtKernel::new(4, base).unwrap();
        let mut rng = StreamRng::new(10);
        let traj = mean_trajectory(&kernel, 1.5, 200, &mut rng);
        assert!(traj.iter().all(|&v| (v - 1.5).abs() < 1e-14));
    }

    #[test]
    fn mean_chain_long_run_average() {
        let kernel = FtKernel::new(1, unit_base(1.0)).unwrap();
        let rng = StreamRng::new(11);
        let means = crate::rng::par_replicas(&rng, 8, |_, r| {
            let traj = mean_trajectory(&kernel, 0.5, 100_000, r);
            traj[1000..].iter().sum::<f64>() / (traj.len() - 1000) as f64
        });
        let avg = means.iter().sum::<f64>() / means.len() as f64;
        assert!((avg - 0.5).abs() < 0.01, "{avg}");
    }

    #[test]
    fn identity_functional_is_bitwise_mean_chain() {
        let kernel = FtKernel::new(3, BaseMeasure::cauchy(0.0, 1.0, 2.0).unwrap()).unwrap();
        let a = mean_trajectory(&kernel, 0.0, 500, &mut StreamRng::new(12));
        let b = functional_trajectory(&kernel, |x| x, 0.0, 500, &mut StreamRng::new(12)).unwrap();
        assert_eq!(a, b);
        let mut s = ScalarChainState::new(3, 0.0);
        let mut t = s;
        let mut r1 = StreamRng::new(13);
        let mut r2 = StreamRng::new(13);
        for _ in 0..20 {
            s = mean_chain_step(s, &kernel, &mut r1);
            t = functional_chain_step(t, &kernel, |x| x, &mut r2).unwrap();
            assert_eq!(s, t);
        }
    }

    #[test]
    fn constant_functional_is_affine() {
        let kernel = FtKernel::new(2, unit_base(1.5)).unwrap();
        let mut rng = StreamRng::new(14);
        let mut s = ScalarChainState::new(2, 10.0);
        let mut prod = 1.0;
        for _ in 0..30 {
            let innov = kernel.draw(&mut rng);
            prod *= 1.0 - innov.theta;
            s.apply_functional(&innov, |_| 4.0).unwrap();
            assert!((s.value - (4.0 + prod * 6.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn functional_rejects_non_finite_values() {
        let kernel = FtKernel::new(2, unit_base(1.0)).unwrap();
        let mut rng = StreamRng::new(15);
        let out = functional_chain_step(ScalarChainState::new(2, 0.0), &kernel, |_| f64::INFINITY, &mut rng);
        assert!(matches!(out, Err(Error::Evaluation { .. })));
    }

    #[test]
    fn squared_functional_stationary_mean() {
        // E ∫x² dP for P ~ DP(α) is the second moment of α₀: 1/3
        // (the variance identity gives E[(∫x dP)²] = (a m₂ + m₁²)/(a+1) = 7/24)
        let kernel = FtKernel::new(1, unit_base(1.0)).unwrap();
        let rng = StreamRng::new(16);
        let means = crate::rng::par_replicas(&rng, 8, |_, r| {
            let g = functional_trajectory(&kernel, |x| x * x, 1.0 / 3.0, 100_000, r).unwrap();
            let m = mean_trajectory(&kernel, 0.5, 100_000, r);
            let g_avg = g[1000..].iter().sum::<f64>() / (g.len() - 1000) as f64;
            let m2_avg = m[1000..].iter().map(|v| v * v).sum::<f64>() / (m.len() - 1000) as f64;
            (g_avg, m2_avg)
        });
        let g = means.iter().map(|p| p.0).sum::<f64>() / 8.0;
        let m2 = means.iter().map(|p| p.1).sum::<f64>() / 8.0;
        assert!((g - 1.0 / 3.0).abs() < 0.01, "{g}");
        assert!((m2 - 7.0 / 24.0).abs() < 0.01, "{m2}");
    }

    #[test]
    fn flat_kernel_leaves_density_unchanged() {
        let flat = FlatKernel::new(-1.0, 1.0).unwrap();
        let grid = linspace(-2.0, 2.0, 81).unwrap();
        let mut state = DensityGridState::new(grid, |x| flat.density(x, 0.0)).unwrap();
        let f0 = state.values().to_vec();
        let chain = FtKernel::new(3, BaseMeasure::gaussian(0.0, 1.0, 5.0).unwrap()).unwrap();
        let mut rng = StreamRng::new(17);
        for _ in 0..50 {
            state.apply(&flat, &chain.draw(&mut rng));
        }
        for _ in 0..50 {
            let t = rng.random::<f64>();
            state.step_exchangeable(&flat, t, &mut rng).unwrap();
        }
        for (a, b) in state.values().iter().zip(&f0) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn density_chain_keeps_mass_on_wide_grid() {
        let k = GaussianKernel::<f64>::new(1.0).unwrap();
        let grid = linspace(-12.0, 12.0, 961).unwrap();
        let state = DensityGridState::new(grid, |x| k.density(x, -3.0)).unwrap();
        let chain = FtKernel::new(20, BaseMeasure::gaussian(0.0, 1.0, 100.0).unwrap()).unwrap();
        let snaps = density_trajectory(&chain, &k, state, &[0, 1, 10, 100], &mut StreamRng::new(18));
        assert_eq!(snaps.len(), 4);
        for s in &snaps {
            assert!(s.values().iter().all(|&v| v >= 0.0));
            assert!((s.integral() - 1.0).abs() < 0.01);
        }
        assert_eq!(snaps[3].step(), 100);
    }

    #[test]
    fn narrow_grid_reports_deficit() {
        let k = GaussianKernel::new(1.0).unwrap();
        let grid = linspace(-1.0, 1.0, 41).unwrap();
        let mut state = DensityGridState::new(grid, |x| k.density(x, 0.0)).unwrap();
        state.step_exchangeable(&k, 0.0, &mut StreamRng::new(19)).unwrap();
        assert!(state.mass_deficit() > 0.05);
    }

    #[test]
    fn burn_in_rule() {
        let mut traj = vec![10.0; 30];
        traj.extend(vec![0.0; 60]);
        assert_eq!(burn_in(&traj, 0.0, 1.0, BurnInRule::default()), Some(30));
        traj[50] = 5.0;
        assert_eq!(burn_in(&traj, 0.0, 1.0, BurnInRule::default()), None);
        assert_eq!(thin(&[0, 1, 2, 3, 4, 5, 6], 1, 3), vec![1, 4]);
    }

    #[test]
    fn stick_breaking_mean() {
        let base = unit_base(5.0);
        let rng = StreamRng::new(20);
        let vals = crate::rng::par_replicas(&rng, 20_000, |_, r| dp_functional_sample(&base, |x| x, 1e-12, r));
        let s = Summary::of(&vals);
        // Var ∫x dP = Var(α₀)/(a+1) = (1/12)/6
        assert!((s.mean - 0.5).abs() < 3.0 * s.std_error());
        assert!((s.variance - 1.0 / 72.0).abs() < 0.001);
    }

    #[test]
    fn f32_chain_smoke() {
        let base = BaseMeasure::<f32>::uniform(0.0, 1.0, 1.0).unwrap();
        let kernel = FtKernel::new(3, base).unwrap();
        let traj = mean_trajectory(&kernel, 0.0f32, 100, &mut StreamRng::new(21));
        assert!(traj.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn every_step_stays_on_simplex(seed in any::<u64>(), n in 1usize..8, a in 0.1f64..50.0, steps in 1usize..60) {
            let kernel = FtKernel::new(n, BaseMeasure::gaussian(0.0, 1.0, a).unwrap()).unwrap();
            let mut rng = StreamRng::new(seed);
            let mut s = FtChainState::new(n, WeightedDiscreteMeasure::new(vec![-1.0, 1.0], vec![0.3, 0.7]).unwrap());
            let mut q = QnState::new();
            for _ in 0..steps {
                s = ft_step(s, &kernel, &mut rng);
                prop_assert!((s.measure().total_weight() - 1.0).abs() < 1e-12);
                q = qn_step(q, rng.random::<f64>(), &mut rng).unwrap();
                prop_assert!((q.measure().unwrap().total_weight() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn mean_chain_is_monotone_under_shared_randomness(seed in any::<u64>(), n in 1usize..6, z1 in -50.0f64..50.0, gap in 0.0f64..20.0) {
            let kernel = FtKernel::new(n, BaseMeasure::cauchy(0.0, 1.0, 2.0).unwrap()).unwrap();
            let mut rng = StreamRng::new(seed);
            let mut lo = ScalarChainState::new(n, z1);
            let mut hi = ScalarChainState::new(n, z1 + gap);
            for _ in 0..20 {
                let innov = kernel.draw(&mut rng);
                lo.apply(&innov);
                hi.apply(&innov);
                prop_assert!(lo.value <= hi.value);
            }
        }

        #[test]
        fn bounded_base_keeps_mean_in_hull(seed in any::<u64>(), n in 1usize..10, a in 0.1f64..200.0, m0 in 0.0f64..=1.0) {
            let kernel = FtKernel::new(n, unit_base(a)).unwrap();
            let traj = mean_trajectory(&kernel, m0, 200, &mut StreamRng::new(seed));
            prop_assert!(traj.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
