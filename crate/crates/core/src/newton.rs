//! Newton's recursive estimate of a mixing density on a parameter grid,
//!
//! ```text
//! q_i(ϑ) = (1 − w_i) q_{i−1}(ϑ) + w_i k(x_i, ϑ) q_{i−1}(ϑ) / ∫ k(x_i, ϑ') q_{i−1}(ϑ') dϑ'
//! ```
//!
//! and the expected chain `Q̃_i = w_i δ_{ϑ_i} + (1 − w_i) Q̃_{i−1}`.
//!
//! Integrals over `ϑ` use trapezoid weights on the grid, and each update is
//! renormalized so quadrature drift does not accumulate.

pub use crate::kernel::{FlatKernel, GaussianKernel, Kernel, LaplaceKernel};

use crate::error::{param, Error, Result};
use crate::kernel::{linspace, trapezoid_weights};
use crate::measure::WeightedDiscreteMeasure;
use crate::scalar::Real;

/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 512;

/// Smallest admissible normalizing integral.
pub const MIN_DENOMINATOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub enum WeightSchedule<T> {
    /// `w_i = 1/i`.
    OneOverI,
    /// `w_1, w_2, …` given explicitly.
    Custom(Vec<T>),
}

impl<T: Real> WeightSchedule<T> {
    pub fn custom(weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|w| !(*w > T::zero() && *w <= T::one())) {
            return param("schedule weights must lie in (0, 1]");
        }
        Ok(Self::Custom(weights))
    }

    /// `w_i` for `i ≥ 1`.
    pub fn weight(&self, i: usize) -> Result<T> {
        match self {
            Self::OneOverI => Ok(T::from_usize_lossy(i).recip()),
            Self::Custom(ws) => ws
                .get(i - 1)
                .copied()
                .ok_or_else(|| Error::Parameter(format!("weight schedule has no entry for step {i}"))),
        }
    }
}

/// Grid density `q_i` and its step index.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonState<T> {
    grid: Vec<T>,
    quad: Vec<T>,
    q: Vec<T>,
    step: usize,
    schedule: WeightSchedule<T>,
}

impl<T: Real> NewtonState<T> {
    /// `q_0` proportional to `q0` on `grid`.
    pub fn new(grid: Vec<T>, q0: Vec<T>) -> Result<Self> {
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return param("parameter grid must be strictly increasing with at least two points");
        }
        if q0.len() != grid.len() || q0.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return param("initial estimate must be finite, nonnegative and match the grid");
        }
        let quad = trapezoid_weights(&grid);
        let mut state = Self {
            grid,
            quad,
            q: q0,
            step: 0,
            schedule: WeightSchedule::OneOverI,
        };
        let total = state.integral();
        if !(total > T::zero()) {
            return param("initial estimate integrates to zero");
        }
        state.q.iter_mut().for_each(|v| *v /= total);
        Ok(state)
    }

    /// Uniform `q_0` on `points` equally spaced values in `[lo, hi]`.
    pub fn uniform(lo: T, hi: T, points: usize) -> Result<Self> {
        let grid = linspace(lo, hi, points)?;
        let q0 = vec![T::one(); grid.len()];
        Self::new(grid, q0)
    }

    pub fn with_schedule(mut self, schedule: WeightSchedule<T>) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.q
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn schedule(&self) -> &WeightSchedule<T> {
        &self.schedule
    }

    /// `∫ q` by the trapezoid rule.
    pub fn integral(&self) -> T {
        self.quad.iter().zip(&self.q).map(|(&w, &v)| w * v).sum()
    }

    /// Quadrature mass carried by each grid point.
    pub fn masses(&self) -> Vec<T> {
        self.quad.iter().zip(&self.q).map(|(&w, &v)| w * v).collect()
    }

    /// Mixing CDF at the grid points (cumulative trapezoid).
    pub fn cdf(&self) -> Vec<T> {
        let mut acc = T::zero();
        let mut out = Vec::with_capacity(self.grid.len());
        out.push(acc);
        for j in 1..self.grid.len() {
            acc += T::lit(0.5) * (self.grid[j] - self.grid[j - 1]) * (self.q[j] + self.q[j - 1]);
            out.push(acc);
        }
        out
    }

    /// `∫ |F̂ − F|` against a discrete mixing law, evaluated at interval
    /// midpoints of the grid.
    pub fn cdf_l1_to(&self, truth: &WeightedDiscreteMeasure<T>) -> T {
        let cdf = self.cdf();
        let mut acc = T::zero();
        for j in 1..self.grid.len() {
            let mid = T::lit(0.5) * (self.grid[j] + self.grid[j - 1]);
            let f_hat = T::lit(0.5) * (cdf[j] + cdf[j - 1]);
            let f_true = truth.mass_where(|x| x <= mid);
            acc += (self.grid[j] - self.grid[j - 1]) * (f_hat - f_true).abs();
        }
        acc
    }

    /// One update with observation `x`.
    pub fn update<K: Kernel<T> + ?Sized>(&mut self, x: T, kernel: &K) -> Result<()> {
        if !x.is_finite() {
            return param(format!("observation {x} is not finite"));
        }
        let i = self.step + 1;
        let w = self.schedule.weight(i)?;
        let lik: Vec<T> = self.grid.iter().map(|&th| kernel.density(x, th)).collect();
        let denom: T = self
            .quad
            .iter()
            .zip(&lik)
            .zip(&self.q)
            .map(|((&qw, &l), &v)| qw * l * v)
            .sum();
        if !(denom.as_f64() > MIN_DENOMINATOR) {
            return Err(Error::ObservationIncompatible {
                x: x.as_f64(),
                denominator: denom.as_f64(),
            });
        }
        let keep = T::one() - w;
        for (v, &l) in self.q.iter_mut().zip(&lik) {
            *v = keep * *v + w * l * *v / denom;
        }
        let total = self.integral();
        self.q.iter_mut().for_each(|v| *v /= total);
        self.step = i;
        Ok(())
    }
}

pub fn newton_update<T: Real, K: Kernel<T> + ?Sized>(mut state: NewtonState<T>, x: T, kernel: &K) -> Result<NewtonState<T>> {
    state.update(x, kernel)?;
    Ok(state)
}

/// Folds [`newton_update`] over `data`.
pub fn newton_run<T: Real, K: Kernel<T> + ?Sized>(data: &[T], kernel: &K, prior: NewtonState<T>) -> Result<NewtonState<T>> {
    data.iter().try_fold(prior, |s, &x| newton_update(s, x, kernel))
}

/// Like [`newton_run`], also returning the predictive density on `x_grid`
/// after every step.
pub fn newton_run_recording<T: Real, K: Kernel<T> + ?Sized>(
    data: &[T],
    kernel: &K,
    prior: NewtonState<T>,
    x_grid: &[T],
) -> Result<(NewtonState<T>, Vec<Vec<T>>)> {
    let mut state = prior;
    let mut trace = Vec::with_capacity(data.len());
    for &x in data {
        state.update(x, kernel)?;
        trace.push(predictive_density(&state, kernel, x_grid));
    }
    Ok((state, trace))
}

/// `f(x) = ∫ k(x, ϑ) q(ϑ) dϑ` on `x_grid`.
pub fn predictive_density<T: Real, K: Kernel<T> + ?Sized>(state: &NewtonState<T>, kernel: &K, x_grid: &[T]) -> Vec<T> {
    let masses = state.masses();
    x_grid
        .iter()
        .map(|&x| {
            state
                .grid
                .iter()
                .zip(&masses)
                .map(|(&th, &m)| m * kernel.density(x, th))
                .sum()
        })
        .collect()
}

/// The expected chain `Q̃_i = w_i δ_{ϑ_i} + (1 − w_i) Q̃_{i−1}` with
/// `w_i = 1/i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveUpdate<T> {
    step: usize,
    measure: Option<WeightedDiscreteMeasure<T>>,
}

impl<T: Real> Default for PredictiveUpdate<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> PredictiveUpdate<T> {
    pub fn new() -> Self {
        Self { step: 0, measure: None }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn measure(&self) -> Option<&WeightedDiscreteMeasure<T>> {
        self.measure.as_ref()
    }

    pub fn push(&mut self, theta: T) {
        self.step += 1;
        match self.measure.as_mut() {
            None => self.measure = Some(WeightedDiscreteMeasure::point_mass(theta)),
            Some(mu) => mu.mix_point(theta, T::from_usize_lossy(self.step).recip()),
        }
    }
}

pub fn expected_chain_update<T: Real>(mut state: PredictiveUpdate<T>, theta: T) -> PredictiveUpdate<T> {
    state.push(theta);
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::BaseMeasure;
    use crate::rng::StreamRng;
    use crate::stats::trapezoid;
    use proptest::prelude::*;
    use rand::Rng;

    fn mixture_data(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = StreamRng::new(seed);
        (0..n)
            .map(|_| {
                let c = if rng.random::<f64>() < 0.5 { -2.0 } else { 2.0 };
                c + f64::standard_normal(&mut rng)
            })
            .collect()
    }

    #[test]
    fn flat_kernel_is_a_fixed_point() {
        let flat = FlatKernel::new(-10.0, 10.0).unwrap();
        let grid: Vec<f64> = linspace(-3.0, 3.0, 61).unwrap();
        let q0: Vec<f64> = grid.iter().map(|x: &f64| (-x * x).exp()).collect();
        let state = NewtonState::new(grid, q0).unwrap();
        let after = newton_run(&[0.5, -1.0, 2.0, 7.0], &flat, state.clone()).unwrap();
        for (a, b) in after.values().iter().zip(state.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(after.step(), 4);
    }

    #[test]
    fn first_step_is_bayes() {
        let k = GaussianKernel::new(1.0).unwrap();
        let state = NewtonState::uniform(-4.0, 4.0, 81).unwrap();
        let x = 1.3;
        let after = newton_update(state.clone(), x, &k).unwrap();
        let post: Vec<f64> = state.grid().iter().map(|&t| k.density(x, t)).collect();
        let ratio0 = after.values()[0] / post[0];
        for (v, p) in after.values().iter().zip(&post) {
            assert!((v / p - ratio0).abs() < 1e-10 * ratio0);
        }
    }

    #[test]
    fn two_atom_grid_recovers_truth() {
        let k = GaussianKernel::new(1.0).unwrap();
        let state = NewtonState::new(vec![-2.0, 2.0], vec![1.0, 1.0]).unwrap();
        let mut rng = StreamRng::new(1);
        let data: Vec<f64> = (0..200).map(|_| 2.0 + f64::standard_normal(&mut rng)).collect();
        let out = newton_run(&data, &k, state).unwrap();
        assert!(out.masses()[1] > 0.95, "{:?}", out.masses());
    }

    #[test]
    fn incompatible_observation_is_reported() {
        let k = FlatKernel::new(0.0, 1.0).unwrap();
        let state = NewtonState::uniform(-1.0, 1.0, 11).unwrap();
        match newton_update(state, 5.0, &k) {
            Err(Error::ObservationIncompatible { x, .. }) => assert_eq!(x, 5.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_data_and_order_dependence() {
        let k = GaussianKernel::new(1.0).unwrap();
        let prior = NewtonState::uniform(-3.0, 3.0, 31).unwrap();
        assert_eq!(newton_run(&[], &k, prior.clone()).unwrap(), prior);
        let ab: NewtonState<f64> = newton_run(&[-1.0, 2.0], &k, prior.clone()).unwrap();
        let ba = newton_run(&[2.0, -1.0], &k, prior).unwrap();
        let diff: f64 = ab.values().iter().zip(ba.values()).map(|(a, b)| (a - b).abs()).sum();
        assert!(diff > 1e-3);
    }

    #[test]
    fn custom_schedule() {
        let k = GaussianKernel::new(1.0).unwrap();
        let prior = NewtonState::uniform(-3.0, 3.0, 31)
            .unwrap()
            .with_schedule(WeightSchedule::custom(vec![0.5]).unwrap());
        let one = newton_run(&[0.0], &k, prior.clone()).unwrap();
        assert_eq!(one.step(), 1);
        assert!(newton_run(&[0.0, 1.0], &k, prior).is_err());
        assert!(WeightSchedule::<f64>::custom(vec![0.0]).is_err());
    }

    #[test]
    fn mixture_recovery_improves_with_data() {
        let k = GaussianKernel::new(1.0).unwrap();
        let prior = NewtonState::uniform(-6.0, 6.0, DEFAULT_GRID_POINTS).unwrap();
        let truth = WeightedDiscreteMeasure::new(vec![-2.0, 2.0], vec![0.5, 0.5]).unwrap();
        let data = mixture_data(500, 2);
        let at50 = newton_run(&data[..50], &k, prior.clone()).unwrap();
        let at500 = newton_run(&data, &k, prior).unwrap();
        assert!(at500.cdf_l1_to(&truth) < at50.cdf_l1_to(&truth));
        let xs = linspace(-9.0, 9.0, 1801).unwrap();
        let pred = predictive_density(&at500, &k, &xs);
        assert!((trapezoid(&xs, &pred) - 1.0).abs() < 0.02);
    }

    #[test]
    fn predictive_of_point_mass_is_the_kernel() {
        let k = GaussianKernel::<f64>::new(0.7).unwrap();
        let grid = linspace(-2.0, 2.0, 41).unwrap();
        let mut q0 = vec![0.0; 41];
        q0[30] = 1.0;
        let state = NewtonState::new(grid.clone(), q0).unwrap();
        let xs = linspace(-3.0, 3.0, 13).unwrap();
        for (x, f) in xs.iter().zip(predictive_density(&state, &k, &xs)) {
            assert!((f - k.density(*x, grid[30])).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_chain_is_uniform_over_atoms() {
        let mut s = PredictiveUpdate::new();
        s = expected_chain_update(s, 3.0);
        assert_eq!(s.measure().unwrap().weights(), &[1.0]);
        for i in 2..=50 {
            s = expected_chain_update(s, i as f64);
            for &w in s.measure().unwrap().weights() {
                assert!((w - 1.0 / i as f64).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn updates_preserve_normalization_and_positivity(seed in any::<u64>(), n_obs in 1usize..40, sd in 0.5f64..2.0) {
            let k = GaussianKernel::new(sd).unwrap();
            let mut state = NewtonState::uniform(-5.0, 5.0, 101).unwrap();
            let base = BaseMeasure::gaussian(0.0, 1.0, 1.0).unwrap();
            let mut rng = StreamRng::new(seed);
            for _ in 0..n_obs {
                state.update(base.sample(&mut rng), &k).unwrap();
                prop_assert!((state.integral() - 1.0).abs() < 1e-8);
                prop_assert!(state.values().iter().all(|&v| v > 0.0));
            }
        }
    }
}
