//! Blackwell–MacQueen Pólya sequences and the Pólya (Dirichlet-multinomial)
//! partition law.
//!
//! Given `Y_1, …, Y_j`, the next point is a fresh `α₀` draw with probability
//! `a/(a+j)` and otherwise a uniformly chosen past point.

use rand::Rng;

use crate::error::{param, Result};
use crate::measure::BaseMeasure;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct PolyaUrn<'a, T> {
    base: &'a BaseMeasure<T>,
    history: Vec<T>,
}

impl<'a, T: Real> PolyaUrn<'a, T> {
    pub fn new(base: &'a BaseMeasure<T>) -> Self {
        Self {
            base,
            history: Vec::new(),
        }
    }

    /// Reuses an allocation; the buffer is cleared.
    pub fn with_buffer(base: &'a BaseMeasure<T>, mut buffer: Vec<T>) -> Self {
        buffer.clear();
        Self { base, history: buffer }
    }

    pub fn history(&self) -> &[T] {
        &self.history
    }

    pub fn into_history(self) -> Vec<T> {
        self.history
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Number of distinct values drawn so far.
    pub fn distinct(&self) -> usize {
        let mut v = self.history.clone();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
        v.dedup();
        v.len()
    }

    /// Draws `Y_{j+1}` and appends it to the history.
    ///
    /// The first draw consumes only the `α₀` variate.
    #[inline]
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> T {
        let j = self.history.len();
        let y = if j == 0 {
            self.base.sample(rng)
        } else {
            let a = self.base.total_mass();
            let u = T::unit(rng) * (a + T::from_usize_lossy(j));
            if u < a {
                self.base.sample(rng)
            } else {
                let idx = (u - a).to_usize().unwrap_or(j - 1).min(j - 1);
                self.history[idx]
            }
        };
        self.history.push(y);
        y
    }
}

/// Advances the urn by one draw.
pub fn polya_next<T: Real, R: Rng + ?Sized>(urn: &mut PolyaUrn<'_, T>, rng: &mut R) -> T {
    urn.next(rng)
}

/// `n` draws from a fresh urn.
pub fn polya_block<T: Real, R: Rng + ?Sized>(base: &BaseMeasure<T>, n: usize, rng: &mut R) -> Result<Vec<T>> {
    if n == 0 {
        return param("polya block needs n >= 1");
    }
    let mut out = Vec::with_capacity(n);
    fill_polya_block(base, n, &mut out, rng);
    Ok(out)
}

/// Overwrites `out` with a fresh block of `n` draws.
pub(crate) fn fill_polya_block<T: Real, R: Rng + ?Sized>(base: &BaseMeasure<T>, n: usize, out: &mut Vec<T>, rng: &mut R) {
    let buffer = std::mem::take(out);
    let mut urn = PolyaUrn::with_buffer(base, buffer);
    for _ in 0..n {
        urn.next(rng);
    }
    *out = urn.into_history();
}

fn ln_factorial<T: Real>(k: usize) -> T {
    T::from_usize_lossy(k + 1).ln_gamma()
}

/// `P(#{i : Y_i ∈ B_1} = j_1, …, #{i : Y_i ∈ B_k} = j_k)` for a Pólya sequence
/// of length `n` and a partition with masses `α(B_1), …, α(B_k)`.
///
/// `a` is taken as the sum of `masses`. Evaluated through log-gamma and
/// exponentiated once.
pub fn polya_partition_pmf<T: Real>(masses: &[T], counts: &[usize], n: usize) -> Result<T> {
    if masses.is_empty() || masses.len() != counts.len() {
        return param("masses and counts must be nonempty and of equal length");
    }
    if masses.iter().any(|m| !(*m > T::zero()) || !m.is_finite()) {
        return param("cell masses must be positive and finite");
    }
    let total_count: usize = counts.iter().sum();
    if total_count != n {
        return param(format!("counts sum to {total_count}, expected n = {n}"));
    }
    let a: T = masses.iter().copied().sum();
    let n_t = T::from_usize_lossy(n);
    let mut log_p = ln_factorial::<T>(n) - ((a + n_t).ln_gamma() - a.ln_gamma());
    for (&m, &j) in masses.iter().zip(counts) {
        if j > 0 {
            let j_t = T::from_usize_lossy(j);
            log_p += (m + j_t).ln_gamma() - m.ln_gamma() - ln_factorial::<T>(j);
        }
    }
    Ok(log_p.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::Compositions;
    use crate::rng::StreamRng;

    #[test]
    fn first_draw_is_fresh() {
        let base = BaseMeasure::uniform(10.0, 11.0, 0.001).unwrap();
        let mut rng = StreamRng::new(1);
        let mut urn = PolyaUrn::new(&base);
        let y = polya_next(&mut urn, &mut rng);
        assert!((10.0..11.0).contains(&y));
        // and consumes exactly one base variate
        let mut twin = StreamRng::new(1);
        assert_eq!(y, base.sample(&mut twin));
        assert_eq!(urn.history(), &[y]);
    }

    #[test]
    fn repeat_frequency_with_one_past_point() {
        let base = BaseMeasure::uniform(0.0, 1.0, 1.0).unwrap();
        let mut rng = StreamRng::new(2);
        let trials = 100_000;
        let mut hits = 0;
        for _ in 0..trials {
            let mut urn = PolyaUrn::with_buffer(&base, vec![]);
            urn.history.push(0.7);
            if urn.next(&mut rng) == 0.7 {
                hits += 1;
            }
        }
        let f = hits as f64 / trials as f64;
        assert!((f - 0.5).abs() < 0.005, "{f}");
    }

    #[test]
    fn large_mass_gives_distinct_draws() {
        fn distinct(mut v: Vec<f64>) -> usize {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.len()
        }
        // expected repeats among 100 draws: sum_j j/(a+j) ≈ 4.95e-3 at a = 1e6
        let base = BaseMeasure::uniform(0.0, 1.0, 1e6).unwrap();
        let mut rng = StreamRng::new(3);
        let reps = 2000;
        let mut repeats = 0;
        for _ in 0..reps {
            let block = polya_block(&base, 100, &mut rng).unwrap();
            repeats += 100 - distinct(block);
        }
        assert!((repeats as f64 / reps as f64) < 0.01);

        let mut all_distinct = 0;
        for _ in 0..100_000 {
            let block = polya_block(&base, 5, &mut rng).unwrap();
            if distinct(block) == 5 {
                all_distinct += 1;
            }
        }
        assert!(all_distinct as f64 / 1e5 > 0.999);
    }

    #[test]
    fn block_of_two_repeat_probability() {
        // P(Y1 = Y2) = 1/(a+1) + a/(a+1)·Σ p_i² = 0.5 + 0.5·0.5
        let base = BaseMeasure::discrete(vec![0.0, 1.0], vec![0.5, 0.5], 1.0).unwrap();
        let mut rng = StreamRng::new(4);
        let same = (0..100_000)
            .filter(|_| {
                let b = polya_block(&base, 2, &mut rng).unwrap();
                b[0] == b[1]
            })
            .count();
        assert!((same as f64 / 1e5 - 0.75).abs() < 0.01);
        assert!(polya_block(&base, 0, &mut rng).is_err());
        assert_eq!(polya_block(&base, 1, &mut rng).unwrap().len(), 1);
    }

    #[test]
    fn pmf_examples() {
        assert!((polya_partition_pmf(&[2.5f64], &[7], 7).unwrap() - 1.0).abs() < 1e-14);
        let p: f64 = polya_partition_pmf(&[1.0, 1.0], &[1, 1], 2).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-14);
        let total: f64 = [[2, 0], [1, 1], [0, 2]]
            .iter()
            .map(|c| polya_partition_pmf(&[1.0, 1.0], c, 2).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(polya_partition_pmf(&[1.0, 1.0], &[1, 1], 3).is_err());
        assert!(polya_partition_pmf(&[1.0, 0.0], &[1, 1], 2).is_err());
    }

    #[test]
    fn pmf_normalizes_over_compositions() {
        let mass_sets: [&[f64]; 4] = [&[0.7], &[1.0, 2.5], &[0.3, 0.3, 4.0], &[0.1, 1.0, 2.0, 10.0]];
        for masses in mass_sets {
            for n in 0..=20 {
                let total: f64 = Compositions::new(masses.len(), n)
                    .map(|c| polya_partition_pmf(masses, &c, n).unwrap())
                    .sum();
                assert!((total - 1.0).abs() < 1e-10, "k={} n={n}: {total}", masses.len());
            }
        }
    }

    #[test]
    fn pmf_survives_large_n() {
        let p: f64 = polya_partition_pmf(&[1.0, 1.0], &[300, 200], 500).unwrap();
        assert!(p.is_finite() && p > 0.0);
        // for a = 2 with unit masses the count of B_1 is uniform on {0..n}
        assert!((p - 1.0 / 501.0).abs() < 1e-12);
    }
}
