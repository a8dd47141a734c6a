//! Exact mixed moments of the Pólya distribution and of the Dirichlet law.
//!
//! For a partition `B_1, …, B_k` with masses `α(B_i)` (summing to `a`) and
//! `Q_n = Σ q_i δ_{Y_i}` built from `n` Pólya draws with Dirichlet(1, …, 1)
//! weights,
//!
//! ```text
//! E[Π Q_n(B_i)^{r_i}] = Σ_s Π_i L(r_i, s_i) · C_n^{(s)} / (n)_{R↑}
//! C_n^{(s)} = Π_i (α(B_i))_{s_i↑} · (n)_{S↓} / (a)_{S↑}
//! ```
//!
//! with `R = Σ r_i`, `S = Σ s_i`, and `L(r, s) = Σ_t |s(r, t)| S(t, s)` (the
//! Stirling double sum, i.e. the unsigned Lah numbers). As `n → ∞` only the
//! `s = r` term survives and the moment tends to the Dirichlet moment
//! `Π (α(B_i))_{r_i↑} / (a)_{R↑}`.
//!
//! Quotients are accumulated as interleaved products of factors in `(0, 1]`,
//! so nothing overflows and the same code is exact over `BigRational`.

use std::sync::OnceLock;

use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::chains::{qn_run, ExchangeableSource};
use crate::error::{param, Error, Result};
use crate::measure::BaseMeasure;
use crate::polya::polya_partition_pmf;
use crate::rng::{par_replicas, StreamRng};
use crate::scalar::MomentField;
use crate::stats::Estimate;

/// Largest order for which Stirling numbers are tabulated exactly.
pub const MAX_STIRLING_ORDER: usize = 30;
/// `exact_sum` enumeration budget.
pub const EXACT_SUM_MAX_N: usize = 12;
pub const EXACT_SUM_MAX_K: usize = 3;

/// Equality up to a relative tolerance (exact for rationals).
pub trait ApproxEq {
    fn approx_eq(&self, other: &Self, rel: f64) -> bool;
}

impl ApproxEq for f64 {
    fn approx_eq(&self, other: &Self, rel: f64) -> bool {
        let scale = self.abs().max(other.abs());
        (self - other).abs() <= rel * scale || scale < 1e-300
    }
}

impl ApproxEq for f32 {
    fn approx_eq(&self, other: &Self, rel: f64) -> bool {
        let rel = rel.max(1e-5) as f32;
        let scale = self.abs().max(other.abs());
        (self - other).abs() <= rel * scale || scale < 1e-30
    }
}

impl ApproxEq for BigRational {
    fn approx_eq(&self, other: &Self, _rel: f64) -> bool {
        self == other
    }
}

/// Iterates the compositions `D_{k,n} = {(j_1, …, j_k) ∈ ℕ^k : Σ j_i = n}` in
/// lexicographically decreasing order, without recursion.
#[derive(Clone, Debug)]
pub struct Compositions {
    current: Vec<usize>,
    done: bool,
}

impl Compositions {
    pub fn new(k: usize, n: usize) -> Self {
        if k == 0 {
            return Self {
                current: Vec::new(),
                done: n != 0,
            };
        }
        let mut current = vec![0; k];
        current[0] = n;
        Self { current, done: false }
    }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        // move one unit from the rightmost nonzero entry (excluding the last)
        // to its right neighbour, and collect the last entry back there.
        match (0..k.saturating_sub(1)).rev().find(|&i| self.current[i] > 0) {
            None => self.done = true,
            Some(i) => {
                let tail = self.current[k - 1];
                self.current[k - 1] = 0;
                self.current[i] -= 1;
                self.current[i + 1] = tail + 1;
            }
        }
        Some(out)
    }
}

/// Rising factorial `(x)_{n↑1} = x(x+1)⋯(x+n−1)`; `n = 0` gives 1.
pub fn pochhammer_rising<T: MomentField>(x: &T, n: usize) -> T {
    let mut acc = T::one();
    let mut term = x.clone();
    for _ in 0..n {
        acc = acc * term.clone();
        term = term + T::one();
    }
    acc
}

/// `ln (x)_{n↑1}` for `x > 0`.
pub fn ln_pochhammer_rising(x: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    libm::lgamma(x + n as f64) - libm::lgamma(x)
}

/// Falling factorial `(n)_{r↓1} = n(n−1)⋯(n−r+1)`; zero when `r > n`.
pub fn falling_factorial<T: MomentField>(n: usize, r: usize) -> T {
    if r > n {
        return T::zero();
    }
    (0..r).fold(T::one(), |acc, i| acc * T::from_usize(n - i))
}

/// Unsigned Stirling numbers of the first kind `|s(r, t)|` and Stirling
/// numbers of the second kind `S(r, t)` for `r ≤ 30`, exact in `u128`.
#[derive(Debug)]
pub struct StirlingTable {
    first: Vec<Vec<u128>>,
    second: Vec<Vec<u128>>,
}

impl StirlingTable {
    fn build(max: usize) -> Self {
        let mut first = vec![vec![0u128; max + 1]; max + 1];
        let mut second = vec![vec![0u128; max + 1]; max + 1];
        first[0][0] = 1;
        second[0][0] = 1;
        for r in 1..=max {
            for t in 1..=r {
                first[r][t] = (r as u128 - 1) * first[r - 1][t] + first[r - 1][t - 1];
                second[r][t] = t as u128 * second[r - 1][t] + second[r - 1][t - 1];
            }
        }
        Self { first, second }
    }

    fn shared() -> &'static StirlingTable {
        static TABLE: OnceLock<StirlingTable> = OnceLock::new();
        TABLE.get_or_init(|| StirlingTable::build(MAX_STIRLING_ORDER))
    }

    fn guard(r: usize) -> Result<()> {
        if r > MAX_STIRLING_ORDER {
            return Err(Error::Overflow {
                what: "Stirling order",
                limit: MAX_STIRLING_ORDER,
            });
        }
        Ok(())
    }

    /// `|s(r, t)|`.
    pub fn first(&self, r: usize, t: usize) -> u128 {
        if t > r {
            0
        } else {
            self.first[r][t]
        }
    }

    /// `S(r, t)`.
    pub fn second(&self, r: usize, t: usize) -> u128 {
        if t > r {
            0
        } else {
            self.second[r][t]
        }
    }

    /// `Σ_t |s(r, t)| S(t, s)`.
    pub fn rising_to_falling(&self, r: usize, s: usize) -> u128 {
        (s..=r).map(|t| self.first(r, t) * self.second(t, s)).sum()
    }
}

/// Shared exact table; errors when `r > 30`.
pub fn stirling_numbers(r: usize) -> Result<&'static StirlingTable> {
    StirlingTable::guard(r)?;
    Ok(StirlingTable::shared())
}

pub fn stirling_first(r: usize, t: usize) -> Result<u128> {
    Ok(stirling_numbers(r)?.first(r, t))
}

pub fn stirling_second(r: usize, t: usize) -> Result<u128> {
    Ok(stirling_numbers(r)?.second(r, t))
}

/// Partition masses and moment orders.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentQuery<T> {
    n: usize,
    masses: Vec<T>,
    orders: Vec<usize>,
}

impl<T: MomentField> MomentQuery<T> {
    /// `a` is `Σ masses`.
    pub fn new(n: usize, masses: Vec<T>, orders: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return param("moment query needs n >= 1");
        }
        if masses.len() < 2 {
            return param("moment query needs at least two cells");
        }
        if masses.len() != orders.len() {
            return param("masses and orders must have equal length");
        }
        if masses.iter().any(|m| !(*m > T::zero())) {
            return param("cell masses must be positive");
        }
        Ok(Self { n, masses, orders })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn k(&self) -> usize {
        self.masses.len()
    }

    pub fn total_mass(&self) -> T {
        self.masses.iter().cloned().fold(T::zero(), |a, b| a + b)
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

impl MomentQuery<f64> {
    /// Like [`MomentQuery::new`] but also checks `Σ masses = total_mass`
    /// within 1e-9.
    pub fn with_total(n: usize, total_mass: f64, masses: Vec<f64>, orders: Vec<usize>) -> Result<Self> {
        let q = Self::new(n, masses, orders)?;
        let sum = q.total_mass();
        if !((sum - total_mass).abs() <= 1e-9) {
            return param(format!("masses sum to {sum}, expected a = {total_mass}"));
        }
        Ok(q)
    }
}

fn sum_of<T: MomentField>(xs: &[T]) -> T {
    xs.iter().cloned().fold(T::zero(), |a, b| a + b)
}

/// `Π_i (α_i)_{s_i↑} / (a)_{S↑}`, each factor of which is at most 1.
fn dirichlet_ratio<T: MomentField>(masses: &[T], s: &[usize]) -> T {
    let a = sum_of(masses);
    let mut acc = T::one();
    let mut idx = 0usize;
    for (m, &si) in masses.iter().zip(s) {
        for j in 0..si {
            acc = acc * (m.clone() + T::from_usize(j)) / (a.clone() + T::from_usize(idx));
            idx += 1;
        }
    }
    acc
}

/// `(n)_{S↓} / (n)_{R↑}` for `S ≤ R`.
fn falling_over_rising<T: MomentField>(n: usize, big_s: usize, big_r: usize) -> T {
    if big_s > n {
        return T::zero();
    }
    let nn = T::from_usize(n);
    let mut acc = T::one();
    for i in 0..big_r {
        let den = nn.clone() + T::from_usize(i);
        let num = if i < big_s { T::from_usize(n - i) } else { T::one() };
        acc = acc * num / den;
    }
    acc
}

/// `C_n^{(s)} = Π (α(B_i))_{s_i↑} (n)_{S↓} / (a)_{S↑}`; zero when `S > n`.
pub fn c_coefficient<T: MomentField>(masses: &[T], n: usize, s: &[usize]) -> T {
    let big_s: usize = s.iter().sum();
    if big_s > n {
        return T::zero();
    }
    dirichlet_ratio(masses, s) * falling_factorial(n, big_s)
}

/// `C_n^{(s)}` computed from the recursion alone, starting from
/// `C_0^{(0)} = 1` and `C_0^{(s)} = 0` for `s ≠ 0`.
pub fn c_by_recursion<T: MomentField>(masses: &[T], n: usize, s: &[usize]) -> T {
    let a = sum_of(masses);
    let k = s.len();
    // mixed-radix index over the box Π [0, s_i]
    let radix: Vec<usize> = s.iter().map(|&x| x + 1).collect();
    let size: usize = radix.iter().product();
    let decode = |mut idx: usize| {
        let mut v = vec![0usize; k];
        for (slot, &r) in v.iter_mut().zip(&radix) {
            *slot = idx % r;
            idx /= r;
        }
        v
    };
    let stride: Vec<usize> = (0..k).map(|i| radix[..i].iter().product()).collect();
    let mut table: Vec<T> = (0..size).map(|i| if i == 0 { T::one() } else { T::zero() }).collect();
    for step in 0..n {
        let mut next = vec![T::zero(); size];
        let m = T::from_usize(step);
        let factor = T::from_usize(step + 1) / (a.clone() + m.clone());
        // C^{(0)} = 1 for every n; the recursion only applies off the origin
        next[0] = T::one();
        for (idx, slot) in next.iter_mut().enumerate().skip(1) {
            let sv = decode(idx);
            let mut val = factor.clone() * table[idx].clone();
            if let Some(c) = (0..k).rev().find(|&c| sv[c] > 0) {
                let coef = masses[c].clone() + T::from_usize(sv[c] - 1);
                val = val + factor.clone() * coef * table[idx - stride[c]].clone();
            }
            *slot = val;
        }
        table = next;
    }
    table[size - 1].clone()
}

/// True iff `c` satisfies
/// `C_{n+1}^{(s)} = ((n+1)(α(B_j)+s_j−1)/(a+n)) C_n^{(s−e_j)} + ((n+1)/(a+n)) C_n^{(s)}`
/// at `(n, s)` for every coordinate `j` with `s_j ≥ 1`, within relative `rel`.
/// For `s = 0` it checks `C_n^{(0)} = C_{n+1}^{(0)} = 1`.
pub fn recursion_holds<T, F>(c: F, masses: &[T], n: usize, s: &[usize], rel: f64) -> bool
where
    T: MomentField + ApproxEq,
    F: Fn(usize, &[usize]) -> T,
{
    let a = sum_of(masses);
    let lhs = c(n + 1, s);
    if s.iter().all(|&x| x == 0) {
        return lhs.approx_eq(&T::one(), rel) && c(n, s).approx_eq(&T::one(), rel);
    }
    let factor = T::from_usize(n + 1) / (a + T::from_usize(n));
    let same = c(n, s);
    (0..s.len()).filter(|&j| s[j] > 0).all(|j| {
        let mut lower = s.to_vec();
        lower[j] -= 1;
        let coef = masses[j].clone() + T::from_usize(s[j] - 1);
        let rhs = factor.clone() * coef * c(n, &lower) + factor.clone() * same.clone();
        lhs.approx_eq(&rhs, rel)
    })
}

/// [`recursion_holds`] for the closed form, at relative tolerance 1e-10.
pub fn c_recursion_check<T: MomentField + ApproxEq>(masses: &[T], n: usize, s: &[usize]) -> bool {
    recursion_holds(|m, sv| c_coefficient(masses, m, sv), masses, n, s, 1e-10)
}

fn lah_coefficients(r: usize) -> Result<Vec<u128>> {
    let table = stirling_numbers(r)?;
    Ok((0..=r).map(|s| table.rising_to_falling(r, s)).collect())
}

/// Exact finite-`n` mixed moment `E[Π Q_n(B_i)^{r_i}]` via the Stirling
/// expansion over `C_n^{(s)}`.
pub fn polya_mixed_moment<T: MomentField>(query: &MomentQuery<T>) -> Result<T> {
    let orders = query.orders();
    let coeffs: Vec<Vec<u128>> = orders.iter().map(|&r| lah_coefficients(r)).collect::<Result<_>>()?;
    let big_r: usize = orders.iter().sum();
    let n = query.n();
    let k = orders.len();
    let mut s = vec![0usize; k];
    let mut total = T::zero();
    loop {
        let weight = s
            .iter()
            .zip(&coeffs)
            .fold(1u128, |acc, (&si, c)| acc.saturating_mul(c[si]));
        let big_s: usize = s.iter().sum();
        if weight > 0 && big_s <= n {
            let w = if weight == u128::MAX {
                // product of per-cell coefficients overflowed u128; recombine in T
                s.iter()
                    .zip(&coeffs)
                    .fold(T::one(), |acc, (&si, c)| acc * T::from_u128(c[si]))
            } else {
                T::from_u128(weight)
            };
            total = total
                + w * dirichlet_ratio(query.masses(), &s) * falling_over_rising(n, big_s, big_r);
        }
        // odometer over Π [0, r_i]
        let mut i = 0;
        while i < k {
            if s[i] < orders[i] {
                s[i] += 1;
                break;
            }
            s[i] = 0;
            i += 1;
        }
        if i == k {
            break;
        }
    }
    Ok(total)
}

/// Dirichlet moment `Π (α(B_i))_{r_i↑} / (a)_{R↑}` (the `n → ∞` limit).
pub fn dirichlet_moment<T: MomentField>(masses: &[T], orders: &[usize]) -> Result<T> {
    if masses.len() != orders.len() || masses.is_empty() {
        return param("masses and orders must be nonempty and of equal length");
    }
    if masses.iter().any(|m| !(*m > T::zero())) {
        return param("cell masses must be positive");
    }
    Ok(dirichlet_ratio(masses, orders))
}

/// Exact pmf of the cell counts as Pochhammer products.
pub fn partition_pmf_exact<T: MomentField>(masses: &[T], counts: &[usize]) -> T {
    // multinomial · Π (α_i)_{j_i↑} / (a)_{n↑}, with the multinomial folded in
    // as Π_i Π_{l<j_i} 1/(l+1) · n!
    dirichlet_ratio(masses, counts) * multinomial(counts)
}

fn multinomial<T: MomentField>(counts: &[usize]) -> T {
    let mut acc = T::one();
    let mut total = 0usize;
    for &j in counts {
        for l in 1..=j {
            total += 1;
            acc = acc * T::from_usize(total) / T::from_usize(l);
        }
    }
    acc
}

fn check_budget<T: MomentField>(query: &MomentQuery<T>) -> Result<()> {
    if query.n() > EXACT_SUM_MAX_N || query.k() > EXACT_SUM_MAX_K {
        return param(format!(
            "exact_sum budget exceeded: n = {} (max {EXACT_SUM_MAX_N}), k = {} (max {EXACT_SUM_MAX_K})",
            query.n(),
            query.k()
        ));
    }
    Ok(())
}

fn exact_sum_with<T: MomentField>(query: &MomentQuery<T>, pmf: impl Fn(&[usize]) -> Result<T>) -> Result<T> {
    check_budget(query)?;
    let n = query.n();
    let big_r: usize = query.orders().iter().sum();
    let rising_n = pochhammer_rising(&T::from_usize(n), big_r);
    let mut total = T::zero();
    for counts in Compositions::new(query.k(), n) {
        // conditional on the counts, (Q_n(B_i)) is Dirichlet(j_1, …, j_k)
        let numer = counts
            .iter()
            .zip(query.orders())
            .fold(T::one(), |acc, (&j, &r)| acc * pochhammer_rising(&T::from_usize(j), r));
        if numer.is_zero() {
            continue;
        }
        total = total + pmf(&counts)? * numer / rising_n.clone();
    }
    Ok(total)
}

/// The defining sum over `D_{k,n}` with the pmf as Pochhammer products.
/// Exact over rationals. Budget: `n ≤ 12`, `k ≤ 3`.
pub fn exact_sum_moment<T: MomentField>(query: &MomentQuery<T>) -> Result<T> {
    exact_sum_with(query, |c| Ok(partition_pmf_exact(query.masses(), c)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BruteForceMode {
    /// Enumerate `D_{k,n}` using the log-gamma partition pmf.
    ExactSum,
    /// Average over simulated `Q_n` with a Pólya source.
    MonteCarlo { samples: usize },
}

pub type MomentEstimate = Estimate;

/// Independent oracle for [`polya_mixed_moment`].
pub fn brute_force_moment(query: &MomentQuery<f64>, mode: BruteForceMode, rng: &StreamRng) -> Result<MomentEstimate> {
    if query.orders().iter().all(|&r| r == 0) {
        if let BruteForceMode::ExactSum = mode {
            check_budget(query)?;
        }
        return Ok(MomentEstimate { value: 1.0, std_error: 0.0 });
    }
    match mode {
        BruteForceMode::ExactSum => {
            let value = exact_sum_with(query, |c| polya_partition_pmf(query.masses(), c, query.n()))?;
            Ok(MomentEstimate { value, std_error: 0.0 })
        }
        BruteForceMode::MonteCarlo { samples } => {
            let out = monte_carlo_moments(query.n(), query.masses(), &[query.orders().to_vec()], samples, rng)?;
            Ok(out[0])
        }
    }
}

const MC_CHUNK: usize = 4096;

/// Monte Carlo estimates of several mixed moments from shared replicas of
/// `Q_n` driven by a Pólya sequence over the atoms `0, …, k−1` with
/// probabilities `masses / a`.
pub fn monte_carlo_moments(
    n: usize,
    masses: &[f64],
    orders: &[Vec<usize>],
    samples: usize,
    rng: &StreamRng,
) -> Result<Vec<MomentEstimate>> {
    if samples < 2 {
        return param("monte carlo needs at least two samples");
    }
    let k = masses.len();
    if orders.iter().any(|o| o.len() != k) {
        return param("every order vector must have one entry per cell");
    }
    let a: f64 = masses.iter().sum();
    let base = BaseMeasure::discrete(
        (0..k).map(|i| i as f64).collect(),
        masses.iter().map(|m| m / a).collect(),
        a,
    )?;
    let source = ExchangeableSource::Polya(base);
    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<Result<Vec<(f64, f64)>>> = par_replicas(rng, chunks, |c, r| {
        let count = MC_CHUNK.min(samples - c * MC_CHUNK);
        let mut acc = vec![(0.0, 0.0); orders.len()];
        let mut cells = vec![0.0; k];
        for _ in 0..count {
            let state = qn_run(n, &source, r)?;
            cells.iter_mut().for_each(|x| *x = 0.0);
            for (x, w) in state.measure().expect("n >= 1").iter() {
                cells[x.to_usize().expect("cell index")] += w;
            }
            for (slot, ord) in acc.iter_mut().zip(orders) {
                let v: f64 = cells.iter().zip(ord).map(|(c, &e)| c.powi(e as i32)).product();
                slot.0 += v;
                slot.1 += v * v;
            }
        }
        Ok(acc)
    });
    let mut sums = vec![(0.0, 0.0); orders.len()];
    for part in partials {
        for (s, p) in sums.iter_mut().zip(part?) {
            s.0 += p.0;
            s.1 += p.1;
        }
    }
    Ok(sums.into_iter().map(|(s1, s2)| Estimate::from_sums(s1, s2, samples)).collect())
}
