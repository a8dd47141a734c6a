//! Base measures, discrete random measures and the basic variate generators
//! shared by every chain.

use rand::Rng;
use rand_distr::Distribution;

use crate::error::{param, Error, Result};
use crate::scalar::Real;

/// Normalized center `α₀` of a parameter measure.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseFamily<T> {
    Uniform { lo: T, hi: T },
    Gaussian { mean: T, sd: T },
    Cauchy { loc: T, scale: T },
    Discrete { atoms: Vec<T>, probs: Vec<T> },
}

/// Parameter measure `α = a·α₀` of a Dirichlet process / Pólya sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseMeasure<T> {
    family: BaseFamily<T>,
    total_mass: T,
    // cumulative probabilities, discrete family only
    cdf: Vec<T>,
}

impl<T: Real> BaseMeasure<T> {
    pub fn new(family: BaseFamily<T>, total_mass: T) -> Result<Self> {
        if !(total_mass > T::zero()) || !total_mass.is_finite() {
            return param(format!("total mass must be positive and finite, got {total_mass}"));
        }
        let mut cdf = Vec::new();
        match &family {
            BaseFamily::Uniform { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return param(format!("uniform requires finite lo < hi, got ({lo}, {hi})"));
                }
            }
            BaseFamily::Gaussian { mean, sd } => {
                if !(*sd > T::zero()) || !sd.is_finite() || !mean.is_finite() {
                    return param(format!("gaussian requires a positive sd, got {sd}"));
                }
            }
            BaseFamily::Cauchy { loc, scale } => {
                if !(*scale > T::zero()) || !scale.is_finite() || !loc.is_finite() {
                    return param(format!("cauchy requires a positive scale, got {scale}"));
                }
            }
            BaseFamily::Discrete { atoms, probs } => {
                if atoms.is_empty() || atoms.len() != probs.len() {
                    return param("discrete base needs equally many atoms and probabilities (at least one)");
                }
                if atoms.iter().any(|a| !a.is_finite()) {
                    return param("discrete atoms must be finite");
                }
                if probs.iter().any(|p| !(*p >= T::zero()) || !p.is_finite()) {
                    return param("discrete probabilities must be nonnegative");
                }
                let total: T = probs.iter().copied().sum();
                if (total - T::one()).abs() > T::simplex_tol() {
                    return param(format!("discrete probabilities sum to {total}, expected 1"));
                }
                let mut acc = T::zero();
                cdf = probs
                    .iter()
                    .map(|&p| {
                        acc += p;
                        acc
                    })
                    .collect();
            }
        }
        Ok(Self {
            family,
            total_mass,
            cdf,
        })
    }

    pub fn uniform(lo: T, hi: T, total_mass: T) -> Result<Self> {
        Self::new(BaseFamily::Uniform { lo, hi }, total_mass)
    }

    pub fn gaussian(mean: T, sd: T, total_mass: T) -> Result<Self> {
        Self::new(BaseFamily::Gaussian { mean, sd }, total_mass)
    }

    pub fn cauchy(loc: T, scale: T, total_mass: T) -> Result<Self> {
        Self::new(BaseFamily::Cauchy { loc, scale }, total_mass)
    }

    pub fn discrete(atoms: Vec<T>, probs: Vec<T>, total_mass: T) -> Result<Self> {
        Self::new(BaseFamily::Discrete { atoms, probs }, total_mass)
    }

    pub fn family(&self) -> &BaseFamily<T> {
        &self.family
    }

    /// The total mass `a`.
    pub fn total_mass(&self) -> T {
        self.total_mass
    }

    /// Same center, different total mass.
    pub fn with_total_mass(&self, total_mass: T) -> Result<Self> {
        Self::new(self.family.clone(), total_mass)
    }

    /// Mean of `α₀`; `None` for the Cauchy family.
    pub fn mean(&self) -> Option<T> {
        match &self.family {
            BaseFamily::Uniform { lo, hi } => Some((*lo + *hi) / T::lit(2.0)),
            BaseFamily::Gaussian { mean, .. } => Some(*mean),
            BaseFamily::Cauchy { .. } => None,
            BaseFamily::Discrete { atoms, probs } => {
                Some(atoms.iter().zip(probs).map(|(&x, &p)| x * p).sum())
            }
        }
    }

    /// Variance of `α₀`; `None` for the Cauchy family.
    pub fn variance(&self) -> Option<T> {
        match &self.family {
            BaseFamily::Uniform { lo, hi } => Some((*hi - *lo).powi(2) / T::lit(12.0)),
            BaseFamily::Gaussian { sd, .. } => Some(*sd * *sd),
            BaseFamily::Cauchy { .. } => None,
            BaseFamily::Discrete { atoms, probs } => {
                let m = self.mean()?;
                Some(atoms.iter().zip(probs).map(|(&x, &p)| p * (x - m).powi(2)).sum())
            }
        }
    }

    /// Whether `α₀` has bounded support.
    pub fn is_bounded(&self) -> bool {
        matches!(self.family, BaseFamily::Uniform { .. } | BaseFamily::Discrete { .. })
    }

    /// One draw from `α₀` (not scaled by `a`).
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match &self.family {
            BaseFamily::Uniform { lo, hi } => *lo + (*hi - *lo) * T::unit(rng),
            BaseFamily::Gaussian { mean, sd } => *mean + *sd * T::standard_normal(rng),
            BaseFamily::Cauchy { loc, scale } => {
                let u = T::unit(rng);
                *loc + *scale * (T::PI() * (u - T::lit(0.5))).tan()
            }
            BaseFamily::Discrete { atoms, .. } => {
                let u = T::unit(rng);
                let idx = self.cdf.partition_point(|&c| c <= u).min(atoms.len() - 1);
                atoms[idx]
            }
        }
    }
}

/// One draw from `α₀`.
pub fn sample_base<T: Real, R: Rng + ?Sized>(measure: &BaseMeasure<T>, rng: &mut R) -> T {
    measure.sample(rng)
}

/// Reusable Beta(α, β) sampler.
///
/// `Beta(1, 0)` is the point mass at 1 and consumes no randomness. The
/// shapes `Beta(1, β)` and `Beta(α, 1)` use their closed-form inverse CDFs.
#[derive(Clone, Debug)]
pub enum BetaSampler<T: Real> {
    One,
    UnitAlpha { inv_beta: T },
    UnitBeta { inv_alpha: T },
    General(T::BetaDist),
}

impl<T: Real> BetaSampler<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        if alpha == T::one() && beta == T::zero() {
            return Ok(Self::One);
        }
        if !(alpha > T::zero() && beta > T::zero()) || !alpha.is_finite() || !beta.is_finite() {
            return param(format!("beta parameters must be positive, got ({alpha}, {beta})"));
        }
        if alpha == T::one() {
            Ok(Self::UnitAlpha { inv_beta: beta.recip() })
        } else if beta == T::one() {
            Ok(Self::UnitBeta { inv_alpha: alpha.recip() })
        } else {
            T::new_beta(alpha, beta)
                .map(Self::General)
                .ok_or_else(|| Error::Parameter(format!("beta({alpha}, {beta}) rejected")))
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self {
            Self::One => T::one(),
            Self::UnitAlpha { inv_beta } => {
                // 1 - U^{1/β} with U in (0, 1]
                let u = T::one() - T::unit(rng);
                -(u.ln() * *inv_beta).exp_m1()
            }
            Self::UnitBeta { inv_alpha } => {
                let u = T::one() - T::unit(rng);
                (u.ln() * *inv_alpha).exp()
            }
            Self::General(dist) => dist.sample(rng),
        }
    }
}

/// One Beta(α, β) draw, with `Beta(1, 0) = 1`.
pub fn beta_sample<T: Real, R: Rng + ?Sized>(alpha: T, beta: T, rng: &mut R) -> Result<T> {
    Ok(BetaSampler::new(alpha, beta)?.sample(rng))
}

/// Fills `out` with a Dirichlet(1, …, 1) vector by stick-breaking:
/// `ξ_i ~ Beta(1, n − i)`, then renormalizes by the sum.
pub fn fill_dirichlet_uniform<T: Real, R: Rng + ?Sized>(out: &mut [T], rng: &mut R) {
    let n = out.len();
    if n == 0 {
        return;
    }
    let mut remaining = T::one();
    for (i, slot) in out.iter_mut().enumerate().take(n - 1) {
        let inv_beta = T::from_usize_lossy(n - 1 - i).recip();
        let u = T::one() - T::unit(rng);
        let xi = -(u.ln() * inv_beta).exp_m1();
        let piece = remaining * xi;
        *slot = piece;
        remaining *= T::one() - xi;
    }
    out[n - 1] = remaining;
    let total: T = out.iter().copied().sum();
    for w in out.iter_mut() {
        *w /= total;
    }
}

/// A Dirichlet(1, …, 1) weight vector of length `n`.
pub fn dirichlet_uniform_weights<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<T>> {
    if n == 0 {
        return param("dirichlet weights need n >= 1");
    }
    let mut out = vec![T::zero(); n];
    fill_dirichlet_uniform(&mut out, rng);
    Ok(out)
}

/// The same law built from normalized standard exponentials `λ_i / Σ λ_j`.
pub fn exponential_normalized_weights<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<T>> {
    if n == 0 {
        return param("dirichlet weights need n >= 1");
    }
    let mut out: Vec<T> = (0..n).map(|_| -(T::one() - T::unit(rng)).ln()).collect();
    let total: T = out.iter().copied().sum();
    for w in out.iter_mut() {
        *w /= total;
    }
    Ok(out)
}

/// Finitely many atoms with simplex weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedDiscreteMeasure<T> {
    atoms: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> WeightedDiscreteMeasure<T> {
    pub fn new(atoms: Vec<T>, weights: Vec<T>) -> Result<Self> {
        Self::check_shape(&atoms, &weights)?;
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::simplex_tol() {
            return param(format!("weights sum to {total}, expected 1"));
        }
        Ok(Self { atoms, weights })
    }

    /// Divides the weights by their sum.
    pub fn from_unnormalized(atoms: Vec<T>, mut weights: Vec<T>) -> Result<Self> {
        Self::check_shape(&atoms, &weights)?;
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return param(format!("weights have non-positive total {total}"));
        }
        for w in weights.iter_mut() {
            *w /= total;
        }
        Ok(Self { atoms, weights })
    }

    pub fn point_mass(x: T) -> Self {
        Self {
            atoms: vec![x],
            weights: vec![T::one()],
        }
    }

    fn check_shape(atoms: &[T], weights: &[T]) -> Result<()> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return param(format!(
                "need equally many atoms and weights (at least one), got {} and {}",
                atoms.len(),
                weights.len()
            ));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return param("weights must be finite and nonnegative");
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return param("atoms must be finite");
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[T] {
        &self.atoms
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    /// `μ(B)` for `B = {x : pred(x)}`.
    pub fn mass_where(&self, pred: impl Fn(T) -> bool) -> T {
        self.iter().filter(|(x, _)| pred(*x)).map(|(_, w)| w).sum()
    }

    pub fn mean(&self) -> T {
        self.iter().map(|(x, w)| x * w).sum()
    }

    /// `∫ g dμ`.
    pub fn integrate(&self, g: impl Fn(T) -> T) -> Result<T> {
        let mut acc = T::zero();
        for (x, w) in self.iter() {
            let v = g(x);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    at: x.as_f64(),
                    value: v.as_f64(),
                });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// `μ ← w·δ_z + (1 − w)·μ`.
    pub(crate) fn mix_point(&mut self, z: T, w: T) {
        let keep = T::one() - w;
        for x in self.weights.iter_mut() {
            *x *= keep;
        }
        self.atoms.push(z);
        self.weights.push(w);
    }
}

/// `∫ g dμ = Σ weights[i]·g(atoms[i])`.
pub fn integrate<T: Real>(g: impl Fn(T) -> T, mu: &WeightedDiscreteMeasure<T>) -> Result<T> {
    mu.integrate(g)
}
