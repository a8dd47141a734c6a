//! Quantitative ergodicity of the block chain's mean functional.
//!
//! For the mean chain `M ← θ T + (1 − θ) M` with `θ ~ Beta(n, a)` and the
//! drift function `V(x) = 1 + |x|^s`,
//!
//! ```text
//! PV(x) ≤ 1 + c_s + ρ_s |x|^s,   ρ_s = E[(1 − θ)^s],  c_s = E[θ^s] · n E[q^s] · E|Y|^s
//! ```
//!
//! so `PV ≤ λ V + b 1_C` on `C = [−K, K]` with `b = 1 − λ + c_s` and
//! `K = ((1 − λ + c_s) / (λ − ρ_s))^{1/s}` for any `λ ∈ (ρ_s, 1)`. At `s = 1`
//! these are `ρ = a/(n+a)` and `c = n/(n+a) E|Y|`.
//!
//! The innovation `T = Σ q_i y_i` with `q ~ Dirichlet(1, …, 1)` has density
//!
//! ```text
//! f_T(y) = (n − 1)/π ∫_0^∞ Re Π_j (1 + i t (y_j − y))^{−1} dt
//! ```
//!
//! which is evaluated by adaptive quadrature (split at `t* = 1/geomean|y_j − y|`,
//! with the tail mapped onto a bounded integrand by `t = t*/u`).

use rayon::prelude::*;

use crate::chains::{dp_functional_sample, FtKernel, Innovation, ScalarChainState};
use crate::error::{param, Error, Result};
use crate::measure::{BaseFamily, BaseMeasure};
use crate::polya::polya_block;
use crate::quadrature::{integrate, integrate_breaks};
use crate::rng::{par_replicas, StreamRng};
use crate::stats::{histogram_tv, Estimate};

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `E[(1 − θ)^s]` for `θ ~ Beta(n, a)`.
pub fn contraction_moment(n: usize, a: f64, s: f64) -> f64 {
    let n = n as f64;
    if s == 1.0 {
        return a / (n + a);
    }
    (ln_gamma(a + s) + ln_gamma(a + n) - ln_gamma(a) - ln_gamma(a + n + s)).exp()
}

/// `E[θ^s] · n · E[q_1^s]` for `θ ~ Beta(n, a)` and `q_1 ~ Beta(1, n − 1)`.
pub fn innovation_scale(n: usize, a: f64, s: f64) -> f64 {
    let nf = n as f64;
    if s == 1.0 {
        return nf / (nf + a);
    }
    let theta = ln_gamma(nf + s) + ln_gamma(nf + a) - ln_gamma(nf) - ln_gamma(nf + a + s);
    let q = ln_gamma(1.0 + s) + ln_gamma(nf) - ln_gamma(nf + s);
    nf * (theta + q).exp()
}

/// Parameters of a drift check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftSpec {
    pub n: usize,
    pub a: f64,
    /// `E|Y|^s` under the normalized base.
    pub abs_moment: f64,
    pub lambda: f64,
    pub s: f64,
}

impl DriftSpec {
    /// `V(x) = 1 + |x|`; `mean_abs_y = E|Y|`.
    pub fn new(n: usize, a: f64, mean_abs_y: f64, lambda: f64) -> Result<Self> {
        Self::with_exponent(n, a, mean_abs_y, lambda, 1.0)
    }

    /// `V(x) = 1 + |x|^s` for `s ∈ (0, 1]`; `abs_moment = E|Y|^s`.
    pub fn with_exponent(n: usize, a: f64, abs_moment: f64, lambda: f64, s: f64) -> Result<Self> {
        if n == 0 {
            return param("n must be at least 1");
        }
        if !(a > 0.0) || !a.is_finite() {
            return param(format!("total mass must be positive, got {a}"));
        }
        if !(s > 0.0 && s <= 1.0) {
            return param(format!("drift exponent must lie in (0, 1], got {s}"));
        }
        if !(abs_moment >= 0.0) || !abs_moment.is_finite() {
            return param("E|Y|^s must be finite for the drift condition");
        }
        let (lo, hi) = admissible_lambda(n, a, s);
        if !(lambda > lo && lambda < hi) {
            return param(format!("lambda = {lambda} must lie in ({lo}, {hi})"));
        }
        Ok(Self {
            n,
            a,
            abs_moment,
            lambda,
            s,
        })
    }

    /// Computes `E|Y|^s` from the base.
    pub fn from_base(n: usize, base: &BaseMeasure<f64>, lambda: f64, s: f64) -> Result<Self> {
        Self::with_exponent(n, base.total_mass(), base_abs_moment(base, s)?, lambda, s)
    }

    /// `λ` midway through its admissible interval.
    pub fn midway_lambda(n: usize, a: f64, s: f64) -> f64 {
        let (lo, hi) = admissible_lambda(n, a, s);
        0.5 * (lo + hi)
    }

    pub fn rho(&self) -> f64 {
        contraction_moment(self.n, self.a, self.s)
    }

    /// `c_s`, the innovation contribution to `PV`.
    pub fn innovation_term(&self) -> f64 {
        innovation_scale(self.n, self.a, self.s) * self.abs_moment
    }

    /// `b = 1 − λ + c_s`.
    pub fn b(&self) -> f64 {
        1.0 - self.lambda + self.innovation_term()
    }

    pub fn v(&self, x: f64) -> f64 {
        1.0 + x.abs().powf(self.s)
    }
}

/// Admissible `λ` range `(E[(1 − θ)^s], 1)`.
pub fn admissible_lambda(n: usize, a: f64, s: f64) -> (f64, f64) {
    (contraction_moment(n, a, s), 1.0)
}

/// Radius `K` of the small set `C = [−K, K]`.
pub fn small_set_radius(spec: &DriftSpec) -> f64 {
    let n = spec.n as f64;
    if spec.s == 1.0 {
        let a = spec.a;
        return (1.0 - spec.lambda + n / (n + a) * spec.abs_moment) / (spec.lambda - a / (n + a));
    }
    ((1.0 - spec.lambda + spec.innovation_term()) / (spec.lambda - spec.rho())).powf(spec.s.recip())
}

/// The `n = 1` radius `(1 − λ + E|Y|/(1+a)) / (λ − a/(1+a))`.
pub fn feigin_tweedie_radius(a: f64, mean_abs_y: f64, lambda: f64) -> Result<f64> {
    let lo = a / (1.0 + a);
    if !(lambda > lo && lambda < 1.0) {
        return param(format!("lambda = {lambda} must lie in ({lo}, 1)"));
    }
    Ok((1.0 - lambda + mean_abs_y / (1.0 + a)) / (lambda - lo))
}

/// `E|Y|^s` under the normalized base; infinite moments are parameter errors.
pub fn base_abs_moment(base: &BaseMeasure<f64>, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return param("moment order must be positive");
    }
    let f = |y: f64| y.signum() * y.abs().powf(s + 1.0) / (s + 1.0);
    match *base.family() {
        BaseFamily::Uniform { lo, hi } => Ok((f(hi) - f(lo)) / (hi - lo)),
        BaseFamily::Discrete { ref atoms, ref probs } => Ok(atoms.iter().zip(probs).map(|(y, p)| p * y.abs().powf(s)).sum()),
        BaseFamily::Gaussian { mean, sd } => {
            let (lo, hi) = (mean - 40.0 * sd, mean + 40.0 * sd);
            let mut breaks = vec![lo];
            if lo < 0.0 && hi > 0.0 {
                breaks.push(0.0);
            }
            breaks.push(hi);
            let norm = (sd * (2.0 * std::f64::consts::PI).sqrt()).recip();
            let mut g = |y: f64| Ok(y.abs().powf(s) * norm * (-0.5 * ((y - mean) / sd).powi(2)).exp());
            Ok(integrate_breaks(&mut g, &breaks, 1e-12, 1e-10, 4000)?.value)
        }
        BaseFamily::Cauchy { loc, scale } => {
            if s >= 1.0 {
                return param("the Cauchy base has no finite absolute moment of order >= 1");
            }
            // y = loc + scale·tan φ maps the law to uniform φ on (−π/2, π/2)
            let half = std::f64::consts::FRAC_PI_2;
            let zero = (-loc / scale).atan();
            let mut g = |phi: f64| Ok((loc + scale * phi.tan()).abs().powf(s) / std::f64::consts::PI);
            let breaks = [-half, zero, half];
            Ok(integrate_breaks(&mut g, &breaks, 1e-9, 1e-9, 20_000)?.value)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftPoint {
    pub x: f64,
    pub pv: Estimate,
    pub bound: f64,
    pub in_small_set: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftReport {
    pub radius: f64,
    pub b: f64,
    pub points: Vec<DriftPoint>,
    pub pass: bool,
}

/// `points` equally spaced values covering `|x| ≤ 3K`.
pub fn drift_grid(spec: &DriftSpec, points: usize) -> Result<Vec<f64>> {
    let k = small_set_radius(spec);
    crate::kernel::linspace(-3.0 * k, 3.0 * k, points)
}

/// Monte Carlo check of `PV(x) ≤ λ V(x) + b 1_C(x)` on `x_grid`, where `PV`
/// is estimated from `mc_samples` one-step transitions; a point passes when
/// the estimate is at most the bound plus three standard errors.
pub fn drift_verify(
    spec: &DriftSpec,
    base: &BaseMeasure<f64>,
    x_grid: &[f64],
    mc_samples: usize,
    rng: &StreamRng,
) -> Result<DriftReport> {
    if mc_samples < 2 {
        return param("drift check needs at least two samples per point");
    }
    if (base.total_mass() - spec.a).abs() > 1e-12 * spec.a {
        return param("base total mass differs from the drift spec");
    }
    let kernel = FtKernel::new(spec.n, base.clone())?;
    let radius = small_set_radius(spec);
    let b = spec.b();
    let points = par_replicas(rng, x_grid.len(), |i, r| {
        let x = x_grid[i];
        let mut innov: Innovation<f64> = kernel.draw(r);
        let (mut s1, mut s2) = (0.0, 0.0);
        for k in 0..mc_samples {
            if k > 0 {
                innov.draw_into(&kernel, r);
            }
            let mut state = ScalarChainState::new(spec.n, x);
            state.apply(&innov);
            let v = spec.v(state.value);
            s1 += v;
            s2 += v * v;
        }
        let pv = Estimate::from_sums(s1, s2, mc_samples);
        let in_small_set = x.abs() <= radius;
        let bound = spec.lambda * spec.v(x) + if in_small_set { b } else { 0.0 };
        DriftPoint {
            x,
            pv,
            bound,
            in_small_set,
            pass: pv.value <= bound + 3.0 * pv.std_error,
        }
    });
    let pass = points.iter().all(|p| p.pass);
    Ok(DriftReport { radius, b, points, pass })
}

/// Absolute tolerance of [`t_density`].
pub const T_DENSITY_TOL: f64 = 1e-6;

/// Density at `y` of `T = Σ q_i y_i`, `q ~ Dirichlet(1, …, 1)`, for atoms
/// `y_1, …, y_n` (`n ≥ 2`, ties allowed). Zero outside the atom hull;
/// `y` equal to an atom is a singular point.
pub fn t_density(atoms: &[f64], y: f64) -> Result<f64> {
    t_density_with_tol(atoms, y, T_DENSITY_TOL)
}

pub fn t_density_with_tol(atoms: &[f64], y: f64, tol: f64) -> Result<f64> {
    let n = atoms.len();
    if n < 2 {
        return param("innovation density needs at least two atoms");
    }
    if !y.is_finite() || atoms.iter().any(|v| !v.is_finite()) {
        return param("atoms and evaluation point must be finite");
    }
    if atoms.contains(&y) {
        return Err(Error::SingularPoint(y));
    }
    let (lo, hi) = hull(atoms);
    if y < lo || y > hi {
        return Ok(0.0);
    }
    let d: Vec<f64> = atoms.iter().map(|v| v - y).collect();
    let t_star = (-d.iter().map(|v| v.abs().ln()).sum::<f64>() / n as f64).exp();
    let scaled: Vec<f64> = d.iter().map(|v| v * t_star).collect();
    let integral_tol = 0.5 * tol * std::f64::consts::PI / (n - 1) as f64;
    // t ∈ [0, t*]: Re Π 1/(1 + i t d_j); with t = t* τ the integrand is
    // t* Re Π 1/(1 + i τ c_j) for τ ∈ [0, 1]
    let head = integrate(
        |tau| Ok(t_star * re_prod_recip(1.0, tau, &scaled, 0)),
        0.0,
        1.0,
        integral_tol,
        0.0,
        2000,
    )?;
    // t = t*/u, u ∈ (0, 1]: t* u^{n−2} Re Π 1/(u + i c_j)
    let tail = integrate(
        |u| Ok(t_star * re_prod_recip(u, 1.0, &scaled, n - 2)),
        0.0,
        1.0,
        integral_tol,
        0.0,
        2000,
    )?;
    Ok(((n - 1) as f64 / std::f64::consts::PI * (head.value + tail.value)).max(0.0))
}

/// `u^power · Re Π_j 1/(u + i τ c_j)`.
#[inline]
fn re_prod_recip(u: f64, tau: f64, c: &[f64], power: usize) -> f64 {
    let (mut re, mut im) = (1.0, 0.0);
    for &cj in c {
        let b = tau * cj;
        let den = u * u + b * b;
        // (re + i im) · (u − i b) / den
        let nr = (re * u + im * b) / den;
        let ni = (im * u - re * b) / den;
        re = nr;
        im = ni;
    }
    re * u.powi(power as i32)
}

fn hull(atoms: &[f64]) -> (f64, f64) {
    atoms
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn ln_beta(p: f64, q: f64) -> f64 {
    ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)
}

fn beta_pdf(t: f64, p: f64, q: f64) -> f64 {
    ((p - 1.0) * t.ln() + (q - 1.0) * (1.0 - t).ln() - ln_beta(p, q)).exp()
}

/// `f(z | x)` conditional on the Pólya block `atoms`.
pub fn conditional_transition_density(atoms: &[f64], a: f64, x: f64, z: f64) -> Result<f64> {
    let n = atoms.len();
    if n < 2 {
        return param("transition density needs n >= 2");
    }
    let (lo, hi) = hull(atoms);
    let nf = n as f64;
    if lo == hi {
        // T = c almost surely, so z = θ c + (1 − θ) x
        let c = lo;
        if c == x {
            return if z == x { Err(Error::SingularPoint(z)) } else { Ok(0.0) };
        }
        let t = (z - x) / (c - x);
        return Ok(if t > 0.0 && t < 1.0 { beta_pdf(t, nf, a) / (c - x).abs() } else { 0.0 });
    }
    if z == x {
        // ∫ t^{n−2}(1−t)^{a−1} dt / B(n, a) = (n − 1 + a)/(n − 1)
        return Ok(t_density(atoms, x)? * (nf - 1.0 + a) / (nf - 1.0));
    }
    // with w(t) = x + (z − x)/t, 1/t = (w − x)/(z − x) is affine in w
    let r = |w: f64| (w - x) / (z - x);
    let (r1, r2) = (r(lo), r(hi));
    let r_lo = r1.min(r2).max(1.0);
    let r_hi = r1.max(r2);
    if !(r_hi > r_lo) {
        return Ok(0.0);
    }
    // s = (1 − t)^a absorbs the (1 − t)^{a−1} factor
    let s_of = |rr: f64| (a * (-(rr.recip())).ln_1p()).exp();
    let mut breaks: Vec<f64> = atoms
        .iter()
        .map(|&y| r(y))
        .filter(|&rr| rr > r_lo && rr < r_hi)
        .map(s_of)
        .collect();
    breaks.push(s_of(r_lo));
    breaks.push(s_of(r_hi));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let inner_tol = T_DENSITY_TOL;
    let mut g = |s: f64| -> Result<f64> {
        let t = -(s.ln() / a).exp_m1();
        if !(t > 0.0) {
            return Ok(0.0);
        }
        let w = x + (z - x) / t;
        Ok(t.powi(n as i32 - 2) * t_density_with_tol(atoms, w, inner_tol)?)
    };
    let q = integrate_breaks(&mut g, &breaks, 1e-5, 1e-5, 400)?;
    Ok((q.value / a * (-ln_beta(nf, a)).exp()).max(0.0))
}

const SINGULAR_RETRIES: usize = 64;

fn block_with_retry<T>(
    base: &BaseMeasure<f64>,
    n: usize,
    rng: &mut StreamRng,
    mut eval: impl FnMut(&[f64]) -> Result<T>,
) -> Result<T> {
    let mut last = None;
    for _ in 0..SINGULAR_RETRIES {
        let block = polya_block(base, n, rng)?;
        match eval(&block) {
            Err(Error::SingularPoint(p)) => last = Some(p),
            other => return other,
        }
    }
    Err(Error::SingularPoint(last.unwrap_or(f64::NAN)))
}

/// Monte Carlo estimate of `f(z | x)` over `mc_outer` Pólya blocks drawn
/// from `base`; blocks hitting a singular point are redrawn.
pub fn transition_density(
    n: usize,
    x: f64,
    z: f64,
    base: &BaseMeasure<f64>,
    mc_outer: usize,
    rng: &StreamRng,
) -> Result<Estimate> {
    Ok(transition_density_grid(n, x, &[z], base, mc_outer, rng)?[0])
}

/// [`transition_density`] on many `z` with every block shared across `z`.
pub fn transition_density_grid(
    n: usize,
    x: f64,
    zs: &[f64],
    base: &BaseMeasure<f64>,
    mc_outer: usize,
    rng: &StreamRng,
) -> Result<Vec<Estimate>> {
    if n < 2 {
        return param("transition density needs n >= 2");
    }
    if mc_outer < 2 {
        return param("need at least two outer samples");
    }
    let a = base.total_mass();
    let rows: Vec<Result<Vec<f64>>> = par_replicas(rng, mc_outer, |_, r| {
        block_with_retry(base, n, r, |block| {
            zs.iter().map(|&z| conditional_transition_density(block, a, x, z)).collect()
        })
    });
    let mut s1 = vec![0.0; zs.len()];
    let mut s2 = vec![0.0; zs.len()];
    for row in rows {
        for (j, v) in row?.into_iter().enumerate() {
            s1[j] += v;
            s2[j] += v * v;
        }
    }
    Ok(s1.iter().zip(&s2).map(|(&a, &b)| Estimate::from_sums(a, b, mc_outer)).collect())
}

/// Minorization constant `ε(n) ≥ n/(a + n) − a K_f K / (n − 1)`, where
/// `K_f` bounds `|f_T'|` and `K` is the small-set radius. With a reference
/// `n0 < n`, `K` is replaced by the `n`-uniform radius
/// `(1 − λ + E|Y|)/(λ − a/(a + n0))`. The value is returned even when
/// negative.
pub fn epsilon_lower_bound(n: usize, a: f64, k_deriv: f64, lambda: f64, mean_y: f64, n0: Option<usize>) -> Result<f64> {
    if n < 2 {
        return param("the minorization bound needs n >= 2");
    }
    if !(k_deriv >= 0.0) {
        return param("derivative bound must be nonnegative");
    }
    let nf = n as f64;
    let radius = match n0 {
        None => small_set_radius(&DriftSpec::new(n, a, mean_y, lambda)?),
        Some(n0) => {
            if n0 >= n {
                return param("reference n0 must be smaller than n");
            }
            let lo = a / (a + n0 as f64);
            if !(lambda > lo && lambda < 1.0) {
                return param(format!("lambda = {lambda} must lie in ({lo}, 1)"));
            }
            (1.0 - lambda + mean_y) / (lambda - lo)
        }
    };
    Ok(nf / (a + nf) - a * k_deriv * radius / (nf - 1.0))
}

/// `(1 − ε)^m`.
pub fn tv_decay_bound(epsilon: f64, m: u32) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return param(format!("epsilon must lie in (0, 1], got {epsilon}"));
    }
    Ok((1.0 - epsilon).powi(m as i32))
}

/// Stationary sample of the mean functional by stick-breaking.
pub fn stationary_mean_sample(base: &BaseMeasure<f64>, samples: usize, rng: &StreamRng) -> Vec<f64> {
    par_replicas(rng, samples, |_, r| dp_functional_sample(base, |y| y, 1e-12, r))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TvPoint {
    pub m: usize,
    pub tv: f64,
}

/// Histogram TV distance between the time-`m` law of the mean chain (from
/// `replicas` runs started at `m0`) and `reference`, at each checkpoint.
pub fn empirical_tv_curve(
    kernel: &FtKernel<f64>,
    m0: f64,
    checkpoints: &[usize],
    replicas: usize,
    reference: &[f64],
    bins: usize,
    rng: &StreamRng,
) -> Result<Vec<TvPoint>> {
    let mut sorted = checkpoints.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let last = sorted.last().copied().unwrap_or(0);
    let paths: Vec<Vec<f64>> = par_replicas(rng, replicas, |_, r| {
        let mut state = ScalarChainState::new(kernel.n(), m0);
        let mut out = Vec::with_capacity(sorted.len());
        let mut next = 0;
        let mut innov: Option<Innovation<f64>> = None;
        for m in 0..=last {
            if m > 0 {
                match innov.as_mut() {
                    Some(i) => i.draw_into(kernel, r),
                    None => innov = Some(kernel.draw(r)),
                }
                state.apply(innov.as_ref().expect("drawn"));
            }
            if next < sorted.len() && sorted[next] == m {
                out.push(state.value);
                next += 1;
            }
        }
        out
    });
    sorted
        .par_iter()
        .enumerate()
        .map(|(j, &m)| {
            let xs: Vec<f64> = paths.iter().map(|p| p[j]).collect();
            Ok(TvPoint {
                m,
                tv: histogram_tv(&xs, reference, bins)?,
            })
        })
        .collect()
}
