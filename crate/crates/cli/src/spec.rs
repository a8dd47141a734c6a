//! Parsers for the compact `family:params` strings accepted by the flags.

use anyhow::{anyhow, bail, Context, Result};
use mvchain::kernel::{GaussianKernel, Kernel, LaplaceKernel};
use mvchain::measure::BaseMeasure;

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("`{t}` is not a number")))
        .collect()
}

fn usage(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(crate::UsageError(format!("{e:#}")))
}

fn split_family(s: &str) -> (&str, &str) {
    s.split_once(':').unwrap_or((s, ""))
}

fn exactly<const N: usize>(what: &str, params: &str) -> Result<[f64; N]> {
    let v = numbers(params).with_context(|| format!("parameters of `{what}`"))?;
    v.try_into().map_err(|v: Vec<f64>| anyhow!("`{what}` takes {N} parameters, got {}", v.len()))
}

/// `uniform:LO,HI`, `gaussian:MEAN,SD`, `cauchy:LOC,SCALE` or
/// `discrete:X1,X2,.../P1,P2,...`, with total mass `a`.
pub fn base(s: &str, a: f64) -> Result<BaseMeasure<f64>> {
    base_inner(s, a).map_err(usage)
}

fn base_inner(s: &str, a: f64) -> Result<BaseMeasure<f64>> {
    let (family, params) = split_family(s);
    let m = match family {
        "uniform" => {
            let [lo, hi] = exactly::<2>(family, params)?;
            BaseMeasure::uniform(lo, hi, a)
        }
        "gaussian" | "normal" => {
            let [mean, sd] = exactly::<2>(family, params)?;
            BaseMeasure::gaussian(mean, sd, a)
        }
        "cauchy" => {
            let [loc, scale] = exactly::<2>(family, params)?;
            BaseMeasure::cauchy(loc, scale, a)
        }
        "discrete" => {
            let (xs, ps) = params.split_once('/').ok_or_else(|| anyhow!("discrete base needs ATOMS/PROBS"))?;
            BaseMeasure::discrete(numbers(xs)?, numbers(ps)?, a)
        }
        other => bail!("unknown base family `{other}`"),
    };
    m.with_context(|| format!("base `{s}`"))
}

/// `gaussian:SD` or `laplace:SCALE`.
pub fn kernel(s: &str) -> Result<Box<dyn Kernel<f64>>> {
    kernel_inner(s).map_err(usage)
}

fn kernel_inner(s: &str) -> Result<Box<dyn Kernel<f64>>> {
    let (family, params) = split_family(s);
    let k: Box<dyn Kernel<f64>> = match family {
        "gaussian" | "normal" => {
            let [sd] = exactly::<1>(family, params)?;
            Box::new(GaussianKernel::new(sd)?)
        }
        "laplace" => {
            let [scale] = exactly::<1>(family, params)?;
            Box::new(LaplaceKernel::new(scale)?)
        }
        other => bail!("unknown kernel `{other}`"),
    };
    Ok(k)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Functional {
    Identity,
    Square,
    Abs,
    Power(f64),
    Indicator(f64),
}

impl Functional {
    pub fn parse(s: &str) -> Result<Self> {
        Self::parse_inner(s).map_err(usage)
    }

    fn parse_inner(s: &str) -> Result<Self> {
        let (name, params) = split_family(s);
        Ok(match name {
            "identity" | "id" => Self::Identity,
            "square" => Self::Square,
            "abs" => Self::Abs,
            "power" => Self::Power(exactly::<1>(name, params)?[0]),
            "indicator" => Self::Indicator(exactly::<1>(name, params)?[0]),
            other => bail!("unknown functional `{other}`"),
        })
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Square => x * x,
            Self::Abs => x.abs(),
            Self::Power(p) => x.powf(p),
            Self::Indicator(c) => f64::from(u8::from(x <= c)),
        }
    }
}

/// `LO,HI,POINTS` (or `LO,HI` with `default_points`).
pub fn grid(s: &str, default_points: usize) -> Result<(f64, f64, usize)> {
    grid_inner(s, default_points).map_err(usage)
}

fn grid_inner(s: &str, default_points: usize) -> Result<(f64, f64, usize)> {
    let v = numbers(s).with_context(|| format!("grid `{s}`"))?;
    let points = match v.len() {
        2 => default_points,
        3 if v[2] >= 2.0 && v[2].fract() == 0.0 => v[2] as usize,
        _ => bail!("grid must be LO,HI[,POINTS] with an integer POINTS >= 2, got `{s}`"),
    };
    if v[1] <= v[0] || v.iter().any(|x| x.is_nan()) {
        bail!("grid needs LO < HI, got `{s}`");
    }
    Ok((v[0], v[1], points))
}

/// One or more order vectors separated by `;`.
pub fn order_vectors(s: &str) -> Result<Vec<Vec<usize>>> {
    order_vectors_inner(s).map_err(usage)
}

fn order_vectors_inner(s: &str) -> Result<Vec<Vec<usize>>> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.split(',')
                .map(|x| x.trim().parse::<usize>().with_context(|| format!("order `{x}` is not a nonnegative integer")))
                .collect()
        })
        .collect()
}
