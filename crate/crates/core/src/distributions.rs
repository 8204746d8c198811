//! Distribution registry, log densities, samplers and scalar builtins.
//!
//! Parameterizations follow JAGS: `dnorm(mean, precision)`,
//! `dgamma(shape, rate)`, `dbin(p, n)`. The data-generation side uses
//! [`NormalBySd`], which must be converted explicitly with
//! [`NormalBySd::to_precision_form`].
//!
//! Random-stream consumption per draw (stable within a release):
//! - Normal: ziggurat, one `u64` per attempt (about 1.2% of draws retry).
//! - Uniform, Bernoulli: one `u64`.
//! - Gamma: Marsaglia–Tsang; shape < 1 draws a Gamma(shape + 1) variate and
//!   one extra uniform for the `U^(1/shape)` boost.
//! - Beta: two Gamma draws. Binomial, Poisson, Exponential: `rand_distr`
//!   rejection samplers.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::rng::RandomStream;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{dist}: {message}")]
pub struct ParamError {
    pub dist: &'static str,
    pub message: String,
}

fn param_err(dist: &'static str, message: impl Into<String>) -> ParamError {
    ParamError {
        dist,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{op} is undefined for arguments {args:?}")]
    Domain { op: &'static str, args: Vec<f64> },
    #[error("{op} produced NaN from {args:?}")]
    NotANumber { op: &'static str, args: Vec<f64> },
    #[error(transparent)]
    InvalidParameter(#[from] ParamError),
    #[error("while evaluating {node}: {source}")]
    AtNode {
        node: String,
        #[source]
        source: Box<EvalError>,
    },
}

impl EvalError {
    pub fn at(self, node: &str) -> EvalError {
        match self {
            e @ EvalError::AtNode { .. } => e,
            e => EvalError::AtNode {
                node: node.to_string(),
                source: Box::new(e),
            },
        }
    }
}

/// Distribution families known to the model language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistKind {
    Normal,
    Uniform,
    Gamma,
    Beta,
    Bernoulli,
    Binomial,
    Poisson,
    Exponential,
}

impl DistKind {
    pub const ALL: [DistKind; 8] = [
        DistKind::Normal,
        DistKind::Uniform,
        DistKind::Gamma,
        DistKind::Beta,
        DistKind::Bernoulli,
        DistKind::Binomial,
        DistKind::Poisson,
        DistKind::Exponential,
    ];

    pub fn from_name(name: &str) -> Option<DistKind> {
        DistKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            DistKind::Normal => "dnorm",
            DistKind::Uniform => "dunif",
            DistKind::Gamma => "dgamma",
            DistKind::Beta => "dbeta",
            DistKind::Bernoulli => "dbern",
            DistKind::Binomial => "dbin",
            DistKind::Poisson => "dpois",
            DistKind::Exponential => "dexp",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            DistKind::Normal => &["mean", "precision"],
            DistKind::Uniform => &["lower", "upper"],
            DistKind::Gamma => &["shape", "rate"],
            DistKind::Beta => &["a", "b"],
            DistKind::Bernoulli => &["p"],
            DistKind::Binomial => &["p", "n"],
            DistKind::Poisson => &["lambda"],
            DistKind::Exponential => &["rate"],
        }
    }

    pub fn arity(self) -> usize {
        self.param_names().len()
    }

    pub fn is_discrete(self) -> bool {
        matches!(
            self,
            DistKind::Bernoulli | DistKind::Binomial | DistKind::Poisson
        )
    }

    /// Validate `args` and build the distribution.
    pub fn build(self, args: &[f64]) -> Result<DistributionSpec, ParamError> {
        let name = self.name();
        if args.len() != self.arity() {
            return Err(param_err(
                name,
                format!("expected {} arguments, got {}", self.arity(), args.len()),
            ));
        }
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(param_err(
                    name,
                    format!("{what} must be positive and finite, got {v}"),
                ))
            }
        };
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(param_err(name, format!("{what} must be finite, got {v}")))
            }
        };
        let probability = |v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(param_err(name, format!("p must lie in [0, 1], got {v}")))
            }
        };
        Ok(match self {
            DistKind::Normal => DistributionSpec::Normal {
                mean: finite(args[0], "mean")?,
                precision: positive(args[1], "precision")?,
            },
            DistKind::Uniform => {
                let (lower, upper) = (finite(args[0], "lower")?, finite(args[1], "upper")?);
                if lower >= upper {
                    return Err(param_err(
                        name,
                        format!("lower {lower} must be below upper {upper}"),
                    ));
                }
                DistributionSpec::Uniform { lower, upper }
            }
            DistKind::Gamma => DistributionSpec::Gamma {
                shape: positive(args[0], "shape")?,
                rate: positive(args[1], "rate")?,
            },
            DistKind::Beta => DistributionSpec::Beta {
                a: positive(args[0], "a")?,
                b: positive(args[1], "b")?,
            },
            DistKind::Bernoulli => DistributionSpec::Bernoulli {
                p: probability(args[0])?,
            },
            DistKind::Binomial => {
                let n = args[1];
                if !(n >= 0.0 && n.fract() == 0.0 && n < 2f64.powi(53)) {
                    return Err(param_err(
                        name,
                        format!("n must be a non-negative integer, got {n}"),
                    ));
                }
                DistributionSpec::Binomial {
                    p: probability(args[0])?,
                    n: n as u64,
                }
            }
            DistKind::Poisson => DistributionSpec::Poisson {
                lambda: positive(args[0], "lambda")?,
            },
            DistKind::Exponential => DistributionSpec::Exponential {
                rate: positive(args[0], "rate")?,
            },
        })
    }
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SupportDescriptor {
    RealLine,
    Positive,
    Interval { lower: f64, upper: f64 },
    NonNegativeIntegers,
    IntegerRange { lower: u64, upper: u64 },
    Binary,
}

impl SupportDescriptor {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            SupportDescriptor::RealLine => x.is_finite(),
            SupportDescriptor::Positive => x > 0.0 && x.is_finite(),
            SupportDescriptor::Interval { lower, upper } => (lower..=upper).contains(&x),
            SupportDescriptor::NonNegativeIntegers => x >= 0.0 && x.fract() == 0.0 && x.is_finite(),
            SupportDescriptor::IntegerRange { lower, upper } => {
                x.fract() == 0.0 && x >= lower as f64 && x <= upper as f64
            }
            SupportDescriptor::Binary => x == 0.0 || x == 1.0,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            SupportDescriptor::NonNegativeIntegers
                | SupportDescriptor::IntegerRange { .. }
                | SupportDescriptor::Binary
        )
    }
}

/// A fully parameterized distribution. Construct through [`DistKind::build`]
/// (validating) or directly when the parameters are known to be valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionSpec {
    Normal { mean: f64, precision: f64 },
    Uniform { lower: f64, upper: f64 },
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    Bernoulli { p: f64 },
    Binomial { p: f64, n: u64 },
    Poisson { lambda: f64 },
    Exponential { rate: f64 },
}

/// Generator-side normal parameterized by standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalBySd {
    pub mean: f64,
    pub sd: f64,
}

impl NormalBySd {
    pub fn to_precision_form(self) -> Result<DistributionSpec, ParamError> {
        if !(self.sd > 0.0 && self.sd.is_finite()) {
            return Err(param_err(
                "normal",
                format!("sd must be positive, got {}", self.sd),
            ));
        }
        DistKind::Normal.build(&[self.mean, 1.0 / (self.sd * self.sd)])
    }
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

impl DistributionSpec {
    pub fn kind(&self) -> DistKind {
        match self {
            DistributionSpec::Normal { .. } => DistKind::Normal,
            DistributionSpec::Uniform { .. } => DistKind::Uniform,
            DistributionSpec::Gamma { .. } => DistKind::Gamma,
            DistributionSpec::Beta { .. } => DistKind::Beta,
            DistributionSpec::Bernoulli { .. } => DistKind::Bernoulli,
            DistributionSpec::Binomial { .. } => DistKind::Binomial,
            DistributionSpec::Poisson { .. } => DistKind::Poisson,
            DistributionSpec::Exponential { .. } => DistKind::Exponential,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            DistributionSpec::Normal { mean, precision } => vec![mean, precision],
            DistributionSpec::Uniform { lower, upper } => vec![lower, upper],
            DistributionSpec::Gamma { shape, rate } => vec![shape, rate],
            DistributionSpec::Beta { a, b } => vec![a, b],
            DistributionSpec::Bernoulli { p } => vec![p],
            DistributionSpec::Binomial { p, n } => vec![p, n as f64],
            DistributionSpec::Poisson { lambda } => vec![lambda],
            DistributionSpec::Exponential { rate } => vec![rate],
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.kind().build(&self.params()).map(|_| ())
    }

    pub fn log_density(&self, x: f64) -> Result<f64, ParamError> {
        self.validate()?;
        Ok(self.log_density_unchecked(x))
    }

    /// Log density (or mass) at `x`; `-inf` outside the support. Parameters
    /// are assumed valid.
    pub fn log_density_unchecked(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NEG_INFINITY;
        }
        match *self {
            DistributionSpec::Normal { mean, precision } => {
                let d = x - mean;
                0.5 * precision.ln() - 0.5 * LN_2PI - 0.5 * precision * d * d
            }
            DistributionSpec::Uniform { lower, upper } => {
                if (lower..=upper).contains(&x) {
                    -(upper - lower).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            DistributionSpec::Gamma { shape, rate } => {
                if x > 0.0 && x.is_finite() {
                    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)
                } else {
                    f64::NEG_INFINITY
                }
            }
            DistributionSpec::Beta { a, b } => {
                if (0.0..=1.0).contains(&x) {
                    xlogy(a - 1.0, x) + xlogy(b - 1.0, 1.0 - x) - ln_beta(a, b)
                } else {
                    f64::NEG_INFINITY
                }
            }
            DistributionSpec::Bernoulli { p } => {
                if x == 1.0 {
                    p.ln()
                } else if x == 0.0 {
                    (1.0 - p).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            DistributionSpec::Binomial { p, n } => {
                let nf = n as f64;
                if x.fract() != 0.0 || x < 0.0 || x > nf {
                    return f64::NEG_INFINITY;
                }
                ln_gamma(nf + 1.0) - ln_gamma(x + 1.0) - ln_gamma(nf - x + 1.0)
                    + xlogy(x, p)
                    + xlogy(nf - x, 1.0 - p)
            }
            DistributionSpec::Poisson { lambda } => {
                if x.fract() != 0.0 || x < 0.0 || !x.is_finite() {
                    return f64::NEG_INFINITY;
                }
                xlogy(x, lambda) - lambda - ln_gamma(x + 1.0)
            }
            DistributionSpec::Exponential { rate } => {
                if x >= 0.0 && x.is_finite() {
                    rate.ln() - rate * x
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn support(&self) -> SupportDescriptor {
        match *self {
            DistributionSpec::Normal { .. } => SupportDescriptor::RealLine,
            DistributionSpec::Uniform { lower, upper } => {
                SupportDescriptor::Interval { lower, upper }
            }
            DistributionSpec::Gamma { .. } | DistributionSpec::Exponential { .. } => {
                SupportDescriptor::Positive
            }
            DistributionSpec::Beta { .. } => SupportDescriptor::Interval {
                lower: 0.0,
                upper: 1.0,
            },
            DistributionSpec::Bernoulli { .. } => SupportDescriptor::Binary,
            DistributionSpec::Binomial { n, .. } => {
                SupportDescriptor::IntegerRange { lower: 0, upper: n }
            }
            DistributionSpec::Poisson { .. } => SupportDescriptor::NonNegativeIntegers,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistributionSpec::Normal { mean, .. } => mean,
            DistributionSpec::Uniform { lower, upper } => 0.5 * (lower + upper),
            DistributionSpec::Gamma { shape, rate } => shape / rate,
            DistributionSpec::Beta { a, b } => a / (a + b),
            DistributionSpec::Bernoulli { p } => p,
            DistributionSpec::Binomial { p, n } => n as f64 * p,
            DistributionSpec::Poisson { lambda } => lambda,
            DistributionSpec::Exponential { rate } => 1.0 / rate,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DistributionSpec::Normal { precision, .. } => 1.0 / precision,
            DistributionSpec::Uniform { lower, upper } => (upper - lower).powi(2) / 12.0,
            DistributionSpec::Gamma { shape, rate } => shape / (rate * rate),
            DistributionSpec::Beta { a, b } => a * b / ((a + b).powi(2) * (a + b + 1.0)),
            DistributionSpec::Bernoulli { p } => p * (1.0 - p),
            DistributionSpec::Binomial { p, n } => n as f64 * p * (1.0 - p),
            DistributionSpec::Poisson { lambda } => lambda,
            DistributionSpec::Exponential { rate } => 1.0 / (rate * rate),
        }
    }

    pub fn sample(&self, rng: &mut RandomStream) -> Result<f64, ParamError> {
        self.validate()?;
        Ok(self.sample_unchecked(rng))
    }

    pub fn sample_unchecked(&self, rng: &mut RandomStream) -> f64 {
        match *self {
            DistributionSpec::Normal { mean, precision } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + z / precision.sqrt()
            }
            DistributionSpec::Uniform { lower, upper } => lower + (upper - lower) * rng.uniform(),
            DistributionSpec::Gamma { shape, rate } => sample_gamma(shape, rng) / rate,
            DistributionSpec::Beta { a, b } => {
                let x = sample_gamma(a, rng);
                let y = sample_gamma(b, rng);
                if x + y > 0.0 {
                    x / (x + y)
                } else if a >= b {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::Bernoulli { p } => {
                if rng.uniform() < p {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::Binomial { p, n } => rand_distr::Binomial::new(n, p)
                .expect("validated binomial")
                .sample(rng) as f64,
            DistributionSpec::Poisson { lambda } => rand_distr::Poisson::new(lambda)
                .expect("validated poisson")
                .sample(rng),
            DistributionSpec::Exponential { rate } => rand_distr::Exp::new(rate)
                .expect("validated exponential")
                .sample(rng),
        }
    }
}

/// Marsaglia–Tsang Gamma(shape, 1) sampler with the `U^(1/shape)` boost for
/// shape < 1.
pub fn sample_gamma(shape: f64, rng: &mut RandomStream) -> f64 {
    if shape < 1.0 {
        let g = sample_gamma(shape + 1.0, rng);
        let u = rng.uniform();
        // exp/ln form keeps tiny shapes from overflowing the exponent.
        return g * (u.ln() / shape).exp();
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (x, v) = loop {
            let x: f64 = rng.sample(StandardNormal);
            let v = 1.0 + c * x;
            if v > 0.0 {
                break (x, v * v * v);
            }
        };
        let u = rng.uniform();
        if u < 1.0 - 0.0331 * x.powi(4) || u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Scalar functions callable from model expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Pow,
    Exp,
    Log,
    Sqrt,
    Abs,
    Logit,
    Ilogit,
    Min,
    Max,
    Step,
}

impl Builtin {
    pub const ALL: [Builtin; 10] = [
        Builtin::Pow,
        Builtin::Exp,
        Builtin::Log,
        Builtin::Sqrt,
        Builtin::Abs,
        Builtin::Logit,
        Builtin::Ilogit,
        Builtin::Min,
        Builtin::Max,
        Builtin::Step,
    ];

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Pow => "pow",
            Builtin::Exp => "exp",
            Builtin::Log => "log",
            Builtin::Sqrt => "sqrt",
            Builtin::Abs => "abs",
            Builtin::Logit => "logit",
            Builtin::Ilogit => "ilogit",
            Builtin::Min => "min",
            Builtin::Max => "max",
            Builtin::Step => "step",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Pow | Builtin::Min | Builtin::Max => 2,
            _ => 1,
        }
    }

    pub fn apply(self, args: &[f64]) -> Result<f64, EvalError> {
        let name = self.name();
        let domain = || EvalError::Domain {
            op: name,
            args: args.to_vec(),
        };
        if args.len() != self.arity() {
            return Err(domain());
        }
        let x = args[0];
        let value = match self {
            Builtin::Pow => return checked_pow(x, args[1]),
            Builtin::Exp => x.exp(),
            Builtin::Log => {
                if x <= 0.0 {
                    return Err(domain());
                }
                x.ln()
            }
            Builtin::Sqrt => {
                if x < 0.0 {
                    return Err(domain());
                }
                x.sqrt()
            }
            Builtin::Abs => x.abs(),
            Builtin::Logit => {
                if !(x > 0.0 && x < 1.0) {
                    return Err(domain());
                }
                (x / (1.0 - x)).ln()
            }
            Builtin::Ilogit => ilogit(x),
            Builtin::Min => x.min(args[1]),
            Builtin::Max => x.max(args[1]),
            Builtin::Step => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        if value.is_nan() {
            return Err(EvalError::NotANumber {
                op: name,
                args: args.to_vec(),
            });
        }
        Ok(value)
    }
}

pub fn ilogit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `base ^ exponent`, rejecting `0 ^ negative` and negative bases with
/// non-integer exponents.
pub fn checked_pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if (base == 0.0 && exponent < 0.0) || (base < 0.0 && exponent.fract() != 0.0) {
        return Err(EvalError::Domain {
            op: "pow",
            args: vec![base, exponent],
        });
    }
    let v = base.powf(exponent);
    if v.is_nan() {
        return Err(EvalError::NotANumber {
            op: "pow",
            args: vec![base, exponent],
        });
    }
    Ok(v)
}

pub fn apply_builtin(name: &str, args: &[f64]) -> Result<f64, EvalError> {
    match Builtin::from_name(name) {
        Some(b) => b.apply(args),
        None => Err(EvalError::Domain {
            op: "unknown function",
            args: args.to_vec(),
        }),
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / 2f64.sqrt())
}
