//! Strictly increasing scalar functions and their divided differences.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Below this relative gap `|f(a) - f(b)|` the divided difference switches
/// to its limit `1 / f'((a + b) / 2)`.
pub const DIVIDED_DIFFERENCE_THRESHOLD: f64 = 1e-8;

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Open interval `(lo, hi)`; infinite ends allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub fn contains(&self, u: f64) -> bool {
        u > self.lo && u < self.hi
    }
}

/// Strictly increasing function with its derivative.
#[derive(Clone)]
pub enum ScalarFn {
    /// `slope * u + offset`, `slope > 0`.
    Affine { slope: f64, offset: f64 },
    /// `ln u + offset` on `u > 0`.
    Log { offset: f64 },
    /// `u^p` on `u > 0`, `p > 0`.
    Power { p: f64 },
    Custom {
        name: String,
        value: Func,
        derivative: Func,
        domain: Interval,
    },
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl ScalarFn {
    pub fn identity() -> Self {
        ScalarFn::Affine {
            slope: 1.0,
            offset: 0.0,
        }
    }

    pub fn log() -> Self {
        ScalarFn::Log { offset: 0.0 }
    }

    pub fn power(p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "power exponent must be positive, got {p}"
            )));
        }
        Ok(ScalarFn::Power { p })
    }

    pub fn custom(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: Interval,
    ) -> Self {
        ScalarFn::Custom {
            name: name.into(),
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            domain,
        }
    }

    /// Parses the CLI names `identity`, `log` and `power <p>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split_whitespace().collect();
        match parts.as_slice() {
            ["identity"] => Ok(Self::identity()),
            ["log"] => Ok(Self::log()),
            ["power", p] => {
                let p = p
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad power exponent `{p}`: {e}")))?;
                Self::power(p)
            }
            _ => Err(Error::Config(format!(
                "unknown function `{spec}` (expected identity, log, or power <p>)"
            ))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ScalarFn::Affine { slope, offset } if *slope == 1.0 && *offset == 0.0 => {
                "identity".into()
            }
            ScalarFn::Affine { slope, offset } => format!("affine({slope}, {offset})"),
            ScalarFn::Log { offset } if *offset == 0.0 => "log".into(),
            ScalarFn::Log { offset } => format!("log+{offset}"),
            ScalarFn::Power { p } => format!("power {p}"),
            ScalarFn::Custom { name, .. } => name.clone(),
        }
    }

    pub fn domain(&self) -> Interval {
        match self {
            ScalarFn::Affine { .. } => Interval::REAL_LINE,
            ScalarFn::Log { .. } | ScalarFn::Power { .. } => Interval::POSITIVE,
            ScalarFn::Custom { domain, .. } => *domain,
        }
    }

    fn guard(&self, u: f64) -> Result<()> {
        if self.domain().contains(u) {
            Ok(())
        } else {
            Err(Error::ScalarDomain {
                function: self.name(),
                value: u,
            })
        }
    }

    pub fn value(&self, u: f64) -> Result<f64> {
        self.guard(u)?;
        Ok(self.value_unchecked(u))
    }

    pub fn derivative(&self, u: f64) -> Result<f64> {
        self.guard(u)?;
        Ok(match self {
            ScalarFn::Affine { slope, .. } => *slope,
            ScalarFn::Log { .. } => 1.0 / u,
            ScalarFn::Power { p } => p * u.powf(p - 1.0),
            ScalarFn::Custom { derivative, .. } => derivative(u),
        })
    }

    pub(crate) fn value_unchecked(&self, u: f64) -> f64 {
        match self {
            ScalarFn::Affine { slope, offset } => slope * u + offset,
            ScalarFn::Log { offset } => u.ln() + offset,
            ScalarFn::Power { p } => u.powf(*p),
            ScalarFn::Custom { value, .. } => value(u),
        }
    }
}

/// `K_f(a, b) = (a - b) / (f(a) - f(b))`, positive and symmetric for
/// increasing `f`, with limit `1 / f'` on the diagonal.
///
/// Arguments are ordered before evaluation so the result is bitwise
/// symmetric. Affine and logarithmic `f` use closed forms (`1/slope` and
/// the logarithmic mean); everything else uses the generic quotient with
/// the midpoint-derivative limit below [`DIVIDED_DIFFERENCE_THRESHOLD`].
pub fn divided_difference(f: &ScalarFn, a: f64, b: f64) -> Result<f64> {
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    f.guard(a)?;
    f.guard(b)?;
    match f {
        ScalarFn::Affine { slope, .. } => {
            if *slope > 0.0 {
                Ok(1.0 / slope)
            } else {
                Err(Error::NotStrictlyIncreasing {
                    function: f.name(),
                    at: a,
                })
            }
        }
        ScalarFn::Log { .. } => Ok(log_mean_ordered(a, b)),
        _ => {
            let fa = f.value_unchecked(a);
            let fb = f.value_unchecked(b);
            let gap = fa - fb;
            let scale = 1f64.max(fa.abs()).max(fb.abs());
            let k = if gap.abs() <= DIVIDED_DIFFERENCE_THRESHOLD * scale {
                let mid = 0.5 * (a + b);
                let d = f.derivative(mid)?;
                if !(d > 0.0) {
                    return Err(Error::NotStrictlyIncreasing {
                        function: f.name(),
                        at: mid,
                    });
                }
                1.0 / d
            } else {
                (a - b) / gap
            };
            if k > 0.0 && k.is_finite() {
                Ok(k)
            } else {
                Err(Error::NotStrictlyIncreasing {
                    function: f.name(),
                    at: a,
                })
            }
        }
    }
}

/// Logarithmic mean `(a - b) / (ln a - ln b)`, equal to `a` when `a == b`.
pub fn log_mean(a: f64, b: f64) -> Result<f64> {
    for v in [a, b] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::ScalarDomain {
                function: "log_mean".into(),
                value: v,
            });
        }
    }
    Ok(if a >= b {
        log_mean_ordered(a, b)
    } else {
        log_mean_ordered(b, a)
    })
}

// a >= b > 0
fn log_mean_ordered(a: f64, b: f64) -> f64 {
    if a == b {
        return a;
    }
    let d = a - b;
    // ln(a/b) = ln_1p((a-b)/b) keeps full relative precision for close
    // arguments where ln a - ln b cancels.
    d / (d / b).ln_1p()
}
