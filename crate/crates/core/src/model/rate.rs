use std::fmt;

use crate::error::{Error, Result};

/// Piecewise-linear table of `(x, value)` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    xs: Vec<f64>,
    values: Vec<f64>,
    extrapolate: bool,
}

impl Table {
    /// Nodes must be strictly increasing in `x`, values nonnegative and finite.
    pub fn new(nodes: Vec<(f64, f64)>, extrapolate: bool) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Domain("table needs at least one node".into()));
        }
        for w in nodes.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Domain(format!(
                    "table nodes not strictly increasing at x = {}",
                    w[1].0
                )));
            }
        }
        if let Some(&(x, v)) = nodes.iter().find(|(x, v)| !x.is_finite() || !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(format!(
                "table node ({x}, {v}) is not finite and nonnegative"
            )));
        }
        let (xs, values) = nodes.into_iter().unzip();
        Ok(Self {
            xs,
            values,
            extrapolate,
        })
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.values.iter().copied())
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn extrapolates(&self) -> bool {
        self.extrapolate
    }

    pub fn range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if x < lo || x > hi {
            if !self.extrapolate {
                return Err(Error::Domain(format!("x = {x} outside tabulated range [{lo}, {hi}]")));
            }
            return Ok(if x < lo {
                self.values[0]
            } else {
                self.values[self.values.len() - 1]
            });
        }
        let i = self.xs.partition_point(|&n| n <= x);
        if i == 0 {
            return Ok(self.values[0]);
        }
        if i == self.xs.len() {
            return Ok(self.values[i - 1]);
        }
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        Ok(v0 + (v1 - v0) * (x - x0) / (x1 - x0))
    }
}

/// A vital rate as a function of the structuring variable.
#[derive(Debug, Clone, PartialEq)]
pub enum RateFunction {
    Constant(f64),
    /// `c · xⁿ · e^(−r·x)`
    PowerExp {
        c: f64,
        n: f64,
        r: f64,
    },
    /// 0 below `threshold`, `level` from `threshold` on.
    Step {
        threshold: f64,
        level: f64,
    },
    /// `factor · μ(x)`; only meaningful for fertility.
    ProportionalToMu(f64),
    Tabulated(Table),
}

impl RateFunction {
    /// Evaluates the rate at `x`.
    ///
    /// `ProportionalToMu` has no value on its own and is an error here; use
    /// [`RateFunction::evaluate_with`] or the `ModelSpec` accessors.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        match self {
            RateFunction::Constant(c) => Ok(*c),
            RateFunction::PowerExp { c, n, r } => {
                if x == 0.0 && *n > 0.0 {
                    return Ok(0.0);
                }
                Ok(c * x.powf(*n) * (-r * x).exp())
            }
            RateFunction::Step { threshold, level } => Ok(if x < *threshold { 0.0 } else { *level }),
            RateFunction::ProportionalToMu(_) => Err(Error::Domain(
                "proportional-to-mortality rate needs a mortality function".into(),
            )),
            RateFunction::Tabulated(t) => t.eval(x),
        }
    }

    pub fn evaluate_with(&self, x: f64, mu: &RateFunction) -> Result<f64> {
        match self {
            RateFunction::ProportionalToMu(f) => Ok(f * mu.evaluate(x)?),
            other => other.evaluate(x),
        }
    }

    /// Points where the rate is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            RateFunction::Step { threshold, .. } => vec![*threshold],
            RateFunction::Tabulated(t) => t.xs().to_vec(),
            _ => Vec::new(),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            RateFunction::Constant(c) => Some(*c),
            RateFunction::PowerExp { c, n, r } if *n == 0.0 && *r == 0.0 => Some(*c),
            _ => None,
        }
    }

    /// Exact infimum and supremum over `[lo, hi]` (`hi` may be `+∞`).
    ///
    /// Returns `None` for `ProportionalToMu`, whose range depends on μ.
    pub fn bounds(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let fold = |vals: &[f64]| {
            vals.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
        };
        match self {
            RateFunction::Constant(c) => Some((*c, *c)),
            RateFunction::PowerExp { c, n, r } => {
                let f = |x: f64| self.evaluate(x).unwrap_or(f64::NAN);
                let mut vals = vec![f(lo)];
                if hi.is_finite() {
                    vals.push(f(hi));
                } else {
                    let tail = if *r > 0.0 {
                        0.0
                    } else if *r == 0.0 && *n == 0.0 {
                        1.0
                    } else if *r == 0.0 && *n < 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    vals.push(if tail == 0.0 { 0.0 } else { c * tail });
                }
                if *r > 0.0 {
                    let peak = n / r;
                    if peak > lo && peak < hi {
                        vals.push(f(peak));
                    }
                }
                Some(fold(&vals))
            }
            RateFunction::Step { threshold, level } => {
                let mut vals = Vec::new();
                if lo < *threshold {
                    vals.push(0.0);
                }
                if hi >= *threshold {
                    vals.push(*level);
                }
                Some(fold(&vals))
            }
            RateFunction::ProportionalToMu(_) => None,
            RateFunction::Tabulated(t) => {
                let mut vals: Vec<f64> = t
                    .nodes()
                    .filter(|(x, _)| *x >= lo && *x <= hi)
                    .map(|(_, v)| v)
                    .collect();
                if let Ok(v) = t.eval(lo) {
                    vals.push(v);
                }
                if hi.is_finite() {
                    if let Ok(v) = t.eval(hi) {
                        vals.push(v);
                    }
                } else if t.extrapolates() {
                    vals.push(t.values[t.values.len() - 1]);
                }
                Some(fold(&vals))
            }
        }
    }

    /// Parses the model-file notation: `const:c`, `powexp:c,n,r`, `step:t,l`,
    /// `prop_mu:f`. Tables (`table:path`) are resolved by the file loader.
    pub fn parse_inline(spec: &str) -> Result<Self> {
        let (tag, args) = spec
            .split_once(':')
            .ok_or_else(|| Error::Domain(format!("rate '{spec}' lacks a 'family:' prefix")))?;
        let nums = || -> Result<Vec<f64>> {
            args.split(',')
                .map(|s| parse_real(s.trim()))
                .collect::<Result<Vec<_>>>()
        };
        let expect = |v: Vec<f64>, n: usize| -> Result<Vec<f64>> {
            if v.len() == n {
                Ok(v)
            } else {
                Err(Error::Domain(format!(
                    "rate '{spec}' expects {n} parameter(s), got {}",
                    v.len()
                )))
            }
        };
        match tag.trim() {
            "const" => Ok(RateFunction::Constant(expect(nums()?, 1)?[0])),
            "powexp" => {
                let v = expect(nums()?, 3)?;
                Ok(RateFunction::PowerExp {
                    c: v[0],
                    n: v[1],
                    r: v[2],
                })
            }
            "step" => {
                let v = expect(nums()?, 2)?;
                Ok(RateFunction::Step {
                    threshold: v[0],
                    level: v[1],
                })
            }
            "prop_mu" => Ok(RateFunction::ProportionalToMu(expect(nums()?, 1)?[0])),
            other => Err(Error::Domain(format!("unknown rate family '{other}'"))),
        }
    }
}

pub(crate) fn parse_real(s: &str) -> Result<f64> {
    match s {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => s
            .parse::<f64>()
            .map_err(|_| Error::Domain(format!("'{s}' is not a number"))),
    }
}

impl fmt::Display for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFunction::Constant(c) => write!(f, "const:{c}"),
            RateFunction::PowerExp { c, n, r } => write!(f, "powexp:{c},{n},{r}"),
            RateFunction::Step { threshold, level } => write!(f, "step:{threshold},{level}"),
            RateFunction::ProportionalToMu(k) => write!(f, "prop_mu:{k}"),
            RateFunction::Tabulated(t) => write!(f, "table:{} nodes", t.xs.len()),
        }
    }
}
