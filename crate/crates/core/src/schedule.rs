//! Time-dependent dephasing rates `γ_t` with closed-form integrals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dephasing rate schedule. Noise acts only for `t > onset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum NoiseSchedule {
    /// `γ_t = rate` for `t > onset`.
    Constant { rate: f64, onset: f64 },
    /// `γ_t = slope · (t − onset)` for `t > onset`.
    LinearRamp { slope: f64, onset: f64 },
    /// Linear interpolation between `(time, rate)` knots. Zero before the
    /// first knot, held at the last knot's rate after it.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

impl NoiseSchedule {
    pub fn none() -> Self {
        NoiseSchedule::Constant { rate: 0.0, onset: 0.0 }
    }

    pub fn constant(rate: f64, onset: f64) -> Result<Self> {
        check_nonneg("rate", rate)?;
        check_nonneg("onset", onset)?;
        Ok(NoiseSchedule::Constant { rate, onset })
    }

    pub fn ramp(slope: f64, onset: f64) -> Result<Self> {
        check_nonneg("slope", slope)?;
        check_nonneg("onset", onset)?;
        Ok(NoiseSchedule::LinearRamp { slope, onset })
    }

    pub fn piecewise(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidParameter("piecewise schedule needs at least one knot".into()));
        }
        for &(t, g) in &knots {
            check_nonneg("knot time", t)?;
            check_nonneg("knot rate", g)?;
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter("knot times must be strictly increasing".into()));
        }
        Ok(NoiseSchedule::PiecewiseLinear { knots })
    }

    /// Re-runs constructor validation, e.g. after deserialization.
    pub fn validated(self) -> Result<Self> {
        match self {
            NoiseSchedule::Constant { rate, onset } => Self::constant(rate, onset),
            NoiseSchedule::LinearRamp { slope, onset } => Self::ramp(slope, onset),
            NoiseSchedule::PiecewiseLinear { knots } => Self::piecewise(knots),
        }
    }

    pub fn onset(&self) -> f64 {
        match self {
            NoiseSchedule::Constant { onset, .. } | NoiseSchedule::LinearRamp { onset, .. } => *onset,
            NoiseSchedule::PiecewiseLinear { knots } => knots[0].0,
        }
    }

    /// `γ_t`, left-continuous at the onset.
    pub fn rate(&self, t: f64) -> f64 {
        let t0 = self.onset();
        if t <= t0 {
            return 0.0;
        }
        match self {
            NoiseSchedule::Constant { rate, .. } => *rate,
            NoiseSchedule::LinearRamp { slope, .. } => slope * (t - t0),
            NoiseSchedule::PiecewiseLinear { knots } => {
                let (tl, gl) = knots[knots.len() - 1];
                if t >= tl {
                    return gl;
                }
                let i = knots.partition_point(|&(tk, _)| tk <= t);
                let (ta, ga) = knots[i - 1];
                let (tb, gb) = knots[i];
                ga + (gb - ga) * (t - ta) / (tb - ta)
            }
        }
    }

    /// Right limit `γ_{t⁺}`; differs from [`rate`](Self::rate) only at a jump
    /// at the onset.
    pub fn rate_right(&self, t: f64) -> f64 {
        let t0 = self.onset();
        if t == t0 {
            return match self {
                NoiseSchedule::Constant { rate, .. } => *rate,
                NoiseSchedule::LinearRamp { .. } => 0.0,
                NoiseSchedule::PiecewiseLinear { knots } => knots[0].1,
            };
        }
        self.rate(t)
    }

    /// `∫_{t0}^{max(t, t0)} γ_s ds`, exact for every variant.
    pub fn integral(&self, t: f64) -> f64 {
        let t0 = self.onset();
        if t <= t0 {
            return 0.0;
        }
        let s = t - t0;
        match self {
            NoiseSchedule::Constant { rate, .. } => rate * s,
            NoiseSchedule::LinearRamp { slope, .. } => 0.5 * slope * s * s,
            NoiseSchedule::PiecewiseLinear { knots } => {
                let mut acc = 0.0;
                for w in knots.windows(2) {
                    let ((ta, ga), (tb, gb)) = (w[0], w[1]);
                    if t <= ta {
                        return acc;
                    }
                    let end = t.min(tb);
                    let g_end = ga + (gb - ga) * (end - ta) / (tb - ta);
                    acc += 0.5 * (ga + g_end) * (end - ta);
                }
                let (tl, gl) = knots[knots.len() - 1];
                if t > tl {
                    acc += gl * (t - tl);
                }
                acc
            }
        }
    }

    /// `(γ_t, ∫γ)`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        (self.rate(t), self.integral(t))
    }

    /// Times in `(0, t_final)` where the rate has a kink or jump.
    pub fn breakpoints(&self, t_final: f64) -> Vec<f64> {
        let pts: Vec<f64> = match self {
            NoiseSchedule::PiecewiseLinear { knots } => knots.iter().map(|k| k.0).collect(),
            other => vec![other.onset()],
        };
        pts.into_iter().filter(|&p| p > 0.0 && p < t_final).collect()
    }

    /// `max γ_t` over `[0, t_final]`.
    pub fn max_rate(&self, t_final: f64) -> f64 {
        match self {
            NoiseSchedule::Constant { rate, onset } => {
                if t_final > *onset {
                    *rate
                } else {
                    0.0
                }
            }
            NoiseSchedule::LinearRamp { .. } => self.rate(t_final),
            NoiseSchedule::PiecewiseLinear { knots } => knots
                .iter()
                .filter(|k| k.0 < t_final)
                .map(|k| k.1)
                .chain(std::iter::once(self.rate(t_final)))
                .fold(0.0, f64::max),
        }
    }

    pub fn is_inert(&self) -> bool {
        match self {
            NoiseSchedule::Constant { rate, .. } => *rate == 0.0,
            NoiseSchedule::LinearRamp { slope, .. } => *slope == 0.0,
            NoiseSchedule::PiecewiseLinear { knots } => knots.iter().all(|k| k.1 == 0.0),
        }
    }
}

/// Evaluates `(γ_t, ∫γ)`; `t` must be non-negative.
pub fn schedule_eval(schedule: &NoiseSchedule, t: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    Ok(schedule.eval(t))
}

fn parse_num(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidParameter(format!("cannot parse {what} from {s:?}")))
}

/// `const:<γ>[,t0=<t0>]`, `ramp:<γ̇>[,t0=<t0>]`, `pw:<t:g;t:g;...>` or `none`.
impl FromStr for NoiseSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "none" {
            return Ok(NoiseSchedule::none());
        }
        let (head, body) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("schedule {s:?} lacks a variant prefix")))?;
        let onset_arg = |rest: Option<&str>| -> Result<f64> {
            match rest {
                None => Ok(0.0),
                Some(r) => {
                    let v = r
                        .trim()
                        .strip_prefix("t0=")
                        .ok_or_else(|| Error::InvalidParameter(format!("expected t0=<value>, got {r:?}")))?;
                    parse_num(v, "t0")
                }
            }
        };
        match head {
            "const" => {
                let (g, rest) = match body.split_once(',') {
                    Some((g, r)) => (g, Some(r)),
                    None => (body, None),
                };
                Self::constant(parse_num(g, "rate")?, onset_arg(rest)?)
            }
            "ramp" => {
                let (g, rest) = match body.split_once(',') {
                    Some((g, r)) => (g, Some(r)),
                    None => (body, None),
                };
                Self::ramp(parse_num(g, "slope")?, onset_arg(rest)?)
            }
            "pw" => {
                let knots = body
                    .split(';')
                    .filter(|k| !k.trim().is_empty())
                    .map(|k| {
                        let (t, g) = k
                            .split_once(':')
                            .ok_or_else(|| Error::InvalidParameter(format!("knot {k:?} is not <t>:<rate>")))?;
                        Ok((parse_num(t, "knot time")?, parse_num(g, "knot rate")?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::piecewise(knots)
            }
            other => Err(Error::InvalidParameter(format!("unknown schedule variant {other:?}"))),
        }
    }
}

impl fmt::Display for NoiseSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSchedule::Constant { rate, onset } => write!(f, "const:{rate},t0={onset}"),
            NoiseSchedule::LinearRamp { slope, onset } => write!(f, "ramp:{slope},t0={onset}"),
            NoiseSchedule::PiecewiseLinear { knots } => {
                let parts: Vec<String> = knots.iter().map(|(t, g)| format!("{t}:{g}")).collect();
                write!(f, "pw:{}", parts.join(";"))
            }
        }
    }
}
