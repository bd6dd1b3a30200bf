//! Confidence procedures for the sample CACE.
//!
//! * `wald-ld`: inversion of the constant-effect test, one quadratic inequality
//!   in the candidate effect. The solution can be empty, a finite interval, the
//!   whole line or the complement of an interval.
//! * `wald-delta`: a finite interval from the within-arm variances of the
//!   adjusted outcome `B = Y - tau * W`.
//! * `reg-ehw`, `reg-hc2`, `reg-hc3`: sandwich variances of the `z` coefficient
//!   in the interacted regression of the adjusted outcome.

use std::fmt;
use std::str::FromStr;

use libm::erfc;
use serde::Serialize;

use crate::data::{arm_values, sample_covariance, sample_variance, ExperimentData};
use crate::error::{CaceError, Result};
use crate::estimators::{reg_fit, wald_estimate, PointEstimate, RegFit, Z_COLUMN};

/// Leverages above `1 - LEVERAGE_GUARD` make HC2/HC3 weights undefined.
pub const LEVERAGE_GUARD: f64 = 1e-12;

const DISC_REL_TOL: f64 = 1e-14;

/// Inverse standard-normal CDF.
///
/// Rational approximation followed by one Halley step on `erfc`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(CaceError::InvalidProbability(p));
    }
    if p > 0.5 {
        // 1 - p is exact here; the lower tail keeps full relative precision.
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    let e = 0.5 * erfc(-x / std::f64::consts::SQRT_2) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// Geometry of a confidence set. Infinite endpoints of a complement encode a
/// half-line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SetShape {
    Empty,
    Interval {
        lower: f64,
        upper: f64,
    },
    WholeLine,
    /// `(-inf, lower] U [upper, inf)`.
    Complement {
        lower: f64,
        upper: f64,
    },
}

impl SetShape {
    pub fn name(&self) -> &'static str {
        match self {
            SetShape::Empty => "empty",
            SetShape::Interval { .. } => "interval",
            SetShape::WholeLine => "whole_line",
            SetShape::Complement { .. } => "complement",
        }
    }

    pub fn endpoints(&self) -> Option<(f64, f64)> {
        match *self {
            SetShape::Interval { lower, upper } | SetShape::Complement { lower, upper } => {
                Some((lower, upper))
            }
            _ => None,
        }
    }

    pub fn covers(&self, beta: f64) -> bool {
        match *self {
            SetShape::Empty => false,
            SetShape::WholeLine => true,
            SetShape::Interval { lower, upper } => lower <= beta && beta <= upper,
            SetShape::Complement { lower, upper } => beta <= lower || beta >= upper,
        }
    }

    /// Lebesgue length; infinite for anything but an interval or the empty set.
    pub fn length(&self) -> f64 {
        match *self {
            SetShape::Empty => 0.0,
            SetShape::Interval { lower, upper } => upper - lower,
            _ => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceSet {
    pub shape: SetShape,
    pub alpha: f64,
}

impl ConfidenceSet {
    pub fn covers(&self, beta: f64) -> bool {
        self.shape.covers(beta)
    }

    pub fn length(&self) -> f64 {
        self.shape.length()
    }

    pub fn is_interval(&self) -> bool {
        matches!(self.shape, SetShape::Interval { .. })
    }
}

/// `b^2 - 4ad` with the products' rounding errors recovered by FMA.
fn discriminant(a: f64, b: f64, d: f64) -> f64 {
    let bb = b * b;
    let bb_err = b.mul_add(b, -bb);
    let ad = 4.0 * a * d;
    let ad_err = (4.0 * a).mul_add(d, -ad);
    (bb - ad) + (bb_err - ad_err)
}

/// Solution set of `a*beta^2 + b*beta + d <= 0`.
pub fn solve_quadratic_leq(a: f64, b: f64, d: f64) -> SetShape {
    if a == 0.0 {
        if b == 0.0 {
            return if d <= 0.0 {
                SetShape::WholeLine
            } else {
                SetShape::Empty
            };
        }
        let root = -d / b;
        // Half-line written as a complement with one side pushed to infinity.
        return if b > 0.0 {
            SetShape::Complement {
                lower: root,
                upper: f64::INFINITY,
            }
        } else {
            SetShape::Complement {
                lower: f64::NEG_INFINITY,
                upper: root,
            }
        };
    }

    let disc = discriminant(a, b, d);
    let scale = (b * b).max((4.0 * a * d).abs());
    let (r1, r2) = if disc.abs() < DISC_REL_TOL * scale || disc == 0.0 {
        let r = -b / (2.0 * a);
        (r, r)
    } else if disc < 0.0 {
        return if a > 0.0 {
            SetShape::Empty
        } else {
            SetShape::WholeLine
        };
    } else {
        let s = disc.sqrt();
        let q = -0.5 * (b + if b >= 0.0 { s } else { -s });
        let (x1, x2) = (q / a, d / q);
        (x1.min(x2), x1.max(x2))
    };

    if a > 0.0 {
        SetShape::Interval {
            lower: r1,
            upper: r2,
        }
    } else {
        SetShape::Complement {
            lower: r1,
            upper: r2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum IntervalMethod {
    #[serde(rename = "wald-ld")]
    WaldLd,
    #[serde(rename = "wald-delta")]
    WaldDelta,
    #[serde(rename = "reg-ehw")]
    RegEhw,
    #[serde(rename = "reg-hc2")]
    RegHc2,
    #[serde(rename = "reg-hc3")]
    RegHc3,
}

impl IntervalMethod {
    pub const ALL: [IntervalMethod; 5] = [
        IntervalMethod::WaldLd,
        IntervalMethod::WaldDelta,
        IntervalMethod::RegEhw,
        IntervalMethod::RegHc2,
        IntervalMethod::RegHc3,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            IntervalMethod::WaldLd => "wald-ld",
            IntervalMethod::WaldDelta => "wald-delta",
            IntervalMethod::RegEhw => "reg-ehw",
            IntervalMethod::RegHc2 => "reg-hc2",
            IntervalMethod::RegHc3 => "reg-hc3",
        }
    }

    /// Display label used in tables (`Wald-LD`, `Reg-EHW`, ...).
    pub fn label(&self) -> &'static str {
        match self {
            IntervalMethod::WaldLd => "Wald-LD",
            IntervalMethod::WaldDelta => "Wald-Delta",
            IntervalMethod::RegEhw => "Reg-EHW",
            IntervalMethod::RegHc2 => "Reg-HC2",
            IntervalMethod::RegHc3 => "Reg-HC3",
        }
    }

    pub fn is_reg(&self) -> bool {
        self.hc_flavor().is_some()
    }

    pub fn hc_flavor(&self) -> Option<HcFlavor> {
        match self {
            IntervalMethod::RegEhw => Some(HcFlavor::Ehw),
            IntervalMethod::RegHc2 => Some(HcFlavor::Hc2),
            IntervalMethod::RegHc3 => Some(HcFlavor::Hc3),
            _ => None,
        }
    }
}

impl fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntervalMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        IntervalMethod::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// Residual weighting of the sandwich variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcFlavor {
    /// Squared residuals as-is.
    Ehw,
    /// `u^2 / (1 - h)`.
    Hc2,
    /// `u^2 / (1 - h)^2`.
    Hc3,
}

impl HcFlavor {
    pub fn method(&self) -> IntervalMethod {
        match self {
            HcFlavor::Ehw => IntervalMethod::RegEhw,
            HcFlavor::Hc2 => IntervalMethod::RegHc2,
            HcFlavor::Hc3 => IntervalMethod::RegHc3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalReport {
    pub method: IntervalMethod,
    pub point: PointEstimate,
    pub set: ConfidenceSet,
    /// Variance of the adjusted-outcome contrast before division by the
    /// squared complier-fraction estimate. `None` when the point estimate is
    /// abnormal.
    pub variance_numerator: Option<f64>,
    pub abnormal: bool,
}

fn check_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CaceError::InvalidProbability(alpha));
    }
    normal_quantile(1.0 - alpha / 2.0)
}

fn abnormal_report(method: IntervalMethod, point: PointEstimate, alpha: f64) -> IntervalReport {
    IntervalReport {
        method,
        point,
        set: ConfidenceSet {
            shape: SetShape::WholeLine,
            alpha,
        },
        variance_numerator: None,
        abnormal: true,
    }
}

fn centered_interval(
    method: IntervalMethod,
    point: PointEstimate,
    variance: f64,
    nu: f64,
    alpha: f64,
) -> IntervalReport {
    let tau = point.tau_hat.expect("normal point estimate");
    let half = nu * variance.sqrt() / point.tau_w_hat.abs();
    IntervalReport {
        method,
        point,
        set: ConfidenceSet {
            shape: SetShape::Interval {
                lower: tau - half,
                upper: tau + half,
            },
            alpha,
        },
        variance_numerator: Some(variance),
        abnormal: false,
    }
}

/// Coefficients `(a, b, d)` of the constant-effect test inversion
/// `(tau_y - beta tau_w)^2 <= c (S_Y^2 + beta^2 S_W^2 - 2 beta S_YW)`,
/// with `c = nu^2 (1/n1 + 1/n0)` and full-sample moments.
pub fn wald_ld_coefficients(data: &ExperimentData, alpha: f64) -> Result<(f64, f64, f64)> {
    let nu = check_alpha(alpha)?;
    let point = wald_estimate(data);
    let w = data.w_real();
    let c = nu * nu * (1.0 / data.n1() as f64 + 1.0 / data.n0() as f64);
    let syy = sample_variance(data.y())?;
    let sww = sample_variance(&w)?;
    let syw = sample_covariance(data.y(), &w)?;
    let (ty, tw) = (point.tau_y_hat, point.tau_w_hat);
    Ok((
        tw * tw - c * sww,
        -2.0 * ty * tw + 2.0 * c * syw,
        ty * ty - c * syy,
    ))
}

pub fn wald_ld_set(data: &ExperimentData, alpha: f64) -> Result<IntervalReport> {
    let (a, b, d) = wald_ld_coefficients(data, alpha)?;
    let point = wald_estimate(data);
    let shape = solve_quadratic_leq(a, b, d);
    let variance_numerator = match point.tau_hat {
        Some(t) => {
            let w = data.w_real();
            let syy = sample_variance(data.y())?;
            let sww = sample_variance(&w)?;
            let syw = sample_covariance(data.y(), &w)?;
            let f = 1.0 / data.n1() as f64 + 1.0 / data.n0() as f64;
            Some(f * (syy + t * t * sww - 2.0 * t * syw))
        }
        None => None,
    };
    Ok(IntervalReport {
        method: IntervalMethod::WaldLd,
        point,
        set: ConfidenceSet { shape, alpha },
        variance_numerator,
        abnormal: point.abnormal() || !matches!(shape, SetShape::Interval { .. }),
    })
}

/// `S^2_{B(1)}/n1 + S^2_{B(0)}/n0` for the adjusted outcome `B = Y - tau W`.
pub(crate) fn adjusted_outcome_variance(data: &ExperimentData, tau: f64) -> Result<f64> {
    let b: Vec<f64> = data
        .y()
        .iter()
        .zip(data.w())
        .map(|(&y, &w)| y - tau * f64::from(w))
        .collect();
    let mut v = 0.0;
    for arm in [1u8, 0] {
        let vals = arm_values(&b, data.z(), arm);
        v += sample_variance(&vals)? / vals.len() as f64;
    }
    Ok(v)
}

pub fn wald_delta_interval(data: &ExperimentData, alpha: f64) -> Result<IntervalReport> {
    let nu = check_alpha(alpha)?;
    let point = wald_estimate(data);
    let Some(tau) = point.tau_hat else {
        return Ok(abnormal_report(IntervalMethod::WaldDelta, point, alpha));
    };
    let v = adjusted_outcome_variance(data, tau)?;
    Ok(centered_interval(
        IntervalMethod::WaldDelta,
        point,
        v,
        nu,
        alpha,
    ))
}

/// Sandwich variance of the `z` coefficient for each requested flavor, from
/// the residuals of the interacted regression of `B = Y - tau W`.
fn sandwich_variances(
    fit: &RegFit,
    data: &ExperimentData,
    tau: f64,
    flavors: &[HcFlavor],
) -> Result<Vec<f64>> {
    let b: Vec<f64> = data
        .y()
        .iter()
        .zip(data.w())
        .map(|(&y, &w)| y - tau * f64::from(w))
        .collect();
    let u = fit.qr.residuals(&b);
    let c = fit.qr.coefficient_weights(Z_COLUMN);
    let needs_leverage = flavors.iter().any(|f| *f != HcFlavor::Ehw);
    let h = if needs_leverage {
        let h = fit.qr.leverages();
        if let Some(unit) = h.iter().position(|&hi| hi > 1.0 - LEVERAGE_GUARD) {
            return Err(CaceError::DegenerateLeverage { unit });
        }
        h
    } else {
        Vec::new()
    };
    Ok(flavors
        .iter()
        .map(|flavor| {
            let mut v = 0.0;
            for i in 0..u.len() {
                let t = u[i] * u[i] * c[i] * c[i];
                v += match flavor {
                    HcFlavor::Ehw => t,
                    HcFlavor::Hc2 => t / (1.0 - h[i]),
                    HcFlavor::Hc3 => {
                        let m = 1.0 - h[i];
                        t / (m * m)
                    }
                };
            }
            v
        })
        .collect())
}

/// Regression-adjusted intervals for several flavors sharing one fit.
pub fn reg_intervals(
    data: &ExperimentData,
    alpha: f64,
    flavors: &[HcFlavor],
) -> Result<Vec<IntervalReport>> {
    let nu = check_alpha(alpha)?;
    let fit = reg_fit(data)?;
    let point = fit.estimate;
    let Some(tau) = point.tau_hat else {
        return Ok(flavors
            .iter()
            .map(|f| abnormal_report(f.method(), point, alpha))
            .collect());
    };
    let vars = sandwich_variances(&fit, data, tau, flavors)?;
    Ok(flavors
        .iter()
        .zip(vars)
        .map(|(f, v)| centered_interval(f.method(), point, v, nu, alpha))
        .collect())
}

pub fn reg_interval(data: &ExperimentData, alpha: f64, flavor: HcFlavor) -> Result<IntervalReport> {
    Ok(reg_intervals(data, alpha, &[flavor])?.remove(0))
}

/// Runs one method.
pub fn interval(
    data: &ExperimentData,
    alpha: f64,
    method: IntervalMethod,
) -> Result<IntervalReport> {
    match method {
        IntervalMethod::WaldLd => wald_ld_set(data, alpha),
        IntervalMethod::WaldDelta => wald_delta_interval(data, alpha),
        m => reg_interval(data, alpha, m.hc_flavor().expect("reg method")),
    }
}
