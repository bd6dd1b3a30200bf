use std::fmt::Write as _;

use cace_core::{interval, CaceError, ExperimentData, IntervalMethod, IntervalReport, SetShape};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct SetJson {
    pub shape: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl From<&SetShape> for SetJson {
    fn from(s: &SetShape) -> Self {
        let (lower, upper) = s.endpoints().unzip();
        Self {
            shape: s.name(),
            lower,
            upper,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ReportJson {
    pub method: IntervalMethod,
    pub n: usize,
    pub n1: usize,
    pub n0: usize,
    pub p_co_hat: f64,
    pub tau_hat: Option<f64>,
    pub alpha: f64,
    pub set: SetJson,
    pub variance_numerator: Option<f64>,
    pub abnormal: bool,
}

impl ReportJson {
    fn new(data: &ExperimentData, r: &IntervalReport) -> Self {
        Self {
            method: r.method,
            n: data.n(),
            n1: data.n1(),
            n0: data.n0(),
            p_co_hat: r.point.tau_w_hat,
            tau_hat: r.point.tau_hat,
            alpha: r.set.alpha,
            set: SetJson::from(&r.set.shape),
            variance_numerator: r.variance_numerator,
            abnormal: r.abnormal,
        }
    }
}

/// Methods run when none are requested: all five with covariates, the two
/// Wald methods without.
pub fn default_methods(k: usize) -> Vec<IntervalMethod> {
    IntervalMethod::ALL
        .into_iter()
        .filter(|m| k > 0 || !m.is_reg())
        .collect()
}

pub fn run(
    data: &ExperimentData,
    methods: &[IntervalMethod],
    alpha: f64,
) -> Result<Vec<ReportJson>, CaceError> {
    if data.k() == 0 && methods.iter().any(|m| m.is_reg()) {
        return Err(CaceError::NoCovariates);
    }
    methods
        .iter()
        .map(|&m| interval(data, alpha, m).map(|r| ReportJson::new(data, &r)))
        .collect()
}

fn fmt_bound(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:.3}")
    }
}

pub fn fmt_set(s: &SetJson) -> String {
    match (s.shape, s.lower, s.upper) {
        ("interval", Some(a), Some(b)) => format!("[{}, {}]", fmt_bound(a), fmt_bound(b)),
        ("complement", Some(a), Some(b)) => {
            let left = if a == f64::NEG_INFINITY {
                String::new()
            } else {
                format!("(-inf, {}]", fmt_bound(a))
            };
            let right = if b == f64::INFINITY {
                String::new()
            } else {
                format!("[{}, inf)", fmt_bound(b))
            };
            match (left.is_empty(), right.is_empty()) {
                (false, false) => format!("{left} U {right}"),
                (true, _) => right,
                (_, true) => left,
            }
        }
        ("whole_line", ..) => "(-inf, inf)".into(),
        _ => "empty".into(),
    }
}

pub fn render_text(data: &ExperimentData, reports: &[ReportJson]) -> String {
    let mut out = String::new();
    let level = reports
        .first()
        .map(|r| format!("{}%", 100.0 * (1.0 - r.alpha)))
        .unwrap_or_default();
    let _ = writeln!(
        out,
        "n = {} (n1 = {}, n0 = {}), covariates: {}",
        data.n(),
        data.n1(),
        data.n0(),
        if data.k() == 0 {
            "none".to_string()
        } else {
            data.covariate_names().join(", ")
        }
    );
    let _ = writeln!(
        out,
        "{:<12} {:>10} {:>10}  {} interval",
        "method", "p_co", "tau", level
    );
    for r in reports {
        let tau = r
            .tau_hat
            .map(|t| format!("{t:.3}"))
            .unwrap_or_else(|| "inf".into());
        let flag = if r.abnormal { "  (abnormal)" } else { "" };
        let _ = writeln!(
            out,
            "{:<12} {:>10.3} {:>10}  {}{}",
            r.method.label(),
            r.p_co_hat,
            tau,
            fmt_set(&r.set),
            flag
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_formatting() {
        let f = |s: SetShape| fmt_set(&SetJson::from(&s));
        assert_eq!(
            f(SetShape::Interval {
                lower: -0.05,
                upper: 0.2684
            }),
            "[-0.050, 0.268]"
        );
        assert_eq!(
            f(SetShape::Complement {
                lower: -1.0,
                upper: 2.0
            }),
            "(-inf, -1.000] U [2.000, inf)"
        );
        assert_eq!(
            f(SetShape::Complement {
                lower: f64::NEG_INFINITY,
                upper: 2.0
            }),
            "[2.000, inf)"
        );
        assert_eq!(f(SetShape::WholeLine), "(-inf, inf)");
        assert_eq!(f(SetShape::Empty), "empty");
    }

    #[test]
    fn defaults_depend_on_covariates() {
        assert_eq!(default_methods(0).len(), 2);
        assert_eq!(default_methods(3).len(), 5);
    }
}
