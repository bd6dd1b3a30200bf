//! Point estimators of the sample complier average causal effect.

use serde::Serialize;

use crate::data::{difference_in_means, ExperimentData};
use crate::error::{CaceError, Result};
use crate::linalg::{DesignMatrix, QrFactor};
use crate::simulation::PotentialPopulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Wald,
    Reg,
}

/// A ratio estimate `tau_y_hat / tau_w_hat`.
///
/// `tau_hat` is `None` exactly when the estimated complier fraction is zero,
/// which is the abnormal case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointEstimate {
    pub method: Estimator,
    pub tau_hat: Option<f64>,
    pub tau_w_hat: f64,
    pub tau_y_hat: f64,
}

impl PointEstimate {
    fn from_parts(method: Estimator, tau_y_hat: f64, tau_w_hat: f64) -> Self {
        let tau_hat = (tau_w_hat != 0.0).then(|| tau_y_hat / tau_w_hat);
        Self {
            method,
            tau_hat,
            tau_w_hat,
            tau_y_hat,
        }
    }

    pub fn abnormal(&self) -> bool {
        self.tau_hat.is_none()
    }
}

/// Ratio of the intention-to-treat difference in means on `Y` and on `W`.
pub fn wald_estimate(data: &ExperimentData) -> PointEstimate {
    let w = data.w_real();
    // Validated data always has both arms, so these cannot fail.
    let tau_w = difference_in_means(&w, data.z()).expect("validated data");
    let tau_y = difference_in_means(data.y(), data.z()).expect("validated data");
    PointEstimate::from_parts(Estimator::Wald, tau_y, tau_w)
}

/// Factorization of the interacted design `[1, z, x, z*x]` shared by the
/// regression estimator and its variance estimators.
#[derive(Debug, Clone)]
pub struct RegFit {
    pub qr: QrFactor,
    pub estimate: PointEstimate,
}

/// Index of the `z` column in the interacted design.
pub const Z_COLUMN: usize = 1;

pub(crate) fn reg_fit(data: &ExperimentData) -> Result<RegFit> {
    let k = data.k();
    if k == 0 {
        return Err(CaceError::NoCovariates);
    }
    for (arm, count) in [(1, data.n1()), (0, data.n0())] {
        if count < k + 2 {
            return Err(CaceError::DegenerateArm(format!(
                "arm {arm} has {count} units; regression adjustment needs at least K + 2 = {}",
                k + 2
            )));
        }
    }
    let design = DesignMatrix::interacted(data.z(), data.covariates(), data.covariate_names())?;
    check_arm_rank(data)?;
    let qr = QrFactor::new(&design)?;
    let tau_w = qr.coefficients(&data.w_real())[Z_COLUMN];
    let tau_y = qr.coefficients(data.y())[Z_COLUMN];
    Ok(RegFit {
        qr,
        estimate: PointEstimate::from_parts(Estimator::Reg, tau_y, tau_w),
    })
}

// Rank of the interacted design is the sum of within-arm ranks, so checking
// each arm separately names the offending covariate in the caller's terms.
fn check_arm_rank(data: &ExperimentData) -> Result<()> {
    for arm in [1u8, 0] {
        let keep: Vec<bool> = data.z().iter().map(|&v| v == arm).collect();
        let mut d = DesignMatrix::with_intercept(data.n());
        for (col, name) in data.covariates().iter().zip(data.covariate_names()) {
            d.push(name.clone(), col.clone())?;
        }
        QrFactor::new(&d.select_rows(&keep))?;
    }
    Ok(())
}

/// Ratio of the `z` coefficients from the interacted regressions of `Y` and
/// `W` on `[1, z, x, z*x]`.
pub fn reg_estimate(data: &ExperimentData) -> Result<PointEstimate> {
    Ok(reg_fit(data)?.estimate)
}

/// Mean of `Y(1) - Y(0)` over the compliers of a fixed population.
pub fn true_sample_cace(pop: &PotentialPopulation) -> Result<f64> {
    let mut sum = 0.0;
    let mut compliers = 0usize;
    for i in 0..pop.n() {
        match (pop.w0[i], pop.w1[i]) {
            (1, 0) => {
                return Err(CaceError::InvalidPopulation(format!(
                    "unit {i} is a defier"
                )))
            }
            (0, 1) => {
                sum += pop.yw1[i] - pop.yw0[i];
                compliers += 1;
            }
            _ => {}
        }
    }
    if compliers == 0 {
        return Err(CaceError::InvalidPopulation("no compliers".into()));
    }
    Ok(sum / compliers as f64)
}
