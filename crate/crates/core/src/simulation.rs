//! Finite-population Monte Carlo study.
//!
//! One science table (covariates, potential treatments and potential
//! outcomes) is drawn per study and held fixed; only the assignment vector is
//! re-randomized across replicates. Replicate `r` draws its assignment from
//! ChaCha stream `r + 1` of the study seed, so results do not depend on how
//! replicates are scheduled across threads.

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{difference_in_means, sample_variance, ExperimentData};
use crate::error::{CaceError, Result};
use crate::estimators::true_sample_cace;
use crate::intervals::{
    adjusted_outcome_variance, reg_intervals, wald_delta_interval, wald_ld_set, HcFlavor,
    IntervalMethod, IntervalReport,
};
use crate::linalg::{DesignMatrix, QrFactor};

/// Population draws attempted before complier calibration gives up.
pub const MAX_POPULATION_DRAWS: usize = 100;

/// Environment variable capping replicate parallelism.
pub const THREADS_ENV: &str = "CACE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub n: usize,
    pub p_co: f64,
    pub rho: f64,
    pub k: usize,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 200,
            p_co: 0.5,
            rho: 0.0,
            k: 5,
            reps: 1000,
            seed: 0,
            alpha: 0.05,
        }
    }
}

impl SimConfig {
    /// Number of compliers the population is calibrated to.
    pub fn target_compliers(&self) -> usize {
        (self.n as f64 * self.p_co).round() as usize
    }

    pub fn n1(&self) -> usize {
        self.n / 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CaceError::InvalidConfig(msg));
        if !self.n.is_multiple_of(2) {
            return bad(format!("n must be even, got {}", self.n));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.n / 2 < self.k + 2 {
            return bad(format!(
                "n/2 = {} is below K + 2 = {}; regression adjustment is undefined",
                self.n / 2,
                self.k + 2
            ));
        }
        if !(self.p_co > 0.0 && self.p_co < 1.0) {
            return bad(format!("p_co must lie in (0, 1), got {}", self.p_co));
        }
        if self.target_compliers() < 1 {
            return bad("n * p_co rounds to zero compliers".into());
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if error_cholesky(self.rho).is_none() {
            return bad(format!(
                "rho = {} gives a non positive-definite error correlation (need |rho| < 1/sqrt(2))",
                self.rho
            ));
        }
        Ok(())
    }
}

/// Latent compliance type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Co,
    Nt,
    At,
    De,
}

/// Full science table of a fixed experimental population.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPopulation {
    /// Centered covariate columns.
    pub x: Vec<Vec<f64>>,
    /// Outcome if treatment is not received.
    pub yw0: Vec<f64>,
    /// Outcome if treatment is received.
    pub yw1: Vec<f64>,
    /// Latent index under control; empty when the table was supplied directly.
    pub l0: Vec<f64>,
    pub l1: Vec<f64>,
    pub w0: Vec<u8>,
    pub w1: Vec<u8>,
    pub group: Vec<Group>,
    pub true_tau_cace: f64,
    pub true_p_co: f64,
}

impl PotentialPopulation {
    /// Builds a population from potential treatments and outcomes, rejecting
    /// defiers and populations without compliers.
    pub fn from_science_table(
        x: Vec<Vec<f64>>,
        yw0: Vec<f64>,
        yw1: Vec<f64>,
        w0: Vec<u8>,
        w1: Vec<u8>,
    ) -> Result<Self> {
        let n = w0.len();
        for len in [w1.len(), yw0.len(), yw1.len()] {
            if len != n {
                return Err(CaceError::LengthMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        let group = w0
            .iter()
            .zip(&w1)
            .map(|(&a, &b)| match (a, b) {
                (0, 1) => Group::Co,
                (1, 1) => Group::At,
                (1, 0) => Group::De,
                _ => Group::Nt,
            })
            .collect();
        let mut pop = Self {
            x,
            yw0,
            yw1,
            l0: Vec::new(),
            l1: Vec::new(),
            w0,
            w1,
            group,
            true_tau_cace: f64::NAN,
            true_p_co: f64::NAN,
        };
        pop.true_tau_cace = true_sample_cace(&pop)?;
        pop.true_p_co = pop.n_compliers() as f64 / n as f64;
        Ok(pop)
    }

    pub fn n(&self) -> usize {
        self.w0.len()
    }

    pub fn k(&self) -> usize {
        self.x.len()
    }

    pub fn n_compliers(&self) -> usize {
        self.group.iter().filter(|&&g| g == Group::Co).count()
    }

    /// `W_i(z)`.
    pub fn treatment(&self, i: usize, z: u8) -> u8 {
        if z == 1 {
            self.w1[i]
        } else {
            self.w0[i]
        }
    }

    /// `Y_i(z)`: the outcome under the treatment received when assigned `z`.
    pub fn outcome(&self, i: usize, z: u8) -> f64 {
        if self.treatment(i, z) == 1 {
            self.yw1[i]
        } else {
            self.yw0[i]
        }
    }

    /// `B_i(z) = Y_i(z) - tau * W_i(z)` for every unit.
    pub fn adjusted_outcomes(&self, z: u8) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.outcome(i, z) - self.true_tau_cace * f64::from(self.treatment(i, z)))
            .collect()
    }
}

/// Lower Cholesky factor of the error correlation matrix
/// `[[1, 0, rho], [0, 1, rho], [rho, rho, 1]]`, or `None` if it is not
/// positive definite.
fn error_cholesky(rho: f64) -> Option<[[f64; 3]; 3]> {
    if !rho.is_finite() {
        return None;
    }
    let m = [[1.0, 0.0, rho], [0.0, 1.0, rho], [rho, rho, 1.0]];
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                if d <= 0.0 {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// ChaCha stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws the fixed science table.
///
/// Covariates are iid standard normal, centered, and all coefficient vectors
/// are all-ones. Error scales make the squared multiple correlation 0.5 in
/// each equation. `delta1` is calibrated so exactly `round(n * p_co)` units
/// satisfy `l0 <= 0 < l0 + delta1`.
pub fn generate_population<R: Rng + ?Sized>(
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<PotentialPopulation> {
    cfg.validate()?;
    for _ in 0..MAX_POPULATION_DRAWS {
        if let Some(pop) = draw_population(cfg, rng)? {
            return Ok(pop);
        }
    }
    Err(CaceError::CalibrationFailed(MAX_POPULATION_DRAWS))
}

fn draw_population<R: Rng + ?Sized>(
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<Option<PotentialPopulation>> {
    let (n, k) = (cfg.n, cfg.k);
    let chol = error_cholesky(cfg.rho).expect("validated rho");

    let mut x: Vec<Vec<f64>> = vec![vec![0.0; n]; k];
    for i in 0..n {
        for col in x.iter_mut() {
            col[i] = rng.sample(StandardNormal);
        }
    }
    for col in x.iter_mut() {
        let m = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|v| *v -= m);
    }

    // Signal variances of the unit-coefficient linear predictors.
    let kf = k as f64;
    let kappa0 = 1.0 / kf.sqrt();
    let kappa1 = 1.0 / (4.0 * kf).sqrt();
    let kappa2 = 1.0 / kf.sqrt();
    // Intercept sign chosen so the share of units with l0 <= 0 grows with p_co.
    let delta0 = -((cfg.p_co - 0.5) / 0.35 + 1.0) * kf.sqrt();

    let mut yw0 = vec![0.0; n];
    let mut yw1 = vec![0.0; n];
    let mut l0 = vec![0.0; n];
    for i in 0..n {
        let g: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let e: Vec<f64> = (0..3)
            .map(|r| (0..=r).map(|c| chol[r][c] * g[c]).sum())
            .collect();
        let sx: f64 = x.iter().map(|c| c[i]).sum();
        yw0[i] = sx + e[0] / kappa0;
        yw1[i] = 2.0 * sx + e[1] / kappa1;
        l0[i] = delta0 + sx + e[2] / kappa2;
    }

    let m = cfg.target_compliers();
    let mut candidates: Vec<f64> = l0.iter().copied().filter(|&v| v <= 0.0).collect();
    if candidates.len() < m {
        return Ok(None);
    }
    candidates.sort_by(|a, b| b.partial_cmp(a).expect("finite latent index"));
    let mth = candidates[m - 1];
    let delta1 = match candidates.get(m) {
        Some(&next) if next < mth => -mth + 0.5 * (mth - next),
        Some(_) => return Ok(None),
        None => -mth + 1e-9,
    };

    let l1: Vec<f64> = l0.iter().map(|v| v + delta1).collect();
    let w0: Vec<u8> = l0.iter().map(|&v| u8::from(v > 0.0)).collect();
    let w1: Vec<u8> = l1.iter().map(|&v| u8::from(v > 0.0)).collect();
    let mut pop = PotentialPopulation::from_science_table(x, yw0, yw1, w0, w1)?;
    if pop.n_compliers() != m {
        return Ok(None);
    }
    pop.l0 = l0;
    pop.l1 = l1;
    Ok(Some(pop))
}

/// Uniformly random assignment with exactly `n1` treated units.
pub fn complete_randomization<R: Rng + ?Sized>(n: usize, n1: usize, rng: &mut R) -> Vec<u8> {
    let mut z = vec![0u8; n];
    for i in sample(rng, n, n1) {
        z[i] = 1;
    }
    z
}

/// Reveals the observed data implied by assignment `z`.
pub fn observe(pop: &PotentialPopulation, z: &[u8]) -> Result<ExperimentData> {
    if z.len() != pop.n() {
        return Err(CaceError::LengthMismatch {
            expected: pop.n(),
            actual: z.len(),
        });
    }
    let w: Vec<u8> = (0..pop.n()).map(|i| pop.treatment(i, z[i])).collect();
    let y: Vec<f64> = (0..pop.n()).map(|i| pop.outcome(i, z[i])).collect();
    let cov = pop
        .x
        .iter()
        .enumerate()
        .map(|(j, c)| (format!("x{}", j + 1), c.clone()))
        .collect();
    ExperimentData::new(z.to_vec(), w, y, cov)
}

fn finite_population_variance(q: &[f64]) -> f64 {
    sample_variance(q).expect("population has at least two units")
}

/// Exact randomization variance of the adjusted-outcome contrast:
/// `S^2_{B(1)}/n1 + S^2_{B(0)}/n0 - S^2_{B(1)-B(0)}/n`.
pub fn true_var_tau_b(pop: &PotentialPopulation, n1: usize) -> f64 {
    let n = pop.n();
    let b1 = pop.adjusted_outcomes(1);
    let b0 = pop.adjusted_outcomes(0);
    let diff: Vec<f64> = b1.iter().zip(&b0).map(|(a, b)| a - b).collect();
    var_plus(pop, n1) - finite_population_variance(&diff) / n as f64
}

/// `S^2_{B(1)}/n1 + S^2_{B(0)}/n0`.
pub fn var_plus(pop: &PotentialPopulation, n1: usize) -> f64 {
    let n0 = pop.n() - n1;
    finite_population_variance(&pop.adjusted_outcomes(1)) / n1 as f64
        + finite_population_variance(&pop.adjusted_outcomes(0)) / n0 as f64
}

/// Same as [`var_plus`] with each `B(z)` replaced by its population linear
/// projection on `x`.
pub fn var_plus_given_x(pop: &PotentialPopulation, n1: usize) -> Result<f64> {
    let n = pop.n();
    let n0 = n - n1;
    let mut d = DesignMatrix::with_intercept(n);
    for (j, c) in pop.x.iter().enumerate() {
        d.push(format!("x{}", j + 1), c.clone())?;
    }
    let qr = QrFactor::new(&d)?;
    let mut v = 0.0;
    for (z, nz) in [(1u8, n1), (0u8, n0)] {
        let b = pop.adjusted_outcomes(z);
        let res = qr.residuals(&b);
        let fitted: Vec<f64> = b.iter().zip(&res).map(|(a, r)| a - r).collect();
        v += finite_population_variance(&fitted) / nz as f64;
    }
    Ok(v)
}

/// Limit of the percent reduction in interval length from regression
/// adjustment: `1 - sqrt(1 - var_plus_given_x / var_plus)`.
pub fn pril_limit(pop: &PotentialPopulation, n1: usize) -> Result<f64> {
    if pop.k() == 0 {
        return Err(CaceError::NoCovariates);
    }
    let vp = var_plus(pop, n1);
    if vp <= 0.0 {
        return Err(CaceError::InvalidPopulation(
            "adjusted outcomes have zero variance".into(),
        ));
    }
    let ratio = (var_plus_given_x(pop, n1)? / vp).clamp(0.0, 1.0);
    Ok(1.0 - (1.0 - ratio).sqrt())
}

/// Outcome of one method on one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub estimate: Option<f64>,
    pub length: f64,
    pub covered: bool,
    pub abnormal: bool,
}

impl MethodOutcome {
    fn from_report(r: &IntervalReport, truth: f64) -> Self {
        Self {
            estimate: r.point.tau_hat,
            length: r.set.length(),
            covered: r.set.covers(truth),
            abnormal: r.abnormal,
        }
    }

    fn failed() -> Self {
        Self {
            estimate: None,
            length: f64::INFINITY,
            covered: true,
            abnormal: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub index: usize,
    /// In [`IntervalMethod::ALL`] order.
    pub outcomes: [MethodOutcome; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: IntervalMethod,
    /// Median absolute error of the point estimate.
    pub mae: Option<f64>,
    pub coverage_rate: Option<f64>,
    /// `100 * (coverage_rate - (1 - alpha))`.
    pub coverage_deviation: Option<f64>,
    pub median_length: Option<f64>,
    pub abnormal_proportion: f64,
    pub replicates_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub true_var_tau_b: f64,
    pub var_plus: f64,
    pub var_plus_given_x: f64,
    pub pril_limit: f64,
    /// `1 - median length(Reg-EHW) / median length(Wald-Delta)`.
    pub empirical_pril: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub config: SimConfig,
    pub true_tau_cace: f64,
    pub true_p_co: f64,
    pub n_compliers: usize,
    pub methods: Vec<MethodSummary>,
    pub diagnostics: Diagnostics,
}

impl SimulationSummary {
    pub fn method(&self, m: IntervalMethod) -> &MethodSummary {
        self.methods
            .iter()
            .find(|s| s.method == m)
            .expect("every method is summarized")
    }
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub population: PotentialPopulation,
    pub summary: SimulationSummary,
    pub replicates: Vec<ReplicateRecord>,
}

/// Value of `CACE_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CaceError::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn evaluate_replicate(
    pop: &PotentialPopulation,
    cfg: &SimConfig,
    index: usize,
) -> Result<ReplicateRecord> {
    let mut rng = stream_rng(cfg.seed, index as u64 + 1);
    let z = complete_randomization(cfg.n, cfg.n1(), &mut rng);
    let data = observe(pop, &z)?;
    let truth = pop.true_tau_cace;
    let ld = wald_ld_set(&data, cfg.alpha)?;
    let delta = wald_delta_interval(&data, cfg.alpha)?;
    let reg = match reg_intervals(
        &data,
        cfg.alpha,
        &[HcFlavor::Ehw, HcFlavor::Hc2, HcFlavor::Hc3],
    ) {
        Ok(r) => r
            .iter()
            .map(|r| MethodOutcome::from_report(r, truth))
            .collect(),
        // A collinear within-arm design is counted as an abnormal replicate.
        Err(e) if e.is_rank_failure() => vec![MethodOutcome::failed(); 3],
        Err(e) => return Err(e),
    };
    Ok(ReplicateRecord {
        index,
        outcomes: [
            MethodOutcome::from_report(&ld, truth),
            MethodOutcome::from_report(&delta, truth),
            reg[0],
            reg[1],
            reg[2],
        ],
    })
}

/// Lower median: element `(len - 1) / 2` of the sorted values.
pub fn lower_median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    Some(values[(values.len() - 1) / 2])
}

fn summarize_method(
    method: IntervalMethod,
    slot: usize,
    records: &[ReplicateRecord],
    truth: f64,
    alpha: f64,
) -> MethodSummary {
    let used: Vec<&MethodOutcome> = records
        .iter()
        .map(|r| &r.outcomes[slot])
        .filter(|o| !o.abnormal)
        .collect();
    let abnormal = records.len() - used.len();
    let mut errors: Vec<f64> = used
        .iter()
        .filter_map(|o| o.estimate.map(|e| (e - truth).abs()))
        .collect();
    let mut lengths: Vec<f64> = used.iter().map(|o| o.length).collect();
    let coverage_rate = (!used.is_empty())
        .then(|| used.iter().filter(|o| o.covered).count() as f64 / used.len() as f64);
    MethodSummary {
        method,
        mae: lower_median(&mut errors),
        coverage_rate,
        coverage_deviation: coverage_rate.map(|c| 100.0 * (c - (1.0 - alpha))),
        median_length: lower_median(&mut lengths),
        abnormal_proportion: abnormal as f64 / records.len() as f64,
        replicates_used: used.len(),
    }
}

/// Runs a study; `threads = None` uses `CACE_THREADS` or the rayon default.
pub fn run_study_with(cfg: &SimConfig, threads: Option<usize>) -> Result<StudyOutput> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, 0);
    let pop = generate_population(cfg, &mut rng)?;
    let threads = threads.or_else(threads_from_env);

    let records: Vec<ReplicateRecord> = with_pool(threads, || {
        (0..cfg.reps)
            .into_par_iter()
            .map(|r| evaluate_replicate(&pop, cfg, r))
            .collect::<Result<Vec<_>>>()
    })??;

    let truth = pop.true_tau_cace;
    let methods: Vec<MethodSummary> = IntervalMethod::ALL
        .iter()
        .enumerate()
        .map(|(slot, &m)| summarize_method(m, slot, &records, truth, cfg.alpha))
        .collect();

    let n1 = cfg.n1();
    let vp = var_plus(&pop, n1);
    let vx = var_plus_given_x(&pop, n1)?;
    let len_of = |m: IntervalMethod| {
        methods
            .iter()
            .find(|s| s.method == m)
            .and_then(|s| s.median_length)
    };
    let empirical_pril = match (
        len_of(IntervalMethod::RegEhw),
        len_of(IntervalMethod::WaldDelta),
    ) {
        (Some(r), Some(w)) if w > 0.0 => Some(1.0 - r / w),
        _ => None,
    };
    let diagnostics = Diagnostics {
        true_var_tau_b: true_var_tau_b(&pop, n1),
        var_plus: vp,
        var_plus_given_x: vx,
        pril_limit: pril_limit(&pop, n1)?,
        empirical_pril,
    };

    let summary = SimulationSummary {
        config: *cfg,
        true_tau_cace: truth,
        true_p_co: pop.true_p_co,
        n_compliers: pop.n_compliers(),
        methods,
        diagnostics,
    };
    Ok(StudyOutput {
        population: pop,
        summary,
        replicates: records,
    })
}

pub fn run_study(cfg: &SimConfig) -> Result<SimulationSummary> {
    Ok(run_study_with(cfg, None)?.summary)
}

/// Monte Carlo check of the randomization variance of the adjusted-outcome
/// contrast against its exact value and against the mean of the plug-in
/// variance estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomizationCheck {
    pub exact_variance: f64,
    pub monte_carlo_variance: f64,
    pub mean_estimated_variance: f64,
    pub reps: usize,
    /// Replicates with a zero first stage, left out of the estimator mean.
    pub abnormal: usize,
}

pub fn randomization_variance_check(
    pop: &PotentialPopulation,
    n1: usize,
    reps: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<RandomizationCheck> {
    if reps < 2 {
        return Err(CaceError::InvalidConfig(
            "need at least 2 randomizations".into(),
        ));
    }
    let tau = pop.true_tau_cace;
    let n = pop.n();
    let draws: Vec<(f64, Option<f64>)> = with_pool(threads.or_else(threads_from_env), || {
        (0..reps)
            .into_par_iter()
            .map(|r| -> Result<(f64, Option<f64>)> {
                let mut rng = stream_rng(seed, r as u64 + 1);
                let z = complete_randomization(n, n1, &mut rng);
                let data = observe(pop, &z)?;
                let w = data.w_real();
                let tw = difference_in_means(&w, data.z())?;
                let ty = difference_in_means(data.y(), data.z())?;
                let est = if tw != 0.0 {
                    Some(adjusted_outcome_variance(&data, ty / tw)?)
                } else {
                    None
                };
                Ok((ty - tau * tw, est))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let tau_b: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let est: Vec<f64> = draws.iter().filter_map(|d| d.1).collect();
    Ok(RandomizationCheck {
        exact_variance: true_var_tau_b(pop, n1),
        monte_carlo_variance: finite_population_variance(&tau_b),
        mean_estimated_variance: est.iter().sum::<f64>() / est.len().max(1) as f64,
        reps,
        abnormal: reps - est.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, p_co: f64, rho: f64) -> SimConfig {
        SimConfig {
            n,
            p_co,
            rho,
            ..SimConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(200, 0.5, 0.0).validate().is_ok());
        assert!(cfg(201, 0.5, 0.0).validate().is_err());
        assert!(cfg(200, 0.5, 0.8).validate().is_err());
        assert!(cfg(200, 0.5, 0.7).validate().is_ok());
        assert!(cfg(200, 0.0, 0.0).validate().is_err());
        assert!(cfg(200, 0.001, 0.0).validate().is_err());
        assert!(SimConfig {
            reps: 0,
            ..cfg(200, 0.5, 0.0)
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            k: 0,
            ..cfg(200, 0.5, 0.0)
        }
        .validate()
        .is_err());
        assert!(cfg(10, 0.5, 0.0).validate().is_err());
    }

    #[test]
    fn calibration_hits_complier_count() {
        for (p, seed) in [(0.15, 1), (0.5, 2), (0.85, 3)] {
            let c = SimConfig {
                seed,
                ..cfg(200, p, 0.5)
            };
            let pop = generate_population(&c, &mut stream_rng(seed, 0)).unwrap();
            assert_eq!(pop.n_compliers(), c.target_compliers());
            assert_eq!(pop.true_p_co, c.target_compliers() as f64 / 200.0);
            assert!(pop.w0.iter().zip(&pop.w1).all(|(a, b)| b >= a));
            for i in 0..pop.n() {
                assert_eq!(pop.w0[i], u8::from(pop.l0[i] > 0.0));
                assert_eq!(pop.w1[i], u8::from(pop.l1[i] > 0.0));
            }
        }
    }

    #[test]
    fn cace_identity_on_generated_population() {
        let pop = generate_population(&cfg(400, 0.5, 0.0), &mut stream_rng(4, 0)).unwrap();
        let n = pop.n() as f64;
        let tau_y: f64 = (0..pop.n())
            .map(|i| pop.outcome(i, 1) - pop.outcome(i, 0))
            .sum::<f64>()
            / n;
        let tau_w: f64 = (0..pop.n())
            .map(|i| f64::from(pop.w1[i]) - f64::from(pop.w0[i]))
            .sum::<f64>()
            / n;
        assert!((tau_y / tau_w - pop.true_tau_cace).abs() < 1e-10);
    }

    #[test]
    fn error_moments_at_large_n() {
        // rho = 0: u is uncorrelated with eps0; yw0 has R^2 = 0.5 on x.
        let c = SimConfig {
            n: 100_000,
            p_co: 0.15,
            ..SimConfig::default()
        };
        let pop = generate_population(&c, &mut stream_rng(5, 0)).unwrap();
        let sx: Vec<f64> = (0..c.n)
            .map(|i| pop.x.iter().map(|col| col[i]).sum())
            .collect();
        let eps0: Vec<f64> = pop.yw0.iter().zip(&sx).map(|(y, s)| y - s).collect();
        let delta0 = -((c.p_co - 0.5) / 0.35 + 1.0) * (c.k as f64).sqrt();
        let u: Vec<f64> = pop
            .l0
            .iter()
            .zip(&sx)
            .map(|(l, s)| l - delta0 - s)
            .collect();
        let corr = crate::data::sample_covariance(&eps0, &u).unwrap()
            / (sample_variance(&eps0).unwrap() * sample_variance(&u).unwrap()).sqrt();
        assert!(corr.abs() < 0.02, "{corr}");
        let r2 = sample_variance(&sx).unwrap() / sample_variance(&pop.yw0).unwrap();
        assert!((r2 - 0.5).abs() < 0.02, "{r2}");
    }

    #[test]
    fn randomization_counts_and_determinism() {
        let z = complete_randomization(4, 2, &mut stream_rng(1, 1));
        assert_eq!(z.iter().filter(|&&v| v == 1).count(), 2);
        assert_eq!(z, complete_randomization(4, 2, &mut stream_rng(1, 1)));
    }

    #[test]
    fn randomization_is_uniform_over_subsets() {
        let mut rng = stream_rng(99, 7);
        let mut counts = std::collections::HashMap::new();
        let draws = 100_000;
        for _ in 0..draws {
            *counts
                .entry(complete_randomization(4, 2, &mut rng))
                .or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for (_, c) in counts {
            assert!((c as f64 / draws as f64 - 1.0 / 6.0).abs() < 0.02);
        }
    }

    #[test]
    fn observe_reveals_by_type() {
        let pop = PotentialPopulation::from_science_table(
            vec![],
            vec![0.0, 10.0, 20.0, 30.0],
            vec![1.0, 11.0, 21.0, 31.0],
            vec![0, 0, 1, 0],
            vec![1, 0, 1, 1],
        )
        .unwrap();
        let d = observe(&pop, &[1, 1, 0, 0]).unwrap();
        // Complier treated, never-taker treated, always-taker control, complier control.
        assert_eq!(d.w(), &[1, 0, 1, 0]);
        assert_eq!(d.y(), &[1.0, 10.0, 21.0, 30.0]);
    }

    #[test]
    fn homogeneous_population_variance() {
        // Constant effect 2 among compliers and B(1) = B(0).
        let yw0 = vec![0.5, 1.5, -0.3, 2.2, 0.9, -1.1];
        let yw1: Vec<f64> = yw0.iter().map(|v| v + 2.0).collect();
        let pop = PotentialPopulation::from_science_table(
            vec![],
            yw0,
            yw1,
            vec![0, 0, 0, 1, 0, 0],
            vec![1, 1, 0, 1, 1, 0],
        )
        .unwrap();
        let b1 = pop.adjusted_outcomes(1);
        for (a, b) in b1.iter().zip(pop.adjusted_outcomes(0)) {
            assert!((a - b).abs() < 1e-12);
        }
        let want = (1.0 / 3.0 + 1.0 / 3.0) * sample_variance(&b1).unwrap();
        assert!((true_var_tau_b(&pop, 3) - want).abs() < 1e-12);
    }

    #[test]
    fn pril_edge_cases() {
        // x orthogonal to both B(z) -> limit 0.
        let x = vec![vec![1.0, -1.0, 1.0, -1.0, 0.0, 0.0]];
        let yw0 = vec![1.0, 1.0, 2.0, 2.0, 5.0, 0.0];
        let pop = PotentialPopulation::from_science_table(
            x.clone(),
            yw0.clone(),
            yw0.iter().map(|v| v + 1.0).collect(),
            vec![0; 6],
            vec![1, 1, 1, 1, 0, 0],
        )
        .unwrap();
        assert!(pril_limit(&pop, 3).unwrap().abs() < 1e-12);

        // B(z) linear in x -> limit 1.
        let x = vec![vec![-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]];
        let yw0: Vec<f64> = x[0].iter().map(|v| 3.0 * v).collect();
        let pop = PotentialPopulation::from_science_table(
            x,
            yw0.clone(),
            yw0.iter().map(|v| v + 1.0).collect(),
            vec![0; 6],
            vec![1; 6],
        )
        .unwrap();
        assert!((pril_limit(&pop, 3).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn single_replicate_study() {
        let c = SimConfig {
            n: 100,
            p_co: 0.85,
            reps: 1,
            seed: 3,
            ..SimConfig::default()
        };
        let s = run_study(&c).unwrap();
        let cr = s.method(IntervalMethod::WaldDelta).coverage_rate.unwrap();
        assert!(cr == 0.0 || cr == 1.0);
    }

    #[test]
    fn lower_median_convention() {
        assert_eq!(lower_median(&mut [4.0, 1.0, 3.0, 2.0]), Some(2.0));
        assert_eq!(lower_median(&mut [5.0, 1.0, 3.0]), Some(3.0));
        assert_eq!(lower_median(&mut []), None);
    }

    #[test]
    fn eq4_matches_monte_carlo_variance() {
        let c = SimConfig {
            seed: 21,
            ..cfg(100, 0.5, 0.5)
        };
        let pop = generate_population(&c, &mut stream_rng(c.seed, 0)).unwrap();
        let chk = randomization_variance_check(&pop, 50, 100_000, 22, None).unwrap();
        let rel = (chk.monte_carlo_variance - chk.exact_variance).abs() / chk.exact_variance;
        assert!(rel < 0.02, "{chk:?}");
        assert!(chk.mean_estimated_variance >= chk.exact_variance);
    }
}
