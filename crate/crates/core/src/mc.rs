//! Monte-Carlo permutation engine: single tests, the min-p combined test,
//! and covariate screening with multiplicity correction.
//!
//! The null hypothesis (outcome independent of the covariate) is sampled by
//! evaluating every statistic on M uniformly random permutations of the
//! outcomes; the observed value is computed on the true covariate ordering
//! and ranked against them. All statistics share the same M permutations,
//! which is what makes the min-p combined test valid: the joint null
//! distribution of the statistic vector is sampled, the combined statistic is
//! the smallest per-statistic p, and its own null distribution comes from
//! re-ranking each permutation's statistics within the same matrix.
//!
//! Determinism: permutation k draws from a ChaCha8 stream selected by
//! (seed, k), so results are bit-identical regardless of how the permutation
//! loop is scheduled across threads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumproc::sort_permutation;
use crate::error::{Error, Result};
use crate::preprocess::ModifiedOutcome;
use crate::stats::{MolinKernel, StatisticKind};

/// Identifier of the permutation RNG scheme, embedded in every report so
/// result provenance survives library upgrades.
pub const RNG_ALGORITHM: &str = "chacha8-stream-v1";

/// How the observed statistic is ranked against the permutation sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComparisonMode {
    /// p = #{S > V} / M. Can return 0 for extreme observations.
    Strict,
    /// p = (1 + #{S >= V}) / (M + 1). Never 0, convenient under Bonferroni.
    AddOneSmoothing,
}

/// Monte-Carlo configuration shared by the single and combined tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    /// Number of Monte-Carlo permutations (at least 100).
    pub m: usize,
    pub seed: u64,
    /// Statistics evaluated by [`run_combined_test`] and
    /// [`screen_covariates`]; the single test takes its statistic explicitly.
    pub statistics: Vec<StatisticKind>,
    pub comparison: ComparisonMode,
    /// Fit MoLin with an intercept (the modified outcome has nonzero mean in
    /// finite samples); disable for the regression-through-origin variant.
    pub molin_intercept: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            m: 10_000,
            seed: 0,
            statistics: default_combined_statistics().to_vec(),
            comparison: ComparisonMode::Strict,
            molin_intercept: true,
        }
    }
}

/// Default statistic set for the combined test.
pub fn default_combined_statistics() -> [StatisticKind; 5] {
    [
        StatisticKind::MaxB,
        StatisticKind::MaxBN,
        StatisticKind::MaxBE,
        StatisticKind::MaxBEN,
        StatisticKind::SAreaB,
    ]
}

/// Per-statistic block of a [`TestReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatReport {
    pub statistic: StatisticKind,
    /// Observed value on the true covariate ordering.
    pub value: f64,
    pub p_value: f64,
    /// Bonferroni-corrected p (set by screening).
    pub p_corrected: Option<f64>,
    /// Null-sample summary over the M permutations.
    pub null_mean: f64,
    pub null_sd: f64,
    pub null_q95: f64,
    /// Outcome was constant (or covariate constant for MoLin); p forced to 1.
    pub degenerate: bool,
}

/// Result of testing one covariate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub covariate: String,
    pub n: usize,
    pub stats: Vec<StatReport>,
    /// Observed min-p statistic V of the combined test (when run).
    pub combined_v: Option<f64>,
    pub combined_p: Option<f64>,
    pub combined_p_corrected: Option<f64>,
    pub m: usize,
    pub seed: u64,
    pub rng_algorithm: String,
    pub comparison: ComparisonMode,
    /// Count of tied covariate values in the tested column.
    pub tie_groups: usize,
    /// Significance flag set by screening at its configured threshold.
    pub significant: Option<bool>,
}

impl TestReport {
    /// The p-value a screening decision is based on: the combined p when the
    /// combined test ran, otherwise the (single) statistic's p.
    pub fn decision_p(&self) -> f64 {
        self.combined_p
            .unwrap_or_else(|| self.stats.first().map(|s| s.p_value).unwrap_or(1.0))
    }

    pub fn decision_p_corrected(&self) -> Option<f64> {
        self.combined_p_corrected
            .or_else(|| self.stats.first().and_then(|s| s.p_corrected))
    }
}

fn validate(cfg: &McConfig, n_stats: usize) -> Result<()> {
    if cfg.m < 100 {
        return Err(Error::Invalid(format!(
            "MC simulation count must be at least 100, got {}",
            cfg.m
        )));
    }
    if n_stats == 0 {
        return Err(Error::Invalid("statistic list is empty".into()));
    }
    Ok(())
}

struct Scratch {
    indices: Vec<usize>,
    y_perm: Vec<f64>,
    path: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            y_perm: vec![0.0; n],
            path: vec![0.0; n],
        }
    }
}

fn cumsum_into(y: &[f64], path: &mut [f64]) {
    let mut acc = 0.0;
    for (p, &v) in path.iter_mut().zip(y) {
        acc += v;
        *p = acc;
    }
}

/// The statistic matrix S[l][k] over shared permutations, plus observed values.
struct Engine<'a> {
    stats: &'a [StatisticKind],
    y: &'a [f64],
    y_observed_order: Vec<f64>,
    scale: f64,
    molin: Option<MolinKernel>,
}

impl<'a> Engine<'a> {
    fn new(
        outcome: &'a ModifiedOutcome,
        x: &[f64],
        stats: &'a [StatisticKind],
        cfg: &McConfig,
    ) -> Result<(Self, usize)> {
        let y = &outcome.y;
        if y.len() != x.len() {
            return Err(Error::LengthMismatch {
                left: y.len(),
                right: x.len(),
            });
        }
        if y.len() < 4 {
            return Err(Error::Invalid(
                "tests require at least 4 patients".into(),
            ));
        }
        for stat in stats {
            if stat.requires_centered_outcome() && !outcome.centered {
                return Err(Error::Invalid(format!(
                    "{} requires a centered outcome (the ring construction \
                     needs a bridge); build the outcome with per-treatment centering",
                    stat.name()
                )));
            }
        }
        let s = sort_permutation(x)?;
        let x_sorted: Vec<f64> = s.order().iter().map(|&i| x[i]).collect();
        let y_observed_order: Vec<f64> = s.order().iter().map(|&i| y[i]).collect();
        let sigma2 = crate::preprocess::sample_variance(y);
        let scale = (y.len() as f64 * sigma2).sqrt();
        let molin = if stats.contains(&StatisticKind::MoLin) {
            Some(MolinKernel::new(&x_sorted, y, cfg.molin_intercept))
        } else {
            None
        };
        Ok((
            Self {
                stats,
                y,
                y_observed_order,
                scale,
                molin,
            },
            s.tie_groups(),
        ))
    }

    fn eval_all(&self, y_ordered: &[f64], path: &[f64], out: &mut Vec<f64>) {
        for stat in self.stats {
            let v = match stat {
                StatisticKind::MoLin => self
                    .molin
                    .as_ref()
                    .expect("kernel built when MoLin requested")
                    .t_stat(y_ordered),
                path_stat => path_stat.eval_path(path, self.scale),
            };
            out.push(v);
        }
    }

    fn observed(&self) -> Vec<f64> {
        let mut path = vec![0.0; self.y.len()];
        cumsum_into(&self.y_observed_order, &mut path);
        let mut out = Vec::with_capacity(self.stats.len());
        self.eval_all(&self.y_observed_order, &path, &mut out);
        out
    }

    /// S as column-major: matrix[l][k] = statistic l on permutation k.
    fn null_matrix(&self, cfg: &McConfig) -> Vec<Vec<f64>> {
        let n = self.y.len();
        let l_count = self.stats.len();
        let rows: Vec<Vec<f64>> = (0..cfg.m)
            .into_par_iter()
            .with_min_len(64)
            .map_init(
                || Scratch::new(n),
                |scratch, k| {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(k as u64 + 1);
                    for (i, slot) in scratch.indices.iter_mut().enumerate() {
                        *slot = i;
                    }
                    scratch.indices.shuffle(&mut rng);
                    for (dst, &i) in scratch.y_perm.iter_mut().zip(&scratch.indices) {
                        *dst = self.y[i];
                    }
                    cumsum_into(&scratch.y_perm, &mut scratch.path);
                    let mut out = Vec::with_capacity(l_count);
                    self.eval_all(&scratch.y_perm, &scratch.path, &mut out);
                    out
                },
            )
            .collect();

        let mut matrix = vec![Vec::with_capacity(cfg.m); l_count];
        for row in rows {
            for (l, v) in row.into_iter().enumerate() {
                matrix[l].push(v);
            }
        }
        matrix
    }
}

fn p_value(null: &[f64], observed: f64, mode: ComparisonMode) -> f64 {
    let m = null.len() as f64;
    match mode {
        ComparisonMode::Strict => null.iter().filter(|&&s| s > observed).count() as f64 / m,
        ComparisonMode::AddOneSmoothing => {
            (1 + null.iter().filter(|&&s| s >= observed).count()) as f64 / (m + 1.0)
        }
    }
}

fn null_summary(null: &[f64]) -> (f64, f64, f64) {
    let m = null.len();
    let mean = null.iter().sum::<f64>() / m as f64;
    let var = null.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let mut sorted = null.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((0.95 * m as f64).ceil() as usize).clamp(1, m) - 1;
    (mean, var.sqrt(), sorted[idx])
}

// #{s in sorted | s > v}
fn count_greater(sorted: &[f64], v: f64) -> usize {
    sorted.len() - sorted.partition_point(|x| *x <= v)
}

fn degenerate_report(
    covariate: &str,
    n: usize,
    stats: &[StatisticKind],
    cfg: &McConfig,
    tie_groups: usize,
    combined: bool,
) -> TestReport {
    TestReport {
        covariate: covariate.to_string(),
        n,
        stats: stats
            .iter()
            .map(|&statistic| StatReport {
                statistic,
                value: 0.0,
                p_value: 1.0,
                p_corrected: None,
                null_mean: 0.0,
                null_sd: 0.0,
                null_q95: 0.0,
                degenerate: true,
            })
            .collect(),
        combined_v: combined.then_some(1.0),
        combined_p: combined.then_some(1.0),
        combined_p_corrected: None,
        m: cfg.m,
        seed: cfg.seed,
        rng_algorithm: RNG_ALGORITHM.into(),
        comparison: cfg.comparison,
        tie_groups,
        significant: None,
    }
}

/// Evaluate a statistic list on one covariate with shared permutations,
/// optionally aggregating a subset of them into the min-p combined test.
///
/// `combine_over` must be a subset of `stats`; the combined test reuses the
/// same statistic matrix, which is what Alg.-2-style aggregation requires.
pub fn run_suite(
    outcome: &ModifiedOutcome,
    x: &[f64],
    covariate: &str,
    stats: &[StatisticKind],
    combine_over: Option<&[StatisticKind]>,
    cfg: &McConfig,
) -> Result<TestReport> {
    let combine_idx: Option<Vec<usize>> = match combine_over {
        None => None,
        Some(subset) => {
            if subset.len() < 2 {
                return Err(Error::Invalid(
                    "the combined test needs at least two statistics".into(),
                ));
            }
            let mut idx = Vec::with_capacity(subset.len());
            for s in subset {
                let pos = stats.iter().position(|k| k == s).ok_or_else(|| {
                    Error::Invalid(format!(
                        "combined statistic {} is not in the evaluated list",
                        s.name()
                    ))
                })?;
                idx.push(pos);
            }
            Some(idx)
        }
    };
    run_tests(outcome, x, covariate, stats, cfg, combine_idx)
}

fn run_tests(
    outcome: &ModifiedOutcome,
    x: &[f64],
    covariate: &str,
    stats: &[StatisticKind],
    cfg: &McConfig,
    combine_idx: Option<Vec<usize>>,
) -> Result<TestReport> {
    validate(cfg, stats.len())?;
    let combine = combine_idx.is_some();
    let (engine, tie_groups) = Engine::new(outcome, x, stats, cfg)?;

    // degenerate outcome: every permutation gives the same path statistics
    let degenerate_outcome = engine.scale <= 0.0;
    let covariate_constant = x.iter().all(|&v| v == x[0]);
    let molin_only = stats.len() == 1 && stats[0] == StatisticKind::MoLin;
    if degenerate_outcome || (covariate_constant && molin_only) {
        return Ok(degenerate_report(
            covariate,
            outcome.y.len(),
            stats,
            cfg,
            tie_groups,
            combine,
        ));
    }

    let observed = engine.observed();
    let matrix = engine.null_matrix(cfg);

    let mut stat_reports = Vec::with_capacity(stats.len());
    for (l, &statistic) in stats.iter().enumerate() {
        let degenerate = statistic == StatisticKind::MoLin && covariate_constant;
        let (null_mean, null_sd, null_q95) = null_summary(&matrix[l]);
        stat_reports.push(StatReport {
            statistic,
            value: observed[l],
            p_value: if degenerate {
                1.0
            } else {
                p_value(&matrix[l], observed[l], cfg.comparison)
            },
            p_corrected: None,
            null_mean,
            null_sd,
            null_q95,
            degenerate,
        });
    }

    let (combined_v, combined_p) = if let Some(idx) = combine_idx {
        let sub_matrix: Vec<&[f64]> = idx.iter().map(|&l| matrix[l].as_slice()).collect();
        let sub_observed: Vec<f64> = idx.iter().map(|&l| observed[l]).collect();
        let (v, p) = combined_min_p(&sub_matrix, &sub_observed, cfg);
        (Some(v), Some(p))
    } else {
        (None, None)
    };

    Ok(TestReport {
        covariate: covariate.to_string(),
        n: outcome.y.len(),
        stats: stat_reports,
        combined_v,
        combined_p,
        combined_p_corrected: None,
        m: cfg.m,
        seed: cfg.seed,
        rng_algorithm: RNG_ALGORITHM.into(),
        comparison: cfg.comparison,
        tie_groups,
        significant: None,
    })
}

/// The min-p combined statistic and its p-value from a shared matrix.
///
/// P[k] = min over l of the fraction of permutations beating permutation k on
/// statistic l; V is the same functional of the observed vector. Small values
/// are extreme, so the combined p is the fraction of permutation min-p values
/// at or below V. (The per-sample fractions follow the pseudocode literally,
/// including the self-comparison, which strict `>` excludes; the final
/// comparison direction makes small p extreme so the test calibrates.)
///
/// Granularity: an extreme observation has V = 0, tied by every permutation
/// that is the argmax of some statistic, so the smallest achievable combined
/// p is roughly (number of distinct argmax permutations) / M — about L/M.
/// Size M accordingly when p-values face a multiplicity correction.
fn combined_min_p(matrix: &[&[f64]], observed: &[f64], cfg: &McConfig) -> (f64, f64) {
    let m = matrix[0].len();
    let mf = m as f64;
    let sorted: Vec<Vec<f64>> = matrix
        .iter()
        .map(|col| {
            let mut s = col.to_vec();
            s.sort_by(f64::total_cmp);
            s
        })
        .collect();

    let min_p_of = |values: &dyn Fn(usize) -> f64| -> f64 {
        let mut best = f64::INFINITY;
        for (l, sorted_col) in sorted.iter().enumerate() {
            let p = count_greater(sorted_col, values(l)) as f64 / mf;
            best = best.min(p);
        }
        best
    };

    let v = min_p_of(&|l| observed[l]);
    let mut count_le = 0usize;
    for k in 0..m {
        let pk = min_p_of(&|l| matrix[l][k]);
        if pk <= v {
            count_le += 1;
        }
    }
    // With min-p, small values are extreme, so "as extreme or more" is <=;
    // ties are counted (the min-p scale is discrete, dropping them would be
    // anti-conservative).
    let p = match cfg.comparison {
        ComparisonMode::Strict => count_le as f64 / mf,
        ComparisonMode::AddOneSmoothing => (1 + count_le) as f64 / (mf + 1.0),
    };
    (v, p)
}

/// Single cumulative test of one covariate (or the MoLin regression when
/// `stat` is MoLin): observed statistic on the true ordering, null sample on
/// M random permutations.
pub fn run_single_test(
    outcome: &ModifiedOutcome,
    x: &[f64],
    covariate: &str,
    stat: StatisticKind,
    cfg: &McConfig,
) -> Result<TestReport> {
    run_tests(outcome, x, covariate, &[stat], cfg, None)
}

/// Min-p combined test over `cfg.statistics` (at least two).
pub fn run_combined_test(
    outcome: &ModifiedOutcome,
    x: &[f64],
    covariate: &str,
    cfg: &McConfig,
) -> Result<TestReport> {
    let stats = cfg.statistics.clone();
    run_suite(outcome, x, covariate, &stats, Some(&stats), cfg)
}

/// Multiplicity correction for screening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Correction {
    None,
    Bonferroni,
}

fn correct(p: f64, d: usize, correction: Correction) -> f64 {
    match correction {
        Correction::None => p,
        Correction::Bonferroni => (p * d as f64).min(1.0),
    }
}

/// Test every covariate of a dataset against the same outcome.
///
/// Runs the combined test when `cfg.statistics` has two or more entries,
/// otherwise the single test. Bonferroni multiplies every p-value by the
/// number of covariates (clamped to 1); the significance flag uses the
/// corrected decision p at `alpha`.
pub fn screen_covariates(
    dataset: &crate::data::TrialDataset,
    outcome: &ModifiedOutcome,
    cfg: &McConfig,
    correction: Correction,
    alpha: f64,
) -> Result<Vec<TestReport>> {
    screen_covariates_with(dataset, outcome, cfg, correction, alpha, cfg.statistics.len() >= 2)
}

/// [`screen_covariates`] with an explicit choice of whether to aggregate the
/// statistics into the combined test (per-statistic p-values are reported
/// either way).
pub fn screen_covariates_with(
    dataset: &crate::data::TrialDataset,
    outcome: &ModifiedOutcome,
    cfg: &McConfig,
    correction: Correction,
    alpha: f64,
    combine: bool,
) -> Result<Vec<TestReport>> {
    validate(cfg, cfg.statistics.len())?;
    let d = dataset.n_covariates();
    if d == 0 {
        return Err(Error::Invalid("dataset has no covariates".into()));
    }
    if combine && cfg.statistics.len() < 2 {
        return Err(Error::Invalid(
            "the combined test needs at least two statistics".into(),
        ));
    }
    let mut reports = Vec::with_capacity(d);
    for j in 0..d {
        let combine_idx = combine.then(|| (0..cfg.statistics.len()).collect::<Vec<_>>());
        let mut report = run_tests(
            outcome,
            dataset.covariate(j),
            &dataset.covariate_names()[j],
            &cfg.statistics,
            cfg,
            combine_idx,
        )?;
        for s in &mut report.stats {
            s.p_corrected = Some(correct(s.p_value, d, correction));
        }
        report.combined_p_corrected = report.combined_p.map(|p| correct(p, d, correction));
        let decision = report
            .decision_p_corrected()
            .unwrap_or_else(|| report.decision_p());
        report.significant = Some(decision < alpha);
        reports.push(report);
    }
    Ok(reports)
}

/// Pointwise permutation envelope of the normalized cumulative curve,
/// for plot exports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveEnvelope {
    pub covariate: String,
    /// i/N grid.
    pub t: Vec<f64>,
    /// Observed normalized path on the true ordering.
    pub observed: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Permutations actually used (capped for memory).
    pub m_used: usize,
}

/// Build the observed curve plus a pointwise [lo_q, hi_q] permutation band.
/// Uses at most `max_m` of the configured permutations.
pub fn curve_envelope(
    outcome: &ModifiedOutcome,
    x: &[f64],
    covariate: &str,
    cfg: &McConfig,
    lo_q: f64,
    hi_q: f64,
    max_m: usize,
) -> Result<CurveEnvelope> {
    validate(cfg, 1)?;
    let (engine, _ties) = Engine::new(outcome, x, &[StatisticKind::MaxB], cfg)?;
    let n = outcome.y.len();
    let m_used = cfg.m.min(max_m).max(100);
    let scale = if engine.scale > 0.0 { engine.scale } else { 1.0 };

    let mut observed = vec![0.0; n];
    cumsum_into(&engine.y_observed_order, &mut observed);
    for v in &mut observed {
        *v /= scale;
    }

    // column-major collection of normalized permutation paths
    let paths: Vec<Vec<f64>> = (0..m_used)
        .into_par_iter()
        .with_min_len(64)
        .map_init(
            || Scratch::new(n),
            |scratch, k| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(k as u64 + 1);
                for (i, slot) in scratch.indices.iter_mut().enumerate() {
                    *slot = i;
                }
                scratch.indices.shuffle(&mut rng);
                for (dst, &i) in scratch.y_perm.iter_mut().zip(&scratch.indices) {
                    *dst = outcome.y[i];
                }
                cumsum_into(&scratch.y_perm, &mut scratch.path);
                scratch.path.iter().map(|v| v / scale).collect::<Vec<f64>>()
            },
        )
        .collect();

    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut column = vec![0.0; m_used];
    for i in 0..n {
        for (k, path) in paths.iter().enumerate() {
            column[k] = path[i];
        }
        column.sort_by(f64::total_cmp);
        let pick = |q: f64| {
            let idx = ((q * m_used as f64).ceil() as usize).clamp(1, m_used) - 1;
            column[idx]
        };
        lower.push(pick(lo_q));
        upper.push(pick(hi_q));
    }

    Ok(CurveEnvelope {
        covariate: covariate.to_string(),
        t: (1..=n).map(|i| i as f64 / n as f64).collect(),
        observed,
        lower,
        upper,
        m_used,
    })
}

/// Serialize reports as pretty JSON (deterministic field order).
pub fn reports_to_json(reports: &[TestReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

/// Flat CSV: one row per covariate x statistic, plus a `Comb` row per
/// covariate when the combined test ran. Numbers match the JSON output.
pub fn reports_to_csv(reports: &[TestReport]) -> String {
    let mut out = String::from(
        "covariate,statistic,value,p_value,p_corrected,null_mean,null_sd,null_q95,degenerate,tie_groups,m,seed\n",
    );
    use std::fmt::Write as _;
    let opt = |v: Option<f64>| v.map(|p| p.to_string()).unwrap_or_default();
    for r in reports {
        for s in &r.stats {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.covariate,
                s.statistic.name(),
                s.value,
                s.p_value,
                opt(s.p_corrected),
                s.null_mean,
                s.null_sd,
                s.null_q95,
                s.degenerate,
                r.tie_groups,
                r.m,
                r.seed
            );
        }
        if let (Some(v), Some(p)) = (r.combined_v, r.combined_p) {
            let _ = writeln!(
                out,
                "{},Comb,{},{},{},,,,false,{},{},{}",
                r.covariate,
                v,
                p,
                opt(r.combined_p_corrected),
                r.tie_groups,
                r.m,
                r.seed
            );
        }
    }
    out
}
