//! Replications sharded over a rayon pool. Tallies are sums over
//! replications and each replication owns its streams, so the result does not
//! depend on the number of workers.

use anyhow::{bail, Context, Result};
use drmtest_core::backtest::{KlmPlan, StratifiedPlan};
use drmtest_core::sampler::ClaimModel;
use drmtest_core::study::{
    rows, AlmSource, LossSource, Method, RejectionGrid, RowLabels, StudyRow, Tally,
};
use drmtest_core::{RiskMeasure, TestKind};
use rayon::prelude::*;

use crate::config::StudyConfig;

/// Replications handed to a worker at a time.
const CHUNK: u64 = 32;

pub struct Harness {
    pool: rayon::ThreadPool,
}

impl Harness {
    /// `None` uses one worker per available core.
    pub fn new(workers: Option<usize>) -> Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = workers {
            if w == 0 {
                bail!("at least one worker is required");
            }
            builder = builder.num_threads(w);
        }
        Ok(Self {
            pool: builder.build().context("starting worker pool")?,
        })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Runs replications `0..reps`, `source(rep, out)` supplying `s_t`.
    pub fn run<F>(&self, grid: &RejectionGrid, reps: u64, source: F) -> Result<Tally>
    where
        F: Fn(u64, &mut Vec<f64>) -> drmtest_core::Result<()> + Sync,
    {
        let chunks = reps.div_ceil(CHUNK);
        let tallies: Vec<Tally> = self.pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .map(|c| grid.run(c * CHUNK..((c + 1) * CHUNK).min(reps), &source))
                .collect::<drmtest_core::Result<_>>()
        })?;
        let mut total = grid.tally();
        for t in &tallies {
            total.merge(t);
        }
        Ok(total)
    }
}

/// A grid column that could not be set up, e.g. a partition the mode rejects.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub measure: String,
    pub m: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyOutput {
    pub rows: Vec<StudyRow>,
    pub failures: Vec<Failure>,
}

impl StudyOutput {
    pub fn extend(&mut self, other: StudyOutput) {
        self.rows.extend(other.rows);
        self.failures.extend(other.failures);
    }

    /// The row for `(test, alternative, n, m)`, first match. `alternative`
    /// may omit the shape suffix, so `ST` finds `ST:3:1.2`.
    pub fn find(&self, test: TestKind, alternative: &str, n: usize, m: usize) -> Option<&StudyRow> {
        let matches =
            |label: &str| label == alternative || label.split(':').next() == Some(alternative);
        self.rows
            .iter()
            .find(|r| r.test == test && matches(&r.alternative) && r.n == n && r.m == m)
    }
}

fn randomized_methods(
    measure: &RiskMeasure,
    cfg: &StudyConfig,
) -> Result<(Vec<Method>, Vec<Failure>)> {
    let g = measure.distortion()?;
    let rule = cfg.partition_rule()?;
    let mode = cfg.mode()?;
    let mut methods = Vec::new();
    let mut failures = Vec::new();
    for &m in &cfg.ms {
        let plan = measure
            .partition(m, rule)
            .and_then(|p| StratifiedPlan::new(&g, p, mode));
        match plan {
            Ok(plan) => methods.push(Method::Randomized(plan)),
            Err(e) => failures.push(Failure {
                measure: measure.to_string(),
                m,
                error: e.to_string(),
            }),
        }
    }
    Ok((methods, failures))
}

fn grid(cfg: &StudyConfig, methods: Vec<Method>) -> Result<RejectionGrid> {
    Ok(
        RejectionGrid::new(&cfg.ns, methods, cfg.construction(), cfg.seed)?
            .with_streams_per_replication(cfg.streams_per_replication)?,
    )
}

fn distributional(h: &Harness, cfg: &StudyConfig, measure: &RiskMeasure) -> Result<StudyOutput> {
    let (methods, failures) = randomized_methods(measure, cfg)?;
    let mut out = StudyOutput {
        rows: Vec::new(),
        failures,
    };
    if methods.is_empty() {
        return Ok(out);
    }
    let grid = grid(cfg, methods)?;
    let name = measure.to_string();
    for alt in cfg.alternatives()? {
        let source = LossSource::new(&alt, cfg.seed);
        let alt_label = alt.to_string();
        let n = grid.max_n();
        let tally = h.run(&grid, cfg.reps, |rep, buf| source.pits(rep, n, buf))?;
        out.rows.extend(rows(
            &grid,
            &tally,
            &RowLabels {
                measure: &name,
                alternative: &alt_label,
                null: alt.is_null(),
                kappa: cfg.kappa,
                construction: cfg.construction(),
                seed: cfg.seed,
            },
        ));
    }
    Ok(out)
}

/// Size and power of the randomized backtest under i.i.d. standardized losses.
pub fn dist_study(h: &Harness, cfg: &StudyConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    distributional(h, cfg, &cfg.measure()?)
}

/// The RV@R sweep over `cfg.rvar.betas`.
pub fn rvar_study(h: &Harness, cfg: &StudyConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    let mut out = StudyOutput::default();
    for &beta in &cfg.rvar.betas {
        let measure = RiskMeasure::Rvar {
            beta,
            alpha: cfg.rvar.alpha,
        };
        measure.distortion()?;
        out.extend(distributional(h, cfg, &measure)?);
    }
    Ok(out)
}

/// Randomized and non-randomized backtests on the same losses.
#[derive(Debug, Clone, PartialEq)]
pub struct KlmComparison {
    pub randomized: StudyRow,
    pub klm: StudyRow,
}

impl KlmComparison {
    /// Power (or size) of the randomized test minus that of the baseline.
    pub fn delta(&self) -> f64 {
        self.randomized.estimate() - self.klm.estimate()
    }
}

/// AV@R randomized backtest against the multilevel VaR baseline.
pub fn klm_study(h: &Harness, cfg: &StudyConfig) -> Result<Vec<KlmComparison>> {
    cfg.validate()?;
    let measure = cfg.measure()?;
    let RiskMeasure::Avar { alpha } = measure else {
        bail!("the baseline comparison is defined for AV@R only, got {measure}");
    };
    let g = measure.distortion()?;
    let mode = cfg.mode()?;
    let mut methods = Vec::new();
    for &m in &cfg.ms {
        // the baseline's levels are jα/(m+1), so the comparison uses the same rule
        let part = drmtest_core::Partition::tail_equidistant(alpha, m)?;
        methods.push(Method::Randomized(StratifiedPlan::new(&g, part, mode)?));
        methods.push(Method::Klm(KlmPlan::new(alpha, m)?));
    }
    let grid = grid(cfg, methods)?;
    let name = measure.to_string();
    let mut out = Vec::new();
    for alt in cfg.alternatives()? {
        let source = LossSource::new(&alt, cfg.seed);
        let alt_label = alt.to_string();
        let n = grid.max_n();
        let tally = h.run(&grid, cfg.reps, |rep, buf| source.pits(rep, n, buf))?;
        let all = rows(
            &grid,
            &tally,
            &RowLabels {
                measure: &name,
                alternative: &alt_label,
                null: alt.is_null(),
                kappa: cfg.kappa,
                construction: cfg.construction(),
                seed: cfg.seed,
            },
        );
        let (rand, klm): (Vec<_>, Vec<_>) = all.into_iter().partition(|r| r.method == "randomized");
        out.extend(
            rand.into_iter()
                .zip(klm)
                .map(|(randomized, klm)| KlmComparison { randomized, klm }),
        );
    }
    Ok(out)
}

/// Backtests of the insurer's net asset value under each claim model.
pub fn alm_study(h: &Harness, cfg: &StudyConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    let measure: RiskMeasure = cfg.alm.measure.parse()?;
    let (methods, failures) = randomized_methods(&measure, cfg)?;
    let mut out = StudyOutput {
        rows: Vec::new(),
        failures,
    };
    if methods.is_empty() {
        return Ok(out);
    }
    let grid = grid(cfg, methods)?;
    let params = cfg.alm.params();
    let forecast = cfg.alm.forecast_method()?;
    let name = measure.to_string();
    for model in cfg.alm.claim_models()? {
        let source = AlmSource::new(&params, model, forecast, cfg.seed)?;
        let n = grid.max_n();
        let tally = h.run(&grid, cfg.reps, |rep, buf| source.pits(rep, n, buf))?;
        out.rows.extend(rows(
            &grid,
            &tally,
            &RowLabels {
                measure: &name,
                alternative: model.name(),
                null: model == ClaimModel::Null,
                kappa: cfg.kappa,
                construction: cfg.construction(),
                seed: cfg.seed,
            },
        ));
    }
    Ok(out)
}
