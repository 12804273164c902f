//! The stratified randomized backtest and the non-randomized baseline.
//!
//! Each `(t, j)` draws its level `G_{t,j}` and label from its own stream
//! `t·(m+1) + j`. When the forecast has a continuous cdf, the exception
//! `L_t > q(1 - G)` is decided as `G > s_t` with `s_t = P(M_t > L_t)`; only the
//! stratum containing `s_t` then needs a draw, and because streams are per
//! stratum the outcome is identical to drawing every stratum.

use alloc::vec::Vec;

use crate::distortion::DistortionFunction;
use crate::error::{Error, Result};
use crate::glaw::{ComponentLabel, GLaw};
use crate::multinomial::{TestPlan, TestResult};
use crate::partition::{
    cell_probabilities, CellProbabilities, Closure, Mode, Partition, Provenance,
};
use crate::quantile::QuantileFunction;
use crate::rng::{Purpose, StreamFamily, DEFAULT_STREAMS_PER_REPLICATION};

/// Where the randomization of one backtest comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeding {
    pub seed: u64,
    pub replication: u64,
    pub streams_per_replication: u64,
}

impl Seeding {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            replication: 0,
            streams_per_replication: DEFAULT_STREAMS_PER_REPLICATION,
        }
    }

    pub fn replication(self, replication: u64) -> Self {
        Self {
            replication,
            ..self
        }
    }

    pub fn streams_per_replication(self, n: u64) -> Self {
        Self {
            streams_per_replication: n,
            ..self
        }
    }

    /// The family the stratum draws come from.
    pub fn strata(&self) -> StreamFamily {
        StreamFamily::new(self.seed, Purpose::Stratum).with_stride(self.streams_per_replication)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Stratum {
    a: f64,
    b: f64,
    v_lo: f64,
    v_hi: f64,
}

/// A distortion, partition and mode checked against each other, with the
/// null cell probabilities precomputed.
#[derive(Debug, Clone)]
pub struct StratifiedPlan {
    law: GLaw,
    partition: Partition,
    mode: Mode,
    closure: Closure,
    strata: Vec<Stratum>,
    cells: CellProbabilities,
}

impl StratifiedPlan {
    pub fn new(g: &DistortionFunction, partition: Partition, mode: Mode) -> Result<Self> {
        let mode = mode.resolve(g);
        let cells = cell_probabilities(g, &partition, mode)?;
        let law = GLaw::new(g);
        let closure = mode.closure();
        let strata = partition
            .strata()
            .map(|(a, b)| {
                let (v_lo, v_hi) = law.stratum_bounds(a, b, closure);
                Stratum { a, b, v_lo, v_hi }
            })
            .collect();
        Ok(Self {
            law,
            partition,
            mode,
            closure,
            strata,
            cells,
        })
    }

    pub fn m(&self) -> usize {
        self.partition.m()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn cells(&self) -> &CellProbabilities {
        &self.cells
    }

    pub fn law(&self) -> &GLaw {
        &self.law
    }

    fn stream_index(&self, t: u64, j: usize) -> u64 {
        t * self.strata.len() as u64 + j as u64
    }

    /// `(G_{t,j}, C_{t,j})`.
    pub fn draw(
        &self,
        fam: &StreamFamily,
        replication: u64,
        t: u64,
        j: usize,
    ) -> (f64, ComponentLabel) {
        let s = &self.strata[j];
        let w = fam.stream(replication, self.stream_index(t, j)).uniform();
        self.law
            .conditional_in(s.a, s.b, s.v_lo, s.v_hi, self.closure, w)
    }

    /// Exception indicator of stratum `j` for any forecast law.
    pub fn indicator<Q: QuantileFunction + ?Sized>(
        &self,
        loss: f64,
        q: &Q,
        fam: &StreamFamily,
        replication: u64,
        t: u64,
        j: usize,
    ) -> Result<bool> {
        let (g, label) = self.draw(fam, replication, t, j);
        let threshold = match label {
            ComponentLabel::R => q.upper_quantile(1.0 - g)?,
            _ => q.quantile(1.0 - g)?,
        };
        Ok(loss > threshold)
    }

    /// Per-stratum indicators from `s = P(M > L)` under a continuous forecast.
    pub fn indicators_from_sf(
        &self,
        s: f64,
        fam: &StreamFamily,
        replication: u64,
        t: u64,
        out: &mut [bool],
    ) {
        for (j, st) in self.strata.iter().enumerate() {
            out[j] = match self.closure {
                Closure::LeftClosed if st.a > s => true,
                Closure::RightClosed if st.a >= s => true,
                _ if st.b <= s => false,
                _ => self.draw(fam, replication, t, j).0 > s,
            };
        }
    }

    /// `X_t` from `s = P(M > L)`, drawing only the straddling stratum.
    pub fn breaches_from_sf(&self, s: f64, fam: &StreamFamily, replication: u64, t: u64) -> usize {
        let sure = match self.closure {
            Closure::LeftClosed => self.strata.partition_point(|st| st.a <= s),
            Closure::RightClosed => self.strata.partition_point(|st| st.a < s),
        };
        let above = self.strata.len() - sure;
        if sure == 0 {
            return above;
        }
        let j = sure - 1;
        if self.strata[j].b <= s {
            return above;
        }
        above + usize::from(self.draw(fam, replication, t, j).0 > s)
    }
}

/// Result of one backtest.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRun {
    strata: usize,
    indicators: Vec<bool>,
    pub breached: Vec<usize>,
    pub counts: Vec<u64>,
    pub null: CellProbabilities,
    /// Pearson, Nass, LRT
    pub tests: [TestResult; 3],
    pub kappa: f64,
    pub seeding: Seeding,
}

impl BacktestRun {
    /// `𝟙_{t,j}` for `t` in `0..n`, `j` in `0..=m`.
    pub fn indicator(&self, t: usize, j: usize) -> bool {
        self.indicators[t * self.strata + j]
    }

    pub fn indicator_row(&self, t: usize) -> &[bool] {
        &self.indicators[t * self.strata..(t + 1) * self.strata]
    }

    pub fn n(&self) -> usize {
        self.breached.len()
    }
}

fn check_lengths(losses: usize, forecasts: usize) -> Result<()> {
    if losses != forecasts {
        return Err(Error::LengthMismatch {
            what: "losses and forecasts",
            left: losses,
            right: forecasts,
        });
    }
    if losses == 0 {
        return Err(Error::InvalidConfiguration("empty loss series".into()));
    }
    Ok(())
}

fn finish(
    strata: usize,
    indicators: Vec<bool>,
    null: CellProbabilities,
    kappa: f64,
    seeding: Seeding,
) -> Result<BacktestRun> {
    let n = indicators.len() / strata;
    let breached: Vec<usize> = indicators
        .chunks_exact(strata)
        .map(|row| row.iter().filter(|&&b| b).count())
        .collect();
    let mut counts = alloc::vec![0u64; strata + 1];
    for &x in &breached {
        counts[x] += 1;
    }
    let tests = TestPlan::new(&null.p, n as u64, kappa)?.results(&counts)?;
    Ok(BacktestRun {
        strata,
        indicators,
        breached,
        counts,
        null,
        tests,
        kappa,
        seeding,
    })
}

/// Randomized stratified backtest of `losses` against per-period forecasts.
pub fn run_backtest<Q: QuantileFunction>(
    losses: &[f64],
    forecasts: &[Q],
    plan: &StratifiedPlan,
    kappa: f64,
    seeding: &Seeding,
) -> Result<BacktestRun> {
    check_lengths(losses.len(), forecasts.len())?;
    let strata = plan.m() + 1;
    let needed = (losses.len() * strata) as u64;
    if needed > seeding.streams_per_replication {
        return Err(Error::InvalidConfiguration(alloc::format!(
            "{needed} stratum draws exceed {} streams per replication",
            seeding.streams_per_replication
        )));
    }
    let fam = seeding.strata();
    let replication = seeding.replication;
    let mut indicators = alloc::vec![false; losses.len() * strata];
    for (t, (&loss, q)) in losses.iter().zip(forecasts).enumerate() {
        let row = &mut indicators[t * strata..(t + 1) * strata];
        match q.continuous_sf(loss) {
            Some(s) => plan.indicators_from_sf(s, &fam, replication, t as u64, row),
            None => {
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = plan.indicator(loss, q, &fam, replication, t as u64, j)?;
                }
            }
        }
    }
    finish(strata, indicators, plan.cells().clone(), kappa, *seeding)
}

/// Levels `α_j = jα/(m+1)`, `j = 1..=m+1`, and their null cells.
#[derive(Debug, Clone, PartialEq)]
pub struct KlmPlan {
    levels: Vec<f64>,
    cells: CellProbabilities,
}

impl KlmPlan {
    pub fn new(alpha: f64, m: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(crate::error::invalid("alpha must lie in (0, 1)"));
        }
        let levels: Vec<f64> = (1..=m + 1)
            .map(|j| j as f64 * alpha / (m as f64 + 1.0))
            .collect();
        // P(X >= k) = α_{m+2-k}
        let s = levels.len();
        let exceed = |k: usize| {
            if k == 0 {
                1.0
            } else if k > s {
                0.0
            } else {
                levels[s - k]
            }
        };
        let p = (0..=s).map(|k| exceed(k) - exceed(k + 1)).collect();
        Ok(Self {
            levels,
            cells: CellProbabilities {
                p,
                provenance: Provenance::ClosedForm,
                ill_conditioned: false,
                se: None,
            },
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn cells(&self) -> &CellProbabilities {
        &self.cells
    }

    /// `X_t` from `s = P(M > L)` under a continuous forecast.
    pub fn breaches_from_sf(&self, s: f64) -> usize {
        self.levels.len() - self.levels.partition_point(|&a| a <= s)
    }
}

/// Non-randomized multilevel VaR backtest.
pub fn klm_baseline<Q: QuantileFunction>(
    losses: &[f64],
    forecasts: &[Q],
    alpha: f64,
    m: usize,
    kappa: f64,
) -> Result<BacktestRun> {
    check_lengths(losses.len(), forecasts.len())?;
    let plan = KlmPlan::new(alpha, m)?;
    let strata = m + 1;
    let mut indicators = Vec::with_capacity(losses.len() * strata);
    for (&loss, q) in losses.iter().zip(forecasts) {
        for &a in plan.levels() {
            indicators.push(loss > q.quantile(1.0 - a)?);
        }
    }
    finish(
        strata,
        indicators,
        plan.cells.clone(),
        kappa,
        Seeding::new(0),
    )
}
