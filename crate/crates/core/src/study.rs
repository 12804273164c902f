//! Monte Carlo size and power studies.
//!
//! A replication turns a loss series into probability integral transforms
//! `s_t = P(M_t > L_t)` under the forecast, then feeds the same `s_t` to every
//! backtest method in a [`RejectionGrid`]. Horizons `n` share one series, the
//! shorter ones being prefixes, and every method sees the same losses.
//! Replication `r` reads only streams indexed by `r`, so tallies merged over
//! any sharding of replications are identical.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::alm::{one_step_forecast, AlmForecaster, AlmParams, PathStepper};
use crate::backtest::{KlmPlan, StratifiedPlan};
use crate::error::{invalid, Error, Result};
use crate::math::{normal_sf, sqrt};
use crate::multinomial::{TestKind, TestPlan};
use crate::quantile::QuantileFunction;
use crate::rng::{Purpose, StreamFamily};
use crate::sampler::{Alternative, AlternativeSampler, ClaimModel};

/// Replications used by the reference tables.
pub const DEFAULT_REPLICATIONS: u64 = 20_000;

/// A backtest reduced to "how many levels does `s` breach".
#[derive(Debug, Clone)]
pub enum Method {
    Randomized(StratifiedPlan),
    Klm(KlmPlan),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Randomized(_) => "randomized",
            Self::Klm(_) => "klm",
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Self::Randomized(p) => p.m(),
            Self::Klm(p) => p.levels().len() - 1,
        }
    }

    pub fn cells(&self) -> &[f64] {
        match self {
            Self::Randomized(p) => &p.cells().p,
            Self::Klm(p) => &p.cells().p,
        }
    }

    #[inline]
    fn breaches(&self, s: f64, fam: &StreamFamily, rep: u64, t: u64) -> usize {
        match self {
            Self::Randomized(p) => p.breaches_from_sf(s, fam, rep, t),
            Self::Klm(p) => p.breaches_from_sf(s),
        }
    }
}

/// Methods crossed with horizons, with test thresholds precomputed.
#[derive(Debug, Clone)]
pub struct RejectionGrid {
    ns: Vec<usize>,
    methods: Vec<Method>,
    /// `[method * ns.len() + horizon]`
    plans: Vec<TestPlan>,
    strata: StreamFamily,
}

impl RejectionGrid {
    /// `construction` is the level the rejection thresholds are built for.
    pub fn new(ns: &[usize], methods: Vec<Method>, construction: f64, seed: u64) -> Result<Self> {
        let mut ns = ns.to_vec();
        ns.sort_unstable();
        ns.dedup();
        if ns.is_empty() || ns[0] == 0 {
            return Err(Error::InvalidConfiguration(
                "horizons must be positive and non-empty".into(),
            ));
        }
        if methods.is_empty() {
            return Err(Error::InvalidConfiguration("no backtest methods".into()));
        }
        let mut plans = Vec::with_capacity(ns.len() * methods.len());
        for method in &methods {
            for &n in &ns {
                plans.push(TestPlan::new(method.cells(), n as u64, construction)?);
            }
        }
        Ok(Self {
            ns,
            methods,
            plans,
            strata: StreamFamily::new(seed, Purpose::Stratum),
        })
    }

    pub fn with_streams_per_replication(mut self, n: u64) -> Result<Self> {
        let needed = self
            .methods
            .iter()
            .map(|m| ((m.m() + 1) * self.max_n()) as u64)
            .max()
            .unwrap_or(0);
        if needed > n {
            return Err(Error::InvalidConfiguration(alloc::format!(
                "{needed} stratum draws exceed {n} streams per replication"
            )));
        }
        self.strata = self.strata.with_stride(n);
        Ok(self)
    }

    /// Sorted, deduplicated horizons.
    pub fn ns(&self) -> &[usize] {
        &self.ns
    }

    pub fn methods(&self) -> &[Method] {
        &self.methods
    }

    pub fn max_n(&self) -> usize {
        self.ns[self.ns.len() - 1]
    }

    pub fn tally(&self) -> Tally {
        Tally {
            horizons: self.ns.len(),
            rejections: alloc::vec![[0; 3]; self.plans.len()],
            reps: 0,
        }
    }

    /// Adds one replication, given `s_t` for `t < max_n`.
    pub fn replicate(&self, pits: &[f64], rep: u64, tally: &mut Tally) {
        debug_assert!(pits.len() >= self.max_n());
        for (mi, method) in self.methods.iter().enumerate() {
            let mut counts = alloc::vec![0u64; method.m() + 2];
            let mut next = 0;
            for (t, &s) in pits[..self.max_n()].iter().enumerate() {
                counts[method.breaches(s, &self.strata, rep, t as u64)] += 1;
                if t + 1 == self.ns[next] {
                    let idx = mi * self.ns.len() + next;
                    let rejects = self.plans[idx].rejects(&counts);
                    for (acc, r) in tally.rejections[idx].iter_mut().zip(rejects) {
                        *acc += u64::from(r);
                    }
                    next += 1;
                }
            }
        }
        tally.reps += 1;
    }

    /// Runs `reps` sequentially, with `source(rep, out)` filling `s_t`.
    pub fn run<F>(&self, reps: Range<u64>, mut source: F) -> Result<Tally>
    where
        F: FnMut(u64, &mut Vec<f64>) -> Result<()>,
    {
        let mut tally = self.tally();
        let mut pits = Vec::with_capacity(self.max_n());
        for rep in reps {
            source(rep, &mut pits)?;
            self.replicate(&pits, rep, &mut tally);
        }
        Ok(tally)
    }
}

/// Rejection counts per `(method, horizon, test)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    horizons: usize,
    rejections: Vec<[u64; 3]>,
    reps: u64,
}

impl Tally {
    pub fn merge(&mut self, other: &Tally) {
        assert_eq!(
            self.rejections.len(),
            other.rejections.len(),
            "tallies of different grids"
        );
        for (a, b) in self.rejections.iter_mut().zip(&other.rejections) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
        self.reps += other.reps;
    }

    pub fn reps(&self) -> u64 {
        self.reps
    }

    /// In [`TestKind::ALL`] order.
    pub fn rejections(&self, method: usize, horizon: usize) -> [u64; 3] {
        self.rejections[method * self.horizons + horizon]
    }
}

fn alternative_salt(alt: &Alternative) -> u64 {
    match alt {
        Alternative::Normal => 0,
        Alternative::T3 => 1,
        Alternative::T5 => 2,
        Alternative::SkewedT { shape, .. } => {
            3 ^ shape.nu.to_bits().rotate_left(7) ^ shape.gamma.to_bits().rotate_left(29)
        }
    }
}

/// i.i.d. standardized losses forecast by `N(0, 1)`.
#[derive(Debug, Clone)]
pub struct LossSource {
    sampler: AlternativeSampler,
    fam: StreamFamily,
}

impl LossSource {
    pub fn new(alt: &Alternative, seed: u64) -> Self {
        Self {
            sampler: alt.sampler(),
            fam: StreamFamily::salted(seed, Purpose::Loss, alternative_salt(alt)),
        }
    }

    pub fn losses(&self, rep: u64, n: usize, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        let mut rng = self.fam.stream(rep, 0);
        for _ in 0..n {
            out.push(self.sampler.sample(&mut rng)?);
        }
        Ok(())
    }

    pub fn pits(&self, rep: u64, n: usize, out: &mut Vec<f64>) -> Result<()> {
        self.losses(rep, n, out)?;
        for x in out.iter_mut() {
            *x = normal_sf(*x);
        }
        Ok(())
    }
}

/// How the ALM forecast of each step is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlmForecastMethod {
    /// exact no-claim atom plus quadrature over the stock shock
    SemiAnalytic,
    /// empirical quantiles of `inner_n` simulated steps
    InnerMc { inner_n: usize },
}

/// Net-asset-value paths under a claim model, forecast under the null model.
#[derive(Debug, Clone)]
pub struct AlmSource {
    params: AlmParams,
    model: ClaimModel,
    forecaster: AlmForecaster,
    method: AlmForecastMethod,
    paths: StreamFamily,
    inner: StreamFamily,
}

impl AlmSource {
    pub fn new(
        params: &AlmParams,
        model: ClaimModel,
        method: AlmForecastMethod,
        seed: u64,
    ) -> Result<Self> {
        if params.b <= 0.0 {
            return Err(invalid("the ALM study needs a stock fraction b > 0"));
        }
        let salt = match model {
            ClaimModel::Null => 0,
            ClaimModel::NegativeBinomial { .. } => 1,
            ClaimModel::Pareto => 2,
            ClaimModel::LogNormal { .. } => 3,
        };
        Ok(Self {
            params: *params,
            model,
            forecaster: AlmForecaster::new(params)?,
            method,
            paths: StreamFamily::salted(seed, Purpose::Path, salt),
            inner: StreamFamily::salted(seed, Purpose::Inner, salt),
        })
    }

    pub fn pits(&self, rep: u64, n: usize, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        let mut stepper = PathStepper::new(&self.params, self.model)?;
        let mut rng = self.paths.stream(rep, 0);
        for t in 0..n {
            let e_prev = stepper.nav();
            let (_, _, e) = stepper.step(&mut rng);
            let loss = e_prev - e;
            let s = match self.method {
                AlmForecastMethod::SemiAnalytic => self.forecaster.law(e_prev).continuous_sf(loss),
                AlmForecastMethod::InnerMc { inner_n } => {
                    let mut inner = self.inner.stream(rep, t as u64);
                    one_step_forecast(&self.params, e_prev, inner_n, &mut inner)?
                        .continuous_sf(loss)
                }
            };
            out.push(s.ok_or_else(|| invalid("ALM forecast has atoms"))?);
        }
        Ok(())
    }
}

/// Colour classes of the reference tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    DarkGreen,
    LightGreen,
    Green,
    None,
    LightRed,
    Red,
    DarkRed,
}

impl Band {
    /// Size as a multiple of the nominal level.
    pub fn for_size_ratio(ratio: f64) -> Self {
        if (0.9..=1.1).contains(&ratio) {
            Self::DarkGreen
        } else if (0.8..=1.2).contains(&ratio) {
            Self::LightGreen
        } else if ratio > 2.0 {
            Self::DarkRed
        } else if ratio > 1.5 {
            Self::Red
        } else {
            Self::None
        }
    }

    /// Power in percent.
    pub fn for_power(percent: f64) -> Self {
        if percent >= 70.0 {
            Self::Green
        } else if percent <= 10.0 {
            Self::DarkRed
        } else if percent <= 30.0 {
            Self::LightRed
        } else {
            Self::None
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::DarkGreen => "dark-green",
            Self::LightGreen => "light-green",
            Self::Green => "green",
            Self::None => "none",
            Self::LightRed => "light-red",
            Self::Red => "red",
            Self::DarkRed => "dark-red",
        }
    }
}

impl core::fmt::Display for Band {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// One estimated rejection rate.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub measure: String,
    pub method: &'static str,
    pub test: TestKind,
    pub alternative: String,
    /// whether the losses follow the forecast, making this a size estimate
    pub null: bool,
    pub n: usize,
    pub m: usize,
    pub reps: u64,
    pub rejections: u64,
    /// nominal level sizes are compared against
    pub kappa: f64,
    /// level the thresholds were built for
    pub construction: f64,
    pub seed: u64,
}

impl StudyRow {
    pub fn estimate(&self) -> f64 {
        self.rejections as f64 / self.reps as f64
    }

    /// Binomial standard error of [`Self::estimate`].
    pub fn se(&self) -> f64 {
        let p = self.estimate();
        sqrt(p * (1.0 - p) / self.reps as f64)
    }

    pub fn size_ratio(&self) -> Option<f64> {
        self.null.then(|| self.estimate() / self.kappa)
    }

    pub fn band(&self) -> Band {
        match self.size_ratio() {
            Some(r) => Band::for_size_ratio(r),
            None => Band::for_power(100.0 * self.estimate()),
        }
    }
}

/// Labels attached to the rows of one tally.
#[derive(Debug, Clone, PartialEq)]
pub struct RowLabels<'a> {
    pub measure: &'a str,
    pub alternative: &'a str,
    pub null: bool,
    pub kappa: f64,
    pub construction: f64,
    pub seed: u64,
}

/// Flattens a tally into rows ordered by method, horizon, then test.
pub fn rows(grid: &RejectionGrid, tally: &Tally, labels: &RowLabels<'_>) -> Vec<StudyRow> {
    let mut out = Vec::new();
    for (mi, method) in grid.methods().iter().enumerate() {
        for (ni, &n) in grid.ns().iter().enumerate() {
            let rej = tally.rejections(mi, ni);
            for (k, test) in TestKind::ALL.into_iter().enumerate() {
                out.push(StudyRow {
                    measure: labels.measure.into(),
                    method: method.name(),
                    test,
                    alternative: labels.alternative.into(),
                    null: labels.null,
                    n,
                    m: method.m(),
                    reps: tally.reps(),
                    rejections: rej[k],
                    kappa: labels.kappa,
                    construction: labels.construction,
                    seed: labels.seed,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::{run_backtest, Seeding};
    use crate::distortion::DistortionFunction;
    use crate::partition::{Mode, Partition};
    use crate::quantile::Normal;

    fn avar_method(m: usize) -> Method {
        let g = DistortionFunction::avar(0.025).unwrap();
        Method::Randomized(
            StratifiedPlan::new(
                &g,
                Partition::tail_equidistant(0.025, m).unwrap(),
                Mode::Auto,
            )
            .unwrap(),
        )
    }

    #[test]
    fn grid_agrees_with_run_backtest() {
        let seed = 41;
        let grid =
            RejectionGrid::new(&[300, 100], alloc::vec![avar_method(4)], 0.05, seed).unwrap();
        let source = LossSource::new(&Alternative::T3, seed);
        let mut losses = Vec::new();
        let mut pits = Vec::new();
        for rep in 0..30 {
            source.losses(rep, 300, &mut losses).unwrap();
            source.pits(rep, 300, &mut pits).unwrap();
            let mut tally = grid.tally();
            grid.replicate(&pits, rep, &mut tally);
            let Method::Randomized(plan) = &grid.methods()[0] else {
                unreachable!()
            };
            for (ni, &n) in grid.ns().iter().enumerate() {
                let fc = alloc::vec![Normal::standard(); n];
                let run = run_backtest(
                    &losses[..n],
                    &fc,
                    plan,
                    0.05,
                    &Seeding::new(seed).replication(rep),
                )
                .unwrap();
                let expected: [u64; 3] = core::array::from_fn(|k| u64::from(run.tests[k].reject));
                assert_eq!(tally.rejections(0, ni), expected, "rep {rep}, n {n}");
            }
        }
    }

    #[test]
    fn sharding_does_not_matter() {
        let grid = RejectionGrid::new(
            &[250],
            alloc::vec![avar_method(2), Method::Klm(KlmPlan::new(0.025, 2).unwrap())],
            0.05,
            3,
        )
        .unwrap();
        let source = LossSource::new(&Alternative::T5, 3);
        let f = |rep, out: &mut Vec<f64>| source.pits(rep, 250, out);
        let whole = grid.run(0..40, f).unwrap();
        let mut parts = grid.run(25..40, f).unwrap();
        parts.merge(&grid.run(0..25, f).unwrap());
        assert_eq!(whole, parts);
        assert_eq!(whole.reps(), 40);
    }

    #[test]
    fn bands() {
        assert_eq!(Band::for_size_ratio(0.99), Band::DarkGreen);
        assert_eq!(Band::for_size_ratio(1.19), Band::LightGreen);
        assert_eq!(Band::for_size_ratio(1.3), Band::None);
        assert_eq!(Band::for_size_ratio(1.53), Band::Red);
        assert_eq!(Band::for_size_ratio(2.5), Band::DarkRed);
        assert_eq!(Band::for_power(97.6), Band::Green);
        assert_eq!(Band::for_power(25.0), Band::LightRed);
        assert_eq!(Band::for_power(0.1), Band::DarkRed);
        assert_eq!(Band::for_power(53.1), Band::None);
    }

    #[test]
    fn row_statistics() {
        let row = StudyRow {
            measure: "avar:0.025".into(),
            method: "randomized",
            test: TestKind::Nass,
            alternative: "N".into(),
            null: true,
            n: 2000,
            m: 4,
            reps: 20_000,
            rejections: 990,
            kappa: 0.05,
            construction: 0.05,
            seed: 1,
        };
        assert!((row.estimate() - 0.0495).abs() < 1e-15);
        assert!((row.se() - sqrt(0.0495 * 0.9505 / 20_000.0)).abs() < 1e-15);
        assert!((row.size_ratio().unwrap() - 0.99).abs() < 1e-12);
        assert_eq!(row.band(), Band::DarkGreen);
    }

    #[test]
    fn alm_source_produces_probabilities() {
        let params = AlmParams::default();
        let src = AlmSource::new(
            &params,
            ClaimModel::Null,
            AlmForecastMethod::SemiAnalytic,
            5,
        )
        .unwrap();
        let mut pits = Vec::new();
        src.pits(0, 200, &mut pits).unwrap();
        assert_eq!(pits.len(), 200);
        assert!(pits.iter().all(|s| (0.0..=1.0).contains(s)));
        let mean = pits.iter().sum::<f64>() / 200.0;
        assert!((mean - 0.5).abs() < 4.0 * sqrt(1.0 / 12.0 / 200.0));
        assert!(AlmSource::new(
            &AlmParams { b: 0.0, ..params },
            ClaimModel::Null,
            AlmForecastMethod::SemiAnalytic,
            5
        )
        .is_err());
    }
}
