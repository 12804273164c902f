//! A one-asset insurer: a constant-mix portfolio of a lognormal stock and a
//! riskless bond backs a reserve, premiums come in and compound Poisson
//! claims go out. In net-asset-value form,
//!
//! `E_t = E_{t-1} + (E_{t-1} + v)·(b(R_t - 1) + (1 - b)(e^r - 1)) - C_t + π`.
//!
//! The backtested loss is `-E_t` given `E_{t-1}`. Since `E_{t-1}` is known at
//! forecast time, that is the same exercise as backtesting `-ΔE_t`, which is
//! what the forecast laws here describe.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::math::{exp, gauss_legendre, invert_nondecreasing, log, normal_sf, sqrt};
use crate::quantile::{GridQuantile, QuantileFunction};
use crate::rng::RngStream;
use crate::sampler::{ClaimModel, ClaimSampler};

/// Smallest inner sample accepted by [`one_step_forecast`].
pub const MIN_INNER_SAMPLES: usize = 10_000;
/// Default inner sample size.
pub const DEFAULT_INNER_SAMPLES: usize = 100_000;
/// Points of the probability grid returned by [`one_step_forecast`].
pub const FORECAST_GRID_POINTS: usize = 2049;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlmParams {
    /// log-drift of the stock per period
    pub mu: f64,
    /// log-volatility of the stock per period
    pub sigma: f64,
    /// riskless log-rate per period
    pub riskless: f64,
    /// stock fraction
    pub b: f64,
    /// claim frequency
    pub lambda: f64,
    /// mean claim size
    pub theta: f64,
    pub premium: f64,
    pub reserve: f64,
    pub e0: f64,
    pub horizon: usize,
}

impl Default for AlmParams {
    /// Daily steps with a 10% yearly drift and 20% volatility, seven claims of
    /// mean 1000 a day, and premium and reserve loaded by 3%.
    fn default() -> Self {
        Self {
            mu: log(1.1) / 360.0,
            sigma: 0.2 / sqrt(360.0),
            riskless: 0.0,
            b: 0.05,
            lambda: 7.0,
            theta: 1000.0,
            premium: 7210.0,
            reserve: 2_595_600.0,
            e0: 20_000.0,
            horizon: 250,
        }
    }
}

impl AlmParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mu,
            self.sigma,
            self.riskless,
            self.b,
            self.lambda,
            self.theta,
            self.premium,
            self.reserve,
            self.e0,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("ALM parameters must be finite"));
        }
        if self.sigma <= 0.0 {
            return Err(invalid("ALM volatility must be positive"));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(invalid("ALM stock fraction must lie in [0, 1]"));
        }
        if self.lambda < 0.0 || self.theta <= 0.0 {
            return Err(invalid("ALM claims need frequency >= 0 and mean size > 0"));
        }
        Ok(())
    }

    /// Stock exposure `b(E + v)` given the current net asset value.
    pub fn exposure(&self, e_prev: f64) -> f64 {
        self.b * (e_prev + self.reserve)
    }

    /// Deterministic part of `-ΔE`: premium minus bond income.
    fn offset(&self, e_prev: f64) -> f64 {
        let bond = (1.0 - self.b) * (e_prev + self.reserve) * libm::expm1(self.riskless);
        -self.premium - bond
    }

    fn log_return_mean(&self) -> f64 {
        self.mu - 0.5 * self.sigma * self.sigma
    }

    /// The recursion step.
    pub fn step(&self, e_prev: f64, gross_return: f64, claims: f64) -> f64 {
        e_prev
            + (e_prev + self.reserve)
                * (self.b * (gross_return - 1.0) + (1.0 - self.b) * libm::expm1(self.riskless))
            - claims
            + self.premium
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmPath {
    /// `E_0 … E_n`
    pub nav: Vec<f64>,
    /// `R_1 … R_n`
    pub returns: Vec<f64>,
    /// `C_1 … C_n`
    pub claims: Vec<f64>,
}

impl AlmPath {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// `-ΔE_t` for `t = 1..=n`.
    pub fn losses(&self) -> Vec<f64> {
        self.nav.windows(2).map(|w| w[0] - w[1]).collect()
    }
}

/// Incremental path simulation, one period per call.
#[derive(Debug, Clone)]
pub struct PathStepper {
    params: AlmParams,
    claims: ClaimSampler,
    nav: f64,
}

impl PathStepper {
    pub fn new(params: &AlmParams, model: ClaimModel) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params: *params,
            claims: model.sampler(params.lambda, params.theta)?,
            nav: params.e0,
        })
    }

    pub fn nav(&self) -> f64 {
        self.nav
    }

    /// Advances one period; returns `(R_t, C_t, E_t)`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (f64, f64, f64) {
        let z: f64 = rng.sample(StandardNormal);
        let r = exp(self.params.log_return_mean() + self.params.sigma * z);
        let c = self.claims.sample(rng);
        self.nav = self.params.step(self.nav, r, c);
        (r, c, self.nav)
    }
}

pub fn simulate_path(
    params: &AlmParams,
    model: ClaimModel,
    rng: &mut RngStream,
) -> Result<AlmPath> {
    let mut stepper = PathStepper::new(params, model)?;
    let n = params.horizon;
    let mut path = AlmPath {
        nav: Vec::with_capacity(n + 1),
        returns: Vec::with_capacity(n),
        claims: Vec::with_capacity(n),
    };
    path.nav.push(params.e0);
    for _ in 0..n {
        let (r, c, e) = stepper.step(rng);
        path.returns.push(r);
        path.claims.push(c);
        path.nav.push(e);
    }
    Ok(path)
}

const QUAD_NODES: usize = 48;
/// Standard normal mass beyond this many deviations is ignored.
const Z_RANGE: f64 = 9.0;

/// Shared tables for the one-step law under the null claim model.
#[derive(Debug, Clone)]
pub struct AlmForecaster {
    params: AlmParams,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `P(N > i)` until negligible
    count_tail: Vec<f64>,
    no_claim: f64,
}

impl AlmForecaster {
    pub fn new(params: &AlmParams) -> Result<Self> {
        params.validate()?;
        let (nodes, weights) = gauss_legendre(QUAD_NODES);
        let no_claim = exp(-params.lambda);
        // pmf up past the mode until negligible, then tails summed from the top
        let mut pmf = alloc::vec![no_claim];
        let mut i = 0.0;
        while i < params.lambda || pmf[pmf.len() - 1] > 1e-20 {
            i += 1.0;
            let next = pmf[pmf.len() - 1] * params.lambda / i;
            pmf.push(next);
        }
        let mut count_tail = alloc::vec![0.0; pmf.len()];
        for j in (0..pmf.len() - 1).rev() {
            count_tail[j] = count_tail[j + 1] + pmf[j + 1];
        }
        Ok(Self {
            params: *params,
            nodes,
            weights,
            count_tail,
            no_claim,
        })
    }

    pub fn params(&self) -> &AlmParams {
        &self.params
    }

    /// Law of `-ΔE_t` given `E_{t-1} = e_prev`.
    pub fn law(&self, e_prev: f64) -> AlmOneStepLaw<'_> {
        AlmOneStepLaw {
            f: self,
            k: self.params.exposure(e_prev),
            offset: self.params.offset(e_prev),
        }
    }

    /// `P(C <= x, N >= 1)`.
    fn claims_cdf_positive(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = x / self.params.theta;
        if z > 700.0 {
            return 1.0 - self.no_claim;
        }
        // Σ_i P(N = i) P(Gamma(i, θ) > x) = e^{-z} Σ_j z^j/j! P(N > j)
        let mut term = exp(-z);
        let mut tail = 0.0;
        for (j, &pj) in self.count_tail.iter().enumerate() {
            tail += term * pj;
            term *= z / (j as f64 + 1.0);
        }
        (1.0 - self.no_claim - tail).max(0.0)
    }

    fn claims_cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.no_claim + self.claims_cdf_positive(x)
        }
    }
}

/// The one-step loss `-ΔE = C + offset - k(R - 1)`, `k = b(E_{t-1} + v)`.
///
/// The cdf is exact up to quadrature: the no-claim atom reduces to a normal
/// tail, the rest is integrated over the stock shock with Gauss-Legendre on
/// the range where claims can be positive.
#[derive(Debug, Clone, Copy)]
pub struct AlmOneStepLaw<'a> {
    f: &'a AlmForecaster,
    k: f64,
    offset: f64,
}

impl AlmOneStepLaw<'_> {
    pub fn exposure(&self) -> f64 {
        self.k
    }

    pub fn mean(&self) -> f64 {
        let p = &self.f.params;
        p.lambda * p.theta + self.offset - self.k * libm::expm1(p.mu)
    }

    pub fn sd(&self) -> f64 {
        let p = &self.f.params;
        let var_r = exp(2.0 * p.mu) * libm::expm1(p.sigma * p.sigma);
        sqrt(2.0 * p.lambda * p.theta * p.theta + self.k * self.k * var_r)
    }

    /// Claims must satisfy `C <= y - offset + k(R - 1)`. A ruined insurer
    /// (`E + v < 0`) holds a short stock position, `k < 0`.
    pub fn cdf(&self, y: f64) -> f64 {
        let f = self.f;
        let base = y - self.offset;
        if self.k == 0.0 {
            return f.claims_cdf(base);
        }
        let p = &f.params;
        let m = p.log_return_mean();
        // base + k(R - 1) >= 0 iff R >= threshold (k > 0) or R <= threshold (k < 0)
        let threshold = 1.0 - base / self.k;
        let z_at = |r: f64| {
            if r <= 0.0 {
                f64::NEG_INFINITY
            } else {
                (log(r) - m) / p.sigma
            }
        };
        let (lo, hi, atom) = if self.k > 0.0 {
            let z0 = z_at(threshold);
            (
                z0.max(-Z_RANGE),
                Z_RANGE,
                if z0.is_finite() { normal_sf(z0) } else { 1.0 },
            )
        } else {
            let z1 = z_at(threshold);
            (
                -Z_RANGE,
                z1.min(Z_RANGE),
                if z1.is_finite() { normal_sf(-z1) } else { 0.0 },
            )
        };
        let atom = f.no_claim * atom;
        if lo >= hi {
            return atom;
        }
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut cont = 0.0;
        for (&t, &w) in f.nodes.iter().zip(&f.weights) {
            let z = mid + half * t;
            let x = base + self.k * libm::expm1(m + p.sigma * z);
            cont += w * crate::math::normal_pdf(z) * f.claims_cdf_positive(x);
        }
        (atom + half * cont).clamp(0.0, 1.0)
    }

    fn bracket(&self) -> (f64, f64) {
        let (mu, sd) = (self.mean(), self.sd());
        (mu - 60.0 * sd, mu + 60.0 * sd)
    }
}

impl QuantileFunction for AlmOneStepLaw<'_> {
    fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("probability outside [0, 1]"));
        }
        if p == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if p == 1.0 {
            return Ok(f64::INFINITY);
        }
        let (lo, hi) = self.bracket();
        Ok(invert_nondecreasing(|y| self.cdf(y), p, lo, hi))
    }

    fn upper_quantile(&self, p: f64) -> Result<f64> {
        if self.k != 0.0 || p == 0.0 || p == 1.0 {
            return self.quantile(p);
        }
        // the only atom sits at `-offset`
        let (lo, hi) = self.bracket();
        let x = invert_nondecreasing(|y| if self.cdf(y) > p { 1.0 } else { 0.0 }, 1.0, lo, hi);
        Ok(x)
    }

    fn continuous_sf(&self, x: f64) -> Option<f64> {
        (self.k != 0.0).then(|| 1.0 - self.cdf(x))
    }
}

/// Empirical forecast of `-ΔE` from `inner_n` simulated steps under the null
/// claim model, tabulated at `i/2048`, `i = 0..=2048`.
pub fn one_step_forecast(
    params: &AlmParams,
    e_prev: f64,
    inner_n: usize,
    rng: &mut RngStream,
) -> Result<GridQuantile> {
    if inner_n < MIN_INNER_SAMPLES {
        return Err(Error::InsufficientInnerSamples {
            min: MIN_INNER_SAMPLES,
            got: inner_n,
        });
    }
    let mut stepper = PathStepper::new(
        &AlmParams {
            e0: e_prev,
            ..*params
        },
        ClaimModel::Null,
    )?;
    let mut sample: Vec<f64> = (0..inner_n)
        .map(|_| {
            stepper.nav = e_prev;
            let (_, _, e) = stepper.step(rng);
            e_prev - e
        })
        .collect();
    sample.sort_unstable_by(f64::total_cmp);
    let last = (FORECAST_GRID_POINTS - 1) as f64;
    let probs: Vec<f64> = (0..FORECAST_GRID_POINTS).map(|i| i as f64 / last).collect();
    let values = probs
        .iter()
        .map(|&p| {
            let h = p * (inner_n - 1) as f64;
            let i = (h as usize).min(inner_n - 2);
            let frac = h - i as f64;
            sample[i] + frac * (sample[i + 1] - sample[i])
        })
        .collect();
    GridQuantile::new(probs, values)
}
