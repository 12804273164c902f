//! The skewed Student-t family with density
//! `f(x) = 2 / (γ + 1/γ) · (t_ν(x/γ) 1{x ≥ 0} + t_ν(γx) 1{x < 0})`.

use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StudentT};

use crate::error::{invalid, Error, Result};
use crate::math::{
    exp, lgamma, log, log1p, pow, sqrt, student_t_cdf, student_t_quantile, student_t_sf,
};
use crate::quantile::student_t_partial_expectation;

/// Proposals allowed before the acceptance-rejection sampler gives up.
pub const MAX_PROPOSALS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewedTParams {
    pub nu: f64,
    pub gamma: f64,
}

impl SkewedTParams {
    pub fn new(nu: f64, gamma: f64) -> Result<Self> {
        if !(nu > 0.0 && gamma > 0.0 && nu.is_finite() && gamma.is_finite()) {
            return Err(invalid(alloc::format!(
                "skewed-t needs nu > 0 and gamma > 0, got nu = {nu}, gamma = {gamma}"
            )));
        }
        Ok(Self { nu, gamma })
    }

    fn norm(&self) -> f64 {
        2.0 / (self.gamma + 1.0 / self.gamma)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let y = if x >= 0.0 {
            x / self.gamma
        } else {
            x * self.gamma
        };
        self.norm() * crate::math::student_t_pdf(y, self.nu)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let g2 = self.gamma * self.gamma;
        if x < 0.0 {
            2.0 / (1.0 + g2) * student_t_cdf(self.gamma * x, self.nu)
        } else {
            1.0 - self.sf(x)
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        let g2 = self.gamma * self.gamma;
        if x >= 0.0 {
            2.0 * g2 / (1.0 + g2) * student_t_sf(x / self.gamma, self.nu)
        } else {
            1.0 - self.cdf(x)
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let g2 = self.gamma * self.gamma;
        let p0 = 1.0 / (1.0 + g2);
        if p < p0 {
            student_t_quantile(0.5 * p * (1.0 + g2), self.nu) / self.gamma
        } else {
            -self.gamma * student_t_quantile((1.0 - p) * (1.0 + g2) / (2.0 * g2), self.nu)
        }
    }

    /// `E[|T|]` of the underlying symmetric Student-t.
    fn abs_mean(&self) -> f64 {
        let nu = self.nu;
        2.0 * nu / ((nu - 1.0) * sqrt(PI * nu)) * exp(lgamma(0.5 * (nu + 1.0)) - lgamma(0.5 * nu))
    }

    pub fn mean(&self) -> Result<f64> {
        if self.nu <= 1.0 {
            return Err(Error::UndefinedMean(self.nu));
        }
        Ok((self.gamma - 1.0 / self.gamma) * self.abs_mean())
    }

    /// `(mean, variance)`.
    pub fn moments(&self) -> Result<(f64, f64)> {
        if self.nu <= 2.0 {
            return Err(Error::UndefinedVariance(self.nu));
        }
        let mean = self.mean()?;
        let g = self.gamma;
        let second = self.nu / (self.nu - 2.0) * (g * g * g + 1.0 / (g * g * g)) / (g + 1.0 / g);
        Ok((mean, second - mean * mean))
    }

    /// `E[X; a < X < b]`, requires `nu > 1`.
    pub fn partial_expectation(&self, a: f64, b: f64) -> f64 {
        let g = self.gamma;
        let mut total = 0.0;
        if a < 0.0 {
            let hi = b.min(0.0);
            total += self.norm() / (g * g) * student_t_partial_expectation(g * a, g * hi, self.nu);
        }
        if b > 0.0 {
            let lo = a.max(0.0);
            total += self.norm() * g * g * student_t_partial_expectation(lo / g, b / g, self.nu);
        }
        total
    }

    /// Envelope constant for a `t_ν` proposal when `γ ≥ 1`.
    pub fn envelope_constant(&self) -> f64 {
        let g = self.gamma.max(1.0 / self.gamma);
        0.5 * (g + 1.0 / g) * pow(g, self.nu + 1.0)
    }

    /// Acceptance-rejection with a `t_ν` proposal.
    ///
    /// For `γ < 1` the envelope `(γ + 1/γ)/2` does not dominate the left
    /// tail, so the sampler draws from `γ' = 1/γ` and reflects: `X` has
    /// shape `γ` exactly when `-X` has shape `1/γ`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let t =
            StudentT::new(self.nu).map_err(|_| invalid("degrees of freedom must be positive"))?;
        self.sample_with(&t, rng)
    }

    /// As [`Self::sample`], reusing a prepared proposal law.
    pub fn sample_with<R: Rng + ?Sized>(
        &self,
        proposal: &StudentT<f64>,
        rng: &mut R,
    ) -> Result<f64> {
        let (g, sign) = if self.gamma >= 1.0 {
            (self.gamma, 1.0)
        } else {
            (1.0 / self.gamma, -1.0)
        };
        let half_exp = 0.5 * (self.nu + 1.0);
        let ln_accept_max = log(2.0 / (g + 1.0 / g)) - log(self.envelope_constant());
        for _ in 0..MAX_PROPOSALS {
            let x: f64 = proposal.sample(rng);
            let y = if x >= 0.0 { x / g } else { x * g };
            let ln_ratio =
                ln_accept_max - half_exp * (log1p(y * y / self.nu) - log1p(x * x / self.nu));
            let u: f64 = rng.random();
            if u == 0.0 || log(u) <= ln_ratio {
                return Ok(sign * x);
            }
        }
        Err(Error::SamplerStuck(MAX_PROPOSALS))
    }
}
