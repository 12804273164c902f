//! Quantile functions of forecast and loss laws.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::{
    adaptive_simpson, normal_pdf, normal_quantile, normal_sf, student_t_pdf, student_t_quantile,
    student_t_sf,
};
use crate::skewt::SkewedTParams;

/// Tail cutoff for numerical quantile integration.
pub const TAIL_EPS: f64 = 1e-10;
/// Absolute tolerance of adaptive Simpson quadrature.
pub const QUAD_TOL: f64 = 1e-9;

/// A monotone map `p -> x` exposing both quantile conventions.
pub trait QuantileFunction {
    /// Lower quantile `q(p) = inf{x : F(x) >= p}`.
    fn quantile(&self, p: f64) -> Result<f64>;

    /// Upper quantile `q⁺(p) = sup{x : F(x) <= p}`.
    fn upper_quantile(&self, p: f64) -> Result<f64> {
        self.quantile(p)
    }

    /// `P(X > x)` when the cdf is continuous and strictly increasing on the
    /// support. Such laws have `q = q⁺`, and an exception `x > q(1 - G)` is
    /// the same event as `G > P(X > x)`.
    fn continuous_sf(&self, _x: f64) -> Option<f64> {
        None
    }

    /// `∫_{p1}^{p2} q(p) dp`.
    ///
    /// The default integrates numerically over `[p1, p2] ∩ [ε, 1 - ε]`.
    fn quantile_integral(&self, p1: f64, p2: f64) -> Result<f64> {
        let lo = p1.max(TAIL_EPS);
        let hi = p2.min(1.0 - TAIL_EPS);
        if hi <= lo {
            return Ok(0.0);
        }
        let f = |p: f64| self.quantile(p).unwrap_or(f64::NAN);
        let value = adaptive_simpson(&f, lo, hi, QUAD_TOL, 40);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::DivergedIntegral(format!(
                "quantile integral over [{p1}, {p2}] is not finite"
            )))
        }
    }
}

fn check_unit(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("probability {p} outside [0, 1]")))
    }
}

fn diverged(p1: f64, p2: f64) -> Error {
    Error::DivergedIntegral(format!("quantile integral over [{p1}, {p2}] diverges"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    pub mean: f64,
    pub sd: f64,
}

impl Normal {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(invalid(format!(
                "normal needs finite mean and sd > 0, got ({mean}, {sd})"
            )));
        }
        Ok(Self { mean, sd })
    }

    pub const fn standard() -> Self {
        Self { mean: 0.0, sd: 1.0 }
    }
}

impl QuantileFunction for Normal {
    fn quantile(&self, p: f64) -> Result<f64> {
        check_unit(p)?;
        Ok(self.mean + self.sd * normal_quantile(p))
    }

    fn continuous_sf(&self, x: f64) -> Option<f64> {
        Some(normal_sf((x - self.mean) / self.sd))
    }

    fn quantile_integral(&self, p1: f64, p2: f64) -> Result<f64> {
        check_unit(p1)?;
        check_unit(p2)?;
        let density = |p: f64| {
            let z = normal_quantile(p);
            if z.is_finite() {
                normal_pdf(z)
            } else {
                0.0
            }
        };
        Ok(self.mean * (p2 - p1) + self.sd * (density(p1) - density(p2)))
    }
}

/// `E[T; a < T < b]` for a standard Student-t law with `nu > 1`.
pub(crate) fn student_t_partial_expectation(a: f64, b: f64, nu: f64) -> f64 {
    let term = |s: f64| {
        if s.is_finite() {
            (nu + s * s) * student_t_pdf(s, nu)
        } else {
            0.0
        }
    };
    (term(a) - term(b)) / (nu - 1.0)
}

/// Location-scale Student-t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentT {
    pub nu: f64,
    pub loc: f64,
    pub scale: f64,
}

impl StudentT {
    pub fn new(nu: f64, loc: f64, scale: f64) -> Result<Self> {
        if !(nu > 0.0 && scale > 0.0 && loc.is_finite() && scale.is_finite()) {
            return Err(invalid(format!(
                "student-t needs nu > 0 and scale > 0, got nu = {nu}, scale = {scale}"
            )));
        }
        Ok(Self { nu, loc, scale })
    }
}

impl QuantileFunction for StudentT {
    fn quantile(&self, p: f64) -> Result<f64> {
        check_unit(p)?;
        Ok(self.loc + self.scale * student_t_quantile(p, self.nu))
    }

    fn continuous_sf(&self, x: f64) -> Option<f64> {
        Some(student_t_sf((x - self.loc) / self.scale, self.nu))
    }

    fn quantile_integral(&self, p1: f64, p2: f64) -> Result<f64> {
        check_unit(p1)?;
        check_unit(p2)?;
        if p2 <= p1 {
            return Ok(0.0);
        }
        if self.nu <= 1.0 && (p1 == 0.0 || p2 == 1.0) {
            return Err(diverged(p1, p2));
        }
        if self.nu <= 1.0 {
            let f = |p: f64| student_t_quantile(p, self.nu);
            let v = adaptive_simpson(&f, p1, p2, QUAD_TOL, 40);
            return Ok(self.loc * (p2 - p1) + self.scale * v);
        }
        let a = student_t_quantile(p1, self.nu);
        let b = student_t_quantile(p2, self.nu);
        Ok(self.loc * (p2 - p1) + self.scale * student_t_partial_expectation(a, b, self.nu))
    }
}

/// Location-scale skewed Student-t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewedT {
    pub shape: SkewedTParams,
    pub loc: f64,
    pub scale: f64,
}

impl SkewedT {
    pub fn new(shape: SkewedTParams, loc: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && loc.is_finite()) {
            return Err(invalid(format!("skewed-t needs scale > 0, got {scale}")));
        }
        Ok(Self { shape, loc, scale })
    }

    /// The skewed-t shifted and scaled to mean 0 and variance 1.
    pub fn standardized(shape: SkewedTParams) -> Result<Self> {
        let (mean, var) = shape.moments()?;
        let sd = libm::sqrt(var);
        Ok(Self {
            shape,
            loc: -mean / sd,
            scale: 1.0 / sd,
        })
    }
}

impl QuantileFunction for SkewedT {
    fn quantile(&self, p: f64) -> Result<f64> {
        check_unit(p)?;
        Ok(self.loc + self.scale * self.shape.quantile(p))
    }

    fn continuous_sf(&self, x: f64) -> Option<f64> {
        Some(self.shape.sf((x - self.loc) / self.scale))
    }

    fn quantile_integral(&self, p1: f64, p2: f64) -> Result<f64> {
        check_unit(p1)?;
        check_unit(p2)?;
        if p2 <= p1 {
            return Ok(0.0);
        }
        if self.shape.nu <= 1.0 && (p1 == 0.0 || p2 == 1.0) {
            return Err(diverged(p1, p2));
        }
        let a = self.shape.quantile(p1);
        let b = self.shape.quantile(p2);
        let pe = if self.shape.nu > 1.0 {
            self.shape.partial_expectation(a, b)
        } else {
            let f = |p: f64| self.shape.quantile(p);
            adaptive_simpson(&f, p1, p2, QUAD_TOL, 40)
        };
        Ok(self.loc * (p2 - p1) + self.scale * pe)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    pub lo: f64,
    pub hi: f64,
}

impl Uniform {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(invalid(format!("uniform needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }
}

impl QuantileFunction for Uniform {
    fn quantile(&self, p: f64) -> Result<f64> {
        check_unit(p)?;
        Ok(self.lo + (self.hi - self.lo) * p)
    }

    fn continuous_sf(&self, x: f64) -> Option<f64> {
        Some(((self.hi - x) / (self.hi - self.lo)).clamp(0.0, 1.0))
    }

    fn quantile_integral(&self, p1: f64, p2: f64) -> Result<f64> {
        check_unit(p1)?;
        check_unit(p2)?;
        Ok((p2 - p1) * (self.lo + 0.5 * (self.hi - self.lo) * (p1 + p2)))
    }
}

/// Quantiles tabulated at increasing probabilities, interpolated linearly.
/// Probabilities outside the tabulated range are an error.
#[derive(Debug, Clone, PartialEq)]
pub struct GridQuantile {
    p: Vec<f64>,
    q: Vec<f64>,
    atomless: bool,
}

impl GridQuantile {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::LengthMismatch {
                what: "grid probabilities and quantiles",
                left: p.len(),
                right: q.len(),
            });
        }
        if p.len() < 2 {
            return Err(invalid("a quantile grid needs at least two points"));
        }
        if p.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(invalid("quantile grid contains non-finite values"));
        }
        if p[0] < 0.0 || p[p.len() - 1] > 1.0 || p.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(
                "grid probabilities must increase strictly within [0, 1]",
            ));
        }
        if q.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("grid quantiles must be nondecreasing"));
        }
        let atomless = p[0] == 0.0 && p[p.len() - 1] == 1.0 && q.windows(2).all(|w| w[0] < w[1]);
        Ok(Self { p, q, atomless })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    fn segment(&self, p: f64) -> Result<usize> {
        if p < self.p[0] || p > self.p[self.p.len() - 1] {
            return Err(Error::OutsideGrid(p));
        }
        let i = self.p.partition_point(|&x| x <= p);
        Ok(i.clamp(1, self.p.len() - 1) - 1)
    }

    fn interpolate(&self, i: usize, p: f64) -> f64 {
        let (p0, p1) = (self.p[i], self.p[i + 1]);
        let (q0, q1) = (self.q[i], self.q[i + 1]);
        q0 + (q1 - q0) * (p - p0) / (p1 - p0)
    }
}

impl QuantileFunction for GridQuantile {
    fn quantile(&self, p: f64) -> Result<f64> {
        let i = self.segment(p)?;
        Ok(self.interpolate(i, p))
    }

    /// Available when the grid covers `[0, 1]` with strictly increasing
    /// values, so the interpolated law has no atoms.
    fn continuous_sf(&self, x: f64) -> Option<f64> {
        if !self.atomless {
            return None;
        }
        let last = self.p.len() - 1;
        if x <= self.q[0] {
            return Some(1.0);
        }
        if x >= self.q[last] {
            return Some(0.0);
        }
        let i = self.q.partition_point(|&v| v <= x) - 1;
        let (q0, q1) = (self.q[i], self.q[i + 1]);
        let cdf = self.p[i] + (self.p[i + 1] - self.p[i]) * (x - q0) / (q1 - q0);
        Some(1.0 - cdf)
    }

    fn quantile_integral(&self, p1: f64, p2: f64) -> Result<f64> {
        if p2 <= p1 {
            return Ok(0.0);
        }
        let first = self.segment(p1)?;
        let last = self.segment(p2)?;
        let mut total = 0.0;
        for i in first..=last {
            let a = p1.max(self.p[i]);
            let b = p2.min(self.p[i + 1]);
            if b > a {
                total += 0.5 * (b - a) * (self.interpolate(i, a) + self.interpolate(i, b));
            }
        }
        Ok(total)
    }
}

/// The forecast families accepted in files.
#[derive(Debug, Clone, PartialEq)]
pub enum Forecast {
    Normal(Normal),
    StudentT(StudentT),
    SkewedT(SkewedT),
    Grid(GridQuantile),
}

impl QuantileFunction for Forecast {
    fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            Self::Normal(d) => d.quantile(p),
            Self::StudentT(d) => d.quantile(p),
            Self::SkewedT(d) => d.quantile(p),
            Self::Grid(d) => d.quantile(p),
        }
    }

    fn upper_quantile(&self, p: f64) -> Result<f64> {
        match self {
            Self::Normal(d) => d.upper_quantile(p),
            Self::StudentT(d) => d.upper_quantile(p),
            Self::SkewedT(d) => d.upper_quantile(p),
            Self::Grid(d) => d.upper_quantile(p),
        }
    }

    fn continuous_sf(&self, x: f64) -> Option<f64> {
        match self {
            Self::Normal(d) => d.continuous_sf(x),
            Self::StudentT(d) => d.continuous_sf(x),
            Self::SkewedT(d) => d.continuous_sf(x),
            Self::Grid(d) => d.continuous_sf(x),
        }
    }

    fn quantile_integral(&self, p1: f64, p2: f64) -> Result<f64> {
        match self {
            Self::Normal(d) => d.quantile_integral(p1, p2),
            Self::StudentT(d) => d.quantile_integral(p1, p2),
            Self::SkewedT(d) => d.quantile_integral(p1, p2),
            Self::Grid(d) => d.quantile_integral(p1, p2),
        }
    }
}

impl<Q: QuantileFunction + ?Sized> QuantileFunction for &Q {
    fn quantile(&self, p: f64) -> Result<f64> {
        (**self).quantile(p)
    }

    fn upper_quantile(&self, p: f64) -> Result<f64> {
        (**self).upper_quantile(p)
    }

    fn continuous_sf(&self, x: f64) -> Option<f64> {
        (**self).continuous_sf(x)
    }

    fn quantile_integral(&self, p1: f64, p2: f64) -> Result<f64> {
        (**self).quantile_integral(p1, p2)
    }
}
